//! D2Q9 lattice constants and Hermite polynomial tensors.
//!
//! Direction ordering used throughout the crate:
//! ```text
//!   6   2   5
//!    \  |  /
//!   3 - 0 - 1
//!    /  |  \
//!   7   4   8
//! ```
//! i.e. rest, then the axis directions +x, +y, -x, -y, then the diagonals
//! (+x,+y), (-x,+y), (-x,-y), (+x,-y). Velocities are stored in physical
//! units, `e_i = c * offset_i` with `c = dx / dt`.

use crate::error::{LbmError, Result};

pub const Q: usize = 9;

/// Integer lattice offsets of each direction.
pub const OFFSETS: [[i32; 2]; Q] = [
    [0, 0],
    [1, 0],
    [0, 1],
    [-1, 0],
    [0, -1],
    [1, 1],
    [-1, 1],
    [-1, -1],
    [1, -1],
];

pub const WEIGHTS: [f64; Q] = [
    4.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

pub const OPPOSITE: [usize; Q] = [0, 3, 4, 1, 2, 7, 8, 5, 6];

/// Hermite tensors of one direction, expanded to full index form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteSet {
    pub h0: f64,
    pub h1: [f64; 2],
    pub h2: [[f64; 2]; 2],
    pub h3: [[[f64; 2]; 2]; 2],
}

/// Immutable D2Q9 constants for a given `(dx, dt)` pair.
///
/// Second- and third-order tensors are stored flattened by symmetry:
/// `h2[i] = [xx, xy, yy]`, `h3[i] = [xxx, xxy, xyy, yyy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeD2Q9 {
    pub dx: f64,
    pub dt: f64,
    pub c: f64,
    pub cs2: f64,
    pub e: [[f64; 2]; Q],
    pub w: [f64; Q],
    pub opposite: [usize; Q],
    pub h2: [[f64; 3]; Q],
    pub h3: [[f64; 4]; Q],
}

impl LatticeD2Q9 {
    pub fn new(dx: f64, dt: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(LbmError::InvalidParameter(format!("dx must be positive, got {dx}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(LbmError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let c = dx / dt;
        let cs2 = c * c / 3.0;
        let mut e = [[0.0; 2]; Q];
        let mut h2 = [[0.0; 3]; Q];
        let mut h3 = [[0.0; 4]; Q];
        for i in 0..Q {
            let ex = c * OFFSETS[i][0] as f64;
            let ey = c * OFFSETS[i][1] as f64;
            e[i] = [ex, ey];
            h2[i] = [ex * ex - cs2, ex * ey, ey * ey - cs2];
            h3[i] = [
                ex * ex * ex - 3.0 * cs2 * ex,
                ex * ex * ey - cs2 * ey,
                ex * ey * ey - cs2 * ex,
                ey * ey * ey - 3.0 * cs2 * ey,
            ];
        }
        Ok(Self {
            dx,
            dt,
            c,
            cs2,
            e,
            w: WEIGHTS,
            opposite: OPPOSITE,
            h2,
            h3,
        })
    }

    #[inline]
    pub fn cs(&self) -> f64 {
        self.cs2.sqrt()
    }

    /// Full-index Hermite tensors of direction `i`, computed from the
    /// defining formulas rather than the flattened tables.
    pub fn hermite(&self, i: usize) -> Result<HermiteSet> {
        if i >= Q {
            return Err(LbmError::IndexOutOfRange(i));
        }
        let e = self.e[i];
        let cs2 = self.cs2;
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut h2 = [[0.0; 2]; 2];
        let mut h3 = [[[0.0; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                h2[a][b] = e[a] * e[b] - cs2 * delta(a, b);
                for g in 0..2 {
                    h3[a][b][g] = e[a] * e[b] * e[g]
                        - cs2 * (e[a] * delta(b, g) + e[b] * delta(g, a) + e[g] * delta(a, b));
                }
            }
        }
        Ok(HermiteSet {
            h0: 1.0,
            h1: e,
            h2,
            h3,
        })
    }
}
