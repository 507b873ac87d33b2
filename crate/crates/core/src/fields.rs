//! Grid geometry, double-buffered distribution storage and macroscopic fields.
//!
//! Populations are stored structure-of-arrays: nine contiguous planes of
//! `nx * ny` values, node `(j, k)` at offset `k * nx + j` inside each plane.

use std::io::{self, Write};

use crate::collision::Populations;
use crate::error::{LbmError, Result};
use crate::lattice::{OFFSETS, Q};

/// Where nodes sit relative to the domain `[lower, lower + L]`, `dx = L / N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NodePlacement {
    /// `N + 1` nodes per axis with both edges of the domain on nodes.
    #[default]
    Closed,
    /// `N` nodes per axis, node `(0, 0)` on the lower corner, node `N-1` one
    /// spacing short of the upper edge.
    Vertex,
    /// Nodes at cell centres, half a spacing inside each edge.
    CellCenter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    /// Physical coordinate of node `(0, 0)`.
    pub origin: [f64; 2],
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, origin: [f64; 2]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(LbmError::InvalidParameter("grid must have at least one node per axis".into()));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(LbmError::InvalidParameter(format!("dx must be positive, got {dx}")));
        }
        Ok(Self { nx, ny, dx, origin })
    }

    /// Square domain `[lower, lower + length]^2` with spacing `length / n`.
    pub fn square(n: usize, length: f64, lower: f64, placement: NodePlacement) -> Result<Self> {
        if n == 0 {
            return Err(LbmError::InvalidParameter("grid must have at least one cell per axis".into()));
        }
        let dx = length / n as f64;
        let (nodes, shift) = match placement {
            NodePlacement::Closed => (n + 1, 0.0),
            NodePlacement::Vertex => (n, 0.0),
            NodePlacement::CellCenter => (n, 0.5 * dx),
        };
        Self::new(nodes, nodes, dx, [lower + shift, lower + shift])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        k * self.nx + j
    }

    #[inline]
    pub fn position(&self, j: usize, k: usize) -> [f64; 2] {
        [
            self.origin[0] + j as f64 * self.dx,
            self.origin[1] + k as f64 * self.dx,
        ]
    }

    /// Node positions in storage order.
    pub fn positions(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.ny {
            for j in 0..self.nx {
                out.push(self.position(j, k));
            }
        }
        out
    }
}

#[inline]
pub fn compute_phi(g: &Populations) -> f64 {
    g.iter().sum()
}

/// Two equally sized population buffers. `current` holds the populations the
/// next collision reads; streaming writes into `shadow`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    nodes: usize,
    current: Vec<f64>,
    shadow: Vec<f64>,
}

impl DistributionField {
    pub fn zeros(nodes: usize) -> Self {
        Self {
            nodes,
            current: vec![0.0; nodes * Q],
            shadow: vec![0.0; nodes * Q],
        }
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn get(&self, node: usize) -> Populations {
        let mut g = [0.0; Q];
        for (i, v) in g.iter_mut().enumerate() {
            *v = self.current[i * self.nodes + node];
        }
        g
    }

    #[inline]
    pub fn set(&mut self, node: usize, g: &Populations) {
        for (i, v) in g.iter().enumerate() {
            self.current[i * self.nodes + node] = *v;
        }
    }

    pub fn plane(&self, i: usize) -> &[f64] {
        &self.current[i * self.nodes..(i + 1) * self.nodes]
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn current_mut(&mut self) -> &mut [f64] {
        &mut self.current
    }

    /// Post-collision (`current`) and streamed (`shadow`) buffers, for
    /// boundary treatment between streaming and the swap.
    pub fn split_mut(&mut self) -> (&[f64], &mut [f64]) {
        (&self.current, &mut self.shadow)
    }

    /// Periodic push-streaming from `current` into `shadow`.
    pub fn stream_to_shadow(&mut self, grid: &Grid) {
        debug_assert_eq!(grid.len(), self.nodes);
        let (nx, ny, n) = (grid.nx, grid.ny, self.nodes);
        for (i, off) in OFFSETS.iter().enumerate() {
            let src = &self.current[i * n..(i + 1) * n];
            let dst = &mut self.shadow[i * n..(i + 1) * n];
            let sx = off[0].rem_euclid(nx as i32) as usize;
            let sy = off[1].rem_euclid(ny as i32) as usize;
            for k in 0..ny {
                let kd = (k + sy) % ny;
                let s = &src[k * nx..(k + 1) * nx];
                let d = &mut dst[kd * nx..(kd + 1) * nx];
                // d[(j + sx) % nx] = s[j]
                d[sx..].copy_from_slice(&s[..nx - sx]);
                d[..sx].copy_from_slice(&s[nx - sx..]);
            }
        }
    }

    pub fn swap(&mut self) {
        std::mem::swap(&mut self.current, &mut self.shadow);
    }

    /// Periodic streaming followed by the buffer swap.
    pub fn stream(&mut self, grid: &Grid) {
        self.stream_to_shadow(grid);
        self.swap();
    }

    /// Sum of all populations in storage order.
    pub fn total(&self) -> f64 {
        self.current.iter().sum()
    }
}

/// Macroscopic state on the grid; `grad_u[n][a][b] = d u_a / d x_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroFields {
    pub phi: Vec<f64>,
    pub u: Vec<[f64; 2]>,
    pub grad_u: Vec<[[f64; 2]; 2]>,
    pub source: Vec<f64>,
    pub source_dt: Option<Vec<f64>>,
}

impl MacroFields {
    pub fn zeros(nodes: usize) -> Self {
        Self {
            phi: vec![0.0; nodes],
            u: vec![[0.0; 2]; nodes],
            grad_u: vec![[[0.0; 2]; 2]; nodes],
            source: vec![0.0; nodes],
            source_dt: None,
        }
    }

    pub fn update_phi(&mut self, g: &DistributionField) {
        let n = g.nodes();
        let cur = g.current();
        self.phi.iter_mut().for_each(|p| *p = 0.0);
        for i in 0..Q {
            for (p, v) in self.phi.iter_mut().zip(&cur[i * n..(i + 1) * n]) {
                *p += *v;
            }
        }
    }
}

/// Velocity Jacobian by second-order central differences. Non-periodic axes
/// use second-order one-sided stencils on their edge nodes.
pub fn velocity_gradient_fd(
    grid: &Grid,
    u: &[[f64; 2]],
    periodic: [bool; 2],
) -> Result<Vec<[[f64; 2]; 2]>> {
    if u.len() != grid.len() {
        return Err(LbmError::ShapeMismatch {
            expected: grid.len(),
            actual: u.len(),
        });
    }
    let (nx, ny) = (grid.nx, grid.ny);
    for (axis, &n) in [nx, ny].iter().enumerate() {
        if n < 3 && !(periodic[axis] && n > 0) {
            return Err(LbmError::Configuration(
                "finite-difference gradient needs at least 3 nodes per non-periodic axis".into(),
            ));
        }
    }
    let inv = 1.0 / (2.0 * grid.dx);
    let mut out = vec![[[0.0; 2]; 2]; grid.len()];
    let derivative = |m: usize, n: usize, periodic: bool, at: &dyn Fn(usize) -> [f64; 2]| -> [f64; 2] {
        let (a, b, c, s) = if periodic {
            ((m + n - 1) % n, m, (m + 1) % n, 0)
        } else if m == 0 {
            (0, 1, 2, 1)
        } else if m == n - 1 {
            (n - 1, n - 2, n - 3, -1)
        } else {
            (m - 1, m, m + 1, 0)
        };
        let (fa, fb, fc) = (at(a), at(b), at(c));
        let mut d = [0.0; 2];
        for comp in 0..2 {
            d[comp] = match s {
                0 => (fc[comp] - fa[comp]) * inv,
                1 => (-3.0 * fa[comp] + 4.0 * fb[comp] - fc[comp]) * inv,
                _ => (3.0 * fa[comp] - 4.0 * fb[comp] + fc[comp]) * inv,
            };
        }
        d
    };
    for k in 0..ny {
        for j in 0..nx {
            let dxu = derivative(j, nx, periodic[0], &|jj| u[grid.index(jj, k)]);
            let dyu = derivative(k, ny, periodic[1], &|kk| u[grid.index(j, kk)]);
            let node = grid.index(j, k);
            out[node] = [[dxu[0], dyu[0]], [dxu[1], dyu[1]]];
        }
    }
    Ok(out)
}

/// Instability detector: non-finite `phi`, or `max |phi|` beyond a growth
/// factor of the initial maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityMonitor {
    pub limit: f64,
}

impl StabilityMonitor {
    pub const GROWTH_FACTOR: f64 = 1.0e3;

    pub fn from_initial(phi: &[f64]) -> Self {
        let max = phi.iter().fold(0.0_f64, |m, p| m.max(p.abs()));
        let base = if max > 0.0 { max } else { 1.0 };
        Self {
            limit: base * Self::GROWTH_FACTOR,
        }
    }

    pub fn is_stable(&self, phi: &[f64]) -> bool {
        phi.iter().all(|p| p.is_finite() && p.abs() <= self.limit)
    }
}

/// Format with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Field snapshot CSV: `x,y,phi_numeric,phi_analytic`, storage order.
pub fn write_snapshot<W: Write>(
    mut w: W,
    grid: &Grid,
    numeric: &[f64],
    analytic: &[f64],
) -> io::Result<()> {
    writeln!(w, "x,y,phi_numeric,phi_analytic")?;
    for k in 0..grid.ny {
        for j in 0..grid.nx {
            let p = grid.position(j, k);
            let n = grid.index(j, k);
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(p[0]),
                fmt_f64(p[1]),
                fmt_f64(numeric[n]),
                fmt_f64(analytic[n])
            )?;
        }
    }
    Ok(())
}
