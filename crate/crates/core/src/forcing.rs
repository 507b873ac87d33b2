//! Discrete source terms `F_i`, auxiliary terms `G_i` and the `dt^2/2 dF_i/dt`
//! correction of the evolution equation.

use crate::collision::Populations;
use crate::error::{LbmError, Result};
use crate::lattice::{LatticeD2Q9, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceScheme {
    /// `F_i = w_i S`
    Simple,
    /// `F_i = w_i S + (1 - 1/(2 tau1)) w_i e_i.u S / cs^2`
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AuxScheme {
    None,
    /// Backward difference of `phi u` in time.
    TimeDerivative,
    /// `phi u_b d_b u_a`, evaluated from the local velocity gradient.
    SpaceDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceDtMode {
    /// Rebuild `F_i` from a supplied `dS/dt`, velocity frozen within the step.
    Analytic,
    /// `(F_now - F_prev) / dt`, zero on the first step.
    BackwardDifference,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ForcingConfig {
    pub source: SourceScheme,
    pub aux: AuxScheme,
    pub source_dt: SourceDtMode,
}

impl ForcingConfig {
    /// Whether the previous step's `phi u` field must be retained.
    pub fn needs_prev_phi_u(&self) -> bool {
        self.aux == AuxScheme::TimeDerivative
    }

    /// Whether the previous step's `F_i` field must be retained.
    pub fn needs_prev_source(&self) -> bool {
        self.source_dt == SourceDtMode::BackwardDifference
    }
}

pub fn source_simple(lat: &LatticeD2Q9, s: f64) -> Populations {
    let mut f = [0.0; Q];
    for i in 0..Q {
        f[i] = lat.w[i] * s;
    }
    f
}

pub fn source_first_order(lat: &LatticeD2Q9, s: f64, u: [f64; 2], tau1: f64) -> Populations {
    let k = (1.0 - 0.5 / tau1) / lat.cs2;
    let mut f = [0.0; Q];
    for i in 0..Q {
        let eu = lat.e[i][0] * u[0] + lat.e[i][1] * u[1];
        f[i] = lat.w[i] * s * (1.0 + k * eu);
    }
    f
}

pub fn source(lat: &LatticeD2Q9, scheme: SourceScheme, s: f64, u: [f64; 2], tau1: f64) -> Populations {
    match scheme {
        SourceScheme::Simple => source_simple(lat, s),
        SourceScheme::FirstOrder => source_first_order(lat, s, u, tau1),
    }
}

/// `G_i = w_i e_i.m / cs^2 (1 - 1/(2 tau1))` for a first-moment target `m`.
fn first_moment_term(lat: &LatticeD2Q9, m: [f64; 2], tau1: f64) -> Populations {
    let k = (1.0 - 0.5 / tau1) / lat.cs2;
    let mut g = [0.0; Q];
    for i in 0..Q {
        g[i] = lat.w[i] * k * (lat.e[i][0] * m[0] + lat.e[i][1] * m[1]);
    }
    g
}

pub fn aux_time_derivative(
    lat: &LatticeD2Q9,
    phi_u_now: [f64; 2],
    phi_u_prev: [f64; 2],
    dt: f64,
    tau1: f64,
) -> Populations {
    let d = [
        (phi_u_now[0] - phi_u_prev[0]) / dt,
        (phi_u_now[1] - phi_u_prev[1]) / dt,
    ];
    first_moment_term(lat, d, tau1)
}

/// `grad_u[a][b]` is `d u_a / d x_b`.
pub fn aux_space_derivative(
    lat: &LatticeD2Q9,
    phi: f64,
    u: [f64; 2],
    grad_u: [[f64; 2]; 2],
    tau1: f64,
) -> Populations {
    let m = [
        phi * (u[0] * grad_u[0][0] + u[1] * grad_u[0][1]),
        phi * (u[0] * grad_u[1][0] + u[1] * grad_u[1][1]),
    ];
    first_moment_term(lat, m, tau1)
}

/// Inputs available for the source time derivative at one node.
#[derive(Debug, Clone, Copy)]
pub struct SourceDtInput<'a> {
    pub f_now: &'a Populations,
    pub f_prev: Option<&'a Populations>,
    pub ds_dt: Option<f64>,
    pub u: [f64; 2],
    pub tau1: f64,
    pub dt: f64,
}

pub fn dfi_dt(
    lat: &LatticeD2Q9,
    scheme: SourceScheme,
    mode: SourceDtMode,
    input: SourceDtInput<'_>,
) -> Result<Populations> {
    match mode {
        SourceDtMode::Zero => Ok([0.0; Q]),
        SourceDtMode::Analytic => {
            let ds = input.ds_dt.ok_or_else(|| {
                LbmError::Configuration("analytic dF/dt requires dS/dt data".into())
            })?;
            Ok(source(lat, scheme, ds, input.u, input.tau1))
        }
        SourceDtMode::BackwardDifference => match input.f_prev {
            None => Ok([0.0; Q]),
            Some(prev) => {
                let mut d = [0.0; Q];
                for i in 0..Q {
                    d[i] = (input.f_now[i] - prev[i]) / input.dt;
                }
                Ok(d)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat() -> LatticeD2Q9 {
        LatticeD2Q9::new(1.0, 1.0).unwrap()
    }

    fn moments(lat: &LatticeD2Q9, f: &Populations) -> (f64, [f64; 2]) {
        let mut m0 = 0.0;
        let mut m1 = [0.0; 2];
        for i in 0..Q {
            m0 += f[i];
            m1[0] += lat.e[i][0] * f[i];
            m1[1] += lat.e[i][1] * f[i];
        }
        (m0, m1)
    }

    #[test]
    fn simple_source_values() {
        let l = lat();
        assert_eq!(source_simple(&l, 0.0), [0.0; Q]);
        let f = source_simple(&l, 1.0);
        assert_eq!(f[0], 4.0 / 9.0);
        assert_eq!(f[3], 1.0 / 9.0);
        assert_eq!(f[7], 1.0 / 36.0);
    }

    #[test]
    fn first_order_source_reductions() {
        let l = lat();
        let simple = source_simple(&l, 0.37);
        let a = source_first_order(&l, 0.37, [0.0, 0.0], 0.8);
        let b = source_first_order(&l, 0.37, [0.2, -0.1], 0.5);
        for i in 0..Q {
            assert!((a[i] - simple[i]).abs() < 1e-15);
            assert!((b[i] - simple[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn first_order_source_moments() {
        let l = LatticeD2Q9::new(0.4, 0.1).unwrap();
        let (s, u, tau1) = (1.7, [0.3, -0.8], 0.63);
        let f = source_first_order(&l, s, u, tau1);
        let (m0, m1) = moments(&l, &f);
        let k = 1.0 - 0.5 / tau1;
        assert!((m0 - s).abs() < 1e-13);
        assert!((m1[0] - k * u[0] * s).abs() < 1e-13);
        assert!((m1[1] - k * u[1] * s).abs() < 1e-13);
    }

    #[test]
    fn time_derivative_aux() {
        let l = lat();
        let g = aux_time_derivative(&l, [0.4, 0.1], [0.4, 0.1], 0.5, 0.9);
        assert!(g.iter().all(|v| *v == 0.0));
        let g = aux_time_derivative(&l, [1.0, 0.0], [0.0, 0.0], 1.0, 1.0);
        let (m0, m1) = moments(&l, &g);
        assert!(m0.abs() < 1e-15);
        assert!((m1[0] - 0.5).abs() < 1e-15);
        assert!(m1[1].abs() < 1e-15);
    }

    #[test]
    fn space_derivative_aux() {
        let l = lat();
        let zero = [[0.0; 2]; 2];
        assert!(aux_space_derivative(&l, 0.9, [0.3, 0.2], zero, 0.7)
            .iter()
            .all(|v| *v == 0.0));
        let rot = [[0.0, -1.0], [1.0, 0.0]];
        assert!(aux_space_derivative(&l, 0.0, [0.3, 0.2], rot, 0.7)
            .iter()
            .all(|v| *v == 0.0));
        // u = (-y, x) at (1, 0)
        let g = aux_space_derivative(&l, 1.0, [0.0, 1.0], rot, 1.0);
        let (m0, m1) = moments(&l, &g);
        assert!(m0.abs() < 1e-15);
        assert!((m1[0] + 0.5).abs() < 1e-15);
        assert!(m1[1].abs() < 1e-15);
    }

    #[test]
    fn dfi_dt_modes() {
        let l = lat();
        let f = source_first_order(&l, 0.5, [0.1, 0.0], 0.7);
        let input = SourceDtInput {
            f_now: &f,
            f_prev: None,
            ds_dt: None,
            u: [0.1, 0.0],
            tau1: 0.7,
            dt: 0.1,
        };
        assert_eq!(dfi_dt(&l, SourceScheme::FirstOrder, SourceDtMode::Zero, input).unwrap(), [0.0; Q]);
        assert_eq!(
            dfi_dt(&l, SourceScheme::FirstOrder, SourceDtMode::BackwardDifference, input).unwrap(),
            [0.0; Q]
        );
        assert!(matches!(
            dfi_dt(&l, SourceScheme::FirstOrder, SourceDtMode::Analytic, input),
            Err(LbmError::Configuration(_))
        ));
        let steady = SourceDtInput { ds_dt: Some(0.0), ..input };
        assert_eq!(dfi_dt(&l, SourceScheme::FirstOrder, SourceDtMode::Analytic, steady).unwrap(), [0.0; Q]);

        // dS/dt = -2 kappa S gives dF/dt = -2 kappa F
        let kappa = 0.05;
        let decaying = SourceDtInput { ds_dt: Some(-2.0 * kappa * 0.5), ..input };
        let d = dfi_dt(&l, SourceScheme::FirstOrder, SourceDtMode::Analytic, decaying).unwrap();
        for i in 0..Q {
            assert!((d[i] + 2.0 * kappa * f[i]).abs() < 1e-15);
        }

        let prev = source_first_order(&l, 0.25, [0.1, 0.0], 0.7);
        let bd = SourceDtInput { f_prev: Some(&prev), ..input };
        let d = dfi_dt(&l, SourceScheme::FirstOrder, SourceDtMode::BackwardDifference, bd).unwrap();
        for i in 0..Q {
            assert!((d[i] - (f[i] - prev[i]) / 0.1).abs() < 1e-13);
        }
    }
}
