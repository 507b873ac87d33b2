//! Equilibrium, non-equilibrium Hermite moments and the node-local collision
//! operators (BGK, first-order regularized, two-relaxation-time regularized).
//!
//! All functions act on a single node's 9 populations and are pure.

use crate::error::{LbmError, Result};
use crate::lattice::{LatticeD2Q9, Q};

pub type Populations = [f64; Q];

/// Default magic product `(tau1 - 1/2)(tau2 - 1/2)`.
pub const DEFAULT_MAGIC: f64 = 1.0 / 12.0;

/// How the free relaxation time `tau2` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau2Rule {
    Magic(f64),
    SlipFree,
    Fixed(f64),
}

impl Default for Tau2Rule {
    fn default() -> Self {
        Tau2Rule::Magic(DEFAULT_MAGIC)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationParams {
    pub tau1: f64,
    pub tau2: f64,
    /// Third-order rate of the extended regularized operator; 1 drops the term.
    pub tau3: f64,
    pub kappa: f64,
    pub magic: Option<f64>,
}

impl RelaxationParams {
    /// Derive `tau1` from the diffusion coefficient and `tau2` from `rule`.
    pub fn from_kappa(lattice: &LatticeD2Q9, kappa: f64, rule: Tau2Rule) -> Result<Self> {
        let tau1 = tau1_from_kappa(kappa, lattice.cs(), lattice.dt)?;
        Self::from_tau1(lattice, tau1, rule)
    }

    pub fn from_tau1(lattice: &LatticeD2Q9, tau1: f64, rule: Tau2Rule) -> Result<Self> {
        if !(tau1 > 0.5) {
            return Err(LbmError::InvalidParameter(format!(
                "tau1 must exceed 1/2, got {tau1}"
            )));
        }
        let (tau2, magic) = match rule {
            Tau2Rule::Magic(m) => (tau2_from_magic(tau1, m)?, Some(m)),
            Tau2Rule::SlipFree => (tau2_slip_free(tau1)?, None),
            Tau2Rule::Fixed(t) => (t, None),
        };
        if !(tau2 > 0.5) {
            return Err(LbmError::InvalidParameter(format!(
                "tau2 must exceed 1/2, got {tau2}"
            )));
        }
        Ok(Self {
            tau1,
            tau2,
            tau3: 1.0,
            kappa: (tau1 - 0.5) * lattice.cs2 * lattice.dt,
            magic,
        })
    }
}

/// `tau1 = kappa / (cs^2 dt) + 1/2`, with `cs` the lattice sound speed.
pub fn tau1_from_kappa(kappa: f64, cs: f64, dt: f64) -> Result<f64> {
    if !(kappa >= 0.0) {
        return Err(LbmError::InvalidParameter(format!(
            "diffusion coefficient must be non-negative, got {kappa}"
        )));
    }
    if !(cs > 0.0 && dt > 0.0) {
        return Err(LbmError::InvalidParameter("cs and dt must be positive".into()));
    }
    Ok(kappa / (cs * cs * dt) + 0.5)
}

/// `tau2 = 1/2 + magic / (tau1 - 1/2)`.
pub fn tau2_from_magic(tau1: f64, magic: f64) -> Result<f64> {
    if !(magic > 0.0) {
        return Err(LbmError::InvalidParameter(format!(
            "magic parameter must be positive, got {magic}"
        )));
    }
    let d = tau1 - 0.5;
    if d == 0.0 {
        return Err(LbmError::Singular(
            "tau1 = 1/2 has no magic pairing".into(),
        ));
    }
    if d < 0.0 {
        return Err(LbmError::InvalidParameter(format!(
            "tau1 must exceed 1/2, got {tau1}"
        )));
    }
    Ok(0.5 + magic / d)
}

/// Free relaxation time that removes the halfway bounce-back wall slip:
/// `tau2 = 3 (1 - 4 tau1) / (8 (1 - 2 tau1))`.
pub fn tau2_slip_free(tau1: f64) -> Result<f64> {
    let denom = 8.0 * (1.0 - 2.0 * tau1);
    if denom == 0.0 {
        return Err(LbmError::Singular("tau1 = 1/2 in slip relation".into()));
    }
    if tau1 < 0.5 {
        return Err(LbmError::InvalidParameter(format!(
            "tau1 must exceed 1/2, got {tau1}"
        )));
    }
    Ok(3.0 * (1.0 - 4.0 * tau1) / denom)
}

/// Third-order Hermite equilibrium.
pub fn equilibrium(lat: &LatticeD2Q9, phi: f64, u: [f64; 2]) -> Populations {
    let cs2 = lat.cs2;
    let inv1 = 1.0 / cs2;
    let inv2 = 1.0 / (2.0 * cs2 * cs2);
    let inv3 = 1.0 / (6.0 * cs2 * cs2 * cs2);
    let [ux, uy] = u;
    let (uxx, uxy, uyy) = (ux * ux, ux * uy, uy * uy);
    let mut g = [0.0; Q];
    for i in 0..Q {
        let e = lat.e[i];
        let h2 = lat.h2[i];
        let h3 = lat.h3[i];
        let eu = e[0] * ux + e[1] * uy;
        let huu = h2[0] * uxx + 2.0 * h2[1] * uxy + h2[2] * uyy;
        let huuu = h3[0] * uxx * ux
            + 3.0 * h3[1] * uxx * uy
            + 3.0 * h3[2] * ux * uyy
            + h3[3] * uyy * uy;
        g[i] = lat.w[i] * phi * (1.0 + eu * inv1 + huu * inv2 + huuu * inv3);
    }
    g
}

/// First- and second-order non-equilibrium Hermite moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeqMoments {
    pub b1: [f64; 2],
    pub b2: [[f64; 2]; 2],
}

pub fn neq_moments(lat: &LatticeD2Q9, g: &Populations, geq: &Populations) -> NeqMoments {
    let mut b1 = [0.0; 2];
    let mut b2 = [0.0; 3];
    for i in 0..Q {
        let n = g[i] - geq[i];
        b1[0] += lat.e[i][0] * n;
        b1[1] += lat.e[i][1] * n;
        b2[0] += lat.h2[i][0] * n;
        b2[1] += lat.h2[i][1] * n;
        b2[2] += lat.h2[i][2] * n;
    }
    NeqMoments {
        b1,
        b2: [[b2[0], b2[1]], [b2[1], b2[2]]],
    }
}

/// Third-order non-equilibrium moment, flattened as `[xxx, xxy, xyy, yyy]`.
pub fn neq_moment3(lat: &LatticeD2Q9, g: &Populations, geq: &Populations) -> [f64; 4] {
    let mut b3 = [0.0; 4];
    for i in 0..Q {
        let n = g[i] - geq[i];
        for (b, h) in b3.iter_mut().zip(lat.h3[i].iter()) {
            *b += h * n;
        }
    }
    b3
}

pub fn collide_bgk(g: &Populations, geq: &Populations, tau1: f64) -> Populations {
    let k = 1.0 - 1.0 / tau1;
    let mut out = [0.0; Q];
    for i in 0..Q {
        out[i] = geq[i] + k * (g[i] - geq[i]);
    }
    out
}

pub fn collide_regularized(
    lat: &LatticeD2Q9,
    g: &Populations,
    geq: &Populations,
    tau1: f64,
) -> Populations {
    let m = neq_moments(lat, g, geq);
    let k1 = (1.0 - 1.0 / tau1) / lat.cs2;
    let mut out = [0.0; Q];
    for i in 0..Q {
        let e = lat.e[i];
        out[i] = geq[i] + k1 * lat.w[i] * (e[0] * m.b1[0] + e[1] * m.b1[1]);
    }
    out
}

pub fn collide_trtr(
    lat: &LatticeD2Q9,
    g: &Populations,
    geq: &Populations,
    tau1: f64,
    tau2: f64,
) -> Populations {
    collide_mrtr(lat, g, geq, tau1, tau2, 1.0)
}

/// Regularized operator with independent first-, second- and third-order
/// rates. `tau3 = 1` reduces it to [`collide_trtr`].
pub fn collide_mrtr(
    lat: &LatticeD2Q9,
    g: &Populations,
    geq: &Populations,
    tau1: f64,
    tau2: f64,
    tau3: f64,
) -> Populations {
    let m = neq_moments(lat, g, geq);
    let cs2 = lat.cs2;
    let k1 = (1.0 - 1.0 / tau1) / cs2;
    let k2 = (1.0 - 1.0 / tau2) / (2.0 * cs2 * cs2);
    let (bxx, bxy, byy) = (m.b2[0][0], m.b2[0][1], m.b2[1][1]);
    let mut out = [0.0; Q];
    for i in 0..Q {
        let e = lat.e[i];
        let h2 = lat.h2[i];
        let first = e[0] * m.b1[0] + e[1] * m.b1[1];
        let second = h2[0] * bxx + 2.0 * h2[1] * bxy + h2[2] * byy;
        out[i] = geq[i] + lat.w[i] * (k1 * first + k2 * second);
    }
    if tau3 != 1.0 {
        let b3 = neq_moment3(lat, g, geq);
        let k3 = (1.0 - 1.0 / tau3) / (6.0 * cs2 * cs2 * cs2);
        for i in 0..Q {
            let h3 = lat.h3[i];
            let third = h3[0] * b3[0] + 3.0 * h3[1] * b3[1] + 3.0 * h3[2] * b3[2] + h3[3] * b3[3];
            out[i] += lat.w[i] * k3 * third;
        }
    }
    out
}

/// Choice of collision operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollisionKind {
    Bgk,
    Regularized,
    TrtR,
}

impl CollisionKind {
    pub fn apply(
        self,
        lat: &LatticeD2Q9,
        g: &Populations,
        geq: &Populations,
        params: &RelaxationParams,
    ) -> Populations {
        match self {
            CollisionKind::Bgk => collide_bgk(g, geq, params.tau1),
            CollisionKind::Regularized => collide_regularized(lat, g, geq, params.tau1),
            CollisionKind::TrtR => {
                collide_mrtr(lat, g, geq, params.tau1, params.tau2, params.tau3)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CollisionKind::Bgk => "bgk",
            CollisionKind::Regularized => "regularized",
            CollisionKind::TrtR => "trtr",
        }
    }
}

impl std::str::FromStr for CollisionKind {
    type Err = LbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bgk" => Ok(CollisionKind::Bgk),
            "regularized" | "reg" => Ok(CollisionKind::Regularized),
            "trtr" | "trt-r" => Ok(CollisionKind::TrtR),
            other => Err(LbmError::InvalidParameter(format!(
                "unknown collision operator `{other}`"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit() -> LatticeD2Q9 {
        LatticeD2Q9::new(1.0, 1.0).unwrap()
    }

    /// Moments computed straight from the velocity set, without the
    /// precomputed Hermite tables.
    fn raw_moments(lat: &LatticeD2Q9, f: &Populations) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let mut m0 = 0.0;
        let mut m1 = [0.0; 2];
        let mut m2 = [[0.0; 2]; 2];
        for i in 0..Q {
            m0 += f[i];
            for a in 0..2 {
                m1[a] += lat.e[i][a] * f[i];
                for b in 0..2 {
                    let d = if a == b { lat.cs2 } else { 0.0 };
                    m2[a][b] += (lat.e[i][a] * lat.e[i][b] - d) * f[i];
                }
            }
        }
        (m0, m1, m2)
    }

    fn perturbed(lat: &LatticeD2Q9, phi: f64, u: [f64; 2], noise: &[f64]) -> (Populations, Populations) {
        let mut g = equilibrium(lat, phi, u);
        for (v, n) in g.iter_mut().zip(noise) {
            *v += n * phi;
        }
        let total: f64 = g.iter().sum();
        (g, equilibrium(lat, total, u))
    }

    #[test]
    fn equilibrium_at_rest_is_weights() {
        let lat = unit();
        let g = equilibrium(&lat, 2.0, [0.0, 0.0]);
        for i in 0..Q {
            assert_eq!(g[i], 2.0 * lat.w[i]);
        }
    }

    #[test]
    fn equilibrium_moments() {
        let lat = LatticeD2Q9::new(4.0 * PI / 100.0, 0.01).unwrap();
        let u = [0.3 * lat.c, -0.2 * lat.c];
        let phi = 0.7;
        let (m0, m1, m2) = raw_moments(&lat, &equilibrium(&lat, phi, u));
        assert!((m0 - phi).abs() < 1e-14);
        for a in 0..2 {
            assert!((m1[a] - phi * u[a]).abs() < 1e-12 * lat.c);
            for b in 0..2 {
                assert!((m2[a][b] - phi * u[a] * u[b]).abs() < 1e-12 * lat.c * lat.c);
            }
        }
    }

    #[test]
    fn equilibrium_x_velocity_value() {
        let lat = unit();
        let u = 0.1;
        let g = equilibrium(&lat, 1.0, [u, 0.0]);
        // Unit lattice: 1/(2 cs^4) = 1/(6 cs^6) = 9/2.
        let h2 = 1.0 - 1.0 / 3.0;
        let h3 = 1.0 - 3.0 / 3.0;
        let want = (1.0 / 9.0) * (1.0 + 3.0 * u + 4.5 * h2 * u * u + 4.5 * h3 * u * u * u);
        assert!((g[1] - want).abs() < 1e-16);
    }

    #[test]
    fn neq_moments_of_single_entry() {
        let lat = unit();
        let geq = [0.0; Q];
        let mut g = [0.0; Q];
        g[5] = 0.25;
        let m = neq_moments(&lat, &g, &geq);
        assert_eq!(m.b1, [0.25, 0.25]);
        assert!((m.b2[0][0] - 0.25 * (2.0 / 3.0)).abs() < 1e-16);
        assert!((m.b2[0][1] - 0.25).abs() < 1e-16);
        assert_eq!(m.b2[0][1], m.b2[1][0]);
        let b3 = neq_moment3(&lat, &g, &geq);
        // H_xxx at (1,1) is 1 - 3/3 = 0, H_xxy is 1 - 1/3.
        assert!(b3[0].abs() < 1e-16);
        assert!((b3[1] - 0.25 * (2.0 / 3.0)).abs() < 1e-16);
    }

    #[test]
    fn neq_moments_match_raw_oracle() {
        let lat = LatticeD2Q9::new(0.2, 0.05).unwrap();
        let noise = [0.01, -0.02, 0.03, 0.005, -0.01, 0.02, -0.03, 0.015, -0.02];
        let (g, geq) = perturbed(&lat, 1.3, [0.5, 1.0], &noise);
        let mut d = [0.0; Q];
        for i in 0..Q {
            d[i] = g[i] - geq[i];
        }
        let (_, m1, m2) = raw_moments(&lat, &d);
        let m = neq_moments(&lat, &g, &geq);
        for a in 0..2 {
            assert!((m.b1[a] - m1[a]).abs() < 1e-13);
            for b in 0..2 {
                assert!((m.b2[a][b] - m2[a][b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bgk_relaxes_deviation() {
        let g = [1.0; Q];
        let geq = [0.5; Q];
        let out = collide_bgk(&g, &geq, 2.0);
        assert!(out.iter().all(|v| (v - 0.75).abs() < 1e-16));
        assert_eq!(collide_bgk(&g, &geq, 1.0), geq);
    }

    #[test]
    fn trtr_moment_scaling_oracle() {
        let lat = LatticeD2Q9::new(0.1, 0.02).unwrap();
        let noise = [0.02, -0.01, 0.015, -0.03, 0.01, 0.005, -0.02, 0.025, -0.01];
        let (g, geq) = perturbed(&lat, 0.9, [1.0, -0.5], &noise);
        let (tau1, tau2) = (0.7, 1.9);
        let out = collide_trtr(&lat, &g, &geq, tau1, tau2);
        let before = neq_moments(&lat, &g, &geq);
        let after = neq_moments(&lat, &out, &geq);
        let s: f64 = out.iter().sum::<f64>() - g.iter().sum::<f64>();
        assert!(s.abs() < 1e-14);
        for a in 0..2 {
            let want = (1.0 - 1.0 / tau1) * before.b1[a];
            assert!((after.b1[a] - want).abs() < 1e-12 * before.b1[a].abs().max(1.0));
            for b in 0..2 {
                let want = (1.0 - 1.0 / tau2) * before.b2[a][b];
                assert!((after.b2[a][b] - want).abs() < 1e-12 * before.b2[a][b].abs().max(1.0));
            }
        }
        let reg = collide_regularized(&lat, &g, &geq, tau1);
        let after_reg = neq_moments(&lat, &reg, &geq);
        for a in 0..2 {
            assert!((after_reg.b1[a] - after.b1[a]).abs() < 1e-12);
            for b in 0..2 {
                assert!(after_reg.b2[a][b].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn regularization_is_a_projection() {
        let lat = unit();
        let noise = [0.03, -0.02, 0.01, 0.02, -0.01, -0.02, 0.01, 0.03, -0.05];
        let (g, geq) = perturbed(&lat, 1.0, [0.05, 0.02], &noise);
        let once = collide_trtr(&lat, &g, &geq, 1.0 / (1.0 - 0.5), 1.0 / (1.0 - 0.25));
        let twice = collide_trtr(&lat, &once, &geq, 1.0 / (1.0 - 1.0), 1.0 / (1.0 - 1.0));
        // tau = inf makes the reconstruction the identity on its own range.
        for i in 0..Q {
            assert!((once[i] - twice[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn tau3_hook_only_touches_third_order() {
        let lat = unit();
        let noise = [0.01, 0.02, -0.03, 0.01, 0.02, -0.01, 0.04, -0.02, -0.04];
        let (g, geq) = perturbed(&lat, 1.0, [0.1, 0.0], &noise);
        let base = collide_mrtr(&lat, &g, &geq, 0.8, 1.3, 1.0);
        assert_eq!(base, collide_trtr(&lat, &g, &geq, 0.8, 1.3));
        let ext = collide_mrtr(&lat, &g, &geq, 0.8, 1.3, 0.9);
        assert!(base.iter().zip(&ext).any(|(a, b)| (a - b).abs() > 1e-6));
        let mb = neq_moments(&lat, &base, &geq);
        let me = neq_moments(&lat, &ext, &geq);
        for a in 0..2 {
            assert!((mb.b1[a] - me.b1[a]).abs() < 1e-15);
        }
        assert!((ext.iter().sum::<f64>() - base.iter().sum::<f64>()).abs() < 1e-15);
        let t_in = neq_moment3(&lat, &g, &geq);
        let t_out = neq_moment3(&lat, &ext, &geq);
        // Only xxy and xyy are representable on D2Q9.
        for k in [1, 2] {
            assert!((t_out[k] - (1.0 - 1.0 / 0.9) * t_in[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn tau1_examples() {
        let c = 4.0 * PI;
        let cs = c / 3f64.sqrt();
        assert_eq!(tau1_from_kappa(0.0, cs, 0.01).unwrap(), 0.5);
        let t = tau1_from_kappa(0.01, cs, 0.01).unwrap();
        assert!((t - 0.5190).abs() < 5e-5, "{t}");
        let t = tau1_from_kappa(0.05, cs, 0.01).unwrap();
        assert!((t - 0.5950).abs() < 5e-5, "{t}");
        assert!(matches!(
            tau1_from_kappa(-1e-3, cs, 0.01),
            Err(LbmError::InvalidParameter(_))
        ));
    }

    #[test]
    fn magic_pairing_examples() {
        let tau1 = 0.01 / (16.0 * PI * PI / 3.0 * 0.01) + 0.5;
        let t2 = tau2_from_magic(tau1, DEFAULT_MAGIC).unwrap();
        assert!((t2 - 4.886).abs() < 5e-4, "{t2}");
        assert!((tau2_from_magic(1.0, DEFAULT_MAGIC).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(tau2_from_magic(0.5, DEFAULT_MAGIC), Err(LbmError::Singular(_))));
        assert!(tau2_from_magic(0.8, 0.0).is_err());
    }

    #[test]
    fn slip_free_examples() {
        assert!((tau2_slip_free(0.8).unwrap() - 1.375).abs() < 1e-14);
        assert!((tau2_slip_free(0.75).unwrap() - 1.5).abs() < 1e-14);
        assert!((tau2_slip_free(1e9).unwrap() - 0.75).abs() < 1e-8);
        assert!(matches!(tau2_slip_free(0.5), Err(LbmError::Singular(_))));
    }

    #[test]
    fn params_from_kappa_round_trip() {
        let lat = LatticeD2Q9::new(4.0 * PI / 100.0, 0.01).unwrap();
        let p = RelaxationParams::from_kappa(&lat, 0.01, Tau2Rule::default()).unwrap();
        assert!((p.kappa - 0.01).abs() < 1e-15);
        assert!(((p.tau1 - 0.5) * (p.tau2 - 0.5) - DEFAULT_MAGIC).abs() < 1e-14);
        assert_eq!(p.tau3, 1.0);
        let s = RelaxationParams::from_tau1(&lat, 0.8, Tau2Rule::SlipFree).unwrap();
        assert!((s.tau2 - 1.375).abs() < 1e-14);
        assert!(RelaxationParams::from_tau1(&lat, 0.8, Tau2Rule::Fixed(0.4)).is_err());
        assert!(RelaxationParams::from_kappa(&lat, 0.0, Tau2Rule::default()).is_err());
    }

    #[test]
    fn kind_names_parse() {
        for k in [CollisionKind::Bgk, CollisionKind::Regularized, CollisionKind::TrtR] {
            assert_eq!(k.name().parse::<CollisionKind>().unwrap(), k);
        }
        assert!("mrt".parse::<CollisionKind>().is_err());
    }

    proptest! {
        #[test]
        fn all_operators_conserve_mass(
            phi in 0.1f64..3.0,
            ux in -0.3f64..0.3,
            uy in -0.3f64..0.3,
            tau1 in 0.501f64..3.0,
            tau2 in 0.501f64..3.0,
            noise in proptest::collection::vec(-0.05f64..0.05, Q),
        ) {
            let lat = LatticeD2Q9::new(0.5, 0.2).unwrap();
            let u = [ux * lat.c, uy * lat.c];
            let (g, geq) = perturbed(&lat, phi, u, &noise);
            let total: f64 = g.iter().sum();
            for out in [
                collide_bgk(&g, &geq, tau1),
                collide_regularized(&lat, &g, &geq, tau1),
                collide_trtr(&lat, &g, &geq, tau1, tau2),
            ] {
                let s: f64 = out.iter().sum();
                prop_assert!((s - total).abs() <= 1e-12 * total.abs());
            }
        }

        #[test]
        fn equilibrium_is_fixed(
            phi in 0.1f64..3.0,
            ux in -0.3f64..0.3,
            uy in -0.3f64..0.3,
            tau1 in 0.501f64..3.0,
            tau2 in 0.501f64..3.0,
        ) {
            let lat = unit();
            let geq = equilibrium(&lat, phi, [ux, uy]);
            let out = collide_trtr(&lat, &geq, &geq, tau1, tau2);
            for i in 0..Q {
                prop_assert!((out[i] - geq[i]).abs() <= 1e-15 * phi);
            }
            prop_assert_eq!(collide_trtr(&lat, &geq, &geq, tau1, 1.0), collide_regularized(&lat, &geq, &geq, tau1));
        }
    }
}
