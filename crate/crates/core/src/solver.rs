//! One explicit step of the evolution equation and the run driver.
//!
//! Order inside a step, all fields sampled at time `t` and frozen:
//! 1. sample `u`, `grad u`, `S`, `dS/dt` from the case;
//! 2. per node: equilibrium, collision, `+ dt G_i + dt F_i + dt^2/2 dF_i/dt`;
//! 3. periodic streaming into the shadow buffer;
//! 4. boundary treatment (wall data at time `t`);
//! 5. swap, `t += dt`, recompute `phi`, stability check.

use log::warn;

use crate::boundary::{
    apply_halfway_bounceback, apply_noneq_extrapolation, BoundaryKind, BoundarySpec, WallData,
};
use crate::collision::{equilibrium, CollisionKind, Populations, RelaxationParams};
use crate::error::{LbmError, Result};
use crate::fields::{
    velocity_gradient_fd, DistributionField, Grid, MacroFields, StabilityMonitor,
};
use crate::forcing::{
    aux_space_derivative, aux_time_derivative, dfi_dt, source, AuxScheme, ForcingConfig,
    SourceDtInput, SourceDtMode, SourceScheme,
};
use crate::lattice::{LatticeD2Q9, Q};

/// Problem definition sampled by the solver: prescribed velocity, source,
/// initial and boundary data, and optionally a reference solution.
pub trait Case: Sync {
    fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2];

    /// Analytic Jacobian `d u_a / d x_b`; `None` falls back to finite differences.
    fn velocity_gradient(&self, _x: [f64; 2], _t: f64) -> Option<[[f64; 2]; 2]> {
        None
    }

    fn source(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }

    fn source_dt(&self, _x: [f64; 2], _t: f64) -> Option<f64> {
        None
    }

    fn initial_phi(&self, x: [f64; 2]) -> f64;

    fn exact(&self, _x: [f64; 2], _t: f64) -> Option<f64> {
        None
    }

    /// Dirichlet value on boundaries.
    fn wall_phi(&self, x: [f64; 2], t: f64) -> f64 {
        self.exact(x, t).unwrap_or(0.0)
    }

    fn wall_velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.velocity(x, t)
    }
}

/// Named model combinations used in the comparison study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelPreset {
    /// TRT-R + space-derivative auxiliary term + first-order source.
    Present,
    /// TRT-R + time-derivative auxiliary term + simple source.
    Model1,
    /// BGK + time-derivative auxiliary term + simple source.
    Model2,
}

impl ModelPreset {
    pub const ALL: [ModelPreset; 3] = [ModelPreset::Present, ModelPreset::Model1, ModelPreset::Model2];

    pub fn name(self) -> &'static str {
        match self {
            ModelPreset::Present => "present",
            ModelPreset::Model1 => "model1",
            ModelPreset::Model2 => "model2",
        }
    }

    pub fn collision(self) -> CollisionKind {
        match self {
            ModelPreset::Present | ModelPreset::Model1 => CollisionKind::TrtR,
            ModelPreset::Model2 => CollisionKind::Bgk,
        }
    }

    pub fn forcing(self, source_dt: SourceDtMode) -> ForcingConfig {
        match self {
            ModelPreset::Present => ForcingConfig {
                source: SourceScheme::FirstOrder,
                aux: AuxScheme::SpaceDerivative,
                source_dt,
            },
            ModelPreset::Model1 | ModelPreset::Model2 => ForcingConfig {
                source: SourceScheme::Simple,
                aux: AuxScheme::TimeDerivative,
                source_dt,
            },
        }
    }
}

impl std::str::FromStr for ModelPreset {
    type Err = LbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "present" => Ok(ModelPreset::Present),
            "model1" => Ok(ModelPreset::Model1),
            "model2" => Ok(ModelPreset::Model2),
            other => Err(LbmError::InvalidParameter(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub name: String,
    pub collision: CollisionKind,
    pub forcing: ForcingConfig,
    pub boundary: BoundarySpec,
    pub params: RelaxationParams,
}

impl ModelConfig {
    pub fn preset(
        preset: ModelPreset,
        params: RelaxationParams,
        boundary: BoundarySpec,
        source_dt: SourceDtMode,
    ) -> Self {
        Self {
            name: preset.name().to_string(),
            collision: preset.collision(),
            forcing: preset.forcing(source_dt),
            boundary,
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub t: f64,
    pub step_count: u64,
    pub stable: bool,
    pub fields: MacroFields,
    pub g: DistributionField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Advanced,
    Unstable,
}

/// Output of [`Solver::run_until`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// `(requested time, recorded time, rms)`; rms is NaN when the case has no
    /// reference solution or the run blew up first.
    pub records: Vec<(f64, f64, f64)>,
    pub stable: bool,
    pub steps: u64,
    pub t_final: f64,
}

struct WallAt<'a, C: Case + ?Sized> {
    case: &'a C,
    t: f64,
}

impl<C: Case + ?Sized> WallData for WallAt<'_, C> {
    fn wall_phi(&self, x: [f64; 2]) -> f64 {
        self.case.wall_phi(x, self.t)
    }
    fn wall_velocity(&self, x: [f64; 2]) -> [f64; 2] {
        self.case.wall_velocity(x, self.t)
    }
}

pub struct Solver<'a, C: Case + ?Sized> {
    pub lattice: LatticeD2Q9,
    pub grid: Grid,
    pub config: ModelConfig,
    pub state: RunState,
    case: &'a C,
    positions: Vec<[f64; 2]>,
    monitor: StabilityMonitor,
    prev_phi_u: Option<Vec<[f64; 2]>>,
    prev_source: Option<Vec<f64>>,
}

impl<'a, C: Case + ?Sized> Solver<'a, C> {
    /// Initialise `g_i = g_i^eq(phi_0, u)` at every node.
    pub fn new(lattice: LatticeD2Q9, grid: Grid, config: ModelConfig, case: &'a C) -> Result<Self> {
        if (lattice.dx - grid.dx).abs() > 1e-12 * grid.dx {
            return Err(LbmError::Configuration(format!(
                "lattice dx {} does not match grid dx {}",
                lattice.dx, grid.dx
            )));
        }
        if !(config.params.tau1 > 0.5) {
            return Err(LbmError::InvalidParameter(format!(
                "tau1 must exceed 1/2, got {}",
                config.params.tau1
            )));
        }
        let n = grid.len();
        let positions = grid.positions();
        let mut fields = MacroFields::zeros(n);
        let mut g = DistributionField::zeros(n);
        for (node, x) in positions.iter().enumerate() {
            let phi = case.initial_phi(*x);
            let u = case.velocity(*x, 0.0);
            fields.phi[node] = phi;
            fields.u[node] = u;
            g.set(node, &equilibrium(&lattice, phi, u));
        }
        let monitor = StabilityMonitor::from_initial(&fields.phi);
        let mut solver = Self {
            lattice,
            grid,
            config,
            state: RunState {
                t: 0.0,
                step_count: 0,
                stable: true,
                fields,
                g,
            },
            case,
            positions,
            monitor,
            prev_phi_u: None,
            prev_source: None,
        };
        solver.sample_fields()?;
        Ok(solver)
    }

    pub fn dt(&self) -> f64 {
        self.lattice.dt
    }

    fn sample_fields(&mut self) -> Result<()> {
        let t = self.state.t;
        let case = self.case;
        let f = &mut self.state.fields;
        let mut analytic_grad = true;
        let mut ds_dt = Vec::with_capacity(self.positions.len());
        let mut have_ds_dt = true;
        for (node, x) in self.positions.iter().enumerate() {
            f.u[node] = case.velocity(*x, t);
            f.source[node] = case.source(*x, t);
            match case.velocity_gradient(*x, t) {
                Some(j) => f.grad_u[node] = j,
                None => analytic_grad = false,
            }
            match case.source_dt(*x, t) {
                Some(d) if have_ds_dt => ds_dt.push(d),
                _ => have_ds_dt = false,
            }
        }
        f.source_dt = have_ds_dt.then_some(ds_dt);
        if !analytic_grad && self.config.forcing.aux == AuxScheme::SpaceDerivative {
            f.grad_u = velocity_gradient_fd(&self.grid, &f.u, self.config.boundary.periodic_axes())?;
        }
        Ok(())
    }

    /// Advance one time step.
    pub fn step(&mut self) -> Result<StepStatus> {
        if !self.state.stable {
            return Ok(StepStatus::Unstable);
        }
        let lat = &self.lattice;
        let dt = lat.dt;
        let cfg = &self.config;
        let params = &cfg.params;
        let forcing = cfg.forcing;
        let n = self.grid.len();
        let fields = &self.state.fields;
        if forcing.source_dt == SourceDtMode::Analytic && fields.source_dt.is_none() {
            return Err(LbmError::Configuration(
                "analytic dF/dt requires the case to provide dS/dt".into(),
            ));
        }

        let mut phi_u_now = forcing
            .needs_prev_phi_u()
            .then(|| Vec::with_capacity(n));
        let mut source_now = forcing
            .needs_prev_source()
            .then(|| Vec::with_capacity(n * Q));

        let buf = self.state.g.current_mut();
        for node in 0..n {
            let mut g = [0.0; Q];
            for i in 0..Q {
                g[i] = buf[i * n + node];
            }
            let phi = fields.phi[node];
            let u = fields.u[node];
            let geq = equilibrium(lat, phi, u);
            let mut post = cfg.collision.apply(lat, &g, &geq, params);

            let f_i = source(lat, forcing.source, fields.source[node], u, params.tau1);
            let prev_f: Option<Populations> = self.prev_source.as_ref().map(|p| {
                let mut a = [0.0; Q];
                a.copy_from_slice(&p[node * Q..(node + 1) * Q]);
                a
            });
            let df = dfi_dt(
                lat,
                forcing.source,
                forcing.source_dt,
                SourceDtInput {
                    f_now: &f_i,
                    f_prev: prev_f.as_ref(),
                    ds_dt: fields.source_dt.as_ref().map(|d| d[node]),
                    u,
                    tau1: params.tau1,
                    dt,
                },
            )?;
            let g_aux = match forcing.aux {
                AuxScheme::None => [0.0; Q],
                AuxScheme::SpaceDerivative => {
                    aux_space_derivative(lat, phi, u, fields.grad_u[node], params.tau1)
                }
                AuxScheme::TimeDerivative => {
                    let now = [phi * u[0], phi * u[1]];
                    if let Some(v) = phi_u_now.as_mut() {
                        v.push(now);
                    }
                    match &self.prev_phi_u {
                        Some(prev) => aux_time_derivative(lat, now, prev[node], dt, params.tau1),
                        None => [0.0; Q],
                    }
                }
            };
            if let Some(v) = source_now.as_mut() {
                v.extend_from_slice(&f_i);
            }
            for i in 0..Q {
                post[i] += dt * g_aux[i] + dt * f_i[i] + 0.5 * dt * dt * df[i];
                buf[i * n + node] = post[i];
            }
        }
        if phi_u_now.is_some() {
            self.prev_phi_u = phi_u_now;
        }
        if source_now.is_some() {
            self.prev_source = source_now;
        }

        self.state.g.stream_to_shadow(&self.grid);
        let wall = WallAt {
            case: self.case,
            t: self.state.t,
        };
        let (post, streamed) = self.state.g.split_mut();
        match cfg.boundary.kind {
            BoundaryKind::Periodic => {}
            BoundaryKind::NonEqExtrapolation => apply_noneq_extrapolation(
                lat,
                &self.grid,
                cfg.boundary.edges,
                streamed,
                &fields.u,
                &wall,
            )?,
            BoundaryKind::HalfwayBounceBack => {
                apply_halfway_bounceback(lat, &self.grid, cfg.boundary.edges, post, streamed, &wall, true)?
            }
            BoundaryKind::HalfwayPlainBounceBack => {
                apply_halfway_bounceback(lat, &self.grid, cfg.boundary.edges, post, streamed, &wall, false)?
            }
        }
        self.state.g.swap();

        self.state.step_count += 1;
        self.state.t = self.state.step_count as f64 * dt;
        self.state.fields.update_phi(&self.state.g);
        if !self.monitor.is_stable(&self.state.fields.phi) {
            self.state.stable = false;
            return Ok(StepStatus::Unstable);
        }
        self.sample_fields()?;
        Ok(StepStatus::Advanced)
    }

    /// Reference solution at the current time, if the case has one.
    pub fn exact_field(&self) -> Option<Vec<f64>> {
        self.positions
            .iter()
            .map(|x| self.case.exact(*x, self.state.t))
            .collect()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// RMS deviation from the reference solution at the current time.
    pub fn rms_error(&self) -> Option<f64> {
        let exact = self.exact_field()?;
        crate::benchmark::rms_error(&self.state.fields.phi, &exact, self.grid.nx, self.grid.ny).ok()
    }

    /// Step until `t_end` (or blow-up), recording the RMS error at each of
    /// `record_times` (rounded to the nearest step).
    pub fn run_until(&mut self, t_end: f64, record_times: &[f64]) -> Result<RunReport> {
        if !(t_end >= 0.0) {
            return Err(LbmError::InvalidParameter(format!("t_end must be >= 0, got {t_end}")));
        }
        let dt = self.dt();
        let mut targets: Vec<(f64, u64)> = Vec::with_capacity(record_times.len());
        for w in record_times.windows(2) {
            if w[1] < w[0] {
                return Err(LbmError::InvalidParameter("record times must be sorted".into()));
            }
        }
        for &tr in record_times {
            if tr < 0.0 || tr > t_end + 1e-12 {
                return Err(LbmError::InvalidParameter(format!(
                    "record time {tr} outside [0, {t_end}]"
                )));
            }
            let step = (tr / dt).round() as u64;
            let offset = step as f64 * dt - tr;
            if offset.abs() > 1e-9 * dt.max(1.0) {
                warn!("record time {tr} is not a multiple of dt={dt}; recording at step {step} (offset {offset:e})");
            }
            targets.push((tr, step));
        }
        let end_step = (t_end / dt).round() as u64;
        let mut records = Vec::with_capacity(targets.len());
        let mut next = 0;
        loop {
            while next < targets.len() && targets[next].1 <= self.state.step_count {
                let rms = if self.state.stable {
                    self.rms_error().unwrap_or(f64::NAN)
                } else {
                    f64::NAN
                };
                records.push((targets[next].0, self.state.t, rms));
                next += 1;
            }
            if self.state.step_count >= end_step {
                break;
            }
            if self.step()? == StepStatus::Unstable {
                break;
            }
        }
        while next < targets.len() {
            records.push((targets[next].0, targets[next].1 as f64 * dt, f64::NAN));
            next += 1;
        }
        Ok(RunReport {
            records,
            stable: self.state.stable && self.state.step_count >= end_step,
            steps: self.state.step_count,
            t_final: self.state.t,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::NodePlacement;

    struct Uniform(f64);

    impl Case for Uniform {
        fn velocity(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
            [0.0, 0.0]
        }
        fn source_dt(&self, _x: [f64; 2], _t: f64) -> Option<f64> {
            Some(0.0)
        }
        fn initial_phi(&self, _x: [f64; 2]) -> f64 {
            self.0
        }
        fn exact(&self, _x: [f64; 2], _t: f64) -> Option<f64> {
            Some(self.0)
        }
    }

    /// Solid-body rotation with a bump, periodic box, no source.
    struct Swirl;

    impl Case for Swirl {
        fn velocity(&self, x: [f64; 2], _t: f64) -> [f64; 2] {
            [-0.2 * x[1].sin(), 0.2 * x[0].sin()]
        }
        fn source_dt(&self, _x: [f64; 2], _t: f64) -> Option<f64> {
            Some(0.0)
        }
        fn initial_phi(&self, x: [f64; 2]) -> f64 {
            1.0 + 0.5 * (-(x[0] * x[0] + x[1] * x[1])).exp()
        }
    }

    fn setup(preset: ModelPreset, boundary: BoundarySpec) -> (LatticeD2Q9, Grid, ModelConfig) {
        let grid = Grid::square(16, 2.0 * std::f64::consts::PI, -std::f64::consts::PI, NodePlacement::Vertex)
            .unwrap();
        let lat = LatticeD2Q9::new(grid.dx, 0.05).unwrap();
        let params = RelaxationParams::from_kappa(&lat, 0.02, Default::default()).unwrap();
        let cfg = ModelConfig::preset(preset, params, boundary, SourceDtMode::Analytic);
        (lat, grid, cfg)
    }

    #[test]
    fn uniform_field_is_a_fixed_point() {
        for preset in ModelPreset::ALL {
            for boundary in [
                BoundarySpec::periodic(),
                BoundarySpec {
                    kind: BoundaryKind::NonEqExtrapolation,
                    edges: crate::boundary::Edges::ALL,
                },
            ] {
                let case = Uniform(0.75);
                let (lat, grid, cfg) = setup(preset, boundary);
                let mut s = Solver::new(lat, grid, cfg, &case).unwrap();
                for _ in 0..20 {
                    assert_eq!(s.step().unwrap(), StepStatus::Advanced);
                }
                assert!(s.rms_error().unwrap() < 1e-14, "{preset:?}");
            }
        }
    }

    #[test]
    fn periodic_box_conserves_mass() {
        for preset in ModelPreset::ALL {
            let (lat, grid, cfg) = setup(preset, BoundarySpec::periodic());
            let mut s = Solver::new(lat, grid, cfg, &Swirl).unwrap();
            let m0: f64 = s.state.fields.phi.iter().sum();
            for _ in 0..50 {
                s.step().unwrap();
            }
            let m1: f64 = s.state.fields.phi.iter().sum();
            assert!((m1 - m0).abs() < 1e-11 * m0, "{preset:?}: {m0} -> {m1}");
            assert!((s.state.t - 50.0 * 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_mismatched_lattice() {
        let (_, grid, cfg) = setup(ModelPreset::Present, BoundarySpec::periodic());
        let lat = LatticeD2Q9::new(grid.dx * 1.01, 0.05).unwrap();
        assert!(matches!(
            Solver::new(lat, grid, cfg, &Uniform(1.0)),
            Err(LbmError::Configuration(_))
        ));
    }

    #[test]
    fn analytic_source_rate_is_required() {
        struct NoRate;
        impl Case for NoRate {
            fn velocity(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
                [0.0, 0.0]
            }
            fn initial_phi(&self, _x: [f64; 2]) -> f64 {
                1.0
            }
        }
        let (lat, grid, cfg) = setup(ModelPreset::Present, BoundarySpec::periodic());
        let mut s = Solver::new(lat, grid, cfg, &NoRate).unwrap();
        assert!(matches!(s.step(), Err(LbmError::Configuration(_))));
    }

    #[test]
    fn run_until_records_and_snaps() {
        let (lat, grid, cfg) = setup(ModelPreset::Present, BoundarySpec::periodic());
        let case = Uniform(1.0);
        let mut s = Solver::new(lat, grid, cfg, &case).unwrap();
        let r = s.run_until(1.0, &[0.0, 0.52, 1.0]).unwrap();
        assert_eq!(r.steps, 20);
        assert!(r.stable);
        assert_eq!(r.records.len(), 3);
        assert!((r.records[1].1 - 0.5).abs() < 1e-12);
        assert!(s.run_until(2.0, &[1.5, 1.2]).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let grid = Grid::square(16, 2.0 * std::f64::consts::PI, -std::f64::consts::PI, NodePlacement::Vertex)
            .unwrap();
        let lat = LatticeD2Q9::new(grid.dx, 0.05).unwrap();
        let params = RelaxationParams::from_tau1(&lat, 0.5001, crate::collision::Tau2Rule::Fixed(0.5001)).unwrap();
        struct Fast;
        impl Case for Fast {
            fn velocity(&self, x: [f64; 2], _t: f64) -> [f64; 2] {
                [40.0 * x[1].sin(), 40.0]
            }
            fn source_dt(&self, _x: [f64; 2], _t: f64) -> Option<f64> {
                Some(0.0)
            }
            fn initial_phi(&self, x: [f64; 2]) -> f64 {
                1.0 + (3.0 * x[0]).sin()
            }
        }
        let cfg = ModelConfig::preset(ModelPreset::Model2, params, BoundarySpec::periodic(), SourceDtMode::Analytic);
        let mut s = Solver::new(lat, grid, cfg, &Fast).unwrap();
        let r = s.run_until(100.0, &[100.0]).unwrap();
        assert!(!r.stable);
        assert!(r.records[0].2.is_nan());
        assert_eq!(s.step().unwrap(), StepStatus::Unstable);
    }
}
