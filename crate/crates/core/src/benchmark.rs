//! Rotating Gaussian pulse and slip-channel benchmarks, RMS error, and the
//! time-step sweep / grid convergence / slip scan drivers.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;

use crate::boundary::{BoundaryKind, BoundarySpec, Edges};
use crate::collision::{tau2_slip_free, CollisionKind, RelaxationParams, Tau2Rule};
use crate::error::{LbmError, Result};
use crate::fields::{Grid, NodePlacement};
use crate::forcing::{AuxScheme, SourceDtMode, SourceScheme};
use crate::lattice::LatticeD2Q9;
use crate::solver::{Case, ModelConfig, ModelPreset, Solver};

/// Side length of the pulse domain `[-2 pi, 2 pi]^2`.
pub const PULSE_LENGTH: f64 = 4.0 * PI;
/// `(dx)^2 / dt` held fixed in the convergence study.
pub const DIFFUSIVE_SCALING: f64 = 0.16 * PI * PI;
pub const CONVERGENCE_GRIDS: [usize; 5] = [20, 40, 60, 80, 100];
/// Time at which the RMS error is reported.
pub const RECORD_TIME: f64 = 1.0;
/// A case is stable if it survives to this time.
pub const STABILITY_TIME: f64 = 2.0;

pub fn pulse_exact(x: f64, y: f64, t: f64, kappa: f64) -> f64 {
    (-(x * x + 3.0 * y * y + 2.0 * kappa * t)).exp()
}

pub fn pulse_source(x: f64, y: f64, t: f64, kappa: f64) -> f64 {
    (6.0 * kappa - 4.0 * x * y - 4.0 * kappa * (x * x + 9.0 * y * y)) * pulse_exact(x, y, t, kappa)
}

/// Gaussian pulse convected by the rigid rotation `u = (-y, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatingPulseCase {
    pub kappa: f64,
}

impl Case for RotatingPulseCase {
    fn velocity(&self, x: [f64; 2], _t: f64) -> [f64; 2] {
        [-x[1], x[0]]
    }

    fn velocity_gradient(&self, _x: [f64; 2], _t: f64) -> Option<[[f64; 2]; 2]> {
        Some([[0.0, -1.0], [1.0, 0.0]])
    }

    fn source(&self, x: [f64; 2], t: f64) -> f64 {
        pulse_source(x[0], x[1], t, self.kappa)
    }

    fn source_dt(&self, x: [f64; 2], t: f64) -> Option<f64> {
        Some(-2.0 * self.kappa * pulse_source(x[0], x[1], t, self.kappa))
    }

    fn initial_phi(&self, x: [f64; 2]) -> f64 {
        pulse_exact(x[0], x[1], 0.0, self.kappa)
    }

    fn exact(&self, x: [f64; 2], t: f64) -> Option<f64> {
        Some(pulse_exact(x[0], x[1], t, self.kappa))
    }
}

/// `sqrt(sum |a - b|^2 / (nx ny))`, summed sequentially in storage order.
pub fn rms_error(numeric: &[f64], analytic: &[f64], nx: usize, ny: usize) -> Result<f64> {
    let n = nx * ny;
    if numeric.len() != n {
        return Err(LbmError::ShapeMismatch { expected: n, actual: numeric.len() });
    }
    if analytic.len() != n {
        return Err(LbmError::ShapeMismatch { expected: n, actual: analytic.len() });
    }
    let mut sum = 0.0;
    for (a, b) in numeric.iter().zip(analytic) {
        let d = a - b;
        sum += d * d;
    }
    Ok((sum / n as f64).sqrt())
}

/// Observed order between two grids: `ln(E_c / E_f) / ln(N_f / N_c)`.
pub fn convergence_order(n_coarse: usize, e_coarse: f64, n_fine: usize, e_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (n_fine as f64 / n_coarse as f64).ln()
}

/// Time step that keeps `(dx)^2 / dt = 0.16 pi^2` on an `n`-node grid.
pub fn diffusive_dt(n: usize) -> f64 {
    let dx = PULSE_LENGTH / n as f64;
    dx * dx / DIFFUSIVE_SCALING
}

/// The fourteen time steps of the sweep for each supported grid size.
pub fn dt_table(n: usize) -> Option<Vec<f64>> {
    const BASE: [f64; 14] = [
        20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 75.0, 100.0, 150.0, 200.0, 300.0, 400.0, 500.0,
    ];
    // each column is the N=100 column scaled by (N/100)^2
    let scale = match n {
        100 => 1.0,
        200 => 4.0,
        300 => 9.0,
        400 => 16.0,
        _ => return None,
    };
    Some(BASE.iter().map(|d| 1.0 / (d * scale)).collect())
}

/// Knobs for a rotating-pulse run. Defaults follow the named preset.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSetup {
    pub preset: ModelPreset,
    pub n: usize,
    pub kappa: f64,
    pub dt: f64,
    pub placement: NodePlacement,
    pub tau2: Tau2Rule,
    pub source_dt: SourceDtMode,
    pub collision: Option<CollisionKind>,
    pub aux: Option<AuxScheme>,
    pub source: Option<SourceScheme>,
}

impl PulseSetup {
    pub fn new(preset: ModelPreset, n: usize, kappa: f64, dt: f64) -> Self {
        Self {
            preset,
            n,
            kappa,
            dt,
            placement: NodePlacement::Closed,
            tau2: Tau2Rule::default(),
            source_dt: SourceDtMode::Analytic,
            collision: None,
            aux: None,
            source: None,
        }
    }

    /// Diffusive-scaling time step for grid `n`.
    pub fn diffusive(preset: ModelPreset, n: usize, kappa: f64) -> Self {
        Self::new(preset, n, kappa, diffusive_dt(n))
    }

    pub fn build(&self) -> Result<(LatticeD2Q9, Grid, ModelConfig)> {
        let grid = Grid::square(self.n, PULSE_LENGTH, -0.5 * PULSE_LENGTH, self.placement)?;
        let lattice = LatticeD2Q9::new(grid.dx, self.dt)?;
        let params = RelaxationParams::from_kappa(&lattice, self.kappa, self.tau2)?;
        let boundary = BoundarySpec {
            kind: BoundaryKind::NonEqExtrapolation,
            edges: Edges::ALL,
        };
        let mut config = ModelConfig::preset(self.preset, params, boundary, self.source_dt);
        if let Some(c) = self.collision {
            config.collision = c;
        }
        if let Some(a) = self.aux {
            config.forcing.aux = a;
        }
        if let Some(s) = self.source {
            config.forcing.source = s;
        }
        Ok((lattice, grid, config))
    }
}

/// Result of one benchmark case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub model: String,
    pub n: usize,
    pub kappa: f64,
    pub dt: f64,
    pub stable: bool,
    /// `(time, rms)` pairs; rms is NaN when the run blew up before that time.
    pub rms: Vec<(f64, f64)>,
    pub seconds: f64,
    pub order: Option<f64>,
}

impl CaseReport {
    pub fn rms_at(&self, t: f64) -> Option<f64> {
        self.rms
            .iter()
            .find(|(tr, _)| (tr - t).abs() < 1e-12)
            .map(|(_, e)| *e)
            .filter(|e| e.is_finite())
    }
}

/// Run one rotating-pulse case to `t_end`, recording at `record_times`.
pub fn run_pulse(setup: &PulseSetup, t_end: f64, record_times: &[f64]) -> Result<CaseReport> {
    let (lattice, grid, config) = setup.build()?;
    let case = RotatingPulseCase { kappa: setup.kappa };
    let start = Instant::now();
    let mut solver = Solver::new(lattice, grid, config, &case)?;
    let report = solver.run_until(t_end, record_times)?;
    Ok(CaseReport {
        model: setup.preset.name().to_string(),
        n: setup.n,
        kappa: setup.kappa,
        dt: setup.dt,
        stable: report.stable,
        rms: report.records.iter().map(|(t, _, e)| (*t, *e)).collect(),
        seconds: start.elapsed().as_secs_f64(),
        order: None,
    })
}

/// RMS at `t = 1`, stability judged at `t = 2`.
pub fn run_standard_pulse(setup: &PulseSetup) -> Result<CaseReport> {
    run_pulse(setup, STABILITY_TIME, &[RECORD_TIME])
}

/// One report per `(model, dt)` pair, in input order.
pub fn run_dt_sweep(
    models: &[ModelPreset],
    n: usize,
    kappa: f64,
    dts: &[f64],
    template: Option<&PulseSetup>,
) -> Result<Vec<CaseReport>> {
    let jobs: Vec<PulseSetup> = models
        .iter()
        .flat_map(|&m| {
            dts.iter().map(move |&dt| {
                let mut s = template.cloned().unwrap_or_else(|| PulseSetup::new(m, n, kappa, dt));
                s.preset = m;
                s.n = n;
                s.kappa = kappa;
                s.dt = dt;
                s
            })
        })
        .collect();
    jobs.par_iter().map(run_standard_pulse).collect()
}

/// Grid refinement under diffusive scaling; orders are filled in between
/// successive stable grids of the same model.
pub fn run_convergence(
    models: &[ModelPreset],
    kappa: f64,
    grids: &[usize],
    template: Option<&PulseSetup>,
) -> Result<Vec<CaseReport>> {
    let jobs: Vec<PulseSetup> = models
        .iter()
        .flat_map(|&m| {
            grids.iter().map(move |&n| {
                let mut s = template.cloned().unwrap_or_else(|| PulseSetup::diffusive(m, n, kappa));
                s.preset = m;
                s.n = n;
                s.kappa = kappa;
                s.dt = diffusive_dt(n);
                s
            })
        })
        .collect();
    let mut reports: Vec<CaseReport> = jobs.par_iter().map(run_standard_pulse).collect::<Result<_>>()?;
    fill_orders(&mut reports);
    Ok(reports)
}

fn fill_orders(reports: &mut [CaseReport]) {
    for i in 1..reports.len() {
        let (a, b) = (&reports[i - 1], &reports[i]);
        if a.model != b.model || a.kappa != b.kappa {
            continue;
        }
        let order = match (a.stable, b.stable, a.rms_at(RECORD_TIME), b.rms_at(RECORD_TIME)) {
            (true, true, Some(ea), Some(eb)) => Some(convergence_order(a.n, ea, b.n, eb)),
            _ => None,
        };
        reports[i].order = order;
    }
}

/// Steady diffusion across a channel bounded by two resting Dirichlet walls,
/// periodic along the walls. The reference profile is linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipChannelCase {
    pub height: f64,
    pub phi_bottom: f64,
    pub phi_top: f64,
    /// Uniform source; non-zero bends the profile into a parabola.
    pub source: f64,
    pub kappa: f64,
}

impl Case for SlipChannelCase {
    fn velocity(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn velocity_gradient(&self, _x: [f64; 2], _t: f64) -> Option<[[f64; 2]; 2]> {
        Some([[0.0; 2]; 2])
    }

    fn source(&self, _x: [f64; 2], _t: f64) -> f64 {
        self.source
    }

    fn source_dt(&self, _x: [f64; 2], _t: f64) -> Option<f64> {
        Some(0.0)
    }

    fn initial_phi(&self, _x: [f64; 2]) -> f64 {
        0.0
    }

    fn exact(&self, x: [f64; 2], _t: f64) -> Option<f64> {
        let y = x[1];
        let linear = self.phi_bottom + (self.phi_top - self.phi_bottom) * y / self.height;
        Some(linear + self.source / (2.0 * self.kappa) * y * (self.height - y))
    }

    fn wall_phi(&self, x: [f64; 2], _t: f64) -> f64 {
        if x[1] < 0.5 * self.height {
            self.phi_bottom
        } else {
            self.phi_top
        }
    }

    fn wall_velocity(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipSetup {
    /// Fluid nodes across the channel.
    pub height_nodes: usize,
    /// Nodes along the periodic direction.
    pub width_nodes: usize,
    pub max_steps: u64,
    /// Converged when the max change over `check_interval` steps, relative to
    /// `max |phi|`, falls below this.
    pub tolerance: f64,
    pub check_interval: u64,
    pub phi_bottom: f64,
    pub phi_top: f64,
    /// Height of the parabolic part of the steady profile above the linear
    /// part, set through a uniform source `S = 8 kappa bulge / H^2`. Zero
    /// leaves a purely linear profile, which halfway anti-bounce-back
    /// reproduces for every `tau2`.
    pub bulge: f64,
}

impl Default for SlipSetup {
    fn default() -> Self {
        Self {
            height_nodes: 32,
            width_nodes: 3,
            max_steps: 2_000_000,
            tolerance: 1e-12,
            check_interval: 100,
            phi_bottom: 0.0,
            phi_top: 1.0,
            bulge: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipResult {
    pub tau1: f64,
    pub tau2: f64,
    pub rms: f64,
    pub converged: bool,
    pub steps: u64,
}

/// Run the channel to steady state and return the RMS deviation from the
/// linear profile.
pub fn run_slip_case(tau1: f64, tau2: f64, setup: &SlipSetup) -> Result<SlipResult> {
    let dx = 1.0;
    let height = setup.height_nodes as f64 * dx;
    let grid = Grid::new(setup.width_nodes, setup.height_nodes, dx, [0.5 * dx, 0.5 * dx])?;
    let lattice = LatticeD2Q9::new(dx, 1.0)?;
    let params = RelaxationParams::from_tau1(&lattice, tau1, Tau2Rule::Fixed(tau2))?;
    let config = ModelConfig {
        name: "trtr".into(),
        collision: CollisionKind::TrtR,
        forcing: crate::forcing::ForcingConfig {
            source: SourceScheme::Simple,
            aux: AuxScheme::None,
            source_dt: SourceDtMode::Zero,
        },
        boundary: BoundarySpec {
            kind: BoundaryKind::HalfwayBounceBack,
            edges: Edges::BOTTOM_TOP,
        },
        params,
    };
    let case = SlipChannelCase {
        height,
        phi_bottom: setup.phi_bottom,
        phi_top: setup.phi_top,
        source: 8.0 * params.kappa * setup.bulge / (height * height),
        kappa: params.kappa,
    };
    let mut solver = Solver::new(lattice, grid, config, &case)?;
    let mut converged = false;
    let mut last = solver.state.fields.phi.clone();
    while solver.state.step_count < setup.max_steps {
        for _ in 0..setup.check_interval {
            solver.step()?;
        }
        if !solver.state.stable {
            break;
        }
        let phi = &solver.state.fields.phi;
        let scale = phi.iter().fold(0.0_f64, |m, p| m.max(p.abs())).max(f64::MIN_POSITIVE);
        let change = phi
            .iter()
            .zip(&last)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if change / scale < setup.tolerance {
            converged = true;
            break;
        }
        last.clone_from(phi);
    }
    let rms = solver.rms_error().unwrap_or(f64::NAN);
    Ok(SlipResult {
        tau1,
        tau2,
        rms,
        converged,
        steps: solver.state.step_count,
    })
}

/// Scan `tau2` at fixed `tau1`. The slip-free value is always added to the
/// scan points; results come back sorted by `tau2`.
pub fn run_slip_scan(tau1: f64, tau2_list: &[f64], setup: &SlipSetup) -> Result<Vec<SlipResult>> {
    let mut points: Vec<f64> = tau2_list.to_vec();
    let free = tau2_slip_free(tau1)?;
    if !points.iter().any(|t| (t - free).abs() < 1e-12) {
        points.push(free);
    }
    points.sort_by(f64::total_cmp);
    points
        .par_iter()
        .map(|&t2| run_slip_case(tau1, t2, setup))
        .collect()
}

/// `start, start + step, ..., <= stop` with the count fixed up front so the
/// grid points are reproducible.
pub fn scan_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(LbmError::InvalidParameter(format!(
            "bad scan range {start}:{stop}:{step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

/// Pure diffusion of `mean + amplitude sin(2 pi x / L)` on a periodic strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineDiffusionCase {
    pub length: f64,
    pub mean: f64,
    pub amplitude: f64,
}

impl Case for SineDiffusionCase {
    fn velocity(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn velocity_gradient(&self, _x: [f64; 2], _t: f64) -> Option<[[f64; 2]; 2]> {
        Some([[0.0; 2]; 2])
    }

    fn source_dt(&self, _x: [f64; 2], _t: f64) -> Option<f64> {
        Some(0.0)
    }

    fn initial_phi(&self, x: [f64; 2]) -> f64 {
        self.mean + self.amplitude * (2.0 * PI * x[0] / self.length).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionRate {
    pub tau1: f64,
    pub expected_kappa: f64,
    pub measured_kappa: f64,
}

impl DiffusionRate {
    pub fn relative_error(&self) -> f64 {
        (self.measured_kappa - self.expected_kappa).abs() / self.expected_kappa
    }
}

/// Measure the effective diffusion coefficient from the decay of a single
/// sine mode on an `n`-node periodic strip (lattice units).
pub fn measure_diffusion_rate(
    collision: CollisionKind,
    tau1: f64,
    tau2: Tau2Rule,
    n: usize,
) -> Result<DiffusionRate> {
    let lattice = LatticeD2Q9::new(1.0, 1.0)?;
    let grid = Grid::new(n, 1, 1.0, [0.0, 0.0])?;
    let params = RelaxationParams::from_tau1(&lattice, tau1, tau2)?;
    let config = ModelConfig {
        name: collision.name().into(),
        collision,
        forcing: crate::forcing::ForcingConfig {
            source: SourceScheme::Simple,
            aux: AuxScheme::None,
            source_dt: SourceDtMode::Zero,
        },
        boundary: BoundarySpec::periodic(),
        params,
    };
    let case = SineDiffusionCase {
        length: n as f64,
        mean: 1.0,
        amplitude: 0.01,
    };
    let k = 2.0 * PI / n as f64;
    let expected = params.kappa;
    let mut solver = Solver::new(lattice, grid, config, &case)?;
    let amplitude = |phi: &[f64]| -> f64 {
        phi.iter()
            .enumerate()
            .map(|(j, p)| (p - case.mean) * (k * j as f64).sin())
            .sum::<f64>()
            * 2.0
            / n as f64
    };
    // let the non-hydrodynamic transient die out, then fit over ~e^-1 of decay
    let warmup = 200;
    let span = ((1.0 / (expected * k * k)).ceil() as u64).max(100);
    for _ in 0..warmup {
        solver.step()?;
    }
    let a0 = amplitude(&solver.state.fields.phi);
    for _ in 0..span {
        solver.step()?;
    }
    let a1 = amplitude(&solver.state.fields.phi);
    let measured = (a0 / a1).ln() / (k * k * span as f64 * solver.dt());
    Ok(DiffusionRate {
        tau1,
        expected_kappa: expected,
        measured_kappa: measured,
    })
}
