//! Command-line front end: flag/config-file parsing, driver dispatch and CSV
//! output.
//!
//! Flags take precedence over values read from `--config FILE`, a
//! line-oriented `key = value` file (`#` starts a comment). Keys are the long
//! flag names with `-` or `_` separators.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::benchmark::{
    diffusive_dt, dt_table, measure_diffusion_rate, run_convergence, run_dt_sweep, run_pulse,
    run_slip_scan, scan_grid, PulseSetup, RotatingPulseCase, SlipSetup, CONVERGENCE_GRIDS,
    RECORD_TIME, STABILITY_TIME,
};
use crate::collision::{
    collide_bgk, collide_regularized, collide_trtr, equilibrium, CollisionKind, Tau2Rule,
    DEFAULT_MAGIC,
};
use crate::error::LbmError;
use crate::fields::{fmt_f64, write_snapshot, NodePlacement};
use crate::forcing::{
    aux_space_derivative, aux_time_derivative, source_first_order, source_simple, AuxScheme,
    SourceScheme,
};
use crate::lattice::{LatticeD2Q9, Q};
use crate::solver::{ModelPreset, Solver};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SELFTEST: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "trtr-cde", version, about = "TRT-R lattice Boltzmann convection-diffusion benchmarks")]
pub struct CliConfig {
    /// Optional `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Cap on the worker pool used by the case drivers.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one rotating Gaussian pulse case.
    Pulse(PulseArgs),
    /// Time-step sweep on a fixed grid.
    Sweep(SweepArgs),
    /// Grid convergence under diffusive scaling.
    Convergence(ConvergenceArgs),
    /// Free relaxation time scan for the halfway bounce-back channel.
    Slip(SlipArgs),
    /// Run the invariant suite.
    Selftest,
}

#[derive(Debug, Args, Default)]
pub struct ModelFlags {
    /// Override the preset's collision operator (bgk, regularized, trtr).
    #[arg(long)]
    pub collision: Option<String>,
    /// Override the auxiliary term (none, time, space).
    #[arg(long)]
    pub aux: Option<String>,
    /// Override the source scheme (simple, first-order).
    #[arg(long)]
    pub source: Option<String>,
    /// Magic parameter used to derive tau2.
    #[arg(long)]
    pub magic: Option<f64>,
    /// Fixed tau2, takes precedence over --magic.
    #[arg(long)]
    pub tau2: Option<f64>,
    /// Node placement (closed, vertex, cell-center).
    #[arg(long)]
    pub placement: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct PulseArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Defaults to the diffusive scaling (dx)^2/dt = 0.16 pi^2.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Comma-separated record times.
    #[arg(long)]
    pub record_times: Option<String>,
    #[command(flatten)]
    pub model_flags: ModelFlags,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write a field snapshot at the end of the run.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Write 0 in the `seconds` column so the file is byte-stable.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args, Default)]
pub struct SweepArgs {
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Comma-separated time steps; defaults to the built-in table for N in {100,200,300,400}.
    #[arg(long)]
    pub dt_list: Option<String>,
    #[command(flatten)]
    pub model_flags: ModelFlags,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Comma-separated grid sizes.
    #[arg(long)]
    pub grids: Option<String>,
    #[command(flatten)]
    pub model_flags: ModelFlags,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct SlipArgs {
    #[arg(long)]
    pub tau1: Option<f64>,
    /// `start:stop:step`
    #[arg(long)]
    pub tau2_grid: Option<String>,
    /// Fluid nodes across the channel.
    #[arg(long)]
    pub height: Option<usize>,
    /// Parabolic bulge of the steady profile (0 gives a linear profile).
    #[arg(long)]
    pub bulge: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parsed `key = value` configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase()
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, LbmError> {
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                LbmError::Configuration(format!("config line {}: expected key = value", lineno + 1))
            })?;
            values.insert(normalize_key(k), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, LbmError> {
        let text = fs::read_to_string(path).map_err(|e| {
            LbmError::Configuration(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, LbmError> {
        match self.values.get(&normalize_key(key)) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                LbmError::Configuration(format!("config value for `{key}` is not valid: `{v}`"))
            }),
        }
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, LbmError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, LbmError> {
        self.pick(flag, key)?.ok_or_else(|| {
            LbmError::Configuration(format!("missing required flag --{}", key.replace('_', "-")))
        })
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, LbmError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| LbmError::InvalidParameter(format!("bad {what} entry `{p}`")))
        })
        .collect()
}

/// Parse a time step, accepting `1/20` as well as decimals.
fn parse_dt(s: &str) -> Result<f64, LbmError> {
    let s = s.trim();
    let bad = || LbmError::InvalidParameter(format!("bad time step `{s}`"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok(a / b)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

fn parse_collision(s: &str) -> Result<CollisionKind, LbmError> {
    s.parse()
}

fn parse_aux(s: &str) -> Result<AuxScheme, LbmError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "none" => Ok(AuxScheme::None),
        "time" | "time-derivative" => Ok(AuxScheme::TimeDerivative),
        "space" | "space-derivative" => Ok(AuxScheme::SpaceDerivative),
        other => Err(LbmError::InvalidParameter(format!("unknown aux scheme `{other}`"))),
    }
}

fn parse_source(s: &str) -> Result<SourceScheme, LbmError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "simple" => Ok(SourceScheme::Simple),
        "first-order" | "first_order" | "firstorder" => Ok(SourceScheme::FirstOrder),
        other => Err(LbmError::InvalidParameter(format!("unknown source scheme `{other}`"))),
    }
}

fn parse_placement(s: &str) -> Result<NodePlacement, LbmError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "closed" => Ok(NodePlacement::Closed),
        "vertex" => Ok(NodePlacement::Vertex),
        "cell-center" | "cell_center" | "cellcenter" => Ok(NodePlacement::CellCenter),
        other => Err(LbmError::InvalidParameter(format!("unknown placement `{other}`"))),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Apply the model override flags to a setup.
fn apply_model_flags(
    setup: &mut PulseSetup,
    flags: &ModelFlags,
    file: &ConfigFile,
) -> Result<(), LbmError> {
    if let Some(c) = file.pick(flags.collision.clone(), "collision")? {
        let kind = parse_collision(&c)?;
        if kind != setup.preset.collision() {
            warn!(
                "collision override `{}` replaces preset `{}` default `{}`",
                kind.name(),
                setup.preset.name(),
                setup.preset.collision().name()
            );
        }
        setup.collision = Some(kind);
    }
    if let Some(a) = file.pick(flags.aux.clone(), "aux")? {
        setup.aux = Some(parse_aux(&a)?);
    }
    if let Some(s) = file.pick(flags.source.clone(), "source")? {
        setup.source = Some(parse_source(&s)?);
    }
    let magic: Option<f64> = file.pick(flags.magic, "magic")?;
    let tau2: Option<f64> = file.pick(flags.tau2, "tau2")?;
    setup.tau2 = match (tau2, magic) {
        (Some(t), _) => Tau2Rule::Fixed(t),
        (None, Some(m)) => Tau2Rule::Magic(m),
        (None, None) => Tau2Rule::Magic(DEFAULT_MAGIC),
    };
    if let Some(p) = file.pick(flags.placement.clone(), "placement")? {
        setup.placement = parse_placement(&p)?;
    }
    Ok(())
}

fn open_output(path: &Path) -> Result<io::BufWriter<fs::File>, LbmError> {
    fs::File::create(path)
        .map(io::BufWriter::new)
        .map_err(|e| LbmError::Configuration(format!("cannot create {}: {e}", path.display())))
}

fn io_err(e: io::Error) -> LbmError {
    LbmError::Configuration(format!("write failed: {e}"))
}

fn parse_models(s: &str) -> Result<Vec<ModelPreset>, LbmError> {
    parse_list::<String>(s, "model")?
        .iter()
        .map(|m| m.parse())
        .collect()
}

pub fn cmd_pulse(args: &PulseArgs, file: &ConfigFile) -> Result<(), LbmError> {
    let model: ModelPreset = file
        .pick(args.model.clone(), "model")?
        .unwrap_or_else(|| "present".to_string())
        .parse()?;
    let n: usize = file.require(args.n, "n")?;
    let kappa: f64 = file.require(args.kappa, "kappa")?;
    let dt = match args.dt {
        Some(d) => d,
        None => match file.get::<String>("dt")? {
            Some(s) => parse_dt(&s)?,
            None => diffusive_dt(n),
        },
    };
    let t_end: f64 = file.pick(args.t_end, "t_end")?.unwrap_or(STABILITY_TIME);
    let record_times: Vec<f64> = match file.pick(args.record_times.clone(), "record_times")? {
        Some(s) => parse_list(&s, "record time")?,
        None => vec![RECORD_TIME],
    };
    let output = file
        .pick(args.output.clone(), "output")?
        .unwrap_or_else(|| PathBuf::from("pulse.csv"));

    let mut setup = PulseSetup::new(model, n, kappa, dt);
    apply_model_flags(&mut setup, &args.model_flags, file)?;
    let stable;
    let report = if let Some(snap) = &args.snapshot {
        let (lattice, grid, config) = setup.build()?;
        let case = RotatingPulseCase { kappa };
        let start = std::time::Instant::now();
        let mut solver = Solver::new(lattice, grid.clone(), config, &case)?;
        let run = solver.run_until(t_end, &record_times)?;
        let exact = solver.exact_field().unwrap_or_default();
        let mut w = open_output(snap)?;
        write_snapshot(&mut w, &grid, &solver.state.fields.phi, &exact).map_err(io_err)?;
        stable = run.stable;
        crate::benchmark::CaseReport {
            model: model.name().into(),
            n,
            kappa,
            dt,
            stable: run.stable,
            rms: run.records.iter().map(|(t, _, e)| (*t, *e)).collect(),
            seconds: start.elapsed().as_secs_f64(),
            order: None,
        }
    } else {
        let r = run_pulse(&setup, t_end, &record_times)?;
        stable = r.stable;
        r
    };
    let mut w = open_output(&output)?;
    writeln!(w, "model,N,kappa,dt,t,rms,stable,seconds").map_err(io_err)?;
    let seconds = if args.no_timing { 0.0 } else { report.seconds };
    for (t, e) in &report.rms {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            report.model,
            report.n,
            fmt_f64(kappa),
            fmt_f64(dt),
            fmt_f64(*t),
            fmt_opt(Some(*e).filter(|e| e.is_finite())),
            stable,
            fmt_f64(seconds)
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    info!("wrote {}", output.display());
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs, file: &ConfigFile) -> Result<(), LbmError> {
    let models = parse_models(
        &file
            .pick(args.models.clone(), "models")?
            .unwrap_or_else(|| "present,model1,model2".into()),
    )?;
    let n: usize = file.require(args.n, "n")?;
    let kappa: f64 = file.require(args.kappa, "kappa")?;
    let dts = match file.pick(args.dt_list.clone(), "dt_list")? {
        Some(s) => s.split(',').map(parse_dt).collect::<Result<Vec<_>, _>>()?,
        None => dt_table(n).ok_or_else(|| {
            LbmError::Configuration(format!("no built-in time-step table for N={n}; pass --dt-list"))
        })?,
    };
    let output = file
        .pick(args.output.clone(), "output")?
        .unwrap_or_else(|| PathBuf::from("sweep.csv"));
    let mut template = PulseSetup::new(models[0], n, kappa, dts[0]);
    apply_model_flags(&mut template, &args.model_flags, file)?;
    let reports = run_dt_sweep(&models, n, kappa, &dts, Some(&template))?;
    let mut w = open_output(&output)?;
    writeln!(w, "model,N,kappa,dt,stable,rms_t1").map_err(io_err)?;
    for r in &reports {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.model,
            r.n,
            fmt_f64(r.kappa),
            fmt_f64(r.dt),
            r.stable,
            fmt_opt(r.rms_at(RECORD_TIME))
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn cmd_convergence(args: &ConvergenceArgs, file: &ConfigFile) -> Result<(), LbmError> {
    let models = parse_models(
        &file
            .pick(args.models.clone(), "models")?
            .unwrap_or_else(|| "present,model1,model2".into()),
    )?;
    let kappa: f64 = file.require(args.kappa, "kappa")?;
    let grids: Vec<usize> = match file.pick(args.grids.clone(), "grids")? {
        Some(s) => parse_list(&s, "grid")?,
        None => CONVERGENCE_GRIDS.to_vec(),
    };
    let output = file
        .pick(args.output.clone(), "output")?
        .unwrap_or_else(|| PathBuf::from("convergence.csv"));
    let mut template = PulseSetup::diffusive(models[0], grids[0], kappa);
    apply_model_flags(&mut template, &args.model_flags, file)?;
    let reports = run_convergence(&models, kappa, &grids, Some(&template))?;
    let mut w = open_output(&output)?;
    writeln!(w, "model,kappa,N,rms,order").map_err(io_err)?;
    for r in &reports {
        let rms = if r.stable { r.rms_at(RECORD_TIME) } else { None };
        writeln!(
            w,
            "{},{},{},{},{}",
            r.model,
            fmt_f64(r.kappa),
            r.n,
            fmt_opt(rms),
            fmt_opt(r.order)
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn cmd_slip(args: &SlipArgs, file: &ConfigFile) -> Result<(), LbmError> {
    let tau1: f64 = file.pick(args.tau1, "tau1")?.unwrap_or(0.8);
    let grid_spec = file
        .pick(args.tau2_grid.clone(), "tau2_grid")?
        .unwrap_or_else(|| "0.6:2.0:0.05".into());
    let parts: Vec<f64> = grid_spec
        .split(':')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| LbmError::InvalidParameter(format!("bad --tau2-grid `{grid_spec}`")))
        })
        .collect::<Result<_, _>>()?;
    if parts.len() != 3 {
        return Err(LbmError::InvalidParameter(format!(
            "--tau2-grid expects start:stop:step, got `{grid_spec}`"
        )));
    }
    let points = scan_grid(parts[0], parts[1], parts[2])?;
    let mut setup = SlipSetup::default();
    if let Some(h) = file.pick(args.height, "height")? {
        setup.height_nodes = h;
    }
    if let Some(b) = file.pick(args.bulge, "bulge")? {
        setup.bulge = b;
    }
    let output = file
        .pick(args.output.clone(), "output")?
        .unwrap_or_else(|| PathBuf::from("slip.csv"));
    let results = run_slip_scan(tau1, &points, &setup)?;
    let mut w = open_output(&output)?;
    writeln!(w, "tau1,tau2,rms,converged").map_err(io_err)?;
    for r in &results {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(r.tau1),
            fmt_f64(r.tau2),
            fmt_f64(r.rms),
            r.converged
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// One line of the self-test report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("worst {worst:.3e} (tol {tol:.1e})"),
    }
}

/// Lattice identities, moment conservation, fixed points and diffusion-rate
/// recovery.
pub fn selftest() -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let lat = LatticeD2Q9::new(0.37, 0.11).expect("valid lattice");
    let (c, cs2) = (lat.c, lat.cs2);

    let mut worst = 0.0_f64;
    let sw: f64 = lat.w.iter().sum();
    worst = worst.max((sw - 1.0).abs());
    for a in 0..2 {
        let m1: f64 = (0..Q).map(|i| lat.w[i] * lat.e[i][a]).sum();
        worst = worst.max(m1.abs() / c);
        for b in 0..2 {
            let m2: f64 = (0..Q).map(|i| lat.w[i] * lat.e[i][a] * lat.e[i][b]).sum();
            let want = if a == b { cs2 } else { 0.0 };
            worst = worst.max((m2 - want).abs() / cs2);
        }
    }
    out.push(check("lattice moment identities", worst, 1e-12));

    let mut worst_mass = 0.0_f64;
    let mut worst_fixed = 0.0_f64;
    let mut worst_reduce = 0.0_f64;
    let mut worst_forcing = 0.0_f64;
    for _ in 0..1000 {
        let phi: f64 = rng.gen_range(0.1..2.0);
        let u = [rng.gen_range(-0.3..0.3) * c, rng.gen_range(-0.3..0.3) * c];
        let tau1: f64 = rng.gen_range(0.51..2.0);
        let tau2: f64 = rng.gen_range(0.51..3.0);
        let mut g = equilibrium(&lat, phi, u);
        for v in g.iter_mut() {
            *v += rng.gen_range(-0.05..0.05) * phi;
        }
        let total: f64 = g.iter().sum();
        let geq = equilibrium(&lat, total, u);
        for post in [
            collide_bgk(&g, &geq, tau1),
            collide_regularized(&lat, &g, &geq, tau1),
            collide_trtr(&lat, &g, &geq, tau1, tau2),
        ] {
            let s: f64 = post.iter().sum();
            worst_mass = worst_mass.max((s - total).abs() / total.abs());
        }
        let geq0 = equilibrium(&lat, phi, u);
        for post in [
            collide_bgk(&geq0, &geq0, tau1),
            collide_regularized(&lat, &geq0, &geq0, tau1),
            collide_trtr(&lat, &geq0, &geq0, tau1, tau2),
        ] {
            for i in 0..Q {
                worst_fixed = worst_fixed.max((post[i] - geq0[i]).abs() / phi);
            }
        }
        let a = collide_trtr(&lat, &g, &geq, tau1, 1.0);
        let b = collide_regularized(&lat, &g, &geq, tau1);
        for i in 0..Q {
            worst_reduce = worst_reduce.max((a[i] - b[i]).abs() / phi);
        }
        let s: f64 = rng.gen_range(-1.0..1.0);
        let fs: f64 = source_simple(&lat, s).iter().sum();
        let ff: f64 = source_first_order(&lat, s, u, tau1).iter().sum();
        let gt: f64 = aux_time_derivative(&lat, [phi * u[0], phi * u[1]], [0.3 * c, -0.1 * c], lat.dt, tau1)
            .iter()
            .sum();
        let gs: f64 = aux_space_derivative(&lat, phi, u, [[0.3, -1.0], [1.0, 0.2]], tau1)
            .iter()
            .sum();
        let scale = s.abs().max(1.0);
        worst_forcing = worst_forcing
            .max((fs - s).abs() / scale)
            .max((ff - s).abs() / scale)
            .max(gt.abs() / (phi * c))
            .max(gs.abs() / (phi * c));
    }
    out.push(check("zeroth-moment conservation", worst_mass, 1e-12));
    out.push(check("equilibrium fixed points", worst_fixed, 1e-12));
    out.push(check("trt-r(tau2 = 1) equals regularized", worst_reduce, 1e-12));
    out.push(check("source and auxiliary direction sums", worst_forcing, 1e-12));

    let mut worst_rate = 0.0_f64;
    for collision in [CollisionKind::Regularized, CollisionKind::TrtR] {
        for tau1 in [0.55, 0.8, 1.2] {
            match measure_diffusion_rate(collision, tau1, Tau2Rule::default(), 128) {
                Ok(r) => worst_rate = worst_rate.max(r.relative_error()),
                Err(_) => worst_rate = f64::INFINITY,
            }
        }
    }
    out.push(check("diffusion-rate recovery", worst_rate, 5e-3));
    out
}

fn configure_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            warn!("worker pool already configured: {e}");
        }
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match CliConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let file = match cli.config.as_deref().map(ConfigFile::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let workers = match file.pick(cli.workers, "workers") {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    configure_workers(workers);
    let result = match &cli.command {
        Command::Pulse(a) => cmd_pulse(a, &file),
        Command::Sweep(a) => cmd_sweep(a, &file),
        Command::Convergence(a) => cmd_convergence(a, &file),
        Command::Slip(a) => cmd_slip(a, &file),
        Command::Selftest => {
            let checks = selftest();
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            return if ok { EXIT_OK } else { EXIT_SELFTEST };
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
