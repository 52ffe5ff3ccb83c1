//! Command-line front end: JSON configuration, orchestration and output files.

use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::audit::{audit_reference_example, format_audit};
use crate::bifurcation::{
    a3_crossings, slope_crossings, sweep_a3, sweep_slopes, write_sweep_csv, BifurcationPoint, SweepBase, SweepRecord,
};
use crate::cycle::{solve_one_cycle, CycleSpec, StateVec};
use crate::design::{design, DesignOptions, DesignResult};
use crate::error::IgoError;
use crate::model::{IgoModel, PlantParams};
use crate::sim::{dense_trajectory, simulate_impulses, write_events_csv, write_trajectory_csv, ImpulseEvent};
use crate::stability::{jacobian, stability_report};
use crate::svg::{plot, project_oblique, Series};

#[derive(Debug, Parser)]
#[command(name = "igo", version, about = "Impulsive Goodwin's oscillator design and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: SubCommand,
    /// JSON configuration; built-in defaults are used when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write SVG plots
    #[arg(long, global = true)]
    pub plots: bool,
    /// Seed for randomized initial states
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum SubCommand {
    /// Calibrate modulation laws for a prescribed stable 1-cycle
    Design,
    /// Simulate impulses and the continuous trajectory
    Simulate,
    /// Parameter sweep with multiplier tracking
    Sweep,
    /// Recompute the reference worked example
    Check,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Domain(#[from] IgoError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub plant: PlantParams,
    pub cycle: CycleSpec,
    #[serde(default)]
    pub options: DesignOptions,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Start {
    /// Scaled copy of the realized fixed point.
    FixedPoint {
        #[serde(default = "default_scale")]
        scale: f64,
    },
    State {
        x: [f64; 3],
    },
    /// Independent uniform components, drawn with the run seed.
    Random {
        low: f64,
        high: f64,
    },
}

fn default_scale() -> f64 {
    0.9
}

impl Default for Start {
    fn default() -> Self {
        Start::FixedPoint { scale: default_scale() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Inline model.
    #[serde(default)]
    pub model: Option<IgoModel>,
    /// Path to a design report written by `design`.
    #[serde(default)]
    pub design_report: Option<PathBuf>,
    /// Design to run first.
    #[serde(default)]
    pub design: Option<DesignConfig>,
    #[serde(default)]
    pub start: Start,
    #[serde(default = "default_impulses")]
    pub n_impulses: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Length of the dense trajectory; defaults to the last firing time.
    #[serde(default)]
    pub t_end: Option<f64>,
}

fn default_impulses() -> usize {
    100
}

fn default_dt() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepConfig {
    A3 { base: SweepBase, cycle: CycleSpec, range: (f64, f64), points: usize },
    Slopes { plant: PlantParams, cycle: CycleSpec, f_prime_range: (f64, f64), k2: f64, k4: f64, points: usize },
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    Design(DesignConfig),
    Simulate(SimulateConfig),
    Sweep(SweepConfig),
    Check(CheckConfig),
}

impl Command {
    fn sub(&self) -> SubCommand {
        match self {
            Command::Design(_) => SubCommand::Design,
            Command::Simulate(_) => SubCommand::Simulate,
            Command::Sweep(_) => SubCommand::Sweep,
            Command::Check(_) => SubCommand::Check,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSettings {
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    plots: bool,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub out: Option<PathBuf>,
    pub plots: bool,
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Parse a configuration document; `out`, `plots` and `seed` may sit
    /// next to the `command` discriminator.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let mut v: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let obj = v.as_object_mut().ok_or_else(|| CliError::Config("top level must be a JSON object".into()))?;
        let mut settings = serde_json::Map::new();
        for key in ["out", "plots", "seed"] {
            if let Some(x) = obj.remove(key) {
                settings.insert(key.to_string(), x);
            }
        }
        let s: RunSettings =
            serde_json::from_value(Value::Object(settings)).map_err(|e| CliError::Config(e.to_string()))?;
        let command: Command = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { command, out: s.out, plots: s.plots, seed: s.seed })
    }
}

fn reference_plant() -> PlantParams {
    PlantParams::new(0.08, 0.15, 0.12, 2.0, 0.5).expect("valid constants")
}

fn reference_cycle() -> CycleSpec {
    CycleSpec::new(4.66, 66.75).expect("valid constants")
}

/// Built-in configuration for each subcommand, based on the worked example.
pub fn default_command(sub: SubCommand) -> Command {
    let design = DesignConfig { plant: reference_plant(), cycle: reference_cycle(), options: DesignOptions::default() };
    match sub {
        SubCommand::Design => Command::Design(design),
        SubCommand::Simulate => Command::Simulate(SimulateConfig {
            model: None,
            design_report: None,
            design: Some(design),
            start: Start::default(),
            n_impulses: default_impulses(),
            dt: default_dt(),
            t_end: None,
        }),
        SubCommand::Sweep => Command::Sweep(SweepConfig::A3 {
            base: SweepBase { a1: 0.08, a2: 0.15, g1: 2.0, g2: 0.5, k1: 60.0, k2: 40.0, k3: 3.0, k4: 2.0, p: 2.0 },
            cycle: CycleSpec::new(4.66, 66.7502).expect("valid constants"),
            range: (0.1505, 0.54),
            points: 200,
        }),
        SubCommand::Check => Command::Check(CheckConfig {}),
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> CliResult<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_string(path: &Path, s: &str) -> CliResult<()> {
    fs::write(path, s).map_err(io_err(path))
}

/// Resolve the effective configuration from flags and the optional file.
pub fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig { command: default_command(cli.command), out: None, plots: false, seed: None },
    };
    if cfg.command.sub() != cli.command {
        return Err(CliError::Usage(format!(
            "subcommand {:?} does not match config command {:?}",
            cli.command,
            cfg.command.sub()
        )));
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    cfg.plots |= cli.plots;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    Ok(cfg)
}

/// Execute a resolved configuration; returns the human-readable summary.
pub fn execute(cfg: &RunConfig) -> CliResult<String> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if !matches!(cfg.command, Command::Check(_)) {
        fs::create_dir_all(&out).map_err(io_err(&out))?;
    }
    match &cfg.command {
        Command::Design(d) => cmd_design(d, &out),
        Command::Simulate(s) => cmd_simulate(s, &out, cfg.plots, cfg.seed.unwrap_or(0)),
        Command::Sweep(s) => cmd_sweep(s, &out),
        Command::Check(_) => cmd_check(),
    }
}

pub fn run(cli: &Cli) -> CliResult<String> {
    execute(&resolve(cli)?)
}

fn design_summary(r: &DesignResult) -> String {
    let h = &r.model.hill;
    let st = &r.stability;
    let mut s = format!(
        "cycle: lambda = {}, T = {}, z0 = {}\n\
         slopes: F'(z0) = {}, Phi'(z0) = {}\n\
         Phi: k1 = {}, k2 = {}, h = {}, p = {}\n\
         F:   k3 = {}, k4 = {}, h = {}, p = {}\n\
         multipliers: {}\n\
         r0 = {}, tau = {}, schur = {}\n",
        r.cycle.lambda,
        r.cycle.period,
        r.cycle.z0,
        r.slopes.f_prime(),
        r.slopes.phi_prime(),
        h.k1(),
        h.k2(),
        h.h_phi(),
        h.p_phi(),
        h.k3(),
        h.k4(),
        h.h_f(),
        h.p_f(),
        st.multipliers.iter().map(|z| format!("{z:.6e}")).collect::<Vec<_>>().join(", "),
        st.r0,
        st.tau.map(|t| t.to_string()).unwrap_or_else(|| "n/a".into()),
        st.is_schur,
    );
    for w in &r.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}

fn cmd_design(cfg: &DesignConfig, out: &Path) -> CliResult<String> {
    let r = design(&cfg.plant, &cfg.cycle, &cfg.options)?;
    let path = out.join("design_report.json");
    let json = serde_json::to_string_pretty(&r).map_err(|e| CliError::Config(e.to_string()))?;
    write_string(&path, &(json + "\n"))?;
    Ok(design_summary(&r))
}

fn load_model(cfg: &SimulateConfig) -> CliResult<(IgoModel, Option<String>)> {
    let sources = cfg.model.is_some() as u8 + cfg.design_report.is_some() as u8 + cfg.design.is_some() as u8;
    if sources != 1 {
        return Err(CliError::Config("simulate needs exactly one of `model`, `design_report` or `design`".into()));
    }
    if let Some(m) = cfg.model {
        return Ok((m, None));
    }
    if let Some(path) = &cfg.design_report {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        let model = v
            .get_mut("model")
            .map(Value::take)
            .ok_or_else(|| CliError::Config(format!("{}: no `model` entry", path.display())))?;
        let model: IgoModel = serde_json::from_value(model).map_err(|e| CliError::Config(e.to_string()))?;
        return Ok((model, None));
    }
    let d = cfg.design.as_ref().expect("one source present");
    let r = design(&d.plant, &d.cycle, &d.options)?;
    Ok((r.model, Some(design_summary(&r))))
}

fn initial_state(start: &Start, fixed: Option<StateVec>, seed: u64) -> CliResult<StateVec> {
    match *start {
        Start::FixedPoint { scale } => fixed
            .map(|x| x.scaled(scale))
            .ok_or_else(|| CliError::Config("model has no 1-cycle to start from; give an explicit start".into())),
        Start::State { x } => Ok(x.into()),
        Start::Random { low, high } => {
            if !(low > 0.0 && high > low) {
                return Err(CliError::Config(format!("random start needs 0 < low < high, got {low}, {high}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(StateVec::new(rng.gen_range(low..high), rng.gen_range(low..high), rng.gen_range(low..high)))
        }
    }
}

fn convergence_note(events: &[ImpulseEvent], lambda: f64) -> &'static str {
    let n = events.len();
    if n < 4 {
        return "too few impulses to judge convergence";
    }
    let w = (n / 4).max(1);
    let dev = |e: &[ImpulseEvent]| e.iter().map(|e| (e.lambda - lambda).abs()).fold(0.0, f64::max);
    let (head, tail) = (dev(&events[..w]), dev(&events[n - w..]));
    if tail <= 1e-9 * lambda.max(1.0) || tail < 0.5 * head {
        "weights converge to the cycle value"
    } else {
        "DIVERGENCE: weights do not settle on the cycle value"
    }
}

fn cmd_simulate(cfg: &SimulateConfig, out: &Path, plots: bool, seed: u64) -> CliResult<String> {
    if !(cfg.dt > 0.0) {
        return Err(CliError::Config(format!("dt must be positive, got {}", cfg.dt)));
    }
    if cfg.n_impulses == 0 {
        return Err(CliError::Config("n_impulses must be at least 1".into()));
    }
    let (model, design_text) = load_model(cfg)?;
    let cycle = solve_one_cycle(&model).ok();
    let x0 = initial_state(&cfg.start, cycle.map(|c| c.x), seed)?;
    let events = simulate_impulses(&model, &x0, cfg.n_impulses)?;
    let last = events.last().expect("n_impulses >= 1");
    let t_end = cfg.t_end.unwrap_or(last.t.max(last.interval));
    let traj = dense_trajectory(&model, &x0, t_end, cfg.dt)?;

    let tp = out.join("trajectory.csv");
    write_trajectory_csv(create(&tp)?, &traj).map_err(io_err(&tp))?;
    let ep = out.join("events.csv");
    write_events_csv(create(&ep)?, &events).map_err(io_err(&ep))?;

    let mut s = design_text.unwrap_or_default();
    s.push_str(&format!("start: {:?}\n", x0.to_array()));
    s.push_str(&format!("{} impulses up to t = {}, {} trajectory samples\n", events.len(), last.t, traj.len()));
    match cycle {
        Some(c) => {
            let rep = stability_report(&jacobian(&model, &c.x)?);
            s.push_str(&format!(
                "1-cycle: lambda = {}, T = {}, r0 = {}, schur = {}\n",
                c.lambda, c.period, rep.r0, rep.is_schur
            ));
            s.push_str(convergence_note(&events, c.lambda));
            s.push('\n');
        }
        None => s.push_str("no 1-cycle found for this model\n"),
    }

    if plots {
        let pts: Vec<[f64; 3]> = traj.iter().map(|p| p.x.to_array()).collect();
        let svg = plot(
            "Phase portrait (x1, x2, x3), oblique projection",
            "x1 + x2/2 cos 30°",
            "x3 + x2/2 sin 30°",
            &[Series { points: project_oblique(&pts), color: "steelblue", markers: false }],
        );
        write_string(&out.join("phase_x1x2x3.svg"), &svg)?;
        let mut series = vec![Series {
            points: events.iter().map(|e| (e.n as f64, e.lambda)).collect(),
            color: "steelblue",
            markers: true,
        }];
        if let Some(c) = cycle {
            series.push(Series {
                points: vec![(0.0, c.lambda), ((events.len() - 1) as f64, c.lambda)],
                color: "firebrick",
                markers: false,
            });
        }
        let svg = plot("Impulse weights", "n", "lambda_n", &series);
        write_string(&out.join("lambda_sequence.svg"), &svg)?;
    }
    Ok(s)
}

#[derive(Debug, Serialize)]
struct BifurcationFile<'a> {
    sweep: &'static str,
    points: usize,
    failed_points: usize,
    crossings: &'a [BifurcationPoint],
}

fn cmd_sweep(cfg: &SweepConfig, out: &Path) -> CliResult<String> {
    let (kind, records, crossings): (&'static str, Vec<SweepRecord>, _) = match cfg {
        SweepConfig::A3 { base, cycle, range, points } => {
            check_range(*range, *points)?;
            let recs = sweep_a3(base, cycle, *range, *points);
            let c = a3_crossings(base, cycle, &recs);
            ("a3", recs, c)
        }
        SweepConfig::Slopes { plant, cycle, f_prime_range, k2, k4, points } => {
            check_range(*f_prime_range, *points)?;
            let recs = sweep_slopes(plant, cycle, *f_prime_range, *k2, *k4, *points)?;
            let c = slope_crossings(plant, cycle, *k2, *k4, &recs);
            ("f_prime", recs, c)
        }
    };
    let failed = records.iter().filter(|r| r.multipliers.is_none()).count();
    if failed == records.len() {
        let first = records.first().and_then(|r| r.error.clone()).unwrap_or_default();
        return Err(CliError::Domain(IgoError::Infeasible {
            step: "sweep",
            reason: format!("every sweep point failed; first error: {first}"),
        }));
    }
    let crossings = crossings?;
    let sp = out.join("sweep.csv");
    write_sweep_csv(create(&sp)?, &records).map_err(io_err(&sp))?;
    let file = BifurcationFile { sweep: kind, points: records.len(), failed_points: failed, crossings: &crossings };
    let json = serde_json::to_string_pretty(&file).map_err(|e| CliError::Config(e.to_string()))?;
    write_string(&out.join("bifurcations.json"), &(json + "\n"))?;

    let mut s = format!("{kind} sweep: {} points, {failed} failed\n", records.len());
    for c in &crossings {
        s.push_str(&format!(
            "{:?} at {kind} = {} (bracket [{}, {}]), multiplier {:.8}\n",
            c.kind, c.param, c.param_lo, c.param_hi, c.multiplier
        ));
    }
    if crossings.is_empty() {
        s.push_str("no crossings detected\n");
    }
    Ok(s)
}

fn check_range(range: (f64, f64), points: usize) -> CliResult<()> {
    if points == 0 || !(range.0 < range.1) {
        return Err(CliError::Usage(format!("empty sweep range {range:?} with {points} points")));
    }
    Ok(())
}

fn cmd_check() -> CliResult<String> {
    Ok(format_audit(&audit_reference_example()?))
}
