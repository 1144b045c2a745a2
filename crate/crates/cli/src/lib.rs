//! Command-line front end: scenario files, synthesis runs, simulations,
//! comparisons and the reference-example reproduction.

pub mod gains;
mod reproduce;
pub mod report;
pub mod scenario;

use std::ffi::OsString;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use thiserror::Error;

use rendezvous_core::simulator::{
    compare, read_csv, run, write_csv, Lower, RunError, SaturationMode, SimErrorKind, Trajectory,
};
use rendezvous_core::synthesis::{
    assemble_partially_independent, min_feasible_thrust, synth_coupled, synth_in_plane, synth_out_of_plane,
    SynthesisOptions, SynthesisReport, ThrustSearch,
};
use rendezvous_core::dynamics::{build_plant, split_in_plane, split_out_of_plane};

use gains::{GainChoice, GainsFile};
use report::{write_atomic, ReportDoc};
use scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "rendezvous", version, about = "Robust rendezvous controller synthesis and two-body validation")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a controller synthesis program and write its report.
    Synth(SynthArgs),
    /// Simulate a feedback gain and write the trajectory CSV.
    Simulate(SimulateArgs),
    /// Compare the accumulated cost of two trajectory CSVs.
    Compare(CompareArgs),
    /// Bisect for the smallest feasible in-plane thrust bound.
    MinThrust(MinThrustArgs),
    /// Run the whole reference example and write reports, CSVs and a summary.
    ReproducePaper(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    InPlane,
    OutOfPlane,
    Coupled,
    PartiallyIndependent,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario file (defaults to the bundled reference scenario).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "partially-independent")]
    pub which: Which,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Gains file (defaults to the bundled printed gains).
    #[arg(long)]
    pub gains: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub gain: GainChoice,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Output file name inside `--out`.
    #[arg(long, default_value = "trajectory.csv")]
    pub name: String,
    /// Simulated horizon, s (overrides the scenario).
    #[arg(long)]
    pub duration: Option<f64>,
    /// Integration step, s (overrides the scenario).
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// First trajectory CSV.
    pub a: PathBuf,
    /// Second trajectory CSV.
    pub b: PathBuf,
    /// Also report `J_total` at this time, s.
    #[arg(long)]
    pub at: Option<f64>,
    /// Directory for `comparison.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MinThrustArgs {
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, default_value = "reproduction")]
    pub out: PathBuf,
    /// Horizon of the two-body runs, s.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Integration step, s.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Config(anyhow::Error),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Config(e)
    }
}

impl From<rendezvous_core::Error> for CliError {
    fn from(e: rendezvous_core::Error) -> Self {
        match e {
            rendezvous_core::Error::Infeasible { .. } | rendezvous_core::Error::NoFeasibleBound { .. } => {
                CliError::Infeasible(e.to_string())
            }
            other => CliError::Config(other.into()),
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::MinThrust(a) => cmd_min_thrust(a),
        Command::ReproducePaper(a) => reproduce::cmd_reproduce_paper(a),
    }
}

fn apply_overrides(s: &mut Scenario, duration: Option<f64>, step: Option<f64>) -> Result<(), CliError> {
    if let Some(d) = duration {
        s.sim.duration = d;
    }
    if let Some(h) = step {
        s.sim.step = h;
    }
    s.sim.validate().map_err(|e| CliError::Usage(e.to_string()))
}

pub(crate) fn synth_report(s: &Scenario, which: Which) -> Result<Vec<(&'static str, SynthesisReport<f64>)>, CliError> {
    let plant = build_plant(&s.orbit, &s.chaser);
    let opts = SynthesisOptions::default();
    let [ux, uy, uz] = s.chaser.thrust_bounds();
    let in_plane = || synth_in_plane(&split_in_plane(&plant), &s.q_p, &s.r_p, &s.p0(), [ux, uy], &opts);
    let out_of_plane = || synth_out_of_plane(&split_out_of_plane(&plant), &s.q_q, s.r_q, &opts);
    Ok(match which {
        Which::InPlane => vec![("in_plane", in_plane()?)],
        Which::OutOfPlane => vec![("out_of_plane", out_of_plane()?)],
        Which::PartiallyIndependent => vec![("in_plane", in_plane()?), ("out_of_plane", out_of_plane()?)],
        Which::Coupled => {
            let mut q = DMatrix::zeros(6, 6);
            let mut r = DMatrix::zeros(3, 3);
            for (i, &a) in [0usize, 1, 3, 4].iter().enumerate() {
                for (j, &b) in [0usize, 1, 3, 4].iter().enumerate() {
                    q[(a, b)] = s.q_p[(i, j)];
                }
            }
            for (i, &a) in [2usize, 5].iter().enumerate() {
                for (j, &b) in [2usize, 5].iter().enumerate() {
                    q[(a, b)] = s.q_q[(i, j)];
                }
            }
            r.view_mut((0, 0), (2, 2)).copy_from(&s.r_p);
            r[(2, 2)] = s.r_q;
            let x0 = nalgebra::DVector::from_column_slice(s.x0.to_vector().as_slice());
            vec![("coupled", synth_coupled(&plant, &q, &r, &x0, [ux, uy, uz], &opts)?)]
        }
    })
}

pub(crate) fn write_reports(
    out: &Path,
    which: Which,
    reports: &[(&'static str, SynthesisReport<f64>)],
) -> Result<GainsFile, CliError> {
    let mut gains = GainsFile::default();
    for (name, r) in reports {
        let doc = ReportDoc::new(name, r);
        write_atomic(&out.join(format!("report_{name}.toml")), doc.to_toml()?.as_bytes())?;
        match *name {
            "in_plane" => gains.set("k_p", &r.k),
            "out_of_plane" => gains.set("k_q", &r.k),
            _ => gains.set("k_cc", &r.k),
        }
    }
    let stem = match which {
        Which::InPlane => "in_plane",
        Which::OutOfPlane => "out_of_plane",
        Which::Coupled => "coupled",
        Which::PartiallyIndependent => {
            let pic = assemble_partially_independent(&gains.k_p()?, &gains.k_q()?)?;
            gains.set("k", &pic.k_pic);
            "partially_independent"
        }
    };
    write_atomic(&out.join(format!("gains_{stem}.toml")), gains.to_toml()?.as_bytes())?;
    Ok(gains)
}

fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let s = Scenario::load(a.scenario.as_deref())?;
    let reports = synth_report(&s, a.which)?;
    let gains = write_reports(&a.out, a.which, &reports)?;
    for (name, r) in &reports {
        println!(
            "{name}: {:?}, certificate lambda_max {:.3e}, worst abscissa {:.3e}",
            r.bound, r.certificate_max_eigenvalue, r.verification.worst_abscissa
        );
        println!("K = {}", report::matrix_literal(&r.k));
    }
    if a.which == Which::PartiallyIndependent {
        println!("K_pic = {}", report::matrix_literal(&gains.select(GainChoice::K)?));
    }
    Ok(())
}

/// Writes the CSV (partial on failure) and maps run errors to exit codes.
pub(crate) fn simulate_to_csv(
    s: &Scenario,
    k: &DMatrix<f64>,
    path: &Path,
) -> Result<Trajectory<f64>, CliError> {
    match run(&s.orbit, &s.chaser, k, &s.disturbance, &s.sim) {
        Ok(traj) => {
            write_trajectory(&traj, path)?;
            Ok(traj)
        }
        Err(RunError::Config(e)) => Err(CliError::Config(e.into())),
        Err(RunError::Simulation(e)) => {
            write_trajectory(&e.partial, path)?;
            let msg = format!("{e}; partial trajectory written to {}", path.display());
            Err(match e.kind {
                SimErrorKind::Divergence | SimErrorKind::StepFailure | SimErrorKind::SaturationViolated { .. } => {
                    CliError::Divergence(msg)
                }
                SimErrorKind::DegenerateOrbit => CliError::Config(anyhow::anyhow!(msg)),
            })
        }
    }
}

pub(crate) fn write_trajectory(traj: &Trajectory<f64>, path: &Path) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_csv(traj, &mut buf).context("formatting trajectory")?;
    write_atomic(path, &buf)?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut s = Scenario::load(a.scenario.as_deref())?;
    apply_overrides(&mut s, a.duration, a.step)?;
    let gains = match &a.gains {
        Some(p) => GainsFile::load(p)?,
        None => GainsFile::bundled(),
    };
    let k = gains.select(a.gain)?;
    let path = a.out.join(&a.name);
    let traj = simulate_to_csv(&s, &k, &path)?;
    let last = traj.last().expect("a run records at least its initial state");
    let f = traj.max_thrust();
    println!("wrote {} ({} samples)", path.display(), traj.samples.len());
    println!(
        "t = {:.1} s: in-plane distance {:.4} m, |z| {:.4e} m, J_total {:.6e}; max |z| {:.4e} m; max |f| = [{:.3}, {:.3}, {:.3}] N ({})",
        last.t,
        last.state.in_plane_distance(),
        last.state.z.abs(),
        last.j_total,
        traj.max_abs_z(),
        f.x,
        f.y,
        f.z,
        saturation_note(traj.saturation)
    );
    Ok(())
}

pub(crate) fn saturation_note(mode: SaturationMode) -> &'static str {
    match mode {
        SaturationMode::Clamp => "thrust clamped per axis",
        SaturationMode::Assert => "thrust limits asserted",
    }
}

fn load_trajectory(path: &Path) -> Result<Trajectory<f64>, CliError> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_csv(BufReader::new(file), SaturationMode::Clamp).with_context(|| format!("reading {}", path.display()))?)
}

fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    let ta = load_trajectory(&a.a)?;
    let tb = load_trajectory(&a.b)?;
    let c = compare(&ta, &tb).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(t) = a.at {
        let (sa, sb) = (ta.at(t), tb.at(t));
        match (sa, sb) {
            (Some(sa), Some(sb)) => println!("J_total at t = {t} s: a {:.6e}, b {:.6e}", sa.j_total, sb.j_total),
            _ => return Err(CliError::Usage(format!("time {t} s is outside the trajectories"))),
        }
    }
    println!("terminal J_total: a {:.6e}, b {:.6e}", c.terminal_a, c.terminal_b);
    println!(
        "lower: {}",
        match c.lower {
            Lower::A => "a",
            Lower::B => "b",
            Lower::Equal => "equal",
        }
    );
    if let Some(out) = &a.out {
        let mut text = String::from("t,Jtotal_a,Jtotal_b\n");
        for (t, ja, jb) in &c.points {
            text.push_str(&format!("{t:.16e},{ja:.16e},{jb:.16e}\n"));
        }
        write_atomic(&out.join("comparison.csv"), text.as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, serde::Serialize)]
#[allow(non_snake_case)]
pub(crate) struct MinThrustDoc {
    pub thrust_N: f64,
    pub resolution_N: f64,
    pub bracket_N: [f64; 2],
    pub monotone: bool,
    pub probes_N: Vec<f64>,
    pub probes_feasible: Vec<bool>,
}

pub(crate) fn min_thrust(s: &Scenario) -> Result<MinThrustDoc, CliError> {
    let plant = build_plant(&s.orbit, &s.chaser);
    let search = ThrustSearch::default();
    let m = min_feasible_thrust(&split_in_plane(&plant), &s.q_p, &s.r_p, &s.p0(), search, &SynthesisOptions::default())?;
    Ok(MinThrustDoc {
        thrust_N: m.thrust,
        resolution_N: search.resolution,
        bracket_N: [search.lower, search.upper],
        monotone: m.monotone,
        probes_N: m.probes.iter().map(|p| p.0).collect(),
        probes_feasible: m.probes.iter().map(|p| p.1).collect(),
    })
}

fn cmd_min_thrust(a: &MinThrustArgs) -> Result<(), CliError> {
    let s = Scenario::load(a.scenario.as_deref())?;
    let doc = min_thrust(&s)?;
    println!(
        "minimum feasible in-plane thrust: {:.3} N ({} probes, monotone: {})",
        doc.thrust_N,
        doc.probes_N.len(),
        doc.monotone
    );
    if let Some(out) = &a.out {
        let text = toml::to_string_pretty(&doc).context("serializing report")?;
        write_atomic(&out.join("min_thrust.toml"), text.as_bytes())?;
    }
    Ok(())
}
