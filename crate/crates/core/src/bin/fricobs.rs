use std::fs::{self, File};
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fricobs::cli::{self, batch::Manifest, emit_plot_script, ExcitationSpec, Figure};
use fricobs::engine::TrajectoryLog;
use fricobs::{Error, Result};

/// Velocity observer and friction compensation simulator.
#[derive(Parser)]
#[command(name = "fricobs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Pe,
    Intervals,
    Conservative,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write logs, metrics and a manifest.
    Simulate {
        scenario: PathBuf,
        /// Output directory (overrides the scenario's).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Maximum number of runs in flight.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Excitation analysis of the velocity estimate in a trajectory log.
    AnalyzeExcitation {
        log: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Regressor shape parameter.
        #[arg(long, default_value_t = 100.0)]
        vartheta: f64,
        /// pe: window length.
        #[arg(long)]
        window: Option<f64>,
        /// pe: required lower bound on lambda_min.
        #[arg(long)]
        mu: Option<f64>,
        /// pe: window stride (defaults to the sampling period).
        #[arg(long)]
        stride: Option<f64>,
        /// intervals: window width.
        #[arg(long)]
        width: Option<f64>,
        /// intervals: gap between windows.
        #[arg(long, default_value_t = 0.0)]
        gap: f64,
        /// conservative: partition step.
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a gnuplot script for a finished batch.
    Plot {
        manifest: PathBuf,
        #[arg(long)]
        figure: String,
        /// Script path (defaults to `plots/<figure>.gp` next to the manifest).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn need(name: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("--{name} is required for this mode")))
}

fn simulate(scenario: &Path, out: Option<&Path>, jobs: Option<usize>) -> Result<i32> {
    let text = fs::read(scenario)?;
    let sc = cli::parse_scenario(&text)?;
    let summary = cli::run(&sc, out, jobs)?;
    println!("{}", summary.manifest_path.display());
    let diverged = summary.diverged();
    for r in &diverged {
        eprintln!("run {} diverged at t={}", r.label, r.diverged_at.unwrap_or(f64::NAN));
    }
    Ok(if diverged.is_empty() { 0 } else { 3 })
}

fn plot(manifest_path: &Path, figure: &str, out: Option<PathBuf>) -> Result<i32> {
    let figure: Figure = figure.parse()?;
    let manifest = Manifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let script = emit_plot_script(dir, &manifest.runs, figure)?;
    let out = out.unwrap_or_else(|| dir.join("plots").join(format!("{}.gp", figure.name())));
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&out, script)?;
    println!("{}", out.display());
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate { scenario, out, jobs } => simulate(&scenario, out.as_deref(), jobs),
        Command::AnalyzeExcitation {
            log,
            mode,
            vartheta,
            window,
            mu,
            stride,
            width,
            gap,
            step,
            start,
            out,
        } => {
            let spec = match mode {
                Mode::Pe => ExcitationSpec::Pe {
                    window: need("window", window)?,
                    mu: need("mu", mu)?,
                    stride,
                },
                Mode::Intervals => ExcitationSpec::Intervals {
                    width: need("width", width)?,
                    start,
                    gap,
                },
                Mode::Conservative => ExcitationSpec::Conservative {
                    step: need("step", step)?,
                    start,
                },
            };
            let traj = TrajectoryLog::read_csv(BufReader::new(File::open(&log)?))?;
            let rs = cli::regressor_from_log(&traj, vartheta)?;
            let report = cli::analyze(&rs, &spec)?;
            match out {
                Some(p) => report.write_csv(File::create(p)?)?,
                None => report.write_csv(io::stdout().lock())?,
            }
            Ok(0)
        }
        Command::Plot { manifest, figure, out } => plot(&manifest, &figure, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
