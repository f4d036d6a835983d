//! `blochgate`: synthesize gates, verify stored runs, dump basis tables.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 solver failure,
//! 3 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blochgate::model::{preset_experiment, ExperimentConfig, GatePreset};
use blochgate::report::{
    epsilon_label, export_report, plot_data, verify_run_dir, write_basis_tables, RunSummary,
};
use blochgate::synthesis::{
    continuation_solve, select_horizon, CompiledExperiment, VerificationThresholds,
};
use blochgate::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "blochgate",
    version,
    about = "Optimal-control synthesis of qubit gates"
)]
struct Cli {
    /// Directory for cached structure constants.
    #[arg(long, global = true, env = "BLOCHGATE_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the continuation for a JSON experiment config.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
        /// Run directory (default: runs/<config file stem>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pick T by scanning the running terminal cost, starting from this T_max.
        #[arg(long, value_name = "T_MAX")]
        horizon_search: Option<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one of the built-in experiments.
    Preset {
        /// not, h, s, t, cnot, cz or toffoli.
        #[arg(required_unless_present = "all", conflicts_with = "all")]
        name: Option<String>,
        /// Run every preset, one worker thread each.
        #[arg(long)]
        all: bool,
        /// Parent directory; each run goes to <out>/<name>.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Print the preset as a JSON config and exit.
        #[arg(long, conflicts_with = "all")]
        print_config: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Re-verify a run directory from its stored files.
    Verify { run_dir: PathBuf },
    /// Write the operator basis and structure constants for dimension d.
    Basis {
        #[arg(long, short)]
        dim: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Emit long-format CSV of a run directory for external plotting.
    PlotData {
        run_dir: PathBuf,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
struct Overrides {
    /// Comma-separated ε schedule, e.g. "5,0.5".
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long)]
    tol: Option<f64>,
    /// Initial number of mesh nodes.
    #[arg(long)]
    mesh: Option<usize>,
    #[arg(long)]
    max_nodes: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(e) = &self.epsilon {
            cfg.cost.epsilon_schedule = e.clone();
        }
        if let Some(t) = self.tol {
            cfg.solver.tol = t;
        }
        if let Some(m) = self.mesh {
            cfg.solver.mesh = m;
        }
        if let Some(m) = self.max_nodes {
            cfg.solver.max_nodes = Some(m);
        }
    }
}

/// Process outcome, ordered by precedence when several runs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Outcome {
    Success = 0,
    Verification = 3,
    Solver = 2,
    Usage = 1,
}

impl Outcome {
    fn code(self) -> ExitCode {
        ExitCode::from(self as u8)
    }
}

fn classify(err: &Error) -> Outcome {
    match err {
        Error::Bvp(_)
        | Error::Divergence { .. }
        | Error::SingularFeedback(_)
        | Error::Controls(_) => Outcome::Solver,
        _ => Outcome::Usage,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Outcome::Usage.code()
            } else {
                Outcome::Success.code()
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BLOCHGATE_LOG", level)).init();
    let cache = cli.cache_dir.as_deref();
    let outcome = match cli.command {
        Command::Synthesize {
            config,
            out,
            horizon_search,
            overrides,
        } => synthesize(&config, out, horizon_search, &overrides, cache),
        Command::Preset {
            name,
            all,
            out,
            print_config,
            overrides,
        } => {
            if all {
                run_all_presets(&out, &overrides, cache)
            } else {
                let name = name.expect("clap enforces a name without --all");
                if print_config {
                    print_preset(&name, &overrides)
                } else {
                    report(run_preset(&name, &out, &overrides, cache))
                }
            }
        }
        Command::Verify { run_dir } => verify(&run_dir, cache),
        Command::Basis { dim, out } => basis(dim, &out),
        Command::PlotData { run_dir, out } => plot(&run_dir, out.as_deref()),
    };
    outcome.code()
}

/// Text printed for one finished run and its outcome.
struct RunReport {
    text: String,
    outcome: Outcome,
}

fn report(r: RunReport) -> Outcome {
    if r.outcome == Outcome::Success {
        print!("{}", r.text);
    } else {
        eprint!("{}", r.text);
    }
    r.outcome
}

fn failure(context: &str, err: &Error) -> RunReport {
    RunReport {
        text: format!("{context}: error: {err}\n"),
        outcome: classify(err),
    }
}

fn preset_config(name: &str, overrides: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = preset_experiment(name)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn print_preset(name: &str, overrides: &Overrides) -> Outcome {
    match preset_config(name, overrides) {
        Ok(cfg) => {
            println!("{}", cfg.to_json());
            Outcome::Success
        }
        Err(e) => report(failure(name, &e)),
    }
}

fn run_preset(name: &str, out: &Path, overrides: &Overrides, cache: Option<&Path>) -> RunReport {
    match preset_config(name, overrides) {
        Ok(cfg) => execute(name, cfg, &out.join(name.to_ascii_lowercase()), cache),
        Err(e) => failure(name, &e),
    }
}

fn run_all_presets(out: &Path, overrides: &Overrides, cache: Option<&Path>) -> Outcome {
    let reports: Vec<RunReport> = std::thread::scope(|scope| {
        let handles: Vec<_> = GatePreset::ALL
            .iter()
            .map(|p| {
                let name = p.name().to_string();
                scope.spawn(move || run_preset(&name, out, overrides, cache))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("preset worker panicked"))
            .collect()
    });
    reports
        .into_iter()
        .map(report)
        .max()
        .unwrap_or(Outcome::Success)
}

fn synthesize(
    path: &Path,
    out: Option<PathBuf>,
    horizon_search: Option<f64>,
    overrides: &Overrides,
    cache: Option<&Path>,
) -> Outcome {
    let label = path.display().to_string();
    let mut cfg = match ExperimentConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => return report(failure(&label, &e)),
    };
    overrides.apply(&mut cfg);
    if let Err(e) = cfg.validate() {
        return report(failure(&label, &e));
    }
    if let Some(t_max) = horizon_search {
        match select_horizon(&cfg, t_max, cache) {
            Ok(sel) => {
                println!(
                    "horizon: T = {:.6} after trying {:?}{}",
                    sel.horizon,
                    sel.tried,
                    if sel.interior_minimum {
                        ""
                    } else {
                        " (no interior minimum)"
                    }
                );
                cfg.cost.horizon = sel.horizon;
            }
            Err(e) => return report(failure(&label, &e)),
        }
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let dir = out.unwrap_or_else(|| Path::new("runs").join(&stem));
    let name = cfg.name.clone().unwrap_or(stem);
    report(execute(&name, cfg, &dir, cache))
}

fn execute(name: &str, cfg: ExperimentConfig, dir: &Path, cache: Option<&Path>) -> RunReport {
    let exp = match CompiledExperiment::new(cfg, cache) {
        Ok(e) => e,
        Err(e) => return failure(name, &e),
    };
    let run = match continuation_solve(exp) {
        Ok(r) => r,
        Err(e) => return failure(name, &e),
    };
    let thresholds = VerificationThresholds::default();
    let summary = match export_report(&run, dir, &thresholds) {
        Ok(s) => s,
        Err(e) => return failure(name, &e),
    };
    let mut text = format_summary(name, &summary);
    text.push_str(&format!("  written to {}\n", dir.display()));
    let outcome = if !summary.succeeded {
        let eps = summary
            .failed_epsilon
            .map(epsilon_label)
            .unwrap_or_default();
        text.push_str(&format!("  solver failed at ε = {eps}\n"));
        Outcome::Solver
    } else {
        let failures = summary.verification_failures();
        for (eps, list) in &failures {
            for f in list {
                text.push_str(&format!(
                    "  verification failed at ε = {}: {f}\n",
                    epsilon_label(*eps)
                ));
            }
        }
        if failures.is_empty() {
            Outcome::Success
        } else {
            Outcome::Verification
        }
    };
    RunReport { text, outcome }
}

fn format_summary(name: &str, summary: &RunSummary) -> String {
    let mut header = format!("{name:<8} ε:");
    let mut costs = format!("{:<8} J:", "");
    for (label, value) in &summary.terminal_costs {
        let v = value.as_f64().unwrap_or(f64::NAN);
        let cell = format!("{v:.5}");
        let w = cell.len().max(label.len());
        header.push_str(&format!(" {label:>w$}"));
        costs.push_str(&format!(" {cell:>w$}"));
    }
    let nodes = summary.stages.last().map(|s| s.final_nodes).unwrap_or(0);
    format!("{header}\n{costs}\n  final mesh: {nodes} nodes\n")
}

fn verify(run_dir: &Path, cache: Option<&Path>) -> Outcome {
    let thresholds = VerificationThresholds::default();
    match verify_run_dir(run_dir, &thresholds, cache) {
        Ok(checks) => {
            let mut outcome = Outcome::Success;
            for c in &checks {
                let label = epsilon_label(c.epsilon);
                if c.failures.is_empty() {
                    println!("stage {label}: ok");
                } else {
                    outcome = Outcome::Verification;
                    for f in &c.failures {
                        eprintln!("stage {label}: {f}");
                    }
                }
            }
            outcome
        }
        Err(e) => {
            eprintln!("{}: error: {e}", run_dir.display());
            Outcome::Usage
        }
    }
}

fn basis(d: usize, out: &Path) -> Outcome {
    if d > 8 && !d.is_power_of_two() || d > 16 {
        log::warn!("d = {d}: structure constants grow like d⁴ in the worst case");
    }
    match write_basis_tables(d, out) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            Outcome::Success
        }
        Err(e) => {
            eprintln!("basis: error: {e}");
            Outcome::Usage
        }
    }
}

fn plot(run_dir: &Path, out: Option<&Path>) -> Outcome {
    let text = match plot_data(run_dir) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: error: {e}", run_dir.display());
            return Outcome::Usage;
        }
    };
    match out {
        Some(path) => match std::fs::write(path, text) {
            Ok(()) => Outcome::Success,
            Err(e) => {
                eprintln!("{}: error: {e}", path.display());
                Outcome::Usage
            }
        },
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Ok(()) => Outcome::Success,
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Outcome::Success,
                Err(e) => {
                    eprintln!("stdout: error: {e}");
                    Outcome::Usage
                }
            }
        }
    }
}
