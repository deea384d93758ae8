//! Batch front end: `lagflow run` and `lagflow verify`.
//!
//! Exit codes: 0 converged or completed (or all checks passed), 1 a
//! verification check failed, 2 region exit, 3 NaN blow-up, 4 configuration
//! or I/O error, 5 `max_steps` reached without convergence.

pub mod config;
pub mod output;

use crate::flow::{self, Status};
use crate::oracles::{list_checks, run_checks, ClosedForms};
use crate::{Error, Result};
use clap::{ArgGroup, Parser, Subcommand};
use config::RunConfig;
use output::RunSummary;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_REGION_EXIT: i32 = 2;
pub const EXIT_NAN: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_MAX_STEPS: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "lagflow", version, about = "Lagrangian mean curvature flow of potentials on the flat torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate one configuration and write diagnostics.
    #[command(group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
    Run {
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "NAME")]
        preset: Option<String>,
        #[arg(long, value_name = "T")]
        t_end: Option<f64>,
        /// Output directory; relative output paths resolve against it.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
        #[arg(long, value_name = "S")]
        seed: Option<u64>,
    },
    /// Run the first-principles oracle checks.
    Verify {
        /// Run the oracle suite (the default).
        #[arg(long)]
        oracles: bool,
        /// List the checks without running them.
        #[arg(long)]
        list: bool,
    },
}

pub fn exit_code_for(status: Status) -> i32 {
    match status {
        Status::Converged | Status::Completed | Status::Running => EXIT_OK,
        Status::RegionExit => EXIT_REGION_EXIT,
        Status::NanBlowup => EXIT_NAN,
        Status::MaxSteps => EXIT_MAX_STEPS,
    }
}

/// Caps the global worker pool at `LAGFLOW_THREADS` when set.
pub fn init_threads() {
    if let Ok(s) = std::env::var("LAGFLOW_THREADS") {
        match s.trim().parse::<usize>() {
            Ok(k) if k > 0 => {
                if rayon::ThreadPoolBuilder::new().num_threads(k).build_global().is_err() {
                    log::debug!("thread pool already initialised");
                }
            }
            _ => log::warn!("ignoring LAGFLOW_THREADS = {s:?}"),
        }
    }
}

/// Everything a finished `run` produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub trajectory: flow::FlowTrajectory,
    pub summary: RunSummary,
    pub exit_code: i32,
}

fn resolve(out: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out.join(p)
    }
}

/// Generates the initial field, integrates and writes every output file.
pub fn execute(cfg: RunConfig, out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let field = crate::scenarios::generate(&cfg.recipe, cfg.n, cfg.points)?;
    let traj = flow::run(field, &cfg.run_options())?;
    let code = exit_code_for(traj.status);
    let summary = RunSummary::build(&cfg, &traj, code);
    output::write_csv_file(&traj.rows, &resolve(out, &cfg.output.csv_path))?;
    if cfg.output.snapshot_cadence > 0 {
        output::write_snapshots(&traj.snapshots, &resolve(out, &cfg.output.snapshot_dir))?;
    }
    output::write_summary_file(&summary, &resolve(out, &cfg.output.json_summary_path))?;
    Ok(RunOutcome {
        config: cfg,
        trajectory: traj,
        summary,
        exit_code: code,
    })
}

fn load_config(config: Option<&Path>, preset: Option<&str>) -> Result<RunConfig> {
    match (config, preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text)
        }
        (None, Some(name)) => RunConfig::from_preset(name),
        (None, None) => Err(Error::Config("one of --config or --preset is required".into())),
    }
}

fn run_command(
    config: Option<&Path>,
    preset: Option<&str>,
    t_end: Option<f64>,
    out: &Path,
    seed: Option<u64>,
) -> Result<RunOutcome> {
    let mut cfg = load_config(config, preset)?;
    if let Some(t) = t_end {
        cfg.integrator.t_end = t;
    }
    if let Some(s) = seed {
        cfg.recipe.seed = s;
    }
    execute(cfg, out)
}

fn verify_command(list: bool) -> i32 {
    if list {
        for c in list_checks() {
            println!("{:<26} {}", c.name, c.description);
        }
        return EXIT_OK;
    }
    let results = run_checks(&ClosedForms::default());
    let mut ok = true;
    for r in &results {
        ok &= r.passed;
        println!(
            "{} {:<26} {:>11.3e} (limit {:.1e})  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.worst,
            r.limit,
            r.detail
        );
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run {
            config,
            preset,
            t_end,
            out,
            seed,
        } => match run_command(config.as_deref(), preset.as_deref(), t_end, &out, seed) {
            Ok(o) => {
                println!(
                    "{}: {} at t = {} after {} steps",
                    o.summary.name,
                    o.summary.status,
                    o.trajectory.final_field.t,
                    o.trajectory.steps
                );
                o.exit_code
            }
            Err(e) => {
                eprintln!("lagflow: {e}");
                match e {
                    Error::NanBlowup => EXIT_NAN,
                    _ => EXIT_CONFIG,
                }
            }
        },
        Command::Verify { oracles: _, list } => verify_command(list),
    }
}
