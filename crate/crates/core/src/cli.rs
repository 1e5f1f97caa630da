//! The `relax-rd` command line: `run`, `study` and `oracle` driven by a
//! config file.
//!
//! Exit codes: 0 on success, 1 for usage and config errors, 2 when the
//! solver or the output step fails.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, RunConfig};
use crate::error::{Error, Result};
use crate::harness::{convergence_study, oracle_compare, Norm, Reference, RunReport};
use crate::output::{number, report_csv, snapshot_csv, timing_csv, write_atomic};
use crate::relax::run;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAULT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "relax-rd",
    version,
    about = "Relaxed schemes for degenerate reaction-diffusion problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one problem and write `snap_<idx>.csv` files.
    Run(CommonArgs),
    /// Convergence study over the `[study]` grids; writes `report.csv`.
    Study(CommonArgs),
    /// Compare the first-order relaxed scheme with a direct discretisation.
    Oracle(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (default: the config's `out`, else `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for studies; 0 lets the pool decide.
    #[arg(long, env = "RELAXRD_THREADS")]
    pub threads: Option<usize>,
}

enum Failure {
    Config(Error),
    Fault(Error),
}

/// Runs the command line and returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(summary) => {
            print!("{summary}");
            EXIT_OK
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Fault(e)) => {
            eprintln!("error: {e}");
            EXIT_FAULT
        }
    }
}

fn execute(cmd: &Command) -> std::result::Result<String, Failure> {
    let (Command::Run(args) | Command::Study(args) | Command::Oracle(args)) = cmd;
    let cfg = load_config(&args.config).map_err(Failure::Config)?;
    if let Some(n) = args.threads {
        // A pool that is already built (tests calling `main` twice) is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if matches!(cmd, Command::Study(_)) && cfg.study.is_none() {
        return Err(Failure::Config(Error::Config {
            line: 1,
            message: format!("{}: `study` needs a [study] section", args.config.display()),
        }));
    }
    std::fs::create_dir_all(&out)
        .map_err(|source| Error::Io {
            path: out.display().to_string(),
            source,
        })
        .map_err(Failure::Fault)?;
    let result = match cmd {
        Command::Run(_) => run_command(&cfg, &out),
        Command::Study(_) => study_command(&cfg, &out),
        Command::Oracle(_) => oracle_command(&cfg, &out),
    };
    result.map_err(Failure::Fault)
}

/// Integrates and writes every snapshot.
pub fn run_command(cfg: &RunConfig, out: &Path) -> Result<String> {
    let problem = cfg.build_problem()?;
    let snaps = run(problem, cfg.m, cfg.scheme_config()?, cfg.t_end, &cfg.snapshots)?;
    let mut summary = String::new();
    for (idx, snap) in snaps.iter().enumerate() {
        let path = out.join(format!("snap_{idx}.csv"));
        write_atomic(&path, &snapshot_csv(snap))?;
        let _ = writeln!(summary, "t = {:<10} -> {}", snap.t, path.display());
    }
    Ok(summary)
}

/// Runs the study for every configured scheme and writes `report.csv` and
/// `timing.csv`.
pub fn study_command(cfg: &RunConfig, out: &Path) -> Result<String> {
    let study = cfg
        .study
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("no [study] section".into()))?;
    let problem = cfg.build_problem()?;
    let mut reports: Vec<RunReport> = Vec::new();
    for choice in cfg.schemes() {
        let scheme = cfg.scheme_config_for(choice)?;
        let mut rep = convergence_study(&problem, &scheme, &study.m, cfg.t_end, study.reference)?;
        rep.label = choice.to_string();
        reports.push(rep);
    }
    write_atomic(&out.join("report.csv"), &report_csv(&reports))?;
    write_atomic(&out.join("timing.csv"), &timing_csv(&reports))?;
    let mut summary = String::new();
    let reference = match study.reference {
        Reference::Exact => "exact solution".to_owned(),
        Reference::FineGrid(m) => format!("{m}-cell run"),
    };
    let _ = writeln!(
        summary,
        "{} at t = {}, against the {reference}",
        problem.name, cfg.t_end
    );
    for rep in &reports {
        let _ = writeln!(summary, "{}", rep.label);
        for r in &rep.rows {
            let rate = r.rate(Norm::L1).map_or(String::from("-"), |x| format!("{x:.3}"));
            let _ = writeln!(summary, "  m = {:>5}  L1 = {:.4e}  rate = {rate}", r.m, r.error_l1);
        }
    }
    Ok(summary)
}

/// Writes `oracle.csv` with the largest deviation after the configured
/// number of steps.
pub fn oracle_command(cfg: &RunConfig, out: &Path) -> Result<String> {
    let steps = cfg.oracle.as_ref().map_or(1, |o| o.steps);
    let deviation = oracle_compare(&cfg.build_problem()?, cfg.m, steps)?;
    let csv = format!("m,steps,max_deviation\n{},{steps},{}\n", cfg.m, number(deviation));
    write_atomic(&out.join("oracle.csv"), &csv)?;
    Ok(format!(
        "max deviation after {steps} step(s) on {} cells: {deviation:e}\n",
        cfg.m
    ))
}
