//! `hbpsim`: runs single simulations and parameter sweeps, writing JSON
//! reports, CSV counters and SVG plots.
//!
//! Exit status: 0 when every invariant check passes, 2 on a usage error,
//! 3 when a check fails or the simulation faults, 1 on I/O errors.

mod config;
mod output;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use clap::{Args, Parser, Subcommand};
use hbpsim::metrics::{build_report, execute, Experiment, Report};
use hbpsim::sched::SchedulerKind;
use hbpsim::SimError;

use config::{sort_key, Settings, UsageError};

#[derive(Parser)]
#[command(
    name = "hbpsim",
    version,
    about = "Simulated multicore runs of HBP algorithms under PWS, RWS or a sequential executor"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one configuration.
    Run(Common),
    /// Execute the Cartesian product of the --sweep axes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis and values, e.g. `p=1,2,4,8`. Repeat for more axes.
        #[arg(long, value_name = "AXIS=V1,V2,...")]
        sweep: Vec<String>,
        /// Refuse sweeps with more points than this.
        #[arg(long)]
        max_runs: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// msum (or scan), prefix_sums, mt_bi, rm_to_bi, bi_to_rm_direct,
    /// bi_to_rm_gapped, bi_to_rm_fft, matrix_add, strassen, depth_n_mm, fft.
    #[arg(long)]
    alg: Option<String>,
    /// pws, rws or seq.
    #[arg(long)]
    sched: Option<String>,
    /// Input length, or matrix side for matrix algorithms.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    /// Cache size in words.
    #[arg(long = "M")]
    m: Option<String>,
    /// Block size in words.
    #[arg(long = "B")]
    b: Option<String>,
    #[arg(long)]
    hit_cost: Option<String>,
    #[arg(long)]
    miss_cost: Option<String>,
    #[arg(long)]
    steal_cost: Option<String>,
    #[arg(long)]
    sched_interval: Option<String>,
    /// Pad stack frames.
    #[arg(long)]
    padded: bool,
    /// Route BI to RM conversion through the gapped layout.
    #[arg(long)]
    gapped: bool,
    /// Let PWS phases interleave with execution.
    #[arg(long)]
    stress: bool,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Write events.csv, steals.csv and tasks.csv (single runs only).
    #[arg(long)]
    trace: bool,
}

enum Failure {
    Usage(String),
    Check(String),
    Io(String),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<Box<dyn std::error::Error>> for Failure {
    fn from(e: Box<dyn std::error::Error>) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::InvalidConfig(m) | SimError::Descriptor(m) => Failure::Usage(m),
        other => Failure::Check(other.to_string()),
    }
}

fn settings(c: &Common) -> Result<Settings, Failure> {
    let mut s = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Settings::parse(&text)?
        }
        None => Settings::default(),
    };
    let flags = [
        ("alg", &c.alg),
        ("sched", &c.sched),
        ("n", &c.n),
        ("p", &c.p),
        ("M", &c.m),
        ("B", &c.b),
        ("hit-cost", &c.hit_cost),
        ("miss-cost", &c.miss_cost),
        ("steal-cost", &c.steal_cost),
        ("sched-interval", &c.sched_interval),
        ("seed", &c.seed),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            s.set(key, v)?;
        }
    }
    for (key, on) in [
        ("padded", c.padded),
        ("gapped", c.gapped),
        ("stress", c.stress),
        ("trace", c.trace),
    ] {
        if on {
            s.set(key, "true")?;
        }
    }
    Ok(s)
}

fn out_dir(c: &Common, s: &Settings) -> Result<PathBuf, Failure> {
    let dir = match (s.get("out-dir"), c.out_dir.as_path()) {
        (Some(d), p) if p == Path::new(".") => PathBuf::from(d),
        (_, p) => p.to_path_buf(),
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Runs `e` and its sequential baseline and builds the report.
fn simulate(e: &Experiment) -> Result<(Report, Option<hbpsim::metrics::RunRecord>), SimError> {
    let run = execute(e)?;
    let report = if e.sched == SchedulerKind::Seq {
        build_report(&run, Some(&run))?
    } else {
        let base = execute(&e.baseline())?;
        build_report(&run, Some(&base))?
    };
    Ok((report, e.events.then_some(run)))
}

fn failed_checks(reports: &[Report]) -> Vec<String> {
    reports
        .iter()
        .flat_map(|r| {
            r.checks.iter().filter(|c| !c.pass).map(move |c| {
                format!(
                    "{} {} n={} p={}: {}: {}",
                    r.config.alg,
                    r.config.sched.as_str(),
                    r.config.n,
                    r.config.p,
                    c.name,
                    c.detail
                )
            })
        })
        .collect()
}

fn cmd_run(c: &Common) -> Result<(), Failure> {
    let s = settings(c)?;
    if !s.axes.is_empty() {
        return Err(Failure::Usage(
            "sweep axes need the sweep subcommand".into(),
        ));
    }
    let e = s.experiment()?;
    let dir = out_dir(c, &s)?;
    let (report, traced) = simulate(&e).map_err(sim_failure)?;
    output::write_json(&dir.join("report.json"), &report.to_json())?;
    output::write_counters(&dir.join("counters.csv"), std::slice::from_ref(&report))?;
    output::run_plots(&dir, &report)?;
    if let Some(run) = traced {
        output::write_traces(&dir, &run)?;
    }
    let failed = failed_checks(std::slice::from_ref(&report));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join("\n")))
    }
}

/// Runs every point on a small worker pool; results come back in point order.
fn run_all(points: &[Experiment]) -> Vec<Result<Report, SimError>> {
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(points.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Report, SimError>>>> = Mutex::new(vec![None; points.len()]);
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(e) = points.get(i) else { break };
                let r = simulate(e).map(|(report, _)| report);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every point ran"))
        .collect()
}

fn cmd_sweep(c: &Common, sweep: &[String], max_runs: Option<usize>) -> Result<(), Failure> {
    let mut s = settings(c)?;
    for a in sweep {
        s.set("sweep", a)?;
    }
    if let Some(m) = max_runs {
        s.set("max-runs", &m.to_string())?;
    }
    if s.flag("trace")? {
        return Err(Failure::Usage("--trace applies to single runs only".into()));
    }
    let mut points = s.points()?;
    points.sort_by_key(sort_key);
    let dir = out_dir(c, &s)?;
    let reports = run_all(&points)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(sim_failure)?;
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    output::write_json(&dir.join("report.json"), &json)?;
    output::write_counters(&dir.join("counters.csv"), &reports)?;
    output::sweep_plots(&dir, &s.axes, &reports)?;
    warn_excess_trend(&s, &reports);
    let failed = failed_checks(&reports);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join("\n")))
    }
}

/// Soft check: along a p sweep with everything else fixed, cache excess
/// is expected not to decrease. Only warns.
fn warn_excess_trend(s: &Settings, reports: &[Report]) {
    if !s.axes.iter().any(|a| a.key == "p") {
        return;
    }
    for w in reports.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let same = Experiment {
            p: a.config.p,
            ..b.config.clone()
        } == a.config;
        let ex = |r: &Report| r.excess.as_ref().map(|e| e.cache_excess);
        if same && b.config.p > a.config.p && ex(b) < ex(a) {
            eprintln!(
                "warning: cache excess drops from {:?} at p={} to {:?} at p={} ({} n={})",
                ex(a),
                a.config.p,
                ex(b),
                b.config.p,
                a.config.alg,
                a.config.n
            );
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(c) => cmd_run(c),
        Cmd::Sweep {
            common,
            sweep,
            max_runs,
        } => cmd_sweep(common, sweep, *max_runs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Check(m)) => {
            eprintln!("invariant check failed:\n{m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_faults_are_check_failures() {
        let fault = SimError::Deadlock {
            tick: 5,
            detail: "stuck".into(),
        };
        assert!(matches!(sim_failure(fault), Failure::Check(_)));
        assert!(matches!(
            sim_failure(SimError::InvalidConfig("x".into())),
            Failure::Usage(_)
        ));
    }
}
