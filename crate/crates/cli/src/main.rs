//! `ddmx`: run, verify and analyse drift-diffusion–Maxwell simulations.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime or I/O failure
//! (including suspected blow-up), 3 failed verification.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use ddmx::calibration::Calibration;
use ddmx::integrator::{friedrichs_sequence, simulate_with, TrajectoryRecord};
use ddmx::io::{checks_csv, read_snapshot, timeseries_csv, write_atomic, write_snapshot};
use ddmx::littlewood_paley::{decompose, DyadicFilterBank};
use ddmx::presets::build_initial_state;
use ddmx::verification::{calibrate, run_suite, CalibrationPlan, CheckReport, SuiteInputs};
use ddmx::{ops, IntegratorError, RunConfig, State};

#[derive(Parser, Debug)]
#[command(name = "ddmx", version, about = "Pseudo-spectral drift-diffusion-Maxwell simulator and estimate checker")]
#[command(after_help = config_help())]
struct Cli {
    /// Configuration file (`key = value` lines); defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `init.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Recalibrate constants before verifying (same as `verify.calibrate = true`).
    #[arg(long, global = true)]
    calibrate: bool,
    /// Directory for every output file.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate and write the time series (and snapshots if configured).
    Simulate,
    /// Integrate, then run the checks named in `verify.suite`.
    Verify,
    /// Write per-block Littlewood-Paley norms of a snapshot.
    LpAnalyze {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Run the cutoff sequence `converge.radii` and write pairwise distances.
    Converge,
    /// Measure the inequality constants and write `calibration.csv`.
    Calibrate,
}

fn config_help() -> String {
    let mut s = String::from("Configuration keys:\n");
    for (k, help) in ddmx::config::KEYS {
        s.push_str(&format!("  {k:<24} {help}\n"));
    }
    s.push_str("\nEnvironment: DDMX_THREADS caps the worker threads of one run.");
    s
}

/// Failure classes, each with its own exit code.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Verification(_) => 3,
        }
    }
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn path(&self, p: &Path) -> PathBuf {
        self.out.join(p)
    }

    fn initial_state(&self) -> Result<State, Failure> {
        build_initial_state(&self.cfg).map_err(|e| Failure::Config(e.into()))
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(Failure::Config)?;
            RunConfig::parse(&text)
                .with_context(|| format!("in {}", p.display()))
                .map_err(Failure::Config)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.calibrate {
        cfg.verify_calibrate = true;
    }
    Ok(cfg)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("DDMX_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(anyhow!("DDMX_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(runtime)
}

/// Simulates, writing snapshots as records arrive and the time series at
/// the end (also after a failure, with whatever was recorded).
fn run_simulation(ctx: &Ctx, initial: &State) -> Result<TrajectoryRecord, Failure> {
    let icfg = ctx.cfg.integrator_config();
    icfg.validate(initial.grid()).map_err(|e| Failure::Config(e.into()))?;
    let snap_dir = ctx.cfg.snapshot_dir.as_ref().map(|d| ctx.path(d));
    let every = ctx.cfg.snapshot_every;
    let mut index = 0usize;
    let mut snap_err = None;
    let result = simulate_with(initial, &icfg, |s, _| {
        // the final macro step lands exactly on t_end
        let last = s.time == icfg.t_end;
        if let Some(dir) = &snap_dir {
            if snap_err.is_none() && ((every > 0 && index % every == 0) || last) {
                let p = dir.join(format!("snapshot_{index:06}.ddmx"));
                snap_err = write_snapshot(&p, s).err();
            }
        }
        index += 1;
    });
    let (traj, failure) = match result {
        Ok(t) => (t, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    let ts = ctx.path(&ctx.cfg.timeseries_path);
    write_atomic(&ts, timeseries_csv(&traj).as_bytes()).map_err(runtime)?;
    if let Some(e) = snap_err {
        return Err(runtime(e));
    }
    if let Some(e) = failure {
        return Err(match e {
            IntegratorError::InvalidConfig(_) | IntegratorError::DealiasingViolation { .. } => Failure::Config(e.into()),
            other => runtime(anyhow!(other).context(format!("partial time series written to {}", ts.display()))),
        });
    }
    ctx.say(format!(
        "simulated to t = {} in {} records ({} step halvings); time series: {}",
        traj.rows().last().map_or(0.0, |r| r.t),
        traj.len(),
        traj.halvings(),
        ts.display()
    ));
    Ok(traj)
}

fn calibration_plan(ctx: &Ctx, initial: &State) -> CalibrationPlan {
    CalibrationPlan {
        grid: initial.grid().clone(),
        corpus_seed: ctx.cfg.seed,
        corpus_size: ddmx::verification::CORPUS_SIZE,
        probe_initial: initial.clone(),
        probe_config: ctx.cfg.integrator_config(),
        bank: DyadicFilterBank::default(),
    }
}

fn write_calibration(ctx: &Ctx, cal: &Calibration) -> Result<PathBuf, Failure> {
    let p = ctx.path(Path::new("calibration.csv"));
    write_atomic(&p, cal.to_string().as_bytes()).map_err(runtime)?;
    Ok(p)
}

fn cmd_simulate(ctx: &Ctx) -> Result<(), Failure> {
    let s = ctx.initial_state()?;
    run_simulation(ctx, &s).map(|_| ())
}

fn cmd_verify(ctx: &Ctx) -> Result<(), Failure> {
    let initial = ctx.initial_state()?;
    let cal = if ctx.cfg.verify_calibrate {
        let cal = calibrate(&calibration_plan(ctx, &initial)).map_err(runtime)?;
        let p = write_calibration(ctx, &cal)?;
        ctx.say(format!("recalibrated constants written to {}", p.display()));
        cal
    } else {
        Calibration::builtin()
    };
    let traj = run_simulation(ctx, &initial)?;
    let bank = DyadicFilterBank::default();
    let icfg = ctx.cfg.integrator_config();
    let inputs = SuiteInputs {
        initial: &initial,
        config: &icfg,
        trajectory: &traj,
        calibration: &cal,
        bank: &bank,
        seed: ctx.cfg.seed,
    };
    let reports = run_suite(&inputs, &ctx.cfg.verify_suite).map_err(runtime)?;
    let csv = checks_csv(reports.iter().map(|r| (r.name.as_str(), r.lhs, r.rhs, r.margin, r.passed)));
    write_atomic(&ctx.path(Path::new("checks.csv")), csv.as_bytes()).map_err(runtime)?;
    for r in &reports {
        ctx.say(r.to_string());
    }
    let failed: Vec<&CheckReport> = reports.iter().filter(|r| !r.passed).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failed.iter().map(|r| r.name.as_str()).collect();
        Err(Failure::Verification(format!("failed checks: {}", names.join(", "))))
    }
}

fn cmd_lp_analyze(ctx: &Ctx, snapshot: &Path) -> Result<(), Failure> {
    let s = read_snapshot(snapshot).map_err(runtime)?;
    let bank = DyadicFilterBank::default();
    let planes = s.planes();
    let parts: Vec<_> = planes.iter().map(|f| decompose(f, &bank)).collect();
    let mut out = String::from("block,xi_low,xi_high,l2_rho,linf_rho,l2_E,l2_B\n");
    let q_max = parts[0].q_max;
    for q in 0..=q_max {
        let pick = |i: usize| {
            if q == 0 {
                &parts[i].low
            } else {
                &parts[i].blocks[q as usize - 1]
            }
        };
        let l2 = |range: std::ops::Range<usize>| range
            .map(|i| ops::lp_norm(pick(i), 2.0).map_or(f64::NAN, |v| v * v))
            .sum::<f64>()
            .sqrt();
        let (lo, hi) = if q == 0 { (0.0, 2.0) } else { (2f64.powi(q - 1), 2f64.powi(q + 1)) };
        let name = if q == 0 { "S1".to_string() } else { format!("D{q}") };
        out.push_str(&format!(
            "{name},{lo},{hi},{},{},{},{}\n",
            l2(0..1),
            pick(0).max_abs(),
            l2(1..4),
            l2(4..7)
        ));
    }
    let p = ctx.path(Path::new("lp_blocks.csv"));
    write_atomic(&p, out.as_bytes()).map_err(runtime)?;
    ctx.say(format!("{} blocks of {} written to {}", q_max + 1, snapshot.display(), p.display()));
    Ok(())
}

fn cmd_converge(ctx: &Ctx) -> Result<(), Failure> {
    let mut cfg = ctx.cfg.clone();
    cfg.cutoff_n = None;
    let initial = build_initial_state(&cfg).map_err(|e| Failure::Config(e.into()))?;
    let icfg = cfg.integrator_config();
    let report = friedrichs_sequence(&initial, &icfg, &cfg.converge_radii).map_err(|e| match e {
        IntegratorError::InvalidConfig(_) | IntegratorError::DealiasingViolation { .. } => Failure::Config(e.into()),
        other => runtime(other),
    })?;
    let mut out = String::from("n_low,n_high,sup_l2_distance\n");
    for (w, d) in report.radii.windows(2).zip(&report.distances) {
        out.push_str(&format!("{},{},{}\n", w[0], w[1], d));
    }
    let p = ctx.path(Path::new("converge.csv"));
    write_atomic(&p, out.as_bytes()).map_err(runtime)?;
    let decreasing = report.distances.windows(2).all(|w| w[1] < w[0]);
    ctx.say(format!(
        "distances {:?}; strictly decreasing: {}; written to {}",
        report.distances,
        if decreasing { "yes" } else { "no" },
        p.display()
    ));
    Ok(())
}

fn cmd_calibrate(ctx: &Ctx) -> Result<(), Failure> {
    let initial = ctx.initial_state()?;
    let cal = calibrate(&calibration_plan(ctx, &initial)).map_err(runtime)?;
    let p = write_calibration(ctx, &cal)?;
    ctx.say(cal.to_string().trim_end());
    ctx.say(format!("written to {}", p.display()));
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    configure_threads()?;
    let ctx = Ctx {
        cfg: load_config(cli)?,
        out: cli.output_dir.clone(),
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Simulate => cmd_simulate(&ctx),
        Command::Verify => cmd_verify(&ctx),
        Command::LpAnalyze { snapshot } => cmd_lp_analyze(&ctx, snapshot),
        Command::Converge => cmd_converge(&ctx),
        Command::Calibrate => cmd_calibrate(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(e) => eprintln!("configuration error: {e:#}"),
                Failure::Runtime(e) => eprintln!("error: {e:#}"),
                Failure::Verification(msg) => eprintln!("verification failed: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
