//! Command-line driver. Exit codes: 0 when everything ran and every
//! criterion passed, 1 when a criterion failed, 2 on configuration, input
//! or numerical errors.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{Config, Method};
use crate::error::{Error, Result};
use crate::io::{self, Manifest, PlotSeries, Table};
use crate::kernel::{check_pointwise_bound, kernel_snapshot, Window};
use crate::norms::{force_norm_profile, seed_norm, x_norm_profile, NormConfig};
use crate::params::Params;
use crate::solver::{force_trajectory, linear_trajectory, picard_solve, splitting_stepper, PicardOptions, SplittingOptions};
use crate::symbols::DerivOrders;
use crate::trajectory::{Trajectory, TimeGrid};
use crate::verify::{run_experiment, ExperimentId, ExperimentSpec, VerdictReport};
use crate::PhaseField;

#[derive(Debug, Parser)]
#[command(name = "ffpe", version, about = "Fractional kinetic Fokker-Planck solver and estimate laboratory")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set grid.nx=128`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output root (default: $FFPE_OUTPUT_ROOT, then ./ffpe-out).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel snapshots, mass and positivity, pointwise-bound ratios.
    Kernel,
    /// Solve from the configured data and write the trajectory.
    Solve,
    /// Seed, solution and force norms of the linear flow of the data, or of
    /// an array file.
    Norms {
        /// Initial field as an array file instead of the configured family.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run verification experiments.
    Verify {
        /// Experiment to run (repeatable); the configured list otherwise.
        #[arg(long = "experiment", short = 'e')]
        experiments: Vec<String>,
    },
    /// kernel, solve, norms and verify in turn.
    All,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Solve => "solve",
            Command::Norms { .. } => "norms",
            Command::Verify { .. } => "verify",
            Command::All => "all",
        }
    }
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Runs one command; `Ok(false)` when some criterion failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let mut cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(t) = cli.threads {
        cfg.run.threads = Some(t);
    }
    cfg.validate()?;
    let root = io::output_root(cli.output.as_deref().or(cfg.run.output.as_deref()));
    let work = || -> Result<bool> {
        match &cli.command {
            Command::Kernel => kernel_cmd(&cfg, &root.join("kernel")),
            Command::Solve => solve_cmd(&cfg, &root.join("solve")),
            Command::Norms { input } => norms_cmd(&cfg, &root.join("norms"), input.as_deref()),
            Command::Verify { experiments } => {
                let ids = if experiments.is_empty() {
                    cfg.experiments()
                } else {
                    experiments.iter().map(|s| ExperimentId::parse(s)).collect::<Result<Vec<_>>>()?
                };
                verify_cmd(&cfg, &root.join("verify"), &ids)
            }
            Command::All => {
                let mut ok = kernel_cmd(&cfg, &root.join("kernel"))?;
                ok &= solve_cmd(&cfg, &root.join("solve"))?;
                ok &= norms_cmd(&cfg, &root.join("norms"), None)?;
                ok &= verify_cmd(&cfg, &root.join("verify"), &cfg.experiments())?;
                Ok(ok)
            }
        }
    };
    log::info!("{} -> {}", cli.command.name(), root.display());
    match cfg.run.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config { field: "run.threads".into(), reason: e.to_string() })?
            .install(work),
        None => work(),
    }
}

fn manifest(cfg: &Config, command: &str) -> Result<Manifest> {
    Ok(Manifest::new(command, serde_json::to_value(cfg)?))
}

fn finish(dir: &Path, mut m: Manifest, ok: bool) -> Result<bool> {
    m.all_passed = ok;
    io::write_json(&dir.join("manifest.json"), &m)?;
    Ok(ok)
}

#[derive(Serialize)]
struct KernelRow {
    t: f64,
    m: usize,
    n: usize,
    lx: f64,
    lv: f64,
    mass: f64,
    relative_min: f64,
    evenness_defect: f64,
    sup: f64,
    file: String,
}

fn kernel_cmd(cfg: &Config, dir: &Path) -> Result<bool> {
    let params = cfg.params()?;
    let policy = cfg.kernel.policy(params.d)?;
    let mut man = manifest(cfg, "kernel")?;
    let start = Instant::now();
    let mut rows = Vec::new();
    for &t in &cfg.kernel.times {
        let grid = policy.grid_at(t, params.alpha);
        for &(m, n) in &cfg.kernel.orders {
            let snap = kernel_snapshot(t, DerivOrders::along_first(m, n), &grid, &params)?;
            let file = format!("kernel_t{t}_m{m}_n{n}.bin");
            if cfg.run.write_arrays {
                io::write_field(&dir.join(&file), &snap.field, t, 0)?;
                man.files.push(file.clone());
            }
            rows.push(KernelRow {
                t,
                m,
                n,
                lx: grid.lx,
                lv: grid.lv,
                mass: snap.mass(),
                relative_min: snap.relative_min(),
                evenness_defect: snap.evenness_defect(),
                sup: snap.field.sup_norm(),
                file,
            });
        }
    }
    io::write_csv(&dir.join("kernel.csv"), &rows)?;
    let pw = check_pointwise_bound(&cfg.kernel.times, &cfg.kernel.orders, policy, &params, Window::KineticScales(cfg.kernel.window))?;
    io::write_json(&dir.join("pointwise.json"), &pw)?;
    man.files.extend(["kernel.csv".to_string(), "pointwise.json".to_string()]);
    man.timings_s.push(("kernel".into(), start.elapsed().as_secs_f64()));
    for r in &rows {
        println!("t={:<8} m={} n={} mass={:.15} min/sup={:+.3e}", r.t, r.m, r.n, r.mass, r.relative_min);
    }
    finish(dir, man, true)
}

#[derive(Serialize)]
struct SampleRow {
    t: f64,
    mass: f64,
    sup: f64,
    x_norm_term: f64,
}

fn sample_rows(traj: &Trajectory, params: &Params, norms: &NormConfig) -> Vec<SampleRow> {
    let profile = x_norm_profile(traj, params, norms);
    traj.times()
        .iter()
        .zip(&traj.fields)
        .zip(profile)
        .map(|((&t, f), x)| SampleRow { t, mass: f.mass(), sup: f.sup_norm(), x_norm_term: x })
        .collect()
}

fn solve_cmd(cfg: &Config, dir: &Path) -> Result<bool> {
    let params = cfg.params()?;
    let grid = cfg.grid.build(params.d)?;
    let tg = cfg.time.build()?;
    let f0 = cfg.data.sample(&grid, &params)?;
    let mut man = manifest(cfg, "solve")?;
    let start = Instant::now();
    let norms = NormConfig::for_params(&params);
    let (traj, diag_json) = match cfg.solver.method {
        Method::Linear => (linear_trajectory(&f0, &tg, params.alpha), serde_json::Value::Null),
        Method::Picard => {
            let opts = PicardOptions { smallness: cfg.solver.smallness, ..PicardOptions::new(cfg.solver.tol, cfg.solver.max_iter, &params) };
            let (t, d) = picard_solve(&f0, &tg, &params, &opts)?;
            println!(
                "picard: {} iterations, converged {}, residual {:.3e}, seed norm {:.4e}",
                d.iterations, d.converged, d.residual, d.seed_norm
            );
            (t, serde_json::to_value(&d)?)
        }
        Method::Splitting => {
            let n = (tg.horizon() / cfg.solver.dt).round() as usize;
            let (t, d) = splitting_stepper(&f0, cfg.solver.dt, n, &params, SplittingOptions::default())?;
            println!("splitting: {n} steps, drift cfl {:.3e}", d.drift_cfl);
            (t, serde_json::to_value(&d)?)
        }
    };
    man.timings_s.push(("solve".into(), start.elapsed().as_secs_f64()));
    if cfg.run.write_arrays {
        io::write_field(&dir.join("initial.bin"), &f0, 0.0, 0)?;
        man.files.push("initial.bin".into());
        man.files.extend(io::write_trajectory(dir, "f", &traj)?);
    }
    let rows = sample_rows(&traj, &params, &norms);
    io::write_csv(&dir.join("samples.csv"), &rows)?;
    io::write_json(&dir.join("diagnostics.json"), &diag_json)?;
    let sup_series = PlotSeries { name: "sup_vs_t".into(), log_log: true, points: rows.iter().map(|r| (r.t, r.sup)).collect() };
    man.files.extend(io::write_plot_data(&dir.join("plots"), &[sup_series])?);
    man.files.extend(["samples.csv".to_string(), "diagnostics.json".to_string()]);
    let converged = diag_json.get("converged").and_then(|v| v.as_bool()).unwrap_or(true);
    finish(dir, man, converged)
}

#[derive(Serialize)]
struct NormRow {
    t: f64,
    x_norm_term: f64,
    force_norm_term: f64,
}

fn norms_cmd(cfg: &Config, dir: &Path, input: Option<&Path>) -> Result<bool> {
    let params = cfg.params()?;
    let f0: PhaseField = match input {
        Some(p) => {
            let (_, mut fields) = io::read_array(p)?;
            if fields.len() != 1 || fields[0].grid.d != params.d {
                return Err(Error::Format(format!("{} must hold one scalar field in d = {}", p.display(), params.d)));
            }
            fields.remove(0)
        }
        None => cfg.data.sample(&cfg.grid.build(params.d)?, &params)?,
    };
    let tg: TimeGrid = cfg.time.build()?;
    let norms = NormConfig::for_params(&params);
    let mut man = manifest(cfg, "norms")?;
    let start = Instant::now();
    let traj = linear_trajectory(&f0, &tg, params.alpha);
    let seed = seed_norm(&f0, &params, &norms);
    let x = x_norm_profile(&traj, &params, &norms);
    let force = force_norm_profile(&force_trajectory(&traj, &params)?, &params, &norms);
    let rows: Vec<NormRow> =
        tg.times.iter().zip(x.iter().zip(&force)).map(|(&t, (&x, &f))| NormRow { t, x_norm_term: x, force_norm_term: f }).collect();
    let x_max = x.iter().copied().fold(0.0, f64::max);
    let f_max = force.iter().copied().fold(0.0, f64::max);
    io::write_csv(&dir.join("norms.csv"), &rows)?;
    io::write_json(
        &dir.join("norms.json"),
        &serde_json::json!({ "seed_norm": seed, "x_norm": x_max, "force_norm": f_max, "force_over_x_squared": f_max / (x_max * x_max) }),
    )?;
    man.files.extend(["norms.csv".to_string(), "norms.json".to_string()]);
    man.timings_s.push(("norms".into(), start.elapsed().as_secs_f64()));
    println!("seed norm {seed:.6e}, solution norm {x_max:.6e}, force norm {f_max:.6e}");
    finish(dir, man, true)
}

fn write_report(dir: &Path, r: &VerdictReport) -> Result<Vec<String>> {
    let sub = dir.join(&r.experiment);
    let mut files = vec![format!("{}/report.json", r.experiment)];
    io::write_json(&sub.join("report.json"), r)?;
    if let Some(t) = &r.table {
        t.write(&sub.join("table.csv"))?;
        files.push(format!("{}/table.csv", r.experiment));
    }
    if !r.plots.is_empty() {
        for f in io::write_plot_data(&sub.join("plots"), &r.plots)? {
            files.push(format!("{}/plots/{f}", r.experiment));
        }
    }
    Ok(files)
}

fn verify_cmd(cfg: &Config, dir: &Path, ids: &[ExperimentId]) -> Result<bool> {
    let params = cfg.params()?;
    let mut man = manifest(cfg, "verify")?;
    let mut reports = Vec::new();
    for &id in ids {
        let r = run_experiment(&ExperimentSpec::new(id, params, cfg.run.seed))?;
        for c in &r.criteria {
            println!("{} {}", r.experiment, c.describe());
        }
        man.timings_s.push((r.experiment.clone(), r.runtime.as_secs_f64()));
        man.files.extend(write_report(dir, &r)?);
        reports.push(r);
    }
    let mut summary = Table::new(&["experiment", "criterion", "measured", "target", "tolerance", "passed"]);
    for r in &reports {
        for c in &r.criteria {
            summary.push(vec![
                r.experiment.clone(),
                c.name.clone(),
                c.measured.to_string(),
                c.target.to_string(),
                c.tolerance.to_string(),
                c.passed.to_string(),
            ]);
        }
    }
    summary.write(&dir.join("summary.csv"))?;
    man.files.push("summary.csv".into());
    let ok = reports.iter().all(|r| r.passed());
    println!("{} of {} experiments passed", reports.iter().filter(|r| r.passed()).count(), reports.len());
    finish(dir, man, ok)
}
