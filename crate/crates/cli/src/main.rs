use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use ssalt_core::asymptotics::SandwichCov;
use ssalt_core::characteristics::estimate;
use ssalt_core::estimator::fit;
use ssalt_core::io::{fmt_f64, read_fit_table, write_fit_table};
use ssalt_core::simulation::run_study;
use ssalt_core::{
    CharacteristicKind, ContaminationScheme, ContaminationTarget, Error, ExperimentConfig, FitOptions, FitTableRow,
    StudyReport,
};

mod report;

/// Worker count for parallel fits and replications.
const WORKERS_ENV: &str = "SSALT_WORKERS";

#[derive(Parser)]
#[command(
    name = "ssalt",
    version,
    about = "Robust estimation for Weibull step-stress life tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model for a grid of tuning parameters and write a fit table.
    Fit(FitArgs),
    /// Lifetime characteristics at given stress levels from a fit table.
    Characteristics(CharArgs),
    /// Monte Carlo study under contamination.
    Simulate(SimArgs),
    /// Summarize simulation output and draw RMSE charts.
    Report(ReportArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated tuning parameters; 0 gives the MLE.
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Config override, e.g. `data.n=40`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct CharArgs {
    #[arg(long)]
    fit_table: PathBuf,
    /// Stress level(s) at which to evaluate.
    #[arg(long, value_delimiter = ',', required = true)]
    stress: Vec<f64>,
    #[arg(long)]
    mission_time: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    quantile: f64,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `target:eps[,eps...]` with target one of a0, a1, eta. Repeatable.
    /// Defaults to the configured epsilons on a1.
    #[arg(long)]
    contaminate: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    dir: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Config(_)
        | Error::Consistency(_)
        | Error::InvalidParams(_)
        | Error::InvalidProfile(_) => 1,
        Error::InsufficientData { .. } => 2,
        Error::InfeasibleScheme(_) => 3,
        Error::Domain(_)
        | Error::Divergent(_)
        | Error::Evaluation(_)
        | Error::DegenerateInformation(_)
        | Error::Boundary(_) => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e));
    }
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Characteristics(a) => cmd_characteristics(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => report::cmd_report(&a.dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_workers() -> Result<(), Error> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))
}

fn check_betas(betas: &[f64]) -> Result<(), Error> {
    if betas.is_empty() {
        return Err(Error::Config("at least one beta is required".into()));
    }
    for (i, b) in betas.iter().enumerate() {
        if !(*b >= 0.0 && b.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {b}")));
        }
        if betas[..i].contains(b) {
            return Err(Error::Config(format!("beta {b} listed twice")));
        }
    }
    Ok(())
}

fn check_level(level: f64) -> Result<(), Error> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("level must be in (0, 1), got {level}")))
    }
}

fn cmd_fit(args: FitArgs) -> Result<(), Error> {
    let cfg = ExperimentConfig::load_with_overrides(&args.config, &args.overrides)?;
    let betas = args.betas.unwrap_or_else(|| cfg.fit.betas.clone());
    let level = args.level.unwrap_or(cfg.fit.level);
    check_betas(&betas)?;
    check_level(level)?;

    let sample = cfg.load_sample()?;
    sample.ensure_estimable()?;
    let profile = cfg.profile;
    let n = sample.n();
    log::info!(
        "{n} units: {} in step 1, {} in step 2, {} censored",
        sample.n1(),
        sample.n2(),
        sample.censored()
    );

    let rows: Vec<FitTableRow> = betas
        .par_iter()
        .map(|&beta| {
            let opts = FitOptions {
                beta,
                max_iters: cfg.fit.max_iters,
                tol: cfg.fit.tol,
                init: None,
                restarts: cfg.fit.restarts,
            };
            let f = fit(&profile, &sample, &opts)?;
            if !f.converged {
                log::warn!("beta = {beta}: optimizer did not converge");
            }
            let cov = match SandwichCov::compute(&f.theta_hat, &profile, beta) {
                Ok(c) => Some(c),
                Err(e) => {
                    log::warn!("beta = {beta}: no covariance ({e})");
                    None
                }
            };
            FitTableRow::new(&f, cov.as_ref(), n, level)
        })
        .collect::<Result<_, Error>>()?;

    fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let path = args.out.join("fits.csv");
    write_fit_table(&rows, &path)?;

    let mut rows = rows;
    rows.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    println!(
        "{:>6} {:>10} {:>21} {:>10} {:>21} {:>8} {:>19}",
        "beta", "a0", "ci", "a1", "ci", "eta", "ci"
    );
    for r in &rows {
        let t = r.theta;
        println!(
            "{:>6.3} {:>10.4} [{:>8.3}, {:>8.3}] {:>10.5} [{:>8.4}, {:>8.4}] {:>8.4} [{:>7.3}, {:>7.3}]{}",
            r.beta,
            t.a0(),
            r.ci[0].lo,
            r.ci[0].hi,
            t.a1(),
            r.ci[1].lo,
            r.ci[1].hi,
            t.eta(),
            r.ci[2].lo,
            r.ci[2].hi,
            if r.converged { "" } else { "  (not converged)" }
        );
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_characteristics(args: CharArgs) -> Result<(), Error> {
    let rows = read_fit_table(&args.fit_table)?;
    if !(args.quantile > 0.0 && args.quantile < 1.0) {
        return Err(Error::Config(format!(
            "quantile must be in (0, 1), got {}",
            args.quantile
        )));
    }
    if let Some(t) = args.mission_time {
        if !(t > 0.0) {
            return Err(Error::Config(format!("mission time must be > 0, got {t}")));
        }
    }
    let mut kinds = vec![CharacteristicKind::Mttf];
    if let Some(t) = args.mission_time {
        kinds.push(CharacteristicKind::Reliability { t });
    }
    kinds.push(CharacteristicKind::Quantile { p: args.quantile });

    let mut out =
        String::from("beta,stress,characteristic,value,direct_lo,direct_hi,transformed_lo,transformed_hi,note\n");
    let nan = fmt_f64(f64::NAN);
    for row in &rows {
        for &x in &args.stress {
            for &kind in &kinds {
                let value = ssalt_core::characteristics::value(kind, &row.theta, x);
                let mut fields = vec![fmt_f64(row.beta), fmt_f64(x), kind.label(), fmt_f64(value)];
                let note = if !row.has_covariance() {
                    fields.extend([nan.clone(), nan.clone(), nan.clone(), nan.clone()]);
                    "no covariance".to_string()
                } else {
                    let e = estimate(kind, &row.theta, x, &row.sigma, row.n, row.level)?;
                    fields.push(fmt_f64(e.ci_direct.lo));
                    fields.push(fmt_f64(e.ci_direct.hi));
                    match &e.ci_transformed {
                        Ok(iv) => {
                            fields.push(fmt_f64(iv.lo));
                            fields.push(fmt_f64(iv.hi));
                            String::new()
                        }
                        Err(msg) => {
                            fields.push(nan.clone());
                            fields.push(nan.clone());
                            msg.clone()
                        }
                    }
                };
                fields.push(note.replace(',', ";"));
                let _ = writeln!(out, "{}", fields.join(","));
            }
        }
    }
    match &args.out {
        Some(path) => fs::write(path, out).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn parse_contamination(spec: &str) -> Result<(ContaminationTarget, Vec<f64>), Error> {
    let bad = || Error::Config(format!("--contaminate expects target:eps[,eps...], got '{spec}'"));
    let (target, eps) = spec.split_once(':').ok_or_else(bad)?;
    let target: ContaminationTarget = target.trim().parse().map_err(|_| bad())?;
    let eps = eps
        .split(',')
        .map(|e| e.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    if eps.is_empty() {
        return Err(bad());
    }
    Ok((target, eps))
}

fn cmd_simulate(args: SimArgs) -> Result<(), Error> {
    let cfg = ExperimentConfig::load_with_overrides(&args.config, &args.overrides)?;
    let mut study = cfg.study_config()?;
    if let Some(m) = args.replications {
        study.replications = m;
    }
    if let Some(s) = args.seed {
        study.seed = s;
    }
    if let Some(b) = args.betas {
        check_betas(&b)?;
        study.betas = b;
    }
    let plan: Vec<(ContaminationTarget, Vec<f64>)> = if args.contaminate.is_empty() {
        vec![(ContaminationTarget::A1, study.epsilons.clone())]
    } else {
        args.contaminate
            .iter()
            .map(|s| parse_contamination(s))
            .collect::<Result<_, _>>()?
    };
    study.epsilons = plan.iter().flat_map(|(_, e)| e.iter().copied()).collect();
    study.validate()?;

    let mut schemes = Vec::new();
    for (target, eps) in &plan {
        for &e in eps {
            schemes.push(ContaminationScheme::new(e, *target).calibrate(&study.truth, &study.profile)?);
        }
    }

    let mut report = StudyReport::default();
    let started = Instant::now();
    for (i, scheme) in schemes.iter().enumerate() {
        let part = run_study(&study, std::slice::from_ref(scheme))?;
        report.rmse.extend(part.rmse);
        report.coverage.extend(part.coverage);
        report.estimate_cloud.extend(part.estimate_cloud);
        report.discarded += part.discarded;
        report.fit_failures += part.fit_failures;
        report.ci_failures += part.ci_failures;
        eprintln!(
            "[{}/{}] {}:{} done ({} replications, {:.1}s elapsed)",
            i + 1,
            schemes.len(),
            scheme.target,
            scheme.epsilon,
            study.replications,
            started.elapsed().as_secs_f64()
        );
    }
    report.write_csv(&args.out)?;
    eprintln!(
        "redrawn samples: {}, failed fits: {}, failed intervals: {}",
        report.discarded, report.fit_failures, report.ci_failures
    );
    eprintln!("wrote rmse.csv, coverage.csv, cloud.csv to {}", display_dir(&args.out));
    Ok(())
}

fn display_dir(p: &Path) -> String {
    if p.as_os_str().is_empty() {
        ".".into()
    } else {
        p.display().to_string()
    }
}
