//! Failure-time files, experiment configuration and fit tables.
//!
//! Configuration is TOML with the sections `[profile]`, `[data]`, `[fit]`
//! and `[simulate]`:
//!
//! ```toml
//! [profile]
//! x0 = 288.0
//! x1 = 293.0
//! x2 = 353.0
//! tau1 = 5.0
//! tau2 = 5.3
//!
//! [data]
//! path = "solar_lighting.txt"   # relative to the config file
//! n = 35
//! time_unit = "hundreds of hours"
//!
//! [fit]
//! betas = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
//! level = 0.95
//! ```
//!
//! `[simulate]` takes the fields of [`StudyConfig`] other than `profile`,
//! with `truth = { a0 = .., a1 = .., eta = .. }`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use serde::Deserialize;

use crate::asymptotics::{param_ci, Interval, SandwichCov};
use crate::error::{Error, Result};
use crate::estimator::DpdFit;
use crate::model::{ModelParams, SsaltSample, StressProfile};
use crate::simulation::StudyConfig;

/// Seventeen significant digits, enough for an exact round trip.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub n: usize,
    #[serde(default)]
    pub time_unit: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub betas: Vec<f64>,
    pub level: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        let opts = crate::estimator::FitOptions::default();
        Self {
            betas: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            level: 0.95,
            restarts: opts.restarts,
            max_iters: opts.max_iters,
            tol: opts.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub truth: ModelParams,
    pub n: usize,
    pub replications: usize,
    pub betas: Vec<f64>,
    pub seed: u64,
    pub epsilons: Vec<f64>,
    pub level: f64,
    pub mission_time: f64,
    pub fit_restarts: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let r = StudyConfig::reference();
        Self {
            truth: r.truth,
            n: r.n,
            replications: r.replications,
            betas: r.betas,
            seed: r.seed,
            epsilons: r.epsilons,
            level: r.level,
            mission_time: r.mission_time,
            fit_restarts: r.fit_restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    profile: StressProfile,
    data: Option<DataConfig>,
    #[serde(default)]
    fit: FitConfig,
    simulate: Option<SimulateConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub profile: StressProfile,
    pub data: Option<DataConfig>,
    pub fit: FitConfig,
    pub simulate: Option<SimulateConfig>,
    /// Directory of the config file; relative data paths resolve against it.
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_overrides(path, &[])
    }

    /// Loads the file and applies `section.key=value` overrides. Values are
    /// parsed as TOML, falling back to a plain string.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let raw: RawConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self {
            profile: raw.profile,
            data: raw.data,
            fit: raw.fit,
            simulate: raw.simulate,
            base_dir,
        })
    }

    pub fn data(&self) -> Result<&DataConfig> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::Config("missing [data] section".into()))
    }

    pub fn data_path(&self) -> Result<PathBuf> {
        Ok(self.base_dir.join(&self.data()?.path))
    }

    pub fn load_sample(&self) -> Result<SsaltSample> {
        read_failures(&self.data_path()?, &self.profile, self.data()?.n)
    }

    pub fn study_config(&self) -> Result<StudyConfig> {
        let s = self
            .simulate
            .as_ref()
            .ok_or_else(|| Error::Config("missing [simulate] section".into()))?;
        let cfg = StudyConfig {
            truth: s.truth,
            profile: self.profile,
            n: s.n,
            replications: s.replications,
            betas: s.betas.clone(),
            seed: s.seed,
            epsilons: s.epsilons.clone(),
            level: s.level,
            mission_time: s.mission_time,
            fit_restarts: s.fit_restarts,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let value: toml::Value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Config(format!("override '{assignment}' has an empty key")))?;
    let mut cursor = table;
    for p in parts {
        cursor = cursor
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{assignment}': '{p}' is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Reads one failure time per line; `#` starts a comment. Times at or after
/// `tau2` are counted as censored.
pub fn read_failures(path: &Path, profile: &StressProfile, n: usize) -> Result<SsaltSample> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut times = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let t: f64 = content
            .parse()
            .map_err(|_| parse_err(format!("'{content}' is not a number")))?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(parse_err(format!("failure time must be a nonnegative number, got {t}")));
        }
        times.push(t);
    }
    let late = times.iter().filter(|&&t| t >= profile.tau2()).count();
    if late > 0 {
        log::warn!(
            "{}: {late} failure time(s) at or after tau2 = {} treated as censored",
            path.display(),
            profile.tau2()
        );
    }
    SsaltSample::from_times(n, &times, profile)
}

/// Writes a sample back as a failure file (censored units are implicit).
pub fn write_failures(sample: &SsaltSample, path: &Path) -> Result<()> {
    let mut out = format!("# n = {}\n", sample.n());
    for t in sample.failure_times() {
        out.push_str(&fmt_f64(t));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One row of a fit table.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTableRow {
    pub beta: f64,
    pub theta: ModelParams,
    /// Wald intervals for `(a0, a1, eta)`; NaN when the covariance failed.
    pub ci: [Interval; 3],
    pub converged: bool,
    pub objective: f64,
    pub n: usize,
    pub level: f64,
    /// `Σ` at the estimate, NaN-filled when unavailable.
    pub sigma: Matrix3<f64>,
}

impl FitTableRow {
    pub fn new(fit: &DpdFit, cov: Option<&SandwichCov>, n: usize, level: f64) -> Result<Self> {
        let nan = Interval {
            lo: f64::NAN,
            hi: f64::NAN,
        };
        let (ci, sigma) = match cov {
            Some(c) => (param_ci(fit, c, n, level)?, c.sigma),
            None => ([nan; 3], Matrix3::from_element(f64::NAN)),
        };
        Ok(Self {
            beta: fit.beta,
            theta: fit.theta_hat,
            ci,
            converged: fit.converged,
            objective: fit.objective,
            n,
            level,
            sigma,
        })
    }

    pub fn has_covariance(&self) -> bool {
        self.sigma.iter().all(|v| v.is_finite())
    }
}

const FIT_HEADER: &str = "beta,a0,a0_lo,a0_hi,a1,a1_lo,a1_hi,eta,eta_lo,eta_hi,\
converged,objective,n,level,s11,s12,s13,s22,s23,s33";

/// CSV with one row per `β`, ascending.
pub fn write_fit_table(rows: &[FitTableRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Consistency("no fits to write".into()));
    }
    let mut sorted: Vec<&FitTableRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    let mut out = String::from(FIT_HEADER);
    out.push('\n');
    for r in sorted {
        let th = r.theta.as_array();
        let mut fields = vec![fmt_f64(r.beta)];
        for i in 0..3 {
            fields.push(fmt_f64(th[i]));
            fields.push(fmt_f64(r.ci[i].lo));
            fields.push(fmt_f64(r.ci[i].hi));
        }
        fields.push(r.converged.to_string());
        fields.push(fmt_f64(r.objective));
        fields.push(r.n.to_string());
        fields.push(fmt_f64(r.level));
        for (i, j) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)] {
            fields.push(fmt_f64(r.sigma[(i, j)]));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_fit_table(path: &Path) -> Result<Vec<FitTableRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == FIT_HEADER => {}
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: "unexpected header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 20 {
            return Err(err(format!("expected 20 fields, found {}", f.len())));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].parse::<f64>()
                .map_err(|_| err(format!("field {} ('{}') is not a number", k + 1, f[k])))
        };
        let theta = ModelParams::new(num(1)?, num(4)?, num(7)?).map_err(|e| err(e.to_string()))?;
        let ci = [
            Interval {
                lo: num(2)?,
                hi: num(3)?,
            },
            Interval {
                lo: num(5)?,
                hi: num(6)?,
            },
            Interval {
                lo: num(8)?,
                hi: num(9)?,
            },
        ];
        let converged = f[10]
            .parse::<bool>()
            .map_err(|_| err(format!("'{}' is not true/false", f[10])))?;
        let n = f[12]
            .parse::<usize>()
            .map_err(|_| err(format!("'{}' is not a count", f[12])))?;
        let (s11, s12, s13, s22, s23, s33) = (num(14)?, num(15)?, num(16)?, num(17)?, num(18)?, num(19)?);
        rows.push(FitTableRow {
            beta: num(0)?,
            theta,
            ci,
            converged,
            objective: num(11)?,
            n,
            level: num(13)?,
            sigma: Matrix3::new(s11, s12, s13, s12, s22, s23, s13, s23, s33),
        });
    }
    Ok(rows)
}
