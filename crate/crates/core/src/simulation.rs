//! Monte-Carlo contamination study.
//!
//! Each replication draws a step-stress sample in which a fraction `ε` of
//! the units is replaced by early failures from a Weibull model whose
//! target parameter has been moved so that it puts mass `ε` on
//! `(0, window_upper)`. The same sample is fitted for every `β`, so cells
//! for different tuning parameters are paired.

use std::fmt;
use std::io::Write as _;
use std::path::Path;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{param_ci, z_value, SandwichCov};
use crate::characteristics::{self, CharacteristicKind, CiTransform};
use crate::error::{Error, Result};
use crate::estimator::{fit, DpdFit, FitOptions};
use crate::io::fmt_f64;
use crate::model::{draw_lifetime, sample_from_parts, Draw, ModelParams, SsaltSample, StressProfile};

/// Default right end of the outlier window.
pub const DEFAULT_WINDOW: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContaminationTarget {
    A0,
    A1,
    Eta,
}

impl fmt::Display for ContaminationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContaminationTarget::A0 => "a0",
            ContaminationTarget::A1 => "a1",
            ContaminationTarget::Eta => "eta",
        })
    }
}

impl std::str::FromStr for ContaminationTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a0" => Ok(ContaminationTarget::A0),
            "a1" => Ok(ContaminationTarget::A1),
            "eta" => Ok(ContaminationTarget::Eta),
            other => Err(Error::Config(format!(
                "unknown contamination target '{other}' (expected a0, a1 or eta)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContaminationScheme {
    pub epsilon: f64,
    pub target: ContaminationTarget,
    pub window_upper: f64,
    contaminated: Option<ModelParams>,
}

impl ContaminationScheme {
    /// Uncalibrated scheme on the default window.
    pub fn new(epsilon: f64, target: ContaminationTarget) -> Self {
        Self {
            epsilon,
            target,
            window_upper: DEFAULT_WINDOW,
            contaminated: None,
        }
    }

    pub fn with_window(mut self, window_upper: f64) -> Self {
        self.window_upper = window_upper;
        self.contaminated = None;
        self
    }

    /// Solves for the outlier model; a no-op when `epsilon = 0`.
    pub fn calibrate(mut self, truth: &ModelParams, profile: &StressProfile) -> Result<Self> {
        self.contaminated = if self.epsilon == 0.0 {
            None
        } else {
            Some(calibrate_contamination(truth, profile, &self)?)
        };
        Ok(self)
    }

    /// The solved outlier parameters, `None` when the scheme is disabled or
    /// not yet calibrated.
    pub fn contaminated_params(&self) -> Option<&ModelParams> {
        self.contaminated.as_ref()
    }

    pub fn is_active(&self) -> bool {
        self.epsilon > 0.0
    }

    /// Units replaced by outliers in a sample of size `n`: `⌈ε n⌉`.
    pub fn contaminated_count(&self, n: usize) -> usize {
        // the slack absorbs products such as 0.07 * 200 = 14.000000000000002
        ((self.epsilon * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
    }
}

/// `P(W < u)` for `W ~ Weibull(exp(a0 + a1 x1), eta)`.
fn window_mass(p: &ModelParams, x1: f64, u: f64) -> f64 {
    -(-(u / p.scale_at(x1)).powf(p.eta())).exp_m1()
}

/// Moves the target coordinate of `truth` until the outlier window carries
/// probability `epsilon` under the step-1 Weibull model.
pub fn calibrate_contamination(
    truth: &ModelParams,
    profile: &StressProfile,
    scheme: &ContaminationScheme,
) -> Result<ModelParams> {
    let eps = scheme.epsilon;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InfeasibleScheme(format!("epsilon must be in [0, 1), got {eps}")));
    }
    if !(scheme.window_upper > 0.0 && scheme.window_upper < profile.tau1()) {
        return Err(Error::InfeasibleScheme(format!(
            "outlier window (0, {}) must end before the stress change at {}",
            scheme.window_upper,
            profile.tau1()
        )));
    }
    let x1 = profile.x1();
    let u = scheme.window_upper;
    let (a0, a1, eta) = (truth.a0(), truth.a1(), truth.eta());
    // coordinate -> parameters, and the search bracket in that coordinate
    let (build, lo, hi): (Box<dyn Fn(f64) -> Option<ModelParams>>, f64, f64) = match scheme.target {
        ContaminationTarget::A0 => (
            Box::new(move |v| ModelParams::new(v, a1, eta).ok()),
            a0 - 50.0,
            a0 + 50.0,
        ),
        ContaminationTarget::A1 => (Box::new(move |v| ModelParams::new(a0, -v.exp(), eta).ok()), -30.0, 5.0),
        ContaminationTarget::Eta => (Box::new(move |v| ModelParams::new(a0, a1, v.exp()).ok()), -10.0, 8.0),
    };
    let g = |v: f64| build(v).map(|p| window_mass(&p, x1, u) - eps);
    let (mut lo, mut hi) = (lo, hi);
    let (glo, ghi) = match (g(lo), g(hi)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::InfeasibleScheme(
                "search bracket left the parameter space".into(),
            ))
        }
    };
    if glo == 0.0 {
        return Ok(build(lo).expect("checked above"));
    }
    if ghi == 0.0 {
        return Ok(build(hi).expect("checked above"));
    }
    if glo.signum() == ghi.signum() {
        return Err(Error::InfeasibleScheme(format!(
            "no {} gives P(W < {u}) = {eps}; attainable range is [{:.3e}, {:.3e}]",
            scheme.target,
            (glo + eps).min(ghi + eps),
            (glo + eps).max(ghi + eps)
        )));
    }
    let increasing = ghi > glo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi || hi - lo < 1e-13 {
            break;
        }
        let gm = g(mid).expect("bracket stays in the parameter space");
        if (gm > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p = build(0.5 * (lo + hi)).expect("bracket stays in the parameter space");
    let err = (window_mass(&p, x1, u) - eps).abs();
    if err > 1e-8 {
        return Err(Error::InfeasibleScheme(format!(
            "calibration stalled with |P - eps| = {err:.3e}"
        )));
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub truth: ModelParams,
    pub profile: StressProfile,
    pub n: usize,
    pub replications: usize,
    pub betas: Vec<f64>,
    pub seed: u64,
    pub epsilons: Vec<f64>,
    pub level: f64,
    /// Mission time for the reliability quantity.
    pub mission_time: f64,
    /// Starting points per fit.
    pub fit_restarts: usize,
}

impl StudyConfig {
    /// The simulation design with `θ = (2, −0.8, 5.5)`, `n = 200`.
    pub fn reference() -> Self {
        Self {
            truth: ModelParams::new(2.0, -0.8, 5.5).expect("valid"),
            profile: StressProfile::new(0.5, 1.0, 2.0, 3.0, 5.0).expect("valid"),
            n: 200,
            replications: 2000,
            betas: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            seed: 1,
            epsilons: vec![0.0, 0.03, 0.05, 0.07, 0.08, 0.09, 0.10],
            level: 0.95,
            mission_time: 5.0,
            fit_restarts: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.n < 2 {
            return Err(Error::Config("n must be >= 2".into()));
        }
        if self.betas.is_empty() {
            return Err(Error::Config("at least one beta is required".into()));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return Err(Error::Config(format!("beta must be >= 0, got {b}")));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(0.0..1.0).contains(*e)) {
            return Err(Error::Config(format!("epsilon must be in [0, 1), got {e}")));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must be in (0, 1), got {}", self.level)));
        }
        if !(self.mission_time > 0.0) {
            return Err(Error::Config("mission_time must be > 0".into()));
        }
        if self.fit_restarts < 1 {
            return Err(Error::Config("fit_restarts must be >= 1".into()));
        }
        Ok(())
    }

    /// Calibrated schemes for every configured epsilon.
    pub fn schemes(&self, target: ContaminationTarget) -> Result<Vec<ContaminationScheme>> {
        self.epsilons
            .iter()
            .map(|&e| ContaminationScheme::new(e, target).calibrate(&self.truth, &self.profile))
            .collect()
    }
}

fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_sample<R: Rng>(config: &StudyConfig, scheme: &ContaminationScheme, rng: &mut R) -> Result<SsaltSample> {
    let n = config.n;
    let mut step1 = Vec::new();
    let mut step2 = Vec::new();
    let k = if scheme.is_active() {
        let outlier = scheme
            .contaminated_params()
            .ok_or_else(|| Error::InfeasibleScheme("contamination scheme used before calibration".into()))?;
        let x1 = config.profile.x1();
        let lambda = outlier.scale_at(x1);
        let mass = window_mass(outlier, x1, scheme.window_upper);
        let k = scheme.contaminated_count(n);
        for _ in 0..k {
            let u: f64 = rng.sample(Open01);
            let w = lambda * (-(-u * mass).ln_1p()).powf(1.0 / outlier.eta());
            // the window ends before tau1, so outliers always fail in step 1
            step1.push(w.min(scheme.window_upper));
        }
        k
    } else {
        0
    };
    let s = config.truth.scales(&config.profile);
    for _ in k..n {
        match draw_lifetime(&s, rng.sample(Open01)) {
            Draw::Step1(t) => step1.push(t),
            Draw::Step2(t) => step2.push(t),
            Draw::Censored => {}
        }
    }
    Ok(sample_from_parts(n, step1, step2))
}

/// The sample for replication `index`, deterministic in `(seed, index)`.
/// May be degenerate; [`run_study`] redraws those.
pub fn generate_replication(config: &StudyConfig, scheme: &ContaminationScheme, index: u64) -> Result<SsaltSample> {
    draw_sample(config, scheme, &mut replication_rng(config.seed, index))
}

/// Redraws from the replication's own stream until both steps have
/// failures. Returns the sample and the number of discarded draws.
fn estimable_replication(
    config: &StudyConfig,
    scheme: &ContaminationScheme,
    index: u64,
) -> Result<(SsaltSample, usize)> {
    let mut rng = replication_rng(config.seed, index);
    let mut discarded = 0;
    loop {
        let s = draw_sample(config, scheme, &mut rng)?;
        if s.ensure_estimable().is_ok() {
            return Ok((s, discarded));
        }
        discarded += 1;
        if discarded > 10_000 {
            return Err(Error::InsufficientData { n1: s.n1(), n2: s.n2() });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    A0,
    A1,
    Eta,
    LambdaX0,
    LambdaX1,
    LambdaX2,
    Mttf,
    Reliability,
    Median,
}

impl Quantity {
    pub const ALL: [Quantity; 9] = [
        Quantity::A0,
        Quantity::A1,
        Quantity::Eta,
        Quantity::LambdaX0,
        Quantity::LambdaX1,
        Quantity::LambdaX2,
        Quantity::Mttf,
        Quantity::Reliability,
        Quantity::Median,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::A0 => "a0",
            Quantity::A1 => "a1",
            Quantity::Eta => "eta",
            Quantity::LambdaX0 => "lambda_x0",
            Quantity::LambdaX1 => "lambda_x1",
            Quantity::LambdaX2 => "lambda_x2",
            Quantity::Mttf => "mttf",
            Quantity::Reliability => "reliability",
            Quantity::Median => "median",
        }
    }

    pub fn parse(s: &str) -> Option<Quantity> {
        Quantity::ALL.into_iter().find(|q| q.name() == s)
    }

    fn value(&self, p: &ModelParams, config: &StudyConfig) -> f64 {
        let prof = &config.profile;
        match self {
            Quantity::A0 => p.a0(),
            Quantity::A1 => p.a1(),
            Quantity::Eta => p.eta(),
            Quantity::LambdaX0 => p.scale_at(prof.x0()),
            Quantity::LambdaX1 => p.scale_at(prof.x1()),
            Quantity::LambdaX2 => p.scale_at(prof.x2()),
            Quantity::Mttf => characteristics::mttf(p, prof.x0()),
            Quantity::Reliability => characteristics::reliability(p, prof.x0(), config.mission_time),
            Quantity::Median => characteristics::quantile(p, prof.x0(), 0.5),
        }
    }

    fn gradient(&self, p: &ModelParams, config: &StudyConfig) -> [f64; 3] {
        let prof = &config.profile;
        let lambda_grad = |x: f64| {
            let l = p.scale_at(x);
            [l, l * x, 0.0]
        };
        match self {
            Quantity::A0 => [1.0, 0.0, 0.0],
            Quantity::A1 => [0.0, 1.0, 0.0],
            Quantity::Eta => [0.0, 0.0, 1.0],
            Quantity::LambdaX0 => lambda_grad(prof.x0()),
            Quantity::LambdaX1 => lambda_grad(prof.x1()),
            Quantity::LambdaX2 => lambda_grad(prof.x2()),
            Quantity::Mttf => characteristics::gradient(CharacteristicKind::Mttf, p, prof.x0()),
            Quantity::Reliability => {
                characteristics::gradient(CharacteristicKind::Reliability { t: config.mission_time }, p, prof.x0())
            }
            Quantity::Median => characteristics::gradient(CharacteristicKind::Quantile { p: 0.5 }, p, prof.x0()),
        }
    }

    /// Range-respecting transform, if the quantity has one.
    fn transform(&self) -> Option<CiTransform> {
        match self {
            Quantity::A0 | Quantity::A1 | Quantity::Eta => None,
            Quantity::Reliability => Some(CiTransform::Logit),
            _ => Some(CiTransform::Log),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CiForm {
    Direct,
    Transformed,
}

impl CiForm {
    pub fn name(&self) -> &'static str {
        match self {
            CiForm::Direct => "direct",
            CiForm::Transformed => "transformed",
        }
    }
}

/// Everything kept from one fit of one replication.
#[derive(Debug, Clone)]
struct FitOutcome {
    theta: Option<ModelParams>,
    converged: bool,
    /// `(quantity, form) -> covered`, empty when the covariance failed.
    covered: Vec<(Quantity, CiForm, bool)>,
}

fn assess(config: &StudyConfig, beta: f64, sample: &SsaltSample) -> FitOutcome {
    let opts = FitOptions {
        restarts: config.fit_restarts,
        ..FitOptions::with_beta(beta)
    };
    let fitted: DpdFit = match fit(&config.profile, sample, &opts) {
        Ok(f) => f,
        Err(e) => {
            log::debug!("fit failed: {e}");
            return FitOutcome {
                theta: None,
                converged: false,
                covered: Vec::new(),
            };
        }
    };
    let theta = fitted.theta_hat;
    let covered = match SandwichCov::compute(&theta, &config.profile, beta) {
        Ok(cov) => coverage_flags(config, &fitted, &cov),
        Err(e) => {
            log::debug!("covariance failed: {e}");
            Vec::new()
        }
    };
    FitOutcome {
        theta: Some(theta),
        converged: fitted.converged,
        covered,
    }
}

fn coverage_flags(config: &StudyConfig, fitted: &DpdFit, cov: &SandwichCov) -> Vec<(Quantity, CiForm, bool)> {
    let n = config.n;
    let level = config.level;
    let theta = &fitted.theta_hat;
    let truth = &config.truth;
    let mut out = Vec::new();
    let Ok(params) = param_ci(fitted, cov, n, level) else {
        return out;
    };
    for (i, q) in [Quantity::A0, Quantity::A1, Quantity::Eta].into_iter().enumerate() {
        out.push((q, CiForm::Direct, params[i].contains(q.value(truth, config))));
    }
    for q in &Quantity::ALL[3..] {
        let v = q.value(theta, config);
        let g = nalgebra::Vector3::from(q.gradient(theta, config));
        let var = (g.transpose() * cov.sigma * g)[(0, 0)].max(0.0);
        let target = q.value(truth, config);
        if let Ok(iv) = characteristics::characteristic_ci(v, var, n, level, CiTransform::Direct) {
            out.push((*q, CiForm::Direct, iv.contains(target)));
        }
        if let Some(tr) = q.transform() {
            if let Ok(iv) = characteristics::characteristic_ci(v, var, n, level, tr) {
                out.push((*q, CiForm::Transformed, iv.contains(target)));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub epsilon: f64,
    pub target: ContaminationTarget,
    pub beta: f64,
    pub quantity: Quantity,
    pub rmse: f64,
    /// Replications with a usable estimate.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub epsilon: f64,
    pub target: ContaminationTarget,
    pub beta: f64,
    pub quantity: Quantity,
    pub form: CiForm,
    pub coverage: f64,
    /// Replications for which the interval could be computed.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudRow {
    pub epsilon: f64,
    pub target: ContaminationTarget,
    pub beta: f64,
    pub replication: usize,
    pub theta: Option<ModelParams>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyReport {
    pub rmse: Vec<RmseRow>,
    pub coverage: Vec<CoverageRow>,
    pub estimate_cloud: Vec<CloudRow>,
    /// Degenerate samples (no failures in one step) that were redrawn.
    pub discarded: usize,
    /// Fits that returned an error.
    pub fit_failures: usize,
    /// Fits whose covariance could not be formed.
    pub ci_failures: usize,
}

impl StudyReport {
    pub fn rmse_of(&self, epsilon: f64, target: ContaminationTarget, beta: f64, q: Quantity) -> Option<f64> {
        self.rmse
            .iter()
            .find(|r| r.epsilon == epsilon && r.target == target && r.beta == beta && r.quantity == q)
            .map(|r| r.rmse)
    }

    pub fn coverage_of(
        &self,
        epsilon: f64,
        target: ContaminationTarget,
        beta: f64,
        q: Quantity,
        form: CiForm,
    ) -> Option<f64> {
        self.coverage
            .iter()
            .find(|r| r.epsilon == epsilon && r.target == target && r.beta == beta && r.quantity == q && r.form == form)
            .map(|r| r.coverage)
    }

    /// Per-replication estimates of one cell, in replication order.
    pub fn cloud_of(&self, epsilon: f64, target: ContaminationTarget, beta: f64) -> Vec<Option<ModelParams>> {
        self.estimate_cloud
            .iter()
            .filter(|r| r.epsilon == epsilon && r.target == target && r.beta == beta)
            .map(|r| r.theta)
            .collect()
    }

    /// Writes `rmse.csv`, `coverage.csv` and `cloud.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let mut rmse = String::from("epsilon,target,beta,quantity,rmse,count\n");
        for r in &self.rmse {
            rmse.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_f64(r.epsilon),
                r.target,
                fmt_f64(r.beta),
                r.quantity.name(),
                fmt_f64(r.rmse),
                r.count
            ));
        }
        write_file(&dir.join("rmse.csv"), &rmse)?;

        let mut cov = String::from("epsilon,target,beta,quantity,form,coverage,count\n");
        for r in &self.coverage {
            cov.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt_f64(r.epsilon),
                r.target,
                fmt_f64(r.beta),
                r.quantity.name(),
                r.form.name(),
                fmt_f64(r.coverage),
                r.count
            ));
        }
        write_file(&dir.join("coverage.csv"), &cov)?;

        let mut cloud = String::from("epsilon,target,beta,replication,a0,a1,eta,converged\n");
        for r in &self.estimate_cloud {
            let [a0, a1, eta] = r
                .theta
                .map(|t| t.as_array().map(fmt_f64))
                .unwrap_or_else(|| ["NaN".into(), "NaN".into(), "NaN".into()]);
            cloud.push_str(&format!(
                "{},{},{},{},{a0},{a1},{eta},{}\n",
                fmt_f64(r.epsilon),
                r.target,
                fmt_f64(r.beta),
                r.replication,
                r.converged
            ));
        }
        write_file(&dir.join("cloud.csv"), &cloud)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Runs every `(scheme, β)` cell. Replications run in parallel on the
/// current rayon pool; aggregation happens afterwards in replication order,
/// so the report does not depend on the number of workers.
pub fn run_study(config: &StudyConfig, schemes: &[ContaminationScheme]) -> Result<StudyReport> {
    config.validate()?;
    let mut report = StudyReport::default();
    for scheme in schemes {
        if scheme.is_active() && scheme.contaminated_params().is_none() {
            return Err(Error::InfeasibleScheme(format!(
                "scheme {}:{} is not calibrated",
                scheme.target, scheme.epsilon
            )));
        }
        log::info!(
            "epsilon = {} on {}: {} replications x {} betas",
            scheme.epsilon,
            scheme.target,
            config.replications,
            config.betas.len()
        );
        let outcomes: Vec<(usize, Vec<FitOutcome>)> = (0..config.replications)
            .into_par_iter()
            .map(|i| -> Result<(usize, Vec<FitOutcome>)> {
                let (sample, discarded) = estimable_replication(config, scheme, i as u64)?;
                let fits = config.betas.iter().map(|&b| assess(config, b, &sample)).collect();
                Ok((discarded, fits))
            })
            .collect::<Result<_>>()?;

        report.discarded += outcomes.iter().map(|(d, _)| d).sum::<usize>();
        for (bi, &beta) in config.betas.iter().enumerate() {
            let cell: Vec<&FitOutcome> = outcomes.iter().map(|(_, f)| &f[bi]).collect();
            aggregate_cell(config, scheme, beta, &cell, &mut report);
        }
    }
    Ok(report)
}

fn aggregate_cell(
    config: &StudyConfig,
    scheme: &ContaminationScheme,
    beta: f64,
    cell: &[&FitOutcome],
    report: &mut StudyReport,
) {
    let (epsilon, target) = (scheme.epsilon, scheme.target);
    for (i, o) in cell.iter().enumerate() {
        report.estimate_cloud.push(CloudRow {
            epsilon,
            target,
            beta,
            replication: i,
            theta: o.theta,
            converged: o.converged,
        });
        if o.theta.is_none() {
            report.fit_failures += 1;
        } else if o.covered.is_empty() {
            report.ci_failures += 1;
        }
    }
    for q in Quantity::ALL {
        let truth = q.value(&config.truth, config);
        let mut sum = 0.0;
        let mut count = 0;
        for o in cell {
            if let Some(theta) = &o.theta {
                sum += (q.value(theta, config) - truth).powi(2);
                count += 1;
            }
        }
        report.rmse.push(RmseRow {
            epsilon,
            target,
            beta,
            quantity: q,
            rmse: if count > 0 {
                (sum / count as f64).sqrt()
            } else {
                f64::NAN
            },
            count,
        });
        for form in [CiForm::Direct, CiForm::Transformed] {
            let flags: Vec<bool> = cell
                .iter()
                .flat_map(|o| o.covered.iter())
                .filter(|(qq, ff, _)| *qq == q && *ff == form)
                .map(|(_, _, c)| *c)
                .collect();
            if flags.is_empty() {
                continue;
            }
            report.coverage.push(CoverageRow {
                epsilon,
                target,
                beta,
                quantity: q,
                form,
                coverage: flags.iter().filter(|c| **c).count() as f64 / flags.len() as f64,
                count: flags.len(),
            });
        }
    }
}

/// Paired bootstrap for `RMSE(b) < RMSE(a)` given per-replication errors
/// of the same samples under two estimators. Returns the fraction of
/// resamples in which `b` is not better, an approximate one-sided p-value.
pub fn paired_bootstrap_rmse(errors_a: &[f64], errors_b: &[f64], resamples: usize, seed: u64) -> f64 {
    assert_eq!(errors_a.len(), errors_b.len(), "paired samples must have equal length");
    let m = errors_a.len();
    if m == 0 || resamples == 0 {
        return 1.0;
    }
    let sq_a: Vec<f64> = errors_a.iter().map(|e| e * e).collect();
    let sq_b: Vec<f64> = errors_b.iter().map(|e| e * e).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut not_better = 0usize;
    for _ in 0..resamples {
        let (mut sa, mut sb) = (0.0, 0.0);
        for _ in 0..m {
            let i = rng.gen_range(0..m);
            sa += sq_a[i];
            sb += sq_b[i];
        }
        if sb >= sa {
            not_better += 1;
        }
    }
    not_better as f64 / resamples as f64
}

/// Half-width of a normal-approximation interval for a coverage estimate.
pub fn coverage_margin(coverage: f64, count: usize, level: f64) -> Result<f64> {
    Ok(z_value(level)? * (coverage * (1.0 - coverage) / count as f64).sqrt())
}
