//! Weibull cumulative-exposure model for a simple step-stress test with
//! Type-I censoring.
//!
//! Units run at stress `x1` until `tau1`, then at `x2` until the test is
//! stopped at `tau2`. The Weibull scale at stress `x` is `exp(a0 + a1 x)`
//! and the shape `eta` is common to both steps. Continuity of the lifetime
//! distribution at `tau1` is obtained by shifting the step-2 clock by
//! `h = (lambda2 / lambda1) tau1 - tau1`.
//!
//! The observable lifetime `min(T, tau2)` is a mixed distribution: a density
//! on `(0, tau2)` plus an atom at `tau2` carrying the survival probability.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfn::ln_gamma;

/// Geometry of the experiment: the nominal stress, the two test stresses and
/// the stress-change and termination times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct StressProfile {
    x0: f64,
    x1: f64,
    x2: f64,
    tau1: f64,
    tau2: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    x0: f64,
    x1: f64,
    x2: f64,
    tau1: f64,
    tau2: f64,
}

impl TryFrom<RawProfile> for StressProfile {
    type Error = Error;

    fn try_from(r: RawProfile) -> Result<Self> {
        StressProfile::new(r.x0, r.x1, r.x2, r.tau1, r.tau2)
    }
}

impl From<StressProfile> for RawProfile {
    fn from(p: StressProfile) -> Self {
        RawProfile {
            x0: p.x0,
            x1: p.x1,
            x2: p.x2,
            tau1: p.tau1,
            tau2: p.tau2,
        }
    }
}

impl StressProfile {
    pub fn new(x0: f64, x1: f64, x2: f64, tau1: f64, tau2: f64) -> Result<Self> {
        let all_finite = [x0, x1, x2, tau1, tau2].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidProfile("all fields must be finite".into()));
        }
        if !(0.0 < tau1 && tau1 < tau2) {
            return Err(Error::InvalidProfile(format!(
                "need 0 < tau1 < tau2, got tau1 = {tau1}, tau2 = {tau2}"
            )));
        }
        if !(x0 < x1 && x1 < x2) {
            return Err(Error::InvalidProfile(format!(
                "need x0 < x1 < x2, got ({x0}, {x1}, {x2})"
            )));
        }
        Ok(Self { x0, x1, x2, tau1, tau2 })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn tau1(&self) -> f64 {
        self.tau1
    }
    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    /// Same experiment with every time (tau1, tau2) multiplied by `c`.
    pub fn rescale_time(&self, c: f64) -> Result<Self> {
        Self::new(self.x0, self.x1, self.x2, self.tau1 * c, self.tau2 * c)
    }
}

/// The parameter vector `(a0, a1, eta)` with `a1 < 0` and `eta > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    a0: f64,
    a1: f64,
    eta: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    a0: f64,
    a1: f64,
    eta: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::new(r.a0, r.a1, r.eta)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            a0: p.a0,
            a1: p.a1,
            eta: p.eta,
        }
    }
}

impl ModelParams {
    pub fn new(a0: f64, a1: f64, eta: f64) -> Result<Self> {
        if !(a0.is_finite() && a1.is_finite() && eta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "non-finite parameter ({a0}, {a1}, {eta})"
            )));
        }
        if a1 >= 0.0 {
            return Err(Error::InvalidParams(format!("a1 must be < 0, got {a1}")));
        }
        if eta <= 0.0 {
            return Err(Error::InvalidParams(format!("eta must be > 0, got {eta}")));
        }
        Ok(Self { a0, a1, eta })
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }
    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a0, self.a1, self.eta]
    }

    /// Weibull scale at stress `x`: `exp(a0 + a1 x)`.
    pub fn scale_at(&self, x: f64) -> f64 {
        (self.a0 + self.a1 * x).exp()
    }

    /// Scales and shift time for a given profile.
    pub fn scales(&self, profile: &StressProfile) -> Scales {
        let lambda1 = self.scale_at(profile.x1);
        let lambda2 = self.scale_at(profile.x2);
        // lambda2 / lambda1 = exp(a1 (x2 - x1)); computing it directly avoids
        // overflow when both scales are extreme.
        let ratio = (self.a1 * (profile.x2 - profile.x1)).exp();
        Scales {
            lambda1,
            lambda2,
            shift: profile.tau1 * (ratio - 1.0),
            eta: self.eta,
            tau1: profile.tau1,
            tau2: profile.tau2,
        }
    }
}

/// Derived quantities shared by everything that evaluates the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Shift time `h`.
    pub shift: f64,
    pub eta: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl Scales {
    /// Standardized time at the stress change, `tau1 / lambda1`.
    ///
    /// Equal to `(tau1 + h) / lambda2` by construction.
    pub fn z_change(&self) -> f64 {
        self.tau1 / self.lambda1
    }

    /// Standardized time at termination, `(tau2 + h) / lambda2`.
    pub fn z_end(&self) -> f64 {
        (self.tau2 + self.shift) / self.lambda2
    }

    /// Standardized time of an exact failure at `t`.
    pub fn standardize(&self, t: f64) -> f64 {
        if t < self.tau1 {
            t / self.lambda1
        } else {
            (t + self.shift) / self.lambda2
        }
    }

    /// Probability mass of the atom at `tau2`.
    pub fn survival_at_end(&self) -> f64 {
        (-self.z_end().powf(self.eta)).exp()
    }

    /// Log density of an exact failure at `t` in `(0, tau2)`.
    pub fn log_pdf(&self, t: f64) -> f64 {
        let (z, lambda) = if t < self.tau1 {
            (t / self.lambda1, self.lambda1)
        } else {
            ((t + self.shift) / self.lambda2, self.lambda2)
        };
        (self.eta / lambda).ln() + (self.eta - 1.0) * z.ln() - z.powf(self.eta)
    }
}

/// `exp(a0 + a1 x)`.
pub fn scale_at(params: &ModelParams, x: f64) -> f64 {
    params.scale_at(x)
}

/// Shift time `h = (lambda2 / lambda1) tau1 - tau1`.
pub fn shift_time(params: &ModelParams, profile: &StressProfile) -> f64 {
    params.scales(profile).shift
}

/// CDF of the observable lifetime `min(T, tau2)`.
pub fn cdf(params: &ModelParams, profile: &StressProfile, t: f64) -> f64 {
    let s = params.scales(profile);
    if t <= 0.0 {
        0.0
    } else if t < s.tau1 {
        -(-(t / s.lambda1).powf(s.eta)).exp_m1()
    } else if t < s.tau2 {
        -(-((t + s.shift) / s.lambda2).powf(s.eta)).exp_m1()
    } else {
        1.0
    }
}

/// Density of an exact failure at `t`, valid on `(0, tau2)`.
pub fn pdf(params: &ModelParams, profile: &StressProfile, t: f64) -> Result<f64> {
    log_pdf(params, profile, t).map(f64::exp)
}

pub fn log_pdf(params: &ModelParams, profile: &StressProfile, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < profile.tau2) {
        return Err(Error::Domain(format!(
            "density evaluated at t = {t}, outside (0, {})",
            profile.tau2
        )));
    }
    Ok(params.scales(profile).log_pdf(t))
}

/// Gradient of `log f(t)` with respect to `(a0, a1, eta)` at an exact
/// failure time `t` in `(0, tau2)`.
pub fn score(params: &ModelParams, profile: &StressProfile, t: f64) -> Result<[f64; 3]> {
    if !(t > 0.0 && t < profile.tau2) {
        return Err(Error::Domain(format!(
            "score evaluated at t = {t}, outside (0, {})",
            profile.tau2
        )));
    }
    let s = params.scales(profile);
    let eta = s.eta;
    let l = s.standardize(t);
    let lp = l.powf(eta);
    let ln_l = l.ln();
    let d_eta = 1.0 / eta + ln_l - lp * ln_l;
    let d_a0 = eta * (lp - 1.0);
    let d_a1 = if t < s.tau1 {
        profile.x1 * d_a0
    } else {
        let c = s.z_change() * (profile.x2 - profile.x1);
        profile.x2 * d_a0 + c * ((eta - 1.0) / l - eta * lp / l)
    };
    Ok([d_a0, d_a1, d_eta])
}

/// Gradient of the log survival probability at `tau2`.
pub fn censored_score(params: &ModelParams, profile: &StressProfile) -> [f64; 3] {
    let s = params.scales(profile);
    let eta = s.eta;
    let l = s.z_end();
    let lp = l.powf(eta);
    let c = s.z_change() * (profile.x2 - profile.x1);
    [eta * lp, eta * profile.x2 * lp - eta * c * lp / l, -lp * l.ln()]
}

/// Observed failure data from one step-stress test.
#[derive(Debug, Clone, PartialEq)]
pub struct SsaltSample {
    n: usize,
    step1: Vec<f64>,
    step2: Vec<f64>,
}

impl SsaltSample {
    /// Builds a sample from already-split failure times.
    ///
    /// Both lists are sorted here; every step-1 time must lie in `(0, tau1)`
    /// and every step-2 time in `[tau1, tau2)`.
    pub fn new(n: usize, mut step1: Vec<f64>, mut step2: Vec<f64>, profile: &StressProfile) -> Result<Self> {
        if step1.len() + step2.len() > n {
            return Err(Error::Consistency(format!(
                "{} failures recorded for {n} units",
                step1.len() + step2.len()
            )));
        }
        if let Some(t) = step1.iter().find(|&&t| !(t > 0.0 && t < profile.tau1)) {
            return Err(Error::Consistency(format!(
                "step-1 failure time {t} outside (0, {})",
                profile.tau1
            )));
        }
        if let Some(t) = step2.iter().find(|&&t| !(t >= profile.tau1 && t < profile.tau2)) {
            return Err(Error::Consistency(format!(
                "step-2 failure time {t} outside [{}, {})",
                profile.tau1, profile.tau2
            )));
        }
        step1.sort_by(f64::total_cmp);
        step2.sort_by(f64::total_cmp);
        Ok(Self { n, step1, step2 })
    }

    /// Splits raw failure times at `tau1`. Times at or beyond `tau2` count as
    /// censored units; times at exactly `tau1` belong to step 2.
    pub fn from_times(n: usize, times: &[f64], profile: &StressProfile) -> Result<Self> {
        if times.len() > n {
            return Err(Error::Consistency(format!(
                "{} failure records for {n} units",
                times.len()
            )));
        }
        let mut step1 = Vec::new();
        let mut step2 = Vec::new();
        for &t in times {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Consistency(format!("invalid failure time {t}")));
            }
            if t < profile.tau1 {
                step1.push(t);
            } else if t < profile.tau2 {
                step2.push(t);
            }
        }
        Self::new(n, step1, step2, profile)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn n1(&self) -> usize {
        self.step1.len()
    }
    pub fn n2(&self) -> usize {
        self.step2.len()
    }
    pub fn censored(&self) -> usize {
        self.n - self.step1.len() - self.step2.len()
    }
    pub fn step1(&self) -> &[f64] {
        &self.step1
    }
    pub fn step2(&self) -> &[f64] {
        &self.step2
    }

    /// All exact failure times in increasing order.
    pub fn failure_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.step1.iter().chain(self.step2.iter()).copied()
    }

    pub fn ensure_estimable(&self) -> Result<()> {
        if self.n1() == 0 || self.n2() == 0 {
            return Err(Error::InsufficientData {
                n1: self.n1(),
                n2: self.n2(),
            });
        }
        Ok(())
    }
}

/// Log-likelihood including the `log n! - log (n - n1 - n2)!` constant.
pub fn log_likelihood(params: &ModelParams, profile: &StressProfile, sample: &SsaltSample) -> Result<f64> {
    sample.ensure_estimable()?;
    let s = params.scales(profile);
    let censored = sample.censored();
    let constant = ln_gamma(sample.n() as f64 + 1.0) - ln_gamma(censored as f64 + 1.0);
    let exact: f64 = sample.failure_times().map(|t| s.log_pdf(t)).sum();
    Ok(constant + exact - censored as f64 * s.z_end().powf(s.eta))
}

/// Draws `n` units by exact inversion of the piecewise CDF.
pub fn sample(params: &ModelParams, profile: &StressProfile, n: usize, seed: u64) -> SsaltSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(params, profile, n, &mut rng)
}

pub fn sample_with_rng<R: Rng + ?Sized>(
    params: &ModelParams,
    profile: &StressProfile,
    n: usize,
    rng: &mut R,
) -> SsaltSample {
    let s = params.scales(profile);
    let mut step1 = Vec::new();
    let mut step2 = Vec::new();
    for _ in 0..n {
        match draw_lifetime(&s, rng.sample(Open01)) {
            Draw::Step1(t) => step1.push(t),
            Draw::Step2(t) => step2.push(t),
            Draw::Censored => {}
        }
    }
    step1.sort_by(f64::total_cmp);
    step2.sort_by(f64::total_cmp);
    SsaltSample { n, step1, step2 }
}

pub(crate) enum Draw {
    Step1(f64),
    Step2(f64),
    Censored,
}

/// Inverse CDF of the lifetime for a uniform `u` in `(0, 1)`.
pub(crate) fn draw_lifetime(s: &Scales, u: f64) -> Draw {
    let cum_hazard = -(-u).ln_1p();
    let p_change = -(-s.z_change().powf(s.eta)).exp_m1();
    if u < p_change {
        let t = s.lambda1 * cum_hazard.powf(1.0 / s.eta);
        if t < s.tau1 {
            return Draw::Step1(t);
        }
        // rounding pushed the draw onto the boundary, which belongs to step 2
        return Draw::Step2(s.tau1);
    }
    let t = (s.lambda2 * cum_hazard.powf(1.0 / s.eta) - s.shift).max(s.tau1);
    if t < s.tau2 {
        Draw::Step2(t)
    } else {
        Draw::Censored
    }
}

/// Assembles a sample from raw draws; used by the contamination generator.
pub(crate) fn sample_from_parts(n: usize, mut step1: Vec<f64>, mut step2: Vec<f64>) -> SsaltSample {
    step1.sort_by(f64::total_cmp);
    step2.sort_by(f64::total_cmp);
    SsaltSample { n, step1, step2 }
}
