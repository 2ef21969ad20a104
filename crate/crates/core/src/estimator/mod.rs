//! Density power divergence objective and its minimization.
//!
//! For `β > 0` the empirical objective is
//! `H = h1 − (β+1)/(β n) · h2`, where `h1` is the integral of `f^(β+1)`
//! over the observable distribution (density plus atom) and `h2` sums
//! `f^β` over the sample, censored units contributing `S^β`. At `β = 0` the
//! estimator is the MLE and the objective is `−ℓ/n`.

pub mod nelder_mead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::asymptotics::xi_vector;
use crate::error::{Error, Result};
use crate::model::{censored_score, log_likelihood, score, ModelParams, SsaltSample, StressProfile};
use crate::specfn::{zeta, Window};

use self::nelder_mead::{minimize, NelderMeadOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub beta: f64,
    /// Iteration cap for each simplex run.
    pub max_iters: usize,
    pub tol: f64,
    pub init: Option<ModelParams>,
    /// Number of starting points, the first being `init` (or the default
    /// guess) and the rest deterministic perturbations of it.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            beta: 0.0,
            max_iters: 5000,
            tol: 1e-12,
            init: None,
            restarts: 5,
        }
    }
}

impl FitOptions {
    pub fn with_beta(beta: f64) -> Self {
        Self {
            beta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.restarts < 1 {
            return Err(Error::Config("restarts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpdFit {
    pub beta: f64,
    pub theta_hat: ModelParams,
    /// `H` at `theta_hat`, or `−ℓ/n` for the MLE.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `∫ f^(β+1)` over both windows plus `S^(β+1)`.
pub fn dpd_loss_h1(params: &ModelParams, profile: &StressProfile, beta: f64) -> Result<f64> {
    let s = params.scales(profile);
    let step1 = zeta(Window::Step1, 0.0, beta, &s)?;
    let step2 = zeta(Window::Step2, 0.0, beta, &s)?;
    Ok(step1 + step2 + (-(beta + 1.0) * s.z_end().powf(s.eta)).exp())
}

/// `Σ f(t_i)^β + c · S^β`.
pub fn dpd_loss_h2(params: &ModelParams, profile: &StressProfile, sample: &SsaltSample, beta: f64) -> f64 {
    let s = params.scales(profile);
    let exact: f64 = sample.failure_times().map(|t| (beta * s.log_pdf(t)).exp()).sum();
    exact + sample.censored() as f64 * (-beta * s.z_end().powf(s.eta)).exp()
}

/// `H` for `β > 0`; `−ℓ/n` (combinatorial constant included) for `β = 0`.
pub fn objective(params: &ModelParams, profile: &StressProfile, sample: &SsaltSample, beta: f64) -> Result<f64> {
    let n = sample.n() as f64;
    let v = if beta == 0.0 {
        -log_likelihood(params, profile, sample)? / n
    } else {
        dpd_loss_h1(params, profile, beta)? - (beta + 1.0) / (beta * n) * dpd_loss_h2(params, profile, sample, beta)
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(format!("objective is {v} at {params:?}")))
    }
}

/// Analytic gradient of [`objective`] with respect to `(a0, a1, eta)`.
pub fn objective_gradient(
    params: &ModelParams,
    profile: &StressProfile,
    sample: &SsaltSample,
    beta: f64,
) -> Result<[f64; 3]> {
    let s = params.scales(profile);
    let n = sample.n() as f64;
    let mut emp = [0.0; 3];
    for t in sample.failure_times() {
        let u = score(params, profile, t)?;
        let w = (beta * s.log_pdf(t)).exp();
        for i in 0..3 {
            emp[i] += w * u[i];
        }
    }
    let uc = censored_score(params, profile);
    let wc = sample.censored() as f64 * (-beta * s.z_end().powf(s.eta)).exp();
    for i in 0..3 {
        emp[i] += wc * uc[i];
    }
    if beta == 0.0 {
        return Ok(emp.map(|g| -g / n));
    }
    let xi = xi_vector(params, profile, beta)?;
    Ok([0, 1, 2].map(|i| (beta + 1.0) * (xi[i] - emp[i] / n)))
}

/// The quantity actually minimized: equal to [`objective`] up to an
/// additive constant, written to avoid the `1/β` cancellation for small
/// `β`.
fn minimand(params: &ModelParams, profile: &StressProfile, sample: &SsaltSample, beta: f64) -> f64 {
    let s = params.scales(profile);
    let n = sample.n() as f64;
    let log_surv = -s.z_end().powf(s.eta);
    let censored = sample.censored() as f64;
    if beta == 0.0 {
        let exact: f64 = sample.failure_times().map(|t| s.log_pdf(t)).sum();
        return -(exact + censored * log_surv) / n;
    }
    let Ok(h1) = dpd_loss_h1(params, profile, beta) else {
        return f64::INFINITY;
    };
    let exact: f64 = sample.failure_times().map(|t| (beta * s.log_pdf(t)).exp_m1()).sum();
    let tail = exact + censored * (beta * log_surv).exp_m1();
    h1 - (beta + 1.0) / beta * tail / n
}

/// Unconstrained coordinates `(log lambda1, ln(−a1), ln eta)`.
fn to_internal(p: &ModelParams, profile: &StressProfile) -> [f64; 3] {
    [p.a0() + p.a1() * profile.x1(), (-p.a1()).ln(), p.eta().ln()]
}

fn from_internal(v: &[f64; 3], profile: &StressProfile) -> Option<ModelParams> {
    let a1 = -v[1].exp();
    let a0 = v[0] - a1 * profile.x1();
    ModelParams::new(a0, a1, v[2].exp()).ok()
}

/// Starting point from simple moment and proportion matches.
///
/// * `eta` from the spread of the step-1 log times (the log of a Weibull
///   variable has standard deviation `π / (eta √6)`);
/// * `lambda1` from the step-1 failure fraction;
/// * `lambda2` from the conditional step-2 failure fraction.
pub fn initial_guess(profile: &StressProfile, sample: &SsaltSample) -> ModelParams {
    let n = sample.n() as f64;
    let n1 = sample.n1() as f64;
    let n2 = sample.n2() as f64;
    let logs: Vec<f64> = sample.step1().iter().map(|t| t.ln()).collect();
    let eta = if logs.len() >= 2 {
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (logs.len() - 1) as f64;
        if var > 0.0 {
            std::f64::consts::PI / (6.0f64.sqrt() * var.sqrt())
        } else {
            1.0
        }
    } else {
        1.0
    }
    .clamp(0.2, 20.0);

    let (tau1, tau2) = (profile.tau1(), profile.tau2());
    let p1 = ((n1 + 0.5) / (n + 1.0)).min(0.999);
    let cum1 = -(-p1).ln_1p();
    let lambda1 = tau1 / cum1.powf(1.0 / eta);
    let z1 = tau1 / lambda1;
    let q2 = ((n2 + 0.5) / (n - n1 + 1.0)).min(0.999);
    let z2 = (z1.powf(eta) - (-q2).ln_1p()).powf(1.0 / eta);
    let mut lambda2 = (tau2 - tau1) / (z2 - z1);
    if !(lambda2 > 0.0 && lambda2 < lambda1) {
        lambda2 = 0.5 * lambda1;
    }
    let a1 = (lambda2 / lambda1).ln() / (profile.x2() - profile.x1());
    let a0 = lambda1.ln() - a1 * profile.x1();
    ModelParams::new(a0, a1, eta).expect("initial guess lies in the parameter space")
}

/// Minimum DPD estimate for one `β`.
pub fn fit(profile: &StressProfile, sample: &SsaltSample, options: &FitOptions) -> Result<DpdFit> {
    options.validate()?;
    sample.ensure_estimable()?;
    let beta = options.beta;
    let init = options.init.unwrap_or_else(|| initial_guess(profile, sample));
    let f = |v: &[f64; 3]| match from_internal(v, profile) {
        Some(p) => minimand(&p, profile, sample, beta),
        None => f64::INFINITY,
    };
    let nm = NelderMeadOptions {
        max_iters: options.max_iters,
        f_tol: options.tol,
        x_tol: options.tol.sqrt(),
        step: 0.2,
    };

    let base = to_internal(&init, profile);
    let mut rng = ChaCha8Rng::seed_from_u64(0x05ee_d0f5);
    let mut starts = vec![base];
    for _ in 1..options.restarts {
        starts.push([
            base[0] + rng.gen_range(-0.5..0.5),
            base[1] + rng.gen_range(-0.5..0.5),
            base[2] + rng.gen_range(-0.3..0.3),
        ]);
    }

    let mut iterations = 0;
    let mut best: Option<nelder_mead::NelderMeadResult<3>> = None;
    for start in starts {
        let mut run = minimize(f, start, &nm);
        iterations += run.iterations;
        // restart from the optimum with a fresh simplex until it stops moving
        for _ in 0..10 {
            let again = minimize(f, run.x, &NelderMeadOptions { step: 0.02, ..nm });
            iterations += again.iterations;
            let gain = run.f - again.f;
            let done = !(gain > options.tol * (1.0 + run.f.abs()));
            if again.f <= run.f {
                run = again;
            }
            if done {
                break;
            }
        }
        if best.as_ref().map_or(true, |b| run.f < b.f) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let theta_hat = from_internal(&best.x, profile)
        .ok_or_else(|| Error::Evaluation(format!("optimizer left the parameter space at {:?}", best.x)))?;
    let objective = objective(&theta_hat, profile, sample, beta)?;
    Ok(DpdFit {
        beta,
        theta_hat,
        objective,
        converged: best.converged && best.f.is_finite(),
        iterations,
    })
}
