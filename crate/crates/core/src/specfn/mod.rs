//! Special-function kernels for the divergence objective and its
//! asymptotic covariance.
//!
//! Everything here is expressed in the standardized variable
//! `l = t / lambda1` on step 1 and `l = (t + h) / lambda2` on step 2. On a
//! window `[lo, hi]` of `l`, the step density raised to `beta + 1` is
//! `(eta / lambda)^(beta + 1) l^((eta - 1)(beta + 1)) exp(-(beta + 1) l^eta)`.
//!
//! * the zeta integrals weight it by `l^alpha` and reduce to two-limit
//!   incomplete gamma functions;
//! * the H integrals add a `(ln l)^gamma` weight and are integrated
//!   numerically (for `gamma = 0` they coincide with zeta).

mod gamma;
pub mod quad;

pub use self::gamma::{
    digamma, gamma, generalized_incomplete_gamma, generalized_incomplete_gamma_with, ln_gamma, lower_incomplete_gamma,
    upper_incomplete_gamma,
};
pub use self::quad::{integrate, QuadOptions, QuadResult};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Scales, StressProfile};

/// Exponentials below `exp(-EXP_CUTOFF)` are treated as zero when trimming
/// integration windows.
const EXP_CUTOFF: f64 = 745.0;

/// Limits of integration in the standardized variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralWindow {
    pub lower: f64,
    pub upper: f64,
}

impl IntegralWindow {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(0.0 <= lower && lower <= upper && upper.is_finite()) {
            return Err(Error::Domain(format!("invalid integration window [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }
}

/// The two stress windows of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Window {
    /// `(0, tau1)` at stress `x1`.
    Step1,
    /// `[tau1, tau2)` at stress `x2`.
    Step2,
}

impl Window {
    pub fn limits(self, s: &Scales) -> IntegralWindow {
        match self {
            Window::Step1 => IntegralWindow {
                lower: 0.0,
                upper: s.z_change(),
            },
            Window::Step2 => IntegralWindow {
                lower: s.z_change(),
                upper: s.z_end().max(s.z_change()),
            },
        }
    }

    fn scale(self, s: &Scales) -> f64 {
        match self {
            Window::Step1 => s.lambda1,
            Window::Step2 => s.lambda2,
        }
    }
}

/// Order of the incomplete gamma function behind a zeta integral.
fn gamma_order(alpha: f64, beta: f64, eta: f64) -> f64 {
    (alpha + (eta - 1.0) * (beta + 1.0) + 1.0) / eta
}

/// Closed-form zeta integral on a window, straight from the scales.
pub fn zeta(window: Window, alpha: f64, beta: f64, s: &Scales) -> Result<f64> {
    let eta = s.eta;
    let order = gamma_order(alpha, beta, eta);
    let lim = window.limits(s);
    let bp1 = beta + 1.0;
    let lo = lim.lower.powf(eta) * bp1;
    let hi = lim.upper.powf(eta) * bp1;
    let incomplete = match window {
        Window::Step1 => {
            if !(order > 0.0) {
                return Err(Error::Divergent(format!(
                    "step-1 zeta integral diverges at 0 (alpha = {alpha}, beta = {beta}, eta = {eta})"
                )));
            }
            lower_incomplete_gamma(order, hi)?
        }
        Window::Step2 => generalized_incomplete_gamma(order, lo, hi)?,
    };
    let lambda = window.scale(s);
    // (eta / lambda)^beta (beta + 1)^(-order), in log space
    let log_prefactor = beta * (eta / lambda).ln() - order * bp1.ln();
    Ok(log_prefactor.exp() * incomplete)
}

/// `∫_0^tau1 (t/lambda1)^alpha f_x1(t)^(beta+1) dt`.
pub fn zeta_tau1(alpha: f64, beta: f64, params: &ModelParams, profile: &StressProfile) -> Result<f64> {
    zeta(Window::Step1, alpha, beta, &params.scales(profile))
}

/// `∫_tau1^tau2 ((t+h)/lambda2)^alpha f_x2(t+h)^(beta+1) dt`.
pub fn zeta_tau1_tau2(alpha: f64, beta: f64, params: &ModelParams, profile: &StressProfile) -> Result<f64> {
    zeta(Window::Step2, alpha, beta, &params.scales(profile))
}

/// Log-weighted moment on a window:
/// `lambda (eta/lambda)^(beta+1) ∫ l^p (ln l)^gamma exp(-(beta+1) l^eta) dl`
/// with `p = alpha + (eta - 1)(beta + 1)`.
pub fn h_integral(
    window: Window,
    alpha: f64,
    gamma_exp: u32,
    beta: f64,
    s: &Scales,
    opts: &QuadOptions,
) -> Result<f64> {
    if gamma_exp == 0 {
        return zeta(window, alpha, beta, s);
    }
    let eta = s.eta;
    let bp1 = beta + 1.0;
    let p = alpha + (eta - 1.0) * bp1;
    let lim = window.limits(s);
    // beyond this point the exponential factor is zero in double precision
    let l_max = (EXP_CUTOFF / bp1).powf(1.0 / eta);
    let upper = lim.upper.min(l_max);
    let lambda = window.scale(s);
    let prefactor = (lambda.ln() + bp1 * (eta / lambda).ln()).exp();
    if upper <= lim.lower {
        return Ok(0.0);
    }
    let g = gamma_exp as i32;
    let value = match window {
        Window::Step1 => {
            if !(p > -1.0) {
                return Err(Error::Divergent(format!(
                    "step-1 H integral diverges at 0 (alpha = {alpha}, beta = {beta}, eta = {eta})"
                )));
            }
            // l = upper * x^k flattens the l^p singularity at the origin
            let k = (2.0 / (p + 1.0)).max(1.0);
            let ln_upper = upper.ln();
            let scale = upper.powf(p + 1.0) * k;
            let c = bp1 * upper.powf(eta);
            let r = integrate(
                |x: f64| {
                    let lnx = x.ln();
                    let ln_l = ln_upper + k * lnx;
                    ((k * (p + 1.0) - 1.0) * lnx - c * (k * eta * lnx).exp()).exp() * ln_l.powi(g)
                },
                0.0,
                1.0,
                opts,
            );
            scale * r.value
        }
        Window::Step2 => {
            let r = integrate(
                |l: f64| {
                    let ln_l = l.ln();
                    (p * ln_l - bp1 * l.powf(eta)).exp() * ln_l.powi(g)
                },
                lim.lower,
                upper,
                opts,
            );
            r.value
        }
    };
    Ok(prefactor * value)
}

/// `∫_0^tau1 (t/lambda1)^alpha (ln(t/lambda1))^gamma f_x1(t)^(beta+1) dt`.
pub fn h_integral_tau1(
    alpha: f64,
    gamma_exp: u32,
    beta: f64,
    params: &ModelParams,
    profile: &StressProfile,
) -> Result<f64> {
    h_integral(
        Window::Step1,
        alpha,
        gamma_exp,
        beta,
        &params.scales(profile),
        &QuadOptions::default(),
    )
}

/// Step-2 counterpart of [`h_integral_tau1`].
pub fn h_integral_tau1_tau2(
    alpha: f64,
    gamma_exp: u32,
    beta: f64,
    params: &ModelParams,
    profile: &StressProfile,
) -> Result<f64> {
    h_integral(
        Window::Step2,
        alpha,
        gamma_exp,
        beta,
        &params.scales(profile),
        &QuadOptions::default(),
    )
}
