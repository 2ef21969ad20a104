//! Lifetime characteristics at a constant stress `x`: reliability, quantile
//! and mean time to failure, with delta-method intervals.

use nalgebra::{Matrix3, Vector3};

use crate::asymptotics::{z_value, Interval};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::specfn::{digamma, gamma};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CharacteristicKind {
    /// `R(t)` at mission time `t`.
    Reliability {
        t: f64,
    },
    /// Time by which a fraction `p` of units has failed.
    Quantile {
        p: f64,
    },
    Mttf,
}

impl CharacteristicKind {
    /// The transform that keeps intervals inside the natural range.
    pub fn natural_transform(&self) -> CiTransform {
        match self {
            CharacteristicKind::Reliability { .. } => CiTransform::Logit,
            _ => CiTransform::Log,
        }
    }

    pub fn label(&self) -> String {
        match self {
            CharacteristicKind::Reliability { t } => format!("reliability(t={t})"),
            CharacteristicKind::Quantile { p } => format!("quantile(p={p})"),
            CharacteristicKind::Mttf => "mttf".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiTransform {
    Direct,
    Logit,
    Log,
}

/// `exp(−(t/λ)^η)` with `λ = exp(a0 + a1 x)`.
pub fn reliability(params: &ModelParams, x: f64, t: f64) -> f64 {
    (-(t / params.scale_at(x)).powf(params.eta())).exp()
}

/// `λ (−ln(1 − p))^(1/η)`.
pub fn quantile(params: &ModelParams, x: f64, p: f64) -> f64 {
    params.scale_at(x) * (-(-p).ln_1p()).powf(1.0 / params.eta())
}

/// `λ Γ(1 + 1/η)`.
pub fn mttf(params: &ModelParams, x: f64) -> f64 {
    params.scale_at(x) * gamma(1.0 + 1.0 / params.eta())
}

pub fn value(kind: CharacteristicKind, params: &ModelParams, x: f64) -> f64 {
    match kind {
        CharacteristicKind::Reliability { t } => reliability(params, x, t),
        CharacteristicKind::Quantile { p } => quantile(params, x, p),
        CharacteristicKind::Mttf => mttf(params, x),
    }
}

/// Gradient of the characteristic with respect to `(a0, a1, eta)`.
pub fn gradient(kind: CharacteristicKind, params: &ModelParams, x: f64) -> [f64; 3] {
    let eta = params.eta();
    match kind {
        CharacteristicKind::Reliability { t } => {
            let ratio = t / params.scale_at(x);
            let w = ratio.powf(eta) * reliability(params, x, t);
            [w * eta, w * eta * x, -w * ratio.ln()]
        }
        CharacteristicKind::Quantile { p } => {
            let q = quantile(params, x, p);
            let log_cum = (-(-p).ln_1p()).ln();
            [q, q * x, -q * log_cum / (eta * eta)]
        }
        CharacteristicKind::Mttf => {
            let e = mttf(params, x);
            [e, e * x, -e * digamma(1.0 + 1.0 / eta) / (eta * eta)]
        }
    }
}

/// `∇hᵀ Σ ∇h` for the sandwich matrix `sigma`.
pub fn delta_variance(kind: CharacteristicKind, params: &ModelParams, x: f64, sigma: &Matrix3<f64>) -> f64 {
    let g = Vector3::from(gradient(kind, params, x));
    (g.transpose() * sigma * g)[(0, 0)].max(0.0)
}

/// Interval for a characteristic with asymptotic variance `variance`
/// (per-unit scale, divided by `n` here).
pub fn characteristic_ci(value: f64, variance: f64, n: usize, level: f64, transform: CiTransform) -> Result<Interval> {
    let z = z_value(level)?;
    let se = variance.max(0.0).sqrt() / (n as f64).sqrt();
    match transform {
        CiTransform::Direct => Ok(Interval {
            lo: value - z * se,
            hi: value + z * se,
        }),
        CiTransform::Logit => {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::Boundary(value));
            }
            let s = (z * se / (value * (1.0 - value))).exp();
            Ok(Interval {
                lo: value / (value + (1.0 - value) * s),
                hi: value / (value + (1.0 - value) / s),
            })
        }
        CiTransform::Log => {
            if !(value > 0.0) {
                return Err(Error::Domain(format!(
                    "log transform needs a positive value, got {value}"
                )));
            }
            let f = (z * se / value).exp();
            Ok(Interval {
                lo: value / f,
                hi: value * f,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicEstimate {
    pub kind: CharacteristicKind,
    pub x: f64,
    pub value: f64,
    pub variance: f64,
    pub ci_direct: Interval,
    /// Logit interval for reliabilities, log interval otherwise. Fails with
    /// a boundary error when the reliability is exactly 0 or 1.
    pub ci_transformed: Result<Interval, String>,
}

/// Point estimate with both intervals. Direct reliability intervals are
/// truncated to `[0, 1]` and direct intervals for positive quantities are
/// truncated at 0.
pub fn estimate(
    kind: CharacteristicKind,
    params: &ModelParams,
    x: f64,
    sigma: &Matrix3<f64>,
    n: usize,
    level: f64,
) -> Result<CharacteristicEstimate> {
    let v = value(kind, params, x);
    let variance = delta_variance(kind, params, x, sigma);
    let mut ci_direct = characteristic_ci(v, variance, n, level, CiTransform::Direct)?;
    ci_direct.lo = ci_direct.lo.max(0.0);
    if let CharacteristicKind::Reliability { .. } = kind {
        ci_direct.hi = ci_direct.hi.min(1.0);
    }
    let ci_transformed = match characteristic_ci(v, variance, n, level, kind.natural_transform()) {
        Ok(iv) => Ok(iv),
        Err(e @ Error::Boundary(_)) => Err(e.to_string()),
        Err(e) => return Err(e),
    };
    Ok(CharacteristicEstimate {
        kind,
        x,
        value: v,
        variance,
        ci_direct,
        ci_transformed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn special_values() {
        let p = ModelParams::new(0.7, -0.3, 1.0).unwrap();
        let lambda = p.scale_at(0.5);
        assert!((reliability(&p, 0.5, 1e-12) - 1.0).abs() < 1e-12);
        assert!((reliability(&p, 0.5, 2.0) - (-2.0 / lambda).exp()).abs() < 1e-15);
        assert!((mttf(&p, 0.5) - lambda).abs() < 1e-13);
        let q = quantile(&p, 0.5, 1.0 - (-1.0f64).exp());
        assert!((q - lambda).abs() < 1e-13);
    }

    #[test]
    fn boundary_reliability_has_no_logit_interval() {
        assert!(matches!(
            characteristic_ci(1.0, 0.1, 10, 0.95, CiTransform::Logit),
            Err(Error::Boundary(_))
        ));
        assert!(matches!(
            characteristic_ci(0.0, 0.1, 10, 0.95, CiTransform::Logit),
            Err(Error::Boundary(_))
        ));
    }

    #[test]
    fn zero_variance_collapses() {
        for tr in [CiTransform::Direct, CiTransform::Logit, CiTransform::Log] {
            let iv = characteristic_ci(0.4, 0.0, 10, 0.95, tr).unwrap();
            assert!((iv.lo - 0.4).abs() < 1e-15 && (iv.hi - 0.4).abs() < 1e-15);
        }
    }
}
