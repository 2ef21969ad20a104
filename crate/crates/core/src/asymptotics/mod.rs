//! Sandwich covariance `Σ = J⁻¹ K J⁻¹` of the minimum DPD estimator.
//!
//! With `u` the score of the observable lifetime (density on `(0, tau2)`,
//! atom at `tau2`):
//!
//! * `J_β = ∫ u uᵀ f^(β+1) + u_c u_cᵀ S^(β+1)`
//! * `ξ_β = ∫ u f^(β+1) + u_c S^(β+1)`
//! * `K_β = J_2β − ξ_β ξ_βᵀ`
//!
//! On each stress window every score component is a short sum of terms
//! `c · l^p (ln l)^q` in the standardized time `l`, so each entry reduces to
//! zeta and H integrals. [`oracle`] evaluates the same quantities by brute
//! force for cross-checking.

pub mod oracle;

use std::collections::BTreeMap;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::estimator::DpdFit;
use crate::model::{censored_score, ModelParams, Scales, StressProfile};
use crate::specfn::{h_integral, QuadOptions, Window};

/// Largest accepted condition number of `J`.
pub const MAX_CONDITION: f64 = 1e12;

/// `c · l^(m·eta + k) · (ln l)^q`.
#[derive(Debug, Clone, Copy)]
struct Term {
    coef: f64,
    m: i32,
    k: i32,
    q: u32,
}

impl Term {
    fn new(coef: f64, m: i32, k: i32, q: u32) -> Self {
        Self { coef, m, k, q }
    }

    fn times(self, other: Term) -> Term {
        Term {
            coef: self.coef * other.coef,
            m: self.m + other.m,
            k: self.k + other.k,
            q: self.q + other.q,
        }
    }
}

type Component = Vec<Term>;

/// Score components on a window as monomial sums.
fn window_scores(window: Window, eta: f64, s: &Scales, x1: f64, x2: f64) -> [Component; 3] {
    let d_a0 = vec![Term::new(eta, 1, 0, 0), Term::new(-eta, 0, 0, 0)];
    let d_eta = vec![
        Term::new(1.0 / eta, 0, 0, 0),
        Term::new(1.0, 0, 0, 1),
        Term::new(-1.0, 1, 0, 1),
    ];
    let d_a1 = match window {
        Window::Step1 => d_a0
            .iter()
            .map(|t| Term {
                coef: x1 * t.coef,
                ..*t
            })
            .collect(),
        Window::Step2 => {
            let c = s.z_change() * (x2 - x1);
            vec![
                Term::new(eta * x2, 1, 0, 0),
                Term::new(-eta * x2, 0, 0, 0),
                Term::new(c * (eta - 1.0), 0, -1, 0),
                Term::new(-c * eta, 1, -1, 0),
            ]
        }
    };
    [d_a0, d_a1, d_eta]
}

/// Evaluates `∫ (Σ terms) f^(β+1)` on a window, integrating each distinct
/// monomial once.
struct WindowIntegrator<'a> {
    window: Window,
    beta: f64,
    scales: &'a Scales,
    opts: QuadOptions,
    cache: BTreeMap<(i32, i32, u32), f64>,
}

impl<'a> WindowIntegrator<'a> {
    fn new(window: Window, beta: f64, scales: &'a Scales) -> Self {
        Self {
            window,
            beta,
            scales,
            opts: QuadOptions::default(),
            cache: BTreeMap::new(),
        }
    }

    fn monomial(&mut self, m: i32, k: i32, q: u32) -> Result<f64> {
        if let Some(v) = self.cache.get(&(m, k, q)) {
            return Ok(*v);
        }
        let alpha = m as f64 * self.scales.eta + k as f64;
        let v = h_integral(self.window, alpha, q, self.beta, self.scales, &self.opts)?;
        self.cache.insert((m, k, q), v);
        Ok(v)
    }

    fn integrate(&mut self, terms: impl IntoIterator<Item = Term>) -> Result<f64> {
        // collect coefficients per monomial first so cancelling terms are
        // combined before they are multiplied by an integral
        let mut merged: BTreeMap<(i32, i32, u32), f64> = BTreeMap::new();
        for t in terms {
            *merged.entry((t.m, t.k, t.q)).or_insert(0.0) += t.coef;
        }
        let mut total = 0.0;
        for ((m, k, q), coef) in merged {
            if coef != 0.0 {
                total += coef * self.monomial(m, k, q)?;
            }
        }
        Ok(total)
    }
}

fn products(a: &Component, b: &Component) -> Vec<Term> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x.times(y))).collect()
}

fn interior_check(params: &ModelParams, beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be >= 0, got {beta}")));
    }
    if !params.as_array().iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("non-finite parameters".into()));
    }
    Ok(())
}

/// `J_β`.
pub fn j_matrix(params: &ModelParams, profile: &StressProfile, beta: f64) -> Result<Matrix3<f64>> {
    interior_check(params, beta)?;
    let s = params.scales(profile);
    let mut j = Matrix3::zeros();
    for window in [Window::Step1, Window::Step2] {
        let u = window_scores(window, s.eta, &s, profile.x1(), profile.x2());
        let mut integ = WindowIntegrator::new(window, beta, &s);
        for a in 0..3 {
            for b in a..3 {
                j[(a, b)] += integ.integrate(products(&u[a], &u[b]))?;
            }
        }
    }
    let uc = censored_score(params, profile);
    let atom = s.survival_at_end().powf(beta + 1.0);
    for a in 0..3 {
        for b in a..3 {
            j[(a, b)] += uc[a] * uc[b] * atom;
            j[(b, a)] = j[(a, b)];
        }
    }
    Ok(j)
}

/// `ξ_β`.
pub fn xi_vector(params: &ModelParams, profile: &StressProfile, beta: f64) -> Result<Vector3<f64>> {
    interior_check(params, beta)?;
    let s = params.scales(profile);
    let mut xi = Vector3::zeros();
    for window in [Window::Step1, Window::Step2] {
        let u = window_scores(window, s.eta, &s, profile.x1(), profile.x2());
        let mut integ = WindowIntegrator::new(window, beta, &s);
        for a in 0..3 {
            xi[a] += integ.integrate(u[a].iter().copied())?;
        }
    }
    let uc = censored_score(params, profile);
    let atom = s.survival_at_end().powf(beta + 1.0);
    for a in 0..3 {
        xi[a] += uc[a] * atom;
    }
    Ok(xi)
}

/// `K_β = J_2β − ξ_β ξ_βᵀ`.
pub fn k_matrix(params: &ModelParams, profile: &StressProfile, beta: f64) -> Result<Matrix3<f64>> {
    let xi = xi_vector(params, profile, beta)?;
    Ok(j_matrix(params, profile, 2.0 * beta)? - xi * xi.transpose())
}

/// `J⁻¹ K J⁻¹` through symmetric solves, refusing ill-conditioned `J`.
pub fn sigma_matrix(j: &Matrix3<f64>, k: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let eig = SymmetricEigen::new(*j);
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if !(min > 0.0) || !max.is_finite() {
        return Err(Error::DegenerateInformation(format!(
            "J is not positive definite (eigenvalues {:?})",
            eig.eigenvalues.as_slice()
        )));
    }
    if max / min > MAX_CONDITION {
        return Err(Error::DegenerateInformation(format!(
            "condition number {:.3e} exceeds {MAX_CONDITION:e}",
            max / min
        )));
    }
    let chol = j
        .cholesky()
        .ok_or_else(|| Error::DegenerateInformation("Cholesky factorization of J failed".into()))?;
    let left = chol.solve(k);
    let sigma = chol.solve(&left.transpose());
    Ok((sigma + sigma.transpose()) * 0.5)
}

/// All sandwich ingredients at one `(θ, β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichCov {
    pub beta: f64,
    pub j: Matrix3<f64>,
    pub xi: Vector3<f64>,
    pub k: Matrix3<f64>,
    pub sigma: Matrix3<f64>,
}

impl SandwichCov {
    pub fn compute(params: &ModelParams, profile: &StressProfile, beta: f64) -> Result<Self> {
        let j = j_matrix(params, profile, beta)?;
        let xi = xi_vector(params, profile, beta)?;
        let k = if beta == 0.0 {
            j - xi * xi.transpose()
        } else {
            j_matrix(params, profile, 2.0 * beta)? - xi * xi.transpose()
        };
        let sigma = sigma_matrix(&j, &k)?;
        Ok(Self { beta, j, xi, k, sigma })
    }

    /// Asymptotic standard deviations `sqrt(Σ_ii)` (per `√n`).
    pub fn std_devs(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.sigma[(i, i)].max(0.0).sqrt())
    }
}

/// A closed interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Two-sided standard-normal critical value for a confidence level.
pub fn z_value(level: f64) -> Result<f64> {
    use statrs::distribution::{ContinuousCDF, Normal};
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + 0.5 * level))
}

/// Wald intervals `θ̂_i ± z sqrt(Σ_ii / n)`.
pub fn param_ci(fit: &DpdFit, cov: &SandwichCov, n: usize, level: f64) -> Result<[Interval; 3]> {
    let z = z_value(level)?;
    let theta = fit.theta_hat.as_array();
    let sd = cov.std_devs();
    let root_n = (n as f64).sqrt();
    Ok([0, 1, 2].map(|i| {
        let half = z * sd[i] / root_n;
        Interval {
            lo: theta[i] - half,
            hi: theta[i] + half,
        }
    }))
}
