//! Brute-force evaluation of `J_β` and `ξ_β` from their defining integrals.
//!
//! Scores come from fourth-order central differences of the model's log
//! density and log survival, and the integrals run over the original time
//! axis. Nothing here shares code with the monomial expansion used by the
//! parent module, which is the point. Slow; meant for tests and audits.

use nalgebra::{Matrix3, Vector3};

use crate::error::Result;
use crate::model::{ModelParams, StressProfile};
use crate::specfn::{integrate, QuadOptions};

fn perturbed(theta: [f64; 3], i: usize, d: f64) -> [f64; 3] {
    let mut t = theta;
    t[i] += d;
    t
}

/// Five-point central difference of `g` along each coordinate.
fn fd_gradient(theta: [f64; 3], g: impl Fn([f64; 3]) -> f64) -> [f64; 3] {
    [0, 1, 2].map(|i| {
        let d = 1e-3 * theta[i].abs().max(0.1);
        let (p1, m1) = (g(perturbed(theta, i, d)), g(perturbed(theta, i, -d)));
        let (p2, m2) = (g(perturbed(theta, i, 2.0 * d)), g(perturbed(theta, i, -2.0 * d)));
        (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * d)
    })
}

/// Log density at a fixed `t` as a function of the raw parameter triple.
/// Perturbations may leave the parameter space; the formula is evaluated
/// anyway.
fn raw_log_pdf(theta: [f64; 3], profile: &StressProfile, t: f64) -> f64 {
    let [a0, a1, eta] = theta;
    let l1 = (a0 + a1 * profile.x1()).exp();
    let l2 = (a0 + a1 * profile.x2()).exp();
    let (z, lambda) = if t < profile.tau1() {
        (t / l1, l1)
    } else {
        let h = l2 / l1 * profile.tau1() - profile.tau1();
        ((t + h) / l2, l2)
    };
    (eta / lambda).ln() + (eta - 1.0) * z.ln() - z.powf(eta)
}

fn raw_log_survival(theta: [f64; 3], profile: &StressProfile) -> f64 {
    let [a0, a1, eta] = theta;
    let l1 = (a0 + a1 * profile.x1()).exp();
    let l2 = (a0 + a1 * profile.x2()).exp();
    let h = l2 / l1 * profile.tau1() - profile.tau1();
    -((profile.tau2() + h) / l2).powf(eta)
}

fn opts() -> QuadOptions {
    QuadOptions {
        rel_tol: 1e-11,
        abs_tol: 1e-15,
        max_segments: 2000,
    }
}

/// Integrates `w(u(t)) f(t)^(β+1)` over both windows and adds the atom.
fn assemble<const N: usize>(
    params: &ModelParams,
    profile: &StressProfile,
    beta: f64,
    weight: impl Fn(&[f64; 3]) -> [f64; N],
) -> [f64; N] {
    let theta = params.as_array();
    let mut out = [0.0; N];
    for idx in 0..N {
        let integrand = |t: f64| {
            let lf = raw_log_pdf(theta, profile, t);
            let u = fd_gradient(theta, |th| raw_log_pdf(th, profile, t));
            weight(&u)[idx] * ((beta + 1.0) * lf).exp()
        };
        let o = opts();
        out[idx] = integrate(integrand, 0.0, profile.tau1(), &o).value
            + integrate(integrand, profile.tau1(), profile.tau2(), &o).value;
    }
    let log_s = raw_log_survival(theta, profile);
    let uc = fd_gradient(theta, |th| raw_log_survival(th, profile));
    let w = weight(&uc);
    for idx in 0..N {
        out[idx] += w[idx] * ((beta + 1.0) * log_s).exp();
    }
    out
}

pub fn j_matrix(params: &ModelParams, profile: &StressProfile, beta: f64) -> Result<Matrix3<f64>> {
    let flat = assemble(params, profile, beta, |u| {
        [
            u[0] * u[0],
            u[0] * u[1],
            u[0] * u[2],
            u[1] * u[1],
            u[1] * u[2],
            u[2] * u[2],
        ]
    });
    let [j11, j12, j13, j22, j23, j33] = flat;
    Ok(Matrix3::new(j11, j12, j13, j12, j22, j23, j13, j23, j33))
}

pub fn xi_vector(params: &ModelParams, profile: &StressProfile, beta: f64) -> Result<Vector3<f64>> {
    let v = assemble(params, profile, beta, |u| *u);
    Ok(Vector3::from(v))
}

pub fn k_matrix(params: &ModelParams, profile: &StressProfile, beta: f64) -> Result<Matrix3<f64>> {
    let xi = xi_vector(params, profile, beta)?;
    Ok(j_matrix(params, profile, 2.0 * beta)? - xi * xi.transpose())
}
