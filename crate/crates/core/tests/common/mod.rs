//! Test-only helpers shared across integration tests.
#![allow(dead_code)]

use ssalt_core::{ModelParams, StressProfile};

pub fn sim_profile() -> StressProfile {
    StressProfile::new(0.5, 1.0, 2.0, 3.0, 5.0).unwrap()
}

pub fn sim_truth() -> ModelParams {
    ModelParams::new(2.0, -0.8, 5.5).unwrap()
}

/// Double-exponential (tanh-sinh) quadrature on `[a, b]`.
///
/// Deliberately unrelated to the library's Gauss-Kronrod scheme so the two
/// can be used to check each other. Endpoint singularities of the form
/// `x^p`, `p > -1`, are handled by the transformation itself.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut h = 0.5;
    let mut prev = f64::NAN;
    let mut total = 0.0;
    for level in 0..12 {
        let step = if level == 0 { 1 } else { 2 };
        let start = if level == 0 { 0 } else { 1 };
        let mut sum = 0.0;
        let mut k = start;
        loop {
            let t = k as f64 * h;
            let s = std::f64::consts::FRAC_PI_2 * t.sinh();
            let c = s.cosh();
            let w = std::f64::consts::FRAC_PI_2 * t.cosh() / (c * c);
            // distance from the endpoints, kept exact to avoid cancellation
            let d = half / (s.exp() * c);
            if w < 1e-300 || d == 0.0 {
                break;
            }
            let mut term = 0.0;
            for &x in &[b - d, a + d] {
                if x > a && x < b {
                    let v = f(x);
                    if v.is_finite() {
                        term += v;
                    }
                }
            }
            if k == 0 {
                term = f(mid);
            }
            sum += w * term;
            k += step;
            if t > 6.0 {
                break;
            }
        }
        total = if level == 0 { sum } else { total + sum };
        let estimate = half * h * total;
        if level > 3 && (estimate - prev).abs() <= 1e-15 * estimate.abs().max(1e-300) {
            return estimate;
        }
        prev = estimate;
        h *= 0.5;
    }
    prev
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
