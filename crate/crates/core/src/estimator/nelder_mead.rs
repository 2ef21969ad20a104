//! Derivative-free simplex minimization.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iters: usize,
    /// Stop once the objective spread over the simplex is below
    /// `f_tol * (1 + |f_best|)` and every vertex lies within `x_tol` of the
    /// best one (max-norm).
    pub f_tol: f64,
    pub x_tol: f64,
    /// Edge length of the initial simplex along each axis.
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult<const N: usize> {
    pub x: [f64; N],
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` starting from `x0`. Non-finite objective values are
/// treated as `+∞`.
pub fn minimize<const N: usize>(
    mut f: impl FnMut(&[f64; N]) -> f64,
    x0: [f64; N],
    opts: &NelderMeadOptions,
) -> NelderMeadResult<N> {
    let mut eval = |x: &[f64; N]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((x0, eval(&x0)));
    for i in 0..N {
        let mut x = x0;
        x[i] += opts.step;
        simplex.push((x, eval(&x)));
    }

    let n = N as f64;
    // coefficients scaled with dimension (Gao & Han)
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / n, 0.75 - 0.5 / n, 1.0 - 1.0 / n);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[N].1;
        let spread_x = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(simplex[0].0.iter()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if best.is_finite() && worst - best <= opts.f_tol * (1.0 + best.abs()) && spread_x <= opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for i in 0..N {
                centroid[i] += x[i] / n;
            }
        }
        let along = |t: f64| -> [f64; N] {
            let mut p = [0.0; N];
            for i in 0..N {
                p[i] = centroid[i] + t * (simplex[N].0[i] - centroid[i]);
            }
            p
        };

        let xr = along(-alpha);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-gamma);
            let fe = eval(&xe);
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[N].1 {
            let xc = along(-rho);
            (xc, eval(&xc))
        } else {
            let xc = along(rho);
            (xc, eval(&xc))
        };
        if fc < fr.min(simplex[N].1) {
            simplex[N] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let x_best = simplex[0].0;
        for v in simplex.iter_mut().skip(1) {
            for i in 0..N {
                v.0[i] = x_best[i] + sigma * (v.0[i] - x_best[i]);
            }
            v.1 = eval(&v.0);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NelderMeadResult {
        x: simplex[0].0,
        f: simplex[0].1,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> NelderMeadOptions {
        NelderMeadOptions {
            max_iters: 5000,
            f_tol: 1e-14,
            x_tol: 1e-8,
            step: 0.5,
        }
    }

    #[test]
    fn rosenbrock() {
        let r = minimize(
            |x: &[f64; 2]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            [-1.2, 1.0],
            &opts(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn infinite_region_is_avoided() {
        let r = minimize(
            |x: &[f64; 3]| {
                if x[2] < 0.0 {
                    f64::NAN
                } else {
                    (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2) + (x[2] - 0.5).powi(2)
                }
            },
            [0.0, 0.0, 0.1],
            &opts(),
        );
        assert!(r.converged);
        assert!((r.x[2] - 0.5).abs() < 1e-6);
    }
}
