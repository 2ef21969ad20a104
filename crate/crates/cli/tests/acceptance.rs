//! Acceptance suite. Prints one PASS/FAIL line per criterion.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssalt_core::asymptotics::{j_matrix, k_matrix, oracle, param_ci, xi_vector};
use ssalt_core::characteristics::{self, estimate, mttf, quantile, reliability};
use ssalt_core::estimator::{fit, objective, objective_gradient};
use ssalt_core::model::{cdf, pdf, sample};
use ssalt_core::simulation::{run_study, CiForm, Quantity};
use ssalt_core::specfn::{h_integral_tau1, h_integral_tau1_tau2, integrate, zeta_tau1, zeta_tau1_tau2, QuadOptions};
use ssalt_core::{
    CharacteristicKind, ContaminationTarget, ExperimentConfig, FitOptions, ModelParams, SandwichCov, StressProfile,
    StudyConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn truth() -> ModelParams {
    ModelParams::new(2.0, -0.8, 5.5).unwrap()
}

fn sim_profile() -> StressProfile {
    StressProfile::new(0.5, 1.0, 2.0, 3.0, 5.0).unwrap()
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn fit_beta(cfg: &ExperimentConfig, beta: f64) -> (ssalt_core::DpdFit, SandwichCov) {
    let s = cfg.load_sample().unwrap();
    let f = fit(&cfg.profile, &s, &FitOptions::with_beta(beta)).unwrap();
    let cov = SandwichCov::compute(&f.theta_hat, &cfg.profile, beta).unwrap();
    (f, cov)
}

fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
    let mut h = 0.5;
    let mut prev = f64::NAN;
    let mut total = 0.0;
    for level in 0..12 {
        let (start, step) = if level == 0 { (0, 1) } else { (1, 2) };
        let mut sum = 0.0;
        let mut k = start;
        loop {
            let t = k as f64 * h;
            let s = std::f64::consts::FRAC_PI_2 * t.sinh();
            let c = s.cosh();
            let w = std::f64::consts::FRAC_PI_2 * t.cosh() / (c * c);
            let d = half / (s.exp() * c);
            if w < 1e-300 || d == 0.0 || t > 6.0 {
                break;
            }
            let term = if k == 0 {
                f(mid)
            } else {
                [b - d, a + d]
                    .iter()
                    .filter(|x| **x > a && **x < b)
                    .map(|&x| f(x))
                    .filter(|v| v.is_finite())
                    .sum()
            };
            sum += w * term;
            k += step;
        }
        total = if level == 0 { sum } else { total + sum };
        let est = half * h * total;
        if level > 3 && (est - prev).abs() <= 1e-15 * est.abs() {
            return est;
        }
        prev = est;
        h *= 0.5;
    }
    prev
}

fn real_data_fits() -> Outcome {
    let cfg = ExperimentConfig::load(&data_dir().join("solar_lighting.toml")).unwrap();
    let start = Instant::now();
    let fits: Vec<_> = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
        .iter()
        .map(|&b| fit_beta(&cfg, b))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let n = cfg.data().unwrap().n;
    let want0 = [14.384, -0.0440, 2.793];
    let want2 = [15.746, -0.0480, 1.463];
    let got0 = fits[0].0.theta_hat.as_array();
    let got2 = fits[1].0.theta_hat.as_array();
    let ci = param_ci(&fits[0].0, &fits[0].1, n, 0.95).unwrap()[0];
    let ok0 = (0..3).all(|i| rel(got0[i], want0[i]) < 0.01);
    let ok2 = (0..3).all(|i| rel(got2[i], want2[i]) < 0.01);
    let ok_ci = rel(ci.lo, 9.677) < 0.02 && rel(ci.hi, 19.091) < 0.02;
    Outcome {
        pass: ok0 && ok2 && ok_ci && elapsed < 5.0,
        detail: format!(
            "beta=0 {:.4?}, beta=0.2 {:.4?}, a0 CI [{:.3}, {:.3}], {:.2}s",
            got0, got2, ci.lo, ci.hi, elapsed
        ),
    }
}

fn real_data_characteristics() -> Outcome {
    let cfg = ExperimentConfig::load(&data_dir().join("solar_lighting.toml")).unwrap();
    let n = cfg.data().unwrap().n;
    let (f, cov) = fit_beta(&cfg, 0.0);
    let m = estimate(CharacteristicKind::Mttf, &f.theta_hat, 288.0, &cov.sigma, n, 0.95).unwrap();
    let mt = m.ci_transformed.clone().unwrap();
    let r5 = reliability(&f.theta_hat, 288.0, 5.0);
    let med = quantile(&f.theta_hat, 288.0, 0.5);
    let ok_m = rel(m.value, 4.818) < 0.01
        && rel(m.ci_direct.lo, 3.842) < 0.02
        && rel(m.ci_direct.hi, 5.794) < 0.02
        && rel(mt.lo, 3.935) < 0.02
        && rel(mt.hi, 5.900) < 0.02;
    Outcome {
        pass: ok_m && (r5 - 0.448).abs() < 0.01 && rel(med, 4.746) < 0.01,
        detail: format!(
            "MTTF {:.3} [{:.3}, {:.3}] / [{:.3}, {:.3}], R(5) {:.3}, median {:.3}",
            m.value, m.ci_direct.lo, m.ci_direct.hi, mt.lo, mt.hi, r5, med
        ),
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let prof = sim_profile();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_z, mut worst_h) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let p = ModelParams::new(
            rng.gen_range(1.5..2.5),
            rng.gen_range(-1.2..-0.4),
            rng.gen_range(0.8..7.0),
        )
        .unwrap();
        let beta = rng.gen_range(0.0..1.0);
        let a1 = rng.gen_range(0.0..2.0) * p.eta();
        let a2 = rng.gen_range(-2.0..2.0) * p.eta();
        let s = p.scales(&prof);
        let f1 = |t: f64| pdf(&p, &prof, t).unwrap().powf(beta + 1.0);
        let w1 = |alpha: f64, g: i32| {
            tanh_sinh(
                |t| {
                    let z = t / s.lambda1;
                    z.powf(alpha) * z.ln().powi(g) * f1(t)
                },
                0.0,
                prof.tau1(),
            )
        };
        let w2 = |alpha: f64, g: i32| {
            tanh_sinh(
                |t| {
                    let z = (t + s.shift) / s.lambda2;
                    z.powf(alpha) * z.ln().powi(g) * f1(t)
                },
                prof.tau1(),
                prof.tau2(),
            )
        };
        worst_z = worst_z
            .max(rel(zeta_tau1(a1, beta, &p, &prof).unwrap(), w1(a1, 0)))
            .max(rel(zeta_tau1_tau2(a2, beta, &p, &prof).unwrap(), w2(a2, 0)));
        for g in 1..=2u32 {
            worst_h = worst_h
                .max(rel(h_integral_tau1(a1, g, beta, &p, &prof).unwrap(), w1(a1, g as i32)))
                .max(rel(
                    h_integral_tau1_tau2(a2, g, beta, &p, &prof).unwrap(),
                    w2(a2, g as i32),
                ));
        }
    }
    let mut worst_jxi = 0.0f64;
    for beta in [0.0, 0.4, 1.0] {
        let j = j_matrix(&truth(), &prof, beta).unwrap();
        let jo = oracle::j_matrix(&truth(), &prof, beta).unwrap();
        let xi = xi_vector(&truth(), &prof, beta).unwrap();
        let xo = oracle::xi_vector(&truth(), &prof, beta).unwrap();
        for i in 0..9 {
            worst_jxi = worst_jxi.max((j[i] - jo[i]).abs() / jo[i].abs().max(1e-3 * jo.amax()));
        }
        // the vector vanishes at beta = 0
        let scale = xo.amax().max(jo.amax().sqrt());
        for i in 0..3 {
            worst_jxi = worst_jxi.max((xi[i] - xo[i]).abs() / xo[i].abs().max(1e-3 * scale));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst_z < 1e-8 && worst_h < 1e-7 && worst_jxi < 1e-6 && elapsed < 60.0,
        detail: format!("zeta {worst_z:.1e}, H {worst_h:.1e}, J/xi {worst_jxi:.1e}, {elapsed:.1}s"),
    }
}

fn beta_zero_consistency() -> Outcome {
    let prof = sim_profile();
    let s = sample(&truth(), &prof, 10_000, 4);
    let mle = fit(&prof, &s, &FitOptions::with_beta(0.0))
        .unwrap()
        .theta_hat
        .as_array();
    let near = fit(&prof, &s, &FitOptions::with_beta(1e-3))
        .unwrap()
        .theta_hat
        .as_array();
    let gap = (0..3).map(|i| (mle[i] - near[i]).abs()).fold(0.0, f64::max);
    let xi = xi_vector(&truth(), &prof, 0.0).unwrap().amax();
    let j = j_matrix(&truth(), &prof, 0.0).unwrap();
    let k = k_matrix(&truth(), &prof, 0.0).unwrap();
    let kj = (k - j).amax() / j.amax();
    Outcome {
        pass: gap < 1e-3 && xi < 1e-8 && kj < 1e-8,
        detail: format!("max |dtheta| {gap:.1e}, |xi_0| {xi:.1e}, |K_0 - J_0| {kj:.1e}"),
    }
}

fn gradient_checks() -> Outcome {
    let prof = sim_profile();
    let p = truth();
    let s = sample(&p, &prof, 200, 2);
    let th = p.as_array();
    let at = |t: [f64; 3]| ModelParams::new(t[0], t[1], t[2]).unwrap();
    let mut worst_obj = 0.0f64;
    for beta in [0.0, 0.5, 1.0] {
        let g = objective_gradient(&p, &prof, &s, beta).unwrap();
        for i in 0..3 {
            let d = 1e-5 * th[i].abs();
            let (mut up, mut dn) = (th, th);
            up[i] += d;
            dn[i] -= d;
            let fd = (objective(&at(up), &prof, &s, beta).unwrap() - objective(&at(dn), &prof, &s, beta).unwrap())
                / (2.0 * d);
            worst_obj = worst_obj.max(rel(g[i], fd));
        }
    }
    let mut worst_char = 0.0f64;
    for kind in [
        CharacteristicKind::Mttf,
        CharacteristicKind::Reliability { t: 4.0 },
        CharacteristicKind::Quantile { p: 0.5 },
    ] {
        let g = characteristics::gradient(kind, &p, 0.5);
        for i in 0..3 {
            let d = 1e-6 * th[i].abs();
            let (mut up, mut dn) = (th, th);
            up[i] += d;
            dn[i] -= d;
            let fd =
                (characteristics::value(kind, &at(up), 0.5) - characteristics::value(kind, &at(dn), 0.5)) / (2.0 * d);
            worst_char = worst_char.max(rel(g[i], fd));
        }
    }
    Outcome {
        pass: worst_obj < 1e-5 && worst_char < 1e-6,
        detail: format!("objective {worst_obj:.1e}, characteristics {worst_char:.1e}"),
    }
}

fn coverage_at_truth() -> Outcome {
    let cfg = StudyConfig {
        replications: 2000,
        betas: vec![0.0, 1.0],
        epsilons: vec![0.0],
        ..StudyConfig::reference()
    };
    let start = Instant::now();
    let report = run_study(&cfg, &cfg.schemes(ContaminationTarget::A1).unwrap()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let want = [(0.0, [0.959, 0.957, 0.947]), (1.0, [0.944, 0.942, 0.948])];
    let mut pass = elapsed < 600.0;
    let mut detail = Vec::new();
    for (beta, w) in want {
        let got: Vec<f64> = [Quantity::A0, Quantity::A1, Quantity::Eta]
            .iter()
            .map(|&q| {
                report
                    .coverage_of(0.0, ContaminationTarget::A1, beta, q, CiForm::Direct)
                    .unwrap()
            })
            .collect();
        pass &= (0..3).all(|i| (got[i] - w[i]).abs() <= 0.02);
        detail.push(format!("beta={beta}: {:.3}/{:.3}/{:.3}", got[0], got[1], got[2]));
    }
    Outcome {
        pass,
        detail: format!("{}, {elapsed:.0}s", detail.join(", ")),
    }
}

fn robustness_ordering() -> Outcome {
    let cfg = StudyConfig {
        replications: 500,
        betas: vec![0.0, 1.0],
        epsilons: vec![0.0, 0.10],
        ..StudyConfig::reference()
    };
    let target = ContaminationTarget::A1;
    let report = run_study(&cfg, &cfg.schemes(target).unwrap()).unwrap();
    let errors = |eps: f64, beta: f64| -> Vec<Option<f64>> {
        report
            .cloud_of(eps, target, beta)
            .iter()
            .map(|t| t.map(|t| t.a1() - cfg.truth.a1()))
            .collect()
    };
    let (e0, e1): (Vec<f64>, Vec<f64>) = errors(0.10, 0.0)
        .into_iter()
        .zip(errors(0.10, 1.0))
        .filter_map(|(a, b)| Some((a?, b?)))
        .unzip();
    let p = ssalt_core::simulation::paired_bootstrap_rmse(&e0, &e1, 10_000, 11);
    let rmse = |eps, beta, q| report.rmse_of(eps, target, beta, q).unwrap();
    let contaminated = rmse(0.10, 1.0, Quantity::A1) < rmse(0.10, 0.0, Quantity::A1) && p < 0.01;
    let clean = [Quantity::A0, Quantity::A1]
        .iter()
        .all(|&q| rmse(0.0, 0.0, q) <= rmse(0.0, 1.0, q));
    Outcome {
        pass: contaminated && clean,
        detail: format!(
            "eps=0.1 a1 RMSE {:.4} (beta=0) vs {:.4} (beta=1), p={p:.4}; eps=0 a0 {:.4}/{:.4}, a1 {:.4}/{:.4}",
            rmse(0.10, 0.0, Quantity::A1),
            rmse(0.10, 1.0, Quantity::A1),
            rmse(0.0, 0.0, Quantity::A0),
            rmse(0.0, 1.0, Quantity::A0),
            rmse(0.0, 0.0, Quantity::A1),
            rmse(0.0, 1.0, Quantity::A1),
        ),
    }
}

fn model_properties() -> Outcome {
    let prof = sim_profile();
    let p = truth();
    let s = p.scales(&prof);
    let left = -(-(prof.tau1() / s.lambda1).powf(p.eta())).exp_m1();
    let continuity = (left - cdf(&p, &prof, prof.tau1())).abs();

    let opts = QuadOptions {
        rel_tol: 1e-12,
        ..QuadOptions::default()
    };
    let density = |t: f64| pdf(&p, &prof, t).unwrap();
    let mass = integrate(density, 0.0, prof.tau1(), &opts).value
        + integrate(density, prof.tau1(), prof.tau2(), &opts).value
        + s.survival_at_end();

    // slower model so both steps and the atom are populated
    let slow = ModelParams::new(2.4, -0.8, 2.5).unwrap();
    let n = 100_000;
    let draws = sample(&slow, &prof, n, 7);
    let mut ks: f64 = 0.0;
    for (i, t) in draws.failure_times().enumerate() {
        let f = cdf(&slow, &prof, t);
        ks = ks
            .max((f - i as f64 / n as f64).abs())
            .max((f - (i + 1) as f64 / n as f64).abs());
    }

    let mut round_trip: f64 = 0.0;
    for prob in [0.001, 0.1, 0.5, 0.9, 0.999] {
        round_trip = round_trip.max((1.0 - reliability(&p, 0.5, quantile(&p, 0.5, prob)) - prob).abs());
    }
    let lambda0 = p.scale_at(0.5);
    let upper = lambda0 * 800f64.powf(1.0 / p.eta());
    let area = integrate(|t| reliability(&p, 0.5, t), 0.0, upper, &opts).value;
    let mttf_err = rel(mttf(&p, 0.5), area);

    Outcome {
        pass: continuity < 1e-12 && (mass - 1.0).abs() < 1e-9 && ks < 0.01 && round_trip < 1e-12 && mttf_err < 1e-8,
        detail: format!(
            "continuity {continuity:.1e}, mass-1 {:.1e}, KS {ks:.4}, round trip {round_trip:.1e}, MTTF {mttf_err:.1e}",
            mass - 1.0
        ),
    }
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_ssalt");
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| -> Vec<Vec<u8>> {
        let out = dir.path().join(name);
        let status = Command::new(bin)
            .env("SSALT_WORKERS", workers)
            .args(["simulate", "--config"])
            .arg(data_dir().join("simulation.toml"))
            .args([
                "--replications",
                "30",
                "--seed",
                "9",
                "--betas",
                "0,0.5",
                "--contaminate",
                "a1:0,0.05",
                "--out",
            ])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        ["rmse.csv", "coverage.csv", "cloud.csv"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap())
            .collect()
    };
    let a = run("a", "1");
    let b = run("b", "4");
    let c = run("c", "4");
    Outcome {
        pass: a == b && b == c,
        detail: format!("{} files compared across 1 and 4 workers", a.len()),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("real-data parameter fits", real_data_fits),
        ("real-data characteristics", real_data_characteristics),
        ("closed forms vs defining integrals", oracle_equivalence),
        ("beta -> 0 consistency", beta_zero_consistency),
        ("gradient checks", gradient_checks),
        ("coverage at the simulation truth", coverage_at_truth),
        ("robustness ordering", robustness_ordering),
        ("model-level properties", model_properties),
        ("determinism", determinism),
    ];
    let mut passed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        passed += o.pass as usize;
        println!(
            "{} {}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("{passed}/{} criteria passed", criteria.len());
}
