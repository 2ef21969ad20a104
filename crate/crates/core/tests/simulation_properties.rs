mod common;

use common::{sim_profile, sim_truth};
use ssalt_core::model::sample;
use ssalt_core::simulation::{
    calibrate_contamination, generate_replication, run_study, ContaminationScheme, ContaminationTarget, Quantity,
    StudyConfig,
};
use ssalt_core::Error;

fn window_mass(p: &ssalt_core::ModelParams, u: f64) -> f64 {
    1.0 - (-(u / p.scale_at(1.0)).powf(p.eta())).exp()
}

fn small_config() -> StudyConfig {
    StudyConfig {
        replications: 12,
        betas: vec![0.0, 0.5],
        epsilons: vec![0.0, 0.05],
        ..StudyConfig::reference()
    }
}

#[test]
fn calibration_hits_the_requested_mass() {
    let (truth, prof) = (sim_truth(), sim_profile());
    for target in [
        ContaminationTarget::A0,
        ContaminationTarget::A1,
        ContaminationTarget::Eta,
    ] {
        for eps in [0.03, 0.05, 0.1] {
            let scheme = ContaminationScheme::new(eps, target);
            let p = calibrate_contamination(&truth, &prof, &scheme).unwrap();
            assert!((window_mass(&p, 1.5) - eps).abs() < 1e-8);
            // the two other coordinates keep their true values
            let (a, b) = (p.as_array(), truth.as_array());
            let moved = [a[0] != b[0], a[1] != b[1], a[2] != b[2]];
            assert_eq!(moved.iter().filter(|m| **m).count(), 1, "{target}: {p:?}");
        }
    }
}

#[test]
fn calibrating_to_the_clean_mass_returns_truth() {
    let (truth, prof) = (sim_truth(), sim_profile());
    let eps = window_mass(&truth, 1.5);
    let scheme = ContaminationScheme::new(eps, ContaminationTarget::A0);
    let p = calibrate_contamination(&truth, &prof, &scheme).unwrap();
    assert!((p.a0() - truth.a0()).abs() < 1e-8);
}

#[test]
fn infeasible_schemes_are_reported() {
    let (truth, prof) = (sim_truth(), sim_profile());
    // shape alone cannot push more than 1 - 1/e onto the window
    let s = ContaminationScheme::new(0.9, ContaminationTarget::Eta);
    assert!(matches!(
        calibrate_contamination(&truth, &prof, &s),
        Err(Error::InfeasibleScheme(_))
    ));
    let s = ContaminationScheme::new(0.05, ContaminationTarget::A0).with_window(3.5);
    assert!(matches!(
        calibrate_contamination(&truth, &prof, &s),
        Err(Error::InfeasibleScheme(_))
    ));
}

#[test]
fn zero_epsilon_is_the_clean_sampler() {
    let cfg = small_config();
    let scheme = ContaminationScheme::new(0.0, ContaminationTarget::A1)
        .calibrate(&cfg.truth, &cfg.profile)
        .unwrap();
    assert!(scheme.contaminated_params().is_none());
    let a = generate_replication(&cfg, &scheme, 0).unwrap();
    assert_eq!(a, sample(&cfg.truth, &cfg.profile, cfg.n, cfg.seed));
    assert_ne!(a, generate_replication(&cfg, &scheme, 1).unwrap());
}

#[test]
fn outliers_land_in_the_window() {
    let cfg = small_config();
    let scheme = ContaminationScheme::new(0.3, ContaminationTarget::Eta)
        .calibrate(&cfg.truth, &cfg.profile)
        .unwrap();
    let k = scheme.contaminated_count(cfg.n);
    assert_eq!(k, 60);
    for i in 0..20 {
        let s = generate_replication(&cfg, &scheme, i).unwrap();
        let below = s.step1().iter().filter(|&&t| t > 0.0 && t < 1.5).count();
        assert!(below >= k);
        assert_eq!(s.n(), cfg.n);
    }
}

#[test]
fn fraction_below_window_matches_mixture() {
    let cfg = small_config();
    let eps = 0.05;
    let scheme = ContaminationScheme::new(eps, ContaminationTarget::A0)
        .calibrate(&cfg.truth, &cfg.profile)
        .unwrap();
    let reps = 10_000u64;
    let mut below = 0usize;
    for i in 0..reps {
        let s = generate_replication(&cfg, &scheme, i).unwrap();
        below += s.step1().iter().filter(|&&t| t < 1.5).count();
    }
    let total = reps as f64 * cfg.n as f64;
    let clean = window_mass(&cfg.truth, 1.5);
    let k = scheme.contaminated_count(cfg.n) as f64 / cfg.n as f64;
    let expected = k + (1.0 - k) * clean;
    // only the clean part is random
    let se = ((1.0 - k) * clean * (1.0 - clean) / total).sqrt();
    let observed = below as f64 / total;
    assert!(
        (observed - expected).abs() < 3.0 * se,
        "{observed} vs {expected} (se {se})"
    );
}

#[test]
fn report_is_independent_of_worker_count() {
    let cfg = small_config();
    let schemes = cfg.schemes(ContaminationTarget::A1).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_study(&cfg, &schemes).unwrap())
    };
    let one = run(1);
    let three = run(3);
    assert_eq!(one, three);
    assert_eq!(one.rmse.len(), 2 * 2 * Quantity::ALL.len());
    assert!(one.coverage.iter().all(|c| (0.0..=1.0).contains(&c.coverage)));
    assert!(one.rmse.iter().all(|r| r.rmse >= 0.0));
}

#[test]
fn rmse_matches_cloud() {
    let cfg = small_config();
    let schemes = cfg.schemes(ContaminationTarget::A0).unwrap();
    let report = run_study(&cfg, &schemes).unwrap();
    let cloud = report.cloud_of(0.05, ContaminationTarget::A0, 0.5);
    assert_eq!(cloud.len(), cfg.replications);
    let mut errs: Vec<f64> = cloud.iter().map(|t| t.unwrap().a1() - cfg.truth.a1()).collect();
    let forward = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    errs.reverse();
    let backward = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    let reported = report
        .rmse_of(0.05, ContaminationTarget::A0, 0.5, Quantity::A1)
        .unwrap();
    assert!((forward - reported).abs() < 1e-12 * reported);
    assert!((backward - reported).abs() < 1e-12 * reported);
}

#[test]
fn csv_outputs_have_headers() {
    let cfg = StudyConfig {
        replications: 2,
        betas: vec![0.0],
        epsilons: vec![0.0],
        ..StudyConfig::reference()
    };
    let report = run_study(&cfg, &cfg.schemes(ContaminationTarget::A0).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    report.write_csv(dir.path()).unwrap();
    let rmse = std::fs::read_to_string(dir.path().join("rmse.csv")).unwrap();
    assert!(rmse.starts_with("epsilon,target,beta,quantity,rmse,count\n"));
    assert_eq!(rmse.lines().count(), 1 + Quantity::ALL.len());
    let cloud = std::fs::read_to_string(dir.path().join("cloud.csv")).unwrap();
    assert_eq!(cloud.lines().count(), 3);
    assert!(dir.path().join("coverage.csv").exists());
}
