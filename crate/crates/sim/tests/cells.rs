use metamed::{BootstrapConfig, Distribution, Method, Scenario, SeKind};
use metamed_sim::*;

fn small_meta(p: f64, methods: Vec<Method>) -> MetaSimConfig {
    let mut cfg = MetaSimConfig::desk(8, p, Scenario::S1, methods, 11);
    cfg.reps = 40;
    cfg.bootstrap = Some(BootstrapConfig::new(40, 0));
    cfg
}

#[test]
fn meta_cell_is_independent_of_thread_count() {
    let cfg = small_meta(0.5, vec![Method::Qe, Method::Bc]);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| run_meta_cell(&cfg)).unwrap();
    let b = three.install(|| run_meta_cell(&cfg)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn all_mean_reporting_cell_is_identical_across_methods_and_kinds() {
    let r = run_meta_cell(&small_meta(0.0, vec![Method::Qe, Method::Mln])).unwrap();
    assert_eq!(r.meta.len(), 4);
    for m in &r.meta[1..] {
        assert_eq!(m.tau2_bias, r.meta[0].tau2_bias);
        assert_eq!(m.mu_bias, r.meta[0].mu_bias);
        assert_eq!(m.tau2_coverage, r.meta[0].tau2_coverage);
    }
}

#[test]
fn sample_mean_control_is_calibrated() {
    let mut cfg = MetaSimConfig::desk(20, 0.0, Scenario::S1, vec![Method::Qe], 5);
    cfg.reps = 400;
    cfg.bootstrap = None;
    let r = run_meta_cell(&cfg).unwrap();
    let m = &r.meta[0];
    assert_eq!(m.used, 400);
    assert!(m.tau2_bias.abs() < 1.0, "tau2 bias {}", m.tau2_bias);
    assert!((0.89..=0.99).contains(&m.tau2_coverage), "tau2 coverage {}", m.tau2_coverage);
    assert!((0.89..=0.99).contains(&m.mu_coverage), "mu coverage {}", m.mu_coverage);
}

#[test]
fn naive_se_inflates_tau2_when_medians_are_reported() {
    let cfg = small_meta(1.0, vec![Method::Qe]);
    let r = run_meta_cell(&cfg).unwrap();
    let naive = r.meta.iter().find(|m| m.se_kind == SeKind::Naive).unwrap();
    let boot = r.meta.iter().find(|m| m.se_kind == SeKind::Bootstrap).unwrap();
    assert!(naive.tau2_bias > 0.0);
    assert!(naive.tau2_bias > boot.tau2_bias);
    assert!(naive.mean_i2 > boot.mean_i2);
}

#[test]
fn true_i2_for_mean_reporting_studies_is_closed_form() {
    let cfg = MetaSimConfig::desk(10, 0.0, Scenario::S1, vec![Method::Qe], 1);
    let sigma2 = cfg.base.sd().powi(2);
    let inv_n = (100..=500).map(|n| 1.0 / n as f64).sum::<f64>() / 401.0;
    let want = 6.0 / (6.0 + sigma2 * inv_n);
    let got = true_i2_oracle(&cfg, Method::Qe, 200).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn true_i2_drops_when_median_estimators_are_less_efficient() {
    let mean_only = MetaSimConfig::desk(10, 0.0, Scenario::S1, vec![Method::Qe], 1);
    let medians = MetaSimConfig::desk(10, 1.0, Scenario::S1, vec![Method::Qe], 1);
    let a = true_i2_oracle(&mean_only, Method::Qe, 300).unwrap();
    let b = true_i2_oracle(&medians, Method::Qe, 300).unwrap();
    assert!(b < a, "{b} !< {a}");
}

#[test]
fn study_cell_naive_se_underestimates_for_skewed_data() {
    let cfg = StudySimConfig {
        dist: Distribution::lognormal(5.0, 0.25).unwrap(),
        n: 400,
        scenario: Scenario::S1,
        reps: 40,
        oracle_reps: 800,
        methods: vec![Method::Qe],
        bootstrap: None,
        seed: 3,
    };
    let r = run_study_cell(&cfg).unwrap();
    assert_eq!(r.study.len(), 1);
    assert!(r.study[0].median_pct_err < 0.0);
    assert_eq!(r.study[0].used, 40);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small_meta(0.5, vec![Method::Qe]);
    cfg.p = 1.5;
    assert!(matches!(run_meta_cell(&cfg), Err(SimError::Config(_))));
    let mut cfg = small_meta(0.5, vec![]);
    cfg.p = 0.5;
    assert!(matches!(run_meta_cell(&cfg), Err(SimError::Config(_))));
    let mut cfg = small_meta(0.5, vec![Method::Qe]);
    cfg.n_range = (300, 200);
    assert!(matches!(run_meta_cell(&cfg), Err(SimError::Config(_))));
}

#[test]
fn cells_round_trip_through_output_files() {
    let cfg = small_meta(0.5, vec![Method::Bc]);
    let r = run_meta_cell(&cfg).unwrap();
    let dir = std::env::temp_dir().join(format!("metamed-sim-out-{}", std::process::id()));
    let (csv_path, json_path) = write_cell(&r, &dir).unwrap();
    let back: SimCellResult = serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    assert_eq!(back, r);
    let text = std::fs::read_to_string(csv_path).unwrap();
    assert_eq!(text.lines().count(), 1 + r.meta.len());
    let combined = dir.join("all.csv");
    write_combined_csv(&[r.clone(), r], &combined).unwrap();
    assert_eq!(std::fs::read_to_string(combined).unwrap().lines().count(), 5);
    std::fs::remove_dir_all(dir).unwrap();
}
