use gcnad::Mode;
use gcnad_demo::{compare_lambdas, describe, project_2d, run_detection, DemoConfig, Role};
use ndarray::array;

fn small() -> DemoConfig {
    DemoConfig {
        nodes: 120,
        mu_shift: 4.0,
        widths: vec![8, 4],
        learning_rate: 1e-2,
        epochs: 60,
        patience: 20,
        ..DemoConfig::default()
    }
}

#[test]
fn describe_counts_add_up() {
    let s = describe(&small()).unwrap();
    assert_eq!(s.nodes, 120);
    assert_eq!(s.anomalies, 6);
    assert_eq!(s.anomalous_train + s.normal_train + s.validation + s.test, 120);
    assert_eq!(s.anomalous_train + s.normal_train, 12);
    assert!((s.mean_degree - 2.0 * s.edges as f64 / 120.0).abs() < 1e-12);
}

#[test]
fn detection_output_is_consistent() {
    let d = run_detection(&small()).unwrap();
    assert_eq!(d.lambda, 10.0);
    assert_eq!(d.scores.len(), 120);
    assert_eq!(d.projection.len(), 120);
    assert_eq!(d.roles.len(), 120);
    assert!(d.scores.iter().all(|s| s.is_finite() && *s >= 0.0));
    assert!(!d.history.is_empty());
    let best = d.best_epoch.unwrap();
    assert!(best < d.history.len());
    let auc = d.test_auc.unwrap();
    assert!(auc > 0.8, "separable synthetic data should be easy, got {auc}");
}

#[test]
fn separable_data_scores_anomalies_higher() {
    let d = run_detection(&small()).unwrap();
    let mean = |anom: bool| {
        let v: Vec<f64> = d.scores.iter().zip(&d.anomalous).filter(|(_, a)| **a == anom).map(|(s, _)| *s).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(true) > mean(false));
}

#[test]
fn normal_only_mode_hides_anomalous_labels() {
    let cfg = DemoConfig {
        mode: Mode::NormalOnly,
        ..small()
    };
    let d = run_detection(&cfg).unwrap();
    assert_eq!(d.lambda, 0.0);
    assert!(!d.roles.contains(&Role::AnomalousTrain));
}

#[test]
fn normal_only_rejects_positive_lambda() {
    let cfg = DemoConfig {
        mode: Mode::NormalOnly,
        lambda: Some(1.0),
        ..small()
    };
    assert!(run_detection(&cfg).is_err());
}

#[test]
fn same_config_same_result() {
    assert_eq!(run_detection(&small()).unwrap(), run_detection(&small()).unwrap());
}

#[test]
fn compare_keeps_lambda_order() {
    let pts = compare_lambdas(&small(), &[0.0, 10.0]).unwrap();
    assert_eq!(pts.iter().map(|p| p.lambda).collect::<Vec<_>>(), vec![0.0, 10.0]);
    let single = run_detection(&DemoConfig {
        lambda: Some(10.0),
        ..small()
    })
    .unwrap();
    assert_eq!(pts[1].test_auc, single.test_auc);
}

#[test]
fn projection_recovers_principal_axes() {
    // Points on a line along (3, 4)/5 plus a small orthogonal spread.
    let h = array![[3.0, 4.0], [-3.0, -4.0], [6.0, 8.0], [-6.0, -8.0], [0.8, -0.6], [-0.8, 0.6]];
    let p = project_2d(&h);
    let spread = |k: usize| p.iter().map(|x| x[k] * x[k]).sum::<f64>();
    assert!(spread(0) > spread(1));
    assert!((p[2][0].abs() - 10.0).abs() < 1e-9);
    assert!((p[4][1].abs() - 1.0).abs() < 1e-9);
    assert!(p[2][1].abs() < 1e-9);
}

#[test]
fn projection_of_constant_embeddings_is_origin() {
    let h = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
    assert!(project_2d(&h).iter().all(|x| x == &[0.0, 0.0]));
}

#[test]
fn json_config_uses_defaults_and_rejects_unknown_keys() {
    let cfg: DemoConfig = serde_json::from_str(r#"{"nodes": 50, "mode": "n"}"#).unwrap();
    assert_eq!(cfg.nodes, 50);
    assert_eq!(cfg.mode, Mode::NormalOnly);
    assert_eq!(cfg.epochs, DemoConfig::default().epochs);
    assert!(serde_json::from_str::<DemoConfig>(r#"{"nodez": 50}"#).is_err());
}
