use gcnad::datagen::{generate_synthetic, make_split, SplitSpec, SynthConfig};
use gcnad::eval::{auc, evaluate, score_nodes};
use gcnad::objective::anomaly_scores;
use gcnad::trainer::{adam_step, train, train_with, AdamState, Mode, StopReason, TrainConfig};
use gcnad::{GcnModel, LabelSplit, NormalizedAdjacency};
use ndarray::{array, Array2};

fn small_problem(seed: u64) -> (gcnad::AttributedGraph, gcnad::GroundTruth, LabelSplit) {
    let cfg = SynthConfig {
        n_nodes: 200,
        anomaly_rate: 0.1,
        seed,
        ..Default::default()
    };
    let (g, t) = generate_synthetic(&cfg).unwrap();
    let split = make_split(
        &t,
        &SplitSpec {
            seed,
            ..Default::default()
        },
    )
    .unwrap();
    (g, t, split)
}

fn short_cfg() -> TrainConfig {
    TrainConfig {
        max_epochs: 60,
        patience: 60,
        learning_rate: 0.01,
        layer_widths: vec![16, 8],
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn adam_matches_scalar_reference_on_quadratic() {
    // f(w) = (w - 3)^2, gradient 2(w - 3); scalar Adam written out by hand.
    let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8f64, 0.1f64);
    let (mut w_ref, mut m, mut v) = (0.5f64, 0.0f64, 0.0f64);
    let mut trace = Vec::new();
    for t in 1..=3 {
        let g = 2.0 * (w_ref - 3.0);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t));
        let v_hat = v / (1.0 - b2.powi(t));
        w_ref -= lr * m_hat / (v_hat.sqrt() + eps);
        trace.push(w_ref);
    }

    let mut w = vec![array![[0.5f64]]];
    let mut state = AdamState::new(&w);
    for expected in trace {
        let g = gcnad::model::Gradients(vec![array![[2.0 * (w[0][[0, 0]] - 3.0)]]]);
        adam_step(&mut w, &g, &mut state, lr).unwrap();
        assert!((w[0][[0, 0]] - expected).abs() < 1e-12);
    }
    assert_eq!(state.t, 3);
}

#[test]
fn training_decreases_objective() {
    let (g, t, split) = small_problem(1);
    let out = train::<f64>(&g, &split, &t, &short_cfg()).unwrap();
    let rec = &out.history.records;
    assert!(rec.len() > 1);
    assert!(rec.last().unwrap().total < rec[0].total, "{} vs {}", rec.last().unwrap().total, rec[0].total);
}

#[test]
fn zero_epochs_returns_initial_model() {
    let (g, t, split) = small_problem(2);
    let cfg = TrainConfig {
        max_epochs: 0,
        patience: 0,
        ..short_cfg()
    };
    let out = train::<f64>(&g, &split, &t, &cfg).unwrap();
    assert!(out.history.records.is_empty());
    assert_eq!(out.history.stop_reason, StopReason::MaxEpochs);
    assert_eq!(out.history.stop_reason.to_string(), "max_epochs");
    let init: GcnModel = gcnad::init_model(&cfg.layer_dims(g.n_attributes()), cfg.seed, cfg.final_activation).unwrap();
    assert_eq!(out.model.weights(), init.weights());
}

#[test]
fn training_is_deterministic() {
    let (g, t, split) = small_problem(3);
    let a = train::<f64>(&g, &split, &t, &short_cfg()).unwrap();
    let b = train::<f64>(&g, &split, &t, &short_cfg()).unwrap();
    assert_eq!(a.model.weights(), b.model.weights());
    assert_eq!(a.center, b.center);
    let strip = |h: &gcnad::TrainHistory| -> Vec<_> {
        h.records.iter().map(|r| (r.total, r.compactness, r.auc_reg, r.validation)).collect()
    };
    assert_eq!(strip(&a.history), strip(&b.history));
    assert_eq!(a.history.best_epoch, b.history.best_epoch);
}

#[test]
fn center_is_frozen_during_training() {
    let (g, t, split) = small_problem(4);
    let cfg = short_cfg();
    let s = NormalizedAdjacency::from_graph(&g);
    let x = g.features().into_owned();
    let init: GcnModel = gcnad::init_model(&cfg.layer_dims(x.ncols()), cfg.seed, cfg.final_activation).unwrap();
    let before = gcnad::objective::init_center(&init, &s, x.view(), &split.normal_train, cfg.center_eps).unwrap();
    let out = train::<f64>(&g, &split, &t, &cfg).unwrap();
    assert_eq!(out.center, before);
}

#[test]
fn best_epoch_is_the_extremum() {
    let (g, t, split) = small_problem(5);
    for mode in [Mode::AnomalousAndNormal, Mode::NormalOnly] {
        let cfg = TrainConfig {
            mode,
            lambda: if mode == Mode::NormalOnly { 0.0 } else { 10.0 },
            patience: 5,
            ..short_cfg()
        };
        let out = train::<f64>(&g, &split, &t, &cfg).unwrap();
        let best = out.history.best().unwrap().validation;
        for r in &out.history.records {
            match mode {
                Mode::AnomalousAndNormal => assert!(best >= r.validation),
                Mode::NormalOnly => assert!(best <= r.validation),
            }
        }
        assert!(out.history.records.len() <= cfg.max_epochs);
        if out.history.stop_reason == StopReason::EarlyStopping {
            let last = out.history.records.last().unwrap().epoch;
            assert_eq!(last - out.history.best_epoch.unwrap(), cfg.patience);
        }
    }
}

#[test]
fn observer_sees_every_epoch() {
    let (g, t, split) = small_problem(6);
    let mut seen = Vec::new();
    let out = train_with::<f64, _>(&g, &split, &t, &short_cfg(), |r| seen.push(r.epoch)).unwrap();
    assert_eq!(seen, (0..out.history.records.len()).collect::<Vec<_>>());
}

#[test]
fn precision_mismatch_rejected_and_f32_runs() {
    let (g, t, split) = small_problem(7);
    assert!(train::<f32>(&g, &split, &t, &short_cfg()).is_err());
    let cfg = TrainConfig {
        precision: gcnad::Precision::F32,
        ..short_cfg()
    };
    let out = train::<f32>(&g, &split, &t, &cfg).unwrap();
    assert!(out.history.records.iter().all(|r| r.total.is_finite()));
}

#[test]
fn score_nodes_consistency() {
    let (g, t, split) = small_problem(8);
    let out = train::<f64>(&g, &split, &t, &short_cfg()).unwrap();
    let s = NormalizedAdjacency::from_graph(&g);
    let x = g.features().into_owned();
    assert!(score_nodes(&out.model, &out.center, &s, &x, &[]).unwrap().is_empty());
    assert!(score_nodes(&out.model, &out.center, &s, &x, &[g.n_nodes()]).is_err());
    let all: Vec<usize> = (0..g.n_nodes()).collect();
    let scores = score_nodes(&out.model, &out.center, &s, &x, &all).unwrap();
    let h = out.model.forward(&s, x.view()).unwrap().into_embeddings();
    let direct = anomaly_scores(h.view(), &out.center).unwrap();
    assert_eq!(scores, direct.to_vec());

    let report = evaluate(&out.model, &out.center, &g, &split, &t, Mode::AnomalousAndNormal).unwrap();
    assert_eq!(report.scores, scores);
    let test_scores: Vec<f64> = split.test.iter().map(|&i| scores[i]).collect();
    assert_eq!(report.test_auc, auc(&test_scores, &t.is_anomalous_mask(&split.test)).unwrap());
}

#[test]
fn normal_scores_shrink_relative_to_anomalies_on_toy_run() {
    let (g, t, split) = small_problem(9);
    let cfg = TrainConfig {
        max_epochs: 200,
        patience: 200,
        ..short_cfg()
    };
    let out = train::<f64>(&g, &split, &t, &cfg).unwrap();
    let s = NormalizedAdjacency::from_graph(&g);
    let x: Array2<f64> = g.features().into_owned();
    let normal = score_nodes(&out.model, &out.center, &s, &x, &split.normal_train).unwrap();
    let anom = score_nodes(&out.model, &out.center, &s, &x, &split.anomalous_train).unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&normal) < 0.1 * mean(&anom), "{} vs {}", mean(&normal), mean(&anom));
}
