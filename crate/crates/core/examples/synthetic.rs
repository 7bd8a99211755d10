//! Train on planted-anomaly graphs and print the test AUC per seed.
//!
//! cargo run --release -p gcnad --example synthetic -- [mu_shift] [p_in] [p_out]

use gcnad::datagen::{generate_synthetic, make_split, SplitSpec, SynthConfig};
use gcnad::eval::evaluate;
use gcnad::trainer::{train, TrainConfig};

fn main() -> gcnad::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("number")).collect();
    let synth = SynthConfig {
        mu_shift: args.first().copied().unwrap_or(4.0),
        p_in: args.get(1).copied().unwrap_or(0.05),
        p_out: args.get(2).copied().unwrap_or(0.005),
        ..Default::default()
    };
    let mut aucs = Vec::new();
    for seed in 0..5 {
        let (graph, truth) = generate_synthetic(&SynthConfig { seed, ..synth })?;
        let split = make_split(&truth, &SplitSpec { seed, ..Default::default() })?;
        let cfg = TrainConfig { seed, ..Default::default() };
        let t0 = std::time::Instant::now();
        let out = train::<f64>(&graph, &split, &truth, &cfg)?;
        let report = evaluate(&out.model, &out.center, &graph, &split, &truth, cfg.mode)?;
        println!(
            "seed {seed}: |A|={} epochs={} best={:?} stop={} test AUC {:.4} ({:.2}s)",
            split.anomalous_train.len(),
            out.history.records.len(),
            out.history.best_epoch,
            out.history.stop_reason,
            report.test_auc,
            t0.elapsed().as_secs_f64()
        );
        aucs.push(report.test_auc);
    }
    println!("mean test AUC {:.4}", aucs.iter().sum::<f64>() / aucs.len() as f64);
    Ok(())
}
