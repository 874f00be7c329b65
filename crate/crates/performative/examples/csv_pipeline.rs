//! The data pipeline: generate a stand-in dataset, write and re-ingest it as
//! CSV, balance the classes, split, train, and checkpoint the model.
//!
//! ```bash
//! cargo run --example csv_pipeline
//! ```

use performative::data::{
    balance_classes, emit_csv_string, gen_credit_like, ingest_csv_str, split, SplitSpec,
};
use performative::learn::{checkpoint_string, parse_checkpoint, train, Architecture, TrainConfig};

fn main() {
    let ds = gen_credit_like(2000, 5);
    println!(
        "generated {} rows x {} columns, positive fraction {:.3}",
        ds.len(),
        ds.dim(),
        ds.positives() as f64 / ds.len() as f64
    );

    // CSV round trip is exact: floats print in shortest round-trip form
    let text = emit_csv_string(&ds);
    let back = ingest_csv_str(&text, "default", Some("p_true")).unwrap();
    println!("csv round trip identical: {}", back == ds);

    let balanced = balance_classes(&back, 5).unwrap();
    println!(
        "balanced to {} rows ({} positive / {} negative)",
        balanced.len(),
        balanced.positives(),
        balanced.len() - balanced.positives()
    );

    let parts = split(&balanced, &SplitSpec::TwoStage { seed: 5 }).unwrap();
    println!(
        "two-stage split: train {} / validation {} / test {}",
        parts[0].len(),
        parts[1].len(),
        parts[2].len()
    );

    let model = train(
        &parts[0],
        Architecture::Mlp {
            inputs: 10,
            hidden: vec![16],
        },
        &TrainConfig {
            optimizer: performative::learn::Optimizer::Adam,
            ..TrainConfig::synthetic_default(5)
        },
    )
    .unwrap()
    .classifier;
    let checkpoint = checkpoint_string(&model);
    let reloaded = parse_checkpoint(&checkpoint).unwrap();
    println!(
        "checkpoint: {} bytes, reload identical: {}",
        checkpoint.len(),
        reloaded == model
    );
}
