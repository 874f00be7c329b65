//! Repeated training under a known drift: fixed features, labels redrawn
//! each round from the distribution induced by the previous classifier.
//! Depending on the drift, the dynamics converge or oscillate forever.
//!
//! ```bash
//! cargo run --example repeated_training
//! ```

use performative::data::gen_credit_like;
use performative::drift::DriftParams;
use performative::experiment::{
    run_rerm_experiment, Config, DatasetSection, DriftSection, OracleSection, RermSection,
    TrainSection,
};
use performative::rerm::exact_dynamics;

fn main() {
    // Infinite-data view on a single atom with p = 1/2: one drift makes both
    // decisions self-confirming, the other makes every decision self-defeating.
    let bistable = DriftParams::new(0.1, 0.8, 0.2, 0.3).unwrap();
    let oscillating = DriftParams::new(0.8, 0.0, 0.48, 0.52).unwrap();
    let b = exact_dynamics(&[0.5], &bistable).unwrap();
    println!(
        "params (0.1, 0.8, 0.2, 0.3): {} fixed points, {} cycles",
        b.fixed_points.len(),
        b.cycles.len()
    );
    let o = exact_dynamics(&[0.5], &oscillating).unwrap();
    println!(
        "params (0.8, 0, 0.48, 0.52): {} fixed points, {} cycles (period {})",
        o.fixed_points.len(),
        o.cycles.len(),
        o.cycles[0].len()
    );

    // Finite-sample runs on the credit-like stand-in (16-unit network,
    // forest probability oracle).
    let base = Config {
        seed: 2,
        dataset: DatasetSection {
            source: "credit-like".into(),
            n: 3000,
            ..Default::default()
        },
        oracle: OracleSection {
            kind: "forest".into(),
            ..Default::default()
        },
        train: TrainSection {
            arch: "mlp".into(),
            hidden: vec![16],
            optimizer: "adam".into(),
            lr: 0.01,
            l2: 1e-4,
            ..Default::default()
        },
        rerm: RermSection { max_iters: 10 },
        ..Default::default()
    };
    let _ = gen_credit_like(8, 0); // show the generator exists; data comes from the config

    for (name, params) in [
        ("moderate", [0.1, 0.8, 0.2, 0.3]),
        ("flipping", [0.8, 0.0, 0.48, 0.52]),
    ] {
        let cfg = Config {
            drift: DriftSection {
                family: "custom".into(),
                params: Some(params),
                a: Some(0.5),
                ..Default::default()
            },
            ..base.clone()
        };
        let out = run_rerm_experiment(&cfg).unwrap();
        let accs: Vec<String> = out
            .iterations
            .iter()
            .map(|it| format!("{:.3}", it.perf_test_accuracy))
            .collect();
        println!("\n{name} drift {params:?}");
        println!("  status: {:?}", out.status);
        println!("  per-round accuracy: {}", accs.join(" "));
        println!(
            "  one-shot drift-aware accuracy: {:.3}",
            out.perm_reference_accuracy
        );
    }
}
