//! Training with the drift-aware surrogate loss versus plain logistic
//! training, scored on the performative test set.
//!
//! ```bash
//! cargo run --example surrogate_training
//! ```

use performative::data::{gen_synthetic, split, SplitSpec};
use performative::drift::{DriftFamily, PerCoefficients};
use performative::learn::{train, Architecture, LossSpec, TrainConfig};
use performative::risk::{logistic_phi, SurrogateLoss};
use performative::shift::resample_labels;
use performative::Label;

fn main() {
    // With identity coefficients the surrogate *is* the logistic loss.
    let s = SurrogateLoss::new(PerCoefficients::identity());
    let probe = 1.3;
    println!(
        "identity surrogate at score {probe}: {} == logistic {}",
        s.loss(probe, Label::Pos),
        logistic_phi(probe)
    );

    let ds = gen_synthetic(5000, 0);
    let parts = split(
        &ds,
        &SplitSpec::Fractions {
            fractions: vec![0.8, 0.2],
            seed: 0,
        },
    )
    .unwrap();
    let (train_part, test_part) = (&parts[0], &parts[1]);
    let test_probs = test_part.p_true.clone().unwrap();
    let arch = Architecture::Linear { inputs: 2 };

    println!("\nplacebo drift, accuracy on the performative test set:");
    println!("{:>6} {:>10} {:>10}", "a", "logistic", "drift-aware");
    for a in [0.0, 0.5, 1.0] {
        let params = DriftFamily::Placebo.params_at(a).unwrap();
        let mut accs = Vec::new();
        for loss in [
            LossSpec::Logistic,
            LossSpec::Surrogate(params.coefficients()),
        ] {
            let cfg = TrainConfig {
                loss,
                ..TrainConfig::synthetic_default(0)
            };
            let model = train(train_part, arch.clone(), &cfg).unwrap().classifier;
            let decisions = model.decisions(&test_part.features);
            let labels = resample_labels(&test_probs, &decisions, &params, 0).unwrap();
            let acc = decisions
                .iter()
                .zip(&labels)
                .filter(|(d, y)| d == y)
                .count() as f64
                / labels.len() as f64;
            accs.push(acc);
        }
        println!("{a:>6} {:>10.4} {:>10.4}", accs[0], accs[1]);
    }
    println!("\nat a = 0 both objectives coincide; at a = 1 the drift-aware model");
    println!("learns the self-fulfilling prediction and reaches accuracy ~1.");
}
