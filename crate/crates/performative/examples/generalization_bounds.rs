//! Rademacher-average estimation and the generalization-bound evaluators.
//!
//! ```bash
//! cargo run --example generalization_bounds
//! ```

use performative::bounds::{
    deviation_bound, finite_class_bound, interval_excess_bound, rademacher_erm_flip,
    rademacher_finite, reweighted_excess_bound, SigmaSampling,
};
use performative::data::gen_synthetic;
use performative::drift::DriftFamily;
use performative::learn::{train, Architecture, TrainConfig};
use performative::Label;

fn main() {
    // exact Rademacher average of a tiny enumerated class
    let tables = vec![
        vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        vec![-1.0, -1.0, -1.0, -1.0, -1.0, -1.0],
        vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0],
        vec![-1.0, -1.0, -1.0, 1.0, 1.0, 1.0],
    ];
    let exact = rademacher_finite(&tables, &SigmaSampling::Exhaustive).unwrap();
    println!(
        "exact Rademacher average of 4 tables on 6 points: {:.4}",
        exact.value
    );

    // approximate average of a trained linear class by refitting sign vectors
    let ds = gen_synthetic(200, 3);
    let arch = Architecture::Linear { inputs: 2 };
    let cfg = TrainConfig {
        epochs: 8,
        ..TrainConfig::synthetic_default(1)
    };
    let features = ds.features.clone();
    let approx = rademacher_erm_flip(ds.len(), 32, 5, |signs: &[Label]| {
        let relabeled = ds.with_labels(signs.to_vec());
        train(&relabeled, arch.clone(), &cfg)
            .map(|m| m.classifier.decisions(&features))
            .unwrap_or_else(|_| vec![Label::Pos; features.len()])
    })
    .unwrap();
    println!(
        "sign-refit estimate for a linear class on 200 points: {:.4} (se {:.4}, {:?})",
        approx.value, approx.std_error, approx.method
    );

    // bound reports at a drift point
    let coeffs = DriftFamily::Placebo.params_at(0.5).unwrap().coefficients();
    let n = 2000;
    let delta = 0.05;
    println!("\nbounds at n = {n}, delta = {delta}:");
    let dev = deviation_bound(&coeffs, &approx, n, delta).unwrap();
    println!(
        "  deviation          {:.4}  (excess {:.4}, A = {:.3}, B = {:.3})",
        dev.deviation_rhs.unwrap(),
        dev.excess_rhs.unwrap(),
        dev.a_const.unwrap(),
        dev.b_const.unwrap()
    );
    let iv = interval_excess_bound(&coeffs, 0.1, true, &approx, n, delta).unwrap();
    println!(
        "  interval-excess    {:.4}  (uncertainty 0.1, midpoint proxies)",
        iv.excess_rhs.unwrap()
    );
    let rw = reweighted_excess_bound(2.0, &approx, n, delta).unwrap();
    println!(
        "  reweighted-excess  {:.4}  (ratio bound M = 2)",
        rw.excess_rhs.unwrap()
    );
    let fc = finite_class_bound(&coeffs, 16, n, delta).unwrap();
    println!(
        "  finite-class       {:.4}  (16 hypotheses, A_diff = {:.3})",
        fc.deviation_rhs.unwrap(),
        fc.a_const.unwrap()
    );
}
