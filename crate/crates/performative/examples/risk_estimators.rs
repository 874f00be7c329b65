//! Risk estimation three ways: the closed-form performative risk on a known
//! finite support, the coefficient-based empirical estimate from initial
//! samples, and the density-ratio-weighted estimate for joint shifts.
//!
//! ```bash
//! cargo run --example risk_estimators
//! ```

use rand::Rng;

use performative::drift::DriftFamily;
use performative::risk::{exact_pr, per, rn_per, FiniteSupport};
use performative::seeded::{salt, stream};
use performative::shift::{discrete_rn_fixed, gaussian_rn, GaussianStrategicShift};
use performative::Label;

fn main() {
    let params = DriftFamily::Placebo.params_at(0.5).unwrap();
    let coeffs = params.coefficients();

    // ground truth on a 3-atom support
    let support = FiniteSupport::new(vec![0.5, 0.3, 0.2], vec![0.8, 0.4, 0.1]).unwrap();
    let decisions = vec![Label::Pos, Label::Neg, Label::Neg];
    let truth = exact_pr(&support, &decisions, &params).unwrap();
    println!("closed-form performative risk: {truth:.6}");

    // the empirical estimate converges to it using only initial-distribution
    // samples (labels drawn from the *unshifted* conditional)
    let mut rng = stream(1, salt::TRIAL);
    for n in [100usize, 10_000, 1_000_000] {
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen();
            let atom = if u < 0.5 {
                0
            } else if u < 0.8 {
                1
            } else {
                2
            };
            let y = if rng.gen::<f64>() < support.p_pos()[atom] {
                Label::Pos
            } else {
                Label::Neg
            };
            samples.push((decisions[atom], y));
        }
        let estimate = per(&samples, &coeffs).unwrap();
        println!(
            "  n = {n:>8}: estimate {estimate:.6} (abs error {:.6})",
            (estimate - truth).abs()
        );
    }

    // density-ratio weighting for general shifts on a finite support
    let rn = discrete_rn_fixed(&[0.5, 0.5], &[0.8, 0.2]).unwrap();
    println!(
        "\ndiscrete density ratios: {:?} (bound M = {})",
        [rn.ratio(0, Label::Pos), rn.ratio(1, Label::Pos)],
        rn.bound()
    );
    let weight = rn.indexed_weight();
    let xs = vec![vec![0.0], vec![1.0]];
    let ys = vec![Label::Pos, Label::Neg];
    let wrong = vec![Label::Neg, Label::Pos];
    println!(
        "reweighted risk, all-wrong classifier on equal-mass sample: {:.4}",
        rn_per(&xs, &ys, &wrong, &weight).unwrap()
    );

    // the hiring-style feature shift: closed-form supremum of the ratio
    let shift = GaussianStrategicShift::new(0.0, 2.0, 0.0, 1.0, 0.5).unwrap();
    let w = gaussian_rn(&shift).unwrap();
    println!(
        "\ngaussian feature shift: ratio at x=0 is {:.3}, uniform bound M = {:.3}",
        w.eval(&[0.0], Label::Pos, Label::Neg),
        w.bound()
    );
}
