//! Applying the posterior drift: shifted conditional probabilities, label
//! resampling under a deployed classifier, and interval-valued parameters.
//!
//! ```bash
//! cargo run --example posterior_shift
//! ```

use performative::drift::{DriftFamily, Interval, IntervalParams, ProxyRule};
use performative::shift::{drifted_prob, resample_labels};
use performative::Label;

fn main() {
    let placebo = DriftFamily::Placebo.params_at(0.5).unwrap();

    // A pessimistic prediction (h = +1) raises the probability of the bad
    // outcome; an optimistic one leaves it unchanged.
    for p in [0.2, 0.6, 0.9] {
        println!(
            "p = {p}: predicted +1 -> {:.3}, predicted -1 -> {:.3}",
            drifted_prob(p, Label::Pos, &placebo),
            drifted_prob(p, Label::Neg, &placebo),
        );
    }

    // Resampling labels under a deployed decision vector, seeded.
    let n = 50_000;
    let probs = vec![0.6; n];
    let decisions = vec![Label::Pos; n];
    let labels = resample_labels(&probs, &decisions, &placebo, 7).unwrap();
    let freq = labels.iter().filter(|&&y| y == Label::Pos).count() as f64 / n as f64;
    println!(
        "\nresampled {n} labels at p = 0.6 under decision +1: frequency {freq:.4} \
         (target {:.4})",
        drifted_prob(0.6, Label::Pos, &placebo)
    );

    // Imperfect information: parameters known only inside intervals. The
    // proxy coefficients carry a worst-case deviation bound, halved for
    // midpoint proxies.
    let iv = IntervalParams::new(
        Interval::new(0.4, 0.6),
        Interval::point(0.5),
        Interval::point(1.0),
        Interval::point(0.0),
    )
    .unwrap();
    let (mid_coeffs, mid_bound) = iv.proxy_coefficients(&ProxyRule::Midpoint).unwrap();
    let (lo_coeffs, lo_bound) = iv
        .proxy_coefficients(&ProxyRule::GivenPoints([0.4, 0.5, 1.0, 0.0]))
        .unwrap();
    println!(
        "\ninterval a1 in [0.4, 0.6] (total uncertainty {}):",
        iv.total_length()
    );
    println!(
        "  midpoint proxies {:?} -> bound {mid_bound}",
        mid_coeffs.as_array()
    );
    println!(
        "  endpoint proxies {:?} -> bound {lo_bound}",
        lo_coeffs.as_array()
    );
}
