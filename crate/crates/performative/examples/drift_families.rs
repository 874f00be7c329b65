//! Drift-parameter algebra: validating quadruples, evaluating the named
//! families, and mapping parameters to per-sample risk coefficients.
//!
//! ```bash
//! cargo run --example drift_families
//! ```

use performative::drift::{validate_drift, DriftFamily, DriftParams};

fn main() {
    // The identity drift recovers standard classification; its coefficients
    // reduce the risk term to the 0-1 loss (1 - y h) / 2.
    let id = DriftParams::identity();
    println!("identity params  {:?}", id.as_array());
    println!("identity coeffs  {:?}", id.coefficients().as_array());

    // Feasibility validation names the first violated constraint.
    match validate_drift(0.6, 0.5, 0.5, 0.0) {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected          {e}"),
    }

    // Every named family stays feasible across the whole strength range.
    println!("\nfamily evaluations at a = 0, 0.5, 1:");
    for family in DriftFamily::all_named() {
        let row: Vec<String> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&a| {
                let p = family
                    .params_at(a)
                    .expect("named families are feasible on [0, 1]");
                format!("{:?}", p.as_array())
            })
            .collect();
        println!("  {:<12} {}", family.to_string(), row.join("  "));
    }

    // Coefficients drive everything downstream: risk estimation, the
    // surrogate loss, and the bound constants.
    let placebo = DriftFamily::Placebo.params_at(0.5).unwrap();
    let c = placebo.coefficients();
    println!("\nplacebo a=0.5 coefficients {:?}", c.as_array());
    println!("  A  = {:.4} (complexity weight)", c.a_const());
    println!("  B  = {:.4} (deviation weight)", c.b_const());
    println!("  A_diff = {:.4} (term spread)", c.a_diff());
    println!("  surrogate upper bound: {}", c.surrogate_dominates());
}
