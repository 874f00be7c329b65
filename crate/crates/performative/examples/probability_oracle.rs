//! Conditional-probability oracles: the exact synthetic formula and a bagged
//! random forest fitted from data, with text serialization for reuse.
//!
//! ```bash
//! cargo run --example probability_oracle
//! ```

use performative::data::gen_synthetic;
use performative::oracle::{
    fit_forest, forest_string, parse_forest, synthetic_oracle, ForestConfig, ProbOracle,
};

fn main() {
    let exact = synthetic_oracle();
    println!(
        "exact oracle at (0, 0):  {:.4}",
        exact.prob(&[0.0, 0.0]).unwrap()
    );
    println!(
        "exact oracle at (0, 2):  {:.4}",
        exact.prob(&[0.0, 2.0]).unwrap()
    );
    println!(
        "exact oracle at (3, 0):  {:.4}",
        exact.prob(&[3.0, 0.0]).unwrap()
    );

    let ds = gen_synthetic(5000, 0);
    let fitted = fit_forest(&ds, &ForestConfig::default()).unwrap();
    let mad: f64 = ds
        .features
        .iter()
        .map(|x| (fitted.prob(x).unwrap() - exact.prob(x).unwrap()).abs())
        .sum::<f64>()
        / ds.len() as f64;
    println!("\nforest (18 trees, depth 8) fitted on 5000 samples");
    println!("mean absolute deviation from the exact conditional: {mad:.4}");

    // serialize and reload
    let forest = match &fitted {
        ProbOracle::Forest(f) => f,
        _ => unreachable!(),
    };
    let text = forest_string(forest);
    let reloaded = parse_forest(&text).unwrap();
    println!(
        "serialized forest: {} bytes, reload identical: {}",
        text.len(),
        reloaded == *forest
    );
}
