//! The full comparison protocol: sweep the drift strength, train both
//! methods with repeats and regenerated data, and score on the performative
//! test set. Writes the same JSON + CSV outputs as the `sweep` subcommand.
//!
//! ```bash
//! cargo run --release --example sweep_protocol
//! ```

use performative::experiment::{
    run_sweep, sweep_csv, write_outputs, Config, DatasetSection, DriftSection,
};

fn main() {
    let cfg = Config {
        seed: 0,
        repeats: 10,
        output: "out/sweep_example".into(),
        dataset: DatasetSection {
            n: 5000,
            ..Default::default()
        },
        drift: DriftSection {
            grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            ..Default::default()
        },
        ..Default::default()
    };
    let out = run_sweep(&cfg).expect("sweep");
    println!("{:>6} {:>6} {:>9} {:>8}", "a", "method", "mean acc", "std");
    for p in &out.results {
        println!(
            "{:>6} {:>6} {:>9.4} {:>8.4}",
            p.a,
            p.method.to_string(),
            p.mean_accuracy,
            p.std_accuracy
        );
    }
    let (json, csv) = write_outputs(&cfg.output, &out, Some(&sweep_csv(&out))).expect("write");
    println!("\nwrote {} and {}", json.display(), csv.unwrap().display());
}
