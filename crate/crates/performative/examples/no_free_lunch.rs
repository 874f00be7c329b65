//! The two-world lower bound: when a drift parameter is only known inside an
//! interval of length eps, no learner can avoid excess risk eps/4 with
//! probability better than one half.
//!
//! ```bash
//! cargo run --example no_free_lunch
//! ```

use performative::bounds::{majority_learner, two_world_instance_with, two_world_simulate, World};
use performative::Label;

fn main() {
    // One atom, initial P[Y = 1] = 1/2. The completion pins the risk of
    // deciding -1 exactly between the two worlds' risks of deciding +1.
    let inst = two_world_instance_with(0.5, 0.2, 0.3, 0.9, 0.0).unwrap();
    println!(
        "interval for a1: [{}, {}]",
        inst.abar1 - inst.epsilon / 2.0,
        inst.abar1 + inst.epsilon / 2.0
    );
    println!(
        "fixed (a2, a3, a4) = ({}, {}, {})",
        inst.a2, inst.a3, inst.a4
    );
    for world in [World::Low, World::High] {
        println!(
            "  {world:?}: risk(+1) = {:.3}, risk(-1) = {:.3}, wrong-decision excess = {:.3}",
            inst.risk(world, Label::Pos),
            inst.risk(world, Label::Neg),
            inst.excess(world, Label::Pos)
                .max(inst.excess(world, Label::Neg)),
        );
    }

    // Training data cannot distinguish the worlds (it only sees the initial
    // labels), so the adversary picks whichever world the learner's habit
    // fits worse.
    let out = two_world_simulate(&inst, majority_learner, 50, 2000, 0);
    println!("\nmajority-label learner over 2000 training draws of n = 50:");
    println!("  decided +1 in {:.1}% of trials", 100.0 * out.p_positive);
    println!("  adversary selects the {:?} world", out.chosen_world);
    println!(
        "  excess >= eps/4 = {} in {:.1}% of trials (the guarantee is >= 50%)",
        inst.epsilon / 4.0,
        100.0 * out.failure_frequency
    );
}
