//! Repeated risk minimization under a known drift.
//!
//! With only one dataset from the initial distribution, repeated retraining
//! is simulated by fixing the training features and redrawing the labels
//! each round from the conditional distribution induced by the previous
//! round's classifier. Rounds share one uniform vector (coupled to the
//! original labels, so the identity drift reproduces them exactly) and one
//! training seed, which makes every round a deterministic function of the
//! previous decision vector: convergence and cycles are exact decision-vector
//! repetitions, not approximate ones.
//!
//! [`exact_dynamics`] is the infinite-data companion on a finite support: it
//! iterates the pointwise map `d'(x) = sign(drifted_prob(p(x), d(x)) - 1/2)`
//! (ties decide `+1`) and classifies every orbit of every initial decision
//! vector.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::data::Dataset;
use crate::drift::DriftParams;
use crate::learn::{evaluate, train, Architecture, LearnError, TrainConfig, TrainedModel};
use crate::oracle::{OracleError, ProbOracle};
use crate::shift::{coupled_uniforms, drifted_prob, resample_with_uniforms};
use crate::Label;

#[derive(Clone, Debug, PartialEq)]
pub enum RermError {
    /// Exact dynamics enumerate all decision vectors; the support is capped.
    SupportTooLarge {
        n: usize,
        max: usize,
    },
    InvalidProbability(f64),
    Oracle(OracleError),
    Learn(LearnError),
}

impl fmt::Display for RermError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RermError::SupportTooLarge { n, max } => {
                write!(f, "support of {n} atoms too large to enumerate (max {max})")
            }
            RermError::InvalidProbability(p) => write!(f, "probability {p} outside [0, 1]"),
            RermError::Oracle(e) => write!(f, "oracle error: {e}"),
            RermError::Learn(e) => write!(f, "training error: {e}"),
        }
    }
}

impl std::error::Error for RermError {}

impl From<OracleError> for RermError {
    fn from(e: OracleError) -> Self {
        RermError::Oracle(e)
    }
}

impl From<LearnError> for RermError {
    fn from(e: LearnError) -> Self {
        RermError::Learn(e)
    }
}

/// Terminal state of a repeated-training run.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RermStatus {
    /// Two consecutive iterations produced identical decision vectors.
    Converged { at_iteration: usize },
    /// A decision vector recurred with the given period (>= 2).
    Cycle { period: usize, first_seen: usize },
    /// No repetition within the iteration budget; `dominant_period` is the
    /// lag maximizing mean decision agreement across the trace.
    MaxIterations { dominant_period: Option<usize> },
}

/// One round of the dynamics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RermIteration {
    pub iteration: usize,
    /// Decisions on the training features.
    #[serde(skip)]
    pub decisions: Vec<Label>,
    /// Accuracy against the labels the round was trained on.
    pub train_accuracy: f64,
    /// Accuracy on the test features with labels resampled under this
    /// round's classifier.
    pub perf_test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RermTrace {
    pub iterations: Vec<RermIteration>,
    pub status: RermStatus,
}

impl RermTrace {
    pub fn final_iteration(&self) -> &RermIteration {
        self.iterations
            .last()
            .expect("trace has at least the initial round")
    }
}

/// Runs the repeated-training dynamics. Iteration 0 trains on the dataset's
/// own labels; iteration `t` trains on labels redrawn under iteration
/// `t - 1`'s decisions. Stops on decision-vector repetition or after
/// `max_iters` retraining rounds.
#[allow(clippy::too_many_arguments)]
pub fn rerm_run(
    train_ds: &Dataset,
    test_ds: &Dataset,
    oracle: &ProbOracle,
    params: &DriftParams,
    arch: &Architecture,
    train_cfg: &TrainConfig,
    max_iters: usize,
    seed: u64,
) -> Result<RermTrace, RermError> {
    rerm_driver(
        train_ds, test_ds, oracle, params, arch, train_cfg, max_iters, seed, true,
    )
}

/// Like [`rerm_run`] but always records exactly `rounds` retraining rounds,
/// continuing through convergence or cycling. The status still reports the
/// first repetition found. This is the form used for plot traces and for
/// checking the finite-sample dynamics against the exact orbit.
#[allow(clippy::too_many_arguments)]
pub fn rerm_trajectory(
    train_ds: &Dataset,
    test_ds: &Dataset,
    oracle: &ProbOracle,
    params: &DriftParams,
    arch: &Architecture,
    train_cfg: &TrainConfig,
    rounds: usize,
    seed: u64,
) -> Result<RermTrace, RermError> {
    rerm_driver(
        train_ds, test_ds, oracle, params, arch, train_cfg, rounds, seed, false,
    )
}

#[allow(clippy::too_many_arguments)]
fn rerm_driver(
    train_ds: &Dataset,
    test_ds: &Dataset,
    oracle: &ProbOracle,
    params: &DriftParams,
    arch: &Architecture,
    train_cfg: &TrainConfig,
    max_iters: usize,
    seed: u64,
    stop_on_repeat: bool,
) -> Result<RermTrace, RermError> {
    assert!(max_iters >= 1, "max_iters must be >= 1");
    let probs_train = oracle.probs(&train_ds.features)?;
    let probs_test = oracle.probs(&test_ds.features)?;
    for &p in probs_train.iter().chain(&probs_test) {
        if !(0.0..=1.0).contains(&p) {
            return Err(RermError::InvalidProbability(p));
        }
    }
    let u_train = coupled_uniforms(&probs_train, &train_ds.labels, seed);
    let u_test = coupled_uniforms(&probs_test, &test_ds.labels, seed.wrapping_add(1));

    let mut seen: HashMap<Vec<Label>, usize> = HashMap::new();
    let mut iterations: Vec<RermIteration> = Vec::new();
    let mut status: Option<RermStatus> = None;

    let mut labels = train_ds.labels.clone();
    for iter_idx in 0..=max_iters {
        let round_ds = train_ds.with_labels(labels.clone());
        let TrainedModel { classifier, .. } = train(&round_ds, arch.clone(), train_cfg)?;
        let decisions = classifier.decisions(&train_ds.features);
        let train_accuracy = evaluate(&classifier, &round_ds)?;
        let test_decisions = classifier.decisions(&test_ds.features);
        let test_labels = resample_with_uniforms(&probs_test, &test_decisions, params, &u_test);
        let hits = test_decisions
            .iter()
            .zip(&test_labels)
            .filter(|(d, y)| d == y)
            .count();
        let perf_test_accuracy = hits as f64 / test_ds.len() as f64;
        iterations.push(RermIteration {
            iteration: iter_idx,
            decisions: decisions.clone(),
            train_accuracy,
            perf_test_accuracy,
        });

        if status.is_none() {
            if let Some(&first) = seen.get(&decisions) {
                let period = iter_idx - first;
                status = Some(if period == 1 {
                    RermStatus::Converged {
                        at_iteration: iter_idx,
                    }
                } else {
                    RermStatus::Cycle {
                        period,
                        first_seen: first,
                    }
                });
                if stop_on_repeat {
                    break;
                }
            } else {
                seen.insert(decisions.clone(), iter_idx);
            }
        }
        if iter_idx == max_iters {
            break;
        }
        labels = resample_with_uniforms(&probs_train, &decisions, params, &u_train);
    }

    let status = status.unwrap_or_else(|| RermStatus::MaxIterations {
        dominant_period: dominant_period(&iterations),
    });
    Ok(RermTrace { iterations, status })
}

/// Lag with the highest mean decision agreement across the recorded trace.
fn dominant_period(iterations: &[RermIteration]) -> Option<usize> {
    let t = iterations.len();
    if t < 3 {
        return None;
    }
    let n = iterations[0].decisions.len() as f64;
    let mut best: Option<(usize, f64)> = None;
    for lag in 1..=t / 2 {
        let mut agree = 0.0;
        let mut count = 0usize;
        for i in lag..t {
            let a = &iterations[i].decisions;
            let b = &iterations[i - lag].decisions;
            let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
            agree += same as f64 / n;
            count += 1;
        }
        let score = agree / count as f64;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((lag, score));
        }
    }
    best.map(|(lag, _)| lag)
}

/// One application of the infinite-data iteration map on a finite support.
pub fn exact_step(probs: &[f64], decisions: &[Label], params: &DriftParams) -> Vec<Label> {
    probs
        .iter()
        .zip(decisions)
        .map(|(&p, &d)| Label::from_score(drifted_prob(p, d, params) - 0.5))
        .collect()
}

/// Classification of a single starting decision vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitSummary {
    /// Steps taken before entering the terminal orbit.
    pub entry_steps: usize,
    /// Length of the terminal orbit (1 = fixed point).
    pub period: usize,
}

/// Complete orbit structure of the iteration map on a finite support.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactDynamics {
    /// Decision vectors fixed by the map, sorted.
    pub fixed_points: Vec<Vec<Label>>,
    /// Cycles of period >= 2, each listed from its lexicographically
    /// smallest state, deduplicated.
    pub cycles: Vec<Vec<Vec<Label>>>,
    /// Per-start classification, indexed by the bitmask of the initial
    /// decision vector (bit i set means atom i decides `+1`).
    pub orbits: Vec<OrbitSummary>,
}

const MAX_EXACT_SUPPORT: usize = 16;

/// Enumerates the orbits of the iteration map from every initial decision
/// vector over a support of conditional probabilities.
pub fn exact_dynamics(probs: &[f64], params: &DriftParams) -> Result<ExactDynamics, RermError> {
    let n = probs.len();
    if n == 0 || n > MAX_EXACT_SUPPORT {
        return Err(RermError::SupportTooLarge {
            n,
            max: MAX_EXACT_SUPPORT,
        });
    }
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(RermError::InvalidProbability(p));
        }
    }
    let decode = |mask: usize| -> Vec<Label> {
        (0..n)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    Label::Pos
                } else {
                    Label::Neg
                }
            })
            .collect()
    };

    let mut fixed_points: Vec<Vec<Label>> = Vec::new();
    let mut cycles: Vec<Vec<Vec<Label>>> = Vec::new();
    let mut orbits = Vec::with_capacity(1 << n);
    for mask in 0..1usize << n {
        let mut state = decode(mask);
        let mut visited: HashMap<Vec<Label>, usize> = HashMap::new();
        let mut path: Vec<Vec<Label>> = Vec::new();
        let (entry_steps, period) = loop {
            if let Some(&at) = visited.get(&state) {
                break (at, path.len() - at);
            }
            visited.insert(state.clone(), path.len());
            path.push(state.clone());
            state = exact_step(probs, &state, params);
            assert!(path.len() <= (1 << n) + 1, "orbit exceeded the state space");
        };
        orbits.push(OrbitSummary {
            entry_steps,
            period,
        });
        let orbit_states = &path[entry_steps..];
        if period == 1 {
            let fp = orbit_states[0].clone();
            if !fixed_points.contains(&fp) {
                fixed_points.push(fp);
            }
        } else {
            // canonicalize: rotate the smallest state to the front
            let min_pos = orbit_states
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            let mut canon = Vec::with_capacity(period);
            for k in 0..period {
                canon.push(orbit_states[(min_pos + k) % period].clone());
            }
            if !cycles.contains(&canon) {
                cycles.push(canon);
            }
        }
    }
    fixed_points.sort();
    cycles.sort();
    Ok(ExactDynamics {
        fixed_points,
        cycles,
        orbits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{LossSpec, Optimizer};
    use crate::seeded::{salt, stream};
    use rand::Rng;

    fn oscillating_params() -> DriftParams {
        DriftParams::new(0.8, 0.0, 0.48, 0.52).unwrap()
    }

    fn bistable_params() -> DriftParams {
        DriftParams::new(0.1, 0.8, 0.2, 0.3).unwrap()
    }

    #[test]
    fn single_atom_cycle() {
        // hand iteration: +1 -> 0.4 -> -1; -1 -> 0.76 -> +1
        let dyn_ = exact_dynamics(&[0.5], &oscillating_params()).unwrap();
        assert!(dyn_.fixed_points.is_empty());
        assert_eq!(dyn_.cycles.len(), 1);
        assert_eq!(dyn_.cycles[0].len(), 2);
        assert!(dyn_
            .orbits
            .iter()
            .all(|o| o.period == 2 && o.entry_steps == 0));
    }

    #[test]
    fn single_atom_two_fixed_points() {
        // hand iteration: +1 -> 0.85 -> +1; -1 -> 0.4 -> -1
        let dyn_ = exact_dynamics(&[0.5], &bistable_params()).unwrap();
        assert_eq!(dyn_.fixed_points.len(), 2);
        assert!(dyn_.cycles.is_empty());
        assert!(dyn_
            .orbits
            .iter()
            .all(|o| o.period == 1 && o.entry_steps == 0));
    }

    #[test]
    fn identity_map_has_unique_attracting_fixed_point() {
        let id = DriftParams::identity();
        let probs = [0.9, 0.2, 0.5, 0.7];
        let dyn_ = exact_dynamics(&probs, &id).unwrap();
        assert_eq!(dyn_.fixed_points.len(), 1);
        assert!(dyn_.cycles.is_empty());
        let want: Vec<Label> = probs.iter().map(|&p| Label::from_score(p - 0.5)).collect();
        assert_eq!(dyn_.fixed_points[0], want);
        // reached from every start within one step
        assert!(dyn_
            .orbits
            .iter()
            .all(|o| o.period == 1 && o.entry_steps <= 1));
    }

    #[test]
    fn every_orbit_terminates_within_the_state_space() {
        let mut rng = stream(2, salt::TRIAL);
        for _ in 0..20 {
            let n = rng.gen_range(1..=6);
            let probs: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let a2: f64 = rng.gen();
            let a4: f64 = rng.gen();
            let params = DriftParams::new(
                rng.gen_range(-a2..=1.0 - a2),
                a2,
                rng.gen_range(-a4..=1.0 - a4),
                a4,
            )
            .unwrap();
            let dyn_ = exact_dynamics(&probs, &params).unwrap();
            assert_eq!(dyn_.orbits.len(), 1 << n);
            for o in &dyn_.orbits {
                assert!(o.entry_steps + o.period <= (1 << n) + 1);
            }
        }
    }

    #[test]
    fn support_cap_enforced() {
        let probs = vec![0.5; 17];
        assert!(matches!(
            exact_dynamics(&probs, &DriftParams::identity()),
            Err(RermError::SupportTooLarge { .. })
        ));
    }

    fn single_atom_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = stream(seed, salt::DATA_GEN);
        let labels = (0..n)
            .map(|_| {
                if rng.gen::<f64>() < 0.5 {
                    Label::Pos
                } else {
                    Label::Neg
                }
            })
            .collect();
        Dataset {
            columns: vec!["x".into()],
            features: vec![vec![1.0]; n],
            labels,
            p_true: Some(vec![0.5; n]),
            label_column: "label".into(),
            p_column: Some("p_true".into()),
        }
    }

    fn atom_train_cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            loss: LossSpec::Logistic,
            optimizer: Optimizer::Sgd,
            learning_rate: 0.05,
            schedule: None,
            epochs: 15,
            batch_size: 64,
            l2: 0.0,
            seed,
        }
    }

    #[test]
    fn finite_sample_run_tracks_the_exact_cycle() {
        let train_ds = single_atom_dataset(10_000, 0);
        let test_ds = single_atom_dataset(2_000, 1);
        let params = oscillating_params();
        let trace = rerm_run(
            &train_ds,
            &test_ds,
            &ProbOracle::Constant(0.5),
            &params,
            &Architecture::Linear { inputs: 1 },
            &atom_train_cfg(7),
            12,
            42,
        )
        .unwrap();
        match trace.status {
            RermStatus::Cycle { period, .. } => assert_eq!(period, 2),
            ref other => panic!("expected a 2-cycle, got {other:?}"),
        }
        // every round's decision vector is constant across the atom and
        // follows the exact orbit from its own starting decision
        let mut exact = vec![trace.iterations[0].decisions[0]];
        for _ in 1..trace.iterations.len() {
            let next = exact_step(&[0.5], &[*exact.last().unwrap()], &params)[0];
            exact.push(next);
        }
        for (it, want) in trace.iterations.iter().zip(&exact) {
            let agree = it.decisions.iter().filter(|&&d| d == *want).count() as f64
                / it.decisions.len() as f64;
            assert!(
                agree >= 0.99,
                "iteration {} agreement {agree}",
                it.iteration
            );
        }
    }

    #[test]
    fn identity_drift_converges_at_iteration_one() {
        let train_ds = single_atom_dataset(500, 3);
        let test_ds = single_atom_dataset(200, 4);
        let trace = rerm_run(
            &train_ds,
            &test_ds,
            &ProbOracle::Constant(0.5),
            &DriftParams::identity(),
            &Architecture::Linear { inputs: 1 },
            &atom_train_cfg(5),
            8,
            9,
        )
        .unwrap();
        assert_eq!(trace.status, RermStatus::Converged { at_iteration: 1 });
    }

    #[test]
    fn converged_run_is_idempotent() {
        let train_ds = crate::data::gen_synthetic(600, 6);
        let test_ds = crate::data::gen_synthetic(300, 7);
        let params = bistable_params();
        let cfg = TrainConfig {
            epochs: 10,
            ..TrainConfig::synthetic_default(11)
        };
        let arch = Architecture::Linear { inputs: 2 };
        let trace = rerm_run(
            &train_ds,
            &test_ds,
            &ProbOracle::Synthetic,
            &params,
            &arch,
            &cfg,
            25,
            13,
        )
        .unwrap();
        let at = match trace.status {
            RermStatus::Converged { at_iteration } => at_iteration,
            ref other => panic!("expected convergence, got {other:?}"),
        };
        // one extra round from the converged labels reproduces the decisions
        let final_decisions = &trace.iterations[at].decisions;
        let probs = ProbOracle::Synthetic.probs(&train_ds.features).unwrap();
        let u = coupled_uniforms(&probs, &train_ds.labels, 13);
        let labels = resample_with_uniforms(&probs, final_decisions, &params, &u);
        let retrained = train(&train_ds.with_labels(labels), arch, &cfg).unwrap();
        assert_eq!(
            &retrained.classifier.decisions(&train_ds.features),
            final_decisions
        );
    }

    #[test]
    fn trajectory_records_every_round_through_the_cycle() {
        let train_ds = single_atom_dataset(5_000, 8);
        let test_ds = single_atom_dataset(1_000, 9);
        let trace = rerm_trajectory(
            &train_ds,
            &test_ds,
            &ProbOracle::Constant(0.5),
            &oscillating_params(),
            &Architecture::Linear { inputs: 1 },
            &atom_train_cfg(4),
            10,
            21,
        )
        .unwrap();
        assert_eq!(trace.iterations.len(), 11);
        assert!(matches!(trace.status, RermStatus::Cycle { period: 2, .. }));
        // the oscillation persists through the whole trace
        for w in trace.iterations.windows(2) {
            assert_ne!(w[0].decisions, w[1].decisions);
        }
    }

    #[test]
    fn trace_is_reproducible() {
        let train_ds = single_atom_dataset(800, 5);
        let test_ds = single_atom_dataset(200, 6);
        let run = || {
            rerm_run(
                &train_ds,
                &test_ds,
                &ProbOracle::Constant(0.5),
                &oscillating_params(),
                &Architecture::Linear { inputs: 1 },
                &atom_train_cfg(2),
                10,
                77,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
