//! Generalization-bound machinery.
//!
//! Conditional Rademacher averages `R_n = E_sigma[sup_h (1/n) sum sigma_i h(x_i)]`
//! are estimated either exactly over an enumerated hypothesis list or
//! approximately by retraining on sign vectors (the ERM-flip identity
//! `sup_h (1/n) sum sigma_i h(x_i) = 1 - 2 min_h err_sigma(h)`).
//!
//! All bound right-hand sides use natural logarithms:
//!
//! - uniform deviation: `A R_n + B sqrt(ln(4/delta) / 2n)`, with the excess
//!   form at twice that;
//! - interval-known parameters: `2 eps` (or `eps` with midpoint proxies)
//!   `+ 2A R_n + 2B sqrt(ln(4/delta) / 2n)`;
//! - reweighted estimator: `4M R_n + 4M (1 + sqrt 2) sqrt(ln(4/delta) / 2n)`;
//! - finite class: `sqrt(A_diff^2 (ln(2|H|) + ln(1/delta)) / 2n)`, with the
//!   excess form at twice that.
//!
//! The module also builds the two-world lower-bound instance: a single atom
//! with `P[Y = 1] = 1/2` and two parameter worlds indistinguishable from
//! training data whose optimal decisions differ, forcing any learner to
//! suffer excess risk `eps / 4` in the adversarially chosen world with
//! probability at least one half.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::drift::{DriftParams, Interval, IntervalParams, PerCoefficients};
use crate::seeded::{salt, stream};
use crate::Label;

#[derive(Clone, Debug, PartialEq)]
pub enum BoundsError {
    EmptySample,
    DomainError(String),
    /// Exhaustive sign enumeration requested for too many points.
    EnumerationTooLarge {
        n: usize,
        max: usize,
    },
    /// No feasible completion of the two-world construction.
    Infeasible {
        abar1: f64,
        epsilon: f64,
    },
}

impl fmt::Display for BoundsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundsError::EmptySample => write!(f, "empty sample"),
            BoundsError::DomainError(msg) => write!(f, "domain error: {msg}"),
            BoundsError::EnumerationTooLarge { n, max } => {
                write!(f, "cannot enumerate 2^{n} sign vectors (max n = {max})")
            }
            BoundsError::Infeasible { abar1, epsilon } => {
                write!(
                    f,
                    "no feasible two-world completion for abar1={abar1}, eps={epsilon}"
                )
            }
        }
    }
}

impl std::error::Error for BoundsError {}

/// How the expectation over sign vectors is taken.
#[derive(Clone, Debug, PartialEq)]
pub enum SigmaSampling {
    /// Seeded Monte Carlo over sign draws.
    MonteCarlo { draws: usize, seed: u64 },
    /// All `2^n` sign vectors; exact, zero standard error.
    Exhaustive,
}

/// Method used for the supremum over hypotheses.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadMethod {
    /// Exact supremum over an enumerated list.
    ExactEnumeration,
    /// Supremum approximated (from below) by training on the sign vector.
    ErmFlipApprox,
}

/// A conditional Rademacher average estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RademacherEstimate {
    pub value: f64,
    pub method: RadMethod,
    pub n_sigma_draws: usize,
    /// Monte Carlo standard error over sign draws; 0 for exhaustive
    /// enumeration.
    pub std_error: f64,
}

impl RademacherEstimate {
    /// A fixed value treated as exact, for bound evaluation from known
    /// quantities.
    pub fn fixed(value: f64) -> RademacherEstimate {
        RademacherEstimate {
            value,
            method: RadMethod::ExactEnumeration,
            n_sigma_draws: 0,
            std_error: 0.0,
        }
    }
}

const MAX_EXHAUSTIVE_N: usize = 24;

fn summarize(sups: Vec<f64>, method: RadMethod, exact_sigma: bool) -> RademacherEstimate {
    let n_draws = sups.len();
    let mean = sups.iter().sum::<f64>() / n_draws as f64;
    let std_error = if exact_sigma || n_draws < 2 {
        0.0
    } else {
        let var =
            sups.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n_draws as f64 - 1.0);
        (var / n_draws as f64).sqrt()
    };
    // the population average is provably nonnegative; truncate Monte Carlo
    // noise below zero
    RademacherEstimate {
        value: mean.max(0.0),
        method,
        n_sigma_draws: n_draws,
        std_error,
    }
}

/// Rademacher average of an enumerated function class. `values[h][i]` is the
/// h-th function evaluated at the i-th sample point.
pub fn rademacher_finite(
    values: &[Vec<f64>],
    sampling: &SigmaSampling,
) -> Result<RademacherEstimate, BoundsError> {
    if values.is_empty() || values[0].is_empty() {
        return Err(BoundsError::EmptySample);
    }
    let n = values[0].len();
    assert!(
        values.iter().all(|row| row.len() == n),
        "ragged hypothesis table"
    );
    let sup_for = |signs: &[f64]| -> f64 {
        values
            .iter()
            .map(|row| row.iter().zip(signs).map(|(v, s)| v * s).sum::<f64>() / n as f64)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    match sampling {
        SigmaSampling::Exhaustive => {
            if n > MAX_EXHAUSTIVE_N {
                return Err(BoundsError::EnumerationTooLarge {
                    n,
                    max: MAX_EXHAUSTIVE_N,
                });
            }
            let total = 1usize << n;
            let mut signs = vec![0.0; n];
            let mut sups = Vec::with_capacity(total);
            for mask in 0..total {
                for (i, s) in signs.iter_mut().enumerate() {
                    *s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                }
                sups.push(sup_for(&signs));
            }
            Ok(summarize(sups, RadMethod::ExactEnumeration, true))
        }
        SigmaSampling::MonteCarlo { draws, seed } => {
            if *draws == 0 {
                return Err(BoundsError::DomainError(
                    "need at least one sign draw".into(),
                ));
            }
            let mut rng = stream(*seed, salt::SIGMA);
            let mut sups = Vec::with_capacity(*draws);
            let mut signs = vec![0.0; n];
            for _ in 0..*draws {
                for s in signs.iter_mut() {
                    *s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                }
                sups.push(sup_for(&signs));
            }
            Ok(summarize(sups, RadMethod::ExactEnumeration, false))
        }
    }
}

/// ERM-flip approximation for trainable classes: for each sign draw, a
/// trainer fits the signs as labels and the achieved correlation
/// `(1/n) sum sigma_i h(x_i)` stands in for the supremum. The result lower
/// bounds the exact average, and reports carry the method tag.
pub fn rademacher_erm_flip<F>(
    n: usize,
    draws: usize,
    seed: u64,
    mut train_on_signs: F,
) -> Result<RademacherEstimate, BoundsError>
where
    F: FnMut(&[Label]) -> Vec<Label>,
{
    if n == 0 {
        return Err(BoundsError::EmptySample);
    }
    if draws == 0 {
        return Err(BoundsError::DomainError(
            "need at least one sign draw".into(),
        ));
    }
    let mut rng = stream(seed, salt::SIGMA);
    let mut sups = Vec::with_capacity(draws);
    for _ in 0..draws {
        let signs: Vec<Label> = (0..n)
            .map(|_| {
                if rng.gen::<bool>() {
                    Label::Pos
                } else {
                    Label::Neg
                }
            })
            .collect();
        let preds = train_on_signs(&signs);
        assert_eq!(preds.len(), n, "trainer must predict on every point");
        let corr: f64 = signs
            .iter()
            .zip(&preds)
            .map(|(s, p)| s.value() * p.value())
            .sum::<f64>()
            / n as f64;
        sups.push(corr);
    }
    Ok(summarize(sups, RadMethod::ErmFlipApprox, false))
}

/// An evaluated bound with its inputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    /// Which bound: `deviation`, `interval-excess`, `reweighted-excess`,
    /// `finite-class`.
    pub kind: String,
    pub n: usize,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rademacher: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rademacher_method: Option<RadMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_const: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_const: Option<f64>,
    /// Uniform density-ratio bound `M`, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rn_bound: Option<f64>,
    /// Total interval uncertainty `eps`, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub midpoint_proxies: Option<bool>,
    /// Hypothesis count, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_size: Option<usize>,
    /// Bound on the uniform deviation of the risk estimate, when the
    /// statement has that form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation_rhs: Option<f64>,
    /// Bound on the excess risk of the empirical minimizer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_rhs: Option<f64>,
}

fn check_n_delta(n: usize, delta: f64) -> Result<(), BoundsError> {
    if n == 0 {
        return Err(BoundsError::DomainError("n must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundsError::DomainError(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

fn check_rad(rad: &RademacherEstimate) -> Result<(), BoundsError> {
    if rad.value.is_nan() || rad.value < 0.0 {
        return Err(BoundsError::DomainError(format!(
            "rademacher value must be nonnegative, got {}",
            rad.value
        )));
    }
    Ok(())
}

fn sqrt_term(n: usize, delta: f64) -> f64 {
    ((4.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

fn empty_report(kind: &str, n: usize, delta: f64) -> BoundReport {
    BoundReport {
        kind: kind.into(),
        n,
        delta,
        coefficients: None,
        rademacher: None,
        rademacher_method: None,
        a_const: None,
        b_const: None,
        rn_bound: None,
        epsilon: None,
        midpoint_proxies: None,
        class_size: None,
        deviation_rhs: None,
        excess_rhs: None,
    }
}

/// Uniform deviation bound via the Rademacher average:
/// `A R_n + B sqrt(ln(4/delta) / 2n)` holds simultaneously over the class
/// with probability `1 - delta`; the excess form (for the empirical
/// minimizer) is twice the deviation.
pub fn deviation_bound(
    coeffs: &PerCoefficients,
    rad: &RademacherEstimate,
    n: usize,
    delta: f64,
) -> Result<BoundReport, BoundsError> {
    check_n_delta(n, delta)?;
    check_rad(rad)?;
    let a = coeffs.a_const();
    let b = coeffs.b_const();
    let deviation = a * rad.value + b * sqrt_term(n, delta);
    Ok(BoundReport {
        coefficients: Some(coeffs.as_array()),
        rademacher: Some(rad.value),
        rademacher_method: Some(rad.method),
        a_const: Some(a),
        b_const: Some(b),
        deviation_rhs: Some(deviation),
        excess_rhs: Some(2.0 * deviation),
        ..empty_report("deviation", n, delta)
    })
}

/// Excess bound when the drift parameters are only known inside intervals of
/// total length `eps` and training uses proxy coefficients:
/// `2 eps + 2A R_n + 2B sqrt(ln(4/delta) / 2n)`, the uncertainty term halved
/// to `eps` for midpoint proxies.
pub fn interval_excess_bound(
    proxy_coeffs: &PerCoefficients,
    epsilon: f64,
    midpoint: bool,
    rad: &RademacherEstimate,
    n: usize,
    delta: f64,
) -> Result<BoundReport, BoundsError> {
    check_n_delta(n, delta)?;
    check_rad(rad)?;
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(BoundsError::DomainError(format!(
            "eps must be nonnegative, got {epsilon}"
        )));
    }
    let a = proxy_coeffs.a_const();
    let b = proxy_coeffs.b_const();
    let uncertainty = if midpoint { epsilon } else { 2.0 * epsilon };
    let excess = uncertainty + 2.0 * a * rad.value + 2.0 * b * sqrt_term(n, delta);
    Ok(BoundReport {
        coefficients: Some(proxy_coeffs.as_array()),
        rademacher: Some(rad.value),
        rademacher_method: Some(rad.method),
        a_const: Some(a),
        b_const: Some(b),
        epsilon: Some(epsilon),
        midpoint_proxies: Some(midpoint),
        excess_rhs: Some(excess),
        ..empty_report("interval-excess", n, delta)
    })
}

/// Excess bound for the reweighted estimator under a density ratio uniformly
/// bounded by `M`: `4M R_n + 4M (1 + sqrt 2) sqrt(ln(4/delta) / 2n)`.
pub fn reweighted_excess_bound(
    m: f64,
    rad: &RademacherEstimate,
    n: usize,
    delta: f64,
) -> Result<BoundReport, BoundsError> {
    check_n_delta(n, delta)?;
    check_rad(rad)?;
    if m.is_nan() || m < 0.0 {
        return Err(BoundsError::DomainError(format!(
            "M must be nonnegative, got {m}"
        )));
    }
    let excess =
        4.0 * m * rad.value + 4.0 * m * (1.0 + std::f64::consts::SQRT_2) * sqrt_term(n, delta);
    Ok(BoundReport {
        rademacher: Some(rad.value),
        rademacher_method: Some(rad.method),
        rn_bound: Some(m),
        excess_rhs: Some(excess),
        ..empty_report("reweighted-excess", n, delta)
    })
}

/// Hoeffding plus union bound for a finite class:
/// `sqrt(A_diff^2 (ln(2 |H|) + ln(1/delta)) / 2n)` bounds the uniform
/// deviation with probability `1 - delta`; the excess form is twice that.
pub fn finite_class_bound(
    coeffs: &PerCoefficients,
    class_size: usize,
    n: usize,
    delta: f64,
) -> Result<BoundReport, BoundsError> {
    check_n_delta(n, delta)?;
    if class_size == 0 {
        return Err(BoundsError::DomainError("class size must be >= 1".into()));
    }
    let a_diff = coeffs.a_diff();
    let deviation = (a_diff * a_diff * ((2.0 * class_size as f64).ln() + (1.0 / delta).ln())
        / (2.0 * n as f64))
        .sqrt();
    Ok(BoundReport {
        coefficients: Some(coeffs.as_array()),
        a_const: Some(a_diff),
        class_size: Some(class_size),
        deviation_rhs: Some(deviation),
        excess_rhs: Some(2.0 * deviation),
        ..empty_report("finite-class", n, delta)
    })
}

/// Which of the two indistinguishable parameter worlds is in force.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum World {
    /// `a1 = abar1 - eps/2`; the optimal decision is `-1`.
    Low,
    /// `a1 = abar1 + eps/2`; the optimal decision is `+1`.
    High,
}

/// The two-world lower-bound instance: a single atom with initial
/// `P[Y = 1] = 1/2`, parameters `(a2, a3, a4)` fixed so that the risk of
/// deciding `-1` sits exactly between the two worlds' risks of deciding `+1`
/// (`a4 + a3/2 = (1 - a2) - abar1/2`), and `a1` known only inside an
/// interval of length `eps` centered at `abar1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoWorldInstance {
    pub abar1: f64,
    pub epsilon: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    /// Initial conditional probability at the atom.
    pub p0: f64,
    pub world_low: DriftParams,
    pub world_high: DriftParams,
}

impl TwoWorldInstance {
    pub fn world(&self, which: World) -> &DriftParams {
        match which {
            World::Low => &self.world_low,
            World::High => &self.world_high,
        }
    }

    /// Risk of a decision at the atom, in closed form: deciding `+1` costs
    /// `(1 - a2) - a1/2`, deciding `-1` costs `a4 + a3/2`.
    pub fn risk(&self, which: World, decision: Label) -> f64 {
        match decision {
            Label::Pos => (1.0 - self.a2) - self.world(which).a1() / 2.0,
            Label::Neg => self.a4 + self.a3 / 2.0,
        }
    }

    /// Excess risk of a decision over the world's optimum.
    pub fn excess(&self, which: World, decision: Label) -> f64 {
        let here = self.risk(which, decision);
        let best = self
            .risk(which, Label::Pos)
            .min(self.risk(which, Label::Neg));
        here - best
    }

    /// The parameter intervals as seen by the learner: `a1` inside
    /// `[abar1 - eps/2, abar1 + eps/2]`, the rest known exactly.
    pub fn intervals(&self) -> IntervalParams {
        IntervalParams::new(
            Interval::new(
                self.abar1 - self.epsilon / 2.0,
                self.abar1 + self.epsilon / 2.0,
            ),
            Interval::point(self.a2),
            Interval::point(self.a3),
            Interval::point(self.a4),
        )
        .expect("instance intervals are feasible by construction")
    }
}

/// Builds the instance from an explicit `(a2, a3, a4)` completion,
/// validating the flip condition and both worlds' feasibility.
pub fn two_world_instance_with(
    abar1: f64,
    epsilon: f64,
    a2: f64,
    a3: f64,
    a4: f64,
) -> Result<TwoWorldInstance, BoundsError> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(BoundsError::DomainError(format!(
            "eps must be nonnegative, got {epsilon}"
        )));
    }
    let target = (1.0 - a2) - abar1 / 2.0;
    if (a4 + a3 / 2.0 - target).abs() > 1e-12 {
        return Err(BoundsError::DomainError(format!(
            "completion violates the flip condition: a4 + a3/2 = {} != {target}",
            a4 + a3 / 2.0
        )));
    }
    let world_low = DriftParams::new(abar1 - epsilon / 2.0, a2, a3, a4)
        .map_err(|e| BoundsError::DomainError(format!("low world infeasible: {e}")))?;
    let world_high = DriftParams::new(abar1 + epsilon / 2.0, a2, a3, a4)
        .map_err(|e| BoundsError::DomainError(format!("high world infeasible: {e}")))?;
    Ok(TwoWorldInstance {
        abar1,
        epsilon,
        a2,
        a3,
        a4,
        p0: 0.5,
        world_low,
        world_high,
    })
}

/// Searches a completion on a grid: `a2` ascending in hundredths, then `a4`
/// ascending with `a3 = 2 (target - a4)`, taking the first feasible triple.
pub fn two_world_instance(abar1: f64, epsilon: f64) -> Result<TwoWorldInstance, BoundsError> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(BoundsError::DomainError(format!(
            "eps must be nonnegative, got {epsilon}"
        )));
    }
    for a2_step in 0..=100 {
        let a2 = a2_step as f64 / 100.0;
        let lo = abar1 - epsilon / 2.0;
        let hi = abar1 + epsilon / 2.0;
        if lo < -a2 - 1e-12 || hi > 1.0 - a2 + 1e-12 {
            continue;
        }
        let target = (1.0 - a2) - abar1 / 2.0;
        for a4_step in 0..=100 {
            let a4 = a4_step as f64 / 100.0;
            let a3 = 2.0 * (target - a4);
            if a3 < -a4 - 1e-12 || a3 > 1.0 - a4 + 1e-12 {
                continue;
            }
            if let Ok(inst) = two_world_instance_with(abar1, epsilon, a2, a3, a4) {
                return Ok(inst);
            }
        }
    }
    Err(BoundsError::Infeasible { abar1, epsilon })
}

/// Standard empirical risk minimization at the atom: the majority label,
/// ties to `+1`.
pub fn majority_learner(labels: &[Label]) -> Label {
    let pos = labels.iter().filter(|&&y| y == Label::Pos).count();
    if 2 * pos >= labels.len() {
        Label::Pos
    } else {
        Label::Neg
    }
}

/// Outcome of the adversarial two-world simulation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoWorldOutcome {
    pub trials: usize,
    pub n: usize,
    /// Fraction of trials in which the learner decided `+1`.
    pub p_positive: f64,
    /// The world the adversary selects given that decision distribution.
    pub chosen_world: World,
    /// Fraction of trials with excess risk at least `eps/4 - 1e-12` in the
    /// chosen world.
    pub failure_frequency: f64,
    /// Analytic excess of the wrong decision in each world (`eps / 4`).
    pub wrong_decision_excess_low: f64,
    pub wrong_decision_excess_high: f64,
}

/// Runs a learner over repeated training draws (labels i.i.d. with
/// `P[+1] = 1/2` at the atom) and evaluates it in the adversarially chosen
/// world, mirroring the two-case argument: if the learner favors `+1`, the
/// world where `-1` is optimal is selected, and vice versa.
pub fn two_world_simulate<F>(
    inst: &TwoWorldInstance,
    mut learner: F,
    n: usize,
    trials: usize,
    seed: u64,
) -> TwoWorldOutcome
where
    F: FnMut(&[Label]) -> Label,
{
    assert!(n >= 1 && trials >= 1);
    let mut decisions = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = stream(seed, salt::TRIAL | ((t as u64) << 8));
        let labels: Vec<Label> = (0..n)
            .map(|_| {
                if rng.gen::<f64>() < inst.p0 {
                    Label::Pos
                } else {
                    Label::Neg
                }
            })
            .collect();
        decisions.push(learner(&labels));
    }
    let pos = decisions.iter().filter(|&&d| d == Label::Pos).count();
    let p_positive = pos as f64 / trials as f64;
    let chosen_world = if p_positive >= 0.5 {
        World::Low
    } else {
        World::High
    };
    let threshold = inst.epsilon / 4.0 - 1e-12;
    let failures = decisions
        .iter()
        .filter(|&&d| inst.excess(chosen_world, d) >= threshold)
        .count();
    TwoWorldOutcome {
        trials,
        n,
        p_positive,
        chosen_world,
        failure_frequency: failures as f64 / trials as f64,
        wrong_decision_excess_low: inst.excess(World::Low, Label::Pos),
        wrong_decision_excess_high: inst.excess(World::High, Label::Neg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftFamily;

    fn mc(draws: usize) -> SigmaSampling {
        SigmaSampling::MonteCarlo { draws, seed: 7 }
    }

    #[test]
    fn rademacher_singleton_is_zero() {
        let h = vec![vec![1.0, -1.0, 1.0, 1.0]];
        let est = rademacher_finite(&h, &SigmaSampling::Exhaustive).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.n_sigma_draws, 16);
    }

    #[test]
    fn rademacher_sign_pair_on_one_point_is_one() {
        let h = vec![vec![1.0], vec![-1.0]];
        let est = rademacher_finite(&h, &SigmaSampling::Exhaustive).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn rademacher_shattering_class_is_one() {
        // all 8 decision tables over 3 points
        let n = 3;
        let hs: Vec<Vec<f64>> = (0..8u32)
            .map(|m| {
                (0..n)
                    .map(|i| if m >> i & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        let est = rademacher_finite(&hs, &SigmaSampling::Exhaustive).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn exhaustive_mode_matches_an_independent_enumeration() {
        // literal re-enumeration in the test, written without the library's
        // mask/sup helpers
        use rand::Rng;
        let mut rng = stream(19, salt::TRIAL);
        let n = 8usize;
        let hs: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                (0..n)
                    .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        let mut total = 0.0;
        let mut signs = vec![1.0f64; n];
        fn recurse(hs: &[Vec<f64>], signs: &mut Vec<f64>, at: usize, total: &mut f64) {
            if at == signs.len() {
                let mut best = f64::NEG_INFINITY;
                for h in hs {
                    let mut s = 0.0;
                    for (v, sg) in h.iter().zip(signs.iter()) {
                        s += v * sg;
                    }
                    best = best.max(s / signs.len() as f64);
                }
                *total += best;
                return;
            }
            for v in [1.0, -1.0] {
                signs[at] = v;
                recurse(hs, signs, at + 1, total);
            }
        }
        recurse(&hs, &mut signs, 0, &mut total);
        let brute = total / (1u32 << n) as f64;
        let est = rademacher_finite(&hs, &SigmaSampling::Exhaustive).unwrap();
        assert!(
            (est.value - brute.max(0.0)).abs() <= 1e-12,
            "{} vs {brute}",
            est.value
        );
    }

    #[test]
    fn monte_carlo_matches_exhaustive_within_error() {
        use rand::Rng;
        let mut rng = stream(3, salt::TRIAL);
        let n = 8;
        let hs: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                (0..n)
                    .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        let exact = rademacher_finite(&hs, &SigmaSampling::Exhaustive).unwrap();
        let approx = rademacher_finite(&hs, &mc(20_000)).unwrap();
        assert!(
            (exact.value - approx.value).abs() <= 5.0 * approx.std_error.max(1e-3),
            "exact {} vs mc {} (se {})",
            exact.value,
            approx.value,
            approx.std_error
        );
    }

    #[test]
    fn erm_flip_with_perfect_trainer_matches_exact_shattering() {
        // a trainer that can fit any sign vector realizes the shattering sup
        let est = rademacher_erm_flip(6, 50, 1, |signs| signs.to_vec()).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.method, RadMethod::ErmFlipApprox);
    }

    #[test]
    fn deviation_bound_constants() {
        let id = PerCoefficients::identity();
        let rep =
            deviation_bound(&id, &RademacherEstimate::fixed(0.0), 1_000_000_000, 0.5).unwrap();
        assert_eq!(rep.a_const, Some(1.0));
        assert!(rep.deviation_rhs.unwrap() < 1e-4);

        let placebo = DriftFamily::Placebo.params_at(0.5).unwrap().coefficients();
        let rep = deviation_bound(&placebo, &RademacherEstimate::fixed(0.0), 100, 0.1).unwrap();
        assert_eq!(rep.a_const, Some(1.0));
        let b = 2.0
            * ((1.0 + std::f64::consts::SQRT_2) * 0.125
                + 0.125
                + (1.0 + std::f64::consts::SQRT_2) * 0.375);
        assert!((rep.b_const.unwrap() - b).abs() < 1e-12);
        assert!((rep.b_const.unwrap() - 2.6642).abs() < 1e-3);
        assert_eq!(rep.excess_rhs.unwrap(), 2.0 * rep.deviation_rhs.unwrap());
    }

    #[test]
    fn interval_bound_reduces_to_deviation_excess_at_zero_eps() {
        let c = DriftFamily::Placebo.params_at(0.5).unwrap().coefficients();
        let rad = RademacherEstimate::fixed(0.07);
        let dev = deviation_bound(&c, &rad, 400, 0.05).unwrap();
        let iv = interval_excess_bound(&c, 0.0, false, &rad, 400, 0.05).unwrap();
        assert!((iv.excess_rhs.unwrap() - dev.excess_rhs.unwrap()).abs() < 1e-15);

        let mid = interval_excess_bound(&c, 0.2, true, &rad, 400, 0.05).unwrap();
        let arb = interval_excess_bound(&c, 0.2, false, &rad, 400, 0.05).unwrap();
        assert!((arb.excess_rhs.unwrap() - mid.excess_rhs.unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn reweighted_bound_is_linear_in_m() {
        let rad = RademacherEstimate::fixed(0.05);
        let one = reweighted_excess_bound(1.0, &rad, 10_000, 0.05).unwrap();
        let two = reweighted_excess_bound(2.0, &rad, 10_000, 0.05).unwrap();
        assert!((two.excess_rhs.unwrap() - 2.0 * one.excess_rhs.unwrap()).abs() < 1e-12);
        // independent arithmetic for M = 2
        let s = ((4.0f64 / 0.05).ln() / 20_000.0).sqrt();
        let want = 4.0 * 2.0 * 0.05 + 4.0 * 2.0 * (1.0 + std::f64::consts::SQRT_2) * s;
        assert!((two.excess_rhs.unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn finite_class_bound_value() {
        let c = DriftFamily::Placebo.params_at(0.5).unwrap().coefficients();
        let rep = finite_class_bound(&c, 2, 1000, 0.05).unwrap();
        assert_eq!(rep.a_const, Some(1.25));
        // sqrt(1.25^2 (ln 4 + ln 20) / 2000)
        let want = (1.25f64 * 1.25 * (4.0f64.ln() + 20.0f64.ln()) / 2000.0).sqrt();
        assert!((rep.deviation_rhs.unwrap() - want).abs() < 1e-12);
        assert!((rep.deviation_rhs.unwrap() - 0.0585).abs() < 1e-4);

        let huge = finite_class_bound(&c, 2, 1_000_000_000_000, 0.05).unwrap();
        assert!(huge.deviation_rhs.unwrap() < 1e-5);
    }

    #[test]
    fn bounds_monotonicity() {
        let c = DriftFamily::Credit.params_at(0.3).unwrap().coefficients();
        let rad = RademacherEstimate::fixed;
        let r1 = deviation_bound(&c, &rad(0.1), 100, 0.1)
            .unwrap()
            .deviation_rhs
            .unwrap();
        let r2 = deviation_bound(&c, &rad(0.1), 400, 0.1)
            .unwrap()
            .deviation_rhs
            .unwrap();
        assert!(r2 < r1, "decreasing in n");
        let r3 = deviation_bound(&c, &rad(0.1), 100, 0.05)
            .unwrap()
            .deviation_rhs
            .unwrap();
        assert!(r3 > r1, "increasing in 1/delta");
        let r4 = deviation_bound(&c, &rad(0.2), 100, 0.1)
            .unwrap()
            .deviation_rhs
            .unwrap();
        assert!(r4 > r1, "increasing in the rademacher average");
        assert!(r1 >= 0.0 && r2 >= 0.0 && r3 >= 0.0 && r4 >= 0.0);

        assert!(matches!(
            deviation_bound(&c, &rad(0.1), 0, 0.1),
            Err(BoundsError::DomainError(_))
        ));
        assert!(matches!(
            deviation_bound(&c, &rad(0.1), 10, 1.5),
            Err(BoundsError::DomainError(_))
        ));
    }

    #[test]
    fn two_world_example_instance() {
        let inst = two_world_instance_with(0.5, 0.2, 0.3, 0.9, 0.0).unwrap();
        // world risks: deciding +1 costs 0.5 (low) and 0.4 (high); deciding
        // -1 costs 0.45 in both
        assert!((inst.risk(World::Low, Label::Pos) - 0.5).abs() < 1e-15);
        assert!((inst.risk(World::High, Label::Pos) - 0.4).abs() < 1e-15);
        assert!((inst.risk(World::Low, Label::Neg) - 0.45).abs() < 1e-15);
        assert!((inst.risk(World::High, Label::Neg) - 0.45).abs() < 1e-15);
        // wrong-decision excess is eps/4 in each world
        assert!((inst.excess(World::Low, Label::Pos) - 0.05).abs() < 1e-12);
        assert!((inst.excess(World::High, Label::Neg) - 0.05).abs() < 1e-12);
        assert_eq!(inst.excess(World::Low, Label::Neg), 0.0);
        assert!((inst.intervals().total_length() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn two_world_solver_finds_feasible_completions() {
        for (abar1, eps) in [(0.5, 0.2), (0.3, 0.1), (0.0, 0.4), (0.7, 0.0)] {
            let inst = two_world_instance(abar1, eps).unwrap();
            assert!((inst.excess(World::Low, Label::Pos) - eps / 4.0).abs() < 1e-12);
            assert!((inst.excess(World::High, Label::Neg) - eps / 4.0).abs() < 1e-12);
        }
        assert!(matches!(
            two_world_instance(0.99, 0.5),
            Err(BoundsError::Infeasible { .. })
        ));
    }

    #[test]
    fn zero_eps_instance_has_identical_worlds() {
        let inst = two_world_instance(0.5, 0.0).unwrap();
        assert_eq!(inst.world_low, inst.world_high);
        assert_eq!(
            inst.excess(World::Low, Label::Pos),
            inst.excess(World::High, Label::Pos)
        );
        // at threshold eps/4 = 0 every trial counts as a failure
        let out = two_world_simulate(&inst, majority_learner, 20, 50, 3);
        assert_eq!(out.failure_frequency, 1.0);
        assert_eq!(out.wrong_decision_excess_low, 0.0);
    }

    #[test]
    fn hardcoded_learner_fails_in_the_other_world() {
        let inst = two_world_instance_with(0.5, 0.2, 0.3, 0.9, 0.0).unwrap();
        // the low world's optimum is -1; the adversary then picks High
        let out = two_world_simulate(&inst, |_: &[Label]| Label::Neg, 30, 200, 5);
        assert_eq!(out.chosen_world, World::High);
        assert_eq!(out.failure_frequency, 1.0);
    }

    #[test]
    fn majority_learner_fails_at_least_half_the_time() {
        let inst = two_world_instance_with(0.5, 0.2, 0.3, 0.9, 0.0).unwrap();
        let out = two_world_simulate(&inst, majority_learner, 50, 500, 11);
        assert!(
            out.failure_frequency >= 0.5,
            "frequency {}",
            out.failure_frequency
        );
    }
}
