//! Performative distribution maps.
//!
//! Applies a [`DriftParams`] quadruple to conditional label probabilities,
//! resamples labels under a deployed classifier's decisions, and evaluates
//! Radon–Nikodym (RN) weight functions for shifts that move features as well
//! as labels.

use std::fmt;

use rand::Rng;

use crate::drift::{DriftParams, VALIDATION_TOL};
use crate::seeded::{salt, stream};
use crate::Label;

/// Errors from shift application and RN construction.
#[derive(Clone, Debug, PartialEq)]
pub enum ShiftError {
    /// A probability outside `[0, 1]`.
    InvalidProbability(f64),
    /// Parallel arrays of different lengths.
    LengthMismatch { probs: usize, decisions: usize },
    /// The feature-shift ratio has no finite supremum.
    UnboundedRatio { sigma1: f64, sigma2: f64 },
    /// Shifted mass on an atom the initial distribution does not carry.
    AbsoluteContinuityViolation { atom: usize },
    /// A finite distribution whose masses do not sum to 1.
    MassNotNormalized { sum: f64 },
    /// Gaussian shift with a non-positive standard deviation or strength
    /// outside `[0, 1]`.
    InvalidGaussian(&'static str),
}

impl fmt::Display for ShiftError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShiftError::InvalidProbability(p) => write!(f, "probability {p} outside [0, 1]"),
            ShiftError::LengthMismatch { probs, decisions } => {
                write!(
                    f,
                    "length mismatch: {probs} probabilities vs {decisions} decisions"
                )
            }
            ShiftError::UnboundedRatio { sigma1, sigma2 } => {
                write!(
                    f,
                    "density ratio unbounded: sigma2 = {sigma2} >= sigma1 = {sigma1}"
                )
            }
            ShiftError::AbsoluteContinuityViolation { atom } => {
                write!(
                    f,
                    "shifted distribution puts mass on atom {atom} with zero initial mass"
                )
            }
            ShiftError::MassNotNormalized { sum } => {
                write!(f, "distribution masses sum to {sum}, expected 1")
            }
            ShiftError::InvalidGaussian(what) => write!(f, "invalid gaussian shift: {what}"),
        }
    }
}

impl std::error::Error for ShiftError {}

/// A conditional label probability `P[Y = 1 | X = x]`, guaranteed in `[0, 1]`.
#[derive(Copy, Clone, Debug, PartialEq, PartialOrd)]
pub struct ConditionalProb(f64);

impl ConditionalProb {
    pub fn new(p: f64) -> Result<Self, ShiftError> {
        if p.is_finite() && (0.0..=1.0).contains(&p) {
            Ok(ConditionalProb(p))
        } else {
            Err(ShiftError::InvalidProbability(p))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Applies the drift branch selected by `decision`.
    pub fn drifted(self, decision: Label, params: &DriftParams) -> ConditionalProb {
        ConditionalProb(drifted_prob(self.0, decision, params))
    }
}

/// Shifted probability `mul(decision) * p + add(decision)`, clamped to
/// `[0, 1]`. For feasible parameters the clamp only absorbs the validation
/// tolerance at the boundary.
#[inline]
pub fn drifted_prob(p: f64, decision: Label, params: &DriftParams) -> f64 {
    (params.mul(decision) * p + params.add(decision)).clamp(0.0, 1.0)
}

/// Shifted probability without clamping; may leave `[0, 1]` for quadruples
/// built with [`DriftParams::new_unchecked`].
#[inline]
pub fn drifted_prob_raw(p: f64, decision: Label, params: &DriftParams) -> f64 {
    params.mul(decision) * p + params.add(decision)
}

fn check_lengths(probs: &[f64], decisions: &[Label]) -> Result<(), ShiftError> {
    if probs.len() != decisions.len() {
        return Err(ShiftError::LengthMismatch {
            probs: probs.len(),
            decisions: decisions.len(),
        });
    }
    for &p in probs {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(ShiftError::InvalidProbability(p));
        }
    }
    Ok(())
}

/// Draws labels `+1` with probability `drifted_prob(p_i, d_i)`, independently
/// per point, deterministic in the seed.
pub fn resample_labels(
    probs: &[f64],
    decisions: &[Label],
    params: &DriftParams,
    seed: u64,
) -> Result<Vec<Label>, ShiftError> {
    check_lengths(probs, decisions)?;
    let mut rng = stream(seed, salt::RESAMPLE);
    let uniforms: Vec<f64> = (0..probs.len()).map(|_| rng.gen::<f64>()).collect();
    Ok(resample_with_uniforms(probs, decisions, params, &uniforms))
}

/// Resampling against caller-supplied uniforms: label `i` is `+1` iff
/// `u_i < drifted_prob(p_i, d_i)`. Fixing the uniforms couples draws across
/// calls, which is what the repeated-training loop uses to make its rounds a
/// deterministic function of the decision vector.
pub fn resample_with_uniforms(
    probs: &[f64],
    decisions: &[Label],
    params: &DriftParams,
    uniforms: &[f64],
) -> Vec<Label> {
    assert_eq!(probs.len(), uniforms.len(), "uniform vector length");
    probs
        .iter()
        .zip(decisions)
        .zip(uniforms)
        .map(|((&p, &d), &u)| {
            if u < drifted_prob(p, d, params) {
                Label::Pos
            } else {
                Label::Neg
            }
        })
        .collect()
}

/// Uniforms coupled to an observed label vector: when the drift is the
/// identity, resampling with these uniforms reproduces `labels` exactly.
/// Marginally each entry is still uniform on `[0, 1]`.
pub fn coupled_uniforms(probs: &[f64], labels: &[Label], seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, salt::COUPLING);
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let v: f64 = rng.gen();
            match y {
                Label::Pos => p * v,
                Label::Neg => p + (1.0 - p) * v,
            }
        })
        .collect()
}

/// Clamp-mode resampling for unchecked parameters: out-of-range shifted
/// probabilities are clamped to `[0, 1]` and counted.
pub fn resample_labels_clamped(
    probs: &[f64],
    decisions: &[Label],
    params: &DriftParams,
    seed: u64,
) -> Result<(Vec<Label>, usize), ShiftError> {
    check_lengths(probs, decisions)?;
    let mut rng = stream(seed, salt::RESAMPLE);
    let mut clamped = 0usize;
    let labels = probs
        .iter()
        .zip(decisions)
        .map(|(&p, &d)| {
            let raw = drifted_prob_raw(p, d, params);
            if !(-VALIDATION_TOL..=1.0 + VALIDATION_TOL).contains(&raw) {
                clamped += 1;
            }
            let u: f64 = rng.gen();
            if u < raw.clamp(0.0, 1.0) {
                Label::Pos
            } else {
                Label::Neg
            }
        })
        .collect();
    Ok((labels, clamped))
}

/// Evaluator signature of a density-ratio weight: `(x, y, decision) -> ratio`.
pub type RnEval = dyn Fn(&[f64], Label, Label) -> f64 + Send + Sync;

/// A Radon–Nikodym weight evaluator together with its declared uniform
/// bound `M`.
pub struct RnWeight {
    bound: f64,
    eval: Box<RnEval>,
}

impl RnWeight {
    pub fn new<F>(bound: f64, eval: F) -> Self
    where
        F: Fn(&[f64], Label, Label) -> f64 + Send + Sync + 'static,
    {
        assert!(
            bound >= 0.0 && bound.is_finite(),
            "RN bound must be a finite nonnegative real"
        );
        RnWeight {
            bound,
            eval: Box::new(eval),
        }
    }

    /// Declared uniform bound `M`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: Label, decision: Label) -> f64 {
        (self.eval)(x, y, decision)
    }
}

impl fmt::Debug for RnWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RnWeight")
            .field("bound", &self.bound)
            .finish()
    }
}

/// A hiring-style strategic shift on a scalar feature: candidates classified
/// `-1` move from `N(mu1, sigma1)` to `N(mu2, sigma2)`, while on the `+1`
/// branch only the label flips with false-positive factor `a`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GaussianStrategicShift {
    pub mu1: f64,
    pub sigma1: f64,
    pub mu2: f64,
    pub sigma2: f64,
    /// False-positive factor on the `h = +1` branch, in `[0, 1]`.
    pub a: f64,
}

impl GaussianStrategicShift {
    pub fn new(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64, a: f64) -> Result<Self, ShiftError> {
        if !(sigma1.is_finite() && sigma1 > 0.0) {
            return Err(ShiftError::InvalidGaussian("sigma1 must be positive"));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(ShiftError::InvalidGaussian("sigma2 must be positive"));
        }
        if !(mu1.is_finite() && mu2.is_finite()) {
            return Err(ShiftError::InvalidGaussian("means must be finite"));
        }
        if !a.is_finite() || !(0.0..=1.0).contains(&a) {
            return Err(ShiftError::InvalidGaussian("a must lie in [0, 1]"));
        }
        Ok(GaussianStrategicShift {
            mu1,
            sigma1,
            mu2,
            sigma2,
            a,
        })
    }

    /// The `h = -1` branch of the density ratio at `x`:
    /// `(sigma1/sigma2) * exp((x - mu1)^2 / (2 sigma1^2) - (x - mu2)^2 / (2 sigma2^2))`.
    pub fn neg_branch_ratio(&self, x: f64) -> f64 {
        let q = (x - self.mu1).powi(2) / (2.0 * self.sigma1 * self.sigma1)
            - (x - self.mu2).powi(2) / (2.0 * self.sigma2 * self.sigma2);
        (self.sigma1 / self.sigma2) * q.exp()
    }

    /// Closed-form supremum of the `h = -1` branch over all `x`. The exponent
    /// is a quadratic with leading coefficient
    /// `1/(2 sigma1^2) - 1/(2 sigma2^2)`, concave exactly when
    /// `sigma2 < sigma1`; the sup is the vertex value. A pure mean shift with
    /// equal variances is constant only when the means coincide.
    pub fn sup_neg_branch(&self) -> Result<f64, ShiftError> {
        if self.sigma2 > self.sigma1 || (self.sigma2 == self.sigma1 && self.mu1 != self.mu2) {
            return Err(ShiftError::UnboundedRatio {
                sigma1: self.sigma1,
                sigma2: self.sigma2,
            });
        }
        if self.sigma2 == self.sigma1 {
            // identical distributions: ratio is constant 1
            return Ok(1.0);
        }
        let c2 = 1.0 / (2.0 * self.sigma1 * self.sigma1) - 1.0 / (2.0 * self.sigma2 * self.sigma2);
        let c1 = -self.mu1 / (self.sigma1 * self.sigma1) + self.mu2 / (self.sigma2 * self.sigma2);
        let c0 = self.mu1 * self.mu1 / (2.0 * self.sigma1 * self.sigma1)
            - self.mu2 * self.mu2 / (2.0 * self.sigma2 * self.sigma2);
        let q_max = c0 - c1 * c1 / (4.0 * c2);
        Ok((self.sigma1 / self.sigma2) * q_max.exp())
    }
}

/// Builds the RN weight of a [`GaussianStrategicShift`]: ratio `a` on the
/// `+1` branch, the Gaussian density ratio on the `-1` branch, with
/// `M = max(a, sup of the -1 branch)` computed in closed form.
pub fn gaussian_rn(shift: &GaussianStrategicShift) -> Result<RnWeight, ShiftError> {
    let sup_neg = shift.sup_neg_branch()?;
    let bound = shift.a.max(sup_neg);
    let s = *shift;
    Ok(RnWeight::new(
        bound,
        move |x, _y, decision| match decision {
            Label::Pos => s.a,
            Label::Neg => s.neg_branch_ratio(x[0]),
        },
    ))
}

/// A finite joint distribution over `(x, y)` atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteJoint {
    /// Feature vector per atom.
    pub xs: Vec<Vec<f64>>,
    /// Label per atom.
    pub ys: Vec<Label>,
    /// Probability mass per atom; must sum to 1.
    pub mass: Vec<f64>,
}

impl FiniteJoint {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<Label>, mass: Vec<f64>) -> Result<Self, ShiftError> {
        assert_eq!(xs.len(), ys.len());
        assert_eq!(xs.len(), mass.len());
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ShiftError::MassNotNormalized { sum });
        }
        Ok(FiniteJoint { xs, ys, mass })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }
}

/// Atom-wise density ratios of shifted finite distributions with respect to
/// an initial one, one table per decision branch.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteRn {
    ratio_pos: Vec<f64>,
    ratio_neg: Vec<f64>,
    bound: f64,
}

impl DiscreteRn {
    /// Ratio `shifted(atom) / initial(atom)` under the given decision.
    pub fn ratio(&self, atom: usize, decision: Label) -> f64 {
        match decision {
            Label::Pos => self.ratio_pos[atom],
            Label::Neg => self.ratio_neg[atom],
        }
    }

    /// Maximum ratio over atoms and decisions.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Adapts the table to an [`RnWeight`] for samples whose first feature
    /// component is the atom index.
    pub fn indexed_weight(&self) -> RnWeight {
        let t = self.clone();
        RnWeight::new(t.bound, move |x, _y, decision| {
            let atom = x[0].round() as usize;
            t.ratio(atom, decision)
        })
    }
}

fn ratio_table(initial: &[f64], shifted: &[f64]) -> Result<Vec<f64>, ShiftError> {
    let sum: f64 = shifted.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ShiftError::MassNotNormalized { sum });
    }
    initial
        .iter()
        .zip(shifted)
        .enumerate()
        .map(|(k, (&p, &q))| {
            if p <= 0.0 {
                if q > 0.0 {
                    Err(ShiftError::AbsoluteContinuityViolation { atom: k })
                } else {
                    Ok(0.0)
                }
            } else {
                Ok(q / p)
            }
        })
        .collect()
}

/// Ratio tables for finite distributions given per decision branch. Errors
/// if the shifted distributions are not absolutely continuous with respect
/// to the initial one.
pub fn discrete_rn(
    initial: &[f64],
    shifted_pos: &[f64],
    shifted_neg: &[f64],
) -> Result<DiscreteRn, ShiftError> {
    assert_eq!(initial.len(), shifted_pos.len());
    assert_eq!(initial.len(), shifted_neg.len());
    let sum: f64 = initial.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ShiftError::MassNotNormalized { sum });
    }
    let ratio_pos = ratio_table(initial, shifted_pos)?;
    let ratio_neg = ratio_table(initial, shifted_neg)?;
    let bound = ratio_pos
        .iter()
        .chain(&ratio_neg)
        .fold(0.0f64, |m, &r| m.max(r));
    Ok(DiscreteRn {
        ratio_pos,
        ratio_neg,
        bound,
    })
}

/// Decision-independent variant: the same shifted distribution on both
/// branches.
pub fn discrete_rn_fixed(initial: &[f64], shifted: &[f64]) -> Result<DiscreteRn, ShiftError> {
    discrete_rn(initial, shifted, shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftFamily;

    #[test]
    fn drifted_prob_matches_hand_values() {
        let placebo_half = DriftFamily::Placebo.params_at(0.5).unwrap();
        assert!((drifted_prob(0.6, Label::Pos, &placebo_half) - 0.8).abs() < 1e-15);
        assert!((drifted_prob(0.6, Label::Neg, &placebo_half) - 0.6).abs() < 1e-15);

        let id = DriftParams::identity();
        for k in 0..=10 {
            let p = k as f64 / 10.0;
            assert_eq!(drifted_prob(p, Label::Pos, &id), p);
            assert_eq!(drifted_prob(p, Label::Neg, &id), p);
        }
    }

    #[test]
    fn drifted_prob_in_range_on_grid_for_all_families() {
        for family in DriftFamily::all_named() {
            for ak in 0..=20 {
                let params = family.params_at(ak as f64 / 20.0).unwrap();
                for pk in 0..=1000 {
                    let p = pk as f64 / 1000.0;
                    for d in [Label::Pos, Label::Neg] {
                        let q = drifted_prob(p, d, &params);
                        assert!((0.0..=1.0).contains(&q), "{family} p={p} d={d:?} -> {q}");
                    }
                }
            }
        }
    }

    #[test]
    fn resample_is_reproducible_and_respects_extremes() {
        let params = DriftFamily::Placebo.params_at(1.0).unwrap(); // (0, 1, 1, 0)
        let probs = vec![0.3; 50];
        let decisions = vec![Label::Pos; 50];
        let a = resample_labels(&probs, &decisions, &params, 42).unwrap();
        let b = resample_labels(&probs, &decisions, &params, 42).unwrap();
        assert_eq!(a, b);
        // On the +1 branch, placebo strength 1 forces the shifted probability to 1.
        assert!(a.iter().all(|&y| y == Label::Pos));

        let err = resample_labels(&probs, &decisions[..10], &params, 0).unwrap_err();
        assert!(matches!(err, ShiftError::LengthMismatch { .. }));
    }

    #[test]
    fn resample_frequency_converges() {
        let params = DriftFamily::Placebo.params_at(0.5).unwrap();
        let n = 100_000;
        let probs = vec![0.6; n];
        let decisions = vec![Label::Pos; n];
        let labels = resample_labels(&probs, &decisions, &params, 9).unwrap();
        let freq = labels.iter().filter(|&&y| y == Label::Pos).count() as f64 / n as f64;
        let target = drifted_prob(0.6, Label::Pos, &params);
        assert!((freq - target).abs() <= 0.01, "freq {freq} vs {target}");
    }

    #[test]
    fn coupled_uniforms_reproduce_labels_under_identity() {
        let probs = vec![0.2, 0.5, 0.9, 0.7, 0.1];
        let labels = vec![Label::Pos, Label::Neg, Label::Pos, Label::Neg, Label::Neg];
        let u = coupled_uniforms(&probs, &labels, 31);
        let id = DriftParams::identity();
        let redrawn = resample_with_uniforms(&probs, &[Label::Pos; 5], &id, &u);
        assert_eq!(redrawn, labels);
    }

    #[test]
    fn clamp_mode_counts_out_of_range() {
        let bad = DriftParams::new_unchecked(1.5, 0.0, 1.0, 0.0);
        let probs = vec![0.9, 0.1];
        let decisions = vec![Label::Pos, Label::Pos];
        let (_, clamped) = resample_labels_clamped(&probs, &decisions, &bad, 7).unwrap();
        assert_eq!(clamped, 1); // 1.5 * 0.9 = 1.35 out of range; 0.15 fine
    }

    #[test]
    fn gaussian_rn_example() {
        let shift = GaussianStrategicShift::new(0.0, 2.0, 0.0, 1.0, 0.5).unwrap();
        let w = gaussian_rn(&shift).unwrap();
        assert!((w.bound() - 2.0).abs() < 1e-12);
        // ratio = 2 exp(-3x^2/8), maximized at x = 0
        assert!((w.eval(&[0.0], Label::Pos, Label::Neg) - 2.0).abs() < 1e-12);
        assert!((w.eval(&[1.0], Label::Pos, Label::Neg) - 2.0 * (-0.375f64).exp()).abs() < 1e-12);
        assert_eq!(w.eval(&[3.0], Label::Pos, Label::Pos), 0.5);
    }

    #[test]
    fn gaussian_rn_bound_holds_on_grid() {
        let shift = GaussianStrategicShift::new(1.0, 1.5, -0.5, 0.8, 0.7).unwrap();
        let w = gaussian_rn(&shift).unwrap();
        let m = w.bound();
        for k in 0..=2000 {
            let x = shift.mu1 - 10.0 * shift.sigma1 + k as f64 / 2000.0 * 20.0 * shift.sigma1;
            let v = w.eval(&[x], Label::Pos, Label::Neg);
            assert!(v <= m + 1e-12, "ratio {v} exceeds bound {m} at x={x}");
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn gaussian_rn_identity_and_unbounded() {
        let id = GaussianStrategicShift::new(0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let w = gaussian_rn(&id).unwrap();
        assert_eq!(w.bound(), 1.0);
        assert_eq!(w.eval(&[2.0], Label::Neg, Label::Neg), 1.0);

        let wide = GaussianStrategicShift::new(0.0, 1.0, 0.0, 2.0, 0.5).unwrap();
        assert!(matches!(
            gaussian_rn(&wide),
            Err(ShiftError::UnboundedRatio { .. })
        ));
    }

    #[test]
    fn discrete_rn_examples() {
        let rn = discrete_rn_fixed(&[0.5, 0.5], &[0.8, 0.2]).unwrap();
        assert!((rn.ratio(0, Label::Pos) - 1.6).abs() < 1e-15);
        assert!((rn.ratio(1, Label::Neg) - 0.4).abs() < 1e-15);
        assert!((rn.bound() - 1.6).abs() < 1e-15);

        let same = discrete_rn_fixed(&[0.25, 0.75], &[0.25, 0.75]).unwrap();
        assert_eq!(same.bound(), 1.0);

        assert!(matches!(
            discrete_rn_fixed(&[1.0, 0.0], &[0.5, 0.5]),
            Err(ShiftError::AbsoluteContinuityViolation { atom: 1 })
        ));
        assert!(matches!(
            discrete_rn_fixed(&[0.6, 0.6], &[0.5, 0.5]),
            Err(ShiftError::MassNotNormalized { .. })
        ));
    }
}
