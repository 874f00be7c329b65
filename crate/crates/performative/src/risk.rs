//! Risk functionals.
//!
//! - [`exact_pr`]: the performative risk on a finite support, in closed form:
//!   `(1 - a2) P[h = 1] - a1 P[Y = 1, h = 1] + a3 P[Y = 1, h = -1] + a4 P[h = -1]`.
//! - [`per`]: the performative empirical risk, the sample mean of the term
//!   `alpha1 h + alpha2 y + alpha3 y h + alpha4` over initial-distribution
//!   samples. Unbiased for `exact_pr`.
//! - [`rn_per`]: the reweighted estimator
//!   `(1/n) sum w(x_i, y_i, d_i) 1{d_i != y_i}` for joint feature/label
//!   shifts with a known bounded density ratio.
//! - [`SurrogateLoss`]: the differentiable training objective
//!   `alpha1 (1 - 2 phi(s)) + alpha2 y + alpha3 (1 - 2 phi(y s)) + alpha4`
//!   with the scaled logistic `phi(t) = log(1 + e^-t) / log 2`, convex in the
//!   score and an upper bound of the risk term whenever
//!   `alpha1 <= 0, alpha3 <= 0`.

use std::fmt;

use crate::drift::{DriftParams, PerCoefficients};
use crate::shift::RnWeight;
use crate::Label;

/// Errors from risk evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum RiskError {
    /// Finite-support masses do not sum to 1.
    MassNotNormalized { sum: f64 },
    /// An empty sample has no mean.
    EmptySample,
    /// An RN weight exceeded its declared bound (the boundedness assumption
    /// fails).
    WeightExceedsBound {
        index: usize,
        weight: f64,
        bound: f64,
    },
    /// An RN weight was negative.
    NegativeWeight { index: usize, weight: f64 },
    /// Parallel arrays of different lengths.
    LengthMismatch,
}

impl fmt::Display for RiskError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskError::MassNotNormalized { sum } => {
                write!(f, "support masses sum to {sum}, expected 1")
            }
            RiskError::EmptySample => write!(f, "empty sample"),
            RiskError::WeightExceedsBound {
                index,
                weight,
                bound,
            } => {
                write!(
                    f,
                    "RN weight {weight} at sample {index} exceeds declared bound {bound}"
                )
            }
            RiskError::NegativeWeight { index, weight } => {
                write!(f, "negative RN weight {weight} at sample {index}")
            }
            RiskError::LengthMismatch => write!(f, "input arrays have different lengths"),
        }
    }
}

impl std::error::Error for RiskError {}

/// A finite marginal support: atoms with mass and conditional probability
/// `p = P[Y = 1 | x]` under the initial distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSupport {
    mass: Vec<f64>,
    p_pos: Vec<f64>,
}

impl FiniteSupport {
    pub fn new(mass: Vec<f64>, p_pos: Vec<f64>) -> Result<Self, RiskError> {
        if mass.len() != p_pos.len() {
            return Err(RiskError::LengthMismatch);
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RiskError::MassNotNormalized { sum });
        }
        Ok(FiniteSupport { mass, p_pos })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn p_pos(&self) -> &[f64] {
        &self.p_pos
    }
}

/// Exact performative risk of a decision vector over a finite support.
pub fn exact_pr(
    support: &FiniteSupport,
    decisions: &[Label],
    params: &DriftParams,
) -> Result<f64, RiskError> {
    if decisions.len() != support.len() {
        return Err(RiskError::LengthMismatch);
    }
    let mut p_pos_decision = 0.0; // P[h(X) = 1]
    let mut p_joint_pos = 0.0; // P[Y = 1, h(X) = 1]
    let mut p_joint_neg = 0.0; // P[Y = 1, h(X) = -1]
    let mut p_neg_decision = 0.0; // P[h(X) = -1]
    for ((&m, &p), &d) in support.mass.iter().zip(&support.p_pos).zip(decisions) {
        match d {
            Label::Pos => {
                p_pos_decision += m;
                p_joint_pos += m * p;
            }
            Label::Neg => {
                p_neg_decision += m;
                p_joint_neg += m * p;
            }
        }
    }
    Ok(
        (1.0 - params.a2()) * p_pos_decision - params.a1() * p_joint_pos
            + params.a3() * p_joint_neg
            + params.a4() * p_neg_decision,
    )
}

/// Performative empirical risk: mean of the coefficient term over
/// `(decision, label)` pairs.
pub fn per(samples: &[(Label, Label)], coeffs: &PerCoefficients) -> Result<f64, RiskError> {
    if samples.is_empty() {
        return Err(RiskError::EmptySample);
    }
    let sum: f64 = samples.iter().map(|&(d, y)| coeffs.term(y, d)).sum();
    Ok(sum / samples.len() as f64)
}

/// Reweighted empirical risk for general shifts. Every weight must be
/// nonnegative and within the declared bound (plus a small tolerance).
pub fn rn_per(
    xs: &[Vec<f64>],
    ys: &[Label],
    decisions: &[Label],
    weights: &RnWeight,
) -> Result<f64, RiskError> {
    if xs.is_empty() {
        return Err(RiskError::EmptySample);
    }
    if xs.len() != ys.len() || xs.len() != decisions.len() {
        return Err(RiskError::LengthMismatch);
    }
    let bound = weights.bound();
    let mut sum = 0.0;
    for (i, ((x, &y), &d)) in xs.iter().zip(ys).zip(decisions).enumerate() {
        let w = weights.eval(x, y, d);
        if w < 0.0 {
            return Err(RiskError::NegativeWeight {
                index: i,
                weight: w,
            });
        }
        if w > bound * (1.0 + 1e-12) + 1e-12 {
            return Err(RiskError::WeightExceedsBound {
                index: i,
                weight: w,
                bound,
            });
        }
        if d != y {
            sum += w;
        }
    }
    Ok(sum / xs.len() as f64)
}

/// Scaled logistic loss `phi(t) = log(1 + e^-t) / log 2`, computed in the
/// overflow-safe form `(log1p(e^-|t|) + max(-t, 0)) / log 2`.
#[inline]
pub fn logistic_phi(t: f64) -> f64 {
    ((-t.abs()).exp().ln_1p() + (-t).max(0.0)) / std::f64::consts::LN_2
}

/// Derivative `phi'(t) = -sigmoid(-t) / log 2`.
#[inline]
pub fn logistic_phi_grad(t: f64) -> f64 {
    -sigmoid(-t) / std::f64::consts::LN_2
}

/// Overflow-safe logistic sigmoid.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// The differentiable surrogate of the performative risk term.
///
/// Evaluation uses the expanded affine form
/// `(alpha1 + alpha3 + alpha4) + alpha2 y - 2 alpha1 phi(s) - 2 alpha3 phi(y s)`,
/// so with identity coefficients it reduces to `phi(y s)` bit-for-bit.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SurrogateLoss {
    coeffs: PerCoefficients,
    offset: f64,
    k_score: f64,
    k_margin: f64,
}

impl SurrogateLoss {
    pub fn new(coeffs: PerCoefficients) -> Self {
        SurrogateLoss {
            coeffs,
            offset: coeffs.alpha1 + coeffs.alpha3 + coeffs.alpha4,
            k_score: -2.0 * coeffs.alpha1,
            k_margin: -2.0 * coeffs.alpha3,
        }
    }

    pub fn coefficients(&self) -> &PerCoefficients {
        &self.coeffs
    }

    /// Whether this surrogate is a guaranteed upper bound of the risk term.
    pub fn dominates(&self) -> bool {
        self.coeffs.surrogate_dominates()
    }

    /// Loss value at a score/label pair.
    #[inline]
    pub fn loss(&self, score: f64, y: Label) -> f64 {
        let yv = y.value();
        self.offset
            + self.coeffs.alpha2 * yv
            + self.k_score * logistic_phi(score)
            + self.k_margin * logistic_phi(yv * score)
    }

    /// Loss and its derivative with respect to the score.
    #[inline]
    pub fn loss_and_grad(&self, score: f64, y: Label) -> (f64, f64) {
        let yv = y.value();
        let loss = self.offset
            + self.coeffs.alpha2 * yv
            + self.k_score * logistic_phi(score)
            + self.k_margin * logistic_phi(yv * score);
        let grad = self.k_score * logistic_phi_grad(score)
            + self.k_margin * yv * logistic_phi_grad(yv * score);
        (loss, grad)
    }
}

/// One-shot evaluation of the surrogate: `(loss, dloss/dscore)`.
pub fn surrogate(score: f64, y: Label, coeffs: &PerCoefficients) -> (f64, f64) {
    SurrogateLoss::new(*coeffs).loss_and_grad(score, y)
}
