//! A laboratory for binary classification under performative distribution
//! shift: deploying a classifier changes the distribution it is evaluated on,
//! and training must account for that.
//!
//! The crate covers the full pipeline:
//!
//! - [`drift`] — linear posterior drift parameters `(a1, a2, a3, a4)`, their
//!   feasibility constraints, the coefficient map to the per-sample risk
//!   weights `(alpha1..alpha4)`, interval-valued (imperfect-information)
//!   parameters, and the named drift families.
//! - [`shift`] — applying a drift to conditional label probabilities,
//!   resampling labels under a deployed classifier, and Radon–Nikodym
//!   reweighting for joint feature/label shifts.
//! - [`risk`] — exact performative risk on finite supports, the performative
//!   empirical risk (PER), the RN-weighted estimator, and the differentiable
//!   surrogate loss with analytic gradients.
//! - [`learn`] — linear and small MLP classifiers with seeded, reproducible
//!   mini-batch training (SGD/Adam + plateau scheduler).
//! - [`oracle`] — conditional-probability oracles: exact synthetic, constant,
//!   and a from-scratch random forest.
//! - [`bounds`] — Rademacher-average estimation and evaluators for the
//!   generalization bounds, plus the two-world lower-bound construction.
//! - [`rerm`] — repeated risk minimization with fixed features and labels
//!   resampled under the previous round's classifier, and an exact
//!   infinite-data dynamics analyzer on finite supports.
//! - [`data`] — synthetic dataset generators, CSV ingestion/emission,
//!   class balancing and splitting.
//! - [`experiment`] — config-driven orchestration of drift-strength sweeps,
//!   RERM runs, bound reports, and lower-bound demos with deterministic,
//!   plot-ready output files.
//!
//! Every randomized operation takes an explicit seed and derives independent
//! named streams from it, so runs are bit-reproducible. See the `examples/`
//! directory for one runnable example per capability.

pub mod bounds;
pub mod data;
pub mod drift;
pub mod experiment;
pub mod learn;
pub mod oracle;
pub mod rerm;
pub mod risk;
pub mod seeded;
pub mod shift;

use std::fmt;

/// A binary label or decision, valued in `{-1, +1}`.
///
/// The sign convention is global: a score of exactly zero decides `Pos`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// `+1`
    Pos,
    /// `-1`
    Neg,
}

impl Label {
    /// Numeric value, `+1.0` or `-1.0`.
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    /// Decision rule for a real-valued score: `sign(0) = +1`.
    #[inline]
    pub fn from_score(score: f64) -> Label {
        if score >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    /// Parses a numeric label in `{-1, 1}` or `{0, 1}` (0 maps to `Neg`).
    pub fn from_numeric(v: f64) -> Option<Label> {
        if v == 1.0 {
            Some(Label::Pos)
        } else if v == -1.0 || v == 0.0 {
            Some(Label::Neg)
        } else {
            None
        }
    }

    #[inline]
    pub fn flip(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Pos => write!(f, "1"),
            Label::Neg => write!(f, "-1"),
        }
    }
}

impl serde::Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_i8(match self {
            Label::Pos => 1,
            Label::Neg => -1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_zero_is_positive() {
        assert_eq!(Label::from_score(0.0), Label::Pos);
        assert_eq!(Label::from_score(-0.0), Label::Pos);
        assert_eq!(Label::from_score(-1e-300), Label::Neg);
    }

    #[test]
    fn numeric_parse() {
        assert_eq!(Label::from_numeric(1.0), Some(Label::Pos));
        assert_eq!(Label::from_numeric(-1.0), Some(Label::Neg));
        assert_eq!(Label::from_numeric(0.0), Some(Label::Neg));
        assert_eq!(Label::from_numeric(2.0), None);
    }
}
