//! Linear posterior drift parameters and their algebra.
//!
//! A deployed classifier `h` shifts the conditional label probability
//! `p = P[Y = 1 | X = x]` linearly, with one affine branch per decision:
//!
//! ```text
//! p~ = a1 * p + a2   if h(x) = +1
//! p~ = a3 * p + a4   if h(x) = -1
//! ```
//!
//! For the shifted probability to stay in `[0, 1]` for every `p`, the
//! quadruple must satisfy `a2, a4 ∈ [0, 1]`, `a1 ∈ [-a2, 1 - a2]` and
//! `a3 ∈ [-a4, 1 - a4]`. [`DriftParams`] enforces those constraints.
//!
//! From a valid quadruple, [`PerCoefficients`] carries the weights
//! `(alpha1..alpha4)` of the per-sample risk term
//! `f_h(x, y) = alpha1*h(x) + alpha2*y + alpha3*y*h(x) + alpha4`,
//! whose sample mean is an unbiased estimate of the risk on the shifted
//! distribution using only initial-distribution samples.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::Label;

/// Absolute tolerance for the feasibility checks. Several named families sit
/// exactly on the boundary (e.g. `a3 = 1 - a4`), so validation admits this
/// much floating-point slack.
pub const VALIDATION_TOL: f64 = 1e-12;

/// One of the four feasibility constraints on a drift quadruple.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Constraint {
    /// `a2 ∈ [0, 1]`
    A2Range,
    /// `a4 ∈ [0, 1]`
    A4Range,
    /// `a1 ∈ [-a2, 1 - a2]`
    A1Range,
    /// `a3 ∈ [-a4, 1 - a4]`
    A3Range,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::A2Range => write!(f, "a2 in [0, 1]"),
            Constraint::A4Range => write!(f, "a4 in [0, 1]"),
            Constraint::A1Range => write!(f, "a1 in [-a2, 1 - a2]"),
            Constraint::A3Range => write!(f, "a3 in [-a4, 1 - a4]"),
        }
    }
}

/// Errors from drift-parameter construction and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum DriftError {
    /// An input was NaN or infinite.
    NonFinite,
    /// The first violated feasibility constraint, with the offending value.
    ConstraintViolation { which: Constraint, value: f64 },
    /// A family strength outside `[0, 1]`.
    DomainError { name: &'static str, value: f64 },
    /// Interval bounds out of order.
    EmptyInterval {
        index: usize,
        lower: f64,
        upper: f64,
    },
    /// An interval misses the feasible region entirely.
    InfeasibleInterval { index: usize },
    /// A proxy point fell outside its interval.
    ProxyOutOfInterval { index: usize, value: f64 },
}

impl fmt::Display for DriftError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftError::NonFinite => write!(f, "drift parameters must be finite"),
            DriftError::ConstraintViolation { which, value } => {
                write!(f, "constraint violated: {which} (got {value})")
            }
            DriftError::DomainError { name, value } => {
                write!(f, "{name} must lie in [0, 1], got {value}")
            }
            DriftError::EmptyInterval {
                index,
                lower,
                upper,
            } => {
                write!(f, "interval I{index} is empty: [{lower}, {upper}]")
            }
            DriftError::InfeasibleInterval { index } => {
                write!(
                    f,
                    "interval I{index} does not intersect the feasible region"
                )
            }
            DriftError::ProxyOutOfInterval { index, value } => {
                write!(f, "proxy a{index} = {value} lies outside its interval")
            }
        }
    }
}

impl std::error::Error for DriftError {}

/// A validated drift quadruple `(a1, a2, a3, a4)`.
///
/// `(a1, a2)` is the affine map applied on the `h = +1` branch and
/// `(a3, a4)` on the `h = -1` branch. `(1, 0, 1, 0)` is the identity drift
/// and recovers standard binary classification.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct DriftParams {
    a1: f64,
    a2: f64,
    a3: f64,
    a4: f64,
}

impl DriftParams {
    /// Validates a quadruple, reporting the first violated constraint in the
    /// order `a2, a4, a1, a3`.
    pub fn new(a1: f64, a2: f64, a3: f64, a4: f64) -> Result<Self, DriftError> {
        if !(a1.is_finite() && a2.is_finite() && a3.is_finite() && a4.is_finite()) {
            return Err(DriftError::NonFinite);
        }
        let t = VALIDATION_TOL;
        if a2 < -t || a2 > 1.0 + t {
            return Err(DriftError::ConstraintViolation {
                which: Constraint::A2Range,
                value: a2,
            });
        }
        if a4 < -t || a4 > 1.0 + t {
            return Err(DriftError::ConstraintViolation {
                which: Constraint::A4Range,
                value: a4,
            });
        }
        if a1 < -a2 - t || a1 > 1.0 - a2 + t {
            return Err(DriftError::ConstraintViolation {
                which: Constraint::A1Range,
                value: a1,
            });
        }
        if a3 < -a4 - t || a3 > 1.0 - a4 + t {
            return Err(DriftError::ConstraintViolation {
                which: Constraint::A3Range,
                value: a3,
            });
        }
        Ok(DriftParams { a1, a2, a3, a4 })
    }

    /// Builds a quadruple without feasibility checks, for exploratory use
    /// with the clamping resampler. Shifted probabilities computed from an
    /// unchecked quadruple may leave `[0, 1]`.
    pub fn new_unchecked(a1: f64, a2: f64, a3: f64, a4: f64) -> Self {
        DriftParams { a1, a2, a3, a4 }
    }

    /// The identity drift `(1, 0, 1, 0)`: no performative effect.
    pub fn identity() -> Self {
        DriftParams {
            a1: 1.0,
            a2: 0.0,
            a3: 1.0,
            a4: 0.0,
        }
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn a2(&self) -> f64 {
        self.a2
    }
    pub fn a3(&self) -> f64 {
        self.a3
    }
    pub fn a4(&self) -> f64 {
        self.a4
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.a1, self.a2, self.a3, self.a4]
    }

    /// Multiplicative factor for the given decision branch.
    #[inline]
    pub fn mul(&self, decision: Label) -> f64 {
        match decision {
            Label::Pos => self.a1,
            Label::Neg => self.a3,
        }
    }

    /// Additive offset for the given decision branch.
    #[inline]
    pub fn add(&self, decision: Label) -> f64 {
        match decision {
            Label::Pos => self.a2,
            Label::Neg => self.a4,
        }
    }

    /// The per-sample risk coefficients of this drift:
    ///
    /// ```text
    /// alpha1 = (2 - a1 - 2 a2 - a3 - 2 a4) / 4
    /// alpha2 = (a3 - a1) / 4
    /// alpha3 = (-a1 - a3) / 4
    /// alpha4 = (2 - a1 - 2 a2 + a3 + 2 a4) / 4
    /// ```
    pub fn coefficients(&self) -> PerCoefficients {
        let DriftParams { a1, a2, a3, a4 } = *self;
        PerCoefficients {
            alpha1: (2.0 - a1 - 2.0 * a2 - a3 - 2.0 * a4) / 4.0,
            alpha2: (a3 - a1) / 4.0,
            alpha3: (-a1 - a3) / 4.0,
            alpha4: (2.0 - a1 - 2.0 * a2 + a3 + 2.0 * a4) / 4.0,
        }
    }
}

impl TryFrom<[f64; 4]> for DriftParams {
    type Error = DriftError;
    fn try_from(a: [f64; 4]) -> Result<Self, Self::Error> {
        DriftParams::new(a[0], a[1], a[2], a[3])
    }
}

impl From<DriftParams> for [f64; 4] {
    fn from(p: DriftParams) -> [f64; 4] {
        p.as_array()
    }
}

/// Convenience alias for [`DriftParams::new`].
pub fn validate_drift(a1: f64, a2: f64, a3: f64, a4: f64) -> Result<DriftParams, DriftError> {
    DriftParams::new(a1, a2, a3, a4)
}

/// Weights of the per-sample risk term
/// `f_h(x, y) = alpha1*h(x) + alpha2*y + alpha3*y*h(x) + alpha4`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerCoefficients {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
}

impl PerCoefficients {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64, alpha4: f64) -> Self {
        PerCoefficients {
            alpha1,
            alpha2,
            alpha3,
            alpha4,
        }
    }

    /// Coefficients of the identity drift: `(0, 0, -1/2, 1/2)`. The risk
    /// term reduces to the 0-1 loss `(1 - y h) / 2`.
    pub fn identity() -> Self {
        PerCoefficients {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: -0.5,
            alpha4: 0.5,
        }
    }

    /// Evaluates the risk term at a label/decision pair.
    #[inline]
    pub fn term(&self, y: Label, decision: Label) -> f64 {
        let yv = y.value();
        let d = decision.value();
        self.alpha1 * d + self.alpha2 * yv + self.alpha3 * yv * d + self.alpha4
    }

    /// Range `[min, max]` of the risk term over the four label/decision
    /// cells: `alpha4 ∓ (|alpha1| + |alpha2| + |alpha3|)`.
    pub fn term_bounds(&self) -> (f64, f64) {
        let s = self.alpha1.abs() + self.alpha2.abs() + self.alpha3.abs();
        (self.alpha4 - s, self.alpha4 + s)
    }

    /// Rademacher-term constant `A = 2 (|alpha1| + |alpha3|)`.
    pub fn a_const(&self) -> f64 {
        2.0 * (self.alpha1.abs() + self.alpha3.abs())
    }

    /// Deviation-term constant
    /// `B = 2 ((1 + sqrt 2) |alpha1| + |alpha2| + (1 + sqrt 2) |alpha3|)`.
    pub fn b_const(&self) -> f64 {
        let c = 1.0 + std::f64::consts::SQRT_2;
        2.0 * (c * self.alpha1.abs() + self.alpha2.abs() + c * self.alpha3.abs())
    }

    /// Term spread `A_diff = 2 (|alpha1| + |alpha2| + |alpha3|)`, the
    /// Hoeffding width used by the finite-class bound.
    pub fn a_diff(&self) -> f64 {
        2.0 * (self.alpha1.abs() + self.alpha2.abs() + self.alpha3.abs())
    }

    /// Whether the surrogate loss built from these coefficients is a true
    /// upper bound of the risk term (`alpha1 <= 0` and `alpha3 <= 0`).
    pub fn surrogate_dominates(&self) -> bool {
        self.alpha1 <= 0.0 && self.alpha3 <= 0.0
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.alpha1, self.alpha2, self.alpha3, self.alpha4]
    }
}

/// Shorthand for [`DriftParams::coefficients`].
pub fn coefficients(params: &DriftParams) -> PerCoefficients {
    params.coefficients()
}

/// A closed interval `[lower, upper]`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Interval { lower, upper }
    }

    /// A zero-length interval at `v`.
    pub fn point(v: f64) -> Self {
        Interval { lower: v, upper: v }
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower - VALIDATION_TOL && v <= self.upper + VALIDATION_TOL
    }

    fn intersects(&self, lo: f64, hi: f64) -> bool {
        self.upper >= lo - VALIDATION_TOL && self.lower <= hi + VALIDATION_TOL
    }
}

/// Interval-valued drift parameters for the imperfect-information setting:
/// each `a_i` is only known to lie in `I_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalParams {
    intervals: [Interval; 4],
}

/// How proxy points are picked inside the intervals.
#[derive(Clone, Debug, PartialEq)]
pub enum ProxyRule {
    /// Interval midpoints. Halves the worst-case deviation bound.
    Midpoint,
    /// Caller-supplied points, one per interval.
    GivenPoints([f64; 4]),
}

impl IntervalParams {
    /// Validates interval ordering and that the box `I1 x I2 x I3 x I4`
    /// intersects the feasible region. The `a1` range depends only on `a2`
    /// (and `a3` only on `a4`), so box-region intersection reduces to two
    /// independent pair checks.
    pub fn new(i1: Interval, i2: Interval, i3: Interval, i4: Interval) -> Result<Self, DriftError> {
        let intervals = [i1, i2, i3, i4];
        for (k, iv) in intervals.iter().enumerate() {
            if !(iv.lower.is_finite() && iv.upper.is_finite()) {
                return Err(DriftError::NonFinite);
            }
            if iv.lower > iv.upper {
                return Err(DriftError::EmptyInterval {
                    index: k + 1,
                    lower: iv.lower,
                    upper: iv.upper,
                });
            }
        }
        if !i2.intersects(0.0, 1.0) {
            return Err(DriftError::InfeasibleInterval { index: 2 });
        }
        if !i4.intersects(0.0, 1.0) {
            return Err(DriftError::InfeasibleInterval { index: 4 });
        }
        // Feasible a1 over a2 ∈ I2 ∩ [0,1] unions to [-hi2, 1 - lo2].
        let lo2 = i2.lower.max(0.0);
        let hi2 = i2.upper.min(1.0);
        if !i1.intersects(-hi2, 1.0 - lo2) {
            return Err(DriftError::InfeasibleInterval { index: 1 });
        }
        let lo4 = i4.lower.max(0.0);
        let hi4 = i4.upper.min(1.0);
        if !i3.intersects(-hi4, 1.0 - lo4) {
            return Err(DriftError::InfeasibleInterval { index: 3 });
        }
        Ok(IntervalParams { intervals })
    }

    /// All four intervals degenerate at the given parameters.
    pub fn exact(params: &DriftParams) -> Self {
        let [a1, a2, a3, a4] = params.as_array();
        IntervalParams {
            intervals: [
                Interval::point(a1),
                Interval::point(a2),
                Interval::point(a3),
                Interval::point(a4),
            ],
        }
    }

    pub fn intervals(&self) -> &[Interval; 4] {
        &self.intervals
    }

    /// Per-interval lengths `eps_i`.
    pub fn lengths(&self) -> [f64; 4] {
        [
            self.intervals[0].length(),
            self.intervals[1].length(),
            self.intervals[2].length(),
            self.intervals[3].length(),
        ]
    }

    /// Total uncertainty `eps = sum eps_i`.
    pub fn total_length(&self) -> f64 {
        self.lengths().iter().sum()
    }

    pub fn midpoints(&self) -> [f64; 4] {
        [
            self.intervals[0].midpoint(),
            self.intervals[1].midpoint(),
            self.intervals[2].midpoint(),
            self.intervals[3].midpoint(),
        ]
    }

    /// Proxy coefficients for the imperfect-information risk, plus the
    /// guaranteed worst-case bound on the gap between the proxy risk
    /// estimate and the true-parameter one: `eps` for arbitrary in-interval
    /// proxies, `eps / 2` for midpoints.
    ///
    /// The proxy quadruple need not itself be feasible; the coefficient
    /// formulas are applied verbatim.
    pub fn proxy_coefficients(
        &self,
        rule: &ProxyRule,
    ) -> Result<(PerCoefficients, f64), DriftError> {
        let (points, bound) = match rule {
            ProxyRule::Midpoint => (self.midpoints(), 0.5 * self.total_length()),
            ProxyRule::GivenPoints(p) => {
                for (k, (v, iv)) in p.iter().zip(self.intervals.iter()).enumerate() {
                    if !iv.contains(*v) {
                        return Err(DriftError::ProxyOutOfInterval {
                            index: k + 1,
                            value: *v,
                        });
                    }
                }
                (*p, self.total_length())
            }
        };
        let proxy = DriftParams::new_unchecked(points[0], points[1], points[2], points[3]);
        Ok((proxy.coefficients(), bound))
    }
}

/// Shorthand for [`IntervalParams::proxy_coefficients`].
pub fn interval_coefficients(
    iv: &IntervalParams,
    rule: &ProxyRule,
) -> Result<(PerCoefficients, f64), DriftError> {
    iv.proxy_coefficients(rule)
}

/// The named drift families. Each is a curve `a -> DriftParams` over the
/// strength `a ∈ [0, 1]`, feasible along the whole curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum DriftFamily {
    /// `(1, 0, 1, 0)` at every strength.
    Identity,
    /// `(1 - a, a, 1, 0)`: a pessimistic prediction pushes the label
    /// towards `+1` with strength `a`; an optimistic one changes nothing.
    Placebo,
    /// `(a, 0, 1 - b, b)`: predicting heavy traffic reduces it by factor
    /// `a`; predicting no traffic raises it by `b`. `b` defaults to `1 - a`.
    Traffic { b: Option<f64> },
    /// `(a, 1 - sqrt a, a^3, 1 - a^2)`.
    Credit,
    /// `(a, 1 - a, a^2, 1 - a^2)`.
    Folktables,
    /// `(a, 0.75 (1 - a), 1, 0)`.
    Model1,
    /// `(1, 0, a^3, 1 - a^2)`.
    Model2,
    /// `(a^3, 1 - a^2, a^2, 1 - a)`.
    Model3,
    /// `(1, 0, a^2 / (a^2 + 1), 1 / (a^2 + 1))`.
    Model4,
    /// `(1/4 - a^2, a^2, a, max(0, 7/8 - a/2 - a^2/2))`.
    Model5,
    /// A fixed quadruple; the strength is ignored.
    Custom { params: [f64; 4] },
}

impl DriftFamily {
    /// Evaluates the family at strength `a`, validating the result.
    pub fn params_at(&self, a: f64) -> Result<DriftParams, DriftError> {
        if !a.is_finite() || !(0.0..=1.0).contains(&a) {
            return Err(DriftError::DomainError {
                name: "a",
                value: a,
            });
        }
        let raw = match self {
            DriftFamily::Identity => [1.0, 0.0, 1.0, 0.0],
            DriftFamily::Placebo => [1.0 - a, a, 1.0, 0.0],
            DriftFamily::Traffic { b } => {
                let b = b.unwrap_or(1.0 - a);
                if !b.is_finite() || !(0.0..=1.0).contains(&b) {
                    return Err(DriftError::DomainError {
                        name: "b",
                        value: b,
                    });
                }
                [a, 0.0, 1.0 - b, b]
            }
            DriftFamily::Credit => [a, 1.0 - a.sqrt(), a.powi(3), 1.0 - a * a],
            DriftFamily::Folktables => [a, 1.0 - a, a * a, 1.0 - a * a],
            DriftFamily::Model1 => [a, 0.75 * (1.0 - a), 1.0, 0.0],
            DriftFamily::Model2 => [1.0, 0.0, a.powi(3), 1.0 - a * a],
            DriftFamily::Model3 => [a.powi(3), 1.0 - a * a, a * a, 1.0 - a],
            DriftFamily::Model4 => {
                let s = a * a + 1.0;
                [1.0, 0.0, a * a / s, 1.0 / s]
            }
            DriftFamily::Model5 => [
                0.25 - a * a,
                a * a,
                a,
                (0.875 - 0.5 * a - 0.5 * a * a).max(0.0),
            ],
            DriftFamily::Custom { params } => *params,
        };
        DriftParams::new(raw[0], raw[1], raw[2], raw[3])
    }

    /// Parses a family name as used in configs: `identity`, `placebo`,
    /// `traffic`, `credit`, `folktables`, `model1`..`model5`.
    pub fn by_name(name: &str) -> Option<DriftFamily> {
        Some(match name {
            "identity" => DriftFamily::Identity,
            "placebo" => DriftFamily::Placebo,
            "traffic" => DriftFamily::Traffic { b: None },
            "credit" => DriftFamily::Credit,
            "folktables" => DriftFamily::Folktables,
            "model1" => DriftFamily::Model1,
            "model2" => DriftFamily::Model2,
            "model3" => DriftFamily::Model3,
            "model4" => DriftFamily::Model4,
            "model5" => DriftFamily::Model5,
            _ => return None,
        })
    }

    /// All named (non-custom) families.
    pub fn all_named() -> Vec<DriftFamily> {
        vec![
            DriftFamily::Identity,
            DriftFamily::Placebo,
            DriftFamily::Traffic { b: None },
            DriftFamily::Credit,
            DriftFamily::Folktables,
            DriftFamily::Model1,
            DriftFamily::Model2,
            DriftFamily::Model3,
            DriftFamily::Model4,
            DriftFamily::Model5,
        ]
    }
}

impl fmt::Display for DriftFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftFamily::Identity => write!(f, "identity"),
            DriftFamily::Placebo => write!(f, "placebo"),
            DriftFamily::Traffic { b: None } => write!(f, "traffic"),
            DriftFamily::Traffic { b: Some(b) } => write!(f, "traffic(b={b})"),
            DriftFamily::Credit => write!(f, "credit"),
            DriftFamily::Folktables => write!(f, "folktables"),
            DriftFamily::Model1 => write!(f, "model1"),
            DriftFamily::Model2 => write!(f, "model2"),
            DriftFamily::Model3 => write!(f, "model3"),
            DriftFamily::Model4 => write!(f, "model4"),
            DriftFamily::Model5 => write!(f, "model5"),
            DriftFamily::Custom { params } => {
                write!(
                    f,
                    "custom({}, {}, {}, {})",
                    params[0], params[1], params[2], params[3]
                )
            }
        }
    }
}

/// Shorthand for [`DriftFamily::params_at`].
pub fn family_params(family: &DriftFamily, a: f64) -> Result<DriftParams, DriftError> {
    family.params_at(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: the four constants of the indicator form of the
    /// risk term, `(1-a2)·1{d=1} - a1·1{y=1,d=1} + a3·1{y=1,d=-1} + a4·1{d=-1}`.
    fn indicator_cell(p: &DriftParams, y: Label, d: Label) -> f64 {
        let mut v = 0.0;
        if d == Label::Pos {
            v += 1.0 - p.a2();
        }
        if y == Label::Pos && d == Label::Pos {
            v -= p.a1();
        }
        if y == Label::Pos && d == Label::Neg {
            v += p.a3();
        }
        if d == Label::Neg {
            v += p.a4();
        }
        v
    }

    fn assert_cells_match(p: &DriftParams) {
        let c = p.coefficients();
        for y in [Label::Pos, Label::Neg] {
            for d in [Label::Pos, Label::Neg] {
                let lhs = c.term(y, d);
                let rhs = indicator_cell(p, y, d);
                assert!(
                    (lhs - rhs).abs() <= 1e-12,
                    "cell (y={y:?}, d={d:?}) mismatch: {lhs} vs {rhs} for {p:?}"
                );
            }
        }
    }

    #[test]
    fn identity_is_valid_and_reduces_to_zero_one() {
        let p = validate_drift(1.0, 0.0, 1.0, 0.0).unwrap();
        let c = p.coefficients();
        assert_eq!(c.as_array(), [0.0, 0.0, -0.5, 0.5]);
        assert_cells_match(&p);
    }

    #[test]
    fn credit_family_point_is_valid() {
        // credit family at a = 0.25
        let p = validate_drift(0.25, 0.5, 0.015625, 0.9375).unwrap();
        assert_eq!(p.as_array(), [0.25, 0.5, 0.015625, 0.9375]);
        let q = DriftFamily::Credit.params_at(0.25).unwrap();
        assert_eq!(q.as_array(), [0.25, 0.5, 0.015625, 0.9375]);
    }

    #[test]
    fn first_violated_constraint_is_reported() {
        match validate_drift(0.6, 0.5, 0.5, 0.0) {
            Err(DriftError::ConstraintViolation { which, .. }) => {
                assert_eq!(which, Constraint::A1Range)
            }
            other => panic!("expected A1 violation, got {other:?}"),
        }
        match validate_drift(0.0, 1.5, 1.0, 0.0) {
            Err(DriftError::ConstraintViolation { which, .. }) => {
                assert_eq!(which, Constraint::A2Range)
            }
            other => panic!("expected A2 violation, got {other:?}"),
        }
        assert!(matches!(
            validate_drift(f64::NAN, 0.0, 1.0, 0.0),
            Err(DriftError::NonFinite)
        ));
    }

    #[test]
    fn placebo_half_coefficients() {
        let p = DriftFamily::Placebo.params_at(0.5).unwrap();
        assert_eq!(p.as_array(), [0.5, 0.5, 1.0, 0.0]);
        let c = p.coefficients();
        assert_eq!(c.as_array(), [-0.125, 0.125, -0.375, 0.375]);
        assert_cells_match(&p);
    }

    #[test]
    fn rerm_scenario_a_coefficients() {
        // The substitution oracle fixes these values: alpha1 = -0.5/4 and
        // alpha4 = 1.1/4 for the quadruple (0.1, 0.8, 0.2, 0.3).
        let p = validate_drift(0.1, 0.8, 0.2, 0.3).unwrap();
        let c = p.coefficients();
        assert!((c.alpha1 - (-0.125)).abs() < 1e-15);
        assert!((c.alpha2 - 0.025).abs() < 1e-15);
        assert!((c.alpha3 - (-0.075)).abs() < 1e-15);
        assert!((c.alpha4 - 0.275).abs() < 1e-15);
        assert_cells_match(&p);
    }

    #[test]
    fn coefficient_cells_match_indicator_form_randomized() {
        // 1000 random valid quadruples against the indicator-form oracle.
        use rand::Rng;
        let mut rng = crate::seeded::stream(11, crate::seeded::salt::TRIAL);
        let mut count = 0;
        while count < 1000 {
            let a2: f64 = rng.gen_range(0.0..=1.0);
            let a4: f64 = rng.gen_range(0.0..=1.0);
            let a1: f64 = rng.gen_range(-a2..=1.0 - a2);
            let a3: f64 = rng.gen_range(-a4..=1.0 - a4);
            let p = validate_drift(a1, a2, a3, a4).expect("sampled inside the region");
            assert_cells_match(&p);
            count += 1;
        }
    }

    #[test]
    fn families_valid_on_unit_grid() {
        for family in DriftFamily::all_named() {
            for k in 0..=100 {
                let a = k as f64 / 100.0;
                family
                    .params_at(a)
                    .unwrap_or_else(|e| panic!("{family} infeasible at a={a}: {e}"));
            }
        }
    }

    #[test]
    fn family_points_from_examples() {
        let p = DriftFamily::Placebo.params_at(0.0).unwrap();
        assert_eq!(p.as_array(), DriftParams::identity().as_array());

        let m5 = DriftFamily::Model5.params_at(0.5).unwrap();
        assert_eq!(m5.as_array(), [0.0, 0.25, 0.5, 0.5]);

        assert!(matches!(
            DriftFamily::Placebo.params_at(1.5),
            Err(DriftError::DomainError { .. })
        ));
    }

    #[test]
    fn traffic_second_strength_defaults_to_complement() {
        let p = DriftFamily::Traffic { b: None }.params_at(0.25).unwrap();
        assert_eq!(p.as_array(), [0.25, 0.0, 0.25, 0.75]);
        let q = DriftFamily::Traffic { b: Some(0.1) }
            .params_at(0.25)
            .unwrap();
        assert_eq!(q.as_array(), [0.25, 0.0, 0.9, 0.1]);
    }

    #[test]
    fn interval_bounds_midpoint_versus_arbitrary() {
        let iv = IntervalParams::new(
            Interval::new(0.4, 0.6),
            Interval::point(0.0),
            Interval::point(1.0),
            Interval::point(0.0),
        )
        .unwrap();
        let (_, bound_mid) = iv.proxy_coefficients(&ProxyRule::Midpoint).unwrap();
        assert!((bound_mid - 0.1).abs() < 1e-15);
        let (_, bound_lo) = iv
            .proxy_coefficients(&ProxyRule::GivenPoints([0.4, 0.0, 1.0, 0.0]))
            .unwrap();
        assert!((bound_lo - 0.2).abs() < 1e-15);

        // degenerate intervals: no uncertainty, proxy coefficients exact
        let p = DriftFamily::Placebo.params_at(0.5).unwrap();
        let exact = IntervalParams::exact(&p);
        let (coeffs, bound) = exact.proxy_coefficients(&ProxyRule::Midpoint).unwrap();
        assert_eq!(bound, 0.0);
        assert_eq!(coeffs.as_array(), p.coefficients().as_array());
    }

    #[test]
    fn interval_errors() {
        assert!(matches!(
            IntervalParams::new(
                Interval::new(0.5, 0.4),
                Interval::point(0.0),
                Interval::point(1.0),
                Interval::point(0.0),
            ),
            Err(DriftError::EmptyInterval { index: 1, .. })
        ));
        // a2 interval entirely above 1: infeasible
        assert!(matches!(
            IntervalParams::new(
                Interval::point(0.5),
                Interval::new(1.5, 2.0),
                Interval::point(1.0),
                Interval::point(0.0),
            ),
            Err(DriftError::InfeasibleInterval { index: 2 })
        ));
        // a1 interval out of reach of any feasible a2
        assert!(matches!(
            IntervalParams::new(
                Interval::new(1.6, 1.8),
                Interval::new(0.0, 0.2),
                Interval::point(1.0),
                Interval::point(0.0),
            ),
            Err(DriftError::InfeasibleInterval { index: 1 })
        ));
        // proxy outside its interval
        let iv = IntervalParams::new(
            Interval::new(0.4, 0.6),
            Interval::point(0.0),
            Interval::point(1.0),
            Interval::point(0.0),
        )
        .unwrap();
        assert!(matches!(
            iv.proxy_coefficients(&ProxyRule::GivenPoints([0.7, 0.0, 1.0, 0.0])),
            Err(DriftError::ProxyOutOfInterval { index: 1, .. })
        ));
    }

    #[test]
    fn midpoint_bound_is_half_of_arbitrary() {
        use rand::Rng;
        let mut rng = crate::seeded::stream(5, crate::seeded::salt::TRIAL);
        for _ in 0..200 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64| {
                let a = rng.gen_range(lo..hi);
                let b = rng.gen_range(a..hi);
                Interval::new(a, b)
            };
            // multiplicative intervals sampled inside the union feasible
            // range of their additive partner
            let i2 = mk(&mut rng, 0.0, 1.0);
            let i4 = mk(&mut rng, 0.0, 1.0);
            let i1 = mk(&mut rng, -i2.upper, 1.0 - i2.lower);
            let i3 = mk(&mut rng, -i4.upper, 1.0 - i4.lower);
            let iv = IntervalParams::new(i1, i2, i3, i4).unwrap();
            let (_, mid) = iv.proxy_coefficients(&ProxyRule::Midpoint).unwrap();
            let pts = iv.midpoints();
            let (_, arb) = iv.proxy_coefficients(&ProxyRule::GivenPoints(pts)).unwrap();
            assert!((2.0 * mid - arb).abs() <= 1e-12 * arb.abs().max(1.0));
        }
    }

    #[test]
    fn term_bounds_match_a_diff() {
        let c = DriftFamily::Placebo.params_at(0.5).unwrap().coefficients();
        let (lo, hi) = c.term_bounds();
        assert!((hi - lo - c.a_diff()).abs() < 1e-15);
        assert!((c.a_diff() - 1.25).abs() < 1e-15);
    }
}
