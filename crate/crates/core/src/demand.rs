//! Demand curves: the price/rate correspondence, profit rates and the
//! one-dimensional rate maximizations built on top of them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::optimize::maximize_concave;

/// Rate tolerance used by the golden-section fallback for myopic rates.
pub const MYOPIC_RATE_TOLERANCE: f64 = 1e-10;

/// Number of grid points used by [`check_concavity`].
pub const CONCAVITY_GRID: usize = 1000;

/// Largest second difference tolerated by [`check_concavity`].
pub const CONCAVITY_SLACK: f64 = 1e-9;

/// A strictly decreasing map from price to effective arrival rate.
///
/// `a` is the price sensitivity, `b` the demand rate at price zero and `p0`
/// the logistic inflection price. `Reciprocal` is `p(λ) = 1/λ`; it has no
/// natural rate cap, so instances using it must supply one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DemandCurve {
    /// `λ(p) = b − a·p`
    Linear { a: f64, b: f64 },
    /// `λ(p) = b·exp(−a·p)`
    Exponential { a: f64, b: f64 },
    /// `λ(p) = b(1 + e^{−a·p0}) / (1 + e^{a(p − p0)})`
    Logistic { a: f64, b: f64, p0: f64 },
    /// `p(λ) = 1/λ`
    Reciprocal,
}

/// Demand family without parameters, as used by testbeds and CLI flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandFamily {
    Linear,
    Exponential,
    Logistic,
    Reciprocal,
}

impl DemandFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            DemandFamily::Linear => "linear",
            DemandFamily::Exponential => "exponential",
            DemandFamily::Logistic => "logistic",
            DemandFamily::Reciprocal => "reciprocal",
        }
    }
}

impl fmt::Display for DemandFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DemandFamily {
    type Err = PricingError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(DemandFamily::Linear),
            "exponential" => Ok(DemandFamily::Exponential),
            "logistic" => Ok(DemandFamily::Logistic),
            "reciprocal" => Ok(DemandFamily::Reciprocal),
            other => Err(PricingError::InvalidInput(format!(
                "unknown demand family `{other}`"
            ))),
        }
    }
}

impl DemandCurve {
    pub fn family(&self) -> DemandFamily {
        match self {
            DemandCurve::Linear { .. } => DemandFamily::Linear,
            DemandCurve::Exponential { .. } => DemandFamily::Exponential,
            DemandCurve::Logistic { .. } => DemandFamily::Logistic,
            DemandCurve::Reciprocal => DemandFamily::Reciprocal,
        }
    }

    /// Checks the family parameters.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(PricingError::InvalidInput(format!(
                    "demand parameter {name} must be positive and finite, got {v}"
                )))
            }
        };
        match *self {
            DemandCurve::Linear { a, b } | DemandCurve::Exponential { a, b } => {
                positive("a", a)?;
                positive("b", b)
            }
            DemandCurve::Logistic { a, b, p0 } => {
                positive("a", a)?;
                positive("b", b)?;
                if p0.is_finite() && p0 >= 0.0 {
                    Ok(())
                } else {
                    Err(PricingError::InvalidInput(format!(
                        "logistic inflection price p0 must be nonnegative, got {p0}"
                    )))
                }
            }
            DemandCurve::Reciprocal => Ok(()),
        }
    }

    /// Demand rate at price zero, `None` for the reciprocal curve.
    pub fn max_rate(&self) -> Option<f64> {
        match *self {
            DemandCurve::Linear { b, .. }
            | DemandCurve::Exponential { b, .. }
            | DemandCurve::Logistic { b, .. } => Some(b),
            DemandCurve::Reciprocal => None,
        }
    }

    /// Effective arrival rate `λ(p)`.
    pub fn rate_at_price(&self, p: f64) -> Result<f64> {
        let bad = || PricingError::Domain(format!("price {p} outside the admissible range"));
        if !p.is_finite() {
            return Err(bad());
        }
        match *self {
            DemandCurve::Linear { a, b } => {
                if p < 0.0 || p > b / a {
                    return Err(bad());
                }
                Ok((b - a * p).max(0.0))
            }
            DemandCurve::Exponential { a, b } => {
                if p < 0.0 {
                    return Err(bad());
                }
                Ok(b * (-a * p).exp())
            }
            DemandCurve::Logistic { a, b, p0 } => {
                if p < 0.0 {
                    return Err(bad());
                }
                Ok(b * (1.0 + (-a * p0).exp()) / (1.0 + (a * (p - p0)).exp()))
            }
            DemandCurve::Reciprocal => {
                if p <= 0.0 {
                    return Err(bad());
                }
                Ok(1.0 / p)
            }
        }
    }

    /// Price `p(λ)` that induces the rate `λ`.
    pub fn price_at_rate(&self, lambda: f64) -> Result<f64> {
        let admissible =
            lambda.is_finite() && lambda > 0.0 && self.max_rate().is_none_or(|b| lambda <= b);
        if !admissible {
            return Err(PricingError::Domain(format!(
                "rate {lambda} outside the admissible range"
            )));
        }
        Ok(self.price_unchecked(lambda))
    }

    /// `p(λ)` for `λ` already known to be admissible.
    pub(crate) fn price_unchecked(&self, lambda: f64) -> f64 {
        match *self {
            DemandCurve::Linear { a, b } => (b - lambda) / a,
            DemandCurve::Exponential { a, b } => -(lambda / b).ln() / a,
            DemandCurve::Logistic { a, b, p0 } => {
                // ln(K/λ − 1) with K − λ = (b − λ) + b·e^{−a·p0}, which avoids
                // cancellation when λ is close to b and a·p0 is large.
                let headroom = ((b - lambda) + b * (-a * p0).exp()).max(0.0);
                p0 + (headroom / lambda).ln() / a
            }
            DemandCurve::Reciprocal => 1.0 / lambda,
        }
    }

    /// Profit rate `λ·(p(λ) − c)`, zero at `λ = 0`.
    pub fn profit_rate(&self, cost: f64, lambda: f64) -> Result<f64> {
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let p = self.price_at_rate(lambda)?;
        Ok(lambda * (p - cost))
    }

    /// [`DemandCurve::profit_rate`] without the domain check.
    #[inline]
    pub(crate) fn profit_rate_unchecked(&self, cost: f64, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            0.0
        } else {
            lambda * (self.price_unchecked(lambda) - cost)
        }
    }

    /// Maximizes `λ·(α₁(p(λ) − c) + slope)` over `λ ∈ [0, cap]`.
    ///
    /// This is the common shape of the myopic problem (`slope = α₂`) and of the
    /// per-state step of value iteration (`slope = α₂ − γ·Δh`). Linear and
    /// exponential demand use their stationary points in closed form; the
    /// logistic curve falls back to golden-section search with tolerance
    /// `tol`. Ties resolve to the smallest rate.
    pub fn maximize_rate(&self, alpha1: f64, slope: f64, cost: f64, cap: f64, tol: f64) -> f64 {
        if alpha1 <= 0.0 {
            // Linear in λ.
            return if slope > 0.0 { cap } else { 0.0 };
        }
        match *self {
            DemandCurve::Linear { a, b } => {
                let vertex = (alpha1 * (b - a * cost) + slope * a) / (2.0 * alpha1);
                vertex.clamp(0.0, cap)
            }
            DemandCurve::Exponential { a, b } => {
                let stationary = b * (a * (slope / alpha1 - cost) - 1.0).exp();
                if stationary.is_nan() {
                    0.0
                } else {
                    stationary.clamp(0.0, cap)
                }
            }
            DemandCurve::Logistic { .. } => {
                let objective = |l: f64| alpha1 * self.profit_rate_unchecked(cost, l) + slope * l;
                maximize_concave(objective, 0.0, cap, tol).0
            }
            DemandCurve::Reciprocal => {
                // λ·p(λ) ≡ 1 on (0, cap]; only the endpoints can be optimal.
                let at_cap = alpha1 * (1.0 - cost * cap) + slope * cap;
                if at_cap > 0.0 {
                    cap
                } else {
                    0.0
                }
            }
        }
    }
}

/// Nonnegative objective weights summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct Weights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

#[derive(Deserialize)]
struct RawWeights {
    alpha1: f64,
    alpha2: f64,
    alpha3: f64,
}

impl TryFrom<RawWeights> for Weights {
    type Error = PricingError;

    fn try_from(raw: RawWeights) -> Result<Self> {
        Weights::new(raw.alpha1, raw.alpha2, raw.alpha3)
    }
}

impl Weights {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Result<Self> {
        let all = [alpha1, alpha2, alpha3];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(PricingError::InvalidInput(format!(
                "weights must be nonnegative, got {all:?}"
            )));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(PricingError::InvalidInput(format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        Ok(Weights {
            alpha1,
            alpha2,
            alpha3,
        })
    }

    pub const PROFIT: Weights = Weights {
        alpha1: 1.0,
        alpha2: 0.0,
        alpha3: 0.0,
    };

    pub const MARKET_SHARE: Weights = Weights {
        alpha1: 0.0,
        alpha2: 1.0,
        alpha3: 0.0,
    };

    pub const SERVICE_LEVEL: Weights = Weights {
        alpha1: 0.0,
        alpha2: 0.0,
        alpha3: 1.0,
    };
}

/// True iff every sampled second difference of `λ(p(λ) − c)` over a
/// 1000-point grid on `(0, cap]` is at most `1e-9`.
pub fn check_concavity(curve: &DemandCurve, cost: f64, cap: f64) -> bool {
    grid_concave(|l| curve.profit_rate_unchecked(cost, l), cap)
}

fn grid_concave(f: impl Fn(f64) -> f64, cap: f64) -> bool {
    let n = CONCAVITY_GRID as f64;
    let values: Vec<f64> = (1..=CONCAVITY_GRID)
        .map(|k| f((cap * k as f64 / n).min(cap)))
        .collect();
    values
        .windows(3)
        .all(|w| w[0] - 2.0 * w[1] + w[2] <= CONCAVITY_SLACK)
}

/// The myopic rate: the maximizer of `λ(α₁(p(λ) − c) + α₂)` over `[0, cap]`.
pub fn myopic_rate(curve: &DemandCurve, cost: f64, weights: &Weights, cap: f64) -> Result<f64> {
    if !check_concavity(curve, cost, cap) {
        return Err(PricingError::Rejected(
            "profit rate is not concave in the arrival rate".into(),
        ));
    }
    Ok(curve.maximize_rate(
        weights.alpha1,
        weights.alpha2,
        cost,
        cap,
        MYOPIC_RATE_TOLERANCE,
    ))
}
