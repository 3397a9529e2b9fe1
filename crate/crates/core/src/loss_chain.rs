//! Steady state of the C-unit loss system under an inventory-state policy,
//! and the three long-run objectives computed from it.
//!
//! State `i` is the number of units on hand. A sale moves `i → i−1` at rate
//! `λ_i`; a returning unit moves `i → i+1` at rate `(C−i)μ`. Customers arriving
//! in state 0 are lost.

use serde::{Deserialize, Serialize};

use crate::demand::{check_concavity, myopic_rate, DemandCurve, DemandFamily, Weights};
use crate::error::{PricingError, Result};

/// One problem definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct Instance {
    /// Number of units `C`.
    pub capacity: usize,
    /// Service (return) rate per occupied unit.
    pub mu: f64,
    /// Cost per sale.
    pub cost: f64,
    pub weights: Weights,
    pub curve: DemandCurve,
    /// Rate cap `Λ`.
    pub max_rate: f64,
}

#[derive(Deserialize)]
struct RawInstance {
    capacity: usize,
    mu: f64,
    #[serde(default)]
    cost: f64,
    weights: Weights,
    curve: DemandCurve,
    #[serde(default)]
    max_rate: Option<f64>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = PricingError;

    fn try_from(raw: RawInstance) -> Result<Self> {
        Instance::new(
            raw.capacity,
            raw.mu,
            raw.cost,
            raw.weights,
            raw.curve,
            raw.max_rate,
        )
    }
}

impl Instance {
    /// Builds and validates an instance. `max_rate` defaults to the demand at
    /// price zero and is mandatory for reciprocal demand.
    pub fn new(
        capacity: usize,
        mu: f64,
        cost: f64,
        weights: Weights,
        curve: DemandCurve,
        max_rate: Option<f64>,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(PricingError::InvalidInput(msg));
        if capacity == 0 {
            return invalid("capacity must be at least 1".into());
        }
        if !(mu.is_finite() && mu > 0.0) {
            return invalid(format!("service rate must be positive, got {mu}"));
        }
        if !(cost.is_finite() && cost >= 0.0) {
            return invalid(format!("cost must be nonnegative, got {cost}"));
        }
        Weights::new(weights.alpha1, weights.alpha2, weights.alpha3)?;
        curve.validate()?;
        let cap = match (max_rate, curve.max_rate()) {
            (Some(cap), Some(b)) if cap > b * (1.0 + 1e-12) => {
                return invalid(format!(
                    "rate cap {cap} exceeds the demand at price zero ({b})"
                ))
            }
            (Some(cap), Some(b)) => cap.min(b),
            (Some(cap), None) => cap,
            (None, Some(b)) => b,
            (None, None) => {
                return invalid("reciprocal demand requires an explicit max_rate".into())
            }
        };
        if !(cap.is_finite() && cap > 0.0) {
            return invalid(format!("rate cap must be positive, got {cap}"));
        }
        Ok(Instance {
            capacity,
            mu,
            cost,
            weights,
            curve,
            max_rate: cap,
        })
    }

    pub fn is_concave(&self) -> bool {
        check_concavity(&self.curve, self.cost, self.max_rate)
    }

    /// Refuses instances the optimizers cannot handle: a non-concave profit
    /// rate, or reciprocal demand with a positive profit weight (its profit
    /// rate jumps at zero, so the supremum over rates is not attained).
    pub fn ensure_admissible(&self) -> Result<()> {
        if !self.is_concave() {
            return Err(PricingError::Rejected(
                "profit rate is not concave in the arrival rate".into(),
            ));
        }
        if self.curve.family() == DemandFamily::Reciprocal && self.weights.alpha1 > 0.0 {
            return Err(PricingError::Rejected(
                "reciprocal demand is only supported with a zero profit weight".into(),
            ));
        }
        Ok(())
    }

    /// The myopic rate `λ̄` of this instance.
    pub fn myopic_rate(&self) -> Result<f64> {
        myopic_rate(&self.curve, self.cost, &self.weights, self.max_rate)
    }

    /// Instantaneous weighted reward rate `α₁λ(p(λ)−c) + α₂λ + α₃` earned
    /// while at least one unit is on hand.
    #[inline]
    pub(crate) fn reward_rate(&self, lambda: f64) -> f64 {
        let w = &self.weights;
        w.alpha1 * self.curve.profit_rate_unchecked(self.cost, lambda)
            + w.alpha2 * lambda
            + w.alpha3
    }
}

/// State-dependent arrival rates `λ_1..λ_C`; `rates[i-1]` is used with `i`
/// units on hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    rates: Vec<f64>,
}

impl Policy {
    pub fn new(inst: &Instance, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != inst.capacity {
            return Err(PricingError::InvalidInput(format!(
                "policy has {} rates, instance has {} units",
                rates.len(),
                inst.capacity
            )));
        }
        let cap = inst.max_rate * (1.0 + 1e-12);
        if let Some(bad) = rates
            .iter()
            .find(|l| !l.is_finite() || **l < 0.0 || **l > cap)
        {
            return Err(PricingError::InvalidInput(format!(
                "rate {bad} outside [0, {}]",
                inst.max_rate
            )));
        }
        let rates = rates.into_iter().map(|l| l.min(inst.max_rate)).collect();
        Ok(Policy { rates })
    }

    /// The static policy charging one price in every state.
    pub fn constant(inst: &Instance, rate: f64) -> Result<Self> {
        Policy::new(inst, vec![rate; inst.capacity])
    }

    pub fn zero(inst: &Instance) -> Self {
        Policy {
            rates: vec![0.0; inst.capacity],
        }
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Rate used with `i ≥ 1` units on hand.
    pub fn rate(&self, i: usize) -> f64 {
        self.rates[i - 1]
    }

    pub fn is_static(&self) -> bool {
        self.rates.windows(2).all(|w| w[0] == w[1])
    }
}

/// Steady-state probabilities `P_0..P_C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub probs: Vec<f64>,
}

impl SteadyState {
    /// Probability that no unit is on hand.
    pub fn stockout(&self) -> f64 {
        self.probs[0]
    }

    /// `1 − P_0`, summed from the stock-in states.
    pub fn stock_in(&self) -> f64 {
        self.probs[1..].iter().sum()
    }
}

/// Long-run profit rate, sales rate and fraction of time with stock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTriple {
    pub profit: f64,
    pub market_share: f64,
    pub service_level: f64,
}

impl ObjectiveTriple {
    pub fn weighted(&self, w: &Weights) -> f64 {
        w.alpha1 * self.profit + w.alpha2 * self.market_share + w.alpha3 * self.service_level
    }
}

/// Above these sizes the unnormalized weights are accumulated in log space.
const LOG_SPACE_CAPACITY: usize = 30;
const LOG_SPACE_LOAD: f64 = 1e3;

/// Writes the stationary distribution for `rates` (length `C`) into `out`
/// (length `C+1`).
///
/// Uses the detailed-balance recursion `P_{i} = P_{i+1}·λ_{i+1}/((C−i)μ)`,
/// which is the product form `P_i ∝ C!/(C−i)!·Π_{j>i} λ_j/μ` rescaled by
/// `1/C!`, then divides by the largest term and normalizes.
pub(crate) fn stationary_into(mu: f64, rates: &[f64], out: &mut [f64]) {
    let c = rates.len();
    debug_assert_eq!(out.len(), c + 1);
    let use_log = c > LOG_SPACE_CAPACITY || rates.iter().any(|l| l / mu > LOG_SPACE_LOAD);
    out[c] = if use_log { 0.0 } else { 1.0 };
    for i in (0..c).rev() {
        let step_num = rates[i];
        let step_den = (c - i) as f64 * mu;
        out[i] = if use_log {
            out[i + 1] + step_num.ln() - step_den.ln()
        } else {
            out[i + 1] * step_num / step_den
        };
    }
    let largest = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if use_log {
        for v in out.iter_mut() {
            *v = (*v - largest).exp();
        }
    } else {
        for v in out.iter_mut() {
            *v /= largest;
        }
    }
    let total: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= total;
    }
}

pub fn steady_state(inst: &Instance, pol: &Policy) -> SteadyState {
    let mut probs = vec![0.0; inst.capacity + 1];
    stationary_into(inst.mu, pol.rates(), &mut probs);
    SteadyState { probs }
}

/// Objectives of a policy. A zero rate contributes no profit, which is the
/// concave limit of `λ(p(λ) − c)` as `λ → 0`.
pub fn objectives(inst: &Instance, pol: &Policy) -> ObjectiveTriple {
    let ss = steady_state(inst, pol);
    objectives_from(inst, pol, &ss)
}

pub(crate) fn objectives_from(inst: &Instance, pol: &Policy, ss: &SteadyState) -> ObjectiveTriple {
    let mut profit = 0.0;
    let mut market_share = 0.0;
    for (i, &lambda) in pol.rates().iter().enumerate() {
        let p = ss.probs[i + 1];
        profit += inst.curve.profit_rate_unchecked(inst.cost, lambda) * p;
        market_share += lambda * p;
    }
    ObjectiveTriple {
        profit,
        market_share,
        service_level: ss.stock_in(),
    }
}

pub fn weighted_value(inst: &Instance, pol: &Policy) -> f64 {
    objectives(inst, pol).weighted(&inst.weights)
}
