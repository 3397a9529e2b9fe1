//! Optimal dynamic (inventory-dependent) pricing by relative value iteration
//! on the uniformized chain, plus an exhaustive grid search used to check it.

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::loss_chain::{objectives, stationary_into, Instance, ObjectiveTriple, Policy};

/// Relative value iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdpConfig {
    /// Stop once `span(Th − h) < span_tolerance · max(1, |η|)`.
    pub span_tolerance: f64,
    pub max_iterations: usize,
    /// Golden-section tolerance on the rate, for curves without a closed-form
    /// per-state maximizer.
    pub inner_tolerance: f64,
    /// State whose relative value is pinned to zero after every sweep.
    pub anchor: Anchor,
}

impl Default for MdpConfig {
    fn default() -> Self {
        MdpConfig {
            span_tolerance: 1e-10,
            max_iterations: 1_000_000,
            inner_tolerance: 1e-12,
            anchor: Anchor::Empty,
        }
    }
}

impl MdpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.span_tolerance > 0.0 && self.inner_tolerance > 0.0) {
            return Err(PricingError::InvalidInput(
                "value iteration tolerances must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(PricingError::InvalidInput(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Reference state for relative value iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    /// `h(0) = 0`
    Empty,
    /// `h(C) = 0`
    Full,
}

/// An optimal (or candidate) dynamic policy with its gain and relative values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicSolution {
    pub policy: Policy,
    /// Long-run weighted reward rate.
    pub eta: f64,
    /// Relative values `h(0..=C)` with `h(0) = 0`.
    pub h: Vec<f64>,
    pub value: ObjectiveTriple,
    /// Sweeps used by value iteration; zero for solutions built otherwise.
    pub iterations: usize,
}

impl DynamicSolution {
    /// Wraps an arbitrary policy: its gain is its weighted value and `h` solves
    /// the policy's own average-reward equations.
    pub fn from_policy(inst: &Instance, policy: Policy) -> Self {
        let value = objectives(inst, &policy);
        let eta = value.weighted(&inst.weights);
        let h = policy_relative_values(inst, &policy, eta);
        DynamicSolution {
            policy,
            eta,
            h,
            value,
            iterations: 0,
        }
    }
}

/// `γ = 1/(1 + Λ + Cμ)`.
pub fn uniformization_constant(inst: &Instance) -> f64 {
    1.0 / (1.0 + inst.max_rate + inst.capacity as f64 * inst.mu)
}

/// Result of one application of the value-iteration operator.
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanStep {
    /// `Th(0..=C)`, not re-anchored.
    pub values: Vec<f64>,
    /// Maximizing rate for each state `1..=C`.
    pub rates: Vec<f64>,
}

/// One application of the uniformized operator
///
/// `Th(i) = max_λ { α₁λ(p(λ)−c) + α₂λ + α₃ − η + γλh(i−1) + γμ(C−i)h(i+1)
///                  + (1 − γ(λ + μ(C−i)))h(i) }`
///
/// for `i ≥ 1`. With no unit on hand nothing is sold and no service reward is
/// earned, so `Th(0) = −η + γμC·h(1) + (1 − γμC)h(0)`.
pub fn bellman_apply(inst: &Instance, gamma: f64, eta: f64, h: &[f64]) -> BellmanStep {
    let mut values = vec![0.0; inst.capacity + 1];
    let mut rates = vec![0.0; inst.capacity];
    bellman_apply_into(
        inst,
        gamma,
        eta,
        h,
        MdpConfig::default().inner_tolerance,
        &mut values,
        &mut rates,
    );
    BellmanStep { values, rates }
}

fn bellman_apply_into(
    inst: &Instance,
    gamma: f64,
    eta: f64,
    h: &[f64],
    tol: f64,
    values: &mut [f64],
    rates: &mut [f64],
) {
    let c = inst.capacity;
    let w = &inst.weights;
    let mu = inst.mu;
    debug_assert_eq!(h.len(), c + 1);

    let up0 = gamma * mu * c as f64;
    values[0] = -eta + up0 * h[1] + (1.0 - up0) * h[0];

    for i in 1..=c {
        let up = gamma * mu * (c - i) as f64;
        let continuation = if i < c {
            up * h[i + 1] + (1.0 - up) * h[i]
        } else {
            h[i]
        };
        // λ[α₁(p(λ)−c) + α₂ − γ(h(i) − h(i−1))]
        let mut slope = w.alpha2 - gamma * (h[i] - h[i - 1]);
        // Rounding in h must not break exact ties (e.g. a pure service-level
        // objective, where states above one unit share the same value).
        if slope.abs() <= 1e-12 * (w.alpha2 + gamma * (h[i].abs() + h[i - 1].abs())) {
            slope = 0.0;
        }
        let lambda = inst
            .curve
            .maximize_rate(w.alpha1, slope, inst.cost, inst.max_rate, tol);
        let gain = w.alpha1 * inst.curve.profit_rate_unchecked(inst.cost, lambda) + slope * lambda;
        rates[i - 1] = lambda;
        values[i] = w.alpha3 - eta + continuation + gain;
    }
}

/// Solves for the optimal dynamic policy by relative value iteration.
///
/// Each sweep applies the operator, estimates `η` as the midpoint of
/// `Th − h`, and re-anchors `h` at the configured state. The returned rates
/// are checked against the monotone structure `λ₁ ≤ … ≤ λ_C ≤ λ̄`.
pub fn solve_dynamic(inst: &Instance, cfg: &MdpConfig) -> Result<DynamicSolution> {
    cfg.validate()?;
    inst.ensure_admissible()?;
    let c = inst.capacity;
    let gamma = uniformization_constant(inst);
    let anchor = match cfg.anchor {
        Anchor::Empty => 0,
        Anchor::Full => c,
    };

    let mut h = vec![0.0; c + 1];
    let mut next = vec![0.0; c + 1];
    let mut rates = vec![0.0; c];
    let mut eta = 0.0;
    let mut span = f64::INFINITY;

    for iteration in 1..=cfg.max_iterations {
        bellman_apply_into(
            inst,
            gamma,
            eta,
            &h,
            cfg.inner_tolerance,
            &mut next,
            &mut rates,
        );
        let (lo, hi) = h
            .iter()
            .zip(&next)
            .map(|(old, new)| new - old)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            });
        span = hi - lo;
        eta += 0.5 * (lo + hi);
        let pin = next[anchor];
        for (dst, src) in h.iter_mut().zip(&next) {
            *dst = src - pin;
        }
        if span < cfg.span_tolerance * eta.abs().max(1.0) {
            let h0 = h[0];
            for v in h.iter_mut() {
                *v -= h0;
            }
            let policy = Policy::new(inst, rates.clone())?;
            check_monotone(inst, &policy)?;
            let value = objectives(inst, &policy);
            return Ok(DynamicSolution {
                policy,
                eta,
                h,
                value,
                iterations: iteration,
            });
        }
    }
    Err(PricingError::Convergence {
        iterations: cfg.max_iterations,
        span,
        tolerance: cfg.span_tolerance,
    })
}

/// Slack allowed when comparing optimal rates.
pub const MONOTONE_TOLERANCE: f64 = 1e-8;

fn check_monotone(inst: &Instance, policy: &Policy) -> Result<()> {
    let tol = MONOTONE_TOLERANCE * inst.max_rate.max(1.0);
    let rates = policy.rates();
    if let Some(k) = rates.windows(2).position(|w| w[0] > w[1] + tol) {
        return Err(PricingError::Structure(format!(
            "λ_{} = {} exceeds λ_{} = {}",
            k + 1,
            rates[k],
            k + 2,
            rates[k + 1]
        )));
    }
    let myopic = inst.myopic_rate()?;
    let top = rates[rates.len() - 1];
    if top > myopic + tol {
        return Err(PricingError::Structure(format!(
            "λ_C = {top} exceeds the myopic rate {myopic}"
        )));
    }
    Ok(())
}

/// Relative values of a fixed policy with gain `eta`, pinned at `h(0) = 0`,
/// from the balance equations of the uniformized chain solved upwards.
fn policy_relative_values(inst: &Instance, policy: &Policy, eta: f64) -> Vec<f64> {
    let c = inst.capacity;
    let gamma = uniformization_constant(inst);
    let mut h = vec![0.0; c + 1];
    h[1] = eta / (gamma * inst.mu * c as f64);
    for i in 1..c {
        let lambda = policy.rate(i);
        let reward = inst.reward_rate(lambda);
        let down = gamma * lambda * (h[i - 1] - h[i]);
        h[i + 1] = h[i] + (eta - reward - down) / (gamma * inst.mu * (c - i) as f64);
    }
    h
}

/// Evaluation budget of [`brute_force_policy_search`].
pub const BRUTE_FORCE_LIMIT: f64 = 1e8;

/// Exhaustive search over the grid `{kΛ/(n−1)}^C`, scoring each policy by its
/// weighted long-run value. Intended for `C ≤ 3`.
pub fn brute_force_policy_search(inst: &Instance, grid_points: usize) -> Result<DynamicSolution> {
    let c = inst.capacity;
    if grid_points < 2 {
        return Err(PricingError::InvalidInput(
            "brute force needs at least two grid points".into(),
        ));
    }
    let evaluations = (grid_points as f64).powi(c as i32);
    if evaluations > BRUTE_FORCE_LIMIT {
        return Err(PricingError::GridTooLarge {
            evaluations,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let n = (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points)
        .map(|k| (inst.max_rate * k as f64 / n).min(inst.max_rate))
        .collect();
    let reward: Vec<f64> = grid.iter().map(|&l| inst.reward_rate(l)).collect();

    let mut index = vec![0usize; c];
    let mut rates = vec![0.0; c];
    let mut probs = vec![0.0; c + 1];
    let mut best_value = f64::NEG_INFINITY;
    let mut best_index = index.clone();
    loop {
        for (r, &k) in rates.iter_mut().zip(&index) {
            *r = grid[k];
        }
        stationary_into(inst.mu, &rates, &mut probs);
        let value: f64 = index
            .iter()
            .zip(&probs[1..])
            .map(|(&k, p)| reward[k] * p)
            .sum();
        if value > best_value {
            best_value = value;
            best_index.copy_from_slice(&index);
        }
        // Odometer increment, last state fastest.
        let mut pos = c;
        loop {
            if pos == 0 {
                let best = best_index.iter().map(|&k| grid[k]).collect();
                let policy = Policy::new(inst, best)?;
                return Ok(DynamicSolution::from_policy(inst, policy));
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < grid_points {
                break;
            }
            index[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandCurve, Weights};
    use crate::loss_chain::weighted_value;

    fn linear(c: usize, mu: f64, w: Weights) -> Instance {
        Instance::new(c, mu, 0.0, w, DemandCurve::Linear { a: 1.0, b: 2.0 }, None).unwrap()
    }

    #[test]
    fn uniformization_examples() {
        let i = Instance::new(
            1,
            1.0,
            0.0,
            Weights::PROFIT,
            DemandCurve::Linear { a: 1.0, b: 1.0 },
            None,
        )
        .unwrap();
        assert!((uniformization_constant(&i) - 1.0 / 3.0).abs() < 1e-15);
        let i = Instance::new(
            3,
            0.5,
            0.0,
            Weights::PROFIT,
            DemandCurve::Linear { a: 1.0, b: 2.0 },
            None,
        )
        .unwrap();
        assert!((uniformization_constant(&i) - 1.0 / 4.5).abs() < 1e-15);
        let i = Instance::new(
            1,
            1.0,
            0.0,
            Weights::PROFIT,
            DemandCurve::Linear { a: 1.0, b: 1e-12 },
            None,
        )
        .unwrap();
        assert!((uniformization_constant(&i) - 0.5).abs() < 1e-11);
    }

    #[test]
    fn bellman_with_flat_values() {
        let i = linear(3, 1.0, Weights::MARKET_SHARE);
        let g = uniformization_constant(&i);
        let step = bellman_apply(&i, g, 0.0, &[0.0; 4]);
        assert_eq!(step.rates, vec![2.0; 3]);

        let i = linear(3, 1.0, Weights::PROFIT);
        let step = bellman_apply(&i, g, 0.0, &[0.0; 4]);
        assert!(step.rates.iter().all(|r| (r - 1.0).abs() < 1e-12));
        // Profit reward λ(2−λ) = 1 at the vertex, no flow terms with h ≡ 0.
        assert!(step.values[1..].iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(step.values[0], 0.0);
    }

    #[test]
    fn full_state_has_no_return_flow() {
        // With h nonzero only above C the operator could not see it; check
        // that state C only mixes h(C) and h(C−1).
        let i = linear(2, 1.0, Weights::SERVICE_LEVEL);
        let g = uniformization_constant(&i);
        let step = bellman_apply(&i, g, 0.0, &[0.0, 5.0, 7.0]);
        // α₃ = 1, λ = 0 is optimal (h increasing), so Th(2) = 1 + h(2).
        assert_eq!(step.rates[1], 0.0);
        assert!((step.values[2] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn service_only_solution_is_zero_policy() {
        let i = linear(3, 0.7, Weights::SERVICE_LEVEL);
        let sol = solve_dynamic(&i, &MdpConfig::default()).unwrap();
        assert!((sol.value.service_level - 1.0).abs() < 1e-8);
        assert_eq!(sol.policy.rates(), &[0.0; 3]);
        assert_eq!(sol.h[0], 0.0);
    }

    #[test]
    fn gain_matches_policy_value() {
        let i = Instance::new(
            4,
            0.3,
            0.2,
            Weights::new(0.5, 0.3, 0.2).unwrap(),
            DemandCurve::Logistic {
                a: 1.2,
                b: 3.0,
                p0: 2.0,
            },
            None,
        )
        .unwrap();
        let sol = solve_dynamic(&i, &MdpConfig::default()).unwrap();
        assert!((sol.eta - weighted_value(&i, &sol.policy)).abs() < 1e-9);
        assert!((sol.value.weighted(&i.weights) - sol.eta).abs() < 1e-9);
    }

    #[test]
    fn anchoring_does_not_change_the_value() {
        let i = linear(3, 0.4, Weights::new(0.6, 0.1, 0.3).unwrap());
        let a = solve_dynamic(&i, &MdpConfig::default()).unwrap();
        let b = solve_dynamic(
            &i,
            &MdpConfig {
                anchor: Anchor::Full,
                ..MdpConfig::default()
            },
        )
        .unwrap();
        assert!((a.eta - b.eta).abs() < 1e-9);
        assert!((a.value.weighted(&i.weights) - b.value.weighted(&i.weights)).abs() < 1e-9);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let i = linear(3, 0.05, Weights::PROFIT);
        let err = solve_dynamic(
            &i,
            &MdpConfig {
                max_iterations: 3,
                ..MdpConfig::default()
            },
        )
        .unwrap_err();
        assert!(matches!(
            err,
            PricingError::Convergence { iterations: 3, .. }
        ));
    }

    #[test]
    fn brute_force_trivial_cases() {
        let i = linear(2, 1.0, Weights::MARKET_SHARE);
        let sol = brute_force_policy_search(&i, 51).unwrap();
        assert_eq!(sol.policy.rates(), &[2.0, 2.0]);

        let i = linear(1, 1.0, Weights::SERVICE_LEVEL);
        let sol = brute_force_policy_search(&i, 101).unwrap();
        assert_eq!(sol.policy.rates(), &[0.0]);
    }

    #[test]
    fn brute_force_refuses_huge_grids() {
        let i = linear(3, 1.0, Weights::PROFIT);
        assert!(matches!(
            brute_force_policy_search(&i, 1000),
            Err(PricingError::GridTooLarge { .. })
        ));
    }

    #[test]
    fn single_unit_profit_matches_grid() {
        // λ(2−λ)·μ/(λ+μ) with μ = 1.
        let i = linear(1, 1.0, Weights::PROFIT);
        let grid = brute_force_policy_search(&i, 1_000_000).unwrap();
        let vi = solve_dynamic(&i, &MdpConfig::default()).unwrap();
        assert!((grid.eta - vi.eta).abs() < 1e-4);
        // Stationary point of λ(2−λ)/(λ+1): λ² + 2λ − 2 = 0.
        let exact = 3f64.sqrt() - 1.0;
        assert!((vi.policy.rate(1) - exact).abs() < 1e-6);
    }

    #[test]
    fn relative_values_of_fixed_policy_solve_the_operator() {
        let i = linear(3, 0.8, Weights::new(0.4, 0.4, 0.2).unwrap());
        let pol = Policy::new(&i, vec![0.3, 0.6, 0.9]).unwrap();
        let sol = DynamicSolution::from_policy(&i, pol.clone());
        let g = uniformization_constant(&i);
        // Fixed-policy operator: η + h(i) = r_i + Σ P_ij h(j).
        for s in 0..=3usize {
            let lam = if s == 0 { 0.0 } else { pol.rate(s) };
            let r = if s == 0 { 0.0 } else { i.reward_rate(lam) };
            let up = g * i.mu * (3 - s) as f64;
            let mut rhs = r + (1.0 - g * lam - up) * sol.h[s];
            if s > 0 {
                rhs += g * lam * sol.h[s - 1];
            }
            if s < 3 {
                rhs += up * sol.h[s + 1];
            }
            assert!((sol.eta + sol.h[s] - rhs).abs() < 1e-9, "state {s}");
        }
    }
}
