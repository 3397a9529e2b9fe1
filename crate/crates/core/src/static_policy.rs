//! Static (single-price) policies measured against the optimal dynamic one.

use serde::{Deserialize, Serialize};

use crate::dynamic_opt::DynamicSolution;
use crate::error::Result;
use crate::loss_chain::{objectives, steady_state, Instance, ObjectiveTriple, Policy};
use crate::optimize::{golden_section_max, pick_smallest_best};

/// Grid size of the coarse pass in [`best_static_rate`].
pub const STATIC_GRID: usize = 2000;

/// Per-objective performance ratios, static over optimal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub profit: f64,
    pub market_share: f64,
    pub service_level: f64,
    pub weighted: f64,
}

impl Ratios {
    fn between(stat: &ObjectiveTriple, opt: &ObjectiveTriple, w_stat: f64, w_opt: f64) -> Self {
        Ratios {
            profit: ratio(stat.profit, opt.profit),
            market_share: ratio(stat.market_share, opt.market_share),
            service_level: ratio(stat.service_level, opt.service_level),
            weighted: ratio(w_stat, w_opt),
        }
    }

    /// Smallest of the three objective ratios (the weighted one excluded).
    pub fn min_objective(&self) -> f64 {
        self.profit.min(self.market_share).min(self.service_level)
    }
}

/// `static / optimal`, with a zero optimum mapped to 1 (nothing to lose).
pub fn ratio(stat: f64, opt: f64) -> f64 {
    if opt.abs() < f64::MIN_POSITIVE {
        if stat >= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        stat / opt
    }
}

/// Static rate `λ̃ = Σ λ_i* P_i* / (1 − P_0*)`: the optimal policy's mean
/// selling rate while stock is on hand.
///
/// `P_C* > 0` for every policy, so the denominator never vanishes; an
/// all-zero optimal policy yields `λ̃ = 0`.
pub fn constructed_static_rate(inst: &Instance, dynamic: &DynamicSolution) -> f64 {
    let ss = steady_state(inst, &dynamic.policy);
    conditional_mean_rate(dynamic.policy.rates(), &ss.probs).clamp(0.0, inst.max_rate)
}

/// `Σ_{i≥1} λ_i P_i / Σ_{i≥1} P_i` for `probs = P_0..P_C`.
fn conditional_mean_rate(rates: &[f64], probs: &[f64]) -> f64 {
    let selling: f64 = rates.iter().zip(&probs[1..]).map(|(l, p)| l * p).sum();
    selling / probs[1..].iter().sum::<f64>()
}

/// Weighted value of charging one price that induces `rate` in every state.
pub fn static_value(inst: &Instance, rate: f64) -> f64 {
    let pol =
        Policy::constant(inst, rate.clamp(0.0, inst.max_rate)).expect("clamped rate is admissible");
    objectives(inst, &pol).weighted(&inst.weights)
}

/// Best static rate: a 2000-point grid over `[0, Λ]`, then golden-section
/// refinement inside the two cells around the best grid point.
pub fn best_static_rate(inst: &Instance) -> f64 {
    let cap = inst.max_rate;
    let step = cap / (STATIC_GRID - 1) as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut best_k = 0;
    for k in 0..STATIC_GRID {
        let x = (cap * k as f64 / (STATIC_GRID - 1) as f64).min(cap);
        let v = static_value(inst, x);
        if v > best.1 {
            best = (x, v);
            best_k = k;
        }
    }
    let lo = step * best_k.saturating_sub(1) as f64;
    let hi = (step * (best_k + 1) as f64).min(cap);
    let refined = golden_section_max(|x| static_value(inst, x), lo, hi, 1e-12 * cap.max(1.0));
    let mut candidates = [best, refined];
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    pick_smallest_best(&candidates).0
}

/// Static rates and their ratios against the dynamic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticReport {
    pub lambda_tilde: f64,
    pub lambda_best: f64,
    pub ratios_tilde: Ratios,
    pub ratios_best: Ratios,
    pub optimal_value: ObjectiveTriple,
    pub tilde_value: ObjectiveTriple,
    pub best_value: ObjectiveTriple,
}

pub fn ratio_report(inst: &Instance, dynamic: &DynamicSolution) -> Result<StaticReport> {
    let w = &inst.weights;
    let lambda_tilde = constructed_static_rate(inst, dynamic);
    let mut lambda_best = best_static_rate(inst);
    // The search is not guaranteed global; λ̃ is a valid static candidate.
    if static_value(inst, lambda_tilde) > static_value(inst, lambda_best) {
        lambda_best = lambda_tilde;
    }
    let opt = dynamic.value;
    let opt_w = opt.weighted(w);
    let tilde_value = objectives(inst, &Policy::constant(inst, lambda_tilde)?);
    let best_value = objectives(inst, &Policy::constant(inst, lambda_best)?);
    Ok(StaticReport {
        lambda_tilde,
        lambda_best,
        ratios_tilde: Ratios::between(&tilde_value, &opt, tilde_value.weighted(w), opt_w),
        ratios_best: Ratios::between(&best_value, &opt, best_value.weighted(w), opt_w),
        optimal_value: opt,
        tilde_value,
        best_value,
    })
}
