//! Event-driven simulation of the loss system under an inventory-state
//! policy, used to cross-check the analytic objectives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};
use crate::loss_chain::{objectives, Instance, ObjectiveTriple, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Simulated time per replication.
    pub horizon: f64,
    /// Initial time discarded from every replication.
    pub warmup: f64,
    pub seed: u64,
    pub replications: usize,
}

impl SimConfig {
    /// Warmup defaults to 5% of the horizon.
    pub fn new(horizon: f64, seed: u64, replications: usize) -> Self {
        SimConfig {
            horizon,
            warmup: 0.05 * horizon,
            seed,
            replications,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.warmup >= 0.0 && self.horizon > self.warmup) {
            return Err(PricingError::InvalidInput(format!(
                "need horizon > warmup ≥ 0, got horizon {} and warmup {}",
                self.horizon, self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(PricingError::InvalidInput(
                "need at least one replication".into(),
            ));
        }
        Ok(())
    }
}

/// Means across replications and their standard errors `sd/√n` (zero for a
/// single replication).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: ObjectiveTriple,
    pub std_error: ObjectiveTriple,
    pub replications: usize,
}

/// One replication: sales revenue and sale counts per unit of measured time,
/// and the fraction of measured time with stock on hand.
fn replicate(inst: &Instance, pol: &Policy, cfg: &SimConfig, rep: u64) -> ObjectiveTriple {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep);
    let c = inst.capacity;
    let margin: Vec<f64> = pol
        .rates()
        .iter()
        .map(|&l| {
            if l > 0.0 {
                inst.curve.price_unchecked(l) - inst.cost
            } else {
                0.0
            }
        })
        .collect();

    let mut state = c;
    let mut t = 0.0;
    let (mut revenue, mut sales, mut stocked) = (0.0, 0u64, 0.0);
    loop {
        let sell = if state > 0 { pol.rate(state) } else { 0.0 };
        let back = (c - state) as f64 * inst.mu;
        let total = sell + back;
        let next = if total > 0.0 {
            let e: f64 = rng.sample(Exp1);
            t + e / total
        } else {
            f64::INFINITY
        };
        let end = next.min(cfg.horizon);
        if state > 0 && end > cfg.warmup {
            stocked += end - t.max(cfg.warmup);
        }
        if next >= cfg.horizon {
            break;
        }
        t = next;
        if rng.gen::<f64>() * total < sell {
            if t > cfg.warmup {
                revenue += margin[state - 1];
                sales += 1;
            }
            state -= 1;
        } else {
            state += 1;
        }
    }
    let span = cfg.horizon - cfg.warmup;
    ObjectiveTriple {
        profit: revenue / span,
        market_share: sales as f64 / span,
        service_level: stocked / span,
    }
}

/// Simulates independent replications, each on its own stream of the master
/// seed, in parallel. Results do not depend on scheduling.
pub fn simulate(inst: &Instance, pol: &Policy, cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate()?;
    if pol.rates().len() != inst.capacity {
        return Err(PricingError::InvalidInput(format!(
            "policy has {} rates for capacity {}",
            pol.rates().len(),
            inst.capacity
        )));
    }
    let runs: Vec<ObjectiveTriple> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|rep| replicate(inst, pol, cfg, rep))
        .collect();
    let n = runs.len() as f64;
    let stat = |f: fn(&ObjectiveTriple) -> f64| {
        let mean = runs.iter().map(f).sum::<f64>() / n;
        if runs.len() < 2 {
            return (mean, 0.0);
        }
        let var = runs.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    let p = stat(|r| r.profit);
    let m = stat(|r| r.market_share);
    let s = stat(|r| r.service_level);
    Ok(SimEstimate {
        mean: ObjectiveTriple {
            profit: p.0,
            market_share: m.0,
            service_level: s.0,
        },
        std_error: ObjectiveTriple {
            profit: p.1,
            market_share: m.1,
            service_level: s.1,
        },
        replications: runs.len(),
    })
}

/// Simulation versus the steady-state objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub analytic: ObjectiveTriple,
    pub estimate: SimEstimate,
    pub profit_ok: bool,
    pub market_share_ok: bool,
    pub service_level_ok: bool,
    pub weighted_ok: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.profit_ok && self.market_share_ok && self.service_level_ok
    }
}

/// Number of standard errors a simulated metric may deviate.
pub const SIGMA_BAND: f64 = 3.0;

fn within(sim: f64, se: f64, exact: f64) -> bool {
    (sim - exact).abs() <= SIGMA_BAND * se + 1e-12 * exact.abs().max(1.0)
}

/// A metric passes when it lies within three standard errors of its analytic
/// value. The weighted check uses the standard error bound `Σ αᵢ·SEᵢ`.
pub fn validate_against_analytic(
    inst: &Instance,
    pol: &Policy,
    cfg: &SimConfig,
) -> Result<ValidationReport> {
    let analytic = objectives(inst, pol);
    let estimate = simulate(inst, pol, cfg)?;
    let (m, se, w) = (&estimate.mean, &estimate.std_error, &inst.weights);
    let weighted_se =
        w.alpha1 * se.profit + w.alpha2 * se.market_share + w.alpha3 * se.service_level;
    Ok(ValidationReport {
        analytic,
        estimate,
        profit_ok: within(m.profit, se.profit, analytic.profit),
        market_share_ok: within(m.market_share, se.market_share, analytic.market_share),
        service_level_ok: within(m.service_level, se.service_level, analytic.service_level),
        weighted_ok: within(m.weighted(w), weighted_se, analytic.weighted(w)),
    })
}
