//! Dynamic and static pricing of a reusable resource with `C` identical units,
//! Poisson arrivals and exponential usage times.
//!
//! The crate computes optimal inventory-dependent prices, builds static prices
//! from them, and numerically audits the worst-case performance guarantees of
//! static pricing.

pub mod demand;
pub mod dynamic_opt;
pub mod error;
pub mod experiments;
pub mod guarantee_lab;
pub mod loss_chain;
mod optimize;
pub mod simulator;
pub mod static_policy;

pub use demand::{check_concavity, myopic_rate, DemandCurve, DemandFamily, Weights};
pub use dynamic_opt::{
    bellman_apply, brute_force_policy_search, solve_dynamic, uniformization_constant, Anchor,
    BellmanStep, DynamicSolution, MdpConfig,
};
pub use error::{PricingError, Result};
pub use guarantee_lab::{
    audit_h, audit_lemma2, audit_lemma6, audit_r_tilde_bounds, audit_theorem2_region, c2_big_g,
    c2_g, ratio_r, ratio_r_tilde, z_from_policy, AuditReport, C2Params, ZVector,
};
pub use loss_chain::{
    objectives, steady_state, weighted_value, Instance, ObjectiveTriple, Policy, SteadyState,
};
pub use simulator::{
    simulate, validate_against_analytic, SimConfig, SimEstimate, ValidationReport,
};
pub use static_policy::{
    best_static_rate, constructed_static_rate, ratio_report, Ratios, StaticReport,
};
