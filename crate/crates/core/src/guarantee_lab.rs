//! The service-level ratio in suffix-product coordinates and numerical audits
//! of the bounds used to certify static pricing.
//!
//! For a policy `λ₁..λ_C` let `z_i = Π_{j≥i} λ_j/μ` (`z_{C+1} = 1`),
//! `a_i = C!/(C−i)!`, `x = Σ_{k=1}^C a_k z_{k+1}` and `y = Σ_{k=2}^C a_k z_k`.
//! The ratio of stock-in probabilities between the constructed static rate
//! and the policy itself is a closed-form function `R(z)`.

use std::collections::BTreeMap;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::demand::{DemandCurve, DemandFamily};
use crate::dynamic_opt::{solve_dynamic, MdpConfig};
use crate::error::{PricingError, Result};
use crate::loss_chain::{Instance, Policy};
use crate::optimize::golden_section_max;

/// Universal floor for the constructed static rate.
pub const THEOREM1_FLOOR: Rational64 = Rational64::new_raw(15, 19);
/// The same floor as it appears for three units, before reduction.
pub const C3_FLOOR_UNREDUCED: Rational64 = Rational64::new_raw(30, 38);
/// Floor of `R` for two units.
pub const C2_FLOOR: Rational64 = Rational64::new_raw(4, 5);
/// `H(4)`.
pub const H4: Rational64 = Rational64::new_raw(27, 104);
/// Lower bound on `R̃(0, z₂, …, z_C)`.
pub const LEMMA3_BOUND: Rational64 = Rational64::new_raw(104, 131);
/// Lower bound on `R̃` when `y ≤ a₁z₁`.
pub const LEMMA4_BOUND: Rational64 = Rational64::new_raw(6, 7);
/// Upper bound on `G(β, z₂)` for `z₂ ≥ (√7−1)/3`.
pub const LEMMA6_BOUND: Rational64 = Rational64::new_raw(433, 10_000);
/// Profit guarantee for two units and linear demand.
pub const THEOREM2_FLOOR: Rational64 = Rational64::new_raw(955, 1000);

/// Finite-difference derivatives may dip this far below zero.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-7;
/// Slack on lower bounds evaluated in floating point.
pub const BOUND_TOLERANCE: f64 = 1e-9;

pub fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `a_0..a_C` with `a_i = C!/(C−i)!`.
pub fn falling_factorials(c: usize) -> Vec<f64> {
    let mut a = Vec::with_capacity(c + 1);
    a.push(1.0);
    for i in 1..=c {
        a.push(a[i - 1] * (c - i + 1) as f64);
    }
    a
}

/// Suffix-product coordinates `z₁..z_C` of a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZVector {
    z: Vec<f64>,
}

impl ZVector {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(PricingError::InvalidInput(
                "z needs at least one coordinate".into(),
            ));
        }
        if let Some(v) = z.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(PricingError::InvalidInput(format!(
                "z coordinates must be finite and nonnegative, got {v}"
            )));
        }
        Ok(ZVector { z })
    }

    /// Builds `z` from per-state ratios `r_i = λ_i/μ`.
    pub fn from_ratios(r: &[f64]) -> Result<Self> {
        let mut z = vec![0.0; r.len()];
        let mut acc = 1.0;
        for i in (0..r.len()).rev() {
            acc *= r[i];
            z[i] = acc;
        }
        ZVector::new(z)
    }

    pub fn capacity(&self) -> usize {
        self.z.len()
    }

    /// `z₁..z_C`.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// `z_i` for `1 ≤ i ≤ C+1`.
    pub fn get(&self, i: usize) -> f64 {
        if i == self.z.len() + 1 {
            1.0
        } else {
            self.z[i - 1]
        }
    }

    pub fn with_z1(&self, z1: f64) -> Self {
        let mut z = self.z.clone();
        z[0] = z1;
        ZVector { z }
    }

    pub fn x(&self) -> f64 {
        let c = self.capacity();
        let a = falling_factorials(c);
        (1..=c).map(|k| a[k] * self.get(k + 1)).sum()
    }

    pub fn y(&self) -> f64 {
        let c = self.capacity();
        let a = falling_factorials(c);
        (2..=c).map(|k| a[k] * self.get(k)).sum()
    }

    /// `z₁z_{k+1} ≤ z₂z_k` for every `k`, i.e. `λ₁ ≤ λ_k`, as holds for
    /// optimal policies.
    pub fn is_lemma1_consistent(&self) -> bool {
        let c = self.capacity();
        if c < 2 {
            return true;
        }
        let (z1, z2) = (self.get(1), self.get(2));
        (1..=c).all(|k| z1 * self.get(k + 1) <= z2 * self.get(k) * (1.0 + 1e-12))
    }

    /// `y ≥ a₁z₁`, the domain where `R̃` is nondecreasing in `z₁`.
    pub fn in_lemma2_region(&self) -> bool {
        self.y() >= self.capacity() as f64 * self.get(1)
    }
}

/// `z_i = Π_{j=i}^C λ_j/μ`.
pub fn z_from_policy(inst: &Instance, pol: &Policy) -> ZVector {
    let r: Vec<f64> = pol.rates().iter().map(|l| l / inst.mu).collect();
    ZVector::from_ratios(&r).expect("policy rates are finite and nonnegative")
}

/// `q ↦ M/(1+M)` with `M = Σ_{i=1}^n a_i q^i`: the stock-in probability of a
/// static policy whose `Σ a_k z_k / Σ a_k z_{k+1}` equals `1/q`.
fn truncated_stock_in(a: &[f64], n: usize, q: f64) -> f64 {
    if q.is_infinite() {
        return 1.0;
    }
    let mut m = 0.0;
    for i in (1..=n).rev() {
        m = (m + a[i]) * q;
    }
    if m.is_infinite() {
        1.0
    } else {
        m / (1.0 + m)
    }
}

fn ratio_truncated(zv: &ZVector, terms: usize) -> f64 {
    let c = zv.capacity();
    let a = falling_factorials(c);
    let x = zv.x();
    let s = a[1] * zv.get(1) + zv.y();
    if s == 0.0 {
        return 1.0;
    }
    // (1 − P₀*)⁻¹ = (z₁ + x)/x
    (1.0 + zv.get(1) / x) * truncated_stock_in(&a, terms, x / s)
}

/// `R(z) = (1 − P₀(λ̃)) / (1 − P₀*)`.
pub fn ratio_r(zv: &ZVector) -> f64 {
    ratio_truncated(zv, zv.capacity())
}

/// Lower bound on `R` keeping only the `i ≤ 4` terms of the static stock-in
/// sums. Needs `C ≥ 4`.
pub fn ratio_r_tilde(zv: &ZVector) -> Result<f64> {
    if zv.capacity() < 4 {
        return Err(PricingError::Domain(format!(
            "R̃ needs C ≥ 4, got C = {}",
            zv.capacity()
        )));
    }
    Ok(ratio_truncated(zv, 4))
}

/// Outcome of one numerical audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub lemma: String,
    pub samples: usize,
    pub violations: usize,
    /// Smallest `quantity − bound` seen (largest `bound − quantity` for upper
    /// bounds); negative beyond the tolerance means a violation.
    pub worst_margin: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, Value>,
}

impl AuditReport {
    fn from_margins(lemma: &str, margins: &[f64], tolerance: f64) -> Self {
        let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
        let mut details = BTreeMap::new();
        details.insert("tolerance".into(), json!(tolerance));
        AuditReport {
            lemma: lemma.into(),
            samples: margins.len(),
            violations: margins.iter().filter(|m| m.is_nan() || **m < -tolerance).count(),
            worst_margin: worst,
            details,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn detail(mut self, key: &str, value: Value) -> Self {
        self.details.insert(key.into(), value);
        self
    }
}

/// How [`sample_lemma1_z`] draws per-state ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZSampler {
    /// `z_i` log-uniform on `[10⁻³, 10⁶]`; the implied ratios are then sorted
    /// so that `λ₁ ≤ … ≤ λ_C`.
    Wide,
    /// Ratios log-uniform on `[C−1, 10³(C−1)]`, sorted. Populates `y ≤ a₁z₁`,
    /// which forces every ratio to be at least `C−1`.
    HighRate,
}

/// Draws a Lemma-1-consistent z-vector.
pub fn sample_lemma1_z<R: Rng + ?Sized>(c: usize, sampler: ZSampler, rng: &mut R) -> ZVector {
    let mut r = match sampler {
        ZSampler::Wide => {
            let z: Vec<f64> = (0..c)
                .map(|_| 10f64.powf(rng.gen_range(-3.0..=6.0)))
                .collect();
            (0..c)
                .map(|i| z[i] / if i + 1 < c { z[i + 1] } else { 1.0 })
                .collect::<Vec<_>>()
        }
        ZSampler::HighRate => {
            let floor = (c as f64 - 1.0).max(1.0);
            (0..c)
                .map(|_| floor * 10f64.powf(rng.gen_range(0.0..=3.0)))
                .collect()
        }
    };
    r.sort_by(f64::total_cmp);
    ZVector::from_ratios(&r).expect("sampled ratios are positive")
}

const MAX_DRAWS: usize = 100_000;

/// Deterministic per-sample RNG: stream `index` of the master seed.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_in_region(
    c: usize,
    sampler: ZSampler,
    seed: u64,
    index: u64,
    keep: impl Fn(&ZVector) -> bool,
) -> Result<ZVector> {
    let mut rng = sample_rng(seed, index);
    for _ in 0..MAX_DRAWS {
        let zv = sample_lemma1_z(c, sampler, &mut rng);
        if keep(&zv) {
            return Ok(zv);
        }
    }
    Err(PricingError::InvalidInput(format!(
        "no admissible z-vector after {MAX_DRAWS} draws (C = {c})"
    )))
}

/// Finite-difference slope of `f` at `z` with step `1e-6·max(z, 1)`: central,
/// or forward when the step would cross zero.
fn fd_slope(f: impl Fn(f64) -> f64, z: f64) -> f64 {
    let step = 1e-6 * z.max(1.0);
    if z < step {
        (f(z + step) - f(z)) / step
    } else {
        (f(z + step) - f(z - step)) / (2.0 * step)
    }
}

/// `∂R̃/∂z₁ ≥ 0` on Lemma-1-consistent vectors with `y ≥ a₁z₁`.
pub fn audit_lemma2(c: usize, samples: usize, seed: u64) -> Result<AuditReport> {
    if c < 4 {
        return Err(PricingError::Domain(format!(
            "the audit needs C ≥ 4, got {c}"
        )));
    }
    let margins = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let zv = draw_in_region(c, ZSampler::Wide, seed, k, ZVector::in_lemma2_region)?;
            let f = |z1: f64| ratio_truncated(&zv.with_z1(z1), 4);
            Ok(fd_slope(f, zv.get(1)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AuditReport::from_margins("lemma2", &margins, DERIVATIVE_TOLERANCE).detail("C", json!(c)))
}

/// Bounds on `R̃` over sampled Lemma-1-consistent vectors:
/// `R̃(0, z₂, …) ≥ 104/131` and `R̃ ≥ 104/131` where `y ≥ a₁z₁`,
/// `R̃ ≥ 6/7` where `y ≤ a₁z₁`, and `R ≥ R̃` on both.
pub fn audit_r_tilde_bounds(c: usize, samples: usize, seed: u64) -> Result<Vec<AuditReport>> {
    if c < 4 {
        return Err(PricingError::Domain(format!(
            "the audit needs C ≥ 4, got {c}"
        )));
    }
    let lemma3 = to_f64(LEMMA3_BOUND);
    let lemma4 = to_f64(LEMMA4_BOUND);
    let upper = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let zv = draw_in_region(c, ZSampler::Wide, seed, k, ZVector::in_lemma2_region)?;
            let rt = ratio_truncated(&zv, 4);
            let rt0 = ratio_truncated(&zv.with_z1(0.0), 4);
            Ok((rt.min(rt0) - lemma3, ratio_r(&zv) - rt))
        })
        .collect::<Result<Vec<_>>>()?;
    // Separate streams for the second region.
    let lower = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let zv = draw_in_region(
                c,
                ZSampler::HighRate,
                seed ^ 0x9e37_79b9_7f4a_7c15,
                k,
                |z| !z.in_lemma2_region(),
            )?;
            let rt = ratio_truncated(&zv, 4);
            Ok((rt - lemma4, ratio_r(&zv) - rt))
        })
        .collect::<Result<Vec<_>>>()?;
    let dominance: Vec<f64> = upper.iter().chain(&lower).map(|m| m.1).collect();
    let first = |v: &[(f64, f64)]| v.iter().map(|m| m.0).collect::<Vec<_>>();
    Ok(vec![
        AuditReport::from_margins("lemma3", &first(&upper), BOUND_TOLERANCE)
            .detail("C", json!(c))
            .detail("bound", json!(LEMMA3_BOUND.to_string())),
        AuditReport::from_margins("lemma4", &first(&lower), BOUND_TOLERANCE)
            .detail("C", json!(c))
            .detail("bound", json!(LEMMA4_BOUND.to_string())),
        AuditReport::from_margins("r_dominates_r_tilde", &dominance, 1e-12).detail("C", json!(c)),
    ])
}

/// `H(C) = (C−1)⁴ / Σ_{i=1}^4 a_i (C−1)^{4−i}`, exactly.
pub fn h_value(c: usize) -> Result<Rational64> {
    if !(4..=10_000).contains(&c) {
        return Err(PricingError::Domain(format!(
            "H(C) is evaluated for 4 ≤ C ≤ 10000, got {c}"
        )));
    }
    let c = c as i64;
    let m = c - 1;
    let mut a = 1i64;
    let mut den = 0i64;
    for i in 1..=4u32 {
        a *= c - i as i64 + 1;
        den += a * m.pow(4 - i);
    }
    Ok(Rational64::new(m.pow(4), den))
}

/// Exact checks: `H(4) = 27/104`, `1/(H(4)+1) = 104/131`, `H` nonincreasing
/// up to `c_max`, `30/38 = 15/19` and `min{104/131, 6/7} ≥ 15/19`.
pub fn audit_h(c_max: usize) -> Result<AuditReport> {
    if c_max < 4 {
        return Err(PricingError::Domain(format!(
            "C_max must be at least 4, got {c_max}"
        )));
    }
    let one = Rational64::from_integer(1);
    let table = (4..=c_max).map(h_value).collect::<Result<Vec<_>>>()?;
    let mut margins = Vec::new();
    let exact = |ok: bool| if ok { 0.0 } else { -1.0 };
    margins.push(exact(table[0] == H4));
    margins.push(exact(one / (table[0] + one) == LEMMA3_BOUND));
    margins.push(exact(C3_FLOOR_UNREDUCED == THEOREM1_FLOOR));
    margins.push(exact(LEMMA3_BOUND.min(LEMMA4_BOUND) >= THEOREM1_FLOOR));
    for w in table.windows(2) {
        margins.push(to_f64(w[0] - w[1]));
    }
    let entries: Vec<Value> = table
        .iter()
        .enumerate()
        .map(|(k, h)| json!({"C": k + 4, "H": h.to_string(), "value": to_f64(*h)}))
        .collect();
    Ok(AuditReport::from_margins("lemma3_H", &margins, 0.0)
        .detail("H", Value::Array(entries))
        .detail(
            "inverse_H4_plus_1",
            json!((one / (table[0] + one)).to_string()),
        ))
}

/// `R(z₁, z₂)` for two units, as an explicit rational function.
pub fn c2_ratio(z1: f64, z2: f64) -> f64 {
    let num = z1 * z1 + 4.0 * z1 * z2 + 3.0 * z1 + 4.0 * z2 * z2 + 6.0 * z2 + 2.0;
    let den = z1 * z1 + 4.0 * z1 * z2 + 2.0 * z1 + 5.0 * z2 * z2 + 6.0 * z2 + 2.0;
    num / den
}

/// `(√7 − 1)/3`, where the two-unit analysis splits.
pub fn c2_split_point() -> f64 {
    (7f64.sqrt() - 1.0) / 3.0
}

/// Two-unit linear-demand parameters: `β = (p(λ₁*) − c)/(γμ)` with
/// `γ = −p′ = 1/a`, and `z₂ = λ₂*/μ`. Both are dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2Params {
    pub beta: f64,
    pub z2: f64,
}

impl C2Params {
    pub fn new(beta: f64, z2: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0 && z2.is_finite() && z2 >= 0.0) {
            return Err(PricingError::InvalidInput(format!(
                "β and z₂ must be finite and nonnegative, got ({beta}, {z2})"
            )));
        }
        Ok(C2Params { beta, z2 })
    }
}

/// `g(β, z₂) = √((z₂+1)² + βz₂(z₂+2)) − (z₂+1)`, the optimality lower bound
/// on `z₁`.
pub fn c2_g(p: &C2Params) -> f64 {
    let base = p.z2 + 1.0;
    let extra = p.beta * p.z2 * (p.z2 + 2.0);
    // Rationalized to avoid cancellation.
    extra / ((base * base + extra).sqrt() + base)
}

/// `G(β, z₂)` with `R(g(β, z₂), z₂) = 1 − G(β, z₂)`.
pub fn c2_big_g(p: &C2Params) -> f64 {
    let (b, z) = (p.beta, p.z2);
    let a = ((1.0 + b) * z * z + 2.0 * (1.0 + b) * z + 1.0).sqrt();
    let num = z * z + z + 1.0 - a;
    let den = (3.0 + b) * z * z + (2.0 * b + 4.0) * z + 2.0 * z * a + 2.0;
    num / den
}

/// `h(β) = G(β, √(2β))`.
pub fn c2_h(beta: f64) -> f64 {
    c2_big_g(&C2Params {
        beta,
        z2: (2.0 * beta).sqrt(),
    })
}

fn theta_polynomial(t: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    // Degree-12 polynomial divided by θ, highest power first.
    let coeffs = [
        16.0,
        56.0 * s,
        210.0,
        244.0 * s,
        316.0,
        96.0 * s,
        -18.0,
        -36.0 * s,
        -36.0,
        -48.0 * s,
        -66.0,
        -12.0 * s,
    ];
    coeffs.iter().fold(0.0, |acc, c| acc * t + c)
}

/// Central difference of `h` at `β`.
pub fn c2_h_slope(beta: f64) -> f64 {
    let step = 1e-6 * beta.max(1.0);
    (c2_h(beta + step) - c2_h(beta - step)) / (2.0 * step)
}

/// Positive real root `θ*` of the first-order condition for `max h`;
/// `β* = θ*²`.
pub fn theta_star() -> f64 {
    let (mut lo, mut hi) = (0.5, 1.0);
    debug_assert!(theta_polynomial(lo) < 0.0 && theta_polynomial(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if theta_polynomial(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Grid over `(β, z₂)` for the bound on `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GGrid {
    pub beta_points: usize,
    pub z2_points: usize,
    pub beta_max: f64,
}

impl Default for GGrid {
    fn default() -> Self {
        GGrid {
            beta_points: 4000,
            z2_points: 250,
            beta_max: 20.0,
        }
    }
}

/// `G(β, z₂) ≤ 0.0433` over `β ∈ (0, β_max]`, `z₂ ∈ [(√7−1)/3, √(2β)]`, with the
/// grid maximum, the maximizer of `h`, and `θ*`.
pub fn audit_lemma6(grid: &GGrid) -> Result<AuditReport> {
    if grid.beta_points < 2 || grid.z2_points < 2 || grid.beta_max.is_nan() || grid.beta_max <= 0.0 {
        return Err(PricingError::InvalidInput(
            "G grid needs at least 2×2 points".into(),
        ));
    }
    let bound = to_f64(LEMMA6_BOUND);
    let z_lo = c2_split_point();
    let rows: Vec<(Vec<f64>, (f64, f64, f64))> = (1..=grid.beta_points)
        .into_par_iter()
        .map(|k| {
            let beta = grid.beta_max * k as f64 / grid.beta_points as f64;
            let z_hi = (2.0 * beta).sqrt();
            let mut margins = Vec::new();
            let mut best = (f64::NEG_INFINITY, beta, f64::NAN);
            if z_hi >= z_lo {
                for j in 0..grid.z2_points {
                    let z2 = z_lo + (z_hi - z_lo) * j as f64 / (grid.z2_points - 1) as f64;
                    let g = c2_big_g(&C2Params { beta, z2 });
                    margins.push(bound - g);
                    if g > best.0 {
                        best = (g, beta, z2);
                    }
                }
            }
            (margins, best)
        })
        .collect();
    let margins: Vec<f64> = rows.iter().flat_map(|r| r.0.iter().copied()).collect();
    let best = rows
        .iter()
        .map(|r| r.1)
        .fold((f64::NEG_INFINITY, f64::NAN, f64::NAN), |a, b| {
            if b.0 > a.0 {
                b
            } else {
                a
            }
        });
    let (beta_h, h_max) = golden_section_max(c2_h, 0.05, 5.0, 1e-12);
    let theta = theta_star();
    Ok(AuditReport::from_margins("lemma6", &margins, 0.0)
        .detail("grid_max_G", json!(best.0))
        .detail("grid_argmax_beta", json!(best.1))
        .detail("grid_argmax_z2", json!(best.2))
        .detail("h_max", json!(h_max))
        .detail("h_argmax_beta", json!(beta_h))
        .detail("theta_star", json!(theta))
        .detail("beta_star", json!(theta * theta))
        .detail("h_slope_at_beta_star", json!(c2_h_slope(theta * theta))))
}

/// Grid size for the monotonicity checks of the two-unit `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Grid {
    pub points_per_axis: usize,
}

impl Default for Theorem2Grid {
    fn default() -> Self {
        Theorem2Grid {
            points_per_axis: 100,
        }
    }
}

/// Expected value of `R(0, (√7−1)/3)` and its tolerance.
pub const SPLIT_RATIO: f64 = 0.9557;
pub const SPLIT_RATIO_TOLERANCE: f64 = 5e-4;

/// The two-unit profit analysis: `R` increasing in `z₁` (for `z₁ ≤ z₂²`) and
/// decreasing in `z₂`, the value at the case split, and the optimality
/// constraints `z₁ ≥ g(β, z₂)`, `z₂ ≤ √(2β)` on solved instances (two units,
/// linear demand, profit only).
pub fn audit_theorem2_region(
    grid: &Theorem2Grid,
    instances: &[Instance],
) -> Result<Vec<AuditReport>> {
    let n = grid.points_per_axis;
    if n < 2 {
        return Err(PricingError::InvalidInput(
            "grid needs at least 2 points per axis".into(),
        ));
    }
    let axis = |k: usize| 10f64.powf(-3.0 + 6.0 * k as f64 / (n - 1) as f64);
    let mut dz1 = Vec::with_capacity(n * n);
    let mut dz2 = Vec::with_capacity(n * (n + 1));
    for k in 0..n {
        let z2 = axis(k);
        for j in 0..n {
            let z1 = z2 * z2 * j as f64 / (n - 1) as f64;
            dz1.push(fd_slope(|t| c2_ratio(t, z2), z1));
        }
        for z1 in std::iter::once(0.0).chain((0..n).map(axis)) {
            dz2.push(-fd_slope(|t| c2_ratio(z1, t), z2));
        }
    }
    let split = c2_ratio(0.0, c2_split_point());
    let split_margin = SPLIT_RATIO_TOLERANCE - (split - SPLIT_RATIO).abs();

    let lemma5 = instances
        .par_iter()
        .map(lemma5_margin)
        .collect::<Result<Vec<f64>>>()?;

    Ok(vec![
        AuditReport::from_margins("theorem2_increasing_z1", &dz1, DERIVATIVE_TOLERANCE),
        AuditReport::from_margins("theorem2_decreasing_z2", &dz2, DERIVATIVE_TOLERANCE),
        AuditReport::from_margins("theorem2_split_value", &[split_margin], 0.0)
            .detail("z2", json!(c2_split_point()))
            .detail("R", json!(split)),
        AuditReport::from_margins("lemma5", &lemma5, LEMMA5_TOLERANCE),
    ])
}

/// Relative slack allowed on the optimality constraints.
pub const LEMMA5_TOLERANCE: f64 = 1e-6;

/// `β` and `z` for a solved two-unit linear-demand profit instance.
pub fn lemma5_point(inst: &Instance) -> Result<(C2Params, ZVector)> {
    let a = match (inst.curve, inst.capacity) {
        (DemandCurve::Linear { a, .. }, 2) if inst.weights.alpha1 == 1.0 => a,
        _ => {
            return Err(PricingError::InvalidInput(format!(
                "the optimality constraints need C = 2, linear demand and profit weights; got C = {}, {} demand",
                inst.capacity,
                inst.curve.family()
            )))
        }
    };
    debug_assert_eq!(inst.curve.family(), DemandFamily::Linear);
    let sol = solve_dynamic(inst, &MdpConfig::default())?;
    let zv = z_from_policy(inst, &sol.policy);
    let p1 = inst.curve.price_unchecked(sol.policy.rate(1));
    let params = C2Params::new(((p1 - inst.cost) * a / inst.mu).max(0.0), zv.get(2))?;
    Ok((params, zv))
}

fn lemma5_margin(inst: &Instance) -> Result<f64> {
    let (p, zv) = lemma5_point(inst)?;
    let g = c2_g(&p);
    let cap = (2.0 * p.beta).sqrt();
    Ok(((zv.get(1) - g) / g.max(1.0)).min((cap - p.z2) / cap.max(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Weights;
    use rand::SeedableRng;

    #[test]
    fn z_from_policy_examples() {
        let inst = Instance::new(
            2,
            1.0,
            0.0,
            Weights::PROFIT,
            DemandCurve::Linear { a: 1.0, b: 2.0 },
            None,
        )
        .unwrap();
        let zv = z_from_policy(&inst, &Policy::new(&inst, vec![1.0, 2.0]).unwrap());
        assert_eq!(zv.z(), &[2.0, 2.0]);
        let zv = z_from_policy(&inst, &Policy::constant(&inst, 1.0).unwrap());
        assert_eq!(zv.z(), &[1.0, 1.0]);
        let zv = z_from_policy(&inst, &Policy::new(&inst, vec![0.0, 2.0]).unwrap());
        assert_eq!(zv.get(1), 0.0);
        assert_eq!(zv.get(3), 1.0);
    }

    #[test]
    fn falling_factorials_small() {
        assert_eq!(falling_factorials(4), vec![1.0, 4.0, 12.0, 24.0, 24.0]);
    }

    #[test]
    fn single_unit_ratio_is_one() {
        for z in [1e-6, 0.3, 1.0, 7.0, 1e8] {
            assert!((ratio_r(&ZVector::new(vec![z]).unwrap()) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_unit_ratio_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let z1 = 10f64.powf(rng.gen_range(-3.0..4.0));
            let z2 = 10f64.powf(rng.gen_range(-3.0..4.0));
            let r = ratio_r(&ZVector::new(vec![z1, z2]).unwrap());
            assert!((r - c2_ratio(z1, z2)).abs() < 1e-12, "{z1} {z2}");
        }
        let r = ratio_r(&ZVector::new(vec![0.0, 1e6]).unwrap());
        assert!((r - 0.8).abs() < 1e-5);
    }

    #[test]
    fn three_unit_limit_is_fifteen_nineteenths() {
        let r = ratio_r(&ZVector::new(vec![0.0, 1e6, 1e3]).unwrap());
        assert!((r - 15.0 / 19.0).abs() < 0.02, "{r}");
    }

    #[test]
    fn degenerate_zero_vector() {
        assert_eq!(ratio_r(&ZVector::new(vec![0.0; 3]).unwrap()), 1.0);
    }

    #[test]
    fn r_tilde_needs_four_units() {
        let zv = ZVector::new(vec![1.0; 3]).unwrap();
        assert!(matches!(ratio_r_tilde(&zv), Err(PricingError::Domain(_))));
        let zv = ZVector::new(vec![1.0; 4]).unwrap();
        // For C = 4 nothing is truncated.
        assert!((ratio_r_tilde(&zv).unwrap() - ratio_r(&zv)).abs() < 1e-15);
    }

    #[test]
    fn sampler_respects_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for c in [2, 4, 6] {
            for s in [ZSampler::Wide, ZSampler::HighRate] {
                for _ in 0..200 {
                    assert!(sample_lemma1_z(c, s, &mut rng).is_lemma1_consistent());
                }
            }
        }
        let bad = ZVector::from_ratios(&[5.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(!bad.is_lemma1_consistent());
    }

    #[test]
    fn h_exact_values() {
        assert_eq!(h_value(4).unwrap(), Rational64::new(27, 104));
        assert!(h_value(5).unwrap() < h_value(4).unwrap());
        let one = Rational64::from_integer(1);
        assert_eq!(one / (h_value(4).unwrap() + one), Rational64::new(104, 131));
        assert!(h_value(3).is_err());
        assert!(audit_h(30).unwrap().passed());
    }

    #[test]
    fn g_examples() {
        assert_eq!(c2_g(&C2Params::new(0.0, 3.0).unwrap()), 0.0);
        assert_eq!(c2_g(&C2Params::new(2.0, 0.0).unwrap()), 0.0);
        let g = c2_g(&C2Params::new(1.0, 1.0).unwrap());
        assert!((g - (7f64.sqrt() - 2.0)).abs() < 1e-15);
        assert!(C2Params::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn big_g_is_one_minus_ratio_at_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let p = C2Params::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0)).unwrap();
            let r = c2_ratio(c2_g(&p), p.z2);
            assert!((r - (1.0 - c2_big_g(&p))).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn theta_root() {
        let t = theta_star();
        assert!((t - 0.768987).abs() < 1e-6);
        assert!((t * t - 0.591341).abs() < 1e-6);
        // θ* is a stationary point of h, and h rises before it and falls after.
        assert!(c2_h_slope(t * t).abs() < 1e-7);
        assert!(c2_h_slope(0.1) > 0.1 && c2_h_slope(1.0) < 0.0);
        assert!((c2_h(t * t) - 0.0432916).abs() < 1e-7);
    }

    #[test]
    fn split_value() {
        assert!((c2_ratio(0.0, c2_split_point()) - 0.9557).abs() < 5e-4);
    }

    #[test]
    fn report_json_shape() {
        let r = AuditReport::from_margins("x", &[0.5, -1.0], 0.0);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["lemma"], "x");
        assert_eq!(v["samples"], 2);
        assert_eq!(v["violations"], 1);
        assert_eq!(v["worst_margin"], -1.0);
    }
}
