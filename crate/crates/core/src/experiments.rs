//! Batch studies: random testbeds and worst-case ratio sweeps, the tightness
//! family, the audit suite, and single-instance reports.

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Dirichlet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{DemandCurve, DemandFamily, Weights};
use crate::dynamic_opt::{solve_dynamic, DynamicSolution, MdpConfig};
use crate::error::{PricingError, Result};
use crate::guarantee_lab::{
    audit_h, audit_lemma2, audit_lemma6, audit_r_tilde_bounds, audit_theorem2_region, ratio_r,
    to_f64, z_from_policy, AuditReport, GGrid, Theorem2Grid, THEOREM1_FLOOR,
};
use crate::loss_chain::{Instance, ObjectiveTriple, Policy};
use crate::static_policy::{ratio_report, Ratios};

/// Sampling ranges of the random testbed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ranges {
    /// Mean usage time `1/μ`.
    pub inv_mu: (f64, f64),
    pub a: (f64, f64),
    pub b: (f64, f64),
    /// Logistic inflection price.
    pub p0: (f64, f64),
}

impl Default for Ranges {
    fn default() -> Self {
        Ranges {
            inv_mu: (0.05, 50.0),
            a: (0.1, 5.0),
            b: (0.5, 10.0),
            p0: (0.0, 20.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum AlphaMode {
    Fixed {
        weights: Weights,
    },
    /// Uniform on the simplex.
    UniformSimplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestbedSpec {
    pub family: DemandFamily,
    pub capacities: Vec<usize>,
    /// Instances per capacity.
    pub count: usize,
    pub seed: u64,
    #[serde(default)]
    pub ranges: Ranges,
    pub alpha_mode: AlphaMode,
    /// Per-unit cost, zero in the standard testbed.
    #[serde(default)]
    pub cost: f64,
}

/// Capacities of the profit-only table.
pub const TABLE1_CAPACITIES: [usize; 9] = [2, 3, 4, 5, 10, 20, 30, 40, 50];
/// Capacities of the multi-objective table.
pub const TABLE2_CAPACITIES: [usize; 7] = [2, 3, 4, 5, 10, 15, 20];
pub const TABLE1_FAMILIES: [DemandFamily; 3] = [
    DemandFamily::Linear,
    DemandFamily::Exponential,
    DemandFamily::Logistic,
];

impl TestbedSpec {
    pub fn table1(family: DemandFamily, capacities: Vec<usize>, count: usize, seed: u64) -> Self {
        TestbedSpec {
            family,
            capacities,
            count,
            seed,
            ranges: Ranges::default(),
            alpha_mode: AlphaMode::Fixed {
                weights: Weights::PROFIT,
            },
            cost: 0.0,
        }
    }

    pub fn table2(capacities: Vec<usize>, count: usize, seed: u64) -> Self {
        TestbedSpec {
            family: DemandFamily::Linear,
            capacities,
            count,
            seed,
            ranges: Ranges::default(),
            alpha_mode: AlphaMode::UniformSimplex,
            cost: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == DemandFamily::Reciprocal {
            return Err(PricingError::InvalidInput(
                "the random testbed has no reciprocal family".into(),
            ));
        }
        if self.capacities.is_empty() || self.capacities.contains(&0) {
            return Err(PricingError::InvalidInput(
                "capacities must be a nonempty list of positive integers".into(),
            ));
        }
        if self.capacities.iter().any(|&c| c >= 1 << 24) || self.count >= 1 << 32 {
            return Err(PricingError::InvalidInput(
                "capacity or count too large".into(),
            ));
        }
        let r = &self.ranges;
        for (name, (lo, hi), min) in [
            ("inv_mu", r.inv_mu, f64::MIN_POSITIVE),
            ("a", r.a, f64::MIN_POSITIVE),
            ("b", r.b, f64::MIN_POSITIVE),
            ("p0", r.p0, 0.0),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= min && hi >= lo) {
                return Err(PricingError::InvalidInput(format!(
                    "range {name} = [{lo}, {hi}] is invalid"
                )));
            }
        }
        Ok(())
    }

    /// Instance `index` for capacity `c`, drawn from its own RNG stream so any
    /// instance can be regenerated in isolation.
    pub fn instance(&self, c: usize, index: usize) -> Result<Instance> {
        let family_tag = match self.family {
            DemandFamily::Linear => 0u64,
            DemandFamily::Exponential => 1,
            DemandFamily::Logistic => 2,
            DemandFamily::Reciprocal => 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((family_tag << 56) | ((c as u64) << 32) | index as u64);
        let r = &self.ranges;
        let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let mu = 1.0 / draw(r.inv_mu);
        let a = draw(r.a);
        let b = draw(r.b);
        let curve = match self.family {
            DemandFamily::Linear => DemandCurve::Linear { a, b },
            DemandFamily::Exponential => DemandCurve::Exponential { a, b },
            DemandFamily::Logistic => DemandCurve::Logistic {
                a,
                b,
                p0: draw(r.p0),
            },
            DemandFamily::Reciprocal => unreachable!("rejected by validate"),
        };
        let weights = match self.alpha_mode {
            AlphaMode::Fixed { weights } => weights,
            AlphaMode::UniformSimplex => {
                let d = Dirichlet::new(&[1.0, 1.0, 1.0]).expect("valid concentration");
                let w = d.sample(&mut rng);
                Weights::new(w[0], w[1], (1.0 - w[0] - w[1]).max(0.0))?
            }
        };
        Instance::new(c, mu, self.cost, weights, curve, None)
    }
}

/// Ratios of one testbed instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub capacity: usize,
    pub index: usize,
    pub weights: Weights,
    pub lambda_tilde: f64,
    pub lambda_best: f64,
    pub tilde: Ratios,
    pub best: Ratios,
    /// Smallest of the three objective ratios of `λ̃`.
    pub tilde_min_objective: f64,
}

fn solve_outcome(
    inst: &Instance,
    c: usize,
    index: usize,
    cfg: &MdpConfig,
) -> Result<InstanceOutcome> {
    let sol = solve_dynamic(inst, cfg).map_err(|e| match e {
        PricingError::Rejected(m) => PricingError::Rejected(format!("C = {c}, #{index}: {m}")),
        other => other,
    })?;
    let rep = ratio_report(inst, &sol)?;
    Ok(InstanceOutcome {
        capacity: c,
        index,
        weights: inst.weights,
        lambda_tilde: rep.lambda_tilde,
        lambda_best: rep.lambda_best,
        tilde: rep.ratios_tilde,
        best: rep.ratios_best,
        tilde_min_objective: rep.ratios_tilde.min_objective(),
    })
}

/// Solves every instance of the testbed for capacity `c`, in parallel.
pub fn run_capacity(spec: &TestbedSpec, c: usize, cfg: &MdpConfig) -> Result<Vec<InstanceOutcome>> {
    spec.validate()?;
    (0..spec.count)
        .into_par_iter()
        .map(|k| solve_outcome(&spec.instance(c, k)?, c, k, cfg))
        .collect()
}

/// Worst case over one `(family, C)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: DemandFamily,
    pub capacity: usize,
    pub instances: usize,
    /// Per-field minimum over instances.
    pub worst_tilde: Ratios,
    pub worst_best: Ratios,
    /// Index of the instance minimizing the `λ̃` profit ratio.
    pub argmin_tilde_profit: usize,
    /// Index of the instance minimizing the `λ̃` weighted ratio, and its weights.
    pub argmin_tilde_weighted: usize,
    pub argmin_tilde_weighted_alpha: Weights,
    /// Minimum over instances of the smallest `λ̃` objective ratio.
    pub worst_tilde_any_objective: f64,
}

fn field_min(outcomes: &[InstanceOutcome], f: impl Fn(&InstanceOutcome) -> f64) -> (f64, usize) {
    outcomes
        .iter()
        .map(|o| (f(o), o.index))
        .fold(
            (f64::INFINITY, usize::MAX),
            |a, b| if b.0 < a.0 { b } else { a },
        )
}

/// Aggregates outcomes into a row; order-independent up to ties, which go to
/// the lowest index.
pub fn summarize(family: DemandFamily, c: usize, outcomes: &[InstanceOutcome]) -> SweepRow {
    let mut sorted: Vec<&InstanceOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.index);
    let sorted: Vec<InstanceOutcome> = sorted.into_iter().cloned().collect();
    let worst = |pick: fn(&InstanceOutcome) -> &Ratios| Ratios {
        profit: field_min(&sorted, |o| pick(o).profit).0,
        market_share: field_min(&sorted, |o| pick(o).market_share).0,
        service_level: field_min(&sorted, |o| pick(o).service_level).0,
        weighted: field_min(&sorted, |o| pick(o).weighted).0,
    };
    let (_, argmin_p) = field_min(&sorted, |o| o.tilde.profit);
    let (_, argmin_w) = field_min(&sorted, |o| o.tilde.weighted);
    let alpha = sorted
        .iter()
        .find(|o| o.index == argmin_w)
        .map_or(Weights::PROFIT, |o| o.weights);
    SweepRow {
        family,
        capacity: c,
        instances: sorted.len(),
        worst_tilde: worst(|o| &o.tilde),
        worst_best: worst(|o| &o.best),
        argmin_tilde_profit: argmin_p,
        argmin_tilde_weighted: argmin_w,
        argmin_tilde_weighted_alpha: alpha,
        worst_tilde_any_objective: field_min(&sorted, |o| o.tilde_min_objective).0,
    }
}

/// One row per capacity of the spec.
pub fn run_sweep(spec: &TestbedSpec, cfg: &MdpConfig) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.capacities
        .iter()
        .map(|&c| Ok(summarize(spec.family, c, &run_capacity(spec, c, cfg)?)))
        .collect()
}

/// Flat CSV record of the profit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Record {
    pub family: DemandFamily,
    #[serde(rename = "C")]
    pub capacity: usize,
    pub instances: usize,
    pub worst_profit_ratio_tilde: f64,
    pub worst_profit_ratio_best: f64,
    pub argmin_tilde: usize,
}

impl From<&SweepRow> for Table1Record {
    fn from(r: &SweepRow) -> Self {
        Table1Record {
            family: r.family,
            capacity: r.capacity,
            instances: r.instances,
            worst_profit_ratio_tilde: r.worst_tilde.profit,
            worst_profit_ratio_best: r.worst_best.profit,
            argmin_tilde: r.argmin_tilde_profit,
        }
    }
}

/// Flat CSV record of the multi-objective table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Record {
    pub family: DemandFamily,
    #[serde(rename = "C")]
    pub capacity: usize,
    pub instances: usize,
    pub worst_weighted_ratio: f64,
    pub worst_profit_ratio: f64,
    pub worst_market_share_ratio: f64,
    pub worst_service_level_ratio: f64,
    pub worst_weighted_ratio_best: f64,
    pub argmin_weighted: usize,
    pub argmin_alpha1: f64,
    pub argmin_alpha2: f64,
    pub argmin_alpha3: f64,
}

impl From<&SweepRow> for Table2Record {
    fn from(r: &SweepRow) -> Self {
        let w = r.argmin_tilde_weighted_alpha;
        Table2Record {
            family: r.family,
            capacity: r.capacity,
            instances: r.instances,
            worst_weighted_ratio: r.worst_tilde.weighted,
            worst_profit_ratio: r.worst_tilde.profit,
            worst_market_share_ratio: r.worst_tilde.market_share,
            worst_service_level_ratio: r.worst_tilde.service_level,
            worst_weighted_ratio_best: r.worst_best.weighted,
            argmin_weighted: r.argmin_tilde_weighted,
            argmin_alpha1: w.alpha1,
            argmin_alpha2: w.alpha2,
            argmin_alpha3: w.alpha3,
        }
    }
}

/// Writes records as CSV with a header row.
pub fn to_csv<T: Serialize>(records: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)
            .map_err(|e| PricingError::InvalidInput(format!("csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| PricingError::InvalidInput(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// The three-unit instance whose `λ̃` service ratio approaches 15/19 as
/// `μ → 0`: reciprocal demand, service weight only, `Λ = 1`.
pub fn tightness_instance(mu: f64) -> Result<Instance> {
    Instance::new(
        3,
        mu,
        0.0,
        Weights::SERVICE_LEVEL,
        DemandCurve::Reciprocal,
        Some(1.0),
    )
}

/// The optimal policy `(0, Λ, Λ)` used as the benchmark in the tightness family.
pub fn tightness_policy(inst: &Instance) -> Result<Policy> {
    let l = inst.max_rate;
    Policy::new(inst, vec![0.0, l, l])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightnessRow {
    pub mu: f64,
    /// `R(z)` from the z-space formula.
    pub ratio: f64,
    /// The same ratio through the chain: service level of `λ̃` over that of
    /// the benchmark.
    pub chain_ratio: f64,
    pub gap: f64,
}

pub const DEFAULT_TIGHTNESS_MUS: [f64; 5] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];

pub fn tightness_rows(mus: &[f64]) -> Result<Vec<TightnessRow>> {
    let floor = to_f64(THEOREM1_FLOOR);
    mus.iter()
        .map(|&mu| {
            let inst = tightness_instance(mu)?;
            let sol = DynamicSolution::from_policy(&inst, tightness_policy(&inst)?);
            let ratio = ratio_r(&z_from_policy(&inst, &sol.policy));
            let chain_ratio = ratio_report(&inst, &sol)?.ratios_tilde.service_level;
            Ok(TightnessRow {
                mu,
                ratio,
                chain_ratio,
                gap: ratio - floor,
            })
        })
        .collect()
}

/// Whether the gap shrinks as `1/μ` grows.
pub fn gap_decreasing(rows: &[TightnessRow]) -> bool {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| b.mu.total_cmp(&a.mu));
    sorted.windows(2).all(|w| w[1].gap < w[0].gap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub seed: u64,
    pub samples: usize,
    pub lemma2_capacities: Vec<usize>,
    pub h_max_capacity: usize,
    pub g_grid: GGrid,
    pub theorem2_grid: Theorem2Grid,
    /// Solved two-unit linear profit instances for the optimality constraints.
    pub lemma5_instances: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            seed: 0,
            samples: 10_000,
            lemma2_capacities: vec![4, 5, 6],
            h_max_capacity: 50,
            g_grid: GGrid::default(),
            theorem2_grid: Theorem2Grid::default(),
            lemma5_instances: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub passed: bool,
    pub reports: Vec<AuditReport>,
}

/// Runs every bound audit.
pub fn run_audits(cfg: &AuditConfig) -> Result<AuditSummary> {
    let mut reports = Vec::new();
    for &c in &cfg.lemma2_capacities {
        reports.push(audit_lemma2(c, cfg.samples, cfg.seed)?);
        reports.extend(audit_r_tilde_bounds(c, cfg.samples, cfg.seed)?);
    }
    reports.push(audit_h(cfg.h_max_capacity)?);
    reports.push(audit_lemma6(&cfg.g_grid)?);
    let spec = TestbedSpec::table1(
        DemandFamily::Linear,
        vec![2],
        cfg.lemma5_instances,
        cfg.seed,
    );
    let insts = (0..cfg.lemma5_instances)
        .map(|k| spec.instance(2, k))
        .collect::<Result<Vec<_>>>()?;
    reports.extend(audit_theorem2_region(&cfg.theorem2_grid, &insts)?);
    Ok(AuditSummary {
        passed: reports.iter().all(AuditReport::passed),
        reports,
    })
}

/// Input of a single-instance report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub instance: Instance,
    #[serde(default)]
    pub mdp: Option<MdpConfig>,
    /// Alternative optimal policy to benchmark against; accepted only if its
    /// value matches the computed optimum.
    #[serde(default)]
    pub benchmark_policy: Option<Vec<f64>>,
}

/// Relative slack when accepting a supplied benchmark policy as optimal.
pub const BENCHMARK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub instance: Instance,
    pub rates: Vec<f64>,
    /// Prices inducing each rate; `None` where nothing is sold.
    pub prices: Vec<Option<f64>>,
    pub gain: f64,
    pub iterations: usize,
    pub benchmark_supplied: bool,
    pub lambda_tilde: f64,
    pub price_tilde: Option<f64>,
    pub lambda_best: f64,
    pub price_best: Option<f64>,
    pub optimal: ObjectiveTriple,
    pub tilde: ObjectiveTriple,
    pub best: ObjectiveTriple,
    pub ratios_tilde: Ratios,
    pub ratios_best: Ratios,
}

fn price(inst: &Instance, rate: f64) -> Option<f64> {
    if rate > 0.0 {
        inst.curve.price_at_rate(rate).ok()
    } else {
        None
    }
}

pub fn solve_report(cfg: &SolveConfig) -> Result<SolveReport> {
    let inst = &cfg.instance;
    let mdp = cfg.mdp.unwrap_or_default();
    let solved = solve_dynamic(inst, &mdp)?;
    let sol = match &cfg.benchmark_policy {
        None => solved.clone(),
        Some(rates) => {
            let cand = DynamicSolution::from_policy(inst, Policy::new(inst, rates.clone())?);
            let slack = BENCHMARK_TOLERANCE * solved.eta.abs().max(1.0);
            if (cand.eta - solved.eta).abs() > slack {
                return Err(PricingError::InvalidInput(format!(
                    "benchmark policy has value {} but the optimum is {}",
                    cand.eta, solved.eta
                )));
            }
            cand
        }
    };
    let rep = ratio_report(inst, &sol)?;
    Ok(SolveReport {
        instance: inst.clone(),
        rates: sol.policy.rates().to_vec(),
        prices: sol.policy.rates().iter().map(|&l| price(inst, l)).collect(),
        gain: sol.eta,
        iterations: solved.iterations,
        benchmark_supplied: cfg.benchmark_policy.is_some(),
        lambda_tilde: rep.lambda_tilde,
        price_tilde: price(inst, rep.lambda_tilde),
        lambda_best: rep.lambda_best,
        price_best: price(inst, rep.lambda_best),
        optimal: rep.optimal_value,
        tilde: rep.tilde_value,
        best: rep.best_value,
        ratios_tilde: rep.ratios_tilde,
        ratios_best: rep.ratios_best,
    })
}

impl SolveReport {
    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let opt = |p: Option<f64>| p.map_or("-".to_string(), |v| format!("{v:.6}"));
        let mut s = String::new();
        s.push_str(&format!(
            "C = {}  mu = {}  family = {}  gain = {:.9}  iterations = {}\n\n",
            self.instance.capacity,
            self.instance.mu,
            self.instance.curve.family(),
            self.gain,
            self.iterations
        ));
        s.push_str(&format!("{:>6} {:>14} {:>14}\n", "state", "rate", "price"));
        for (i, (r, p)) in self.rates.iter().zip(&self.prices).enumerate() {
            s.push_str(&format!("{:>6} {:>14.6} {:>14}\n", i + 1, r, opt(*p)));
        }
        s.push_str(&format!(
            "\n{:>12} {:>14} {:>14}\n{:>12} {:>14.6} {:>14.6}\n{:>12} {:>14} {:>14}\n\n",
            "",
            "lambda_tilde",
            "lambda_best",
            "rate",
            self.lambda_tilde,
            self.lambda_best,
            "price",
            opt(self.price_tilde),
            opt(self.price_best)
        ));
        s.push_str(&format!(
            "{:>14} {:>14} {:>14} {:>14} {:>10} {:>10}\n",
            "objective", "optimal", "tilde", "best", "r_tilde", "r_best"
        ));
        let rows = [
            (
                "profit",
                self.optimal.profit,
                self.tilde.profit,
                self.best.profit,
                self.ratios_tilde.profit,
                self.ratios_best.profit,
            ),
            (
                "market_share",
                self.optimal.market_share,
                self.tilde.market_share,
                self.best.market_share,
                self.ratios_tilde.market_share,
                self.ratios_best.market_share,
            ),
            (
                "service_level",
                self.optimal.service_level,
                self.tilde.service_level,
                self.best.service_level,
                self.ratios_tilde.service_level,
                self.ratios_best.service_level,
            ),
        ];
        for (name, o, t, b, rt, rb) in rows {
            s.push_str(&format!(
                "{name:>14} {o:>14.6} {t:>14.6} {b:>14.6} {rt:>10.6} {rb:>10.6}\n"
            ));
        }
        let w = &self.instance.weights;
        s.push_str(&format!(
            "{:>14} {:>14.6} {:>14.6} {:>14.6} {:>10.6} {:>10.6}\n",
            "weighted",
            self.optimal.weighted(w),
            self.tilde.weighted(w),
            self.best.weighted(w),
            self.ratios_tilde.weighted,
            self.ratios_best.weighted
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn testbed_is_deterministic_and_in_range() {
        let spec = TestbedSpec::table2(vec![3], 50, 11);
        for k in 0..50 {
            let a = spec.instance(3, k).unwrap();
            assert_eq!(a, spec.instance(3, k).unwrap());
            assert!((0.02..=20.0).contains(&a.mu));
            let DemandCurve::Linear { a: sa, b } = a.curve else {
                panic!("linear expected")
            };
            assert!((0.1..=5.0).contains(&sa) && (0.5..=10.0).contains(&b));
            assert_eq!(a.max_rate, b);
            let w = a.weights;
            assert!((w.alpha1 + w.alpha2 + w.alpha3 - 1.0).abs() < 1e-12);
        }
        assert_ne!(spec.instance(3, 0).unwrap(), spec.instance(3, 1).unwrap());
        assert_ne!(
            spec.instance(3, 0).unwrap().mu,
            spec.instance(4, 0).unwrap().mu
        );
    }

    #[test]
    fn testbed_rejects_bad_specs() {
        let mut spec = TestbedSpec::table1(DemandFamily::Reciprocal, vec![2], 1, 0);
        assert!(spec.validate().is_err());
        spec.family = DemandFamily::Linear;
        spec.capacities = vec![];
        assert!(spec.validate().is_err());
        spec.capacities = vec![2];
        spec.ranges.a = (1.0, 0.5);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn single_unit_row_is_all_ones() {
        let spec = TestbedSpec::table2(vec![1], 20, 3);
        let rows = run_sweep(&spec, &MdpConfig::default()).unwrap();
        let r = &rows[0].worst_tilde;
        for v in [r.profit, r.market_share, r.service_level, r.weighted] {
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn tightness_examples() {
        let rows = tightness_rows(&DEFAULT_TIGHTNESS_MUS).unwrap();
        assert!(gap_decreasing(&rows));
        for r in &rows {
            assert!((r.ratio - r.chain_ratio).abs() < 1e-9, "{r:?}");
        }
        assert!(rows[0].gap > 0.05);
        assert!(rows[3].gap.abs() <= 0.02);
    }

    #[test]
    fn csv_has_header() {
        let spec = TestbedSpec::table1(DemandFamily::Linear, vec![2], 5, 1);
        let rows = run_sweep(&spec, &MdpConfig::default()).unwrap();
        let recs: Vec<Table1Record> = rows.iter().map(Table1Record::from).collect();
        let text = to_csv(&recs).unwrap();
        assert!(text.starts_with(
            "family,C,instances,worst_profit_ratio_tilde,worst_profit_ratio_best,argmin_tilde\nlinear,2,5,"
        ));
    }

    #[test]
    fn benchmark_policy_must_be_optimal() {
        let inst = tightness_instance(0.1).unwrap();
        let ok = SolveConfig {
            instance: inst.clone(),
            mdp: None,
            benchmark_policy: Some(vec![0.0, 1.0, 1.0]),
        };
        let rep = solve_report(&ok).unwrap();
        assert!(rep.benchmark_supplied);
        assert!(rep.ratios_tilde.service_level < 1.0);
        let bad = SolveConfig {
            benchmark_policy: Some(vec![1.0, 1.0, 1.0]),
            ..ok
        };
        assert!(matches!(
            solve_report(&bad),
            Err(PricingError::InvalidInput(_))
        ));
    }

    #[test]
    fn report_text_lists_states() {
        let inst = Instance::new(
            2,
            1.0,
            0.0,
            Weights::PROFIT,
            DemandCurve::Linear { a: 1.0, b: 2.0 },
            None,
        )
        .unwrap();
        let rep = solve_report(&SolveConfig {
            instance: inst,
            mdp: None,
            benchmark_policy: None,
        })
        .unwrap();
        let text = rep.to_text();
        assert!(text.contains("lambda_tilde") && text.contains("service_level"));
        assert!(text.lines().any(|l| l.trim_start().starts_with("2 ")));
    }
}
