use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use reusable_pricing::dynamic_opt::{solve_dynamic, MdpConfig};
use reusable_pricing::experiments::{
    gap_decreasing, run_audits, run_sweep, solve_report, tightness_rows, to_csv, AuditConfig,
    Ranges, SolveConfig, Table1Record, Table2Record, TestbedSpec, DEFAULT_TIGHTNESS_MUS,
    TABLE1_FAMILIES, TABLE2_CAPACITIES,
};
use reusable_pricing::{
    validate_against_analytic, DemandFamily, Instance, Policy, PricingError, SimConfig,
    ValidationReport,
};

#[derive(Parser)]
#[command(
    name = "reusable-pricing",
    version,
    about = "Dynamic and static pricing of reusable resources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the seed of the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Overrides the instance, sample or replication count.
    #[arg(long, global = true, value_name = "N")]
    count: Option<usize>,

    /// Output file, stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal dynamic policy, static rates and their ratios for one instance.
    Solve,
    /// Worst-case profit ratios over random testbeds.
    Table1,
    /// Worst-case weighted and per-objective ratios for linear demand with
    /// random objective weights.
    Table2,
    /// Ratio of the constructed static rate on the three-unit tight family.
    Tightness,
    /// Runs the bound audits; exits with 1 on any violation.
    Audit,
    /// Simulates a policy and compares it with the analytic objectives.
    Simulate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug)]
enum CliError {
    BadInput(String),
    Rejected(String),
    AuditViolation,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::AuditViolation => 1,
            CliError::BadInput(_) => 2,
            CliError::Rejected(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::BadInput(m) => write!(f, "{m}"),
            CliError::Rejected(m) => write!(f, "{m}"),
            CliError::AuditViolation => write!(f, "audit found violations"),
        }
    }
}

impl From<PricingError> for CliError {
    fn from(e: PricingError) -> Self {
        match e {
            PricingError::Rejected(_) => CliError::Rejected(e.to_string()),
            _ => CliError::BadInput(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::BadInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))
}

fn optional_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    path.map_or_else(|| Ok(T::default()), read_config)
}

fn required_config<T: DeserializeOwned>(path: Option<&Path>, cmd: &str) -> CliResult<T> {
    let path = path.ok_or_else(|| CliError::BadInput(format!("{cmd} requires --config PATH")))?;
    read_config(path)
}

fn emit(out: Option<&Path>, body: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, body)
            .map_err(|e| CliError::BadInput(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> CliResult<String> {
    let s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::BadInput(format!("json: {e}")))?;
    Ok(s + "\n")
}

/// Testbed settings shared by both tables; every field is optional.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TableConfig {
    families: Option<Vec<DemandFamily>>,
    capacities: Option<Vec<usize>>,
    count: usize,
    seed: u64,
    ranges: Ranges,
    cost: f64,
    mdp: MdpConfig,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            families: None,
            capacities: None,
            count: 1000,
            seed: 0,
            ranges: Ranges::default(),
            cost: 0.0,
            mdp: MdpConfig::default(),
        }
    }
}

/// Default table capacities; 30, 40 and 50 units are available through a
/// config file.
const DEFAULT_TABLE1_CAPACITIES: [usize; 6] = [2, 3, 4, 5, 10, 20];

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TightnessConfig {
    mus: Vec<f64>,
}

impl Default for TightnessConfig {
    fn default() -> Self {
        TightnessConfig {
            mus: DEFAULT_TIGHTNESS_MUS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    instance: Instance,
    /// Defaults to the optimal dynamic policy.
    #[serde(default)]
    policy: Option<Vec<f64>>,
    horizon: f64,
    #[serde(default)]
    warmup: Option<f64>,
    #[serde(default = "default_replications")]
    replications: usize,
    #[serde(default)]
    seed: u64,
}

fn default_replications() -> usize {
    10
}

#[derive(Serialize)]
struct SimulateOutput {
    rates: Vec<f64>,
    config: SimConfig,
    passed: bool,
    report: ValidationReport,
}

#[derive(Serialize)]
struct MetricRow {
    metric: &'static str,
    analytic: f64,
    simulated: f64,
    std_error: f64,
    within_3_sigma: bool,
}

#[derive(Serialize)]
struct StateRow {
    state: usize,
    rate: f64,
    price: Option<f64>,
}

#[derive(Serialize)]
struct AuditRow<'a> {
    lemma: &'a str,
    samples: usize,
    violations: usize,
    worst_margin: f64,
}

fn solve(cli: &Cli) -> CliResult<String> {
    let cfg: SolveConfig = required_config(cli.config.as_deref(), "solve")?;
    let report = solve_report(&cfg)?;
    match cli.format {
        None => Ok(report.to_text()),
        Some(Format::Json) => json(&report),
        Some(Format::Csv) => {
            let rows: Vec<StateRow> = report
                .rates
                .iter()
                .zip(&report.prices)
                .enumerate()
                .map(|(i, (&rate, &price))| StateRow {
                    state: i + 1,
                    rate,
                    price,
                })
                .collect();
            Ok(to_csv(&rows)?)
        }
    }
}

fn table_config(cli: &Cli) -> CliResult<TableConfig> {
    let mut cfg: TableConfig = optional_config(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.count {
        cfg.count = n;
    }
    cfg.mdp.validate()?;
    Ok(cfg)
}

fn table1(cli: &Cli) -> CliResult<String> {
    let cfg = table_config(cli)?;
    let families = cfg
        .families
        .clone()
        .unwrap_or_else(|| TABLE1_FAMILIES.to_vec());
    let capacities = cfg
        .capacities
        .clone()
        .unwrap_or_else(|| DEFAULT_TABLE1_CAPACITIES.to_vec());
    let mut records = Vec::new();
    for family in families {
        let spec = TestbedSpec {
            ranges: cfg.ranges,
            cost: cfg.cost,
            ..TestbedSpec::table1(family, capacities.clone(), cfg.count, cfg.seed)
        };
        spec.validate()?;
        records.extend(run_sweep(&spec, &cfg.mdp)?.iter().map(Table1Record::from));
    }
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(to_csv(&records)?),
        Format::Json => json(&records),
    }
}

fn table2(cli: &Cli) -> CliResult<String> {
    let cfg = table_config(cli)?;
    if let Some(f) = &cfg.families {
        if f.as_slice() != [DemandFamily::Linear] {
            return Err(CliError::BadInput(
                "table2 is defined for linear demand only".into(),
            ));
        }
    }
    let capacities = cfg
        .capacities
        .clone()
        .unwrap_or_else(|| TABLE2_CAPACITIES.to_vec());
    let spec = TestbedSpec {
        ranges: cfg.ranges,
        cost: cfg.cost,
        ..TestbedSpec::table2(capacities, cfg.count, cfg.seed)
    };
    spec.validate()?;
    let records: Vec<Table2Record> = run_sweep(&spec, &cfg.mdp)?
        .iter()
        .map(Table2Record::from)
        .collect();
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(to_csv(&records)?),
        Format::Json => json(&records),
    }
}

fn tightness(cli: &Cli) -> CliResult<String> {
    let cfg: TightnessConfig = optional_config(cli.config.as_deref())?;
    if cfg.mus.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(CliError::BadInput("every mu must be positive".into()));
    }
    let rows = tightness_rows(&cfg.mus)?;
    if !gap_decreasing(&rows) {
        eprintln!("warning: the gap to 15/19 does not shrink monotonically as mu decreases");
    }
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(to_csv(&rows)?),
        Format::Json => json(&rows),
    }
}

fn audit(cli: &Cli) -> CliResult<(String, bool)> {
    let mut cfg: AuditConfig = optional_config(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.count {
        cfg.samples = n;
    }
    let summary = run_audits(&cfg)?;
    let body = match cli.format.unwrap_or(Format::Json) {
        Format::Json => json(&summary)?,
        Format::Csv => {
            let rows: Vec<AuditRow> = summary
                .reports
                .iter()
                .map(|r| AuditRow {
                    lemma: &r.lemma,
                    samples: r.samples,
                    violations: r.violations,
                    worst_margin: r.worst_margin,
                })
                .collect();
            to_csv(&rows)?
        }
    };
    Ok((body, summary.passed))
}

fn simulate(cli: &Cli) -> CliResult<String> {
    let cfg: SimulateConfig = required_config(cli.config.as_deref(), "simulate")?;
    let inst = &cfg.instance;
    let policy = match &cfg.policy {
        Some(rates) => Policy::new(inst, rates.clone())?,
        None => solve_dynamic(inst, &MdpConfig::default())?.policy,
    };
    let mut sim = SimConfig::new(
        cfg.horizon,
        cli.seed.unwrap_or(cfg.seed),
        cli.count.unwrap_or(cfg.replications),
    );
    if let Some(w) = cfg.warmup {
        sim.warmup = w;
    }
    let report = validate_against_analytic(inst, &policy, &sim)?;
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => json(&SimulateOutput {
            rates: policy.rates().to_vec(),
            config: sim,
            passed: report.passed(),
            report,
        }),
        Format::Csv => {
            let (a, m, se) = (
                &report.analytic,
                &report.estimate.mean,
                &report.estimate.std_error,
            );
            let rows = [
                MetricRow {
                    metric: "profit",
                    analytic: a.profit,
                    simulated: m.profit,
                    std_error: se.profit,
                    within_3_sigma: report.profit_ok,
                },
                MetricRow {
                    metric: "market_share",
                    analytic: a.market_share,
                    simulated: m.market_share,
                    std_error: se.market_share,
                    within_3_sigma: report.market_share_ok,
                },
                MetricRow {
                    metric: "service_level",
                    analytic: a.service_level,
                    simulated: m.service_level,
                    std_error: se.service_level,
                    within_3_sigma: report.service_level_ok,
                },
            ];
            Ok(to_csv(&rows)?)
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Solve => emit(out, &solve(cli)?),
        Command::Table1 => emit(out, &table1(cli)?),
        Command::Table2 => emit(out, &table2(cli)?),
        Command::Tightness => emit(out, &tightness(cli)?),
        Command::Simulate => emit(out, &simulate(cli)?),
        Command::Audit => {
            let (body, passed) = audit(cli)?;
            emit(out, &body)?;
            if passed {
                Ok(())
            } else {
                if out.is_some() {
                    eprint!("{body}");
                }
                Err(CliError::AuditViolation)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
