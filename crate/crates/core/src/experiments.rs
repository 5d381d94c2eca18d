//! Experiment plans, metrics, parallel sweeps, aggregation, and CSV I/O.
//!
//! A plan expands to `policies x alpha_grid x repeats` runs. Each run's seed
//! is a pure function of the plan's seed base and the run's indices, and
//! results are collected in index order, so output does not depend on how
//! many workers execute the plan.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacker::Strategy;
use crate::defense::{DefenseConfig, Policy, WindowTrace};
use crate::error::{Error, Result};
use crate::mining::{MiningConfig, DEFAULT_BLOCKS_PER_RUN};
use crate::sim::{self, splitmix64, DsCounting, RunConfig};

pub const DEFAULT_SEED_BASE: u64 = 20_240_601;
pub const DEFAULT_REPEATS: u32 = 50;

// ---------------------------------------------------------------- metrics

/// Selfish share of the main chain, in percent.
pub fn relative_revenue(selfish_wins: u64, honest_wins: u64) -> Result<f64> {
    let total = selfish_wins + honest_wins;
    if total == 0 {
        return Err(Error::invalid("main chain", "no blocks to share"));
    }
    Ok(100.0 * selfish_wins as f64 / total as f64)
}

/// Best relative revenue fraction an attacker with `alpha` can reach.
pub fn upper_bound(alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} not in [0, 1)")));
    }
    Ok(alpha / (1.0 - alpha))
}

/// Merchant wait for `avg_z` confirmations at ten minutes per block.
pub fn hours_to_wait(avg_z: f64) -> f64 {
    avg_z * 10.0 / 60.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    At(f64),
    /// Revenue never beats the hash share on the grid.
    AboveGrid,
}

impl std::fmt::Display for Threshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Threshold::At(a) => write!(f, "{a:.4}"),
            Threshold::AboveGrid => f.write_str("above grid"),
        }
    }
}

/// Smallest alpha at which `revenue_pct / 100 > alpha`, interpolated
/// linearly between the bracketing grid points. `curve` holds
/// `(alpha, mean revenue %)` sorted by alpha.
pub fn profit_threshold(curve: &[(f64, f64)]) -> Result<Threshold> {
    if curve.len() < 2
        || curve
            .windows(2)
            .any(|w| w[0].0.is_nan() || w[1].0.is_nan() || w[0].0 >= w[1].0)
    {
        return Err(Error::InvalidCurve);
    }
    let excess = |&(a, rev): &(f64, f64)| rev / 100.0 - a;
    let Some(i) = curve.iter().position(|p| excess(p) > 0.0) else {
        return Ok(Threshold::AboveGrid);
    };
    if i == 0 {
        return Ok(Threshold::At(curve[0].0));
    }
    let (a0, a1) = (curve[i - 1].0, curve[i].0);
    let (e0, e1) = (excess(&curve[i - 1]), excess(&curve[i]));
    Ok(Threshold::At(a0 + (a1 - a0) * (-e0) / (e1 - e0)))
}

// ---------------------------------------------------------------- plans

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    SelfishMining,
    DoubleSpending,
    TauSensitivity,
    WindowSensitivity,
}

impl SweepKind {
    pub fn default_alpha_grid(self) -> Vec<f64> {
        match self {
            SweepKind::SelfishMining => grid(0.20, 0.02, 16),
            _ => grid(0.20, 0.05, 6),
        }
    }
}

/// `n` points from `start` in steps of `step`, rounded to six decimals so
/// grid values print cleanly.
pub fn grid(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| ((start + step * i as f64) * 1e6).round() / 1e6)
        .collect()
}

/// A policy entry in a plan: a bare name or a variant with overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Name(Policy),
    Variant(PolicyVariant),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyVariant {
    pub policy: Policy,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub tau_blocks: Option<u32>,
    #[serde(default)]
    pub window_taus: Option<u32>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub strategy: Option<Strategy>,
}

impl PolicySpec {
    pub fn policy(&self) -> Policy {
        match self {
            PolicySpec::Name(p) => *p,
            PolicySpec::Variant(v) => v.policy,
        }
    }

    /// Name written to the `policy` column.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Name(p) => p.name().to_string(),
            PolicySpec::Variant(v) => {
                if let Some(l) = &v.label {
                    return l.clone();
                }
                let mut s = v.policy.name().to_string();
                if v.tau_blocks.is_some() || v.window_taus.is_some() {
                    let d = DefenseConfig::default();
                    s += &format!(
                        "@tau{}w{}",
                        v.tau_blocks.unwrap_or(d.tau_blocks),
                        v.window_taus.unwrap_or(d.window_taus)
                    );
                }
                if let Some(g) = v.gamma {
                    s += &format!("@g{g}");
                }
                if let Some(st) = v.strategy {
                    s += match st {
                        Strategy::CombinedSm1 => "@sm1",
                        Strategy::ModifiedSm1 => "@msm1",
                    };
                }
                s
            }
        }
    }
}

impl From<Policy> for PolicySpec {
    fn from(p: Policy) -> Self {
        PolicySpec::Name(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub sweep_kind: SweepKind,
    pub policies: Vec<PolicySpec>,
    /// Sweep-kind default when absent.
    pub alpha_grid: Option<Vec<f64>>,
    pub gamma: f64,
    pub repeats: u32,
    pub blocks_per_run: u64,
    pub seed_base: u64,
    pub defense: DefenseConfig,
    pub release_inclusive: bool,
    pub ds_counting: DsCounting,
    /// Fill `wallTimeMs`; off by default so reruns stay byte-identical.
    pub record_wall_time: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            sweep_kind: SweepKind::SelfishMining,
            policies: Policy::ALL.into_iter().map(PolicySpec::from).collect(),
            alpha_grid: None,
            gamma: 0.0,
            repeats: DEFAULT_REPEATS,
            blocks_per_run: DEFAULT_BLOCKS_PER_RUN,
            seed_base: DEFAULT_SEED_BASE,
            defense: DefenseConfig::default(),
            release_inclusive: false,
            ds_counting: DsCounting::default(),
            record_wall_time: false,
        }
    }
}

pub const PRESETS: [&str; 6] = [
    "experiment1",
    "experiment1-10k",
    "experiment2",
    "experiment3a",
    "experiment3b",
    "baselines",
];

fn variants(policies: &[Policy], taus: &[u32], windows: &[u32]) -> Vec<PolicySpec> {
    let mut out = Vec::new();
    for &policy in policies {
        for &tau in taus {
            for &w in windows {
                out.push(PolicySpec::Variant(PolicyVariant {
                    policy,
                    label: None,
                    tau_blocks: Some(tau),
                    window_taus: Some(w),
                    gamma: None,
                    strategy: None,
                }));
            }
        }
    }
    out
}

impl ExperimentPlan {
    pub fn preset(name: &str) -> Result<Self> {
        let base = ExperimentPlan {
            name: name.to_string(),
            ..Default::default()
        };
        let defended = [Policy::Sdtla, Policy::Wvbm];
        let plan = match name {
            "experiment1" => base,
            "experiment1-10k" => ExperimentPlan {
                blocks_per_run: 10_000,
                ..base
            },
            "experiment2" => ExperimentPlan {
                sweep_kind: SweepKind::DoubleSpending,
                policies: vec![
                    Policy::None.into(),
                    Policy::Sdtla.into(),
                    Policy::Wvbm.into(),
                ],
                ..base
            },
            "experiment3a" => ExperimentPlan {
                sweep_kind: SweepKind::TauSensitivity,
                policies: variants(&defended, &[5, 9, 15], &[12]),
                ..base
            },
            "experiment3b" => ExperimentPlan {
                sweep_kind: SweepKind::WindowSensitivity,
                policies: variants(&defended, &[5], &[6, 12, 18]),
                ..base
            },
            "baselines" => ExperimentPlan {
                policies: vec![
                    Policy::None.into(),
                    PolicySpec::Variant(PolicyVariant {
                        policy: Policy::None,
                        label: None,
                        tau_blocks: None,
                        window_taus: None,
                        gamma: Some(0.5),
                        strategy: None,
                    }),
                    Policy::Uniform.into(),
                ],
                ..base
            },
            other => {
                return Err(Error::invalid(
                    "preset",
                    format!(
                        "unknown preset {other:?}; expected one of {}",
                        PRESETS.join(", ")
                    ),
                ))
            }
        };
        Ok(plan)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Plan {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.alpha_grid
            .clone()
            .unwrap_or_else(|| self.sweep_kind.default_alpha_grid())
    }

    pub fn run_count(&self) -> usize {
        self.policies.len() * self.alphas().len() * self.repeats as usize
    }

    /// Seed of run `(policy, alpha, repeat)`.
    pub fn run_seed(&self, policy_index: usize, alpha_index: usize, repeat: u32) -> u64 {
        let key = ((policy_index as u64) << 42) | ((alpha_index as u64) << 21) | repeat as u64;
        self.seed_base ^ splitmix64(key)
    }

    pub fn run_config(&self, policy_index: usize, alpha: f64, seed: u64) -> Result<RunConfig> {
        let spec = &self.policies[policy_index];
        let policy = spec.policy();
        let mut defense = self.defense.clone();
        let mut gamma = self.gamma;
        let mut strategy = policy.default_strategy();
        if let PolicySpec::Variant(v) = spec {
            defense.tau_blocks = v.tau_blocks.unwrap_or(defense.tau_blocks);
            defense.window_taus = v.window_taus.unwrap_or(defense.window_taus);
            gamma = v.gamma.unwrap_or(gamma);
            strategy = v.strategy.unwrap_or(strategy);
        }
        let mining = MiningConfig {
            blocks_per_run: self.blocks_per_run,
            ..MiningConfig::new(alpha, gamma, seed)?
        };
        let cfg = RunConfig {
            policy,
            mining,
            defense,
            strategy,
            release_inclusive: self.release_inclusive,
            ds_counting: self.ds_counting,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::invalid("policies", "must not be empty"));
        }
        if self.alphas().is_empty() {
            return Err(Error::invalid("alpha_grid", "must not be empty"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats", "must be at least 1"));
        }
        let mut labels: Vec<String> = self.policies.iter().map(PolicySpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("policies", "labels must be unique"));
        }
        for i in 0..self.policies.len() {
            for &a in &self.alphas() {
                self.run_config(i, a, 0)?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- records

/// One run's outputs; field order is the `results.csv` column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentRecord {
    pub policy: String,
    pub alpha: f64,
    pub gamma: f64,
    pub seed: u64,
    pub blocks: u64,
    pub selfish_win_blocks: u64,
    pub honest_win_blocks: u64,
    pub relative_revenue_pct: f64,
    pub ds_count: u64,
    pub avg_z: f64,
    pub avg_k: f64,
    pub weight_decisions: u64,
    pub height_decisions: u64,
    pub fork_stale_blocks: u64,
    pub upper_bound_pct: f64,
    pub wall_time_ms: u64,
}

/// One row of `windows.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WindowRow {
    pub policy: String,
    pub alpha: f64,
    pub seed: u64,
    pub repeat: u32,
    pub window_index: u32,
    pub end_block: u64,
    pub k: Option<u32>,
    pub z: u32,
    pub fork_stale_blocks: u64,
    pub weight_decisions: u64,
    pub height_decisions: u64,
    pub stale_rate_per_k: Option<f64>,
    pub stale_rate_per_z: f64,
    pub sbcr: f64,
    pub beta1: Option<bool>,
    pub beta2: Option<bool>,
    pub beta_k: Option<bool>,
    pub beta_z: Option<bool>,
    pub action_k: Option<String>,
    pub action_z: Option<String>,
    pub reset: bool,
    pub next_k: Option<u32>,
    pub next_z: u32,
}

impl WindowRow {
    pub fn from_trace(policy: &str, alpha: f64, seed: u64, repeat: u32, w: &WindowTrace) -> Self {
        Self {
            policy: policy.to_string(),
            alpha,
            seed,
            repeat,
            window_index: w.window_index,
            end_block: w.end_block,
            k: w.k,
            z: w.z,
            fork_stale_blocks: w.fork_stale_blocks,
            weight_decisions: w.weight_decisions,
            height_decisions: w.height_decisions,
            stale_rate_per_k: w.stale_rate_per_k,
            stale_rate_per_z: w.stale_rate_per_z,
            sbcr: w.sbcr,
            beta1: w.beta1,
            beta2: w.beta2,
            beta_k: w.beta_k,
            beta_z: w.beta_z,
            action_k: w.action_k.map(|a| format!("{a:?}")),
            action_z: w.action_z.map(|a| format!("{a:?}")),
            reset: w.reset,
            next_k: w.next_k,
            next_z: w.next_z,
        }
    }
}

/// Per-(policy, alpha) summary; `sd*` columns are sample standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AggregateRow {
    pub policy: String,
    pub alpha: f64,
    pub gamma: f64,
    pub runs: u64,
    pub mean_relative_revenue_pct: f64,
    pub sd_relative_revenue_pct: f64,
    pub mean_ds_count: f64,
    pub sd_ds_count: f64,
    pub mean_avg_z: f64,
    pub sd_avg_z: f64,
    pub mean_avg_k: f64,
    pub sd_avg_k: f64,
    pub mean_fork_stale_blocks: f64,
    pub mean_weight_decisions: f64,
    pub mean_height_decisions: f64,
    pub upper_bound_pct: f64,
    pub hours_to_wait: f64,
}

/// Sample mean and standard deviation (zero for fewer than two values).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Groups records by `(policy, alpha)`, sorted by policy label then alpha.
/// Within a group values are sorted before summing, so the result does not
/// depend on record order.
pub fn aggregate(records: &[ExperimentRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, u64), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.policy.clone(), r.alpha.to_bits()))
            .or_default()
            .push(r);
    }
    let mut rows: Vec<AggregateRow> = groups
        .into_values()
        .map(|mut g| {
            g.sort_by_key(|r| r.seed);
            let col = |f: fn(&ExperimentRecord) -> f64| g.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (rev, rev_sd) = mean_sd(&col(|r| r.relative_revenue_pct));
            let (ds, ds_sd) = mean_sd(&col(|r| r.ds_count as f64));
            let (z, z_sd) = mean_sd(&col(|r| r.avg_z));
            let (k, k_sd) = mean_sd(&col(|r| r.avg_k));
            let first = g[0];
            AggregateRow {
                policy: first.policy.clone(),
                alpha: first.alpha,
                gamma: first.gamma,
                runs: g.len() as u64,
                mean_relative_revenue_pct: rev,
                sd_relative_revenue_pct: rev_sd,
                mean_ds_count: ds,
                sd_ds_count: ds_sd,
                mean_avg_z: z,
                sd_avg_z: z_sd,
                mean_avg_k: k,
                sd_avg_k: k_sd,
                mean_fork_stale_blocks: mean_sd(&col(|r| r.fork_stale_blocks as f64)).0,
                mean_weight_decisions: mean_sd(&col(|r| r.weight_decisions as f64)).0,
                mean_height_decisions: mean_sd(&col(|r| r.height_decisions as f64)).0,
                upper_bound_pct: first.upper_bound_pct,
                hours_to_wait: hours_to_wait(z),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.policy.cmp(&b.policy).then(a.alpha.total_cmp(&b.alpha)));
    rows
}

/// Mean-revenue curve per policy label, ready for [`profit_threshold`].
pub fn revenue_curves(rows: &[AggregateRow]) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        curves
            .entry(r.policy.clone())
            .or_default()
            .push((r.alpha, r.mean_relative_revenue_pct));
    }
    for c in curves.values_mut() {
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    curves
}

// ---------------------------------------------------------------- running

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub records: Vec<ExperimentRecord>,
    pub windows: Vec<WindowRow>,
    pub aggregates: Vec<AggregateRow>,
}

struct RunTask {
    policy_index: usize,
    alpha: f64,
    repeat: u32,
    seed: u64,
}

fn execute(plan: &ExperimentPlan, task: &RunTask) -> Result<(ExperimentRecord, Vec<WindowRow>)> {
    let cfg = plan.run_config(task.policy_index, task.alpha, task.seed)?;
    let label = plan.policies[task.policy_index].label();
    run_one(&cfg, &label, task.repeat, plan.record_wall_time)
}

/// Executes one configured run and converts it to CSV rows. A panic inside
/// the run becomes [`Error::RunPanicked`] naming the seed.
pub fn run_one(
    cfg: &RunConfig,
    label: &str,
    repeat: u32,
    record_wall_time: bool,
) -> Result<(ExperimentRecord, Vec<WindowRow>)> {
    let (alpha, seed) = (cfg.mining.alpha, cfg.mining.seed);
    let started = Instant::now();
    let outcome = std::panic::catch_unwind(|| sim::run(cfg)).map_err(|payload| {
        let message = payload
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "unknown panic".into());
        Error::RunPanicked {
            policy: label.to_string(),
            alpha,
            seed,
            message,
        }
    })??;
    let wall_time_ms = if record_wall_time {
        started.elapsed().as_millis() as u64
    } else {
        0
    };
    let revenue =
        relative_revenue(outcome.selfish_win_blocks, outcome.honest_win_blocks).unwrap_or(0.0);
    let record = ExperimentRecord {
        policy: label.to_string(),
        alpha,
        gamma: cfg.mining.gamma,
        seed,
        blocks: outcome.blocks_mined,
        selfish_win_blocks: outcome.selfish_win_blocks,
        honest_win_blocks: outcome.honest_win_blocks,
        relative_revenue_pct: revenue,
        ds_count: outcome.ds_count,
        avg_z: outcome.avg_z,
        avg_k: outcome.avg_k,
        weight_decisions: outcome.weight_decisions,
        height_decisions: outcome.height_decisions,
        fork_stale_blocks: outcome.fork_stale_blocks,
        upper_bound_pct: 100.0 * upper_bound(alpha)?,
        wall_time_ms,
    };
    let windows = outcome
        .windows
        .iter()
        .map(|w| WindowRow::from_trace(label, alpha, seed, repeat, w))
        .collect();
    Ok((record, windows))
}

/// Runs every `(policy, alpha, repeat)` combination on `workers` threads
/// (`0` means one per core). Output order is plan order regardless.
pub fn run_plan(plan: &ExperimentPlan, workers: usize) -> Result<PlanOutput> {
    plan.validate()?;
    let alphas = plan.alphas();
    let mut tasks = Vec::with_capacity(plan.run_count());
    for policy_index in 0..plan.policies.len() {
        for (alpha_index, &alpha) in alphas.iter().enumerate() {
            for repeat in 0..plan.repeats {
                tasks.push(RunTask {
                    policy_index,
                    alpha,
                    repeat,
                    seed: plan.run_seed(policy_index, alpha_index, repeat),
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("parallel", e.to_string()))?;
    let results: Vec<Result<(ExperimentRecord, Vec<WindowRow>)>> =
        pool.install(|| tasks.par_iter().map(|t| execute(plan, t)).collect());
    let mut records = Vec::with_capacity(results.len());
    let mut windows = Vec::new();
    for r in results {
        let (rec, win) = r?;
        records.push(rec);
        windows.extend(win);
    }
    let aggregates = aggregate(&records);
    Ok(PlanOutput {
        records,
        windows,
        aggregates,
    })
}

// ---------------------------------------------------------------- csv

pub const RESULTS_FILE: &str = "results.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const WINDOWS_FILE: &str = "windows.csv";

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let message = match e.position() {
        Some(pos) => format!("row {}: {e}", pos.line()),
        None => e.to_string(),
    };
    Error::Csv {
        path: path.to_path_buf(),
        message,
    }
}

/// Writes `rows` with a header; the header is written even when empty.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(!rows.is_empty())
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    if rows.is_empty() {
        w.write_record(header).map_err(|e| csv_error(path, e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_error(path, e))?;
    Ok(rows)
}

pub const RESULTS_HEADER: [&str; 16] = [
    "policy",
    "alpha",
    "gamma",
    "seed",
    "blocks",
    "selfishWinBlocks",
    "honestWinBlocks",
    "relativeRevenuePct",
    "dsCount",
    "avgZ",
    "avgK",
    "weightDecisions",
    "heightDecisions",
    "forkStaleBlocks",
    "upperBoundPct",
    "wallTimeMs",
];

pub const AGGREGATE_HEADER: [&str; 17] = [
    "policy",
    "alpha",
    "gamma",
    "runs",
    "meanRelativeRevenuePct",
    "sdRelativeRevenuePct",
    "meanDsCount",
    "sdDsCount",
    "meanAvgZ",
    "sdAvgZ",
    "meanAvgK",
    "sdAvgK",
    "meanForkStaleBlocks",
    "meanWeightDecisions",
    "meanHeightDecisions",
    "upperBoundPct",
    "hoursToWait",
];

pub const WINDOWS_HEADER: [&str; 23] = [
    "policy",
    "alpha",
    "seed",
    "repeat",
    "windowIndex",
    "endBlock",
    "k",
    "z",
    "forkStaleBlocks",
    "weightDecisions",
    "heightDecisions",
    "staleRatePerK",
    "staleRatePerZ",
    "sbcr",
    "beta1",
    "beta2",
    "betaK",
    "betaZ",
    "actionK",
    "actionZ",
    "reset",
    "nextK",
    "nextZ",
];

pub fn write_results(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    write_csv(path, records, &RESULTS_HEADER)
}

/// Reads `results.csv`; an empty file or a header-only file is an error.
pub fn read_results(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.len() == 0 {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "file is empty".into(),
        });
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "row 1: header does not match the results schema".into(),
        });
    }
    let records: Vec<ExperimentRecord> = read_csv(path)?;
    if records.is_empty() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "no records".into(),
        });
    }
    Ok(records)
}

/// Writes the three output files into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, out: &PlanOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_results(&dir.join(RESULTS_FILE), &out.records)?;
    write_csv(
        &dir.join(AGGREGATE_FILE),
        &out.aggregates,
        &AGGREGATE_HEADER,
    )?;
    write_csv(&dir.join(WINDOWS_FILE), &out.windows, &WINDOWS_HEADER)?;
    Ok(())
}
