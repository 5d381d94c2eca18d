use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use forksim::attacker::Strategy;
use forksim::automata::Bounds;
use forksim::defense::{DefenseConfig, Policy};
use forksim::experiments::{
    self, aggregate, mean_sd, profit_threshold, revenue_curves, AggregateRow, ExperimentPlan,
    ExperimentRecord, PlanOutput, PolicySpec, PolicyVariant, PRESETS,
};
use forksim::sim::DsCounting;
use forksim::Error;

const SEED_ENV: &str = "FORKSIM_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "forksim",
    version,
    about = "Selfish-mining and double-spending race simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute one seeded run and write its record and window trace.
    Run(RunArgs),
    /// Execute a plan of runs and write results, aggregate, and window CSVs.
    Sweep(SweepArgs),
    /// Summarize a results CSV.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    None,
    Uniform,
    Sdtla,
    Wvbm,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::None => Policy::None,
            PolicyArg::Uniform => Policy::Uniform,
            PolicyArg::Sdtla => Policy::Sdtla,
            PolicyArg::Wvbm => Policy::Wvbm,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Sm1,
    ModifiedSm1,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DsCountingArg {
    Adopted,
    Opportunity,
}

impl From<DsCountingArg> for DsCounting {
    fn from(d: DsCountingArg) -> Self {
        match d {
            DsCountingArg::Adopted => DsCounting::Adopted,
            DsCountingArg::Opportunity => DsCounting::Opportunity,
        }
    }
}

fn alpha_value(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=0.5).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 0.5]"))
    }
}

fn unit_value(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "sdtla")]
    policy: PolicyArg,
    /// Selfish hash share.
    #[arg(long, default_value = "0.3", value_parser = alpha_value)]
    alpha: f64,
    /// Share of honest hash that mines on the attacker's tip during ties.
    #[arg(long, default_value = "0", value_parser = unit_value)]
    gamma: f64,
    #[arg(long, default_value_t = 1000)]
    blocks: u64,
    /// Run seed; falls back to FORKSIM_SEED, then a built-in default.
    #[arg(long)]
    seed: Option<u64>,
    /// Blocks per decision interval.
    #[arg(long, default_value_t = 5)]
    tau: u32,
    /// Decision intervals per time window.
    #[arg(long, default_value_t = 12)]
    window_taus: u32,
    #[arg(long, default_value_t = 1)]
    k_min: u32,
    #[arg(long, default_value_t = 3)]
    k_max: u32,
    /// Defaults to 3 for sdtla and 2 for wvbm.
    #[arg(long)]
    z_min: Option<u32>,
    /// Defaults to 24 for sdtla and 12 for wvbm.
    #[arg(long)]
    z_max: Option<u32>,
    /// Attacker strategy; defaults to modified-sm1 against sdtla, sm1 otherwise.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Release the private branch when the lead reaches K rather than exceeds it.
    #[arg(long)]
    modified_release_inclusive: bool,
    /// Let sdtla decide on length when the gap reaches K rather than exceeds it.
    #[arg(long)]
    length_rule_inclusive: bool,
    #[arg(long, value_enum, default_value = "adopted")]
    ds_counting: DsCountingArg,
    /// Output directory for results.csv and windows.csv.
    #[arg(long, default_value = "forksim-run")]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["plan", "preset"]))]
struct SweepArgs {
    /// JSON plan file.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Built-in plan: experiment1, experiment1-10k, experiment2, experiment3a, experiment3b, baselines.
    #[arg(long)]
    preset: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Overrides the plan's seed base and FORKSIM_SEED.
    #[arg(long)]
    seed_base: Option<u64>,
    /// Overrides the plan's repeat count.
    #[arg(long)]
    repeats: Option<u32>,
    /// Fill the wallTimeMs column (makes output timing-dependent).
    #[arg(long)]
    wall_time: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Metric {
    Threshold,
    Revenue,
    Ds,
    Avgz,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum Format {
    Text,
    Csv,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// results.csv written by `sweep` or `run`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "threshold")]
    metric: Metric,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let policy: Policy = a.policy.into();
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(experiments::DEFAULT_SEED_BASE),
    };
    let default_z = policy.default_z_bounds();
    let defense = DefenseConfig {
        tau_blocks: a.tau,
        window_taus: a.window_taus,
        k_bounds: Bounds {
            min: a.k_min,
            max: a.k_max,
        },
        z_bounds: Some(Bounds {
            min: a.z_min.unwrap_or(default_z.min),
            max: a.z_max.unwrap_or(default_z.max),
        }),
        length_rule_inclusive: a.length_rule_inclusive,
        ..DefenseConfig::default()
    };
    let strategy = a.strategy.map(|s| match s {
        StrategyArg::Sm1 => Strategy::CombinedSm1,
        StrategyArg::ModifiedSm1 => Strategy::ModifiedSm1,
    });
    let plan = ExperimentPlan {
        name: "run".into(),
        policies: vec![match strategy {
            None => PolicySpec::Name(policy),
            Some(s) => PolicySpec::Variant(PolicyVariant {
                policy,
                label: Some(policy.name().into()),
                tau_blocks: None,
                window_taus: None,
                gamma: None,
                strategy: Some(s),
            }),
        }],
        alpha_grid: Some(vec![a.alpha]),
        gamma: a.gamma,
        repeats: 1,
        blocks_per_run: a.blocks,
        seed_base: seed,
        defense,
        release_inclusive: a.modified_release_inclusive,
        ds_counting: a.ds_counting.into(),
        ..ExperimentPlan::default()
    };
    plan.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    // a single run uses the seed as given
    let cfg = plan.run_config(0, a.alpha, seed)?;
    let (record, windows) = experiments::run_one(&cfg, policy.name(), 0, false)?;
    let out = PlanOutput {
        aggregates: aggregate(std::slice::from_ref(&record)),
        records: vec![record],
        windows,
    };
    experiments::write_outputs(&a.out, &out)?;
    let r = &out.records[0];
    println!(
        "policy={} alpha={} seed={} revenue={:.2}% ds={} avgZ={:.2}",
        r.policy, r.alpha, r.seed, r.relative_revenue_pct, r.ds_count, r.avg_z
    );
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let mut plan = match (&a.plan, &a.preset) {
        (Some(path), _) => ExperimentPlan::from_json_file(path)?,
        (None, Some(name)) => ExperimentPlan::preset(name).map_err(|_| {
            Failure::Usage(format!(
                "unknown preset {name:?}; expected one of {}",
                PRESETS.join(", ")
            ))
        })?,
        (None, None) => unreachable!("clap requires a plan source"),
    };
    if let Some(s) = env_seed()? {
        plan.seed_base = s;
    }
    if let Some(s) = a.seed_base {
        plan.seed_base = s;
    }
    if let Some(r) = a.repeats {
        plan.repeats = r;
    }
    plan.record_wall_time |= a.wall_time;
    let out = experiments::run_plan(&plan, a.parallel)?;
    experiments::write_outputs(&a.out_dir, &out)?;
    print_table(&aggregate_table(&out.aggregates), Format::Text);
    eprintln!(
        "{} runs written to {}",
        out.records.len(),
        a.out_dir.display()
    );
    Ok(())
}

type Table = (Vec<&'static str>, Vec<Vec<String>>);

fn aggregate_table(rows: &[AggregateRow]) -> Table {
    let header = vec![
        "policy",
        "alpha",
        "runs",
        "revenuePct",
        "sdRevenuePct",
        "dsCount",
        "avgZ",
        "avgK",
    ];
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.policy.clone(),
                format!("{:.2}", r.alpha),
                r.runs.to_string(),
                format!("{:.3}", r.mean_relative_revenue_pct),
                format!("{:.3}", r.sd_relative_revenue_pct),
                format!("{:.3}", r.mean_ds_count),
                format!("{:.3}", r.mean_avg_z),
                format!("{:.3}", r.mean_avg_k),
            ]
        })
        .collect();
    (header, body)
}

fn print_table((header, body): &Table, format: Format) {
    if format == Format::Csv {
        println!("{}", header.join(","));
        for row in body {
            println!("{}", row.join(","));
        }
        return;
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    println!("{}", line(header.clone()));
    for row in body {
        println!("{}", line(row.iter().map(String::as_str).collect()));
    }
}

fn report_table(records: &[ExperimentRecord], metric: Metric) -> Table {
    let rows = aggregate(records);
    match metric {
        Metric::Threshold => {
            let mut body = Vec::new();
            for (policy, curve) in revenue_curves(&rows) {
                let cell = match profit_threshold(&curve) {
                    Ok(t) => t.to_string(),
                    Err(_) => "n/a".to_string(),
                };
                body.push(vec![policy, cell]);
            }
            (vec!["policy", "profitThreshold"], body)
        }
        Metric::Revenue => (
            vec![
                "policy",
                "alpha",
                "meanRelativeRevenuePct",
                "sdRelativeRevenuePct",
                "upperBoundPct",
            ],
            rows.iter()
                .map(|r| {
                    vec![
                        r.policy.clone(),
                        format!("{:.2}", r.alpha),
                        format!("{:.3}", r.mean_relative_revenue_pct),
                        format!("{:.3}", r.sd_relative_revenue_pct),
                        format!("{:.3}", r.upper_bound_pct),
                    ]
                })
                .collect(),
        ),
        Metric::Ds => (
            vec!["policy", "alpha", "meanDsCount", "sdDsCount"],
            rows.iter()
                .map(|r| {
                    vec![
                        r.policy.clone(),
                        format!("{:.2}", r.alpha),
                        format!("{:.3}", r.mean_ds_count),
                        format!("{:.3}", r.sd_ds_count),
                    ]
                })
                .collect(),
        ),
        Metric::Avgz => {
            let mut by_policy: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
            for r in records {
                by_policy.entry(&r.policy).or_default().push(r.avg_z);
            }
            let body = by_policy
                .into_iter()
                .map(|(policy, zs)| {
                    let (m, sd) = mean_sd(&zs);
                    vec![
                        policy.to_string(),
                        format!("{m:.3}"),
                        format!("{sd:.3}"),
                        format!("{:.3}", experiments::hours_to_wait(m)),
                    ]
                })
                .collect();
            (vec!["policy", "meanAvgZ", "sdAvgZ", "hoursToWait"], body)
        }
    }
}

fn cmd_report(a: ReportArgs) -> Result<(), Failure> {
    let records = experiments::read_results(Path::new(&a.input))?;
    let table = report_table(&records, a.metric);
    print_table(&table, a.format);
    Ok(())
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
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
