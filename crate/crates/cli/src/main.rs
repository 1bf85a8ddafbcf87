mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use ucpd::colgen::{harvest_unit_duals, CgConfig, CgStatus, CompareConfig, IntegerRmpStatus};
use ucpd::compact::{decode_integer_solution, solve_compact_relaxation, BuildOptions, Formulation};
use ucpd::model::{ModelError, GENERATOR_SLACK};
use ucpd::subproblem::{ConjectureReport, DualSource, TrialOutcome, UnitDuals};
use ucpd::{
    build_compact_with, cg_solve, check_conjecture, compare_bounds, generate_instance, integer_rmp_heuristic,
    read_instance, solve_ilp, write_instance, BnbOptions, ConjectureConfig, DemandProfile, GeneratorConfig, IlpStatus,
    Instance, LpStatus,
};

use report::{grid, num, opt, pairs, write_csv};

#[derive(Parser)]
#[command(name = "ucpd", version, about = "Discretized unit commitment: compact ILP, column generation, DP pricing")]
struct Cli {
    /// Worker threads for pricing and the integrality trials.
    #[arg(long, global = true, env = "UCPD_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance.
    Generate(GenerateArgs),
    /// Compute bounds of an instance.
    Solve(SolveArgs),
    /// Compare LP and ILP optima of single-unit pricing problems.
    Conjecture(ConjectureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    TwoPeak,
    Flat,
    Zero,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 80, value_parser = clap::value_parser!(u64).range(1..))]
    units: u64,
    #[arg(long, default_value_t = 96, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    /// Online operating points per unit.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    #[arg(long, value_enum, default_value_t = Profile::TwoPeak)]
    profile: Profile,
    /// Peak demand as a fraction of the fleet's top output.
    #[arg(long, default_value_t = 0.85)]
    utilisation: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    CompactLp,
    CompactIlp,
    Cg,
    All,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::All)]
    method: Method,
    /// Seconds allowed to column generation and to branch and bound.
    #[arg(long)]
    time_limit: Option<f64>,
    /// One-row CSV summary.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-iteration column generation CSV (method `cg`).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Leave wall-clock times out of the iteration log.
    #[arg(long)]
    no_timing: bool,
    /// Use the weak compact formulation (methods `compact-lp`, `compact-ilp`).
    #[arg(long)]
    weak: bool,
    /// Write the integer plans as JSON (methods `compact-ilp`, `cg` with `--integer-rmp`).
    #[arg(long)]
    plans: Option<PathBuf>,
    /// After column generation, solve the master with binary weights.
    #[arg(long)]
    integer_rmp: bool,
    #[arg(long, default_value_t = 5000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1)]
    columns_per_unit: usize,
    /// Weight of the previous duals in pricing, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    smoothing: f64,
    #[arg(long)]
    no_purge: bool,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["instance", "random_units"]))]
struct ConjectureArgs {
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Generate this many units instead of reading an instance.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    random_units: Option<u64>,
    /// Horizon of generated units.
    #[arg(long, default_value_t = 24, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    /// Operating points of generated units.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    /// Random dual vectors per unit.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Most column generation dual vectors replayed per unit.
    #[arg(long, default_value_t = 20)]
    harvest: usize,
    /// Use the weak formulation, whose relaxation is expected to be fractional.
    #[arg(long)]
    weak: bool,
    /// Directory for the CSV reports and counter-example files.
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Infeasible(String),
    CounterExample(usize),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Internal(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::CounterExample(_) => 4,
        }
    }
}

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure::Internal(e.to_string())
}

fn load(path: &Path) -> Result<Instance, Failure> {
    read_instance(path).map_err(|e| match e {
        ModelError::Io { .. } | ModelError::Parse { .. } | ModelError::Validation { .. } => Failure::Usage(e.to_string()),
        other => internal(other),
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let mut cfg = GeneratorConfig::new(args.seed, args.units as usize, args.horizon as usize, args.points as usize);
    cfg.profile = match args.profile {
        Profile::TwoPeak => DemandProfile::TwoPeak,
        Profile::Flat => DemandProfile::Flat,
        Profile::Zero => DemandProfile::Zero,
    };
    cfg.peak_utilisation = args.utilisation;
    let instance = generate_instance(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    write_instance(&instance, &args.out).map_err(|e| Failure::Usage(e.to_string()))?;
    let capacity: f64 = instance
        .units
        .iter()
        .map(|u| u.points.iter().map(|p| p.power).fold(0.0, f64::max))
        .sum();
    let peak = instance.demand_power.iter().copied().fold(0.0, f64::max);
    let slack = if peak > 0.0 { format!("{:.1}%", 100.0 * (capacity / peak - 1.0)) } else { "-".into() };
    print!(
        "{}",
        pairs(&[
            ("instance", args.out.display().to_string()),
            ("units", instance.units.len().to_string()),
            ("horizon", instance.horizon.to_string()),
            ("fleet capacity", num(capacity)),
            ("peak demand", num(peak)),
            ("capacity slack", slack),
            ("per-period slack floor", format!("{:.0}%", 100.0 * (GENERATOR_SLACK - 1.0))),
        ])
    );
    Ok(())
}

#[derive(Default, Serialize)]
struct SolveRow {
    method: String,
    status: String,
    compact_lp: Option<f64>,
    cg_bound: Option<f64>,
    rel_diff: Option<f64>,
    compact_ilp: Option<f64>,
    ilp_proved: Option<bool>,
    iterations: Option<usize>,
    pool_size: Option<usize>,
    dual_zero_fraction: Option<f64>,
    integer_rmp: Option<String>,
    integer_rmp_bound: Option<f64>,
}

fn solve(args: &SolveArgs, threads: Option<usize>) -> Result<(), Failure> {
    if args.weak && !matches!(args.method, Method::CompactLp | Method::CompactIlp) {
        return Err(Failure::Usage("--weak applies to compact-lp and compact-ilp only".into()));
    }
    if args.log.is_some() && args.method != Method::Cg {
        return Err(Failure::Usage("--log requires --method cg".into()));
    }
    if args.integer_rmp && args.method != Method::Cg {
        return Err(Failure::Usage("--integer-rmp requires --method cg".into()));
    }
    if !(0.0..1.0).contains(&args.smoothing) {
        return Err(Failure::Usage("--smoothing must lie in [0, 1)".into()));
    }
    let time_limit = match args.time_limit {
        Some(s) if !(s > 0.0 && s.is_finite()) => return Err(Failure::Usage("--time-limit must be positive".into())),
        other => other.map(Duration::from_secs_f64),
    };
    let instance = load(&args.instance)?;
    let cg_config = CgConfig {
        max_iterations: args.max_iterations.max(1),
        time_limit,
        columns_per_unit: args.columns_per_unit.max(1),
        smoothing: args.smoothing,
        purge: !args.no_purge,
        threads,
        ..Default::default()
    };
    let formulation = if args.weak { Formulation::Weak } else { Formulation::Tight };
    let mut row = SolveRow {
        method: serde_json::to_value(args.method)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
        ..Default::default()
    };
    let mut plans = None;
    match args.method {
        Method::CompactLp => {
            let model = build_compact_with(&instance, BuildOptions { formulation, presolve: true });
            let sol = solve_compact_relaxation(&instance, &model).map_err(internal)?;
            match sol.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return Err(Failure::Infeasible("the compact relaxation is infeasible".into())),
                LpStatus::Unbounded => return Err(internal("the compact relaxation is unbounded")),
            }
            row.status = "optimal".into();
            row.compact_lp = Some(sol.objective);
            row.iterations = Some(sol.iterations);
        }
        Method::CompactIlp => {
            let model = build_compact_with(&instance, BuildOptions { formulation, presolve: true });
            let r = solve_ilp(
                &model.lp,
                &BnbOptions {
                    time_limit,
                    ..Default::default()
                },
            )
            .map_err(internal)?;
            let Some(x) = r.incumbent else {
                if r.status == IlpStatus::Infeasible {
                    return Err(Failure::Infeasible("the compact model has no integer solution".into()));
                }
                return Err(internal("branch and bound stopped without an integer solution"));
            };
            row.status = if r.status == IlpStatus::Optimal { "optimal" } else { "limit" }.into();
            row.compact_ilp = Some(r.objective);
            row.compact_lp = Some(r.root_bound);
            row.ilp_proved = Some(r.status == IlpStatus::Optimal);
            row.iterations = Some(r.nodes);
            plans = Some(decode_integer_solution(&x, &model.index).map_err(internal)?);
        }
        Method::Cg => {
            let r = cg_solve(&instance, &cg_config).map_err(internal)?;
            if r.status == CgStatus::Infeasible {
                let why = r
                    .infeasibility
                    .map(|g| format!("{} demand {} at period {} exceeds {}", g.series, g.demand, g.period, g.available))
                    .unwrap_or_default();
                return Err(Failure::Infeasible(format!("no combination of plans covers the demand: {why}")));
            }
            if let Some(path) = &args.log {
                write_text(path, &r.log_csv(!args.no_timing))?;
            }
            row.status = if r.status == CgStatus::Converged { "converged" } else { "limit" }.into();
            row.cg_bound = Some(r.lower_bound);
            row.iterations = Some(r.iterations);
            row.pool_size = Some(r.pool.len());
            row.dual_zero_fraction = Some(r.mean_dual_zero_fraction());
            if args.integer_rmp {
                let out = integer_rmp_heuristic(
                    &r.pool,
                    &instance,
                    &BnbOptions {
                        time_limit,
                        ..Default::default()
                    },
                )
                .map_err(internal)?;
                row.integer_rmp = Some(
                    match out.status {
                        IntegerRmpStatus::Feasible => "feasible",
                        IntegerRmpStatus::Infeasible => "infeasible",
                        IntegerRmpStatus::Limit => "limit",
                    }
                    .into(),
                );
                if out.status == IntegerRmpStatus::Feasible {
                    row.integer_rmp_bound = Some(out.upper_bound);
                    plans = Some(out.plans);
                }
            }
        }
        Method::All => {
            let config = CompareConfig {
                cg: cg_config,
                ilp_time_limit: time_limit.or(CompareConfig::default().ilp_time_limit),
                ..Default::default()
            };
            let Some(rep) = compare_bounds(&instance, &config).map_err(internal)? else {
                return Err(Failure::Infeasible("the instance is infeasible".into()));
            };
            row.status = match rep.cg_status {
                CgStatus::Converged => "converged",
                _ => "limit",
            }
            .into();
            row.compact_lp = Some(rep.compact_lp);
            row.cg_bound = Some(rep.cg_bound);
            row.rel_diff = Some(rep.rel_diff);
            row.compact_ilp = rep.compact_ilp;
            row.ilp_proved = rep.compact_ilp.map(|_| rep.compact_ilp_proved);
            row.iterations = Some(rep.iterations);
            row.pool_size = Some(rep.pool_size);
            row.dual_zero_fraction = Some(rep.mean_dual_zero_fraction);
        }
    }
    if let Some(path) = &args.plans {
        let Some(p) = &plans else {
            return Err(Failure::Usage("--plans needs compact-ilp, or cg with a feasible --integer-rmp".into()));
        };
        let text = serde_json::to_string_pretty(p).map_err(internal)?;
        write_text(path, &(text + "\n"))?;
    }
    let show = |v: Option<usize>| v.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
    print!(
        "{}",
        pairs(&[
            ("method", row.method.clone()),
            ("status", row.status.clone()),
            ("compact lp", opt(row.compact_lp)),
            ("cg bound", opt(row.cg_bound)),
            ("relative difference", row.rel_diff.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into())),
            ("compact ilp", opt(row.compact_ilp)),
            ("ilp proved optimal", row.ilp_proved.map(|b| b.to_string()).unwrap_or_else(|| "-".into())),
            ("iterations", show(row.iterations)),
            ("pool size", show(row.pool_size)),
            ("zero fraction of power duals", row.dual_zero_fraction.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())),
            ("integer master", row.integer_rmp.clone().unwrap_or_else(|| "-".into())),
            ("integer master cost", opt(row.integer_rmp_bound)),
        ])
    );
    if let Some(path) = &args.report {
        write_csv(path, &[row]).map_err(Failure::Usage)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct UnitRow<'a> {
    unit: &'a str,
    trials: usize,
    integral_fraction: f64,
    max_gap: f64,
    counter_examples: usize,
}

#[derive(Serialize)]
struct TrialRow<'a> {
    unit: &'a str,
    source: DualSource,
    lp_value: f64,
    ilp_value: f64,
    dp_value: f64,
    gap: f64,
    lp_integral: bool,
}

impl<'a> TrialRow<'a> {
    fn new(unit: &'a str, o: &TrialOutcome) -> Self {
        Self {
            unit,
            source: o.source,
            lp_value: o.lp_value,
            ilp_value: o.ilp_value,
            dp_value: o.dp_value,
            gap: o.gap,
            lp_integral: o.lp_integral,
        }
    }
}

fn spread(all: Vec<UnitDuals>, keep: usize) -> Vec<UnitDuals> {
    if all.len() <= keep {
        return all;
    }
    let n = all.len();
    (0..keep).map(|k| all[k * (n - 1) / (keep - 1).max(1)].clone()).collect()
}

fn conjecture(args: &ConjectureArgs, threads: Option<usize>) -> Result<(), Failure> {
    let instance = match (&args.instance, args.random_units) {
        (Some(path), _) => load(path)?,
        (None, Some(n)) => generate_instance(&GeneratorConfig::new(
            args.seed,
            n as usize,
            args.horizon as usize,
            args.points as usize,
        ))
        .map_err(|e| Failure::Usage(e.to_string()))?,
        (None, None) => unreachable!("clap requires a source"),
    };
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", args.out.display())))?;
    let cg = cg_solve(
        &instance,
        &CgConfig {
            threads,
            ..Default::default()
        },
    )
    .map_err(internal)?;
    if cg.status == CgStatus::Infeasible {
        log::warn!("instance is infeasible; only random duals are used");
    }
    let formulation = if args.weak { Formulation::Weak } else { Formulation::Tight };
    let mut total = ConjectureReport::default();
    let mut unit_rows = Vec::new();
    let mut per_unit = Vec::new();
    for (u, unit) in instance.units.iter().enumerate() {
        let harvested = spread(harvest_unit_duals(&cg, u), args.harvest);
        let cfg = ConjectureConfig {
            formulation,
            ..ConjectureConfig::new(args.trials, args.seed.wrapping_add(u as u64))
        };
        let rep = check_conjecture(unit, instance.horizon, &cfg, &harvested).map_err(internal)?;
        unit_rows.push(vec![
            unit.id.clone(),
            rep.trials.to_string(),
            format!("{:.3}", rep.integral_fraction),
            format!("{:.3e}", rep.max_gap),
            rep.counter_examples.len().to_string(),
        ]);
        per_unit.push((u, rep.clone()));
        total.merge(rep);
    }
    let units: Vec<UnitRow> = per_unit
        .iter()
        .map(|(u, r)| UnitRow {
            unit: &instance.units[*u].id,
            trials: r.trials,
            integral_fraction: r.integral_fraction,
            max_gap: r.max_gap,
            counter_examples: r.counter_examples.len(),
        })
        .collect();
    write_csv(&args.out.join("conjecture_units.csv"), &units).map_err(Failure::Usage)?;
    let trials: Vec<TrialRow> = per_unit
        .iter()
        .flat_map(|(u, r)| {
            r.outcomes.iter().map(|o| TrialRow::new(&instance.units[*u].id, o))
        })
        .collect();
    write_csv(&args.out.join("conjecture_trials.csv"), &trials).map_err(Failure::Usage)?;
    for (k, c) in total.counter_examples.iter().enumerate() {
        write_text(&args.out.join(format!("counter_example_{k}.json")), &c.to_json())?;
    }
    print!(
        "{}",
        grid(&["unit", "trials", "integral", "max_gap", "counter_examples"], &unit_rows)
    );
    print!(
        "{}",
        pairs(&[
            ("trials", total.trials.to_string()),
            ("integral fraction", format!("{:.4}", total.integral_fraction)),
            ("max gap", format!("{:.3e}", total.max_gap)),
            ("counter-examples", total.counter_examples.len().to_string()),
            ("reports", args.out.display().to_string()),
        ])
    );
    if total.counter_examples.is_empty() {
        Ok(())
    } else {
        Err(Failure::CounterExample(total.counter_examples.len()))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = cli.threads.map(usize::from);
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("cannot size the global thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a, threads),
        Command::Conjecture(a) => conjecture(a, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Infeasible(m) => eprintln!("infeasible: {m}"),
                Failure::CounterExample(n) => eprintln!("{n} counter-example(s) found; reproduction files written"),
                Failure::Internal(m) => eprintln!("internal error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
