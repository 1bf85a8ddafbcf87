//! Dantzig-Wolfe master problem over whole-horizon plans and the column
//! generation loop that prices plans against its duals.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bnb::{solve_ilp, BnbError, BnbOptions, IlpStatus};
use crate::compact::{build_compact, solve_compact_relaxation};
use crate::lp::{solve_lp, Basis, LpError, LpModel, LpStatus, Sense, VarStatus};
use crate::model::{max_plan, min_plan, plan_cost, plan_vectors, Instance, Plan};
use crate::subproblem::{price_unit_dp_k, DualPrices, PricedPlan, SubproblemError, UnitDuals};

#[derive(Debug, Error)]
pub enum ColgenError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Bnb(#[from] BnbError),
    #[error(transparent)]
    Pricing(#[from] SubproblemError),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("cannot build thread pool: {0}")]
    Threads(String),
}

/// A plan lifted into master coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub unit: usize,
    pub unit_id: String,
    pub plan: Plan,
    pub cost: f64,
    pub power: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
}

impl Column {
    pub fn new(instance: &Instance, unit: usize, plan: Plan) -> Self {
        let u = &instance.units[unit];
        let v = plan_vectors(u, &plan);
        Self {
            unit,
            unit_id: u.id.clone(),
            cost: plan_cost(u, &plan),
            plan,
            power: v.power,
            r1: v.r1,
            r2: v.r2,
        }
    }
}

/// `c_p + sigma_u - sum_t (pi^P P + pi^R1 R1 + pi^R2 R2)`.
pub fn reduced_cost(column: &Column, duals: &DualPrices) -> f64 {
    let mut credit = 0.0;
    for t in 0..column.power.len() {
        credit += duals.pi_p[t] * column.power[t] + duals.pi_r1[t] * column.r1[t] + duals.pi_r2[t] * column.r2[t];
    }
    column.cost + duals.sigma[column.unit] - credit
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    /// Greedy maximal and minimal plan of every unit.
    #[default]
    MinMax,
    /// One plan per unit from a merit-order demand-covering pass.
    Heuristic,
}

/// Demand row left uncovered by the best convex combination of plans.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Infeasibility {
    pub period: usize,
    pub series: &'static str,
    pub demand: f64,
    pub available: f64,
}

fn max_cover_gap(instance: &Instance, cols: &[&Column]) -> Option<Infeasibility> {
    for t in 0..instance.horizon {
        let series: [(&'static str, f64, fn(&Column, usize) -> f64); 3] = [
            ("power", instance.demand_power[t], |c, t| c.power[t]),
            ("r1", instance.demand_r1[t], |c, t| c.r1[t]),
            ("r2", instance.demand_r2[t], |c, t| c.r2[t]),
        ];
        for (name, demand, get) in series {
            let available: f64 = cols.iter().map(|c| get(c, t)).sum();
            if available < demand - 1e-9 {
                return Some(Infeasibility {
                    period: t + 1,
                    series: name,
                    demand,
                    available,
                });
            }
        }
    }
    None
}

/// Starting pool. It need not cover the demand: `cg_solve` first prices
/// covering columns when it does not.
pub fn initialize_columns(instance: &Instance, strategy: InitStrategy) -> Vec<Column> {
    let horizon = instance.horizon;
    let n = instance.units.len();
    let max: Vec<Column> = (0..n)
        .map(|u| Column::new(instance, u, max_plan(&instance.units[u], horizon)))
        .collect();
    let min: Vec<Column> = (0..n)
        .map(|u| Column::new(instance, u, min_plan(&instance.units[u], horizon)))
        .collect();
    match strategy {
        InitStrategy::MinMax => {
            let mut cols = Vec::with_capacity(2 * n);
            for (a, b) in max.into_iter().zip(min) {
                let same = a.plan == b.plan;
                cols.push(a);
                if !same {
                    cols.push(b);
                }
            }
            cols
        }
        InitStrategy::Heuristic => {
            // cheapest units per MW at full output are switched to their
            // max plan first, until every demand is covered
            let mut order: Vec<usize> = (0..n).collect();
            let merit = |u: usize| {
                let unit = &instance.units[u];
                let top = unit.n_points();
                unit.period_cost(top) / unit.power_at(top)
            };
            order.sort_by(|&a, &b| merit(a).total_cmp(&merit(b)).then(a.cmp(&b)));
            let mut chosen: Vec<&Column> = min.iter().collect();
            for &u in &order {
                if max_cover_gap(instance, &chosen).is_none() {
                    break;
                }
                chosen[u] = &max[u];
            }
            chosen.into_iter().cloned().collect()
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgConfig {
    /// Columns with reduced cost below `-epsilon` enter the pool.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub time_limit: Option<Duration>,
    pub columns_per_unit: usize,
    /// Weight of the previous duals in the pricing duals, in `[0, 1)`.
    pub smoothing: f64,
    pub purge: bool,
    pub purge_window: usize,
    pub min_columns_per_unit: usize,
    pub init: InitStrategy,
    /// Pricing threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iterations: 5000,
            time_limit: None,
            columns_per_unit: 1,
            smoothing: 0.0,
            purge: true,
            purge_window: 5,
            min_columns_per_unit: 2,
            init: InitStrategy::MinMax,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub rmp_value: f64,
    pub min_rc: f64,
    pub lagrangian_bound: f64,
    pub columns_added: usize,
    pub columns_purged: usize,
    pub dual_zero_fraction: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CgStatus {
    Converged,
    /// Iteration or time limit reached; `lower_bound` is the best
    /// Lagrangian bound.
    Limit,
    /// No convex combination of plans covers the demand.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct CgResult {
    pub status: CgStatus,
    /// Final RMP value at convergence, best Lagrangian bound otherwise.
    pub lower_bound: f64,
    pub rmp_value: f64,
    pub lagrangian_bound: f64,
    pub pool: Vec<Column>,
    pub iterations: usize,
    pub log: Vec<IterationLog>,
    /// RMP duals of every iteration.
    pub dual_history: Vec<DualPrices>,
    /// RMP primal values of the final pool.
    pub weights: Vec<f64>,
    pub infeasibility: Option<Infeasibility>,
    /// Rounds spent pricing a pool that covers the demand, before the
    /// first logged iteration.
    pub covering_iterations: usize,
}

impl CgResult {
    /// Per-iteration CSV. Timings are optional so that reports of two runs
    /// can be compared byte for byte.
    pub fn log_csv(&self, with_timing: bool) -> String {
        let mut s = String::from("iteration,rmp_value,min_rc,lagrangian_bound,columns_added,columns_purged,dual_zero_fraction");
        s.push_str(if with_timing { ",wall_ms\n" } else { "\n" });
        for r in &self.log {
            let _ = write!(
                s,
                "{},{},{},{},{},{},{}",
                r.iteration,
                r.rmp_value,
                r.min_rc,
                r.lagrangian_bound,
                r.columns_added,
                r.columns_purged,
                r.dual_zero_fraction
            );
            if with_timing {
                let _ = write!(s, ",{:.3}", r.wall_ms);
            }
            s.push('\n');
        }
        s
    }

    pub fn mean_dual_zero_fraction(&self) -> f64 {
        if self.log.is_empty() {
            return 0.0;
        }
        self.log.iter().map(|r| r.dual_zero_fraction).sum::<f64>() / self.log.len() as f64
    }
}

/// LP relaxation of the extended formulation restricted to `pool`: demand
/// rows first (`3T`, period-major), then one convexity row per unit.
pub fn build_rmp(instance: &Instance, pool: &[Column], integer: bool) -> LpModel {
    let horizon = instance.horizon;
    let mut m = LpModel::new();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 3 * horizon + instance.units.len()];
    for (j, c) in pool.iter().enumerate() {
        let ub = if integer { 1.0 } else { f64::INFINITY };
        m.add_col(format!("z_{}_{j}", c.unit), c.cost, 0.0, ub, integer);
        for t in 0..horizon {
            for (k, v) in [c.power[t], c.r1[t], c.r2[t]].into_iter().enumerate() {
                if v != 0.0 {
                    rows[3 * t + k].push((j, v));
                }
            }
        }
        rows[3 * horizon + c.unit].push((j, 1.0));
    }
    for (r, coefs) in rows.into_iter().enumerate() {
        if r < 3 * horizon {
            let (t, k) = (r / 3, r % 3);
            let (name, d) = match k {
                0 => ("dp", instance.demand_power[t]),
                1 => ("dr1", instance.demand_r1[t]),
                _ => ("dr2", instance.demand_r2[t]),
            };
            m.add_row(format!("{name}_{}", t + 1), coefs, Sense::Ge, d);
        } else {
            let u = r - 3 * horizon;
            m.add_row(format!("conv_{u}"), coefs, Sense::Eq, 1.0);
        }
    }
    m
}

/// Cheapest column of every unit basic in its convexity row, demand rows
/// slack.
fn crash_basis(instance: &Instance, pool: &[Column]) -> Basis {
    let mut cols = vec![VarStatus::AtLower; pool.len()];
    let mut cheapest: Vec<Option<usize>> = vec![None; instance.units.len()];
    for (j, c) in pool.iter().enumerate() {
        let slot = &mut cheapest[c.unit];
        if slot.map_or(true, |k| c.cost < pool[k].cost) {
            *slot = Some(j);
        }
    }
    for j in cheapest.into_iter().flatten() {
        cols[j] = VarStatus::Basic;
    }
    let mut rows = vec![VarStatus::Basic; 3 * instance.horizon];
    rows.resize(rows.len() + instance.units.len(), VarStatus::AtLower);
    Basis { cols, rows }
}

fn extract_duals(instance: &Instance, row_duals: &[f64]) -> DualPrices {
    let horizon = instance.horizon;
    let pi = |k: usize| (0..horizon).map(|t| row_duals[3 * t + k].max(0.0)).collect();
    DualPrices {
        pi_p: pi(0),
        pi_r1: pi(1),
        pi_r2: pi(2),
        sigma: (0..instance.units.len()).map(|u| -row_duals[3 * horizon + u]).collect(),
    }
}

fn blend(a: &DualPrices, b: &DualPrices, alpha: f64) -> DualPrices {
    let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| alpha * p + (1.0 - alpha) * q).collect();
    DualPrices {
        pi_p: mix(&a.pi_p, &b.pi_p),
        pi_r1: mix(&a.pi_r1, &b.pi_r1),
        pi_r2: mix(&a.pi_r2, &b.pi_r2),
        sigma: mix(&a.sigma, &b.sigma),
    }
}

/// Lagrangian bound `pi . D + sum_u min_p (c_p - pi . v_p)`, valid for any
/// `pi >= 0`.
fn lagrangian(instance: &Instance, duals: &DualPrices, best: &[Vec<PricedPlan>]) -> f64 {
    let mut v = 0.0;
    for t in 0..instance.horizon {
        v += duals.pi_p[t] * instance.demand_power[t]
            + duals.pi_r1[t] * instance.demand_r1[t]
            + duals.pi_r2[t] * instance.demand_r2[t];
    }
    for (u, priced) in best.iter().enumerate() {
        v += priced[0].reduced_cost - duals.sigma[u];
    }
    v
}

fn price_all(
    instance: &Instance,
    duals: &DualPrices,
    k: usize,
    pool: Option<&rayon::ThreadPool>,
) -> Result<Vec<Vec<PricedPlan>>, SubproblemError> {
    let horizon = instance.horizon;
    let run = || {
        (0..instance.units.len())
            .into_par_iter()
            .map(|u| price_unit_dp_k(&instance.units[u], &duals.unit(u), horizon, k))
            .collect::<Result<Vec<_>, _>>()
    };
    match pool {
        Some(p) => p.install(run),
        None => run(),
    }
}

/// Adds columns until some convex combination of the pool covers every
/// demand row. Minimizes artificial slack on the demand rows with plan
/// costs ignored; a positive optimum with nothing left to price proves the
/// extended relaxation, hence the instance, infeasible.
fn cover_demand(
    instance: &Instance,
    config: &CgConfig,
    pool: &mut Vec<Column>,
    known: &mut HashSet<(usize, Vec<usize>)>,
    thread_pool: Option<&rayon::ThreadPool>,
) -> Result<(Option<Infeasibility>, usize), ColgenError> {
    let horizon = instance.horizon;
    let mut free = instance.clone();
    for u in &mut free.units {
        u.cost_startup = 0.0;
        u.cost_fixed = 0.0;
        u.cost_prop = 0.0;
    }
    let demand = |r: usize| {
        let t = r / 3;
        match r % 3 {
            0 => ("power", instance.demand_power[t]),
            1 => ("r1", instance.demand_r1[t]),
            _ => ("r2", instance.demand_r2[t]),
        }
    };
    let scale = 1.0 + (0..3 * horizon).map(|r| demand(r).1.abs()).fold(0.0, f64::max);
    for round in 1..=config.max_iterations {
        let mut rmp = build_rmp(instance, pool, false);
        rmp.objective.iter_mut().for_each(|c| *c = 0.0);
        let first = rmp.n_cols();
        for r in 0..3 * horizon {
            let j = rmp.add_col(format!("a_{r}"), 1.0, 0.0, f64::INFINITY, false);
            rmp.rows[r].coefs.push((j, 1.0));
        }
        let sol = solve_lp(&rmp, None)?;
        if sol.status != LpStatus::Optimal {
            return Err(ColgenError::Invariant(format!("covering master ended {:?}", sol.status)));
        }
        if sol.objective <= 1e-9 * scale {
            return Ok((None, round));
        }
        let duals = extract_duals(instance, &sol.duals);
        let priced = price_all(&free, &duals, config.columns_per_unit, thread_pool)?;
        let mut added = 0;
        for (u, list) in priced.iter().enumerate() {
            for p in list.iter().filter(|p| p.reduced_cost < -config.epsilon) {
                if known.insert((u, p.plan.points.clone())) {
                    pool.push(Column::new(instance, u, p.plan.clone()));
                    added += 1;
                }
            }
        }
        if added == 0 {
            let mut worst = 0;
            for r in 1..3 * horizon {
                if sol.primal[first + r] > sol.primal[first + worst] {
                    worst = r;
                }
            }
            let (series, d) = demand(worst);
            return Ok((
                Some(Infeasibility {
                    period: worst / 3 + 1,
                    series,
                    demand: d,
                    available: d - sol.primal[first + worst],
                }),
                round,
            ));
        }
    }
    Err(ColgenError::Invariant("no covering pool within the iteration limit".into()))
}

/// Runs column generation on the LP relaxation of the extended
/// formulation.
pub fn cg_solve(instance: &Instance, config: &CgConfig) -> Result<CgResult, ColgenError> {
    let start = Instant::now();
    let thread_pool = match config.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| ColgenError::Threads(e.to_string()))?,
        ),
        None => None,
    };
    let mut result = CgResult {
        status: CgStatus::Infeasible,
        lower_bound: f64::NAN,
        rmp_value: f64::NAN,
        lagrangian_bound: f64::NEG_INFINITY,
        pool: Vec::new(),
        iterations: 0,
        log: Vec::new(),
        dual_history: Vec::new(),
        weights: Vec::new(),
        infeasibility: None,
        covering_iterations: 0,
    };
    let mut pool = initialize_columns(instance, config.init);
    let mut known: HashSet<(usize, Vec<usize>)> = pool.iter().map(|c| (c.unit, c.plan.points.clone())).collect();
    if max_cover_gap(instance, &pool.iter().collect::<Vec<_>>()).is_some() {
        let (gap, rounds) = cover_demand(instance, config, &mut pool, &mut known, thread_pool.as_ref())?;
        result.covering_iterations = rounds;
        if gap.is_some() {
            result.infeasibility = gap;
            result.pool = pool;
            return Ok(result);
        }
    }
    let mut zero_streak = vec![0usize; pool.len()];
    let mut basis = Some(crash_basis(instance, &pool));
    let mut previous: Option<DualPrices> = None;
    let mut last_rmp = f64::INFINITY;

    for iteration in 0.. {
        let iter_start = Instant::now();
        let rmp = build_rmp(instance, &pool, false);
        let sol = solve_lp(&rmp, basis.as_ref())?;
        match sol.status {
            LpStatus::Optimal => {}
            other => {
                return Err(ColgenError::Invariant(format!(
                    "restricted master ended {other:?} at iteration {iteration}"
                )))
            }
        }
        if sol.objective > last_rmp + 1e-7 * (1.0 + last_rmp.abs()) {
            return Err(ColgenError::Invariant(format!(
                "master value rose from {last_rmp} to {} at iteration {iteration}",
                sol.objective
            )));
        }
        last_rmp = sol.objective;
        let duals = extract_duals(instance, &sol.duals);
        result.dual_history.push(duals.clone());

        let smoothed = match (&previous, config.smoothing > 0.0) {
            (Some(prev), true) => Some(blend(prev, &duals, config.smoothing)),
            _ => None,
        };
        let mut pricing_duals = smoothed.clone().unwrap_or_else(|| duals.clone());
        let mut priced = price_all(instance, &pricing_duals, config.columns_per_unit, thread_pool.as_ref())?;
        let improving = |priced: &[Vec<PricedPlan>]| -> Vec<Column> {
            let mut out = Vec::new();
            for (u, list) in priced.iter().enumerate() {
                for p in list {
                    let col = Column::new(instance, u, p.plan.clone());
                    if reduced_cost(&col, &duals) < -config.epsilon {
                        out.push(col);
                    }
                }
            }
            out
        };
        let mut candidates = improving(&priced);
        if candidates.is_empty() && smoothed.is_some() {
            // mis-price: fall back to the true duals
            pricing_duals = duals.clone();
            priced = price_all(instance, &pricing_duals, config.columns_per_unit, thread_pool.as_ref())?;
            candidates = improving(&priced);
        }
        let lag = lagrangian(instance, &pricing_duals, &priced);
        result.lagrangian_bound = result.lagrangian_bound.max(lag);
        let min_rc = priced.iter().map(|l| l[0].reduced_cost).fold(f64::INFINITY, f64::min);
        previous = Some(pricing_duals);

        // bookkeeping on the solved pool before it changes
        for (j, streak) in zero_streak.iter_mut().enumerate() {
            let at_zero = sol.basis.cols[j] != VarStatus::Basic && sol.primal[j].abs() <= 1e-12;
            *streak = if at_zero { *streak + 1 } else { 0 };
        }
        let mut statuses = sol.basis.cols.clone();

        let mut added = 0;
        for col in candidates {
            let rc = reduced_cost(&col, &duals);
            if rc >= -config.epsilon {
                return Err(ColgenError::Invariant(format!("column with reduced cost {rc} offered")));
            }
            if known.insert((col.unit, col.plan.points.clone())) {
                pool.push(col);
                zero_streak.push(0);
                statuses.push(VarStatus::AtLower);
                added += 1;
            }
        }

        let mut purged = 0;
        if config.purge && added > 0 {
            let mut per_unit = vec![0usize; instance.units.len()];
            for c in &pool {
                per_unit[c.unit] += 1;
            }
            let mut keep = vec![true; pool.len()];
            for j in 0..pool.len() {
                let u = pool[j].unit;
                if zero_streak[j] >= config.purge_window && per_unit[u] > config.min_columns_per_unit {
                    keep[j] = false;
                    per_unit[u] -= 1;
                    purged += 1;
                }
            }
            if purged > 0 {
                let mut j = 0;
                pool.retain(|c| {
                    let k = keep[j];
                    if !k {
                        known.remove(&(c.unit, c.plan.points.clone()));
                    }
                    j += 1;
                    k
                });
                let mut j = 0;
                zero_streak.retain(|_| {
                    j += 1;
                    keep[j - 1]
                });
                let mut j = 0;
                statuses.retain(|_| {
                    j += 1;
                    keep[j - 1]
                });
            }
        }

        result.log.push(IterationLog {
            iteration,
            rmp_value: sol.objective,
            min_rc,
            lagrangian_bound: lag,
            columns_added: added,
            columns_purged: purged,
            dual_zero_fraction: duals.zero_fraction(1e-9),
            wall_ms: iter_start.elapsed().as_secs_f64() * 1e3,
        });
        log::debug!(
            "cg iteration {iteration}: rmp {} min rc {min_rc} added {added} purged {purged}",
            sol.objective
        );
        result.iterations = iteration + 1;
        result.rmp_value = sol.objective;

        if added == 0 {
            result.status = CgStatus::Converged;
            result.weights = sol.primal;
            break;
        }
        basis = Some(Basis {
            cols: statuses,
            rows: sol.basis.rows,
        });
        let out_of_time = config.time_limit.is_some_and(|l| start.elapsed() >= l);
        if iteration + 1 >= config.max_iterations || out_of_time {
            result.status = CgStatus::Limit;
            // weights refer to the pool before this round's changes
            let rmp = build_rmp(instance, &pool, false);
            let sol = solve_lp(&rmp, basis.as_ref())?;
            result.rmp_value = sol.objective;
            result.weights = sol.primal;
            break;
        }
    }
    result.lower_bound = match result.status {
        CgStatus::Converged => result.rmp_value,
        _ => result.lagrangian_bound,
    };
    result.pool = pool;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegerRmpOutcome {
    pub status: IntegerRmpStatus,
    pub plans: Vec<Plan>,
    pub upper_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IntegerRmpStatus {
    Feasible,
    Infeasible,
    Limit,
}

/// Picks one pool column per unit by solving the master with binary
/// variables.
pub fn integer_rmp_heuristic(
    pool: &[Column],
    instance: &Instance,
    opts: &BnbOptions,
) -> Result<IntegerRmpOutcome, ColgenError> {
    let model = build_rmp(instance, pool, true);
    let r = solve_ilp(&model, opts)?;
    let Some(x) = r.incumbent else {
        let status = if r.status == IlpStatus::Limit {
            IntegerRmpStatus::Limit
        } else {
            IntegerRmpStatus::Infeasible
        };
        return Ok(IntegerRmpOutcome {
            status,
            plans: Vec::new(),
            upper_bound: f64::INFINITY,
        });
    };
    let mut plans = vec![None; instance.units.len()];
    for (j, c) in pool.iter().enumerate() {
        if x[j] > 0.5 {
            plans[c.unit] = Some(c.plan.clone());
        }
    }
    let plans: Option<Vec<Plan>> = plans.into_iter().collect();
    let plans = plans.ok_or_else(|| ColgenError::Invariant("integer master left a unit without a plan".into()))?;
    Ok(IntegerRmpOutcome {
        status: IntegerRmpStatus::Feasible,
        plans,
        upper_bound: r.objective,
    })
}

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub cg: CgConfig,
    /// Solve the compact ILP when it has at most this many columns.
    pub ilp_column_limit: usize,
    pub ilp_time_limit: Option<Duration>,
    pub tolerance: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            cg: CgConfig::default(),
            ilp_column_limit: 600,
            ilp_time_limit: Some(Duration::from_secs(60)),
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub compact_lp: f64,
    pub cg_bound: f64,
    pub cg_status: CgStatus,
    pub rel_diff: f64,
    pub compact_ilp: Option<f64>,
    pub compact_ilp_proved: bool,
    pub iterations: usize,
    pub pool_size: usize,
    pub mean_dual_zero_fraction: f64,
}

/// Compact LP relaxation, column generation bound and, on small
/// instances, the compact ILP optimum, with the dominance chain checked.
///
/// Returns `Ok(None)` when the instance is infeasible.
pub fn compare_bounds(instance: &Instance, config: &CompareConfig) -> Result<Option<BoundsReport>, ColgenError> {
    let compact = build_compact(instance);
    let lp = solve_compact_relaxation(instance, &compact)?;
    if lp.status == LpStatus::Infeasible {
        return Ok(None);
    }
    if lp.status != LpStatus::Optimal {
        return Err(ColgenError::Invariant(format!("compact relaxation ended {:?}", lp.status)));
    }
    let cg = cg_solve(instance, &config.cg)?;
    if cg.status == CgStatus::Infeasible {
        return Ok(None);
    }
    let scale = 1.0 + lp.objective.abs();
    let tol = config.tolerance * scale;
    if cg.lower_bound < lp.objective - tol && cg.status == CgStatus::Converged {
        return Err(ColgenError::Invariant(format!(
            "column generation bound {} below compact relaxation {}",
            cg.lower_bound, lp.objective
        )));
    }
    let mut compact_ilp = None;
    let mut proved = false;
    if compact.lp.n_cols() <= config.ilp_column_limit {
        let opts = BnbOptions {
            time_limit: config.ilp_time_limit,
            ..Default::default()
        };
        let r = solve_ilp(&compact.lp, &opts)?;
        if r.incumbent.is_some() {
            proved = r.status == IlpStatus::Optimal;
            if cg.lower_bound > r.objective + tol {
                return Err(ColgenError::Invariant(format!(
                    "column generation bound {} above an integer solution of cost {}",
                    cg.lower_bound, r.objective
                )));
            }
            compact_ilp = Some(r.objective);
        }
    }
    Ok(Some(BoundsReport {
        compact_lp: lp.objective,
        cg_bound: cg.lower_bound,
        cg_status: cg.status,
        rel_diff: (cg.lower_bound - lp.objective).abs() / scale,
        compact_ilp,
        compact_ilp_proved: proved,
        iterations: cg.iterations,
        pool_size: cg.pool.len(),
        mean_dual_zero_fraction: cg.mean_dual_zero_fraction(),
    }))
}

/// Duals of every unit from every iteration, for the integrality
/// experiment.
pub fn harvest_unit_duals(result: &CgResult, unit: usize) -> Vec<UnitDuals> {
    result.dual_history.iter().map(|d| d.unit(unit)).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::{generate_instance, validate_plan, GeneratorConfig, InitialCondition, OperatingPoint, Unit};
    use crate::subproblem::price_unit_dp;

    fn tiny_unit(id: &str) -> Unit {
        Unit {
            id: id.into(),
            points: vec![
                OperatingPoint {
                    power: 50.0,
                    r1: 5.0,
                    r2: 5.0,
                    dwell_up: 2,
                    dwell_down: 1,
                },
                OperatingPoint {
                    power: 80.0,
                    r1: 3.0,
                    r2: 8.0,
                    dwell_up: 1,
                    dwell_down: 2,
                },
            ],
            min_up: 2,
            min_down: 2,
            cost_startup: 100.0,
            cost_fixed: 20.0,
            cost_prop: 1.5,
            init: InitialCondition::offline(3),
        }
    }

    fn flat(units: Vec<Unit>, horizon: usize, p: f64) -> Instance {
        Instance {
            horizon,
            units,
            demand_power: vec![p; horizon],
            demand_r1: vec![0.0; horizon],
            demand_r2: vec![0.0; horizon],
        }
    }

    #[test]
    fn zero_duals_give_plan_cost() {
        let inst = flat(vec![tiny_unit("a")], 4, 0.0);
        let col = Column::new(&inst, 0, Plan::new("a", vec![1, 1, 2, 2]));
        assert_eq!(reduced_cost(&col, &DualPrices::zero(4, 1)), col.cost);
        let mut d = DualPrices::zero(4, 1);
        d.pi_p = vec![1.0, 0.5, 0.0, 2.0];
        d.pi_r2 = vec![0.0, 0.0, 1.0, 0.0];
        let credit: f64 = (0..4).map(|t| d.pi_p[t] * col.power[t] + d.pi_r2[t] * col.r2[t]).sum();
        d.sigma[0] = credit - col.cost;
        assert!(reduced_cost(&col, &d).abs() < 1e-12);
    }

    #[test]
    fn min_max_columns_are_valid() {
        let inst = generate_instance(&GeneratorConfig::new(2, 5, 12, 3)).unwrap();
        for strategy in [InitStrategy::MinMax, InitStrategy::Heuristic] {
            let cols = initialize_columns(&inst, strategy);
            for c in &cols {
                let u = &inst.units[c.unit];
                assert!(validate_plan(u, &c.plan, inst.horizon).unwrap().is_ok());
                assert_eq!(c.cost, plan_cost(u, &c.plan));
            }
            let rmp = build_rmp(&inst, &cols, false);
            assert_eq!(solve_lp(&rmp, None).unwrap().status, LpStatus::Optimal);
        }
    }

    #[test]
    fn offline_unit_minimal_plan_is_all_offline() {
        let inst = flat(vec![tiny_unit("a")], 5, 0.0);
        let cols = initialize_columns(&inst, InitStrategy::MinMax);
        assert_eq!(cols[1].plan.points, vec![0; 5]);
    }

    #[test]
    fn demand_equal_to_max_plan_prices_the_max_plan() {
        let u = tiny_unit("a");
        let mp = max_plan(&u, 6);
        let mut inst = flat(vec![u.clone()], 6, 0.0);
        inst.demand_power = plan_vectors(&u, &mp).power;
        let r = cg_solve(&inst, &CgConfig::default()).unwrap();
        assert_eq!(r.status, CgStatus::Converged);
        assert!((r.lower_bound - plan_cost(&u, &mp)).abs() < 1e-7);
    }

    #[test]
    fn too_much_demand_is_reported() {
        let inst = flat(vec![tiny_unit("a")], 3, 500.0);
        let r = cg_solve(&inst, &CgConfig::default()).unwrap();
        assert_eq!(r.status, CgStatus::Infeasible);
        assert_eq!(r.infeasibility.unwrap().period, 1);
    }

    #[test]
    fn reserve_only_a_lower_point_supplies_is_covered() {
        let mut inst = flat(vec![tiny_unit("a")], 6, 0.0);
        inst.demand_r1 = vec![0.0, 0.0, 0.0, 4.0, 4.0, 4.0];
        assert!(max_cover_gap(&inst, &initialize_columns(&inst, InitStrategy::MinMax).iter().collect::<Vec<_>>()).is_some());
        let r = cg_solve(&inst, &CgConfig::default()).unwrap();
        assert_eq!(r.status, CgStatus::Converged);
        assert!(r.covering_iterations >= 1);
        let rmp = build_rmp(&inst, &r.pool, false);
        assert!(rmp.max_violation(&r.weights) <= 1e-7);
    }

    #[test]
    fn zero_demand_converges_immediately() {
        let inst = flat(vec![tiny_unit("a"), tiny_unit("b")], 6, 0.0);
        let r = cg_solve(&inst, &CgConfig::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.log.iter().all(|l| l.columns_added == 0));
        assert_eq!(r.status, CgStatus::Converged);
        assert_eq!(r.lower_bound, 0.0);
        let h = integer_rmp_heuristic(&r.pool, &inst, &BnbOptions::default()).unwrap();
        assert_eq!(h.status, IntegerRmpStatus::Feasible);
        assert_eq!(h.upper_bound, 0.0);
    }

    #[test]
    fn convergence_certificate_and_log() {
        let inst = generate_instance(&GeneratorConfig::new(7, 4, 12, 3)).unwrap();
        let r = cg_solve(&inst, &CgConfig::default()).unwrap();
        assert_eq!(r.status, CgStatus::Converged);
        let last = r.dual_history.last().unwrap();
        for (u, unit) in inst.units.iter().enumerate() {
            let rc = price_unit_dp(unit, &last.unit(u), inst.horizon).unwrap().reduced_cost;
            assert!(rc >= -1e-6, "unit {u} still prices at {rc}");
        }
        assert!(r.log.windows(2).all(|w| w[1].rmp_value <= w[0].rmp_value + 1e-7));
        assert!((r.lagrangian_bound - r.lower_bound).abs() <= 1e-6 * (1.0 + r.lower_bound.abs()));
        assert!(r.log.iter().all(|l| l.lagrangian_bound <= l.rmp_value + 1e-6 * (1.0 + l.rmp_value.abs())));
        let csv = r.log_csv(false);
        assert_eq!(csv.lines().count(), r.log.len() + 1);
        assert!(!csv.contains("wall_ms"));
    }

    #[test]
    fn purging_and_smoothing_keep_the_bound() {
        let inst = generate_instance(&GeneratorConfig::new(3, 5, 16, 3)).unwrap();
        let base = cg_solve(&inst, &CgConfig::default()).unwrap();
        let tol = 1e-6 * (1.0 + base.lower_bound.abs());
        let no_purge = cg_solve(
            &inst,
            &CgConfig {
                purge: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((no_purge.lower_bound - base.lower_bound).abs() <= tol);
        let smooth = cg_solve(
            &inst,
            &CgConfig {
                smoothing: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(smooth.status, CgStatus::Converged);
        assert!((smooth.lower_bound - base.lower_bound).abs() <= tol);
        let multi = cg_solve(
            &inst,
            &CgConfig {
                columns_per_unit: 3,
                init: InitStrategy::Heuristic,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((multi.lower_bound - base.lower_bound).abs() <= tol);
    }

    #[test]
    fn iteration_limit_reports_a_lagrangian_bound() {
        let inst = generate_instance(&GeneratorConfig::new(4, 5, 16, 3)).unwrap();
        let full = cg_solve(&inst, &CgConfig::default()).unwrap();
        let cut = cg_solve(
            &inst,
            &CgConfig {
                max_iterations: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cut.status, CgStatus::Limit);
        assert!(cut.lower_bound <= full.lower_bound + 1e-6 * (1.0 + full.lower_bound.abs()));
    }

    #[test]
    fn compare_bounds_on_a_small_instance() {
        let inst = generate_instance(&GeneratorConfig::new(1, 2, 6, 2)).unwrap();
        let r = compare_bounds(&inst, &CompareConfig::default()).unwrap().unwrap();
        let tol = 1e-6 * (1.0 + r.compact_lp.abs());
        assert!(r.compact_lp <= r.cg_bound + tol);
        let ilp = r.compact_ilp.unwrap();
        assert!(r.compact_ilp_proved);
        assert!(r.cg_bound <= ilp + tol);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reduced_cost_matches_reversed_sum(seed in any::<u64>(), horizon in 1usize..=12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = tiny_unit("a");
            let inst = flat(vec![u.clone()], horizon, 0.0);
            let plan = max_plan(&u, horizon);
            let col = Column::new(&inst, 0, plan);
            let mut d = DualPrices::zero(horizon, 1);
            for t in 0..horizon {
                d.pi_p[t] = rng.gen_range(0.0..5.0);
                d.pi_r1[t] = rng.gen_range(0.0..5.0);
                d.pi_r2[t] = rng.gen_range(0.0..5.0);
            }
            d.sigma[0] = rng.gen_range(-100.0..100.0);
            let mut credit = 0.0;
            for t in (0..horizon).rev() {
                credit += d.pi_r2[t] * col.r2[t];
                credit += d.pi_r1[t] * col.r1[t];
                credit += d.pi_p[t] * col.power[t];
            }
            let oracle = col.cost + d.sigma[0] - credit;
            prop_assert!((reduced_cost(&col, &d) - oracle).abs() <= 1e-9);
        }
    }
}
