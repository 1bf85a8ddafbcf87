//! Single-unit pricing: dynamic programming over dwell states, an exact
//! plan enumerator, the equivalent single-unit ILP and the integrality
//! experiment that compares its LP and ILP optima.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnb::{solve_ilp, BnbError, BnbOptions, IlpStatus};
use crate::compact::{build_unit_model, BuildOptions, Formulation};
use crate::lp::{solve_lp, LpError, LpModel, LpStatus};
use crate::model::{plan_cost, Instance, Plan, Unit, Walker};

/// Largest number of raw trajectories `enumerate_plans` agrees to scan.
pub const ENUMERATION_LIMIT: f64 = 1e7;
/// Relative LP/ILP gap above which a trial counts as a counter-example.
pub const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SubproblemError {
    #[error("refusing to enumerate about {0:.3e} trajectories (limit {ENUMERATION_LIMIT:e})")]
    TooManyPlans(f64),
    #[error("dual vector has length {got}, horizon is {expected}")]
    DualLength { expected: usize, got: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Bnb(#[from] BnbError),
    #[error("subproblem {0}")]
    Solver(String),
}

/// Master duals: one price per period for each demand row, one `sigma`
/// per unit for its convexity row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPrices {
    pub pi_p: Vec<f64>,
    pub pi_r1: Vec<f64>,
    pub pi_r2: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DualPrices {
    pub fn zero(horizon: usize, n_units: usize) -> Self {
        Self {
            pi_p: vec![0.0; horizon],
            pi_r1: vec![0.0; horizon],
            pi_r2: vec![0.0; horizon],
            sigma: vec![0.0; n_units],
        }
    }

    pub fn unit(&self, u: usize) -> UnitDuals {
        UnitDuals {
            pi_p: self.pi_p.clone(),
            pi_r1: self.pi_r1.clone(),
            pi_r2: self.pi_r2.clone(),
            sigma: self.sigma[u],
        }
    }

    /// Fraction of `pi_p` entries that are zero within `tol`.
    pub fn zero_fraction(&self, tol: f64) -> f64 {
        if self.pi_p.is_empty() {
            return 0.0;
        }
        self.pi_p.iter().filter(|v| v.abs() <= tol).count() as f64 / self.pi_p.len() as f64
    }
}

/// The duals seen by a single unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitDuals {
    pub pi_p: Vec<f64>,
    pub pi_r1: Vec<f64>,
    pub pi_r2: Vec<f64>,
    pub sigma: f64,
}

impl UnitDuals {
    pub fn zero(horizon: usize) -> Self {
        Self {
            pi_p: vec![0.0; horizon],
            pi_r1: vec![0.0; horizon],
            pi_r2: vec![0.0; horizon],
            sigma: 0.0,
        }
    }

    fn check(&self, horizon: usize) -> Result<(), SubproblemError> {
        for v in [&self.pi_p, &self.pi_r1, &self.pi_r2] {
            if v.len() != horizon {
                return Err(SubproblemError::DualLength {
                    expected: horizon,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    /// Dual value of operating at point `i` during period `t` (1-based).
    fn credit(&self, unit: &Unit, t: usize, i: usize) -> f64 {
        self.pi_p[t - 1] * unit.power_at(i) + self.pi_r1[t - 1] * unit.r1_at(i) + self.pi_r2[t - 1] * unit.r2_at(i)
    }
}

/// `c_p + sigma - sum_t (pi^P P + pi^R1 R1 + pi^R2 R2)` for a plan.
pub fn plan_reduced_cost(unit: &Unit, plan: &Plan, duals: &UnitDuals) -> f64 {
    let mut credit = 0.0;
    for (k, &p) in plan.points.iter().enumerate() {
        credit += duals.credit(unit, k + 1, p);
    }
    plan_cost(unit, plan) + duals.sigma - credit
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricedPlan {
    pub plan: Plan,
    pub reduced_cost: f64,
}

/// Dwell and since-start-up values past these caps gate nothing.
struct StateSpace {
    n: usize,
    min_up: usize,
    caps: Vec<usize>,
    offsets: Vec<usize>,
    size: usize,
}

impl StateSpace {
    fn new(unit: &Unit) -> Self {
        let n = unit.n_points();
        let mut caps = vec![unit.min_down.max(1)];
        for i in 1..=n {
            caps.push(unit.up_gate(i).unwrap_or(1).max(unit.down_gate(i)));
        }
        let mut offsets = vec![0];
        let mut size = caps[0];
        for cap in &caps[1..] {
            offsets.push(size);
            size += cap * unit.min_up;
        }
        Self {
            n,
            min_up: unit.min_up,
            caps,
            offsets,
            size,
        }
    }

    fn clamp(&self, w: Walker) -> Walker {
        Walker {
            point: w.point,
            dwell: w.dwell.min(self.caps[w.point]),
            since_startup: if w.point == 0 { 0 } else { w.since_startup.min(self.min_up) },
        }
    }

    fn index(&self, w: &Walker) -> usize {
        if w.point == 0 {
            w.dwell - 1
        } else {
            self.offsets[w.point] + (w.dwell - 1) * self.min_up + w.since_startup - 1
        }
    }

    fn state(&self, k: usize) -> Walker {
        if k < self.caps[0] {
            return Walker {
                point: 0,
                dwell: k + 1,
                since_startup: 0,
            };
        }
        let p = self.offsets.partition_point(|&o| o <= k) - 1;
        let rel = k - self.offsets[p];
        Walker {
            point: p,
            dwell: rel / self.min_up + 1,
            since_startup: rel % self.min_up + 1,
        }
    }
}

/// Minimum reduced-cost plan of `unit` by forward dynamic programming.
///
/// States are `(point, dwell, periods since start-up)` with both counters
/// capped at the largest duration that can still block a move. Ties keep
/// the first predecessor in state order, so results are deterministic.
pub fn price_unit_dp(unit: &Unit, duals: &UnitDuals, horizon: usize) -> Result<PricedPlan, SubproblemError> {
    Ok(price_unit_dp_k(unit, duals, horizon, 1)?.remove(0))
}

#[derive(Debug, Clone, Copy)]
struct Label {
    value: f64,
    state: u32,
    rank: u32,
}

fn insert_label(list: &mut Vec<Label>, label: Label, k: usize) {
    let pos = list.partition_point(|l| l.value <= label.value);
    if pos < k {
        list.insert(pos, label);
        list.truncate(k);
    }
}

/// The `k` cheapest distinct plans, best first. A plan fixes its state
/// sequence, so distinct label paths are distinct plans.
pub fn price_unit_dp_k(
    unit: &Unit,
    duals: &UnitDuals,
    horizon: usize,
    k: usize,
) -> Result<Vec<PricedPlan>, SubproblemError> {
    duals.check(horizon)?;
    let k = k.max(1);
    let space = StateSpace::new(unit);
    let states: Vec<Walker> = (0..space.size).map(|s| space.state(s)).collect();
    let mut labels: Vec<Vec<Label>> = vec![Vec::new(); space.size];
    let start = space.clamp(Walker::start(unit));
    labels[space.index(&start)].push(Label {
        value: 0.0,
        state: u32::MAX,
        rank: 0,
    });
    let mut history: Vec<Vec<Vec<Label>>> = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let arc: Vec<f64> = (0..=space.n)
            .map(|i| if i == 0 { 0.0 } else { unit.period_cost(i) - duals.credit(unit, t, i) })
            .collect();
        let mut next: Vec<Vec<Label>> = vec![Vec::new(); space.size];
        for (from, w) in states.iter().enumerate() {
            if labels[from].is_empty() {
                continue;
            }
            let lo = w.point.saturating_sub(1);
            let hi = (w.point + 1).min(space.n);
            for to_point in lo..=hi {
                if w.blocker(unit, to_point).is_some() {
                    continue;
                }
                let mut c = arc[to_point];
                if w.point == 0 && to_point == 1 {
                    c += unit.cost_startup;
                }
                let to = space.index(&space.clamp(w.step(to_point)));
                for (rank, l) in labels[from].iter().enumerate() {
                    let label = Label {
                        value: l.value + c,
                        state: from as u32,
                        rank: rank as u32,
                    };
                    insert_label(&mut next[to], label, k);
                }
            }
        }
        history.push(std::mem::replace(&mut labels, next));
    }
    history.push(labels);
    let mut ends: Vec<Label> = Vec::new();
    for (state, list) in history[horizon].iter().enumerate() {
        for (rank, l) in list.iter().enumerate() {
            insert_label(
                &mut ends,
                Label {
                    value: l.value,
                    state: state as u32,
                    rank: rank as u32,
                },
                k,
            );
        }
    }
    if ends.is_empty() {
        return Err(SubproblemError::Solver(format!("no feasible plan for unit `{}`", unit.id)));
    }
    Ok(ends
        .iter()
        .map(|end| {
            let mut points = vec![0; horizon];
            let (mut s, mut r) = (end.state as usize, end.rank as usize);
            for t in (1..=horizon).rev() {
                points[t - 1] = states[s].point;
                let l = history[t][s][r];
                s = l.state as usize;
                r = l.rank as usize;
            }
            let plan = Plan::new(unit.id.clone(), points);
            let reduced_cost = plan_reduced_cost(unit, &plan, duals);
            PricedPlan { plan, reduced_cost }
        })
        .collect())
}

/// Every feasible plan of `unit` over `horizon` periods, each once, in
/// lexicographic order.
pub fn enumerate_plans(unit: &Unit, horizon: usize) -> Result<Vec<Plan>, SubproblemError> {
    let raw = ((unit.n_points() + 1) as f64).powi(horizon as i32);
    if raw > ENUMERATION_LIMIT {
        return Err(SubproblemError::TooManyPlans(raw));
    }
    fn rec(unit: &Unit, horizon: usize, w: Walker, prefix: &mut Vec<usize>, out: &mut Vec<Plan>) {
        if prefix.len() == horizon {
            out.push(Plan::new(unit.id.clone(), prefix.clone()));
            return;
        }
        let lo = w.point.saturating_sub(1);
        let hi = (w.point + 1).min(unit.n_points());
        for next in lo..=hi {
            if w.blocker(unit, next).is_none() {
                prefix.push(next);
                rec(unit, horizon, w.step(next), prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(unit, horizon, Walker::start(unit), &mut Vec::with_capacity(horizon), &mut out);
    Ok(out)
}

/// Single-unit ILP whose optimum is the unit's minimum reduced cost.
pub fn build_subproblem_ilp(unit: &Unit, duals: &UnitDuals, horizon: usize) -> LpModel {
    build_subproblem_ilp_with(unit, duals, horizon, Formulation::Tight)
}

pub fn build_subproblem_ilp_with(unit: &Unit, duals: &UnitDuals, horizon: usize, formulation: Formulation) -> LpModel {
    let opts = BuildOptions {
        formulation,
        presolve: true,
    };
    build_unit_model(unit, horizon, opts, duals.sigma, |t, i| {
        unit.period_cost(i) - duals.credit(unit, t, i)
    })
    .0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualSource {
    /// Dense uniform prices.
    Uniform,
    /// Uniform prices with most entries zeroed, as real master duals are.
    Sparse,
    /// Duals recorded during a column generation run.
    Harvested,
}

#[derive(Debug, Clone)]
pub struct ConjectureConfig {
    pub trials: usize,
    pub seed: u64,
    pub formulation: Formulation,
    /// Probability that a price is zeroed in the sparse regime.
    pub sparse_zero_probability: f64,
}

impl ConjectureConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            formulation: Formulation::Tight,
            sparse_zero_probability: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub source: DualSource,
    pub lp_value: f64,
    pub ilp_value: f64,
    pub dp_value: f64,
    pub gap: f64,
    pub lp_integral: bool,
}

/// A unit and duals for which the LP relaxation is weaker than the ILP.
/// Serialized as an instance file with one unit, zero demand and an extra
/// `duals` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterExample {
    pub horizon: usize,
    pub units: Vec<Unit>,
    pub demand_power: Vec<f64>,
    pub demand_r1: Vec<f64>,
    pub demand_r2: Vec<f64>,
    pub duals: UnitDuals,
    pub lp_value: f64,
    pub ilp_value: f64,
}

impl CounterExample {
    fn new(unit: &Unit, horizon: usize, duals: &UnitDuals, lp_value: f64, ilp_value: f64) -> Self {
        Self {
            horizon,
            units: vec![unit.clone()],
            demand_power: vec![0.0; horizon],
            demand_r1: vec![0.0; horizon],
            demand_r2: vec![0.0; horizon],
            duals: duals.clone(),
            lp_value,
            ilp_value,
        }
    }

    pub fn unit(&self) -> &Unit {
        &self.units[0]
    }

    pub fn instance(&self) -> Instance {
        Instance {
            horizon: self.horizon,
            units: self.units.clone(),
            demand_power: self.demand_power.clone(),
            demand_r1: self.demand_r1.clone(),
            demand_r2: self.demand_r2.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("counter-example serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConjectureReport {
    pub trials: usize,
    pub max_gap: f64,
    pub integral_fraction: f64,
    pub outcomes: Vec<TrialOutcome>,
    pub counter_examples: Vec<CounterExample>,
}

impl ConjectureReport {
    pub fn merge(&mut self, other: ConjectureReport) {
        let total = self.trials + other.trials;
        if total > 0 {
            self.integral_fraction = (self.integral_fraction * self.trials as f64
                + other.integral_fraction * other.trials as f64)
                / total as f64;
        }
        self.trials = total;
        self.max_gap = self.max_gap.max(other.max_gap);
        self.outcomes.extend(other.outcomes);
        self.counter_examples.extend(other.counter_examples);
    }
}

/// Scale of the random prices: twice the largest average cost per MW.
fn price_scale(unit: &Unit) -> f64 {
    (1..=unit.n_points())
        .map(|i| unit.period_cost(i) / unit.power_at(i))
        .fold(0.0, f64::max)
        .max(1.0)
        * 2.0
}

fn random_duals(unit: &Unit, horizon: usize, rng: &mut ChaCha8Rng, zero_probability: f64) -> UnitDuals {
    let hi = price_scale(unit);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..horizon)
            .map(|_| {
                let v = rng.gen_range(0.0..=hi);
                if zero_probability > 0.0 && rng.gen_bool(zero_probability) {
                    0.0
                } else {
                    v
                }
            })
            .collect()
    };
    let pi_p = draw(rng);
    let pi_r1 = draw(rng);
    let pi_r2 = draw(rng);
    let k = horizon as f64 * unit.period_cost(unit.n_points()) + unit.cost_startup;
    let sigma = rng.gen_range(-k..=k.max(f64::MIN_POSITIVE));
    UnitDuals {
        pi_p,
        pi_r1,
        pi_r2,
        sigma,
    }
}

/// Solves the LP relaxation and the ILP of one pricing problem.
pub fn run_trial(
    unit: &Unit,
    horizon: usize,
    duals: &UnitDuals,
    source: DualSource,
    formulation: Formulation,
) -> Result<TrialOutcome, SubproblemError> {
    let model = build_subproblem_ilp_with(unit, duals, horizon, formulation);
    let lp = solve_lp(&model, None)?;
    if lp.status != LpStatus::Optimal {
        return Err(SubproblemError::Solver(format!("relaxation ended {:?}", lp.status)));
    }
    let ilp = solve_ilp(&model, &BnbOptions::default())?;
    if ilp.status != IlpStatus::Optimal {
        return Err(SubproblemError::Solver(format!("integer model ended {:?}", ilp.status)));
    }
    let dp = price_unit_dp(unit, duals, horizon)?;
    let lp_integral = model
        .integer
        .iter()
        .zip(&lp.primal)
        .all(|(&int, &v)| !int || (v - v.round()).abs() <= crate::bnb::INTEGRALITY_TOL);
    let gap = (ilp.objective - lp.objective).abs() / (1.0 + ilp.objective.abs());
    Ok(TrialOutcome {
        source,
        lp_value: lp.objective,
        ilp_value: ilp.objective,
        dp_value: dp.reduced_cost,
        gap,
        lp_integral,
    })
}

/// Compares LP and ILP optima of the pricing problem of `unit` under
/// random duals (half dense, half sparse) and under every `harvested`
/// dual vector.
pub fn check_conjecture(
    unit: &Unit,
    horizon: usize,
    cfg: &ConjectureConfig,
    harvested: &[UnitDuals],
) -> Result<ConjectureReport, SubproblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trials: Vec<(DualSource, UnitDuals)> = (0..cfg.trials)
        .map(|k| {
            if k % 2 == 0 {
                (DualSource::Uniform, random_duals(unit, horizon, &mut rng, 0.0))
            } else {
                (
                    DualSource::Sparse,
                    random_duals(unit, horizon, &mut rng, cfg.sparse_zero_probability),
                )
            }
        })
        .collect();
    trials.extend(harvested.iter().map(|d| (DualSource::Harvested, d.clone())));
    let outcomes = trials
        .par_iter()
        .map(|(source, duals)| run_trial(unit, horizon, duals, *source, cfg.formulation))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = ConjectureReport {
        trials: outcomes.len(),
        ..Default::default()
    };
    let mut integral = 0;
    for ((_, duals), o) in trials.iter().zip(&outcomes) {
        report.max_gap = report.max_gap.max(o.gap);
        integral += usize::from(o.lp_integral);
        if o.gap > GAP_TOL {
            report
                .counter_examples
                .push(CounterExample::new(unit, horizon, duals, o.lp_value, o.ilp_value));
        }
    }
    report.integral_fraction = if outcomes.is_empty() {
        1.0
    } else {
        integral as f64 / outcomes.len() as f64
    };
    report.outcomes = outcomes;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::model::{validate_plan, InitialCondition, OperatingPoint};

    fn unit(n: usize, init: InitialCondition) -> Unit {
        Unit {
            id: "u".into(),
            points: (1..=n)
                .map(|i| OperatingPoint {
                    power: 20.0 * i as f64,
                    r1: 2.0,
                    r2: 1.0,
                    dwell_up: 1 + i % 2,
                    dwell_down: 2,
                })
                .collect(),
            min_up: 2,
            min_down: 3,
            cost_startup: 50.0,
            cost_fixed: 10.0,
            cost_prop: 1.5,
            init,
        }
    }

    fn arb_unit() -> impl Strategy<Value = Unit> {
        (1usize..=3, 1usize..=3, 1usize..=3, any::<u64>()).prop_map(|(n, on, off, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = (1..=n)
                .map(|i| OperatingPoint {
                    power: 10.0 * i as f64 + rng.gen_range(0.0..5.0),
                    r1: rng.gen_range(0.0..3.0),
                    r2: rng.gen_range(0.0..3.0),
                    dwell_up: rng.gen_range(1..=3),
                    dwell_down: rng.gen_range(1..=3),
                })
                .collect();
            let init = if rng.gen_bool(0.5) {
                InitialCondition::offline(rng.gen_range(1..=4))
            } else {
                let p = rng.gen_range(1..=n);
                let d = rng.gen_range(1..=3);
                InitialCondition::online(p, d, d + p - 1 + rng.gen_range(0..3))
            };
            Unit {
                id: "r".into(),
                points,
                min_up: on,
                min_down: off,
                cost_startup: rng.gen_range(0.0..40.0),
                cost_fixed: rng.gen_range(0.0..10.0),
                cost_prop: rng.gen_range(0.0..3.0),
                init,
            }
        })
    }

    #[test]
    fn zero_duals_and_costs_give_zero() {
        let mut u = unit(2, InitialCondition::offline(5));
        u.cost_startup = 0.0;
        u.cost_fixed = 0.0;
        u.cost_prop = 0.0;
        let best = price_unit_dp(&u, &UnitDuals::zero(6), 6).unwrap();
        assert_eq!(best.reduced_cost, 0.0);
    }

    #[test]
    fn zero_duals_keep_an_offline_unit_offline() {
        let u = unit(3, InitialCondition::offline(5));
        let mut d = UnitDuals::zero(8);
        d.sigma = -12.5;
        let best = price_unit_dp(&u, &d, 8).unwrap();
        assert_eq!(best.plan.points, vec![0; 8]);
        assert_eq!(best.reduced_cost, -12.5);
    }

    #[test]
    fn enumeration_edge_cases() {
        let mut u = unit(1, InitialCondition::offline(1));
        u.min_up = 1;
        u.min_down = 1;
        let plans = enumerate_plans(&u, 1).unwrap();
        assert_eq!(plans.len(), 2);
        u.min_down = 2;
        assert_eq!(enumerate_plans(&u, 1).unwrap(), vec![Plan::new("u", vec![0])]);
        assert!(matches!(
            enumerate_plans(&unit(3, InitialCondition::offline(1)), 12),
            Err(SubproblemError::TooManyPlans(_))
        ));
    }

    #[test]
    fn mismatched_duals_are_rejected() {
        let u = unit(1, InitialCondition::offline(1));
        assert!(matches!(
            price_unit_dp(&u, &UnitDuals::zero(3), 4),
            Err(SubproblemError::DualLength { .. })
        ));
    }

    #[test]
    fn counter_example_round_trips() {
        let u = unit(2, InitialCondition::online(1, 2, 3));
        let ce = CounterExample::new(&u, 3, &UnitDuals::zero(3), 1.0, 2.0);
        let text = ce.to_json();
        assert!(text.contains("\"duals\""));
        assert_eq!(CounterExample::from_json(&text).unwrap(), ce);
        let inst = Instance::from_json(&text).unwrap();
        assert_eq!(inst.units[0], u);
    }

    #[test]
    fn unit_durations_give_no_gap() {
        let mut u = unit(3, InitialCondition::offline(1));
        u.min_up = 1;
        u.min_down = 1;
        for p in &mut u.points {
            p.dwell_up = 1;
            p.dwell_down = 1;
        }
        let report = check_conjecture(&u, 6, &ConjectureConfig::new(20, 3), &[]).unwrap();
        assert_eq!(report.trials, 20);
        assert!(report.max_gap <= GAP_TOL);
        assert!(report.counter_examples.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn dp_plan_is_feasible_and_minimal(u in arb_unit(), horizon in 1usize..=7, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let duals = random_duals(&u, horizon, &mut rng, 0.3);
            let best = price_unit_dp(&u, &duals, horizon).unwrap();
            prop_assert!(validate_plan(&u, &best.plan, horizon).unwrap().is_ok());
            let min = enumerate_plans(&u, horizon).unwrap().iter()
                .map(|p| plan_reduced_cost(&u, p, &duals))
                .fold(f64::INFINITY, f64::min);
            prop_assert!((best.reduced_cost - min).abs() <= 1e-9, "dp {} enum {}", best.reduced_cost, min);
        }

        #[test]
        fn k_best_plans_are_the_cheapest(u in arb_unit(), horizon in 1usize..=6, seed in any::<u64>(), k in 1usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let duals = random_duals(&u, horizon, &mut rng, 0.3);
            let got = price_unit_dp_k(&u, &duals, horizon, k).unwrap();
            let mut all: Vec<f64> = enumerate_plans(&u, horizon).unwrap().iter()
                .map(|p| plan_reduced_cost(&u, p, &duals))
                .collect();
            all.sort_by(f64::total_cmp);
            prop_assert_eq!(got.len(), k.min(all.len()));
            let mut seen = std::collections::HashSet::new();
            for (g, want) in got.iter().zip(&all) {
                prop_assert!((g.reduced_cost - want).abs() <= 1e-9);
                prop_assert!(seen.insert(g.plan.points.clone()));
            }
        }

        #[test]
        fn raising_a_power_price_never_raises_rc(u in arb_unit(), horizon in 1usize..=8, seed in any::<u64>(), t in 0usize..8, bump in 0.0f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let duals = random_duals(&u, horizon, &mut rng, 0.0);
            let before = price_unit_dp(&u, &duals, horizon).unwrap().reduced_cost;
            let mut raised = duals.clone();
            raised.pi_p[t % horizon] += bump;
            let after = price_unit_dp(&u, &raised, horizon).unwrap().reduced_cost;
            prop_assert!(after <= before + 1e-9);
        }

        #[test]
        fn ilp_matches_dp(u in arb_unit(), horizon in 1usize..=8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let duals = random_duals(&u, horizon, &mut rng, 0.5);
            let o = run_trial(&u, horizon, &duals, DualSource::Uniform, Formulation::Tight).unwrap();
            prop_assert!((o.ilp_value - o.dp_value).abs() <= 1e-6 * (1.0 + o.dp_value.abs()),
                "ilp {} dp {}", o.ilp_value, o.dp_value);
            prop_assert!(o.lp_value <= o.ilp_value + 1e-7);
        }
    }
}
