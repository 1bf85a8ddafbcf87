//! Domain types for the discretized unit commitment problem, plan
//! validation, instance files and a synthetic instance generator.
//!
//! Periods are numbered `1..=T` in reports; `Plan::points[k]` is the
//! operating point at period `k + 1`. Point `0` is the implicit offline
//! state and is never stored in `Unit::points`.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("invalid plan input: {0}")]
    PlanInput(String),
    #[error("cannot generate instance: {0}")]
    Generation(String),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

/// One discrete online operating point of a unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub power: f64,
    pub r1: f64,
    pub r2: f64,
    /// Periods the unit must hold this point before moving up.
    pub dwell_up: usize,
    /// Periods the unit must hold this point before moving down
    /// (for point 1, before shutting down).
    pub dwell_down: usize,
}

/// State of a unit at period 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub point: usize,
    /// Consecutive periods spent at `point`, period 0 included.
    pub dwell: usize,
    /// Consecutive online periods up to period 0 (online units only).
    #[serde(default)]
    pub since_startup: usize,
    /// Consecutive offline periods up to period 0 (offline units only).
    #[serde(default)]
    pub offline_elapsed: usize,
}

impl InitialCondition {
    pub fn offline(elapsed: usize) -> Self {
        Self {
            point: 0,
            dwell: elapsed,
            since_startup: 0,
            offline_elapsed: elapsed,
        }
    }

    pub fn online(point: usize, dwell: usize, since_startup: usize) -> Self {
        Self {
            point,
            dwell,
            since_startup,
            offline_elapsed: 0,
        }
    }

    pub fn is_online(&self) -> bool {
        self.point > 0
    }

    /// Whether the unit was online at pre-horizon period `tau <= 0`.
    ///
    /// Offline units are assumed to have been online for a long stretch
    /// before their last shutdown; online units offline before their last
    /// start-up.
    pub fn online_at(&self, tau: i64) -> bool {
        debug_assert!(tau <= 0);
        if self.is_online() {
            tau >= 1 - self.since_startup as i64
        } else {
            tau <= -(self.offline_elapsed as i64)
        }
    }

    /// Whether a start-up happened at pre-horizon period `tau <= 0`.
    pub fn startup_at(&self, tau: i64) -> bool {
        self.is_online() && tau == 1 - self.since_startup as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: String,
    pub points: Vec<OperatingPoint>,
    pub min_up: usize,
    pub min_down: usize,
    pub cost_startup: f64,
    pub cost_fixed: f64,
    pub cost_prop: f64,
    pub init: InitialCondition,
}

impl Unit {
    /// Number of online operating points.
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Operating point `i >= 1`.
    pub fn point(&self, i: usize) -> &OperatingPoint {
        &self.points[i - 1]
    }

    pub fn power_at(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.points[i - 1].power
        }
    }

    pub fn r1_at(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.points[i - 1].r1
        }
    }

    pub fn r2_at(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.points[i - 1].r2
        }
    }

    /// Cost of one period spent at point `i` (start-up excluded).
    pub fn period_cost(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.cost_fixed + self.cost_prop * self.power_at(i)
        }
    }

    /// Dwell needed at point `i >= 1` before moving up (`None` at the top point).
    pub fn up_gate(&self, i: usize) -> Option<usize> {
        (i < self.n_points()).then(|| self.point(i).dwell_up)
    }

    /// Dwell needed at point `i >= 1` before moving down or shutting down.
    pub fn down_gate(&self, i: usize) -> usize {
        self.point(i).dwell_down
    }

    fn validate(&self, field: &str) -> Result<(), ModelError> {
        if self.points.is_empty() {
            return Err(invalid(format!("{field}.points"), "at least one operating point is required"));
        }
        for (k, p) in self.points.iter().enumerate() {
            let f = format!("{field}.points[{k}]");
            if !(p.power.is_finite() && p.power > 0.0) {
                return Err(invalid(format!("{f}.power"), "must be finite and > 0"));
            }
            if !(p.r1.is_finite() && p.r1 >= 0.0) {
                return Err(invalid(format!("{f}.r1"), "must be finite and >= 0"));
            }
            if !(p.r2.is_finite() && p.r2 >= 0.0) {
                return Err(invalid(format!("{f}.r2"), "must be finite and >= 0"));
            }
            if p.dwell_up < 1 {
                return Err(invalid(format!("{f}.dwell_up"), "must be >= 1"));
            }
            if p.dwell_down < 1 {
                return Err(invalid(format!("{f}.dwell_down"), "must be >= 1"));
            }
        }
        if self.min_up < 1 {
            return Err(invalid(format!("{field}.min_up"), "must be >= 1"));
        }
        if self.min_down < 1 {
            return Err(invalid(format!("{field}.min_down"), "must be >= 1"));
        }
        for (name, v) in [
            ("cost_startup", self.cost_startup),
            ("cost_fixed", self.cost_fixed),
            ("cost_prop", self.cost_prop),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{field}.{name}"), "must be finite and >= 0"));
            }
        }
        let init = &self.init;
        if init.point > self.n_points() {
            return Err(invalid(
                format!("{field}.init.point"),
                format!("must be <= {} (number of points)", self.n_points()),
            ));
        }
        if init.is_online() {
            if init.dwell < 1 {
                return Err(invalid(format!("{field}.init.dwell"), "must be >= 1"));
            }
            if init.since_startup < init.dwell + init.point - 1 {
                return Err(invalid(
                    format!("{field}.init.since_startup"),
                    "must be >= dwell + point - 1 (time to ramp to the initial point)",
                ));
            }
        } else if init.offline_elapsed < 1 {
            return Err(invalid(format!("{field}.init.offline_elapsed"), "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub horizon: usize,
    pub units: Vec<Unit>,
    pub demand_power: Vec<f64>,
    pub demand_r1: Vec<f64>,
    pub demand_r2: Vec<f64>,
}

impl Instance {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.horizon < 1 {
            return Err(invalid("horizon", "must be >= 1"));
        }
        for (name, series) in [
            ("demand_power", &self.demand_power),
            ("demand_r1", &self.demand_r1),
            ("demand_r2", &self.demand_r2),
        ] {
            if series.len() != self.horizon {
                return Err(invalid(
                    name,
                    format!("has {} values, expected horizon = {}", series.len(), self.horizon),
                ));
            }
            if let Some(k) = series.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(invalid(format!("{name}[{k}]"), "must be finite and >= 0"));
            }
        }
        let mut ids = std::collections::HashSet::new();
        for (k, u) in self.units.iter().enumerate() {
            u.validate(&format!("units[{k}]"))?;
            if !ids.insert(u.id.as_str()) {
                return Err(invalid(format!("units[{k}].id"), format!("duplicate id `{}`", u.id)));
            }
        }
        Ok(())
    }

    pub fn unit_index(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }

    /// Copy of the instance where shutting down is gated by min-up only
    /// (the min-stop-down duration of point 1 is relaxed to one period,
    /// which is always satisfied).
    pub fn without_shutdown_gate(&self) -> Instance {
        let mut out = self.clone();
        for u in &mut out.units {
            u.points[0].dwell_down = 1;
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Instance, ModelError> {
        let inst: Instance = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Instance::from_json(&text)
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    fs::write(path, instance.to_json()).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One unit's operating point at every period of the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plan {
    pub unit_id: String,
    pub points: Vec<usize>,
}

impl Plan {
    pub fn new(unit_id: impl Into<String>, points: Vec<usize>) -> Self {
        Self {
            unit_id: unit_id.into(),
            points,
        }
    }

    pub fn offline(unit: &Unit, horizon: usize) -> Self {
        Self::new(unit.id.clone(), vec![0; horizon])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// Jump by more than one operating point.
    Transition,
    MinStopUp,
    MinStopDown,
    MinUp,
    MinDown,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintKind::Transition => "transition",
            ConstraintKind::MinStopUp => "min_stop_up",
            ConstraintKind::MinStopDown => "min_stop_down",
            ConstraintKind::MinUp => "min_up",
            ConstraintKind::MinDown => "min_down",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    /// 1-based period of the offending move.
    pub period: usize,
    pub constraint: ConstraintKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Running dynamic state of a unit while walking a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct Walker {
    pub point: usize,
    /// Periods at `point` (offline periods when `point == 0`).
    pub dwell: usize,
    /// Online periods since the last start-up (0 when offline).
    pub since_startup: usize,
}

impl Walker {
    pub fn start(unit: &Unit) -> Self {
        let init = &unit.init;
        if init.is_online() {
            Walker {
                point: init.point,
                dwell: init.dwell,
                since_startup: init.since_startup,
            }
        } else {
            Walker {
                point: 0,
                dwell: init.offline_elapsed,
                since_startup: 0,
            }
        }
    }

    /// Constraint blocking the move to `next`, if any.
    pub fn blocker(&self, unit: &Unit, next: usize) -> Option<ConstraintKind> {
        let p = self.point;
        if next == p {
            return None;
        }
        if next.abs_diff(p) > 1 {
            return Some(ConstraintKind::Transition);
        }
        if p == 0 {
            // start-up
            return (self.dwell < unit.min_down).then_some(ConstraintKind::MinDown);
        }
        if next > p {
            return (self.dwell < unit.point(p).dwell_up).then_some(ConstraintKind::MinStopUp);
        }
        if next == 0 && self.since_startup < unit.min_up {
            return Some(ConstraintKind::MinUp);
        }
        (self.dwell < unit.down_gate(p)).then_some(ConstraintKind::MinStopDown)
    }

    pub fn step(&self, next: usize) -> Walker {
        let dwell = if next == self.point { self.dwell + 1 } else { 1 };
        let since_startup = if next == 0 { 0 } else { self.since_startup + 1 };
        Walker {
            point: next,
            dwell,
            since_startup,
        }
    }
}

fn check_plan_input(unit: &Unit, plan: &Plan, horizon: usize) -> Result<(), ModelError> {
    if plan.points.len() != horizon {
        return Err(ModelError::PlanInput(format!(
            "plan for `{}` has {} periods, expected {horizon}",
            unit.id,
            plan.points.len()
        )));
    }
    if let Some(k) = plan.points.iter().position(|&p| p > unit.n_points()) {
        return Err(ModelError::PlanInput(format!(
            "plan for `{}` uses point {} at period {}, unit has {} points",
            unit.id,
            plan.points[k],
            k + 1,
            unit.n_points()
        )));
    }
    Ok(())
}

/// Checks a plan against transition, min-stop ramping and min-up/min-down
/// constraints, starting from the unit's initial condition.
pub fn validate_plan(unit: &Unit, plan: &Plan, horizon: usize) -> Result<ValidationReport, ModelError> {
    check_plan_input(unit, plan, horizon)?;
    let mut report = ValidationReport::default();
    let mut w = Walker::start(unit);
    for (k, &next) in plan.points.iter().enumerate() {
        if let Some(constraint) = w.blocker(unit, next) {
            report.violations.push(Violation {
                period: k + 1,
                constraint,
            });
        }
        w = w.step(next);
    }
    Ok(report)
}

/// Cost of a plan: fixed and proportional costs of every online period plus
/// start-up costs (including a start-up at period 1 from an offline start).
pub fn plan_cost(unit: &Unit, plan: &Plan) -> f64 {
    let mut prev = unit.init.point;
    let mut cost = 0.0;
    for &p in &plan.points {
        if p > 0 {
            cost += unit.period_cost(p);
            if prev == 0 {
                cost += unit.cost_startup;
            }
        }
        prev = p;
    }
    cost
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanVectors {
    pub power: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
}

pub fn plan_vectors(unit: &Unit, plan: &Plan) -> PlanVectors {
    PlanVectors {
        power: plan.points.iter().map(|&p| unit.power_at(p)).collect(),
        r1: plan.points.iter().map(|&p| unit.r1_at(p)).collect(),
        r2: plan.points.iter().map(|&p| unit.r2_at(p)).collect(),
    }
}

/// Highest plan reachable from the initial condition: ramp up (or start)
/// as soon as the dynamic constraints allow, then hold the top point.
pub fn max_plan(unit: &Unit, horizon: usize) -> Plan {
    let top = unit.n_points();
    greedy_plan(unit, horizon, |p| (p < top).then_some(p + 1))
}

/// Lowest plan reachable from the initial condition: ramp down and shut
/// down as soon as allowed, then stay offline.
pub fn min_plan(unit: &Unit, horizon: usize) -> Plan {
    greedy_plan(unit, horizon, |p| p.checked_sub(1))
}

fn greedy_plan(unit: &Unit, horizon: usize, want: impl Fn(usize) -> Option<usize>) -> Plan {
    let mut w = Walker::start(unit);
    let mut points = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let next = match want(w.point) {
            Some(q) if w.blocker(unit, q).is_none() => q,
            _ => w.point,
        };
        w = w.step(next);
        points.push(next);
    }
    Plan::new(unit.id.clone(), points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DemandProfile {
    /// Two-day sinusoid with morning and evening peaks plus noise.
    TwoPeak,
    /// Constant demand at the peak level.
    Flat,
    /// No demand at all.
    Zero,
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_units: usize,
    pub horizon: usize,
    pub points_per_unit: usize,
    pub profile: DemandProfile,
    /// Fraction of the available capacity that the peak demand may use.
    pub peak_utilisation: f64,
}

impl GeneratorConfig {
    pub fn new(seed: u64, n_units: usize, horizon: usize, points_per_unit: usize) -> Self {
        Self {
            seed,
            n_units,
            horizon,
            points_per_unit,
            profile: DemandProfile::TwoPeak,
            peak_utilisation: 0.85,
        }
    }
}

/// Minimum ratio between the all-max output and the demand, per period.
pub const GENERATOR_SLACK: f64 = 1.10;

pub fn generate_instance(cfg: &GeneratorConfig) -> Result<Instance, ModelError> {
    if cfg.n_units < 1 {
        return Err(ModelError::Generation("n_units must be >= 1".into()));
    }
    if cfg.horizon < 1 {
        return Err(ModelError::Generation("horizon must be >= 1".into()));
    }
    if cfg.points_per_unit < 1 {
        return Err(ModelError::Generation("points_per_unit must be >= 1".into()));
    }
    if !(cfg.peak_utilisation > 0.0 && cfg.peak_utilisation * GENERATOR_SLACK <= 1.0 + 1e-12) {
        return Err(ModelError::Generation(format!(
            "peak_utilisation must be in (0, {:.4}] to keep {:.0}% slack",
            1.0 / GENERATOR_SLACK,
            (GENERATOR_SLACK - 1.0) * 100.0
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let units: Vec<Unit> = (0..cfg.n_units)
        .map(|k| random_unit(&mut rng, format!("u{k:02}"), cfg.points_per_unit))
        .collect();
    let t_len = cfg.horizon;

    let mut cap = [vec![0.0; t_len], vec![0.0; t_len], vec![0.0; t_len]];
    for u in &units {
        let v = plan_vectors(u, &max_plan(u, t_len));
        for t in 0..t_len {
            cap[0][t] += v.power[t];
            cap[1][t] += v.r1[t];
            cap[2][t] += v.r2[t];
        }
    }

    let shape: Vec<f64> = match cfg.profile {
        DemandProfile::Zero => vec![0.0; t_len],
        DemandProfile::Flat => vec![1.0; t_len],
        DemandProfile::TwoPeak => (0..t_len)
            .map(|t| {
                // 48 half-hour periods per day
                let h = (t % 48) as f64 / 2.0;
                let morning = (-((h - 9.0) / 2.5).powi(2)).exp();
                let evening = (-((h - 19.0) / 2.0).powi(2)).exp();
                let base = 0.55 + 0.1 * (std::f64::consts::TAU * h / 24.0).sin();
                let noise = rng.gen_range(-0.03..0.03);
                (base + 0.35 * morning + 0.45 * evening + noise).clamp(0.2, 1.0)
            })
            .collect(),
    };
    let peak = shape.iter().cloned().fold(0.0, f64::max);
    let scale = |series: &[f64], share: f64| -> Vec<f64> {
        let top = series.iter().cloned().fold(0.0, f64::max);
        (0..t_len)
            .map(|t| {
                let want = if peak > 0.0 {
                    shape[t] / peak * top * cfg.peak_utilisation * share
                } else {
                    0.0
                };
                // pointwise cap keeps the all-max plans feasible with slack
                round2(want.min(series[t] / GENERATOR_SLACK))
            })
            .collect()
    };
    let demand_power = scale(&cap[0], 1.0);
    let demand_r1 = scale(&cap[1], 0.6);
    let demand_r2 = scale(&cap[2], 0.6);

    let inst = Instance {
        horizon: t_len,
        units,
        demand_power,
        demand_r1,
        demand_r2,
    };
    inst.validate()?;
    Ok(inst)
}

fn round2(v: f64) -> f64 {
    // round down so the slack guarantee survives rounding
    (v * 100.0).floor() / 100.0
}

fn random_unit(rng: &mut ChaCha8Rng, id: String, n_points: usize) -> Unit {
    let p_min: f64 = rng.gen_range(40.0..250.0_f64).round();
    let step: f64 = rng.gen_range(0.15..0.5) * p_min;
    let points: Vec<OperatingPoint> = (0..n_points)
        .map(|i| {
            let power = (p_min + step * i as f64).round();
            // reserve headroom shrinks as the unit approaches its top point
            let headroom = (n_points - i) as f64 / n_points as f64;
            OperatingPoint {
                power,
                r1: round2(0.05 * power * headroom + 1.0),
                r2: round2(0.10 * power * headroom + 2.0),
                dwell_up: rng.gen_range(1..=3),
                dwell_down: rng.gen_range(1..=3),
            }
        })
        .collect();
    let min_up = rng.gen_range(1..=6);
    let min_down = rng.gen_range(1..=6);
    let init = if rng.gen_bool(0.5) {
        let point = rng.gen_range(1..=n_points);
        let dwell = rng.gen_range(1..=6);
        let ramp: usize = (1..point).map(|i| points[i - 1].dwell_up).sum();
        InitialCondition::online(point, dwell, dwell + ramp + rng.gen_range(0..6))
    } else {
        InitialCondition::offline(rng.gen_range(1..=10))
    };
    Unit {
        id,
        points,
        min_up,
        min_down,
        cost_startup: rng.gen_range(200.0..3000.0_f64).round(),
        cost_fixed: rng.gen_range(50.0..800.0_f64).round(),
        cost_prop: round2(rng.gen_range(10.0..60.0)),
        init,
    }
}
