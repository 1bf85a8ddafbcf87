//! The compact ILP over per-period state variables `s` and move variables
//! `y`, plus decoding of solutions back into plans.
//!
//! For unit `u` with `N` online points the columns of period `t` are laid
//! out as `[s(1..=N), y_up(1..=N), y_down(0..N)]`: `y_up(i)` is a move from
//! `i - 1` to `i` and `y_down(i)` a move from `i + 1` to `i`, so `y_up(1)`
//! is a start-up and `y_down(0)` a shutdown.

use std::fmt;

use thiserror::Error;

use crate::lp::{solve_lp, Basis, LpError, LpModel, LpSolution, Sense, VarStatus};
use crate::model::{max_plan, Instance, Plan, Unit};

/// Tolerance used when deciding whether a value is integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
const PRESOLVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    State,
    MoveUp,
    MoveDown,
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarKind::State => "s",
            VarKind::MoveUp => "yu",
            VarKind::MoveDown => "yd",
        })
    }
}

/// Coordinates of one column. `unit` is the position in `Instance::units`
/// and `period` runs over `1..=T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarKey {
    pub kind: VarKind,
    pub unit: usize,
    pub period: usize,
    pub point: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct UnitBlock {
    unit_id: String,
    offset: usize,
    n_points: usize,
}

/// Bijection between `VarKey`s and column positions.
#[derive(Debug, Clone, PartialEq)]
pub struct VarIndex {
    horizon: usize,
    blocks: Vec<UnitBlock>,
}

impl VarIndex {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_units(&self) -> usize {
        self.blocks.len()
    }

    pub fn unit_id(&self, unit: usize) -> &str {
        &self.blocks[unit].unit_id
    }

    pub fn n_points(&self, unit: usize) -> usize {
        self.blocks[unit].n_points
    }

    pub fn n_cols(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + 3 * b.n_points * self.horizon)
    }

    pub fn column(&self, key: VarKey) -> Option<usize> {
        let b = self.blocks.get(key.unit)?;
        let n = b.n_points;
        if key.period == 0 || key.period > self.horizon {
            return None;
        }
        let slot = match key.kind {
            VarKind::State if (1..=n).contains(&key.point) => key.point - 1,
            VarKind::MoveUp if (1..=n).contains(&key.point) => n + key.point - 1,
            VarKind::MoveDown if key.point < n => 2 * n + key.point,
            _ => return None,
        };
        Some(b.offset + (key.period - 1) * 3 * n + slot)
    }

    pub fn key(&self, column: usize) -> Option<VarKey> {
        let unit = self.blocks.partition_point(|b| b.offset <= column).checked_sub(1)?;
        let b = &self.blocks[unit];
        let n = b.n_points;
        let rel = column - b.offset;
        let period = rel / (3 * n) + 1;
        if period > self.horizon {
            return None;
        }
        let slot = rel % (3 * n);
        let (kind, point) = match slot / n {
            0 => (VarKind::State, slot + 1),
            1 => (VarKind::MoveUp, slot - n + 1),
            _ => (VarKind::MoveDown, slot - 2 * n),
        };
        Some(VarKey {
            kind,
            unit,
            period,
            point,
        })
    }

    fn s(&self, unit: usize, period: usize, point: usize) -> usize {
        let b = &self.blocks[unit];
        b.offset + (period - 1) * 3 * b.n_points + point - 1
    }

    fn up(&self, unit: usize, period: usize, point: usize) -> usize {
        let b = &self.blocks[unit];
        b.offset + (period - 1) * 3 * b.n_points + b.n_points + point - 1
    }

    fn down(&self, unit: usize, period: usize, point: usize) -> usize {
        let b = &self.blocks[unit];
        b.offset + (period - 1) * 3 * b.n_points + 2 * b.n_points + point
    }
}

/// Strength of the transition and min-stop rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulation {
    /// Aggregated transition rows and window min-stop rows.
    #[default]
    Tight,
    /// Pointwise neighbour transitions and one min-stop row per move
    /// period. Same integer points, looser relaxation.
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub formulation: Formulation,
    /// Drop rows implied by the column bounds, fix columns that a row
    /// forces to a bound, and skip min-up rows when `min_up == 1`.
    pub presolve: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            formulation: Formulation::Tight,
            presolve: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompactModel {
    pub lp: LpModel,
    pub index: VarIndex,
    /// Rows of the power, first and second reserve demand constraints.
    pub demand_rows: Vec<[usize; 3]>,
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("solution has {got} entries, model has {expected} columns")]
    Dimension { expected: usize, got: usize },
    #[error("{} fractional state columns, first: {}", .0.len(), .0.first().map(|(c, n, v)| format!("{n} (column {c}) = {v}")).unwrap_or_default())]
    Fractional(Vec<(usize, String, f64)>),
}

/// Linear expression with a constant part.
#[derive(Debug, Default, Clone)]
struct Expr {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl Expr {
    fn var(&mut self, col: usize, coef: f64) -> &mut Self {
        self.terms.push((col, coef));
        self
    }

    fn konst(&mut self, v: f64) -> &mut Self {
        self.constant += v;
        self
    }
}

struct Emitter<'a> {
    lp: &'a mut LpModel,
    presolve: bool,
}

impl Emitter<'_> {
    /// Adds `expr (sense) 0` after moving the constant to the right-hand
    /// side. `reducible` rows may be dropped or used to fix columns.
    fn emit(&mut self, name: String, expr: &Expr, sense: Sense, reducible: bool) {
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(expr.terms.len());
        let mut sorted = expr.terms.clone();
        sorted.sort_by_key(|e| e.0);
        for (j, a) in sorted {
            match terms.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => terms.push((j, a)),
            }
        }
        terms.retain(|e| e.1 != 0.0);
        let rhs = -expr.constant;
        if terms.is_empty() {
            // constant rows carry no information for valid instances
            return;
        }
        if self.presolve && reducible && sense != Sense::Eq {
            let sign = if sense == Sense::Le { 1.0 } else { -1.0 };
            let (mut lo, mut hi) = (0.0, 0.0);
            for &(j, a) in &terms {
                let a = a * sign;
                let (l, u) = (self.lp.lower[j], self.lp.upper[j]);
                if a > 0.0 {
                    lo += a * l;
                    hi += a * u;
                } else {
                    lo += a * u;
                    hi += a * l;
                }
            }
            let r = rhs * sign;
            if hi <= r + PRESOLVE_TOL {
                return;
            }
            if (lo - r).abs() <= PRESOLVE_TOL {
                for &(j, a) in &terms {
                    if a * sign > 0.0 {
                        self.lp.upper[j] = self.lp.lower[j];
                    } else {
                        self.lp.lower[j] = self.lp.upper[j];
                    }
                }
                return;
            }
        }
        self.lp.add_row(name, terms, sense, rhs);
    }
}

/// Adds the columns and rows of one unit. `state_cost(t, i)` prices
/// `s(t, i)`; start-ups cost `unit.cost_startup`.
fn add_unit_block(
    lp: &mut LpModel,
    index: &mut VarIndex,
    unit: &Unit,
    opts: BuildOptions,
    state_cost: impl Fn(usize, usize) -> f64,
) -> usize {
    let u = index.blocks.len();
    let n = unit.n_points();
    let horizon = index.horizon;
    index.blocks.push(UnitBlock {
        unit_id: unit.id.clone(),
        offset: lp.n_cols(),
        n_points: n,
    });
    for t in 1..=horizon {
        for i in 1..=n {
            lp.add_col(format!("s_{u}_{t}_{i}"), state_cost(t, i), 0.0, 1.0, true);
        }
        for i in 1..=n {
            let cost = if i == 1 { unit.cost_startup } else { 0.0 };
            lp.add_col(format!("yu_{u}_{t}_{i}"), cost, 0.0, 1.0, true);
        }
        for i in 0..n {
            lp.add_col(format!("yd_{u}_{t}_{i}"), 0.0, 0.0, 1.0, true);
        }
    }

    let idx = &*index;
    let init = &unit.init;
    let p0 = init.point;
    // L(t, i) = sum_{j >= i} s(t, j), constant for t <= 0
    let level = |e: &mut Expr, t: i64, i: usize, coef: f64| {
        if i == 0 {
            e.konst(coef);
        } else if t >= 1 {
            for j in i..=n {
                e.var(idx.s(u, t as usize, j), coef);
            }
        } else if t == 0 && p0 >= i {
            e.konst(coef);
        }
    };
    let online = |e: &mut Expr, t: i64, coef: f64| {
        if t >= 1 {
            level(e, t, 1, coef);
        } else if init.online_at(t) {
            e.konst(coef);
        }
    };
    let startups = |e: &mut Expr, from: i64, to: i64| {
        for tp in from..=to.min(horizon as i64) {
            if tp >= 1 {
                e.var(idx.up(u, tp as usize, 1), 1.0);
            } else if init.startup_at(tp) {
                e.konst(1.0);
            }
        }
    };
    let mut em = Emitter {
        lp,
        presolve: opts.presolve,
    };

    for t in 1..=horizon {
        let mut gub = Expr::default();
        for i in 1..=n {
            gub.var(idx.s(u, t, i), 1.0);
        }
        gub.konst(-1.0);
        em.emit(format!("gub_{u}_{t}"), &gub, Sense::Le, false);

        for i in 1..=n {
            let mut e = Expr::default();
            e.var(idx.down(u, t, i - 1), 1.0);
            level(&mut e, t as i64, i, 1.0);
            level(&mut e, t as i64 - 1, i, -1.0);
            e.var(idx.up(u, t, i), -1.0);
            em.emit(format!("cpl_{u}_{t}_{i}"), &e, Sense::Eq, false);
        }
    }

    match opts.formulation {
        Formulation::Tight => {
            for t in 0..horizon as i64 {
                for i in 2..=n {
                    let mut e = Expr::default();
                    level(&mut e, t, i, 1.0);
                    level(&mut e, t + 1, i - 1, -1.0);
                    em.emit(format!("tu_{u}_{t}_{i}"), &e, Sense::Le, true);
                }
                for i in 1..n {
                    let mut e = Expr::default();
                    level(&mut e, t, i, 1.0);
                    level(&mut e, t + 1, i + 1, -1.0);
                    em.emit(format!("td_{u}_{t}_{i}"), &e, Sense::Ge, true);
                }
            }
        }
        Formulation::Weak => {
            // s(t+1, j) <= s(t, j-1) + s(t, j) + s(t, j+1), with
            // s(t, 0) = 1 - L(t, 1)
            let state = |e: &mut Expr, t: i64, j: usize, coef: f64| {
                if j == 0 {
                    e.konst(coef);
                    level(e, t, 1, -coef);
                } else if j <= n {
                    if t >= 1 {
                        e.var(idx.s(u, t as usize, j), coef);
                    } else if p0 == j {
                        e.konst(coef);
                    }
                }
            };
            for t in 0..horizon as i64 {
                for j in 0..=n {
                    let mut e = Expr::default();
                    state(&mut e, t + 1, j, 1.0);
                    if j > 0 {
                        state(&mut e, t, j - 1, -1.0);
                    }
                    state(&mut e, t, j, -1.0);
                    state(&mut e, t, j + 1, -1.0);
                    em.emit(format!("nb_{u}_{t}_{j}"), &e, Sense::Le, true);
                }
            }
        }
    }

    // min-stop: moves out of i during (t, t + dwell] need s(t, i) = 1
    let min_stop = |em: &mut Emitter, t: i64, i: usize, rhs_state: Option<f64>, weak: bool| {
        let pt = unit.point(i);
        let windows: Vec<(usize, usize, bool)> = {
            let mut w = Vec::new();
            if i < n {
                w.push((pt.dwell_up, i + 1, true));
            }
            w.push((pt.dwell_down, i - 1, false));
            w
        };
        let rhs = |e: &mut Expr| match rhs_state {
            Some(v) => {
                e.konst(-v);
            }
            None => {
                e.var(idx.s(u, t as usize, i), -1.0);
            }
        };
        let add_move = |e: &mut Expr, tp: usize, target: usize, is_up: bool| {
            let col = if is_up { idx.up(u, tp, target) } else { idx.down(u, tp, target) };
            e.var(col, 1.0);
        };
        if weak {
            for tp in (t + 1).max(1)..=horizon as i64 {
                let mut e = Expr::default();
                for &(dw, target, is_up) in &windows {
                    if tp <= t + dw as i64 {
                        add_move(&mut e, tp as usize, target, is_up);
                    }
                }
                if e.terms.is_empty() {
                    break;
                }
                rhs(&mut e);
                em.emit(format!("ms_{u}_{t}_{i}_{tp}"), &e, Sense::Le, true);
            }
        } else {
            let mut e = Expr::default();
            for &(dw, target, is_up) in &windows {
                for tp in (t + 1).max(1)..=(t + dw as i64).min(horizon as i64) {
                    add_move(&mut e, tp as usize, target, is_up);
                }
            }
            rhs(&mut e);
            em.emit(format!("ms_{u}_{t}_{i}"), &e, Sense::Le, true);
        }
    };
    let weak = opts.formulation == Formulation::Weak;
    if p0 > 0 {
        let d = init.dwell as i64;
        min_stop(&mut em, -d, p0, Some(0.0), weak);
    }
    for t in 0..horizon as i64 {
        for i in 1..=n {
            let rhs = (t == 0).then(|| if p0 == i { 1.0 } else { 0.0 });
            min_stop(&mut em, t, i, rhs, weak);
        }
    }

    // min-up: start-ups in (t - min_up, t] need the unit online at t
    let on = unit.min_up as i64;
    if !(opts.presolve && on == 1) {
        for t in 1..=horizon as i64 {
            let mut e = Expr::default();
            startups(&mut e, t - on + 1, t);
            online(&mut e, t, -1.0);
            em.emit(format!("mu_{u}_{t}"), &e, Sense::Le, true);
        }
    }

    // min-down: start-ups in (t - min_down, t] need the unit offline at
    // t - min_down; rows past the horizon keep their truncated windows
    let off = unit.min_down as i64;
    for t in 1..horizon as i64 + off {
        let mut e = Expr::default();
        startups(&mut e, t - off + 1, t);
        online(&mut e, t - off, 1.0);
        e.konst(-1.0);
        em.emit(format!("md_{u}_{t}"), &e, Sense::Le, true);
    }
    u
}

fn empty_index(horizon: usize) -> VarIndex {
    VarIndex {
        horizon,
        blocks: Vec::new(),
    }
}

/// Builds the compact ILP of `instance` with default options.
pub fn build_compact(instance: &Instance) -> CompactModel {
    build_compact_with(instance, BuildOptions::default())
}

pub fn build_compact_with(instance: &Instance, opts: BuildOptions) -> CompactModel {
    let horizon = instance.horizon;
    let mut lp = LpModel::new();
    let mut index = empty_index(horizon);
    for unit in &instance.units {
        add_unit_block(&mut lp, &mut index, unit, opts, |_, i| unit.period_cost(i));
    }
    let mut demand_rows = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let mut rows = [0; 3];
        let series = [
            ("dp", &instance.demand_power),
            ("dr1", &instance.demand_r1),
            ("dr2", &instance.demand_r2),
        ];
        for (k, (name, demand)) in series.into_iter().enumerate() {
            let mut coefs = Vec::new();
            for (u, unit) in instance.units.iter().enumerate() {
                for i in 1..=unit.n_points() {
                    let v = match k {
                        0 => unit.power_at(i),
                        1 => unit.r1_at(i),
                        _ => unit.r2_at(i),
                    };
                    if v != 0.0 {
                        coefs.push((index.s(u, t, i), v));
                    }
                }
            }
            rows[k] = lp.add_row(format!("{name}_{t}"), coefs, Sense::Ge, demand[t - 1]);
        }
        demand_rows.push(rows);
    }
    CompactModel {
        lp,
        index,
        demand_rows,
    }
}

/// Single-unit model with state costs `state_cost(t, i)` and constant
/// `offset`; the pricing problem uses it with dual-adjusted costs.
pub(crate) fn build_unit_model(
    unit: &Unit,
    horizon: usize,
    opts: BuildOptions,
    offset: f64,
    state_cost: impl Fn(usize, usize) -> f64,
) -> (LpModel, VarIndex) {
    let mut lp = LpModel::new();
    let mut index = empty_index(horizon);
    add_unit_block(&mut lp, &mut index, unit, opts, state_cost);
    lp.objective_offset = offset;
    (lp, index)
}

/// Per unit, the matrix `x[t - 1][i - 1]` of state values.
pub fn decode_solution(primal: &[f64], index: &VarIndex) -> Result<Vec<Vec<Vec<f64>>>, DecodeError> {
    if primal.len() != index.n_cols() {
        return Err(DecodeError::Dimension {
            expected: index.n_cols(),
            got: primal.len(),
        });
    }
    Ok((0..index.n_units())
        .map(|u| {
            (1..=index.horizon)
                .map(|t| (1..=index.n_points(u)).map(|i| primal[index.s(u, t, i)]).collect())
                .collect()
        })
        .collect())
}

/// Reads one plan per unit from a 0/1 solution.
pub fn decode_integer_solution(primal: &[f64], index: &VarIndex) -> Result<Vec<Plan>, DecodeError> {
    let states = decode_solution(primal, index)?;
    let mut fractional = Vec::new();
    let mut plans = Vec::with_capacity(states.len());
    for (u, matrix) in states.iter().enumerate() {
        let mut points = Vec::with_capacity(index.horizon);
        for (k, row) in matrix.iter().enumerate() {
            let mut point = 0;
            for (i, &v) in row.iter().enumerate() {
                if (v - v.round()).abs() > INTEGRALITY_TOL {
                    let col = index.s(u, k + 1, i + 1);
                    fractional.push((col, format!("s_{u}_{}_{}", k + 1, i + 1), v));
                } else if v.round() == 1.0 {
                    point = i + 1;
                }
            }
            points.push(point);
        }
        plans.push(Plan::new(index.unit_id(u), points));
    }
    if fractional.is_empty() {
        Ok(plans)
    } else {
        Err(DecodeError::Fractional(fractional))
    }
}

/// The 0/1 column vector of a set of plans, one per unit in index order.
pub fn encode_plans(instance: &Instance, index: &VarIndex, plans: &[Plan]) -> Vec<f64> {
    let mut x = vec![0.0; index.n_cols()];
    for (u, (unit, plan)) in instance.units.iter().zip(plans).enumerate() {
        let mut prev = unit.init.point;
        for (k, &p) in plan.points.iter().enumerate() {
            let t = k + 1;
            if p > 0 {
                x[index.s(u, t, p)] = 1.0;
            }
            if p == prev + 1 {
                x[index.up(u, t, p)] = 1.0;
            } else if p + 1 == prev {
                x[index.down(u, t, p)] = 1.0;
            }
            prev = p;
        }
    }
    x
}

/// Basis that puts every column at its bound in the 0/1 point `x` and
/// every row logical in the basis. It is primal feasible exactly when `x`
/// satisfies the rows.
pub fn vertex_basis(model: &LpModel, x: &[f64]) -> Basis {
    let cols = (0..model.n_cols())
        .map(|j| {
            if x[j] > 0.5 && model.upper[j].is_finite() {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            }
        })
        .collect();
    Basis {
        cols,
        rows: vec![VarStatus::Basic; model.n_rows()],
    }
}

/// LP relaxation of a compact model, started from the vertex of every
/// unit's maximal plan.
pub fn solve_compact_relaxation(instance: &Instance, model: &CompactModel) -> Result<LpSolution, LpError> {
    let plans: Vec<Plan> = instance.units.iter().map(|u| max_plan(u, instance.horizon)).collect();
    let x = encode_plans(instance, &model.index, &plans);
    solve_lp(&model.lp, Some(&vertex_basis(&model.lp, &x)))
}
