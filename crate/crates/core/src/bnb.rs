//! Depth-first branch and bound over the integrality marks of an `LpModel`.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::lp::{solve_lp, Basis, LpError, LpModel, LpStatus};

pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BnbError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("the root relaxation is unbounded")]
    Unbounded,
}

#[derive(Debug, Clone, Copy)]
pub struct BnbOptions {
    pub time_limit: Option<Duration>,
    /// Relative gap `(incumbent - bound) / (1 + |incumbent|)` at which the
    /// search stops.
    pub gap_limit: f64,
    pub node_limit: Option<usize>,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            time_limit: None,
            gap_limit: 1e-9,
            node_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlpStatus {
    Optimal,
    Infeasible,
    /// Time or node limit reached; incumbent and bound are the best known.
    Limit,
}

#[derive(Debug, Clone)]
pub struct IlpResult {
    pub status: IlpStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Objective of the incumbent, `+inf` without one.
    pub objective: f64,
    pub lower_bound: f64,
    pub root_bound: f64,
    pub nodes: usize,
    /// Global lower bound after each processed node.
    pub bound_trace: Vec<f64>,
}

struct Node {
    changes: Vec<(usize, f64, f64)>,
    bound: f64,
    basis: Option<Basis>,
    seq: usize,
}

fn most_fractional(model: &LpModel, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in 0..model.n_cols() {
        if !model.integer[j] {
            continue;
        }
        let f = x[j] - x[j].floor();
        let dist = f.min(1.0 - f);
        if dist > INTEGRALITY_TOL && best.map_or(true, |(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|b| b.0)
}

/// Solves `model` to integer optimality (within `gap_limit`).
///
/// Branches on the most fractional integer column, lowest index on ties,
/// dives depth first into the child on the rounding side, and backtracks
/// to the open node with the smallest parent bound.
pub fn solve_ilp(model: &LpModel, opts: &BnbOptions) -> Result<IlpResult, BnbError> {
    model.check()?;
    let start = Instant::now();
    let mut work = model.clone();
    let mut result = IlpResult {
        status: IlpStatus::Infeasible,
        incumbent: None,
        objective: f64::INFINITY,
        lower_bound: f64::NEG_INFINITY,
        root_bound: f64::NEG_INFINITY,
        nodes: 0,
        bound_trace: Vec::new(),
    };
    let mut open = vec![Node {
        changes: Vec::new(),
        bound: f64::NEG_INFINITY,
        basis: None,
        seq: 0,
    }];
    let mut seq = 1;
    let mut dive: Option<Node> = None;
    let mut gap_stop = false;
    let tol_gap = |inc: f64| opts.gap_limit * (1.0 + inc.abs());
    let cutoff = |inc: f64| if inc.is_finite() { inc - tol_gap(inc) } else { f64::INFINITY };

    loop {
        let node = match dive.take() {
            Some(n) => n,
            None => {
                // best-bound backtrack, oldest first among ties
                let Some(k) = (0..open.len()).min_by(|&a, &b| {
                    open[a].bound.total_cmp(&open[b].bound).then(open[a].seq.cmp(&open[b].seq))
                }) else {
                    break;
                };
                open.swap_remove(k)
            }
        };
        let limit_hit = opts.time_limit.is_some_and(|l| start.elapsed() >= l)
            || opts.node_limit.is_some_and(|l| result.nodes >= l);
        if limit_hit {
            open.push(node);
            result.status = IlpStatus::Limit;
            break;
        }
        if node.bound >= cutoff(result.objective) {
            continue;
        }
        result.nodes += 1;
        work.lower.copy_from_slice(&model.lower);
        work.upper.copy_from_slice(&model.upper);
        for &(j, lo, hi) in &node.changes {
            work.lower[j] = lo;
            work.upper[j] = hi;
        }
        let sol = solve_lp(&work, node.basis.as_ref())?;
        match sol.status {
            LpStatus::Unbounded if result.nodes == 1 => return Err(BnbError::Unbounded),
            LpStatus::Optimal => {}
            _ => {
                record_bound(&mut result, &open, dive.as_ref());
                continue;
            }
        }
        let value = sol.objective.max(node.bound);
        if result.nodes == 1 {
            result.root_bound = value;
        }
        if value < cutoff(result.objective) {
            match most_fractional(&work, &sol.primal) {
                None => {
                    let mut x = sol.primal.clone();
                    for j in 0..x.len() {
                        if model.integer[j] {
                            x[j] = x[j].round();
                        }
                    }
                    result.objective = model.objective_value(&x);
                    result.incumbent = Some(x);
                }
                Some(j) => {
                    let v = sol.primal[j];
                    let mut down = node.changes.clone();
                    down.push((j, work.lower[j], v.floor()));
                    let mut up = node.changes;
                    up.push((j, v.ceil(), work.upper[j]));
                    let mut make = |changes| {
                        seq += 1;
                        Node {
                            changes,
                            bound: value,
                            basis: Some(sol.basis.clone()),
                            seq,
                        }
                    };
                    let (first, second) = if v - v.floor() >= 0.5 {
                        (make(up), make(down))
                    } else {
                        (make(down), make(up))
                    };
                    open.push(second);
                    dive = Some(first);
                }
            }
        }
        record_bound(&mut result, &open, dive.as_ref());
        if result.incumbent.is_some() && result.lower_bound >= cutoff(result.objective) {
            gap_stop = true;
            break;
        }
    }

    if result.status != IlpStatus::Limit {
        if result.incumbent.is_some() {
            result.status = IlpStatus::Optimal;
            if !gap_stop {
                result.lower_bound = result.lower_bound.max(result.objective);
            }
        } else {
            result.lower_bound = f64::INFINITY;
        }
        result.bound_trace.push(result.lower_bound);
    }
    Ok(result)
}

/// Global bound: smallest parent bound among unexplored nodes, capped by
/// the incumbent; never allowed to decrease.
fn record_bound(result: &mut IlpResult, open: &[Node], dive: Option<&Node>) {
    let frontier = open
        .iter()
        .chain(dive)
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min)
        .min(result.objective);
    let b = frontier.max(result.lower_bound);
    result.lower_bound = b;
    result.bound_trace.push(b);
}
