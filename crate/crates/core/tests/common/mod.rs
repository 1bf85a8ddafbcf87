//! Test-side oracles written without the library's walker, DP or builders.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use ucpd::model::{Instance, InitialCondition, OperatingPoint, Unit};

/// Longer than any duration the tests generate.
const PAD: usize = 64;
/// Pre-horizon marker for "online at some point other than the recorded one".
const OTHER: i64 = -1;

/// Explicit pre-horizon history of a unit, oldest first, ending at period 0.
fn history(unit: &Unit) -> Vec<i64> {
    let init = &unit.init;
    let mut h = Vec::new();
    if init.point > 0 {
        h.extend(std::iter::repeat(0).take(PAD));
        h.extend(std::iter::repeat(OTHER).take(init.since_startup - init.dwell));
        h.extend(std::iter::repeat(init.point as i64).take(init.dwell));
    } else {
        h.extend(std::iter::repeat(OTHER).take(PAD));
        h.extend(std::iter::repeat(0).take(init.offline_elapsed));
    }
    h
}

fn run_length(seq: &[i64], end: usize, pred: impl Fn(i64) -> bool) -> usize {
    seq[..=end].iter().rev().take_while(|&&v| pred(v)).count()
}

/// Whether the move into `seq[h]` respects every dynamic rule.
fn move_ok(unit: &Unit, seq: &[i64], h: usize) -> bool {
    let (prev, cur) = (seq[h - 1], seq[h]);
    if prev == cur {
        return true;
    }
    if (cur - prev).abs() > 1 {
        return false;
    }
    let held = run_length(seq, h - 1, |v| v == prev);
    if prev == 0 {
        return held >= unit.min_down;
    }
    let point = &unit.points[prev as usize - 1];
    if cur > prev {
        return held >= point.dwell_up;
    }
    if cur == 0 && run_length(seq, h - 1, |v| v != 0) < unit.min_up {
        return false;
    }
    held >= point.dwell_down
}

pub fn feasible(unit: &Unit, points: &[usize]) -> bool {
    let mut seq = history(unit);
    let start = seq.len();
    seq.extend(points.iter().map(|&p| p as i64));
    points.iter().all(|&p| p <= unit.points.len()) && (start..seq.len()).all(|h| move_ok(unit, &seq, h))
}

/// Every feasible point sequence of length `horizon`, by depth-first
/// extension with the move check applied to each new period.
pub fn feasible_sequences(unit: &Unit, horizon: usize) -> Vec<Vec<usize>> {
    fn extend(unit: &Unit, seq: &mut Vec<i64>, left: usize, start: usize, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(seq[start..].iter().map(|&v| v as usize).collect());
            return;
        }
        for p in 0..=unit.points.len() as i64 {
            seq.push(p);
            if move_ok(unit, seq, seq.len() - 1) {
                extend(unit, seq, left - 1, start, out);
            }
            seq.pop();
        }
    }
    let mut seq = history(unit);
    let start = seq.len();
    let mut out = Vec::new();
    extend(unit, &mut seq, horizon, start, &mut out);
    out
}

/// Every sequence over `0..=n` of length `horizon`, feasible or not.
pub fn all_sequences(n: usize, horizon: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..horizon {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..=n).map(move |p| {
                    let mut s = s.clone();
                    s.push(p);
                    s
                })
            })
            .collect();
    }
    out
}

fn level(unit: &Unit, p: usize) -> (f64, f64, f64) {
    if p == 0 {
        (0.0, 0.0, 0.0)
    } else {
        let q = &unit.points[p - 1];
        (q.power, q.r1, q.r2)
    }
}

pub fn cost(unit: &Unit, points: &[usize]) -> f64 {
    let mut prev = unit.init.point;
    let mut total = 0.0;
    for &p in points {
        if p > 0 {
            total += unit.cost_fixed + unit.cost_prop * level(unit, p).0;
            if prev == 0 {
                total += unit.cost_startup;
            }
        }
        prev = p;
    }
    total
}

pub fn reduced_cost(unit: &Unit, points: &[usize], pi: [&[f64]; 3], sigma: f64) -> f64 {
    let credit: f64 = points
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let (a, b, c) = level(unit, p);
            pi[0][k] * a + pi[1][k] * b + pi[2][k] * c
        })
        .sum();
    cost(unit, points) + sigma - credit
}

/// 0/1 compact vector of a sequence per unit, addressed by column name:
/// `s` marks the point held, `yu`/`yd` the point entered by an up/down move.
/// `None` when a needed column is missing from the model.
pub fn encode_by_name(names: &[String], instance: &Instance, plans: &[Vec<usize>]) -> Option<Vec<f64>> {
    let lookup: HashMap<&str, usize> = names.iter().enumerate().map(|(j, n)| (n.as_str(), j)).collect();
    let mut x = vec![0.0; names.len()];
    let mut set = |name: String| -> Option<()> {
        x[*lookup.get(name.as_str())?] = 1.0;
        Some(())
    };
    for (u, (unit, seq)) in instance.units.iter().zip(plans).enumerate() {
        let mut prev = unit.init.point;
        for (k, &p) in seq.iter().enumerate() {
            let t = k + 1;
            if p > 0 {
                set(format!("s_{u}_{t}_{p}"))?;
            }
            if p == prev + 1 {
                set(format!("yu_{u}_{t}_{p}"))?;
            } else if p + 1 == prev {
                set(format!("yd_{u}_{t}_{p}"))?;
            }
            prev = p;
        }
    }
    Some(x)
}

fn covers(instance: &Instance, plans: &[&Vec<usize>]) -> bool {
    (0..instance.horizon).all(|k| {
        let mut got = (0.0, 0.0, 0.0);
        for (unit, seq) in instance.units.iter().zip(plans) {
            let (a, b, c) = level(unit, seq[k]);
            got = (got.0 + a, got.1 + b, got.2 + c);
        }
        got.0 >= instance.demand_power[k] - 1e-9
            && got.1 >= instance.demand_r1[k] - 1e-9
            && got.2 >= instance.demand_r2[k] - 1e-9
    })
}

/// Cheapest combination of feasible sequences meeting every demand,
/// by exhaustive search with cost pruning. `None` when no combination exists.
pub fn global_optimum(instance: &Instance) -> Option<(f64, Vec<Vec<usize>>)> {
    let lists: Vec<Vec<(f64, Vec<usize>)>> = instance
        .units
        .iter()
        .map(|u| {
            let mut l: Vec<_> = feasible_sequences(u, instance.horizon)
                .into_iter()
                .map(|s| (cost(u, &s), s))
                .collect();
            l.sort_by(|a, b| a.0.total_cmp(&b.0));
            l
        })
        .collect();
    let floor: Vec<f64> = (0..=lists.len())
        .map(|u| lists[u..].iter().map(|l| l[0].0).sum())
        .collect();
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    let mut chosen: Vec<&Vec<usize>> = Vec::new();
    fn search<'a>(
        instance: &Instance,
        lists: &'a [Vec<(f64, Vec<usize>)>],
        floor: &[f64],
        spent: f64,
        chosen: &mut Vec<&'a Vec<usize>>,
        best: &mut Option<(f64, Vec<Vec<usize>>)>,
    ) {
        let u = chosen.len();
        if u == lists.len() {
            if covers(instance, chosen) && best.as_ref().map_or(true, |b| spent < b.0) {
                *best = Some((spent, chosen.iter().map(|s| (*s).clone()).collect()));
            }
            return;
        }
        for (c, seq) in &lists[u] {
            if best.as_ref().is_some_and(|b| spent + c + floor[u + 1] >= b.0) {
                break;
            }
            chosen.push(seq);
            search(instance, lists, floor, spent + c, chosen, best);
            chosen.pop();
        }
    }
    search(instance, &lists, &floor, 0.0, &mut chosen, &mut best);
    best
}

/// LP relaxation of the extended formulation over every feasible sequence,
/// solved by an external simplex code.
pub fn extended_lp(instance: &Instance) -> Option<f64> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let mut rows: Vec<[Vec<(microlp::Variable, f64)>; 3]> = vec![Default::default(); instance.horizon];
    for unit in &instance.units {
        let mut conv = Vec::new();
        for seq in feasible_sequences(unit, instance.horizon) {
            let v = p.add_var(cost(unit, &seq), (0.0, f64::INFINITY));
            conv.push((v, 1.0));
            for (k, &q) in seq.iter().enumerate() {
                let (a, b, c) = level(unit, q);
                for (row, coef) in rows[k].iter_mut().zip([a, b, c]) {
                    if coef != 0.0 {
                        row.push((v, coef));
                    }
                }
            }
        }
        p.add_constraint(conv.as_slice(), ComparisonOp::Eq, 1.0);
    }
    for (k, r) in rows.iter().enumerate() {
        let demand = [instance.demand_power[k], instance.demand_r1[k], instance.demand_r2[k]];
        for (row, d) in r.iter().zip(demand) {
            p.add_constraint(row.as_slice(), ComparisonOp::Ge, d);
        }
    }
    match p.solve().expect("reference solver runs") {
        SolveOutcome::Solution(s) => Some(s.objective()),
        _ => None,
    }
}

/// Small unit with random durations and initial condition.
pub fn random_unit(rng: &mut impl Rng, id: &str, max_points: usize) -> Unit {
    let n = rng.gen_range(1..=max_points);
    let mut power = rng.gen_range(20.0..60.0);
    let points = (0..n)
        .map(|_| {
            let p = OperatingPoint {
                power,
                r1: rng.gen_range(0.0..power * 0.3),
                r2: rng.gen_range(0.0..power * 0.2),
                dwell_up: rng.gen_range(1..=3),
                dwell_down: rng.gen_range(1..=3),
            };
            power += rng.gen_range(10.0..40.0);
            p
        })
        .collect();
    let init = if rng.gen_bool(0.5) {
        InitialCondition::offline(rng.gen_range(1..=4))
    } else {
        let point = rng.gen_range(1..=n);
        let dwell = rng.gen_range(1..=3);
        InitialCondition::online(point, dwell, dwell + point - 1 + rng.gen_range(0..3))
    };
    Unit {
        id: id.into(),
        points,
        min_up: rng.gen_range(1..=3),
        min_down: rng.gen_range(1..=3),
        cost_startup: rng.gen_range(0.0..200.0),
        cost_fixed: rng.gen_range(0.0..50.0),
        cost_prop: rng.gen_range(1.0..20.0),
        init,
    }
}

/// Instance over random small units with demand set to a random fraction of
/// what some feasible combination delivers, so it is always feasible.
pub fn random_instance(rng: &mut impl Rng, n_units: usize, horizon: usize, max_points: usize) -> Instance {
    let units: Vec<Unit> = (0..n_units).map(|u| random_unit(rng, &format!("g{u}"), max_points)).collect();
    let picks: Vec<Vec<usize>> = units
        .iter()
        .map(|u| {
            let all = feasible_sequences(u, horizon);
            all[rng.gen_range(0..all.len())].clone()
        })
        .collect();
    let mut demand = [vec![0.0; horizon], vec![0.0; horizon], vec![0.0; horizon]];
    for k in 0..horizon {
        for (unit, seq) in units.iter().zip(&picks) {
            let (a, b, c) = level(unit, seq[k]);
            demand[0][k] += a;
            demand[1][k] += b;
            demand[2][k] += c;
        }
        for d in demand.iter_mut() {
            d[k] *= rng.gen_range(0.5..1.0);
        }
    }
    let [demand_power, demand_r1, demand_r2] = demand;
    Instance {
        horizon,
        units,
        demand_power,
        demand_r1,
        demand_r2,
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}
