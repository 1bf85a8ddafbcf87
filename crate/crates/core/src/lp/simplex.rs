use log::{debug, trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lu::{LuFactor, SparseCol};
use super::{Basis, LpError, LpModel, LpSolution, LpStatus, Sense, VarStatus, FEAS_TOL, OPT_TOL, PIVOT_TOL};

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub max_iterations: Option<usize>,
    /// Pivots between two fresh factorizations of the basis.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            refactor_interval: 100,
            bland_after: 50,
        }
    }
}

pub fn solve_lp(model: &LpModel, warm: Option<&Basis>) -> Result<LpSolution, LpError> {
    solve_lp_with(model, warm, &SimplexOptions::default())
}

pub fn solve_lp_with(model: &LpModel, warm: Option<&Basis>, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    model.check()?;
    let mut s = Simplex::new(model, opts);
    s.install_basis(warm)?;
    let status = s.run()?;
    Ok(s.into_solution(status))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Minimizes the sum of bound violations of the basic variables.
    One,
    Two,
}

enum Ratio {
    Unbounded,
    Flip(f64),
    Pivot { position: usize, theta: f64, value: f64 },
}

struct Simplex<'a> {
    model: &'a LpModel,
    opts: &'a SimplexOptions,
    n: usize,
    m: usize,
    cols: Vec<SparseCol>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    head: Vec<usize>,
    pos: Vec<usize>,
    lu: LuFactor,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
    orig_lb: Vec<f64>,
    orig_ub: Vec<f64>,
    perturbed: Vec<bool>,
    allow_perturb: bool,
    rng: ChaCha8Rng,
}

const NONBASIC: usize = usize::MAX;
/// Pivots below this are retried on a fresh factorization, then skipped.
const SMALL_PIVOT: f64 = 1e-7;
/// Relative widening of the bounds of degenerate basic variables.
const PERTURBATION: f64 = 1e-6;
/// Bound overshoot the Harris pass may trade for a larger pivot. Kept well
/// below `FEAS_TOL` so refactorization noise does not undo feasibility.
const HARRIS_TOL: f64 = 0.1 * FEAS_TOL;

impl<'a> Simplex<'a> {
    fn new(model: &'a LpModel, opts: &'a SimplexOptions) -> Self {
        let n = model.n_cols();
        let m = model.n_rows();
        let mut cols: Vec<SparseCol> = vec![Vec::new(); n];
        for (i, r) in model.rows.iter().enumerate() {
            for &(j, a) in &r.coefs {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
        }
        // merge duplicate entries
        for c in &mut cols {
            c.sort_by_key(|e| e.0);
            c.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        let total = n + m;
        let mut lb = Vec::with_capacity(total);
        let mut ub = Vec::with_capacity(total);
        lb.extend_from_slice(&model.lower);
        ub.extend_from_slice(&model.upper);
        for r in &model.rows {
            let (l, u) = match r.sense {
                Sense::Le => (f64::NEG_INFINITY, r.rhs),
                Sense::Ge => (r.rhs, f64::INFINITY),
                Sense::Eq => (r.rhs, r.rhs),
            };
            lb.push(l);
            ub.push(u);
        }
        let max_iterations = opts.max_iterations.unwrap_or(100_000.max(50 * (n + m)));
        let (orig_lb, orig_ub) = (lb.clone(), ub.clone());
        Simplex {
            model,
            opts,
            n,
            m,
            cols,
            lb,
            ub,
            cost: vec![0.0; total],
            x: vec![0.0; total],
            head: Vec::new(),
            pos: vec![NONBASIC; total],
            lu: LuFactor::factorize(0, &[]).expect("empty factorization"),
            iterations: 0,
            max_iterations,
            degenerate_run: 0,
            orig_lb,
            orig_ub,
            perturbed: vec![false; total],
            allow_perturb: true,
            rng: ChaCha8Rng::seed_from_u64(0x5eed),
        }
    }

    fn column(&self, j: usize) -> SparseCol {
        if j < self.n {
            self.cols[j].clone()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(i, a) in &self.cols[j] {
                f(i, a);
            }
        } else {
            f(j - self.n, -1.0);
        }
    }

    fn resting_value(&self, j: usize, status: VarStatus) -> f64 {
        let (l, u) = (self.lb[j], self.ub[j]);
        match status {
            VarStatus::AtUpper if u.is_finite() => u,
            _ if l.is_finite() => l,
            _ if u.is_finite() => u,
            _ => 0.0,
        }
    }

    fn install_basis(&mut self, warm: Option<&Basis>) -> Result<(), LpError> {
        let (n, m) = (self.n, self.m);
        let usable = warm.filter(|b| b.cols.len() == n && b.rows.len() == m && b.n_basic() == m);
        if warm.is_some() && usable.is_none() {
            debug!("warm basis rejected, starting from the slack basis");
        }
        let status_of = |j: usize| -> VarStatus {
            match usable {
                Some(b) if j < n => b.cols[j],
                Some(b) => b.rows[j - n],
                None if j < n => VarStatus::AtLower,
                None => VarStatus::Basic,
            }
        };
        self.head.clear();
        for j in 0..n + m {
            let st = status_of(j);
            if st == VarStatus::Basic {
                self.pos[j] = self.head.len();
                self.head.push(j);
            } else {
                self.pos[j] = NONBASIC;
                self.x[j] = self.resting_value(j, st);
            }
        }
        self.refactor()
    }

    /// Fresh factorization of the current basis; singular columns are
    /// swapped for logicals of the uncovered rows.
    fn refactor(&mut self) -> Result<(), LpError> {
        for _attempt in 0..=self.m {
            let basis_cols: Vec<SparseCol> = self.head.iter().map(|&j| self.column(j)).collect();
            match LuFactor::factorize(self.m, &basis_cols) {
                Ok(lu) => {
                    self.lu = lu;
                    self.compute_basic_values();
                    return Ok(());
                }
                Err(sing) => {
                    debug!("singular basis: repairing {} columns", sing.columns.len());
                    for (&p, &row) in sing.columns.iter().zip(&sing.rows) {
                        let out = self.head[p];
                        let logical = self.n + row;
                        if self.pos[logical] != NONBASIC {
                            return Err(LpError::Numerical("cannot repair singular basis".into()));
                        }
                        self.pos[out] = NONBASIC;
                        self.x[out] = self.resting_value(out, VarStatus::AtLower);
                        self.head[p] = logical;
                        self.pos[logical] = p;
                    }
                }
            }
        }
        Err(LpError::Numerical("basis repair did not converge".into()))
    }

    fn compute_basic_values(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.pos[j] != NONBASIC {
                continue;
            }
            let v = self.x[j];
            if v != 0.0 {
                self.for_column(j, |i, a| rhs[i] -= a * v);
            }
        }
        self.lu.solve(&mut rhs);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[p];
        }
    }

    fn violation(&self, j: usize) -> f64 {
        (self.lb[j] - self.x[j]).max(self.x[j] - self.ub[j]).max(0.0)
    }

    fn basic_infeasibility(&self) -> f64 {
        self.head.iter().map(|&j| self.violation(j)).fold(0.0, f64::max)
    }

    /// Bounds a basic variable must respect in the ratio test. In phase 1 an
    /// infeasible variable may only move up to the bound it violates.
    fn basic_range(&self, j: usize, phase: Phase) -> (f64, f64) {
        if phase == Phase::One {
            if self.x[j] < self.lb[j] - FEAS_TOL {
                return (f64::NEG_INFINITY, self.lb[j]);
            }
            if self.x[j] > self.ub[j] + FEAS_TOL {
                return (self.ub[j], f64::INFINITY);
            }
        }
        (self.lb[j], self.ub[j])
    }

    fn set_costs(&mut self, phase: Phase) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        match phase {
            Phase::One => {
                for &j in &self.head {
                    if self.x[j] < self.lb[j] - FEAS_TOL {
                        self.cost[j] = -1.0;
                    } else if self.x[j] > self.ub[j] + FEAS_TOL {
                        self.cost[j] = 1.0;
                    }
                }
            }
            Phase::Two => self.cost[..self.n].copy_from_slice(&self.model.objective),
        }
    }

    fn duals(&self) -> Vec<f64> {
        let mut y: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        self.lu.solve_transpose(&mut y);
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        self.for_column(j, |i, a| d -= a * y[i]);
        d
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        let status = self.run_phases()?;
        if !self.unperturb() {
            return Ok(status);
        }
        self.refactor()?;
        if status != LpStatus::Optimal {
            // widened bounds only enlarge the feasible set and keep rays
            return Ok(status);
        }
        debug!("removing bound perturbation after {} iterations", self.iterations);
        self.allow_perturb = false;
        self.run_phases()
    }

    fn run_phases(&mut self) -> Result<LpStatus, LpError> {
        for _round in 0..4 {
            let mut stuck = 0;
            while self.basic_infeasibility() > FEAS_TOL {
                self.iterate(Phase::One)?;
                self.refactor()?;
                if self.basic_infeasibility() > FEAS_TOL {
                    stuck += 1;
                    if stuck == 2 {
                        debug!("phase 1 ended with infeasibility {:e}", self.basic_infeasibility());
                        return Ok(LpStatus::Infeasible);
                    }
                }
            }
            if !self.iterate(Phase::Two)? {
                return Ok(LpStatus::Unbounded);
            }
            self.refactor()?;
            if self.basic_infeasibility() <= FEAS_TOL {
                return Ok(LpStatus::Optimal);
            }
            debug!("lost feasibility after refactorization ({:e}), restarting phase 1", self.basic_infeasibility());
        }
        Err(LpError::Numerical("could not reach a feasible optimal basis".into()))
    }

    /// Widens the bounds of basic variables that are not perturbed yet;
    /// returns whether any bound changed.
    fn perturb_basic(&mut self) -> bool {
        let mut changed = false;
        for p in 0..self.head.len() {
            let j = self.head[p];
            if self.perturbed[j] {
                continue;
            }
            self.perturbed[j] = true;
            changed = true;
            if self.lb[j].is_finite() {
                self.lb[j] -= PERTURBATION * (1.0 + self.lb[j].abs()) * self.rng.gen_range(1.0..2.0);
            }
            if self.ub[j].is_finite() {
                self.ub[j] += PERTURBATION * (1.0 + self.ub[j].abs()) * self.rng.gen_range(1.0..2.0);
            }
        }
        changed
    }

    /// Restores the original bounds; nonbasic variables move to the
    /// original bound on the same side.
    fn unperturb(&mut self) -> bool {
        if !self.perturbed.iter().any(|&b| b) {
            return false;
        }
        for j in 0..self.n + self.m {
            if !self.perturbed[j] {
                continue;
            }
            self.perturbed[j] = false;
            let at_upper = self.ub[j].is_finite() && self.x[j] >= self.ub[j];
            self.lb[j] = self.orig_lb[j];
            self.ub[j] = self.orig_ub[j];
            if self.pos[j] == NONBASIC {
                let st = if at_upper { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[j] = self.resting_value(j, st);
            }
        }
        true
    }

    /// Runs simplex pivots for one phase; returns `false` when the phase 2
    /// objective is unbounded. Phase 1 stops once the basis is feasible or
    /// no column reduces the infeasibility.
    fn iterate(&mut self, phase: Phase) -> Result<bool, LpError> {
        self.degenerate_run = 0;
        if phase == Phase::Two {
            self.set_costs(Phase::Two);
        }
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            if self.lu.n_updates() >= self.opts.refactor_interval {
                self.refactor()?;
            }
            if phase == Phase::One {
                if self.basic_infeasibility() <= FEAS_TOL {
                    return Ok(true);
                }
                self.set_costs(Phase::One);
            }
            if self.degenerate_run >= self.opts.bland_after && self.allow_perturb && self.perturb_basic() {
                debug!("degenerate run at iteration {}: perturbing bounds", self.iterations);
                self.degenerate_run = 0;
            }
            let bland = self.degenerate_run >= self.opts.bland_after;
            let y = self.duals();
            let Some((q, d)) = self.price(&y, bland) else {
                return Ok(true);
            };
            let mut alpha = vec![0.0; self.m];
            self.for_column(q, |i, a| alpha[i] = a);
            self.lu.solve(&mut alpha);
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let mut ratio = self.ratio(q, dir, &alpha, phase, bland, PIVOT_TOL);
            if let Ratio::Pivot { position, .. } = ratio {
                if alpha[position].abs() < SMALL_PIVOT {
                    if self.lu.n_updates() > 0 {
                        self.refactor()?;
                        continue;
                    }
                    ratio = self.ratio(q, dir, &alpha, phase, bland, SMALL_PIVOT);
                }
            }
            self.iterations += 1;
            match ratio {
                Ratio::Unbounded => {
                    if phase == Phase::One {
                        return Err(LpError::Numerical("unbounded phase 1 ray".into()));
                    }
                    return Ok(false);
                }
                Ratio::Flip(theta) => {
                    self.step(q, dir * theta, &alpha);
                    self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                    self.degenerate_run = 0;
                }
                Ratio::Pivot { position, theta, value } => {
                    self.step(q, dir * theta, &alpha);
                    let out = self.head[position];
                    self.x[out] = value;
                    self.pos[out] = NONBASIC;
                    self.head[position] = q;
                    self.pos[q] = position;
                    self.lu.update(position, &alpha);
                    if theta <= 1e-12 {
                        self.degenerate_run += 1;
                    } else {
                        self.degenerate_run = 0;
                    }
                }
            }
            if self.iterations % 1000 == 0 {
                trace!("iter {} phase {:?} degenerate run {}", self.iterations, phase, self.degenerate_run);
            }
        }
    }

    fn step(&mut self, q: usize, delta: f64, alpha: &[f64]) {
        self.x[q] += delta;
        for (p, &j) in self.head.iter().enumerate() {
            if alpha[p] != 0.0 {
                self.x[j] -= delta * alpha[p];
            }
        }
    }

    fn price(&self, y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n + self.m {
            if self.pos[j] != NONBASIC || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.reduced_cost(j, y);
            let can_up = self.x[j] < self.ub[j];
            let can_down = self.x[j] > self.lb[j];
            let attractive = (d < -OPT_TOL && can_up) || (d > OPT_TOL && can_down);
            if !attractive {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            if best.map_or(true, |(_, bd)| d.abs() > bd.abs()) {
                best = Some((j, d));
            }
        }
        best
    }

    fn flip_distance(&self, q: usize) -> f64 {
        self.ub[q] - self.lb[q]
    }

    fn ratio(&self, q: usize, dir: f64, alpha: &[f64], phase: Phase, bland: bool, pivot_tol: f64) -> Ratio {
        if bland {
            self.ratio_textbook(q, dir, alpha, phase, pivot_tol)
        } else {
            self.ratio_harris(q, dir, alpha, phase, pivot_tol)
        }
    }

    fn ratio_harris(&self, q: usize, dir: f64, alpha: &[f64], phase: Phase, pivot_tol: f64) -> Ratio {
        let mut bound = f64::INFINITY;
        for (p, &j) in self.head.iter().enumerate() {
            let a = alpha[p];
            if a.abs() <= pivot_tol {
                continue;
            }
            let (lo, hi) = self.basic_range(j, phase);
            let rate = -dir * a;
            let r = if rate < 0.0 {
                (self.x[j] - lo + HARRIS_TOL) / -rate
            } else {
                (hi - self.x[j] + HARRIS_TOL) / rate
            };
            if r < bound {
                bound = r;
            }
        }
        let flip = self.flip_distance(q);
        if bound.is_infinite() && flip.is_infinite() {
            return Ratio::Unbounded;
        }
        if flip <= bound {
            return Ratio::Flip(flip);
        }
        let mut chosen: Option<(usize, f64, f64, f64)> = None;
        for (p, &j) in self.head.iter().enumerate() {
            let a = alpha[p];
            if a.abs() <= pivot_tol {
                continue;
            }
            let (lo, hi) = self.basic_range(j, phase);
            let rate = -dir * a;
            let (r, value) = if rate < 0.0 {
                ((self.x[j] - lo) / -rate, lo)
            } else {
                ((hi - self.x[j]) / rate, hi)
            };
            if r <= bound && chosen.map_or(true, |c| a.abs() > c.3) {
                chosen = Some((p, r, value, a.abs()));
            }
        }
        let (position, r, value, _) = chosen.expect("harris bound attained by some row");
        Ratio::Pivot {
            position,
            theta: r.max(0.0),
            value,
        }
    }

    fn ratio_textbook(&self, q: usize, dir: f64, alpha: &[f64], phase: Phase, pivot_tol: f64) -> Ratio {
        let mut chosen: Option<(usize, f64, f64)> = None;
        for (p, &j) in self.head.iter().enumerate() {
            let a = alpha[p];
            if a.abs() <= pivot_tol {
                continue;
            }
            let (lo, hi) = self.basic_range(j, phase);
            let rate = -dir * a;
            let (r, value) = if rate < 0.0 {
                ((self.x[j] - lo).max(0.0) / -rate, lo)
            } else {
                ((hi - self.x[j]).max(0.0) / rate, hi)
            };
            if !r.is_finite() {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((cp, cr, _)) => r < cr - 1e-12 || (r <= cr + 1e-12 && j < self.head[cp]),
            };
            if better {
                chosen = Some((p, r, value));
            }
        }
        let flip = self.flip_distance(q);
        match chosen {
            None if flip.is_infinite() => Ratio::Unbounded,
            None => Ratio::Flip(flip),
            Some((_, r, _)) if flip <= r => Ratio::Flip(flip),
            Some((position, theta, value)) => Ratio::Pivot { position, theta, value },
        }
    }

    fn into_solution(self, status: LpStatus) -> LpSolution {
        let (n, m) = (self.n, self.m);
        let model = self.model;
        let y = if status == LpStatus::Optimal { self.duals() } else { vec![0.0; m] };
        let primal: Vec<f64> = self.x[..n].to_vec();
        let reduced_costs: Vec<f64> = (0..n)
            .map(|j| if self.pos[j] != NONBASIC { 0.0 } else { self.reduced_cost(j, &y) })
            .collect();
        let row_activity: Vec<f64> = model.rows.iter().map(|r| r.activity(&primal)).collect();
        let status_of = |j: usize| -> VarStatus {
            if self.pos[j] != NONBASIC {
                VarStatus::Basic
            } else if self.lb[j].is_infinite() && self.ub[j].is_infinite() {
                VarStatus::Free
            } else if self.ub[j].is_finite() && self.x[j] == self.ub[j] && self.lb[j] != self.ub[j] {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            }
        };
        let basis = Basis {
            cols: (0..n).map(status_of).collect(),
            rows: (n..n + m).map(status_of).collect(),
        };
        let objective = model.objective_value(&primal);
        LpSolution {
            status,
            primal,
            duals: y,
            reduced_costs,
            row_activity,
            objective,
            basis,
            iterations: self.iterations,
        }
    }
}
