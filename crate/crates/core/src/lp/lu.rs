//! Sparse LU factorization of a square basis matrix with Markowitz pivot
//! selection and threshold partial pivoting, plus product-form (eta)
//! updates for column replacements between refactorizations.

use std::collections::BTreeSet;

const SINGULAR_TOL: f64 = 1e-11;
const THRESHOLD: f64 = 0.1;
const DROP_TOL: f64 = 1e-14;

/// Sparse column: `(row, value)` pairs.
pub type SparseCol = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct Singular {
    /// Basis positions (columns) that could not be pivoted.
    pub columns: Vec<usize>,
    /// Rows left without a pivot.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
struct LowerEta {
    pivot_row: usize,
    mults: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct UpperRow {
    pivot_row: usize,
    pivot_col: usize,
    pivot: f64,
    /// Off-diagonal entries, by column.
    rest: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct UpdateEta {
    position: usize,
    pivot: f64,
    rest: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct LuFactor {
    m: usize,
    lower: Vec<LowerEta>,
    upper: Vec<UpperRow>,
    updates: Vec<UpdateEta>,
}

impl LuFactor {
    /// Factorizes the `m x m` matrix whose `j`-th column is `cols[j]`.
    pub fn factorize(m: usize, cols: &[SparseCol]) -> Result<LuFactor, Singular> {
        assert_eq!(cols.len(), m);
        let mut active: Vec<SparseCol> = cols
            .iter()
            .map(|c| c.iter().copied().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        let mut row_pattern: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, c) in active.iter().enumerate() {
            for &(i, _) in c {
                row_pattern[i].push(j);
            }
        }
        let mut row_count: Vec<usize> = row_pattern.iter().map(Vec::len).collect();
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut by_count: BTreeSet<(usize, usize)> =
            active.iter().enumerate().map(|(j, c)| (c.len(), j)).collect();
        let mut row_singletons: Vec<usize> = (0..m).filter(|&i| row_count[i] == 1).collect();

        let mut lower = Vec::new();
        let mut upper = Vec::with_capacity(m);
        let mut dense_mark = vec![usize::MAX; m];

        let mut dead: Vec<usize> = Vec::new();
        while let Some(&(cnt, j)) = by_count.iter().next() {
            let mut choice: Option<(usize, usize)> = None;

            if cnt == 0 {
                by_count.remove(&(0, j));
                col_done[j] = true;
                dead.push(j);
                continue;
            }
            // column singleton
            if cnt == 1 {
                let (i, v) = active[j][0];
                if v.abs() > SINGULAR_TOL {
                    choice = Some((i, j));
                }
            }
            // row singleton with acceptable magnitude
            while choice.is_none() {
                let Some(i) = row_singletons.pop() else { break };
                if row_done[i] || row_count[i] != 1 {
                    continue;
                }
                let Some(&j) = row_pattern[i].iter().find(|&&j| !col_done[j] && active[j].iter().any(|e| e.0 == i)) else {
                    continue;
                };
                let colmax = active[j].iter().map(|e| e.1.abs()).fold(0.0, f64::max);
                let v = active[j].iter().find(|e| e.0 == i).unwrap().1;
                if v.abs() > SINGULAR_TOL && v.abs() >= 0.01 * colmax {
                    choice = Some((i, j));
                }
            }
            // Markowitz search over the sparsest columns
            if choice.is_none() {
                let mut best: Option<(usize, usize, usize)> = None;
                let mut negligible = Vec::new();
                let mut usable = 0;
                for &(cnt, j) in by_count.iter() {
                    if usable == 8 {
                        break;
                    }
                    let colmax = active[j].iter().map(|e| e.1.abs()).fold(0.0, f64::max);
                    if colmax <= SINGULAR_TOL {
                        negligible.push((cnt, j));
                        continue;
                    }
                    usable += 1;
                    for &(i, v) in &active[j] {
                        if v.abs() < THRESHOLD * colmax {
                            continue;
                        }
                        let score = (row_count[i] - 1) * (cnt - 1);
                        if best.map_or(true, |b| score < b.0) {
                            best = Some((score, i, j));
                        }
                    }
                }
                for (cnt, j) in negligible {
                    by_count.remove(&(cnt, j));
                    for &(i, _) in &active[j] {
                        row_count[i] -= 1;
                        if row_count[i] == 1 {
                            row_singletons.push(i);
                        }
                    }
                    active[j].clear();
                    col_done[j] = true;
                    dead.push(j);
                }
                choice = best.map(|(_, i, j)| (i, j));
            }
            let Some((pr, pc)) = choice else { continue };

            // pivot row entries outside the pivot column
            let mut row_entries: Vec<(usize, f64)> = Vec::new();
            for &j in &row_pattern[pr] {
                if col_done[j] || j == pc || dense_mark[j] == pr {
                    continue;
                }
                dense_mark[j] = pr;
                if let Some(pos) = active[j].iter().position(|e| e.0 == pr) {
                    let (_, v) = active[j].swap_remove(pos);
                    by_count.remove(&(active[j].len() + 1, j));
                    by_count.insert((active[j].len(), j));
                    row_entries.push((j, v));
                }
            }
            let pivot_col = std::mem::take(&mut active[pc]);
            by_count.remove(&(pivot_col.len(), pc));
            col_done[pc] = true;
            row_done[pr] = true;
            let pivot = pivot_col.iter().find(|e| e.0 == pr).map(|e| e.1).unwrap();

            let mut mults = Vec::new();
            for &(i, v) in &pivot_col {
                if i == pr {
                    continue;
                }
                row_count[i] -= 1;
                let l = v / pivot;
                mults.push((i, l));
                for &(j, u) in &row_entries {
                    let col = &mut active[j];
                    let before = col.len();
                    match col.iter_mut().find(|e| e.0 == i) {
                        Some(e) => e.1 -= l * u,
                        None => {
                            col.push((i, -l * u));
                            row_pattern[i].push(j);
                            row_count[i] += 1;
                        }
                    }
                    if col.len() != before {
                        by_count.remove(&(before, j));
                        by_count.insert((col.len(), j));
                    }
                }
                if row_count[i] == 1 {
                    row_singletons.push(i);
                }
            }
            for &(j, _) in &row_entries {
                if active[j].len() == 1 {
                    let i = active[j][0].0;
                    if row_count[i] == 1 {
                        row_singletons.push(i);
                    }
                }
            }
            // drop numerically cancelled entries from touched columns
            for &(j, _) in &row_entries {
                let col = &mut active[j];
                let before = col.len();
                col.retain(|&(i, v)| {
                    let keep = v.abs() > DROP_TOL;
                    if !keep {
                        row_count[i] -= 1;
                    }
                    keep
                });
                if col.len() != before {
                    by_count.remove(&(before, j));
                    by_count.insert((col.len(), j));
                }
            }
            if !mults.is_empty() {
                lower.push(LowerEta { pivot_row: pr, mults });
            }
            upper.push(UpperRow {
                pivot_row: pr,
                pivot_col: pc,
                pivot,
                rest: row_entries,
            });
        }

        if upper.len() < m {
            dead.sort_unstable();
            return Err(Singular {
                columns: dead,
                rows: (0..m).filter(|&i| !row_done[i]).collect(),
            });
        }
        Ok(LuFactor {
            m,
            lower,
            upper,
            updates: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn n_updates(&self) -> usize {
        self.updates.len()
    }

    /// Solves `B x = rhs`; `rhs` is indexed by row, the result by basis position.
    pub fn solve(&self, rhs: &mut [f64]) {
        let m = self.m;
        for eta in &self.lower {
            let xp = rhs[eta.pivot_row];
            if xp != 0.0 {
                for &(i, l) in &eta.mults {
                    rhs[i] -= l * xp;
                }
            }
        }
        let mut z = vec![0.0; m];
        for row in self.upper.iter().rev() {
            let mut v = rhs[row.pivot_row];
            for &(j, u) in &row.rest {
                v -= u * z[j];
            }
            z[row.pivot_col] = v / row.pivot;
        }
        for up in &self.updates {
            let xr = z[up.position] / up.pivot;
            z[up.position] = xr;
            if xr != 0.0 {
                for &(i, a) in &up.rest {
                    z[i] -= a * xr;
                }
            }
        }
        rhs.copy_from_slice(&z);
    }

    /// Solves `B^T y = rhs`; `rhs` is indexed by basis position, the result by row.
    pub fn solve_transpose(&self, rhs: &mut [f64]) {
        let m = self.m;
        for up in self.updates.iter().rev() {
            let mut v = rhs[up.position];
            for &(i, a) in &up.rest {
                v -= a * rhs[i];
            }
            rhs[up.position] = v / up.pivot;
        }
        let mut y = vec![0.0; m];
        for row in &self.upper {
            let w = rhs[row.pivot_col] / row.pivot;
            y[row.pivot_row] = w;
            if w != 0.0 {
                for &(j, u) in &row.rest {
                    rhs[j] -= u * w;
                }
            }
        }
        for eta in self.lower.iter().rev() {
            let mut v = y[eta.pivot_row];
            for &(i, l) in &eta.mults {
                v -= l * y[i];
            }
            y[eta.pivot_row] = v;
        }
        rhs.copy_from_slice(&y);
    }

    /// Records the replacement of the basis column at `position` by a column
    /// whose representation in the current basis is `alpha` (dense).
    pub fn update(&mut self, position: usize, alpha: &[f64]) {
        let rest = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != position && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect();
        self.updates.push(UpdateEta {
            position,
            pivot: alpha[position],
            rest,
        });
    }
}
