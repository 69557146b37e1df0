//! Revised simplex for the restricted master problem.
//!
//! The problem is `min c x` subject to rows `a_i x <= b_i` or `a_i x = b_i`
//! and `x >= 0`, where individual columns can be fixed at zero. Each row
//! carries a logical variable (range `[0, inf)` for `<=` rows, `[0, 0]` for
//! equalities), so every basic or nonbasic variable has lower bound 0 and
//! upper bound 0 or infinity.
//!
//! The basis inverse is kept dense and updated in product form, with a full
//! refactorisation every [`REFACTOR_EVERY`] pivots. Refactorisation only
//! inverts the square kernel of structural basic columns against the rows
//! whose logicals are nonbasic. Warm starts come for free: appending columns
//! keeps the basis primal feasible (primal simplex), fixing columns keeps it
//! dual feasible (dual simplex), and mixed states are handled by shifting
//! costs during the dual phase.

use std::time::Instant;

use crate::error::SolveError;

const REFACTOR_EVERY: usize = 100;
const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-7;
const VERIFY_DUAL_TOL: f64 = 1e-6;
/// Relative rounding noise allowed on reduced costs.
const COST_NOISE: f64 = 1e-13;
const PRIMAL_TOL: f64 = 1e-9;
const STALL_LIMIT: usize = 50;
const PERTURBATION: f64 = 1e-6;
/// Steps shorter than this count as degenerate.
const DEGENERATE_STEP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Var {
    Col(usize),
    Row(usize),
}

#[derive(Debug, Clone)]
struct Column {
    cost: f64,
    fixed: bool,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct Row {
    sense: RowSense,
    rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic(usize),
    Nonbasic,
}

/// Outcome of [`Lp::solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible { row: usize },
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct Lp {
    rows: Vec<Row>,
    cols: Vec<Column>,
    basis: Vec<Var>,
    col_status: Vec<Status>,
    row_status: Vec<Status>,
    /// Row-major `m x m`; row `p` belongs to `basis[p]`.
    binv: Vec<f64>,
    xb: Vec<f64>,
    y: Vec<f64>,
    col_shift: Vec<f64>,
    row_shift: Vec<f64>,
    fresh: bool,
    /// Largest basic cost magnitude since the last refactorisation; duals
    /// carry rounding noise proportional to it.
    cost_scale: f64,
    since_refactor: usize,
    iterations: usize,
    max_iterations: usize,
    deadline: Option<Instant>,
}

impl Default for Lp {
    fn default() -> Self {
        Self::new()
    }
}

impl Lp {
    pub fn new() -> Self {
        Lp {
            rows: Vec::new(),
            cols: Vec::new(),
            basis: Vec::new(),
            col_status: Vec::new(),
            row_status: Vec::new(),
            binv: Vec::new(),
            xb: Vec::new(),
            y: Vec::new(),
            col_shift: Vec::new(),
            row_shift: Vec::new(),
            fresh: false,
            cost_scale: 1.0,
            since_refactor: 0,
            iterations: 0,
            max_iterations: 1_000_000,
            deadline: None,
        }
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.cols.len()
    }

    /// Total simplex pivots performed so far.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn set_max_iterations(&mut self, n: usize) {
        self.max_iterations = n;
    }

    /// Solves past `deadline` stop with [`SolveError::TimeLimit`], leaving
    /// a valid basis to resume from.
    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    /// Appends a row over existing columns; its logical enters the basis.
    pub fn add_row(&mut self, sense: RowSense, rhs: f64, entries: &[(usize, f64)]) -> usize {
        let i = self.rows.len();
        self.rows.push(Row { sense, rhs });
        for &(j, v) in entries {
            if v != 0.0 {
                self.cols[j].entries.push((i, v));
            }
        }
        self.row_status.push(Status::Basic(self.basis.len()));
        self.basis.push(Var::Row(i));
        self.row_shift.push(0.0);
        self.fresh = false;
        i
    }

    /// Appends a nonbasic column.
    pub fn add_column(&mut self, cost: f64, mut entries: Vec<(usize, f64)>) -> usize {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        debug_assert!(entries.iter().all(|&(i, _)| i < self.rows.len()));
        let j = self.cols.len();
        self.cols.push(Column {
            cost,
            fixed: false,
            entries,
        });
        self.col_status.push(Status::Nonbasic);
        self.col_shift.push(0.0);
        j
    }

    /// Puts column `j` into the basis in place of the logical of `row`,
    /// which must be basic. Useful for starting from a feasible basis.
    pub fn make_basic(&mut self, j: usize, row: usize) {
        let Status::Basic(p) = self.row_status[row] else {
            panic!("logical of row {row} is not basic");
        };
        assert_eq!(self.col_status[j], Status::Nonbasic, "column {j} is already basic");
        self.row_status[row] = Status::Nonbasic;
        self.col_status[j] = Status::Basic(p);
        self.basis[p] = Var::Col(j);
        self.fresh = false;
    }

    /// Fixes a column at zero or releases it.
    pub fn set_fixed(&mut self, j: usize, fixed: bool) {
        self.cols[j].fixed = fixed;
    }

    pub fn is_fixed(&self, j: usize) -> bool {
        self.cols[j].fixed
    }

    pub fn cost(&self, j: usize) -> f64 {
        self.cols[j].cost
    }

    pub fn value(&self, j: usize) -> f64 {
        match self.col_status[j] {
            Status::Basic(p) => self.xb[p].max(0.0),
            Status::Nonbasic => 0.0,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.cols.len()).map(|j| self.value(j)).collect()
    }

    pub fn objective(&self) -> f64 {
        (0..self.cols.len()).map(|j| self.cols[j].cost * self.value(j)).sum()
    }

    /// Row duals of the last solve.
    pub fn duals(&self) -> &[f64] {
        &self.y
    }

    pub fn reduced_cost(&self, j: usize) -> f64 {
        self.d(Var::Col(j))
    }

    /// Optimises from the current basis.
    pub fn solve(&mut self) -> Result<LpStatus, SolveError> {
        let m = self.rows.len();
        if m == 0 {
            self.y.clear();
            return Ok(if self.cols.iter().any(|c| c.cost < 0.0 && !c.fixed) {
                LpStatus::Unbounded
            } else {
                LpStatus::Optimal
            });
        }
        let start = self.iterations;
        for _round in 0..8 {
            if !self.fresh {
                self.refactor();
            }
            if self.primal_infeasibility().is_some() {
                self.shift_costs();
                let outcome = self.dual_simplex(start);
                self.clear_shifts();
                match outcome? {
                    LpStatus::Optimal => {}
                    other => return Ok(other),
                }
            }
            match self.primal_simplex(start)? {
                LpStatus::Optimal => {}
                other => return Ok(other),
            }
            self.refactor();
            if self.primal_infeasibility().is_none() && self.dual_infeasible().is_none() {
                return Ok(LpStatus::Optimal);
            }
        }
        Err(SolveError::Lp("simplex failed to settle after refactorisation".into()))
    }

    fn upper_is_zero(&self, v: Var) -> bool {
        match v {
            Var::Col(j) => self.cols[j].fixed,
            Var::Row(i) => self.rows[i].sense == RowSense::Eq,
        }
    }

    fn var_cost(&self, v: Var) -> f64 {
        match v {
            Var::Col(j) => self.cols[j].cost + self.col_shift[j],
            Var::Row(i) => self.row_shift[i],
        }
    }

    fn set_status(&mut self, v: Var, s: Status) {
        match v {
            Var::Col(j) => self.col_status[j] = s,
            Var::Row(i) => self.row_status[i] = s,
        }
    }

    /// Sparse dot of a vector indexed by rows with the column of `v`.
    fn dot(&self, vec: &[f64], v: Var) -> f64 {
        match v {
            Var::Col(j) => self.cols[j].entries.iter().map(|&(i, a)| vec[i] * a).sum(),
            Var::Row(i) => vec[i],
        }
    }

    fn d(&self, v: Var) -> f64 {
        self.var_cost(v) - self.dot(&self.y, v)
    }

    /// Whether the reduced cost of `v` is negative beyond rounding noise,
    /// judged relative to the magnitude of the terms it is computed from.
    fn is_attractive(&self, v: Var, d: f64) -> bool {
        self.beyond(v, d, DUAL_TOL)
    }

    fn beyond(&self, v: Var, d: f64, tol: f64) -> bool {
        if d >= -tol {
            return false;
        }
        let terms = match v {
            Var::Col(j) => self.cols[j].entries.iter().map(|&(i, a)| (self.y[i] * a).abs()).sum(),
            Var::Row(i) => self.y[i].abs(),
        };
        d < -tol * self.var_cost(v).abs().max(terms).max(1.0) - COST_NOISE * self.cost_scale
    }

    /// Nonbasic variables that may move away from zero.
    fn movable(&self) -> impl Iterator<Item = Var> + '_ {
        let cols = (0..self.cols.len())
            .filter(|&j| self.col_status[j] == Status::Nonbasic && !self.cols[j].fixed)
            .map(Var::Col);
        let rows = (0..self.rows.len())
            .filter(|&i| self.row_status[i] == Status::Nonbasic && self.rows[i].sense == RowSense::Le)
            .map(Var::Row);
        cols.chain(rows)
    }

    fn primal_tol(&self) -> f64 {
        let scale = self.rows.iter().fold(1.0f64, |a, r| a.max(r.rhs.abs()));
        PRIMAL_TOL * scale
    }

    /// Position of the most violated basic variable and whether it sits
    /// above its (zero) upper bound.
    fn primal_infeasibility(&self) -> Option<(usize, bool)> {
        let tol = self.primal_tol();
        let mut best: Option<(usize, bool, f64)> = None;
        for (p, &v) in self.basis.iter().enumerate() {
            let x = self.xb[p];
            let (viol, above) = if x < -tol {
                (-x, false)
            } else if x > tol && self.upper_is_zero(v) {
                (x, true)
            } else {
                continue;
            };
            if best.is_none_or(|(_, _, b)| viol > b) {
                best = Some((p, above, viol));
            }
        }
        best.map(|(p, above, _)| (p, above))
    }

    /// Reduced cost violating optimality after a refactorisation; looser
    /// than the pivoting tolerance so noise cannot trigger endless rounds.
    fn dual_infeasible(&self) -> Option<Var> {
        self.movable().find(|&v| self.beyond(v, self.d(v), VERIFY_DUAL_TOL))
    }

    /// Makes every nonbasic reduced cost nonnegative and adds a small
    /// deterministic perturbation against dual degeneracy.
    fn shift_costs(&mut self) {
        let shifts: Vec<(Var, f64)> = self
            .movable()
            .map(|v| {
                let d = self.d(v);
                let repair = if d < 0.0 { -d } else { 0.0 };
                let scale = self.var_cost(v).abs().max(1.0);
                (v, repair + PERTURBATION * (1.0 + jitter(v)) * scale)
            })
            .collect();
        for (v, s) in shifts {
            match v {
                Var::Col(j) => self.col_shift[j] += s,
                Var::Row(i) => self.row_shift[i] += s,
            }
        }
    }

    fn clear_shifts(&mut self) {
        let shifted = self.col_shift.iter().any(|&s| s != 0.0) || self.row_shift.iter().any(|&s| s != 0.0);
        self.col_shift.iter_mut().for_each(|s| *s = 0.0);
        self.row_shift.iter_mut().for_each(|s| *s = 0.0);
        if shifted {
            self.compute_duals();
        }
    }

    fn ftran(&self, v: Var) -> Vec<f64> {
        let m = self.rows.len();
        let mut alpha = vec![0.0; m];
        match v {
            Var::Col(j) => {
                let entries = &self.cols[j].entries;
                for (p, a) in alpha.iter_mut().enumerate() {
                    let row = &self.binv[p * m..(p + 1) * m];
                    *a = entries.iter().map(|&(i, val)| row[i] * val).sum();
                }
            }
            Var::Row(i) => {
                for (p, a) in alpha.iter_mut().enumerate() {
                    *a = self.binv[p * m + i];
                }
            }
        }
        alpha
    }

    fn compute_primal(&mut self) {
        let m = self.rows.len();
        self.xb = (0..m)
            .map(|p| {
                let row = &self.binv[p * m..(p + 1) * m];
                row.iter().zip(&self.rows).map(|(b, r)| b * r.rhs).sum()
            })
            .collect();
    }

    fn compute_duals(&mut self) {
        let m = self.rows.len();
        let mut y = vec![0.0; m];
        for p in 0..m {
            let c = self.var_cost(self.basis[p]);
            if c != 0.0 {
                let row = &self.binv[p * m..(p + 1) * m];
                for (yi, b) in y.iter_mut().zip(row) {
                    *yi += c * b;
                }
            }
        }
        self.y = y;
    }

    /// Rebuilds the basis inverse from scratch, replacing dependent
    /// structural columns by logicals when the kernel is singular.
    fn refactor(&mut self) {
        let m = self.rows.len();
        loop {
            let mut pos_of_row = vec![usize::MAX; m];
            let mut structural: Vec<(usize, usize)> = Vec::new();
            for (p, &v) in self.basis.iter().enumerate() {
                match v {
                    Var::Row(i) => pos_of_row[i] = p,
                    Var::Col(j) => structural.push((p, j)),
                }
            }
            let uncovered: Vec<usize> = (0..m).filter(|&i| pos_of_row[i] == usize::MAX).collect();
            let k = structural.len();
            debug_assert_eq!(uncovered.len(), k);
            let mut local = vec![usize::MAX; m];
            for (a, &i) in uncovered.iter().enumerate() {
                local[i] = a;
            }
            // kernel K[a][t] = A[uncovered[a]][structural[t]]
            let mut kern = vec![0.0; k * k];
            for (t, &(_, j)) in structural.iter().enumerate() {
                for &(i, v) in &self.cols[j].entries {
                    if local[i] != usize::MAX {
                        kern[local[i] * k + t] = v;
                    }
                }
            }
            match invert(&mut kern, k) {
                Ok(kinv) => {
                    let mut binv = vec![0.0; m * m];
                    for (i, &p) in pos_of_row.iter().enumerate() {
                        if p != usize::MAX {
                            binv[p * m + i] = 1.0;
                        }
                    }
                    for (t, &(p, j)) in structural.iter().enumerate() {
                        let krow = &kinv[t * k..(t + 1) * k];
                        for (a, &i) in uncovered.iter().enumerate() {
                            binv[p * m + i] = krow[a];
                        }
                        for &(s, v) in &self.cols[j].entries {
                            let ps = pos_of_row[s];
                            if ps == usize::MAX {
                                continue;
                            }
                            for (a, &i) in uncovered.iter().enumerate() {
                                binv[ps * m + i] -= v * krow[a];
                            }
                        }
                    }
                    self.binv = binv;
                    break;
                }
                Err(Singular { dependent, free_rows }) => {
                    for (t, a) in dependent.into_iter().zip(free_rows) {
                        let (p, j) = structural[t];
                        let i = uncovered[a];
                        self.col_status[j] = Status::Nonbasic;
                        self.row_status[i] = Status::Basic(p);
                        self.basis[p] = Var::Row(i);
                    }
                }
            }
        }
        self.cost_scale = self.basis.iter().fold(1.0f64, |a, &v| a.max(self.var_cost(v).abs()));
        self.compute_primal();
        self.compute_duals();
        self.fresh = true;
        self.since_refactor = 0;
    }

    fn pivot(&mut self, r: usize, entering: Var, alpha: &[f64], step: f64) {
        let m = self.rows.len();
        let d_q = self.d(entering);
        let ar = alpha[r];
        // duals: y += d_q / alpha_r * rho_r
        let factor = d_q / ar;
        if factor != 0.0 {
            let row = &self.binv[r * m..(r + 1) * m];
            for (yi, b) in self.y.iter_mut().zip(row) {
                *yi += factor * b;
            }
        }
        for (p, x) in self.xb.iter_mut().enumerate() {
            if p != r && alpha[p] != 0.0 {
                *x -= step * alpha[p];
            }
        }
        self.xb[r] = step;
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for b in pivot_row.iter_mut() {
            *b /= ar;
        }
        for (p, &a) in alpha.iter().enumerate() {
            if p == r || a.abs() < 1e-14 {
                continue;
            }
            let target = if p < r {
                &mut before[p * m..(p + 1) * m]
            } else {
                let q = p - r - 1;
                &mut after[q * m..(q + 1) * m]
            };
            for (t, b) in target.iter_mut().zip(pivot_row.iter()) {
                *t -= a * b;
            }
        }
        let leaving = self.basis[r];
        self.set_status(leaving, Status::Nonbasic);
        self.set_status(entering, Status::Basic(r));
        self.basis[r] = entering;
        self.cost_scale = self.cost_scale.max(self.var_cost(entering).abs());
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn check_budget(&self, start: usize) -> Result<(), SolveError> {
        let done = self.iterations - start;
        if done > self.max_iterations {
            return Err(SolveError::Lp(format!("iteration limit of {} reached", self.max_iterations)));
        }
        if done % 32 == 31 && self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(SolveError::TimeLimit);
        }
        Ok(())
    }

    fn primal_simplex(&mut self, start: usize) -> Result<LpStatus, SolveError> {
        let mut stall = 0usize;
        loop {
            self.check_budget(start)?;
            let bland = stall > STALL_LIMIT;
            let mut entering: Option<(Var, f64)> = None;
            for v in self.movable() {
                let d = self.d(v);
                if self.is_attractive(v, d) {
                    if bland {
                        if entering.is_none_or(|(e, _)| v < e) {
                            entering = Some((v, d));
                        }
                    } else if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((v, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(LpStatus::Optimal);
            };
            let alpha = self.ftran(q);
            // Harris two-pass ratio test
            let tol = self.primal_tol();
            let bound = |p: usize, a: f64, relaxed: bool| -> Option<f64> {
                let slack = if relaxed { tol } else { 0.0 };
                let x = self.xb[p];
                if a > PIVOT_TOL {
                    Some((x.max(0.0) + slack) / a)
                } else if a < -PIVOT_TOL && self.upper_is_zero(self.basis[p]) {
                    Some(((-x).max(0.0) + slack) / -a)
                } else {
                    None
                }
            };
            let max_step = (0..alpha.len())
                .filter_map(|p| bound(p, alpha[p], true))
                .fold(f64::INFINITY, f64::min);
            if max_step.is_infinite() {
                return Ok(LpStatus::Unbounded);
            }
            let limit = if bland {
                (0..alpha.len())
                    .filter_map(|p| bound(p, alpha[p], false))
                    .fold(f64::INFINITY, f64::min)
            } else {
                max_step
            };
            let mut leave: Option<(usize, f64)> = None;
            for (p, &a) in alpha.iter().enumerate() {
                if let Some(t) = bound(p, a, false) {
                    if t <= limit {
                        let better = match leave {
                            None => true,
                            Some((lp, _)) if bland => self.basis[p] < self.basis[lp],
                            Some((lp, _)) => a.abs() > alpha[lp].abs(),
                        };
                        if better {
                            leave = Some((p, t));
                        }
                    }
                }
            }
            let (r, t) = leave.expect("ratio test found a bound");
            stall = if t < DEGENERATE_STEP { stall + 1 } else { 0 };
            self.pivot(r, q, &alpha, t);
        }
    }

    /// Infeasible basic position with the smallest variable.
    fn first_infeasibility(&self) -> Option<(usize, bool)> {
        let tol = self.primal_tol();
        let mut best: Option<(usize, bool)> = None;
        for (p, &v) in self.basis.iter().enumerate() {
            let x = self.xb[p];
            let above = if x < -tol {
                false
            } else if x > tol && self.upper_is_zero(v) {
                true
            } else {
                continue;
            };
            if best.is_none_or(|(b, _)| v < self.basis[b]) {
                best = Some((p, above));
            }
        }
        best
    }

    fn dual_simplex(&mut self, start: usize) -> Result<LpStatus, SolveError> {
        let m = self.rows.len();
        let mut stall = 0usize;
        loop {
            self.check_budget(start)?;
            let bland = stall > STALL_LIMIT;
            let pick = if bland {
                self.first_infeasibility()
            } else {
                self.primal_infeasibility()
            };
            let Some((r, above)) = pick else {
                return Ok(LpStatus::Optimal);
            };
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let candidates: Vec<(Var, f64, f64)> = self
                .movable()
                .filter_map(|v| {
                    let a = self.dot(&rho, v);
                    let eligible = if above { a > PIVOT_TOL } else { a < -PIVOT_TOL };
                    eligible.then(|| (v, self.d(v).max(0.0), a.abs()))
                })
                .collect();
            if candidates.is_empty() {
                let row = match self.basis[r] {
                    Var::Row(i) => i,
                    Var::Col(_) => r,
                };
                return Ok(LpStatus::Infeasible { row });
            }
            let (q, ratio) = if bland {
                let min_ratio = candidates
                    .iter()
                    .map(|&(_, d, a)| d / a)
                    .fold(f64::INFINITY, f64::min);
                candidates
                    .iter()
                    .filter(|&&(_, d, a)| d / a <= min_ratio)
                    .map(|&(v, d, a)| (v, d / a))
                    .min_by(|x, y| x.0.cmp(&y.0))
                    .expect("at least one candidate attains the minimum ratio")
            } else {
                let max_ratio = candidates
                    .iter()
                    .map(|&(_, d, a)| (d + DUAL_TOL) / a)
                    .fold(f64::INFINITY, f64::min);
                candidates
                    .iter()
                    .filter(|&&(_, d, a)| d / a <= max_ratio)
                    .fold(None::<(Var, f64, f64)>, |best, &c| match best {
                        Some(b) if b.2 >= c.2 => Some(b),
                        _ => Some(c),
                    })
                    .map(|(v, d, a)| (v, d / a))
                    .expect("at least one candidate within the relaxed ratio")
            };
            stall = if ratio < DEGENERATE_STEP { stall + 1 } else { 0 };
            let alpha = self.ftran(q);
            if alpha[r].abs() < PIVOT_TOL {
                self.refactor();
                continue;
            }
            let d_q = self.d(q);
            if d_q < 0.0 {
                match q {
                    Var::Col(j) => self.col_shift[j] -= d_q,
                    Var::Row(i) => self.row_shift[i] -= d_q,
                }
            }
            let step = self.xb[r] / alpha[r];
            self.pivot(r, q, &alpha, step);
        }
    }
}

/// Pseudo-random value in `[0, 1)` fixed per variable.
fn jitter(v: Var) -> f64 {
    let (tag, k) = match v {
        Var::Col(j) => (0u64, j as u64),
        Var::Row(i) => (1u64, i as u64),
    };
    let mut z = (k << 1 | tag).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

struct Singular {
    /// Kernel columns without a pivot.
    dependent: Vec<usize>,
    /// Kernel rows left unused, paired with `dependent`.
    free_rows: Vec<usize>,
}

/// Gauss-Jordan inverse of a row-major `k x k` matrix with partial pivoting.
fn invert(a: &mut [f64], k: usize) -> Result<Vec<f64>, Singular> {
    let mut inv = vec![0.0; k * k];
    for i in 0..k {
        inv[i * k + i] = 1.0;
    }
    // row_of[t]: physical row holding the pivot of column t
    let mut used = vec![false; k];
    let mut row_of = vec![usize::MAX; k];
    let mut dependent = Vec::new();
    for t in 0..k {
        let mut best = None;
        let mut best_val = 1e-11;
        for r in 0..k {
            if !used[r] && a[r * k + t].abs() > best_val {
                best_val = a[r * k + t].abs();
                best = Some(r);
            }
        }
        let Some(r) = best else {
            dependent.push(t);
            continue;
        };
        used[r] = true;
        row_of[t] = r;
        let piv = a[r * k + t];
        for c in 0..k {
            a[r * k + c] /= piv;
            inv[r * k + c] /= piv;
        }
        for o in 0..k {
            if o == r {
                continue;
            }
            let f = a[o * k + t];
            if f == 0.0 {
                continue;
            }
            for c in 0..k {
                a[o * k + c] -= f * a[r * k + c];
                inv[o * k + c] -= f * inv[r * k + c];
            }
        }
    }
    if !dependent.is_empty() {
        let free_rows = (0..k).filter(|&r| !used[r]).collect();
        return Err(Singular { dependent, free_rows });
    }
    // rows of `inv` are permuted: column t's pivot lives in row_of[t]
    let mut out = vec![0.0; k * k];
    for t in 0..k {
        let r = row_of[t];
        out[t * k..(t + 1) * k].copy_from_slice(&inv[r * k..(r + 1) * k]);
    }
    Ok(out)
}
