//! Restricted master problem over a column pool, and the branch-and-bound
//! that turns it into an integer schedule.
//!
//! Rows: one convexity row per patient, one capacity row per
//! (machine, day, window) cell touched by a pooled column, and one dominance
//! row per consecutive pair of each protocol chain. Every convexity row also
//! has an artificial column at a prohibitive cost so the LP stays feasible
//! whatever the pool contains; a solution that uses one is treated as
//! infeasible.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::time::{Duration, Instant};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{Day, Instance, MachineId, PatientSchedule, WindowId};
use crate::heuristics::{chain_respecting, Usage};
use crate::error::SolveError;
use crate::lp::{Lp, LpStatus, RowSense};
use crate::objective::{composite_cost, total_objective, ObjectiveWeights, OBJECTIVE_OFFSET};
use crate::pricing::{
    check_isolated, solve_pricing, solve_pricing_restricted, CourseSearch, DualPrices, PricingRestriction,
    NEGATIVE_REDUCED_COST,
};
use crate::solution::validate_schedules;

const INTEGRAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PoolColumn {
    pub patient: usize,
    pub schedule: PatientSchedule,
    pub cost: f64,
}

/// Deduplicated set of candidate schedules.
#[derive(Debug, Clone, Default)]
pub struct ColumnPool {
    columns: Vec<PoolColumn>,
    index: BTreeMap<PatientSchedule, usize>,
    by_patient: Vec<Vec<usize>>,
}

impl ColumnPool {
    pub fn new(inst: &Instance) -> Self {
        ColumnPool {
            columns: Vec::new(),
            index: BTreeMap::new(),
            by_patient: vec![Vec::new(); inst.patients().len()],
        }
    }

    /// Adds a schedule of patient index `patient`; returns its pool index,
    /// or `None` if it is already pooled.
    pub fn add(
        &mut self,
        inst: &Instance,
        patient: usize,
        schedule: PatientSchedule,
        weights: &ObjectiveWeights,
    ) -> Result<Option<usize>, SolveError> {
        if self.index.contains_key(&schedule) {
            return Ok(None);
        }
        check_isolated(inst, patient, &schedule)?;
        let cost = composite_cost(inst, patient, &schedule, weights);
        let k = self.columns.len();
        self.index.insert(schedule.clone(), k);
        self.by_patient[patient].push(k);
        self.columns.push(PoolColumn {
            patient,
            schedule,
            cost,
        });
        Ok(Some(k))
    }

    pub fn contains(&self, schedule: &PatientSchedule) -> bool {
        self.index.contains_key(schedule)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[PoolColumn] {
        &self.columns
    }

    pub fn get(&self, k: usize) -> &PoolColumn {
        &self.columns[k]
    }

    pub fn of_patient(&self, patient: usize) -> &[usize] {
        &self.by_patient[patient]
    }

    /// First patient without any pooled column.
    pub fn uncovered(&self) -> Option<usize> {
        self.by_patient.iter().position(Vec::is_empty)
    }
}

/// Optimal LP solution of the master.
#[derive(Debug, Clone)]
pub struct LpResult {
    /// `1 + sum c x` (artificials included).
    pub objective: f64,
    pub duals: DualPrices,
    /// Value per pool column.
    pub values: Vec<f64>,
    /// Some artificial column is positive.
    pub uses_artificial: bool,
}

type Cell = (MachineId, Day, WindowId);

#[derive(Debug, Clone)]
pub struct Rmp {
    lp: Lp,
    patients: usize,
    pairs: usize,
    capacity_rows: HashMap<Cell, usize>,
    /// LP column of each pool column.
    lp_col: Vec<usize>,
    artificial: Vec<usize>,
    big_m: f64,
    weights: ObjectiveWeights,
}

/// Upper bound on the composite cost of any schedule of any patient.
fn column_cost_bound(inst: &Instance, weights: &ObjectiveWeights) -> f64 {
    let d = inst.horizon() as f64;
    let w = inst.window_count().saturating_sub(1) as f64;
    let [a1, a2, a3, a4, a5, a6] = weights.alpha;
    (0..inst.patients().len())
        .map(|i| {
            let c = inst.patient(i).weight() as f64;
            let f = inst.protocol_of(i).fractions as f64;
            (a1 + a2) * c * d + (a3 + a6) * f + a4 * f * w + a5 * f
        })
        .fold(0.0, f64::max)
}

impl Rmp {
    pub fn build(inst: &Instance, pool: &ColumnPool, weights: &ObjectiveWeights) -> Self {
        let patients = inst.patients().len();
        let pairs = inst.chains().pairs().len();
        let mut lp = Lp::new();
        for _ in 0..patients {
            lp.add_row(RowSense::Eq, 1.0, &[]);
        }
        for _ in 0..pairs {
            lp.add_row(RowSense::Le, 0.0, &[]);
        }
        let big_m = 1e4 * (1.0 + column_cost_bound(inst, weights));
        let artificial: Vec<usize> = (0..patients).map(|p| lp.add_column(big_m, vec![(p, 1.0)])).collect();
        for (p, &j) in artificial.iter().enumerate() {
            lp.make_basic(j, p);
        }
        let mut rmp = Rmp {
            lp,
            patients,
            pairs,
            capacity_rows: HashMap::new(),
            lp_col: Vec::new(),
            artificial,
            big_m,
            weights: *weights,
        };
        rmp.sync(inst, pool);
        rmp
    }

    /// LP solves past `deadline` fail with [`SolveError::TimeLimit`].
    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.lp.set_deadline(deadline);
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn row_count(&self) -> usize {
        self.lp.row_count()
    }

    /// Adds LP columns for pool entries not yet in the LP.
    pub fn sync(&mut self, inst: &Instance, pool: &ColumnPool) {
        for k in self.lp_col.len()..pool.len() {
            let col = pool.get(k);
            let entries = self.entries(inst, col);
            let j = self.lp.add_column(col.cost, entries);
            self.lp_col.push(j);
        }
    }

    fn entries(&mut self, inst: &Instance, col: &PoolColumn) -> Vec<(usize, f64)> {
        let p = col.patient;
        let proto = inst.protocol_of(p);
        let mut entries = vec![(p, 1.0)];
        let start = col.schedule.start_day() as f64;
        let chains = inst.chains();
        if let Some(k) = chains.succ_pair(p) {
            entries.push((self.patients + k, start));
        }
        if let Some(k) = chains.pred_pair(p) {
            entries.push((self.patients + k, -start));
        }
        for (f, fr) in col.schedule.fractions.iter().enumerate() {
            let cell = (fr.machine, fr.day, fr.window);
            let row = match self.capacity_rows.get(&cell) {
                Some(&r) => r,
                None => {
                    let rhs = inst.residual(fr.machine, fr.day, fr.window) as f64;
                    let r = self.lp.add_row(RowSense::Le, rhs, &[]);
                    self.capacity_rows.insert(cell, r);
                    r
                }
            };
            entries.push((row, proto.billed(f) as f64));
        }
        entries
    }

    pub fn solve_lp(&mut self, inst: &Instance) -> Result<LpResult, SolveError> {
        match self.lp.solve()? {
            LpStatus::Optimal => {}
            LpStatus::Infeasible { row } => return Err(SolveError::LpInfeasible { rows: vec![row] }),
            LpStatus::Unbounded => return Err(SolveError::Lp("master LP is unbounded".into())),
        }
        let y = self.lp.duals();
        let mut duals = DualPrices::zeros(inst);
        duals.convexity.copy_from_slice(&y[..self.patients]);
        duals
            .dominance
            .copy_from_slice(&y[self.patients..self.patients + self.pairs]);
        for (&(m, d, w), &r) in &self.capacity_rows {
            if d <= inst.horizon() {
                duals.set_gamma(m, d, w, y[r]);
            }
        }
        let values = self.lp_col.iter().map(|&j| self.lp.value(j)).collect();
        let uses_artificial = self.artificial.iter().any(|&j| self.lp.value(j) > INTEGRAL_TOL);
        Ok(LpResult {
            objective: OBJECTIVE_OFFSET + self.lp.objective(),
            duals,
            values,
            uses_artificial,
        })
    }

    fn set_fixed(&mut self, k: usize, fixed: bool) {
        self.lp.set_fixed(self.lp_col[k], fixed);
    }
}

/// Outcome of [`Rmp::price_and_dive`].
#[derive(Debug, Clone)]
pub struct DiveResult {
    /// Feasible selection, one schedule per patient.
    pub schedules: Option<Vec<PatientSchedule>>,
    pub objective: Option<f64>,
    /// LP solves performed.
    pub lp_solves: usize,
    pub columns_added: usize,
}

impl Rmp {
    fn fix_patient(&mut self, pool: &ColumnPool, patient: usize, keep: usize) {
        for &k in pool.of_patient(patient) {
            if k != keep {
                self.set_fixed(k, true);
            }
        }
    }

    fn release_all(&mut self, pool: &ColumnPool) {
        for k in 0..pool.len() {
            self.set_fixed(k, false);
        }
    }

    /// Primal heuristic: repeatedly fixes every patient whose LP value is
    /// integral, or else the patient with the largest column value, to that
    /// column, then re-prices the unfixed patients until no improving
    /// column remains (at most `pricing_rounds` rounds per fixing). Every
    /// LP point met on the way is completed into a feasible selection; the
    /// best one is returned. Stops once a fixing leaves the LP infeasible.
    /// New columns stay in the pool. Leaves all columns released on return.
    pub fn price_and_dive(
        &mut self,
        inst: &Instance,
        pool: &mut ColumnPool,
        pricing_rounds: usize,
        deadline: Instant,
    ) -> Result<DiveResult, SolveError> {
        let mut lp_solves = 0;
        let mut columns_added = 0;
        let mut best: Option<(f64, Vec<PatientSchedule>)> = None;
        self.set_deadline(Some(deadline));
        let outcome = self.dive_loop(inst, pool, pricing_rounds, deadline, &mut best, &mut lp_solves, &mut columns_added);
        self.set_deadline(None);
        self.sync(inst, pool);
        self.release_all(pool);
        match outcome {
            Ok(()) | Err(SolveError::TimeLimit) => {}
            Err(e) => return Err(e),
        }
        let (objective, schedules) = match best {
            Some((o, s)) => (Some(o), Some(s)),
            None => (None, None),
        };
        Ok(DiveResult {
            schedules,
            objective,
            lp_solves,
            columns_added,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn dive_loop(
        &mut self,
        inst: &Instance,
        pool: &mut ColumnPool,
        pricing_rounds: usize,
        deadline: Instant,
        best: &mut Option<(f64, Vec<PatientSchedule>)>,
        lp_solves: &mut usize,
        columns_added: &mut usize,
    ) -> Result<(), SolveError> {
        let n = inst.patients().len();
        let weights = self.weights;
        let mut chosen: Vec<Option<usize>> = vec![None; n];
        loop {
            self.sync(inst, pool);
            let mut lp = self.solve_lp(inst)?;
            *lp_solves += 1;
            for _ in 0..pricing_rounds {
                if Instant::now() >= deadline {
                    break;
                }
                let open: Vec<usize> = (0..n).filter(|&p| chosen[p].is_none()).collect();
                let priced: Vec<_> = open
                    .par_iter()
                    .map(|&p| (p, solve_pricing(inst, p, &lp.duals, &weights)))
                    .collect();
                let mut added = 0;
                for (p, col) in priced {
                    if let Some(col) = col {
                        if col.reduced_cost < NEGATIVE_REDUCED_COST && pool.add(inst, p, col.schedule, &weights)?.is_some() {
                            added += 1;
                        }
                    }
                }
                if added == 0 {
                    break;
                }
                *columns_added += added;
                self.sync(inst, pool);
                lp = self.solve_lp(inst)?;
                *lp_solves += 1;
            }
            if lp.uses_artificial {
                return Ok(());
            }
            let allowed: Vec<bool> = (0..pool.len())
                .map(|k| chosen[pool.get(k).patient].is_none_or(|c| c == k))
                .collect();
            if let Some(sch) = guided_completion(inst, pool, &lp.values, &allowed, &weights) {
                let obj = total_objective(inst, &sch, &weights);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    *best = Some((obj, sch));
                }
            }
            if Instant::now() >= deadline || chosen.iter().all(Option::is_some) {
                return Ok(());
            }
            let mut fixed_now = 0;
            let mut single: Option<(usize, usize, f64)> = None;
            for p in 0..n {
                if chosen[p].is_some() {
                    continue;
                }
                let top = pool
                    .of_patient(p)
                    .iter()
                    .map(|&k| (k, lp.values[k]))
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
                let Some((k, v)) = top else {
                    continue;
                };
                if v >= 1.0 - INTEGRAL_TOL {
                    chosen[p] = Some(k);
                    self.fix_patient(pool, p, k);
                    fixed_now += 1;
                } else if single.is_none_or(|(_, _, b)| v > b) {
                    single = Some((p, k, v));
                }
            }
            if fixed_now == 0 {
                let Some((p, k, _)) = single else {
                    return Ok(());
                };
                chosen[p] = Some(k);
                self.fix_patient(pool, p, k);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct IpConfig {
    pub time_limit: Duration,
    pub node_limit: usize,
    /// Known feasible schedules; used as the starting incumbent.
    pub incumbent: Option<Vec<PatientSchedule>>,
    /// Pricing rounds per node under the node's branching restrictions;
    /// 0 searches the given pool only.
    pub pricing_rounds: usize,
}

impl Default for IpConfig {
    fn default() -> Self {
        IpConfig {
            time_limit: Duration::from_secs(600),
            node_limit: 100_000,
            incumbent: None,
            pricing_rounds: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IpResult {
    /// Best integer selection, validated.
    pub schedules: Option<Vec<PatientSchedule>>,
    pub objective: Option<f64>,
    /// LP value at the root.
    pub root_bound: f64,
    /// Smallest bound among unexplored nodes (the incumbent when the search
    /// finished).
    pub best_bound: f64,
    pub nodes: usize,
    /// Columns priced in at the nodes.
    pub columns_added: usize,
    /// The search tree was exhausted.
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Decision {
    StartAtMost { patient: usize, day: Day },
    StartAtLeast { patient: usize, day: Day },
    UseCell { patient: usize, cell: Cell },
    AvoidCell { patient: usize, cell: Cell },
}

impl Decision {
    fn patient(&self) -> usize {
        match *self {
            Decision::StartAtMost { patient, .. }
            | Decision::StartAtLeast { patient, .. }
            | Decision::UseCell { patient, .. }
            | Decision::AvoidCell { patient, .. } => patient,
        }
    }
}

fn restrictions(base: &[PricingRestriction], decisions: &[Decision]) -> Vec<PricingRestriction> {
    let mut out = base.to_vec();
    for d in decisions {
        let r = &mut out[d.patient()];
        match *d {
            Decision::StartAtMost { day, .. } => r.latest_start = Some(r.latest_start.map_or(day, |l| l.min(day))),
            Decision::StartAtLeast { day, .. } => {
                r.earliest_start = Some(r.earliest_start.map_or(day, |e| e.max(day)))
            }
            Decision::UseCell { cell, .. } => r.required.push(cell),
            Decision::AvoidCell { cell, .. } => r.forbidden.push(cell),
        }
    }
    out
}

struct Node {
    bound: f64,
    depth: usize,
    decisions: Vec<Decision>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap: smallest bound first, deeper nodes first on ties
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
    }
}

/// Builds a feasible selection guided by an LP point. Patients go in chain
/// order, most decided first; each takes its highest-valued allowed pooled
/// column that fits what is left, or failing that the cheapest schedule
/// that fits, found by a course search on the remaining capacity.
pub(crate) fn guided_completion(
    inst: &Instance,
    pool: &ColumnPool,
    values: &[f64],
    allowed: &[bool],
    weights: &ObjectiveWeights,
) -> Option<Vec<PatientSchedule>> {
    let n = inst.patients().len();
    let top = |p: usize| {
        pool.of_patient(p)
            .iter()
            .filter(|&&k| allowed[k])
            .map(|&k| values[k])
            .fold(0.0, f64::max)
    };
    let tops: Vec<f64> = (0..n).map(top).collect();
    let mut base: Vec<usize> = (0..n).collect();
    base.sort_by(|&a, &b| tops[b].total_cmp(&tops[a]).then(a.cmp(&b)));
    let order = chain_respecting(inst, base);
    let chains = inst.chains();
    let mut usage = Usage::new(inst);
    let mut start: Vec<Option<Day>> = vec![None; n];
    let mut chosen: Vec<Option<PatientSchedule>> = vec![None; n];
    for p in order {
        let from = chains.predecessor(p).and_then(|q| start[q]).unwrap_or(0);
        let proto = inst.protocol_of(p);
        let fits = |s: &PatientSchedule| {
            s.start_day() >= from
                && s.fractions.iter().enumerate().all(|(f, fr)| {
                    proto.billed(f) <= usage.residual(inst, fr.machine, fr.day, fr.window)
                })
        };
        let mut cands: Vec<usize> = pool
            .of_patient(p)
            .iter()
            .copied()
            .filter(|&k| allowed[k] && values[k] > INTEGRAL_TOL)
            .collect();
        cands.sort_by(|&a, &b| {
            values[b]
                .total_cmp(&values[a])
                .then(pool.get(a).cost.total_cmp(&pool.get(b).cost))
                .then(a.cmp(&b))
        });
        let pick = match cands.into_iter().find(|&k| fits(&pool.get(k).schedule)) {
            Some(k) => pool.get(k).schedule.clone(),
            None => cheapest_fit(inst, p, from, &usage, weights)?,
        };
        usage.book(inst, p, &pick);
        start[p] = Some(pick.start_day());
        chosen[p] = Some(pick);
    }
    let schedules: Vec<PatientSchedule> = chosen.into_iter().map(|s| s.expect("every patient placed")).collect();
    validate_schedules(inst, &schedules).is_valid().then_some(schedules)
}

/// Cheapest schedule of `patient` starting no earlier than `from` that fits
/// the capacity left by `usage`.
fn cheapest_fit(
    inst: &Instance,
    patient: usize,
    from: Day,
    usage: &Usage,
    weights: &ObjectiveWeights,
) -> Option<PatientSchedule> {
    let p = inst.patient(patient);
    let [a1, a2, ..] = weights.alpha;
    let c_p = p.weight() as f64;
    let search = CourseSearch {
        inst,
        patient,
        weights,
        residual: |m, d, w| usage.residual(inst, m, d, w),
        price: |_, _, _| 0.0,
    };
    let mut best: Option<(Day, Vec<(MachineId, WindowId)>, f64)> = None;
    for s in inst.start_days(patient).into_iter().filter(|&s| s >= from) {
        let wait = s.saturating_sub(p.d_min) as f64;
        let late = s.saturating_sub(p.d_target) as f64;
        let start_cost = a1 * c_p * wait + a2 * c_p * late;
        if best.as_ref().is_some_and(|(_, _, b)| start_cost >= *b) && start_cost > 0.0 {
            break;
        }
        if let Some((path, course)) = search.best_on_day(s) {
            let value = course + start_cost;
            if best.as_ref().is_none_or(|(_, _, b)| value < *b - 1e-9) {
                best = Some((s, path, value));
            }
        }
    }
    let (s, path, _) = best?;
    Some(PatientSchedule::consecutive(p.id, s, &path))
}

impl Rmp {
    fn apply(&mut self, pool: &ColumnPool, rules: &[PricingRestriction], fixed: &mut Vec<bool>) -> Vec<bool> {
        fixed.resize(pool.len(), false);
        let mut allowed = vec![true; pool.len()];
        for k in 0..pool.len() {
            let col = pool.get(k);
            let ex = !rules[col.patient].admits(&col.schedule);
            allowed[k] = !ex;
            if fixed[k] != ex {
                self.set_fixed(k, ex);
                fixed[k] = ex;
            }
        }
        allowed
    }

    /// Solves the node LP, re-pricing under `rules` for up to `rounds`
    /// rounds. Returns the LP, a lower bound on the node's LP value, and
    /// the number of columns added.
    fn node_lp(
        &mut self,
        inst: &Instance,
        pool: &mut ColumnPool,
        rules: &[PricingRestriction],
        fixed: &mut Vec<bool>,
        rounds: usize,
        deadline: Instant,
    ) -> Result<(LpResult, f64, usize), SolveError> {
        let n = inst.patients().len();
        let weights = self.weights;
        let mut lp = self.solve_lp(inst)?;
        let mut bound = f64::NEG_INFINITY;
        let mut added_total = 0;
        for _ in 0..rounds {
            if Instant::now() >= deadline {
                break;
            }
            let priced: Vec<_> = (0..n)
                .into_par_iter()
                .map(|p| (p, solve_pricing_restricted(inst, p, &lp.duals, &weights, &rules[p])))
                .collect();
            let mut added = 0;
            let mut slack = 0.0;
            let mut all_priced = true;
            for (p, col) in priced {
                let Some(col) = col else {
                    all_priced = false;
                    continue;
                };
                slack += col.reduced_cost.min(0.0);
                if col.reduced_cost < NEGATIVE_REDUCED_COST && pool.add(inst, p, col.schedule, &weights)?.is_some() {
                    added += 1;
                }
            }
            if all_priced && !lp.uses_artificial {
                bound = bound.max(lp.objective + slack);
            }
            if added == 0 {
                if !lp.uses_artificial {
                    bound = bound.max(lp.objective);
                }
                break;
            }
            added_total += added;
            self.sync(inst, pool);
            self.apply(pool, rules, fixed);
            lp = self.solve_lp(inst)?;
        }
        if rounds == 0 {
            bound = lp.objective;
        }
        Ok((lp, bound, added_total))
    }

    /// Best-first branch-and-bound over the pooled columns, branching on
    /// start-day splits and then on single (machine, day, window) cells.
    /// With `pricing_rounds > 0` every node is re-priced under its
    /// restrictions and the new columns join the pool. Leaves all columns
    /// released on return.
    pub fn solve_ip(
        &mut self,
        inst: &Instance,
        pool: &mut ColumnPool,
        config: &IpConfig,
    ) -> Result<IpResult, SolveError> {
        let base = vec![PricingRestriction::default(); inst.patients().len()];
        self.search(inst, pool, config, &base)
    }

    fn search(
        &mut self,
        inst: &Instance,
        pool: &mut ColumnPool,
        config: &IpConfig,
        base: &[PricingRestriction],
    ) -> Result<IpResult, SolveError> {
        let deadline = Instant::now() + config.time_limit;
        self.sync(inst, pool);
        self.release_all(pool);
        let mut fixed = vec![false; pool.len()];
        self.apply(pool, base, &mut fixed);
        let tol = |v: f64| 1e-9 * v.abs().max(1.0);

        let mut best: Option<(f64, Vec<PatientSchedule>)> = None;
        if let Some(sch) = &config.incumbent {
            if validate_schedules(inst, sch).is_valid() {
                best = Some((total_objective(inst, sch, &self.weights), sch.clone()));
            }
        }

        self.set_deadline(Some(deadline));
        let root = match self.solve_lp(inst) {
            Ok(r) => r,
            Err(SolveError::TimeLimit) => {
                self.set_deadline(None);
                let (objective, schedules) = match best {
                    Some((obj, s)) => (Some(obj), Some(s)),
                    None => (None, None),
                };
                return Ok(IpResult {
                    schedules,
                    objective,
                    root_bound: f64::NEG_INFINITY,
                    best_bound: f64::NEG_INFINITY,
                    nodes: 0,
                    columns_added: 0,
                    complete: false,
                });
            }
            Err(e) => return Err(e),
        };
        let root_bound = root.objective;
        let mut heap = BinaryHeap::new();
        heap.push(Node {
            bound: root_bound,
            depth: 0,
            decisions: Vec::new(),
        });
        let mut nodes = 0usize;
        let mut columns_added = 0usize;
        let mut complete = true;
        let mut first = Some(root);
        let mut plunge: Option<Node> = None;
        while let Some(node) = plunge.take().or_else(|| heap.pop()) {
            if best.as_ref().is_some_and(|(ub, _)| node.bound >= *ub - tol(*ub)) {
                continue;
            }
            if nodes >= config.node_limit || Instant::now() >= deadline {
                heap.push(node);
                complete = false;
                break;
            }
            nodes += 1;
            let rules = restrictions(base, &node.decisions);
            self.apply(pool, &rules, &mut fixed);
            let (lp, bound) = match first.take() {
                Some(r) if config.pricing_rounds == 0 => {
                    let b = r.objective;
                    (r, b)
                }
                _ => match self.node_lp(inst, pool, &rules, &mut fixed, config.pricing_rounds, deadline) {
                    Ok((lp, b, added)) => {
                        columns_added += added;
                        (lp, b)
                    }
                    Err(SolveError::TimeLimit) => {
                        heap.push(node);
                        complete = false;
                        break;
                    }
                    Err(e) => return Err(e),
                },
            };
            if lp.uses_artificial {
                continue;
            }
            let bound = bound.max(node.bound);
            if best.as_ref().is_some_and(|(ub, _)| bound >= *ub - tol(*ub)) {
                continue;
            }
            let allowed: Vec<bool> = fixed.iter().map(|&f| !f).collect();
            if let Some(sch) = guided_completion(inst, pool, &lp.values, &allowed, &self.weights) {
                let obj = total_objective(inst, &sch, &self.weights);
                if best.as_ref().is_none_or(|(ub, _)| obj < *ub - tol(*ub)) {
                    best = Some((obj, sch));
                }
            }
            if best.as_ref().is_some_and(|(ub, _)| bound >= *ub - tol(*ub)) {
                continue;
            }
            let Some(children) = branch(inst, pool, &lp.values) else {
                continue;
            };
            for (i, d) in children.into_iter().enumerate() {
                let mut decisions = node.decisions.clone();
                decisions.push(d);
                let child = Node {
                    bound,
                    depth: node.depth + 1,
                    decisions,
                };
                if i == 0 {
                    plunge = Some(child);
                } else {
                    heap.push(child);
                }
            }
        }
        heap.extend(plunge);
        self.set_deadline(None);
        self.sync(inst, pool);
        self.release_all(pool);
        let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        let best_bound = match &best {
            Some((ub, _)) => open_bound.min(*ub),
            None => open_bound,
        };
        let best_bound = if best_bound.is_finite() { best_bound.max(root_bound) } else { root_bound };
        let (objective, schedules) = match best {
            Some((obj, s)) => (Some(obj), Some(s)),
            None => (None, None),
        };
        Ok(IpResult {
            schedules,
            objective,
            root_bound,
            best_bound,
            nodes,
            columns_added,
            complete: complete && heap.is_empty(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct NeighbourhoodConfig {
    pub time_limit: Duration,
    /// Patients released per neighbourhood.
    pub free: usize,
    /// Time and node budget of each neighbourhood search.
    pub round_time_limit: Duration,
    pub round_node_limit: usize,
    /// Pricing rounds per node of each neighbourhood search.
    pub pricing_rounds: usize,
    pub seed: u64,
}

impl Default for NeighbourhoodConfig {
    fn default() -> Self {
        NeighbourhoodConfig {
            time_limit: Duration::from_secs(60),
            free: 12,
            round_time_limit: Duration::from_secs(3),
            round_node_limit: 200,
            pricing_rounds: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NeighbourhoodResult {
    pub schedules: Vec<PatientSchedule>,
    pub objective: f64,
    pub rounds: usize,
    pub improvements: usize,
}

/// Restriction admitting exactly `sched`.
fn pinned(sched: &PatientSchedule) -> PricingRestriction {
    PricingRestriction {
        earliest_start: Some(sched.start_day()),
        latest_start: Some(sched.start_day()),
        required: sched.fractions.iter().map(|f| (f.machine, f.day, f.window)).collect(),
        forbidden: Vec::new(),
    }
}

/// Patients released around a randomly drawn costly patient: those whose
/// courses start closest to it, preferring ones that share a machine.
fn neighbourhood(
    inst: &Instance,
    schedules: &[PatientSchedule],
    costs: &[f64],
    free: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = schedules.len();
    let weights: Vec<f64> = costs.iter().map(|c| c + 1.0).collect();
    let centre = WeightedIndex::new(&weights).map_or(0, |w| w.sample(rng));
    let machines: Vec<MachineId> = schedules[centre].machines().collect();
    let start = schedules[centre].start_day() as f64;
    let mut ranked: Vec<(f64, usize)> = (0..n)
        .filter(|&q| q != centre)
        .map(|q| {
            let shares = schedules[q].machines().any(|m| machines.contains(&m));
            let gap = (schedules[q].start_day() as f64 - start).abs();
            let key = gap + if shares { 0.0 } else { 5.0 } + rng.random::<f64>() * 3.0;
            (key, q)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<usize> = std::iter::once(centre)
        .chain(ranked.into_iter().map(|(_, q)| q))
        .take(free.max(1))
        .collect();
    out.sort_unstable();
    debug_assert!(out.iter().all(|&q| q < inst.patients().len()));
    out
}

impl Rmp {
    /// Large-neighbourhood search from a feasible selection: repeatedly
    /// keeps every patient but a small related group on its current
    /// schedule and re-optimises the group by branch-and-bound. Improving
    /// selections are adopted. Leaves all columns released on return.
    pub fn improve_neighbourhoods(
        &mut self,
        inst: &Instance,
        pool: &mut ColumnPool,
        incumbent: Vec<PatientSchedule>,
        config: &NeighbourhoodConfig,
    ) -> Result<NeighbourhoodResult, SolveError> {
        let deadline = Instant::now() + config.time_limit;
        let weights = self.weights;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut current = incumbent;
        let mut objective = total_objective(inst, &current, &weights);
        let mut rounds = 0;
        let mut improvements = 0;
        for (p, s) in current.iter().enumerate() {
            pool.add(inst, p, s.clone(), &weights)?;
        }
        while Instant::now() < deadline && inst.patients().len() > 1 {
            rounds += 1;
            let costs: Vec<f64> = current
                .iter()
                .enumerate()
                .map(|(p, s)| composite_cost(inst, p, s, &weights))
                .collect();
            let free = neighbourhood(inst, &current, &costs, config.free, &mut rng);
            let base: Vec<PricingRestriction> = current
                .iter()
                .enumerate()
                .map(|(p, s)| {
                    if free.binary_search(&p).is_ok() {
                        PricingRestriction::default()
                    } else {
                        pinned(s)
                    }
                })
                .collect();
            let remaining = deadline.saturating_duration_since(Instant::now());
            let sub = IpConfig {
                time_limit: config.round_time_limit.min(remaining),
                node_limit: config.round_node_limit,
                incumbent: Some(current.clone()),
                pricing_rounds: config.pricing_rounds,
            };
            let result = self.search(inst, pool, &sub, &base)?;
            if let (Some(obj), Some(s)) = (result.objective, result.schedules) {
                if obj < objective - 1e-9 * objective.abs().max(1.0) {
                    objective = obj;
                    current = s;
                    improvements += 1;
                    for (p, s) in current.iter().enumerate() {
                        pool.add(inst, p, s.clone(), &weights)?;
                    }
                }
            }
        }
        self.sync(inst, pool);
        Ok(NeighbourhoodResult {
            schedules: current,
            objective,
            rounds,
            improvements,
        })
    }
}

/// Branching decisions for a fractional LP point, the likelier child
/// first, or `None` if it is integral.
fn branch(inst: &Instance, pool: &ColumnPool, values: &[f64]) -> Option<Vec<Decision>> {
    let mut pick: Option<(usize, f64)> = None;
    for p in 0..inst.patients().len() {
        let top = pool
            .of_patient(p)
            .iter()
            .map(|&k| values[k])
            .fold(0.0, f64::max);
        let frac = 1.0 - top;
        if frac > INTEGRAL_TOL && pick.is_none_or(|(_, f)| frac > f + 1e-12) {
            pick = Some((p, frac));
        }
    }
    let (p, _) = pick?;
    let support: Vec<usize> = pool
        .of_patient(p)
        .iter()
        .copied()
        .filter(|&k| values[k] > INTEGRAL_TOL)
        .collect();
    let mass: f64 = support.iter().map(|&k| values[k]).sum();
    let mean = support
        .iter()
        .map(|&k| values[k] * pool.get(k).schedule.start_day() as f64)
        .sum::<f64>()
        / mass;
    let t = mean.floor() as Day;
    let low = support.iter().any(|&k| pool.get(k).schedule.start_day() <= t);
    let high = support.iter().any(|&k| pool.get(k).schedule.start_day() > t);
    if low && high {
        let early: f64 = support
            .iter()
            .filter(|&&k| pool.get(k).schedule.start_day() <= t)
            .map(|&k| values[k])
            .sum();
        let mut children = vec![
            Decision::StartAtMost { patient: p, day: t },
            Decision::StartAtLeast { patient: p, day: t + 1 },
        ];
        if early < 0.5 * mass {
            children.reverse();
        }
        return Some(children);
    }
    let mut mass: BTreeMap<Cell, f64> = BTreeMap::new();
    for &k in &support {
        for fr in &pool.get(k).schedule.fractions {
            *mass.entry((fr.machine, fr.day, fr.window)).or_insert(0.0) += values[k];
        }
    }
    let (cell, used) = mass
        .into_iter()
        .filter(|&(_, v)| v < 1.0 - INTEGRAL_TOL)
        .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))?;
    let mut children = vec![
        Decision::UseCell { patient: p, cell },
        Decision::AvoidCell { patient: p, cell },
    ];
    if used < 0.5 {
        children.reverse();
    }
    Some(children)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{MachinePark, OccupancyGrid, Patient, PatientId, Priority, Protocol, TimeGrid, WeekdaySet};
    use crate::pricing::enumerate_all_schedules;

    /// Two single-fraction patients competing for one window that fits one
    /// of them per day.
    fn contested() -> Instance {
        let proto = Protocol {
            id: "x".into(),
            priority: Priority::C,
            dur_first: 60,
            dur_other: 60,
            fractions: 1,
            allowed_machines: vec![0],
            preferred_machines: vec![0],
            start_weekdays: WeekdaySet::ALL,
        };
        let patients = (0..2)
            .map(|i| Patient {
                id: PatientId(i),
                protocol: 0,
                priority: Priority::C,
                d_min: 1,
                d_target: 3,
                window_pref: Some(0),
                is_placeholder: false,
            })
            .collect();
        Instance::new(
            MachinePark::unmatched(1),
            TimeGrid::new(3, vec![60, 60]),
            vec![proto],
            patients,
            OccupancyGrid::new(1, 2, 3),
        )
        .unwrap()
    }

    fn full_pool(inst: &Instance, w: &ObjectiveWeights) -> ColumnPool {
        let mut pool = ColumnPool::new(inst);
        for p in 0..inst.patients().len() {
            for s in enumerate_all_schedules(inst, p, 1_000_000).unwrap() {
                pool.add(inst, p, s, w).unwrap();
            }
        }
        pool
    }

    #[test]
    fn pool_deduplicates() {
        let inst = contested();
        let w = ObjectiveWeights::preset(2).unwrap();
        let mut pool = ColumnPool::new(&inst);
        let s = PatientSchedule::consecutive(PatientId(0), 1, &[(0, 0)]);
        assert_eq!(pool.add(&inst, 0, s.clone(), &w).unwrap(), Some(0));
        assert_eq!(pool.add(&inst, 0, s, &w).unwrap(), None);
        assert_eq!(pool.uncovered(), Some(1));
    }

    #[test]
    fn lp_uses_artificial_when_uncovered() {
        let inst = contested();
        let w = ObjectiveWeights::preset(2).unwrap();
        let mut pool = ColumnPool::new(&inst);
        pool.add(&inst, 0, PatientSchedule::consecutive(PatientId(0), 1, &[(0, 0)]), &w)
            .unwrap();
        let mut rmp = Rmp::build(&inst, &pool, &w);
        let r = rmp.solve_lp(&inst).unwrap();
        assert!(r.uses_artificial);
    }

    #[test]
    fn ip_resolves_contention() {
        let inst = contested();
        // alpha1 = 1 per waiting day, alpha4 = 1 per window step
        let w = ObjectiveWeights::new([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let mut pool = full_pool(&inst, &w);
        let mut rmp = Rmp::build(&inst, &pool, &w);
        let lp = rmp.solve_lp(&inst).unwrap();
        assert!(!lp.uses_artificial);
        let ip = rmp.solve_ip(&inst, &mut pool, &IpConfig::default()).unwrap();
        // one patient in window 0, the other in window 1 on day 1 (cost 1)
        // or window 0 on day 2 (cost 1)
        assert_eq!(ip.objective, Some(2.0));
        assert!(ip.complete);
        assert!(ip.root_bound <= 2.0 + 1e-9);
        let sch = ip.schedules.unwrap();
        assert!(validate_schedules(&inst, &sch).is_valid());
    }

    #[test]
    fn reduced_costs_of_basic_columns_vanish() {
        let inst = contested();
        let w = ObjectiveWeights::preset(4).unwrap();
        let pool = full_pool(&inst, &w);
        let mut rmp = Rmp::build(&inst, &pool, &w);
        let lp = rmp.solve_lp(&inst).unwrap();
        for (k, col) in pool.columns().iter().enumerate() {
            let rc = crate::pricing::reduced_cost(&inst, col.patient, &col.schedule, &lp.duals, &w).unwrap();
            assert!(rc >= -1e-6, "column {k} has rc {rc}");
            if lp.values[k] > 1e-6 {
                assert!(rc.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn guided_completion_follows_values_and_repairs_conflicts() {
        let inst = contested();
        let w = ObjectiveWeights::new([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let pool = full_pool(&inst, &w);
        let allowed = vec![true; pool.len()];
        let first = |p: usize| {
            pool.of_patient(p)
                .iter()
                .copied()
                .find(|&k| pool.get(k).schedule.start_day() == 1 && pool.get(k).schedule.fractions[0].window == 0)
                .unwrap()
        };
        // both patients lean towards the same cell; the second must move
        let mut values = vec![0.0; pool.len()];
        values[first(0)] = 0.9;
        values[first(1)] = 0.6;
        let sch = guided_completion(&inst, &pool, &values, &allowed, &w).unwrap();
        assert!(validate_schedules(&inst, &sch).is_valid());
        assert_eq!(sch[0], pool.get(first(0)).schedule);
        assert_ne!(sch[1], pool.get(first(1)).schedule);
        assert_eq!(total_objective(&inst, &sch, &w), 2.0);
    }

    #[test]
    fn node_pricing_recovers_missing_columns() {
        let inst = contested();
        let w = ObjectiveWeights::new([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        // only the contested cell is pooled for both patients
        let mut pool = ColumnPool::new(&inst);
        for p in 0..2 {
            pool.add(&inst, p, PatientSchedule::consecutive(PatientId(p as u32), 1, &[(0, 0)]), &w)
                .unwrap();
        }
        let mut rmp = Rmp::build(&inst, &pool, &w);
        let config = IpConfig {
            pricing_rounds: 3,
            ..IpConfig::default()
        };
        let ip = rmp.solve_ip(&inst, &mut pool, &config).unwrap();
        assert_eq!(ip.objective, Some(2.0));
        assert!(ip.columns_added > 0);
    }

    #[test]
    fn neighbourhood_search_never_worsens_the_start() {
        let inst = contested();
        let w = ObjectiveWeights::new([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let mut pool = full_pool(&inst, &w);
        let start = vec![
            PatientSchedule::consecutive(PatientId(0), 3, &[(0, 1)]),
            PatientSchedule::consecutive(PatientId(1), 3, &[(0, 0)]),
        ];
        assert!(validate_schedules(&inst, &start).is_valid());
        let before = total_objective(&inst, &start, &w);
        let mut rmp = Rmp::build(&inst, &pool, &w);
        let config = NeighbourhoodConfig {
            time_limit: std::time::Duration::from_secs(2),
            free: 1,
            ..NeighbourhoodConfig::default()
        };
        let found = rmp.improve_neighbourhoods(&inst, &mut pool, start, &config).unwrap();
        assert!(validate_schedules(&inst, &found.schedules).is_valid());
        assert!(found.objective < before);
        assert_eq!(found.objective, total_objective(&inst, &found.schedules, &w));
    }
}
