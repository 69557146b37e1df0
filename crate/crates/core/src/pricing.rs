//! Per-patient pricing: the schedule of minimum reduced cost against the
//! master duals.
//!
//! Sign convention. The master is a minimisation with
//!
//! * convexity rows `sum_i a_{p,i} = 1` (dual `lambda_p`, free),
//! * capacity rows `sum billed * a <= L_w - S` (dual `gamma_{m,d,w} <= 0`),
//! * dominance rows `start(p) - start(q) <= 0` for each consecutive pair
//!   `(p, q)` of a protocol chain (dual `eta_{p,q} <= 0`).
//!
//! The reduced cost of a column of patient `p` is therefore
//!
//! ```text
//! c - lambda_p - sum gamma * billed - (eta_succ(p) - eta_pred(p)) * start
//! ```
//!
//! where `eta_succ(p)` belongs to the pair in which `p` is the earlier
//! patient and `eta_pred(p)` to the pair in which it is the later one (a
//! missing neighbour contributes 0).
//!
//! The search is a shortest path over fractions: for every admissible start
//! day and every machine group the course may move within, a DP over
//! (machine, window) states per day, with states whose billed minutes exceed
//! the residual capacity pruned.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{Day, Instance, MachineId, PatientSchedule, SwitchKind, WindowId};
use crate::error::SolveError;
use crate::objective::{composite_cost, ObjectiveWeights};
use crate::solution::{validate_schedules, ViolationKind};

/// Reduced costs below this are treated as improving.
pub const NEGATIVE_REDUCED_COST: f64 = -1e-6;

/// Default cap on the number of candidate sequences enumerated per patient.
pub const ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPrices {
    /// `lambda_p` per patient index.
    pub convexity: Vec<f64>,
    /// `gamma` per (machine, day, window), 0 for cells without a row.
    capacity: Vec<f64>,
    /// `eta` per dominance pair (see [`crate::domain::DominanceChains`]).
    pub dominance: Vec<f64>,
    machines: usize,
    windows: usize,
    days: Day,
}

impl DualPrices {
    pub fn zeros(inst: &Instance) -> Self {
        let machines = inst.machines().machine_count();
        let windows = inst.window_count();
        let days = inst.horizon();
        DualPrices {
            convexity: vec![0.0; inst.patients().len()],
            capacity: vec![0.0; machines * windows * days as usize],
            dominance: vec![0.0; inst.chains().pairs().len()],
            machines,
            windows,
            days,
        }
    }

    fn idx(&self, m: MachineId, d: Day, w: WindowId) -> usize {
        ((d as usize - 1) * self.machines + m) * self.windows + w
    }

    pub fn gamma(&self, m: MachineId, d: Day, w: WindowId) -> f64 {
        if d == 0 || d > self.days {
            0.0
        } else {
            self.capacity[self.idx(m, d, w)]
        }
    }

    pub fn set_gamma(&mut self, m: MachineId, d: Day, w: WindowId, value: f64) {
        let i = self.idx(m, d, w);
        self.capacity[i] = value;
    }

    /// Coefficient multiplying the start day in the reduced cost:
    /// `eta_succ(p) - eta_pred(p)`.
    pub fn start_day_price(&self, inst: &Instance, patient: usize) -> f64 {
        let chains = inst.chains();
        let succ = chains.succ_pair(patient).map_or(0.0, |k| self.dominance[k]);
        let pred = chains.pred_pair(patient).map_or(0.0, |k| self.dominance[k]);
        succ - pred
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricedColumn {
    pub schedule: PatientSchedule,
    /// Composite cost `c_{p,i}`.
    pub cost: f64,
    pub reduced_cost: f64,
}

/// Reduced cost of a schedule already known to be feasible in isolation.
pub(crate) fn reduced_cost_unchecked(
    inst: &Instance,
    patient: usize,
    sched: &PatientSchedule,
    cost: f64,
    duals: &DualPrices,
) -> f64 {
    let proto = inst.protocol_of(patient);
    let capacity_credit: f64 = sched
        .fractions
        .iter()
        .enumerate()
        .map(|(f, fr)| duals.gamma(fr.machine, fr.day, fr.window) * proto.billed(f) as f64)
        .sum();
    cost - duals.convexity[patient]
        - capacity_credit
        - duals.start_day_price(inst, patient) * sched.start_day() as f64
}

/// Rejects schedules that break any single-patient rule or do not fit the
/// residual capacity on their own.
pub fn check_isolated(inst: &Instance, patient: usize, sched: &PatientSchedule) -> Result<(), SolveError> {
    if inst.patient(patient).id != sched.patient {
        return Err(SolveError::InfeasibleSchedule(format!(
            "schedule for {} priced as {}",
            sched.patient,
            inst.patient(patient).id
        )));
    }
    let report = validate_schedules(inst, std::slice::from_ref(sched));
    let bad: Vec<String> = report
        .violations
        .iter()
        .filter(|v| {
            !matches!(
                v.kind,
                ViolationKind::MissingSchedule | ViolationKind::Dominance { .. }
            )
        })
        .map(|v| v.kind.code().to_string())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(SolveError::InfeasibleSchedule(bad.join(", ")))
    }
}

/// Reduced cost of `sched` for `patient` under `duals`.
pub fn reduced_cost(
    inst: &Instance,
    patient: usize,
    sched: &PatientSchedule,
    duals: &DualPrices,
    weights: &ObjectiveWeights,
) -> Result<f64, SolveError> {
    check_isolated(inst, patient, sched)?;
    let cost = composite_cost(inst, patient, sched, weights);
    Ok(reduced_cost_unchecked(inst, patient, sched, cost, duals))
}

/// Cheapest (machine, window) trajectory for one patient on a fixed start
/// day, under a per-cell price and a residual-capacity oracle.
pub(crate) struct CourseSearch<'a, R, G>
where
    R: Fn(MachineId, Day, WindowId) -> u32,
    G: Fn(MachineId, Day, WindowId) -> f64,
{
    pub inst: &'a Instance,
    pub patient: usize,
    pub weights: &'a ObjectiveWeights,
    /// Minutes still free in a cell.
    pub residual: R,
    /// Price per billed minute in a cell (the capacity dual, or 0).
    pub price: G,
}

impl<R, G> CourseSearch<'_, R, G>
where
    R: Fn(MachineId, Day, WindowId) -> u32,
    G: Fn(MachineId, Day, WindowId) -> f64,
{
    /// Best course starting on `start` within `group`: the (machine, window)
    /// per fraction and its cost excluding the start-day terms. Ties go to
    /// the lexicographically smallest (machine, window) sequence.
    pub fn best_in_group(&self, start: Day, group: &[MachineId]) -> Option<(Vec<(MachineId, WindowId)>, f64)> {
        let proto = self.inst.protocol_of(self.patient);
        let pref = self.inst.patient(self.patient).window_pref;
        let park = self.inst.machines();
        let [_, _, a3, a4, a5, a6] = self.weights.alpha;
        let windows = self.inst.window_count();
        let states: Vec<(MachineId, WindowId)> = group
            .iter()
            .flat_map(|&m| (0..windows).map(move |w| (m, w)))
            .collect();
        let k = states.len();
        let fractions = proto.fractions as usize;

        let node = |f: usize, (m, w): (MachineId, WindowId)| -> f64 {
            let d = start + f as Day;
            let billed = proto.billed(f);
            if billed > (self.residual)(m, d, w) {
                return f64::INFINITY;
            }
            let mut c = 0.0;
            if let Some(p) = pref {
                c += a4 * w.abs_diff(p) as f64;
            }
            if !proto.is_preferred(m) {
                c += a5;
            }
            c - (self.price)(m, d, w) * billed as f64
        };
        let mut trans = vec![0.0; k * k];
        for (i, &(m0, w0)) in states.iter().enumerate() {
            for (j, &(m1, w1)) in states.iter().enumerate() {
                let mut c = 0.0;
                if w0 != w1 {
                    c += a3;
                }
                if park.switch_kind(m0, m1) == SwitchKind::Partial {
                    c += a6;
                }
                trans[i * k + j] = c;
            }
        }

        // value[f][s]: cheapest completion from fraction f in state s
        let mut value = vec![f64::INFINITY; fractions * k];
        for (s, &st) in states.iter().enumerate() {
            value[(fractions - 1) * k + s] = node(fractions - 1, st);
        }
        for f in (0..fractions - 1).rev() {
            for (s, &st) in states.iter().enumerate() {
                let here = node(f, st);
                if here.is_infinite() {
                    continue;
                }
                let next = &value[(f + 1) * k..(f + 2) * k];
                let best = (0..k)
                    .map(|t| trans[s * k + t] + next[t])
                    .fold(f64::INFINITY, f64::min);
                value[f * k + s] = here + best;
            }
        }

        let (mut cur, total) = argmin((0..k).map(|s| value[s]))?;
        let mut path = Vec::with_capacity(fractions);
        path.push(states[cur]);
        for f in 1..fractions {
            let next = &value[f * k..(f + 1) * k];
            let (t, _) = argmin((0..k).map(|t| trans[cur * k + t] + next[t]))?;
            cur = t;
            path.push(states[cur]);
        }
        Some((path, total))
    }

    /// Best course over all machine groups for a fixed start day.
    pub fn best_on_day(&self, start: Day) -> Option<(Vec<(MachineId, WindowId)>, f64)> {
        let mut best: Option<(Vec<(MachineId, WindowId)>, f64)> = None;
        for group in self.inst.trajectory_groups(self.patient) {
            if let Some((path, c)) = self.best_in_group(start, group) {
                let better = match &best {
                    None => true,
                    Some((bp, bc)) => c < *bc - 1e-9 || (c <= *bc + 1e-9 && path < *bp),
                };
                if better {
                    best = Some((path, c));
                }
            }
        }
        best
    }
}

/// First index of the finite minimum.
fn argmin(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best
}

/// Limits on the schedules one patient may take, as imposed by branching.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PricingRestriction {
    pub earliest_start: Option<Day>,
    pub latest_start: Option<Day>,
    /// Cells the course must use.
    pub required: Vec<(MachineId, Day, WindowId)>,
    /// Cells the course must not use.
    pub forbidden: Vec<(MachineId, Day, WindowId)>,
}

impl PricingRestriction {
    pub fn is_empty(&self) -> bool {
        *self == PricingRestriction::default()
    }

    fn admits_start(&self, start: Day, fractions: u32) -> bool {
        let end = start + fractions - 1;
        self.earliest_start.is_none_or(|e| start >= e)
            && self.latest_start.is_none_or(|l| start <= l)
            && self.required.iter().all(|&(_, d, _)| start <= d && d <= end)
    }

    fn admits_cell(&self, m: MachineId, d: Day, w: WindowId) -> bool {
        !self.forbidden.contains(&(m, d, w))
            && self
                .required
                .iter()
                .all(|&(rm, rd, rw)| rd != d || (rm == m && rw == w))
    }

    pub fn admits(&self, sched: &PatientSchedule) -> bool {
        self.admits_start(sched.start_day(), sched.fractions.len() as u32)
            && sched.fractions.iter().all(|fr| self.admits_cell(fr.machine, fr.day, fr.window))
    }
}

/// Exact pricing for one patient. `None` when no feasible schedule exists.
pub fn solve_pricing(
    inst: &Instance,
    patient: usize,
    duals: &DualPrices,
    weights: &ObjectiveWeights,
) -> Option<PricedColumn> {
    solve_pricing_restricted(inst, patient, duals, weights, &PricingRestriction::default())
}

/// Exact pricing over the schedules admitted by `restriction`.
pub fn solve_pricing_restricted(
    inst: &Instance,
    patient: usize,
    duals: &DualPrices,
    weights: &ObjectiveWeights,
    restriction: &PricingRestriction,
) -> Option<PricedColumn> {
    let p = inst.patient(patient);
    let [a1, a2, ..] = weights.alpha;
    let c_p = p.weight() as f64;
    let fractions = inst.protocol_of(patient).fractions;
    let start_price = duals.start_day_price(inst, patient);
    let search = CourseSearch {
        inst,
        patient,
        weights,
        residual: |m, d, w| {
            if restriction.admits_cell(m, d, w) {
                inst.residual(m, d, w)
            } else {
                0
            }
        },
        price: |m, d, w| duals.gamma(m, d, w),
    };
    let mut best: Option<(Day, Vec<(MachineId, WindowId)>, f64)> = None;
    for start in inst.start_days(patient) {
        if !restriction.admits_start(start, fractions) {
            continue;
        }
        let Some((path, course)) = search.best_on_day(start) else {
            continue;
        };
        let wait = start.saturating_sub(p.d_min) as f64;
        let late = start.saturating_sub(p.d_target) as f64;
        let value = course + a1 * c_p * wait + a2 * c_p * late - start_price * start as f64;
        if best.as_ref().is_none_or(|(_, _, b)| value < *b - 1e-9) {
            best = Some((start, path, value));
        }
    }
    let (start, path, _) = best?;
    let schedule = PatientSchedule::consecutive(p.id, start, &path);
    let cost = composite_cost(inst, patient, &schedule, weights);
    let reduced_cost = reduced_cost_unchecked(inst, patient, &schedule, cost, duals);
    Some(PricedColumn {
        schedule,
        cost,
        reduced_cost,
    })
}

/// Every feasible schedule of one patient in isolation, sorted.
///
/// Refuses when the number of candidate sequences exceeds `cap`.
pub fn enumerate_all_schedules(
    inst: &Instance,
    patient: usize,
    cap: u64,
) -> Result<Vec<PatientSchedule>, SolveError> {
    let proto = inst.protocol_of(patient);
    let windows = inst.window_count() as u64;
    let starts = inst.start_days(patient);
    let groups = inst.trajectory_groups(patient);
    let mut candidates: u64 = 0;
    for g in groups {
        let per_start = (g.len() as u64 * windows)
            .checked_pow(proto.fractions)
            .unwrap_or(u64::MAX);
        candidates = candidates.saturating_add(per_start.saturating_mul(starts.len() as u64));
    }
    if candidates > cap {
        return Err(SolveError::Refused(format!(
            "{candidates} candidate schedules for patient {} exceed the cap of {cap}",
            inst.patient(patient).id
        )));
    }
    let id = inst.patient(patient).id;
    let fractions = proto.fractions as usize;
    let mut out = BTreeSet::new();
    for &start in &starts {
        for g in groups {
            let states: Vec<(MachineId, WindowId)> = g
                .iter()
                .flat_map(|&m| (0..inst.window_count()).map(move |w| (m, w)))
                .collect();
            let mut digits = vec![0usize; fractions];
            'odometer: loop {
                let fits = digits.iter().enumerate().all(|(f, &s)| {
                    let (m, w) = states[s];
                    proto.billed(f) <= inst.residual(m, start + f as Day, w)
                });
                if fits {
                    let path: Vec<_> = digits.iter().map(|&s| states[s]).collect();
                    out.insert(PatientSchedule::consecutive(id, start, &path));
                }
                for d in digits.iter_mut().rev() {
                    *d += 1;
                    if *d < states.len() {
                        continue 'odometer;
                    }
                    *d = 0;
                }
                break;
            }
        }
    }
    Ok(out.into_iter().collect())
}
