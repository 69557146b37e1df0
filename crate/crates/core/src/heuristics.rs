//! Constructive heuristics: a deterministic greedy and a randomised
//! restart search under the Luby schedule.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::domain::{Day, Instance, MachineId, PatientSchedule, WindowId};
use crate::error::SolveError;
use crate::objective::ObjectiveWeights;
use crate::pricing::CourseSearch;
use crate::solution::{validate_schedules, Solution};

/// Restarts of pass `i` abort after this many dead ends times `luby(i)`.
pub const LUBY_SCALE: u64 = 75;

/// Minutes booked on top of the pre-occupied grid.
#[derive(Debug, Clone)]
pub(crate) struct Usage {
    machines: usize,
    windows: usize,
    minutes: Vec<u32>,
}

impl Usage {
    pub fn new(inst: &Instance) -> Self {
        let machines = inst.machines().machine_count();
        let windows = inst.window_count();
        Usage {
            machines,
            windows,
            minutes: vec![0; machines * windows * inst.horizon() as usize],
        }
    }

    fn idx(&self, m: MachineId, d: Day, w: WindowId) -> usize {
        ((d as usize - 1) * self.machines + m) * self.windows + w
    }

    pub fn residual(&self, inst: &Instance, m: MachineId, d: Day, w: WindowId) -> u32 {
        if d == 0 || d > inst.horizon() {
            return 0;
        }
        inst.residual(m, d, w).saturating_sub(self.minutes[self.idx(m, d, w)])
    }

    pub fn book(&mut self, inst: &Instance, patient: usize, sched: &PatientSchedule) {
        let proto = inst.protocol_of(patient);
        for (f, fr) in sched.fractions.iter().enumerate() {
            let k = self.idx(fr.machine, fr.day, fr.window);
            self.minutes[k] += proto.billed(f);
        }
    }

    pub fn unbook(&mut self, inst: &Instance, patient: usize, sched: &PatientSchedule) {
        let proto = inst.protocol_of(patient);
        for (f, fr) in sched.fractions.iter().enumerate() {
            let k = self.idx(fr.machine, fr.day, fr.window);
            self.minutes[k] -= proto.billed(f);
        }
    }
}

/// Patients in `base` order, each preceded by any not-yet-listed chain
/// predecessors.
pub(crate) fn chain_respecting(inst: &Instance, base: Vec<usize>) -> Vec<usize> {
    let chains = inst.chains();
    let mut listed = vec![false; inst.patients().len()];
    let mut out = Vec::with_capacity(base.len());
    for p in base {
        let mut stack = Vec::new();
        let mut cur = Some(p);
        while let Some(q) = cur {
            if listed[q] {
                break;
            }
            stack.push(q);
            cur = chains.predecessor(q);
        }
        while let Some(q) = stack.pop() {
            listed[q] = true;
            out.push(q);
        }
    }
    out
}

/// Earliest start at or after the chain predecessor's start (and `d_min`).
fn earliest_from(inst: &Instance, patient: usize, start: &[Option<Day>]) -> Day {
    let pred = inst.chains().predecessor(patient).and_then(|q| start[q]).unwrap_or(0);
    inst.patient(patient).d_min.max(pred)
}

/// Places patients by priority, then arrival, each on its earliest feasible
/// start day with the cheapest machine and window sequence for that day.
pub fn greedy_solve(inst: &Instance, weights: &ObjectiveWeights) -> Result<Solution, SolveError> {
    let mut base: Vec<usize> = (0..inst.patients().len()).collect();
    base.sort_by_key(|&i| {
        let p = inst.patient(i);
        (p.priority, p.d_min, p.d_target, p.id)
    });
    let order = chain_respecting(inst, base);
    let mut usage = Usage::new(inst);
    let mut start: Vec<Option<Day>> = vec![None; inst.patients().len()];
    let mut schedules = Vec::with_capacity(order.len());
    for i in order {
        let from = earliest_from(inst, i, &start);
        let usage_ref = &usage;
        let search = CourseSearch {
            inst,
            patient: i,
            weights,
            residual: |m, d, w| usage_ref.residual(inst, m, d, w),
            price: |_, _, _| 0.0,
        };
        let found = inst
            .start_days(i)
            .into_iter()
            .filter(|&s| s >= from)
            .find_map(|s| search.best_on_day(s).map(|(path, _)| (s, path)));
        let Some((s, path)) = found else {
            return Err(SolveError::Unplaceable(inst.patient(i).id));
        };
        let sched = PatientSchedule::consecutive(inst.patient(i).id, s, &path);
        usage.book(inst, i, &sched);
        start[i] = Some(s);
        schedules.push(sched);
    }
    finish(inst, schedules, weights)
}

fn finish(inst: &Instance, schedules: Vec<PatientSchedule>, weights: &ObjectiveWeights) -> Result<Solution, SolveError> {
    let report = validate_schedules(inst, &schedules);
    if !report.is_valid() {
        return Err(SolveError::InfeasibleSchedule(report.codes().join(", ")));
    }
    Ok(Solution::new(inst, schedules, weights))
}

/// Term `i` (1-based) of the Luby sequence 1, 1, 2, 1, 1, 2, 4, ...
pub fn luby(i: u64) -> Result<u64, SolveError> {
    if i < 1 {
        return Err(SolveError::Usage(format!("luby index must be at least 1, got {i}")));
    }
    let mut i = i;
    loop {
        let mut k = 1u32;
        while (1u64 << k) - 1 < i {
            k += 1;
        }
        if (1u64 << k) - 1 == i {
            return Ok(1u64 << (k - 1));
        }
        i -= (1u64 << (k - 1)) - 1;
    }
}

enum Pass {
    Complete(Vec<PatientSchedule>),
    Aborted,
}

/// Tries to build the course of `patient` starting on `s`: a random machine
/// of a random trajectory group, kept while it has room and otherwise
/// redrawn within the group; each day's window is the feasible one closest
/// to the preference, ties broken at random.
fn random_course(
    inst: &Instance,
    patient: usize,
    s: Day,
    usage: &Usage,
    rng: &mut impl Rng,
) -> Option<Vec<(MachineId, WindowId)>> {
    let proto = inst.protocol_of(patient);
    let pref = inst.patient(patient).window_pref;
    let group = inst.trajectory_groups(patient).choose(rng)?;
    let mut current = *group.choose(rng)?;
    let mut path = Vec::with_capacity(proto.fractions as usize);
    for f in 0..proto.fractions as usize {
        let d = s + f as Day;
        let windows_on = |m: MachineId| -> Vec<WindowId> {
            (0..inst.window_count())
                .filter(|&w| proto.billed(f) <= usage.residual(inst, m, d, w))
                .collect()
        };
        let mut open = windows_on(current);
        if open.is_empty() {
            let others: Vec<MachineId> = group
                .iter()
                .copied()
                .filter(|&m| m != current && !windows_on(m).is_empty())
                .collect();
            current = *others.choose(rng)?;
            open = windows_on(current);
        }
        let closeness = |w: WindowId| pref.map_or(0, |p| w.abs_diff(p));
        let best = open.iter().map(|&w| closeness(w)).min()?;
        let ties: Vec<WindowId> = open.into_iter().filter(|&w| closeness(w) == best).collect();
        path.push((current, *ties.choose(rng)?));
    }
    Some(path)
}

fn restart_pass(inst: &Instance, order: &[usize], dead_end_limit: u64, rng: &mut impl Rng) -> Pass {
    let mut usage = Usage::new(inst);
    let mut start: Vec<Option<Day>> = vec![None; inst.patients().len()];
    let mut schedules = Vec::with_capacity(order.len());
    let mut dead_ends = 0u64;
    for &i in order {
        let from = earliest_from(inst, i, &start);
        let mut placed = None;
        for s in inst.start_days(i).into_iter().filter(|&s| s >= from) {
            match random_course(inst, i, s, &usage, rng) {
                Some(path) => {
                    placed = Some(PatientSchedule::consecutive(inst.patient(i).id, s, &path));
                    break;
                }
                None => {
                    dead_ends += 1;
                    if dead_ends > dead_end_limit {
                        return Pass::Aborted;
                    }
                }
            }
        }
        let Some(sched) = placed else {
            return Pass::Aborted;
        };
        usage.book(inst, i, &sched);
        start[i] = Some(sched.start_day());
        schedules.push(sched);
    }
    Pass::Complete(schedules)
}

/// Randomised constructive search with Luby restarts: `passes` passes over
/// the patients (priority A first, then B, then C), pass `i` giving up
/// after `75 * luby(i)` dead ends. Returns the best complete pass.
pub fn restart_search(
    inst: &Instance,
    weights: &ObjectiveWeights,
    rng: &mut impl Rng,
    passes: usize,
) -> Result<Solution, SolveError> {
    let mut base: Vec<usize> = (0..inst.patients().len()).collect();
    base.sort_by_key(|&i| {
        let p = inst.patient(i);
        (p.priority, p.d_min, p.d_target, p.id)
    });
    let order = chain_respecting(inst, base);
    let mut best: Option<Solution> = None;
    for i in 1..=passes as u64 {
        let limit = LUBY_SCALE * luby(i)?;
        if let Pass::Complete(schedules) = restart_pass(inst, &order, limit, rng) {
            let sol = finish(inst, schedules, weights)?;
            if best.as_ref().is_none_or(|b| sol.objective < b.objective) {
                best = Some(sol);
            }
        }
    }
    best.ok_or(SolveError::NoIncumbent)
}
