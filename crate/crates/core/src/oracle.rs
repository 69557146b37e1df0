//! Exhaustive search for provably optimal solutions of tiny instances.

use crate::domain::{Day, Instance, PatientSchedule};
use crate::error::SolveError;
use crate::heuristics::Usage;
use crate::objective::{composite_cost, ObjectiveWeights, OBJECTIVE_OFFSET};
use crate::pricing::{enumerate_all_schedules, ENUMERATION_CAP};
use crate::solution::{validate_schedules, Solution};

/// Default limit on search nodes (schedules tried).
pub const ORACLE_NODE_CAP: u64 = 10_000_000;

struct Search<'a> {
    inst: &'a Instance,
    order: Vec<usize>,
    /// Per position in `order`: schedules sorted by (cost, schedule).
    options: Vec<Vec<(f64, PatientSchedule)>>,
    /// Sum of the cheapest option over positions `k..`.
    tail_bound: Vec<f64>,
    usage: Usage,
    start: Vec<Option<Day>>,
    chosen: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    nodes: u64,
    cap: u64,
}

impl Search<'_> {
    fn fits(&self, patient: usize, sched: &PatientSchedule) -> bool {
        if let Some(pred) = self.inst.chains().predecessor(patient).and_then(|q| self.start[q]) {
            if sched.start_day() < pred {
                return false;
            }
        }
        let proto = self.inst.protocol_of(patient);
        sched
            .fractions
            .iter()
            .enumerate()
            .all(|(f, fr)| proto.billed(f) <= self.usage.residual(self.inst, fr.machine, fr.day, fr.window))
    }

    fn dfs(&mut self, k: usize, partial: f64) -> Result<(), SolveError> {
        if k == self.order.len() {
            if self.best.as_ref().is_none_or(|(b, _)| partial < *b) {
                self.best = Some((partial, self.chosen.clone()));
            }
            return Ok(());
        }
        let patient = self.order[k];
        for o in 0..self.options[k].len() {
            let cost = self.options[k][o].0;
            let bound = partial + cost + self.tail_bound[k + 1];
            if self.best.as_ref().is_some_and(|(b, _)| bound >= *b) {
                break;
            }
            self.nodes += 1;
            if self.nodes > self.cap {
                return Err(SolveError::Refused(format!(
                    "exhaustive search exceeded {} nodes",
                    self.cap
                )));
            }
            let sched = self.options[k][o].1.clone();
            if !self.fits(patient, &sched) {
                continue;
            }
            self.usage.book(self.inst, patient, &sched);
            self.start[patient] = Some(sched.start_day());
            self.chosen.push(o);
            self.dfs(k + 1, partial + cost)?;
            self.chosen.pop();
            self.start[patient] = None;
            self.usage.unbook(self.inst, patient, &sched);
        }
        Ok(())
    }
}

/// Optimal joint solution by depth-first search over every patient's
/// feasible schedules, cheapest first, pruning on capacity, chain order and
/// the cost bound. Refuses rather than truncating when more than `cap`
/// nodes are needed.
pub fn brute_force_optimal(inst: &Instance, weights: &ObjectiveWeights, cap: u64) -> Result<Solution, SolveError> {
    let n = inst.patients().len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (inst.patient(i).d_target, inst.patient(i).id));
    let mut options = Vec::with_capacity(n);
    for &i in &order {
        let mut opts: Vec<(f64, PatientSchedule)> = enumerate_all_schedules(inst, i, ENUMERATION_CAP)?
            .into_iter()
            .map(|s| (composite_cost(inst, i, &s, weights), s))
            .collect();
        if opts.is_empty() {
            return Err(SolveError::Unplaceable(inst.patient(i).id));
        }
        opts.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        options.push(opts);
    }
    let mut tail_bound = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail_bound[k] = tail_bound[k + 1] + options[k][0].0;
    }
    let mut search = Search {
        inst,
        order,
        options,
        tail_bound,
        usage: Usage::new(inst),
        start: vec![None; n],
        chosen: Vec::with_capacity(n),
        best: None,
        nodes: 0,
        cap,
    };
    search.dfs(0, 0.0)?;
    let Some((best_cost, picks)) = search.best.take() else {
        return Err(SolveError::NoIncumbent);
    };
    let schedules: Vec<PatientSchedule> = picks
        .iter()
        .enumerate()
        .map(|(k, &o)| search.options[k][o].1.clone())
        .collect();
    debug_assert!(validate_schedules(inst, &schedules).is_valid());
    let sol = Solution::new(inst, schedules, weights);
    debug_assert!((sol.objective - OBJECTIVE_OFFSET - best_cost).abs() < 1e-6);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{MachinePark, OccupancyGrid, Patient, PatientId, Priority, Protocol, TimeGrid, WeekdaySet};

    fn staggered() -> Instance {
        let proto = Protocol {
            id: "x".into(),
            priority: Priority::B,
            dur_first: 40,
            dur_other: 20,
            fractions: 2,
            allowed_machines: vec![0],
            preferred_machines: vec![0],
            start_weekdays: WeekdaySet::ALL,
        };
        let patients = (0..2)
            .map(|i| Patient {
                id: PatientId(i),
                protocol: 0,
                priority: Priority::B,
                d_min: 1,
                d_target: 5,
                window_pref: None,
                is_placeholder: false,
            })
            .collect();
        Instance::new(
            MachinePark::unmatched(1),
            TimeGrid::new(6, vec![60]),
            vec![proto],
            patients,
            OccupancyGrid::new(1, 1, 6),
        )
        .unwrap()
    }

    #[test]
    fn staggers_first_fractions() {
        let inst = staggered();
        let w = ObjectiveWeights::preset(1).unwrap();
        let sol = brute_force_optimal(&inst, &w, ORACLE_NODE_CAP).unwrap();
        // 40 + 40 > 60: the second patient waits one day (c_p = 3, alpha1 = 50)
        assert_eq!(sol.objective, 1.0 + 50.0 * 3.0);
        let starts: Vec<Day> = sol.schedules.iter().map(|s| s.start_day()).collect();
        assert_eq!(starts, vec![1, 2]);
    }

    #[test]
    fn refuses_beyond_cap() {
        let inst = staggered();
        let w = ObjectiveWeights::preset(1).unwrap();
        assert!(matches!(brute_force_optimal(&inst, &w, 1), Err(SolveError::Refused(_))));
    }
}
