//! Joint solutions and the feasibility validator.
//!
//! The validator never trusts the solver that produced a solution: every
//! rule is re-checked from the raw schedules, and every violation becomes a
//! report entry.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{Day, Instance, MachineId, PatientId, PatientSchedule, WindowId};
use crate::objective::{total_breakdown, total_objective, CostBreakdown, ObjectiveWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub schedules: Vec<PatientSchedule>,
    /// `1 + sum_p c_p` under the weights the solution was evaluated with.
    pub objective: f64,
    /// Summed `f1..f6` over all patients.
    pub breakdown: CostBreakdown,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_gap: Option<f64>,
}

impl Solution {
    /// Evaluates `schedules` and orders them by patient id.
    pub fn new(inst: &Instance, mut schedules: Vec<PatientSchedule>, weights: &ObjectiveWeights) -> Self {
        schedules.sort_by_key(|s| s.patient);
        Solution {
            objective: total_objective(inst, &schedules, weights),
            breakdown: total_breakdown(inst, &schedules),
            schedules,
            bound: None,
            relative_gap: None,
        }
    }

    pub fn empty() -> Self {
        Solution {
            schedules: Vec::new(),
            objective: crate::objective::OBJECTIVE_OFFSET,
            breakdown: CostBreakdown::default(),
            bound: None,
            relative_gap: None,
        }
    }

    pub fn schedule_of(&self, id: PatientId) -> Option<&PatientSchedule> {
        self.schedules.iter().find(|s| s.patient == id)
    }

    /// Attaches a lower bound and the relative gap `(objective - bound) / bound`.
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self.relative_gap = Some(relative_gap(self.objective, bound));
        self
    }
}

/// `(upper - lower) / lower`, clamped at 0 from below.
pub fn relative_gap(upper: f64, lower: f64) -> f64 {
    if lower <= 0.0 {
        return if upper <= lower { 0.0 } else { f64::INFINITY };
    }
    ((upper - lower) / lower).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum ViolationKind {
    /// Schedule names a patient that is not in the instance.
    UnknownPatient,
    /// A patient has no schedule.
    MissingSchedule,
    /// A patient has more than one schedule.
    DuplicateSchedule,
    /// Number of scheduled fractions differs from the protocol.
    FractionCount { expected: u32, found: u32 },
    /// Fraction `fraction` is not on the day after the previous fraction.
    NotConsecutive { fraction: usize },
    DayOutOfRange { fraction: usize, day: Day },
    MachineOutOfRange { fraction: usize, machine: MachineId },
    WindowOutOfRange { fraction: usize, window: WindowId },
    MachineNotAllowed { fraction: usize, machine: MachineId },
    /// Machines used are not all within one beam-matched group.
    BeamGroup,
    StartTooEarly { start: Day, earliest: Day },
    StartTooLate { start: Day, latest: Day },
    StartWeekday { start: Day },
    Capacity { machine: MachineId, day: Day, window: WindowId, used: u32, length: u32 },
    /// `earlier` has the earlier (or tied, lower-id) target but starts later.
    Dominance { earlier: PatientId, later: PatientId },
}

impl ViolationKind {
    pub fn code(&self) -> &'static str {
        match self {
            ViolationKind::UnknownPatient => "unknown_patient",
            ViolationKind::MissingSchedule => "missing_schedule",
            ViolationKind::DuplicateSchedule => "duplicate_schedule",
            ViolationKind::FractionCount { .. } => "fraction_count",
            ViolationKind::NotConsecutive { .. } => "not_consecutive",
            ViolationKind::DayOutOfRange { .. } => "day_out_of_range",
            ViolationKind::MachineOutOfRange { .. } => "machine_out_of_range",
            ViolationKind::WindowOutOfRange { .. } => "window_out_of_range",
            ViolationKind::MachineNotAllowed { .. } => "machine_not_allowed",
            ViolationKind::BeamGroup => "beam_group",
            ViolationKind::StartTooEarly { .. } => "start_too_early",
            ViolationKind::StartTooLate { .. } => "start_too_late",
            ViolationKind::StartWeekday { .. } => "start_weekday",
            ViolationKind::Capacity { .. } => "capacity",
            ViolationKind::Dominance { .. } => "dominance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patient: Option<PatientId>,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.patient {
            Some(p) => write!(f, "{p}: {:?}", self.kind),
            None => write!(f, "{:?}", self.kind),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<&'static str> {
        self.violations.iter().map(|v| v.kind.code()).collect()
    }

    pub fn has(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.kind.code() == code)
    }

    fn push(&mut self, patient: Option<PatientId>, kind: ViolationKind) {
        self.violations.push(Violation { patient, kind });
    }
}

/// Checks a set of schedules against every scheduling rule.
pub fn validate_schedules(inst: &Instance, schedules: &[PatientSchedule]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let machines = inst.machines().machine_count();
    let windows = inst.window_count();
    let horizon = inst.horizon();
    let mut seen: Vec<Option<&PatientSchedule>> = vec![None; inst.patients().len()];
    let mut load: HashMap<(MachineId, Day, WindowId), u32> = HashMap::new();

    for sched in schedules {
        let id = sched.patient;
        let Some(i) = inst.patient_index(id) else {
            report.push(Some(id), ViolationKind::UnknownPatient);
            continue;
        };
        if seen[i].is_some() {
            report.push(Some(id), ViolationKind::DuplicateSchedule);
            continue;
        }
        seen[i] = Some(sched);
        let patient = inst.patient(i);
        let proto = inst.protocol_of(i);

        if sched.fractions.len() != proto.fractions as usize {
            report.push(
                Some(id),
                ViolationKind::FractionCount {
                    expected: proto.fractions,
                    found: sched.fractions.len() as u32,
                },
            );
        }
        let mut indices_ok = true;
        for (f, fr) in sched.fractions.iter().enumerate() {
            if f > 0 && fr.day != sched.fractions[f - 1].day + 1 {
                report.push(Some(id), ViolationKind::NotConsecutive { fraction: f });
            }
            if fr.day == 0 || fr.day > horizon {
                report.push(Some(id), ViolationKind::DayOutOfRange { fraction: f, day: fr.day });
                indices_ok = false;
            }
            if fr.machine >= machines {
                report.push(Some(id), ViolationKind::MachineOutOfRange { fraction: f, machine: fr.machine });
                indices_ok = false;
            } else if !proto.allowed_machines.contains(&fr.machine) {
                report.push(Some(id), ViolationKind::MachineNotAllowed { fraction: f, machine: fr.machine });
            }
            if fr.window >= windows {
                report.push(Some(id), ViolationKind::WindowOutOfRange { fraction: f, window: fr.window });
                indices_ok = false;
            }
        }
        if sched.fractions.is_empty() {
            continue;
        }
        if indices_ok {
            let used: Vec<MachineId> = sched.machines().collect();
            let in_one_group = inst
                .machines()
                .trajectory_groups(&proto.allowed_machines)
                .iter()
                .any(|g| used.iter().all(|m| g.contains(m)));
            let all_allowed = used.iter().all(|m| proto.allowed_machines.contains(m));
            if all_allowed && !in_one_group {
                report.push(Some(id), ViolationKind::BeamGroup);
            }
        }
        let start = sched.start_day();
        if start < patient.d_min {
            report.push(Some(id), ViolationKind::StartTooEarly { start, earliest: patient.d_min });
        }
        let latest = (horizon + 1).saturating_sub(proto.fractions);
        if start > latest {
            report.push(Some(id), ViolationKind::StartTooLate { start, latest });
        }
        if start >= 1 && !proto.start_weekdays.contains(inst.time().weekday(start)) {
            report.push(Some(id), ViolationKind::StartWeekday { start });
        }
        if indices_ok {
            for (f, fr) in sched.fractions.iter().enumerate() {
                *load.entry((fr.machine, fr.day, fr.window)).or_default() += proto.billed(f);
            }
        }
    }

    for (i, s) in seen.iter().enumerate() {
        if s.is_none() {
            report.push(Some(inst.patient(i).id), ViolationKind::MissingSchedule);
        }
    }

    let mut cells: Vec<_> = load.into_iter().collect();
    cells.sort();
    for ((m, d, w), minutes) in cells {
        let used = minutes + inst.occupancy().get(m, d, w);
        let length = inst.window_length(w);
        if used > length {
            report.push(
                None,
                ViolationKind::Capacity { machine: m, day: d, window: w, used, length },
            );
        }
    }

    for &(a, b) in inst.chains().pairs() {
        if let (Some(sa), Some(sb)) = (seen[a], seen[b]) {
            if sa.start_day() > sb.start_day() {
                report.push(
                    None,
                    ViolationKind::Dominance {
                        earlier: inst.patient(a).id,
                        later: inst.patient(b).id,
                    },
                );
            }
        }
    }
    report
}

pub fn validate_solution(inst: &Instance, sol: &Solution) -> ValidationReport {
    validate_schedules(inst, &sol.schedules)
}
