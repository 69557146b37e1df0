//! The six clinical cost components of a patient schedule and their weighted
//! composite.
//!
//! | k | component                                   |
//! |---|---------------------------------------------|
//! | 1 | weighted waiting days after `d_min`          |
//! | 2 | weighted days past the waiting-time target   |
//! | 3 | window switches between consecutive days     |
//! | 4 | window-preference deviation                  |
//! | 5 | fractions on non-preferred machines          |
//! | 6 | switches to partially beam-matched machines  |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Instance, MachinePark, Patient, PatientSchedule, Protocol, SwitchKind};
use crate::error::SolveError;

/// Offset added to every total objective so relative gaps stay defined at 0.
pub const OBJECTIVE_OFFSET: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveWeights {
    pub alpha: [f64; 6],
}

impl ObjectiveWeights {
    pub fn new(alpha: [f64; 6]) -> Result<Self, SolveError> {
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(SolveError::Usage("objective weights must be finite and non-negative".into()));
        }
        if alpha.iter().all(|a| *a == 0.0) {
            return Err(SolveError::Usage("at least one objective weight must be positive".into()));
        }
        Ok(ObjectiveWeights { alpha })
    }

    /// Objective functions #1..#4.
    pub fn preset(n: u8) -> Option<Self> {
        let alpha = match n {
            1 => [50.0, 100.0, 1.0, 0.0, 10.0, 10.0],
            2 => [50.0, 100.0, 1.0, 1.0, 0.0, 0.0],
            3 => [100.0, 0.0, 1.0, 0.0, 10.0, 0.0],
            4 => [100.0, 0.0, 1.0, 5.0, 10.0, 10.0],
            _ => return None,
        };
        Some(ObjectiveWeights { alpha })
    }

    /// Sensitivity cases around preset #2: 0 is the base case, 1..=6 the
    /// variations of `alpha_1..alpha_4`.
    pub fn sensitivity(case: u8) -> Option<Self> {
        let (a1, a2, a3, a4) = match case {
            0 => (50.0, 100.0, 1.0, 1.0),
            1 => (10.0, 100.0, 1.0, 5.0),
            2 => (10.0, 100.0, 5.0, 1.0),
            3 => (50.0, 50.0, 1.0, 1.0),
            4 => (100.0, 10.0, 1.0, 1.0),
            5 => (5.0, 10.0, 1.0, 2.0),
            6 => (1.0, 50.0, 5.0, 5.0),
            _ => return None,
        };
        Some(ObjectiveWeights {
            alpha: [a1, a2, a3, a4, 0.0, 0.0],
        })
    }

    pub fn presets() -> impl Iterator<Item = (u8, ObjectiveWeights)> {
        (1..=4).map(|n| (n, ObjectiveWeights::preset(n).unwrap()))
    }
}

impl FromStr for ObjectiveWeights {
    type Err = SolveError;

    /// Accepts a preset (`#2`, `2`) or six comma-separated weights.
    fn from_str(s: &str) -> Result<Self, SolveError> {
        let t = s.trim().trim_start_matches('#');
        if let Ok(n) = t.parse::<u8>() {
            return ObjectiveWeights::preset(n)
                .ok_or_else(|| SolveError::Usage(format!("unknown objective preset {s}")));
        }
        let parts: Vec<&str> = t.split(',').map(str::trim).collect();
        if parts.len() != 6 {
            return Err(SolveError::Usage(format!(
                "expected a preset #1..#4 or six comma-separated weights, got {s:?}"
            )));
        }
        let mut alpha = [0.0; 6];
        for (a, p) in alpha.iter_mut().zip(parts) {
            *a = p
                .parse()
                .map_err(|_| SolveError::Usage(format!("bad weight {p:?}")))?;
        }
        ObjectiveWeights::new(alpha)
    }
}

impl fmt::Display for ObjectiveWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.alpha.iter().map(|a| a.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

pub fn f1_waiting(patient: &Patient, sched: &PatientSchedule) -> u64 {
    patient.weight() as u64 * sched.start_day().saturating_sub(patient.d_min) as u64
}

pub fn f2_target_violation(patient: &Patient, sched: &PatientSchedule) -> u64 {
    patient.weight() as u64 * sched.start_day().saturating_sub(patient.d_target) as u64
}

pub fn f3_window_switches(sched: &PatientSchedule) -> u64 {
    sched
        .fractions
        .windows(2)
        .filter(|w| w[0].window != w[1].window)
        .count() as u64
}

pub fn f4_pref_violation(patient: &Patient, sched: &PatientSchedule) -> u64 {
    match patient.window_pref {
        None => 0,
        Some(pref) => sched.windows().map(|w| w.abs_diff(pref) as u64).sum(),
    }
}

pub fn f5_nonpreferred_machine(protocol: &Protocol, sched: &PatientSchedule) -> u64 {
    sched.machines().filter(|&m| !protocol.is_preferred(m)).count() as u64
}

pub fn f6_partial_switches(park: &MachinePark, sched: &PatientSchedule) -> u64 {
    sched
        .fractions
        .windows(2)
        .filter(|w| park.switch_kind(w[0].machine, w[1].machine) == SwitchKind::Partial)
        .count() as u64
}

/// Raw values `f1..f6` of one schedule (or a sum over schedules).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostBreakdown {
    pub f: [u64; 6],
}

impl CostBreakdown {
    pub fn of(inst: &Instance, patient: usize, sched: &PatientSchedule) -> Self {
        let p = inst.patient(patient);
        let proto = inst.protocol_of(patient);
        CostBreakdown {
            f: [
                f1_waiting(p, sched),
                f2_target_violation(p, sched),
                f3_window_switches(sched),
                f4_pref_violation(p, sched),
                f5_nonpreferred_machine(proto, sched),
                f6_partial_switches(inst.machines(), sched),
            ],
        }
    }

    /// `sum_k alpha_k f_k`
    pub fn composite(&self, weights: &ObjectiveWeights) -> f64 {
        self.f
            .iter()
            .zip(weights.alpha.iter())
            .map(|(&f, &a)| a * f as f64)
            .sum()
    }
}

impl std::ops::AddAssign for CostBreakdown {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.f.iter_mut().zip(rhs.f) {
            *a += b;
        }
    }
}

/// Composite cost `c_{p,i}` of one schedule.
pub fn composite_cost(
    inst: &Instance,
    patient: usize,
    sched: &PatientSchedule,
    weights: &ObjectiveWeights,
) -> f64 {
    CostBreakdown::of(inst, patient, sched).composite(weights)
}

/// `1 + sum_p c_p` over the given schedules; schedules naming unknown
/// patients are skipped.
pub fn total_objective(inst: &Instance, schedules: &[PatientSchedule], weights: &ObjectiveWeights) -> f64 {
    OBJECTIVE_OFFSET
        + schedules
            .iter()
            .filter_map(|s| inst.patient_index(s.patient).map(|i| composite_cost(inst, i, s, weights)))
            .sum::<f64>()
}

/// Summed breakdown over the given schedules.
pub fn total_breakdown(inst: &Instance, schedules: &[PatientSchedule]) -> CostBreakdown {
    let mut acc = CostBreakdown::default();
    for s in schedules {
        if let Some(i) = inst.patient_index(s.patient) {
            acc += CostBreakdown::of(inst, i, s);
        }
    }
    acc
}
