//! Per-patient metrics, per-priority summaries and weighted-sum sweeps
//! between waiting time and window preference.

use std::io::Write;

use serde::Serialize;

use crate::domain::{Instance, Priority};
use crate::error::SolveError;
use crate::objective::{
    f3_window_switches, f4_pref_violation, f5_nonpreferred_machine, f6_partial_switches, ObjectiveWeights,
};
use crate::solution::Solution;

/// One row per scheduled patient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatientMetrics {
    pub source: String,
    pub patient: u32,
    pub priority: Priority,
    pub placeholder: bool,
    pub start_day: u32,
    /// Days between the earliest start and the actual start.
    pub wait_days: u32,
    /// Days started after the target day.
    pub target_violation_days: u32,
    pub window_switches: u64,
    pub preference_violation: u64,
    pub nonpreferred_fractions: u64,
    pub partial_switches: u64,
}

pub const METRICS_HEADER: [&str; 11] = [
    "source",
    "patient",
    "priority",
    "placeholder",
    "start_day",
    "wait_days",
    "target_violation_days",
    "window_switches",
    "preference_violation",
    "nonpreferred_fractions",
    "partial_switches",
];

/// Metrics of every patient of `inst` that `sol` schedules.
pub fn patient_metrics(source: &str, inst: &Instance, sol: &Solution) -> Vec<PatientMetrics> {
    let mut rows = Vec::with_capacity(sol.schedules.len());
    for sched in &sol.schedules {
        let Some(i) = inst.patient_index(sched.patient) else {
            continue;
        };
        let p = inst.patient(i);
        let start = sched.start_day();
        rows.push(PatientMetrics {
            source: source.to_string(),
            patient: p.id.0,
            priority: p.priority,
            placeholder: p.is_placeholder,
            start_day: start,
            wait_days: start.saturating_sub(p.d_min),
            target_violation_days: start.saturating_sub(p.d_target),
            window_switches: f3_window_switches(sched),
            preference_violation: f4_pref_violation(p, sched),
            nonpreferred_fractions: f5_nonpreferred_machine(inst.protocol_of(i), sched),
            partial_switches: f6_partial_switches(inst.machines(), sched),
        });
    }
    rows
}

/// Writes a header line followed by one line per row. An empty slice
/// produces the header alone.
pub fn write_metrics_csv<W: Write>(rows: &[PatientMetrics], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregates over a group of patients. `group` is `A`, `B`, `C` or `all`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub patients: usize,
    pub mean_wait: f64,
    pub median_wait: f64,
    pub p90_wait: f64,
    pub max_wait: u32,
    pub late_starts: usize,
    pub mean_target_violation: f64,
    pub window_switches: u64,
    pub preference_violation: u64,
    pub nonpreferred_fractions: u64,
    pub partial_switches: u64,
}

/// Nearest-rank quantile of sorted values.
fn quantile(sorted: &[u32], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1] as f64
}

fn summarise(group: String, rows: &[&PatientMetrics]) -> GroupSummary {
    let n = rows.len();
    let mut waits: Vec<u32> = rows.iter().map(|r| r.wait_days).collect();
    waits.sort_unstable();
    let mean = |v: u64| if n == 0 { 0.0 } else { v as f64 / n as f64 };
    let median = if n == 0 {
        0.0
    } else if n % 2 == 1 {
        waits[n / 2] as f64
    } else {
        (waits[n / 2 - 1] + waits[n / 2]) as f64 / 2.0
    };
    GroupSummary {
        group,
        patients: n,
        mean_wait: mean(waits.iter().map(|&w| w as u64).sum()),
        median_wait: median,
        p90_wait: quantile(&waits, 0.9),
        max_wait: waits.last().copied().unwrap_or(0),
        late_starts: rows.iter().filter(|r| r.target_violation_days > 0).count(),
        mean_target_violation: mean(rows.iter().map(|r| r.target_violation_days as u64).sum()),
        window_switches: rows.iter().map(|r| r.window_switches).sum(),
        preference_violation: rows.iter().map(|r| r.preference_violation).sum(),
        nonpreferred_fractions: rows.iter().map(|r| r.nonpreferred_fractions).sum(),
        partial_switches: rows.iter().map(|r| r.partial_switches).sum(),
    }
}

/// One summary per priority class followed by the overall summary.
/// Placeholder patients are left out.
pub fn summarise_by_priority(rows: &[PatientMetrics]) -> Vec<GroupSummary> {
    let real: Vec<&PatientMetrics> = rows.iter().filter(|r| !r.placeholder).collect();
    let mut out: Vec<GroupSummary> = Priority::ALL
        .iter()
        .map(|&p| {
            let group: Vec<&PatientMetrics> = real.iter().copied().filter(|r| r.priority == p).collect();
            summarise(format!("{p:?}"), &group)
        })
        .collect();
    out.push(summarise("all".into(), &real));
    out
}

pub fn write_summary_csv<W: Write>(summary: &[GroupSummary], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for s in summary {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// One solved point of a weighted-sum sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub alpha_wait: f64,
    pub alpha_pref: f64,
    /// Weighted waiting time `f1`.
    pub waiting: u64,
    /// Window preference violation `f4`.
    pub preference: u64,
    pub objective: f64,
}

/// Removes repeated `(alpha_1, alpha_4)` pairs, keeping first occurrences.
pub fn dedup_weight_grid(grid: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    for &(a, b) in grid {
        if !out.iter().any(|&(x, y)| x == a && y == b) {
            out.push((a, b));
        }
    }
    out
}

/// Solves the instance once per grid entry, with `alpha_1` and `alpha_4`
/// of `base` replaced by the entry. Points come back in grid order after
/// deduplication.
pub fn weighted_sum_sweep<F>(
    base: &ObjectiveWeights,
    grid: &[(f64, f64)],
    mut solve: F,
) -> Result<Vec<ParetoPoint>, SolveError>
where
    F: FnMut(&ObjectiveWeights) -> Result<Solution, SolveError>,
{
    let mut points = Vec::new();
    for (a1, a4) in dedup_weight_grid(grid) {
        let mut alpha = base.alpha;
        alpha[0] = a1;
        alpha[3] = a4;
        let weights = ObjectiveWeights::new(alpha)?;
        let sol = solve(&weights)?;
        points.push(ParetoPoint {
            alpha_wait: a1,
            alpha_pref: a4,
            waiting: sol.breakdown.f[0],
            preference: sol.breakdown.f[3],
            objective: sol.objective,
        });
    }
    Ok(points)
}

/// Points whose `(waiting, preference)` pair no other point dominates,
/// one per distinct pair, ordered by increasing waiting time.
pub fn non_dominated(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let dominated = |p: &ParetoPoint| {
        points.iter().any(|q| {
            q.waiting <= p.waiting
                && q.preference <= p.preference
                && (q.waiting < p.waiting || q.preference < p.preference)
        })
    };
    let mut out: Vec<ParetoPoint> = Vec::new();
    for p in points {
        if !dominated(p) && !out.iter().any(|q| q.waiting == p.waiting && q.preference == p.preference) {
            out.push(p.clone());
        }
    }
    out.sort_by(|a, b| a.waiting.cmp(&b.waiting).then(b.preference.cmp(&a.preference)));
    out
}

pub fn write_pareto_csv<W: Write>(points: &[ParetoPoint], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["alpha_wait", "alpha_pref", "waiting", "preference", "objective"])?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
