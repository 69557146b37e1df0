//! Benchmark instances from a day-by-day clinic simulation.
//!
//! Every simulated day new patients arrive, expected priority A and B
//! arrivals of the coming weeks are added as placeholders, the resulting
//! instance is solved, and patients whose treatment starts within the notice
//! period (all priority A patients immediately) are frozen into the booked
//! grid. Everyone else goes back to the pending list for the next day.
//!
//! The simulation counts absolute weekdays from 1 (a Monday). Each daily
//! instance is rebased so that its day 1 is the first day after the
//! simulated day.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::colgen::compute_horizon;
use crate::domain::{
    Day, Instance, MachinePark, OccupancyGrid, Patient, PatientId, Priority, Protocol, TimeGrid, Weekday, WeekdaySet,
};
use crate::error::{DomainError, SolveError};
use crate::heuristics::greedy_solve;
use crate::objective::ObjectiveWeights;
use crate::solution::Solution;

/// A protocol with its share among protocols of the same priority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolEntry {
    pub protocol: Protocol,
    pub share: f64,
}

/// Window preference distribution: probability of no preference and of
/// each window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceModel {
    pub none: f64,
    pub windows: Vec<f64>,
}

impl PreferenceModel {
    /// Two windows: 20% none, 52% morning, 28% afternoon. Four windows: 25%
    /// first, 25% last, 50% none. Anything else: no preferences.
    pub fn reference(windows: usize) -> Self {
        match windows {
            2 => PreferenceModel {
                none: 0.2,
                windows: vec![0.8 * 0.65, 0.8 * 0.35],
            },
            4 => PreferenceModel {
                none: 0.5,
                windows: vec![0.25, 0.0, 0.0, 0.25],
            },
            w => PreferenceModel {
                none: 1.0,
                windows: vec![0.0; w],
            },
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> Option<usize> {
        let mut u: f64 = rng.random();
        if u < self.none {
            return None;
        }
        u -= self.none;
        for (w, &p) in self.windows.iter().enumerate() {
            if u < p {
                return Some(w);
            }
            u -= p;
        }
        self.windows.iter().rposition(|&p| p > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicConfig {
    /// Mean arrivals per weekday.
    pub arrival_rate: f64,
    /// Shares of priorities A, B and C.
    pub priority_shares: [f64; 3],
    pub protocols: Vec<ProtocolEntry>,
    pub machines: MachinePark,
    pub window_lengths: Vec<u32>,
    pub preferences: PreferenceModel,
    /// Days of notice before a priority B or C start is frozen.
    pub notice_days: Day,
    /// Weekdays of expected arrivals covered by placeholders.
    pub placeholder_lookahead: Day,
    pub weights: ObjectiveWeights,
}

fn proto(
    id: &str,
    priority: Priority,
    dur_first: u32,
    dur_other: u32,
    fractions: u32,
    preferred: &[usize],
    also: &[usize],
) -> Protocol {
    let to_index = |ms: &[usize]| ms.iter().map(|m| m - 1).collect::<Vec<_>>();
    let preferred_machines = to_index(preferred);
    let mut allowed_machines = preferred_machines.clone();
    allowed_machines.extend(to_index(also));
    allowed_machines.sort_unstable();
    Protocol {
        id: id.into(),
        priority,
        dur_first,
        dur_other,
        fractions,
        allowed_machines,
        preferred_machines,
        start_weekdays: WeekdaySet::ALL,
    }
}

/// Representative protocol mix on the ten-machine reference network
/// (machine numbers below are 1-based). Not clinical data.
pub fn reference_protocols() -> Vec<ProtocolEntry> {
    use Priority::*;
    let all_but_m10 = [1, 2, 3, 4, 5, 6, 7, 8, 9];
    let entries = [
        (proto("head-neck-vmat", A, 30, 15, 26, &[2, 3, 5, 6, 9], &[1, 4]), 0.20),
        (proto("brain-stx-3x", A, 40, 40, 3, &[10], &[]), 0.10),
        (proto("palliative-bone-5x", A, 30, 15, 5, &[1, 4, 8], &[2, 3, 5, 6, 7, 9]), 0.35),
        (proto("palliative-1x", A, 30, 15, 1, &all_but_m10, &[]), 0.20),
        (proto("lung-vmat", A, 30, 15, 15, &[2, 3, 5, 6, 7, 9], &[1, 4, 8]), 0.15),
        (proto("bladder-vmat", B, 30, 15, 20, &[2, 3, 5, 6, 7, 9], &[1, 4, 8]), 0.30),
        (proto("rectum-25x", B, 30, 15, 25, &[2, 3, 5, 6, 8], &[1, 4, 7]), 0.30),
        (proto("esophagus", B, 30, 15, 23, &[2, 3, 5, 6, 9], &[1, 4, 7]), 0.20),
        (proto("gynecological", B, 36, 18, 25, &[2, 3, 5, 6, 7, 9], &[]), 0.20),
        (proto("breast-bilateral", C, 50, 25, 13, &[1, 3, 4, 5, 6, 8], &[2, 7]), 0.20),
        (proto("breast-5x", C, 30, 15, 5, &[1, 3, 4, 5, 6, 8], &[2, 7]), 0.35),
        (proto("prostate-sbrt", C, 30, 15, 5, &[10], &[]), 0.15),
        (proto("prostate-20x", C, 30, 15, 20, &[2, 3, 5, 6, 9], &[7]), 0.30),
    ];
    entries
        .into_iter()
        .map(|(protocol, share)| ProtocolEntry { protocol, share })
        .collect()
}

impl ClinicConfig {
    /// Reference clinic: ten machines, a working day of 420 minutes split
    /// evenly into `windows` windows, objective #4.
    pub fn reference(arrival_rate: f64, windows: usize) -> Result<Self, DomainError> {
        if windows == 0 || 420 % windows as u32 != 0 {
            return Err(DomainError::Invalid(format!("cannot split 420 minutes into {windows} windows")));
        }
        let cfg = ClinicConfig {
            arrival_rate,
            priority_shares: [0.42, 0.18, 0.40],
            protocols: reference_protocols(),
            machines: MachinePark::reference_network(),
            window_lengths: vec![420 / windows as u32; windows],
            preferences: PreferenceModel::reference(windows),
            notice_days: 3,
            placeholder_lookahead: 20,
            weights: ObjectiveWeights::preset(4).expect("preset 4 exists"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |msg: String| Err(DomainError::Invalid(msg));
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return bad(format!("arrival rate {} must be finite and non-negative", self.arrival_rate));
        }
        let near_one = |x: f64| (x - 1.0).abs() < 1e-9;
        if self.priority_shares.iter().any(|&s| s < 0.0) || !near_one(self.priority_shares.iter().sum()) {
            return bad("priority shares must be non-negative and sum to 1".into());
        }
        for (k, prio) in Priority::ALL.into_iter().enumerate() {
            let total: f64 = self
                .protocols
                .iter()
                .filter(|e| e.protocol.priority == prio)
                .map(|e| e.share)
                .sum();
            if self.priority_shares[k] > 0.0 && !near_one(total) {
                return bad(format!("protocol shares of priority {prio} sum to {total}, not 1"));
            }
        }
        if self.protocols.iter().any(|e| e.share < 0.0) {
            return bad("protocol shares must be non-negative".into());
        }
        if self.preferences.windows.len() != self.window_lengths.len() {
            return bad("preference model and window lengths disagree on the window count".into());
        }
        let pref_total = self.preferences.none + self.preferences.windows.iter().sum::<f64>();
        if !near_one(pref_total) || self.preferences.windows.iter().any(|&p| p < 0.0) {
            return bad("preference probabilities must be non-negative and sum to 1".into());
        }
        if self.window_lengths.is_empty() || self.window_lengths.contains(&0) {
            return bad("window lengths must be positive".into());
        }
        // reuse the instance checks for protocols and machines
        Instance::new(
            self.machines.clone(),
            TimeGrid::new(1, self.window_lengths.clone()),
            self.protocols.iter().map(|e| e.protocol.clone()).collect(),
            Vec::new(),
            OccupancyGrid::new(self.machines.machine_count(), self.window_lengths.len(), 1),
        )?;
        Ok(())
    }

    fn priority_index(p: Priority) -> usize {
        match p {
            Priority::A => 0,
            Priority::B => 1,
            Priority::C => 2,
        }
    }

    /// Earliest start for a patient of `priority` arriving on `day`.
    pub fn earliest_start(&self, day: Day, priority: Priority) -> Day {
        match priority {
            Priority::A => day + 1,
            _ => day + self.notice_days,
        }
    }

    /// Expected daily arrivals per protocol.
    pub fn expected_per_protocol(&self) -> Vec<f64> {
        self.protocols
            .iter()
            .map(|e| self.arrival_rate * self.priority_shares[Self::priority_index(e.protocol.priority)] * e.share)
            .collect()
    }

    fn draw_protocol(&self, rng: &mut impl Rng) -> usize {
        let mut u: f64 = rng.random();
        let mut prio = Priority::C;
        for (k, p) in Priority::ALL.into_iter().enumerate() {
            if u < self.priority_shares[k] {
                prio = p;
                break;
            }
            u -= self.priority_shares[k];
        }
        let candidates: Vec<usize> = (0..self.protocols.len())
            .filter(|&h| self.protocols[h].protocol.priority == prio)
            .collect();
        let mut v: f64 = rng.random();
        for &h in &candidates {
            if v < self.protocols[h].share {
                return h;
            }
            v -= self.protocols[h].share;
        }
        *candidates.last().expect("validated config has a protocol per drawn priority")
    }

    fn patient(&self, id: u32, protocol: usize, arrival: Day, window_pref: Option<usize>, placeholder: bool) -> Patient {
        let priority = self.protocols[protocol].protocol.priority;
        let d_min = self.earliest_start(arrival, priority);
        Patient {
            id: PatientId(id),
            protocol,
            priority,
            d_min,
            d_target: d_min + priority.target_days() - 1,
            window_pref,
            is_placeholder: placeholder,
        }
    }
}

/// Arrivals of one day, numbered from `*next_id`.
pub fn sample_arrivals(day: Day, cfg: &ClinicConfig, rng: &mut impl Rng, next_id: &mut u32) -> Vec<Patient> {
    let count = if cfg.arrival_rate > 0.0 {
        let poisson = Poisson::new(cfg.arrival_rate).expect("positive finite rate");
        poisson.sample(rng) as u64
    } else {
        0
    };
    (0..count)
        .map(|_| {
            let h = cfg.draw_protocol(rng);
            let pref = cfg.preferences.sample(rng);
            let p = cfg.patient(*next_id, h, day, pref, false);
            *next_id += 1;
            p
        })
        .collect()
}

/// Placeholders for the expected priority A and B arrivals of the
/// `placeholder_lookahead` days after `day`. Expected counts per (day,
/// protocol) are rounded by largest remainder so the total matches the
/// rounded expectation.
pub fn make_placeholders(day: Day, cfg: &ClinicConfig, next_id: &mut u32) -> Vec<Patient> {
    let expected = cfg.expected_per_protocol();
    let mut cells: Vec<(Day, usize, f64)> = Vec::new();
    for a in day + 1..=day + cfg.placeholder_lookahead {
        for (h, &e) in expected.iter().enumerate() {
            if cfg.protocols[h].protocol.priority != Priority::C && e > 0.0 {
                cells.push((a, h, e));
            }
        }
    }
    let total: f64 = cells.iter().map(|c| c.2).sum();
    let target = total.round() as u64;
    let mut counts: Vec<u64> = cells.iter().map(|c| c.2.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut by_remainder: Vec<usize> = (0..cells.len()).collect();
    by_remainder.sort_by(|&x, &y| {
        let fx = cells[x].2 - cells[x].2.floor();
        let fy = cells[y].2 - cells[y].2.floor();
        fy.total_cmp(&fx).then(x.cmp(&y))
    });
    for &k in by_remainder.iter().take(target.saturating_sub(assigned) as usize) {
        counts[k] += 1;
    }
    let mut out = Vec::new();
    for (k, &(a, h, _)) in cells.iter().enumerate() {
        for _ in 0..counts[k] {
            out.push(cfg.patient(*next_id, h, a, None, true));
            *next_id += 1;
        }
    }
    out
}

/// State carried from one simulated day to the next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    /// Last simulated day (0 before the first step).
    pub day: Day,
    /// Frozen bookings by absolute day.
    pub fixed: OccupancyGrid,
    /// Patients waiting for a frozen booking, with absolute days.
    pub pending: Vec<Patient>,
    /// Sum of billed minutes of every frozen course.
    pub fixed_minutes: u64,
    pub next_id: u32,
}

/// One simulated day: the instance that was solved and its solution.
#[derive(Debug, Clone)]
pub struct DaySnapshot {
    pub day: Day,
    pub instance: Instance,
    pub solution: Solution,
    /// Patients frozen at the end of the day.
    pub fixed: usize,
}

pub type DaySolver<'a> = dyn FnMut(&Instance, &ObjectiveWeights) -> Result<Solution, SolveError> + 'a;

pub struct Simulation {
    cfg: ClinicConfig,
    rng: ChaCha8Rng,
    state: SimState,
}

impl Simulation {
    pub fn new(cfg: ClinicConfig, seed: u64) -> Result<Self, DomainError> {
        cfg.validate()?;
        let state = SimState {
            day: 0,
            fixed: OccupancyGrid::new(cfg.machines.machine_count(), cfg.window_lengths.len(), 0),
            pending: Vec::new(),
            fixed_minutes: 0,
            next_id: 1,
        };
        Ok(Simulation {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state,
        })
    }

    pub fn config(&self) -> &ClinicConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Rebased instance for the end of `day` with the given absolute-day
    /// patients.
    fn instance(&mut self, day: Day, patients: &[Patient]) -> Result<Instance, SolveError> {
        let rebased: Vec<Patient> = patients
            .iter()
            .map(|p| {
                let d_min = p.d_min.saturating_sub(day).max(1);
                Patient {
                    d_min,
                    d_target: p.d_target.saturating_sub(day).max(d_min),
                    ..p.clone()
                }
            })
            .collect();
        let booked_days = self.state.fixed.days().saturating_sub(day);
        let provisional = rebased
            .iter()
            .map(|p| p.d_target)
            .max()
            .unwrap_or(1)
            .max(booked_days)
            .max(1);
        let mut time = TimeGrid::new(provisional, self.cfg.window_lengths.clone());
        time.first_weekday = Weekday::from_index(day as usize);
        let sizing = Instance::new(
            self.cfg.machines.clone(),
            time,
            self.cfg.protocols.iter().map(|e| e.protocol.clone()).collect(),
            rebased,
            self.state.fixed.shifted(day, provisional),
        )?;
        let horizon = compute_horizon(&sizing, &mut self.rng)?;
        let mut occupancy = self.state.fixed.shifted(day, horizon);
        occupancy.resize_days(horizon);
        let mut time = sizing.time().clone();
        time.days = horizon;
        Ok(Instance::new(
            sizing.machines().clone(),
            time,
            sizing.protocols().to_vec(),
            sizing.patients().to_vec(),
            occupancy,
        )?)
    }

    /// Instance for the next day holding the pending patients plus exactly
    /// `arrivals` new ones and no placeholders. The simulation does not
    /// advance.
    pub fn burst_instance(&mut self, arrivals: usize) -> Result<Instance, SolveError> {
        let day = self.state.day + 1;
        let mut next_id = self.state.next_id;
        let mut patients = self.state.pending.clone();
        for _ in 0..arrivals {
            let h = self.cfg.draw_protocol(&mut self.rng);
            let pref = self.cfg.preferences.sample(&mut self.rng);
            patients.push(self.cfg.patient(next_id, h, day, pref, false));
            next_id += 1;
        }
        self.instance(day, &patients)
    }

    /// Simulates the next day with `solver`.
    pub fn step(&mut self, solver: &mut DaySolver<'_>) -> Result<DaySnapshot, SolveError> {
        let day = self.state.day + 1;
        let mut next_id = self.state.next_id;
        let arrivals = sample_arrivals(day, &self.cfg, &mut self.rng, &mut next_id);
        let placeholders = make_placeholders(day, &self.cfg, &mut next_id);
        self.state.next_id = next_id;
        let mut absolute = std::mem::take(&mut self.state.pending);
        absolute.extend(arrivals);
        absolute.extend(placeholders);
        let instance = self.instance(day, &absolute)?;
        let solution = solver(&instance, &self.cfg.weights)?;
        let mut fixed = 0;
        let mut pending = Vec::new();
        for (i, p) in absolute.into_iter().enumerate() {
            if p.is_placeholder {
                continue;
            }
            let sched = solution
                .schedule_of(p.id)
                .ok_or(SolveError::UncoveredPatient(p.id))?;
            if p.priority == Priority::A || sched.start_day() <= self.cfg.notice_days {
                let proto = instance.protocol_of(i);
                for (f, fr) in sched.fractions.iter().enumerate() {
                    self.state.fixed.add(fr.machine, fr.day + day, fr.window, proto.billed(f));
                    self.state.fixed_minutes += proto.billed(f) as u64;
                }
                fixed += 1;
            } else {
                pending.push(p);
            }
        }
        self.state.pending = pending;
        self.state.day = day;
        Ok(DaySnapshot {
            day,
            instance,
            solution,
            fixed,
        })
    }
}

/// Greedy day solver, the default for simulations.
pub fn greedy_day_solver(inst: &Instance, weights: &ObjectiveWeights) -> Result<Solution, SolveError> {
    greedy_solve(inst, weights)
}

/// Runs `days` simulated days and returns the snapshots of the days listed
/// in `keep`.
pub fn simulate(
    cfg: ClinicConfig,
    seed: u64,
    days: Day,
    keep: &[Day],
    solver: &mut DaySolver<'_>,
) -> Result<Vec<DaySnapshot>, SolveError> {
    let mut sim = Simulation::new(cfg, seed)?;
    let mut out = Vec::new();
    for _ in 0..days {
        let snap = sim.step(solver)?;
        if keep.contains(&snap.day) {
            out.push(snap);
        }
    }
    Ok(out)
}
