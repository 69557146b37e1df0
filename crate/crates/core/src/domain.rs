//! Core scheduling data: machines and beam matching, protocols, patients,
//! the weekday horizon with its time windows, pre-occupied capacity, and the
//! per-patient schedule record that every solver produces.
//!
//! Days are 1-based weekday ordinals; weekends never appear. Machines and
//! windows are 0-based indices.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

pub type Day = u32;
pub type MachineId = usize;
pub type WindowId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatientId(pub u32);

impl fmt::Display for PatientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Urgency class of a protocol (and therefore of its patients).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Priority {
    A,
    B,
    C,
}

impl Priority {
    pub const ALL: [Priority; 3] = [Priority::A, Priority::B, Priority::C];

    /// Waiting-time weight `c_p`.
    pub fn weight(self) -> u32 {
        match self {
            Priority::A => 10,
            Priority::B => 3,
            Priority::C => 1,
        }
    }

    /// Waiting-time target in days, counted inclusively from the earliest
    /// start day: a target of 2 means the course should start no later than
    /// `d_min + 1`.
    pub fn target_days(self) -> u32 {
        match self {
            Priority::A => 2,
            Priority::B => 14,
            Priority::C => 28,
        }
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Priority::A => "A",
            Priority::B => "B",
            Priority::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weekday {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
}

impl Weekday {
    pub const ALL: [Weekday; 5] = [
        Weekday::Mon,
        Weekday::Tue,
        Weekday::Wed,
        Weekday::Thu,
        Weekday::Fri,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Weekday {
        Weekday::ALL[i % 5]
    }
}

/// Relation between two machines for a patient switching mid-course.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SwitchKind {
    Same,
    Complete,
    Partial,
    Forbidden,
}

/// The linacs and their beam-match structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MachineParkData", into = "MachineParkData")]
pub struct MachinePark {
    names: Vec<String>,
    complete_groups: Vec<Vec<MachineId>>,
    partial_groups: Vec<Vec<MachineId>>,
    complete_of: Vec<Option<usize>>,
    partial_of: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MachineParkData {
    machines: Vec<String>,
    complete_groups: Vec<Vec<MachineId>>,
    partial_groups: Vec<Vec<MachineId>>,
}

impl TryFrom<MachineParkData> for MachinePark {
    type Error = DomainError;

    fn try_from(d: MachineParkData) -> Result<Self, Self::Error> {
        MachinePark::new(d.machines, d.complete_groups, d.partial_groups)
    }
}

impl From<MachinePark> for MachineParkData {
    fn from(p: MachinePark) -> Self {
        MachineParkData {
            machines: p.names,
            complete_groups: p.complete_groups,
            partial_groups: p.partial_groups,
        }
    }
}

impl MachinePark {
    pub fn new(
        names: Vec<String>,
        complete_groups: Vec<Vec<MachineId>>,
        partial_groups: Vec<Vec<MachineId>>,
    ) -> Result<Self, DomainError> {
        let m = names.len();
        if m == 0 {
            return Err(DomainError::Invalid("machine park has no machines".into()));
        }
        let index = |groups: &[Vec<MachineId>], what: &str| {
            let mut of = vec![None; m];
            for (g, members) in groups.iter().enumerate() {
                for &mid in members {
                    if mid >= m {
                        return Err(DomainError::Invalid(format!(
                            "{what} group {g} names unknown machine {mid}"
                        )));
                    }
                    if of[mid].replace(g).is_some() {
                        return Err(DomainError::Invalid(format!(
                            "machine {} is in more than one {what} group",
                            names[mid]
                        )));
                    }
                }
            }
            Ok(of)
        };
        let complete_of = index(&complete_groups, "complete")?;
        let partial_of = index(&partial_groups, "partial")?;
        Ok(MachinePark {
            names,
            complete_groups,
            partial_groups,
            complete_of,
            partial_of,
        })
    }

    /// `count` unmatched machines named `M1..`.
    pub fn unmatched(count: usize) -> Self {
        let names = (1..=count).map(|i| format!("M{i}")).collect();
        MachinePark::new(names, Vec::new(), Vec::new()).expect("valid park")
    }

    /// The ten-linac park with the beam matches of a four-hospital network
    /// (`M3`-`M9` and `M5`-`M6` completely matched; two partial families).
    pub fn reference_network() -> Self {
        let names = (1..=10).map(|i| format!("M{i}")).collect();
        // 0-based: M1 = 0, ..., M10 = 9
        let complete = vec![vec![2, 8], vec![4, 5]];
        let partial = vec![vec![0, 3, 7], vec![1, 2, 4, 5, 6, 8]];
        MachinePark::new(names, complete, partial).expect("valid park")
    }

    pub fn machine_count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, m: MachineId) -> &str {
        &self.names[m]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn complete_groups(&self) -> &[Vec<MachineId>] {
        &self.complete_groups
    }

    pub fn partial_groups(&self) -> &[Vec<MachineId>] {
        &self.partial_groups
    }

    pub fn switch_kind(&self, a: MachineId, b: MachineId) -> SwitchKind {
        if a == b {
            return SwitchKind::Same;
        }
        let shared = |of: &[Option<usize>]| matches!((of[a], of[b]), (Some(x), Some(y)) if x == y);
        if shared(&self.complete_of) {
            SwitchKind::Complete
        } else if shared(&self.partial_of) {
            SwitchKind::Partial
        } else {
            SwitchKind::Forbidden
        }
    }

    /// Machine sets a course may move within, restricted to `allowed`.
    ///
    /// Every beam group (and every lone machine) is intersected with
    /// `allowed`; sets contained in another are dropped, so a course is
    /// feasible machine-wise iff all its machines lie in one returned set.
    /// Result is sorted and deterministic.
    pub fn trajectory_groups(&self, allowed: &[MachineId]) -> Vec<Vec<MachineId>> {
        let allowed: BTreeSet<MachineId> = allowed.iter().copied().collect();
        let mut sets: Vec<BTreeSet<MachineId>> = Vec::new();
        let groups = self
            .complete_groups
            .iter()
            .chain(self.partial_groups.iter())
            .map(|g| g.iter().copied().collect::<BTreeSet<_>>())
            .chain((0..self.machine_count()).map(|m| BTreeSet::from([m])));
        for g in groups {
            let inter: BTreeSet<MachineId> = g.intersection(&allowed).copied().collect();
            if !inter.is_empty() {
                sets.push(inter);
            }
        }
        let mut out: Vec<Vec<MachineId>> = Vec::new();
        for (i, s) in sets.iter().enumerate() {
            let dominated = sets.iter().enumerate().any(|(j, t)| {
                j != i && s.is_subset(t) && (s.len() < t.len() || j < i)
            });
            if !dominated {
                out.push(s.iter().copied().collect());
            }
        }
        out.sort();
        out
    }
}

/// Set of weekdays on which a course may start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<Weekday>", into = "Vec<Weekday>")]
pub struct WeekdaySet(u8);

impl WeekdaySet {
    pub const ALL: WeekdaySet = WeekdaySet(0b11111);
    /// Monday to Thursday.
    pub const NO_FRIDAY: WeekdaySet = WeekdaySet(0b01111);

    pub fn contains(self, d: Weekday) -> bool {
        self.0 & (1 << d.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl From<Vec<Weekday>> for WeekdaySet {
    fn from(v: Vec<Weekday>) -> Self {
        WeekdaySet(v.iter().fold(0u8, |acc, d| acc | (1 << d.index())))
    }
}

impl From<WeekdaySet> for Vec<Weekday> {
    fn from(s: WeekdaySet) -> Self {
        Weekday::ALL.iter().copied().filter(|d| s.contains(*d)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub id: String,
    pub priority: Priority,
    /// Minutes of the first fraction (includes setup and instruction).
    pub dur_first: u32,
    pub dur_other: u32,
    pub fractions: u32,
    pub allowed_machines: Vec<MachineId>,
    pub preferred_machines: Vec<MachineId>,
    pub start_weekdays: WeekdaySet,
}

impl Protocol {
    pub fn is_preferred(&self, m: MachineId) -> bool {
        self.preferred_machines.contains(&m)
    }

    /// Minutes billed for fraction `f` (0-based).
    pub fn billed(&self, f: usize) -> u32 {
        if f == 0 {
            self.dur_first
        } else {
            self.dur_other
        }
    }

    fn check(&self, machines: usize) -> Result<(), DomainError> {
        let bad = |msg: &str| Err(DomainError::Invalid(format!("protocol {}: {msg}", self.id)));
        if self.dur_other == 0 || self.dur_first < self.dur_other {
            return bad("durations must satisfy dur_first >= dur_other > 0");
        }
        if self.fractions == 0 {
            return bad("needs at least one fraction");
        }
        if self.allowed_machines.is_empty() {
            return bad("no allowed machines");
        }
        if self.allowed_machines.iter().any(|&m| m >= machines) {
            return bad("allowed machine out of range");
        }
        if self
            .preferred_machines
            .iter()
            .any(|m| !self.allowed_machines.contains(m))
        {
            return bad("preferred machines must be allowed");
        }
        if self.start_weekdays.is_empty() {
            return bad("no allowed start weekday");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patient {
    pub id: PatientId,
    /// Index into [`Instance::protocols`].
    pub protocol: usize,
    pub priority: Priority,
    /// Earliest start day.
    pub d_min: Day,
    /// Waiting-time target day (latest start without penalty).
    pub d_target: Day,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_pref: Option<WindowId>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_placeholder: bool,
}

impl Patient {
    pub fn weight(&self) -> u32 {
        self.priority.weight()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Number of weekdays in the horizon (`D_w`).
    pub days: Day,
    pub window_lengths: Vec<u32>,
    /// Weekday of day 1.
    #[serde(default = "monday")]
    pub first_weekday: Weekday,
}

fn monday() -> Weekday {
    Weekday::Mon
}

impl TimeGrid {
    pub fn new(days: Day, window_lengths: Vec<u32>) -> Self {
        TimeGrid {
            days,
            window_lengths,
            first_weekday: Weekday::Mon,
        }
    }

    pub fn window_count(&self) -> usize {
        self.window_lengths.len()
    }

    pub fn weekday(&self, d: Day) -> Weekday {
        Weekday::from_index(self.first_weekday.index() + (d as usize).saturating_sub(1))
    }
}

/// Minutes already booked per (machine, day, window). Days past the stored
/// range read as empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    machines: usize,
    windows: usize,
    days: Day,
    minutes: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OccupiedCell {
    machine: MachineId,
    day: Day,
    window: WindowId,
    minutes: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OccupancyData {
    machines: usize,
    windows: usize,
    days: Day,
    cells: Vec<OccupiedCell>,
}

impl Serialize for OccupancyGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut cells = Vec::new();
        for d in 1..=self.days {
            for m in 0..self.machines {
                for w in 0..self.windows {
                    let minutes = self.get(m, d, w);
                    if minutes > 0 {
                        cells.push(OccupiedCell {
                            machine: m,
                            day: d,
                            window: w,
                            minutes,
                        });
                    }
                }
            }
        }
        OccupancyData {
            machines: self.machines,
            windows: self.windows,
            days: self.days,
            cells,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OccupancyGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let data = OccupancyData::deserialize(d)?;
        let mut g = OccupancyGrid::new(data.machines, data.windows, data.days);
        for c in data.cells {
            if c.machine >= data.machines || c.window >= data.windows || c.day == 0 || c.day > data.days
            {
                return Err(serde::de::Error::custom(format!(
                    "occupied cell (machine {}, day {}, window {}) out of range",
                    c.machine, c.day, c.window
                )));
            }
            g.add(c.machine, c.day, c.window, c.minutes);
        }
        Ok(g)
    }
}

impl OccupancyGrid {
    pub fn new(machines: usize, windows: usize, days: Day) -> Self {
        OccupancyGrid {
            machines,
            windows,
            days,
            minutes: vec![0; machines * windows * days as usize],
        }
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn windows(&self) -> usize {
        self.windows
    }

    pub fn days(&self) -> Day {
        self.days
    }

    fn idx(&self, m: MachineId, d: Day, w: WindowId) -> usize {
        ((d as usize - 1) * self.machines + m) * self.windows + w
    }

    pub fn get(&self, m: MachineId, d: Day, w: WindowId) -> u32 {
        if d == 0 || d > self.days {
            0
        } else {
            self.minutes[self.idx(m, d, w)]
        }
    }

    /// Adds minutes to a cell, growing the day range if needed.
    pub fn add(&mut self, m: MachineId, d: Day, w: WindowId, minutes: u32) {
        assert!(d >= 1, "days are 1-based");
        if d > self.days {
            self.resize_days(d);
        }
        let i = self.idx(m, d, w);
        self.minutes[i] += minutes;
    }

    pub fn resize_days(&mut self, days: Day) {
        self.minutes
            .resize(self.machines * self.windows * days as usize, 0);
        self.days = days;
    }

    pub fn total_minutes(&self) -> u64 {
        self.minutes.iter().map(|&x| x as u64).sum()
    }

    /// Books every fraction of `sched` (first fraction at `dur_first`).
    pub fn book(&mut self, sched: &PatientSchedule, protocol: &Protocol) {
        for (f, fr) in sched.fractions.iter().enumerate() {
            self.add(fr.machine, fr.day, fr.window, protocol.billed(f));
        }
    }

    /// Copy shifted so that day `offset + 1` becomes day 1; earlier days drop.
    pub fn shifted(&self, offset: Day, days: Day) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(self.machines, self.windows, days);
        for d in 1..=days {
            for m in 0..self.machines {
                for w in 0..self.windows {
                    let v = self.get(m, d + offset, w);
                    if v > 0 {
                        g.add(m, d, w, v);
                    }
                }
            }
        }
        g
    }
}

/// Residual minutes `L_w - S_{m,d,w}` of one cell.
pub fn residual_capacity(
    grid: &OccupancyGrid,
    time: &TimeGrid,
    m: MachineId,
    d: Day,
    w: WindowId,
) -> Result<u32, DomainError> {
    if m >= grid.machines() {
        return Err(DomainError::OutOfRange(format!("machine {m}")));
    }
    if w >= time.window_count() {
        return Err(DomainError::OutOfRange(format!("window {w}")));
    }
    if d == 0 || d > time.days {
        return Err(DomainError::OutOfRange(format!("day {d}")));
    }
    Ok(time.window_lengths[w].saturating_sub(grid.get(m, d, w)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FractionSlot {
    pub day: Day,
    pub machine: MachineId,
    pub window: WindowId,
}

/// One patient's complete assignment: a (day, machine, window) per fraction,
/// in fraction order. This is the unit the master problem selects.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PatientSchedule {
    pub patient: PatientId,
    pub fractions: Vec<FractionSlot>,
}

impl PatientSchedule {
    /// Consecutive-day course starting on `start` with the given
    /// (machine, window) per fraction.
    pub fn consecutive(patient: PatientId, start: Day, slots: &[(MachineId, WindowId)]) -> Self {
        PatientSchedule {
            patient,
            fractions: slots
                .iter()
                .enumerate()
                .map(|(f, &(machine, window))| FractionSlot {
                    day: start + f as Day,
                    machine,
                    window,
                })
                .collect(),
        }
    }

    pub fn start_day(&self) -> Day {
        self.fractions.first().map_or(0, |f| f.day)
    }

    pub fn last_day(&self) -> Day {
        self.fractions.iter().map(|f| f.day).max().unwrap_or(0)
    }

    pub fn machines(&self) -> impl Iterator<Item = MachineId> + '_ {
        self.fractions.iter().map(|f| f.machine)
    }

    pub fn windows(&self) -> impl Iterator<Item = WindowId> + '_ {
        self.fractions.iter().map(|f| f.window)
    }
}

/// Consecutive same-protocol pairs ordered by (target day, patient id).
/// The earlier patient of each pair must not start later than the other.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DominanceChains {
    pairs: Vec<(usize, usize)>,
    pred: Vec<Option<usize>>,
    succ: Vec<Option<usize>>,
}

impl DominanceChains {
    pub fn new(patients: &[Patient], protocols: usize) -> Self {
        let mut by_protocol: Vec<Vec<usize>> = vec![Vec::new(); protocols];
        for (i, p) in patients.iter().enumerate() {
            if p.protocol < protocols {
                by_protocol[p.protocol].push(i);
            }
        }
        let mut pairs = Vec::new();
        let mut pred = vec![None; patients.len()];
        let mut succ = vec![None; patients.len()];
        for members in &mut by_protocol {
            members.sort_by_key(|&i| (patients[i].d_target, patients[i].id));
            for w in members.windows(2) {
                let k = pairs.len();
                pairs.push((w[0], w[1]));
                succ[w[0]] = Some(k);
                pred[w[1]] = Some(k);
            }
        }
        DominanceChains { pairs, pred, succ }
    }

    /// `(earlier, later)` patient indices.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Pair in which patient `p` is the later member.
    pub fn pred_pair(&self, p: usize) -> Option<usize> {
        self.pred[p]
    }

    /// Pair in which patient `p` is the earlier member.
    pub fn succ_pair(&self, p: usize) -> Option<usize> {
        self.succ[p]
    }

    pub fn predecessor(&self, p: usize) -> Option<usize> {
        self.pred[p].map(|k| self.pairs[k].0)
    }

    pub fn successor(&self, p: usize) -> Option<usize> {
        self.succ[p].map(|k| self.pairs[k].1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct InstanceData {
    pub machines: MachinePark,
    pub time: TimeGrid,
    pub protocols: Vec<Protocol>,
    pub patients: Vec<Patient>,
    pub occupancy: OccupancyGrid,
}

/// A complete scheduling problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceData", into = "InstanceData")]
pub struct Instance {
    machines: MachinePark,
    time: TimeGrid,
    protocols: Vec<Protocol>,
    patients: Vec<Patient>,
    occupancy: OccupancyGrid,
    index: HashMap<PatientId, usize>,
    chains: DominanceChains,
    groups: Vec<Vec<Vec<MachineId>>>,
}

impl TryFrom<InstanceData> for Instance {
    type Error = DomainError;

    fn try_from(d: InstanceData) -> Result<Self, DomainError> {
        Instance::new(d.machines, d.time, d.protocols, d.patients, d.occupancy)
    }
}

impl From<Instance> for InstanceData {
    fn from(i: Instance) -> Self {
        InstanceData {
            machines: i.machines,
            time: i.time,
            protocols: i.protocols,
            patients: i.patients,
            occupancy: i.occupancy,
        }
    }
}

impl Instance {
    pub fn new(
        machines: MachinePark,
        time: TimeGrid,
        protocols: Vec<Protocol>,
        patients: Vec<Patient>,
        mut occupancy: OccupancyGrid,
    ) -> Result<Self, DomainError> {
        let m = machines.machine_count();
        if time.window_lengths.is_empty() || time.window_lengths.iter().any(|&l| l == 0) {
            return Err(DomainError::Invalid("window lengths must be positive".into()));
        }
        if occupancy.machines() != m || occupancy.windows() != time.window_count() {
            return Err(DomainError::Invalid(
                "occupancy grid dimensions do not match machines/windows".into(),
            ));
        }
        if occupancy.days() > time.days {
            for d in time.days + 1..=occupancy.days() {
                for mm in 0..m {
                    for w in 0..time.window_count() {
                        if occupancy.get(mm, d, w) > 0 {
                            return Err(DomainError::Invalid(format!(
                                "occupancy on day {d} lies beyond the horizon of {} days",
                                time.days
                            )));
                        }
                    }
                }
            }
        }
        occupancy.resize_days(time.days);
        for mm in 0..m {
            for d in 1..=time.days {
                for (w, &len) in time.window_lengths.iter().enumerate() {
                    if occupancy.get(mm, d, w) > len {
                        return Err(DomainError::Invalid(format!(
                            "occupancy exceeds window length at ({}, day {d}, window {w})",
                            machines.name(mm)
                        )));
                    }
                }
            }
        }
        for p in &protocols {
            p.check(m)?;
        }
        let mut index = HashMap::with_capacity(patients.len());
        for (i, p) in patients.iter().enumerate() {
            if index.insert(p.id, i).is_some() {
                return Err(DomainError::Invalid(format!("duplicate patient id {}", p.id)));
            }
            let proto = protocols.get(p.protocol).ok_or_else(|| {
                DomainError::Invalid(format!("patient {} references unknown protocol {}", p.id, p.protocol))
            })?;
            if proto.priority != p.priority {
                return Err(DomainError::Invalid(format!(
                    "patient {} priority {} differs from protocol {} priority {}",
                    p.id, p.priority, proto.id, proto.priority
                )));
            }
            if p.d_min < 1 || p.d_min > p.d_target || p.d_target > time.days {
                return Err(DomainError::Invalid(format!(
                    "patient {} needs 1 <= d_min ({}) <= d_target ({}) <= horizon ({})",
                    p.id, p.d_min, p.d_target, time.days
                )));
            }
            if let Some(w) = p.window_pref {
                if w >= time.window_count() {
                    return Err(DomainError::Invalid(format!(
                        "patient {} prefers unknown window {w}",
                        p.id
                    )));
                }
            }
        }
        let chains = DominanceChains::new(&patients, protocols.len());
        let groups = protocols
            .iter()
            .map(|p| machines.trajectory_groups(&p.allowed_machines))
            .collect();
        Ok(Instance {
            machines,
            time,
            protocols,
            patients,
            occupancy,
            index,
            chains,
            groups,
        })
    }

    pub fn machines(&self) -> &MachinePark {
        &self.machines
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn horizon(&self) -> Day {
        self.time.days
    }

    pub fn window_count(&self) -> usize {
        self.time.window_count()
    }

    pub fn window_length(&self, w: WindowId) -> u32 {
        self.time.window_lengths[w]
    }

    pub fn protocols(&self) -> &[Protocol] {
        &self.protocols
    }

    pub fn patients(&self) -> &[Patient] {
        &self.patients
    }

    pub fn patient(&self, i: usize) -> &Patient {
        &self.patients[i]
    }

    pub fn protocol_of(&self, i: usize) -> &Protocol {
        &self.protocols[self.patients[i].protocol]
    }

    pub fn patient_index(&self, id: PatientId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn occupancy(&self) -> &OccupancyGrid {
        &self.occupancy
    }

    pub fn chains(&self) -> &DominanceChains {
        &self.chains
    }

    /// Machine sets patient `i`'s course may move within.
    pub fn trajectory_groups(&self, i: usize) -> &[Vec<MachineId>] {
        &self.groups[self.patients[i].protocol]
    }

    /// Residual minutes of a cell against the pre-occupied grid.
    pub fn residual(&self, m: MachineId, d: Day, w: WindowId) -> u32 {
        self.time.window_lengths[w].saturating_sub(self.occupancy.get(m, d, w))
    }

    /// Latest start day that keeps the whole course inside the horizon.
    pub fn latest_start(&self, i: usize) -> Option<Day> {
        let f = self.protocol_of(i).fractions;
        (self.time.days + 1).checked_sub(f).filter(|&d| d >= 1)
    }

    /// Start days allowed for patient `i`: within `[d_min, D_w - F + 1]` and
    /// on an allowed weekday.
    pub fn start_days(&self, i: usize) -> Vec<Day> {
        let p = &self.patients[i];
        let proto = self.protocol_of(i);
        let Some(last) = self.latest_start(i) else {
            return Vec::new();
        };
        (p.d_min..=last)
            .filter(|&d| proto.start_weekdays.contains(self.time.weekday(d)))
            .collect()
    }

    /// Same instance with a different horizon length.
    pub fn with_horizon(&self, days: Day) -> Result<Instance, DomainError> {
        let mut time = self.time.clone();
        time.days = days;
        Instance::new(
            self.machines.clone(),
            time,
            self.protocols.clone(),
            self.patients.clone(),
            self.occupancy.clone(),
        )
    }

    /// Same instance with a replaced patient list.
    pub fn with_patients(&self, patients: Vec<Patient>) -> Result<Instance, DomainError> {
        Instance::new(
            self.machines.clone(),
            self.time.clone(),
            self.protocols.clone(),
            patients,
            self.occupancy.clone(),
        )
    }
}
