//! Radiotherapy treatment scheduling.
//!
//! Every fraction of every patient is assigned a weekday, a time window and
//! a linac. The main solver is column generation over per-patient schedules
//! with an exact dynamic-programming pricing step and a branch-and-bound
//! finish on the generated columns. Greedy and restart heuristics provide
//! fast solutions and warm starts, an exhaustive search serves as ground
//! truth on tiny instances, and a clinic simulation produces benchmark
//! instances.

pub mod colgen;
pub mod domain;
pub mod error;
pub mod generator;
pub mod heuristics;
pub mod io;
pub mod lp;
pub mod master;
pub mod objective;
pub mod oracle;
pub mod pricing;
pub mod report;
pub mod solution;

pub use domain::{
    Day, DominanceChains, FractionSlot, Instance, MachineId, MachinePark, OccupancyGrid, Patient,
    PatientId, PatientSchedule, Priority, Protocol, SwitchKind, TimeGrid, Weekday, WeekdaySet,
    WindowId,
};
pub use error::{DomainError, FormatError, SolveError};
pub use objective::{CostBreakdown, ObjectiveWeights};
pub use solution::{validate_schedules, validate_solution, Solution, ValidationReport, ViolationKind};
