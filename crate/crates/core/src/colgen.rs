//! Column generation driver: horizon sizing, initial pool, pricing loop and
//! the integer finish.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Day, Instance, MachineId, PatientSchedule, WindowId};
use crate::error::SolveError;
use crate::heuristics::{greedy_solve, restart_search, Usage};
use crate::master::{ColumnPool, IpConfig, IpResult, NeighbourhoodConfig, Rmp};
use crate::objective::ObjectiveWeights;
use crate::pricing::{solve_pricing, DualPrices, NEGATIVE_REDUCED_COST};
use crate::solution::Solution;

/// Days added after the last day used by the sizing schedule.
pub const HORIZON_SLACK: Day = 30;

/// How far past `d_min` the sizing schedule looks for a start day.
const SIZING_SEARCH_DAYS: Day = 2000;

/// Picks one of the first two start days (at or after `from`) on which the
/// whole course fits on `machine`, each fraction in the first window with
/// room. Returns the start day and the window per fraction.
fn first_two_fits(
    inst: &Instance,
    patient: usize,
    machine: MachineId,
    from: Day,
    until: Day,
    residual: impl Fn(MachineId, Day, WindowId) -> u32,
    rng: &mut impl Rng,
) -> Option<(Day, Vec<WindowId>)> {
    let proto = inst.protocol_of(patient);
    let mut found = Vec::with_capacity(2);
    let mut s = from;
    while found.len() < 2 && s <= until {
        if proto.start_weekdays.contains(inst.time().weekday(s)) {
            let windows: Option<Vec<WindowId>> = (0..proto.fractions as usize)
                .map(|f| {
                    (0..inst.window_count()).find(|&w| proto.billed(f) <= residual(machine, s + f as Day, w))
                })
                .collect();
            if let Some(ws) = windows {
                found.push((s, ws));
            }
        }
        s += 1;
    }
    if found.is_empty() {
        return None;
    }
    let k = rng.random_range(0..found.len());
    Some(found.swap_remove(k))
}

/// Planning horizon `D_w` for an instance: one randomised greedy pass
/// places every patient (priority first, then `d_min`) on a random allowed
/// machine and one of its two first feasible start days; the horizon is the
/// last day used plus [`HORIZON_SLACK`], and never shorter than any target
/// day or the pre-booked grid.
///
/// The horizon stored in `inst` is ignored.
pub fn compute_horizon(inst: &Instance, rng: &mut impl Rng) -> Result<Day, SolveError> {
    let mut order: Vec<usize> = (0..inst.patients().len()).collect();
    order.sort_by_key(|&i| {
        let p = inst.patient(i);
        (p.priority, p.d_min, p.d_target, p.id)
    });
    let mut used: HashMap<(MachineId, Day, WindowId), u32> = HashMap::new();
    let occ = inst.occupancy();
    let lengths = &inst.time().window_lengths;
    let mut last = 0;
    for i in order {
        let p = inst.patient(i);
        let proto = inst.protocol_of(i);
        let mut machines = proto.allowed_machines.clone();
        machines.shuffle(rng);
        let mut placed = None;
        for m in machines {
            let residual = |m: MachineId, d: Day, w: WindowId| {
                lengths[w]
                    .saturating_sub(occ.get(m, d, w))
                    .saturating_sub(used.get(&(m, d, w)).copied().unwrap_or(0))
            };
            if let Some(fit) = first_two_fits(inst, i, m, p.d_min, p.d_min + SIZING_SEARCH_DAYS, residual, rng) {
                placed = Some((m, fit));
                break;
            }
        }
        let Some((m, (start, windows))) = placed else {
            return Err(SolveError::Unplaceable(p.id));
        };
        for (f, &w) in windows.iter().enumerate() {
            *used.entry((m, start + f as Day, w)).or_insert(0) += proto.billed(f);
        }
        last = last.max(start + proto.fractions - 1);
    }
    let targets = inst.patients().iter().map(|p| p.d_target).max().unwrap_or(0);
    Ok((last + HORIZON_SLACK).max(targets).max(occ.days()))
}

/// Randomised initial pool. Each pass starts from the pre-booked grid,
/// walks protocols in random order and each protocol's patients in chain
/// order, and gives every patient a random machine and window held for the
/// whole course on one of its two first feasible start days. Patients left
/// without any column get their cheapest isolated schedule.
pub fn initial_columns(
    inst: &Instance,
    weights: &ObjectiveWeights,
    rng: &mut impl Rng,
    passes: usize,
) -> Result<ColumnPool, SolveError> {
    let mut pool = ColumnPool::new(inst);
    let mut by_protocol: Vec<Vec<usize>> = vec![Vec::new(); inst.protocols().len()];
    for i in 0..inst.patients().len() {
        by_protocol[inst.patient(i).protocol].push(i);
    }
    for list in &mut by_protocol {
        list.sort_by_key(|&i| (inst.patient(i).d_target, inst.patient(i).id));
    }
    let horizon = inst.horizon();
    for _ in 0..passes {
        let mut usage = Usage::new(inst);
        let mut protocols: Vec<usize> = (0..by_protocol.len()).collect();
        protocols.shuffle(rng);
        for h in protocols {
            let mut prev_start: Option<Day> = None;
            for &i in &by_protocol[h] {
                let proto = inst.protocol_of(i);
                let Some(latest) = inst.latest_start(i) else {
                    continue;
                };
                let from = inst.patient(i).d_min.max(prev_start.unwrap_or(0));
                let mut combos: Vec<(MachineId, WindowId)> = proto
                    .allowed_machines
                    .iter()
                    .flat_map(|&m| (0..inst.window_count()).map(move |w| (m, w)))
                    .collect();
                combos.shuffle(rng);
                let mut placed = None;
                for (m, w) in combos {
                    let residual = |m, d, ww| if ww == w { usage.residual(inst, m, d, ww) } else { 0 };
                    if let Some((s, _)) = first_two_fits(inst, i, m, from, latest.min(horizon), residual, rng) {
                        placed = Some(PatientSchedule::consecutive(
                            inst.patient(i).id,
                            s,
                            &vec![(m, w); proto.fractions as usize],
                        ));
                        break;
                    }
                }
                if let Some(s) = placed {
                    usage.book(inst, i, &s);
                    prev_start = Some(s.start_day());
                    pool.add(inst, i, s, weights)?;
                }
            }
        }
    }
    let zero = DualPrices::zeros(inst);
    for i in 0..inst.patients().len() {
        if pool.of_patient(i).is_empty() {
            let col = solve_pricing(inst, i, &zero, weights).ok_or(SolveError::Unplaceable(inst.patient(i).id))?;
            pool.add(inst, i, col.schedule, weights)?;
        }
    }
    Ok(pool)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CgConfig {
    pub seed: u64,
    pub initial_passes: usize,
    pub max_iterations: usize,
    /// Wall-clock budget for the whole run, integer finish included.
    pub time_limit: Duration,
    pub node_limit: usize,
    /// Seed the pool and the branch-and-bound incumbent with a restart
    /// search solution.
    pub warm_start: bool,
    pub warm_start_passes: usize,
    /// Offer the greedy solution as a branch-and-bound incumbent.
    pub greedy_incumbent: bool,
    /// Run the price-and-dive heuristic before branch-and-bound.
    pub dive: bool,
    /// Pricing rounds after each fixing of the dive.
    pub dive_pricing_rounds: usize,
    /// Pricing rounds at each branch-and-bound node; 0 branches over the
    /// final pool only.
    pub node_pricing_rounds: usize,
    /// Pricing rounds at each node of a neighbourhood subproblem.
    pub neighbourhood_pricing_rounds: usize,
    /// Spend the time left after branch-and-bound on a large-neighbourhood
    /// search from the incumbent (from the greedy heuristic if
    /// branch-and-bound found none).
    pub neighbourhood: bool,
    /// Share of the remaining time given to branch-and-bound when the
    /// neighbourhood search follows.
    pub ip_time_share: f64,
    /// Patients released per neighbourhood.
    pub neighbourhood_size: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            seed: 0,
            initial_passes: 75,
            max_iterations: 500,
            time_limit: Duration::from_secs(3600),
            node_limit: 100_000,
            warm_start: false,
            warm_start_passes: 20,
            greedy_incumbent: true,
            dive: true,
            dive_pricing_rounds: 10,
            node_pricing_rounds: 3,
            neighbourhood_pricing_rounds: 0,
            neighbourhood: true,
            ip_time_share: 0.25,
            neighbourhood_size: 12,
        }
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub lp_value: f64,
    pub columns_added: usize,
    /// Smallest reduced cost found in the sweep (`None` if no patient had
    /// a feasible column).
    pub min_reduced_cost: Option<f64>,
    pub incumbent: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    /// Validated integer solution with bound and gap attached.
    pub solution: Option<Solution>,
    /// LP value of the final restricted master.
    pub lp_bound: f64,
    pub ip: IpResult,
    pub log: Vec<IterationLog>,
    /// Pricing found no improving column at the final duals.
    pub converged: bool,
    pub timed_out: bool,
    pub pool: ColumnPool,
    pub final_duals: DualPrices,
    /// Rounds and improvements of the neighbourhood search, if it ran.
    pub neighbourhood: Option<(usize, usize)>,
}

/// Smallest reduced cost over all patients at `duals` (`+inf` when no
/// patient has a feasible schedule).
pub fn termination_audit(inst: &Instance, duals: &DualPrices, weights: &ObjectiveWeights) -> f64 {
    (0..inst.patients().len())
        .into_par_iter()
        .filter_map(|i| solve_pricing(inst, i, duals, weights).map(|c| c.reduced_cost))
        .reduce(|| f64::INFINITY, f64::min)
}

pub fn run_column_generation(
    inst: &Instance,
    weights: &ObjectiveWeights,
    config: &CgConfig,
) -> Result<CgOutcome, SolveError> {
    let started = Instant::now();
    let deadline = started + config.time_limit;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pool = initial_columns(inst, weights, &mut rng, config.initial_passes)?;
    let mut incumbent: Option<Vec<PatientSchedule>> = None;
    if config.warm_start {
        if let Ok(sol) = restart_search(inst, weights, &mut rng, config.warm_start_passes) {
            for s in &sol.schedules {
                let i = inst.patient_index(s.patient).expect("solution patients belong to the instance");
                pool.add(inst, i, s.clone(), weights)?;
            }
            incumbent = Some(sol.schedules);
        }
    }
    if config.greedy_incumbent {
        if let Ok(sol) = greedy_solve(inst, weights) {
            let better = incumbent
                .as_ref()
                .is_none_or(|s| sol.objective < crate::objective::total_objective(inst, s, weights));
            for (i, s) in sol.schedules.iter().enumerate() {
                pool.add(inst, i, s.clone(), weights)?;
            }
            if better {
                incumbent = Some(sol.schedules);
            }
        }
    }
    let incumbent_value = incumbent
        .as_ref()
        .map(|s| crate::objective::total_objective(inst, s, weights));

    let mut rmp = Rmp::build(inst, &pool, weights);
    let mut log = Vec::new();
    let mut converged = false;
    let mut timed_out = false;
    rmp.set_deadline(Some(deadline));
    let mut lp = rmp.solve_lp(inst)?;
    for iteration in 1..=config.max_iterations {
        let priced: Vec<_> = (0..inst.patients().len())
            .into_par_iter()
            .map(|i| solve_pricing(inst, i, &lp.duals, weights))
            .collect();
        let min_reduced_cost = priced
            .iter()
            .flatten()
            .map(|c| c.reduced_cost)
            .reduce(f64::min);
        let mut added = 0;
        for (i, col) in priced.into_iter().enumerate() {
            if let Some(col) = col {
                if col.reduced_cost < NEGATIVE_REDUCED_COST && pool.add(inst, i, col.schedule, weights)?.is_some() {
                    added += 1;
                }
            }
        }
        let entry = IterationLog {
            iteration,
            lp_value: lp.objective,
            columns_added: added,
            min_reduced_cost,
            incumbent: incumbent_value,
        };
        log::debug!("{}", serde_json::to_string(&entry).unwrap_or_default());
        log.push(entry);
        if added == 0 {
            converged = true;
            break;
        }
        if Instant::now() >= deadline {
            timed_out = true;
            break;
        }
        rmp.sync(inst, &pool);
        match rmp.solve_lp(inst) {
            Ok(next) => lp = next,
            Err(SolveError::TimeLimit) => {
                timed_out = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    rmp.set_deadline(None);

    let lp_bound = lp.objective;
    let final_duals = lp.duals;
    if config.dive && Instant::now() < deadline {
        let dive = rmp.price_and_dive(inst, &mut pool, config.dive_pricing_rounds, deadline)?;
        log::debug!(
            "dive: objective {:?}, {} LP solves, {} columns added",
            dive.objective,
            dive.lp_solves,
            dive.columns_added
        );
        if let (Some(obj), Some(s)) = (dive.objective, dive.schedules) {
            if incumbent_value.is_none_or(|v| obj < v) {
                incumbent = Some(s);
            }
        }
    }

    let remaining = deadline.saturating_duration_since(Instant::now());
    let ip_time = if config.neighbourhood {
        remaining.mul_f64(config.ip_time_share.clamp(0.0, 1.0))
    } else {
        remaining
    };
    let ip_config = IpConfig {
        time_limit: ip_time.max(Duration::from_millis(100)),
        node_limit: config.node_limit,
        incumbent,
        pricing_rounds: config.node_pricing_rounds,
    };
    let ip = rmp.solve_ip(inst, &mut pool, &ip_config)?;
    let mut best = ip.schedules.clone();
    let mut neighbourhood = None;
    if config.neighbourhood && !ip.complete && Instant::now() < deadline {
        let start = best.clone().or_else(|| greedy_solve(inst, weights).ok().map(|s| s.schedules));
        if let Some(start) = start {
            let lns = NeighbourhoodConfig {
                time_limit: deadline.saturating_duration_since(Instant::now()),
                free: config.neighbourhood_size,
                pricing_rounds: config.neighbourhood_pricing_rounds,
                seed: config.seed,
                ..NeighbourhoodConfig::default()
            };
            let found = rmp.improve_neighbourhoods(inst, &mut pool, start, &lns)?;
            log::debug!(
                "neighbourhood search: {} rounds, {} improvements, objective {}",
                found.rounds,
                found.improvements,
                found.objective
            );
            neighbourhood = Some((found.rounds, found.improvements));
            best = Some(found.schedules);
        }
    }
    if !ip.complete && Instant::now() >= deadline {
        timed_out = true;
    }
    let solution = best
        .as_ref()
        .map(|s| Solution::new(inst, s.clone(), weights).with_bound(lp_bound));
    if let (Some(last), Some(sol)) = (log.last_mut(), &solution) {
        last.incumbent = Some(sol.objective);
    }
    Ok(CgOutcome {
        solution,
        lp_bound,
        ip,
        log,
        converged,
        timed_out,
        pool,
        final_duals,
        neighbourhood,
    })
}
