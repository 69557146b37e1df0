//! Fixtures and independent cost checks shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtsched::pricing::DualPrices;
use rtsched::{
    Instance, MachinePark, ObjectiveWeights, OccupancyGrid, Patient, PatientId, PatientSchedule, Priority, Protocol,
    TimeGrid, WeekdaySet,
};

pub fn weight_of(p: Priority) -> u64 {
    match p {
        Priority::A => 10,
        Priority::B => 3,
        Priority::C => 1,
    }
}

pub fn patient(id: u32, protocol: usize, priority: Priority, d_min: u32, d_target: u32, pref: Option<usize>) -> Patient {
    Patient {
        id: PatientId(id),
        protocol,
        priority,
        d_min,
        d_target,
        window_pref: pref,
        is_placeholder: false,
    }
}

pub fn protocol(id: &str, priority: Priority, first: u32, other: u32, fractions: u32, allowed: &[usize], preferred: &[usize]) -> Protocol {
    Protocol {
        id: id.into(),
        priority,
        dur_first: first,
        dur_other: other,
        fractions,
        allowed_machines: allowed.to_vec(),
        preferred_machines: preferred.to_vec(),
        start_weekdays: WeekdaySet::ALL,
    }
}

/// A random instance with at most 4 patients, 2 machines, 10 days and two
/// windows. Some cells are pre-booked so that capacity binds.
pub fn tiny_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let machines = rng.random_range(1..=2usize);
    let park = if machines == 1 {
        MachinePark::unmatched(1)
    } else {
        let names = vec!["M1".to_string(), "M2".to_string()];
        match rng.random_range(0..3) {
            0 => MachinePark::new(names, vec![vec![0, 1]], vec![]).unwrap(),
            1 => MachinePark::new(names, vec![], vec![vec![0, 1]]).unwrap(),
            _ => MachinePark::unmatched(2),
        }
    };
    let days = rng.random_range(6..=10u32);
    let window = 60;
    let priorities = [Priority::A, Priority::B, Priority::C];
    let n_protocols = rng.random_range(1..=2usize);
    let protocols: Vec<Protocol> = (0..n_protocols)
        .map(|h| {
            let allowed: Vec<usize> = if machines == 2 && rng.random_bool(0.7) {
                vec![0, 1]
            } else {
                vec![rng.random_range(0..machines)]
            };
            let preferred = vec![allowed[rng.random_range(0..allowed.len())]];
            let first = [30, 40][rng.random_range(0..2)];
            protocol(
                &format!("P{h}"),
                priorities[rng.random_range(0..3)],
                first,
                20,
                rng.random_range(1..=3),
                &allowed,
                &preferred,
            )
        })
        .collect();
    let n = rng.random_range(2..=4u32);
    let patients: Vec<Patient> = (0..n)
        .map(|i| {
            let h = rng.random_range(0..n_protocols);
            let d_min = rng.random_range(1..=3);
            let d_target = (d_min + rng.random_range(0..=3)).min(days);
            let pref = if rng.random_bool(0.7) { Some(rng.random_range(0..2)) } else { None };
            patient(i + 1, h, protocols[h].priority, d_min, d_target, pref)
        })
        .collect();
    let mut occ = OccupancyGrid::new(machines, 2, days);
    for m in 0..machines {
        for d in 1..=days {
            for w in 0..2 {
                if rng.random_bool(0.3) {
                    occ.add(m, d, w, [20, 30][rng.random_range(0..2)]);
                }
            }
        }
    }
    Instance::new(park, TimeGrid::new(days, vec![window; 2]), protocols, patients, occ).unwrap()
}

/// `f1..f6` of one schedule, written out from the definitions.
pub fn hand_breakdown(inst: &Instance, i: usize, sched: &PatientSchedule) -> [u64; 6] {
    let p = inst.patient(i);
    let proto = inst.protocol_of(i);
    let c = weight_of(p.priority);
    let start = sched.fractions[0].day as u64;
    let f1 = c * start.saturating_sub(p.d_min as u64);
    let f2 = c * start.saturating_sub(p.d_target as u64);
    let mut f3 = 0;
    let mut f6 = 0;
    let park = inst.machines();
    let same_group = |groups: &[Vec<usize>], a: usize, b: usize| groups.iter().any(|g| g.contains(&a) && g.contains(&b));
    for pair in sched.fractions.windows(2) {
        if pair[0].window != pair[1].window {
            f3 += 1;
        }
        let (a, b) = (pair[0].machine, pair[1].machine);
        if a != b && !same_group(park.complete_groups(), a, b) && same_group(park.partial_groups(), a, b) {
            f6 += 1;
        }
    }
    let f4 = match p.window_pref {
        None => 0,
        Some(w) => sched.fractions.iter().map(|f| (f.window as i64 - w as i64).unsigned_abs()).sum(),
    };
    let f5 = sched
        .fractions
        .iter()
        .filter(|f| !proto.preferred_machines.contains(&f.machine))
        .count() as u64;
    [f1, f2, f3, f4, f5, f6]
}

pub fn hand_cost(inst: &Instance, i: usize, sched: &PatientSchedule, weights: &ObjectiveWeights) -> f64 {
    hand_breakdown(inst, i, sched)
        .iter()
        .zip(weights.alpha.iter())
        .map(|(&f, &a)| a * f as f64)
        .sum()
}

/// Reduced cost of a schedule from the column's coefficients: cost, minus
/// the convexity dual, minus the capacity duals times billed minutes,
/// minus the dominance duals times the start day as it appears in each
/// `start(earlier) - start(later) <= 0` row.
pub fn hand_reduced_cost(
    inst: &Instance,
    i: usize,
    sched: &PatientSchedule,
    duals: &DualPrices,
    weights: &ObjectiveWeights,
) -> f64 {
    let proto = inst.protocol_of(i);
    let mut rc = hand_cost(inst, i, sched, weights) - duals.convexity[i];
    for (f, fr) in sched.fractions.iter().enumerate() {
        let billed = if f == 0 { proto.dur_first } else { proto.dur_other };
        rc -= duals.gamma(fr.machine, fr.day, fr.window) * billed as f64;
    }
    let start = sched.fractions[0].day as f64;
    for (k, &(earlier, later)) in inst.chains().pairs().iter().enumerate() {
        let coef = if earlier == i {
            1.0
        } else if later == i {
            -1.0
        } else {
            0.0
        };
        rc -= duals.dominance[k] * coef * start;
    }
    rc
}

/// Random duals with the signs of a minimisation LP with `<=` capacity and
/// dominance rows.
pub fn random_duals(inst: &Instance, rng: &mut impl Rng) -> DualPrices {
    let mut duals = DualPrices::zeros(inst);
    for l in duals.convexity.iter_mut() {
        *l = rng.random_range(-20.0..200.0);
    }
    for m in 0..inst.machines().machine_count() {
        for d in 1..=inst.horizon() {
            for w in 0..inst.window_count() {
                if rng.random_bool(0.5) {
                    duals.set_gamma(m, d, w, -rng.random_range(0.0..3.0));
                }
            }
        }
    }
    for e in duals.dominance.iter_mut() {
        *e = -rng.random_range(0.0..40.0);
    }
    duals
}
