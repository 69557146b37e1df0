//! Acceptance suite. Runs every criterion, prints one line per criterion
//! and exits non-zero if any failed.
//!
//! `cargo test -p rtsched --test acceptance -- 1 5` runs a subset.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use rtsched::colgen::{run_column_generation, termination_audit, CgConfig, CgOutcome};
use rtsched::generator::{greedy_day_solver, sample_arrivals, ClinicConfig, Simulation};
use rtsched::heuristics::{greedy_solve, restart_search};
use rtsched::master::{IpConfig, Rmp};
use rtsched::objective::{f1_waiting, f2_target_violation, f3_window_switches, f4_pref_violation};
use rtsched::objective::{f5_nonpreferred_machine, f6_partial_switches, total_objective, CostBreakdown};
use rtsched::oracle::{brute_force_optimal, ORACLE_NODE_CAP};
use rtsched::pricing::{enumerate_all_schedules, solve_pricing, ENUMERATION_CAP};
use rtsched::report::{non_dominated, weighted_sum_sweep};
use rtsched::{
    validate_schedules, Instance, MachinePark, ObjectiveWeights, OccupancyGrid, Patient, PatientSchedule, Priority,
    Protocol, TimeGrid, WeekdaySet,
};

type Outcome = Result<String, String>;

/// A finished CG run kept for the audit and bound checks.
struct Run {
    label: String,
    inst: Instance,
    weights: ObjectiveWeights,
    outcome: CgOutcome,
}

static RUNS: Mutex<Vec<Run>> = Mutex::new(Vec::new());

fn record(label: String, inst: &Instance, weights: &ObjectiveWeights, outcome: &CgOutcome) {
    RUNS.lock().unwrap().push(Run {
        label,
        inst: inst.clone(),
        weights: *weights,
        outcome: outcome.clone(),
    });
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tiny_cg(seed: u64) -> CgConfig {
    CgConfig {
        seed,
        time_limit: Duration::from_secs(10),
        ..CgConfig::default()
    }
}

/// Tiny instances the oracle can solve, with their preset number.
fn tiny_suite(first_seed: u64, count: usize) -> Vec<(u64, Instance)> {
    let mut out = Vec::new();
    let mut seed = first_seed;
    while out.len() < count {
        let inst = tiny_instance(seed);
        let w = ObjectiveWeights::preset(1).unwrap();
        if brute_force_optimal(&inst, &w, ORACLE_NODE_CAP).is_ok() {
            out.push((seed, inst));
        }
        seed += 1;
    }
    out
}

fn oracle_gap() -> Outcome {
    let started = Instant::now();
    let mut gaps = Vec::new();
    for (k, (seed, inst)) in tiny_suite(1, 50).into_iter().enumerate() {
        let preset = (k % 4) as u8 + 1;
        let w = ObjectiveWeights::preset(preset).unwrap();
        let exact = brute_force_optimal(&inst, &w, ORACLE_NODE_CAP).map_err(|e| format!("oracle, seed {seed}: {e}"))?;
        let out = run_column_generation(&inst, &w, &tiny_cg(seed)).map_err(|e| format!("CG, seed {seed}: {e}"))?;
        let sol = out
            .solution
            .as_ref()
            .ok_or_else(|| format!("CG found no solution for seed {seed}"))?;
        ensure(validate_schedules(&inst, &sol.schedules).is_valid(), || {
            format!("invalid CG solution for seed {seed}")
        })?;
        gaps.push((sol.objective - exact.objective) / exact.objective);
        record(format!("tiny seed {seed} preset {preset}"), &inst, &w, &out);
    }
    let elapsed = started.elapsed();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let max = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let detail = format!(
        "50 instances, mean gap {:.4}%, max gap {:.4}%, {:.1}s",
        mean * 100.0,
        max * 100.0,
        elapsed.as_secs_f64()
    );
    ensure(min > -1e-9, || format!("{detail}; CG beat the oracle ({min})"))?;
    ensure(mean <= 0.01 && max <= 0.05, || detail.clone())?;
    ensure(elapsed < Duration::from_secs(60), || format!("{detail}; too slow"))?;
    Ok(detail)
}

fn pricing_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut nonempty = 0;
    let mut worst: f64 = 0.0;
    for k in 0..200u64 {
        let inst = tiny_instance(10_000 + k);
        let i = rng.random_range(0..inst.patients().len());
        let w = ObjectiveWeights::preset((k % 4) as u8 + 1).unwrap();
        let duals = random_duals(&inst, &mut rng);
        let all = enumerate_all_schedules(&inst, i, ENUMERATION_CAP).map_err(|e| e.to_string())?;
        let priced = solve_pricing(&inst, i, &duals, &w);
        let Some(priced) = priced else {
            ensure(all.is_empty(), || format!("pair {k}: pricing found nothing among {} schedules", all.len()))?;
            continue;
        };
        nonempty += 1;
        let best = all
            .iter()
            .map(|s| hand_reduced_cost(&inst, i, s, &duals, &w))
            .fold(f64::INFINITY, f64::min);
        ensure(all.contains(&priced.schedule), || format!("pair {k}: priced schedule not enumerable"))?;
        let own = hand_reduced_cost(&inst, i, &priced.schedule, &duals, &w);
        ensure(priced.cost == hand_cost(&inst, i, &priced.schedule, &w), || {
            format!("pair {k}: cost {} differs from hand cost", priced.cost)
        })?;
        let diff = (priced.reduced_cost - best).abs().max((own - best).abs());
        worst = worst.max(diff);
        ensure(diff <= 1e-9, || format!("pair {k}: pricing {} vs enumeration {best}", priced.reduced_cost))?;

        let zero = rtsched::pricing::DualPrices::zeros(&inst);
        let cheapest = all
            .iter()
            .map(|s| hand_cost(&inst, i, s, &w))
            .fold(f64::INFINITY, f64::min);
        let at_zero = solve_pricing(&inst, i, &zero, &w).ok_or("pricing lost a feasible patient")?;
        ensure(at_zero.reduced_cost == cheapest, || {
            format!("pair {k}: zero-dual pricing {} vs cheapest {cheapest}", at_zero.reduced_cost)
        })?;
    }
    Ok(format!("200 pairs ({nonempty} with schedules), max deviation {worst:.2e}"))
}

fn termination_audit_check() -> Outcome {
    let runs = RUNS.lock().unwrap();
    ensure(!runs.is_empty(), || "no solved instances recorded".into())?;
    let mut lowest = f64::INFINITY;
    for r in runs.iter() {
        let v = termination_audit(&r.inst, &r.outcome.final_duals, &r.weights);
        lowest = lowest.min(v);
        ensure(v >= -1e-6, || {
            format!("{}: column with reduced cost {v} after CG (converged: {})", r.label, r.outcome.converged)
        })?;
    }
    Ok(format!("{} instances, smallest reduced cost {lowest:.3e}", runs.len()))
}

fn bound_sanity() -> Outcome {
    let runs = RUNS.lock().unwrap();
    ensure(!runs.is_empty(), || "no solved instances recorded".into())?;
    for r in runs.iter() {
        let sol = r
            .outcome
            .solution
            .as_ref()
            .ok_or_else(|| format!("{}: no solution", r.label))?;
        let lp = r.outcome.lp_bound;
        let obj = total_objective(&r.inst, &sol.schedules, &r.weights);
        ensure(lp <= obj + 1e-6 * obj.abs().max(1.0), || format!("{}: LP {lp} above IP {obj}", r.label))?;
        let expected = ((obj - lp) / lp).max(0.0);
        let reported = sol.relative_gap.ok_or_else(|| format!("{}: no gap reported", r.label))?;
        ensure((reported - expected).abs() <= 1e-9, || {
            format!("{}: reported gap {reported} vs recomputed {expected}", r.label)
        })?;
        ensure(sol.bound == Some(lp), || format!("{}: reported bound differs from LP", r.label))?;
    }
    Ok(format!("{} runs, LP <= IP and gaps match", runs.len()))
}

fn fixture_protocols() -> Vec<Protocol> {
    let mut no_friday = protocol("single", Priority::A, 48, 20, 1, &[0], &[0]);
    no_friday.start_weekdays = WeekdaySet::NO_FRIDAY;
    vec![
        protocol("course", Priority::C, 30, 15, 3, &[0, 1, 2], &[0]),
        protocol("restricted", Priority::B, 30, 15, 2, &[0, 1], &[0, 1]),
        no_friday,
    ]
}

/// Three machines (M1 and M2 completely matched, M3 alone), ten days from
/// a Monday, two windows of 120 minutes.
fn fixture(patients: Vec<Patient>, booked: &[(usize, u32, usize, u32)]) -> Instance {
    let park = MachinePark::new(vec!["M1".into(), "M2".into(), "M3".into()], vec![vec![0, 1]], vec![]).unwrap();
    let mut occ = OccupancyGrid::new(3, 2, 10);
    for &(m, d, w, min) in booked {
        occ.add(m, d, w, min);
    }
    Instance::new(park, TimeGrid::new(10, vec![120, 120]), fixture_protocols(), patients, occ).unwrap()
}

fn sched(id: u32, days: &[u32], slots: &[(usize, usize)]) -> PatientSchedule {
    PatientSchedule {
        patient: rtsched::PatientId(id),
        fractions: days
            .iter()
            .zip(slots)
            .map(|(&day, &(machine, window))| rtsched::FractionSlot { day, machine, window })
            .collect(),
    }
}

struct Fixture {
    name: &'static str,
    code: &'static str,
    inst: Instance,
    bad: Vec<PatientSchedule>,
    good: Vec<PatientSchedule>,
}

fn violation_fixtures() -> Vec<Fixture> {
    let c = |id, d_min, d_target| patient(id, 0, Priority::C, d_min, d_target, None);
    let b = |id| patient(id, 1, Priority::B, 1, 5, None);
    let a = |id| patient(id, 2, Priority::A, 1, 5, None);
    let three = [(0, 0); 3];
    vec![
        Fixture {
            name: "gap inside the course",
            code: "not_consecutive",
            inst: fixture(vec![c(1, 1, 5)], &[]),
            bad: vec![sched(1, &[1, 2, 4], &three)],
            good: vec![sched(1, &[1, 2, 3], &three)],
        },
        Fixture {
            name: "course one fraction short",
            code: "fraction_count",
            inst: fixture(vec![c(1, 1, 5)], &[]),
            bad: vec![sched(1, &[1, 2], &three[..2])],
            good: vec![sched(1, &[1, 2, 3], &three)],
        },
        Fixture {
            name: "patient left out",
            code: "missing_schedule",
            inst: fixture(vec![b(1), b(2)], &[]),
            bad: vec![sched(1, &[1, 2], &[(0, 0), (0, 0)])],
            good: vec![sched(1, &[1, 2], &[(0, 0), (0, 0)]), sched(2, &[1, 2], &[(1, 0), (1, 0)])],
        },
        Fixture {
            name: "patient booked twice",
            code: "duplicate_schedule",
            inst: fixture(vec![b(1)], &[]),
            bad: vec![sched(1, &[1, 2], &[(0, 0), (0, 0)]), sched(1, &[3, 4], &[(0, 1), (0, 1)])],
            good: vec![sched(1, &[1, 2], &[(0, 0), (0, 0)])],
        },
        Fixture {
            name: "switch to an unmatched machine",
            code: "beam_group",
            inst: fixture(vec![c(1, 1, 5)], &[]),
            bad: vec![sched(1, &[1, 2, 3], &[(0, 0), (2, 0), (0, 0)])],
            good: vec![sched(1, &[1, 2, 3], &[(0, 0), (1, 0), (0, 0)])],
        },
        Fixture {
            name: "machine outside the protocol",
            code: "machine_not_allowed",
            inst: fixture(vec![b(1)], &[]),
            bad: vec![sched(1, &[1, 2], &[(2, 0), (2, 0)])],
            good: vec![sched(1, &[1, 2], &[(1, 0), (1, 0)])],
        },
        Fixture {
            name: "start before the earliest day",
            code: "start_too_early",
            inst: fixture(vec![c(1, 3, 5)], &[]),
            bad: vec![sched(1, &[2, 3, 4], &three)],
            good: vec![sched(1, &[3, 4, 5], &three)],
        },
        Fixture {
            name: "course runs past the horizon",
            code: "start_too_late",
            inst: fixture(vec![c(1, 1, 5)], &[]),
            bad: vec![sched(1, &[9, 10, 11], &three)],
            good: vec![sched(1, &[8, 9, 10], &three)],
        },
        Fixture {
            name: "start on a Friday",
            code: "start_weekday",
            inst: fixture(vec![a(1)], &[]),
            bad: vec![sched(1, &[5], &[(0, 0)])],
            good: vec![sched(1, &[4], &[(0, 0)])],
        },
        Fixture {
            name: "first fraction longer than the residual",
            code: "capacity",
            inst: fixture(vec![a(1)], &[(0, 1, 0, 80)]),
            bad: vec![sched(1, &[1], &[(0, 0)])],
            good: vec![sched(1, &[1], &[(0, 1)])],
        },
        Fixture {
            name: "two courses overfill a window",
            code: "capacity",
            inst: fixture(vec![c(1, 1, 5), c(2, 1, 6)], &[(0, 2, 0, 90)]),
            bad: vec![sched(1, &[1, 2, 3], &three), sched(2, &[2, 3, 4], &[(0, 0), (0, 1), (0, 1)])],
            good: vec![sched(1, &[1, 2, 3], &three), sched(2, &[2, 3, 4], &[(0, 1), (0, 1), (0, 1)])],
        },
        Fixture {
            name: "later target starts first",
            code: "dominance",
            inst: fixture(vec![c(1, 1, 3), c(2, 1, 5)], &[]),
            bad: vec![sched(1, &[7, 8, 9], &three), sched(2, &[4, 5, 6], &three)],
            good: vec![sched(1, &[4, 5, 6], &three), sched(2, &[7, 8, 9], &three)],
        },
    ]
}

fn validator_completeness() -> Outcome {
    let fixtures = violation_fixtures();
    for f in &fixtures {
        let bad = validate_schedules(&f.inst, &f.bad);
        ensure(bad.has(f.code), || format!("{}: expected {}, got {:?}", f.name, f.code, bad.codes()))?;
        let good = validate_schedules(&f.inst, &f.good);
        ensure(good.is_valid(), || format!("{} (clean): got {:?}", f.name, good.codes()))?;
    }
    let empty = fixture(vec![], &[]);
    ensure(validate_schedules(&empty, &[]).is_valid(), || "empty solution rejected".into())?;
    Ok(format!("{} violation fixtures flagged, {} clean fixtures pass", fixtures.len(), fixtures.len()))
}

fn objective_formulas() -> Outcome {
    let pa = patient(1, 0, Priority::A, 2, 2, None);
    let pb = patient(2, 0, Priority::B, 1, 14, None);
    let pc = patient(3, 0, Priority::C, 1, 20, None);
    let at = |id: u32, start: u32, n: usize| sched(id, &(start..start + n as u32).collect::<Vec<_>>(), &vec![(0, 0); n]);
    let windows = |ws: &[usize]| sched(1, &(1..=ws.len() as u32).collect::<Vec<_>>(), &ws.iter().map(|&w| (0, w)).collect::<Vec<_>>());
    let machines = |ms: &[usize]| sched(1, &(1..=ms.len() as u32).collect::<Vec<_>>(), &ms.iter().map(|&m| (m, 0)).collect::<Vec<_>>());
    let cases: Vec<(&str, u64, u64)> = vec![
        ("f1 priority A waits 3 days", f1_waiting(&pa, &at(1, 5, 1)), 30),
        ("f1 start on earliest day", f1_waiting(&pa, &at(1, 2, 1)), 0),
        ("f1 priority C waits 7 days", f1_waiting(&pc, &at(3, 8, 1)), 7),
        ("f2 start before target", f2_target_violation(&pb, &at(2, 10, 1)), 0),
        ("f2 priority B two days late", f2_target_violation(&pb, &at(2, 16, 1)), 6),
        ("f2 priority A one day late", f2_target_violation(&pa, &at(1, 3, 1)), 10),
        ("f3 constant window", f3_window_switches(&windows(&[0, 0, 0])), 0),
        ("f3 out and back", f3_window_switches(&windows(&[0, 1, 0])), 2),
        ("f3 single fraction", f3_window_switches(&windows(&[1])), 0),
        ("f4 no preference", f4_pref_violation(&pc, &windows(&[1, 1])), 0),
        (
            "f4 one fraction off",
            f4_pref_violation(&patient(1, 0, Priority::C, 1, 1, Some(0)), &windows(&[0, 0, 1])),
            1,
        ),
        (
            "f4 two windows off twice",
            f4_pref_violation(&patient(1, 0, Priority::C, 1, 1, Some(1)), &windows(&[3, 3])),
            4,
        ),
    ];
    let mut checked = cases.len();
    for (name, got, want) in &cases {
        ensure(got == want, || format!("{name}: {got} != {want}"))?;
    }

    let five = protocol("five", Priority::C, 30, 15, 5, &[0, 1], &[0]);
    let same = protocol("same", Priority::C, 30, 15, 5, &[0, 1], &[0, 1]);
    let f5_cases = [
        ("f5 all preferred", f5_nonpreferred_machine(&five, &machines(&[0, 0, 0, 0, 0])), 0),
        ("f5 three off", f5_nonpreferred_machine(&five, &machines(&[1, 0, 1, 0, 1])), 3),
        ("f5 preferred equals allowed", f5_nonpreferred_machine(&same, &machines(&[1, 0, 1, 0, 1])), 0),
    ];
    let park = MachinePark::reference_network();
    let f6_cases = [
        ("f6 constant machine", f6_partial_switches(&park, &machines(&[2, 2, 2])), 0),
        ("f6 complete match", f6_partial_switches(&park, &machines(&[2, 8, 2])), 0),
        ("f6 partial match", f6_partial_switches(&park, &machines(&[2, 4, 2])), 2),
    ];
    for (name, got, want) in f5_cases.iter().chain(f6_cases.iter()) {
        ensure(got == want, || format!("{name}: {got} != {want}"))?;
        checked += 1;
    }

    let only_wait = ObjectiveWeights::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    let b = CostBreakdown { f: [7, 3, 2, 1, 4, 5] };
    ensure(b.composite(&only_wait) == 7.0, || "alpha1 alone does not give f1".into())?;
    let b = CostBreakdown { f: [3, 0, 1, 2, 9, 9] };
    let preset2 = ObjectiveWeights::preset(2).unwrap();
    ensure(b.composite(&preset2) == 153.0, || format!("preset 2 composite {}", b.composite(&preset2)))?;
    let hand: [[f64; 6]; 4] = [
        [50.0, 100.0, 1.0, 0.0, 10.0, 10.0],
        [50.0, 100.0, 1.0, 1.0, 0.0, 0.0],
        [100.0, 0.0, 1.0, 0.0, 10.0, 0.0],
        [100.0, 0.0, 1.0, 5.0, 10.0, 10.0],
    ];
    let samples = [[3u64, 0, 1, 2, 9, 9], [0, 0, 0, 0, 0, 0], [12, 4, 3, 7, 2, 1], [1, 1, 1, 1, 1, 1]];
    for (k, alpha) in hand.iter().enumerate() {
        let w = ObjectiveWeights::preset(k as u8 + 1).unwrap();
        for f in samples {
            let expected = alpha[0] * f[0] as f64
                + alpha[1] * f[1] as f64
                + alpha[2] * f[2] as f64
                + alpha[3] * f[3] as f64
                + alpha[4] * f[4] as f64
                + alpha[5] * f[5] as f64;
            let got = CostBreakdown { f }.composite(&w);
            ensure(got == expected, || format!("preset {}: {got} != {expected}", k + 1))?;
            checked += 1;
        }
    }
    let empty = fixture(vec![], &[]);
    ensure(total_objective(&empty, &[], &preset2) == 1.0, || "empty solution total is not 1".into())?;
    Ok(format!("{} formula checks exact", checked + 3))
}

fn generator_statistics() -> Outcome {
    let cfg = ClinicConfig::reference(16.0, 2).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut next_id = 1;
    let days = 10_000;
    let mut total = 0usize;
    let mut prefs = [0usize; 3];
    for day in 1..=days {
        for p in sample_arrivals(day, &cfg, &mut rng, &mut next_id) {
            total += 1;
            match p.window_pref {
                None => prefs[0] += 1,
                Some(w) => prefs[w + 1] += 1,
            }
        }
    }
    let mean = total as f64 / days as f64;
    let shares: Vec<f64> = prefs.iter().map(|&c| c as f64 / total as f64).collect();
    let detail = format!(
        "mean arrivals {mean:.3}, preference shares none {:.3} morning {:.3} afternoon {:.3}",
        shares[0], shares[1], shares[2]
    );
    ensure((mean - 16.0).abs() <= 0.5, || detail.clone())?;
    for (got, want) in shares.iter().zip([0.20, 0.52, 0.28]) {
        ensure((got - want).abs() <= 0.02, || detail.clone())?;
    }
    Ok(detail)
}

fn desk_scale() -> Outcome {
    let mut cfg = ClinicConfig::reference(16.0, 2).map_err(|e| e.to_string())?;
    cfg.placeholder_lookahead = 5;
    let mut sim = Simulation::new(cfg, 1).map_err(|e| e.to_string())?;
    let mut greedy = greedy_day_solver;
    for _ in 0..100 {
        sim.step(&mut greedy).map_err(|e| e.to_string())?;
    }
    let weights = ObjectiveWeights::preset(4).unwrap();
    let limit = Duration::from_secs(180);
    let mut captured: Option<(Instance, CgOutcome, Duration)> = None;
    let mut solve = |inst: &Instance, _: &ObjectiveWeights| {
        let started = Instant::now();
        let config = CgConfig {
            seed: 1,
            time_limit: limit,
            ..CgConfig::default()
        };
        let out = run_column_generation(inst, &weights, &config)?;
        let sol = out.solution.clone();
        captured = Some((inst.clone(), out, started.elapsed()));
        match sol {
            Some(s) => Ok(s),
            None => greedy_solve(inst, &weights),
        }
    };
    sim.step(&mut solve).map_err(|e| e.to_string())?;
    let (inst, out, elapsed) = captured.ok_or("solver was not called")?;
    record("desk-scale day 101".into(), &inst, &weights, &out);
    let sol = out.solution.as_ref().ok_or("CG found no integer solution")?;
    let report = validate_schedules(&inst, &sol.schedules);
    let gap = sol.relative_gap.unwrap_or(f64::INFINITY);
    let mean_wait = |pr: Priority| {
        let waits: Vec<f64> = inst
            .patients()
            .iter()
            .filter(|p| !p.is_placeholder && p.priority == pr)
            .filter_map(|p| sol.schedule_of(p.id).map(|s| s.fractions[0].day.saturating_sub(p.d_min) as f64))
            .collect();
        (waits.len(), waits.iter().sum::<f64>() / waits.len().max(1) as f64)
    };
    let (na, wa) = mean_wait(Priority::A);
    let (nc, wc) = mean_wait(Priority::C);
    let detail = format!(
        "{} patients ({} placeholders), {} machines, LP {:.2}, IP {}, gap {:.2}%, {:.0}s; mean wait A {wa:.2} (n={na}), C {wc:.2} (n={nc})",
        inst.patients().len(),
        inst.patients().iter().filter(|p| p.is_placeholder).count(),
        inst.machines().machine_count(),
        out.lp_bound,
        sol.objective,
        gap * 100.0,
        elapsed.as_secs_f64()
    );
    ensure(report.is_valid(), || format!("{detail}; violations {:?}", report.codes()))?;
    ensure(elapsed <= Duration::from_secs(600), || format!("{detail}; over ten minutes"))?;
    ensure(wa <= wc, || format!("{detail}; A waits longer than C"))?;
    ensure(gap <= 0.05, || detail.clone())?;
    Ok(detail)
}

fn pareto_conflict() -> Outcome {
    let proto = protocol("one", Priority::C, 30, 30, 1, &[0], &[0]);
    let patients = (1..=4).map(|id| patient(id, 0, Priority::C, 1, 8, Some(0))).collect();
    let inst = Instance::new(
        MachinePark::unmatched(1),
        TimeGrid::new(8, vec![30, 30]),
        vec![proto],
        patients,
        OccupancyGrid::new(1, 2, 8),
    )
    .map_err(|e| e.to_string())?;
    let grid: Vec<(f64, f64)> = [10.0, 5.0, 1.5, 0.5, 0.2, 0.1].iter().map(|&a| (a, 1.0)).collect();
    let base = ObjectiveWeights::preset(2).unwrap();
    let points = weighted_sum_sweep(&base, &grid, |w| {
        let out = run_column_generation(&inst, w, &tiny_cg(9))?;
        out.solution.ok_or(rtsched::SolveError::NoIncumbent)
    })
    .map_err(|e| e.to_string())?;
    let prefs: Vec<u64> = points.iter().map(|p| p.preference).collect();
    let front = non_dominated(&points);
    let pairs: Vec<(u64, u64)> = front.iter().map(|p| (p.waiting, p.preference)).collect();
    let detail = format!("front {pairs:?}, preference along the grid {prefs:?}");
    ensure(front.len() >= 3, || detail.clone())?;
    ensure(front.windows(2).all(|w| w[1].preference < w[0].preference), || detail.clone())?;
    ensure(prefs.windows(2).all(|w| w[1] <= w[0]), || detail.clone())?;
    ensure(prefs.first() > prefs.last(), || detail.clone())?;
    Ok(detail)
}

fn warm_start() -> Outcome {
    let mut fewer_or_equal = 0;
    let mut runs = 0;
    let mut lines = Vec::new();
    let mut seed = 20_000;
    while runs < 20 {
        seed += 1;
        let inst = tiny_instance(seed);
        let w = ObjectiveWeights::preset((runs % 4) as u8 + 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Ok(restart) = restart_search(&inst, &w, &mut rng, 20) else {
            continue;
        };
        let config = CgConfig {
            seed,
            time_limit: Duration::from_secs(10),
            greedy_incumbent: false,
            dive: false,
            neighbourhood: false,
            ..CgConfig::default()
        };
        let out = run_column_generation(&inst, &w, &config).map_err(|e| e.to_string())?;
        let mut pool = out.pool;
        for s in &restart.schedules {
            let i = inst.patient_index(s.patient).unwrap();
            pool.add(&inst, i, s.clone(), &w).map_err(|e| e.to_string())?;
        }
        let cold = Rmp::build(&inst, &pool, &w)
            .solve_ip(&inst, &mut pool, &IpConfig::default())
            .map_err(|e| e.to_string())?;
        let warm_config = IpConfig {
            incumbent: Some(restart.schedules.clone()),
            ..IpConfig::default()
        };
        let warm = Rmp::build(&inst, &pool, &w)
            .solve_ip(&inst, &mut pool, &warm_config)
            .map_err(|e| e.to_string())?;
        let warm_obj = warm.objective.ok_or("warm run lost the incumbent")?;
        ensure(warm_obj <= restart.objective + 1e-9, || format!("seed {seed}: incumbent not accepted"))?;
        ensure(cold.objective == Some(warm_obj), || {
            format!("seed {seed}: cold {:?} and warm {warm_obj} disagree", cold.objective)
        })?;
        runs += 1;
        if warm.nodes <= cold.nodes {
            fewer_or_equal += 1;
        }
        lines.push(format!("{}/{}", warm.nodes, cold.nodes));
    }
    let detail = format!("warm <= cold nodes on {fewer_or_equal}/20 runs (warm/cold: {})", lines.join(" "));
    ensure(fewer_or_equal >= 16, || detail.clone())?;
    Ok(detail)
}

fn run(n: usize, f: fn() -> Outcome) -> (usize, Outcome) {
    let started = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    eprintln!("criterion {n} finished in {:.1}s", started.elapsed().as_secs_f64());
    (n, result)
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let names = [
        "oracle gap",
        "pricing exactness",
        "termination audit",
        "bound sanity",
        "validator completeness",
        "objective formulas",
        "generator statistics",
        "desk-scale end-to-end",
        "Pareto conflict",
        "warm start",
    ];
    let order: [(usize, fn() -> Outcome); 10] = [
        (1, oracle_gap),
        (2, pricing_exactness),
        (5, validator_completeness),
        (6, objective_formulas),
        (7, generator_statistics),
        (9, pareto_conflict),
        (10, warm_start),
        (8, desk_scale),
        (3, termination_audit_check),
        (4, bound_sanity),
    ];
    let mut results: Vec<(usize, Outcome)> = order
        .into_iter()
        .filter(|(n, _)| selected(*n))
        .map(|(n, f)| run(n, f))
        .collect();
    results.sort_by_key(|(n, _)| *n);
    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(detail) => println!("criterion {n} ({}): PASS {detail}", names[n - 1]),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} ({}): FAIL {detail}", names[n - 1]);
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
