use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rtsched::io::{load_solution, save_instance, save_solution};
use rtsched::{
    Instance, MachinePark, ObjectiveWeights, OccupancyGrid, Patient, PatientId, PatientSchedule, Priority, Protocol,
    Solution, TimeGrid, WeekdaySet,
};

fn rtsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtsched"))
        .args(args)
        .env_remove("RTSCHED_FIXTURES")
        .output()
        .expect("binary runs")
}

fn text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three two-fraction patients who all want the single morning slot.
fn tiny() -> Instance {
    let proto = Protocol {
        id: "short".into(),
        priority: Priority::B,
        dur_first: 30,
        dur_other: 30,
        fractions: 2,
        allowed_machines: vec![0, 1],
        preferred_machines: vec![0],
        start_weekdays: WeekdaySet::ALL,
    };
    let patients = (1..=3)
        .map(|id| Patient {
            id: PatientId(id),
            protocol: 0,
            priority: Priority::B,
            d_min: 1,
            d_target: 3,
            window_pref: Some(0),
            is_placeholder: false,
        })
        .collect();
    let park = MachinePark::new(vec!["M1".into(), "M2".into()], vec![vec![0, 1]], vec![]).unwrap();
    Instance::new(park, TimeGrid::new(6, vec![30, 60]), vec![proto], patients, OccupancyGrid::new(2, 2, 6)).unwrap()
}

fn tiny_file(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.json");
    save_instance(&path, &tiny()).unwrap();
    path
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = rtsched(&[
            "generate", "--days", "12", "--from-day", "5", "--count", "3", "--lookahead", "3", "--seed", "4", "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a");
    let b = run("b");
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4, "config plus three instances: {names:?}");
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rtsched(&["generate", "--windows", "8", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn cg_matches_oracle_and_writes_log() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_file(dir.path());
    let mut objectives = Vec::new();
    for method in ["cg", "oracle", "greedy", "restart"] {
        let out = dir.path().join(format!("{method}.json"));
        let o = rtsched(&["solve", s(&inst), "--method", method, "--objective", "#2", "--out", s(&out)]);
        assert!(o.status.success(), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        objectives.push(load_solution(&out).unwrap().objective);
        let log = fs::read_to_string(format!("{}.log.jsonl", out.display())).unwrap();
        let last: serde_json::Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();
        assert_eq!(last["event"], "finished");
        if method == "cg" {
            let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
            for key in ["iteration", "lp_value", "columns_added", "incumbent"] {
                assert!(first.get(key).is_some(), "missing {key}");
            }
        }
    }
    let (cg, oracle) = (objectives[0], objectives[1]);
    assert!((cg - oracle) / oracle <= 0.01, "cg {cg} oracle {oracle}");
    assert!(objectives[2] >= oracle && objectives[3] >= oracle);
}

#[test]
fn solution_goes_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_file(dir.path());
    let o = rtsched(&["solve", s(&inst), "--method", "greedy"]);
    assert!(o.status.success());
    assert!(text(&o).contains("\"rtsched-solution\""));
}

#[test]
fn fixture_root_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    tiny_file(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_rtsched"))
        .args(["solve", "tiny.json", "--method", "greedy"])
        .env("RTSCHED_FIXTURES", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_objective_and_missing_file_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_file(dir.path());
    assert_eq!(rtsched(&["solve", s(&inst), "--objective", "9"]).status.code(), Some(2));
    assert_eq!(rtsched(&["solve", s(&inst), "--alpha", "1,2"]).status.code(), Some(2));
    assert_eq!(rtsched(&["solve", "does-not-exist.json"]).status.code(), Some(1));
    assert_eq!(rtsched(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn infeasible_instance_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut occ = OccupancyGrid::new(2, 2, 6);
    for m in 0..2 {
        for d in 1..=6 {
            occ.add(m, d, 0, 30);
            occ.add(m, d, 1, 60);
        }
    }
    let base = tiny();
    let full = Instance::new(
        base.machines().clone(),
        base.time().clone(),
        base.protocols().to_vec(),
        base.patients().to_vec(),
        occ,
    )
    .unwrap();
    let path = dir.path().join("full.json");
    save_instance(&path, &full).unwrap();
    for method in ["cg", "greedy", "oracle", "restart"] {
        let o = rtsched(&["solve", s(&path), "--method", method]);
        assert_eq!(o.status.code(), Some(3), "{method}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn validate_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_file(dir.path());
    let good = dir.path().join("good.json");
    assert!(rtsched(&["solve", s(&inst), "--method", "greedy", "--out", s(&good)]).status.success());
    let o = rtsched(&["validate", s(&inst), s(&good)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o).starts_with("valid"));

    let w = ObjectiveWeights::preset(4).unwrap();
    let crowded: Vec<PatientSchedule> = (1..=3)
        .map(|id| PatientSchedule::consecutive(PatientId(id), 1, &[(0, 0), (0, 0)]))
        .collect();
    let bad = dir.path().join("bad.json");
    save_solution(&bad, &Solution::new(&tiny(), crowded, &w)).unwrap();
    let o = rtsched(&["validate", s(&inst), s(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o).contains("capacity"));
}

#[test]
fn report_without_solutions_is_header_only() {
    let o = rtsched(&["report"]);
    assert!(o.status.success());
    let out = text(&o);
    let first = out.lines().next().unwrap();
    assert!(first.starts_with("source,patient,priority"));
    assert_eq!(out.lines().nth(1), Some(""));
}

#[test]
fn report_groups_cover_all_patients() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_file(dir.path());
    let sol = dir.path().join("sol.json");
    assert!(rtsched(&["solve", s(&inst), "--method", "greedy", "--out", s(&sol)]).status.success());
    let out_dir = dir.path().join("report");
    let o = rtsched(&["report", "--instance", s(&inst), s(&sol), "--out-dir", s(&out_dir)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    let mut rdr = csv::Reader::from_path(out_dir.join("summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let count = |g: &str| -> usize {
        rows.iter().find(|r| &r[0] == g).unwrap()[1].parse().unwrap()
    };
    assert_eq!(count("A") + count("B") + count("C"), count("all"));
    assert_eq!(count("all"), 3);
}

#[test]
fn pareto_single_and_duplicate_weights() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_file(dir.path());
    let o = rtsched(&["pareto", s(&inst), "--grid", "1:1", "--all"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(text(&o).lines().count(), 2);
    let o = rtsched(&["pareto", s(&inst), "--grid", "1:1,1:1,1:1", "--all"]);
    assert_eq!(text(&o).lines().count(), 2);
    let o = rtsched(&["pareto", s(&inst), "--grid", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solves_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("fixtures");
    fs::create_dir(&fixtures).unwrap();
    save_instance(fixtures.join("one.json"), &tiny()).unwrap();
    save_instance(fixtures.join("two.json.gz"), &tiny()).unwrap();
    let out = dir.path().join("out");
    let o = rtsched(&["solve", s(&fixtures), "--method", "greedy", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["one", "two"] {
        assert!(out.join(format!("{name}.solution.json")).exists());
        assert!(out.join(format!("{name}.log.jsonl")).exists());
    }
}
