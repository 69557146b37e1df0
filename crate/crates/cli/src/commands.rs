use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::Args;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use rtsched::colgen::{run_column_generation, CgConfig};
use rtsched::generator::{greedy_day_solver, simulate, ClinicConfig};
use rtsched::heuristics::{greedy_solve, restart_search};
use rtsched::io::{load_config, load_instance, load_solution, save_config, save_instance, save_solution, solution_to_string};
use rtsched::oracle::{brute_force_optimal, ORACLE_NODE_CAP};
use rtsched::report::{
    non_dominated, patient_metrics, summarise_by_priority, weighted_sum_sweep, write_metrics_csv, write_pareto_csv,
    write_summary_csv,
};
use rtsched::{validate_solution, FormatError, Instance, ObjectiveWeights, Solution, SolveError};

use crate::{exit, Method};

pub struct Context {
    pub fixtures: Option<PathBuf>,
}

impl Context {
    /// `path` as given if it exists, else under the fixture root.
    fn resolve(&self, path: &Path) -> PathBuf {
        if path.exists() || path.is_absolute() {
            return path.to_path_buf();
        }
        match &self.fixtures {
            Some(root) if root.join(path).exists() => root.join(path),
            _ => path.to_path_buf(),
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        CliError::new(exit::USAGE, message)
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        let code = match e {
            FormatError::Domain { .. } => exit::USAGE,
            _ => exit::FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::Usage(_) | SolveError::Domain(_) => exit::USAGE,
            SolveError::Unplaceable(_) | SolveError::LpInfeasible { .. } => exit::INFEASIBLE,
            SolveError::TimeLimit => exit::TIMEOUT,
            _ => exit::FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::new(exit::FAILURE, e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::new(exit::FAILURE, e.to_string())
    }
}

type CmdResult = Result<u8, CliError>;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::new(exit::FAILURE, format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

#[derive(Debug, Args)]
pub struct ObjectiveArgs {
    /// Objective preset 1..4.
    #[arg(long, default_value = "4", conflicts_with = "alpha")]
    objective: String,
    /// Six explicit weights `a1,a2,a3,a4,a5,a6`.
    #[arg(long)]
    alpha: Option<String>,
}

impl ObjectiveArgs {
    fn weights(&self) -> Result<ObjectiveWeights, CliError> {
        let text = self.alpha.as_deref().unwrap_or(&self.objective);
        text.parse().map_err(|e: SolveError| CliError::usage(e.to_string()))
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Clinic configuration document; the reference clinic when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mean arrivals per weekday of the reference clinic.
    #[arg(long, default_value_t = 16.0)]
    arrival_rate: f64,
    /// Time windows per day of the reference clinic; must divide 420 minutes.
    #[arg(long, default_value_t = 2)]
    windows: usize,
    /// Write the four reference setups (rates 16 and 18, 2 and 4 windows),
    /// one subdirectory each.
    #[arg(long)]
    all_setups: bool,
    /// Override the placeholder lookahead in weekdays.
    #[arg(long)]
    lookahead: Option<u32>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Days to simulate.
    #[arg(long, default_value_t = 300)]
    days: u32,
    /// First day instances may be drawn from.
    #[arg(long, default_value_t = 50)]
    from_day: u32,
    /// Instances to keep per setup.
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Compress the instance files.
    #[arg(long)]
    gzip: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn generate(_ctx: &Context, args: GenerateArgs) -> CmdResult {
    if args.from_day < 1 || args.from_day > args.days {
        return Err(CliError::usage("--from-day must lie within 1..=--days"));
    }
    let span = (args.days - args.from_day + 1) as usize;
    if args.count > span {
        return Err(CliError::usage(format!("cannot draw {} days from {span}", args.count)));
    }
    let mut setups: Vec<(PathBuf, ClinicConfig)> = Vec::new();
    if args.all_setups {
        for rate in [16.0, 18.0] {
            for w in [2, 4] {
                let cfg = ClinicConfig::reference(rate, w).map_err(|e| CliError::usage(e.to_string()))?;
                setups.push((args.out.join(format!("rate{rate}-w{w}")), cfg));
            }
        }
    } else {
        let cfg = match &args.config {
            Some(p) => load_config(p)?,
            None => ClinicConfig::reference(args.arrival_rate, args.windows).map_err(|e| CliError::usage(e.to_string()))?,
        };
        setups.push((args.out.clone(), cfg));
    }
    for (dir, mut cfg) in setups {
        if let Some(l) = args.lookahead {
            cfg.placeholder_lookahead = l;
        }
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        fs::create_dir_all(&dir)?;
        save_config(dir.join("config.json"), &cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let mut keep: Vec<u32> = sample(&mut rng, span, args.count)
            .into_iter()
            .map(|k| args.from_day + k as u32)
            .collect();
        keep.sort_unstable();
        let mut solver = greedy_day_solver;
        let snaps = simulate(cfg, args.seed, args.days, &keep, &mut solver)?;
        let ext = if args.gzip { "json.gz" } else { "json" };
        for s in &snaps {
            let path = dir.join(format!("day{:03}.{ext}", s.day));
            save_instance(&path, &s.instance)?;
            println!("{} ({} patients)", path.display(), s.instance.patients().len());
        }
    }
    Ok(0)
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance file, or a directory whose `.json`/`.json.gz` instances are
    /// solved concurrently.
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "cg")]
    method: Method,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock limit of the column generation run.
    #[arg(long, default_value_t = 600.0)]
    time_limit_s: f64,
    /// Passes of the restart search.
    #[arg(long, default_value_t = 200)]
    passes: usize,
    /// Solution file (a directory when solving a directory); stdout when
    /// absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON-lines run log; `<out>.log.jsonl` by default when `--out` is a
    /// file.
    #[arg(long)]
    log: Option<PathBuf>,
}

struct SolveRun {
    solution: Option<Solution>,
    log: Vec<serde_json::Value>,
    /// The limit stopped the search early.
    partial: bool,
    /// Exit code when no solution was found.
    failure: Option<CliError>,
}

fn run_method(inst: &Instance, args: &SolveArgs, weights: &ObjectiveWeights) -> SolveRun {
    let started = Instant::now();
    let mut log = Vec::new();
    let result: Result<(Solution, bool), CliError> = match args.method {
        Method::Cg => {
            let config = CgConfig {
                seed: args.seed,
                time_limit: Duration::from_secs_f64(args.time_limit_s.max(0.0)),
                ..CgConfig::default()
            };
            match run_column_generation(inst, weights, &config) {
                Ok(out) => {
                    log.extend(out.log.iter().map(|l| serde_json::to_value(l).unwrap_or_default()));
                    match out.solution {
                        Some(s) => Ok((s, out.timed_out)),
                        None if out.timed_out => Err(CliError::new(exit::TIMEOUT, "time limit reached without a solution")),
                        None => Err(CliError::new(exit::INFEASIBLE, "no feasible solution found")),
                    }
                }
                Err(e) => Err(e.into()),
            }
        }
        Method::Greedy => greedy_solve(inst, weights).map(|s| (s, false)).map_err(CliError::from),
        Method::Restart => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            match restart_search(inst, weights, &mut rng, args.passes) {
                Ok(s) => Ok((s, false)),
                Err(SolveError::NoIncumbent) => Err(CliError::new(exit::INFEASIBLE, "no restart pass completed")),
                Err(e) => Err(e.into()),
            }
        }
        Method::Oracle => match brute_force_optimal(inst, weights, ORACLE_NODE_CAP) {
            Ok(s) => Ok((s, false)),
            Err(SolveError::NoIncumbent) => Err(CliError::new(exit::INFEASIBLE, "instance is infeasible")),
            Err(e) => Err(e.into()),
        },
    };
    let elapsed = started.elapsed().as_secs_f64();
    match result {
        Ok((solution, partial)) => {
            log.push(json!({
                "event": "finished",
                "method": format!("{:?}", args.method).to_lowercase(),
                "objective": solution.objective,
                "bound": solution.bound,
                "relative_gap": solution.relative_gap,
                "partial": partial,
                "seconds": elapsed,
            }));
            SolveRun {
                solution: Some(solution),
                log,
                partial,
                failure: None,
            }
        }
        Err(e) => {
            log.push(json!({
                "event": "failed",
                "method": format!("{:?}", args.method).to_lowercase(),
                "message": e.message,
                "seconds": elapsed,
            }));
            SolveRun {
                solution: None,
                log,
                partial: false,
                failure: Some(e),
            }
        }
    }
}

fn write_log(path: &Path, lines: &[serde_json::Value]) -> Result<(), CliError> {
    let mut w = create(path)?;
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

fn instance_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            (name.ends_with(".json") || name.ends_with(".json.gz")) && !name.starts_with("config")
        })
        .collect();
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("instance");
    name.trim_end_matches(".gz").trim_end_matches(".json").to_string()
}

pub fn solve(ctx: &Context, args: SolveArgs) -> CmdResult {
    let weights = args.objective.weights()?;
    let path = ctx.resolve(&args.instance);
    if path.is_dir() {
        return solve_dir(&path, &args, &weights);
    }
    let inst = load_instance(&path)?;
    let run = run_method(&inst, &args, &weights);
    let log_path = args
        .log
        .clone()
        .or_else(|| args.out.as_ref().map(|o| PathBuf::from(format!("{}.log.jsonl", o.display()))));
    if let Some(lp) = &log_path {
        write_log(lp, &run.log)?;
    }
    if let Some(e) = run.failure {
        return Err(e);
    }
    let sol = run.solution.expect("solution present without failure");
    match &args.out {
        Some(o) => save_solution(o, &sol)?,
        None => print!("{}", solution_to_string(&sol)),
    }
    if run.partial {
        eprintln!("warning: time limit reached; the solution is not proven optimal");
    }
    eprintln!(
        "objective {} bound {} gap {}",
        sol.objective,
        sol.bound.map_or("-".into(), |b| format!("{b:.4}")),
        sol.relative_gap.map_or("-".into(), |g| format!("{:.2}%", g * 100.0))
    );
    Ok(0)
}

fn solve_dir(dir: &Path, args: &SolveArgs, weights: &ObjectiveWeights) -> CmdResult {
    let out = args
        .out
        .as_ref()
        .ok_or_else(|| CliError::usage("--out DIR is required when solving a directory"))?;
    fs::create_dir_all(out)?;
    let files = instance_files(dir)?;
    let codes: Vec<Result<u8, CliError>> = files
        .par_iter()
        .map(|f| {
            let inst = load_instance(f)?;
            let run = run_method(&inst, args, weights);
            let name = stem(f);
            write_log(&out.join(format!("{name}.log.jsonl")), &run.log)?;
            match (run.solution, run.failure) {
                (Some(sol), _) => {
                    save_solution(out.join(format!("{name}.solution.json")), &sol)?;
                    println!("{name}: objective {}{}", sol.objective, if run.partial { " (partial)" } else { "" });
                    Ok(0)
                }
                (None, Some(e)) => {
                    eprintln!("{name}: {}", e.message);
                    Ok(e.code)
                }
                (None, None) => Ok(exit::FAILURE),
            }
        })
        .collect();
    let mut worst = 0;
    for c in codes {
        let c = c?;
        if c != 0 && (worst == 0 || c < worst) {
            worst = c;
        }
    }
    Ok(worst)
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    instance: PathBuf,
    solution: PathBuf,
    #[command(flatten)]
    objective: ObjectiveArgs,
}

pub fn validate(ctx: &Context, args: ValidateArgs) -> CmdResult {
    let inst = load_instance(ctx.resolve(&args.instance))?;
    let sol = load_solution(&args.solution)?;
    let report = validate_solution(&inst, &sol);
    if report.is_valid() {
        let weights = args.objective.weights()?;
        let fresh = Solution::new(&inst, sol.schedules.clone(), &weights);
        println!("valid: objective {} ({} schedules)", fresh.objective, fresh.schedules.len());
        Ok(0)
    } else {
        for v in &report.violations {
            println!("{} {v}", v.kind.code());
        }
        println!("invalid: {} violations", report.violations.len());
        Ok(exit::INFEASIBLE)
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Instance the solutions belong to; give it once for all solutions or
    /// once per solution.
    #[arg(long)]
    instance: Vec<PathBuf>,
    /// Solution files.
    solutions: Vec<PathBuf>,
    /// Write `metrics.csv` and `summary.csv` here instead of stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn report(ctx: &Context, args: ReportArgs) -> CmdResult {
    if !args.solutions.is_empty() && args.instance.len() != 1 && args.instance.len() != args.solutions.len() {
        return Err(CliError::usage("give one --instance, or one per solution"));
    }
    let mut rows = Vec::new();
    let mut cached: Option<(PathBuf, Instance)> = None;
    for (k, sp) in args.solutions.iter().enumerate() {
        let ip = ctx.resolve(&args.instance[if args.instance.len() == 1 { 0 } else { k }]);
        if cached.as_ref().is_none_or(|(p, _)| *p != ip) {
            cached = Some((ip.clone(), load_instance(&ip)?));
        }
        let inst = &cached.as_ref().expect("instance loaded").1;
        let sol = load_solution(sp)?;
        rows.extend(patient_metrics(&stem(sp), inst, &sol));
    }
    let summary = summarise_by_priority(&rows);
    match &args.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write_metrics_csv(&rows, create(&dir.join("metrics.csv"))?)?;
            write_summary_csv(&summary, create(&dir.join("summary.csv"))?)?;
        }
        None => {
            let mut out = io::stdout().lock();
            write_metrics_csv(&rows, &mut out)?;
            writeln!(out)?;
            write_summary_csv(&summary, &mut out)?;
        }
    }
    Ok(0)
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    instance: PathBuf,
    /// `(alpha_1, alpha_4)` pairs as `a1:a4`, comma-separated.
    #[arg(long, default_value = "10:1,5:1,1.5:1,0.5:1,0.2:1,0.1:1")]
    grid: String,
    /// Weights the other four components keep.
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long, value_enum, default_value = "cg")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60.0)]
    time_limit_s: f64,
    #[arg(long, default_value_t = 200)]
    passes: usize,
    /// Write every sweep point, not only the non-dominated ones.
    #[arg(long)]
    all: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("grid entry {pair:?} is not a1:a4")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::usage(format!("bad weight {s:?} in grid")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

pub fn pareto(ctx: &Context, args: ParetoArgs) -> CmdResult {
    let base = args.objective.weights()?;
    let grid = parse_grid(&args.grid)?;
    if grid.is_empty() {
        return Err(CliError::usage("empty weight grid"));
    }
    let inst = load_instance(ctx.resolve(&args.instance))?;
    let solve_args = SolveArgs {
        instance: args.instance.clone(),
        method: args.method,
        objective: ObjectiveArgs {
            objective: "4".into(),
            alpha: None,
        },
        seed: args.seed,
        time_limit_s: args.time_limit_s,
        passes: args.passes,
        out: None,
        log: None,
    };
    let mut failure: Option<CliError> = None;
    let points = weighted_sum_sweep(&base, &grid, |w| {
        let run = run_method(&inst, &solve_args, w);
        match run.solution {
            Some(s) => Ok(s),
            None => {
                failure = run.failure;
                Err(SolveError::NoIncumbent)
            }
        }
    });
    let points = match (points, failure) {
        (Ok(p), _) => p,
        (Err(_), Some(e)) => return Err(e),
        (Err(e), None) => return Err(e.into()),
    };
    let shown = if args.all { points } else { non_dominated(&points) };
    write_pareto_csv(&shown, output(args.out.as_deref())?)?;
    Ok(0)
}
