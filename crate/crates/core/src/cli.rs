//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 guard refusal
//! or a run with no feasible solution.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{CostBreakdown, Solution};
use crate::genotype::{decode, repair, Genotype};
use crate::instance::{generate_instance, load_instance, reference_network, Instance};
use crate::milp::{build_milp, write_lp, Objective};
use crate::nsga2::{evolve, feasible_front, progress_row, Member, Nsga2Params, ProgressRow};
use crate::ocea::{run_ocea, OceaParams};
use crate::oracle::{oracle_front, OracleError, OracleGrid, DEFAULT_LIMIT};
use crate::problem::Problem;

pub const THREADS_ENV: &str = "LINERMOO_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Guard(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Guard(_) => 3,
        }
    }
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "linermoo", version, about = "Bi-objective liner shipping planner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated instance as JSON.
    Gen(GenArgs),
    /// Run a solver and write front.csv, front_genotypes.json and progress.csv.
    Solve(SolveArgs),
    /// Decode one genotype and print its cost breakdown and residuals.
    Eval(EvalArgs),
    /// Exhaustive grid front for a small instance.
    Oracle(OracleArgs),
    /// Write the linearized model in LP format.
    ExportMilp(ExportArgs),
    /// Turn a front.csv into sorted two-column plot data.
    Plotdata(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, required_unless_present = "reference")]
    pub ports: Option<usize>,
    #[arg(long, required_unless_present = "reference")]
    pub routes: Option<usize>,
    #[arg(long, required_unless_present = "reference")]
    pub vessels: Option<usize>,
    /// The full six-route network instead of a sized instance.
    #[arg(long, conflicts_with_all = ["ports", "routes", "vessels"])]
    pub reference: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 200.0)]
    pub demand_scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InstanceSource {
    #[arg(long, group = "source")]
    pub instance: Option<PathBuf>,
    /// Generated instance as `ports,routes,vessels,seed,demand_scale`.
    #[arg(long, group = "source")]
    pub generate: Option<String>,
}

impl InstanceSource {
    pub fn load(&self) -> Result<Instance, CliError> {
        match (&self.instance, &self.generate) {
            (Some(path), None) => load_instance(path).map_err(config),
            (None, Some(spec)) => {
                let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
                let bad = || CliError::Config(format!("--generate expects ports,routes,vessels,seed,scale, got {spec:?}"));
                if parts.len() != 5 {
                    return Err(bad());
                }
                let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
                let seed = parts[3].parse::<u64>().map_err(|_| bad())?;
                let scale = parts[4].parse::<f64>().map_err(|_| bad())?;
                generate_instance(int(parts[0])?, int(parts[1])?, int(parts[2])?, seed, scale).map_err(config)
            }
            _ => Err(CliError::Config("give exactly one of --instance or --generate".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Nsga2,
    Ocea,
    Oracle,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 1.0)]
    pub speed_grid_step: f64,
    #[arg(long, default_value_t = 4)]
    pub weight_levels: u32,
    #[arg(long, default_value_t = 24.0)]
    pub offset_step: f64,
    #[arg(long, default_value_t = DEFAULT_LIMIT)]
    pub limit: u64,
}

impl GridArgs {
    fn grid(&self) -> OracleGrid {
        OracleGrid {
            speed_step_kn: self.speed_grid_step,
            weight_levels: self.weight_levels,
            offset_step_h: self.offset_step,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: InstanceSource,
    #[arg(long, value_enum, default_value_t = Algo::Ocea)]
    pub algo: Algo,
    /// Required for the stochastic solvers.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 500)]
    pub generations: usize,
    /// Population (NSGA-II) or archive (OCEA) size.
    #[arg(long, default_value_t = 100)]
    pub pop: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: InstanceSource,
    /// A genotype JSON object, or a front_genotypes.json file.
    #[arg(long)]
    pub genotype: PathBuf,
    /// Entry to pick from a front_genotypes.json file.
    #[arg(long, default_value_t = 0)]
    pub id: usize,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub source: InstanceSource,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Cost,
    Time,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub source: InstanceSource,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Cost)]
    pub objective: ObjectiveArg,
    /// Adds the row `F2 <= epsilon` (hours).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub speed_grid_step: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// front.csv to convert.
    pub front: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// One line of front.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub solution_id: usize,
    #[serde(rename = "F1_usd")]
    pub f1_usd: f64,
    #[serde(rename = "F2_hours")]
    pub f2_hours: f64,
    pub feasible: bool,
    /// 1-based vessel class per route, `;`-separated.
    pub classes: String,
    pub n_r: String,
    /// Mean leg speed per route, `;`-separated.
    pub mean_speed_kn: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontGenotype {
    pub solution_id: usize,
    pub genotype: Genotype,
}

fn joined<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn front_row(id: usize, s: &Solution) -> FrontRow {
    FrontRow {
        solution_id: id,
        f1_usd: s.f1,
        f2_hours: s.f2,
        feasible: s.is_feasible(),
        classes: joined(s.class.iter().map(|c| c + 1)),
        n_r: joined(&s.n),
        mean_speed_kn: joined(s.speeds.iter().map(|u| u.iter().sum::<f64>() / u.len() as f64)),
    }
}

/// Distinct feasible nondominated entries sorted by `(F1, F2)`; among equal
/// points the earliest candidate is kept.
pub fn select_front(cands: Vec<(Genotype, Solution)>) -> Vec<(Genotype, Solution)> {
    let members: Vec<Member> = cands
        .into_iter()
        .map(|(genotype, solution)| Member { genes: genotype.to_flat(), genotype, solution })
        .collect();
    let mut idx = feasible_front(&members);
    idx.sort_by(|&a, &b| {
        let (pa, pb) = (members[a].solution.objectives(), members[b].solution.objectives());
        pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1])).then(a.cmp(&b))
    });
    idx.dedup_by(|b, a| members[*a].solution.objectives() == members[*b].solution.objectives());
    let mut members: Vec<Option<Member>> = members.into_iter().map(Some).collect();
    idx.into_iter()
        .map(|i| {
            let m = members[i].take().expect("indices are distinct");
            (m.genotype, m.solution)
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(config)?;
    if rows.is_empty() {
        w.write_record(header).map_err(config)?;
    }
    for r in rows {
        w.serialize(r).map_err(config)?;
    }
    w.flush().map_err(config)
}

const FRONT_HEADER: [&str; 7] = ["solution_id", "F1_usd", "F2_hours", "feasible", "classes", "n_r", "mean_speed_kn"];
const PROGRESS_HEADER: [&str; 5] = ["generation", "front1_size", "best_f1", "best_f2", "hv"];

/// Writes the three run files into `dir` and returns the number of front rows.
pub fn write_run(dir: &Path, front: &[(Genotype, Solution)], progress: &[ProgressRow]) -> Result<usize, CliError> {
    std::fs::create_dir_all(dir).map_err(config)?;
    let rows: Vec<FrontRow> = front.iter().enumerate().map(|(k, (_, s))| front_row(k, s)).collect();
    write_csv(&dir.join("front.csv"), &rows, &FRONT_HEADER)?;
    let genos: Vec<FrontGenotype> = front
        .iter()
        .enumerate()
        .map(|(k, (g, _))| FrontGenotype { solution_id: k, genotype: g.clone() })
        .collect();
    let mut text = serde_json::to_string_pretty(&genos).map_err(config)?;
    text.push('\n');
    std::fs::write(dir.join("front_genotypes.json"), text).map_err(config)?;
    write_csv(&dir.join("progress.csv"), progress, &PROGRESS_HEADER)?;
    Ok(rows.len())
}

fn need_seed(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Config("--seed is required for stochastic solvers".into()))
}

fn run_oracle(prob: &Problem, grid: &GridArgs) -> Result<(Vec<(Genotype, Solution)>, Vec<ProgressRow>), CliError> {
    let front = oracle_front(prob, &grid.grid(), grid.limit).map_err(|e| match e {
        OracleError::TooLarge { .. } => CliError::Guard(e.to_string()),
        OracleError::BadGrid => CliError::Config(e.to_string()),
    })?;
    let members: Vec<Member> = front
        .members
        .iter()
        .map(|(g, s)| Member { genes: g.to_flat(), genotype: g.clone(), solution: s.clone() })
        .collect();
    let progress = vec![progress_row(0, &members, None)];
    Ok((front.members, progress))
}

fn finish(out: &Path, front: Vec<(Genotype, Solution)>, progress: &[ProgressRow]) -> Result<String, CliError> {
    let n = write_run(out, &front, progress)?;
    if n == 0 {
        return Err(CliError::Guard("no feasible solution found".into()));
    }
    Ok(format!("{n} front rows written to {}\n", out.display()))
}

fn cmd_gen(a: &GenArgs) -> Result<String, CliError> {
    let inst = if a.reference {
        reference_network(a.seed, a.demand_scale)
    } else {
        let need = |x: Option<usize>| x.ok_or_else(|| CliError::Config("--ports, --routes and --vessels are required".into()));
        generate_instance(need(a.ports)?, need(a.routes)?, need(a.vessels)?, a.seed, a.demand_scale)
    }
    .map_err(config)?;
    std::fs::write(&a.out, inst.to_json_string()).map_err(config)?;
    Ok(format!(
        "{} ports, {} routes, {} vessel classes -> {}\n",
        inst.num_ports(),
        inst.routes.len(),
        inst.vessels.len(),
        a.out.display()
    ))
}

fn cmd_solve(a: &SolveArgs) -> Result<String, CliError> {
    let prob = Problem::new(a.source.load()?);
    if a.pop < 2 && a.algo != Algo::Oracle {
        return Err(CliError::Config("--pop must be at least 2".into()));
    }
    let (cands, progress) = match a.algo {
        Algo::Nsga2 => {
            let params = Nsga2Params { pop_size: a.pop, generations: a.generations, seed: need_seed(a.seed)?, ..Default::default() };
            let (pop, progress) = evolve(&prob, &params);
            (pop.members.into_iter().map(|m| (m.genotype, m.solution)).collect(), progress)
        }
        Algo::Ocea => {
            let params = OceaParams { archive_size: a.pop, generations: a.generations, seed: need_seed(a.seed)?, ..Default::default() };
            let (archive, progress) = run_ocea(&prob, &params);
            (archive.members.into_iter().map(|m| (m.genotype, m.solution)).collect(), progress)
        }
        Algo::Oracle => run_oracle(&prob, &a.grid)?,
    };
    finish(&a.out, select_front(cands), &progress)
}

fn cmd_oracle(a: &OracleArgs) -> Result<String, CliError> {
    let prob = Problem::new(a.source.load()?);
    let (front, progress) = run_oracle(&prob, &a.grid)?;
    finish(&a.out, front, &progress)
}

fn read_genotype(path: &Path, id: usize) -> Result<Genotype, CliError> {
    let text = std::fs::read_to_string(path).map_err(config)?;
    if let Ok(g) = serde_json::from_str::<Genotype>(&text) {
        return Ok(g);
    }
    let entries: Vec<FrontGenotype> = serde_json::from_str(&text).map_err(config)?;
    entries
        .into_iter()
        .find(|e| e.solution_id == id)
        .map(|e| e.genotype)
        .ok_or_else(|| CliError::Config(format!("no entry with solution_id {id}")))
}

/// `label,value` lines for the cost terms, objectives and residual families.
pub fn breakdown_csv(s: &Solution) -> String {
    let mut out = String::from("label,value\n");
    for (label, v) in CostBreakdown::LABELS.iter().zip(s.cost.terms()) {
        let _ = writeln!(out, "{label},{v}");
    }
    let r = &s.report;
    let _ = writeln!(out, "F1_usd,{}\nF2_hours,{}\nfeasible,{}", s.f1, s.f2, s.is_feasible());
    for (label, v) in [
        ("capacity", r.capacity),
        ("weekly_fleet", r.weekly_fleet),
        ("lag_bound", r.lag_bound),
        ("week_wrap", r.week_wrap),
        ("bounds", r.bounds),
        ("demand", r.demand),
        ("conservation", r.conservation),
        ("no_return", r.no_return),
        ("no_origin_discharge", r.no_origin_discharge),
        ("nonnegativity", r.nonnegativity),
        ("total_violation", r.total_violation),
    ] {
        let _ = writeln!(out, "{label},{v}");
    }
    out
}

fn cmd_eval(a: &EvalArgs) -> Result<String, CliError> {
    let prob = Problem::new(a.source.load()?);
    let g = read_genotype(&a.genotype, a.id)?;
    if !g.fits(&prob) {
        return Err(CliError::Config("genotype shape does not match the instance".into()));
    }
    Ok(breakdown_csv(&decode(&prob, &repair(&prob, &g))))
}

fn cmd_export(a: &ExportArgs) -> Result<String, CliError> {
    let inst = a.source.load()?;
    let mut model = build_milp(&inst, a.speed_grid_step).map_err(config)?;
    if let Some(eps) = a.epsilon {
        if !eps.is_finite() {
            return Err(CliError::Config("--epsilon must be finite".into()));
        }
        model = model.with_time_cap(eps);
    }
    let which = match a.objective {
        ObjectiveArg::Cost => Objective::Cost,
        ObjectiveArg::Time => Objective::Time,
    };
    write_lp(&model, which, &a.out).map_err(config)?;
    let s = model.size();
    Ok(format!(
        "{} variables ({} binary, {} integer), {} rows -> {}\n",
        s.variables,
        s.binaries,
        s.integers,
        s.rows,
        a.out.display()
    ))
}

/// Sorted `F1 F2` lines for the feasible rows of a front.csv.
pub fn plot_lines(front_csv: &Path) -> Result<Vec<[f64; 2]>, CliError> {
    let mut rd = csv::Reader::from_path(front_csv).map_err(config)?;
    let mut pts = Vec::new();
    for row in rd.deserialize::<FrontRow>() {
        let row = row.map_err(|e| CliError::Config(format!("malformed front file: {e}")))?;
        if row.feasible {
            pts.push([row.f1_usd, row.f2_hours]);
        }
    }
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(pts)
}

fn cmd_plotdata(a: &PlotArgs) -> Result<String, CliError> {
    let pts = plot_lines(&a.front)?;
    let mut text = String::new();
    for p in &pts {
        let _ = writeln!(text, "{} {}", p[0], p[1]);
    }
    std::fs::write(&a.out, text).map_err(config)?;
    if pts.is_empty() {
        eprintln!("warning: {} has no feasible rows; wrote an empty file", a.front.display());
    }
    Ok(format!("{} points -> {}\n", pts.len(), a.out.display()))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::ExportMilp(a) => cmd_export(a),
        Command::Plotdata(a) => cmd_plotdata(a),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(msg) => {
            print!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
