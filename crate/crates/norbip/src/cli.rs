//! Command-line front end.
//!
//! Exit codes: 0 on an optimal, unbounded or completed report; 2 on any
//! infeasible verdict (including a failed robustness check); 3 when the
//! node budget ran out; 1 on usage, parse or IO errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use norbip_core::driver::{
    check_robustness, norvep, norvep_timed, radius, relative_delta, working_instance,
    NorvepOptions, Radius, RobustnessReport, Status, Verdict,
};
use norbip_core::generate::{generate_screened, Dims};
use norbip_core::instance::{RobustMode, RobustnessConfig};
use norbip_core::rational::{format_rational, parse_rational, to_decimal_string, Rational};
use norbip_core::vertex_enum::{build_dual_polyhedron, enumerate_vertices};

use crate::format::{load, load_point, save, ResultJson, DECIMAL_DIGITS};
use crate::tables::{write_manifest, write_sweep, write_vertices, SweepRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

fn rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn dims_arg(s: &str) -> Result<Dims, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [n_u, n_l, m_u, m_l] if parts.iter().all(|&p| p > 0) => Ok(Dims { n_u, n_l, m_u, m_l }),
        _ => Err("expected four positive integers n_u,n_l,m_u,m_l".into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Protect every upper-level constraint.
    Constraint,
    /// Protect the upper-level objective only.
    Objective,
    /// Protect both the constraints and the objective.
    Conservative,
}

impl From<ModeArg> for RobustMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Constraint => RobustMode::ConstraintRobust,
            ModeArg::Objective => RobustMode::ObjectiveRobust,
            ModeArg::Conservative => RobustMode::Conservative,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "norbip",
    version,
    about = "Exact solver for near-optimal robust linear bilevel problems",
    after_help = "Exit codes: 0 optimal or completed, 1 usage or parse error, 2 infeasible, 3 node budget exhausted.\n\
                  Rationals are written as p/q or exact decimals (0.25, 1e-3)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an instance for a given tolerance.
    Solve(SolveArgs),
    /// Check a point against every upper-level constraint under near-optimal
    /// follower deviations.
    Check(CheckArgs),
    /// Print the largest tolerance for which the instance stays feasible.
    Radius(RadiusArgs),
    /// List the vertices of every dual adversarial polyhedron as CSV.
    #[command(
        after_help = "CSV columns: k (0-based constraint), vertex_index, alpha_1..alpha_m_l, beta; \
                            each value is followed by a *_decimal column (12 significant digits, advisory)."
    )]
    Vertices(VerticesArgs),
    /// Generate screened random instances.
    #[command(
        after_help = "Writes <name>.json per kept instance and manifest.csv with columns \
                            seed,n_u,n_l,m_u,m_l,kept,rejection_stage,file,rng,denominator."
    )]
    Generate(GenerateArgs),
    /// Batch experiments.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Debug, Args)]
struct SolverFlags {
    /// Drop the explicit upper-level rows from the extended model.
    #[arg(long)]
    no_upper_rows: bool,
    /// Add the strong-duality valid inequality.
    #[arg(long)]
    sd_cut: bool,
    /// Skip the optimistic stage.
    #[arg(long)]
    skip_optimistic: bool,
    /// Node budget of each branch-and-bound run.
    #[arg(long, default_value_t = 1_000_000)]
    node_budget: u64,
}

impl SolverFlags {
    fn options(&self) -> NorvepOptions {
        NorvepOptions {
            include_upper_rows: !self.no_upper_rows,
            sd_cut: self.sd_cut,
            skip_optimistic: self.skip_optimistic,
            node_budget: self.node_budget,
            ..NorvepOptions::default()
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    instance: PathBuf,
    /// Absolute tolerance; negative values solve the optimistic problem.
    #[arg(long, value_parser = rational_arg, allow_hyphen_values = true,
          required_unless_present = "delta_rel", conflicts_with = "delta_rel")]
    delta: Option<Rational>,
    /// Relative tolerance: max(1/20, r·|lower objective|) at the optimistic
    /// solution.
    #[arg(long, value_parser = rational_arg)]
    delta_rel: Option<Rational>,
    #[arg(long, value_enum, default_value = "constraint")]
    mode: ModeArg,
    #[command(flatten)]
    flags: SolverFlags,
    /// Result JSON path; printed to standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    instance: PathBuf,
    /// Result JSON of `solve`, or any JSON object with `x` and `v`.
    solution: PathBuf,
    #[arg(long, value_parser = rational_arg, allow_hyphen_values = true)]
    delta: Rational,
    /// Defaults to the `mode` recorded in the solution file, else constraint.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Debug, Args)]
struct RadiusArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    node_budget: u64,
}

#[derive(Debug, Args)]
struct VerticesArgs {
    instance: PathBuf,
    /// CSV path; printed to standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// n_u,n_l,m_u,m_l
    #[arg(long, value_parser = dims_arg)]
    dims: Dims,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    outdir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Experiment {
    /// Count infeasible instances for each tolerance.
    #[command(
        after_help = "CSV: header row,<delta>...; a delta_decimal row; count rows infeasible, optimal, \
                            unbounded, budget; then one seed:<s> row per instance with its status per delta."
    )]
    FeasibilitySweep(SweepArgs),
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated tolerances, e.g. 0.01,0.1,1,3,12
    #[arg(long, value_parser = rational_arg, value_delimiter = ',', required = true,
          allow_hyphen_values = true)]
    deltas: Vec<Rational>,
    /// n_u,n_l,m_u,m_l
    #[arg(long, value_parser = dims_arg)]
    dims: Dims,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    node_budget: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// CSV path; printed to standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn status_code(s: Status) -> i32 {
    match s {
        Status::Optimal | Status::Unbounded => EXIT_OK,
        Status::Budget => EXIT_BUDGET,
        _ => EXIT_INFEASIBLE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a, out, err),
        Command::Check(a) => check(a, out),
        Command::Radius(a) => radius_cmd(a, out),
        Command::Vertices(a) => vertices(a, out, err),
        Command::Generate(a) => generate(a, out),
        Command::Experiment(Experiment::FeasibilitySweep(a)) => sweep(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn emit(path: Option<&PathBuf>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => out.write_all(text.as_bytes()).context("writing output"),
    }
}

fn solve(a: SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let inst = load(&a.instance)?;
    let opts = a.flags.options();
    let delta = match (&a.delta, &a.delta_rel) {
        (Some(d), _) => d.clone(),
        (None, Some(r)) => match relative_delta(&inst, r, &opts) {
            Ok(d) => d,
            Err(status) => {
                writeln!(
                    err,
                    "relative tolerance needs an optimistic optimum; got {status}"
                )?;
                return Ok(status_code(status));
            }
        },
        (None, None) => unreachable!("clap requires one tolerance"),
    };
    let cfg = RobustnessConfig::new(delta, a.mode.into());
    if cfg.effective_mode() == RobustMode::Optimistic {
        writeln!(
            err,
            "note: negative tolerance, solving the optimistic problem"
        )?;
    }
    let start = Instant::now();
    let clock = || start.elapsed().as_micros() as u64;
    let outcome = norvep_timed(&inst, &cfg, &opts, &clock);
    let json = ResultJson::new(&inst, cfg.effective_mode(), &outcome);
    let mut text = serde_json::to_string_pretty(&json)?;
    text.push('\n');
    emit(a.out.as_ref(), &text, out)?;
    if a.out.is_some() {
        writeln!(out, "status: {}", outcome.status)?;
        if let Some(s) = &outcome.solution {
            writeln!(
                out,
                "objective: {} ({})",
                format_rational(&s.upper_objective),
                to_decimal_string(&s.upper_objective, DECIMAL_DIGITS)
            )?;
        }
    }
    Ok(status_code(outcome.status))
}

fn list(v: &[Rational]) -> String {
    let items: Vec<String> = v.iter().map(format_rational).collect();
    format!("[{}]", items.join(", "))
}

fn check(a: CheckArgs, out: &mut dyn Write) -> Result<i32> {
    let inst = load(&a.instance)?;
    let point = load_point(&a.solution)?;
    let mode = a
        .mode
        .map(RobustMode::from)
        .or(point.mode)
        .unwrap_or(RobustMode::ConstraintRobust);
    let cfg = RobustnessConfig::new(a.delta.clone(), mode);
    let w = working_instance(&inst, cfg.effective_mode());
    let report = check_robustness(&w, &a.delta, &point.x, &point.v);
    match &report {
        RobustnessReport::NotBilevelFeasible(why) => {
            writeln!(out, "not bilevel feasible: {why}")?;
            return Ok(EXIT_INFEASIBLE);
        }
        RobustnessReport::Checked(verdicts) => {
            for (k, v) in verdicts.iter().enumerate() {
                match v {
                    Verdict::Robust { margin } => {
                        writeln!(out, "k={k} robust margin={}", format_rational(margin))?
                    }
                    Verdict::Violated { worst, violation } => writeln!(
                        out,
                        "k={k} violated by {} at worst z={}",
                        format_rational(violation),
                        list(worst)
                    )?,
                    Verdict::ViolatedUnbounded => {
                        writeln!(out, "k={k} violated (unbounded worst case)")?
                    }
                    Verdict::Vacuous => writeln!(out, "k={k} robust (empty near-optimal set)")?,
                }
            }
        }
    }
    if report.all_robust() {
        writeln!(out, "robust")?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "not robust")?;
        Ok(EXIT_INFEASIBLE)
    }
}

fn radius_cmd(a: RadiusArgs, out: &mut dyn Write) -> Result<i32> {
    let inst = load(&a.instance)?;
    let opts = NorvepOptions {
        node_budget: a.node_budget,
        ..NorvepOptions::default()
    };
    let r = radius(&inst, &opts);
    writeln!(out, "{}", r.radius)?;
    Ok(match r.radius {
        Radius::Finite(_) | Radius::Infinite => EXIT_OK,
        Radius::Infeasible => EXIT_INFEASIBLE,
        Radius::Budget { .. } => EXIT_BUDGET,
    })
}

fn vertices(a: VerticesArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let inst = load(&a.instance)?;
    let polys: Vec<_> = (0..inst.m_u)
        .map(|k| enumerate_vertices(&build_dual_polyhedron(&inst, k)))
        .collect();
    for p in polys.iter().filter(|p| p.empty) {
        writeln!(err, "note: dual polyhedron {} is empty", p.k)?;
    }
    let mut buf = Vec::new();
    write_vertices(&mut buf, inst.m_l, &polys)?;
    emit(a.out.as_ref(), &String::from_utf8(buf)?, out)?;
    Ok(EXIT_OK)
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<i32> {
    fs::create_dir_all(&a.outdir).with_context(|| format!("creating {}", a.outdir.display()))?;
    let screened = generate_screened(a.dims, a.seed, a.count);
    for (_, inst) in &screened.instances {
        let p = a.outdir.join(format!("{}.json", inst.name));
        save(inst, &p).with_context(|| format!("writing {}", p.display()))?;
    }
    let names: std::collections::HashMap<u64, String> = screened
        .instances
        .iter()
        .map(|(s, i)| (*s, format!("{}.json", i.name)))
        .collect();
    let manifest = a.outdir.join("manifest.csv");
    let file =
        fs::File::create(&manifest).with_context(|| format!("creating {}", manifest.display()))?;
    write_manifest(file, &screened, |s| names[&s].clone())?;
    writeln!(
        out,
        "kept {} of {} trials",
        screened.instances.len(),
        screened.trials.len()
    )?;
    Ok(EXIT_OK)
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let deltas = a.deltas;
    let screened = generate_screened(a.dims, a.seed, a.count);
    let opts = NorvepOptions {
        node_budget: a.node_budget,
        ..NorvepOptions::default()
    };
    let threads = a
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let jobs = &screened.instances;
    let chunk = jobs.len().div_ceil(threads).max(1);
    let rows: Vec<SweepRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                let deltas = &deltas;
                let opts = &opts;
                scope.spawn(move || {
                    part.iter()
                        .map(|(seed, inst)| SweepRow {
                            seed: *seed,
                            statuses: deltas
                                .iter()
                                .map(|d| {
                                    let cfg = RobustnessConfig::new(
                                        d.clone(),
                                        RobustMode::ConstraintRobust,
                                    );
                                    norvep(inst, &cfg, opts).status
                                })
                                .collect(),
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut buf = Vec::new();
    write_sweep(&mut buf, &deltas, &rows)?;
    emit(a.out.as_ref(), &String::from_utf8(buf)?, out)?;
    Ok(EXIT_OK)
}
