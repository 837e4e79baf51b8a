//! Acceptance suite. Every check prints one `PASS` or `FAIL` line; all
//! comparisons are exact rational equalities or inequalities, so every
//! tolerance below is zero.
//!
//! Run with `cargo test -p norbip --test acceptance -- --nocapture --test-threads 1`.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use norbip_core::driver::{
    check_robustness, norvep, radius, NorvepOptions, Radius, RobustnessReport, Status, Verdict,
};
use norbip_core::generate::{generate_screened, Dims};
use norbip_core::instance::{BilevelInstance, RobustMode, RobustnessConfig, Solution};
use norbip_core::lp::{solve_lp, LpStatus};
use norbip_core::model::{build_hpr, strong_duality_cut, CutStatus, DEFAULT_CUT_SWEEPS};
use norbip_core::oracle::{solve_tiny, solve_tiny_optimistic, vertices_by_subsets};
use norbip_core::rational::{format_rational, int, ratio, Rational};
use norbip_core::samples::{bounded_example, line_example};
use norbip_core::vertex_enum::{build_dual_polyhedron, enumerate_vertices, DualSystem, HalfSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact comparisons only.
const TOLERANCE: Rational = Rational::ZERO;

const C3_PER_DIMS: usize = 100;
const C3_DELTAS: [(i64, i64); 3] = [(0, 1), (1, 10), (1, 1)];
const C4_SYSTEMS: usize = 250;
const C4_MAX_DIM: usize = 5;
const C6_INSTANCES: usize = 120;
const C6_DELTAS: [(i64, i64); 5] = [(1, 100), (1, 10), (1, 1), (3, 1), (12, 1)];
const C8_INSTANCES: usize = 20;
const C8_NODE_BUDGET: u64 = 1_000_000;

const LIMIT_C1: Duration = Duration::from_secs(1);
const LIMIT_C2: Duration = Duration::from_secs(1);
const LIMIT_C3: Duration = Duration::from_secs(300);
const LIMIT_C4: Duration = Duration::from_secs(120);
const LIMIT_C6: Duration = Duration::from_secs(600);

struct Report {
    id: &'static str,
    failures: Vec<String>,
}

impl Report {
    fn new(id: &'static str) -> Self {
        Report {
            id,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: impl std::fmt::Display) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict} {}: {name} ({detail})", self.id);
        if !ok {
            self.failures.push(name.to_string());
        }
    }

    fn within(&mut self, limit: Duration, start: Instant) {
        let took = start.elapsed();
        self.check("runtime", took <= limit, format!("{took:.2?} <= {limit:?}"));
    }

    fn finish(self) {
        let ok = self.failures.is_empty();
        println!("{} {}", if ok { "PASS" } else { "FAIL" }, self.id);
        assert!(ok, "{} failed: {:?}", self.id, self.failures);
    }
}

fn exact_eq(a: &Rational, b: &Rational) -> bool {
    a - b <= TOLERANCE && b - a <= TOLERANCE
}

fn show(v: &[Rational]) -> String {
    let items: Vec<String> = v.iter().map(format_rational).collect();
    format!("({})", items.join(","))
}

fn show_point(p: &Option<(Vec<Rational>, Vec<Rational>)>) -> String {
    match p {
        Some((x, v)) => format!("x={} v={}", show(x), show(v)),
        None => "none".into(),
    }
}

fn rvec(v: &[(i64, i64)]) -> Vec<Rational> {
    v.iter().map(|&(n, d)| ratio(n, d)).collect()
}

fn cfg(delta: &Rational) -> RobustnessConfig {
    RobustnessConfig::new(delta.clone(), RobustMode::ConstraintRobust)
}

#[test]
fn c1_bounded_example() {
    let mut r = Report::new("C1");
    let start = Instant::now();
    let inst = bounded_example();

    let hpr = solve_lp(&build_hpr(&inst));
    r.check(
        "high-point optimum (5,4)",
        hpr.status == LpStatus::Optimal && hpr.primal == [int(5), int(4)],
        format!("{:?} {}", hpr.status, show(&hpr.primal)),
    );

    let out = norvep(&inst, &cfg(&int(0)), &NorvepOptions::default());
    let opt = out
        .optimistic_solution
        .as_ref()
        .map(|s| (s.x.clone(), s.v.clone()));
    r.check(
        "optimistic optimum (1,3)",
        opt == Some((vec![int(1)], vec![int(3)])),
        show_point(&opt),
    );

    let polys: Vec<_> = (0..inst.m_u)
        .map(|k| enumerate_vertices(&build_dual_polyhedron(&inst, k)))
        .collect();
    let vertices: Vec<Vec<Vec<Rational>>> = polys
        .iter()
        .map(|p| p.vertices.iter().map(|v| v.to_point()).collect())
        .collect();
    r.check(
        "dual vertices {(0,0,4)} and {(0,0,2)}",
        vertices
            == [
                vec![rvec(&[(0, 1), (0, 1), (4, 1)])],
                vec![rvec(&[(0, 1), (0, 1), (2, 1)])],
            ],
        vertices
            .iter()
            .map(|vs| vs.iter().map(|v| show(v)).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join(" | "),
    );
    let rays: usize = polys.iter().map(|p| p.ray_count).sum();
    r.check(
        "total extreme ray count 4",
        rays == 4,
        format!("counted {rays}"),
    );

    let rad = radius(&inst, &NorvepOptions::default()).radius;
    r.check(
        "radius 5",
        rad == Radius::Finite(int(5)),
        format!("computed {rad}"),
    );

    let at5 = norvep(&inst, &cfg(&int(5)), &NorvepOptions::default());
    let sol = at5.solution.as_ref().map(|s| (s.x.clone(), s.v.clone()));
    r.check(
        "delta 5 solution (5,0)",
        sol == Some((vec![int(5)], vec![int(0)])),
        format!("status {} point {}", at5.status, show_point(&sol)),
    );
    r.within(LIMIT_C1, start);
    r.finish();
}

#[test]
fn c2_line_example() {
    let mut r = Report::new("C2");
    let start = Instant::now();
    let inst = line_example();
    let out = norvep(&inst, &cfg(&ratio(1, 10)), &NorvepOptions::default());
    let sol = out.solution.as_ref().map(|s| (s.x.clone(), s.v.clone()));
    r.check(
        "delta 1/10 gives x=1/2, v=21/20",
        sol == Some((vec![ratio(1, 2)], vec![ratio(21, 20)])),
        format!("status {} point {}", out.status, show_point(&sol)),
    );

    let report = check_robustness(&inst, &ratio(1, 10), &[int(0)], &[int(1)]);
    let worst = match &report {
        RobustnessReport::Checked(v) => v.iter().find_map(|v| match v {
            Verdict::Violated { worst, .. } => Some(worst.clone()),
            _ => None,
        }),
        RobustnessReport::NotBilevelFeasible(_) => None,
    };
    r.check(
        "(0,1) violated with worst z=9/10",
        !report.all_robust()
            && worst
                .as_deref()
                .is_some_and(|w| exact_eq(&w[0], &ratio(9, 10))),
        format!("worst {}", worst.as_deref().map_or("none".into(), show)),
    );
    r.within(LIMIT_C2, start);
    r.finish();
}

/// One row of the oracle comparison, shared by C3, C5 and C7.
struct Solved {
    inst: BilevelInstance,
    hpr: Rational,
    optimistic: Option<Rational>,
    runs: Vec<Run>,
}

/// Driver and oracle outcomes at one tolerance.
struct Run {
    delta: Rational,
    status: Status,
    solution: Option<Solution>,
    oracle_status: Status,
    oracle_objective: Option<Rational>,
}

struct Corpus {
    solved: Vec<Solved>,
    took: Duration,
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let start = Instant::now();
        let mut solved = Vec::new();
        for (dims, seed) in [(Dims::square(2), 100_000u64), (Dims::square(3), 200_000)] {
            for (_, inst) in generate_screened(dims, seed, C3_PER_DIMS).instances {
                let hpr = solve_lp(&build_hpr(&inst));
                assert_eq!(
                    hpr.status,
                    LpStatus::Optimal,
                    "screened instance has a bounded HPR"
                );
                let optimistic = solve_tiny_optimistic(&inst).expect("oracle size").objective;
                let runs = C3_DELTAS
                    .iter()
                    .map(|&(n, d)| {
                        let delta = ratio(n, d);
                        let out = norvep(&inst, &cfg(&delta), &NorvepOptions::default());
                        let o = solve_tiny(&inst, &delta).expect("oracle size");
                        Run {
                            delta,
                            status: out.status,
                            solution: out.solution,
                            oracle_status: o.status,
                            oracle_objective: o.objective,
                        }
                    })
                    .collect();
                solved.push(Solved {
                    inst,
                    hpr: hpr.objective,
                    optimistic,
                    runs,
                });
            }
        }
        Corpus {
            solved,
            took: start.elapsed(),
        }
    })
}

#[test]
fn c3_oracle_equivalence() {
    let mut r = Report::new("C3");
    let c = corpus();
    r.check(
        "at least 200 screened instances",
        c.solved.len() >= 2 * C3_PER_DIMS,
        format!("{} instances", c.solved.len()),
    );
    let mut mismatches = Vec::new();
    let mut runs = 0;
    for s in &c.solved {
        for run in &s.runs {
            let Run {
                delta,
                status,
                solution: sol,
                oracle_status: o_status,
                oracle_objective: o_obj,
            } = run;
            runs += 1;
            let obj = sol.as_ref().map(|s| s.upper_objective.clone());
            let same_obj = match (&obj, o_obj) {
                (Some(a), Some(b)) => exact_eq(a, b),
                (None, None) => true,
                _ => false,
            };
            if status != o_status || !same_obj {
                mismatches.push(format!(
                    "{} delta {delta}: {status} {obj:?} vs {o_status} {o_obj:?}",
                    s.inst.name
                ));
            }
        }
    }
    r.check(
        "status and optimum equal the oracle",
        mismatches.is_empty(),
        format!(
            "{runs} runs, {} mismatches {:?}",
            mismatches.len(),
            mismatches.iter().take(3).collect::<Vec<_>>()
        ),
    );
    let statuses: BTreeMap<String, usize> =
        c.solved
            .iter()
            .flat_map(|s| &s.runs)
            .fold(BTreeMap::new(), |mut m, run| {
                *m.entry(run.status.to_string()).or_default() += 1;
                m
            });
    println!("     C3 status mix {statuses:?}");
    r.check(
        "runtime",
        c.took <= LIMIT_C3,
        format!("{:.2?} <= {LIMIT_C3:?}", c.took),
    );
    r.finish();
}

fn random_system(rng: &mut ChaCha8Rng) -> DualSystem {
    let dim = rng.random_range(1..=C4_MAX_DIM);
    let rows = rng.random_range(0..=6);
    let coeff = |rng: &mut ChaCha8Rng| match rng.random_range(0..10) {
        0..=2 => int(0),
        3..=7 => int(rng.random_range(-5..=5)),
        _ => ratio(rng.random_range(-9..=9), rng.random_range(1..=4)),
    };
    DualSystem {
        k: 0,
        dim,
        rows: (0..rows)
            .map(|_| HalfSpace {
                coeffs: (0..dim).map(|_| coeff(rng)).collect(),
                rhs: coeff(rng),
            })
            .collect(),
    }
}

#[test]
fn c4_vertex_enumeration_completeness() {
    let mut r = Report::new("C4");
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    let mut total_vertices = 0;
    let mut nonempty = 0;
    for _ in 0..C4_SYSTEMS {
        let s = random_system(&mut rng);
        let p = enumerate_vertices(&s);
        let mut dd: Vec<Vec<Rational>> = p.vertices.iter().map(|v| v.to_point()).collect();
        dd.sort();
        let subsets = vertices_by_subsets(&s).expect("dimension within the oracle cap");
        total_vertices += dd.len();
        nonempty += usize::from(!p.empty);
        if dd != subsets {
            bad += 1;
        }
    }
    r.check(
        "double description equals subset enumeration",
        bad == 0,
        format!("{C4_SYSTEMS} systems, {nonempty} nonempty, {total_vertices} vertices, {bad} mismatches"),
    );
    r.within(LIMIT_C4, start);
    r.finish();
}

#[test]
fn c5_relaxation_chain() {
    let mut r = Report::new("C5");
    let c = corpus();
    let mut broken = Vec::new();
    let mut checked = 0;
    for s in &c.solved {
        let Some(opt) = &s.optimistic else {
            // An infeasible optimistic problem leaves the chain vacuous.
            continue;
        };
        if s.hpr > *opt {
            broken.push(format!("{}: hpr {} > optimistic {opt}", s.inst.name, s.hpr));
        }
        for Run {
            delta,
            solution: sol,
            ..
        } in &s.runs
        {
            checked += 1;
            if let Some(sol) = sol {
                if *opt > sol.upper_objective {
                    broken.push(format!(
                        "{} delta {delta}: optimistic {opt} > {}",
                        s.inst.name, sol.upper_objective
                    ));
                }
            }
        }
    }
    r.check(
        "hpr <= optimistic <= norbip(delta)",
        broken.is_empty(),
        format!(
            "{checked} chains, {} broken {:?}",
            broken.len(),
            broken.iter().take(3).collect::<Vec<_>>()
        ),
    );
    r.finish();
}

#[test]
fn c6_delta_monotonicity() {
    let mut r = Report::new("C6");
    let start = Instant::now();
    let batch = generate_screened(Dims::square(3), 600_000, C6_INSTANCES);
    r.check(
        "at least 100 screened instances",
        batch.instances.len() >= 100,
        format!("{} instances", batch.instances.len()),
    );
    let deltas: Vec<Rational> = C6_DELTAS.iter().map(|&(n, d)| ratio(n, d)).collect();
    let mut counts = vec![0usize; deltas.len()];
    let mut regressions = 0;
    let mut budget = 0;
    for (_, inst) in &batch.instances {
        let feasible: Vec<bool> = deltas
            .iter()
            .map(|d| {
                let st = norvep(inst, &cfg(d), &NorvepOptions::default()).status;
                budget += usize::from(st == Status::Budget);
                !st.is_infeasible()
            })
            .collect();
        for (j, f) in feasible.iter().enumerate() {
            counts[j] += usize::from(!f);
        }
        regressions += feasible.windows(2).filter(|w| w[1] && !w[0]).count();
    }
    r.check("no budget stops", budget == 0, format!("{budget}"));
    r.check(
        "infeasible count nondecreasing",
        counts.windows(2).all(|w| w[0] <= w[1]),
        format!("counts {counts:?}"),
    );
    r.check(
        "feasible at a larger delta implies feasible at a smaller one",
        regressions == 0,
        format!("{regressions} regressions"),
    );
    r.within(LIMIT_C6, start);
    r.finish();
}

#[test]
fn c7_valid_inequality() {
    let mut r = Report::new("C7");
    let c = corpus();
    let mut finite = 0;
    let mut violated = Vec::new();
    let mut capped = 0;
    let mut no_sweep = 0;
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &c.solved {
        let cut = strong_duality_cut(&s.inst, DEFAULT_CUT_SWEEPS);
        if cut.status != CutStatus::Finite {
            continue;
        }
        finite += 1;
        capped += usize::from(cut.capped);
        no_sweep += usize::from(cut.sweeps < 1);
        *histogram.entry(cut.improving_sweeps).or_default() += 1;
        for Run {
            delta,
            solution: sol,
            ..
        } in &s.runs
        {
            if let Some(sol) = sol {
                if !cut.holds(&s.inst, &sol.v, &sol.lambda) {
                    violated.push(format!("{} delta {delta}", s.inst.name));
                }
            }
        }
    }
    r.check(
        "some instances have a finite cut",
        finite > 0,
        format!("{finite} finite cuts"),
    );
    r.check(
        "cut holds at every optimum",
        violated.is_empty(),
        format!(
            "{} violations {:?}",
            violated.len(),
            violated.iter().take(3).collect::<Vec<_>>()
        ),
    );
    r.check(
        "fixpoint within the sweep cap",
        capped == 0,
        format!("{capped} capped at {DEFAULT_CUT_SWEEPS}"),
    );
    r.check(
        "at least one sweep",
        no_sweep == 0,
        format!("{no_sweep} without sweeps"),
    );
    let mode = histogram
        .iter()
        .max_by_key(|(k, n)| (**n, std::cmp::Reverse(**k)))
        .map(|(k, _)| *k);
    r.check(
        "most common improving sweep count is 1",
        mode == Some(1),
        format!("histogram {histogram:?}"),
    );
    r.finish();
}

#[test]
fn c8_smoke_benchmark() {
    let mut r = Report::new("C8");
    let start = Instant::now();
    let batch = generate_screened(Dims::square(5), 800_000, C8_INSTANCES);
    r.check(
        "screened instances available",
        !batch.instances.is_empty(),
        format!(
            "{} instances from {} trials",
            batch.instances.len(),
            batch.trials.len()
        ),
    );
    let opts = NorvepOptions {
        node_budget: C8_NODE_BUDGET,
        ..NorvepOptions::default()
    };
    let mut stopped = Vec::new();
    let mut statuses: BTreeMap<String, usize> = BTreeMap::new();
    let mut max_nodes = 0;
    for (seed, inst) in &batch.instances {
        let out = norvep(inst, &cfg(&ratio(1, 10)), &opts);
        *statuses.entry(out.status.to_string()).or_default() += 1;
        max_nodes = max_nodes.max(out.optimistic_nodes.max(out.extended_nodes));
        if out.status == Status::Budget {
            stopped.push(*seed);
        }
    }
    r.check(
        "every instance solves within the node budget",
        stopped.is_empty(),
        format!("statuses {statuses:?}, max nodes {max_nodes}, budget stops {stopped:?}"),
    );
    println!("     C8 took {:.2?}", start.elapsed());
    r.finish();
}
