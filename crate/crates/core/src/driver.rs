//! The staged solve pipeline, the robustness checker for given solutions,
//! and the radius of near-optimal feasibility.
//!
//! Stages, in order: enumerate every dual adversarial polyhedron, solve the
//! high-point relaxation, solve the optimistic model, solve the extended
//! model. Each stage can end the run early with an infeasibility verdict.

use alloc::vec::Vec;
use core::fmt;

use num_traits::{Signed, Zero};

use crate::bnb::{self, BnbOptions, BnbOutcome, BnbStatus, DEFAULT_NODE_BUDGET};
use crate::instance::{
    to_objective_robust, BilevelInstance, DualCertificate, RobustMode, RobustnessConfig, Solution,
};
use crate::lp::{solve_lp, LpStatus};
use crate::model::{
    build_extended, build_hpr, build_optimistic, lower_level_lp, solve_adversarial, Adversary,
    ExtendedModel, ExtendedOptions, StrongDualityCut, DEFAULT_CUT_SWEEPS,
};
use crate::rational::{ratio, Rational};
use crate::vertex_enum::{build_dual_polyhedron, enumerate_vertices, DualPolyhedron};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    /// `D_k` is empty: constraint `k` cannot be protected for any `δ >= 0`.
    DualAdversarialInfeasible(usize),
    HprInfeasible,
    OptimisticInfeasible,
    NorbipInfeasible,
    Optimal,
    Unbounded,
    Budget,
}

impl Status {
    pub fn is_infeasible(self) -> bool {
        matches!(
            self,
            Status::DualAdversarialInfeasible(_)
                | Status::HprInfeasible
                | Status::OptimisticInfeasible
                | Status::NorbipInfeasible
        )
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::DualAdversarialInfeasible(k) => write!(f, "dual-adversarial-infeasible({})", k),
            Status::HprInfeasible => f.write_str("hpr-infeasible"),
            Status::OptimisticInfeasible => f.write_str("optimistic-infeasible"),
            Status::NorbipInfeasible => f.write_str("infeasible"),
            Status::Optimal => f.write_str("optimal"),
            Status::Unbounded => f.write_str("unbounded"),
            Status::Budget => f.write_str("budget"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    DualEnumeration,
    HighPoint,
    ValidInequality,
    Optimistic,
    Extended,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::DualEnumeration => "dual_enumeration",
            Stage::HighPoint => "high_point",
            Stage::ValidInequality => "valid_inequality",
            Stage::Optimistic => "optimistic",
            Stage::Extended => "extended",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageTiming {
    pub stage: Stage,
    pub micros: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NorvepOptions {
    /// Keep `Gx + Hv <= q` as rows of the extended model.
    pub include_upper_rows: bool,
    /// Add the strong-duality valid inequality to both branch-and-bound
    /// models.
    pub sd_cut: bool,
    pub cut_sweeps: usize,
    /// Skip the optimistic stage.
    pub skip_optimistic: bool,
    /// Node budget of each branch-and-bound run.
    pub node_budget: u64,
}

impl Default for NorvepOptions {
    fn default() -> Self {
        NorvepOptions {
            include_upper_rows: true,
            sd_cut: false,
            cut_sweeps: DEFAULT_CUT_SWEEPS,
            skip_optimistic: false,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub status: Status,
    pub solution: Option<Solution>,
    pub optimistic_solution: Option<Solution>,
    pub hpr_objective: Option<Rational>,
    /// Best lower bound when the budget ran out (`None` means −∞).
    pub bound: Option<Rational>,
    /// Tolerance actually used; negative means optimistic.
    pub delta: Rational,
    pub stage_timings: Vec<StageTiming>,
    /// Number of vertices of each `D_k`.
    pub vertex_counts: Vec<usize>,
    pub ray_counts: Vec<usize>,
    pub optimistic_nodes: u64,
    pub extended_nodes: u64,
    pub cut: Option<StrongDualityCut>,
}

/// The instance actually solved under `mode`: the objective-robust and
/// conservative modes add the epigraph variable as the last upper variable.
pub fn working_instance(inst: &BilevelInstance, mode: RobustMode) -> BilevelInstance {
    match mode {
        RobustMode::ObjectiveRobust => to_objective_robust(inst, false),
        RobustMode::Conservative => to_objective_robust(inst, true),
        RobustMode::ConstraintRobust | RobustMode::Optimistic => inst.clone(),
    }
}

/// Runs the pipeline without timing.
pub fn norvep(
    inst: &BilevelInstance,
    cfg: &RobustnessConfig,
    opts: &NorvepOptions,
) -> SolveOutcome {
    norvep_timed(inst, cfg, opts, &|| 0)
}

/// Runs the pipeline; `clock` returns a monotonic time in microseconds.
pub fn norvep_timed(
    inst: &BilevelInstance,
    cfg: &RobustnessConfig,
    opts: &NorvepOptions,
    clock: &dyn Fn() -> u64,
) -> SolveOutcome {
    let mode = cfg.effective_mode();
    let inst = working_instance(inst, mode);
    let inst = &inst;
    let optimistic_only = mode == RobustMode::Optimistic;
    let bnb_opts = BnbOptions {
        node_budget: opts.node_budget,
        record_log: false,
    };

    let mut out = SolveOutcome {
        status: Status::Optimal,
        solution: None,
        optimistic_solution: None,
        hpr_objective: None,
        bound: None,
        delta: cfg.delta.clone(),
        stage_timings: Vec::new(),
        vertex_counts: Vec::new(),
        ray_counts: Vec::new(),
        optimistic_nodes: 0,
        extended_nodes: 0,
        cut: None,
    };
    let timed = |out: &mut SolveOutcome, stage: Stage, start: u64| {
        out.stage_timings.push(StageTiming {
            stage,
            micros: clock().saturating_sub(start),
        });
    };

    let mut polyhedra = Vec::new();
    if !optimistic_only {
        let t = clock();
        let mut empty = None;
        for k in 0..inst.m_u {
            let p = enumerate_vertices(&build_dual_polyhedron(inst, k));
            out.vertex_counts.push(p.vertices.len());
            out.ray_counts.push(p.ray_count);
            if p.empty {
                empty = Some(k);
                break;
            }
            polyhedra.push(p);
        }
        timed(&mut out, Stage::DualEnumeration, t);
        if let Some(k) = empty {
            out.status = Status::DualAdversarialInfeasible(k);
            return out;
        }
    }

    let t = clock();
    let hpr = solve_lp(&build_hpr(inst));
    timed(&mut out, Stage::HighPoint, t);
    match hpr.status {
        LpStatus::Infeasible => {
            out.status = Status::HprInfeasible;
            return out;
        }
        LpStatus::Optimal => out.hpr_objective = Some(hpr.objective),
        LpStatus::Unbounded => {}
    }

    if opts.sd_cut {
        let t = clock();
        let cut = crate::model::strong_duality_cut(inst, opts.cut_sweeps);
        timed(&mut out, Stage::ValidInequality, t);
        out.cut = Some(cut);
    }

    if optimistic_only || !opts.skip_optimistic {
        let t = clock();
        let model = build_optimistic(inst, out.cut.as_ref());
        let res = bnb::solve(&model, &bnb_opts);
        timed(&mut out, Stage::Optimistic, t);
        out.optimistic_nodes = res.nodes;
        out.optimistic_solution = extract(inst, &model, &[], &res);
        match res.status {
            BnbStatus::Infeasible => {
                out.status = Status::OptimisticInfeasible;
                return out;
            }
            BnbStatus::Budget => {
                out.status = Status::Budget;
                out.bound = res.bound;
                out.solution = out.optimistic_solution.clone().filter(|_| optimistic_only);
                return out;
            }
            BnbStatus::Unbounded if optimistic_only => {
                out.status = Status::Unbounded;
                return out;
            }
            BnbStatus::Unbounded | BnbStatus::Optimal => {}
        }
        if optimistic_only {
            out.solution = out.optimistic_solution.clone();
            return out;
        }
    }

    let t = clock();
    let model = build_extended(
        inst,
        &polyhedra,
        &cfg.delta,
        &ExtendedOptions {
            include_upper_rows: opts.include_upper_rows,
            radius_mode: false,
            strong_duality_cut: out.cut.clone(),
        },
    );
    let res = bnb::solve(&model, &bnb_opts);
    timed(&mut out, Stage::Extended, t);
    out.extended_nodes = res.nodes;
    out.solution = extract(inst, &model, &polyhedra, &res);
    out.bound = res.bound.clone();
    out.status = match res.status {
        BnbStatus::Optimal => Status::Optimal,
        BnbStatus::Infeasible => Status::NorbipInfeasible,
        BnbStatus::Unbounded => Status::Unbounded,
        BnbStatus::Budget => Status::Budget,
    };
    out
}

fn extract(
    inst: &BilevelInstance,
    model: &ExtendedModel,
    polyhedra: &[DualPolyhedron],
    res: &BnbOutcome,
) -> Option<Solution> {
    let z = res.point.as_ref()?;
    let (x, v, lambda, sigma) = model.layout.split(z);
    let mut sol = Solution::new(
        inst,
        x.to_vec(),
        v.to_vec(),
        lambda.to_vec(),
        sigma.to_vec(),
    );
    sol.certificates = polyhedra
        .iter()
        .zip(&res.active_vertices)
        .map(|(p, &l)| DualCertificate {
            alpha: p.vertices[l].alpha.clone(),
            beta: p.vertices[l].beta.clone(),
        })
        .collect();
    Some(sol)
}

/// `max(1/20, δ_r·|d·v|)` at the optimistic solution; `Err` carries the
/// status when the optimistic problem has no optimum.
pub fn relative_delta(
    inst: &BilevelInstance,
    delta_rel: &Rational,
    opts: &NorvepOptions,
) -> Result<Rational, Status> {
    let model = build_optimistic(inst, None);
    let res = bnb::solve(
        &model,
        &BnbOptions {
            node_budget: opts.node_budget,
            record_log: false,
        },
    );
    match res.status {
        BnbStatus::Optimal => {
            let z = res.point.expect("optimal point");
            let (_, v, _, _) = model.layout.split(&z);
            let scaled = delta_rel * inst.lower_objective(v).abs();
            Ok(core::cmp::max(ratio(1, 20), scaled))
        }
        BnbStatus::Infeasible => Err(Status::OptimisticInfeasible),
        BnbStatus::Unbounded => Err(Status::Unbounded),
        BnbStatus::Budget => Err(Status::Budget),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Worst case stays within the bound; `margin = q_k - (Gx)_k - max H_k·z`.
    Robust { margin: Rational },
    Violated {
        worst: Vec<Rational>,
        violation: Rational,
    },
    /// `H_k·z` is unbounded over the near-optimal set.
    ViolatedUnbounded,
    /// Empty near-optimal set (`δ < 0`).
    Vacuous,
}

impl Verdict {
    pub fn is_robust(&self) -> bool {
        matches!(self, Verdict::Robust { .. } | Verdict::Vacuous)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RobustnessReport {
    /// `(x, v)` is not a bilevel-feasible pair.
    NotBilevelFeasible(&'static str),
    Checked(Vec<Verdict>),
}

impl RobustnessReport {
    pub fn all_robust(&self) -> bool {
        match self {
            RobustnessReport::NotBilevelFeasible(_) => false,
            RobustnessReport::Checked(v) => v.iter().all(Verdict::is_robust),
        }
    }
}

/// Solves the `m_u` adversarial LPs at `(x, v, δ)`.
pub fn check_robustness(
    inst: &BilevelInstance,
    delta: &Rational,
    x: &[Rational],
    v: &[Rational],
) -> RobustnessReport {
    if x.len() != inst.n_u || v.len() != inst.n_l {
        return RobustnessReport::NotBilevelFeasible("dimension mismatch");
    }
    if (0..inst.n_u).any(|j| !inst.is_x_free(j) && x[j].is_negative()) {
        return RobustnessReport::NotBilevelFeasible("x has a negative entry");
    }
    if !inst.is_lower_feasible(x, v) {
        return RobustnessReport::NotBilevelFeasible("v is not lower-level feasible");
    }
    let lower = solve_lp(&lower_level_lp(inst, x));
    if lower.status != LpStatus::Optimal || lower.objective != inst.lower_objective(v) {
        return RobustnessReport::NotBilevelFeasible("v is not lower-level optimal");
    }
    let verdicts = (0..inst.m_u)
        .map(|k| {
            if delta.is_negative() {
                return Verdict::Vacuous;
            }
            let room = &inst.q[k] - inst.gx(k, x);
            match solve_adversarial(inst, k, x, v, delta) {
                Adversary::Infeasible => Verdict::Vacuous,
                Adversary::Unbounded => Verdict::ViolatedUnbounded,
                Adversary::Optimal { value, worst, .. } => {
                    if value <= room {
                        Verdict::Robust {
                            margin: room - value,
                        }
                    } else {
                        Verdict::Violated {
                            worst,
                            violation: value - room,
                        }
                    }
                }
            }
        })
        .collect();
    RobustnessReport::Checked(verdicts)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Radius {
    Finite(Rational),
    Infinite,
    /// Infeasible for every `δ >= 0`.
    Infeasible,
    Budget {
        bound: Option<Rational>,
    },
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Finite(r) => f.write_str(&crate::rational::format_rational(r)),
            Radius::Infinite => f.write_str("inf"),
            Radius::Infeasible => f.write_str("infeasible"),
            Radius::Budget { .. } => f.write_str("budget"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadiusOutcome {
    pub radius: Radius,
    /// A point attaining the radius, when finite.
    pub solution: Option<Solution>,
    pub nodes: u64,
}

/// Largest `δ >= 0` keeping the extended model feasible, found by
/// maximizing `δ` as a decision variable.
pub fn radius(inst: &BilevelInstance, opts: &NorvepOptions) -> RadiusOutcome {
    let mut polyhedra = Vec::with_capacity(inst.m_u);
    for k in 0..inst.m_u {
        let p = enumerate_vertices(&build_dual_polyhedron(inst, k));
        if p.empty {
            return RadiusOutcome {
                radius: Radius::Infeasible,
                solution: None,
                nodes: 0,
            };
        }
        polyhedra.push(p);
    }
    let model = build_extended(
        inst,
        &polyhedra,
        &Rational::zero(),
        &ExtendedOptions {
            include_upper_rows: opts.include_upper_rows,
            radius_mode: true,
            strong_duality_cut: None,
        },
    );
    let res = bnb::solve(
        &model,
        &BnbOptions {
            node_budget: opts.node_budget,
            record_log: false,
        },
    );
    let radius = match res.status {
        BnbStatus::Optimal => Radius::Finite(-res.objective.clone().expect("optimal value")),
        BnbStatus::Unbounded => Radius::Infinite,
        BnbStatus::Infeasible => Radius::Infeasible,
        BnbStatus::Budget => Radius::Budget {
            bound: res.bound.as_ref().map(|b| -b),
        },
    };
    RadiusOutcome {
        radius,
        solution: extract(inst, &model, &polyhedra, &res),
        nodes: res.nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;
    use crate::samples::{bounded_example, line_example};

    fn cfg(delta: Rational) -> RobustnessConfig {
        RobustnessConfig::new(delta, RobustMode::ConstraintRobust)
    }

    #[test]
    fn bounded_example_pipeline() {
        let inst = bounded_example();
        let out = norvep(&inst, &cfg(int(0)), &NorvepOptions::default());
        assert_eq!(out.status, Status::Optimal);
        let s = out.solution.unwrap();
        assert_eq!((s.x.clone(), s.v.clone()), (vec![int(1)], vec![int(3)]));
        assert_eq!(s.upper_objective, int(-29));
        assert_eq!(out.hpr_objective, Some(int(-35)));
        assert_eq!(out.vertex_counts, vec![1, 1]);
        assert_eq!(out.ray_counts, vec![3, 3]);
        assert!(check_robustness(&inst, &int(0), &s.x, &s.v).all_robust());

        let out = norvep(&inst, &cfg(ratio(1, 2)), &NorvepOptions::default());
        let s = out.solution.unwrap();
        assert_eq!(
            (s.x.clone(), s.v.clone()),
            (vec![ratio(11, 9)], vec![ratio(23, 9)])
        );
        assert_eq!(s.upper_objective, ratio(-73, 3));
    }

    #[test]
    fn certificates_prove_robustness() {
        let inst = bounded_example();
        let delta = int(1);
        let s = norvep(&inst, &cfg(delta.clone()), &NorvepOptions::default())
            .solution
            .unwrap();
        for (k, c) in s.certificates.iter().enumerate() {
            let lhs = crate::rational::dot(&c.alpha, &inst.lower_rhs_at(&s.x))
                + &c.beta * (inst.lower_objective(&s.v) + &delta);
            assert!(lhs <= &inst.q[k] - inst.gx(k, &s.x));
        }
    }

    #[test]
    fn negative_delta_is_optimistic() {
        let out = norvep(&bounded_example(), &cfg(int(-1)), &NorvepOptions::default());
        assert_eq!(out.status, Status::Optimal);
        assert!(out.vertex_counts.is_empty());
        assert_eq!(out.solution.unwrap().upper_objective, int(-29));
        let r = check_robustness(&bounded_example(), &int(-1), &[int(1)], &[int(3)]);
        assert_eq!(r, RobustnessReport::Checked(vec![Verdict::Vacuous; 2]));
    }

    #[test]
    fn stage_timings_stop_at_terminating_stage() {
        // -α1 - α2 - β >= 1 has no nonnegative solution.
        let mut inst = bounded_example();
        inst.b = vec![vec![int(-1)], vec![int(-1)]];
        inst.d = vec![int(-1)];
        inst.h[0] = vec![int(1)];
        let out = norvep(&inst, &cfg(int(0)), &NorvepOptions::default());
        assert_eq!(out.status, Status::DualAdversarialInfeasible(0));
        assert_eq!(out.stage_timings.len(), 1);
        assert_eq!(out.stage_timings[0].stage, Stage::DualEnumeration);
    }

    #[test]
    fn line_example_pipeline() {
        let inst = line_example();
        let out = norvep(&inst, &cfg(ratio(1, 10)), &NorvepOptions::default());
        let s = out.solution.unwrap();
        assert_eq!(s.x, vec![ratio(1, 2)]);
        assert_eq!(s.v, vec![ratio(21, 20)]);
        match check_robustness(&inst, &ratio(1, 10), &[int(0)], &[int(1)]) {
            RobustnessReport::Checked(v) => match &v[0] {
                Verdict::Violated { worst, violation } => {
                    assert_eq!(worst, &vec![ratio(9, 10)]);
                    assert_eq!(violation, &ratio(1, 10));
                }
                other => panic!("{:?}", other),
            },
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn radii() {
        assert_eq!(
            radius(&bounded_example(), &NorvepOptions::default()).radius,
            Radius::Finite(int(4))
        );
        assert_eq!(
            radius(&line_example(), &NorvepOptions::default()).radius,
            Radius::Infinite
        );
        let mut inst = bounded_example();
        inst.h = vec![vec![int(0)], vec![int(0)]];
        assert_eq!(
            radius(&inst, &NorvepOptions::default()).radius,
            Radius::Infinite
        );
    }

    #[test]
    fn not_bilevel_feasible() {
        let inst = bounded_example();
        // v = 4 is feasible at x = 1 but not optimal (v(1) = 3).
        assert!(matches!(
            check_robustness(&inst, &int(0), &[int(1)], &[int(4)]),
            RobustnessReport::NotBilevelFeasible(_)
        ));
    }

    #[test]
    fn relative_delta_floor() {
        let d = relative_delta(
            &bounded_example(),
            &ratio(1, 100),
            &NorvepOptions::default(),
        )
        .unwrap();
        assert_eq!(d, ratio(1, 20));
        let d = relative_delta(&bounded_example(), &int(1), &NorvepOptions::default()).unwrap();
        assert_eq!(d, int(3));
    }
}
