//! Structural properties of the pipeline on screened random instances.

use norbip_core::bnb::{self, BnbOptions, BnbStatus};
use norbip_core::driver::{norvep, radius, working_instance, NorvepOptions, Radius, Status};
use norbip_core::generate::{generate, screen, Dims};
use norbip_core::instance::{
    promote_constraints, to_objective_robust, BilevelInstance, RobustMode, RobustnessConfig,
};
use norbip_core::lp::{solve_lp, LpStatus};
use norbip_core::model::{
    build_extended, build_hpr, strong_duality_cut, CutStatus, ExtendedOptions, DEFAULT_CUT_SWEEPS,
};
use norbip_core::oracle::solve_tiny;
use norbip_core::rational::{int, ratio, ExtRational, Rational};
use norbip_core::samples::bounded_example;
use norbip_core::vertex_enum::{build_dual_polyhedron, enumerate_vertices};
use proptest::prelude::*;

fn solve(
    inst: &BilevelInstance,
    delta: &Rational,
    opts: &NorvepOptions,
) -> (Status, Option<Rational>) {
    let out = norvep(
        inst,
        &RobustnessConfig::new(delta.clone(), RobustMode::ConstraintRobust),
        opts,
    );
    (out.status, out.solution.map(|s| s.upper_objective))
}

fn screened(dims: Dims) -> impl Strategy<Value = BilevelInstance> {
    (0u64..100_000)
        .prop_map(move |s| generate(dims, s))
        .prop_filter("screened", |i| screen(i).is_none())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relaxation_chain_and_monotonicity(inst in screened(Dims::square(3))) {
        let hpr = solve_lp(&build_hpr(&inst));
        prop_assert_eq!(hpr.status, LpStatus::Optimal);
        let deltas = [int(0), ratio(1, 100), ratio(1, 10), int(1), int(3), int(12)];
        let mut previous: Option<(Status, Option<Rational>)> = None;
        for d in &deltas {
            let out = norvep(
                &inst,
                &RobustnessConfig::new(d.clone(), RobustMode::ConstraintRobust),
                &NorvepOptions::default(),
            );
            if let Some(opt) = &out.optimistic_solution {
                prop_assert!(hpr.objective <= opt.upper_objective);
                if let Some(s) = &out.solution {
                    prop_assert!(opt.upper_objective <= s.upper_objective);
                }
            }
            let current = (out.status, out.solution.map(|s| s.upper_objective));
            if let Some((ps, pv)) = &previous {
                if current.0 == Status::Optimal {
                    prop_assert_eq!(*ps, Status::Optimal);
                    prop_assert!(pv.as_ref().unwrap() <= current.1.as_ref().unwrap());
                }
            }
            previous = Some(current);
        }
    }

    #[test]
    fn valid_inequality_changes_nothing(inst in screened(Dims::square(3))) {
        let cut = strong_duality_cut(&inst, DEFAULT_CUT_SWEEPS);
        prop_assert!(!cut.capped);
        prop_assert!(cut.improving_sweeps >= 1);
        let with = NorvepOptions { sd_cut: true, ..NorvepOptions::default() };
        let without_rows = NorvepOptions { include_upper_rows: false, ..NorvepOptions::default() };
        for d in [int(0), ratio(1, 10), int(1)] {
            let base = solve(&inst, &d, &NorvepOptions::default());
            prop_assert_eq!(&solve(&inst, &d, &with), &base);
            prop_assert_eq!(&solve(&inst, &d, &without_rows), &base);
            let out = norvep(&inst, &RobustnessConfig::new(d, RobustMode::ConstraintRobust), &NorvepOptions::default());
            if let Some(s) = out.solution {
                prop_assert!(cut.holds(&inst, &s.v, &s.lambda));
            }
        }
    }

    #[test]
    fn radius_is_maximal(inst in screened(Dims::square(2))) {
        let r = radius(&inst, &NorvepOptions::default());
        match r.radius {
            Radius::Finite(d) => {
                prop_assert!(d >= int(0));
                prop_assert_eq!(solve(&inst, &d, &NorvepOptions::default()).0, Status::Optimal);
                let beyond = &d * ratio(1_000_001, 1_000_000) + ratio(1, 1_000_000);
                prop_assert_eq!(solve(&inst, &beyond, &NorvepOptions::default()).0, Status::NorbipInfeasible);
            }
            Radius::Infinite => {
                prop_assert_eq!(solve(&inst, &int(1000), &NorvepOptions::default()).0, Status::Optimal);
            }
            Radius::Infeasible => {
                prop_assert!(solve(&inst, &int(0), &NorvepOptions::default()).0.is_infeasible());
            }
            Radius::Budget { .. } => prop_assert!(false, "budget"),
        }
    }

    #[test]
    fn budget_bound_is_valid(inst in screened(Dims::square(3)), budget in 1u64..4) {
        let polys: Vec<_> = (0..inst.m_u)
            .map(|k| enumerate_vertices(&build_dual_polyhedron(&inst, k)))
            .collect();
        let model = build_extended(&inst, &polys, &ratio(1, 10), &ExtendedOptions::default());
        let full = bnb::solve(&model, &BnbOptions::default());
        let cut = bnb::solve(&model, &BnbOptions { node_budget: budget, record_log: true });
        prop_assert_eq!(cut.log.len() as u64, cut.nodes);
        if cut.status == BnbStatus::Budget {
            if let (Some(b), Some(opt)) = (&cut.bound, &full.objective) {
                prop_assert!(b <= opt);
            }
            if let (Some(inc), Some(opt)) = (&cut.objective, &full.objective) {
                prop_assert!(opt <= inc);
            }
        } else {
            prop_assert_eq!(cut.status, full.status);
            prop_assert_eq!(cut.objective, full.objective);
        }
    }

    #[test]
    fn objective_robust_modes_match_oracle(inst in screened(Dims::square(2))) {
        for mode in [RobustMode::ObjectiveRobust, RobustMode::Conservative] {
            let w = working_instance(&inst, mode);
            prop_assert_eq!(&w.a[0][..inst.n_u], &inst.a[0][..]);
            prop_assert_eq!(&w.b, &inst.b);
            prop_assert_eq!(&w.b_rhs, &inst.b_rhs);
            prop_assert_eq!(&w.d, &inst.d);
            for d in [int(0), ratio(1, 10)] {
                let out = norvep(&inst, &RobustnessConfig::new(d.clone(), mode), &NorvepOptions::default());
                let want = solve_tiny(&w, &d).unwrap();
                prop_assert_eq!(out.status, want.status);
                prop_assert_eq!(out.solution.map(|s| s.upper_objective), want.objective);
            }
        }
    }

    #[test]
    fn promotion_preserves_rows(inst in screened(Dims::square(3)), pick in prop::collection::vec(any::<bool>(), 3)) {
        let idx: Vec<usize> = (0..3).filter(|&i| pick[i]).collect();
        let p = promote_constraints(&inst, &idx).unwrap();
        prop_assert_eq!(p.m_u + p.m_l, inst.m_u + inst.m_l);
        prop_assert_eq!(promote_constraints(&p, &[]).unwrap(), p.clone());
        let rows = |i: &BilevelInstance| {
            let mut r: Vec<(Vec<Rational>, Vec<Rational>, Rational)> = (0..i.m_u)
                .map(|k| (i.g[k].clone(), i.h[k].clone(), i.q[k].clone()))
                .chain((0..i.m_l).map(|k| (i.a[k].clone(), i.b[k].clone(), i.b_rhs[k].clone())))
                .collect();
            r.sort();
            r
        };
        prop_assert_eq!(rows(&p), rows(&inst));
    }
}

#[test]
fn cut_tightens_over_several_sweeps() {
    // x + v >= 3 upstairs; the follower minimizes v s.t. 2x + 3v >= 3.
    let mut inst = BilevelInstance::zeros("sweeps", 1, 1, 2, 2);
    inst.g = vec![vec![int(0)], vec![int(-1)]];
    inst.h = vec![vec![int(-1)], vec![int(-1)]];
    inst.q = vec![int(3), int(-3)];
    inst.a = vec![vec![int(-2)], vec![int(-1)]];
    inst.b = vec![vec![int(-3)], vec![int(-1)]];
    inst.b_rhs = vec![int(-3), int(2)];
    inst.d = vec![int(1)];
    let cut = strong_duality_cut(&inst, DEFAULT_CUT_SWEEPS);
    let f = |a: i64, b: i64| vec![ExtRational::Finite(int(a)), ExtRational::Finite(int(b))];
    assert_eq!(cut.log, vec![f(0, 0), f(-4, -2), f(-6, -3), f(-6, -3)]);
    assert_eq!(cut.status, CutStatus::Finite);
    assert_eq!(cut.improving_sweeps, 3);
    assert!(!cut.capped);
    assert_eq!(cut.bounds, f(-6, -3));

    let capped = strong_duality_cut(&inst, 2);
    assert!(capped.capped);
    assert_eq!(capped.bounds, f(-4, -2));
}

#[test]
fn epigraph_toy_matches_pessimistic() {
    // min x - y; follower: min y s.t. y <= x.
    let mut inst = BilevelInstance::zeros("toy", 1, 1, 0, 1);
    inst.c_x = vec![int(1)];
    inst.c_y = vec![int(-1)];
    inst.a = vec![vec![int(-1)]];
    inst.b = vec![vec![int(1)]];
    inst.d = vec![int(1)];
    let cfg = RobustnessConfig::new(int(0), RobustMode::ObjectiveRobust);
    let out = norvep(&inst, &cfg, &NorvepOptions::default());
    assert_eq!(out.status, Status::Optimal);
    assert_eq!(out.solution.unwrap().upper_objective, int(0));
    // With δ = 1 the follower may answer y = min(x, 1): still worth 0.
    let cfg = RobustnessConfig::new(int(1), RobustMode::ObjectiveRobust);
    assert_eq!(
        norvep(&inst, &cfg, &NorvepOptions::default())
            .solution
            .unwrap()
            .upper_objective,
        int(0)
    );
}

#[test]
fn objective_robust_bounded_example() {
    let inst = bounded_example();
    let t = to_objective_robust(&inst, true);
    assert_eq!((t.n_u, t.m_u), (2, 3));
    assert_eq!(t.g[2], vec![int(1), int(-1)]);
    assert_eq!(t.h[2], vec![int(-10)]);
    let cfg = RobustnessConfig::new(int(0), RobustMode::Conservative);
    let out = norvep(&inst, &cfg, &NorvepOptions::default());
    assert_eq!(out.solution.unwrap().upper_objective, int(-29));
}

#[test]
fn zero_h_has_infinite_radius() {
    let mut inst = bounded_example();
    inst.h = vec![vec![int(0)], vec![int(0)]];
    assert_eq!(
        radius(&inst, &NorvepOptions::default()).radius,
        Radius::Infinite
    );
}
