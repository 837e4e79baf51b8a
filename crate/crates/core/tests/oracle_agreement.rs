//! Branch-and-bound pipeline against the pattern-enumeration oracle on
//! screened random instances.

use norbip_core::driver::{check_robustness, norvep, NorvepOptions, Status};
use norbip_core::generate::{generate_screened, Dims};
use norbip_core::instance::{RobustMode, RobustnessConfig};
use norbip_core::oracle::solve_tiny;
use norbip_core::rational::{int, ratio, Rational};

fn agree(dims: Dims, count: usize, seed: u64) {
    let deltas: [Rational; 4] = [int(-1), int(0), ratio(1, 10), int(1)];
    for (s, inst) in generate_screened(dims, seed, count).instances {
        for delta in &deltas {
            let cfg = RobustnessConfig::new(delta.clone(), RobustMode::ConstraintRobust);
            let got = norvep(&inst, &cfg, &NorvepOptions::default());
            let want = solve_tiny(&inst, delta).unwrap();
            assert_eq!(got.status, want.status, "seed {s} delta {delta}");
            if got.status == Status::Optimal {
                let sol = got.solution.unwrap();
                assert_eq!(
                    Some(sol.upper_objective.clone()),
                    want.objective,
                    "seed {s} delta {delta}"
                );
                assert!(
                    check_robustness(&inst, delta, &sol.x, &sol.v).all_robust(),
                    "seed {s} delta {delta}"
                );
            }
        }
    }
}

#[test]
fn two_by_two() {
    agree(Dims::square(2), 25, 1000);
}

#[test]
fn three_by_three() {
    agree(Dims::square(3), 15, 2000);
}

#[test]
fn unequal_dims() {
    agree(
        Dims {
            n_u: 1,
            n_l: 3,
            m_u: 2,
            m_l: 2,
        },
        15,
        3000,
    );
}
