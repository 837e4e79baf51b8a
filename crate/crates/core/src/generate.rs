//! Seeded random instances and feasibility screening.
//!
//! Each coefficient is zero with probability 3/5 and otherwise `k/10⁶` with
//! `k` uniform on `0..=10⁶`. The generator is ChaCha8 seeded from a `u64`;
//! arrays are drawn in the order `c_x, c_y, G, H, q, A, B, b, d`, row-major.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::BilevelInstance;
use crate::lp::{solve_lp, LpStatus};
use crate::model::build_hpr;
use crate::rational::Rational;
use crate::vertex_enum::{build_dual_polyhedron, enumerate_vertices};

pub const DENOMINATOR: u32 = 1_000_000;

/// Instance dimensions `(n_u, n_l, m_u, m_l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub n_u: usize,
    pub n_l: usize,
    pub m_u: usize,
    pub m_l: usize,
}

impl Dims {
    pub const fn square(n: usize) -> Self {
        Dims {
            n_u: n,
            n_l: n,
            m_u: n,
            m_l: n,
        }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.n_u, self.n_l, self.m_u, self.m_l)
    }
}

fn coefficient(rng: &mut ChaCha8Rng) -> Rational {
    if rng.random_ratio(3, 5) {
        return Rational::from_integer(0.into());
    }
    let k: u32 = rng.random_range(0..=DENOMINATOR);
    Rational::new(k.into(), DENOMINATOR.into())
}

/// Deterministic random instance for `(dims, seed)`.
pub fn generate(dims: Dims, seed: u64) -> BilevelInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = format!(
        "rand-{}-{}-{}-{}-s{}",
        dims.n_u, dims.n_l, dims.m_u, dims.m_l, seed
    );
    let mut inst = BilevelInstance::zeros(&name, dims.n_u, dims.n_l, dims.m_u, dims.m_l);
    let mut fill = |v: &mut Vec<Rational>| {
        for c in v.iter_mut() {
            *c = coefficient(&mut rng);
        }
    };
    fill(&mut inst.c_x);
    fill(&mut inst.c_y);
    inst.g.iter_mut().for_each(&mut fill);
    inst.h.iter_mut().for_each(&mut fill);
    fill(&mut inst.q);
    inst.a.iter_mut().for_each(&mut fill);
    inst.b.iter_mut().for_each(&mut fill);
    fill(&mut inst.b_rhs);
    fill(&mut inst.d);
    inst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rejection {
    /// `D_k` is empty.
    DualAdversarial(usize),
    HighPoint,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::DualAdversarial(k) => write!(f, "dual_adversarial_{}", k),
            Rejection::HighPoint => f.write_str("high_point"),
        }
    }
}

/// First failing screening stage, or `None` if the instance passes.
pub fn screen(inst: &BilevelInstance) -> Option<Rejection> {
    for k in 0..inst.m_u {
        if enumerate_vertices(&build_dual_polyhedron(inst, k)).empty {
            return Some(Rejection::DualAdversarial(k));
        }
    }
    if solve_lp(&build_hpr(inst)).status == LpStatus::Infeasible {
        return Some(Rejection::HighPoint);
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub seed: u64,
    pub rejection: Option<Rejection>,
}

impl Trial {
    pub fn kept(&self) -> bool {
        self.rejection.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Screened {
    pub dims: Dims,
    /// Kept instances with their seeds.
    pub instances: Vec<(u64, BilevelInstance)>,
    pub trials: Vec<Trial>,
}

impl Screened {
    /// Trials per kept instance; `None` if nothing was kept.
    pub fn trials_per_keeper(&self) -> Option<(usize, usize)> {
        (!self.instances.is_empty()).then_some((self.trials.len(), self.instances.len()))
    }
}

/// Trials stop after this many draws per requested instance.
pub const MAX_TRIALS_PER_KEEPER: usize = 1000;

/// Draws seeds `seed, seed + 1, …` until `count` instances pass the
/// screening or `count * MAX_TRIALS_PER_KEEPER` draws were spent.
pub fn generate_screened(dims: Dims, seed: u64, count: usize) -> Screened {
    let mut out = Screened {
        dims,
        instances: Vec::with_capacity(count),
        trials: Vec::new(),
    };
    let limit = count.saturating_mul(MAX_TRIALS_PER_KEEPER);
    let mut s = seed;
    while out.instances.len() < count && out.trials.len() < limit {
        let inst = generate(dims, s);
        let rejection = screen(&inst);
        out.trials.push(Trial { seed: s, rejection });
        if rejection.is_none() {
            out.instances.push((s, inst));
        }
        s = s.wrapping_add(1);
    }
    out
}
