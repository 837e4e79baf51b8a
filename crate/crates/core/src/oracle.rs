//! Brute-force reference solvers for tiny instances, used to cross-check
//! the vertex enumeration and the branch-and-bound pipeline.
//!
//! `solve_tiny` enumerates every complementarity pattern of the lower-level
//! KKT system and solves one LP per pattern. Robustness is checked on each
//! LP optimum with the adversarial LP; when constraint `k` fails, the search
//! splits into one child per vertex of `D_k`, each forcing that vertex's
//! certificate row. Vertices come from [`vertices_by_subsets`], so nothing
//! here shares code with the double-description or branch-and-bound
//! modules.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::driver::Status;
use crate::instance::BilevelInstance;
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation, VarBound};
use crate::rational::{dot, zeros, Rational};
use crate::vertex_enum::{DualSystem, HalfSpace};

/// Largest `m_l + n_l` accepted by [`solve_tiny`].
pub const MAX_PAIRS: usize = 12;
/// Largest variable count accepted by [`vertices_by_subsets`].
pub const MAX_SUBSET_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("m_l + n_l = {0} exceeds the pattern budget of {MAX_PAIRS}")]
    TooManyPairs(usize),
    #[error("system has {0} variables, at most {MAX_SUBSET_DIM} supported")]
    TooManyVariables(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub status: Status,
    pub objective: Option<Rational>,
    pub x: Option<Vec<Rational>>,
    pub v: Option<Vec<Rational>>,
}

impl OracleOutcome {
    fn bare(status: Status) -> Self {
        OracleOutcome {
            status,
            objective: None,
            x: None,
            v: None,
        }
    }
}

/// Exact reference solution of the near-optimal robust problem with
/// tolerance `delta`; `delta < 0` yields the optimistic problem.
pub fn solve_tiny(inst: &BilevelInstance, delta: &Rational) -> Result<OracleOutcome, OracleError> {
    guard(inst)?;
    if !delta.is_negative() {
        for k in 0..inst.m_u {
            if dual_system_is_empty(inst, k) {
                return Ok(OracleOutcome::bare(Status::DualAdversarialInfeasible(k)));
            }
        }
    }
    if hpr_infeasible(inst) {
        return Ok(OracleOutcome::bare(Status::HprInfeasible));
    }
    let optimistic = search_patterns(inst, None);
    if delta.is_negative() {
        return Ok(to_outcome(inst, optimistic, Status::OptimisticInfeasible));
    }
    if matches!(optimistic, Best::None) {
        return Ok(OracleOutcome::bare(Status::OptimisticInfeasible));
    }
    let vertices = (0..inst.m_u)
        .map(|k| vertices_by_subsets(&dual_system(inst, k)))
        .collect::<Result<Vec<_>, _>>()?;
    let robust = Robust { delta, vertices };
    let best = search_patterns(inst, Some(&robust));
    Ok(to_outcome(inst, best, Status::NorbipInfeasible))
}

/// Exact reference solution of the optimistic problem alone.
pub fn solve_tiny_optimistic(inst: &BilevelInstance) -> Result<OracleOutcome, OracleError> {
    guard(inst)?;
    Ok(to_outcome(
        inst,
        search_patterns(inst, None),
        Status::OptimisticInfeasible,
    ))
}

fn guard(inst: &BilevelInstance) -> Result<(), OracleError> {
    let pairs = inst.m_l + inst.n_l;
    if pairs > MAX_PAIRS {
        return Err(OracleError::TooManyPairs(pairs));
    }
    Ok(())
}

fn to_outcome(inst: &BilevelInstance, best: Best, infeasible: Status) -> OracleOutcome {
    match best {
        Best::None => OracleOutcome::bare(infeasible),
        Best::Unbounded => OracleOutcome::bare(Status::Unbounded),
        Best::Point(value, z) => {
            let x = z[..inst.n_u].to_vec();
            let v = z[inst.n_u..inst.n_u + inst.n_l].to_vec();
            OracleOutcome {
                status: Status::Optimal,
                objective: Some(value),
                x: Some(x),
                v: Some(v),
            }
        }
    }
}

fn hpr_infeasible(inst: &BilevelInstance) -> bool {
    let mut lp = LinearProgram::new(inst.n_u + inst.n_l);
    free_x(inst, &mut lp);
    for k in 0..inst.m_u {
        lp.add_row(
            concat(&inst.g[k], &inst.h[k]),
            Relation::Le,
            inst.q[k].clone(),
        );
    }
    for i in 0..inst.m_l {
        lp.add_row(
            concat(&inst.a[i], &inst.b[i]),
            Relation::Le,
            inst.b_rhs[i].clone(),
        );
    }
    solve_lp(&lp).status == LpStatus::Infeasible
}

fn dual_system(inst: &BilevelInstance, k: usize) -> DualSystem {
    DualSystem {
        k,
        dim: inst.m_l + 1,
        rows: (0..inst.n_l)
            .map(|j| HalfSpace {
                coeffs: (0..inst.m_l)
                    .map(|i| inst.b[i][j].clone())
                    .chain(core::iter::once(inst.d[j].clone()))
                    .collect(),
                rhs: inst.h[k][j].clone(),
            })
            .collect(),
    }
}

fn dual_system_is_empty(inst: &BilevelInstance, k: usize) -> bool {
    let s = dual_system(inst, k);
    let mut lp = LinearProgram::new(s.dim);
    for h in s.rows {
        lp.add_row(h.coeffs, Relation::Ge, h.rhs);
    }
    solve_lp(&lp).status == LpStatus::Infeasible
}

fn concat(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    a.iter().chain(b).cloned().collect()
}

fn free_x(inst: &BilevelInstance, lp: &mut LinearProgram) {
    for j in 0..inst.n_u {
        if inst.is_x_free(j) {
            lp.bounds[j] = VarBound::Free;
        }
    }
}

struct Robust<'a> {
    delta: &'a Rational,
    /// Vertices of each `D_k` as points `(α, β)`.
    vertices: Vec<Vec<Vec<Rational>>>,
}

enum Best {
    None,
    Unbounded,
    Point(Rational, Vec<Rational>),
}

impl Best {
    fn value(&self) -> Option<&Rational> {
        match self {
            Best::Point(v, _) => Some(v),
            _ => None,
        }
    }
}

/// Variables `(x, v, λ, σ)`; one LP per pattern.
fn search_patterns(inst: &BilevelInstance, robust: Option<&Robust<'_>>) -> Best {
    let (nu, nl, ml) = (inst.n_u, inst.n_l, inst.m_l);
    let n = nu + 2 * nl + ml;
    let lam = |i: usize| nu + nl + i;
    let sig = |j: usize| nu + nl + ml + j;

    let mut base = LinearProgram::new(n);
    free_x(inst, &mut base);
    for j in 0..nu {
        base.objective[j] = inst.c_x[j].clone();
    }
    for j in 0..nl {
        base.objective[nu + j] = inst.c_y[j].clone();
    }
    let xv = |gx: &[Rational], hv: &[Rational]| {
        let mut c = zeros(n);
        c[..nu].clone_from_slice(gx);
        c[nu..nu + nl].clone_from_slice(hv);
        c
    };
    for k in 0..inst.m_u {
        base.add_row(xv(&inst.g[k], &inst.h[k]), Relation::Le, inst.q[k].clone());
    }
    for i in 0..ml {
        base.add_row(
            xv(&inst.a[i], &inst.b[i]),
            Relation::Le,
            inst.b_rhs[i].clone(),
        );
    }
    for j in 0..nl {
        let mut c = zeros(n);
        for i in 0..ml {
            c[lam(i)] = inst.b[i][j].clone();
        }
        c[sig(j)] = -Rational::one();
        base.add_row(c, Relation::Eq, -&inst.d[j]);
    }

    let unit = |p: usize| {
        let mut c = zeros(n);
        c[p] = Rational::one();
        c
    };
    let mut best = Best::None;
    for mask in 0u32..(1u32 << (ml + nl)) {
        let mut lp = base.clone();
        for i in 0..ml {
            if mask & (1 << i) != 0 {
                lp.add_row(
                    xv(&inst.a[i], &inst.b[i]),
                    Relation::Eq,
                    inst.b_rhs[i].clone(),
                );
            } else {
                lp.add_row(unit(lam(i)), Relation::Eq, Rational::zero());
            }
        }
        for j in 0..nl {
            if mask & (1 << (ml + j)) != 0 {
                lp.add_row(unit(nu + j), Relation::Eq, Rational::zero());
            } else {
                lp.add_row(unit(sig(j)), Relation::Eq, Rational::zero());
            }
        }
        let mut enforced = vec![false; inst.m_u];
        if explore(inst, robust, &mut lp, &mut enforced, &mut best) {
            return Best::Unbounded;
        }
    }
    if let Best::Point(_, z) = &best {
        assert!(
            certify(inst, robust, z),
            "oracle optimum failed certification"
        );
    }
    best
}

/// Depth-first over vertex choices; returns true on a certified unbounded
/// direction.
fn explore(
    inst: &BilevelInstance,
    robust: Option<&Robust<'_>>,
    lp: &mut LinearProgram,
    enforced: &mut [bool],
    best: &mut Best,
) -> bool {
    let res = solve_lp(lp);
    let branch_k = match res.status {
        LpStatus::Infeasible => return false,
        LpStatus::Unbounded => match robust {
            None => return true,
            Some(_) => match enforced.iter().position(|e| !e) {
                None => return true,
                Some(k) => k,
            },
        },
        LpStatus::Optimal => {
            if best.value().is_some_and(|b| &res.objective >= b) {
                return false;
            }
            let z = &res.primal;
            let violated =
                robust.and_then(|r| (0..inst.m_u).find(|&k| !robust_at(inst, k, z, r.delta)));
            match violated {
                None => {
                    *best = Best::Point(res.objective.clone(), res.primal.clone());
                    return false;
                }
                Some(k) => k,
            }
        }
    };
    let r = robust.expect("branching requires robustness data");
    debug_assert!(!enforced[branch_k]);
    enforced[branch_k] = true;
    for vertex in &r.vertices[branch_k] {
        let (coeffs, rhs) = certificate_row(inst, branch_k, vertex, r.delta, lp.num_vars());
        lp.add_row(coeffs, Relation::Le, rhs);
        let unbounded = explore(inst, robust, lp, enforced, best);
        lp.constraints.pop();
        if unbounded {
            enforced[branch_k] = false;
            return true;
        }
    }
    enforced[branch_k] = false;
    false
}

/// `α·(b - Ax) + β(d·v + δ) <= q_k - G_k x` over `(x, v, λ, σ)`.
fn certificate_row(
    inst: &BilevelInstance,
    k: usize,
    vertex: &[Rational],
    delta: &Rational,
    n: usize,
) -> (Vec<Rational>, Rational) {
    let (beta, alpha) = vertex.split_last().expect("β present");
    let mut c = zeros(n);
    for j in 0..inst.n_u {
        let mut s = inst.g[k][j].clone();
        for i in 0..inst.m_l {
            s -= &alpha[i] * &inst.a[i][j];
        }
        c[j] = s;
    }
    for j in 0..inst.n_l {
        c[inst.n_u + j] = beta * &inst.d[j];
    }
    let rhs = &inst.q[k] - dot(alpha, &inst.b_rhs) - beta * delta;
    (c, rhs)
}

/// Worst-case check of constraint `k` over the near-optimal set at `z`.
fn robust_at(inst: &BilevelInstance, k: usize, z: &[Rational], delta: &Rational) -> bool {
    let x = &z[..inst.n_u];
    let v = &z[inst.n_u..inst.n_u + inst.n_l];
    let mut lp = LinearProgram::new(inst.n_l);
    lp.objective = inst.h[k].iter().map(|h| -h).collect();
    for i in 0..inst.m_l {
        lp.add_row(
            inst.b[i].clone(),
            Relation::Le,
            &inst.b_rhs[i] - dot(&inst.a[i], x),
        );
    }
    lp.add_row(inst.d.clone(), Relation::Le, dot(&inst.d, v) + delta);
    let res = solve_lp(&lp);
    match res.status {
        // The near-optimal set contains v, so it is never empty here.
        LpStatus::Infeasible => true,
        LpStatus::Unbounded => false,
        LpStatus::Optimal => -res.objective <= &inst.q[k] - dot(&inst.g[k], x),
    }
}

fn certify(inst: &BilevelInstance, robust: Option<&Robust<'_>>, z: &[Rational]) -> bool {
    let (nu, nl, ml) = (inst.n_u, inst.n_l, inst.m_l);
    let x = &z[..nu];
    let v = &z[nu..nu + nl];
    let lambda = &z[nu + nl..nu + nl + ml];
    let sigma = &z[nu + nl + ml..];
    let nonneg = |s: &[Rational]| s.iter().all(|c| !c.is_negative());
    let x_ok = (0..nu).all(|j| inst.is_x_free(j) || !x[j].is_negative());
    if !(x_ok && nonneg(v) && nonneg(lambda) && nonneg(sigma)) {
        return false;
    }
    let upper_ok = (0..inst.m_u).all(|k| dot(&inst.g[k], x) + dot(&inst.h[k], v) <= inst.q[k]);
    let lower_ok = (0..ml).all(|i| {
        let slack = &inst.b_rhs[i] - dot(&inst.a[i], x) - dot(&inst.b[i], v);
        !slack.is_negative() && (slack.is_zero() || lambda[i].is_zero())
    });
    let stationary = (0..nl).all(|j| {
        let s = (0..ml).fold(inst.d[j].clone(), |acc, i| acc + &inst.b[i][j] * &lambda[i]);
        s == sigma[j] && (v[j].is_zero() || sigma[j].is_zero())
    });
    let robust_ok = robust.is_none_or(|r| (0..inst.m_u).all(|k| robust_at(inst, k, z, r.delta)));
    upper_ok && lower_ok && stationary && robust_ok
}

/// Every vertex of `system`, found by solving each square subsystem of
/// tight constraints (rows and nonnegativity bounds). Sorted, deduplicated.
pub fn vertices_by_subsets(system: &DualSystem) -> Result<Vec<Vec<Rational>>, OracleError> {
    let dim = system.dim;
    if dim > MAX_SUBSET_DIM {
        return Err(OracleError::TooManyVariables(dim));
    }
    let mut all: Vec<(Vec<Rational>, Rational)> = system
        .rows
        .iter()
        .map(|h| (h.coeffs.clone(), h.rhs.clone()))
        .collect();
    for j in 0..dim {
        let mut e = zeros(dim);
        e[j] = Rational::one();
        all.push((e, Rational::zero()));
    }

    let mut out: Vec<Vec<Rational>> = Vec::new();
    let mut pick: Vec<usize> = (0..dim).collect();
    loop {
        let rows: Vec<&(Vec<Rational>, Rational)> = pick.iter().map(|&i| &all[i]).collect();
        if let Some(z) = solve_square(&rows) {
            if system.contains(&z) && !out.contains(&z) {
                out.push(z);
            }
        }
        if !next_combination(&mut pick, all.len()) {
            break;
        }
    }
    out.sort();
    Ok(out)
}

fn next_combination(pick: &mut [usize], n: usize) -> bool {
    let k = pick.len();
    let Some(i) = (0..k).rev().find(|&i| pick[i] < n - k + i) else {
        return false;
    };
    pick[i] += 1;
    for j in i + 1..k {
        pick[j] = pick[j - 1] + 1;
    }
    true
}

/// Unique solution of a square system, or `None` when singular.
fn solve_square(rows: &[&(Vec<Rational>, Rational)]) -> Option<Vec<Rational>> {
    let n = rows.len();
    let mut m: Vec<Vec<Rational>> = rows
        .iter()
        .map(|(a, b)| {
            let mut r = a.clone();
            r.push(b.clone());
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&i| !m[i][c].is_zero())?;
        m.swap(c, p);
        let pivot = m[c][c].clone();
        for j in c..=n {
            m[c][j] /= &pivot;
        }
        for i in 0..n {
            if i != c && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in c..=n {
                    let t = &f * &m[c][j];
                    m[i][j] -= t;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n].clone()).collect())
}
