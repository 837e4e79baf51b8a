//! Linear near-optimal robust bilevel instances and their transformations.
//!
//! Sign convention: the upper level minimizes `c_x·x + c_y·v` subject to
//! `Gx + Hv <= q`, `x >= 0`; the lower level minimizes `d·y` subject to
//! `Ax + By <= b`, `y >= 0`. Upper variables listed in `x_free` drop their
//! sign restriction (used by the epigraph variable of the objective-robust
//! transform).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::rational::{dot, is_canonical, zeros, Rational};

pub type Matrix = Vec<Vec<Rational>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BilevelInstance {
    pub name: String,
    pub n_u: usize,
    pub n_l: usize,
    pub m_u: usize,
    pub m_l: usize,
    pub c_x: Vec<Rational>,
    pub c_y: Vec<Rational>,
    pub g: Matrix,
    pub h: Matrix,
    pub q: Vec<Rational>,
    pub a: Matrix,
    pub b: Matrix,
    /// Lower-level right-hand side `b`.
    pub b_rhs: Vec<Rational>,
    pub d: Vec<Rational>,
    /// Upper variables without the `x >= 0` restriction; empty means none.
    pub x_free: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Length {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    RowLength {
        field: &'static str,
        row: usize,
        expected: usize,
        found: usize,
    },
    NonCanonical {
        field: &'static str,
        row: usize,
        col: Option<usize>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Length {
                field,
                expected,
                found,
            } => write!(f, "{field}: expected length {expected}, found {found}"),
            Violation::RowLength {
                field,
                row,
                expected,
                found,
            } => write!(
                f,
                "{field}[{row}]: expected {expected} columns, found {found}"
            ),
            Violation::NonCanonical { field, row, col } => match col {
                Some(c) => write!(f, "{field}[{row}][{c}]: non-canonical rational"),
                None => write!(f, "{field}[{row}]: non-canonical rational"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("lower-level row index {index} out of range (m_l = {m_l})")]
    IndexOutOfRange { index: usize, m_l: usize },
}

fn check_vec(out: &mut Vec<Violation>, field: &'static str, v: &[Rational], n: usize) {
    if v.len() != n {
        out.push(Violation::Length {
            field,
            expected: n,
            found: v.len(),
        });
    }
    for (i, r) in v.iter().enumerate() {
        if !is_canonical(r) {
            out.push(Violation::NonCanonical {
                field,
                row: i,
                col: None,
            });
        }
    }
}

fn check_mat(out: &mut Vec<Violation>, field: &'static str, m: &Matrix, rows: usize, cols: usize) {
    if m.len() != rows {
        out.push(Violation::Length {
            field,
            expected: rows,
            found: m.len(),
        });
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != cols {
            out.push(Violation::RowLength {
                field,
                row: i,
                expected: cols,
                found: row.len(),
            });
        }
        for (j, r) in row.iter().enumerate() {
            if !is_canonical(r) {
                out.push(Violation::NonCanonical {
                    field,
                    row: i,
                    col: Some(j),
                });
            }
        }
    }
}

/// Every dimension mismatch and non-canonical entry; empty iff well formed.
pub fn validate(inst: &BilevelInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    check_vec(&mut out, "c_x", &inst.c_x, inst.n_u);
    check_vec(&mut out, "c_y", &inst.c_y, inst.n_l);
    check_mat(&mut out, "G", &inst.g, inst.m_u, inst.n_u);
    check_mat(&mut out, "H", &inst.h, inst.m_u, inst.n_l);
    check_vec(&mut out, "q", &inst.q, inst.m_u);
    check_mat(&mut out, "A", &inst.a, inst.m_l, inst.n_u);
    check_mat(&mut out, "B", &inst.b, inst.m_l, inst.n_l);
    check_vec(&mut out, "b", &inst.b_rhs, inst.m_l);
    check_vec(&mut out, "d", &inst.d, inst.n_l);
    if !inst.x_free.is_empty() && inst.x_free.len() != inst.n_u {
        out.push(Violation::Length {
            field: "x_free",
            expected: inst.n_u,
            found: inst.x_free.len(),
        });
    }
    out
}

impl BilevelInstance {
    /// An all-zero instance of the given dimensions.
    pub fn zeros(name: &str, n_u: usize, n_l: usize, m_u: usize, m_l: usize) -> Self {
        BilevelInstance {
            name: name.into(),
            n_u,
            n_l,
            m_u,
            m_l,
            c_x: zeros(n_u),
            c_y: zeros(n_l),
            g: vec![zeros(n_u); m_u],
            h: vec![zeros(n_l); m_u],
            q: zeros(m_u),
            a: vec![zeros(n_u); m_l],
            b: vec![zeros(n_l); m_l],
            b_rhs: zeros(m_l),
            d: zeros(n_l),
            x_free: Vec::new(),
        }
    }

    pub fn is_x_free(&self, j: usize) -> bool {
        self.x_free.get(j).copied().unwrap_or(false)
    }

    pub fn upper_objective(&self, x: &[Rational], v: &[Rational]) -> Rational {
        dot(&self.c_x, x) + dot(&self.c_y, v)
    }

    pub fn lower_objective(&self, v: &[Rational]) -> Rational {
        dot(&self.d, v)
    }

    /// `(Gx)_k`.
    pub fn gx(&self, k: usize, x: &[Rational]) -> Rational {
        dot(&self.g[k], x)
    }

    /// `b - Ax`, the lower-level right-hand side seen by the follower.
    pub fn lower_rhs_at(&self, x: &[Rational]) -> Vec<Rational> {
        self.b_rhs
            .iter()
            .zip(&self.a)
            .map(|(bi, ai)| bi - dot(ai, x))
            .collect()
    }

    /// Whether `(x, v)` satisfies `Ax + Bv <= b`, `v >= 0` and the sign
    /// restrictions on `x`.
    pub fn is_lower_feasible(&self, x: &[Rational], v: &[Rational]) -> bool {
        v.iter().all(|vj| !vj.is_negative())
            && (0..self.n_u).all(|j| self.is_x_free(j) || !x[j].is_negative())
            && (0..self.m_l).all(|i| dot(&self.a[i], x) + dot(&self.b[i], v) <= self.b_rhs[i])
    }

    /// Whether `(x, v)` satisfies `Gx + Hv <= q`.
    pub fn is_upper_feasible(&self, x: &[Rational], v: &[Rational]) -> bool {
        (0..self.m_u).all(|k| dot(&self.g[k], x) + dot(&self.h[k], v) <= self.q[k])
    }
}

/// How the tolerance is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RobustMode {
    /// Protect the upper-level constraints.
    ConstraintRobust,
    /// Protect only the upper objective through an epigraph variable.
    ObjectiveRobust,
    /// Protect both objective and constraints.
    Conservative,
    /// Plain optimistic bilevel problem.
    Optimistic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobustnessConfig {
    pub delta: Rational,
    pub mode: RobustMode,
}

impl RobustnessConfig {
    pub fn new(delta: Rational, mode: RobustMode) -> Self {
        RobustnessConfig { delta, mode }
    }

    /// The mode actually solved: a negative tolerance empties the near-optimal
    /// set, leaving the optimistic problem.
    pub fn effective_mode(&self) -> RobustMode {
        if self.delta.is_negative() {
            RobustMode::Optimistic
        } else {
            self.mode
        }
    }
}

/// `(α_k, β_k)` proving robustness of upper constraint `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualCertificate {
    pub alpha: Vec<Rational>,
    pub beta: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub x: Vec<Rational>,
    pub v: Vec<Rational>,
    pub lambda: Vec<Rational>,
    pub sigma: Vec<Rational>,
    pub upper_objective: Rational,
    pub lower_objective: Rational,
    /// One entry per upper constraint; empty for optimistic solutions.
    pub certificates: Vec<DualCertificate>,
}

impl Solution {
    pub fn new(
        inst: &BilevelInstance,
        x: Vec<Rational>,
        v: Vec<Rational>,
        lambda: Vec<Rational>,
        sigma: Vec<Rational>,
    ) -> Self {
        let upper_objective = inst.upper_objective(&x, &v);
        let lower_objective = inst.lower_objective(&v);
        Solution {
            x,
            v,
            lambda,
            sigma,
            upper_objective,
            lower_objective,
            certificates: Vec::new(),
        }
    }
}

/// Epigraph transform: adds a free variable `τ` as the last upper variable,
/// minimizes `τ`, and appends the row `c_x·x + c_y·z - τ <= 0`. With
/// `conservative` the original upper rows are kept ahead of it; otherwise
/// the `τ` row is the only upper constraint. Lower-level data is untouched.
pub fn to_objective_robust(inst: &BilevelInstance, conservative: bool) -> BilevelInstance {
    let n_u = inst.n_u + 1;
    let mut c_x = zeros(n_u);
    c_x[inst.n_u] = Rational::one();
    let mut x_free: Vec<bool> = (0..inst.n_u).map(|j| inst.is_x_free(j)).collect();
    x_free.push(true);

    let mut g = Vec::new();
    let mut h = Vec::new();
    let mut q = Vec::new();
    if conservative {
        for k in 0..inst.m_u {
            let mut row = inst.g[k].clone();
            row.push(Rational::zero());
            g.push(row);
            h.push(inst.h[k].clone());
            q.push(inst.q[k].clone());
        }
    }
    let mut tau_row = inst.c_x.clone();
    tau_row.push(-Rational::one());
    g.push(tau_row);
    h.push(inst.c_y.clone());
    q.push(Rational::zero());

    let a = inst
        .a
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.push(Rational::zero());
            r
        })
        .collect();

    BilevelInstance {
        name: inst.name.clone(),
        n_u,
        n_l: inst.n_l,
        m_u: g.len(),
        m_l: inst.m_l,
        c_x,
        c_y: zeros(inst.n_l),
        g,
        h,
        q,
        a,
        b: inst.b.clone(),
        b_rhs: inst.b_rhs.clone(),
        d: inst.d.clone(),
        x_free,
    }
}

/// Moves the selected lower rows (0-based) of `(A | B | b)` to the upper
/// level, appended in ascending index order.
pub fn promote_constraints(
    inst: &BilevelInstance,
    indices: &[usize],
) -> Result<BilevelInstance, InstanceError> {
    let mut selected = vec![false; inst.m_l];
    for &i in indices {
        if i >= inst.m_l {
            return Err(InstanceError::IndexOutOfRange {
                index: i,
                m_l: inst.m_l,
            });
        }
        selected[i] = true;
    }
    let mut out = inst.clone();
    out.a.clear();
    out.b.clear();
    out.b_rhs.clear();
    for i in 0..inst.m_l {
        if selected[i] {
            out.g.push(inst.a[i].clone());
            out.h.push(inst.b[i].clone());
            out.q.push(inst.b_rhs[i].clone());
        } else {
            out.a.push(inst.a[i].clone());
            out.b.push(inst.b[i].clone());
            out.b_rhs.push(inst.b_rhs[i].clone());
        }
    }
    out.m_u = out.g.len();
    out.m_l = out.a.len();
    Ok(out)
}
