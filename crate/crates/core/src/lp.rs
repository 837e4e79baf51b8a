//! Exact two-phase primal simplex over rationals.
//!
//! Every LP in the crate goes through [`solve_lp`]. The solver uses a dense
//! tableau and Bland's rule in both phases, so it terminates on every input,
//! including degenerate ones. Results carry exact certificates: primal and
//! dual solutions satisfying strong duality when optimal, a Farkas vector when
//! infeasible, and an improving ray when unbounded.
//!
//! Dual sign convention for `min c·x`: `y_i <= 0` on `<=` rows, `y_i >= 0` on
//! `>=` rows, free on `=` rows, and `c - Aᵀy` is nonnegative on nonnegative
//! variables and zero on free ones.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::rational::{dot, format_rational, zeros, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn flipped(self) -> Relation {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        }
    }

    /// Whether `lhs (rel) rhs` holds.
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarBound {
    NonNegative,
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// `min c·x` subject to linear rows and per-variable lower bounds of 0 or -∞.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<VarBound>,
}

impl LinearProgram {
    /// An LP over `n` nonnegative variables with a zero objective.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            objective: zeros(n),
            constraints: Vec::new(),
            bounds: vec![VarBound::NonNegative; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational) {
        assert_eq!(coeffs.len(), self.num_vars(), "row width mismatch");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Whether `x` satisfies every row and bound exactly.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars()
            && self
                .bounds
                .iter()
                .zip(x)
                .all(|(b, v)| *b == VarBound::Free || !v.is_negative())
            && self
                .constraints
                .iter()
                .all(|c| c.relation.holds(&dot(&c.coeffs, x), &c.rhs))
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "minimize")?;
        write_affine(f, &self.objective)?;
        writeln!(f)?;
        writeln!(f, "subject to")?;
        for (i, c) in self.constraints.iter().enumerate() {
            write!(f, "  r{}:", i)?;
            write_affine(f, &c.coeffs)?;
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            writeln!(f, " {} {}", rel, format_rational(&c.rhs))?;
        }
        let free: Vec<usize> = (0..self.num_vars())
            .filter(|&j| self.bounds[j] == VarBound::Free)
            .collect();
        if !free.is_empty() {
            write!(f, "free")?;
            for j in free {
                write!(f, " x{}", j)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub(crate) fn write_affine(f: &mut fmt::Formatter<'_>, coeffs: &[Rational]) -> fmt::Result {
    let mut any = false;
    for (j, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let sign = if c.is_negative() { "-" } else { "+" };
        write!(f, " {} {} x{}", sign, format_rational(&c.abs()), j)?;
        any = true;
    }
    if !any {
        write!(f, " 0")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    /// Row multipliers `y` with the dual sign pattern, `Aᵀy <= 0` on
    /// nonnegative variables, `Aᵀy = 0` on free ones, and `y·b > 0`.
    Farkas(Vec<Rational>),
    /// Direction `r` in the original variables with `r` feasible for the
    /// homogeneous rows and `c·r < 0`.
    Ray(Vec<Rational>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Optimal point, or the last basic feasible point when unbounded; empty
    /// when infeasible.
    pub primal: Vec<Rational>,
    /// One multiplier per row; meaningful when optimal.
    pub dual: Vec<Rational>,
    pub objective: Rational,
    /// Basic columns of the internal standard form, ascending.
    pub basis: Vec<usize>,
    pub certificate: Option<Certificate>,
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    /// `rows[r]` holds the constraint coefficients followed by the rhs.
    rows: Vec<Vec<Rational>>,
    /// Reduced costs followed by `-objective`.
    cost: Vec<Rational>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
}

impl Tableau {
    fn ncols(&self) -> usize {
        self.kinds.len()
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let width = self.ncols() + 1;
        let inv = self.rows[pr][pc].recip();
        if !inv.is_one() {
            for v in self.rows[pr].iter_mut() {
                if !v.is_zero() {
                    *v *= &inv;
                }
            }
        }
        let pivot_row = core::mem::take(&mut self.rows[pr]);
        let nz: Vec<usize> = (0..width).filter(|&j| !pivot_row[j].is_zero()).collect();
        for (r, row) in self.rows.iter_mut().enumerate() {
            if r == pr || row[pc].is_zero() {
                continue;
            }
            let factor = row[pc].clone();
            for &j in &nz {
                row[j] -= &factor * &pivot_row[j];
            }
        }
        if !self.cost[pc].is_zero() {
            let factor = self.cost[pc].clone();
            for &j in &nz {
                self.cost[j] -= &factor * &pivot_row[j];
            }
        }
        self.rows[pr] = pivot_row;
        self.basis[pr] = pc;
    }

    fn set_costs(&mut self, costs: &[Rational]) {
        let n = self.ncols();
        let mut red = Vec::with_capacity(n + 1);
        red.extend_from_slice(costs);
        red.push(Rational::zero());
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = &costs[b];
            if cb.is_zero() {
                continue;
            }
            for (j, v) in self.rows[r].iter().enumerate() {
                if !v.is_zero() {
                    red[j] -= cb * v;
                }
            }
        }
        self.cost = red;
    }

    /// Runs Bland's rule to optimality. Returns the unbounded entering column
    /// if one is found.
    fn optimize(&mut self, allow: impl Fn(ColKind) -> bool) -> Option<usize> {
        loop {
            let n = self.ncols();
            let q = (0..n).find(|&j| allow(self.kinds[j]) && self.cost[j].is_negative())?;
            let mut best: Option<(usize, Rational)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if !row[q].is_positive() {
                    continue;
                }
                let ratio = &row[n] / &row[q];
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        if ratio < bratio || (ratio == bratio && self.basis[r] < self.basis[br]) {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
            match best {
                None => return Some(q),
                Some((r, _)) => self.pivot(r, q),
            }
        }
    }

    fn column_values(&self) -> Vec<Rational> {
        let n = self.ncols();
        let mut vals = zeros(n);
        for (r, &b) in self.basis.iter().enumerate() {
            vals[b] = self.rows[r][n].clone();
        }
        vals
    }
}

/// Solves `lp` exactly. Deterministic: identical input gives an identical
/// result, basis included.
pub fn solve_lp(lp: &LinearProgram) -> LpResult {
    let nvars = lp.num_vars();
    let nrows = lp.constraints.len();

    // Original variable -> (plus column, optional minus column).
    let mut var_cols = Vec::with_capacity(nvars);
    let mut kinds = Vec::new();
    for b in &lp.bounds {
        let plus = kinds.len();
        kinds.push(ColKind::Structural);
        let minus = if *b == VarBound::Free {
            kinds.push(ColKind::Structural);
            Some(kinds.len() - 1)
        } else {
            None
        };
        var_cols.push((plus, minus));
    }
    let nstruct = kinds.len();

    // Normalize rows to nonnegative rhs; drop all-zero rows after checking them.
    struct NormRow<'a> {
        orig: usize,
        sign: bool, // true when negated
        relation: Relation,
        row: &'a Constraint,
    }
    let mut norm = Vec::new();
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.iter().all(Zero::is_zero) {
            if !c.relation.holds(&Rational::zero(), &c.rhs) {
                let mut y = zeros(nrows);
                y[i] = if c.rhs.is_positive() {
                    Rational::one()
                } else {
                    -Rational::one()
                };
                return infeasible(nrows, y);
            }
            continue;
        }
        let negate = c.rhs.is_negative();
        let relation = if negate {
            c.relation.flipped()
        } else {
            c.relation
        };
        norm.push(NormRow {
            orig: i,
            sign: negate,
            relation,
            row: c,
        });
    }

    // Column layout: structural, slacks (row order), artificials (row order).
    let mut slack_of = vec![None; norm.len()];
    for (r, nr) in norm.iter().enumerate() {
        if nr.relation != Relation::Eq {
            slack_of[r] = Some(kinds.len());
            kinds.push(ColKind::Slack);
        }
    }
    let mut init_col = vec![0usize; norm.len()];
    for (r, nr) in norm.iter().enumerate() {
        if nr.relation == Relation::Le {
            init_col[r] = slack_of[r].unwrap();
        } else {
            init_col[r] = kinds.len();
            kinds.push(ColKind::Artificial);
        }
    }
    let ncols = kinds.len();

    let mut rows = Vec::with_capacity(norm.len());
    for (r, nr) in norm.iter().enumerate() {
        let mut row = zeros(ncols + 1);
        for (j, a) in nr.row.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let a = if nr.sign { -a } else { a.clone() };
            let (p, m) = var_cols[j];
            if let Some(m) = m {
                row[m] = -&a;
            }
            row[p] = a;
        }
        if let Some(s) = slack_of[r] {
            row[s] = if nr.relation == Relation::Le {
                Rational::one()
            } else {
                -Rational::one()
            };
        }
        if kinds[init_col[r]] == ColKind::Artificial {
            row[init_col[r]] = Rational::one();
        }
        row[ncols] = if nr.sign {
            -&nr.row.rhs
        } else {
            nr.row.rhs.clone()
        };
        rows.push(row);
    }

    let mut tab = Tableau {
        rows,
        cost: Vec::new(),
        basis: init_col.clone(),
        kinds,
    };

    let duals_from = |tab: &Tableau, costs: &[Rational]| -> Vec<Rational> {
        let mut y = zeros(nrows);
        for (r, nr) in norm.iter().enumerate() {
            let c = init_col[r];
            let yn = &costs[c] - &tab.cost[c];
            y[nr.orig] = if nr.sign { -yn } else { yn };
        }
        y
    };

    // Phase 1.
    let has_artificial = tab.kinds.contains(&ColKind::Artificial);
    if has_artificial {
        let phase1: Vec<Rational> = tab
            .kinds
            .iter()
            .map(|k| {
                if *k == ColKind::Artificial {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        tab.set_costs(&phase1);
        let unbounded = tab.optimize(|_| true);
        debug_assert!(unbounded.is_none(), "phase 1 is bounded below by zero");
        let infeasibility = -&tab.cost[ncols];
        if infeasibility.is_positive() {
            let y = duals_from(&tab, &phase1);
            return infeasible(nrows, y);
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..tab.rows.len() {
            if tab.kinds[tab.basis[r]] != ColKind::Artificial {
                continue;
            }
            if let Some(q) = (0..ncols)
                .find(|&j| tab.kinds[j] != ColKind::Artificial && !tab.rows[r][j].is_zero())
            {
                tab.pivot(r, q);
            }
        }
    }

    // Phase 2.
    let mut costs = zeros(ncols);
    for (j, c) in lp.objective.iter().enumerate() {
        let (p, m) = var_cols[j];
        costs[p] = c.clone();
        if let Some(m) = m {
            costs[m] = -c;
        }
    }
    tab.set_costs(&costs);
    let unbounded = tab.optimize(|k| k != ColKind::Artificial);

    let col_vals = tab.column_values();
    let to_orig = |vals: &[Rational]| -> Vec<Rational> {
        var_cols
            .iter()
            .map(|&(p, m)| match m {
                Some(m) => &vals[p] - &vals[m],
                None => vals[p].clone(),
            })
            .collect()
    };
    let primal = to_orig(&col_vals);
    let objective = dot(&lp.objective, &primal);
    let mut basis = tab.basis.clone();
    basis.sort_unstable();
    debug_assert!(nstruct <= ncols);

    if let Some(q) = unbounded {
        let mut dir = zeros(ncols);
        dir[q] = Rational::one();
        for (r, &b) in tab.basis.iter().enumerate() {
            if !tab.rows[r][q].is_zero() {
                dir[b] = -&tab.rows[r][q];
            }
        }
        return LpResult {
            status: LpStatus::Unbounded,
            primal,
            dual: zeros(nrows),
            objective,
            basis,
            certificate: Some(Certificate::Ray(to_orig(&dir))),
        };
    }

    let dual = duals_from(&tab, &costs);
    LpResult {
        status: LpStatus::Optimal,
        primal,
        dual,
        objective,
        basis,
        certificate: None,
    }
}

fn infeasible(nrows: usize, farkas: Vec<Rational>) -> LpResult {
    LpResult {
        status: LpStatus::Infeasible,
        primal: Vec::new(),
        dual: zeros(nrows),
        objective: Rational::zero(),
        basis: Vec::new(),
        certificate: Some(Certificate::Farkas(farkas)),
    }
}

fn dual_sign_ok(rel: Relation, y: &Rational) -> bool {
    match rel {
        Relation::Le => !y.is_positive(),
        Relation::Ge => !y.is_negative(),
        Relation::Eq => true,
    }
}

/// `Aᵀy` for the LP's rows.
fn transpose_times(lp: &LinearProgram, y: &[Rational]) -> Vec<Rational> {
    let mut out = zeros(lp.num_vars());
    for (c, yi) in lp.constraints.iter().zip(y) {
        if yi.is_zero() {
            continue;
        }
        for (o, a) in out.iter_mut().zip(&c.coeffs) {
            if !a.is_zero() {
                *o += a * yi;
            }
        }
    }
    out
}

/// Exactly re-checks the certificate carried by `res` against `lp`: primal
/// and dual feasibility plus strong duality when optimal, the Farkas
/// inequalities when infeasible, and the improving ray when unbounded.
pub fn certify(lp: &LinearProgram, res: &LpResult) -> bool {
    match res.status {
        LpStatus::Optimal => {
            if !lp.is_feasible(&res.primal) || res.dual.len() != lp.constraints.len() {
                return false;
            }
            if !lp
                .constraints
                .iter()
                .zip(&res.dual)
                .all(|(c, y)| dual_sign_ok(c.relation, y))
            {
                return false;
            }
            let aty = transpose_times(lp, &res.dual);
            let reduced_ok = lp.bounds.iter().enumerate().all(|(j, b)| {
                let r = &lp.objective[j] - &aty[j];
                match b {
                    VarBound::NonNegative => !r.is_negative(),
                    VarBound::Free => r.is_zero(),
                }
            });
            let yb = lp
                .constraints
                .iter()
                .zip(&res.dual)
                .fold(Rational::zero(), |acc, (c, y)| acc + &c.rhs * y);
            reduced_ok && yb == res.objective && dot(&lp.objective, &res.primal) == res.objective
        }
        LpStatus::Infeasible => {
            let Some(Certificate::Farkas(y)) = &res.certificate else {
                return false;
            };
            if y.len() != lp.constraints.len() {
                return false;
            }
            if !lp
                .constraints
                .iter()
                .zip(y)
                .all(|(c, yi)| dual_sign_ok(c.relation, yi))
            {
                return false;
            }
            let aty = transpose_times(lp, y);
            let cols_ok = lp.bounds.iter().zip(&aty).all(|(b, v)| match b {
                VarBound::NonNegative => !v.is_positive(),
                VarBound::Free => v.is_zero(),
            });
            let yb = lp
                .constraints
                .iter()
                .zip(y)
                .fold(Rational::zero(), |acc, (c, yi)| acc + &c.rhs * yi);
            cols_ok && yb.is_positive()
        }
        LpStatus::Unbounded => {
            let Some(Certificate::Ray(r)) = &res.certificate else {
                return false;
            };
            if r.len() != lp.num_vars() || !lp.is_feasible(&res.primal) {
                return false;
            }
            let bounds_ok = lp
                .bounds
                .iter()
                .zip(r)
                .all(|(b, v)| *b == VarBound::Free || !v.is_negative());
            let rows_ok = lp
                .constraints
                .iter()
                .all(|c| c.relation.holds(&dot(&c.coeffs, r), &Rational::zero()));
            bounds_ok && rows_ok && dot(&lp.objective, r).is_negative()
        }
    }
}
