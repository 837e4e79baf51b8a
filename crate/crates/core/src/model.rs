//! Model builders: high-point relaxation, adversarial LPs, the optimistic
//! complementarity model, the extended disjunctive model, and the
//! strong-duality valid inequality.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::instance::BilevelInstance;
use crate::lp::{solve_lp, write_affine, Constraint, LinearProgram, LpStatus, Relation, VarBound};
use crate::rational::{dot, format_rational, zeros, ExtRational, Rational};
use crate::vertex_enum::{DualPolyhedron, DualVertex};

/// Column positions of the variable blocks `(x, v, λ, σ[, δ])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub n_u: usize,
    pub n_l: usize,
    pub m_l: usize,
    pub has_delta: bool,
}

impl VarLayout {
    pub fn of(inst: &BilevelInstance, has_delta: bool) -> Self {
        VarLayout {
            n_u: inst.n_u,
            n_l: inst.n_l,
            m_l: inst.m_l,
            has_delta,
        }
    }

    pub fn x(&self, j: usize) -> usize {
        j
    }

    pub fn v(&self, j: usize) -> usize {
        self.n_u + j
    }

    pub fn lambda(&self, i: usize) -> usize {
        self.n_u + self.n_l + i
    }

    pub fn sigma(&self, j: usize) -> usize {
        self.n_u + self.n_l + self.m_l + j
    }

    pub fn delta(&self) -> Option<usize> {
        self.has_delta.then_some(self.n_u + 2 * self.n_l + self.m_l)
    }

    pub fn n_vars(&self) -> usize {
        self.n_u + 2 * self.n_l + self.m_l + usize::from(self.has_delta)
    }

    pub fn split<'a>(
        &self,
        z: &'a [Rational],
    ) -> (
        &'a [Rational],
        &'a [Rational],
        &'a [Rational],
        &'a [Rational],
    ) {
        let (x, rest) = z.split_at(self.n_u);
        let (v, rest) = rest.split_at(self.n_l);
        let (lambda, rest) = rest.split_at(self.m_l);
        let (sigma, _) = rest.split_at(self.n_l);
        (x, v, lambda, sigma)
    }
}

/// `coeffs·z + constant`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Affine {
    pub coeffs: Vec<Rational>,
    pub constant: Rational,
}

impl Affine {
    pub fn eval(&self, z: &[Rational]) -> Rational {
        dot(&self.coeffs, z) + &self.constant
    }
}

/// `expr >= 0`, `z[var] >= 0`, and `expr · z[var] = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompPair {
    pub expr: Affine,
    pub var: usize,
}

/// At least one of `rows` (all `<=`) must hold; row `l` comes from vertex `l`
/// of the `k`-th dual polyhedron.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disjunction {
    pub k: usize,
    pub vertices: Vec<DualVertex>,
    pub rows: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeltaSpec {
    Fixed(Rational),
    /// `δ` is a nonnegative decision variable and the objective is `max δ`.
    Variable,
}

/// Single-level model solved by branch-and-bound. Minimizes `objective`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedModel {
    pub layout: VarLayout,
    pub objective: Vec<Rational>,
    pub bounds: Vec<VarBound>,
    pub rows: Vec<Constraint>,
    pub comp_pairs: Vec<CompPair>,
    pub disjunctions: Vec<Disjunction>,
    pub delta: DeltaSpec,
}

impl ExtendedModel {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    /// The LP over all linear rows, ignoring complementarity and
    /// disjunctions.
    pub fn base_lp(&self) -> LinearProgram {
        LinearProgram {
            objective: self.objective.clone(),
            constraints: self.rows.clone(),
            bounds: self.bounds.clone(),
        }
    }

    /// Exact membership test: linear rows, bounds, zero complementarity
    /// products, and one satisfied row per disjunction.
    pub fn is_feasible(&self, z: &[Rational]) -> bool {
        self.base_lp().is_feasible(z)
            && self.comp_pairs.iter().all(|p| {
                let e = p.expr.eval(z);
                !e.is_negative() && (e.is_zero() || z[p.var].is_zero())
            })
            && self.disjunctions.iter().all(|d| {
                d.rows
                    .iter()
                    .any(|r| r.relation.holds(&dot(&r.coeffs, z), &r.rhs))
            })
    }

    /// Index of the first disjunction row satisfied at `z`.
    pub fn satisfied_vertex(&self, k: usize, z: &[Rational]) -> Option<usize> {
        self.disjunctions[k]
            .rows
            .iter()
            .position(|r| r.relation.holds(&dot(&r.coeffs, z), &r.rhs))
    }
}

impl fmt::Display for ExtendedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = &self.layout;
        writeln!(
            f,
            "\\ blocks: x0..{} | v{}..{} | lambda{}..{} | sigma{}..{}{}",
            l.n_u,
            l.v(0),
            l.v(l.n_l),
            l.lambda(0),
            l.lambda(l.m_l),
            l.sigma(0),
            l.sigma(l.n_l),
            match l.delta() {
                Some(d) => alloc::format!(" | delta x{d}"),
                None => alloc::string::String::new(),
            }
        )?;
        write!(f, "{}", self.base_lp())?;
        writeln!(f, "complementarity")?;
        for (i, p) in self.comp_pairs.iter().enumerate() {
            write!(f, "  c{}:", i)?;
            write_affine(f, &p.expr.coeffs)?;
            writeln!(f, " + {} _|_ x{}", format_rational(&p.expr.constant), p.var)?;
        }
        for d in &self.disjunctions {
            writeln!(f, "disjunction k={}", d.k)?;
            for (l, r) in d.rows.iter().enumerate() {
                write!(f, "  v{}:", l)?;
                write_affine(f, &r.coeffs)?;
                writeln!(f, " <= {}", format_rational(&r.rhs))?;
            }
        }
        Ok(())
    }
}

/// `min c_x·x + c_y·v` s.t. `Gx + Hv <= q`, `Ax + Bv <= b`, `x, v >= 0`.
pub fn build_hpr(inst: &BilevelInstance) -> LinearProgram {
    let n = inst.n_u + inst.n_l;
    let mut lp = LinearProgram::new(n);
    lp.objective = inst.c_x.iter().chain(&inst.c_y).cloned().collect();
    for j in 0..inst.n_u {
        if inst.is_x_free(j) {
            lp.bounds[j] = VarBound::Free;
        }
    }
    for k in 0..inst.m_u {
        let coeffs = inst.g[k].iter().chain(&inst.h[k]).cloned().collect();
        lp.add_row(coeffs, Relation::Le, inst.q[k].clone());
    }
    for i in 0..inst.m_l {
        let coeffs = inst.a[i].iter().chain(&inst.b[i]).cloned().collect();
        lp.add_row(coeffs, Relation::Le, inst.b_rhs[i].clone());
    }
    lp
}

/// Adversarial LP of upper constraint `k` at `(x, v, δ)`, written as a
/// minimization: `min -H_k·y` s.t. `By <= b - Ax`, `d·y <= d·v + δ`,
/// `y >= 0`. The worst case `max H_k·y` is the negated optimum.
pub fn build_adversarial(
    inst: &BilevelInstance,
    k: usize,
    x: &[Rational],
    v: &[Rational],
    delta: &Rational,
) -> LinearProgram {
    let mut lp = LinearProgram::new(inst.n_l);
    lp.objective = inst.h[k].iter().map(|h| -h).collect();
    for (i, rhs) in inst.lower_rhs_at(x).into_iter().enumerate() {
        lp.add_row(inst.b[i].clone(), Relation::Le, rhs);
    }
    lp.add_row(
        inst.d.clone(),
        Relation::Le,
        inst.lower_objective(v) + delta,
    );
    lp
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Adversary {
    /// The near-optimal set is empty.
    Infeasible,
    /// `H_k·z` is unbounded over the near-optimal set.
    Unbounded,
    Optimal {
        /// `max H_k·z`.
        value: Rational,
        worst: Vec<Rational>,
        /// Optimal dual pair, a vertex of `D_k`.
        certificate: DualVertex,
    },
}

/// Solves the adversarial LP of constraint `k` and returns the worst case
/// with its dual certificate.
pub fn solve_adversarial(
    inst: &BilevelInstance,
    k: usize,
    x: &[Rational],
    v: &[Rational],
    delta: &Rational,
) -> Adversary {
    let lp = build_adversarial(inst, k, x, v, delta);
    let res = solve_lp(&lp);
    match res.status {
        LpStatus::Infeasible => Adversary::Infeasible,
        LpStatus::Unbounded => Adversary::Unbounded,
        LpStatus::Optimal => {
            let (beta, alpha) = res.dual.split_last().expect("near-optimality row present");
            Adversary::Optimal {
                value: -res.objective,
                worst: res.primal,
                certificate: DualVertex {
                    alpha: alpha.iter().map(|a| -a).collect(),
                    beta: -beta,
                },
            }
        }
    }
}

/// Solves the lower level at `x`: `min d·y` s.t. `By <= b - Ax`, `y >= 0`.
pub fn lower_level_lp(inst: &BilevelInstance, x: &[Rational]) -> LinearProgram {
    let mut lp = LinearProgram::new(inst.n_l);
    lp.objective = inst.d.clone();
    for (i, rhs) in inst.lower_rhs_at(x).into_iter().enumerate() {
        lp.add_row(inst.b[i].clone(), Relation::Le, rhs);
    }
    lp
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedOptions {
    /// Keep `Gx + Hv <= q` as explicit rows.
    pub include_upper_rows: bool,
    /// Replace the fixed tolerance by a variable `δ >= 0` and maximize it.
    pub radius_mode: bool,
    /// Optional strong-duality valid inequality.
    pub strong_duality_cut: Option<StrongDualityCut>,
}

impl Default for ExtendedOptions {
    fn default() -> Self {
        ExtendedOptions {
            include_upper_rows: true,
            radius_mode: false,
            strong_duality_cut: None,
        }
    }
}

/// Builds the extended model. With an empty `polyhedra` slice the result is
/// the optimistic complementarity model.
pub fn build_extended(
    inst: &BilevelInstance,
    polyhedra: &[DualPolyhedron],
    delta: &Rational,
    opts: &ExtendedOptions,
) -> ExtendedModel {
    let layout = VarLayout::of(inst, opts.radius_mode);
    let n = layout.n_vars();

    let mut objective = zeros(n);
    if let Some(dv) = layout.delta() {
        objective[dv] = -Rational::one();
    } else {
        for j in 0..inst.n_u {
            objective[layout.x(j)] = inst.c_x[j].clone();
        }
        for j in 0..inst.n_l {
            objective[layout.v(j)] = inst.c_y[j].clone();
        }
    }

    let mut bounds = vec![VarBound::NonNegative; n];
    for j in 0..inst.n_u {
        if inst.is_x_free(j) {
            bounds[layout.x(j)] = VarBound::Free;
        }
    }

    let mut rows = Vec::new();
    let xv_row = |gx: &[Rational], hv: &[Rational]| {
        let mut c = zeros(n);
        for j in 0..inst.n_u {
            c[layout.x(j)] = gx[j].clone();
        }
        for j in 0..inst.n_l {
            c[layout.v(j)] = hv[j].clone();
        }
        c
    };
    if opts.include_upper_rows {
        for k in 0..inst.m_u {
            rows.push(Constraint {
                coeffs: xv_row(&inst.g[k], &inst.h[k]),
                relation: Relation::Le,
                rhs: inst.q[k].clone(),
            });
        }
    }
    for i in 0..inst.m_l {
        rows.push(Constraint {
            coeffs: xv_row(&inst.a[i], &inst.b[i]),
            relation: Relation::Le,
            rhs: inst.b_rhs[i].clone(),
        });
    }
    // Stationarity: d_j + Σ_i B_ij λ_i - σ_j = 0.
    for j in 0..inst.n_l {
        let mut c = zeros(n);
        for i in 0..inst.m_l {
            c[layout.lambda(i)] = inst.b[i][j].clone();
        }
        c[layout.sigma(j)] = -Rational::one();
        rows.push(Constraint {
            coeffs: c,
            relation: Relation::Eq,
            rhs: -&inst.d[j],
        });
    }
    if let Some(cut) = &opts.strong_duality_cut {
        if let Some(row) = cut.row(inst, &layout) {
            rows.push(row);
        }
    }

    let mut comp_pairs = Vec::with_capacity(inst.m_l + inst.n_l);
    for i in 0..inst.m_l {
        let coeffs = xv_row(&inst.a[i], &inst.b[i])
            .into_iter()
            .map(|c| -c)
            .collect();
        comp_pairs.push(CompPair {
            expr: Affine {
                coeffs,
                constant: inst.b_rhs[i].clone(),
            },
            var: layout.lambda(i),
        });
    }
    for j in 0..inst.n_l {
        let mut coeffs = zeros(n);
        coeffs[layout.v(j)] = Rational::one();
        comp_pairs.push(CompPair {
            expr: Affine {
                coeffs,
                constant: Rational::zero(),
            },
            var: layout.sigma(j),
        });
    }

    let disjunctions = polyhedra
        .iter()
        .map(|p| Disjunction {
            k: p.k,
            vertices: p.vertices.clone(),
            rows: p
                .vertices
                .iter()
                .map(|vx| vertex_row(inst, &layout, p.k, vx, delta))
                .collect(),
        })
        .collect();

    ExtendedModel {
        layout,
        objective,
        bounds,
        rows,
        comp_pairs,
        disjunctions,
        delta: if opts.radius_mode {
            DeltaSpec::Variable
        } else {
            DeltaSpec::Fixed(delta.clone())
        },
    }
}

/// `α·(b - Ax) + β(d·v + δ) <= q_k - (Gx)_k`, moved into `coeffs·z <= rhs`
/// form. In radius mode `δ` is the layout's variable and `delta` is ignored.
pub fn vertex_row(
    inst: &BilevelInstance,
    layout: &VarLayout,
    k: usize,
    vx: &DualVertex,
    delta: &Rational,
) -> Constraint {
    let mut coeffs = zeros(layout.n_vars());
    for j in 0..inst.n_u {
        let alpha_a = (0..inst.m_l).fold(Rational::zero(), |acc, i| {
            if vx.alpha[i].is_zero() {
                acc
            } else {
                acc + &vx.alpha[i] * &inst.a[i][j]
            }
        });
        coeffs[layout.x(j)] = &inst.g[k][j] - alpha_a;
    }
    for j in 0..inst.n_l {
        coeffs[layout.v(j)] = &vx.beta * &inst.d[j];
    }
    let mut rhs = &inst.q[k] - dot(&vx.alpha, &inst.b_rhs);
    match layout.delta() {
        Some(dv) => coeffs[dv] = vx.beta.clone(),
        None => rhs -= &vx.beta * delta,
    }
    Constraint {
        coeffs,
        relation: Relation::Le,
        rhs,
    }
}

/// The optimistic complementarity model: the extended model without
/// disjunctions, keeping the upper rows.
pub fn build_optimistic(inst: &BilevelInstance, cut: Option<&StrongDualityCut>) -> ExtendedModel {
    build_extended(
        inst,
        &[],
        &Rational::zero(),
        &ExtendedOptions {
            include_upper_rows: true,
            radius_mode: false,
            strong_duality_cut: cut.cloned(),
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutStatus {
    /// Every bound is finite; the cut is non-trivial.
    Finite,
    /// Some `A⁺_i` is unbounded; the cut is `+∞` on the right and omitted.
    Trivial,
    /// The auxiliary region is empty: no point satisfies the relaxation with
    /// dual-feasible multipliers.
    Infeasible,
}

/// Strong-duality valid inequality `λ·b + v·d <= A⁺·λ` with the iteration
/// log of the bound-tightening loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrongDualityCut {
    pub status: CutStatus,
    /// Sharpest `A⁺` found.
    pub bounds: Vec<ExtRational>,
    /// Number of sweeps over the auxiliary LPs.
    pub sweeps: usize,
    /// Sweeps that improved at least one bound.
    pub improving_sweeps: usize,
    /// Whether the sweep cap stopped the loop before a fixpoint.
    pub capped: bool,
    /// `A⁺` after each sweep.
    pub log: Vec<Vec<ExtRational>>,
}

impl StrongDualityCut {
    /// The cut as a row of the extended model, if non-trivial.
    pub fn row(&self, inst: &BilevelInstance, layout: &VarLayout) -> Option<Constraint> {
        if self.status != CutStatus::Finite {
            return None;
        }
        let mut coeffs = zeros(layout.n_vars());
        for i in 0..inst.m_l {
            let bound = self.bounds[i].finite()?;
            coeffs[layout.lambda(i)] = &inst.b_rhs[i] - bound;
        }
        for j in 0..inst.n_l {
            coeffs[layout.v(j)] = inst.d[j].clone();
        }
        Some(Constraint {
            coeffs,
            relation: Relation::Le,
            rhs: Rational::zero(),
        })
    }

    /// Whether `(v, λ)` satisfies the cut; trivially true unless finite.
    pub fn holds(&self, inst: &BilevelInstance, v: &[Rational], lambda: &[Rational]) -> bool {
        if self.status != CutStatus::Finite {
            return true;
        }
        let lhs = dot(lambda, &inst.b_rhs) + dot(v, &inst.d);
        let rhs = self
            .bounds
            .iter()
            .zip(lambda)
            .fold(Rational::zero(), |acc, (b, l)| {
                acc + b.finite().unwrap() * l
            });
        lhs <= rhs
    }
}

pub const DEFAULT_CUT_SWEEPS: usize = 100;

/// Computes `A⁺_i = max A_i·x` over `{Gx + Hv <= q, Ax + Bv <= b,
/// d + Bᵀλ >= 0, x, v, λ >= 0}` plus every cut found so far, repeating until
/// a sweep improves no bound or `max_sweeps` is reached.
pub fn strong_duality_cut(inst: &BilevelInstance, max_sweeps: usize) -> StrongDualityCut {
    let (nu, nl, ml) = (inst.n_u, inst.n_l, inst.m_l);
    let n = nu + nl + ml;
    let mut base = LinearProgram::new(n);
    for j in 0..nu {
        if inst.is_x_free(j) {
            base.bounds[j] = VarBound::Free;
        }
    }
    let row_xv = |gx: &[Rational], hv: &[Rational]| {
        let mut c = zeros(n);
        c[..nu].clone_from_slice(gx);
        c[nu..nu + nl].clone_from_slice(hv);
        c
    };
    for k in 0..inst.m_u {
        base.add_row(
            row_xv(&inst.g[k], &inst.h[k]),
            Relation::Le,
            inst.q[k].clone(),
        );
    }
    for i in 0..ml {
        base.add_row(
            row_xv(&inst.a[i], &inst.b[i]),
            Relation::Le,
            inst.b_rhs[i].clone(),
        );
    }
    for j in 0..nl {
        let mut c = zeros(n);
        for i in 0..ml {
            c[nu + nl + i] = inst.b[i][j].clone();
        }
        base.add_row(c, Relation::Ge, -&inst.d[j]);
    }

    let mut out = StrongDualityCut {
        status: CutStatus::Finite,
        bounds: vec![ExtRational::PosInfinity; ml],
        sweeps: 0,
        improving_sweeps: 0,
        capped: false,
        log: Vec::new(),
    };
    loop {
        if out.sweeps == max_sweeps {
            out.capped = true;
            break;
        }
        out.sweeps += 1;
        let mut current = Vec::with_capacity(ml);
        for i in 0..ml {
            let mut lp = base.clone();
            lp.objective = zeros(n);
            for j in 0..nu {
                lp.objective[j] = -&inst.a[i][j];
            }
            let res = solve_lp(&lp);
            match res.status {
                LpStatus::Infeasible => {
                    out.status = CutStatus::Infeasible;
                    return out;
                }
                LpStatus::Unbounded => current.push(ExtRational::PosInfinity),
                LpStatus::Optimal => current.push(ExtRational::Finite(-res.objective)),
            }
        }
        out.log.push(current.clone());
        if current.iter().any(ExtRational::is_infinite) {
            out.status = CutStatus::Trivial;
            out.bounds = current;
            return out;
        }
        let improved = out.sweeps == 1 || current.iter().zip(&out.bounds).any(|(c, o)| c < o);
        if !improved && ml > 0 {
            break;
        }
        out.improving_sweeps += 1;
        out.bounds = current;
        if ml == 0 {
            break;
        }
        // Add λ·b + v·d - A⁺·λ <= 0 over (x, v, λ).
        let mut c = zeros(n);
        c[nu..nu + nl].clone_from_slice(&inst.d);
        for i in 0..ml {
            c[nu + nl + i] = &inst.b_rhs[i] - out.bounds[i].finite().unwrap();
        }
        base.add_row(c, Relation::Le, Rational::zero());
    }
    out
}
