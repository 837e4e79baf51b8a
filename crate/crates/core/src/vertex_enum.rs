//! Exact double-description enumeration of the dual adversarial polyhedra
//! `D_k = {(α, β) >= 0 : Bᵀα + βd >= H_k}`.
//!
//! The polyhedron is homogenized into the cone
//! `{(t, z) : t >= 0, z >= 0, a·z - rhs·t >= 0}`. The nonnegative orthant is
//! the starting cone (its extreme rays are the unit vectors); the `n_l`
//! system rows are then inserted in ascending order. Extreme rays with
//! `t > 0` are the vertices of `D_k`, those with `t = 0` its recession rays.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::instance::BilevelInstance;
use crate::rational::{dot, Rational};

/// `coeffs·z >= rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfSpace {
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
}

/// Inequality description of `D_k` over `z = (α_1, …, α_{m_l}, β)`; the
/// nonnegativity of `z` is implicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualSystem {
    pub k: usize,
    pub dim: usize,
    pub rows: Vec<HalfSpace>,
}

impl DualSystem {
    pub fn contains(&self, z: &[Rational]) -> bool {
        z.len() == self.dim
            && z.iter().all(|v| !v.is_negative())
            && self.rows.iter().all(|h| dot(&h.coeffs, z) >= h.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DualVertex {
    pub alpha: Vec<Rational>,
    pub beta: Rational,
}

impl DualVertex {
    pub fn from_point(z: &[Rational]) -> Self {
        let (beta, alpha) = z.split_last().expect("dual point has a β coordinate");
        DualVertex {
            alpha: alpha.to_vec(),
            beta: beta.clone(),
        }
    }

    pub fn to_point(&self) -> Vec<Rational> {
        let mut z = self.alpha.clone();
        z.push(self.beta.clone());
        z
    }
}

/// Generator description of `D_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualPolyhedron {
    pub k: usize,
    pub vertices: Vec<DualVertex>,
    pub ray_count: usize,
    pub empty: bool,
}

/// The `n_l` rows `Bᵀα + βd >= H_k`; independent of `(x, v, δ)`.
pub fn build_dual_polyhedron(inst: &BilevelInstance, k: usize) -> DualSystem {
    assert!(k < inst.m_u, "upper constraint index out of range");
    let rows = (0..inst.n_l)
        .map(|j| {
            let mut coeffs: Vec<Rational> = (0..inst.m_l).map(|i| inst.b[i][j].clone()).collect();
            coeffs.push(inst.d[j].clone());
            HalfSpace {
                coeffs,
                rhs: inst.h[k][j].clone(),
            }
        })
        .collect();
    DualSystem {
        k,
        dim: inst.m_l + 1,
        rows,
    }
}

/// Vertices and recession rays of a polyhedron.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generators {
    pub vertices: Vec<Vec<Rational>>,
    pub rays: Vec<Vec<Rational>>,
}

#[derive(Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn is_subset_of(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
}

struct Ray {
    coords: Vec<Rational>,
    zeros: Bits,
}

/// Scales so the first nonzero coordinate is ±1 (or `t = 1` for vertices).
fn normalize(mut v: Vec<Rational>) -> Vec<Rational> {
    if let Some(p) = v.iter().position(|c| !c.is_zero()) {
        let s = v[p].abs();
        if !s.is_one() {
            for c in v.iter_mut() {
                *c /= &s;
            }
        }
    }
    v
}

/// Runs the double-description method on `system` and splits the extreme
/// rays of the homogenized cone into vertices and recession rays. Output
/// order is a deterministic function of the row order.
pub fn generators(system: &DualSystem) -> Generators {
    let n = system.dim;
    let d = n + 1;
    let total = d + system.rows.len();

    // Starting cone: orthant in (t, z); constraint i < d is `coord_i >= 0`.
    let mut rays: Vec<Ray> = (0..d)
        .map(|i| {
            let mut coords = vec![Rational::zero(); d];
            coords[i] = Rational::one();
            let mut zeros = Bits::new(total);
            for j in 0..d {
                if j != i {
                    zeros.set(j);
                }
            }
            Ray { coords, zeros }
        })
        .collect();

    for (offset, row) in system.rows.iter().enumerate() {
        let c = d + offset;
        let mut w = Vec::with_capacity(d);
        w.push(-&row.rhs);
        w.extend(row.coeffs.iter().cloned());

        let values: Vec<Rational> = rays.iter().map(|r| dot(&w, &r.coords)).collect();
        let pos: Vec<usize> = (0..rays.len())
            .filter(|&i| values[i].is_positive())
            .collect();
        let neg: Vec<usize> = (0..rays.len())
            .filter(|&i| values[i].is_negative())
            .collect();
        if neg.is_empty() {
            for (r, v) in rays.iter_mut().zip(&values) {
                if v.is_zero() {
                    r.zeros.set(c);
                }
            }
            continue;
        }

        let mut created = Vec::new();
        for &p in &pos {
            for &q in &neg {
                let common = rays[p].zeros.and(&rays[q].zeros);
                let adjacent = (0..rays.len())
                    .all(|r| r == p || r == q || !common.is_subset_of(&rays[r].zeros));
                if !adjacent {
                    continue;
                }
                let sp = &values[p];
                let sq = -&values[q];
                let coords: Vec<Rational> = rays[q]
                    .coords
                    .iter()
                    .zip(&rays[p].coords)
                    .map(|(a, b)| sp * a + &sq * b)
                    .collect();
                let mut zeros = common;
                zeros.set(c);
                created.push(Ray {
                    coords: normalize(coords),
                    zeros,
                });
            }
        }

        let mut next = Vec::with_capacity(rays.len() - neg.len() + created.len());
        for (mut r, v) in rays.into_iter().zip(values) {
            if v.is_negative() {
                continue;
            }
            if v.is_zero() {
                r.zeros.set(c);
            }
            next.push(r);
        }
        next.extend(created);
        rays = next;
    }

    let mut vertices: Vec<Vec<Rational>> = Vec::new();
    let mut recession: Vec<Vec<Rational>> = Vec::new();
    for r in rays {
        let t = &r.coords[0];
        if t.is_positive() {
            let v: Vec<Rational> = r.coords[1..].iter().map(|c| c / t).collect();
            if !vertices.contains(&v) {
                vertices.push(v);
            }
        } else {
            let v = normalize(r.coords[1..].to_vec());
            if !recession.contains(&v) {
                recession.push(v);
            }
        }
    }
    Generators {
        vertices,
        rays: recession,
    }
}

/// Complete, duplicate-free vertex list of `D_k`; `empty` iff the system is
/// infeasible.
pub fn enumerate_vertices(system: &DualSystem) -> DualPolyhedron {
    let gens = generators(system);
    DualPolyhedron {
        k: system.k,
        empty: gens.vertices.is_empty(),
        vertices: gens
            .vertices
            .iter()
            .map(|z| DualVertex::from_point(z))
            .collect(),
        ray_count: gens.rays.len(),
    }
}

/// Rank of a set of rows, computed by exact Gaussian elimination.
pub fn rank(rows: &[Vec<Rational>]) -> usize {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let ncols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][c].clone();
        for i in (r + 1)..m.len() {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &pivot;
            for j in c..ncols {
                let delta = &f * &m[r][j];
                m[i][j] -= delta;
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

/// Whether `z` is an extreme point of the system: feasible, with tight rows
/// (including tight nonnegativity) of full rank.
pub fn is_vertex(system: &DualSystem, z: &[Rational]) -> bool {
    if !system.contains(z) {
        return false;
    }
    let mut tight: Vec<Vec<Rational>> = system
        .rows
        .iter()
        .filter(|h| dot(&h.coeffs, z) == h.rhs)
        .map(|h| h.coeffs.clone())
        .collect();
    for (j, v) in z.iter().enumerate() {
        if v.is_zero() {
            let mut e = vec![Rational::zero(); system.dim];
            e[j] = Rational::one();
            tight.push(e);
        }
    }
    rank(&tight) == system.dim
}
