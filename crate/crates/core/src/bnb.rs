//! Depth-first branch-and-bound over complementarity and disjunction
//! decisions of an [`ExtendedModel`].
//!
//! Node LPs relax every unresolved complementarity pair and disjunction.
//! A pair is resolved by fixing one side to zero; a disjunction by enforcing
//! one of its vertex rows (one child per vertex). No big-M constants appear
//! anywhere.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_traits::{Signed, Zero};

use crate::lp::{solve_lp, Constraint, LinearProgram, LpStatus, Relation};
use crate::model::ExtendedModel;
use crate::rational::{dot, format_rational, zeros, Rational};

pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BnbOptions {
    /// Maximum number of node LPs solved.
    pub node_budget: u64,
    /// Record one [`LogEntry`] per node.
    pub record_log: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions {
            node_budget: DEFAULT_NODE_BUDGET,
            record_log: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompState {
    Unresolved,
    /// The expression side is fixed to zero.
    LeftZero,
    /// The variable side is fixed to zero.
    RightZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DisjunctionState {
    Unresolved,
    /// Vertex row `l` is enforced.
    Enforced(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Root,
    CompExpr(usize),
    CompVar(usize),
    Enforce { k: usize, vertex: usize },
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Root => f.write_str("root"),
            Decision::CompExpr(i) => write!(f, "comp{}:expr=0", i),
            Decision::CompVar(i) => write!(f, "comp{}:var=0", i),
            Decision::Enforce { k, vertex } => write!(f, "disj{}:vertex{}", k, vertex),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub comp: Vec<CompState>,
    pub disjunction: Vec<DisjunctionState>,
    /// LP bound of the parent; `None` at the root (−∞).
    pub parent_bound: Option<Rational>,
    pub depth: usize,
    pub decision: Decision,
}

impl Node {
    fn root(model: &ExtendedModel) -> Self {
        Node {
            comp: alloc::vec![CompState::Unresolved; model.comp_pairs.len()],
            disjunction: alloc::vec![DisjunctionState::Unresolved; model.disjunctions.len()],
            parent_bound: None,
            depth: 0,
            decision: Decision::Root,
        }
    }

    fn is_resolved(&self) -> bool {
        self.comp.iter().all(|c| *c != CompState::Unresolved)
            && self
                .disjunction
                .iter()
                .all(|d| *d != DisjunctionState::Unresolved)
    }

    fn child(&self, bound: Option<Rational>, decision: Decision) -> Node {
        let mut n = self.clone();
        match decision {
            Decision::CompExpr(i) => n.comp[i] = CompState::LeftZero,
            Decision::CompVar(i) => n.comp[i] = CompState::RightZero,
            Decision::Enforce { k, vertex } => {
                n.disjunction[k] = DisjunctionState::Enforced(vertex)
            }
            Decision::Root => {}
        }
        n.parent_bound = bound;
        n.depth += 1;
        n.decision = decision;
        n
    }

    /// The node LP: base rows plus every fixing and enforced row.
    pub fn lp(&self, model: &ExtendedModel) -> LinearProgram {
        let mut lp = model.base_lp();
        let n = model.n_vars();
        for (i, s) in self.comp.iter().enumerate() {
            let pair = &model.comp_pairs[i];
            match s {
                CompState::Unresolved => {}
                CompState::LeftZero => lp.constraints.push(Constraint {
                    coeffs: pair.expr.coeffs.clone(),
                    relation: Relation::Eq,
                    rhs: -&pair.expr.constant,
                }),
                CompState::RightZero => {
                    let mut c = zeros(n);
                    c[pair.var] = Rational::from_integer(1.into());
                    lp.constraints.push(Constraint {
                        coeffs: c,
                        relation: Relation::Eq,
                        rhs: Rational::zero(),
                    });
                }
            }
        }
        for (k, s) in self.disjunction.iter().enumerate() {
            if let DisjunctionState::Enforced(l) = s {
                lp.constraints.push(model.disjunctions[k].rows[*l].clone());
            }
        }
        lp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BnbStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node budget exhausted before the tree was closed.
    Budget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub node: u64,
    pub depth: usize,
    pub decision: Decision,
    pub bound: Option<Rational>,
    pub status: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BnbOutcome {
    pub status: BnbStatus,
    /// Best point found (exactly feasible for the model).
    pub point: Option<Vec<Rational>>,
    pub objective: Option<Rational>,
    /// Lowest bound over open nodes when the budget ran out.
    pub bound: Option<Rational>,
    /// Per disjunction, a vertex whose row holds at `point`.
    pub active_vertices: Vec<usize>,
    pub nodes: u64,
    pub log: Vec<LogEntry>,
}

struct Open {
    node: Node,
    seq: u64,
}

impl Open {
    // Larger = explored first: deeper, then lower parent bound, then older.
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.node
            .depth
            .cmp(&other.node.depth)
            .then_with(
                || match (&self.node.parent_bound, &other.node.parent_bound) {
                    (None, None) => Ordering::Equal,
                    (None, Some(_)) => Ordering::Greater,
                    (Some(_), None) => Ordering::Less,
                    (Some(a), Some(b)) => b.cmp(a),
                },
            )
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

/// Solves `model` to exact global optimality, or reports infeasibility,
/// unboundedness, or an exhausted node budget.
pub fn solve(model: &ExtendedModel, opts: &BnbOptions) -> BnbOutcome {
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Open {
        node: Node::root(model),
        seq,
    });
    let mut incumbent: Option<(Rational, Vec<Rational>)> = None;
    let mut nodes = 0u64;
    let mut log = Vec::new();

    let finish = |status: BnbStatus,
                  incumbent: Option<(Rational, Vec<Rational>)>,
                  bound: Option<Rational>,
                  nodes: u64,
                  log: Vec<LogEntry>| {
        let (objective, point) = match incumbent {
            Some((o, p)) if status != BnbStatus::Unbounded => (Some(o), Some(p)),
            _ => (None, None),
        };
        let active_vertices = match &point {
            Some(z) => (0..model.disjunctions.len())
                .map(|k| {
                    model
                        .satisfied_vertex(k, z)
                        .expect("incumbent satisfies every disjunction")
                })
                .collect(),
            None => Vec::new(),
        };
        BnbOutcome {
            status,
            point,
            objective,
            bound,
            active_vertices,
            nodes,
            log,
        }
    };

    while let Some(Open { node, .. }) = heap.pop() {
        if let (Some((best, _)), Some(pb)) = (&incumbent, &node.parent_bound) {
            if pb >= best {
                continue;
            }
        }
        if nodes >= opts.node_budget {
            heap.push(Open { node, seq: 0 });
            let mut bound: Option<Rational> = incumbent.as_ref().map(|(o, _)| o.clone());
            let mut unbounded_below = false;
            for o in heap.iter() {
                match &o.node.parent_bound {
                    None => unbounded_below = true,
                    Some(b) => {
                        if bound.as_ref().is_none_or(|cur| b < cur) {
                            bound = Some(b.clone());
                        }
                    }
                }
            }
            if unbounded_below {
                bound = None;
            }
            return finish(BnbStatus::Budget, incumbent, bound, nodes, log);
        }
        nodes += 1;
        let lp = node.lp(model);
        let res = solve_lp(&lp);
        let mut record = |bound: Option<Rational>, status: &'static str| {
            if opts.record_log {
                log.push(LogEntry {
                    node: nodes,
                    depth: node.depth,
                    decision: node.decision.clone(),
                    bound,
                    status,
                });
            }
        };

        match res.status {
            LpStatus::Infeasible => {
                record(None, "infeasible");
                continue;
            }
            LpStatus::Unbounded => {
                if node.is_resolved() {
                    record(None, "unbounded");
                    return finish(BnbStatus::Unbounded, None, None, nodes, log);
                }
                record(None, "branch-unbounded");
                let decisions = unbounded_branching(model, &node);
                for d in decisions {
                    seq += 1;
                    heap.push(Open {
                        node: node.child(None, d),
                        seq,
                    });
                }
                continue;
            }
            LpStatus::Optimal => {}
        }

        let value = res.objective.clone();
        if let Some((best, _)) = &incumbent {
            if &value >= best {
                record(Some(value), "pruned");
                continue;
            }
        }
        let z = &res.primal;
        let decisions = branching(model, &node, z);
        if decisions.is_empty() {
            debug_assert!(model.is_feasible(z));
            record(Some(value.clone()), "incumbent");
            incumbent = Some((value, res.primal));
            continue;
        }
        record(Some(value.clone()), "branch");
        // Pushed in reverse so that, among siblings with equal keys, the
        // first decision is explored first.
        for d in decisions.into_iter().rev() {
            seq += 1;
            heap.push(Open {
                node: node.child(Some(value.clone()), d),
                seq: u64::MAX - seq,
            });
        }
    }

    match incumbent {
        Some(_) => finish(BnbStatus::Optimal, incumbent, None, nodes, log),
        None => finish(BnbStatus::Infeasible, None, None, nodes, log),
    }
}

/// Children for a node whose LP optimum `z` is known; empty when `z` is
/// feasible for the model.
fn branching(model: &ExtendedModel, node: &Node, z: &[Rational]) -> Vec<Decision> {
    // Largest complementarity violation first; ties by lowest index.
    let mut worst: Option<(usize, Rational)> = None;
    for (i, pair) in model.comp_pairs.iter().enumerate() {
        if node.comp[i] != CompState::Unresolved {
            continue;
        }
        let product = pair.expr.eval(z) * &z[pair.var];
        if product.is_positive() && worst.as_ref().is_none_or(|(_, w)| &product > w) {
            worst = Some((i, product));
        }
    }
    if let Some((i, _)) = worst {
        return alloc::vec![Decision::CompExpr(i), Decision::CompVar(i)];
    }

    // Then the disjunction whose best vertex row is most violated.
    let mut worst: Option<(usize, Rational)> = None;
    for (k, d) in model.disjunctions.iter().enumerate() {
        if node.disjunction[k] != DisjunctionState::Unresolved {
            continue;
        }
        let best_gap = d
            .rows
            .iter()
            .map(|r| dot(&r.coeffs, z) - &r.rhs)
            .min()
            .expect("nonempty disjunction");
        if best_gap.is_positive() && worst.as_ref().is_none_or(|(_, w)| &best_gap > w) {
            worst = Some((k, best_gap));
        }
    }
    match worst {
        Some((k, _)) => (0..model.disjunctions[k].rows.len())
            .map(|vertex| Decision::Enforce { k, vertex })
            .collect(),
        None => Vec::new(),
    }
}

fn unbounded_branching(model: &ExtendedModel, node: &Node) -> Vec<Decision> {
    if let Some(i) = node.comp.iter().position(|c| *c == CompState::Unresolved) {
        return alloc::vec![Decision::CompExpr(i), Decision::CompVar(i)];
    }
    let k = node
        .disjunction
        .iter()
        .position(|d| *d == DisjunctionState::Unresolved)
        .expect("unresolved node");
    (0..model.disjunctions[k].rows.len())
        .map(|vertex| Decision::Enforce { k, vertex })
        .collect()
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.node,
            self.depth,
            self.decision,
            self.bound.as_ref().map(format_rational).unwrap_or_default(),
            self.status
        )
    }
}
