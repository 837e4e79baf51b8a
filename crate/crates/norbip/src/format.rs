//! JSON files: instances, solve results, and the solution part of a result
//! read back by `check`.
//!
//! Rationals are strings (`"3/7"`, `"-2"`, `"0.25"`, `"1e-3"`); JSON
//! integers are accepted as well, JSON floats are rejected.

use std::fmt;
use std::fs;
use std::path::Path;

use norbip_core::driver::{SolveOutcome, Status};
use norbip_core::instance::{validate, BilevelInstance, RobustMode, Solution, Violation};
use norbip_core::rational::{format_rational, parse_rational, to_decimal_string, Rational};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Significant digits of the advisory decimal columns.
pub const DECIMAL_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exact(pub Rational);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Exact;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational string such as \"3/7\" or \"0.25\", or an integer")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Exact, E> {
                parse_rational(v)
                    .map(Exact)
                    .map_err(|e| E::custom(format!("{e}: {v:?}")))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Exact, E> {
                Ok(Exact(Rational::from_integer(v.into())))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Exact, E> {
                Ok(Exact(Rational::from_integer(v.into())))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Exact, E> {
                Err(E::custom(format!(
                    "floating-point number {v} is not exact; write it as a string"
                )))
            }
        }
        d.deserialize_any(V)
    }
}

fn exact_vec(v: &[Rational]) -> Vec<Exact> {
    v.iter().cloned().map(Exact).collect()
}

fn exact_mat(m: &[Vec<Rational>]) -> Vec<Vec<Exact>> {
    m.iter().map(|r| exact_vec(r)).collect()
}

fn unwrap_vec(v: Vec<Exact>) -> Vec<Rational> {
    v.into_iter().map(|e| e.0).collect()
}

fn unwrap_mat(m: Vec<Vec<Exact>>) -> Vec<Vec<Rational>> {
    m.into_iter().map(unwrap_vec).collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    name: String,
    n_u: usize,
    n_l: usize,
    m_u: usize,
    m_l: usize,
    c_x: Vec<Exact>,
    c_y: Vec<Exact>,
    #[serde(rename = "G")]
    g: Vec<Vec<Exact>>,
    #[serde(rename = "H")]
    h: Vec<Vec<Exact>>,
    q: Vec<Exact>,
    #[serde(rename = "A")]
    a: Vec<Vec<Exact>>,
    #[serde(rename = "B")]
    b_mat: Vec<Vec<Exact>>,
    b: Vec<Exact>,
    d: Vec<Exact>,
    /// Upper variables without a sign restriction; omitted when none.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    x_free: Vec<bool>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: field `{field}`: {message}")]
    Parse {
        path: String,
        field: String,
        message: String,
    },
    #[error("{path}: invalid instance: {}", list(.violations))]
    Invalid {
        path: String,
        violations: Vec<Violation>,
    },
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, path: &str) -> Result<T, LoadError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| LoadError::Parse {
        path: path.to_string(),
        field: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn instance_from_str(text: &str, origin: &str) -> Result<BilevelInstance, LoadError> {
    let f: InstanceFile = parse_json(text, origin)?;
    let inst = BilevelInstance {
        name: f.name,
        n_u: f.n_u,
        n_l: f.n_l,
        m_u: f.m_u,
        m_l: f.m_l,
        c_x: unwrap_vec(f.c_x),
        c_y: unwrap_vec(f.c_y),
        g: unwrap_mat(f.g),
        h: unwrap_mat(f.h),
        q: unwrap_vec(f.q),
        a: unwrap_mat(f.a),
        b: unwrap_mat(f.b_mat),
        b_rhs: unwrap_vec(f.b),
        d: unwrap_vec(f.d),
        x_free: f.x_free,
    };
    let violations = validate(&inst);
    if violations.is_empty() {
        Ok(inst)
    } else {
        Err(LoadError::Invalid {
            path: origin.to_string(),
            violations,
        })
    }
}

pub fn instance_to_string(inst: &BilevelInstance) -> String {
    let f = InstanceFile {
        name: inst.name.clone(),
        n_u: inst.n_u,
        n_l: inst.n_l,
        m_u: inst.m_u,
        m_l: inst.m_l,
        c_x: exact_vec(&inst.c_x),
        c_y: exact_vec(&inst.c_y),
        g: exact_mat(&inst.g),
        h: exact_mat(&inst.h),
        q: exact_vec(&inst.q),
        a: exact_mat(&inst.a),
        b_mat: exact_mat(&inst.b),
        b: exact_vec(&inst.b_rhs),
        d: exact_vec(&inst.d),
        x_free: if inst.x_free.iter().any(|f| *f) {
            inst.x_free.clone()
        } else {
            Vec::new()
        },
    };
    let mut s = serde_json::to_string_pretty(&f).expect("instance serializes");
    s.push('\n');
    s
}

pub fn load(path: &Path) -> Result<BilevelInstance, LoadError> {
    instance_from_str(&read(path)?, &path.display().to_string())
}

pub fn save(inst: &BilevelInstance, path: &Path) -> std::io::Result<()> {
    fs::write(path, instance_to_string(inst))
}

pub fn mode_name(mode: RobustMode) -> &'static str {
    match mode {
        RobustMode::ConstraintRobust => "constraint",
        RobustMode::ObjectiveRobust => "objective",
        RobustMode::Conservative => "conservative",
        RobustMode::Optimistic => "optimistic",
    }
}

pub fn parse_mode(s: &str) -> Option<RobustMode> {
    Some(match s {
        "constraint" => RobustMode::ConstraintRobust,
        "objective" => RobustMode::ObjectiveRobust,
        "conservative" => RobustMode::Conservative,
        "optimistic" => RobustMode::Optimistic,
        _ => return None,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CertificateJson {
    pub k: usize,
    pub alpha: Vec<Exact>,
    pub beta: Exact,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolutionJson {
    pub objective: Exact,
    pub objective_decimal: String,
    pub x: Vec<Exact>,
    pub v: Vec<Exact>,
    pub lambda: Vec<Exact>,
    pub sigma: Vec<Exact>,
    pub lower_objective: Exact,
    #[serde(default)]
    pub certificates: Vec<CertificateJson>,
}

impl SolutionJson {
    pub fn new(s: &Solution) -> Self {
        SolutionJson {
            objective: Exact(s.upper_objective.clone()),
            objective_decimal: to_decimal_string(&s.upper_objective, DECIMAL_DIGITS),
            x: exact_vec(&s.x),
            v: exact_vec(&s.v),
            lambda: exact_vec(&s.lambda),
            sigma: exact_vec(&s.sigma),
            lower_objective: Exact(s.lower_objective.clone()),
            certificates: s
                .certificates
                .iter()
                .enumerate()
                .map(|(k, c)| CertificateJson {
                    k,
                    alpha: exact_vec(&c.alpha),
                    beta: Exact(c.beta.clone()),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TimingJson {
    pub stage: String,
    pub microseconds: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NodesJson {
    pub optimistic: u64,
    pub extended: u64,
}

/// Result file written by `solve`. The top-level `x`/`v` duplicate the
/// solution so that `check` can read either.
#[derive(Debug, Serialize, Deserialize)]
pub struct ResultJson {
    pub instance: String,
    pub status: String,
    pub mode: String,
    pub delta: Exact,
    pub delta_decimal: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<Exact>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_decimal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Exact>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<Exact>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimistic: Option<SolutionJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hpr_objective: Option<Exact>,
    /// Lower bound left when the node budget ran out.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<Exact>,
    pub vertex_counts: Vec<usize>,
    pub ray_counts: Vec<usize>,
    pub stage_timings: Vec<TimingJson>,
    pub nodes: NodesJson,
}

impl ResultJson {
    pub fn new(inst: &BilevelInstance, mode: RobustMode, out: &SolveOutcome) -> Self {
        let sol = out.solution.as_ref();
        ResultJson {
            instance: inst.name.clone(),
            status: out.status.to_string(),
            mode: mode_name(mode).to_string(),
            delta: Exact(out.delta.clone()),
            delta_decimal: to_decimal_string(&out.delta, DECIMAL_DIGITS),
            objective: sol.map(|s| Exact(s.upper_objective.clone())),
            objective_decimal: sol.map(|s| to_decimal_string(&s.upper_objective, DECIMAL_DIGITS)),
            x: sol.map(|s| exact_vec(&s.x)),
            v: sol.map(|s| exact_vec(&s.v)),
            solution: sol.map(SolutionJson::new),
            optimistic: out.optimistic_solution.as_ref().map(SolutionJson::new),
            hpr_objective: out.hpr_objective.clone().map(Exact),
            bound: out
                .bound
                .clone()
                .filter(|_| out.status == Status::Budget)
                .map(Exact),
            vertex_counts: out.vertex_counts.clone(),
            ray_counts: out.ray_counts.clone(),
            stage_timings: out
                .stage_timings
                .iter()
                .map(|t| TimingJson {
                    stage: t.stage.name().to_string(),
                    microseconds: t.micros,
                })
                .collect(),
            nodes: NodesJson {
                optimistic: out.optimistic_nodes,
                extended: out.extended_nodes,
            },
        }
    }
}

/// The point checked by `check`: a result file or a bare `{"x", "v"}`
/// object, with an optional `mode`.
#[derive(Debug, Deserialize)]
struct PointFile {
    x: Option<Vec<Exact>>,
    v: Option<Vec<Exact>>,
    mode: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Point {
    pub x: Vec<Rational>,
    pub v: Vec<Rational>,
    pub mode: Option<RobustMode>,
}

pub fn load_point(path: &Path) -> Result<Point, LoadError> {
    let origin = path.display().to_string();
    let f: PointFile = parse_json(&read(path)?, &origin)?;
    let missing = |field: &str| LoadError::Parse {
        path: origin.clone(),
        field: field.to_string(),
        message: "missing (no solution in this file?)".to_string(),
    };
    let mode = match f.mode {
        None => None,
        Some(m) => Some(parse_mode(&m).ok_or_else(|| LoadError::Parse {
            path: origin.clone(),
            field: "mode".to_string(),
            message: format!("unknown mode {m:?}"),
        })?),
    };
    Ok(Point {
        x: unwrap_vec(f.x.ok_or_else(|| missing("x"))?),
        v: unwrap_vec(f.v.ok_or_else(|| missing("v"))?),
        mode,
    })
}
