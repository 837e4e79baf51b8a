//! CSV outputs. Every rational column `c` is followed by an advisory
//! `c_decimal` column with 12 significant digits.

use std::io::Write;

use norbip_core::driver::Status;
use norbip_core::generate::{Screened, DENOMINATOR};
use norbip_core::rational::{format_rational, to_decimal_string, Rational};
use norbip_core::vertex_enum::DualPolyhedron;

use crate::format::DECIMAL_DIGITS;

fn push_exact(record: &mut Vec<String>, r: &Rational) {
    record.push(format_rational(r));
    record.push(to_decimal_string(r, DECIMAL_DIGITS));
}

/// `k, vertex_index, alpha_1, alpha_1_decimal, …, beta, beta_decimal`; `k` is
/// 0-based and an empty polyhedron contributes no rows.
pub fn write_vertices<W: Write>(
    out: W,
    m_l: usize,
    polyhedra: &[DualPolyhedron],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string(), "vertex_index".to_string()];
    for i in 1..=m_l {
        header.push(format!("alpha_{i}"));
        header.push(format!("alpha_{i}_decimal"));
    }
    header.push("beta".into());
    header.push("beta_decimal".into());
    w.write_record(&header)?;
    for p in polyhedra {
        for (l, v) in p.vertices.iter().enumerate() {
            let mut rec = vec![p.k.to_string(), l.to_string()];
            for a in &v.alpha {
                push_exact(&mut rec, a);
            }
            push_exact(&mut rec, &v.beta);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per trial: `seed, n_u, n_l, m_u, m_l, kept, rejection_stage,
/// file, rng, denominator`.
pub fn write_manifest<W: Write>(
    out: W,
    screened: &Screened,
    file_of: impl Fn(u64) -> String,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed",
        "n_u",
        "n_l",
        "m_u",
        "m_l",
        "kept",
        "rejection_stage",
        "file",
        "rng",
        "denominator",
    ])?;
    let d = screened.dims;
    for t in &screened.trials {
        w.write_record([
            t.seed.to_string(),
            d.n_u.to_string(),
            d.n_l.to_string(),
            d.m_u.to_string(),
            d.m_l.to_string(),
            t.kept().to_string(),
            t.rejection.map(|r| r.to_string()).unwrap_or_default(),
            if t.kept() {
                file_of(t.seed)
            } else {
                String::new()
            },
            "chacha8".to_string(),
            DENOMINATOR.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of one instance across all tolerances of a sweep.
pub struct SweepRow {
    pub seed: u64,
    pub statuses: Vec<Status>,
}

/// Wide table with one column per tolerance. The first rows count
/// statuses per column (`infeasible`, `optimal`, `unbounded`, `budget`);
/// then one `seed:<s>` row per instance lists its statuses.
pub fn write_sweep<W: Write>(out: W, deltas: &[Rational], rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["row".to_string()];
    header.extend(deltas.iter().map(format_rational));
    w.write_record(&header)?;
    let mut decimals = vec!["delta_decimal".to_string()];
    decimals.extend(deltas.iter().map(|d| to_decimal_string(d, DECIMAL_DIGITS)));
    w.write_record(&decimals)?;

    let count = |pred: &dyn Fn(Status) -> bool| -> Vec<String> {
        (0..deltas.len())
            .map(|j| {
                rows.iter()
                    .filter(|r| pred(r.statuses[j]))
                    .count()
                    .to_string()
            })
            .collect()
    };
    let metrics: [(&str, &dyn Fn(Status) -> bool); 4] = [
        ("infeasible", &|s: Status| s.is_infeasible()),
        ("optimal", &|s: Status| s == Status::Optimal),
        ("unbounded", &|s: Status| s == Status::Unbounded),
        ("budget", &|s: Status| s == Status::Budget),
    ];
    for (name, pred) in metrics {
        let mut rec = vec![name.to_string()];
        rec.extend(count(pred));
        w.write_record(&rec)?;
    }
    for r in rows {
        let mut rec = vec![format!("seed:{}", r.seed)];
        rec.extend(r.statuses.iter().map(|s| s.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
