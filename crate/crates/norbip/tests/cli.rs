use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use norbip::format::{load, load_point, save};
use norbip_core::driver::{check_robustness, Status};
use norbip_core::rational::{parse_rational, ratio};
use norbip_core::samples::{bounded_example, line_example};
use tempfile::TempDir;

fn norbip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_norbip"))
        .args(args)
        .output()
        .expect("spawn norbip")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Fixture {
    dir: TempDir,
    bounded: PathBuf,
    line: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let bounded = dir.path().join("bounded.json");
        let line = dir.path().join("line.json");
        save(&bounded_example(), &bounded).unwrap();
        save(&line_example(), &line).unwrap();
        Fixture { dir, bounded, line }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_then_check_round_trip() {
    let f = Fixture::new();
    for delta in ["0", "1/2", "1", "4", "0.25"] {
        let out = f.path("result.json");
        let o = norbip(&["solve", s(&f.bounded), "--delta", delta, "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(0), "delta {delta}: {}", stdout(&o));
        let c = norbip(&["check", s(&f.bounded), s(&out), "--delta", delta]);
        assert_eq!(c.status.code(), Some(0), "delta {delta}: {}", stdout(&c));
        assert!(stdout(&c).ends_with("robust\n"));

        let p = load_point(&out).unwrap();
        let d = parse_rational(delta).unwrap();
        assert!(check_robustness(&bounded_example(), &d, &p.x, &p.v).all_robust());
    }
}

#[test]
fn solve_writes_exact_json() {
    let f = Fixture::new();
    let o = norbip(&["solve", s(&f.bounded), "--delta", "1/2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "optimal");
    assert_eq!(v["objective"], "-73/3");
    assert_eq!(v["x"][0], "11/9");
    assert_eq!(v["v"][0], "23/9");
    assert_eq!(v["solution"]["certificates"].as_array().unwrap().len(), 2);
}

#[test]
fn line_example_check_reports_worst_response() {
    let f = Fixture::new();
    let sol = f.path("point.json");
    std::fs::write(&sol, r#"{"x": ["0"], "v": ["1"]}"#).unwrap();
    let o = norbip(&["check", s(&f.line), s(&sol), "--delta", "1/10"]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(
        text.contains("violated by 1/10 at worst z=[9/10]"),
        "{text}"
    );

    let out = f.path("line.result.json");
    let o = norbip(&["solve", s(&f.line), "--delta", "1/10", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let p = load_point(&out).unwrap();
    assert_eq!((p.x, p.v), (vec![ratio(1, 2)], vec![ratio(21, 20)]));
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    assert_eq!(
        norbip(&["solve", s(&f.bounded), "--delta", "5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        norbip(&["solve", s(&f.bounded), "--delta", "-1"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        norbip(&["solve", s(&f.bounded), "--delta", "1", "--node-budget", "1"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(norbip(&["solve", s(&f.bounded)]).status.code(), Some(1));
    assert_eq!(
        norbip(&["solve", s(&f.bounded), "--delta", "0.1.2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        norbip(&["solve", "missing.json", "--delta", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(norbip(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(norbip(&["--help"]).status.code(), Some(0));

    let bad = f.path("bad.json");
    std::fs::write(&bad, r#"{"name": "x", "n_u": 1}"#).unwrap();
    let o = norbip(&["radius", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json"));
}

#[test]
fn radius_and_vertices() {
    let f = Fixture::new();
    let o = norbip(&["radius", s(&f.bounded)]);
    assert_eq!((o.status.code(), stdout(&o)), (Some(0), "4\n".to_string()));
    let o = norbip(&["radius", s(&f.line)]);
    assert_eq!(
        (o.status.code(), stdout(&o)),
        (Some(0), "inf\n".to_string())
    );

    let csv = f.path("v.csv");
    let o = norbip(&["vertices", s(&f.bounded), "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn generate_writes_manifest_and_instances() {
    let f = Fixture::new();
    let dir = f.path("gen");
    let o = norbip(&[
        "generate",
        "--dims",
        "2,2,2,2",
        "--count",
        "4",
        "--seed",
        "9",
        "--outdir",
        s(&dir),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let mut rdr = csv::Reader::from_path(dir.join("manifest.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        [
            "seed",
            "n_u",
            "n_l",
            "m_u",
            "m_l",
            "kept",
            "rejection_stage",
            "file",
            "rng",
            "denominator"
        ]
    );
    let mut kept = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[0], rec[0].parse::<u64>().unwrap().to_string());
        if &rec[5] == "true" {
            kept += 1;
            let inst = load(&dir.join(&rec[7])).unwrap();
            assert_eq!((inst.n_u, inst.m_l), (2, 2));
            assert_eq!(
                inst,
                norbip_core::generate::generate(
                    norbip_core::generate::Dims::square(2),
                    rec[0].parse().unwrap()
                )
            );
        } else {
            assert!(rec[6].starts_with("dual_adversarial_") || &rec[6] == "high_point");
        }
    }
    assert_eq!(kept, 4);
}

#[test]
fn feasibility_sweep_is_monotone() {
    let f = Fixture::new();
    let out = f.path("sweep.csv");
    let o = norbip(&[
        "experiment",
        "feasibility-sweep",
        "--deltas",
        "0.01,0.1,1,3,12",
        "--dims",
        "2,2,2,2",
        "--count",
        "12",
        "--seed",
        "5",
        "--threads",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let mut rdr = csv::ReaderBuilder::new().from_path(&out).unwrap();
    assert_eq!(&rdr.headers().unwrap()[1], "1/100");
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(&rows[0][0], "delta_decimal");
    assert_eq!(&rows[1][0], "infeasible");
    let infeasible: Vec<usize> = rows[1].iter().skip(1).map(|c| c.parse().unwrap()).collect();
    assert!(
        infeasible.windows(2).all(|w| w[0] <= w[1]),
        "{infeasible:?}"
    );
    let per_seed: Vec<_> = rows.iter().filter(|r| r[0].starts_with("seed:")).collect();
    assert_eq!(per_seed.len(), 12);
    for r in per_seed {
        let infeasible: Vec<bool> = r
            .iter()
            .skip(1)
            .map(|c| c != Status::Optimal.to_string() && c != Status::Unbounded.to_string())
            .collect();
        assert!(infeasible.windows(2).all(|w| !w[0] || w[1]), "{r:?}");
    }
}
