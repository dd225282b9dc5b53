use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn meshfid() -> Command {
    Command::new(env!("CARGO_BIN_EXE_meshfid"))
}

fn run_stats(dir: &Path) -> (String, String) {
    let report = dir.join("report.txt");
    let csv = dir.join("corr.csv");
    let out = meshfid()
        .arg("stats")
        .arg("--measures")
        .arg(data("measures.csv"))
        .arg("--human")
        .arg(data("human.csv"))
        .arg("-o")
        .arg(&report)
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (std::fs::read_to_string(report).unwrap(), std::fs::read_to_string(csv).unwrap())
}

#[test]
fn stats_report_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let (report, _) = run_stats(dir.path());
    let golden = std::fs::read_to_string(data("report.golden.txt")).unwrap();
    assert_eq!(report, golden);
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

#[test]
fn rating_correlations_match_hand_computation() {
    let mut measures = csv::Reader::from_path(data("measures.csv")).unwrap();
    let header = measures.headers().unwrap().clone();
    let col = header.iter().position(|h| h == "metro_mn").unwrap();
    let mut metro = BTreeMap::new();
    for rec in measures.records() {
        let rec = rec.unwrap();
        metro.insert((rec[0].to_string(), rec[2].to_string()), rec[col].parse::<f64>().unwrap());
    }

    let mut ratings: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    let mut human = csv::Reader::from_path(data("human.csv")).unwrap();
    for rec in human.records() {
        let rec = rec.unwrap();
        if &rec[3] != "RATING" {
            continue;
        }
        ratings
            .entry((rec[4].to_string(), rec[1].to_string(), rec[5].to_string()))
            .or_default()
            .push(rec[6].parse().unwrap());
    }

    let dir = tempfile::tempdir().unwrap();
    let (_, corr) = run_stats(dir.path());
    for (simp, prefix) in [("QSLIM", "q"), ("VCLUST", "v")] {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for ((s, object, level), values) in &ratings {
            if s != simp {
                continue;
            }
            let tag = if level == "50" { "5" } else { "8" };
            x.push(metro[&(object.clone(), format!("s-{prefix}{tag}"))]);
            y.push(values.iter().sum::<f64>() / values.len() as f64);
        }
        let expected = pearson(&x, &y);
        let line = corr
            .lines()
            .find(|l| l.starts_with(&format!("metro_mn,rating,all,{simp},")))
            .unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        let r: f64 = fields[4].parse().unwrap();
        assert!((r - expected).abs() < 1e-6, "{simp}: {r} vs {expected}");
        assert_eq!(fields[6].parse::<usize>().unwrap(), x.len());
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let out = meshfid().args(["stats", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = meshfid().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let out = meshfid()
        .args(["stats", "--measures", "/nonexistent/measures.csv", "--human"])
        .arg(data("human.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
