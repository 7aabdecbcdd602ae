use std::path::PathBuf;
use std::process::{Command, Output};

use bbl::report::ReportDocument;
use bbl::reproduce::Reproduction;
use bbl_core::oracle::{Decision, Direction, Witness};
use bbl_core::Status;

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn bbl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbl")).args(args).env_remove("CI").output().expect("spawn bbl")
}

fn json(args: &[&str]) -> (ReportDocument, i32) {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let out = bbl(&all);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let doc = ReportDocument::from_json(&stdout).unwrap_or_else(|e| panic!("{e}: {stdout}"));
    (doc, out.status.code().unwrap())
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn classify_reports_interior_sets() {
    let (doc, code) = json(&["classify", &data("hospitals.csv")]);
    assert_eq!(code, 0);
    let c = doc.classification.unwrap();
    assert_eq!((c.k_y, c.rank_xy, c.k, c.m), (5, 2, 5, 2));
    let (doc, _) = json(&["classify", &data("hypothetical1.csv")]);
    let c = doc.classification.unwrap();
    assert_eq!((c.k_y, c.rank_xy, c.extreme_failure_count), (1, 1, 4));
}

#[test]
fn empty_and_malformed_files_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = bbl(&["classify", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no groups"), "{}", stderr(&out));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "n,y,x1\n10,3,1\n10,11,1\n").unwrap();
    let out = bbl(&["classify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let out = bbl(&["classify", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_exit_codes_follow_the_verdict() {
    let (doc, code) = json(&["check", &data("hospitals.csv"), "--t", "1", "--u", "1", "--g", "flat"]);
    assert_eq!(code, 0);
    assert_eq!(doc.verdicts[0].status, Status::Proper);

    for (t, u) in [("0", "1"), ("1", "1"), ("0", "0.5"), ("1", "0.5")] {
        let (doc, code) = json(&["check", &data("hypothetical2.csv"), "--t", t, "--u", u, "--mode", "both"]);
        assert_eq!(code, 2, "t={t} u={u}");
        assert!(doc.verdicts.iter().all(|v| v.status == Status::Improper));
    }

    for file in ["hospitals.csv", "coins_1_1.csv", "single_interior.csv"] {
        let (doc, code) = json(&["check", &data(file), "--f", "dr-over-r"]);
        assert_eq!(code, 2);
        assert!(doc.verdicts[0].failed_condition().unwrap().to_string().contains("1/r"));
    }
}

#[test]
fn unknown_verdict_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("extremes.csv");
    std::fs::write(&file, "n,y,x1,x2\n3,0,1,0.5\n4,4,1,-1\n").unwrap();
    let f = file.to_str().unwrap();
    let out = bbl(&["check", f]);
    assert_eq!(out.status.code(), Some(3));
    let out = bbl(&["sample", f, "--seed", "1", "--draws", "100"]);
    assert_eq!(out.status.code(), Some(3));
    let out = bbl(&["sample", f, "--seed", "1", "--draws", "100", "--burn-in", "100", "--force-unknown"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn invalid_prior_combinations_are_errors() {
    let out = bbl(&["check", &data("hospitals.csv"), "--g", "logistic"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("intercept"), "{}", stderr(&out));
    let out = bbl(&["check", &data("hospitals.csv"), "--u", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = bbl(&["check", &data("hospitals.csv"), "--f", "bogus"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn gaussian_prior_makes_single_extreme_proper() {
    let (doc, code) = json(&["check", &data("single_extreme.csv"), "--g", "gaussian", "--g-sd", "2", "--g-mean", "-1"]);
    assert_eq!(code, 0);
    assert_eq!(doc.verdicts[0].status, Status::Proper);
}

#[test]
fn integrate_rejects_three_covariates() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("three.csv");
    std::fs::write(&file, "n,y,x1,x2,x3\n5,2,1,0.5,2\n6,3,1,1.5,-1\n").unwrap();
    let out = bbl(&["integrate", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("m <= 2"), "{}", stderr(&out));
}

#[test]
fn integrate_single_extreme_group_diverges_along_beta() {
    let (doc, code) = json(&["integrate", &data("single_extreme.csv"), "--t", "1", "--u", "1", "--g", "flat"]);
    assert_eq!(code, 0);
    let rep = doc.oracle.unwrap().report;
    assert_eq!(rep.decision, Decision::Divergent);
    assert!(matches!(rep.divergence_witness, Some(Witness::Tail { direction: Direction::Beta(_), .. })));
}

#[test]
fn integrate_interior_coins_is_finite() {
    let (doc, _) = json(&["integrate", &data("coins_1_1.csv"), "--t", "1", "--u", "1", "--g", "flat"]);
    assert_eq!(doc.oracle.unwrap().report.decision, Decision::Finite);
}

#[test]
fn integrate_single_interior_group_flags_modes() {
    let (doc, _) = json(&["integrate", &data("single_interior.csv"), "--t", "0", "--u", "0.5", "--g", "logistic"]);
    assert!(doc.verdicts.iter().all(|v| v.discrepancy_flag));
    let oracle = doc.oracle.unwrap();
    assert_eq!(oracle.literal_agrees, Some(false));
    let r = oracle.report.r_part.unwrap().log_value.exp();
    assert!((r - std::f64::consts::PI).abs() < 1e-4, "{r}");
}

#[test]
fn sample_is_deterministic_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let run = |out: &PathBuf| {
        bbl(&[
            "sample",
            &data("coins_1_1.csv"),
            "--g",
            "logistic",
            "--seed",
            "7",
            "--draws",
            "2000",
            "--out",
            out.to_str().unwrap(),
            "--format",
            "json",
        ])
    };
    let (ra, rb) = (run(&a), run(&b));
    assert_eq!(ra.status.code(), Some(0), "{}", stderr(&ra));
    let (fa, fb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(fa, fb);
    let text = String::from_utf8(fa).unwrap();
    assert!(text.starts_with("s,beta1,p1,p2\n"));
    assert_eq!(text.lines().count(), 2001);
    // Reports differ only in the draws path.
    let strip = |o: &Output| String::from_utf8_lossy(&o.stdout).replace("a.csv", "").replace("b.csv", "");
    assert_eq!(strip(&ra), strip(&rb));
}

#[test]
fn sample_refuses_improper_with_condition() {
    let out = bbl(&["sample", &data("coins_0_0.csv"), "--g", "flat", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("improper") && msg.contains("all-success"), "{msg}");
}

#[test]
fn sample_needs_seed_in_ci() {
    let out = Command::new(env!("CARGO_BIN_EXE_bbl"))
        .args(["sample", &data("coins_1_1.csv"), "--draws", "10"])
        .env("CI", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--seed"));
}

#[test]
fn hospital_summary_has_shrinkage_per_hospital() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.json");
    let out = bbl(&[
        "sample",
        &data("hospitals.csv"),
        "--seed",
        "3",
        "--draws",
        "4000",
        "--burn-in",
        "3000",
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean shrinkage B_j"));
    let doc = ReportDocument::from_json(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    let s = doc.sampler.unwrap();
    assert_eq!(s.summary.mean_shrinkage.len(), 5);
    assert!(s.summary.mean_shrinkage.iter().all(|b| *b > 0.0 && *b < 1.0));
    assert!((0.1..=0.6).contains(&s.summary.acceptance_rate));
}

#[test]
fn reproduce_coin_modes_agree() {
    let (paper, _) = json(&["reproduce", "coins", "--mode", "paper"]);
    let (corrected, _) = json(&["reproduce", "coins", "--mode", "corrected"]);
    let cells = |d: ReportDocument| match d.reproduction {
        Some(Reproduction::Coins { panels }) => panels.into_iter().map(|p| p.cells).collect::<Vec<_>>(),
        other => panic!("{other:?}"),
    };
    let p = cells(paper);
    assert_eq!(p, cells(corrected));
    assert_eq!(p[0], ["OOO", "OOO", "OOO"]);
    assert_eq!(p[2], ["XXX", "XOX", "XXX"]);
    assert_eq!(p[2], p[3]);
}

#[test]
fn reproduce_hospitals_verdicts() {
    let (doc, code) = json(&["reproduce", "hospitals"]);
    assert_eq!(code, 0);
    let Some(Reproduction::Hospitals { rows, verdicts }) = doc.reproduction else { panic!() };
    assert_eq!(rows.len(), 12);
    let got: Vec<Option<Status>> = verdicts.iter().map(|v| v.status).collect();
    assert_eq!(got, [Some(Status::Proper), Some(Status::Improper), Some(Status::Improper)]);
}

#[test]
fn reports_are_byte_identical_and_round_trip() {
    for args in [
        vec!["reproduce", "hospitals", "--mode", "both"],
        vec!["check", "builtin:hospitals", "--oracle"],
        vec!["integrate", "builtin:single-interior", "--t", "0", "--u", "0.5", "--g", "logistic"],
        vec!["sample", "builtin:coins-1-1", "--seed", "4", "--draws", "500"],
    ] {
        let mut full = args.clone();
        full.extend(["--format", "json"]);
        let first = bbl(&full).stdout;
        assert_eq!(first, bbl(&full).stdout, "{args:?}");
        let text = String::from_utf8(first).unwrap();
        let doc = ReportDocument::from_json(&text).unwrap();
        assert_eq!(doc.schema_version, bbl::report::SCHEMA_VERSION);
        assert_eq!(doc.to_json().unwrap(), text, "{args:?}");
        assert_eq!(ReportDocument::from_json(&doc.to_json().unwrap()).unwrap(), doc);
    }
}

#[test]
fn text_output_shows_the_panels() {
    let out = bbl(&["reproduce", "coins"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("panel (b) [corrected]: dr/(1+r)^2, flat g"), "{text}");
    assert!(text.contains("    0     X O O"));
}
