use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bsalign::structio::{format_pdb_ca, AminoAcid, Chain, Residue, ResidueId, ALPHABET};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bsalign"))
}

/// An irregular backbone-like curve with consecutive spacing near 3.8 Å.
fn curve(n: usize, chain: char) -> Chain {
    let mut p = [0.0f64; 3];
    let residues = (0..n)
        .map(|i| {
            let t = i as f64;
            let dir = [(0.7 * t).sin() + 0.4, (0.45 * t + 1.0).cos(), (0.3 * t).sin() * 0.8 + 0.3];
            let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            for k in 0..3 {
                p[k] += 3.8 * dir[k] / norm;
            }
            Residue {
                aa: AminoAcid::from_letter(ALPHABET[(i * 7) % 20]),
                coord: p,
                id: ResidueId { chain, seq: i as i32 + 1, insertion: None },
            }
        })
        .collect();
    Chain { residues, label: chain.to_string() }
}

fn write_fixture(dir: &Path, name: &str, chain: &Chain) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format_pdb_ca(chain)).unwrap();
    path
}

fn align(pdb_x: &Path, pdb_y: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("align")
        .arg("--pdb-x")
        .arg(pdb_x)
        .arg("--pdb-y")
        .arg(pdb_y)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn self_alignment_recovers_the_diagonal() {
    let tmp = tempfile::tempdir().unwrap();
    let pdb = write_fixture(tmp.path(), "x.pdb", &curve(30, 'A'));
    let out = tmp.path().join("run");
    let res = align(&pdb, &pdb, &out, &["--iters", "5000", "--burnin", "1000"]);
    assert_ok(&res);

    let tsv = fs::read_to_string(out.join("map_alignment.tsv")).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 30);
    for (i, line) in lines.iter().enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f[0], "MATCH", "line {i}: {line}");
        assert_eq!(f[1], format!("A:{}", i + 1));
        assert_eq!(f[2], format!("A:{}", i + 1));
    }

    let s = summary(&out);
    assert!(s["rmsd"]["samples"]["median"].as_f64().unwrap() < 0.1);
    assert!(s["rmsd"]["map"].as_f64().unwrap() < 1e-6);
    for name in ["traces.csv", "marginal.csv", "heatmap.svg"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    assert!(!out.join("pam_posterior.csv").exists());
}

#[test]
fn summary_echoes_effective_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let pdb = write_fixture(tmp.path(), "x.pdb", &curve(12, 'A'));
    let out = tmp.path().join("run");
    assert_ok(&align(&pdb, &pdb, &out, &["--iters", "600", "--burnin", "100", "--seed", "42", "--chains", "3"]));
    let s = summary(&out);
    assert_eq!(s["seed"], 42);
    let c = &s["config"];
    assert_eq!(c["chain"]["iterations"], 600);
    assert_eq!(c["chain"]["thin"], 1);
    assert_eq!(c["chains"], 3);
    assert_eq!(c["lambda"].as_f64(), Some(7.6));
    assert_eq!(c["hyperparams"]["a_sigma"].as_f64(), Some(2.25));
    assert_eq!(c["hyperparams"]["error_model"]["kind"], "gaussian");
    assert_eq!(c["simultaneous_gaps"], true);
    assert_eq!(c["pam_grid"].as_array().unwrap().len(), 21);
    assert!(s["gap_posterior_means"]["open"].as_f64().unwrap() > 0.0);
    let traces = fs::read_to_string(out.join("traces.csv")).unwrap();
    assert_eq!(traces.lines().count(), 1 + 3 * 500);
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let x = write_fixture(tmp.path(), "x.pdb", &curve(20, 'A'));
    let y = write_fixture(tmp.path(), "y.pdb", &curve(24, 'B'));
    let args = ["--chain-y", "B", "--iters", "1500", "--burnin", "300", "--seed", "7"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_ok(&align(&x, &y, &a, &args));
    assert_ok(&align(&x, &y, &b, &args));
    assert_eq!(fs::read(a.join("traces.csv")).unwrap(), fs::read(b.join("traces.csv")).unwrap());
}

#[test]
fn missing_input_exits_two_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere.pdb");
    let res = align(&missing, &missing, &tmp.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("nowhere.pdb"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn unknown_chain_is_a_single_line_error() {
    let tmp = tempfile::tempdir().unwrap();
    let pdb = write_fixture(tmp.path(), "x.pdb", &curve(10, 'A'));
    let res = align(&pdb, &pdb, &tmp.path().join("out"), &["--chain-x", "Z"]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&res.stderr).trim_end().lines().count(), 1);
}

#[test]
fn seqstruct_mode_writes_grid_posteriors() {
    let tmp = tempfile::tempdir().unwrap();
    let chain = curve(16, 'A');
    let pdb = write_fixture(tmp.path(), "x.pdb", &chain);
    let fasta = tmp.path().join("x.fasta");
    let seq: String = chain.residues.iter().map(|r| r.aa.letter()).collect();
    fs::write(&fasta, format!(">x\n{seq}\n")).unwrap();
    let out = tmp.path().join("run");
    let res = align(
        &pdb,
        &pdb,
        &out,
        &["--mode", "seqstruct", "--fasta-x", fasta.to_str().unwrap(), "--iters", "800", "--burnin", "200", "--pam-grid", "100:200:50"],
    );
    assert_ok(&res);
    let pam = fs::read_to_string(out.join("pam_posterior.csv")).unwrap();
    let total: f64 = pam.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(pam.lines().count(), 4);
    let eta = fs::read_to_string(out.join("eta_posterior.csv")).unwrap();
    assert_eq!(eta.lines().count(), 12);
    let joint = fs::read_to_string(out.join("k_eta_joint.csv")).unwrap();
    assert_eq!(joint.lines().count(), 4);
    assert_eq!(joint.lines().next().unwrap().split(',').count(), 12);
}

#[test]
fn fasta_length_mismatch_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let pdb = write_fixture(tmp.path(), "x.pdb", &curve(10, 'A'));
    let fasta = tmp.path().join("x.fasta");
    fs::write(&fasta, ">x\nACDE\n").unwrap();
    let res = align(&pdb, &pdb, &tmp.path().join("out"), &["--mode", "seqstruct", "--fasta-x", fasta.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
}

fn entropy_table(out: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(out.join("entropy.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn entropy_table_properties() {
    let tmp = tempfile::tempdir().unwrap();
    let res = bin().args(["entropy", "--out"]).arg(tmp.path()).output().unwrap();
    assert_ok(&res);
    let t = entropy_table(tmp.path());
    assert_eq!(t.len(), 21);
    assert!(t.iter().all(|row| row.len() == 11));
    let uniform = 400f64.ln();
    assert!(t.iter().all(|row| (row[0] - uniform).abs() < 1e-9));
    assert!(t.windows(2).all(|w| w[1][10] >= w[0][10]));
    // Rows are k = 100, 110, ...; columns η = 0, 0.1, ...
    let (h100, h200) = (t[0][8], t[10][10]);
    assert!((h100 - h200).abs() / h200 < 0.1, "{h100} vs {h200}");
    assert!(String::from_utf8_lossy(&res.stdout).contains("bits"));
}

#[test]
fn entropy_rejects_bad_grids() {
    let tmp = tempfile::tempdir().unwrap();
    for grid in [["--pam-grid", "300:100:10"], ["--eta-grid", "0:2:0.5"], ["--pam-grid", "x"]] {
        let res = bin().args(["entropy", "--out"]).arg(tmp.path()).args(grid).output().unwrap();
        assert_eq!(res.status.code(), Some(2), "{grid:?}");
    }
}

#[test]
fn oracle_exit_codes() {
    assert_eq!(bin().arg("oracle").output().unwrap().status.code(), Some(0));
    let flipped = bin().args(["oracle", "--flip-gap-sign"]).output().unwrap();
    assert_eq!(flipped.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&flipped.stdout).contains("FAIL"));
    assert_eq!(bin().args(["oracle", "--max-n", "6", "--max-m", "7"]).output().unwrap().status.code(), Some(2));
}
