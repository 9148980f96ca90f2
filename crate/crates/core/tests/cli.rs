//! End-to-end runs of the `genskel` binary.

use std::path::Path;
use std::process::Command;

fn genskel(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_genskel"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn hash(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("record.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["content_hash"].as_str().unwrap().to_string()
}

#[test]
fn survival_writes_record_csv_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let (code, stdout, _) = genskel(&[
        "survival",
        "--replicas",
        "5000",
        "--seed",
        "9",
        "--format",
        "csv",
        "--plot",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("PASS survival_within_4se"));
    let csv = std::fs::read_to_string(out.join("survival_probability.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("experiment,n,K,m,delta,epsilon,estimate,se,oracle,replicas,seed"));
    assert!(csv.lines().nth(1).unwrap().starts_with("survival,,,"));
    assert!(out.join("survival_probability.svg").exists());
}

#[test]
fn thread_count_does_not_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let mut hashes = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let (code, ..) = genskel(&[
            "branch-boundary",
            "--replicas",
            "200",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(code == 0 || code == 4);
        hashes.push(hash(&out));
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn config_file_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    std::fs::write(&cfg, "max_edges = 2\nreplicas = 1000\n").unwrap();
    let (code, ..) = genskel(&[
        "enumerate-lattice",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(Path::new(out).join("lattice_trees.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 6);

    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    let (code, _, err) = genskel(&["survival", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(code, 2, "{err}");

    std::fs::write(&cfg, "experiment = \"shapes\"\n").unwrap();
    assert_eq!(
        genskel(&["survival", "--config", cfg.to_str().unwrap()]).0,
        2
    );

    std::fs::write(&cfg, "n_grid = [50]\nvertex_cap = 10\nmax_redraws = 2\n").unwrap();
    let (code, _, err) = genskel(&["shapes", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(code, 3, "{err}");

    std::fs::write(&cfg, "n_grid = [50]\nmin_acceptance_rate = 0.5\n").unwrap();
    let (code, _, err) = genskel(&[
        "lifetime",
        "--replicas",
        "30",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(code, 4, "{err}");
    assert!(Path::new(out).join("record.json").exists());
}

#[test]
fn print_config_round_trips() {
    let (code, stdout, _) = genskel(&["gst-check", "--seed", "5", "--print-config"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("seed = 5") && stdout.contains("experiment = \"gst-check\""));
}
