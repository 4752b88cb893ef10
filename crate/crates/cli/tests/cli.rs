//! End-to-end runs of the `spinflux` binary on shrunken configurations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spinflux_cli::artifacts::{sha256_hex, RunManifest};

fn spinflux(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinflux"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p
}

const SMALL_NOISE: &str = r#"{"n_qubits": 4, "runs": 12, "n_steps": 32, "points": 41}"#;

fn run_small(experiment: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        experiment,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    spinflux(&args)
}

#[test]
fn writes_csv_manifest_and_summary() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"n_qubits": 5, "points": 51}"#);
    let out = d.path().join("run");
    let o = run_small("transfer-ideal", &cfg, &out, &["--workers", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("transfer-ideal.csv")).unwrap();
    assert!(csv.starts_with("Jt,fidelity,stderr\n"));
    assert_eq!(csv.lines().count(), 52);
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("peak fidelity"));
    let m = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(m.config.n_qubits, 5);
    assert_eq!(m.experiment, "transfer-ideal");
    for (file, digest) in &m.outputs {
        assert_eq!(*digest, sha256_hex(&fs::read(out.join(file)).unwrap()), "{file}");
    }
    assert!(!out.join(spinflux_cli::app::CHECKPOINT_FILE).exists());
}

#[test]
fn config_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("run");
    let bad = write_config(d.path(), r#"{"n_qubit": 5}"#);
    assert_eq!(code(&run_small("transfer-ideal", &bad, &out, &[])), 2);
    let negative = write_config(d.path(), r#"{"delta": -0.1}"#);
    assert_eq!(code(&run_small("transfer-disorder", &negative, &out, &[])), 2);
    let other = write_config(d.path(), r#"{"experiment": "ghz"}"#);
    assert_eq!(code(&run_small("transfer-ideal", &other, &out, &[])), 2);
    let ok = write_config(d.path(), "{}");
    assert_eq!(code(&run_small("transfer-ideal", &ok, &out, &["--workers", "0"])), 2);
    assert_eq!(code(&spinflux(&["transfer-ideal", "--seed", "x"])), 2);
}

#[test]
fn oversized_chain_is_a_resource_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"n_qubits": 14, "points": 3}"#);
    let o = run_small("transfer-ideal", &cfg, &d.path().join("run"), &[]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn interrupted_run_resumes_to_identical_outputs() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_NOISE);
    let full = d.path().join("full");
    assert_eq!(code(&run_small("transfer-noise", &cfg, &full, &["--workers", "2"])), 0);

    let part = d.path().join("part");
    let o = run_small("transfer-noise", &cfg, &part, &["--workers", "2", "--stop-after", "5"]);
    assert_eq!(code(&o), 3);
    let stderr = String::from_utf8_lossy(&o.stderr);
    let token = stderr
        .split("--resume ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .expect("token printed")
        .to_string();
    assert!(part.join(spinflux_cli::app::CHECKPOINT_FILE).exists());

    // a second partial step, then completion
    assert_eq!(
        code(&run_small("transfer-noise", &cfg, &part, &["--resume", &token, "--stop-after", "7"])),
        3
    );
    let o = run_small("transfer-noise", &cfg, &part, &["--resume", &token, "--workers", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(full.join("transfer-noise.csv")).unwrap(),
        fs::read(part.join("transfer-noise.csv")).unwrap()
    );
    let m = RunManifest::load(&part.join("manifest.json")).unwrap();
    assert_eq!(m.resumed_units, 12);
    assert_eq!(code(&run_small("transfer-noise", &cfg, &part, &["--resume", "0000000000000000"])), 2);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), SMALL_NOISE);
    for engine in ["deterministic", "trajectories"] {
        let csv = |workers: &str| {
            let out = d.path().join(format!("{engine}-{workers}"));
            let o = run_small("ghz", &cfg, &out, &["--workers", workers, "--engine", engine]);
            assert_eq!(code(&o), 0);
            fs::read(out.join("ghz.csv")).unwrap()
        };
        assert_eq!(csv("1"), csv("4"), "{engine}");
    }
}

#[test]
fn seed_flag_overrides_file() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"n_qubits": 4, "runs": 6, "points": 21, "seed": 1}"#);
    let run = |name: &str, extra: &[&str]| {
        let out = d.path().join(name);
        assert_eq!(code(&run_small("transfer-disorder", &cfg, &out, extra)), 0);
        (
            fs::read(out.join("transfer-disorder.csv")).unwrap(),
            RunManifest::load(&out.join("manifest.json")).unwrap(),
        )
    };
    let (a, ma) = run("a", &[]);
    let (b, mb) = run("b", &["--seed", "1"]);
    let (c, mc) = run("c", &["--seed", "2"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!((ma.master_seed, mb.master_seed, mc.master_seed), (1, 1, 2));
    assert_eq!(ma.runs.len(), 6);
    assert_ne!(ma.runs[0].disorder_seed, mc.runs[0].disorder_seed);
}

#[test]
fn report_over_manifests() {
    let d = tempfile::tempdir().unwrap();
    let empty = spinflux(&["report"]);
    assert_eq!(code(&empty), 0);
    assert!(String::from_utf8_lossy(&empty.stdout).contains("0/0 checks passed"));

    let cfg = write_config(d.path(), r#"{"n_qubits": 4, "points": 41}"#);
    let out = d.path().join("ideal");
    assert_eq!(code(&run_small("transfer-ideal", &cfg, &out, &[])), 0);
    let o = spinflux(&["report", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.lines().any(|l| l.starts_with("transfer-ideal") && l.contains("peak fidelity") && l.ends_with("PASS")));
    assert!(table.contains("3/3 checks passed"));

    let corrupt = d.path().join("corrupt.json");
    fs::write(&corrupt, "{not json").unwrap();
    assert_eq!(code(&spinflux(&["report", corrupt.to_str().unwrap()])), 2);
    let missing = d.path().join("nowhere").join("manifest.json");
    assert_eq!(code(&spinflux(&["report", missing.to_str().unwrap()])), 3);
}
