//! End-to-end tests of the `ma1lab` binary: exit codes, output layout,
//! and the reproducibility contract (identical bytes across reruns,
//! thread counts, and beta-list extensions).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Small but structurally complete experiment: two betas, three
/// replications, strided trajectory output. Runs in well under a second
/// even in a debug build.
const FAST: &str = r#"
[model]
kind = "arma"
ma = [0.5]
sigma2 = 1.0

[innovation]
law = "uniform"
seed = 42

[run]
t_len = 400
replications = 3
betas = [0.0, 1.0]
burn_in = 100
output_stride = 50

[quadrature]
initial_nodes = 1024
rel_tol = 1e-8
max_doublings = 8
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ma1lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should launch")
}

fn assert_code(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "expected exit {want}\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout should be UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr should be UTF-8")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).expect("config should write");
    path
}

/// Map of file name to raw bytes for every regular file in `dir`.
fn dir_snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("output dir should exist") {
        let entry = entry.unwrap();
        let name = entry.file_name().into_string().unwrap();
        files.insert(name, std::fs::read(entry.path()).unwrap());
    }
    files
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rerun_and_thread_count_leave_bytes_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let dirs = [tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c")];
    for (dir, threads) in dirs.iter().zip(["1", "1", "3"]) {
        let out = run(&[
            "experiment",
            "--config",
            s(&cfg),
            "--out",
            s(dir),
            "--threads",
            threads,
        ]);
        assert_code(&out, 0);
    }
    let base = dir_snapshot(&dirs[0]);
    assert!(base.contains_key("summary.csv"));
    assert!(base.contains_key("manifest.json"));
    assert!(base.contains_key("traj_0_0.csv"));
    assert!(base.contains_key("zeroset_1.csv"));
    // Rerun with the same config, and a run with a different worker
    // count, must both reproduce every artifact byte for byte.
    assert_eq!(base, dir_snapshot(&dirs[1]));
    assert_eq!(base, dir_snapshot(&dirs[2]));
}

#[test]
fn appending_a_beta_preserves_earlier_streams() {
    let tmp = tempfile::tempdir().unwrap();
    let solo = write_config(&tmp.path().join(""), &FAST.replace("betas = [0.0, 1.0]", "betas = [0.0]"));
    let pair = tmp.path().join("pair.toml");
    std::fs::write(&pair, FAST).unwrap();
    let dir_solo = tmp.path().join("solo");
    let dir_pair = tmp.path().join("pair");
    assert_code(
        &run(&["experiment", "--config", s(&solo), "--out", s(&dir_solo)]),
        0,
    );
    assert_code(
        &run(&["experiment", "--config", s(&pair), "--out", s(&dir_pair)]),
        0,
    );
    // Generator streams are keyed by (beta index, replication), so adding
    // a beta to the list must not change any file the smaller run wrote.
    for name in ["traj_0_0.csv", "traj_0_1.csv", "traj_0_2.csv", "zeroset_0.csv"] {
        let a = std::fs::read(dir_solo.join(name)).unwrap();
        let b = std::fs::read(dir_pair.join(name)).unwrap();
        assert_eq!(a, b, "{name} changed when a beta was appended");
    }
    assert!(dir_pair.join("traj_1_2.csv").exists());
}

#[test]
fn rejected_configs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[(&str, &str)] = &[
        ("replications = 3", "replications = 0"),
        ("t_len = 400", "t_len = 50"),
        ("betas = [0.0, 1.0]", "betas = [0.0, 1.5]"),
        ("betas = [0.0, 1.0]", "betas = [0.5, 0.5]"),
        ("ma = [0.5]", "ma = [0.5]\nar = [1.2]"),
        ("output_stride = 50", "output_stride = 50\ntypo_knob = 1"),
        ("law = \"uniform\"", "law = \"uniform\"\nsd = 1.0"),
    ];
    for (from, to) in cases {
        let cfg = write_config(tmp.path(), &FAST.replace(from, to));
        let out = run(&["zeroset", "--config", s(&cfg), "--beta", "1.0"]);
        assert_code(&out, 2);
        assert!(
            stderr(&out).contains("config error"),
            "mutation {to:?} should report a config error, got: {}",
            stderr(&out)
        );
    }
    let missing = tmp.path().join("nope.toml");
    assert_code(&run(&["zeroset", "--config", s(&missing), "--beta", "0.0"]), 2);
}

#[test]
fn estimate_rejects_beta_outside_config_list() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let out = run(&["estimate", "--config", s(&cfg), "--beta", "0.25"]);
    assert_code(&out, 2);
    let out = run(&["estimate", "--config", s(&cfg), "--beta", "1.0", "--rep", "7"]);
    assert_code(&out, 2);
}

#[test]
fn quadrature_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let body = FAST
        .replace("initial_nodes = 1024", "initial_nodes = 16")
        .replace("rel_tol = 1e-8", "rel_tol = 1e-14")
        .replace("max_doublings = 8", "max_doublings = 0");
    let cfg = write_config(tmp.path(), &body);
    let out = run(&["zeroset", "--config", s(&cfg), "--beta", "1.0"]);
    assert_code(&out, 3);
    assert!(stderr(&out).contains("numeric failure"), "got: {}", stderr(&out));
}

#[test]
fn failed_check_exits_4_but_still_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &FAST.replace("output_stride = 50", "output_stride = 50\ncheck_mean_dist = 1e-12"),
    );
    let dir = tmp.path().join("out");
    let out = run(&["experiment", "--config", s(&cfg), "--out", s(&dir), "--check"]);
    assert_code(&out, 4);
    assert!(stderr(&out).contains("check failed"), "got: {}", stderr(&out));
    // The threshold judgment happens after the artifacts are written.
    assert!(dir.join("summary.csv").exists());
    assert!(dir.join("manifest.json").exists());

    let dir2 = tmp.path().join("out2");
    assert_code(&run(&["experiment", "--config", s(&cfg), "--out", s(&dir2)]), 0);
}

#[test]
fn simulate_is_deterministic_and_headed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let a = run(&["simulate", "--config", s(&cfg), "--rep", "1"]);
    let b = run(&["simulate", "--config", s(&cfg), "--rep", "1"]);
    assert_code(&a, 0);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,y,innovation"));
    assert_eq!(lines.count(), 400);

    // A different replication draws from a different stream.
    let c = run(&["simulate", "--config", s(&cfg), "--rep", "2"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn closed_stdout_pipe_exits_quietly() {
    use std::io::Read;
    // Enough rows that the writer is still blocked on the pipe when the
    // reader hangs up; a short path would fit in the kernel buffer and
    // let the process finish cleanly instead.
    let cfg = repo_config("correct_ma1.toml");
    let mut child = bin()
        .args(["simulate", "--config", s(&cfg)])
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    // Read a few bytes, then hang up like `head` would.
    let mut taken = [0u8; 64];
    child.stdout.take().unwrap().read_exact(&mut taken).unwrap();
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(141), "SIGPIPE convention");
    let mut err = String::new();
    child.stderr.take().unwrap().read_to_string(&mut err).unwrap();
    assert!(err.is_empty(), "pipe hangup should be silent, got: {err}");
}

#[test]
fn estimate_reports_final_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let out = run(&["estimate", "--config", s(&cfg), "--beta", "1.0", "--rep", "2"]);
    assert_code(&out, 0);
    let text = stdout(&out);
    for field in [
        "beta=1",
        "rep=2",
        "theta_final=",
        "theta_hat_final=",
        "dist_zero_set=",
        "loss_final=",
        "clips=",
        "k_star=",
    ] {
        assert!(text.contains(field), "missing {field:?} in: {text}");
    }
}

#[test]
fn zeroset_recovers_the_generating_coefficient() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let dir = tmp.path().join("zs");
    let out = run(&["zeroset", "--config", s(&cfg), "--beta", "1.0", "--out", s(&dir)]);
    assert_code(&out, 0);
    let text = stdout(&out);
    assert!(text.contains("beta=1 roots="), "got: {text}");
    // MA(1) data with coefficient 0.5 is correctly specified, so the mean
    // field vanishes at 0.5 itself no matter the beta.
    let theta: f64 = text
        .lines()
        .filter_map(|l| l.strip_prefix("theta="))
        .map(|rest| rest.split_whitespace().next().unwrap().parse().unwrap())
        .fold(f64::INFINITY, |best: f64, t: f64| {
            if (t - 0.5).abs() < (best - 0.5).abs() { t } else { best }
        });
    assert!((theta - 0.5).abs() < 1e-6, "nearest root {theta} is not 0.5");
    assert!(dir.join("zeroset_1.csv").exists());
}

#[test]
fn rm_check_converges_from_spread_starts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let out = run(&[
        "rm-check",
        "--config",
        s(&cfg),
        "--beta",
        "0.0",
        "--starts",
        "5",
        "--steps",
        "20000",
        "--check",
    ]);
    assert_code(&out, 0);
    assert!(
        stdout(&out).contains("5/5 starts within"),
        "got: {}",
        stdout(&out)
    );
}

#[test]
fn quick_config_experiment_then_diagnose_all_pass() {
    let cfg = repo_config("quick.toml");
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = run(&[
        "experiment",
        "--config",
        s(&cfg),
        "--out",
        s(&dir),
        "--threads",
        "2",
        "--check",
    ]);
    assert_code(&out, 0);

    let diag = run(&[
        "diagnose",
        "--config",
        s(&cfg),
        "--out",
        s(&dir),
        "--threads",
        "2",
        "--check",
    ]);
    assert_code(&diag, 0);
    let text = stdout(&diag);
    assert_eq!(text.matches("diagnose beta").count(), 6);
    assert!(!text.contains("FAIL"), "got: {text}");
    for name in ["diagnostics_0_0.csv", "diagnostics_0.5_1.csv", "diagnostics_1_0.csv"] {
        assert!(dir.join(name).exists(), "{name} missing");
    }

    // Restricting the selection only narrows the work.
    let one = run(&[
        "diagnose",
        "--config",
        s(&cfg),
        "--out",
        s(&dir),
        "--beta",
        "0.5",
        "--rep",
        "1",
    ]);
    assert_code(&one, 0);
    assert_eq!(stdout(&one).matches("diagnose beta").count(), 1);
}

#[test]
fn diagnose_refuses_missing_or_mismatched_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let dir = tmp.path().join("run");

    // No experiment has run yet: nothing to diagnose.
    std::fs::create_dir_all(&dir).unwrap();
    let out = run(&["diagnose", "--config", s(&cfg), "--out", s(&dir)]);
    assert_code(&out, 2);
    assert!(stderr(&out).contains("manifest.json"), "got: {}", stderr(&out));

    assert_code(&run(&["experiment", "--config", s(&cfg), "--out", s(&dir)]), 0);
    assert_code(&run(&["diagnose", "--config", s(&cfg), "--out", s(&dir)]), 0);

    // A different seed hashes to a different config, so the artifacts on
    // disk no longer belong to the requested run.
    let out = run(&["diagnose", "--config", s(&cfg), "--out", s(&dir), "--seed", "43"]);
    assert_code(&out, 2);
    assert!(stderr(&out).contains("produced by config"), "got: {}", stderr(&out));

    // Selections outside the experiment grid are refused.
    let out = run(&["diagnose", "--config", s(&cfg), "--out", s(&dir), "--rep", "9"]);
    assert_code(&out, 2);
}

#[test]
fn traj_files_respect_stride_and_cover_endpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let dir = tmp.path().join("run");
    assert_code(&run(&["experiment", "--config", s(&cfg), "--out", s(&dir)]), 0);

    let text = std::fs::read_to_string(dir.join("traj_1_0.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,y,theta,theta_hat"));
    let times: Vec<u64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    // Stride 50 from t = 1, with the final time always included.
    assert_eq!(times, vec![1, 51, 101, 151, 201, 251, 301, 351, 400]);
}

#[test]
fn checked_in_configs_load_and_simulate() {
    for name in ["correct_ma1.toml", "misspec_ar1.toml"] {
        let cfg = repo_config(name);
        let out = run(&["simulate", "--config", s(&cfg)]);
        assert_code(&out, 0);
        let text = stdout(&out);
        assert!(text.starts_with("t,y,innovation\n"), "{name}: bad header");
        assert_eq!(text.lines().count(), 100_001, "{name}: wrong row count");
    }
}
