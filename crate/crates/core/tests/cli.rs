//! End-to-end checks of the `tandem` binary: exit codes, file outputs
//! and rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

use tandem_core::gaze::{self, GazeSample};
use tandem_core::geom::normalize;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tandem"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

/// A trace staring at the center of the shared bench from the scripted
/// head position.
fn workspace_trace(path: &Path, samples: usize) {
    let origin = [0.0, -0.55, 1.55];
    let dir = normalize([0.0, 0.55, -0.45]).unwrap();
    let trace: Vec<GazeSample> = (0..samples)
        .map(|k| GazeSample { t: k as f64 / 30.0, origin, direction: dir })
        .collect();
    let mut buf = Vec::new();
    gaze::write_trace(&mut buf, &trace).unwrap();
    std::fs::write(path, buf).unwrap();
}

#[test]
fn usage_error_prints_synopsis_and_exits_2() {
    let out = run(&["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("Usage:"), "stderr: {}", stderr_of(&out));
}

#[test]
fn plan_emits_one_release_per_deliverable() {
    let out = run(&["plan"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.starts_with("tandem-plan-v1\n"));
    let releases = text.lines().filter(|l| l.contains(" release(")).count();
    assert_eq!(releases, 7, "one delivery per object in the shipped scenario");
}

#[test]
fn malformed_scenario_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "version = \"tandem-scenario-v1\"\nnot even toml [").unwrap();
    let out = run(&["plan", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
}

#[test]
fn unknown_scenario_key_exits_3() {
    let mut text = String::from(tandem_core::sim::STOOL_SCENARIO_TEXT);
    text.push_str("\nextra_knob = 3\n");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("extra.toml");
    std::fs::write(&path, text).unwrap();
    let out = run(&["plan", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
}

#[test]
fn out_of_range_override_exits_4() {
    let out = run(&["simulate", "--threshold", "1.5"]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr_of(&out));
}

#[test]
fn imu_simulate_without_weights_exits_4() {
    let out = run(&["simulate", "--channel", "imu"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_of(&out).contains("weights"));
}

#[test]
fn missing_input_file_exits_5() {
    let out = run(&["report", "--log", "/nonexistent/events.log"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn gradcheck_default_probe_passes() {
    let out = run(&["gradcheck", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("max_rel_err "));
    assert!(text.trim_end().ends_with("pass"));
}

#[test]
fn gradcheck_impossible_limit_exits_6() {
    let out = run(&["gradcheck", "--seed", "7", "--limit", "1e-18"]);
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn train_from_synth_files_matches_in_memory_synth() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    let out = run(&["synth", "--seed", "5", "--per-class", "6", "--out-dir", ds.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let from_files = dir.path().join("a.bin");
    let out = run(&[
        "train",
        "--working",
        ds.join("working.imu").to_str().unwrap(),
        "--idle",
        ds.join("idle.imu").to_str().unwrap(),
        "--out",
        from_files.to_str().unwrap(),
        "--hidden",
        "6",
        "--epochs",
        "4",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let from_synth = dir.path().join("b.bin");
    let out = run(&[
        "train",
        "--synth",
        "6",
        "--out",
        from_synth.to_str().unwrap(),
        "--hidden",
        "6",
        "--epochs",
        "4",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let a = std::fs::read(&from_files).unwrap();
    let b = std::fs::read(&from_synth).unwrap();
    assert_eq!(a, b, "the trace files round-trip the generated windows exactly");
}

#[test]
fn train_writes_versioned_loss_curve() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("w.bin");
    let out = run(&[
        "train", "--synth", "4", "--out", weights.to_str().unwrap(), "--hidden", "4", "--epochs",
        "3", "--seed", "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let curve = std::fs::read_to_string(dir.path().join("w.loss")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("tandem-loss-v1"));
    let epochs = lines.filter(|l| !l.starts_with('#')).count();
    assert_eq!(epochs, 3);
}

#[test]
fn classify_gaze_workspace_trace_is_all_working() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bench.trace");
    workspace_trace(&trace, 90);
    let out = run(&["classify", "--channel", "gaze", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tandem-labels-v1"));
    let mut n = 0;
    for line in lines {
        assert!(line.ends_with(" working"), "line {line:?}");
        n += 1;
    }
    assert_eq!(n, 90);
}

#[test]
fn classify_imu_spaces_decisions_by_stride() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    run(&["synth", "--seed", "9", "--per-class", "2", "--out-dir", ds.to_str().unwrap()]);
    let weights = dir.path().join("w.bin");
    run(&[
        "train", "--synth", "4", "--out", weights.to_str().unwrap(), "--hidden", "4", "--epochs",
        "2", "--seed", "9",
    ]);
    let out = run(&[
        "classify",
        "--channel",
        "imu",
        "--trace",
        ds.join("working.imu").to_str().unwrap(),
        "--weights",
        weights.to_str().unwrap(),
        "--stride",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let times: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    // 1000 frames, first decision after 500, then every 20 frames.
    assert_eq!(times.len(), 26);
    for pair in times.windows(2) {
        assert!((pair[1] - pair[0] - 20.0 / 30.0).abs() < 1e-9);
    }
}

#[test]
fn simulate_reruns_byte_identical_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for out_dir in [&a, &b] {
        let out = run(&["simulate", "--seed", "3", "--out-dir", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    }
    let out = run(&["simulate", "--seed", "4", "--out-dir", c.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["events.log", "metrics.txt", "metrics.csv"] {
        let first = std::fs::read(a.join(name)).unwrap();
        let second = std::fs::read(b.join(name)).unwrap();
        assert_eq!(first, second, "{name} differs between identical reruns");
    }
    let first = std::fs::read(a.join("events.log")).unwrap();
    let other = std::fs::read(c.join("events.log")).unwrap();
    assert_ne!(first, other, "seed must reach the human model");
}

#[test]
fn simulate_embeds_resolved_overrides() {
    let out = run(&["simulate", "--dwell-s", "0.35", "--k", "4", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("seed = 1"));
    assert!(text.contains("dwell_s = 0.35"));
    assert!(text.contains("release_k = 4"));
}

#[test]
fn compare_lists_both_channels_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("w.bin");
    run(&[
        "train", "--synth", "6", "--out", weights.to_str().unwrap(), "--hidden", "6", "--epochs",
        "4", "--seed", "5",
    ]);
    let mut texts = Vec::new();
    for out_dir in ["x", "y"] {
        let out = run(&[
            "compare",
            "--seeds",
            "0,1",
            "--weights",
            weights.to_str().unwrap(),
            "--out-dir",
            dir.path().join(out_dir).to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
        texts.push(stdout_of(&out));
    }
    assert_eq!(texts[0], texts[1]);
    let csv = std::fs::read_to_string(dir.path().join("x/compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("gaze,2,"));
    assert!(lines[2].starts_with("imu,2,"));
}

#[test]
fn report_recomputes_simulate_totals() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = run(&["simulate", "--seed", "6", "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let metrics = std::fs::read_to_string(out_dir.join("metrics.txt")).unwrap();
    let total = metrics
        .lines()
        .find(|l| l.starts_with("total_idle_s"))
        .and_then(|l| l.split_whitespace().nth(1))
        .unwrap()
        .to_string();

    let out = run(&["report", "--log", out_dir.join("events.log").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.starts_with("tandem-audit-v1\n"));
    assert!(text.contains("complete true"));
    assert!(
        text.contains(&format!("total_idle_s {total}")),
        "audit total should match the runner's: {text}"
    );
}

#[test]
fn eval_min_f_gates_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("w.bin");
    run(&[
        "train", "--synth", "8", "--out", weights.to_str().unwrap(), "--hidden", "8", "--epochs",
        "8", "--seed", "5",
    ]);
    let ok = run(&[
        "eval",
        "--weights",
        weights.to_str().unwrap(),
        "--synth",
        "8",
        "--seed",
        "5",
        "--min-f",
        "0.1",
    ]);
    assert_eq!(ok.status.code(), Some(0), "stderr: {}", stderr_of(&ok));
    assert!(stdout_of(&ok).contains("f_score "));
    let gated = run(&[
        "eval",
        "--weights",
        weights.to_str().unwrap(),
        "--synth",
        "8",
        "--seed",
        "5",
        "--min-f",
        "1.01",
    ]);
    assert_eq!(gated.status.code(), Some(6));
}
