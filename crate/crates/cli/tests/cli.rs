use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn nopath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nopath")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn walled_off_arm_is_infeasible() {
    let out = nopath(&["prove", scenario("three_chambers.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["kind"], "Infeasible");
    assert_ne!(v["start_label"], v["goal_label"]);
}

#[test]
fn open_scene_is_feasible() {
    let out = nopath(&["prove", scenario("open_arm2.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["kind"], "FeasibleAtResolution");
}

#[test]
fn missing_file_is_an_error() {
    let out = nopath(&["prove", "/nonexistent/scene.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "scenario");
}

#[test]
fn blocked_start_prints_verdict_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("three_chambers.toml")).unwrap();
    let path = dir.path().join("blocked.toml");
    std::fs::write(&path, text.replace("start = [\"60deg\", \"0deg\"]", "start = [\"0deg\", \"0deg\"]")).unwrap();
    let out = nopath(&["prove", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["kind"], "StartOrGoalInObstacle");
    assert_eq!(v["blocked"], "start");
}

#[test]
fn bench_single_trial() {
    let out = nopath(&["bench", scenario("three_chambers.toml").to_str().unwrap(), "--trials", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "trial,seed,kind,iterations,segmentation_time,total_time");
    assert!(lines[1].starts_with("1,0,Infeasible,"));
    assert!(lines[2].starts_with("mean±std,,,"));
}

#[test]
fn bench_rows_repeat_for_a_seed() {
    let rows = || {
        let out = nopath(&["bench", scenario("narrow_gap.toml").to_str().unwrap(), "--trials", "3", "--seed", "17"]);
        assert_eq!(out.status.code(), Some(0));
        String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .skip(1)
            .take(3)
            .map(|l| l.split(',').take(4).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
    };
    let a = rows();
    assert_eq!(a, rows());
    assert!(a[0].starts_with("1,17,"));
    assert!(a[2].starts_with("3,19,"));
}

#[test]
fn bench_timeout_exit_code() {
    let out = nopath(&["bench", scenario("narrow_gap.toml").to_str().unwrap(), "--trials", "1", "--timeout", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stdout).unwrap().contains(",Timeout,"));
}

#[test]
fn exports_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("cb.bin");
    let csv = dir.path().join("stats.csv");
    let out = nopath(&[
        "prove",
        scenario("three_chambers.toml").to_str().unwrap(),
        "--export-bitmap",
        dump.to_str().unwrap(),
        "--stats-csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let iterations = json(&out)["iterations"].as_u64().unwrap() as usize;
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), iterations + 1);

    let prefix = dir.path().join("img");
    let out = nopath(&["render", dump.to_str().unwrap(), "--out", prefix.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for suffix in ["bitmap", "labels"] {
        let bytes = std::fs::read(dir.path().join(format!("img_{suffix}.pgm"))).unwrap();
        assert!(bytes.starts_with(b"P5\n36 36\n255\n"));
        assert_eq!(bytes.len(), b"P5\n36 36\n255\n".len() + 36 * 36);
    }
}

#[test]
fn render_needs_a_slice_above_two_axes() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("img");
    let path = scenario("truncated_arm5.toml");
    let out = nopath(&["render", path.to_str().unwrap(), "--out", prefix.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = nopath(&["render", path.to_str().unwrap(), "--out", prefix.to_str().unwrap(), "--fixed", "0,0,9"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("img_labels.pgm").exists());
}
