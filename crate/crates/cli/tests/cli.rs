use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pcpg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcpg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&pcpg(&["--help"])), 0);
    assert_eq!(code(&pcpg(&["--version"])), 0);
}

#[test]
fn bad_arguments_are_config_errors() {
    assert_eq!(code(&pcpg(&["frobnicate"])), 1);
    assert_eq!(
        code(&pcpg(&["study", "--family", "roundabout", "--n", "1", "--out", "x"])),
        1
    );
    assert_eq!(
        code(&pcpg(&["study", "--family", "oncoming", "--n", "0", "--out", "x"])),
        1
    );
    assert_eq!(
        code(&pcpg(&[
            "study",
            "--family",
            "oncoming",
            "--controllers",
            "magic",
            "--out",
            "x"
        ])),
        1
    );
    assert_eq!(code(&pcpg(&["verify", "--cases", "0"])), 1);
}

#[test]
fn run_rejects_missing_file_and_bad_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        code(&pcpg(&["run", "--scenario", "/nonexistent.toml", "--out", out])),
        1
    );
    let s = scenario("oncoming_adversarial.toml");
    let s = s.to_str().unwrap();
    assert_eq!(
        code(&pcpg(&["run", "--scenario", s, "--controller", "nope", "--out", out])),
        1
    );
    assert_eq!(code(&pcpg(&["--dt", "-0.5", "run", "--scenario", s, "--out", out])), 1);
    assert_eq!(
        code(&pcpg(&["--horizon", "0", "run", "--scenario", s, "--out", out])),
        1
    );
    assert_eq!(
        code(&pcpg(&[
            "--solver-population",
            "0",
            "run",
            "--scenario",
            s,
            "--out",
            out
        ])),
        1
    );

    let garbage = dir.path().join("garbage.toml");
    std::fs::write(&garbage, "name = 3\n").unwrap();
    assert_eq!(
        code(&pcpg(&["run", "--scenario", garbage.to_str().unwrap(), "--out", out])),
        1
    );
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pg");
    let s = scenario("oncoming_adversarial.toml");
    let o = pcpg(&[
        "run",
        "--scenario",
        s.to_str().unwrap(),
        "--controller",
        "pg",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("collision at 6.5 s"));
    for f in ["trajectory.csv", "plot.csv", "metrics.toml"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.toml")).unwrap();
    assert!(metrics.contains("collision_time = 6.5"), "{metrics}");
}

#[test]
fn dt_override_keeps_episode_length() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("oncoming_adversarial.toml");
    let o = pcpg(&[
        "--dt",
        "0.25",
        "--horizon",
        "16",
        "run",
        "--scenario",
        s.to_str().unwrap(),
        "--controller",
        "pcca",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(dir.path().join("metrics.toml")).unwrap();
    assert!(metrics.contains("steps = 60"), "{metrics}");
}

#[test]
fn study_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = pcpg(&[
            "--solver-population",
            "48",
            "--solver-iterations",
            "4",
            "study",
            "--family",
            "intersection",
            "--n",
            "3",
            "--controllers",
            "pg,pcca-saturated",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("timing.toml").is_file());
        std::fs::read(out.join("summary.toml")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(
        text.contains("pcca-saturated") && text.contains("num_scenarios = 3"),
        "{text}"
    );
}

#[test]
fn verify_passes() {
    let o = pcpg(&["verify", "--cases", "20", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(String::from_utf8_lossy(&o.stdout).matches(" ok").count(), 6);
}
