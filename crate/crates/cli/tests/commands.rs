use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[grid]
cells = 16
velocity_nodes = 12
v_max_factor = 7.0

[euler]
refinement = 2

[cascade]
dt = 0.02

[kinetic]
epsilons = [0.2, 0.1, 0.05]
dt = 0.01
t_end = 0.1
store_every = 2
"#;

fn ivpb(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ivpb"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("IVPB_THREADS", "1")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_on_defaults_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("empty.toml");
    fs::write(&config, "").unwrap();
    let out = ivpb(&["verify"], &config, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    assert!(checks.iter().all(|c| c["passed"] == true && c["defect"].is_number()));
}

#[test]
fn sweep_with_one_epsilon_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("one.toml");
    fs::write(&config, "[kinetic]\nepsilons = [0.1]\n").unwrap();
    let out = ivpb(&["sweep"], &config, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("need ≥ 3 epsilons"), "{}", stderr(&out));
}

#[test]
fn unknown_keys_and_bad_thread_counts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("typo.toml");
    fs::write(&config, "[grid]\ncels = 8\n").unwrap();
    let out = ivpb(&["euler"], &config, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("grid.cels"), "{}", stderr(&out));

    fs::write(&config, SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ivpb"))
        .args(["euler", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .env("IVPB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cascade_records_the_reused_trajectory_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let euler_out = dir.path().join("euler");
    let out = ivpb(&["euler"], &config, &euler_out);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(euler_out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,cell,rho,u_x,u_y,u_z,theta,phi\n"));

    let saved = euler_out.join("trajectory.json");
    fs::write(
        &config,
        SMALL.replace("[cascade]\n", &format!("[cascade]\ntrajectory = {:?}\n", saved.display().to_string())),
    )
    .unwrap();
    let cascade_out = dir.path().join("cascade");
    let out = ivpb(&["cascade"], &config, &cascade_out);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let read = |p: &Path| -> serde_json::Value { serde_json::from_slice(&fs::read(p).unwrap()).unwrap() };
    let euler = read(&euler_out.join("manifest.json"));
    let cascade = read(&cascade_out.join("manifest.json"));
    assert_eq!(cascade["provenance"]["trajectory"]["sha256"], euler["artifacts"]["trajectory.bin"]);
}

#[test]
fn rerun_from_manifest_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(ivpb(&["kinetic"], &config, &a).status.code(), Some(0));
    let out = ivpb(&["kinetic"], &a.join("manifest.json"), &b);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    for name in manifest["artifacts"].as_object().unwrap().keys() {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}
