use std::fs;
use std::process::Command;

fn filippov(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_filippov")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn analyze_succeeds_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let (code, stdout, _) = filippov(&["analyze", "--catalog", "sliding-node", "--out", dir]);
    assert_eq!(code, 0);
    assert!(stdout.contains("aggregate:"));
    assert!(tmp.path().join("report.json").exists());
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[system]\ncatalog = \"sphere-two-foldfold\"\n[tolerances]\ntau = 0.0\n").unwrap();
    let out = tmp.path().join("o");
    let (o, b) = (out.to_str().unwrap(), bad.to_str().unwrap());
    assert_eq!(filippov(&["analyze", "--config", b, "--out", o]).0, 2);
    assert_eq!(filippov(&["analyze", "--config", "/nonexistent.toml", "--out", o]).0, 2);
    assert_eq!(filippov(&["analyze", "--catalog", "cusp", "--tolerance", "tau", "--out", o]).0, 2);
    assert_eq!(filippov(&["analyze", "--catalog", "cusp", "--stage", "nope", "--out", o]).0, 2);
    assert_eq!(filippov(&["analyze", "--out", o]).0, 2);
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn stage_failure_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, stderr) = filippov(&["analyze", "--catalog", "degenerate-sphere", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(stderr.contains("tangency"), "{stderr}");
}

#[test]
fn violation_exits_with_4_only_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    // Ξ(E) fails: the first return map is −identity
    assert_eq!(filippov(&["stability", "--catalog", "planar-elliptic", "--out", dir]).0, 0);
    assert_eq!(filippov(&["stability", "--catalog", "planar-elliptic", "--out", dir, "--fail-on-violated"]).0, 4);
}

#[test]
fn config_file_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    let out = tmp.path().join("run");
    fs::write(
        &cfg,
        format!(
            "[system]\nf = \"z\"\nx = \"(x,y,-1)\"\ny = \"(0,0,1)\"\n[domain]\nmin = [-1,-1,-1]\nmax = [1,1,1]\n[output]\ndir = \"{}\"\n",
            out.display()
        ),
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let (code, stdout, stderr) = filippov(&[
        "blocks", "--config", c, "--resolution", "20", "--seed", "7", "--tolerance", "theta_min=2e-4", "--tolerance", "tau=1e-9",
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("stage blocks"));
    assert!(!stdout.contains("stage flow"));
    let resolved = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(resolved.contains("mesh = 20") && resolved.contains("seed = 7"));
    assert!(resolved.contains("theta_min = 0.0002") && resolved.contains("tau = 0.000000001"), "{resolved}");
}

#[test]
fn stage_flag_shortens_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let (code, stdout, _) = filippov(&["analyze", "--catalog", "cusp", "--stage", "manifold", "--out", dir]);
    assert_eq!(code, 0);
    assert!(stdout.contains("stage manifold") && !stdout.contains("stage tangency"));
}

#[test]
fn integrate_writes_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let args = ["integrate", "--catalog", "sliding-node", "--from", "0.5,0.2,0.3", "--from", "-0.2,0.1,-0.4", "--horizon", "2", "--out", dir];
    let (code, _, stderr) = filippov(&args);
    assert_eq!(code, 0, "{stderr}");
    let csv = fs::read_to_string(tmp.path().join("trajectories.csv")).unwrap();
    assert!(csv.starts_with("traj_id,arc_index,arc_kind,t,x,y,z\n"));
    assert!(csv.lines().any(|l| l.starts_with("1,")));
    assert!(csv.contains("Sliding"));
    assert_eq!(filippov(&["integrate", "--catalog", "sliding-node", "--out", dir]).0, 2);
}

#[test]
fn export_viz_and_catalog() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    assert_eq!(filippov(&["export-viz", "curves", "--out", dir]).0, 3);
    assert_eq!(filippov(&["analyze", "--catalog", "sphere-two-foldfold", "--out", dir]).0, 0);
    let (code, stdout, _) = filippov(&["export-viz", "curves", "blocks", "manifolds", "--out", dir]);
    assert_eq!(code, 0);
    assert!(stdout.contains("curves: 2 files"));
    assert!(tmp.path().join("viz/block_0.csv").exists());

    let (code, list, _) = filippov(&["catalog"]);
    assert_eq!(code, 0);
    assert!(list.contains("sphere-two-foldfold") && list.contains("vishik-cusp-plus"));
    let (code, text, _) = filippov(&["catalog", "cusp"]);
    assert_eq!(code, 0);
    let cfg = tmp.path().join("cusp.toml");
    fs::write(&cfg, text).unwrap();
    let (code, _, _) = filippov(&["tangency", "--config", cfg.to_str().unwrap(), "--out", dir]);
    assert_eq!(code, 0);
    assert_eq!(filippov(&["catalog", "nope"]).0, 2);
}
