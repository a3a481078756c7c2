use std::fs;
use std::path::Path;

use filippov::config::IntegrateSpec;
use filippov::{export_viz, run_pipeline, AnalysisConfig, PipelineError, Stage, VizKind};
use filippov_core::stability::Aggregate;
use serde_json::Value;

fn read_json(dir: &Path, rel: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(rel)).unwrap()).unwrap()
}

fn assert_outputs_exist(dir: &Path, m: &filippov::RunManifest) {
    for o in &m.outputs {
        let len = fs::metadata(dir.join(&o.path)).unwrap().len();
        assert!(len > 0 && len == o.bytes, "{}", o.path);
    }
}

#[test]
fn sphere_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_pipeline(&AnalysisConfig::catalog("sphere-two-foldfold"), Stage::Stability, tmp.path()).unwrap();
    assert_outputs_exist(tmp.path(), &out.manifest);
    assert_eq!(out.manifest.stages.len(), 7);

    let t = read_json(tmp.path(), "tangency.json");
    assert_eq!(t["curves"].as_array().unwrap().len(), 2);
    let ff = t["fold_folds"].as_array().unwrap();
    assert_eq!(ff.len(), 2);
    let blocks = read_json(tmp.path(), "blocks.json");
    assert_eq!(blocks.as_array().unwrap().len(), 1);
    assert_eq!(blocks[0]["signature"]["fold_fold_types"], serde_json::json!([0, 2, 0]));

    let report = read_json(tmp.path(), "report.json");
    assert_eq!(report["system"], "sphere-two-foldfold");
    assert_eq!(report["config_digest"].as_str().unwrap(), out.manifest.config_digest);
    assert_eq!(report["conditions"].as_array().unwrap().len(), 15);
    let f2 = &report["conditions"][2];
    assert_eq!((f2["id"].as_str(), f2["status"].as_str()), (Some("F2"), Some("Satisfied")));
    assert!(!report["citations"].as_array().unwrap().is_empty());
    assert_eq!(report["aggregate"]["verdict"], out.report.unwrap().aggregate.name());
}

#[test]
fn degenerate_sphere_stops_after_tangency_with_a_g_report() {
    let tmp = tempfile::tempdir().unwrap();
    let err = run_pipeline(&AnalysisConfig::catalog("degenerate-sphere"), Stage::Stability, tmp.path()).unwrap_err();
    assert!(matches!(err, PipelineError::Stage { stage: Stage::Tangency, .. }), "{err}");
    let m = filippov::RunManifest::load(tmp.path()).unwrap();
    assert_eq!(m.failure.as_ref().unwrap().stage, "tangency");
    assert!(!m.has_output("blocks.json"));
    let report = read_json(tmp.path(), "report.json");
    assert_eq!(report["aggregate"]["verdict"], "Unstable");
    assert_eq!(report["aggregate"]["conditions"], serde_json::json!(["G"]));
}

#[test]
fn tangency_stage_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_pipeline(&AnalysisConfig::catalog("sphere-two-foldfold"), Stage::Tangency, tmp.path()).unwrap();
    assert!(out.report.is_none());
    assert!(out.manifest.has_output("curves.csv"));
    assert!(!out.manifest.has_output("report.json"));
    assert!(!tmp.path().join("report.json").exists());
}

#[test]
fn exports_have_the_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = AnalysisConfig::catalog("planar-elliptic");
    cfg.integrate = Some(IntegrateSpec {
        starts: vec![[0.2, -0.3, 0.4], [-0.1, 0.1, -0.5]],
        horizon: 1.0,
    });
    run_pipeline(&cfg, Stage::Stability, tmp.path()).unwrap();
    let header = |rel: &str| fs::read_to_string(tmp.path().join(rel)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("mesh_vertices.csv"), "x,y,z,label");
    assert_eq!(header("curves.csv"), "curve_id,side,x,y,z,d2,node_kind");
    assert_eq!(header("orbits.csv"), "orbit_id,t,x,y,z,region_label,orientation_flag");
    assert_eq!(header("trajectories.csv"), "traj_id,arc_index,arc_kind,t,x,y,z");
    assert_eq!(header("regions.csv"), "x,y,z,label,block_id");
    assert_eq!(header("manifolds.csv"), "sheet_id,side,row,col,x,y,z");
    let flow = read_json(tmp.path(), "flow.json");
    assert_eq!(flow["first_returns"].as_array().unwrap().len(), 1);
    assert_eq!(flow["trajectories"].as_array().unwrap().len(), 2);
    let events = read_json(tmp.path(), "events.json");
    assert!(events.as_array().unwrap().iter().all(|e| e["traj_id"].as_u64().unwrap() < 2));
}

#[test]
fn viz_curves_of_the_sphere_are_equator_and_meridian() {
    let tmp = tempfile::tempdir().unwrap();
    run_pipeline(&AnalysisConfig::catalog("sphere-two-foldfold"), Stage::Tangency, tmp.path()).unwrap();
    let files = export_viz(tmp.path(), VizKind::Curves).unwrap();
    assert_eq!(files, ["viz/curve_0.csv", "viz/curve_1.csv"]);
    let mut kinds = Vec::new();
    for f in &files {
        let mut r = csv::Reader::from_path(tmp.path().join(f)).unwrap();
        let pts: Vec<[f64; 3]> = r
            .records()
            .map(|rec| {
                let rec = rec.unwrap();
                [0, 1, 2].map(|i| rec[i].parse::<f64>().unwrap())
            })
            .collect();
        // X = (0,0,1) is tangent on the equator z = 0, Y = (1,0,0) on the meridian x = 0
        let max_z = pts.iter().map(|p| p[2].abs()).fold(0.0, f64::max);
        let max_x = pts.iter().map(|p| p[0].abs()).fold(0.0, f64::max);
        kinds.push(if max_z < 1e-6 { "equator" } else if max_x < 1e-6 { "meridian" } else { "other" });
    }
    kinds.sort();
    assert_eq!(kinds, ["equator", "meridian"]);
    let m = filippov::RunManifest::load(tmp.path()).unwrap();
    assert!(m.has_output("viz/curve_1.csv"));
}

#[test]
fn viz_needs_its_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    run_pipeline(&AnalysisConfig::catalog("cusp"), Stage::Tangency, tmp.path()).unwrap();
    let err = export_viz(tmp.path(), VizKind::Blocks).unwrap_err();
    assert!(matches!(err, PipelineError::MissingArtifact(ref a) if a == "regions.csv"), "{err}");
    let empty = tempfile::tempdir().unwrap();
    assert!(export_viz(empty.path(), VizKind::Curves).is_err());
}

#[test]
fn identical_runs_write_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = AnalysisConfig::catalog("sliding-node");
    let ma = run_pipeline(&cfg, Stage::Stability, a.path()).unwrap().manifest;
    let mb = run_pipeline(&cfg, Stage::Stability, b.path()).unwrap().manifest;
    assert_eq!(ma.outputs, mb.outputs);
    for o in &ma.outputs {
        let (x, y) = (fs::read(a.path().join(&o.path)).unwrap(), fs::read(b.path().join(&o.path)).unwrap());
        assert!(x == y, "{} differs", o.path);
    }
}

#[test]
fn sliding_node_report_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_pipeline(&AnalysisConfig::catalog("sliding-node"), Stage::Stability, tmp.path()).unwrap();
    let r = out.report.unwrap();
    assert!(!matches!(r.aggregate, Aggregate::Unstable(_)), "{:?}", r.aggregate);
    let sliding = read_json(tmp.path(), "sliding.json");
    let eq = &sliding["equilibria"]["equilibria"];
    assert_eq!(eq.as_array().unwrap().len(), 1);
    assert_eq!(eq[0]["kind"], "Node");
}
