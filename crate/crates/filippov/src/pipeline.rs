//! Stage orchestration: fields → manifold → tangency → sliding → blocks →
//! flow → stability. Each stage writes its files before the next starts; a
//! failing stage leaves a partial manifest naming it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use filippov_core::blocks::{extract_blocks, SigmaBlock};
use filippov_core::flow::{
    first_return_map, integrate_filippov_with_budget, saturate_tangency_curve, FirstReturn, InvariantRay,
    ReturnOptions, SaturatedManifold, Trajectory,
};
use filippov_core::linalg::Complex;
use filippov_core::manifold::{build_mesh, SurfaceMesh};
use filippov_core::sliding::{
    find_pseudo_equilibria, sigma_separatrices, winding_index, EquilibriumSet, LinearKind, SeparatrixRole,
    SeparatrixSet, SlidingEnd, WindingReport,
};
use filippov_core::stability::{evaluate, Aggregate, Analysis, StabilityReport};
use filippov_core::tangency::{elementary_check, CurveEnd, FoldFoldType, SingularityKind, TangencyAnalysis};
use filippov_core::{Point3, PwsSystem, Side, Status, Verdict};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AnalysisConfig, ConfigFileError};
use crate::export;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Fields,
    Manifold,
    Tangency,
    Sliding,
    Blocks,
    Flow,
    Stability,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Fields,
        Stage::Manifold,
        Stage::Tangency,
        Stage::Sliding,
        Stage::Blocks,
        Stage::Flow,
        Stage::Stability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Fields => "fields",
            Stage::Manifold => "manifold",
            Stage::Tangency => "tangency",
            Stage::Sliding => "sliding",
            Stage::Blocks => "blocks",
            Stage::Flow => "flow",
            Stage::Stability => "stability",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub system: String,
    pub config_digest: String,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<OutputRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<StageFailure>,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    fn new(system: &str, digest: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            system: system.to_string(),
            config_digest: digest.to_string(),
            stages: Vec::new(),
            outputs: Vec::new(),
            failure: None,
        }
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(Self::FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::Io { path: path.clone(), source: e })?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Manifest(e.to_string()))
    }

    pub fn has_output(&self, rel: &str) -> bool {
        self.outputs.iter().any(|o| o.path == rel)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigFileError),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("unreadable manifest: {0}")]
    Manifest(String),
    #[error("artifact `{0}` is not in the run manifest; run the stage that produces it first")]
    MissingArtifact(String),
}

/// What a finished run left behind.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    /// Present when the stability stage ran, or when `G` failed early.
    pub report: Option<StabilityReport>,
}

impl RunOutcome {
    /// The report carries a verdict-level violation.
    pub fn violated(&self) -> bool {
        self.report.as_ref().is_some_and(|r| matches!(r.aggregate, Aggregate::Unstable(_)))
    }
}

/// Atomic file writes into one directory, recorded for the manifest.
pub(crate) struct Writer {
    pub(crate) dir: PathBuf,
    pub(crate) manifest: RunManifest,
}

impl Writer {
    pub(crate) fn put(&mut self, rel: &str, contents: &str) -> Result<(), PipelineError> {
        let path = self.dir.join(rel);
        let io = |source| PipelineError::Io { path: path.clone(), source };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let tmp = path.with_extension("partial");
        std::fs::write(&tmp, contents).map_err(io)?;
        std::fs::rename(&tmp, &path).map_err(io)?;
        self.manifest.outputs.retain(|o| o.path != rel);
        self.manifest.outputs.push(OutputRecord {
            path: rel.to_string(),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    pub(crate) fn finish(self) -> Result<RunManifest, PipelineError> {
        let text = export::json(&self.manifest);
        let path = self.dir.join(RunManifest::FILE);
        let io = |source| PipelineError::Io { path: path.clone(), source };
        let tmp = path.with_extension("partial");
        std::fs::write(&tmp, text).map_err(io)?;
        std::fs::rename(&tmp, &path).map_err(io)?;
        Ok(self.manifest)
    }
}

#[derive(Serialize)]
struct FieldsSummary<'a> {
    name: &'a str,
    f: String,
    x: String,
    y: String,
    domain: crate::config::DomainSpec,
    scale: f64,
    /// `[Wf, W²f, W³f]` as expressions.
    lie: BTreeMap<&'static str, [String; 3]>,
}

#[derive(Serialize)]
struct MeshSummary {
    vertices: usize,
    triangles: usize,
    euler_characteristic: i64,
    closed: bool,
    total_area: f64,
    area_by_label: BTreeMap<&'static str, f64>,
}

#[derive(Serialize)]
struct CurveSummary {
    id: usize,
    side: &'static str,
    end: CurveEnd,
    nodes: usize,
    length: f64,
    cusps: usize,
    fold_folds: Vec<usize>,
}

#[derive(Serialize)]
struct TangencySummary<'a> {
    curves: Vec<CurveSummary>,
    fold_folds: &'a [filippov_core::tangency::SingularityRecord],
    fold_fold_count_even: bool,
    degenerate: &'a [filippov_core::tangency::SingularityRecord],
    elementary: &'a Verdict,
}

#[derive(Serialize)]
struct WindingRecord {
    curve: usize,
    cusps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<WindingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct BranchRecord {
    orbit_id: usize,
    direction: [f64; 3],
    eigenvalue: f64,
    role: SeparatrixRole,
    end: SlidingEnd,
}

#[derive(Serialize)]
struct SeparatrixRecord {
    fold_fold: usize,
    origin: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<LinearKind>,
    eigenvalues: Vec<Complex>,
    branches: Vec<BranchRecord>,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct SlidingSummary<'a> {
    equilibria: &'a EquilibriumSet,
    winding: Vec<WindingRecord>,
    separatrices: Vec<SeparatrixRecord>,
}

#[derive(Serialize)]
struct ReturnRecord {
    fold_fold: usize,
    location: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    differential: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eigenvalues: Option<[Complex; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    saddle: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    richardson_ok: Option<bool>,
    rays: Vec<InvariantRay>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl ReturnRecord {
    fn from_result(k: usize, at: &Point3, r: Result<FirstReturn, String>) -> Self {
        let location = [at[0], at[1], at[2]];
        match r {
            Ok(m) => ReturnRecord {
                fold_fold: k,
                location,
                differential: Some([
                    [m.differential[(0, 0)], m.differential[(0, 1)]],
                    [m.differential[(1, 0)], m.differential[(1, 1)]],
                ]),
                eigenvalues: Some(m.spectrum.values),
                saddle: Some(m.saddle),
                richardson_ok: Some(m.richardson_ok),
                rays: m.rays,
                error: None,
            },
            Err(e) => ReturnRecord {
                fold_fold: k,
                location,
                differential: None,
                eigenvalues: None,
                saddle: None,
                richardson_ok: None,
                rays: Vec::new(),
                error: Some(e),
            },
        }
    }
}

#[derive(Serialize)]
struct FlowSummary {
    sheets: Vec<SheetSummary>,
    first_returns: Vec<ReturnRecord>,
    trajectories: Vec<TrajectorySummary>,
}

#[derive(Serialize)]
struct SheetSummary {
    sheet_id: usize,
    curve: usize,
    side: &'static str,
    rows: usize,
    skipped_nodes: usize,
}

#[derive(Serialize)]
struct TrajectorySummary {
    traj_id: usize,
    start: [f64; 3],
    end: filippov_core::flow::Termination,
    duration: f64,
    arcs: usize,
    ambiguous: bool,
}

/// Rows per exported sheet and grid columns per row.
const SHEET_ROWS: usize = 40;
const SHEET_COLUMNS: usize = 24;

/// Saturates every traced curve, sampling at most `SHEET_ROWS` fold/cusp nodes.
fn saturate_curves(sys: &PwsSystem, t: &TangencyAnalysis, cfg: &AnalysisConfig) -> (Vec<SaturatedManifold>, Vec<SheetSummary>) {
    let lambda = cfg.effort.lambda * sys.domain().diameter();
    let (mut sheets, mut summary) = (Vec::new(), Vec::new());
    for (ci, c) in t.curves.iter().enumerate() {
        let eligible: Vec<usize> = (0..c.nodes.len())
            .filter(|&i| {
                matches!(
                    c.nodes[i].kind,
                    SingularityKind::VisibleFold | SingularityKind::InvisibleFold | SingularityKind::Cusp { .. }
                )
            })
            .collect();
        let stride = eligible.len().div_ceil(SHEET_ROWS).max(1);
        let mut rows = Vec::new();
        let mut skipped = 0;
        for &i in eligible.iter().step_by(stride) {
            match saturate_tangency_curve(sys, c, i..i + 1, lambda, cfg.effort.sector_horizon, cfg.effort.max_steps) {
                Ok(m) => rows.extend(m.rows),
                Err(_) => skipped += 1,
            }
        }
        if rows.is_empty() {
            continue;
        }
        summary.push(SheetSummary {
            sheet_id: sheets.len(),
            curve: ci,
            side: c.side.name(),
            rows: rows.len(),
            skipped_nodes: skipped,
        });
        sheets.push(SaturatedManifold { side: c.side, lambda, rows });
    }
    (sheets, summary)
}

/// Filippov trajectories from each start point.
pub fn integrate_all(sys: &PwsSystem, starts: &[[f64; 3]], horizon: f64, max_steps: usize) -> Result<Vec<Trajectory>, String> {
    starts
        .iter()
        .map(|s| {
            integrate_filippov_with_budget(sys, &Point3::from(*s), horizon, max_steps)
                .map_err(|e| format!("trajectory from ({}, {}, {}): {e}", s[0], s[1], s[2]))
        })
        .collect()
}

fn trajectory_summaries(starts: &[[f64; 3]], trajs: &[Trajectory]) -> Vec<TrajectorySummary> {
    starts
        .iter()
        .zip(trajs)
        .enumerate()
        .map(|(i, (s, tr))| TrajectorySummary {
            traj_id: i,
            start: *s,
            end: tr.end,
            duration: tr.duration(),
            arcs: tr.arcs.len(),
            ambiguous: tr.is_ambiguous(),
        })
        .collect()
}

/// Runs every stage up to and including `until`, writing into `out`.
pub fn run_pipeline(cfg: &AnalysisConfig, until: Stage, out: &Path) -> Result<RunOutcome, PipelineError> {
    let resolved = cfg.resolve()?;
    let digest = cfg.digest()?;
    let sys = cfg.system()?;
    let mut w = Writer {
        dir: out.to_path_buf(),
        manifest: RunManifest::new(sys.name(), &digest),
    };
    let res = resolved.resolution;
    let effort = resolved.effort;

    let mut clock = Instant::now();
    let mut done = |w: &mut Writer, stage: Stage| {
        w.manifest.stages.push(StageRecord {
            stage: stage.name().to_string(),
            seconds: clock.elapsed().as_secs_f64(),
        });
        clock = Instant::now();
        stage >= until
    };
    let fail = |mut w: Writer, stage: Stage, message: String| {
        w.manifest.failure = Some(StageFailure {
            stage: stage.name().to_string(),
            message: message.clone(),
        });
        w.finish()?;
        Err(PipelineError::Stage { stage, message })
    };

    // fields
    let lie = [Side::X, Side::Y]
        .into_iter()
        .map(|s| (s.name(), [1, 2, 3].map(|k| sys.lie_expr(s, k).to_string())))
        .collect();
    let fs = resolved.system.clone();
    w.put(
        "fields.json",
        &export::json(&FieldsSummary {
            name: sys.name(),
            f: fs.f.unwrap_or_default(),
            x: fs.x.unwrap_or_default(),
            y: fs.y.unwrap_or_default(),
            domain: resolved.domain.expect("resolved configs carry a domain"),
            scale: sys.scale(),
            lie,
        }),
    )?;
    w.put("config.toml", &resolved_text(&resolved))?;
    if done(&mut w, Stage::Fields) {
        return Ok(RunOutcome { manifest: w.finish()?, report: None });
    }

    // manifold
    let mesh = match build_mesh(&sys, res.mesh) {
        Ok(m) => m,
        Err(e) => return fail(w, Stage::Manifold, e.to_string()),
    };
    w.put("mesh_vertices.csv", &export::mesh_vertices_csv(&mesh))?;
    w.put("mesh_triangles.csv", &export::mesh_triangles_csv(&mesh))?;
    w.put("mesh.json", &export::json(&mesh_summary(&mesh)))?;
    if done(&mut w, Stage::Manifold) {
        return Ok(RunOutcome { manifest: w.finish()?, report: None });
    }

    // tangency
    let tangency = TangencyAnalysis::run(&sys, &res);
    let elementary = elementary_check(&sys, &tangency, Some(&mesh));
    w.put("curves.csv", &export::curves_csv(&tangency))?;
    w.put("tangency.json", &export::json(&tangency_summary(&tangency, &elementary)))?;
    if done(&mut w, Stage::Tangency) {
        return Ok(RunOutcome { manifest: w.finish()?, report: None });
    }
    if elementary.status == Status::Violated {
        // later stages are undefined; the report records why
        let analysis = Analysis {
            mesh,
            tangency,
            elementary,
            blocks: Vec::new(),
            equilibria: EquilibriumSet::default(),
        };
        let report = evaluate(&sys, &analysis, &effort);
        w.put("report.json", &export::report_json(&report, &digest))?;
        let note = analysis.elementary.witness.note.clone();
        return fail(w, Stage::Tangency, format!("G violated ({note}); stopping before sliding analysis"));
    }

    // sliding
    let all_equilibria = find_pseudo_equilibria(&sys, &mesh, None, &tangency);
    let winding = tangency
        .curves
        .iter()
        .enumerate()
        .filter(|(_, c)| c.closed())
        .map(|(i, c)| match winding_index(&sys, c) {
            Ok(r) => WindingRecord { curve: i, cusps: c.cusp_count(), report: Some(r), error: None },
            Err(e) => WindingRecord { curve: i, cusps: c.cusp_count(), report: None, error: Some(e.to_string()) },
        })
        .collect();
    let sets: Vec<(usize, Result<SeparatrixSet, String>)> = tangency
        .fold_folds
        .iter()
        .enumerate()
        .map(|(k, ff)| (k, sigma_separatrices(&sys, ff, &effort).map_err(|e| e.to_string())))
        .collect();
    let mut orbits = Vec::new();
    let mut separatrices = Vec::new();
    for (k, set) in &sets {
        let at = tangency.fold_folds[*k].location;
        let rec = match set {
            Ok(s) => SeparatrixRecord {
                fold_fold: *k,
                origin: [at[0], at[1], at[2]],
                kind: Some(s.kind),
                eigenvalues: s.eigenvalues.to_vec(),
                branches: s
                    .branches
                    .iter()
                    .map(|b| {
                        orbits.push(&b.orbit);
                        BranchRecord {
                            orbit_id: orbits.len() - 1,
                            direction: [b.direction[0], b.direction[1], b.direction[2]],
                            eigenvalue: b.eigenvalue,
                            role: b.role,
                            end: b.orbit.end,
                        }
                    })
                    .collect(),
                notes: s.notes.clone(),
            },
            Err(e) => SeparatrixRecord {
                fold_fold: *k,
                origin: [at[0], at[1], at[2]],
                kind: None,
                eigenvalues: Vec::new(),
                branches: Vec::new(),
                notes: vec![e.clone()],
            },
        };
        separatrices.push(rec);
    }
    w.put("orbits.csv", &export::orbits_csv(&sys, &orbits))?;
    w.put(
        "sliding.json",
        &export::json(&SlidingSummary {
            equilibria: &all_equilibria,
            winding,
            separatrices,
        }),
    )?;
    if done(&mut w, Stage::Sliding) {
        return Ok(RunOutcome { manifest: w.finish()?, report: None });
    }

    // blocks
    let blocks: Vec<SigmaBlock> = match extract_blocks(&mesh, &tangency, &elementary) {
        Ok(b) => b,
        Err(e) => return fail(w, Stage::Blocks, e.to_string()),
    };
    w.put("blocks.json", &export::blocks_json(&tangency, &blocks))?;
    w.put("regions.csv", &export::regions_csv(&mesh, &blocks))?;
    if done(&mut w, Stage::Blocks) {
        return Ok(RunOutcome { manifest: w.finish()?, report: None });
    }

    // flow
    let (sheets, sheet_summary) = saturate_curves(&sys, &tangency, &resolved);
    let opts = ReturnOptions::from_effort(&sys, &effort);
    let first_returns = tangency
        .fold_folds
        .iter()
        .enumerate()
        .filter(|(_, ff)| ff.kind.fold_fold_type() == Some(FoldFoldType::E))
        .map(|(k, ff)| ReturnRecord::from_result(k, &ff.location, first_return_map(&sys, ff, &opts).map_err(|e| e.to_string())))
        .collect();
    let (starts, trajs) = match &resolved.integrate {
        Some(i) => match integrate_all(&sys, &i.starts, i.horizon, effort.max_steps) {
            Ok(t) => (i.starts.clone(), t),
            Err(e) => return fail(w, Stage::Flow, e),
        },
        None => (Vec::new(), Vec::new()),
    };
    w.put("manifolds.csv", &export::manifolds_csv(&sheets, SHEET_COLUMNS))?;
    if !trajs.is_empty() {
        w.put("trajectories.csv", &export::trajectories_csv(&trajs))?;
        w.put("events.json", &export::events_json(&trajs))?;
    }
    w.put(
        "flow.json",
        &export::json(&FlowSummary {
            sheets: sheet_summary,
            first_returns,
            trajectories: trajectory_summaries(&starts, &trajs),
        }),
    )?;
    if done(&mut w, Stage::Flow) {
        return Ok(RunOutcome { manifest: w.finish()?, report: None });
    }

    // stability: pseudo-equilibria restricted to the block cells, as the checks expect
    let cells: Vec<usize> = blocks.iter().flat_map(|b| b.cells.iter().copied()).collect();
    let equilibria = if cells.is_empty() {
        EquilibriumSet::default()
    } else {
        find_pseudo_equilibria(&sys, &mesh, Some(&cells), &tangency)
    };
    let analysis = Analysis {
        mesh,
        tangency,
        elementary,
        blocks,
        equilibria,
    };
    let report = evaluate(&sys, &analysis, &effort);
    w.put("report.json", &export::report_json(&report, &digest))?;
    done(&mut w, Stage::Stability);
    Ok(RunOutcome {
        manifest: w.finish()?,
        report: Some(report),
    })
}

fn resolved_text(r: &AnalysisConfig) -> String {
    toml::to_string(r).expect("configs serialize to TOML")
}

fn mesh_summary(mesh: &SurfaceMesh) -> MeshSummary {
    let mut area_by_label = BTreeMap::new();
    for (t, l) in mesh.cell_labels.iter().enumerate() {
        *area_by_label.entry(l.kind.name()).or_insert(0.0) += mesh.cell_areas[t];
    }
    MeshSummary {
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
        euler_characteristic: mesh.euler_characteristic(),
        closed: mesh.boundary_edges().is_empty(),
        total_area: mesh.total_area(),
        area_by_label,
    }
}

fn tangency_summary<'a>(t: &'a TangencyAnalysis, elementary: &'a Verdict) -> TangencySummary<'a> {
    TangencySummary {
        curves: t
            .curves
            .iter()
            .enumerate()
            .map(|(id, c)| CurveSummary {
                id,
                side: c.side.name(),
                end: c.end,
                nodes: c.nodes.len(),
                length: c.length(),
                cusps: c.cusp_count(),
                fold_folds: c.fold_folds.clone(),
            })
            .collect(),
        fold_folds: &t.fold_folds,
        fold_fold_count_even: t.fold_folds.len() % 2 == 0,
        degenerate: &t.degenerate,
        elementary,
    }
}

/// Trajectories only: the `integrate` command.
pub fn run_integration(cfg: &AnalysisConfig, starts: &[[f64; 3]], horizon: f64, out: &Path) -> Result<RunOutcome, PipelineError> {
    let resolved = cfg.resolve()?;
    let sys = cfg.system()?;
    let mut w = Writer {
        dir: out.to_path_buf(),
        manifest: RunManifest::new(sys.name(), &cfg.digest()?),
    };
    let clock = Instant::now();
    let trajs = match integrate_all(&sys, starts, horizon, resolved.effort.max_steps) {
        Ok(t) => t,
        Err(message) => {
            w.manifest.failure = Some(StageFailure {
                stage: Stage::Flow.name().to_string(),
                message: message.clone(),
            });
            w.finish()?;
            return Err(PipelineError::Stage { stage: Stage::Flow, message });
        }
    };
    w.put("trajectories.csv", &export::trajectories_csv(&trajs))?;
    w.put("events.json", &export::events_json(&trajs))?;
    w.put("trajectories.json", &export::json(&trajectory_summaries(starts, &trajs)))?;
    w.manifest.stages.push(StageRecord {
        stage: "integrate".to_string(),
        seconds: clock.elapsed().as_secs_f64(),
    });
    Ok(RunOutcome { manifest: w.finish()?, report: None })
}
