//! CSV and JSON renderings of the stage artifacts. Every function returns the
//! file contents; row order follows the artifact order, so equal inputs give
//! byte-identical files.

use filippov_core::blocks::{block_signature, cell_block_map, SigmaBlock};
use filippov_core::flow::{SaturatedManifold, Trajectory};
use filippov_core::manifold::{label_unchecked, SurfaceMesh};
use filippov_core::sliding::SlidingOrbit;
use filippov_core::stability::{Aggregate, Citation, ConditionVerdict, StabilityReport};
use filippov_core::tangency::{SingularityKind, TangencyAnalysis};
use filippov_core::{Point3, PwsSystem};
use serde::Serialize;

/// Shortest round-trip decimal form; also what serde_json uses.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV write");
    for r in rows {
        w.write_record(&r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV output is UTF-8")
}

fn xyz(p: &Point3) -> [String; 3] {
    [num(p[0]), num(p[1]), num(p[2])]
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts serialize to JSON");
    s.push('\n');
    s
}

/// `x,y,z,label` per mesh vertex.
pub fn mesh_vertices_csv(mesh: &SurfaceMesh) -> String {
    let rows = mesh.vertices.iter().zip(&mesh.labels).map(|(p, l)| {
        let mut r = xyz(p).to_vec();
        r.push(l.kind.name().to_string());
        r
    });
    csv_text(&["x", "y", "z", "label"], rows)
}

/// Triangle index list, one row per cell.
pub fn mesh_triangles_csv(mesh: &SurfaceMesh) -> String {
    let rows = mesh.triangles.iter().map(|t| t.iter().map(|i| i.to_string()).collect());
    csv_text(&["a", "b", "c"], rows)
}

fn node_kind(k: &SingularityKind) -> &'static str {
    match k {
        SingularityKind::VisibleFold => "visible_fold",
        SingularityKind::InvisibleFold => "invisible_fold",
        SingularityKind::Cusp { .. } => "cusp",
        SingularityKind::FoldFold { .. } => "fold_fold",
        SingularityKind::Degenerate(_) => "degenerate",
    }
}

/// `curve_id,side,x,y,z,d2,node_kind` over all traced curves.
pub fn curves_csv(t: &TangencyAnalysis) -> String {
    let rows = t.curves.iter().enumerate().flat_map(|(id, c)| {
        c.nodes.iter().map(move |n| {
            let mut r = vec![id.to_string(), c.side.name().to_string()];
            r.extend(xyz(&n.point));
            r.push(num(n.w2));
            r.push(node_kind(&n.kind).to_string());
            r
        })
    });
    csv_text(&["curve_id", "side", "x", "y", "z", "d2", "node_kind"], rows)
}

/// `orbit_id,t,x,y,z,region_label,orientation_flag`; the flag is −1 where
/// `F_Z^N` time runs against `F_Z` time (on `Σ^us`).
pub fn orbits_csv(sys: &PwsSystem, orbits: &[&SlidingOrbit]) -> String {
    let rows = orbits.iter().enumerate().flat_map(|(id, o)| {
        let flag = if o.reversed_against_fz() { "-1" } else { "1" };
        o.points.iter().zip(&o.times).map(move |(p, t)| {
            let mut r = vec![id.to_string(), num(*t)];
            r.extend(xyz(p));
            r.push(label_unchecked(sys, p).kind.name().to_string());
            r.push(flag.to_string());
            r
        })
    });
    csv_text(&["orbit_id", "t", "x", "y", "z", "region_label", "orientation_flag"], rows)
}

/// `traj_id,arc_index,arc_kind,t,x,y,z`.
pub fn trajectories_csv(trajs: &[Trajectory]) -> String {
    let rows = trajs.iter().enumerate().flat_map(|(id, tr)| {
        tr.arcs.iter().enumerate().flat_map(move |(k, a)| {
            a.points.iter().zip(&a.times).map(move |(p, t)| {
                let mut r = vec![id.to_string(), k.to_string(), a.kind.name().to_string(), num(*t)];
                r.extend(xyz(p));
                r
            })
        })
    });
    csv_text(&["traj_id", "arc_index", "arc_kind", "t", "x", "y", "z"], rows)
}

#[derive(Serialize)]
struct EventRecord<'a> {
    traj_id: usize,
    kind: &'a filippov_core::flow::EventKind,
    t: f64,
    point: [f64; 3],
    label: &'static str,
    xf: f64,
    yf: f64,
}

/// Event log of every trajectory.
pub fn events_json(trajs: &[Trajectory]) -> String {
    let log: Vec<EventRecord> = trajs
        .iter()
        .enumerate()
        .flat_map(|(id, tr)| {
            tr.events.iter().map(move |e| EventRecord {
                traj_id: id,
                kind: &e.kind,
                t: e.t,
                point: [e.at[0], e.at[1], e.at[2]],
                label: e.label.name(),
                xf: e.xf,
                yf: e.yf,
            })
        })
        .collect();
    json(&log)
}

/// Region map over cell centroids: `x,y,z,label,block_id` (−1 outside blocks).
pub fn regions_csv(mesh: &SurfaceMesh, blocks: &[SigmaBlock]) -> String {
    let map = cell_block_map(mesh, blocks);
    let rows = mesh.cell_centroids.iter().enumerate().map(|(t, p)| {
        let mut r = xyz(p).to_vec();
        r.push(mesh.cell_labels[t].kind.name().to_string());
        r.push(map[t].map_or("-1".to_string(), |b| b.to_string()));
        r
    });
    csv_text(&["x", "y", "z", "label", "block_id"], rows)
}

#[derive(Serialize)]
struct BlockRecord<'a> {
    #[serde(flatten)]
    block: &'a SigmaBlock,
    signature: filippov_core::blocks::BlockSignature,
}

pub fn blocks_json(t: &TangencyAnalysis, blocks: &[SigmaBlock]) -> String {
    let records: Vec<BlockRecord> = blocks
        .iter()
        .map(|b| BlockRecord {
            block: b,
            signature: block_signature(t, b),
        })
        .collect();
    json(&records)
}

/// `sheet_id,side,row,col,x,y,z`: each saturated sheet as a regular grid
/// (rows along the tangency curve, columns along the flow).
pub fn manifolds_csv(sheets: &[SaturatedManifold], columns: usize) -> String {
    let rows = sheets.iter().enumerate().flat_map(|(id, m)| {
        let side = m.side.name();
        m.grid(columns).into_iter().enumerate().flat_map(move |(i, row)| {
            row.into_iter().enumerate().map(move |(j, p)| {
                let mut r = vec![id.to_string(), side.to_string(), i.to_string(), j.to_string()];
                r.extend(xyz(&p));
                r
            })
        })
    });
    csv_text(&["sheet_id", "side", "row", "col", "x", "y", "z"], rows)
}

#[derive(Serialize)]
struct AggregateRecord {
    verdict: &'static str,
    conditions: Vec<&'static str>,
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    system: &'a str,
    config_digest: &'a str,
    conditions: &'a [ConditionVerdict],
    aggregate: AggregateRecord,
    slr_satisfied: bool,
    citations: &'a [Citation],
}

/// `{system, config_digest, conditions, aggregate, slr_satisfied, citations}`.
pub fn report_json(report: &StabilityReport, digest: &str) -> String {
    let listed = match &report.aggregate {
        Aggregate::Unstable(ids) | Aggregate::Inconclusive(ids) => ids.iter().map(|i| i.name()).collect(),
        _ => Vec::new(),
    };
    json(&ReportDocument {
        system: &report.system,
        config_digest: digest,
        conditions: &report.conditions,
        aggregate: AggregateRecord {
            verdict: report.aggregate.name(),
            conditions: listed,
        },
        slr_satisfied: report.slr_satisfied,
        citations: &report.citations,
    })
}
