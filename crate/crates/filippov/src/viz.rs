//! Plot files cut from a finished run: one polyline or point-set file per
//! curve, orbit, block or sheet, under `viz/` in the run directory.

use std::collections::BTreeMap;
use std::path::Path;

use crate::pipeline::{PipelineError, RunManifest, Writer};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VizKind {
    Curves,
    Regions,
    Orbits,
    Blocks,
    Manifolds,
}

impl VizKind {
    pub const ALL: [VizKind; 5] = [VizKind::Curves, VizKind::Regions, VizKind::Orbits, VizKind::Blocks, VizKind::Manifolds];

    pub fn name(self) -> &'static str {
        match self {
            VizKind::Curves => "curves",
            VizKind::Regions => "regions",
            VizKind::Orbits => "orbits",
            VizKind::Blocks => "blocks",
            VizKind::Manifolds => "manifolds",
        }
    }

    pub fn parse(s: &str) -> Option<VizKind> {
        VizKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

type Table = (csv::StringRecord, Vec<csv::StringRecord>);

fn read_table(dir: &Path, rel: &str) -> Result<Table, PipelineError> {
    let path = dir.join(rel);
    let bad = |e: csv::Error| PipelineError::Manifest(format!("{rel}: {e}"));
    let mut r = csv::Reader::from_path(&path).map_err(bad)?;
    let header = r.headers().map_err(bad)?.clone();
    let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(bad)?;
    Ok((header, rows))
}

fn column(header: &csv::StringRecord, name: &str) -> Result<usize, PipelineError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| PipelineError::Manifest(format!("missing column `{name}`")))
}

/// Rows grouped by the integer in `key`, keeping `keep` columns; groups in id order.
fn split(table: &Table, key: &str, keep: &[&str]) -> Result<BTreeMap<i64, Vec<Vec<String>>>, PipelineError> {
    let (header, rows) = table;
    let k = column(header, key)?;
    let cols = keep.iter().map(|c| column(header, c)).collect::<Result<Vec<_>, _>>()?;
    let mut groups: BTreeMap<i64, Vec<Vec<String>>> = BTreeMap::new();
    for r in rows {
        let id: i64 = r[k].parse().map_err(|_| PipelineError::Manifest(format!("bad `{key}` value `{}`", &r[k])))?;
        groups.entry(id).or_default().push(cols.iter().map(|&c| r[c].to_string()).collect());
    }
    Ok(groups)
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV write");
    for r in rows {
        w.write_record(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV output is UTF-8")
}

/// Writes the plot files for `what` and returns their paths relative to `dir`.
pub fn export_viz(dir: &Path, what: VizKind) -> Result<Vec<String>, PipelineError> {
    let manifest = RunManifest::load(dir)?;
    let need = |rel: &str| {
        if manifest.has_output(rel) {
            Ok(())
        } else {
            Err(PipelineError::MissingArtifact(rel.to_string()))
        }
    };
    let mut files: Vec<(String, String)> = Vec::new();
    let mut per_group = |src: &str, key: &str, keep: &[&str], stem: &str, filter: fn(i64) -> bool| -> Result<(), PipelineError> {
        let groups = split(&read_table(dir, src)?, key, keep)?;
        for (id, rows) in groups.into_iter().filter(|(id, _)| filter(*id)) {
            files.push((format!("viz/{stem}_{id}.csv"), csv_text(keep, &rows)));
        }
        Ok(())
    };
    match what {
        VizKind::Curves => {
            need("curves.csv")?;
            per_group("curves.csv", "curve_id", &["x", "y", "z", "side", "d2", "node_kind"], "curve", |_| true)?;
        }
        VizKind::Regions => {
            need("mesh_vertices.csv")?;
            let (header, rows) = read_table(dir, "mesh_vertices.csv")?;
            let cols = ["x", "y", "z", "label"].map(|c| column(&header, c));
            let cols = cols.into_iter().collect::<Result<Vec<_>, _>>()?;
            let rows: Vec<Vec<String>> = rows.iter().map(|r| cols.iter().map(|&c| r[c].to_string()).collect()).collect();
            files.push(("viz/regions.csv".to_string(), csv_text(&["x", "y", "z", "label"], &rows)));
        }
        VizKind::Orbits => {
            need("orbits.csv")?;
            let keep = ["t", "x", "y", "z", "region_label", "orientation_flag"];
            per_group("orbits.csv", "orbit_id", &keep, "orbit", |_| true)?;
            if manifest.has_output("trajectories.csv") {
                per_group("trajectories.csv", "traj_id", &["arc_index", "arc_kind", "t", "x", "y", "z"], "trajectory", |_| true)?;
            }
        }
        VizKind::Blocks => {
            need("regions.csv")?;
            per_group("regions.csv", "block_id", &["x", "y", "z", "label"], "block", |id| id >= 0)?;
        }
        VizKind::Manifolds => {
            need("manifolds.csv")?;
            per_group("manifolds.csv", "sheet_id", &["row", "col", "x", "y", "z"], "manifold", |_| true)?;
        }
    }

    let mut w = Writer {
        dir: dir.to_path_buf(),
        manifest,
    };
    let mut written = Vec::new();
    for (rel, text) in files {
        w.put(&rel, &text)?;
        written.push(rel);
    }
    w.finish()?;
    Ok(written)
}
