//! Σ-blocks: connected components of the closure of the sliding region
//! `Σ^ss ∪ Σ^us`, computed on the surface mesh.
//!
//! Sliding cells are joined by edge adjacency. Components whose closures
//! meet only at a fold-fold point (where the sliding sign pattern flips
//! between stable and unstable) are joined through that vertex.

use alloc::vec::Vec;

// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

use thiserror::Error;

use crate::manifold::{RegionKind, SurfaceMesh};
use crate::tangency::{FoldFoldType, SingularityKind, TangencyAnalysis};
use crate::verdict::{Status, Verdict};
use crate::Point3;

/// Vertex matching radius in mesh edge lengths.
const VERTEX_RADIUS: f64 = 3.0;
/// Cells within this many edge lengths of a vertex are removed when splitting
/// a block into sub-regions.
const VERTEX_CUT: f64 = 1.5;
/// A curve node borders a block when a member cell lies within this many edge lengths.
const BOUNDARY_RADIUS: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum BlockError {
    #[error("Σ-blocks are defined for systems with elementary singularities only")]
    NotElementary,
    #[error("fold-fold point {index} is {distance:e} from its curve, beyond the vertex matching radius {radius:e}; refine the mesh")]
    VertexMismatch { index: usize, distance: f64, radius: f64 },
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// A maximal run of nodes of one traced curve along a block's boundary,
/// cut at fold-fold vertices.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryArc {
    pub curve: usize,
    /// Node indices in traversal order.
    pub nodes: Vec<usize>,
    /// Fold-fold indices at the two ends, where the arc was cut at one.
    pub ends: [Option<usize>; 2],
}

/// A closure `R_i` of a component of the block with its vertices removed.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubRegion {
    pub cells: Vec<usize>,
    pub stable_area: f64,
    pub unstable_area: f64,
    /// Fold-fold vertices on its boundary (`a_i`).
    pub vertices: Vec<usize>,
    /// Boundary arcs (indices into the block's arcs).
    pub arcs: Vec<usize>,
    pub holes: usize,
}

impl SubRegion {
    pub fn kind(&self) -> RegionKind {
        if self.stable_area >= self.unstable_area {
            RegionKind::StableSliding
        } else {
            RegionKind::UnstableSliding
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SigmaBlock {
    pub id: usize,
    /// Member mesh cells, ascending.
    pub cells: Vec<usize>,
    pub stable_area: f64,
    pub unstable_area: f64,
    /// Traced curves contributing boundary arcs.
    pub curves: Vec<usize>,
    pub arcs: Vec<BoundaryArc>,
    /// Fold-fold vertices (indices into the analysis list).
    pub vertices: Vec<usize>,
    /// Cusp nodes on the boundary as `(curve, node)`.
    pub cusps: Vec<(usize, usize)>,
    pub sub_regions: Vec<SubRegion>,
    /// Every mesh cell belongs to the block (`U = Σ` at mesh resolution).
    pub trivial: bool,
    /// The block reaches the box boundary, or one of its boundary curves is not closed.
    pub partial: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockSignature {
    pub block: usize,
    pub circles: usize,
    pub arcs: usize,
    pub cusps: usize,
    pub fold_folds: usize,
    /// Fold-fold counts by type `[H, P, E]`.
    pub fold_fold_types: [usize; 3],
    pub sub_regions: usize,
    pub stable_area: f64,
    pub unstable_area: f64,
    pub trivial: bool,
    pub partial: bool,
    /// Even fold-fold count; only asserted for blocks with closed boundary inside the box.
    pub parity_even: Option<bool>,
}

fn cell_is_sliding(mesh: &SurfaceMesh, t: usize) -> bool {
    mesh.cell_labels[t].kind.is_sliding()
}

fn nearest_in<'a>(mesh: &SurfaceMesh, cells: impl Iterator<Item = &'a usize>, p: &Point3) -> f64 {
    cells
        .map(|&t| (mesh.cell_centroids[t] - p).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Number of connected components of the boundary-edge graph of a cell set.
fn boundary_loops(mesh: &SurfaceMesh, cells: &[usize], member: &[bool]) -> usize {
    let mut edges = Vec::new();
    for &t in cells {
        let tri = mesh.triangles[t];
        for i in 0..3 {
            let outside = mesh.neighbors[t][i].map_or(true, |n| !member[n]);
            if outside {
                edges.push((tri[(i + 1) % 3], tri[(i + 2) % 3]));
            }
        }
    }
    if edges.is_empty() {
        return 0;
    }
    let mut dsu = Dsu::new(mesh.vertices.len());
    let mut used = alloc::collections::BTreeSet::new();
    for &(a, b) in &edges {
        dsu.union(a, b);
        used.insert(a);
        used.insert(b);
    }
    let roots: alloc::collections::BTreeSet<usize> = used.iter().map(|&v| dsu.find(v)).collect();
    roots.len()
}

/// Extracts the Σ-blocks of a system whose singularities are elementary.
pub fn extract_blocks(
    mesh: &SurfaceMesh,
    analysis: &TangencyAnalysis,
    elementary: &Verdict,
) -> Result<Vec<SigmaBlock>, BlockError> {
    if elementary.status == Status::Violated {
        return Err(BlockError::NotElementary);
    }
    let n = mesh.triangles.len();
    let edge = mesh.max_edge;

    // member cells: sliding, plus tangency-band cells touching sliding ones
    let mut member = alloc::vec![false; n];
    for t in 0..n {
        member[t] = cell_is_sliding(mesh, t)
            || (mesh.cell_labels[t].kind.is_tangency() && mesh.cell_neighbors(t).any(|m| cell_is_sliding(mesh, m)));
    }
    let mut dsu = Dsu::new(n);
    for t in 0..n {
        if !member[t] {
            continue;
        }
        for m in mesh.cell_neighbors(t) {
            if member[m] {
                dsu.union(t, m);
            }
        }
    }
    // closures meeting at a fold-fold point
    for ff in &analysis.fold_folds {
        let near: Vec<usize> = (0..n)
            .filter(|&t| member[t] && (mesh.cell_centroids[t] - ff.location).norm() <= VERTEX_RADIUS * edge)
            .collect();
        for w in near.windows(2) {
            dsu.union(w[0], w[1]);
        }
    }

    // components, numbered by their smallest cell
    let mut roots: Vec<usize> = Vec::new();
    let mut block_of = alloc::vec![None; n];
    for t in 0..n {
        if !member[t] {
            continue;
        }
        let r = dsu.find(t);
        let id = match roots.iter().position(|&x| x == r) {
            Some(i) => i,
            None => {
                roots.push(r);
                roots.len() - 1
            }
        };
        block_of[t] = Some(id);
    }
    let mut blocks: Vec<SigmaBlock> = (0..roots.len())
        .map(|id| SigmaBlock {
            id,
            cells: Vec::new(),
            stable_area: 0.0,
            unstable_area: 0.0,
            curves: Vec::new(),
            arcs: Vec::new(),
            vertices: Vec::new(),
            cusps: Vec::new(),
            sub_regions: Vec::new(),
            trivial: false,
            partial: false,
        })
        .collect();
    for t in 0..n {
        if let Some(b) = block_of[t] {
            let blk = &mut blocks[b];
            blk.cells.push(t);
            match mesh.cell_labels[t].kind {
                RegionKind::StableSliding => blk.stable_area += mesh.cell_areas[t],
                RegionKind::UnstableSliding => blk.unstable_area += mesh.cell_areas[t],
                _ => {}
            }
            if mesh.neighbors[t].iter().any(Option::is_none) {
                blk.partial = true;
            }
        }
    }

    // vertices
    for (k, ff) in analysis.fold_folds.iter().enumerate() {
        for blk in blocks.iter_mut() {
            if nearest_in(mesh, blk.cells.iter(), &ff.location) <= VERTEX_RADIUS * edge {
                blk.vertices.push(k);
            }
        }
    }

    // boundary arcs
    for (ci, curve) in analysis.curves.iter().enumerate() {
        let mut nodes = curve.nodes.len();
        if curve.closed() && nodes > 1 {
            nodes -= 1; // closing duplicate
        }
        if nodes == 0 {
            continue;
        }
        // cut nodes at fold-fold points on this curve
        let mut cuts: Vec<(usize, usize)> = Vec::new();
        for &k in &curve.fold_folds {
            let p = analysis.fold_folds[k].location;
            let (i, d) = (0..nodes)
                .map(|i| (i, (curve.nodes[i].point - p).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("curve has nodes");
            if d > VERTEX_RADIUS * edge {
                return Err(BlockError::VertexMismatch {
                    index: k,
                    distance: d,
                    radius: VERTEX_RADIUS * edge,
                });
            }
            cuts.push((i, k));
        }
        cuts.sort();
        let owner: Vec<Option<usize>> = (0..nodes)
            .map(|i| {
                let p = curve.nodes[i].point;
                blocks
                    .iter()
                    .map(|b| (b.id, nearest_in(mesh, b.cells.iter(), &p)))
                    .filter(|(_, d)| *d <= BOUNDARY_RADIUS * edge)
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(id, _)| id)
            })
            .collect();
        let cut_at = |i: usize| cuts.iter().find(|c| c.0 == i).map(|c| c.1);
        // closed curves are walked from a vertex (if any) once around, back to it
        let start = if curve.closed() { cuts.first().map_or(0, |c| c.0) } else { 0 };
        let order: Vec<usize> = if curve.closed() {
            (0..=nodes).map(|k| (start + k) % nodes).collect()
        } else {
            (0..nodes).collect()
        };
        let mut emit = |run: Vec<usize>, ends: [Option<usize>; 2]| {
            // owner by majority over the nodes that see a block
            let mut votes: Vec<(usize, usize)> = Vec::new();
            for &i in &run {
                if let Some(o) = owner[i] {
                    match votes.iter_mut().find(|v| v.0 == o) {
                        Some(v) => v.1 += 1,
                        None => votes.push((o, 1)),
                    }
                }
            }
            if let Some(&(b, _)) = votes.iter().max_by_key(|v| (v.1, usize::MAX - v.0)) {
                if run.len() >= 2 {
                    blocks[b].arcs.push(BoundaryArc { curve: ci, nodes: run, ends });
                }
            }
        };
        let mut run = alloc::vec![order[0]];
        let mut start_cut = cut_at(order[0]);
        for &i in &order[1..] {
            run.push(i);
            if let Some(c) = cut_at(i) {
                emit(core::mem::replace(&mut run, alloc::vec![i]), [start_cut, Some(c)]);
                start_cut = Some(c);
            }
        }
        if run.len() >= 2 {
            emit(run, [start_cut, None]);
        }
    }

    for blk in blocks.iter_mut() {
        let mut curves: Vec<usize> = blk.arcs.iter().map(|a| a.curve).collect();
        curves.sort_unstable();
        curves.dedup();
        for &c in &curves {
            if !analysis.curves[c].closed() {
                blk.partial = true;
            }
        }
        let mut cusps = Vec::new();
        for a in &blk.arcs {
            for &i in &a.nodes {
                if matches!(analysis.curves[a.curve].nodes[i].kind, SingularityKind::Cusp { .. }) && !cusps.contains(&(a.curve, i)) {
                    cusps.push((a.curve, i));
                }
            }
        }
        cusps.sort_unstable();
        blk.curves = curves;
        blk.cusps = cusps;
        blk.trivial = blk.cells.len() == n;
        blk.sub_regions = decompose_block(mesh, analysis, blk);
    }
    Ok(blocks)
}

/// Splits a block at its fold-fold vertices: removes the cells around each
/// vertex and returns the components of what remains, one per sliding type.
pub fn decompose_block(mesh: &SurfaceMesh, analysis: &TangencyAnalysis, block: &SigmaBlock) -> Vec<SubRegion> {
    let n = mesh.triangles.len();
    let edge = mesh.max_edge;
    let cut: Vec<Point3> = block.vertices.iter().map(|&k| analysis.fold_folds[k].location).collect();
    let mut keep = alloc::vec![false; n];
    for &t in &block.cells {
        keep[t] = cut.iter().all(|v| (mesh.cell_centroids[t] - v).norm() > VERTEX_CUT * edge);
    }
    let kind = |t: usize| match mesh.cell_labels[t].kind {
        RegionKind::UnstableSliding => 1,
        RegionKind::StableSliding => 0,
        _ => 2, // tangency-band cells join either side
    };
    let mut dsu = Dsu::new(n);
    for &t in &block.cells {
        if !keep[t] {
            continue;
        }
        for m in mesh.cell_neighbors(t) {
            if keep[m] && (kind(t) == kind(m) || kind(t) == 2 || kind(m) == 2) {
                dsu.union(t, m);
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &t in &block.cells {
        if !keep[t] {
            continue;
        }
        let r = dsu.find(t);
        match roots.iter().position(|&x| x == r) {
            Some(i) => groups[i].push(t),
            None => {
                roots.push(r);
                groups.push(alloc::vec![t]);
            }
        }
    }
    groups
        .into_iter()
        .map(|cells| {
            let mut member = alloc::vec![false; n];
            for &t in &cells {
                member[t] = true;
            }
            let area = |k: RegionKind| cells.iter().filter(|&&t| mesh.cell_labels[t].kind == k).map(|&t| mesh.cell_areas[t]).sum();
            let vertices = block
                .vertices
                .iter()
                .copied()
                .filter(|&k| nearest_in(mesh, cells.iter(), &analysis.fold_folds[k].location) <= (VERTEX_CUT + 2.0) * edge)
                .collect();
            let arcs = block
                .arcs
                .iter()
                .enumerate()
                .filter(|(_, a)| {
                    let mid = a.nodes[a.nodes.len() / 2];
                    nearest_in(mesh, cells.iter(), &analysis.curves[a.curve].nodes[mid].point) <= BOUNDARY_RADIUS * edge
                })
                .map(|(i, _)| i)
                .collect();
            let loops = boundary_loops(mesh, &cells, &member);
            SubRegion {
                stable_area: area(RegionKind::StableSliding),
                unstable_area: area(RegionKind::UnstableSliding),
                vertices,
                arcs,
                holes: loops.saturating_sub(1),
                cells,
            }
        })
        .collect()
}

pub fn block_signature(analysis: &TangencyAnalysis, block: &SigmaBlock) -> BlockSignature {
    let mut types = [0usize; 3];
    for &k in &block.vertices {
        match analysis.fold_folds[k].kind.fold_fold_type() {
            Some(FoldFoldType::H) => types[0] += 1,
            Some(FoldFoldType::P) => types[1] += 1,
            Some(FoldFoldType::E) => types[2] += 1,
            None => {}
        }
    }
    BlockSignature {
        block: block.id,
        circles: block.curves.len(),
        arcs: block.arcs.len(),
        cusps: block.cusps.len(),
        fold_folds: block.vertices.len(),
        fold_fold_types: types,
        sub_regions: block.sub_regions.len(),
        stable_area: block.stable_area,
        unstable_area: block.unstable_area,
        trivial: block.trivial,
        partial: block.partial,
        parity_even: (!block.partial).then_some(block.vertices.len() % 2 == 0),
    }
}

/// Block id of every mesh cell (`None` outside all blocks).
pub fn cell_block_map(mesh: &SurfaceMesh, blocks: &[SigmaBlock]) -> Vec<Option<usize>> {
    let mut out = alloc::vec![None; mesh.triangles.len()];
    for b in blocks {
        for &t in &b.cells {
            out[t] = Some(b.id);
        }
    }
    out
}
