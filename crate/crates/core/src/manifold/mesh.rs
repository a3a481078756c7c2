//! Marching-tetrahedra surface mesh of `Σ ∩ box`.
//!
//! Each grid cube is split into the six Kuhn tetrahedra (conforming across
//! neighbours), so the extracted surface is edge-manifold. Interior grid
//! planes are offset by a small fraction of a cell, which keeps symmetric
//! surfaces such as `z = 0` from passing exactly through grid nodes.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{arr, label_unchecked, project_to_surface, ManifoldError, RegionLabel};
use crate::fields::PwsSystem;
use crate::Point3;

const GRID_JITTER: f64 = 0.0137;

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point3>,
    pub labels: Vec<RegionLabel>,
    /// Oriented so that `(b − a) × (c − a)` points into `M⁺`.
    pub triangles: Vec<[usize; 3]>,
    /// Label at the projected centroid of each triangle.
    pub cell_labels: Vec<RegionLabel>,
    pub cell_centroids: Vec<Point3>,
    pub cell_areas: Vec<f64>,
    /// Neighbour across the edge opposite corner `i`.
    pub neighbors: Vec<[Option<usize>; 3]>,
    pub mean_edge: f64,
    pub max_edge: f64,
    edge_use: BTreeMap<(usize, usize), u32>,
}

impl SurfaceMesh {
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_use.len() as i64 + self.triangles.len() as i64
    }

    /// Every edge bounds one (boundary) or two (interior) triangles.
    pub fn is_edge_manifold(&self) -> bool {
        self.edge_use.values().all(|&c| c == 1 || c == 2)
    }

    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        self.edge_use
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(&e, _)| e)
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_use.len()
    }

    pub fn total_area(&self) -> f64 {
        self.cell_areas.iter().sum()
    }

    pub fn area_where(&self, pred: impl Fn(usize) -> bool) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| pred(t))
            .map(|t| self.cell_areas[t])
            .sum()
    }

    pub fn cell_neighbors(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[t].iter().flatten().copied()
    }

    pub fn nearest_vertex(&self, p: &Point3) -> Option<usize> {
        (0..self.vertices.len()).min_by(|&a, &b| {
            (self.vertices[a] - p)
                .norm_squared()
                .total_cmp(&(self.vertices[b] - p).norm_squared())
        })
    }
}

fn grid_coordinate(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        i as f64 / n as f64
    } else {
        (i as f64 + GRID_JITTER) / n as f64
    }
}

/// Builds the mesh on an `n × n × n` cell grid over the domain box.
pub fn build_mesh(sys: &PwsSystem, n: usize) -> Result<SurfaceMesh, ManifoldError> {
    let n = n.max(2);
    let dom = sys.domain();
    let side = n + 1;
    let idx = |i: usize, j: usize, k: usize| (i * side + j) * side + k;
    let mut nodes = Vec::with_capacity(side * side * side);
    let mut values = Vec::with_capacity(side * side * side);
    for i in 0..side {
        for j in 0..side {
            for k in 0..side {
                let p = dom.lerp([grid_coordinate(i, n), grid_coordinate(j, n), grid_coordinate(k, n)]);
                values.push(sys.f(&p));
                nodes.push(p);
            }
        }
    }

    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];

    let mut edge_vertex: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut vertices: Vec<Point3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    let mut vertex_on = |a: usize, b: usize, vertices: &mut Vec<Point3>| -> Result<usize, ManifoldError> {
        let key = (a.min(b), a.max(b));
        if let Some(&v) = edge_vertex.get(&key) {
            return Ok(v);
        }
        let (fa, fb) = (values[key.0], values[key.1]);
        let t = fa / (fa - fb);
        let guess = nodes[key.0] + (nodes[key.1] - nodes[key.0]) * t;
        let p = project_to_surface(sys, &guess)?;
        vertices.push(p);
        edge_vertex.insert(key, vertices.len() - 1);
        Ok(vertices.len() - 1)
    };

    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [idx(c[0], c[1], c[2]); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = idx(c[0], c[1], c[2]);
                    }
                    let (pos, neg): (Vec<usize>, Vec<usize>) =
                        tet.iter().partition(|&&v| values[v] >= 0.0);
                    if pos.is_empty() || neg.is_empty() {
                        continue;
                    }
                    let mean = |s: &[usize]| {
                        s.iter().fold(Point3::zeros(), |a, &v| a + nodes[v]) / s.len() as f64
                    };
                    let into_plus = mean(&pos) - mean(&neg);
                    let mut emit = |a: usize, b: usize, c: usize, verts: &Vec<Point3>| {
                        let nrm = (verts[b] - verts[a]).cross(&(verts[c] - verts[a]));
                        if nrm.dot(&into_plus) >= 0.0 {
                            triangles.push([a, b, c]);
                        } else {
                            triangles.push([a, c, b]);
                        }
                    };
                    match (pos.len(), neg.len()) {
                        (1, 3) | (3, 1) => {
                            let (lone, rest) = if pos.len() == 1 { (pos[0], &neg) } else { (neg[0], &pos) };
                            let a = vertex_on(lone, rest[0], &mut vertices)?;
                            let b = vertex_on(lone, rest[1], &mut vertices)?;
                            let c = vertex_on(lone, rest[2], &mut vertices)?;
                            emit(a, b, c, &vertices);
                        }
                        _ => {
                            // quad p0n0 – p0n1 – p1n1 – p1n0
                            let a = vertex_on(pos[0], neg[0], &mut vertices)?;
                            let b = vertex_on(pos[0], neg[1], &mut vertices)?;
                            let c = vertex_on(pos[1], neg[1], &mut vertices)?;
                            let d = vertex_on(pos[1], neg[0], &mut vertices)?;
                            emit(a, b, c, &vertices);
                            emit(a, c, d, &vertices);
                        }
                    }
                }
            }
        }
    }
    if triangles.is_empty() {
        return Err(ManifoldError::EmptySurface);
    }

    let labels = vertices.iter().map(|p| label_unchecked(sys, p)).collect();

    let mut edge_tris: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    let mut cell_centroids = Vec::with_capacity(triangles.len());
    let mut cell_labels = Vec::with_capacity(triangles.len());
    let mut cell_areas = Vec::with_capacity(triangles.len());
    let (mut edge_sum, mut edge_max, mut edge_n) = (0.0f64, 0.0f64, 0usize);
    for (t, tri) in triangles.iter().enumerate() {
        for corner in 0..3 {
            let (a, b) = (tri[(corner + 1) % 3], tri[(corner + 2) % 3]);
            edge_tris.entry((a.min(b), a.max(b))).or_default().push((t, corner));
            let len = (vertices[a] - vertices[b]).norm();
            edge_sum += len;
            edge_max = edge_max.max(len);
            edge_n += 1;
        }
        let [a, b, c] = tri.map(|v| vertices[v]);
        cell_areas.push(0.5 * (b - a).cross(&(c - a)).norm());
        let centroid = (a + b + c) / 3.0;
        let projected = project_to_surface(sys, &centroid).unwrap_or(centroid);
        cell_centroids.push(projected);
        cell_labels.push(label_unchecked(sys, &projected));
    }
    let mut neighbors = alloc::vec![[None; 3]; triangles.len()];
    let mut edge_use = BTreeMap::new();
    for (e, uses) in &edge_tris {
        edge_use.insert(*e, uses.len() as u32);
        if let [(t0, c0), (t1, c1)] = uses[..] {
            neighbors[t0][c0] = Some(t1);
            neighbors[t1][c1] = Some(t0);
        }
    }

    for p in &vertices {
        if sys.grad_f(p).norm() < sys.tolerances().g_min {
            return Err(ManifoldError::Irregular { at: arr(p) });
        }
    }

    Ok(SurfaceMesh {
        vertices,
        labels,
        triangles,
        cell_labels,
        cell_centroids,
        cell_areas,
        neighbors,
        mean_edge: edge_sum / edge_n as f64,
        max_edge: edge_max,
        edge_use,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{lookup, DomainBox};
    use crate::manifold::{classify_point, RegionKind};

    #[test]
    fn sphere_mesh_is_closed_with_euler_two() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let m = build_mesh(&s, 28).unwrap();
        assert!(m.is_edge_manifold());
        assert!(m.boundary_edges().is_empty());
        assert_eq!(m.euler_characteristic(), 2);
        assert!((m.total_area() - 4.0 * core::f64::consts::PI).abs() < 0.05);
        for (p, l) in m.vertices.iter().zip(&m.labels) {
            assert_eq!(classify_point(&s, p).unwrap(), *l);
        }
    }

    #[test]
    fn plane_patch_boundary_lies_on_box_faces() {
        let s = PwsSystem::parse("p", "z", "(0,0,1)", "(0,0,-1)", DomainBox::cube(1.0)).unwrap();
        let m = build_mesh(&s, 10).unwrap();
        assert!(m.is_edge_manifold());
        assert_eq!(m.euler_characteristic(), 1);
        for (a, b) in m.boundary_edges() {
            for v in [a, b] {
                let p = m.vertices[v];
                assert!(p[0].abs() > 0.999 || p[1].abs() > 0.999, "{p:?}");
            }
        }
    }

    #[test]
    fn degenerate_sphere_is_all_tangency() {
        let s = lookup("degenerate-sphere").unwrap().system().unwrap();
        let m = build_mesh(&s, 12).unwrap();
        assert!(m.labels.iter().all(|l| l.kind == RegionKind::TangencyX));
    }

    #[test]
    fn empty_surface() {
        let s = PwsSystem::parse("far", "z-5", "(0,0,1)", "(0,0,1)", DomainBox::cube(1.0)).unwrap();
        assert_eq!(build_mesh(&s, 4).unwrap_err(), ManifoldError::EmptySurface);
    }
}
