//! Zeros of `F_Z^N`: pseudo-equilibria in the sliding region and the
//! linearization at fold-fold points, from which Σ-separatrices grow.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix2, Vector2};

// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

use super::orbit::{integrate_sliding_orbit, SlidingOptions, SlidingOrbit};
use super::{arr, normalized_field, normalized_jacobian, SlidingError};
use crate::config::Effort;
use crate::fields::PwsSystem;
use crate::linalg::{eigen2, solve3, Complex, Spectrum2};
use crate::manifold::{label_unchecked, ManifoldError, RegionKind, SurfaceChart, SurfaceMesh};
use crate::tangency::{SingularityRecord, TangencyAnalysis};
use crate::Point3;

/// Share of sampled cells with `F_Z^N ≈ 0` above which the zero set is a continuum.
const CONTINUUM_SHARE: f64 = 0.5;
const NEWTON_ITERS: usize = 50;

/// Type of a planar linearization.
///
/// `Center` is the non-hyperbolic case with a complex pair; `NonHyperbolic`
/// covers the remaining cases with a real part inside the margin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LinearKind {
    Saddle,
    Node,
    Focus,
    Center,
    NonHyperbolic,
}

impl LinearKind {
    pub fn from_spectrum(s: &Spectrum2, margin: f64) -> LinearKind {
        let [a, b] = s.values;
        if a.re.abs() <= margin || b.re.abs() <= margin {
            if !s.is_real() {
                LinearKind::Center
            } else {
                LinearKind::NonHyperbolic
            }
        } else if !s.is_real() {
            LinearKind::Focus
        } else if a.re * b.re < 0.0 {
            LinearKind::Saddle
        } else {
            LinearKind::Node
        }
    }

    pub fn is_hyperbolic(self) -> bool {
        !matches!(self, LinearKind::Center | LinearKind::NonHyperbolic)
    }

    pub fn name(self) -> &'static str {
        match self {
            LinearKind::Saddle => "saddle",
            LinearKind::Node => "node",
            LinearKind::Focus => "focus",
            LinearKind::Center => "center",
            LinearKind::NonHyperbolic => "non-hyperbolic",
        }
    }
}

/// `F_Z^N` linearized on `T_pΣ` in an orthonormal chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Linearization {
    pub chart: SurfaceChart,
    pub matrix: Matrix2<f64>,
    pub spectrum: Spectrum2,
    pub kind: LinearKind,
}

impl Linearization {
    /// Eigenvector `i` as a unit vector of `T_pΣ` (real spectra only).
    pub fn direction(&self, i: usize) -> Option<Point3> {
        self.spectrum.vectors.map(|v| {
            let d = self.chart.vector_from_chart(&v[i]);
            d / d.norm()
        })
    }
}

/// `E^T J E` with `E = [e1 e2]`; intrinsic at zeros of `F_Z^N`.
pub fn tangential_linearization(sys: &PwsSystem, p: &Point3) -> Result<Linearization, ManifoldError> {
    let chart = SurfaceChart::at(sys, p)?;
    let j = normalized_jacobian(sys, p);
    let (e1, e2) = (chart.e1, chart.e2);
    let je1 = j * e1;
    let je2 = j * e2;
    let matrix = Matrix2::new(e1.dot(&je1), e1.dot(&je2), e2.dot(&je1), e2.dot(&je2));
    let spectrum = eigen2(&matrix);
    Ok(Linearization {
        chart,
        matrix,
        spectrum,
        kind: LinearKind::from_spectrum(&spectrum, sys.hyperbolicity_margin()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Placement {
    /// Strictly inside `Σ^s`.
    Interior,
    /// On `∂Σ^s` away from fold-fold points.
    Boundary,
    /// At a fold-fold point, where `F_Z^N` always vanishes.
    FoldFold,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PseudoEquilibrium {
    pub location: Point3,
    /// Eigenvalues of the `F_Z^N` differential on `T_pΣ`.
    pub eigenvalues: [Complex; 2],
    pub kind: LinearKind,
    pub placement: Placement,
    pub region: RegionKind,
    /// `Yf − Xf`: `F_Z^N = (Yf − Xf)·F_Z`, so `F_Z` eigenvalues are these divided by it.
    pub reparam_factor: f64,
    /// Distance to the nearest traced tangency curve (infinite if none).
    pub boundary_distance: f64,
}

impl PseudoEquilibrium {
    pub fn interior(&self) -> bool {
        self.placement == Placement::Interior
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquilibriumSet {
    pub equilibria: Vec<PseudoEquilibrium>,
    /// Set when `F_Z^N` vanishes on an open part of the region: the zeros
    /// are not isolated. Holds a sample point.
    pub continuum: Option<Point3>,
}

/// Zeros of `F_Z^N` in `closure(Σ^s)` over the mesh cells `cells` (all cells if `None`).
///
/// Seeds are cells whose centroid value `|F_Z^N|` is a local minimum among
/// mesh neighbours; each is polished by Newton on `(f, e1·F_Z^N, e2·F_Z^N)`.
pub fn find_pseudo_equilibria(
    sys: &PwsSystem,
    mesh: &SurfaceMesh,
    cells: Option<&[usize]>,
    tangency: &TangencyAnalysis,
) -> EquilibriumSet {
    let all: Vec<usize>;
    let cells = match cells {
        Some(c) => c,
        None => {
            all = (0..mesh.triangles.len()).collect();
            &all
        }
    };
    if cells.is_empty() {
        return EquilibriumSet::default();
    }
    let eq_tol = sys.equilibrium_residual();
    let value: Vec<f64> = mesh
        .cell_centroids
        .iter()
        .map(|c| normalized_field(sys, c).norm())
        .collect();

    let flat = cells.iter().filter(|&&t| value[t] <= eq_tol).count();
    if flat as f64 > CONTINUUM_SHARE * cells.len() as f64 {
        let t = *cells.iter().find(|&&t| value[t] <= eq_tol).unwrap();
        return EquilibriumSet {
            equilibria: Vec::new(),
            continuum: Some(mesh.cell_centroids[t]),
        };
    }

    let member = {
        let mut m = alloc::vec![false; mesh.triangles.len()];
        for &t in cells {
            m[t] = true;
        }
        m
    };
    let diam = sys.domain().diameter();
    let merge = 1e-6 * diam;
    let mut found: Vec<PseudoEquilibrium> = Vec::new();
    for &t in cells {
        let local_min = mesh
            .cell_neighbors(t)
            .filter(|&n| member[n])
            .all(|n| value[t] <= value[n]);
        if !local_min {
            continue;
        }
        let Some(p) = newton_zero(sys, &mesh.cell_centroids[t]) else {
            continue;
        };
        // a converged zero must lie near its seed cell
        if (p - mesh.cell_centroids[t]).norm() > 3.0 * mesh.max_edge {
            continue;
        }
        if found.iter().any(|e| (e.location - p).norm() <= merge) {
            continue;
        }
        if let Some(e) = describe(sys, &p, tangency) {
            found.push(e);
        }
    }
    found.sort_by(|a, b| {
        let (p, q) = (a.location, b.location);
        p[0].total_cmp(&q[0])
            .then(p[1].total_cmp(&q[1]))
            .then(p[2].total_cmp(&q[2]))
    });
    EquilibriumSet {
        equilibria: found,
        continuum: None,
    }
}

fn newton_zero(sys: &PwsSystem, seed: &Point3) -> Option<Point3> {
    let eps_f = sys.tolerances().eps_f;
    let eq_tol = sys.equilibrium_residual();
    let slack = 1e-6;
    let mut p = crate::manifold::project_to_surface(sys, seed).ok()?;
    for _ in 0..NEWTON_ITERS {
        let fv = normalized_field(sys, &p);
        let r0 = sys.f(&p);
        if r0.abs() <= eps_f && fv.norm() <= 1e-3 * eq_tol {
            return Some(p);
        }
        let chart = SurfaceChart::at(sys, &p).ok()?;
        let j = normalized_jacobian(sys, &p);
        let rows = [
            sys.grad_f(&p),
            j.transpose() * chart.e1,
            j.transpose() * chart.e2,
        ];
        let r = Point3::new(r0, chart.e1.dot(&fv), chart.e2.dot(&fv));
        let step = solve3(&rows, r)?;
        p -= step;
        if !sys.domain().contains_with_slack(&p, slack) {
            return None;
        }
        if step.norm() <= 1e-15 * (1.0 + p.norm()) {
            break;
        }
    }
    let p = crate::manifold::project_to_surface(sys, &p).ok()?;
    (normalized_field(sys, &p).norm() <= eq_tol).then_some(p)
}

fn describe(sys: &PwsSystem, p: &Point3, tangency: &TangencyAnalysis) -> Option<PseudoEquilibrium> {
    let label = label_unchecked(sys, p);
    if label.kind == RegionKind::Crossing {
        // a "virtual" zero outside the closure of the sliding region
        return None;
    }
    let lin = tangential_linearization(sys, p).ok()?;
    let diam = sys.domain().diameter();
    let near_ff = tangency
        .fold_folds
        .iter()
        .any(|ff| (ff.location - p).norm() <= 1e-6 * diam);
    let placement = if near_ff || label.kind == RegionKind::TangencyBoth {
        Placement::FoldFold
    } else if label.kind.is_tangency() {
        Placement::Boundary
    } else {
        Placement::Interior
    };
    let boundary_distance = tangency
        .curves
        .iter()
        .map(|c| c.distance_to(p))
        .fold(f64::INFINITY, f64::min);
    Some(PseudoEquilibrium {
        location: *p,
        eigenvalues: lin.spectrum.values,
        kind: lin.kind,
        placement,
        region: label.kind,
        reparam_factor: label.yf - label.xf,
        boundary_distance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SeparatrixRole {
    SaddleSeparatrix,
    StrongNodeManifold,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SigmaSeparatrix {
    pub origin: Point3,
    /// Unit branch direction in `T_pΣ`.
    pub direction: Point3,
    pub eigenvalue: f64,
    pub role: SeparatrixRole,
    pub orbit: SlidingOrbit,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeparatrixSet {
    pub origin: Point3,
    pub kind: LinearKind,
    pub eigenvalues: [Complex; 2],
    pub branches: Vec<SigmaSeparatrix>,
    /// Why branches are missing (linear type, or an eigen-ray outside `closure(Σ^s)`).
    pub notes: Vec<String>,
}

/// Σ-separatrices at a fold-fold point: the four eigen-branches of a saddle
/// of `F_Z^N`, or the two strong-eigenvector branches of a node with
/// distinct eigenvalues; empty for foci and centers.
///
/// Eigen-rays that start outside `closure(Σ^s)` carry no sliding orbit and
/// are noted rather than grown.
pub fn sigma_separatrices(
    sys: &PwsSystem,
    ff: &SingularityRecord,
    effort: &Effort,
) -> Result<SeparatrixSet, SlidingError> {
    let p = ff.location;
    if ff.side.is_some() || ff.kind.fold_fold_type().is_none() {
        return Err(SlidingError::NotFoldFold { at: arr(&p) });
    }
    separatrices_at(sys, &p, effort)
}

/// Eigen-branches of `F_Z^N` grown from any zero `p` on `closure(Σ^s)`
/// (fold-fold points and pseudo-equilibria alike).
pub fn separatrices_at(sys: &PwsSystem, p: &Point3, effort: &Effort) -> Result<SeparatrixSet, SlidingError> {
    use alloc::format;
    let p = *p;
    let lin = tangential_linearization(sys, &p)?;
    let mut out = SeparatrixSet {
        origin: p,
        kind: lin.kind,
        eigenvalues: lin.spectrum.values,
        branches: Vec::new(),
        notes: Vec::new(),
    };
    let rays: Vec<(usize, SeparatrixRole)> = match lin.kind {
        LinearKind::Saddle => alloc::vec![(0, SeparatrixRole::SaddleSeparatrix), (1, SeparatrixRole::SaddleSeparatrix)],
        LinearKind::Node => {
            let [a, b] = lin.spectrum.values;
            if (a.re.abs() - b.re.abs()).abs() <= sys.hyperbolicity_margin() {
                out.notes.push(String::from("node with equal eigenvalues: no strong direction"));
                alloc::vec![]
            } else {
                let strong = if a.re.abs() > b.re.abs() { 0 } else { 1 };
                alloc::vec![(strong, SeparatrixRole::StrongNodeManifold)]
            }
        }
        other => {
            out.notes.push(format!("{} linearization: no Σ-separatrix", other.name()));
            alloc::vec![]
        }
    };
    let r0 = effort.chart_radius * sys.domain().diameter();
    for (i, role) in rays {
        let lambda = lin.spectrum.values[i].re;
        let v = lin.spectrum.vectors.expect("real spectrum")[i];
        for sgn in [1.0, -1.0] {
            let u: Vector2<f64> = v * (sgn * r0);
            let start = lin.chart.from_chart(sys, &u)?;
            let kind = label_unchecked(sys, &start).kind;
            let dir = lin.chart.vector_from_chart(&(v * sgn));
            if !(kind.is_sliding() || kind.is_tangency()) {
                out.notes.push(format!(
                    "eigen-ray ({:.3}, {:.3}, {:.3}) lies in the crossing region",
                    dir[0], dir[1], dir[2]
                ));
                continue;
            }
            let mut opts = SlidingOptions::new(effort.t_conn);
            opts.max_steps = effort.max_steps;
            opts.backward = lambda < 0.0;
            let orbit = integrate_sliding_orbit(sys, &start, &opts)?;
            out.branches.push(SigmaSeparatrix {
                origin: p,
                direction: dir,
                eigenvalue: lambda,
                role,
                orbit,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Resolution;
    use crate::fields::{lookup, DomainBox};
    use crate::manifold::build_mesh;

    fn run(sys: &PwsSystem) -> (EquilibriumSet, TangencyAnalysis) {
        let a = TangencyAnalysis::run(sys, &Resolution::default());
        let m = build_mesh(sys, 16).unwrap();
        (find_pseudo_equilibria(sys, &m, None, &a), a)
    }

    #[test]
    fn sliding_node_at_origin() {
        let s = lookup("sliding-node").unwrap().system().unwrap();
        let (set, _) = run(&s);
        assert_eq!(set.equilibria.len(), 1);
        let e = &set.equilibria[0];
        assert!(e.location.norm() < 1e-8);
        for l in e.eigenvalues {
            assert!((l.re - 1.0).abs() < 1e-6 && l.im == 0.0);
        }
        assert_eq!(e.kind, LinearKind::Node);
        assert!(e.interior());
        assert_eq!(e.reparam_factor, 2.0);
    }

    #[test]
    fn sphere_zeros_are_fold_folds() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let (set, _) = run(&s);
        assert!(set.continuum.is_none());
        assert_eq!(set.equilibria.len(), 2);
        for e in &set.equilibria {
            assert_eq!(e.placement, Placement::FoldFold);
            assert!(e.location[0].abs() < 1e-9 && e.location[2].abs() < 1e-9);
        }
    }

    #[test]
    fn identical_fields_give_a_continuum() {
        let s = PwsSystem::parse("same", "z", "(1,x,2)", "(1,x,2)", DomainBox::cube(1.0)).unwrap();
        let (set, _) = run(&s);
        assert!(set.continuum.is_some());
        assert!(set.equilibria.is_empty());
    }

    #[test]
    fn sphere_fold_fold_is_a_center() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let a = TangencyAnalysis::run(&s, &Resolution::default());
        let ff = a.fold_folds.iter().find(|r| r.location[1] > 0.0).unwrap();
        let set = sigma_separatrices(&s, ff, &Effort::default()).unwrap();
        assert_eq!(set.kind, LinearKind::Center);
        assert!(set.branches.is_empty());
        for l in set.eigenvalues {
            assert!(l.re.abs() < 1e-12 && (l.im.abs() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn saddle_fold_fold_has_four_branches() {
        // F_Z^N at the origin linearizes to a saddle whose four rays are all sliding
        let s = PwsSystem::parse("saddle-ff", "z", "(-1,-3,3*x)", "(2,0,-x-3*y)", DomainBox::cube(1.0)).unwrap();
        let a = TangencyAnalysis::run(&s, &Resolution::default());
        assert_eq!(a.fold_folds.len(), 1);
        let set = sigma_separatrices(&s, &a.fold_folds[0], &Effort::default()).unwrap();
        assert_eq!(set.kind, LinearKind::Saddle);
        assert_eq!(set.branches.len(), 4, "{:?}", set.notes);
        // independent eigen-decomposition of the hand-computed matrix
        let j = normalized_jacobian(&s, &Point3::zeros());
        let m = nalgebra::Matrix2::new(j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]);
        let ev = m.complex_eigenvalues();
        let mut re: Vec<f64> = ev.iter().map(|c| c.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] - set.eigenvalues[0].re).abs() < 1e-9);
        assert!((re[1] - set.eigenvalues[1].re).abs() < 1e-9);
    }

    #[test]
    fn non_fold_fold_is_rejected() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let r = crate::tangency::classify_tangency_point(&s, crate::Side::X, &Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(matches!(
            sigma_separatrices(&s, &r, &Effort::default()),
            Err(SlidingError::NotFoldFold { .. })
        ));
    }
}
