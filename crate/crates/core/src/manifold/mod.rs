//! Geometry of the switching manifold `Σ = {f = 0}`.

mod mesh;

pub use mesh::{build_mesh, SurfaceMesh};

use nalgebra::Vector2;
use thiserror::Error;

// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

use crate::fields::{PwsSystem, Side};
use crate::linalg::tangent_frame;
use crate::Point3;

const MAX_NEWTON: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum ManifoldError {
    #[error("projection onto Σ did not converge from ({}, {}, {})", at[0], at[1], at[2])]
    NotConverged { at: [f64; 3] },
    #[error("|∇f| below the regularity floor at ({}, {}, {})", at[0], at[1], at[2])]
    Irregular { at: [f64; 3] },
    #[error("point ({}, {}, {}) is not on Σ (|f| = {residual:e})", at[0], at[1], at[2])]
    OffSurface { at: [f64; 3], residual: f64 },
    #[error("Σ does not meet the domain box")]
    EmptySurface,
}

fn arr(p: &Point3) -> [f64; 3] {
    [p[0], p[1], p[2]]
}

/// Region of `Σ` at a point, from the signs of `Xf` and `Yf`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RegionKind {
    Crossing,
    StableSliding,
    UnstableSliding,
    TangencyX,
    TangencyY,
    TangencyBoth,
}

impl RegionKind {
    /// Pure sign table with tangency band `tau`.
    pub fn from_contact(xf: f64, yf: f64, tau: f64) -> RegionKind {
        let tx = xf.abs() <= tau;
        let ty = yf.abs() <= tau;
        match (tx, ty) {
            (true, true) => RegionKind::TangencyBoth,
            (true, false) => RegionKind::TangencyX,
            (false, true) => RegionKind::TangencyY,
            _ if xf * yf > 0.0 => RegionKind::Crossing,
            _ if xf < 0.0 => RegionKind::StableSliding,
            _ => RegionKind::UnstableSliding,
        }
    }

    pub fn is_sliding(self) -> bool {
        matches!(self, RegionKind::StableSliding | RegionKind::UnstableSliding)
    }

    pub fn is_tangency(self) -> bool {
        matches!(
            self,
            RegionKind::TangencyX | RegionKind::TangencyY | RegionKind::TangencyBoth
        )
    }

    /// Relabel under `(X, Y) → (Y, X)`.
    pub fn swapped(self) -> RegionKind {
        match self {
            RegionKind::StableSliding => RegionKind::UnstableSliding,
            RegionKind::UnstableSliding => RegionKind::StableSliding,
            RegionKind::TangencyX => RegionKind::TangencyY,
            RegionKind::TangencyY => RegionKind::TangencyX,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionKind::Crossing => "crossing",
            RegionKind::StableSliding => "stable_sliding",
            RegionKind::UnstableSliding => "unstable_sliding",
            RegionKind::TangencyX => "tangency_x",
            RegionKind::TangencyY => "tangency_y",
            RegionKind::TangencyBoth => "tangency_both",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionLabel {
    pub kind: RegionKind,
    pub xf: f64,
    pub yf: f64,
}

/// Region label of a point already on `Σ`.
pub fn classify_point(sys: &PwsSystem, p: &Point3) -> Result<RegionLabel, ManifoldError> {
    let residual = sys.f(p).abs();
    if residual > sys.tolerances().eps_f {
        return Err(ManifoldError::OffSurface {
            at: arr(p),
            residual,
        });
    }
    Ok(label_unchecked(sys, p))
}

/// Label from the sign table without the on-surface check.
pub fn label_unchecked(sys: &PwsSystem, p: &Point3) -> RegionLabel {
    let (xf, yf) = sys.contact(p);
    RegionLabel {
        kind: RegionKind::from_contact(xf, yf, sys.tangency_band()),
        xf,
        yf,
    }
}

/// Newton projection along `∇f` onto `Σ`: `p ← p − f ∇f / |∇f|²`.
pub fn project_to_surface(sys: &PwsSystem, q: &Point3) -> Result<Point3, ManifoldError> {
    let eps = sys.tolerances().eps_f;
    let g_min = sys.tolerances().g_min;
    let mut p = *q;
    let mut converged_at = None;
    for it in 0..MAX_NEWTON {
        let v = sys.f(&p);
        if !v.is_finite() {
            break;
        }
        if v.abs() <= eps && converged_at.is_none() {
            converged_at = Some(it);
        }
        // two polishing steps past the tolerance, then stop
        if let Some(c) = converged_at {
            if it >= c + 2 || v == 0.0 {
                return Ok(p);
            }
        }
        let g = sys.grad_f(&p);
        let g2 = g.norm_squared();
        if g2.sqrt() < g_min {
            return Err(ManifoldError::Irregular { at: arr(&p) });
        }
        p -= g * (v / g2);
    }
    if converged_at.is_some() && sys.f(&p).abs() <= eps {
        return Ok(p);
    }
    Err(ManifoldError::NotConverged { at: arr(q) })
}

/// `Σ_λ` point `p + λ N_p`; `λ > 0` lies in `M⁺`.
pub fn lamination_point(sys: &PwsSystem, p: &Point3, lambda: f64) -> Result<Point3, ManifoldError> {
    let g = sys.grad_f(p);
    if g.norm() < sys.tolerances().g_min {
        return Err(ManifoldError::Irregular { at: arr(p) });
    }
    Ok(p + g * (lambda / g.norm()))
}

/// Which side's field owns the half-space containing `q`.
pub fn side_of(sys: &PwsSystem, q: &Point3) -> Side {
    if sys.f(q) >= 0.0 {
        Side::X
    } else {
        Side::Y
    }
}

/// Orthonormal tangent-plane coordinates centred at a surface point.
///
/// Chart points are lifted back to `Σ` along the centre normal, so
/// `to_chart ∘ from_chart` is the identity up to the Newton residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceChart {
    pub origin: Point3,
    pub e1: Point3,
    pub e2: Point3,
    pub normal: Point3,
}

impl SurfaceChart {
    pub fn at(sys: &PwsSystem, origin: &Point3) -> Result<Self, ManifoldError> {
        let g = sys.grad_f(origin);
        if g.norm() < sys.tolerances().g_min {
            return Err(ManifoldError::Irregular { at: arr(origin) });
        }
        let (e1, e2) = tangent_frame(&g);
        Ok(SurfaceChart {
            origin: *origin,
            e1,
            e2,
            normal: g / g.norm(),
        })
    }

    pub fn to_chart(&self, q: &Point3) -> Vector2<f64> {
        let d = q - self.origin;
        Vector2::new(d.dot(&self.e1), d.dot(&self.e2))
    }

    /// Tangent vector expressed in chart coordinates.
    pub fn vector_to_chart(&self, v: &Point3) -> Vector2<f64> {
        Vector2::new(v.dot(&self.e1), v.dot(&self.e2))
    }

    pub fn vector_from_chart(&self, u: &Vector2<f64>) -> Point3 {
        self.e1 * u[0] + self.e2 * u[1]
    }

    pub fn from_chart(&self, sys: &PwsSystem, u: &Vector2<f64>) -> Result<Point3, ManifoldError> {
        let base = self.origin + self.vector_from_chart(u);
        let eps = sys.tolerances().eps_f;
        if !base.iter().all(|c| c.is_finite()) {
            return Err(ManifoldError::NotConverged { at: arr(&base) });
        }
        let mut s = 0.0;
        for _ in 0..MAX_NEWTON {
            let p = base + self.normal * s;
            let d = sys.grad_f(&p).dot(&self.normal);
            if d.abs() < sys.tolerances().g_min {
                return Err(ManifoldError::Irregular { at: arr(&p) });
            }
            let ds = sys.f(&p) / d;
            s -= ds;
            if ds.abs() <= 1e-15 * (1.0 + s.abs()) {
                break;
            }
        }
        let p = base + self.normal * s;
        if sys.f(&p).abs() <= eps {
            Ok(p)
        } else {
            Err(ManifoldError::NotConverged { at: arr(&base) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{lookup, DomainBox};

    fn sphere_ff() -> PwsSystem {
        lookup("sphere-two-foldfold").unwrap().system().unwrap()
    }

    #[test]
    fn radial_projection_onto_sphere() {
        let s = sphere_ff();
        let p = project_to_surface(&s, &Point3::new(0.0, 0.0, 2.0)).unwrap();
        assert!((p - Point3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        let p = project_to_surface(&s, &(Point3::new(3.0, 4.0, 0.0) / 5.0 * 1.2)).unwrap();
        assert!((p - Point3::new(0.6, 0.8, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn plane_projection() {
        let s = PwsSystem::parse("p", "z", "(0,0,1)", "(0,0,1)", DomainBox::cube(1.0)).unwrap();
        let p = project_to_surface(&s, &Point3::new(0.0, 0.0, 0.3)).unwrap();
        assert_eq!(p, Point3::zeros());
    }

    #[test]
    fn irregular_gradient_is_an_error() {
        // f = x² has ∇f = 0 on its zero set
        let tol = crate::Tolerances {
            g_min: 1e-3,
            ..Default::default()
        };
        let s = PwsSystem::parse("sq", "x^2", "(1,0,0)", "(1,0,0)", DomainBox::cube(1.0))
            .unwrap()
            .with_tolerances(tol);
        let e = project_to_surface(&s, &Point3::new(0.3, 0.2, 0.0));
        assert!(matches!(e, Err(ManifoldError::Irregular { .. })));
    }

    #[test]
    fn hand_labels_on_sphere() {
        let s = sphere_ff();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let l = classify_point(&s, &Point3::new(h, 0.0, -h)).unwrap();
        assert_eq!(l.kind, RegionKind::StableSliding);
        assert!((l.xf + 2.0f64.sqrt()).abs() < 1e-12);
        let l = classify_point(&s, &Point3::new(h, 0.0, h)).unwrap();
        assert_eq!(l.kind, RegionKind::Crossing);
        let l = classify_point(&s, &Point3::new(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(l.kind, RegionKind::TangencyBoth);
        assert!(classify_point(&s, &Point3::new(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn lamination_offsets_along_normal() {
        let s = sphere_ff();
        let q = lamination_point(&s, &Point3::new(1.0, 0.0, 0.0), 0.1).unwrap();
        assert!((q - Point3::new(1.1, 0.0, 0.0)).norm() < 1e-15);
        let p = Point3::new(0.6, 0.8, 0.0);
        assert_eq!(lamination_point(&s, &p, 0.0).unwrap(), p);
    }

    #[test]
    fn chart_round_trip() {
        let s = sphere_ff();
        let c = SurfaceChart::at(&s, &Point3::new(0.0, 1.0, 0.0)).unwrap();
        let u = Vector2::new(0.01, -0.02);
        let p = c.from_chart(&s, &u).unwrap();
        assert!(s.f(&p).abs() < 1e-12);
        assert!((c.to_chart(&p) - u).norm() < 1e-14);
    }
}
