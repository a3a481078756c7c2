//! Sliding dynamics on `Σ`, always through the normalized field
//! `F_Z^N = Yf·X − Xf·Y`, which is defined and smooth on all of `Σ`.
//! `F_Z` itself is only formed on demand inside `Σ^s`.

mod equilibria;
mod orbit;
mod winding;

pub use equilibria::{
    find_pseudo_equilibria, separatrices_at, sigma_separatrices, tangential_linearization, EquilibriumSet,
    LinearKind, Linearization, Placement, PseudoEquilibrium, SeparatrixRole, SeparatrixSet,
    SigmaSeparatrix,
};
pub use orbit::{integrate_sliding_orbit, integrate_sliding_until, SlidingEnd, SlidingOptions, SlidingOrbit};
pub use winding::{winding_index, WindingReport};

use nalgebra::Matrix3;
use thiserror::Error;

use crate::fields::{PwsSystem, Side};
use crate::linalg::line_angle;
use crate::manifold::{ManifoldError, RegionKind};
use crate::Point3;

fn arr(p: &Point3) -> [f64; 3] {
    [p[0], p[1], p[2]]
}

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum SlidingError {
    #[error("point ({}, {}, {}) is not on Σ (|f| = {residual:e})", at[0], at[1], at[2])]
    OffSurface { at: [f64; 3], residual: f64 },
    #[error("F_Z requested outside the sliding region at ({}, {}, {}) ({})", at[0], at[1], at[2], kind.name())]
    OutsideSliding { at: [f64; 3], kind: RegionKind },
    #[error("sliding step failed at ({}, {}, {})", at[0], at[1], at[2])]
    StepFailure { at: [f64; 3] },
    #[error("({}, {}, {}) is not a fold-fold point", at[0], at[1], at[2])]
    NotFoldFold { at: [f64; 3] },
    #[error("contact type is undefined at the fold-fold point ({}, {}, {})", at[0], at[1], at[2])]
    FoldFoldContact { at: [f64; 3] },
    #[error("({}, {}, {}) is not on the boundary of the sliding region", at[0], at[1], at[2])]
    NotOnBoundary { at: [f64; 3] },
    #[error("winding index needs a closed curve")]
    OpenCurve,
    #[error("winding index is undefined on a curve through a fold-fold point")]
    CurveHasFoldFold,
    #[error("F_Z^N vanishes on the curve at ({}, {}, {})", at[0], at[1], at[2])]
    ZeroOnCurve { at: [f64; 3] },
    #[error("tangent frame still discontinuous after refinement near ({}, {}, {})", at[0], at[1], at[2])]
    FrameDiscontinuity { at: [f64; 3] },
    #[error("total turning {raw} is not within 1e-3 of an integer")]
    NotIntegral { raw: f64 },
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlidingEvaluation {
    /// `F_Z`, present only inside `Σ^s`.
    pub fz: Option<Point3>,
    pub fzn: Point3,
    pub xf: f64,
    pub yf: f64,
}

/// `F_Z^N(p)` with no on-surface check.
#[inline]
pub fn normalized_field(sys: &PwsSystem, p: &Point3) -> Point3 {
    let (xf, yf) = sys.contact(p);
    sys.field(Side::X, p) * yf - sys.field(Side::Y, p) * xf
}

/// Exact Jacobian of the ambient extension of `F_Z^N`:
/// `Yf·DX + X⊗∇Yf − Xf·DY − Y⊗∇Xf`.
pub fn normalized_jacobian(sys: &PwsSystem, p: &Point3) -> Matrix3<f64> {
    let (xf, yf) = sys.contact(p);
    let x = sys.field(Side::X, p);
    let y = sys.field(Side::Y, p);
    let gx = sys.lie_gradient(Side::X, 1, p);
    let gy = sys.lie_gradient(Side::Y, 1, p);
    sys.field_jacobian(Side::X, p) * yf + x * gy.transpose()
        - sys.field_jacobian(Side::Y, p) * xf
        - y * gx.transpose()
}

pub fn sliding_eval(sys: &PwsSystem, p: &Point3) -> Result<SlidingEvaluation, SlidingError> {
    let residual = sys.f(p).abs();
    if residual > sys.tolerances().eps_f {
        return Err(SlidingError::OffSurface { at: arr(p), residual });
    }
    let (xf, yf) = sys.contact(p);
    let fzn = sys.field(Side::X, p) * yf - sys.field(Side::Y, p) * xf;
    let kind = RegionKind::from_contact(xf, yf, sys.tangency_band());
    let fz = kind.is_sliding().then(|| fzn / (yf - xf));
    Ok(SlidingEvaluation { fz, fzn, xf, yf })
}

/// `F_Z(p)`; an error outside `Σ^s`.
pub fn sliding_field(sys: &PwsSystem, p: &Point3) -> Result<Point3, SlidingError> {
    let e = sliding_eval(sys, p)?;
    e.fz.ok_or_else(|| SlidingError::OutsideSliding {
        at: arr(p),
        kind: RegionKind::from_contact(e.xf, e.yf, sys.tangency_band()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ContactType {
    Transverse,
    QuadraticContact,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryContact {
    pub kind: ContactType,
    /// Side whose tangency set carries the boundary at `p`.
    pub side: Side,
    /// Line angle between `F_Z^N` and the boundary tangent.
    pub angle: f64,
    /// Second derivative of `Wf` along the `F_Z^N` orbit through `p`.
    pub second_order: f64,
}

/// Contact of `F_Z^N` with `∂Σ^s` at a boundary point.
///
/// The boundary is `{Wf = 0}` on `Σ`; along an orbit `γ` of `F_Z^N` the
/// rate `d/dt Wf(γ) = ∇Wf·F_Z^N` vanishes exactly at a tangency, and the
/// second derivative `F^T H_Wf F + ∇Wf^T J F` decides quadratic contact. The
/// sign pattern of `Wf` on both sides of the contact is cross-checked by
/// short integration.
pub fn boundary_contact(sys: &PwsSystem, p: &Point3) -> Result<BoundaryContact, SlidingError> {
    let residual = sys.f(p).abs();
    if residual > sys.tolerances().eps_f {
        return Err(SlidingError::OffSurface { at: arr(p), residual });
    }
    let (xf, yf) = sys.contact(p);
    let tol = sys.tangency_residual().max(sys.tangency_band());
    let side = match (xf.abs() <= tol, yf.abs() <= tol) {
        (true, true) => return Err(SlidingError::FoldFoldContact { at: arr(p) }),
        (true, false) => Side::X,
        (false, true) => Side::Y,
        (false, false) => return Err(SlidingError::NotOnBoundary { at: arr(p) }),
    };
    let fzn = normalized_field(sys, p);
    let gw = sys.lie_gradient(side, 1, p);
    let tangent = sys.grad_f(p).cross(&gw);
    let second = fzn.dot(&(sys.lie_hessian(side, 1, p) * fzn))
        + gw.dot(&(normalized_jacobian(sys, p) * fzn));
    let small = sys.equilibrium_residual();
    if fzn.norm() <= small || tangent.norm() <= sys.tolerances().g_min {
        return Ok(BoundaryContact {
            kind: ContactType::Degenerate,
            side,
            angle: 0.0,
            second_order: second,
        });
    }
    let angle = line_angle(&fzn, &tangent);
    let theta_min = sys.tolerances().theta_min;
    if angle > theta_min {
        return Ok(BoundaryContact {
            kind: ContactType::Transverse,
            side,
            angle,
            second_order: second,
        });
    }
    // second-order test, relative to |F|²·(|H| + |J|) magnitudes
    let scale = fzn.norm_squared()
        * (sys.lie_hessian(side, 1, p).norm() + gw.norm() * normalized_jacobian(sys, p).norm());
    let kind = if scale > 0.0 && second.abs() > sys.tolerances().delta * scale && sampled_touch(sys, side, p) {
        ContactType::QuadraticContact
    } else {
        ContactType::Degenerate
    };
    Ok(BoundaryContact {
        kind,
        side,
        angle,
        second_order: second,
    })
}

/// `Wf` has the same strict sign a short time before and after `p` along `F_Z^N`.
fn sampled_touch(sys: &PwsSystem, side: Side, p: &Point3) -> bool {
    let speed = normalized_field(sys, p).norm();
    let dt = 1e-3 * sys.domain().diameter() / speed;
    let mut signs = [0.0; 2];
    for (k, dir) in [1.0, -1.0].into_iter().enumerate() {
        let opts = SlidingOptions {
            horizon: dt,
            backward: dir < 0.0,
            max_steps: 1000,
            fz_time: false,
        };
        let Ok(o) = orbit::integrate_free(sys, p, &opts) else {
            return false;
        };
        signs[k] = sys.lie(side, 1, o.points.last().unwrap_or(p));
    }
    signs[0] * signs[1] > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{lookup, DomainBox};

    fn sys(f: &str, x: &str, y: &str) -> PwsSystem {
        PwsSystem::parse("t", f, x, y, DomainBox::cube(1.0)).unwrap()
    }

    #[test]
    fn sliding_node_field_is_half_radial() {
        let s = lookup("sliding-node").unwrap().system().unwrap();
        let e = sliding_eval(&s, &Point3::new(0.4, -0.2, 0.0)).unwrap();
        assert_eq!(e.fz.unwrap(), Point3::new(0.2, -0.1, 0.0));
        assert_eq!(e.fzn, Point3::new(0.4, -0.2, 0.0));
    }

    #[test]
    fn sphere_normalized_field_is_rotation() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let p = Point3::new(0.6, 0.0, 0.8);
        let e = sliding_eval(&s, &p).unwrap();
        assert_eq!(e.fzn, Point3::new(-1.6, 0.0, 1.2));
        assert_eq!(e.fzn.dot(&s.grad_f(&p)), 0.0);
        // crossing there: no F_Z
        assert!(e.fz.is_none());
        assert!(matches!(sliding_field(&s, &p), Err(SlidingError::OutsideSliding { .. })));
    }

    #[test]
    fn identical_fields_have_vanishing_normalized_field() {
        let s = sys("z", "(x,1,2)", "(x,1,2)");
        assert_eq!(normalized_field(&s, &Point3::new(0.3, 0.1, 0.0)), Point3::zeros());
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let s = lookup("sphere-two-cusps").unwrap().system().unwrap();
        let p = Point3::new(0.3, -0.2, 0.5);
        let j = normalized_jacobian(&s, &p);
        let h = 1e-6;
        for k in 0..3 {
            let mut e = Point3::zeros();
            e[k] = h;
            let col = (normalized_field(&s, &(p + e)) - normalized_field(&s, &(p - e))) / (2.0 * h);
            assert!((col - j.column(k)).norm() < 1e-7);
        }
    }

    #[test]
    fn equator_point_is_transverse() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let c = boundary_contact(&s, &Point3::new(h, h, 0.0)).unwrap();
        assert_eq!(c.kind, ContactType::Transverse);
        assert_eq!(c.side, Side::X);
        assert!(matches!(
            boundary_contact(&s, &Point3::new(0.0, 1.0, 0.0)),
            Err(SlidingError::FoldFoldContact { .. })
        ));
    }

    #[test]
    fn cusp_point_has_quadratic_contact() {
        let s = lookup("cusp").unwrap().system().unwrap();
        let c = boundary_contact(&s, &Point3::zeros()).unwrap();
        assert_eq!(c.kind, ContactType::QuadraticContact);
    }

    #[test]
    fn vanishing_field_on_boundary_is_degenerate() {
        // Xf = y vanishes along y = 0; in the second system F_Z^N = Yf·X vanishes there too
        let s = sys("z", "(0,1,y)", "(0,2,1)");
        let c = boundary_contact(&s, &Point3::new(0.2, 0.0, 0.0)).unwrap();
        assert_eq!(c.kind, ContactType::Transverse);
        let s = sys("z", "(0,0,y)", "(0,0,1)");
        let c = boundary_contact(&s, &Point3::new(0.2, 0.0, 0.0)).unwrap();
        assert_eq!(c.kind, ContactType::Degenerate);
    }
}
