//! Winding of `F_Z^N` along a closed tangency curve, measured against the
//! curve's own tangent frame `(T, N × T)`.

use alloc::vec::Vec;

// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

use super::{arr, normalized_field, SlidingError};
use crate::fields::{PwsSystem, Side};
use crate::linalg::{min_norm_step, wrap_angle};
use crate::tangency::{SingularityKind, TangencyCurve};
use crate::Point3;

/// Largest frame-angle increment accepted between consecutive samples.
const MAX_INCREMENT: f64 = 0.5;
const REFINE_PASSES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindingReport {
    pub index: i32,
    /// Total turning divided by `2π`, before rounding.
    pub raw: f64,
    /// Samples after refinement.
    pub samples: usize,
}

/// Newton back onto `{f = 0, Wf = 0}` from a chord midpoint.
fn correct(sys: &PwsSystem, side: Side, q: &Point3) -> Point3 {
    let mut p = *q;
    for _ in 0..20 {
        let r = [sys.f(&p), sys.lie(side, 1, &p)];
        let rows = [sys.grad_f(&p), sys.lie_gradient(side, 1, &p)];
        let Some(step) = min_norm_step(&rows, r) else {
            break;
        };
        p -= step;
        if step.norm() <= 1e-15 * (1.0 + p.norm()) {
            break;
        }
    }
    p
}

/// Frame angle of `F_Z^N` at `p`, with the tangent oriented along `dir`.
fn frame_angle(sys: &PwsSystem, side: Side, p: &Point3, dir: &Point3) -> Result<(f64, Point3), SlidingError> {
    let n = sys.normal(p);
    let mut t = sys.grad_f(p).cross(&sys.lie_gradient(side, 1, p));
    if t.dot(dir) < 0.0 {
        t = -t;
    }
    let t = t / t.norm();
    let f = normalized_field(sys, p);
    if f.norm() <= sys.equilibrium_residual() {
        return Err(SlidingError::ZeroOnCurve { at: arr(p) });
    }
    let b = n.cross(&t);
    Ok((f.dot(&b).atan2(f.dot(&t)), t))
}

/// Discrete winding number of `F_Z^N` along a closed curve, in the traversal
/// direction of its node list (traced closed curves run along `∇f × ∇Wf`).
/// Chords whose frame angle jumps by more than
/// [`MAX_INCREMENT`] are refined by inserting corrected midpoints.
pub fn winding_index(sys: &PwsSystem, curve: &TangencyCurve) -> Result<WindingReport, SlidingError> {
    if !curve.closed() {
        return Err(SlidingError::OpenCurve);
    }
    if !curve.fold_folds.is_empty()
        || curve
            .nodes
            .iter()
            .any(|n| matches!(n.kind, SingularityKind::FoldFold { .. }))
    {
        return Err(SlidingError::CurveHasFoldFold);
    }
    let side = curve.side;
    // drop the closing duplicate
    let mut pts: Vec<Point3> = curve.nodes.iter().map(|n| n.point).collect();
    if pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).norm() <= 1e-12 * (1.0 + pts[0].norm()) {
        pts.pop();
    }
    if pts.len() < 3 {
        return Err(SlidingError::OpenCurve);
    }

    for _ in 0..REFINE_PASSES {
        let m = pts.len();
        let mut angles = Vec::with_capacity(m);
        let mut tangents = Vec::with_capacity(m);
        for i in 0..m {
            let dir = pts[(i + 1) % m] - pts[(i + m - 1) % m];
            let (a, t) = frame_angle(sys, side, &pts[i], &dir)?;
            angles.push(a);
            tangents.push(t);
        }
        let mut total = 0.0;
        let mut bad = Vec::new();
        for i in 0..m {
            let j = (i + 1) % m;
            let d = wrap_angle(angles[j] - angles[i]);
            if d.abs() > MAX_INCREMENT || tangents[i].dot(&tangents[j]) < MAX_INCREMENT.cos() {
                bad.push(i);
            }
            total += d;
        }
        if bad.is_empty() {
            let raw = total / core::f64::consts::TAU;
            let index = raw.round();
            if (raw - index).abs() > 1e-3 {
                return Err(SlidingError::NotIntegral { raw });
            }
            return Ok(WindingReport {
                index: index as i32,
                raw,
                samples: m,
            });
        }
        let mut refined = Vec::with_capacity(m + bad.len());
        let mut b = bad.iter().peekable();
        for i in 0..m {
            refined.push(pts[i]);
            if b.peek() == Some(&&i) {
                b.next();
                let mid = (pts[i] + pts[(i + 1) % m]) * 0.5;
                refined.push(correct(sys, side, &mid));
            }
        }
        pts = refined;
    }
    Err(SlidingError::FrameDiscontinuity { at: arr(&pts[0]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Resolution;
    use crate::fields::{lookup, DomainBox};
    use crate::tangency::TangencyAnalysis;

    #[test]
    fn transverse_equator_has_index_zero() {
        let s = PwsSystem::parse(
            "eq",
            "x^2+y^2+z^2-1",
            "(0,0,1)",
            "(-x,-y,-z)",
            DomainBox::cube(1.5),
        )
        .unwrap();
        let a = TangencyAnalysis::run(&s, &Resolution::default());
        let c = a.side_curves(Side::X).next().unwrap().1;
        assert!(c.closed());
        let w = winding_index(&s, c).unwrap();
        assert_eq!(w.index, 0);
        assert_eq!(c.cusp_count(), 0);
    }

    /// `|#(W³f > 0) − #(W³f < 0)|` over the cusp nodes: cusps of one contact
    /// type each add a half turn of the same sense.
    fn cusp_balance(c: &TangencyCurve) -> i32 {
        c.nodes
            .iter()
            .map(|n| match n.kind {
                SingularityKind::Cusp { sign } => sign as i32,
                _ => 0,
            })
            .sum::<i32>()
            .abs()
    }

    #[test]
    fn two_cusp_circle_turns_once() {
        let s = lookup("sphere-two-cusps").unwrap().system().unwrap();
        let a = TangencyAnalysis::run(&s, &Resolution::default());
        let (_, c) = a.side_curves(Side::X).next().unwrap();
        assert!(c.closed());
        assert_eq!(c.cusp_count(), 2);
        let w = winding_index(&s, c).unwrap();
        // traced closed curves run along ∇f × ∇Xf
        assert_eq!(w.index, 1);
        assert_eq!(2 * w.index.abs(), cusp_balance(c));
        assert_eq!(winding_index(&s, &c.reversed()).unwrap().index, -w.index);
    }

    #[test]
    fn opposite_cusps_cancel() {
        let s = lookup("sphere-opposite-cusps").unwrap().system().unwrap();
        let a = TangencyAnalysis::run(&s, &Resolution::default());
        let (_, c) = a.side_curves(Side::X).next().unwrap();
        assert!(c.closed());
        assert_eq!(c.cusp_count(), 2);
        assert_eq!(winding_index(&s, c).unwrap().index, 0);
        assert_eq!(cusp_balance(c), 0);
    }

    #[test]
    fn open_curve_is_rejected() {
        let s = lookup("fold-visible").unwrap().system().unwrap();
        let a = TangencyAnalysis::run(&s, &Resolution::default());
        let (_, c) = a.side_curves(Side::X).next().unwrap();
        assert_eq!(winding_index(&s, c), Err(SlidingError::OpenCurve));
    }
}
