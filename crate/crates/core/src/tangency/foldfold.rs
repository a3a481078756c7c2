//! Intersections of `S_X` and `S_Y`.

use alloc::vec::Vec;


use super::{Diagnostics, Margins, SingularityKind, SingularityRecord, TangencyCurve};
use crate::fields::{PwsSystem, Side};
use crate::linalg::{segment_segment_distance, solve3};
use crate::tangency::DegenerateReason;
use crate::Point3;

/// Newton on `(f, Xf, Yf) = 0`.
fn polish(sys: &PwsSystem, start: &Point3) -> Option<Point3> {
    let mut p = *start;
    for _ in 0..40 {
        let (xf, yf) = sys.contact(&p);
        let r = Point3::new(sys.f(&p), xf, yf);
        let rows = [
            sys.grad_f(&p),
            sys.lie_gradient(Side::X, 1, &p),
            sys.lie_gradient(Side::Y, 1, &p),
        ];
        let d = solve3(&rows, r)?;
        p -= d;
        if d.norm() <= 1e-15 * (1.0 + p.norm()) {
            break;
        }
    }
    let (xf, yf) = sys.contact(&p);
    let ok = sys.f(&p).abs() <= sys.tolerances().eps_f
        && xf.abs() <= sys.tangency_residual()
        && yf.abs() <= sys.tangency_residual();
    ok.then_some(p)
}

/// Sine of the angle between the two curve tangents `∇f × ∇Xf` and `∇f × ∇Yf`.
pub(crate) fn transversality(sys: &PwsSystem, p: &Point3) -> f64 {
    let g = sys.grad_f(p);
    let tx = g.cross(&sys.lie_gradient(Side::X, 1, p));
    let ty = g.cross(&sys.lie_gradient(Side::Y, 1, p));
    let denom = tx.norm() * ty.norm();
    if denom > 0.0 {
        tx.cross(&ty).norm() / denom
    } else {
        0.0
    }
}

fn record(sys: &PwsSystem, p: &Point3, curves: (usize, usize), forced: Option<DegenerateReason>) -> SingularityRecord {
    let mut diagnostics = Diagnostics::at(sys, p);
    diagnostics.transversality = Some(transversality(sys, p));
    let kind = match forced {
        Some(r) => SingularityKind::Degenerate(r),
        None => SingularityKind::from_diagnostics(None, &diagnostics, Margins::of(sys)),
    };
    SingularityRecord {
        location: *p,
        side: None,
        kind,
        diagnostics,
        curves: Some(curves),
    }
}

/// Fold-fold points from pairwise segment proximity, Newton-polished and typed.
///
/// Curve indices in the records refer to positions in `xs` and `ys`.
/// A tangential intersection is returned as a `Degenerate` record.
pub fn find_fold_fold_points(
    sys: &PwsSystem,
    xs: &[TangencyCurve],
    ys: &[TangencyCurve],
) -> Vec<SingularityRecord> {
    let merge = 1e-7 * sys.domain().diameter();
    let mut out: Vec<SingularityRecord> = Vec::new();
    for (i, cx) in xs.iter().enumerate() {
        for (j, cy) in ys.iter().enumerate() {
            for a in cx.nodes.windows(2) {
                let (a0, a1) = (a[0].point, a[1].point);
                let la = (a1 - a0).norm();
                for b in cy.nodes.windows(2) {
                    let (b0, b1) = (b[0].point, b[1].point);
                    let lb = (b1 - b0).norm();
                    let (d, s, t) = segment_segment_distance(&a0, &a1, &b0, &b1);
                    if d > 0.5 * la.max(lb) {
                        continue;
                    }
                    let start = (a0 + (a1 - a0) * s + b0 + (b1 - b0) * t) * 0.5;
                    let candidate = match polish(sys, &start) {
                        Some(p) if sys.domain().contains_with_slack(&p, 1e-9) => {
                            Some(record(sys, &p, (i, j), None))
                        }
                        Some(_) => None,
                        None => {
                            // touching curves make the 3×3 system singular
                            let (xf, yf) = sys.contact(&start);
                            let near = d <= 1e-6 * sys.domain().diameter()
                                && xf.abs() <= 1e3 * sys.tangency_residual()
                                && yf.abs() <= 1e3 * sys.tangency_residual();
                            near.then(|| record(sys, &start, (i, j), Some(DegenerateReason::NonTransversal)))
                        }
                    };
                    if let Some(r) = candidate {
                        let radius = if r.kind.is_degenerate() { 1e4 * merge } else { merge };
                        if out.iter().all(|q| (q.location - r.location).norm() > radius) {
                            out.push(r);
                        }
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| {
        let (p, q) = (a.location, b.location);
        p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])).then(p[2].total_cmp(&q[2]))
    });
    out
}
