//! Local invariant sheets: tangency-curve nodes swept by the owning field,
//! forward and backward, up to the lamination `Σ_{±λ*}`.

use alloc::vec::Vec;
use core::ops::Range;

// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

use super::smooth::{integrate_field, SmoothEnd, Watch};
use super::{arr, FlowError};
use crate::fields::{PwsSystem, Side};
use crate::manifold::project_to_surface;
use crate::ode::dp45_trial;
use crate::tangency::{SingularityKind, TangencyCurve};
use crate::Point3;

/// Longest chord kept in a sheet row, relative to the box diameter.
const ROW_CHORD: f64 = 1e-3;

/// Signed height of `q` above `Σ` (positive in `M⁺`): distance to its
/// projection onto `Σ`, falling back to `f/|∇f|` where projection fails.
pub fn lamination_height(sys: &PwsSystem, q: &Point3) -> f64 {
    let fq = sys.f(q);
    let d = match project_to_surface(sys, q) {
        Ok(p) => (q - p).norm(),
        Err(_) => fq.abs() / sys.grad_f(q).norm().max(f64::MIN_POSITIVE),
    };
    if fq < 0.0 {
        -d
    } else {
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SheetEnd {
    Lamination,
    BoxExit,
    /// The orbit settled on an equilibrium of the field before reaching the lamination.
    Equilibrium,
}

/// The orbit through one base node, ordered from its backward end to its forward end.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SheetRow {
    pub base: Point3,
    pub points: Vec<Point3>,
    /// Flow time relative to the base node (negative on the backward branch).
    pub times: Vec<f64>,
    /// How the backward and forward branches ended.
    pub ends: [SheetEnd; 2],
}

impl SheetRow {
    /// Distance from `p` to this row's polyline.
    pub fn distance_to(&self, p: &Point3) -> f64 {
        self.points
            .windows(2)
            .map(|w| crate::linalg::point_segment_distance(p, &w[0], &w[1]).0)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SaturatedManifold {
    pub side: Side,
    pub lambda: f64,
    pub rows: Vec<SheetRow>,
}

impl SaturatedManifold {
    pub fn distance_to(&self, p: &Point3) -> f64 {
        self.rows.iter().map(|r| r.distance_to(p)).fold(f64::INFINITY, f64::min)
    }

    /// Each row resampled at `n` points evenly spaced in flow time — a
    /// regular grid for export and plotting.
    pub fn grid(&self, n: usize) -> Vec<Vec<Point3>> {
        self.rows
            .iter()
            .map(|r| {
                let (t0, t1) = (r.times[0], *r.times.last().unwrap_or(&r.times[0]));
                (0..n)
                    .map(|k| {
                        let t = if n > 1 { t0 + (t1 - t0) * k as f64 / (n - 1) as f64 } else { t0 };
                        let i = r.times.partition_point(|s| *s < t).clamp(1, r.times.len().max(2) - 1);
                        if r.points.len() < 2 {
                            return r.points[0];
                        }
                        let (ta, tb) = (r.times[i - 1], r.times[i]);
                        let w = if tb > ta { (t - ta) / (tb - ta) } else { 0.0 };
                        r.points[i - 1] + (r.points[i] - r.points[i - 1]) * w
                    })
                    .collect()
            })
            .collect()
    }
}

/// Sweeps the nodes `range` of `curve` by the owning field in both time
/// directions until `|λ| = lambda` (or the box). Cusp nodes need no special
/// handling: the sheet picks up the cubic geometry from the flow itself.
pub fn saturate_tangency_curve(
    sys: &PwsSystem,
    curve: &TangencyCurve,
    range: Range<usize>,
    lambda: f64,
    horizon: f64,
    max_steps: usize,
) -> Result<SaturatedManifold, FlowError> {
    let side = curve.side;
    let mut rows = Vec::with_capacity(range.len());
    for i in range {
        let Some(node) = curve.nodes.get(i) else {
            return Err(FlowError::BadSegment { index: i });
        };
        match node.kind {
            SingularityKind::VisibleFold | SingularityKind::InvisibleFold | SingularityKind::Cusp { .. } => {}
            _ => return Err(FlowError::BadSegment { index: i }),
        }
        let base = node.point;
        let g = |q: &Point3| lambda - lamination_height(sys, q).abs();
        let watch = Watch {
            g: &g,
            rate: None,
            arm: 0.0,
            tol: 1e-3 * sys.tolerances().eps_f,
        };
        let branch = |backward: bool| -> Result<(Vec<Point3>, Vec<f64>, SheetEnd), FlowError> {
            let run = integrate_field(sys, side, &base, backward, horizon, max_steps, Some(&watch))?;
            let end = match run.end {
                SmoothEnd::Event { .. } | SmoothEnd::Touch { .. } => SheetEnd::Lamination,
                SmoothEnd::BoxExit { .. } => SheetEnd::BoxExit,
                SmoothEnd::Equilibrium { .. } => SheetEnd::Equilibrium,
                _ => return Err(FlowError::LaminationNotReached { at: arr(&base) }),
            };
            let (points, times) = densify(sys, side, backward, &run.points, &run.times);
            Ok((points, times, end))
        };
        let (bp, bt, bend) = branch(true)?;
        let (fp, ft, fend) = branch(false)?;
        let mut points: Vec<Point3> = bp.iter().rev().copied().collect();
        let mut times: Vec<f64> = bt.iter().rev().map(|t| -t).collect();
        points.extend(fp.iter().skip(1));
        times.extend(ft.iter().skip(1));
        rows.push(SheetRow {
            base,
            points,
            times,
            ends: [bend, fend],
        });
    }
    Ok(SaturatedManifold { side, lambda, rows })
}

/// Inserts re-integrated intermediate states so no chord exceeds [`ROW_CHORD`].
fn densify(sys: &PwsSystem, side: Side, backward: bool, points: &[Point3], times: &[f64]) -> (Vec<Point3>, Vec<f64>) {
    let dir = if backward { -1.0 } else { 1.0 };
    let rhs = |p: &Point3| sys.field(side, p) * dir;
    let chord = ROW_CHORD * sys.domain().diameter();
    let mut out_p = alloc::vec![points[0]];
    let mut out_t = alloc::vec![times[0]];
    for i in 1..points.len() {
        let k = ((points[i] - points[i - 1]).norm() / chord).ceil().max(1.0) as usize;
        let dt = times[i] - times[i - 1];
        for j in 1..k {
            let s = dt * j as f64 / k as f64;
            out_p.push(dp45_trial(&rhs, &points[i - 1], s).0);
            out_t.push(times[i - 1] + s);
        }
        out_p.push(points[i]);
        out_t.push(times[i]);
    }
    (out_p, out_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Resolution;
    use crate::fields::lookup;
    use crate::tangency::TangencyAnalysis;

    fn fold_curve(name: &str) -> (PwsSystem, TangencyCurve) {
        let s = lookup(name).unwrap().system().unwrap();
        let a = TangencyAnalysis::run(&s, &Resolution::default());
        let c = a.side_curves(Side::X).next().unwrap().1.clone();
        (s, c)
    }

    #[test]
    fn visible_fold_sheet_is_the_parabola() {
        let (s, c) = fold_curve("fold-visible");
        let n = c.nodes.len();
        let m = saturate_tangency_curve(&s, &c, n / 4..3 * n / 4, 0.05, 10.0, 100_000).unwrap();
        for r in &m.rows {
            assert_eq!(r.ends, [SheetEnd::Lamination, SheetEnd::Lamination]);
            let x = r.base[0];
            // W⁺ = {(x, t, t²/2)}
            for (p, t) in r.points.iter().zip(&r.times) {
                assert!((p - Point3::new(x, *t, t * t / 2.0)).norm() < 1e-6);
            }
            assert!((r.points[0][2] - 0.05).abs() < 1e-9 && (r.points.last().unwrap()[2] - 0.05).abs() < 1e-9);
        }
    }

    #[test]
    fn invisible_fold_sheet_hangs_below() {
        let (s, c) = fold_curve("fold-invisible");
        let m = saturate_tangency_curve(&s, &c, 0..c.nodes.len(), 0.05, 10.0, 100_000).unwrap();
        for r in &m.rows {
            assert!(r.points.iter().all(|p| p[2] <= 1e-12));
            assert!((r.points[0][2] + 0.05).abs() < 1e-9 && (r.points.last().unwrap()[2] + 0.05).abs() < 1e-9);
        }
    }

    #[test]
    fn sphere_equator_sheet_is_vertical() {
        let s = PwsSystem::parse("eq", "x^2+y^2+z^2-1", "(0,0,1)", "(-x,-y,-z)", crate::DomainBox::cube(1.5)).unwrap();
        let a = TangencyAnalysis::run(&s, &Resolution::default());
        let c = a.side_curves(Side::X).next().unwrap().1;
        let m = saturate_tangency_curve(&s, c, 0..c.nodes.len(), 0.05, 10.0, 100_000).unwrap();
        for r in &m.rows {
            for p in &r.points {
                assert!((p[0] - r.base[0]).abs() < 1e-12 && (p[1] - r.base[1]).abs() < 1e-12);
            }
            // |p| = 1.05 at both ends
            assert!((r.points[0].norm() - 1.05).abs() < 1e-9);
        }
    }

    #[test]
    fn sheet_is_locally_invariant() {
        let (s, c) = fold_curve("fold-visible");
        let n = c.nodes.len();
        let m = saturate_tangency_curve(&s, &c, n / 3..2 * n / 3, 0.05, 10.0, 100_000).unwrap();
        let r = &m.rows[m.rows.len() / 2];
        let p = r.points[r.points.len() / 3];
        let run = integrate_field(&s, Side::X, &p, false, 0.05, 10_000, None).unwrap();
        for q in &run.points {
            assert!(m.distance_to(q) < 1e-5);
        }
    }
}
