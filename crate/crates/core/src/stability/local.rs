//! Conditions at fold-fold points: F1 (H, E types), F2 (P type), Ξ(P), Ξ(E).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

use super::{effort_record, EffortRecord};
use crate::config::Effort;
use crate::fields::{PwsSystem, Side};
use crate::flow::{first_return_map, involution_point, ReturnOptions};
use crate::linalg::{line_angle, line_angle2, min_norm_step, point_segment_distance};
use crate::manifold::{label_unchecked, RegionKind, SurfaceChart};
use crate::sliding::{
    integrate_sliding_until, normalized_field, tangential_linearization, SlidingEnd, SlidingOptions,
};
use crate::tangency::{FoldFoldType, SingularityRecord, TangencyAnalysis};
use crate::verdict::{Status, Verdict, Witness};
use crate::Point3;

/// Below `CLEAR_FACTOR·θ_min` an angle counts as zero (Violated rather than Inconclusive).
const CLEAR_FACTOR: f64 = 1e-3;
/// Grid points per axis for the Ξ(P) item-2 samples.
const XI_GRID: usize = 9;

pub struct FoldFoldChecks {
    pub f1: Verdict,
    pub f1_effort: EffortRecord,
    pub f2: Verdict,
    pub f2_effort: EffortRecord,
}

/// F1 at hyperbolic/elliptic and F2 at parabolic fold-fold points, each
/// combined (worst first) over the points of its type.
pub fn check_f1_f2(sys: &PwsSystem, tangency: &TangencyAnalysis, effort: &Effort) -> FoldFoldChecks {
    let mut f1: Option<Verdict> = None;
    let mut f2: Option<Verdict> = None;
    for rec in &tangency.fold_folds {
        match rec.kind.fold_fold_type() {
            Some(FoldFoldType::P) => {
                let v = f2_at(sys, rec, effort);
                f2 = Some(f2.map_or(v.clone(), |a| a.worst(v)));
            }
            Some(t) => {
                let v = f1_at(sys, rec, t, effort);
                f1 = Some(f1.map_or(v.clone(), |a| a.worst(v)));
            }
            None => {}
        }
    }
    let diam = sys.domain().diameter();
    FoldFoldChecks {
        f1: f1.unwrap_or_else(|| Verdict::satisfied(Witness::note("vacuous: no fold-fold points of type H or E"))),
        f1_effort: effort_record(&[
            ("chart_radius", effort.chart_radius * diam),
            ("delta_h", sys.tolerances().delta_h),
        ]),
        f2: f2.unwrap_or_else(|| Verdict::satisfied(Witness::note("vacuous: no fold-fold points of type P"))),
        f2_effort: effort_record(&[
            ("sector_radius", effort.sector_radius * diam),
            ("sector_r_min", effort.sector_r_min * effort.sector_radius * diam),
            ("sector_horizon", effort.sector_horizon),
            ("sector_fan", effort.sector_fan as f64),
            ("max_steps", effort.max_steps as f64),
        ]),
    }
}

fn f1_at(sys: &PwsSystem, rec: &SingularityRecord, t: FoldFoldType, effort: &Effort) -> Verdict {
    let p = rec.location;
    let lin = match tangential_linearization(sys, &p) {
        Ok(l) => l,
        Err(e) => return Verdict::inconclusive(Witness::note(format!("no linearization of F_Z^N: {e}")).at(&p)),
    };
    let [a, b] = lin.spectrum.values;
    let wit = |note: String| Witness::note(note).at(&p).with_values(&[a.re, a.im, b.re, b.im]);
    if lin.kind.is_hyperbolic() {
        return Verdict::satisfied(wit(format!("{} fold-fold point: hyperbolic {}", t.letter(), lin.kind.name())));
    }
    let Some(vectors) = lin.spectrum.vectors else {
        return Verdict::inconclusive(wit(format!(
            "{} fold-fold point: linear center; absence of a center manifold cannot be certified",
            t.letter()
        )));
    };
    let margin = sys.hyperbolicity_margin();
    let r = effort.chart_radius * sys.domain().diameter();
    for i in 0..2 {
        if lin.spectrum.values[i].re.abs() > margin {
            continue;
        }
        for sgn in [1.0, -1.0] {
            let q = match lin.chart.from_chart(sys, &(vectors[i] * (sgn * r))) {
                Ok(q) => q,
                Err(e) => return Verdict::inconclusive(wit(format!("center ray not liftable: {e}"))),
            };
            let kind = label_unchecked(sys, &q).kind;
            if kind.is_sliding() || kind.is_tangency() {
                return Verdict::violated(wit(format!(
                    "{} fold-fold point: center direction points into closure(Σ^s) ({})",
                    t.letter(),
                    kind.name()
                ))
                .at(&q));
            }
        }
    }
    Verdict::satisfied(wit(format!("{} fold-fold point: center directions leave closure(Σ^s)", t.letter())))
}

/// Sector transience: a fan of sliding orbits seeded at half the sector
/// radius must leave the sector in both time directions without coming
/// within `r_min` of the fold-fold point.
fn f2_at(sys: &PwsSystem, rec: &SingularityRecord, effort: &Effort) -> Verdict {
    let p = rec.location;
    let lin = match tangential_linearization(sys, &p) {
        Ok(l) => l,
        Err(e) => return Verdict::inconclusive(Witness::note(format!("no linearization of F_Z^N: {e}")).at(&p)),
    };
    let [a, b] = lin.spectrum.values;
    let values = [a.re, a.im, b.re, b.im];
    if lin.kind.is_hyperbolic() {
        return Verdict::satisfied(
            Witness::note(format!("hyperbolic: {} of F_Z^N at the fold-fold point", lin.kind.name()))
                .at(&p)
                .with_values(&values),
        );
    }
    let big_r = effort.sector_radius * sys.domain().diameter();
    let r_min = effort.sector_r_min * big_r;
    let fan = effort.sector_fan.max(4);
    let seeds: Vec<Point3> = (0..fan)
        .filter_map(|k| {
            // offset by half a slot so no seed sits on a chart axis
            let th = 2.0 * PI * (k as f64 + 0.5) / fan as f64;
            let q = lin.chart.from_chart(sys, &(Vector2::new(th.cos(), th.sin()) * (0.5 * big_r))).ok()?;
            label_unchecked(sys, &q).kind.is_sliding().then_some(q)
        })
        .collect();
    if seeds.is_empty() {
        return Verdict::inconclusive(Witness::note("no sliding seed in the sector").at(&p));
    }

    let mut approached: Option<(Point3, f64)> = None;
    let mut open: Option<String> = None;
    let mut runs = 0usize;
    for seed in &seeds {
        for backward in [false, true] {
            let mut opts = SlidingOptions::new(effort.sector_horizon);
            opts.max_steps = effort.max_steps;
            opts.backward = backward;
            let orbit = match integrate_sliding_until(sys, seed, &opts, |q, _| (q - p).norm() > big_r) {
                Ok(o) => o,
                Err(e) => {
                    open.get_or_insert(format!("sector orbit failed: {e}"));
                    continue;
                }
            };
            runs += 1;
            let closest = orbit
                .points
                .windows(2)
                .map(|w| point_segment_distance(&p, &w[0], &w[1]).0)
                .fold((orbit.points[0] - p).norm(), f64::min);
            match orbit.end {
                SlidingEnd::Boundary { .. } | SlidingEnd::Stopped { .. } | SlidingEnd::BoxExit { .. } => {
                    if closest < r_min && approached.is_none() {
                        approached = Some((*seed, closest));
                    }
                }
                SlidingEnd::Equilibrium { at } => {
                    let note = if (at - p).norm() <= r_min {
                        "sector orbit converges to the fold-fold point"
                    } else {
                        "sector orbit stays in the sector (converges to a pseudo-equilibrium)"
                    };
                    return Verdict::violated(Witness::note(note).at(&p).at(seed).at(&at).with_values(&[closest]));
                }
                SlidingEnd::Horizon | SlidingEnd::Budget => {
                    if (orbit.last() - p).norm() <= r_min {
                        return Verdict::violated(
                            Witness::note("sector orbit converges to the fold-fold point")
                                .at(&p)
                                .at(seed)
                                .at(orbit.last())
                                .with_values(&[closest]),
                        );
                    }
                    open.get_or_insert(format!(
                        "sector orbit still inside the sector at the {} (effort exhausted)",
                        if orbit.end == SlidingEnd::Horizon { "horizon" } else { "step budget" }
                    ));
                }
            }
        }
    }
    if let Some(note) = open {
        return Verdict::inconclusive(Witness::note(note).at(&p).with_values(&values));
    }
    if let Some((seed, d)) = approached {
        return Verdict::inconclusive(
            Witness::note("sector orbit passes within r_min of the fold-fold point")
                .at(&p)
                .at(&seed)
                .with_values(&[d, r_min]),
        );
    }
    Verdict::satisfied(
        Witness::note(format!(
            "transient: all {runs} sector orbits ({} seeds, both directions) leave the sector without approaching the fold-fold point; {} linearization",
            seeds.len(),
            lin.kind.name()
        ))
        .at(&p)
        .with_values(&values),
    )
}

fn angle_status(angle: f64, theta_min: f64) -> Status {
    if angle > theta_min {
        Status::Satisfied
    } else if angle <= CLEAR_FACTOR * theta_min {
        Status::Violated
    } else {
        Status::Inconclusive
    }
}

/// Point of the tangency curve `S_side` near `p + s·t` (min-norm Newton on `(f, Wf)`).
fn curve_point(sys: &PwsSystem, side: Side, p: &Point3, t: &Point3, s: f64) -> Option<Point3> {
    let mut q = p + t * s;
    for _ in 0..30 {
        let rows = [sys.grad_f(&q), sys.lie_gradient(side, 1, &q)];
        let step = min_norm_step(&rows, [sys.f(&q), sys.lie(side, 1, &q)])?;
        q -= step;
        if step.norm() <= 1e-15 * (1.0 + q.norm()) {
            break;
        }
    }
    (sys.f(&q).abs() <= sys.tolerances().eps_f).then_some(q)
}

/// Ξ(P) at a parabolic fold-fold point. With `W` the invisible side and `V`
/// the visible one (the roles of X and Y swap when X is the visible side):
/// 1. `φ_W(S_V)` is transversal to `S_V` at `p`;
/// 2. `F_Z^N` and `φ_W* F_Z^N` are transversal on `Σ^ss ∩ φ_W(Σ^us)` (sampled near `p`);
/// 3. `φ_W(S_V)` is transversal to the invariant lines of `F_Z^N` at `p`.
pub fn check_xi_p(sys: &PwsSystem, rec: &SingularityRecord, effort: &Effort) -> Verdict {
    let p = rec.location;
    let lie = rec.diagnostics.lie;
    let (x_vis, y_vis) = (lie[Side::X as usize][1] > 0.0, lie[Side::Y as usize][1] < 0.0);
    let (inv, vis) = match (x_vis, y_vis) {
        (false, true) => (Side::X, Side::Y),
        (true, false) => (Side::Y, Side::X),
        _ => return Verdict::inconclusive(Witness::note("not a parabolic fold-fold point").at(&p)),
    };
    let theta = sys.tolerances().theta_min;
    let opts = ReturnOptions::from_effort(sys, effort);
    let h = opts.radius;
    let undefined = |what: &str, e: &dyn core::fmt::Display| {
        Verdict::inconclusive(Witness::note(format!("φ_{} undefined on {what}: {e}", inv.name())).at(&p))
    };

    // item 1
    let tangent = sys.grad_f(&p).cross(&sys.lie_gradient(vis, 1, &p));
    if tangent.norm() <= sys.tolerances().g_min {
        return Verdict::inconclusive(Witness::note(format!("S_{} has no tangent at p", vis.name())).at(&p));
    }
    let tangent = tangent / tangent.norm();
    let (Some(cp), Some(cm)) = (
        curve_point(sys, vis, &p, &tangent, h),
        curve_point(sys, vis, &p, &tangent, -h),
    ) else {
        return Verdict::inconclusive(Witness::note(format!("S_{} not resolvable at the chart radius", vis.name())).at(&p));
    };
    let (ip, im) = match (involution_point(sys, inv, &cp, &opts), involution_point(sys, inv, &cm, &opts)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return undefined("S_V", &e),
    };
    let image = ip - im;
    let a1 = line_angle(&image, &tangent);

    // item 3
    let lin = match tangential_linearization(sys, &p) {
        Ok(l) => l,
        Err(e) => return Verdict::inconclusive(Witness::note(format!("no linearization of F_Z^N: {e}")).at(&p)),
    };
    let a3 = match lin.spectrum.vectors {
        Some(vs) => vs
            .iter()
            .map(|v| line_angle(&image, &lin.chart.vector_from_chart(v)))
            .fold(f64::INFINITY, f64::min),
        // no invariant line through p: the image curve cannot be tangent to the flow
        None => 0.5 * PI,
    };

    // item 2
    let chart = match SurfaceChart::at(sys, &p) {
        Ok(c) => c,
        Err(e) => return Verdict::inconclusive(Witness::note(format!("no chart at p: {e}")).at(&p)),
    };
    let phi = |u: &Vector2<f64>| -> Option<Vector2<f64>> {
        let q = chart.from_chart(sys, u).ok()?;
        Some(chart.to_chart(&involution_point(sys, inv, &q, &opts).ok()?))
    };
    let field = |u: &Vector2<f64>| -> Option<Vector2<f64>> {
        let q = chart.from_chart(sys, u).ok()?;
        Some(chart.vector_to_chart(&normalized_field(sys, &q)))
    };
    let extent = 4.0 * h;
    let delta = 0.05 * h;
    let mut a2 = 0.5 * PI;
    let mut a2_at: Option<Point3> = None;
    let mut sampled = 0usize;
    let mut skipped = 0usize;
    for i in 0..XI_GRID {
        for j in 0..XI_GRID {
            let u = Vector2::new(
                extent * (2.0 * i as f64 / (XI_GRID - 1) as f64 - 1.0),
                extent * (2.0 * j as f64 / (XI_GRID - 1) as f64 - 1.0),
            );
            if u.norm() < 0.5 * extent / XI_GRID as f64 {
                continue;
            }
            let Ok(q) = chart.from_chart(sys, &u) else { continue };
            if label_unchecked(sys, &q).kind != RegionKind::StableSliding {
                continue;
            }
            let Some(v) = phi(&u) else {
                skipped += 1;
                continue;
            };
            let Ok(qv) = chart.from_chart(sys, &v) else { continue };
            if label_unchecked(sys, &qv).kind != RegionKind::UnstableSliding {
                continue;
            }
            let mut d = Matrix2::zeros();
            let mut ok = true;
            for k in 0..2 {
                let mut e = Vector2::zeros();
                e[k] = delta;
                match (phi(&(v + e)), phi(&(v - e))) {
                    (Some(a), Some(b)) => d.set_column(k, &((a - b) / (2.0 * delta))),
                    _ => ok = false,
                }
            }
            let (Some(fu), Some(fv)) = (field(&u), field(&v)) else { continue };
            if !ok {
                skipped += 1;
                continue;
            }
            sampled += 1;
            let ang = line_angle2(&fu, &(d * fv));
            if ang < a2 {
                a2 = ang;
                a2_at = Some(q);
            }
        }
    }

    let statuses = [angle_status(a1, theta), angle_status(a2, theta), angle_status(a3, theta)];
    let values = [a1, a2, a3, sampled as f64, skipped as f64];
    let names = [
        format!("item 1: φ_{}(S_{}) vs S_{} at p", inv.name(), vis.name(), vis.name()),
        format!("item 2: F_Z^N vs φ_{}*F_Z^N on Σ^ss ∩ φ_{}(Σ^us)", inv.name(), inv.name()),
        format!("item 3: φ_{}(S_{}) vs F_Z^N at p", inv.name(), vis.name()),
    ];
    for want in [Status::Violated, Status::Inconclusive] {
        if let Some(k) = statuses.iter().position(|s| *s == want) {
            let mut w = Witness::note(format!(
                "{} {} (angle {:.3e}, θ_min {:.1e})",
                names[k],
                if want == Status::Violated { "not transversal" } else { "below θ_min" },
                values[k],
                theta
            ))
            .at(&p);
            if k == 1 {
                if let Some(q) = a2_at {
                    w = w.at(&q);
                }
            } else {
                w = w.at(&ip).at(&im);
            }
            return Verdict {
                status: want,
                witness: w.with_values(&values),
            };
        }
    }
    Verdict::satisfied(
        Witness::note(format!(
            "items 1–3 transversal ({sampled} samples on Σ^ss ∩ φ_{}(Σ^us))",
            inv.name()
        ))
        .at(&p)
        .with_values(&values),
    )
}

/// Ξ(E): the first-return map `φ_Y ∘ φ_X` must have a saddle fixed point at
/// `p` whose invariant directions lie in the crossing region.
pub fn check_xi_e(sys: &PwsSystem, rec: &SingularityRecord, effort: &Effort) -> Verdict {
    let p = rec.location;
    let opts = ReturnOptions::from_effort(sys, effort);
    let fr = match first_return_map(sys, rec, &opts) {
        Ok(f) => f,
        Err(e) => return Verdict::inconclusive(Witness::note(format!("first-return map unavailable: {e}")).at(&p)),
    };
    let [l1, l2] = fr.spectrum.values;
    let values = [l1.re, l1.im, l2.re, l2.im];
    let wit = |note: &str| Witness::note(note).at(&p).with_values(&values);
    if !fr.richardson_ok {
        return Verdict::inconclusive(wit("return-map differential disagrees between radius r and r/2"));
    }
    let m = sys.tolerances().delta_h;
    if l1.im.abs() > m || l2.im.abs() > m {
        return Verdict::violated(wit("complex multipliers: the return map rotates about p"));
    }
    let (a, b) = {
        let (x, y) = (l1.re.abs(), l2.re.abs());
        (x.min(y), x.max(y))
    };
    if a < 1.0 - m && b > 1.0 + m {
        if let Some(r) = fr.rays.iter().find(|r| r.label.is_sliding()) {
            return Verdict::violated(wit("saddle, but an invariant direction lies in the sliding region").at(&r.point));
        }
        if let Some(r) = fr.rays.iter().find(|r| r.label != RegionKind::Crossing) {
            return Verdict::inconclusive(wit("saddle, but an invariant direction runs along the tangency set").at(&r.point));
        }
        return Verdict::satisfied(wit("saddle fixed point with both invariant directions in Σ^c"));
    }
    if (1.0 - a).abs() <= m && (b - 1.0).abs() <= m {
        return Verdict::violated(wit("both multipliers of modulus 1: the fixed point is not a saddle"));
    }
    if b <= 1.0 - m || a >= 1.0 + m {
        return Verdict::violated(wit("both multipliers on one side of the unit circle"));
    }
    Verdict::inconclusive(wit("a multiplier lies within δ_h of the unit circle"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Resolution;
    use crate::fields::DomainBox;

    fn ff(s: &PwsSystem) -> Vec<SingularityRecord> {
        TangencyAnalysis::run(s, &Resolution::default()).fold_folds
    }

    #[test]
    fn parabolic_saddle_is_hyperbolic_for_f2() {
        // F_Z^N differential at 0 is [[-7,10],[5,2]] (det -64): a saddle
        let s = PwsSystem::parse("ps", "z", "(-3,1,x+2*y)", "(-2,-2,3*x-2*y)", DomainBox::cube(1.0)).unwrap();
        let recs = ff(&s);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].kind.fold_fold_type(), Some(FoldFoldType::P));
        let c = check_f1_f2(&s, &TangencyAnalysis::run(&s, &Resolution::default()), &Effort::default());
        assert_eq!(c.f2.status, Status::Satisfied);
        assert!(c.f2.witness.note.starts_with("hyperbolic"));
    }

    #[test]
    fn xi_p_on_a_linear_parabolic_point() {
        // φ_X(x, y) = (−5x − 12y, 2x + 5y) maps S_Y's direction (2,3) to (−46,19)
        let s = PwsSystem::parse("ps", "z", "(-3,1,x+2*y)", "(-2,-2,3*x-2*y)", DomainBox::cube(1.0)).unwrap();
        let rec = &ff(&s)[0];
        let v = check_xi_p(&s, rec, &Effort::default());
        let a1 = v.witness.values[0];
        let oracle = line_angle(&Point3::new(-46.0, 19.0, 0.0), &Point3::new(2.0, 3.0, 0.0));
        assert!((a1 - oracle).abs() < 1e-6, "{a1} vs {oracle}");
        assert_ne!(v.status, Status::Violated, "{v:?}");
    }

    #[test]
    fn elliptic_pair_is_a_sliding_saddle_for_f1() {
        // F_Z^N = x·X + y·Y = (y, x, 0): eigenvalues ±1
        let s = crate::fields::lookup("planar-elliptic").unwrap().system().unwrap();
        let t = TangencyAnalysis::run(&s, &Resolution::default());
        let c = check_f1_f2(&s, &t, &Effort::default());
        assert!(c.f2.witness.note.starts_with("vacuous"));
        assert_eq!(c.f1.status, Status::Satisfied, "{:?}", c.f1);
        assert!(c.f1.witness.note.contains("hyperbolic"));
    }

    #[test]
    fn elliptic_minus_identity_violates_xi_e() {
        let s = crate::fields::lookup("planar-elliptic").unwrap().system().unwrap();
        let v = check_xi_e(&s, &ff(&s)[0], &Effort::default());
        assert_eq!(v.status, Status::Violated, "{v:?}");
        for k in [0, 2] {
            assert!((v.witness.values[k] + 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn sheared_elliptic_saddle() {
        // φ_Z = [[−1,4],[−2,7]]: eigenvalues 3 ± 2√2, eigen-rays decide the verdict
        let s = PwsSystem::parse("sh", "z", "(2,1,-y)", "(1,1,x)", DomainBox::cube(1.0)).unwrap();
        let v = check_xi_e(&s, &ff(&s)[0], &Effort::default());
        let lo = 3.0 - 2.0 * 2f64.sqrt();
        let hi = 3.0 + 2.0 * 2f64.sqrt();
        let (a, b) = (v.witness.values[0], v.witness.values[2]);
        assert!((a.min(b) - lo).abs() < 1e-4 && (a.max(b) - hi).abs() < 1e-4, "{v:?}");
        assert_ne!(v.witness.note, "both multipliers of modulus 1: the fixed point is not a saddle");
    }

    #[test]
    fn transversal_elliptic_saddle_satisfies_xi_e() {
        // flat folds with constant tangential velocity: φ_X = [[1,0],[−6,−1]],
        // φ_Y = [[1,−3],[0,−1]], so φ_Z = [[19,3],[6,1]] has eigenvalues 10 ± √99
        let s = PwsSystem::parse("xe", "z", "(0,2,-3*x-y)", "(-3,-2,-y)", DomainBox::cube(1.0)).unwrap();
        let v = check_xi_e(&s, &ff(&s)[0], &Effort::default());
        assert_eq!(v.status, Status::Satisfied, "{v:?}");
        let (a, b) = (v.witness.values[0], v.witness.values[2]);
        let r = 99f64.sqrt();
        assert!((a.min(b) - (10.0 - r)).abs() < 1e-4 && (a.max(b) - (10.0 + r)).abs() < 1e-4, "{v:?}");
    }
}
