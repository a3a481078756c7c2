//! Seeding and pseudo-arclength continuation of `{f = 0, Wf = 0}`.

use alloc::vec::Vec;


use super::{
    classify_tangency_point, CurveEnd, CurveNode, Diagnostics, SingularityKind, SingularityRecord,
    TangencyCurve, TangencyError,
};
use crate::config::Resolution;
use crate::fields::{PwsSystem, Side};
use crate::linalg::{min_norm_step, solve3};
use crate::tangency::DegenerateReason;
use crate::Point3;

const MAX_TURN: f64 = 0.2;
const SMOOTH_TURN: f64 = 0.05;
/// A rank drop over a whole patch would otherwise produce one record per seed.
const MAX_DEGENERATE_RECORDS: usize = 16;

fn arr(p: &Point3) -> [f64; 3] {
    [p[0], p[1], p[2]]
}

fn on_tangency(sys: &PwsSystem, side: Side, p: &Point3) -> bool {
    sys.f(p).abs() <= sys.tolerances().eps_f && sys.lie(side, 1, p).abs() <= sys.tangency_residual()
}

/// Unit tangent `∇f × ∇Wf`, or `None` where the rank of `(df, dWf)` drops.
fn curve_tangent(sys: &PwsSystem, side: Side, p: &Point3) -> Option<Point3> {
    let a = sys.grad_f(p);
    let b = sys.lie_gradient(side, 1, p);
    let t = a.cross(&b);
    let n = t.norm();
    if n <= sys.tolerances().delta_det * a.norm() * b.norm() || n == 0.0 {
        None
    } else {
        Some(t / n)
    }
}

/// Minimum-norm Newton on `(f, Wf) = 0` from a grid start.
fn newton_seed(sys: &PwsSystem, side: Side, start: &Point3) -> Option<Point3> {
    let slack = 1e-6;
    let mut p = *start;
    for _ in 0..40 {
        let r = [sys.f(&p), sys.lie(side, 1, &p)];
        if !(r[0].is_finite() && r[1].is_finite()) {
            return None;
        }
        let rows = [sys.grad_f(&p), sys.lie_gradient(side, 1, &p)];
        let step = match min_norm_step(&rows, r) {
            Some(s) if curve_tangent(sys, side, &p).is_some() => s,
            // (df, dWf) singular: settle on Σ and let the residual decide
            _ => {
                let g = rows[0];
                if g.norm() < sys.tolerances().g_min {
                    return None;
                }
                g * (r[0] / g.norm_squared())
            }
        };
        p -= step;
        if !sys.domain().contains_with_slack(&p, 0.5) {
            return None;
        }
        if step.norm() <= 1e-15 * (1.0 + p.norm()) {
            break;
        }
    }
    (on_tangency(sys, side, &p) && sys.domain().contains_with_slack(&p, slack)).then_some(p)
}

fn lex(a: &Point3, b: &Point3) -> core::cmp::Ordering {
    a[0].total_cmp(&b[0])
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
}

/// Points solving `f = 0, Wf = 0` from an `n³` grid of starts, de-duplicated
/// within three continuation steps and sorted lexicographically.
pub fn find_tangency_seeds(sys: &PwsSystem, side: Side, res: &Resolution) -> Vec<Point3> {
    let n = res.seed_grid.max(2);
    let merge = 3.0 * res.step_initial * sys.domain().diameter();
    let mut found: Vec<Point3> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let t = [i, j, k].map(|v| (v as f64 + 0.5) / n as f64);
                let start = sys.domain().lerp(t);
                if let Some(p) = newton_seed(sys, side, &start) {
                    if found.iter().all(|q| (q - p).norm() > merge) {
                        found.push(p);
                    }
                }
            }
        }
    }
    found.sort_by(lex);
    found
}

struct Corrected {
    point: Point3,
    iterations: usize,
}

/// Newton on `[f, Wf, t·(q − pred)] = 0`.
fn correct(sys: &PwsSystem, side: Side, pred: &Point3, t: &Point3) -> Option<Corrected> {
    let mut q = *pred;
    for it in 0..12 {
        let r = Point3::new(sys.f(&q), sys.lie(side, 1, &q), t.dot(&(q - pred)));
        let rows = [sys.grad_f(&q), sys.lie_gradient(side, 1, &q), *t];
        let d = solve3(&rows, r)?;
        q -= d;
        if d.norm() <= 1e-14 * (1.0 + q.norm()) {
            return on_tangency(sys, side, &q).then_some(Corrected {
                point: q,
                iterations: it + 1,
            });
        }
    }
    on_tangency(sys, side, &q).then_some(Corrected {
        point: q,
        iterations: 12,
    })
}

enum MarchEnd {
    Closed,
    Exit,
    Budget,
}

struct Steps {
    min: f64,
    max: f64,
    initial: f64,
}

fn march(
    sys: &PwsSystem,
    side: Side,
    seed: &Point3,
    t0: Point3,
    steps: &Steps,
    budget: usize,
) -> Result<(Vec<Point3>, MarchEnd), TangencyError> {
    let dom = sys.domain();
    let mut nodes = alloc::vec![*seed];
    let mut p = *seed;
    let mut t = t0;
    let mut h = steps.initial;
    let mut traveled = 0.0;
    let mut longest: f64 = 0.0;
    loop {
        if nodes.len() >= budget {
            return Ok((nodes, MarchEnd::Budget));
        }
        let mut pred = p + t * h;
        let mut exiting = false;
        if !dom.contains(&pred) {
            let frac = dom.exit_fraction(&p, &pred);
            if frac * h <= steps.min * 1e-3 {
                return Ok((nodes, MarchEnd::Exit));
            }
            pred = p + t * (h * frac);
            exiting = true;
        }
        let accepted = correct(sys, side, &pred, &t).and_then(|c| {
            let moved = (c.point - pred).norm();
            let step = (c.point - p).norm();
            let tq = curve_tangent(sys, side, &c.point)?;
            let tq = if tq.dot(&t) < 0.0 { -tq } else { tq };
            let turn = crate::linalg::angle_between(&t, &tq);
            (moved <= 0.5 * h.max(step) && turn <= MAX_TURN && step > 0.0)
                .then_some((c, tq, turn, step))
        });
        let Some((c, tq, turn, step)) = accepted else {
            if curve_tangent(sys, side, &p).is_none() {
                return Err(TangencyError::RankDeficient { at: arr(&p) });
            }
            h *= 0.5;
            if h < steps.min {
                // a rank drop just ahead shows up as repeated rejection
                let ahead = p + t * steps.min;
                if curve_tangent(sys, side, &ahead).is_none() {
                    return Err(TangencyError::RankDeficient { at: arr(&ahead) });
                }
                return Err(TangencyError::StepUnderflow { at: arr(&p) });
            }
            continue;
        };
        nodes.push(c.point);
        traveled += step;
        longest = longest.max(step);
        let close_radius = 2.0 * longest;
        if traveled > 4.0 * close_radius
            && (c.point - seed).norm() < close_radius
            && tq.dot(&t0) > 0.0
        {
            nodes.push(*seed);
            return Ok((nodes, MarchEnd::Closed));
        }
        if exiting && !dom.contains_with_slack(&(c.point + tq * steps.min), 0.0) {
            return Ok((nodes, MarchEnd::Exit));
        }
        p = c.point;
        t = tq;
        if turn < SMOOTH_TURN && c.iterations <= 4 {
            h = (h * 1.5).min(steps.max);
        }
    }
}

/// Locates the zero of `W²f` between two curve nodes by bisection along the chord,
/// re-projecting each trial onto the curve.
fn bisect_cusp(sys: &PwsSystem, side: Side, a: &Point3, b: &Point3) -> Option<Point3> {
    let chord = b - a;
    let len = chord.norm();
    if len == 0.0 {
        return None;
    }
    let t = chord / len;
    let w2 = |q: &Point3| sys.lie(side, 2, q);
    let sa = w2(a).signum();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = None;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let q = correct(sys, side, &(a + chord * mid), &t)?.point;
        best = Some(q);
        if w2(&q).signum() == sa {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) * len <= 1e-14 {
            break;
        }
    }
    best
}

/// Traces the tangency curve through `seed` in both directions.
pub fn trace_tangency_curve(
    sys: &PwsSystem,
    side: Side,
    seed: &Point3,
    res: &Resolution,
) -> Result<TangencyCurve, TangencyError> {
    if !on_tangency(sys, side, seed) {
        return Err(TangencyError::NotTangential {
            at: arr(seed),
            f: sys.f(seed),
            wf: sys.lie(side, 1, seed),
        });
    }
    let t0 = curve_tangent(sys, side, seed).ok_or(TangencyError::RankDeficient { at: arr(seed) })?;
    let diam = sys.domain().diameter();
    let steps = Steps {
        min: res.step_min * diam,
        max: res.step_max * diam,
        initial: res.step_initial * diam,
    };
    let budget = res.max_curve_nodes;
    let (fwd, end) = march(sys, side, seed, t0, &steps, budget)?;
    let (points, end) = match end {
        MarchEnd::Closed => (fwd, CurveEnd::Closed),
        MarchEnd::Budget => (fwd, CurveEnd::Truncated),
        MarchEnd::Exit => {
            let (back, back_end) = march(sys, side, seed, -t0, &steps, budget)?;
            let mut pts: Vec<Point3> = back.into_iter().rev().collect();
            pts.extend_from_slice(&fwd[1..]);
            let end = match back_end {
                MarchEnd::Budget => CurveEnd::Truncated,
                _ => CurveEnd::ExitsBox,
            };
            (pts, end)
        }
    };

    let node = |q: &Point3| -> CurveNode {
        let kind = classify_tangency_point(sys, side, q)
            .map(|r| r.kind)
            .unwrap_or(SingularityKind::Degenerate(DegenerateReason::RankDrop));
        CurveNode {
            point: *q,
            w2: sys.lie(side, 2, q),
            kind,
        }
    };
    let mut nodes: Vec<CurveNode> = Vec::with_capacity(points.len() + 4);
    for (i, q) in points.iter().enumerate() {
        if i > 0 {
            let a = points[i - 1];
            if sys.lie(side, 2, &a) * sys.lie(side, 2, q) < 0.0 {
                if let Some(c) = bisect_cusp(sys, side, &a, q) {
                    let mut n = node(&c);
                    // the bisected point sits on the sign change by construction
                    if n.kind.is_fold() {
                        n.kind = SingularityKind::Degenerate(DegenerateReason::HigherOrderContact);
                    }
                    nodes.push(n);
                }
            }
        }
        nodes.push(node(q));
    }
    if end == CurveEnd::Closed {
        // keep the closing copy identical to the first node
        let first = nodes[0];
        let last = nodes.len() - 1;
        nodes[last] = first;
    }
    Ok(TangencyCurve {
        side,
        seed: *seed,
        nodes,
        end,
        fold_folds: Vec::new(),
    })
}

/// All curves of one side, plus degenerate records for seeds that could not be traced.
pub(super) fn trace_side(
    sys: &PwsSystem,
    side: Side,
    res: &Resolution,
) -> (Vec<TangencyCurve>, Vec<SingularityRecord>) {
    let seeds = find_tangency_seeds(sys, side, res);
    let merge = 3.0 * res.step_initial * sys.domain().diameter();
    let mut curves: Vec<TangencyCurve> = Vec::new();
    let mut degenerate: Vec<SingularityRecord> = Vec::new();
    for seed in seeds {
        if curves.iter().any(|c| c.distance_to(&seed) <= merge)
            || degenerate.iter().any(|d| (d.location - seed).norm() <= merge)
            || degenerate.len() >= MAX_DEGENERATE_RECORDS
        {
            continue;
        }
        match trace_tangency_curve(sys, side, &seed, res) {
            Ok(c) => curves.push(c),
            Err(e) => {
                let at = match e {
                    TangencyError::RankDeficient { at }
                    | TangencyError::StepUnderflow { at }
                    | TangencyError::NotTangential { at, .. } => Point3::new(at[0], at[1], at[2]),
                };
                let diagnostics = Diagnostics::at(sys, &at);
                let reason = match e {
                    TangencyError::RankDeficient { .. } => DegenerateReason::RankDrop,
                    _ => DegenerateReason::HigherOrderContact,
                };
                degenerate.push(SingularityRecord {
                    location: at,
                    side: Some(side),
                    kind: SingularityKind::Degenerate(reason),
                    diagnostics,
                    curves: None,
                });
            }
        }
    }
    curves.sort_by(|a, b| lex(&a.seed, &b.seed));
    (curves, degenerate)
}
