//! Adaptive integration of one smooth piece with a single watched event.

use alloc::vec::Vec;

// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

use super::{arr, FlowError};
use crate::fields::{PwsSystem, Side};
use crate::ode::{adaptive_step, dp45_trial, StepControl};
use crate::Point3;

/// Spatial step cap as a fraction of the box diameter.
const MAX_STRIDE: f64 = 0.02;

/// Event watched while integrating: `g` is positive before the event.
///
/// `g` must first rise above `arm` before a sign change counts, so runs that
/// start on the event set (e.g. departures from `Σ`) do not stop at `t = 0`.
pub struct Watch<'a> {
    pub g: &'a dyn Fn(&Point3) -> f64,
    /// `dg/dt` along the integrated field; enables touch detection when `g`
    /// dips to zero inside a step without changing sign.
    pub rate: Option<&'a dyn Fn(&Point3) -> f64>,
    pub arm: f64,
    /// Event location stops once `|g| ≤ tol`.
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SmoothEnd {
    Horizon,
    /// `g` changed sign.
    Event { at: Point3 },
    /// `g` touched zero (within `arm`) without changing sign.
    Touch { at: Point3 },
    /// `g` went negative before ever being armed.
    WrongSide,
    BoxExit { at: Point3 },
    Equilibrium { at: Point3 },
    Budget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothRun {
    pub points: Vec<Point3>,
    /// Elapsed time from the start (positive for backward runs too).
    pub times: Vec<f64>,
    pub end: SmoothEnd,
    pub steps: usize,
}

impl SmoothRun {
    pub fn last(&self) -> &Point3 {
        self.points.last().expect("runs hold their start point")
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// `d/dt (s·f)` along `dir·W`, where `s` is the side's half-space sign.
pub fn surface_rate(sys: &PwsSystem, side: Side, backward: bool) -> impl Fn(&Point3) -> f64 + '_ {
    let k = side.half_space_sign() * if backward { -1.0 } else { 1.0 };
    move |p| k * sys.lie(side, 1, p)
}

/// Integrates `W` (or `−W`) from `y0` for at most `horizon` time units.
pub fn integrate_field(
    sys: &PwsSystem,
    side: Side,
    y0: &Point3,
    backward: bool,
    horizon: f64,
    max_steps: usize,
    watch: Option<&Watch>,
) -> Result<SmoothRun, FlowError> {
    let dir = if backward { -1.0 } else { 1.0 };
    let rhs = |p: &Point3| sys.field(side, p) * dir;
    let diam = sys.domain().diameter();
    let tol = sys.tolerances();
    let ctl = StepControl {
        rtol: tol.rtol,
        atol: tol.rtol * diam,
        h_min: 1e-13 * horizon.max(1.0),
        h_max: horizon.max(f64::MIN_POSITIVE),
    };
    let eq_tol = sys.equilibrium_residual().max(f64::MIN_POSITIVE);

    let mut points = alloc::vec![*y0];
    let mut times = alloc::vec![0.0];
    let finish = |points, times, end, steps| Ok(SmoothRun { points, times, end, steps });

    let mut armed = watch.map_or(true, |w| (w.g)(y0) > w.arm);
    let mut y = *y0;
    let mut t = 0.0;
    let mut h = (1e-3 * diam / rhs(y0).norm().max(eq_tol)).min(horizon);
    for step in 0..max_steps {
        if t >= horizon {
            return finish(points, times, SmoothEnd::Horizon, step);
        }
        let speed = rhs(&y).norm();
        if speed <= eq_tol {
            return finish(points, times, SmoothEnd::Equilibrium { at: y }, step);
        }
        h = h.min(MAX_STRIDE * diam / speed).min(horizon - t);
        let Some((used, y_new, next)) = adaptive_step(&rhs, &y, h, &ctl) else {
            return Err(FlowError::StepUnderflow { at: arr(&y) });
        };

        if let Some(w) = watch {
            let g_new = (w.g)(&y_new);
            if !armed {
                if g_new < -w.arm {
                    // a short excursion can fit inside one step: retry smaller first
                    if used > 16.0 * ctl.h_min {
                        h = 0.125 * used;
                        continue;
                    }
                    return finish(points, times, SmoothEnd::WrongSide, step);
                }
            } else {
                // a minimum of g inside the step: touch, or the first of two crossings
                if let Some(rate) = w.rate {
                    if rate(&y) < 0.0 && rate(&y_new) > 0.0 {
                        let (m, sm) = locate(&rhs, &y, used, &|p: &Point3| -rate(p), 0.0)?;
                        let gm = (w.g)(&m);
                        if gm < -w.arm {
                            let (q, s) = locate(&rhs, &y, sm * used, w.g, w.tol)?;
                            points.push(q);
                            times.push(t + s * sm * used);
                            return finish(points, times, SmoothEnd::Event { at: q }, step + 1);
                        }
                        if gm <= w.arm {
                            points.push(m);
                            times.push(t + sm * used);
                            return finish(points, times, SmoothEnd::Touch { at: m }, step + 1);
                        }
                    }
                }
                if g_new < 0.0 {
                    let (q, s) = locate(&rhs, &y, used, w.g, w.tol)?;
                    points.push(q);
                    times.push(t + s * used);
                    return finish(points, times, SmoothEnd::Event { at: q }, step + 1);
                }
            }
            if g_new > w.arm || (armed && g_new > 0.0) {
                armed = true;
            }
        }

        if !sys.domain().contains(&y_new) {
            let inside = |p: &Point3| box_margin(sys, p);
            let (q, s) = locate(&rhs, &y, used, &inside, 0.0)?;
            let q = sys.domain().clamp(&q);
            points.push(q);
            times.push(t + s * used);
            return finish(points, times, SmoothEnd::BoxExit { at: q }, step + 1);
        }

        t += used;
        y = y_new;
        h = next;
        points.push(y);
        times.push(t);
    }
    finish(points, times, SmoothEnd::Budget, max_steps)
}

/// Distance to the nearest box face, negative outside.
pub(super) fn box_margin(sys: &PwsSystem, p: &Point3) -> f64 {
    let d = sys.domain();
    (0..3)
        .map(|i| (p[i] - d.min[i]).min(d.max[i] - p[i]))
        .fold(f64::INFINITY, f64::min)
}

/// Bisection in the step fraction for the zero of `g` (positive at the step
/// start, non-positive at its end), re-integrating the partial step so event
/// times carry the stepper's accuracy.
pub(super) fn locate(
    rhs: &impl Fn(&Point3) -> Point3,
    y: &Point3,
    h: f64,
    g: &dyn Fn(&Point3) -> f64,
    tol: f64,
) -> Result<(Point3, f64), FlowError> {
    let at = |s: f64| dp45_trial(rhs, y, s * h).0;
    if g(&at(1.0)) > tol {
        return Err(FlowError::NoBracket { at: arr(y) });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let m = g(&at(mid));
        if m.abs() <= tol {
            return Ok((at(mid), mid));
        }
        if m > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 {
            break;
        }
    }
    Ok((at(hi), hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::lookup;

    #[test]
    fn forward_then_backward_returns() {
        let s = lookup("cusp").unwrap().system().unwrap();
        let p0 = Point3::new(-0.3, 0.2, 0.4);
        let fw = integrate_field(&s, Side::X, &p0, false, 0.8, 10_000, None).unwrap();
        assert_eq!(fw.end, SmoothEnd::Horizon);
        let bw = integrate_field(&s, Side::X, fw.last(), true, 0.8, 10_000, None).unwrap();
        assert!((bw.last() - p0).norm() < 1e-9);
    }

    #[test]
    fn watched_surface_hit_is_located() {
        // X = (1,0,-1) from (0,0,1): z = 1 - t
        let s = crate::fields::PwsSystem::parse("lin", "z", "(1,0,-1)", "(1,0,1)", crate::DomainBox::cube(3.0)).unwrap();
        let g = |p: &Point3| s.f(p);
        let rate = surface_rate(&s, Side::X, false);
        let w = Watch {
            g: &g,
            rate: Some(&rate),
            arm: 1e-9,
            tol: 1e-12,
        };
        let r = integrate_field(&s, Side::X, &Point3::new(0.0, 0.0, 1.0), false, 3.0, 10_000, Some(&w)).unwrap();
        let SmoothEnd::Event { at } = r.end else { panic!("{:?}", r.end) };
        assert!((at - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-11);
        assert!((r.duration() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn touch_without_sign_change() {
        // visible fold: z = (t-1)²/2 touches Σ at t = 1
        let s = lookup("fold-visible").unwrap().system().unwrap();
        let g = |p: &Point3| s.f(p);
        let rate = surface_rate(&s, Side::X, false);
        let w = Watch {
            g: &g,
            rate: Some(&rate),
            arm: 1e-9,
            tol: 1e-12,
        };
        let r = integrate_field(&s, Side::X, &Point3::new(0.0, -1.0, 0.5), false, 3.0, 10_000, Some(&w)).unwrap();
        let SmoothEnd::Touch { at } = r.end else { panic!("{:?}", r.end) };
        assert!(at.norm() < 1e-8, "{at:?}");
        assert!((r.duration() - 1.0).abs() < 1e-8);
    }
}
