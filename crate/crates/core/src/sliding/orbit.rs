//! Sliding orbits: explicit stepping of `F_Z^N` with projection back to `Σ`.

use alloc::vec::Vec;

// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

use super::{arr, normalized_field, SlidingError};
use crate::fields::PwsSystem;
use crate::manifold::{label_unchecked, RegionKind};
use crate::ode::{adaptive_step, dp45_trial, StepControl};
use crate::Point3;

/// Newton iterations allowed when projecting a step back to `Σ`.
const PROJECTION_ITERS: usize = 3;
/// A step is rejected when projection moves the point more than this fraction of the step.
const PROJECTION_SHARE: f64 = 0.1;
/// Spatial step cap as a fraction of the box diameter.
const MAX_STRIDE: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlidingOptions {
    pub horizon: f64,
    /// Integrate `−F_Z^N`.
    pub backward: bool,
    pub max_steps: usize,
    /// Run in `F_Z` time (`F_Z^N / (Yf − Xf)`) instead of `F_Z^N` time.
    pub fz_time: bool,
}

impl SlidingOptions {
    pub fn new(horizon: f64) -> Self {
        SlidingOptions {
            horizon,
            backward: false,
            max_steps: 200_000,
            fz_time: false,
        }
    }

    pub fn backward(mut self) -> Self {
        self.backward = true;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SlidingEnd {
    Horizon,
    /// Reached `∂Σ^s`.
    Boundary { at: Point3 },
    /// Came within `ε_eq` of a zero of `F_Z^N`.
    Equilibrium { at: Point3 },
    BoxExit { at: Point3 },
    /// The caller's stop predicate fired.
    Stopped { at: Point3 },
    /// Step budget exhausted.
    Budget,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlidingOrbit {
    pub points: Vec<Point3>,
    pub times: Vec<f64>,
    pub end: SlidingEnd,
    /// Region the orbit slides in (`StableSliding` or `UnstableSliding`);
    /// `None` for a stationary orbit or one that leaves immediately.
    pub region: Option<RegionKind>,
    pub backward: bool,
}

impl SlidingOrbit {
    /// `F_Z^N` time runs against `F_Z` time on `Σ^us`.
    pub fn reversed_against_fz(&self) -> bool {
        self.region == Some(RegionKind::UnstableSliding)
    }

    pub fn last(&self) -> &Point3 {
        self.points.last().expect("orbits hold at least their start point")
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

pub fn integrate_sliding_orbit(
    sys: &PwsSystem,
    p0: &Point3,
    opts: &SlidingOptions,
) -> Result<SlidingOrbit, SlidingError> {
    integrate_sliding_until(sys, p0, opts, |_, _| false)
}

/// Sliding orbit from a point of `closure(Σ^s)`, stopping early when `stop(p, t)` holds.
pub fn integrate_sliding_until(
    sys: &PwsSystem,
    p0: &Point3,
    opts: &SlidingOptions,
    stop: impl FnMut(&Point3, f64) -> bool,
) -> Result<SlidingOrbit, SlidingError> {
    let residual = sys.f(p0).abs();
    if residual > sys.tolerances().eps_f {
        return Err(SlidingError::OffSurface { at: arr(p0), residual });
    }
    let label = label_unchecked(sys, p0);
    let region = match label.kind {
        RegionKind::Crossing => {
            return Err(SlidingError::OutsideSliding {
                at: arr(p0),
                kind: label.kind,
            })
        }
        k if k.is_sliding() => Some(k),
        _ => probe_region(sys, p0, opts.backward),
    };
    let Some(region) = region else {
        // on the boundary and leaving the sliding region at once
        return Ok(SlidingOrbit {
            points: alloc::vec![*p0],
            times: alloc::vec![0.0],
            end: SlidingEnd::Boundary { at: *p0 },
            region: None,
            backward: opts.backward,
        });
    };
    run(sys, p0, opts, Some(region), stop)
}

/// Integration of `±F_Z^N` on `Σ` that ignores region boundaries.
pub(super) fn integrate_free(
    sys: &PwsSystem,
    p0: &Point3,
    opts: &SlidingOptions,
) -> Result<SlidingOrbit, SlidingError> {
    run(sys, p0, opts, None, |_, _| false)
}

/// Region entered by a short step from a tangency point.
fn probe_region(sys: &PwsSystem, p0: &Point3, backward: bool) -> Option<RegionKind> {
    let v = normalized_field(sys, p0);
    let n = v.norm();
    if n <= sys.equilibrium_residual() {
        return None;
    }
    let d = if backward { -v / n } else { v / n };
    let q = crate::manifold::project_to_surface(sys, &(p0 + d * (1e-6 * sys.domain().diameter()))).ok()?;
    let k = label_unchecked(sys, &q).kind;
    k.is_sliding().then_some(k)
}

/// Signed margin of the sliding sign pattern: positive inside `region`.
fn margin(sys: &PwsSystem, p: &Point3, region: RegionKind) -> f64 {
    let (xf, yf) = sys.contact(p);
    match region {
        RegionKind::StableSliding => (-xf).min(yf),
        _ => xf.min(-yf),
    }
}

fn project(sys: &PwsSystem, q: &Point3) -> Option<Point3> {
    let mut p = *q;
    let eps = sys.tolerances().eps_f;
    for _ in 0..PROJECTION_ITERS {
        let v = sys.f(&p);
        if v.abs() <= 0.01 * eps {
            break;
        }
        let g = sys.grad_f(&p);
        let g2 = g.norm_squared();
        if g2.sqrt() < sys.tolerances().g_min {
            return None;
        }
        p -= g * (v / g2);
    }
    (sys.f(&p).abs() <= eps).then_some(p)
}

fn run(
    sys: &PwsSystem,
    p0: &Point3,
    opts: &SlidingOptions,
    region: Option<RegionKind>,
    mut stop: impl FnMut(&Point3, f64) -> bool,
) -> Result<SlidingOrbit, SlidingError> {
    let sign = if opts.backward { -1.0 } else { 1.0 };
    let rhs = |p: &Point3| {
        let v = normalized_field(sys, p) * sign;
        if opts.fz_time {
            let (xf, yf) = sys.contact(p);
            v / (yf - xf)
        } else {
            v
        }
    };
    let diam = sys.domain().diameter();
    let tol = sys.tolerances();
    let ctl = StepControl {
        rtol: tol.rtol,
        atol: tol.rtol * diam,
        h_min: 1e-12 * opts.horizon.max(1.0),
        h_max: opts.horizon.max(f64::MIN_POSITIVE),
    };
    let eq_tol = sys.equilibrium_residual();
    let band = sys.tangency_band();

    let mut points = alloc::vec![*p0];
    let mut times = alloc::vec![0.0];
    let finish = |points: Vec<Point3>, times: Vec<f64>, end| {
        Ok(SlidingOrbit {
            points,
            times,
            end,
            region,
            backward: opts.backward,
        })
    };
    if rhs(p0).norm() <= eq_tol {
        return finish(points, times, SlidingEnd::Equilibrium { at: *p0 });
    }

    let mut y = *p0;
    let mut t = 0.0;
    let mut h = {
        let speed = rhs(p0).norm();
        (1e-3 * diam / speed).min(opts.horizon)
    };
    for _ in 0..opts.max_steps {
        if t >= opts.horizon {
            return finish(points, times, SlidingEnd::Horizon);
        }
        let speed = rhs(&y).norm();
        if speed <= eq_tol {
            return finish(points, times, SlidingEnd::Equilibrium { at: y });
        }
        h = h.min(MAX_STRIDE * diam / speed).min(opts.horizon - t);
        let (used, raw, next) = loop {
            let Some((used, raw, next)) = adaptive_step(&rhs, &y, h, &ctl) else {
                return Err(SlidingError::StepFailure { at: arr(&y) });
            };
            match project(sys, &raw) {
                Some(p) if (p - raw).norm() <= PROJECTION_SHARE * (raw - y).norm().max(1e-300) || (p - raw).norm() <= tol.eps_f => {
                    break (used, p, next)
                }
                _ if used > ctl.h_min => h = 0.5 * used,
                _ => return Err(SlidingError::StepFailure { at: arr(&y) }),
            }
        };
        let y_new = raw;

        if !sys.domain().contains(&y_new) {
            let inside = |p: &Point3| box_margin(sys, p);
            let (q, s) = locate_event(sys, &rhs, &y, used, inside, 0.0);
            let q = sys.domain().clamp(&q);
            points.push(q);
            times.push(t + s * used);
            return finish(points, times, SlidingEnd::BoxExit { at: q });
        }

        if let Some(r) = region {
            if margin(sys, &y_new, r) < -band {
                let (q, s) = locate_event(sys, &rhs, &y, used, |p| margin(sys, p, r), 0.01 * band);
                points.push(q);
                times.push(t + s * used);
                return finish(points, times, SlidingEnd::Boundary { at: q });
            }
        }

        t += used;
        y = y_new;
        h = next;
        points.push(y);
        times.push(t);
        if stop(&y, t) {
            return finish(points, times, SlidingEnd::Stopped { at: y });
        }
    }
    finish(points, times, SlidingEnd::Budget)
}

/// Distance to the nearest box face, negative outside.
fn box_margin(sys: &PwsSystem, p: &Point3) -> f64 {
    let d = sys.domain();
    (0..3)
        .map(|i| (p[i] - d.min[i]).min(d.max[i] - p[i]))
        .fold(f64::INFINITY, f64::min)
}

/// Bisection in the step fraction for the zero of `g` (positive before the
/// event), re-integrating the partial step from `y` so event times are
/// accurate to the stepper's order.
fn locate_event(
    sys: &PwsSystem,
    rhs: &impl Fn(&Point3) -> Point3,
    y: &Point3,
    h: f64,
    g: impl Fn(&Point3) -> f64,
    tol: f64,
) -> (Point3, f64) {
    let at = |s: f64| {
        let q = dp45_trial(rhs, y, s * h).0;
        project(sys, &q).unwrap_or(q)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let m = g(&at(mid));
        if m.abs() <= tol {
            return (at(mid), mid);
        }
        if m > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 {
            break;
        }
    }
    (at(hi), hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::lookup;

    #[test]
    fn sliding_node_escapes_radially() {
        let s = lookup("sliding-node").unwrap().system().unwrap();
        let o = integrate_sliding_orbit(&s, &Point3::new(0.1, 0.0, 0.0), &SlidingOptions::new(10.0)).unwrap();
        let SlidingEnd::BoxExit { at } = o.end else {
            panic!("{:?}", o.end)
        };
        assert!((at - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-9);
        // x(t) = 0.1 e^t
        assert!((o.duration() - 10.0f64.ln()).abs() < 1e-7);
        assert!(o.points.iter().all(|p| p[1].abs() < 1e-14 && p[2] == 0.0));
        assert_eq!(o.region, Some(RegionKind::StableSliding));
        assert!(!o.reversed_against_fz());
    }

    #[test]
    fn sphere_arc_reaches_equator() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let o = integrate_sliding_orbit(&s, &Point3::new(h, 0.0, -h), &SlidingOptions::new(10.0)).unwrap();
        let SlidingEnd::Boundary { at } = o.end else {
            panic!("{:?}", o.end)
        };
        // rotation about the y-axis: the arc ends at (1, 0, 0) after a quarter turn at rate 2
        assert!((at - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-6);
        assert!((o.duration() - core::f64::consts::PI / 8.0).abs() < 1e-6, "{} {:?}", o.duration(), o.end);
        assert!(o.points.iter().all(|p| p[0] >= -1e-9 && p[2] <= 1e-9 && s.f(p).abs() <= 1e-9));
        assert_eq!(o.region, Some(RegionKind::StableSliding));
    }

    #[test]
    fn pseudo_equilibrium_is_stationary() {
        let s = lookup("sliding-node").unwrap().system().unwrap();
        let o = integrate_sliding_orbit(&s, &Point3::zeros(), &SlidingOptions::new(1.0)).unwrap();
        assert_eq!(o.points.len(), 1);
        assert!(matches!(o.end, SlidingEnd::Equilibrium { .. }));
    }

    #[test]
    fn crossing_start_is_rejected() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let e = integrate_sliding_orbit(&s, &Point3::new(h, 0.0, h), &SlidingOptions::new(1.0));
        assert!(matches!(e, Err(SlidingError::OutsideSliding { .. })));
    }

    #[test]
    fn backward_orbit_reaches_the_other_edge() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let o = integrate_sliding_orbit(&s, &Point3::new(h, 0.0, -h), &SlidingOptions::new(10.0).backward()).unwrap();
        let SlidingEnd::Boundary { at } = o.end else {
            panic!("{:?}", o.end)
        };
        assert!((at - Point3::new(0.0, 0.0, -1.0)).norm() < 1e-6);
    }
}
