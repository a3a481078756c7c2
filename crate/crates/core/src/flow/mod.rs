//! Piecewise-smooth trajectories under Filippov's convention, fold
//! involutions, first-return maps at elliptic fold-folds and flow saturation
//! of tangency curves.

mod maps;
mod saturate;
mod smooth;

pub use maps::{
    first_return_map, fold_involution, involution_point, FirstReturn, InvariantRay, MapKind, ReturnMapSample,
    ReturnOptions,
};
pub use saturate::{lamination_height, saturate_tangency_curve, SaturatedManifold, SheetEnd, SheetRow};
pub use smooth::{integrate_field, surface_rate, SmoothEnd, SmoothRun, Watch};

use alloc::vec::Vec;

use thiserror::Error;

use crate::fields::{PwsSystem, Side};
use crate::manifold::{label_unchecked, ManifoldError, RegionKind};
use crate::sliding::{integrate_sliding_orbit, SlidingEnd, SlidingError, SlidingOptions};
use crate::Point3;

fn arr(p: &Point3) -> [f64; 3] {
    [p[0], p[1], p[2]]
}

/// Upper bound on arcs per trajectory; guards against chattering loops.
const MAX_ARCS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum FlowError {
    #[error("initial point ({}, {}, {}) is outside the box", at[0], at[1], at[2])]
    OutsideBox { at: [f64; 3] },
    #[error("event detection failed: no sign change bracketed near ({}, {}, {})", at[0], at[1], at[2])]
    NoBracket { at: [f64; 3] },
    #[error("step size underflow at ({}, {}, {})", at[0], at[1], at[2])]
    StepUnderflow { at: [f64; 3] },
    #[error("orbit from ({}, {}, {}) left the box before returning to Σ", at[0], at[1], at[2])]
    Escaped { at: [f64; 3] },
    #[error("orbit from ({}, {}, {}) does not return to Σ within the budget", at[0], at[1], at[2])]
    NoReturn { at: [f64; 3] },
    #[error("({}, {}, {}) is not an elliptic fold-fold point", at[0], at[1], at[2])]
    NotElliptic { at: [f64; 3] },
    #[error("orbit from ({}, {}, {}) does not reach the lamination within the budget", at[0], at[1], at[2])]
    LaminationNotReached { at: [f64; 3] },
    #[error("saturation needs fold or cusp nodes of one side; node {index} is not")]
    BadSegment { index: usize },
    #[error(transparent)]
    Sliding(#[from] SlidingError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ArcKind {
    FlowPlus,
    FlowMinus,
    Sliding,
    CrossingEvent,
    TangencyEvent,
}

impl ArcKind {
    pub fn name(self) -> &'static str {
        match self {
            ArcKind::FlowPlus => "FlowPlus",
            ArcKind::FlowMinus => "FlowMinus",
            ArcKind::Sliding => "Sliding",
            ArcKind::CrossingEvent => "CrossingEvent",
            ArcKind::TangencyEvent => "TangencyEvent",
        }
    }

    pub fn is_event(self) -> bool {
        matches!(self, ArcKind::CrossingEvent | ArcKind::TangencyEvent)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Arc {
    pub kind: ArcKind,
    pub points: Vec<Point3>,
    /// Absolute times, one per point.
    pub times: Vec<f64>,
}

impl Arc {
    pub fn start(&self) -> &Point3 {
        &self.points[0]
    }

    pub fn end(&self) -> &Point3 {
        self.points.last().expect("arcs hold at least one point")
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t1(&self) -> f64 {
        *self.times.last().expect("arcs hold at least one time")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Termination {
    Horizon,
    BoxExit { at: Point3 },
    /// Hit `Σ` tangentially where the continuation is not unique or not defined.
    Grazing { at: Point3 },
    Equilibrium { at: Point3 },
    PseudoEquilibrium { at: Point3 },
    Budget,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::Horizon => "Horizon",
            Termination::BoxExit { .. } => "BoxExit",
            Termination::Grazing { .. } => "Grazing",
            Termination::Equilibrium { .. } => "Equilibrium",
            Termination::PseudoEquilibrium { .. } => "PseudoEquilibrium",
            Termination::Budget => "Budget",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EventKind {
    Crossing,
    Tangency,
    SlidingEntry,
    SlidingExit,
    /// Forward continuation is not unique; the sliding branch was taken.
    Ambiguous,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowEvent {
    pub kind: EventKind,
    pub t: f64,
    pub at: Point3,
    pub label: RegionKind,
    pub xf: f64,
    pub yf: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub arcs: Vec<Arc>,
    pub end: Termination,
    pub events: Vec<FlowEvent>,
}

impl Trajectory {
    pub fn is_ambiguous(&self) -> bool {
        self.events.iter().any(|e| e.kind == EventKind::Ambiguous)
    }

    pub fn last(&self) -> &Point3 {
        self.arcs.last().expect("trajectories hold at least one arc").end()
    }

    pub fn duration(&self) -> f64 {
        self.arcs.last().map_or(0.0, Arc::t1)
    }

    pub fn arcs_of(&self, kind: ArcKind) -> impl Iterator<Item = &Arc> + '_ {
        self.arcs.iter().filter(move |a| a.kind == kind)
    }
}

/// How a trajectory leaves a tangency point of `Σ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Continuation {
    Along(Side),
    Slide,
    Stop,
}

/// Unique forward continuation at a fold of one field while the other is
/// transverse. `X` is visible when `X²f > 0`, `Y` when `Y²f < 0`.
///
/// - visible fold, other field pushing into the fold's half-space: follow the fold's field;
/// - invisible fold, other field pushing into its own half-space: follow the other field;
/// - invisible fold, other field pushing towards the fold's half-space: `F_Z` at the
///   point is the tangent field and enters `Σ^s`, so slide.
///
/// Everything else (visible fold facing a repelling side, two-fold points,
/// degenerate contact) has several or no Filippov continuations.
fn continuation(sys: &PwsSystem, q: &Point3, kind: RegionKind, xf: f64, yf: f64) -> Continuation {
    let d = sys.sign_margin();
    let (side, other_w) = match kind {
        RegionKind::TangencyX => (Side::X, yf),
        RegionKind::TangencyY => (Side::Y, xf),
        _ => return Continuation::Stop,
    };
    let w2 = sys.lie(side, 2, q);
    if w2.abs() <= d {
        return Continuation::Stop;
    }
    let s = side.half_space_sign();
    let visible = w2 * s > 0.0;
    // does the other field push into the fold side's half-space?
    let towards = other_w * s > 0.0;
    match (visible, towards) {
        (true, true) => Continuation::Along(side),
        (true, false) => Continuation::Stop,
        (false, false) => Continuation::Along(side.other()),
        (false, true) => Continuation::Slide,
    }
}

struct Builder {
    arcs: Vec<Arc>,
    events: Vec<FlowEvent>,
}

impl Builder {
    fn event(&mut self, sys: &PwsSystem, kind: EventKind, t: f64, at: &Point3) {
        let l = label_unchecked(sys, at);
        self.events.push(FlowEvent {
            kind,
            t,
            at: *at,
            label: l.kind,
            xf: l.xf,
            yf: l.yf,
        });
    }

    fn point_arc(&mut self, kind: ArcKind, t: f64, at: &Point3) {
        self.arcs.push(Arc {
            kind,
            points: alloc::vec![*at],
            times: alloc::vec![t],
        });
    }

    fn finish(self, end: Termination) -> Trajectory {
        Trajectory {
            arcs: self.arcs,
            end,
            events: self.events,
        }
    }
}

/// Filippov trajectory from `q0` over `[0, horizon]` with the default step budget.
pub fn integrate_filippov(sys: &PwsSystem, q0: &Point3, horizon: f64) -> Result<Trajectory, FlowError> {
    integrate_filippov_with_budget(sys, q0, horizon, 200_000)
}

/// Filippov trajectory: `X` in `M⁺`, `Y` in `M⁻`, crossings concatenated,
/// sliding along `F_Z` (physical time) inside `Σ^s`, exits at folds by
/// visibility. Non-unique continuations either take the sliding branch with an
/// [`EventKind::Ambiguous`] record (unstable sliding) or stop as
/// [`Termination::Grazing`].
pub fn integrate_filippov_with_budget(
    sys: &PwsSystem,
    q0: &Point3,
    horizon: f64,
    max_steps: usize,
) -> Result<Trajectory, FlowError> {
    if !sys.domain().contains(q0) {
        return Err(FlowError::OutsideBox { at: arr(q0) });
    }
    let eps = sys.tolerances().eps_f;
    let mut b = Builder {
        arcs: Vec::new(),
        events: Vec::new(),
    };
    let mut q = *q0;
    let mut t = 0.0;
    let mut steps_left = max_steps;

    for _ in 0..MAX_ARCS {
        if t >= horizon {
            return Ok(b.finish(Termination::Horizon));
        }
        if steps_left == 0 {
            return Ok(b.finish(Termination::Budget));
        }
        let fv = sys.f(&q);
        let side = if fv > eps {
            Side::X
        } else if fv < -eps {
            Side::Y
        } else {
            let l = label_unchecked(sys, &q);
            match l.kind {
                RegionKind::Crossing => {
                    b.point_arc(ArcKind::CrossingEvent, t, &q);
                    b.event(sys, EventKind::Crossing, t, &q);
                    if l.xf > 0.0 {
                        Side::X
                    } else {
                        Side::Y
                    }
                }
                RegionKind::StableSliding | RegionKind::UnstableSliding => {
                    if l.kind == RegionKind::UnstableSliding {
                        b.event(sys, EventKind::Ambiguous, t, &q);
                    }
                    match slide(sys, &mut b, &mut q, &mut t, horizon, &mut steps_left)? {
                        Some(end) => return Ok(b.finish(end)),
                        None => continue,
                    }
                }
                kind => {
                    b.point_arc(ArcKind::TangencyEvent, t, &q);
                    b.event(sys, EventKind::Tangency, t, &q);
                    match continuation(sys, &q, kind, l.xf, l.yf) {
                        Continuation::Along(s) => s,
                        Continuation::Slide => match slide(sys, &mut b, &mut q, &mut t, horizon, &mut steps_left)? {
                            Some(end) => return Ok(b.finish(end)),
                            None => continue,
                        },
                        Continuation::Stop => return Ok(b.finish(Termination::Grazing { at: q })),
                    }
                }
            }
        };

        let g = |p: &Point3| side.half_space_sign() * sys.f(p);
        let rate = surface_rate(sys, side, false);
        let watch = Watch {
            g: &g,
            rate: Some(&rate),
            arm: eps,
            tol: 1e-3 * eps,
        };
        let run = integrate_field(sys, side, &q, false, horizon - t, steps_left, Some(&watch))?;
        steps_left = steps_left.saturating_sub(run.steps);
        let kind = match side {
            Side::X => ArcKind::FlowPlus,
            Side::Y => ArcKind::FlowMinus,
        };
        let t_end = t + run.duration();
        b.arcs.push(Arc {
            kind,
            times: run.times.iter().map(|s| t + s).collect(),
            points: run.points.clone(),
        });
        t = t_end;
        q = *run.last();
        match run.end {
            SmoothEnd::Horizon => return Ok(b.finish(Termination::Horizon)),
            SmoothEnd::Event { .. } | SmoothEnd::Touch { .. } => {}
            SmoothEnd::WrongSide => return Ok(b.finish(Termination::Grazing { at: q })),
            SmoothEnd::BoxExit { at } => return Ok(b.finish(Termination::BoxExit { at })),
            SmoothEnd::Equilibrium { at } => return Ok(b.finish(Termination::Equilibrium { at })),
            SmoothEnd::Budget => return Ok(b.finish(Termination::Budget)),
        }
    }
    Ok(b.finish(Termination::Budget))
}

/// One sliding arc in `F_Z` time. `Some(end)` terminates the trajectory.
fn slide(
    sys: &PwsSystem,
    b: &mut Builder,
    q: &mut Point3,
    t: &mut f64,
    horizon: f64,
    steps_left: &mut usize,
) -> Result<Option<Termination>, FlowError> {
    let opts = SlidingOptions {
        horizon: horizon - *t,
        backward: false,
        max_steps: *steps_left,
        fz_time: true,
    };
    b.event(sys, EventKind::SlidingEntry, *t, q);
    let o = integrate_sliding_orbit(sys, q, &opts)?;
    *steps_left = steps_left.saturating_sub(o.points.len());
    let t0 = *t;
    b.arcs.push(Arc {
        kind: ArcKind::Sliding,
        times: o.times.iter().map(|s| t0 + s).collect(),
        points: o.points.clone(),
    });
    *t = t0 + o.duration();
    *q = *o.last();
    Ok(match o.end {
        SlidingEnd::Horizon => Some(Termination::Horizon),
        SlidingEnd::Boundary { at } => {
            if o.points.len() == 1 {
                // leaves the sliding region at once: no well-defined branch
                Some(Termination::Grazing { at })
            } else {
                b.event(sys, EventKind::SlidingExit, *t, &at);
                None
            }
        }
        SlidingEnd::Equilibrium { at } => Some(Termination::PseudoEquilibrium { at }),
        SlidingEnd::BoxExit { at } => Some(Termination::BoxExit { at }),
        SlidingEnd::Stopped { .. } | SlidingEnd::Budget => Some(Termination::Budget),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::lookup;
    use crate::DomainBox;

    fn linear() -> PwsSystem {
        PwsSystem::parse("lin", "z", "(1,0,-1)", "(1,0,1)", DomainBox::cube(3.0)).unwrap()
    }

    #[test]
    fn lands_then_slides_along_x() {
        let s = linear();
        let tr = integrate_filippov(&s, &Point3::new(0.0, 0.0, 1.0), 3.0).unwrap();
        assert_eq!(tr.arcs[0].kind, ArcKind::FlowPlus);
        let hit = tr.arcs[0].end();
        assert!((hit - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-10);
        assert!((tr.arcs[0].t1() - 1.0).abs() < 1e-10);
        let sl = &tr.arcs[1];
        assert_eq!(sl.kind, ArcKind::Sliding);
        // F_Z = (1, 0, 0): x(t) = t on the sliding arc
        for (p, t) in sl.points.iter().zip(&sl.times) {
            assert!((p - Point3::new(*t, 0.0, 0.0)).norm() < 1e-9, "{p:?} at {t}");
        }
        assert_eq!(tr.end, Termination::Horizon);
        assert!((tr.last() - Point3::new(3.0, 0.0, 0.0)).norm() < 1e-9);
        assert!(!tr.is_ambiguous());
    }

    #[test]
    fn crossing_start_gives_two_arcs() {
        let s = lookup("transversal-plane").unwrap().system().unwrap();
        let tr = integrate_filippov(&s, &Point3::new(0.2, 0.1, 0.0), 0.5).unwrap();
        let kinds: Vec<_> = tr.arcs.iter().map(|a| a.kind).collect();
        assert_eq!(kinds, [ArcKind::CrossingEvent, ArcKind::FlowPlus]);
        assert!((tr.last() - Point3::new(0.2, 0.1, 0.5)).norm() < 1e-10);
    }

    #[test]
    fn crossing_from_below() {
        let s = lookup("transversal-plane").unwrap().system().unwrap();
        let tr = integrate_filippov(&s, &Point3::new(0.0, 0.0, -0.5), 0.8).unwrap();
        let kinds: Vec<_> = tr.arcs.iter().map(|a| a.kind).collect();
        assert_eq!(kinds, [ArcKind::FlowMinus, ArcKind::CrossingEvent, ArcKind::FlowPlus]);
        let e = &tr.events[0];
        assert_eq!(e.kind, EventKind::Crossing);
        assert!(e.xf * e.yf > 0.0);
        assert!((e.t - 0.5).abs() < 1e-10);
        assert!((tr.last()[2] - 0.3).abs() < 1e-10);
    }

    #[test]
    fn visible_fold_graze_continues_along_x() {
        let s = lookup("fold-visible").unwrap().system().unwrap();
        let tr = integrate_filippov(&s, &Point3::new(0.0, -1.0, 0.5), 2.0).unwrap();
        let kinds: Vec<_> = tr.arcs.iter().map(|a| a.kind).collect();
        assert_eq!(kinds, [ArcKind::FlowPlus, ArcKind::TangencyEvent, ArcKind::FlowPlus]);
        // z = (t − 1)²/2 along y = t − 1
        for a in tr.arcs_of(ArcKind::FlowPlus) {
            for (p, t) in a.points.iter().zip(&a.times) {
                let e = Point3::new(0.0, t - 1.0, (t - 1.0) * (t - 1.0) / 2.0);
                assert!((p - e).norm() < 1e-8, "{p:?} vs {e:?}");
            }
        }
    }

    #[test]
    fn sliding_exits_at_visible_fold() {
        // Σ^s = {y < 0} (Xf = y, Yf = 1); F_Z = (0,1,0) reaches the fold y = 0,
        // where X²f = 1 > 0 is visible and Y pushes up: leave along X.
        let s = PwsSystem::parse("exit", "z", "(0,1,y)", "(0,1,1)", DomainBox::cube(2.0)).unwrap();
        let tr = integrate_filippov(&s, &Point3::new(0.0, -0.5, 0.0), 1.0).unwrap();
        let kinds: Vec<_> = tr.arcs.iter().map(|a| a.kind).collect();
        assert_eq!(kinds, [ArcKind::Sliding, ArcKind::TangencyEvent, ArcKind::FlowPlus]);
        assert!((tr.arcs[0].t1() - 0.5).abs() < 1e-8);
        let end = tr.last();
        assert!((end - Point3::new(0.0, 0.5, 0.125)).norm() < 1e-7, "{end:?}");
    }

    #[test]
    fn unstable_sliding_is_annotated() {
        let s = PwsSystem::parse("rep", "z", "(1,0,1)", "(1,0,-1)", DomainBox::cube(2.0)).unwrap();
        let tr = integrate_filippov(&s, &Point3::zeros(), 0.5).unwrap();
        assert!(tr.is_ambiguous());
        assert_eq!(tr.arcs[0].kind, ArcKind::Sliding);
        assert!((tr.last() - Point3::new(0.5, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn sliding_node_stops_at_pseudo_equilibrium() {
        let s = lookup("sliding-node").unwrap().system().unwrap();
        let tr = integrate_filippov(&s, &Point3::zeros(), 1.0).unwrap();
        assert!(matches!(tr.end, Termination::PseudoEquilibrium { .. }));
    }

    #[test]
    fn start_outside_box_fails() {
        let s = linear();
        assert!(matches!(
            integrate_filippov(&s, &Point3::new(9.0, 0.0, 0.0), 1.0),
            Err(FlowError::OutsideBox { .. })
        ));
    }
}
