//! Conditions on the global sliding portrait inside the Σ-blocks:
//! connections (F3, F4, I3, B1), pseudo-equilibria (I1), periodic orbits
//! (I2), separatrix contact with `∂Σ^s` (B2) and recurrence (R).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::Vector2;
// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{effort_record, Analysis, ConditionId, EffortRecord};
use crate::blocks::SigmaBlock;
use crate::config::Effort;
use crate::fields::PwsSystem;
use crate::linalg::{line_angle, point_segment_distance, wrap_angle};
use crate::manifold::{label_unchecked, project_to_surface, SurfaceChart, SurfaceMesh};
use crate::sliding::{
    boundary_contact, integrate_sliding_orbit, integrate_sliding_until, normalized_field, separatrices_at,
    sigma_separatrices, tangential_linearization, ContactType, LinearKind, Placement, PseudoEquilibrium,
    SeparatrixRole, SlidingEnd, SlidingError, SlidingOptions, SlidingOrbit,
};
use crate::verdict::{Status, Verdict, Witness};
use crate::Point3;

/// Arrival directions within this angle of an invariant line count as "along" it.
const ORIENTATION_TOL: f64 = PI / 6.0;
/// Below `CLEAR_FACTOR` times a margin a quantity counts as zero.
const CLEAR_FACTOR: f64 = 1e-3;
/// A revisit is neutral when a transverse perturbation returns within this factor of 1.
const NEUTRAL_BAND: f64 = 0.05;
/// Orbit points kept in a connection witness.
const WITNESS_POINTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BranchSource {
    /// Index into the fold-fold list.
    FoldFold(usize),
    /// Index into the pseudo-equilibrium list.
    Saddle(usize),
    /// Index into the cusp list of the tangency analysis.
    Cusp(usize),
}

impl BranchSource {
    fn describe(self) -> String {
        match self {
            BranchSource::FoldFold(k) => format!("fold-fold #{k}"),
            BranchSource::Saddle(k) => format!("pseudo-saddle #{k}"),
            BranchSource::Cusp(k) => format!("cusp #{k}"),
        }
    }
}

/// A grown orbit: a Σ-separatrix, a pseudo-saddle separatrix, or the
/// forward/backward sliding orbit of a cusp.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Branch {
    pub source: BranchSource,
    pub origin: Point3,
    /// A saddle separatrix (what B2 inspects).
    pub saddle: bool,
    pub orbit: SlidingOrbit,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Branches {
    pub list: Vec<Branch>,
    /// Sources whose orbits could not be grown.
    pub failed: Vec<(BranchSource, Point3, String)>,
}

pub fn grow_branches(sys: &PwsSystem, analysis: &Analysis, effort: &Effort) -> Branches {
    let mut out = Branches::default();
    for (k, ff) in analysis.tangency.fold_folds.iter().enumerate() {
        let src = BranchSource::FoldFold(k);
        match sigma_separatrices(sys, ff, effort) {
            Ok(set) => out.list.extend(set.branches.into_iter().map(|b| Branch {
                source: src,
                origin: b.origin,
                saddle: b.role == SeparatrixRole::SaddleSeparatrix,
                orbit: b.orbit,
            })),
            Err(e) => out.failed.push((src, ff.location, format!("{e}"))),
        }
    }
    for (k, e) in analysis.equilibria.equilibria.iter().enumerate() {
        if e.kind != LinearKind::Saddle || e.placement == Placement::FoldFold {
            continue;
        }
        let src = BranchSource::Saddle(k);
        match separatrices_at(sys, &e.location, effort) {
            Ok(set) => out.list.extend(
                set.branches
                    .into_iter()
                    .filter(|b| b.role == SeparatrixRole::SaddleSeparatrix)
                    .map(|b| Branch {
                        source: src,
                        origin: b.origin,
                        saddle: true,
                        orbit: b.orbit,
                    }),
            ),
            Err(e2) => out.failed.push((src, e.location, format!("{e2}"))),
        }
    }
    for (k, (_, node)) in analysis.tangency.cusps().iter().enumerate() {
        let src = BranchSource::Cusp(k);
        for backward in [false, true] {
            let mut opts = SlidingOptions::new(effort.t_conn);
            opts.max_steps = effort.max_steps;
            opts.backward = backward;
            match integrate_sliding_orbit(sys, &node.point, &opts) {
                Ok(orbit) => out.list.push(Branch {
                    source: src,
                    origin: node.point,
                    saddle: false,
                    orbit,
                }),
                Err(e) => out.failed.push((src, node.point, format!("{e}"))),
            }
        }
    }
    out
}

struct Target {
    source: BranchSource,
    at: Point3,
    /// Separatrix lines `(direction, eigenvalue)`: both saddle lines, or a node's strong line.
    lines: Vec<(Point3, f64)>,
    r_conn: f64,
}

fn separatrix_lines(sys: &PwsSystem, p: &Point3) -> Vec<(Point3, f64)> {
    let Ok(lin) = tangential_linearization(sys, p) else {
        return Vec::new();
    };
    let Some(vs) = lin.spectrum.vectors else {
        return Vec::new();
    };
    let [a, b] = lin.spectrum.values;
    let line = |i: usize| (lin.chart.vector_from_chart(&vs[i]), lin.spectrum.values[i].re);
    match lin.kind {
        LinearKind::Saddle => alloc::vec![line(0), line(1)],
        LinearKind::Node if (a.re.abs() - b.re.abs()).abs() > sys.hyperbolicity_margin() => {
            alloc::vec![line(if a.re.abs() > b.re.abs() { 0 } else { 1 })]
        }
        _ => Vec::new(),
    }
}

fn block_diameter(mesh: &SurfaceMesh, block: &SigmaBlock) -> f64 {
    let mut lo = Point3::repeat(f64::INFINITY);
    let mut hi = Point3::repeat(f64::NEG_INFINITY);
    for &t in &block.cells {
        let c = mesh.cell_centroids[t];
        lo = lo.inf(&c);
        hi = hi.sup(&c);
    }
    if block.cells.is_empty() {
        0.0
    } else {
        (hi - lo).norm()
    }
}

/// Diameter of the block whose cells come closest to `p` (box diameter if there are none).
fn local_block_diameter(sys: &PwsSystem, analysis: &Analysis, p: &Point3) -> f64 {
    let mesh = &analysis.mesh;
    analysis
        .blocks
        .iter()
        .map(|b| {
            let d = b
                .cells
                .iter()
                .map(|&t| (mesh.cell_centroids[t] - p).norm())
                .fold(f64::INFINITY, f64::min);
            (d, block_diameter(mesh, b))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map_or(sys.domain().diameter(), |(_, d)| d.max(mesh.max_edge))
}

fn pair_condition(a: BranchSource, b: BranchSource) -> Option<ConditionId> {
    use BranchSource::*;
    match (a, b) {
        (FoldFold(_), FoldFold(_)) => Some(ConditionId::F3),
        (FoldFold(_), Saddle(_)) | (Saddle(_), FoldFold(_)) => Some(ConditionId::F4),
        (Saddle(_), Saddle(_)) => Some(ConditionId::I3),
        (Cusp(_), Cusp(_)) | (Cusp(_), FoldFold(_)) | (FoldFold(_), Cusp(_)) => Some(ConditionId::B1),
        // a saddle separatrix through a cusp touches ∂Σ^s tangentially: B2's business
        (Saddle(_), Cusp(_)) | (Cusp(_), Saddle(_)) => None,
    }
}

fn affected(src: BranchSource) -> &'static [ConditionId] {
    match src {
        BranchSource::FoldFold(_) => &[ConditionId::F3, ConditionId::F4, ConditionId::B1],
        BranchSource::Saddle(_) => &[ConditionId::F4, ConditionId::I3],
        BranchSource::Cusp(_) => &[ConditionId::B1],
    }
}

pub struct Connections {
    pub f3: Verdict,
    pub f4: Verdict,
    pub i3: Verdict,
    pub b1: Verdict,
    pub effort: EffortRecord,
}

/// Closest approach of `orbit` to `at`, skipping the stretch before the
/// orbit first gets farther than `skip` from its start.
fn closest_approach(orbit: &SlidingOrbit, at: &Point3, skip: f64) -> Option<(f64, usize)> {
    let start = orbit.points[0];
    let first = if skip > 0.0 {
        orbit.points.iter().position(|q| (q - start).norm() > skip)?
    } else {
        0
    };
    let mut best: Option<(f64, usize)> = None;
    for i in first.max(1)..orbit.points.len() {
        let d = point_segment_distance(at, &orbit.points[i - 1], &orbit.points[i]).0;
        if best.map_or(true, |(b, _)| d < b) {
            best = Some((d, i));
        }
    }
    best
}

fn arrives_along(orbit: &SlidingOrbit, idx: usize, target: &Target) -> bool {
    // direction from the target to the orbit where it is still 10 r_conn away
    let mut j = idx.min(orbit.points.len() - 1);
    while j > 0 && (orbit.points[j] - target.at).norm() < 10.0 * target.r_conn {
        j -= 1;
    }
    let dir = orbit.points[j] - target.at;
    if dir.norm() == 0.0 {
        return false;
    }
    // forward arrival needs an attracting line, backward arrival a repelling one
    let want_negative = !orbit.backward;
    target
        .lines
        .iter()
        .any(|(v, l)| (*l < 0.0) == want_negative && line_angle(&dir, v) <= ORIENTATION_TOL)
}

fn witness_orbit(mut w: Witness, orbit: &SlidingOrbit) -> Witness {
    let stride = (orbit.points.len() / WITNESS_POINTS).max(1);
    for q in orbit.points.iter().step_by(stride) {
        w = w.at(q);
    }
    w.at(orbit.last())
}

/// Grows every branch up to `T_conn` and looks for orbits ending on another
/// structure (within `r_conn·block diameter`, arriving along one of its separatrix lines).
pub fn check_connections(sys: &PwsSystem, analysis: &Analysis, branches: &Branches, effort: &Effort) -> Connections {
    let mut targets: Vec<Target> = Vec::new();
    for (k, ff) in analysis.tangency.fold_folds.iter().enumerate() {
        targets.push(Target {
            source: BranchSource::FoldFold(k),
            at: ff.location,
            lines: separatrix_lines(sys, &ff.location),
            r_conn: effort.r_conn * local_block_diameter(sys, analysis, &ff.location),
        });
    }
    for (k, e) in analysis.equilibria.equilibria.iter().enumerate() {
        if e.kind == LinearKind::Saddle && e.placement != Placement::FoldFold {
            targets.push(Target {
                source: BranchSource::Saddle(k),
                at: e.location,
                lines: separatrix_lines(sys, &e.location),
                r_conn: effort.r_conn * local_block_diameter(sys, analysis, &e.location),
            });
        }
    }
    for (k, (_, node)) in analysis.tangency.cusps().iter().enumerate() {
        targets.push(Target {
            source: BranchSource::Cusp(k),
            at: node.point,
            lines: Vec::new(),
            r_conn: effort.r_conn * local_block_diameter(sys, analysis, &node.point),
        });
    }

    let ids = [ConditionId::F3, ConditionId::F4, ConditionId::I3, ConditionId::B1];
    let mut found: [Option<Verdict>; 4] = [None, None, None, None];
    let mut open: [Option<Verdict>; 4] = [None, None, None, None];
    let mut grown = [0usize; 4];
    let slot = |id: ConditionId| ids.iter().position(|i| *i == id).expect("connection condition");
    let skip = 2.0 * effort.chart_radius * sys.domain().diameter();

    for (src, at, why) in &branches.failed {
        for id in affected(*src) {
            open[slot(*id)].get_or_insert_with(|| {
                Verdict::inconclusive(Witness::note(format!("{}: orbit not grown: {why}", src.describe())).at(at))
            });
        }
    }

    for b in &branches.list {
        for id in affected(b.source) {
            grown[slot(*id)] += 1;
        }
        let mut connected = false;
        for t in &targets {
            let Some(id) = pair_condition(b.source, t.source) else { continue };
            let own = t.source == b.source;
            let Some((d, idx)) = closest_approach(&b.orbit, &t.at, if own { skip } else { 0.0 }) else {
                continue;
            };
            if d > t.r_conn {
                continue;
            }
            let is_cusp = matches!(t.source, BranchSource::Cusp(_));
            if !is_cusp && !arrives_along(&b.orbit, idx, t) {
                continue;
            }
            connected = true;
            let w = Witness::note(format!("connection {} → {}", b.source.describe(), t.source.describe()))
                .at(&b.origin)
                .at(&t.at)
                .with_values(&[d, t.r_conn]);
            found[slot(id)].get_or_insert_with(|| Verdict::violated(witness_orbit(w, &b.orbit)));
            break;
        }
        if connected {
            continue;
        }
        let unresolved = match b.orbit.end {
            SlidingEnd::Boundary { .. } | SlidingEnd::BoxExit { .. } | SlidingEnd::Stopped { .. } => None,
            SlidingEnd::Equilibrium { at } => match tangential_linearization(sys, &at) {
                Ok(l) if l.kind.is_hyperbolic() && l.kind != LinearKind::Saddle => None,
                _ => Some("orbit ends at a zero of F_Z^N that is not a hyperbolic sink/source"),
            },
            SlidingEnd::Horizon => Some("orbit still wandering at the horizon"),
            SlidingEnd::Budget => Some("step budget exhausted"),
        };
        if let Some(why) = unresolved {
            for id in affected(b.source) {
                open[slot(*id)].get_or_insert_with(|| {
                    Verdict::inconclusive(
                        Witness::note(format!("{}: {why}", b.source.describe()))
                            .at(&b.origin)
                            .at(b.orbit.last())
                            .with_values(&[b.orbit.duration()]),
                    )
                });
            }
        }
    }

    let mut out: Vec<Verdict> = Vec::with_capacity(4);
    for k in 0..4 {
        let v = found[k].take().or_else(|| open[k].take()).unwrap_or_else(|| {
            Verdict::satisfied(Witness::note(if grown[k] == 0 {
                String::from("vacuous: no orbits to grow (no Σ-separatrices, pseudo-saddles or cusps)")
            } else {
                format!("{} grown orbits, none connects", grown[k])
            }))
        });
        out.push(v);
    }
    let b1 = out.pop().unwrap();
    let i3 = out.pop().unwrap();
    let f4 = out.pop().unwrap();
    let f3 = out.pop().unwrap();
    Connections {
        f3,
        f4,
        i3,
        b1,
        effort: effort_record(&[
            ("t_conn", effort.t_conn),
            ("r_conn", effort.r_conn),
            ("chart_radius", effort.chart_radius * sys.domain().diameter()),
            ("max_steps", effort.max_steps as f64),
        ]),
    }
}

/// I1: finitely many pseudo-equilibria, all hyperbolic and interior
/// (fold-fold points, where `F_Z^N` always vanishes, are excluded).
pub fn check_pseudo_equilibria(sys: &PwsSystem, analysis: &Analysis) -> Verdict {
    let set = &analysis.equilibria;
    if let Some(c) = set.continuum {
        return Verdict::violated(Witness::note("F_Z^N vanishes on an open set: pseudo-equilibria are not isolated").at(&c));
    }
    let eqs: Vec<&PseudoEquilibrium> = set.equilibria.iter().filter(|e| e.placement != Placement::FoldFold).collect();
    if eqs.is_empty() {
        return Verdict::satisfied(Witness::note("vacuous: no pseudo-equilibria in the Σ-blocks"));
    }
    let margin = sys.hyperbolicity_margin();
    let mut v = Verdict::satisfied(Witness::default());
    for e in &eqs {
        let [a, b] = e.eigenvalues;
        let values = [a.re, a.im, b.re, b.im, e.boundary_distance];
        if e.placement == Placement::Boundary {
            v = v.worst(Verdict::violated(
                Witness::note("pseudo-equilibrium on ∂Σ^s").at(&e.location).with_values(&values),
            ));
        } else if !e.kind.is_hyperbolic() {
            let re = a.re.abs().min(b.re.abs());
            let w = Witness::note(format!("non-hyperbolic pseudo-equilibrium ({})", e.kind.name()))
                .at(&e.location)
                .with_values(&values);
            v = v.worst(if re <= CLEAR_FACTOR * margin {
                Verdict::violated(w)
            } else {
                Verdict::inconclusive(w)
            });
        }
    }
    if v.status == Status::Satisfied {
        let kinds: Vec<&str> = eqs.iter().map(|e| e.kind.name()).collect();
        let mut w = Witness::note(format!("{} hyperbolic interior pseudo-equilibria: {}", eqs.len(), kinds.join(", ")));
        for e in &eqs {
            let [a, b] = e.eigenvalues;
            w = w.at(&e.location).with_values(&[a.re, a.im, b.re, b.im]);
        }
        v.witness = w;
    }
    v
}

enum Return {
    Back(f64),
    Gone,
    Unknown,
}

/// Return map on the ray `{(s, 0) : s > 0}` of `chart`: the chart coordinate
/// where the orbit of `(s, 0)` next crosses the ray after one full turn.
fn return_map(sys: &PwsSystem, chart: &SurfaceChart, s: f64, effort: &Effort) -> Return {
    let Ok(q0) = chart.from_chart(sys, &Vector2::new(s, 0.0)) else {
        return Return::Unknown;
    };
    let angle = |q: &Point3| {
        let u = chart.to_chart(q);
        u[1].atan2(u[0])
    };
    let mut opts = SlidingOptions::new(effort.recurrence_horizon);
    opts.max_steps = effort.max_steps;
    let mut turned = 0.0;
    let mut last = angle(&q0);
    let orbit = match integrate_sliding_until(sys, &q0, &opts, |q, _| {
        let a = angle(q);
        turned += wrap_angle(a - last);
        last = a;
        turned.abs() > 2.0 * PI
    }) {
        Ok(o) => o,
        Err(_) => return Return::Unknown,
    };
    match orbit.end {
        SlidingEnd::Stopped { .. } => {}
        SlidingEnd::Horizon | SlidingEnd::Budget => return Return::Unknown,
        _ => return Return::Gone,
    }
    let n = orbit.points.len();
    let qa = orbit.points[n - 2];
    let span = orbit.times[n - 1] - orbit.times[n - 2];
    // angle relative to the ray, continuous across it
    let g = |tau: f64| -> Option<(f64, Point3)> {
        if tau <= 0.0 {
            return Some((wrap_angle(angle(&qa)), qa));
        }
        let o = integrate_sliding_orbit(sys, &qa, &SlidingOptions::new(tau)).ok()?;
        (o.end == SlidingEnd::Horizon).then(|| (wrap_angle(angle(o.last())), *o.last()))
    };
    let (Some((mut ga, _)), Some((mut gb, mut qb))) = (g(0.0), g(span)) else {
        return Return::Unknown;
    };
    if ga.signum() == gb.signum() {
        return Return::Back(chart.to_chart(&qb)[0]);
    }
    // Illinois regula falsi in the crossing time
    let (mut a, mut b) = (0.0, span);
    let mut side = 0i8;
    for _ in 0..60 {
        let c = (a * gb - b * ga) / (gb - ga);
        let Some((gc, qc)) = g(c) else { return Return::Unknown };
        qb = qc;
        if gc.abs() <= 1e-14 || (b - a).abs() <= 1e-15 * span.max(1.0) {
            break;
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    Return::Back(chart.to_chart(&qb)[0])
}

enum CycleSearch {
    /// Hyperbolic cycles found.
    Done(usize),
    Violated(Verdict),
    /// Some returns could not be decided.
    Open(usize, Witness),
}

fn cycles_around(sys: &PwsSystem, e: &PseudoEquilibrium, effort: &Effort) -> CycleSearch {
    let diam = sys.domain().diameter();
    let Ok(chart) = SurfaceChart::at(sys, &e.location) else {
        return CycleSearch::Open(0, Witness::note("no chart at the pseudo-equilibrium").at(&e.location));
    };
    // transversal segment: the chart's e1 ray, as far as the sliding region reaches
    let step = 0.01 * diam;
    let mut len = 0.0;
    for k in 1..=50 {
        let s = k as f64 * step;
        match chart.from_chart(sys, &Vector2::new(s, 0.0)) {
            Ok(q) if sys.domain().contains(&q) && label_unchecked(sys, &q).kind.is_sliding() => len = s,
            _ => break,
        }
    }
    if len < 2.0 * step {
        return CycleSearch::Done(0);
    }
    let n = effort.periodic_samples.max(3);
    let samples: Vec<(f64, Return)> = (0..n)
        .map(|k| {
            let s = len * (k as f64 + 1.0) / (n as f64 + 1.0);
            (s, return_map(sys, &chart, s, effort))
        })
        .collect();
    let unknown = samples.iter().filter(|(_, r)| matches!(r, Return::Unknown)).count();
    let disp: Vec<Option<f64>> = samples
        .iter()
        .map(|(s, r)| match r {
            Return::Back(p) => Some(p - s),
            _ => None,
        })
        .collect();
    let flat = 1e-6 * diam;
    if disp.iter().all(|d| d.is_some_and(|d| d.abs() <= flat)) {
        let vals: Vec<f64> = disp.iter().flatten().copied().collect();
        return CycleSearch::Violated(Verdict::violated(
            Witness::note("continuum of periodic orbits around a pseudo-equilibrium (return map is the identity)")
                .at(&e.location)
                .with_values(&vals),
        ));
    }
    let d = |s: f64| match return_map(sys, &chart, s, effort) {
        Return::Back(p) => Some(p - s),
        _ => None,
    };
    let mut cycles = 0;
    for k in 1..n {
        let (Some(d0), Some(d1)) = (disp[k - 1], disp[k]) else { continue };
        if d0.signum() == d1.signum() {
            continue;
        }
        // secant on the displacement
        let (mut a, mut b, mut fa, mut fb) = (samples[k - 1].0, samples[k].0, d0, d1);
        let mut root = 0.5 * (a + b);
        for _ in 0..40 {
            root = (a * fb - b * fa) / (fb - fa);
            let Some(fr) = d(root) else {
                return CycleSearch::Open(cycles, Witness::note("return map undefined near a cycle").at(&e.location));
            };
            if fr.abs() <= 1e-12 * diam {
                break;
            }
            if fr.signum() == fa.signum() {
                a = root;
                fa = fr;
            } else {
                b = root;
                fb = fr;
            }
        }
        let h = 1e-3 * len;
        let (Some(dp), Some(dm)) = (d(root + h), d(root - h)) else {
            return CycleSearch::Open(cycles, Witness::note("return map undefined near a cycle").at(&e.location));
        };
        let mu = 1.0 + (dp - dm) / (2.0 * h);
        let q = chart.from_chart(sys, &Vector2::new(root, 0.0)).unwrap_or(e.location);
        if (mu - 1.0).abs() <= sys.tolerances().delta_h {
            return CycleSearch::Violated(Verdict::violated(
                Witness::note("non-hyperbolic periodic orbit (multiplier within δ_h of 1)")
                    .at(&q)
                    .with_values(&[mu]),
            ));
        }
        cycles += 1;
    }
    if unknown > 0 {
        return CycleSearch::Open(
            cycles,
            Witness::note(format!("{unknown} return-map samples undecided at the horizon")).at(&e.location),
        );
    }
    CycleSearch::Done(cycles)
}

/// I2 by return maps on a transversal ray from each index +1 pseudo-equilibrium
/// (cycles in a disk sub-region must surround one). Annular sub-regions
/// without such a point are not searched and leave the verdict open.
pub fn check_periodic_orbits(sys: &PwsSystem, analysis: &Analysis, effort: &Effort) -> (Verdict, EffortRecord) {
    let eff = effort_record(&[
        ("horizon", effort.recurrence_horizon),
        ("periodic_samples", effort.periodic_samples as f64),
        ("delta_h", sys.tolerances().delta_h),
        ("max_steps", effort.max_steps as f64),
    ]);
    if let Some(c) = analysis.equilibria.continuum {
        return (
            Verdict::inconclusive(Witness::note("pseudo-equilibria not isolated; periodic orbits not searched").at(&c)),
            eff,
        );
    }
    let centres: Vec<&PseudoEquilibrium> = analysis
        .equilibria
        .equilibria
        .iter()
        .filter(|e| e.placement == Placement::Interior && e.kind != LinearKind::Saddle)
        .collect();
    let mut total = 0;
    let mut open: Option<Witness> = None;
    for e in &centres {
        match cycles_around(sys, e, effort) {
            CycleSearch::Done(k) => total += k,
            CycleSearch::Violated(v) => return (v, eff),
            CycleSearch::Open(k, w) => {
                total += k;
                open.get_or_insert(w);
            }
        }
    }
    let mesh = &analysis.mesh;
    for b in &analysis.blocks {
        for r in &b.sub_regions {
            if r.holes == 0 {
                continue;
            }
            let covered = centres.iter().any(|e| {
                r.cells
                    .iter()
                    .any(|&t| (mesh.cell_centroids[t] - e.location).norm() <= 2.0 * mesh.max_edge)
            });
            if !covered {
                let t = r.cells[0];
                open.get_or_insert(
                    Witness::note("annular sub-region without an index +1 pseudo-equilibrium: cycles around the hole not searched")
                        .at(&mesh.cell_centroids[t]),
                );
            }
        }
    }
    if let Some(w) = open {
        return (Verdict::inconclusive(w), eff);
    }
    let note = if centres.is_empty() {
        String::from("vacuous: no index +1 pseudo-equilibria and no annular sub-regions in the Σ-blocks")
    } else {
        format!(
            "bounded search: {total} periodic orbits around {} index +1 pseudo-equilibria, all hyperbolic",
            centres.len()
        )
    };
    (Verdict::satisfied(Witness::note(note)), eff)
}

/// B2: every saddle separatrix reaching `∂Σ^s` crosses it transversally
/// (arrivals at fold-fold points are exempt).
pub fn check_boundary_transversality(sys: &PwsSystem, branches: &Branches) -> Verdict {
    let theta = sys.tolerances().theta_min;
    let mut v = Verdict::satisfied(Witness::default());
    let mut checked = 0usize;
    for b in branches.list.iter().filter(|b| b.saddle) {
        let SlidingEnd::Boundary { at } = b.orbit.end else { continue };
        match boundary_contact(sys, &at) {
            Ok(c) if c.kind == ContactType::Transverse => checked += 1,
            Ok(c) => {
                checked += 1;
                let w = Witness::note(format!("{} separatrix meets ∂Σ^s tangentially", b.source.describe()))
                    .at(&b.origin)
                    .at(&at)
                    .with_values(&[c.angle, theta]);
                v = v.worst(if c.angle <= CLEAR_FACTOR * theta {
                    Verdict::violated(w)
                } else {
                    Verdict::inconclusive(w)
                });
            }
            Err(SlidingError::FoldFoldContact { .. }) => {}
            Err(e) => {
                v = v.worst(Verdict::inconclusive(
                    Witness::note(format!("contact with ∂Σ^s undecided: {e}")).at(&at),
                ))
            }
        }
    }
    if v.status == Status::Satisfied {
        v.witness = Witness::note(if checked == 0 {
            String::from("vacuous: no saddle separatrix reaches ∂Σ^s")
        } else {
            format!("{checked} saddle separatrices cross ∂Σ^s transversally")
        });
    }
    v
}

enum Recurrence {
    None,
    /// Revisits, but a transverse perturbation contracts (or expands): the
    /// orbit converges to a hyperbolic cycle, which is I2's business.
    Converging,
    /// Neutral revisit of a past state: `(anchor, first-return distance, transverse ratio)`.
    Recurrent(Point3, f64, f64),
    /// The perturbation test could not be run.
    Undecided(Point3, f64),
}

/// Closest approach of the cubic Hermite arc between two orbit states to `a`.
fn hermite_distance(sys: &PwsSystem, orbit: &SlidingOrbit, i: usize, a: &Point3) -> f64 {
    let sign = if orbit.backward { -1.0 } else { 1.0 };
    let (p0, p1) = (orbit.points[i - 1], orbit.points[i]);
    let dt = orbit.times[i] - orbit.times[i - 1];
    let (v0, v1) = (normalized_field(sys, &p0) * (sign * dt), normalized_field(sys, &p1) * (sign * dt));
    (0..=16)
        .map(|k| {
            let s = k as f64 / 16.0;
            let (s2, s3) = (s * s, s * s * s);
            let q = p0 * (2.0 * s3 - 3.0 * s2 + 1.0)
                + v0 * (s3 - 2.0 * s2 + s)
                + p1 * (-2.0 * s3 + 3.0 * s2)
                + v1 * (s3 - s2);
            (q - a).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Unit tangent direction across the flow at `q`.
fn across(sys: &PwsSystem, q: &Point3) -> Option<Point3> {
    let n = sys.normal(q).cross(&normalized_field(sys, q));
    (n.norm() > 0.0).then(|| n / n.norm())
}

/// Transverse growth over one return: a copy of the anchor displaced by
/// `delta` across the flow, compared with the orbit at its first return.
fn transverse_ratio(sys: &PwsSystem, orbit: &SlidingOrbit, ia: usize, ir: usize, delta: f64) -> Option<f64> {
    let a = orbit.points[ia];
    let start = project_to_surface(sys, &(a + across(sys, &a)? * delta)).ok()?;
    let span = orbit.times[ir] - orbit.times[ia];
    let o = integrate_sliding_orbit(sys, &start, &SlidingOptions::new(span)).ok()?;
    if o.end != SlidingEnd::Horizon {
        return None;
    }
    let b = orbit.points[ir];
    Some((o.last() - b).dot(&across(sys, &b)?).abs() / delta)
}

fn revisits(sys: &PwsSystem, orbit: &SlidingOrbit, eps: f64) -> Recurrence {
    let total = orbit.duration();
    let eq = 100.0 * sys.equilibrium_residual();
    let mut converging = false;
    for frac in [0.25, 0.5] {
        let Some(ia) = orbit.times.iter().position(|t| *t >= frac * total) else { continue };
        let a = orbit.points[ia];
        if normalized_field(sys, &a).norm() <= eq {
            continue;
        }
        // first visit of the ε-ball after leaving its 4ε neighbourhood
        let mut away = false;
        let mut first: Option<(f64, usize)> = None;
        for j in ia + 1..orbit.points.len() {
            let dv = (orbit.points[j] - a).norm();
            if !away {
                away = dv > 4.0 * eps;
                continue;
            }
            let d = hermite_distance(sys, orbit, j, &a);
            if d <= eps {
                if first.map_or(true, |(m, _)| d < m) {
                    first = Some((d, j));
                }
            } else if first.is_some() {
                break;
            }
        }
        let Some((d, ir)) = first else { continue };
        match transverse_ratio(sys, orbit, ia, ir, 0.1 * eps) {
            Some(r) if (r - 1.0).abs() <= NEUTRAL_BAND => return Recurrence::Recurrent(a, d, r),
            Some(_) => converging = true,
            None => return Recurrence::Undecided(a, d),
        }
    }
    if converging {
        Recurrence::Converging
    } else {
        Recurrence::None
    }
}

/// R by long-run sampling: orbits from randomly chosen block cells (seeded)
/// are integrated to the horizon and checked for revisits of past states.
pub fn check_recurrence(sys: &PwsSystem, analysis: &Analysis, effort: &Effort) -> (Verdict, EffortRecord) {
    let diam = sys.domain().diameter();
    let eps = 1e-3 * diam;
    let eff = effort_record(&[
        ("recurrence_horizon", effort.recurrence_horizon),
        ("recurrence_samples", effort.recurrence_samples as f64),
        ("revisit_radius", eps),
        ("seed", effort.seed as f64),
        ("max_steps", effort.max_steps as f64),
    ]);
    let mesh = &analysis.mesh;
    let mut cells: Vec<usize> = analysis
        .blocks
        .iter()
        .flat_map(|b| b.cells.iter().copied())
        .filter(|&t| mesh.cell_labels[t].kind.is_sliding())
        .collect();
    cells.sort_unstable();
    cells.dedup();
    if cells.is_empty() {
        return (Verdict::satisfied(Witness::note("vacuous: no sliding cells")), eff);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(effort.seed);
    let mut picks: Vec<usize> = (0..effort.recurrence_samples)
        .map(|_| cells[rng.gen_range(0..cells.len())])
        .collect();
    picks.sort_unstable();
    picks.dedup();

    let mut v = Verdict::satisfied(Witness::default());
    let mut ran = 0usize;
    for t in picks {
        let Ok(p0) = project_to_surface(sys, &mesh.cell_centroids[t]) else { continue };
        if !label_unchecked(sys, &p0).kind.is_sliding() {
            continue;
        }
        let mut opts = SlidingOptions::new(effort.recurrence_horizon);
        opts.max_steps = effort.max_steps;
        let Ok(orbit) = integrate_sliding_orbit(sys, &p0, &opts) else { continue };
        ran += 1;
        if !matches!(orbit.end, SlidingEnd::Horizon | SlidingEnd::Budget) {
            continue;
        }
        match revisits(sys, &orbit, eps) {
            Recurrence::Recurrent(a, d, ratio) => {
                let w = Witness::note("orbit revisits the ε-ball of a past non-equilibrium state with neutral transverse dynamics")
                    .at(&p0)
                    .at(&a)
                    .with_values(&[d, ratio]);
                return (Verdict::violated(w), eff);
            }
            Recurrence::Undecided(a, d) => {
                v = v.worst(Verdict::inconclusive(
                    Witness::note("revisit found but the transverse test could not be run")
                        .at(&p0)
                        .at(&a)
                        .with_values(&[d]),
                ));
            }
            Recurrence::Converging | Recurrence::None => {}
        }
    }
    if v.status == Status::Satisfied {
        v.witness = Witness::note(format!(
            "no recurrence among {ran} sampled orbits up to horizon {} (at horizon)",
            effort.recurrence_horizon
        ));
    }
    (v, eff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Resolution;
    use crate::fields::DomainBox;

    fn analysis(s: &PwsSystem) -> Analysis {
        Analysis::run(s, &Resolution::default()).unwrap()
    }

    #[test]
    fn symmetric_saddle_connection_violates_i3() {
        // F_Z^N = (1 − x², x·y, 0): saddles at (±1, 0) joined along y = 0 (invariant by symmetry)
        let s = PwsSystem::parse("sc", "z", "(1-x^2,x*y,-1)", "(0,0,1)", DomainBox::cube(2.0)).unwrap();
        let a = analysis(&s);
        let saddles = a.equilibria.equilibria.iter().filter(|e| e.kind == LinearKind::Saddle).count();
        assert_eq!(saddles, 2);
        let e = Effort::default();
        let b = grow_branches(&s, &a, &e);
        let c = check_connections(&s, &a, &b, &e);
        assert_eq!(c.i3.status, Status::Violated, "{:?}", c.i3);
        // the witness orbit runs along the x-axis
        for p in &c.i3.witness.points {
            assert!(p[1].abs() < 1e-6, "{p:?}");
        }
        assert_eq!(c.f3.status, Status::Satisfied);
    }

    #[test]
    fn sliding_center_has_a_continuum_of_cycles() {
        // F_Z^N = (y, −x, 0)
        let s = PwsSystem::parse("ctr", "z", "(y,-x,-1)", "(0,0,1)", DomainBox::cube(1.0)).unwrap();
        let a = analysis(&s);
        let e = Effort::default();
        let (i2, _) = check_periodic_orbits(&s, &a, &e);
        assert_eq!(i2.status, Status::Violated, "{i2:?}");
        let (r, _) = check_recurrence(&s, &a, &e);
        assert_ne!(r.status, Status::Satisfied, "{r:?}");
    }

    #[test]
    fn hyperbolic_limit_cycle_is_found() {
        // polar form r' = r(1 − r²), θ' = 1: the unit circle is a cycle with multiplier e^{−4π}
        let s = PwsSystem::parse(
            "lc",
            "z",
            "(x-y-x*(x^2+y^2),x+y-y*(x^2+y^2),-1)",
            "(0,0,1)",
            DomainBox::cube(2.0),
        )
        .unwrap();
        let a = analysis(&s);
        let (i2, _) = check_periodic_orbits(&s, &a, &Effort::default());
        assert_eq!(i2.status, Status::Satisfied, "{i2:?}");
        assert!(i2.witness.note.contains("1 periodic orbits"), "{i2:?}");
        let (r, _) = check_recurrence(&s, &a, &Effort::default());
        assert_ne!(r.status, Status::Violated, "{r:?}");
    }

    #[test]
    fn sliding_node_satisfies_i1() {
        let s = crate::fields::lookup("sliding-node").unwrap().system().unwrap();
        let v = check_pseudo_equilibria(&s, &analysis(&s));
        assert_eq!(v.status, Status::Satisfied);
        assert!(v.witness.note.contains("node"), "{v:?}");
    }
}
