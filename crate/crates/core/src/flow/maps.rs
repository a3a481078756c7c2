//! Fold involutions `φ_X`, `φ_Y` and the first-return map `φ_Z = φ_Y ∘ φ_X`
//! near an elliptic fold-fold point.

use alloc::vec::Vec;

// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{Matrix2, Vector2};

use super::smooth::{integrate_field, surface_rate, SmoothEnd, Watch};
use super::{arr, FlowError};
use crate::config::Effort;
use crate::fields::{PwsSystem, Side};
use crate::linalg::{eigen2, Spectrum2};
use crate::manifold::{label_unchecked, project_to_surface, RegionKind, SurfaceChart};
use crate::tangency::{FoldFoldType, SingularityRecord};
use crate::Point3;

/// Relative disagreement allowed between the differentials at `r` and `r/2`.
const RICHARDSON_TOL: f64 = 0.05;
/// Points per axis of the reported sample grid.
const GRID: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MapKind {
    Involution(Side),
    FirstReturn,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReturnMapSample {
    pub input: Vector2<f64>,
    pub output: Vector2<f64>,
    pub kind: MapKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnOptions {
    /// Longest flight time searched for the return to `Σ`.
    pub horizon: f64,
    pub max_steps: usize,
    /// Chart grid radius (absolute).
    pub radius: f64,
}

impl ReturnOptions {
    pub fn from_effort(sys: &PwsSystem, effort: &Effort) -> Self {
        ReturnOptions {
            horizon: effort.sector_horizon,
            max_steps: effort.max_steps,
            radius: effort.chart_radius * sys.domain().diameter(),
        }
    }
}

/// Landing point of the orbit of the side's field through `p ∈ Σ` at its next
/// intersection with `Σ`. The time direction is the one in which the orbit
/// enters the side's own half-space; fold points are fixed.
pub fn involution_point(sys: &PwsSystem, side: Side, p: &Point3, opts: &ReturnOptions) -> Result<Point3, FlowError> {
    let eps = sys.tolerances().eps_f;
    let residual = sys.f(p).abs();
    if residual > eps {
        return Err(crate::sliding::SlidingError::OffSurface { at: arr(p), residual }.into());
    }
    let s = side.half_space_sign();
    let wf = sys.lie(side, 1, p);
    if wf.abs() <= sys.tangency_residual() {
        return Ok(*p);
    }
    let backward = s * wf < 0.0;
    let g = |q: &Point3| s * sys.f(q);
    let rate = surface_rate(sys, side, backward);
    let watch = Watch {
        g: &g,
        rate: Some(&rate),
        // arm on any excursion into the half-space: orbits near the fold are shallow
        arm: 0.0,
        tol: 1e-6 * eps,
    };
    let run = integrate_field(sys, side, p, backward, opts.horizon, opts.max_steps, Some(&watch))?;
    let q = match run.end {
        SmoothEnd::Event { at } | SmoothEnd::Touch { at } => at,
        SmoothEnd::BoxExit { .. } => return Err(FlowError::Escaped { at: arr(p) }),
        _ => return Err(FlowError::NoReturn { at: arr(p) }),
    };
    // Newton in time along the orbit, then onto Σ
    let w = sys.field(side, &q);
    let wq = sys.lie(side, 1, &q);
    let q = if wq.abs() > sys.tangency_residual() { q - w * (sys.f(&q) / wq) } else { q };
    Ok(project_to_surface(sys, &q)?)
}

/// `φ_W` sampled at chart coordinates `u`.
pub fn fold_involution(
    sys: &PwsSystem,
    side: Side,
    chart: &SurfaceChart,
    u: &Vector2<f64>,
    opts: &ReturnOptions,
) -> Result<ReturnMapSample, FlowError> {
    let p = chart.from_chart(sys, u)?;
    let q = involution_point(sys, side, &p, opts)?;
    Ok(ReturnMapSample {
        input: *u,
        output: chart.to_chart(&q),
        kind: MapKind::Involution(side),
    })
}

/// Eigen-ray of the return-map differential, lifted to `Σ` at the chart radius.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InvariantRay {
    pub eigenvalue: f64,
    /// Chart direction (unit).
    pub direction: Vector2<f64>,
    /// Surface point `r·direction` lifted to `Σ`.
    pub point: Point3,
    pub label: RegionKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstReturn {
    pub chart: SurfaceChart,
    pub radius: f64,
    pub samples: Vec<ReturnMapSample>,
    /// Central-difference differential at radius `r`.
    pub differential: Matrix2<f64>,
    /// Same at `r/2`, for the consistency check.
    pub half_radius_differential: Matrix2<f64>,
    pub richardson_ok: bool,
    pub spectrum: Spectrum2,
    /// Real eigenvalues with `|λ₁| < 1 < |λ₂|`.
    pub saddle: bool,
    /// Both half-rays of each real eigendirection.
    pub rays: Vec<InvariantRay>,
}

impl FirstReturn {
    /// All eigen-rays lie in the crossing region (at the sampled radius).
    pub fn rays_in_crossing(&self) -> bool {
        !self.rays.is_empty() && self.rays.iter().all(|r| r.label == RegionKind::Crossing)
    }
}

fn compose(sys: &PwsSystem, chart: &SurfaceChart, u: &Vector2<f64>, opts: &ReturnOptions) -> Result<Vector2<f64>, FlowError> {
    let p = chart.from_chart(sys, u)?;
    let a = involution_point(sys, Side::X, &p, opts)?;
    let b = involution_point(sys, Side::Y, &a, opts)?;
    Ok(chart.to_chart(&b))
}

fn central_difference(
    sys: &PwsSystem,
    chart: &SurfaceChart,
    r: f64,
    opts: &ReturnOptions,
) -> Result<Matrix2<f64>, FlowError> {
    let mut d = Matrix2::zeros();
    for j in 0..2 {
        let mut e = Vector2::zeros();
        e[j] = r;
        let col = (compose(sys, chart, &e, opts)? - compose(sys, chart, &-e, opts)?) / (2.0 * r);
        d.set_column(j, &col);
    }
    Ok(d)
}

/// `φ_Z = φ_Y ∘ φ_X` near an elliptic fold-fold point: grid samples,
/// differential, spectrum, saddle test and the region labels of its eigen-rays.
pub fn first_return_map(sys: &PwsSystem, ff: &SingularityRecord, opts: &ReturnOptions) -> Result<FirstReturn, FlowError> {
    if ff.kind.fold_fold_type() != Some(FoldFoldType::E) {
        return Err(FlowError::NotElliptic { at: arr(&ff.location) });
    }
    let chart = SurfaceChart::at(sys, &ff.location)?;
    let r = opts.radius;
    let differential = central_difference(sys, &chart, r, opts)?;
    let half_radius_differential = central_difference(sys, &chart, 0.5 * r, opts)?;
    let richardson_ok = (differential - half_radius_differential).norm()
        <= RICHARDSON_TOL * half_radius_differential.norm().max(f64::MIN_POSITIVE);

    let mut samples = Vec::with_capacity(GRID * GRID);
    for i in 0..GRID {
        for j in 0..GRID {
            let step = 2.0 * r / (GRID - 1) as f64;
            let u = Vector2::new(-r + i as f64 * step, -r + j as f64 * step);
            samples.push(ReturnMapSample {
                input: u,
                output: compose(sys, &chart, &u, opts)?,
                kind: MapKind::FirstReturn,
            });
        }
    }

    let spectrum = eigen2(&differential);
    let mut saddle = false;
    let mut rays = Vec::new();
    if let (true, Some(vectors)) = (spectrum.is_real(), spectrum.vectors) {
        let (a, b) = (spectrum.values[0].re, spectrum.values[1].re);
        let (lo, hi) = if a.abs() <= b.abs() { (a, b) } else { (b, a) };
        saddle = lo.abs() < 1.0 && 1.0 < hi.abs();
        for (k, v) in vectors.iter().enumerate() {
            let v = v / v.norm();
            for sgn in [1.0, -1.0] {
                let dir = v * sgn;
                let point = chart.from_chart(sys, &(dir * r))?;
                rays.push(InvariantRay {
                    eigenvalue: spectrum.values[k].re,
                    direction: dir,
                    point,
                    label: label_unchecked(sys, &point).kind,
                });
            }
        }
    }
    Ok(FirstReturn {
        chart,
        radius: r,
        samples,
        differential,
        half_radius_differential,
        richardson_ok,
        spectrum,
        saddle,
        rays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Resolution;
    use crate::fields::lookup;
    use crate::tangency::TangencyAnalysis;
    use crate::DomainBox;

    fn opts() -> ReturnOptions {
        ReturnOptions {
            horizon: 10.0,
            max_steps: 100_000,
            radius: 1e-3,
        }
    }

    #[test]
    fn invisible_fold_reflects_y() {
        let s = lookup("fold-invisible").unwrap().system().unwrap();
        for (x, y) in [(0.3, 0.2), (-0.1, -0.05), (0.0, 1e-4), (0.5, -0.4)] {
            let p = Point3::new(x, y, 0.0);
            let q = involution_point(&s, Side::X, &p, &opts()).unwrap();
            assert!((q - Point3::new(x, -y, 0.0)).norm() < 1e-9, "{p:?} -> {q:?}");
            let back = involution_point(&s, Side::X, &q, &opts()).unwrap();
            assert!((back - p).norm() < 1e-9);
        }
    }

    #[test]
    fn fold_line_is_fixed() {
        let s = lookup("fold-invisible").unwrap().system().unwrap();
        let p = Point3::new(0.25, 0.0, 0.0);
        assert_eq!(involution_point(&s, Side::X, &p, &opts()).unwrap(), p);
    }

    #[test]
    fn visible_fold_has_no_return() {
        let s = lookup("fold-visible").unwrap().system().unwrap();
        let e = involution_point(&s, Side::X, &Point3::new(0.0, 0.2, 0.0), &opts());
        assert!(matches!(e, Err(FlowError::Escaped { .. } | FlowError::NoReturn { .. })));
    }

    fn elliptic_ff(s: &PwsSystem) -> SingularityRecord {
        let a = TangencyAnalysis::run(s, &Resolution::default());
        a.fold_folds
            .into_iter()
            .find(|r| r.kind.fold_fold_type() == Some(FoldFoldType::E))
            .unwrap()
    }

    #[test]
    fn planar_elliptic_return_is_minus_identity() {
        let s = lookup("planar-elliptic").unwrap().system().unwrap();
        let ff = elliptic_ff(&s);
        let m = first_return_map(&s, &ff, &opts()).unwrap();
        assert!((m.differential + Matrix2::identity()).norm() < 1e-6, "{}", m.differential);
        assert!(m.richardson_ok);
        assert!(!m.saddle);
        for v in m.spectrum.values {
            assert!((v.re + 1.0).abs() < 1e-6 && v.im.abs() < 1e-6);
        }
        for smp in &m.samples {
            assert!((smp.output + smp.input).norm() < 1e-9);
        }
    }

    #[test]
    fn sheared_elliptic_pair_is_a_saddle() {
        // φ_X = [[1,−4],[0,−1]], φ_Y = [[−1,0],[−2,1]] ⇒ φ_Z = [[−1,4],[−2,7]]
        let s = PwsSystem::parse("shear", "z", "(2,1,-y)", "(1,1,x)", DomainBox::cube(1.0)).unwrap();
        let ff = elliptic_ff(&s);
        let m = first_return_map(&s, &ff, &opts()).unwrap();
        let c = m.chart;
        // exact map in world coordinates, transported to the chart
        let to_world = Matrix2::new(c.e1[0], c.e2[0], c.e1[1], c.e2[1]);
        let exact = to_world.try_inverse().unwrap() * Matrix2::new(-1.0, 4.0, -2.0, 7.0) * to_world;
        assert!((m.differential - exact).norm() < 1e-6, "{} vs {}", m.differential, exact);
        assert!(m.saddle);
        let [a, b] = m.spectrum.values;
        assert!((a.re * b.re - m.differential.determinant()).abs() < 1e-9);
        let mut ev = [a.re, b.re];
        ev.sort_by(f64::total_cmp);
        let r2 = 2.0f64.sqrt();
        assert!((ev[0] - (3.0 - 2.0 * r2)).abs() < 1e-6 && (ev[1] - (3.0 + 2.0 * r2)).abs() < 1e-6);
        assert_eq!(m.rays.len(), 4);
    }

    #[test]
    fn non_elliptic_fold_fold_is_rejected() {
        let s = lookup("sphere-two-foldfold").unwrap().system().unwrap();
        let a = TangencyAnalysis::run(&s, &Resolution::default());
        let e = first_return_map(&s, &a.fold_folds[0], &opts());
        assert!(matches!(e, Err(FlowError::NotElliptic { .. })));
    }
}
