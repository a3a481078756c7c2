//! Small dense linear algebra used throughout: 2×2 spectra, tangent frames,
//! minimum-norm Newton steps.

use nalgebra::{Matrix2, Matrix3, Vector2};

// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

use crate::Point3;

/// A complex number as `(re, im)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn real(re: f64) -> Self {
        Complex { re, im: 0.0 }
    }

    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Eigen-decomposition of a real 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spectrum2 {
    /// Ordered by ascending real part (then ascending modulus for real pairs).
    pub values: [Complex; 2],
    /// Unit eigenvectors for real spectra, `None` for complex pairs.
    pub vectors: Option<[Vector2<f64>; 2]>,
}

impl Spectrum2 {
    pub fn is_real(&self) -> bool {
        self.vectors.is_some()
    }
}

pub fn eigen2(m: &Matrix2<f64>) -> Spectrum2 {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let tr = a + d;
    let det = a * d - b * c;
    let half = 0.5 * tr;
    let disc = half * half - det;
    let scale = (a.abs() + b.abs() + c.abs() + d.abs()).max(f64::MIN_POSITIVE);
    if disc < -1e-14 * scale * scale {
        let im = (-disc).sqrt();
        return Spectrum2 {
            values: [Complex { re: half, im: -im }, Complex { re: half, im }],
            vectors: None,
        };
    }
    let root = disc.max(0.0).sqrt();
    // stable pair: avoid cancellation in half ± root
    let (l1, l2) = if half >= 0.0 {
        let big = half + root;
        (if big != 0.0 { det / big } else { 0.0 }, big)
    } else {
        let big = half - root;
        (big, if big != 0.0 { det / big } else { 0.0 })
    };
    let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
    let vec_for = |l: f64| {
        // rows of (M - l I); pick the better-conditioned one
        let r1 = Vector2::new(a - l, b);
        let r2 = Vector2::new(c, d - l);
        let r = if r1.norm() >= r2.norm() { r1 } else { r2 };
        let v = if r.norm() <= 1e-14 * scale {
            Vector2::new(1.0, 0.0)
        } else {
            Vector2::new(-r[1], r[0])
        };
        v / v.norm()
    };
    let mut v_lo = vec_for(lo);
    let mut v_hi = vec_for(hi);
    if (hi - lo).abs() <= 1e-12 * scale {
        // repeated eigenvalue: pick an orthogonal completion for display
        v_hi = Vector2::new(-v_lo[1], v_lo[0]);
        if (m - Matrix2::identity() * lo).norm() <= 1e-12 * scale {
            v_lo = Vector2::new(1.0, 0.0);
            v_hi = Vector2::new(0.0, 1.0);
        }
    }
    Spectrum2 {
        values: [Complex::real(lo), Complex::real(hi)],
        vectors: Some([v_lo, v_hi]),
    }
}

/// Orthonormal basis `(e1, e2)` of the plane orthogonal to `n`, with `e1 × e2 = n̂`.
///
/// `e1` is the projection of the coordinate axis least aligned with `n`, so the
/// frame is a deterministic function of `n`.
pub fn tangent_frame(n: &Point3) -> (Point3, Point3) {
    let nh = n / n.norm();
    let mut axis = 0;
    for i in 1..3 {
        if nh[i].abs() < nh[axis].abs() {
            axis = i;
        }
    }
    let mut a = Point3::zeros();
    a[axis] = 1.0;
    let e1 = a - nh * nh.dot(&a);
    let e1 = e1 / e1.norm();
    let e2 = nh.cross(&e1);
    (e1, e2)
}

/// Minimum-norm solution of the underdetermined system `J Δ = r`, where the
/// rows of `J` are `rows`.
pub fn min_norm_step(rows: &[Point3; 2], r: [f64; 2]) -> Option<Point3> {
    let g = Matrix2::new(
        rows[0].dot(&rows[0]),
        rows[0].dot(&rows[1]),
        rows[1].dot(&rows[0]),
        rows[1].dot(&rows[1]),
    );
    let inv = g.try_inverse()?;
    let w = inv * Vector2::new(r[0], r[1]);
    let step = rows[0] * w[0] + rows[1] * w[1];
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Solves the 3×3 system whose rows are `rows`.
pub fn solve3(rows: &[Point3; 3], r: Point3) -> Option<Point3> {
    let m = Matrix3::from_rows(&[rows[0].transpose(), rows[1].transpose(), rows[2].transpose()]);
    let sol = m.lu().solve(&r)?;
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Unsigned angle between two vectors, in `[0, π]`.
pub fn angle_between(a: &Point3, b: &Point3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Angle between two lines (undirected), in `[0, π/2]`.
pub fn line_angle(a: &Point3, b: &Point3) -> f64 {
    let t = angle_between(a, b);
    t.min(core::f64::consts::PI - t)
}

/// Angle between two planar lines, in `[0, π/2]`.
pub fn line_angle2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let t = cross.abs().atan2(a.dot(b));
    t.min(core::f64::consts::PI - t)
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(mut a: f64) -> f64 {
    use core::f64::consts::PI;
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Distance from `p` to the segment `[a, b]` and the parameter of the closest point.
pub fn point_segment_distance(p: &Point3, a: &Point3, b: &Point3) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((a + ab * t - p).norm(), t)
}

/// Closest points between segments `[p0,p1]` and `[q0,q1]`: `(distance, s, t)`.
pub fn segment_segment_distance(
    p0: &Point3,
    p1: &Point3,
    q0: &Point3,
    q1: &Point3,
) -> (f64, f64, f64) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let eps = 1e-300;
    let (mut s, mut t);
    if a <= eps && e <= eps {
        return ((p0 - q0).norm(), 0.0, 0.0);
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            s = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    (((p0 + d1 * s) - (q0 + d2 * t)).norm(), s, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_spectrum_is_complex() {
        let s = eigen2(&Matrix2::new(0.0, -2.0, 2.0, 0.0));
        assert!(!s.is_real());
        assert_eq!(s.values[0].re, 0.0);
        assert!((s.values[1].im - 2.0).abs() < 1e-15);
    }

    #[test]
    fn saddle_spectrum_and_vectors() {
        let m = Matrix2::new(0.0, 1.0, 1.0, 0.0);
        let s = eigen2(&m);
        let [v0, v1] = s.vectors.unwrap();
        assert!((s.values[0].re + 1.0).abs() < 1e-15);
        assert!((s.values[1].re - 1.0).abs() < 1e-15);
        assert!((m * v0 + v0).norm() < 1e-14);
        assert!((m * v1 - v1).norm() < 1e-14);
    }

    #[test]
    fn scalar_matrix_has_identity_eigenvectors() {
        let s = eigen2(&Matrix2::identity());
        assert_eq!(s.values[0].re, 1.0);
        assert_eq!(s.values[1].re, 1.0);
        assert!(s.is_real());
    }

    #[test]
    fn frame_is_orthonormal_and_right_handed() {
        for n in [
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.3, -0.5, 0.8),
        ] {
            let (e1, e2) = tangent_frame(&n);
            assert!(e1.dot(&n).abs() < 1e-14 && e2.dot(&n).abs() < 1e-14);
            assert!((e1.norm() - 1.0).abs() < 1e-14 && e1.dot(&e2).abs() < 1e-14);
            assert!((e1.cross(&e2) - n / n.norm()).norm() < 1e-14);
        }
        let (e1, e2) = tangent_frame(&Point3::new(0.0, 0.0, 1.0));
        assert_eq!(e1, Point3::new(1.0, 0.0, 0.0));
        assert_eq!(e2, Point3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn segment_distances() {
        let (d, s, t) = segment_segment_distance(
            &Point3::new(-1.0, 0.0, 0.0),
            &Point3::new(1.0, 0.0, 0.0),
            &Point3::new(0.0, -1.0, 1.0),
            &Point3::new(0.0, 1.0, 1.0),
        );
        assert!((d - 1.0).abs() < 1e-15 && (s - 0.5).abs() < 1e-15 && (t - 0.5).abs() < 1e-15);
    }
}
