//! A piecewise-smooth system `Z = (X, Y)` with switching function `f`.

use alloc::string::String;

use nalgebra::Matrix3;
use thiserror::Error;

use super::expr::{Expr, VectorExpr};
use super::jet::{ScalarJetField, VectorJetField};
use super::parse::{parse_scalar, parse_vector, ParseError};
use crate::config::Tolerances;
use crate::Point3;

/// Axis-aligned domain box; every sample, seed and orbit is confined to it.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainBox {
    pub min: Point3,
    pub max: Point3,
}

impl DomainBox {
    pub fn new(min: Point3, max: Point3) -> Result<Self, SystemError> {
        if (0..3).all(|i| max[i] > min[i] && min[i].is_finite() && max[i].is_finite()) {
            Ok(DomainBox { min, max })
        } else {
            Err(SystemError::DegenerateBox)
        }
    }

    pub fn cube(half_width: f64) -> Self {
        let h = half_width.abs();
        DomainBox {
            min: Point3::new(-h, -h, -h),
            max: Point3::new(h, h, h),
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Contains with a relative slack of `tol` times the diameter.
    pub fn contains_with_slack(&self, p: &Point3, tol: f64) -> bool {
        let s = tol * self.diameter();
        (0..3).all(|i| p[i] >= self.min[i] - s && p[i] <= self.max[i] + s)
    }

    pub fn clamp(&self, p: &Point3) -> Point3 {
        Point3::from_fn(|i, _| p[i].clamp(self.min[i], self.max[i]))
    }

    pub fn diameter(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn center(&self) -> Point3 {
        (self.max + self.min) * 0.5
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }

    /// Point at fractional coordinates `t ∈ [0,1]^3`.
    pub fn lerp(&self, t: [f64; 3]) -> Point3 {
        Point3::from_fn(|i, _| self.min[i] + t[i] * (self.max[i] - self.min[i]))
    }

    /// Fraction of the way from `a` to `b` where the segment leaves the box.
    pub fn exit_fraction(&self, a: &Point3, b: &Point3) -> f64 {
        let mut t = 1.0f64;
        for i in 0..3 {
            let d = b[i] - a[i];
            if b[i] > self.max[i] && d > 0.0 {
                t = t.min((self.max[i] - a[i]) / d);
            } else if b[i] < self.min[i] && d < 0.0 {
                t = t.min((self.min[i] - a[i]) / d);
            }
        }
        t.clamp(0.0, 1.0)
    }
}

/// Which smooth piece of the system: `X` lives on `M⁺ = {f ≥ 0}`, `Y` on `M⁻ = {f ≤ 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Side {
    X,
    Y,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::X => Side::Y,
            Side::Y => Side::X,
        }
    }

    /// Sign of `f` on the half-space owned by this side.
    pub fn half_space_sign(self) -> f64 {
        match self {
            Side::X => 1.0,
            Side::Y => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::X => "X",
            Side::Y => "Y",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SystemError {
    #[error("parse error in {what}: {source}")]
    Parse {
        what: &'static str,
        #[source]
        source: ParseError,
    },
    #[error("domain box is degenerate")]
    DegenerateBox,
    #[error("{what} is not finite at ({}, {}, {})", at[0], at[1], at[2])]
    NonFinite { what: &'static str, at: [f64; 3] },
}

#[derive(Clone, Debug)]
struct SideFields {
    field: VectorJetField,
    /// `W f`, `W² f`, `W³ f`.
    lie: [ScalarJetField; 3],
}

impl SideFields {
    fn new(field: VectorExpr, f: &Expr) -> Self {
        let l1 = field.lie(f);
        let l2 = field.lie(&l1);
        let l3 = field.lie(&l2);
        SideFields {
            lie: [
                ScalarJetField::new(l1),
                ScalarJetField::new(l2),
                ScalarJetField::new(l3),
            ],
            field: VectorJetField::new(field),
        }
    }
}

/// A piecewise-smooth vector field `Z = (X, Y)` on a domain box.
#[derive(Clone, Debug)]
pub struct PwsSystem {
    name: String,
    f: ScalarJetField,
    sides: [SideFields; 2],
    domain: DomainBox,
    scale: f64,
    tol: Tolerances,
}

impl PwsSystem {
    pub fn new(
        name: impl Into<String>,
        f: Expr,
        x: VectorExpr,
        y: VectorExpr,
        domain: DomainBox,
    ) -> Result<Self, SystemError> {
        let sides = [SideFields::new(x, &f), SideFields::new(y, &f)];
        let mut sys = PwsSystem {
            name: name.into(),
            f: ScalarJetField::new(f),
            sides,
            domain,
            scale: 1.0,
            tol: Tolerances::default(),
        };
        sys.validate()?;
        sys.scale = sys.estimate_scale();
        Ok(sys)
    }

    pub fn parse(
        name: impl Into<String>,
        f: &str,
        x: &str,
        y: &str,
        domain: DomainBox,
    ) -> Result<Self, SystemError> {
        let wrap = |what| move |source| SystemError::Parse { what, source };
        let f = parse_scalar(f).map_err(wrap("f"))?;
        let x = parse_vector(x).map_err(wrap("X"))?;
        let y = parse_vector(y).map_err(wrap("Y"))?;
        PwsSystem::new(name, f, x, y, domain)
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    /// `Z' = (Y, X)` with the same switching function.
    pub fn swapped(&self) -> Self {
        let mut s = self.clone();
        s.sides.swap(0, 1);
        s
    }

    /// Same system with the field of `side` multiplied by `c`.
    pub fn scaled(&self, side: Side, c: f64) -> Result<Self, SystemError> {
        let scale = |v: &VectorExpr| {
            VectorExpr(v.0.clone().map(|e| Expr::mul(Expr::Const(c), e)))
        };
        let x = self.field_expr(Side::X).clone();
        let y = self.field_expr(Side::Y).clone();
        let (x, y) = match side {
            Side::X => (scale(&x), y),
            Side::Y => (x, scale(&y)),
        };
        Ok(PwsSystem::new(self.name.clone(), self.f.expr().clone(), x, y, self.domain)?
            .with_tolerances(self.tol))
    }

    fn validate(&self) -> Result<(), SystemError> {
        let n = 6;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let t = [i, j, k].map(|v| v as f64 / n as f64);
                    let p = self.domain.lerp(t);
                    self.check_finite_at(&p)?;
                }
            }
        }
        Ok(())
    }

    /// Evaluates every derived quantity at `p`, reporting the first non-finite one.
    pub fn check_finite_at(&self, p: &Point3) -> Result<(), SystemError> {
        let at = [p[0], p[1], p[2]];
        let bad = |what| SystemError::NonFinite { what, at };
        let finite3 = |v: Point3| v.iter().all(|c| c.is_finite());
        if !self.f.value(p).is_finite() {
            return Err(bad("f"));
        }
        if !finite3(self.f.gradient(p)) {
            return Err(bad("df"));
        }
        for (s, names) in [
            (Side::X, ["X", "Xf", "X^2f", "X^3f", "dXf", "dX^2f"]),
            (Side::Y, ["Y", "Yf", "Y^2f", "Y^3f", "dYf", "dY^2f"]),
        ] {
            let sf = &self.sides[s as usize];
            if !finite3(sf.field.value(p)) || !sf.field.jacobian(p).iter().all(|c| c.is_finite()) {
                return Err(bad(names[0]));
            }
            for (order, l) in sf.lie.iter().enumerate() {
                if !l.value(p).is_finite() {
                    return Err(bad(names[1 + order]));
                }
            }
            for order in 0..2 {
                let l = &sf.lie[order];
                if !finite3(l.gradient(p)) || !l.hessian(p).iter().all(|c| c.is_finite()) {
                    return Err(bad(names[4 + order]));
                }
            }
        }
        Ok(())
    }

    fn estimate_scale(&self) -> f64 {
        let n = 4;
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let p = self.domain.lerp([i, j, k].map(|v| v as f64 / n as f64));
                    let g = self.f.gradient(&p).norm();
                    for side in [Side::X, Side::Y] {
                        acc += self.field(side, &p).norm() * g;
                        count += 1;
                    }
                }
            }
        }
        let s = acc / count as f64;
        if s.is_finite() && s > 1e-12 {
            s
        } else {
            1.0
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Characteristic magnitude of `|W|·|∇f|`, used to make thresholds relative.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn f_expr(&self) -> &Expr {
        self.f.expr()
    }

    pub fn field_expr(&self, side: Side) -> &VectorExpr {
        self.sides[side as usize].field.expr()
    }

    /// Closed-form `W^order f` for `order ∈ {1, 2, 3}`.
    pub fn lie_expr(&self, side: Side, order: usize) -> &Expr {
        self.sides[side as usize].lie[order - 1].expr()
    }

    #[inline]
    pub fn f(&self, p: &Point3) -> f64 {
        self.f.value(p)
    }

    #[inline]
    pub fn grad_f(&self, p: &Point3) -> Point3 {
        self.f.gradient(p)
    }

    pub fn hessian_f(&self, p: &Point3) -> Matrix3<f64> {
        self.f.hessian(p)
    }

    /// Unit normal `N_p = ∇f/|∇f|`, pointing into `M⁺`.
    pub fn normal(&self, p: &Point3) -> Point3 {
        let g = self.grad_f(p);
        g / g.norm()
    }

    #[inline]
    pub fn field(&self, side: Side, p: &Point3) -> Point3 {
        self.sides[side as usize].field.value(p)
    }

    pub fn field_jacobian(&self, side: Side, p: &Point3) -> Matrix3<f64> {
        self.sides[side as usize].field.jacobian(p)
    }

    /// `W^order f (p)`, `order ∈ {1, 2, 3}`.
    #[inline]
    pub fn lie(&self, side: Side, order: usize, p: &Point3) -> f64 {
        self.sides[side as usize].lie[order - 1].value(p)
    }

    /// `d(W^order f)(p)`.
    #[inline]
    pub fn lie_gradient(&self, side: Side, order: usize, p: &Point3) -> Point3 {
        self.sides[side as usize].lie[order - 1].gradient(p)
    }

    pub fn lie_hessian(&self, side: Side, order: usize, p: &Point3) -> Matrix3<f64> {
        self.sides[side as usize].lie[order - 1].hessian(p)
    }

    /// `(Xf(p), Yf(p))`.
    #[inline]
    pub fn contact(&self, p: &Point3) -> (f64, f64) {
        (self.lie(Side::X, 1, p), self.lie(Side::Y, 1, p))
    }

    // Absolute thresholds derived from the relative tolerances.

    pub fn tangency_band(&self) -> f64 {
        self.tol.tau * self.scale
    }

    pub fn sign_margin(&self) -> f64 {
        self.tol.delta * self.scale
    }

    pub fn hyperbolicity_margin(&self) -> f64 {
        self.tol.delta_h * self.scale
    }

    pub fn tangency_residual(&self) -> f64 {
        self.tol.eps_t * self.scale
    }

    pub fn equilibrium_residual(&self) -> f64 {
        self.tol.eps_eq * self.scale * self.scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_box_rejected() {
        let r = DomainBox::new(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 1.0));
        assert_eq!(r, Err(SystemError::DegenerateBox));
    }

    #[test]
    fn non_finite_field_reported_with_location() {
        let err = PwsSystem::parse("bad", "z", "(sqrt(x),0,1)", "(0,0,1)", DomainBox::cube(1.0))
            .unwrap_err();
        match err {
            SystemError::NonFinite { at, .. } => assert!(at[0] < 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sphere_lie_derivatives() {
        let s = PwsSystem::parse(
            "s",
            "x^2+y^2+z^2-1",
            "(0,0,1)",
            "(1,0,0)",
            DomainBox::cube(1.5),
        )
        .unwrap();
        let p = Point3::new(0.3, 0.4, 0.5);
        assert!((s.lie(Side::X, 1, &p) - 1.0).abs() < 1e-15);
        assert_eq!(s.lie(Side::X, 2, &p), 2.0);
        assert_eq!(s.lie(Side::X, 3, &p), 0.0);
        assert!((s.lie(Side::Y, 1, &p) - 0.6).abs() < 1e-15);
        let sw = s.swapped();
        assert!((sw.lie(Side::X, 1, &p) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn box_exit_fraction() {
        let b = DomainBox::cube(1.0);
        let t = b.exit_fraction(&Point3::new(0.0, 0.0, 0.0), &Point3::new(2.0, 0.0, 0.0));
        assert!((t - 0.5).abs() < 1e-15);
    }
}
