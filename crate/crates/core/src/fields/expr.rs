//! Expression trees over `x`, `y`, `z` with exact symbolic differentiation.

use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;


// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

use crate::Point3;

/// Coordinate variable of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Elementary functions admitted by the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

/// Scalar expression tree.
///
/// Nodes are built through the smart constructors ([`Expr::add`], [`Expr::mul`], ...)
/// which fold constants and drop neutral elements, so derivative trees stay small.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Axis),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Evaluation produced NaN or an infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonFinite {
    pub value: f64,
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(axis: Axis) -> Expr {
        Expr::Var(axis)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => match b {
                Expr::Neg(nb) => Expr::Sub(Box::new(a), nb),
                b => Expr::Add(Box::new(a), Box::new(b)),
            },
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            (_, Some(y)) if y == 0.0 => a,
            _ => match b {
                Expr::Neg(nb) => Expr::Add(Box::new(a), nb),
                b => Expr::Sub(Box::new(a), Box::new(b)),
            },
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::Const(0.0);
        }
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return Expr::Const(0.0);
        }
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            _ if b.is_one() => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        match (n, a.as_const()) {
            (0, _) => Expr::Const(1.0),
            (1, _) => a,
            (_, Some(c)) => Expr::Const(c.powi(n)),
            _ => Expr::Pow(Box::new(a), n),
        }
    }

    pub fn call(func: Func, a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::Const(func.apply(c)),
            None => Expr::Call(func, Box::new(a)),
        }
    }

    /// Evaluates without finiteness checks; hot paths use this after the
    /// owning system has been validated on its domain box.
    pub fn eval(&self, p: &Point3) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(a) => p[a.index()],
            Expr::Neg(a) => -a.eval(p),
            Expr::Add(a, b) => a.eval(p) + b.eval(p),
            Expr::Sub(a, b) => a.eval(p) - b.eval(p),
            Expr::Mul(a, b) => a.eval(p) * b.eval(p),
            Expr::Div(a, b) => a.eval(p) / b.eval(p),
            Expr::Pow(a, n) => a.eval(p).powi(*n),
            Expr::Call(f, a) => f.apply(a.eval(p)),
        }
    }

    pub fn try_eval(&self, p: &Point3) -> Result<f64, NonFinite> {
        let v = self.eval(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(NonFinite { value: v })
        }
    }

    /// Exact partial derivative with respect to `axis`.
    pub fn derivative(&self, axis: Axis) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(a) => Expr::Const(if *a == axis { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.derivative(axis)),
            Expr::Add(a, b) => Expr::add(a.derivative(axis), b.derivative(axis)),
            Expr::Sub(a, b) => Expr::sub(a.derivative(axis), b.derivative(axis)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.derivative(axis), (**b).clone()),
                Expr::mul((**a).clone(), b.derivative(axis)),
            ),
            Expr::Div(a, b) => {
                let num = Expr::sub(
                    Expr::mul(a.derivative(axis), (**b).clone()),
                    Expr::mul((**a).clone(), b.derivative(axis)),
                );
                Expr::div(num, Expr::pow((**b).clone(), 2))
            }
            Expr::Pow(a, n) => Expr::mul(
                Expr::mul(Expr::Const(*n as f64), Expr::pow((**a).clone(), n - 1)),
                a.derivative(axis),
            ),
            Expr::Call(f, a) => {
                let inner = a.derivative(axis);
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, (**a).clone()),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, (**a).clone())),
                    Func::Exp => Expr::call(Func::Exp, (**a).clone()),
                    Func::Sqrt => Expr::div(
                        Expr::Const(0.5),
                        Expr::call(Func::Sqrt, (**a).clone()),
                    ),
                };
                Expr::mul(outer, inner)
            }
        }
    }

    pub fn gradient(&self) -> [Expr; 3] {
        Axis::ALL.map(|a| self.derivative(a))
    }

    /// True when the tree is a polynomial in `x`, `y`, `z`.
    pub fn is_polynomial(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => true,
            Expr::Neg(a) => a.is_polynomial(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.is_polynomial() && b.is_polynomial()
            }
            Expr::Div(a, b) => a.is_polynomial() && b.as_const().is_some(),
            Expr::Pow(a, n) => *n >= 0 && a.is_polynomial(),
            Expr::Call(..) => false,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    /// Canonical text form; parses back to an equivalent expression.
    pub fn to_canonical(&self) -> String {
        alloc::format!("{self}")
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "-{}", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(a) => f.write_str(a.name()),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, 3)
            }
            Expr::Add(a, b) => {
                write_child(f, a, 1)?;
                f.write_str("+")?;
                write_child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                f.write_str("-")?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_child(f, a, 2)?;
                f.write_str("*")?;
                write_child(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                f.write_str("/")?;
                write_child(f, b, 3)
            }
            Expr::Pow(a, n) => {
                write_child(f, a, 5)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Three scalar expressions forming a vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorExpr(pub [Expr; 3]);

impl VectorExpr {
    pub fn eval(&self, p: &Point3) -> Point3 {
        Point3::new(self.0[0].eval(p), self.0[1].eval(p), self.0[2].eval(p))
    }

    /// Lie derivative `X·∇g` as a new expression.
    pub fn lie(&self, g: &Expr) -> Expr {
        let grad = g.gradient();
        self.0
            .iter()
            .zip(grad)
            .fold(Expr::Const(0.0), |acc, (xi, dg)| {
                Expr::add(acc, Expr::mul(xi.clone(), dg))
            })
    }

    pub fn to_canonical(&self) -> String {
        alloc::format!("({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

impl fmt::Display for VectorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn smart_constructors_fold_constants() {
        let e = Expr::add(Expr::Const(2.0), Expr::Const(3.0));
        assert_eq!(e, Expr::Const(5.0));
        let e = Expr::mul(Expr::Const(0.0), Expr::var(Axis::X));
        assert_eq!(e, Expr::Const(0.0));
        let e = Expr::mul(Expr::Const(1.0), Expr::var(Axis::Y));
        assert_eq!(e, Expr::var(Axis::Y));
    }

    #[test]
    fn derivative_of_product_and_quotient() {
        // d/dx (x*y / z) = y / z
        let e = Expr::div(
            Expr::mul(Expr::var(Axis::X), Expr::var(Axis::Y)),
            Expr::var(Axis::Z),
        );
        let d = e.derivative(Axis::X);
        let q = p(0.3, -1.2, 2.5);
        assert!((d.eval(&q) - (-1.2 / 2.5)).abs() < 1e-15);
        let dz = e.derivative(Axis::Z);
        assert!((dz.eval(&q) - (-0.3 * -1.2 / 6.25)).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_elementary_functions() {
        let x = Expr::var(Axis::X);
        let q = p(0.7, 0.0, 0.0);
        let s = Expr::call(Func::Sin, x.clone()).derivative(Axis::X);
        assert!((s.eval(&q) - 0.7f64.cos()).abs() < 1e-15);
        let c = Expr::call(Func::Cos, x.clone()).derivative(Axis::X);
        assert!((c.eval(&q) + 0.7f64.sin()).abs() < 1e-15);
        let e = Expr::call(Func::Exp, x.clone()).derivative(Axis::X);
        assert!((e.eval(&q) - 0.7f64.exp()).abs() < 1e-15);
        let r = Expr::call(Func::Sqrt, x).derivative(Axis::X);
        assert!((r.eval(&q) - 0.5 / 0.7f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sqrt_derivative_at_zero_is_not_finite() {
        let r = Expr::call(Func::Sqrt, Expr::var(Axis::X)).derivative(Axis::X);
        assert!(r.try_eval(&p(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn polynomial_detection() {
        let e = Expr::pow(Expr::var(Axis::X), 3);
        assert!(e.is_polynomial());
        assert!(!Expr::call(Func::Sin, Expr::var(Axis::X)).is_polynomial());
        assert!(!Expr::pow(Expr::var(Axis::X), -1).is_polynomial());
    }

    #[test]
    fn printer_respects_precedence() {
        let e = Expr::mul(
            Expr::add(Expr::var(Axis::X), Expr::var(Axis::Y)),
            Expr::var(Axis::Z),
        );
        assert_eq!(e.to_canonical(), "(x+y)*z");
        let e = Expr::neg(Expr::pow(Expr::var(Axis::X), 2));
        assert_eq!(e.to_canonical(), "-x^2");
        let e = Expr::pow(Expr::neg(Expr::var(Axis::X)), 2);
        assert_eq!(e.to_canonical(), "(-x)^2");
        let e = Expr::sub(
            Expr::var(Axis::X),
            Expr::sub(Expr::var(Axis::Y), Expr::var(Axis::Z)),
        );
        assert_eq!(e.to_canonical(), "x-(y-z)");
    }
}
