//! Compiled scalar fields carrying exact first and second derivatives.

use nalgebra::Matrix3;

use super::expr::{Axis, Expr, VectorExpr};
use crate::Point3;

/// Value, gradient and Hessian of a scalar field at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JetBundle {
    pub value: f64,
    pub gradient: Point3,
    pub hessian: Matrix3<f64>,
}

/// A scalar expression with its symbolic gradient and Hessian.
///
/// Hessian entries `(i, j)` and `(j, i)` are differentiated independently
/// (`∂_j ∂_i g` versus `∂_i ∂_j g`), so their agreement is a real check.
#[derive(Clone, Debug)]
pub struct ScalarJetField {
    expr: Expr,
    grad: [Expr; 3],
    hess: [[Expr; 3]; 3],
}

impl ScalarJetField {
    pub fn new(expr: Expr) -> Self {
        let grad = expr.gradient();
        let hess = [0, 1, 2].map(|i| Axis::ALL.map(|a| grad[i].derivative(a)));
        ScalarJetField { expr, grad, hess }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn gradient_exprs(&self) -> &[Expr; 3] {
        &self.grad
    }

    #[inline]
    pub fn value(&self, p: &Point3) -> f64 {
        self.expr.eval(p)
    }

    #[inline]
    pub fn gradient(&self, p: &Point3) -> Point3 {
        Point3::new(
            self.grad[0].eval(p),
            self.grad[1].eval(p),
            self.grad[2].eval(p),
        )
    }

    pub fn hessian(&self, p: &Point3) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.hess[i][j].eval(p))
    }

    pub fn jet(&self, p: &Point3) -> JetBundle {
        JetBundle {
            value: self.value(p),
            gradient: self.gradient(p),
            hessian: self.hessian(p),
        }
    }
}

/// A vector expression with its symbolic Jacobian (`jac[i][j] = ∂_j X_i`).
#[derive(Clone, Debug)]
pub struct VectorJetField {
    field: VectorExpr,
    jac: [[Expr; 3]; 3],
}

impl VectorJetField {
    pub fn new(field: VectorExpr) -> Self {
        let jac = [0, 1, 2].map(|i| field.0[i].gradient());
        VectorJetField { field, jac }
    }

    pub fn expr(&self) -> &VectorExpr {
        &self.field
    }

    #[inline]
    pub fn value(&self, p: &Point3) -> Point3 {
        self.field.eval(p)
    }

    pub fn jacobian(&self, p: &Point3) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.jac[i][j].eval(p))
    }
}
