//! Closed-form fields over `(x, y, z)`: parsing, exact differentiation, Lie
//! derivatives, and a catalog of canonical systems.

pub mod catalog;
pub mod expr;
pub mod jet;
pub mod parse;
pub mod system;

use thiserror::Error;

pub use catalog::{catalog, lookup, CatalogEntry, ExpectedFact};
pub use expr::{Axis, Expr, Func, VectorExpr};
pub use jet::{JetBundle, ScalarJetField, VectorJetField};
pub use parse::{parse_field, parse_scalar, parse_vector, Arity, FieldExpression, ParseError};
pub use system::{DomainBox, PwsSystem, Side, SystemError};

use crate::Point3;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LieError {
    #[error("Lie derivative order must be 1, 2 or 3 (got {0})")]
    Order(usize),
    #[error("Lie derivative of order {order} is not finite at ({}, {}, {})", at[0], at[1], at[2])]
    NonFinite { order: usize, at: [f64; 3] },
}

/// Closed-form `X^order g`: order 1 is `X·∇g`, order n is `X·∇(X^{n-1} g)`.
pub fn lie_derivative(x: &VectorExpr, g: &Expr, order: usize) -> Result<Expr, LieError> {
    if !(1..=3).contains(&order) {
        return Err(LieError::Order(order));
    }
    let mut out = x.lie(g);
    for _ in 1..order {
        out = x.lie(&out);
    }
    Ok(out)
}

/// [`lie_derivative`] followed by a finiteness sweep over `domain`, so that a
/// non-smooth primitive inside the box (e.g. `sqrt` at 0) is reported with
/// its location rather than surfacing later as a NaN.
pub fn lie_derivative_on(
    x: &VectorExpr,
    g: &Expr,
    order: usize,
    domain: &DomainBox,
) -> Result<Expr, LieError> {
    let d = lie_derivative(x, g, order)?;
    let n = 8;
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let p: Point3 = domain.lerp([i, j, k].map(|v| v as f64 / n as f64));
                if d.try_eval(&p).is_err() {
                    return Err(LieError::NonFinite {
                        order,
                        at: [p[0], p[1], p[2]],
                    });
                }
            }
        }
    }
    Ok(d)
}
