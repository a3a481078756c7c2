//! Recursive-descent parser for the field expression grammar.
//!
//! ```text
//! vector  := '(' expr ',' expr ',' expr ')'
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('+' | '-') unary | power
//! power   := atom ('^' ['+' | '-'] integer)?
//! atom    := number | 'x' | 'y' | 'z' | func '(' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'exp' | 'sqrt'
//! ```

use alloc::string::{String, ToString};

use thiserror::Error;

use super::expr::{Axis, Expr, Func, VectorExpr};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at byte {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("arity mismatch: expected {expected}, found {found}")]
    Arity {
        expected: &'static str,
        found: &'static str,
    },
}

/// Declared arity of a field expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Scalar,
    Vector,
}

/// A parsed field expression of either arity.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldExpression {
    Scalar(Expr),
    Vector(VectorExpr),
}

impl FieldExpression {
    pub fn arity(&self) -> Arity {
        match self {
            FieldExpression::Scalar(_) => Arity::Scalar,
            FieldExpression::Vector(_) => Arity::Vector,
        }
    }

    pub fn to_canonical(&self) -> String {
        match self {
            FieldExpression::Scalar(e) => e.to_canonical(),
            FieldExpression::Vector(v) => v.to_canonical(),
        }
    }
}

/// Parses `text` and checks it against the declared arity.
pub fn parse_field(text: &str, arity: Arity) -> Result<FieldExpression, ParseError> {
    let mut p = Parser::new(text);
    p.skip_ws();
    let parsed = if p.peek() == Some(b'(') && p.looks_like_vector() {
        FieldExpression::Vector(p.vector()?)
    } else {
        FieldExpression::Scalar(p.expr()?)
    };
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    let found = parsed.arity();
    if found != arity {
        let name = |a: Arity| match a {
            Arity::Scalar => "scalar",
            Arity::Vector => "vector",
        };
        return Err(ParseError::Arity {
            expected: name(arity),
            found: name(found),
        });
    }
    Ok(parsed)
}

pub fn parse_scalar(text: &str) -> Result<Expr, ParseError> {
    match parse_field(text, Arity::Scalar)? {
        FieldExpression::Scalar(e) => Ok(e),
        FieldExpression::Vector(_) => unreachable!("arity checked"),
    }
}

pub fn parse_vector(text: &str) -> Result<VectorExpr, ParseError> {
    match parse_field(text, Arity::Vector)? {
        FieldExpression::Vector(v) => Ok(v),
        FieldExpression::Scalar(_) => unreachable!("arity checked"),
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
        }
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.src.get(self.pos), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&alloc::format!("expected `{}`", c as char)))
        }
    }

    /// A top-level comma at depth one means the outer parentheses are a vector.
    fn looks_like_vector(&self) -> bool {
        let mut depth = 0i32;
        for &c in &self.src[self.pos..] {
            match c {
                b'(' => depth += 1,
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        return false;
                    }
                }
                b',' if depth == 1 => return true,
                _ => {}
            }
        }
        false
    }

    fn vector(&mut self) -> Result<VectorExpr, ParseError> {
        self.expect(b'(')?;
        let a = self.expr()?;
        self.expect(b',')?;
        let b = self.expr()?;
        self.expect(b',')?;
        let c = self.expr()?;
        self.expect(b')')?;
        Ok(VectorExpr([a, b, c]))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::add(lhs, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::mul(lhs, self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::neg(self.unary()?))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let negative = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                true
            }
            Some(b'+') => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        self.skip_ws();
        let start = self.pos;
        while matches!(self.src.get(self.pos), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.syntax("exponent must be an integer literal"));
        }
        let digits = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let n: i32 = digits.parse().map_err(|_| ParseError::Syntax {
            pos: start,
            message: "exponent out of range".to_string(),
        })?;
        Ok(Expr::pow(base, if negative { -n } else { n }))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.syntax("unexpected character")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |s: &mut Self| {
            let from = s.pos;
            while matches!(s.src.get(s.pos), Some(b'0'..=b'9')) {
                s.pos += 1;
            }
            s.pos - from
        };
        let mut count = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return Err(ParseError::Syntax {
                pos: start,
                message: "malformed number".to_string(),
            });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ParseError::Syntax {
                pos: start,
                message: "malformed number".to_string(),
            })
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        match name {
            "x" => Ok(Expr::var(Axis::X)),
            "y" => Ok(Expr::var(Axis::Y)),
            "z" => Ok(Expr::var(Axis::Z)),
            _ => match Func::from_name(name) {
                Some(func) => {
                    self.expect(b'(')?;
                    let arg = self.expr()?;
                    self.expect(b')')?;
                    Ok(Expr::call(func, arg))
                }
                None => Err(ParseError::UnknownIdentifier {
                    pos: start,
                    name: name.to_string(),
                }),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point3;
    use alloc::format;
    use proptest::prelude::*;

    #[test]
    fn plane_gradient_is_constant() {
        let f = parse_scalar("z").unwrap();
        let g = f.gradient();
        for q in [Point3::new(1.0, 2.0, 3.0), Point3::new(-4.0, 0.5, 0.0)] {
            let v: [f64; 3] = [g[0].eval(&q), g[1].eval(&q), g[2].eval(&q)];
            assert_eq!(v, [0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn sphere_level_function() {
        let f = parse_scalar("x^2+y^2+z^2-1").unwrap();
        assert_eq!(f.eval(&Point3::new(1.0, 0.0, 0.0)), 0.0);
        assert_eq!(f.eval(&Point3::new(0.0, 0.0, 2.0)), 3.0);
        assert!(f.is_polynomial());
    }

    #[test]
    fn fold_normal_form_vector() {
        let v = parse_vector("(y,1,0)").unwrap();
        let q = Point3::new(0.0, 0.25, 0.0);
        assert_eq!(v.eval(&q), Point3::new(0.25, 1.0, 0.0));
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_scalar("x + * y") {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier() {
        assert!(matches!(
            parse_scalar("x + w"),
            Err(ParseError::UnknownIdentifier { pos: 4, .. })
        ));
        assert!(matches!(
            parse_scalar("tan(x)"),
            Err(ParseError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn arity_mismatch() {
        assert!(matches!(
            parse_field("(x,y,z)", Arity::Scalar),
            Err(ParseError::Arity { .. })
        ));
        assert!(matches!(
            parse_field("x*y", Arity::Vector),
            Err(ParseError::Arity { .. })
        ));
        // parenthesized scalar is still scalar
        assert!(parse_field("((x+y))*2", Arity::Scalar).is_ok());
    }

    #[test]
    fn non_integer_exponent_rejected() {
        assert!(parse_scalar("x^0.5").is_err());
        assert!(parse_scalar("x^y").is_err());
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_scalar("-x^2").unwrap();
        assert_eq!(e.eval(&Point3::new(3.0, 0.0, 0.0)), -9.0);
        let e = parse_scalar("2^-1*x").unwrap();
        assert_eq!(e.eval(&Point3::new(3.0, 0.0, 0.0)), 1.5);
        let e = parse_scalar("1e-3*x + .5").unwrap();
        assert_eq!(e.eval(&Point3::new(1000.0, 0.0, 0.0)), 1.5);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-5.0f64..5.0).prop_map(|c| Expr::Const((c * 8.0).round() / 8.0)),
            prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)].prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
                inner.clone().prop_map(Expr::neg),
                (inner.clone(), 0i32..4).prop_map(|(a, n)| Expr::pow(a, n)),
                inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
                inner.prop_map(|a| Expr::call(Func::Exp, Expr::mul(Expr::Const(0.1), a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn canonical_printer_round_trips(e in arb_expr(), x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
            let text = e.to_canonical();
            let back = parse_scalar(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
            prop_assert_eq!(back.to_canonical(), text.clone());
            let q = Point3::new(x, y, z);
            let (a, b) = (e.eval(&q), back.eval(&q));
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{} vs {} for {}", a, b, text);
        }
    }
}
