//! Closed-form scalar expressions over chart coordinates `x0, x1, ...`.
//!
//! Expressions are immutable DAGs of reference-counted nodes. Construction
//! goes through smart constructors that perform only cheap local rewrites
//! (`0*e -> 0`, `e+0 -> e`, constant folding), so the output of
//! [`Expr::differentiate`] stays over the same node set without any attempt
//! at a canonical form.
//!
//! The accepted text grammar (see `docs/grammar.md`):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := ("-" | "+") unary | power
//! power   := primary ("^" unary)?
//! primary := number | "pi" | "x" digits | func "(" expr ")" | "(" expr ")"
//! func    := "sin" | "cos" | "exp" | "log" | "sqrt"
//! ```
//!
//! The exponent of `^` must fold to an integer constant, except when the
//! base is itself a positive constant.

mod diff;
mod eval;
mod parse;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, ToPrimitive, Zero};

pub(crate) use eval::domain_reason;
pub use eval::{eval_in, Algebra, EvalError, PointAlgebra};
pub use parse::ParseError;

/// Unary elementary functions supported by the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    /// Applies the function to a real argument; `None` outside the domain.
    pub fn apply(self, x: f64) -> Option<f64> {
        match self {
            Func::Sin => Some(x.sin()),
            Func::Cos => Some(x.cos()),
            Func::Exp => Some(x.exp()),
            Func::Log => (x > 0.0).then(|| x.ln()),
            Func::Sqrt => (x >= 0.0).then(|| x.sqrt()),
        }
    }
}

/// A literal constant: exact rational when the value is representable, real otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constant {
    Rational(Rational64),
    Real(f64),
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Rational(r) => r.to_f64().unwrap_or(f64::NAN),
            Constant::Real(x) => x,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Constant::Rational(r) => r.is_zero(),
            Constant::Real(x) => x == 0.0,
        }
    }

    pub fn is_one(self) -> bool {
        match self {
            Constant::Rational(r) => r == Rational64::from_integer(1),
            Constant::Real(x) => x == 1.0,
        }
    }

    /// Integer value, if the constant is an exact integer.
    pub fn as_integer(self) -> Option<i64> {
        match self {
            Constant::Rational(r) if r.is_integer() => Some(*r.numer()),
            Constant::Real(x) if x.fract() == 0.0 && x.abs() < 1e15 => Some(x as i64),
            _ => None,
        }
    }

    fn combine(
        self,
        other: Constant,
        exact: impl Fn(Rational64, Rational64) -> Option<Rational64>,
        real: impl Fn(f64, f64) -> f64,
    ) -> Constant {
        if let (Constant::Rational(a), Constant::Rational(b)) = (self, other) {
            if let Some(r) = exact(a, b) {
                return Constant::Rational(r);
            }
        }
        Constant::Real(real(self.value(), other.value()))
    }
}

#[derive(Debug)]
pub enum Node {
    Const(Constant),
    Var(usize),
    Add(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Pow(Expr, i32),
    Func(Func, Expr),
}

/// Shared, immutable expression handle.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    fn wrap(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn key(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn constant(value: f64) -> Expr {
        Expr::wrap(Node::Const(constant_from_f64(value)))
    }

    pub fn rational(numer: i64, denom: i64) -> Expr {
        Expr::wrap(Node::Const(Constant::Rational(Rational64::new(numer, denom))))
    }

    pub fn integer(value: i64) -> Expr {
        Expr::rational(value, 1)
    }

    pub fn zero() -> Expr {
        Expr::integer(0)
    }

    pub fn one() -> Expr {
        Expr::integer(1)
    }

    pub fn var(index: usize) -> Expr {
        Expr::wrap(Node::Var(index))
    }

    pub fn as_constant(&self) -> Option<Constant> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant().is_some_and(Constant::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(Constant::is_one)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_constant(), other.as_constant()) {
            return Expr::wrap(Node::Const(a.combine(b, |x, y| x.checked_add(&y), |x, y| x + y)));
        }
        Expr::wrap(Node::Add(self.clone(), other.clone()))
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if self.is_zero() || other.is_zero() {
            return Expr::zero();
        }
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_constant(), other.as_constant()) {
            return Expr::wrap(Node::Const(a.combine(b, |x, y| x.checked_mul(&y), |x, y| x * y)));
        }
        Expr::wrap(Node::Mul(self.clone(), other.clone()))
    }

    pub fn div(&self, other: &Expr) -> Expr {
        if self.is_zero() && !other.is_zero() {
            return Expr::zero();
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_constant(), other.as_constant()) {
            if !b.is_zero() {
                return Expr::wrap(Node::Const(a.combine(b, |x, y| x.checked_div(&y), |x, y| x / y)));
            }
        }
        Expr::wrap(Node::Div(self.clone(), other.clone()))
    }

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::wrap(Node::Const(match *c {
                Constant::Rational(r) => Constant::Rational(-r),
                Constant::Real(x) => Constant::Real(-x),
            })),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::wrap(Node::Neg(self.clone())),
        }
    }

    pub fn powi(&self, exponent: i32) -> Expr {
        match exponent {
            0 => return Expr::one(),
            1 => return self.clone(),
            _ => {}
        }
        if let Some(c) = self.as_constant() {
            if let Constant::Rational(r) = c {
                if !r.is_zero() || exponent > 0 {
                    if let Some(p) = checked_rational_pow(r, exponent) {
                        return Expr::wrap(Node::Const(Constant::Rational(p)));
                    }
                }
            }
            let v = c.value().powi(exponent);
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::wrap(Node::Pow(self.clone(), exponent))
    }

    pub fn apply(func: Func, arg: &Expr) -> Expr {
        if let Some(c) = arg.as_constant() {
            if let Constant::Rational(r) = c {
                if r.is_zero() {
                    match func {
                        Func::Sin | Func::Sqrt => return Expr::zero(),
                        Func::Cos | Func::Exp => return Expr::one(),
                        Func::Log => {}
                    }
                }
            }
            if let Some(v) = func.apply(c.value()).filter(|v| v.is_finite()) {
                return Expr::constant(v);
            }
        }
        Expr::wrap(Node::Func(func, arg.clone()))
    }

    pub fn sin(&self) -> Expr {
        Expr::apply(Func::Sin, self)
    }

    pub fn cos(&self) -> Expr {
        Expr::apply(Func::Cos, self)
    }

    pub fn exp(&self) -> Expr {
        Expr::apply(Func::Exp, self)
    }

    pub fn log(&self) -> Expr {
        Expr::apply(Func::Log, self)
    }

    pub fn sqrt(&self) -> Expr {
        Expr::apply(Func::Sqrt, self)
    }

    pub fn scale(&self, c: f64) -> Expr {
        self.mul(&Expr::constant(c))
    }

    /// Parses text in the expression grammar. Any `xN` identifier is accepted.
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        parse::parse(text, None)
    }

    /// Parses text, rejecting coordinate identifiers `xN` with `N >= dim`.
    pub fn parse_with_dim(text: &str, dim: usize) -> Result<Expr, ParseError> {
        parse::parse(text, Some(dim))
    }

    /// Exact symbolic partial derivative with respect to coordinate `var`.
    pub fn differentiate(&self, var: usize) -> Expr {
        diff::differentiate(self, var)
    }

    /// Evaluates at a point in IEEE double arithmetic.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, EvalError> {
        eval_in(self, &PointAlgebra::new(point))
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        let mut seen = HashMap::new();
        max_var_rec(self, &mut seen)
    }

    /// Number of distinct nodes in the DAG.
    pub fn node_count(&self) -> usize {
        let mut seen = HashMap::new();
        count_rec(self, &mut seen);
        seen.len()
    }

    /// Replaces coordinate `xi` by `subs[i]`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        let mut memo = HashMap::new();
        substitute_rec(self, subs, &mut memo)
    }
}

fn checked_rational_pow(r: Rational64, exponent: i32) -> Option<Rational64> {
    let base = if exponent < 0 {
        if r.is_zero() {
            return None;
        }
        r.recip()
    } else {
        r
    };
    let mut acc = Rational64::from_integer(1);
    for _ in 0..exponent.unsigned_abs() {
        acc = acc.checked_mul(&base)?;
    }
    Some(acc)
}

fn constant_from_f64(value: f64) -> Constant {
    if value.fract() == 0.0 && value.abs() < 1e15 {
        return Constant::Rational(Rational64::from_integer(value as i64));
    }
    Constant::Real(value)
}

fn max_var_rec(e: &Expr, seen: &mut HashMap<*const Node, Option<usize>>) -> Option<usize> {
    if let Some(v) = seen.get(&e.key()) {
        return *v;
    }
    let r = match e.node() {
        Node::Const(_) => None,
        Node::Var(i) => Some(*i),
        Node::Add(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            max_var_rec(a, seen).max(max_var_rec(b, seen))
        }
        Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => max_var_rec(a, seen),
    };
    seen.insert(e.key(), r);
    r
}

fn count_rec(e: &Expr, seen: &mut HashMap<*const Node, ()>) {
    if seen.insert(e.key(), ()).is_some() {
        return;
    }
    match e.node() {
        Node::Const(_) | Node::Var(_) => {}
        Node::Add(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            count_rec(a, seen);
            count_rec(b, seen);
        }
        Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => count_rec(a, seen),
    }
}

fn substitute_rec(e: &Expr, subs: &[Expr], memo: &mut HashMap<*const Node, Expr>) -> Expr {
    if let Some(r) = memo.get(&e.key()) {
        return r.clone();
    }
    let r = match e.node() {
        Node::Const(_) => e.clone(),
        Node::Var(i) => subs.get(*i).cloned().unwrap_or_else(|| e.clone()),
        Node::Add(a, b) => substitute_rec(a, subs, memo).add(&substitute_rec(b, subs, memo)),
        Node::Mul(a, b) => substitute_rec(a, subs, memo).mul(&substitute_rec(b, subs, memo)),
        Node::Div(a, b) => substitute_rec(a, subs, memo).div(&substitute_rec(b, subs, memo)),
        Node::Neg(a) => substitute_rec(a, subs, memo).neg(),
        Node::Pow(a, k) => substitute_rec(a, subs, memo).powi(*k),
        Node::Func(f, a) => Expr::apply(*f, &substitute_rec(a, subs, memo)),
    };
    memo.insert(e.key(), r.clone());
    r
}

// Precedence levels used by the renderer.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Add(..) => PREC_ADD,
        Node::Mul(..) | Node::Div(..) => PREC_MUL,
        Node::Neg(_) => PREC_NEG,
        Node::Pow(..) => PREC_POW,
        Node::Const(Constant::Rational(r)) if !r.is_integer() || *r.numer() < 0 => PREC_MUL,
        Node::Const(Constant::Real(x)) if *x < 0.0 => PREC_NEG,
        Node::Const(_) | Node::Var(_) | Node::Func(..) => PREC_ATOM,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if precedence(e) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(Constant::Rational(r)) => {
                if r.is_integer() {
                    if *r.numer() < 0 {
                        write!(f, "({})", r.numer())
                    } else {
                        write!(f, "{}", r.numer())
                    }
                } else {
                    write!(f, "({}/{})", r.numer(), r.denom())
                }
            }
            Node::Const(Constant::Real(x)) => {
                if *x < 0.0 {
                    write!(f, "(-{:?})", -x)
                } else {
                    write!(f, "{x:?}")
                }
            }
            Node::Var(i) => write!(f, "x{i}"),
            Node::Add(a, b) => {
                write_child(f, a, PREC_ADD)?;
                if let Node::Neg(inner) = b.node() {
                    write!(f, " - ")?;
                    write_child(f, inner, PREC_MUL)
                } else {
                    write!(f, " + ")?;
                    write_child(f, b, PREC_MUL)
                }
            }
            Node::Mul(a, b) => {
                write_child(f, a, PREC_MUL)?;
                write!(f, "*")?;
                write_child(f, b, PREC_NEG)
            }
            Node::Div(a, b) => {
                write_child(f, a, PREC_MUL)?;
                write!(f, "/")?;
                write_child(f, b, PREC_POW)
            }
            Node::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, PREC_POW)
            }
            Node::Pow(a, k) => {
                write_child(f, a, PREC_ATOM)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Node::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl From<f64> for Expr {
    fn from(value: f64) -> Expr {
        Expr::constant(value)
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Expr, ParseError> {
        Expr::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_rewrites() {
        let x = Expr::var(0);
        assert!(x.mul(&Expr::zero()).is_zero());
        assert!(x.add(&Expr::zero()).ptr_eq(&x));
        assert!(Expr::one().mul(&x).ptr_eq(&x));
        let folded = Expr::integer(2).add(&Expr::rational(1, 2));
        assert_eq!(folded.as_constant(), Some(Constant::Rational(Rational64::new(5, 2))));
        assert!(x.neg().neg().ptr_eq(&x));
    }

    #[test]
    fn render_round_trips_through_parser() {
        for text in [
            "x1^2",
            "sin(x0)*cos(x0)",
            "exp(-(x2^2 + x3^2)/2)",
            "x0 - (x1 - x2)",
            "-x0^2",
            "(x0 + 1)^(-3)",
            "0.05*cos(x0 - x1) + 1",
            "x0/(x1*x2)",
            "1/2*x0",
        ] {
            let e = Expr::parse(text).unwrap();
            let again = Expr::parse(&e.to_string()).unwrap();
            let p = [0.3, -0.7, 1.1, 0.4];
            assert_eq!(e.evaluate(&p).unwrap(), again.evaluate(&p).unwrap(), "{text} -> {e}");
        }
    }

    #[test]
    fn max_var_and_substitute() {
        let e = Expr::parse("x0*x3 + sin(x1)").unwrap();
        assert_eq!(e.max_var(), Some(3));
        let shifted = e.substitute(&[Expr::var(1), Expr::var(0), Expr::var(2), Expr::var(3)]);
        let p = [0.2, 0.5, 0.0, 2.0];
        let q = [0.5, 0.2, 0.0, 2.0];
        assert_eq!(shifted.evaluate(&p).unwrap(), e.evaluate(&q).unwrap());
    }
}
