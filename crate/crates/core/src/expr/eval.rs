use std::collections::HashMap;

use thiserror::Error;

use super::{Constant, Expr, Func, Node};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{reason} in `{node}` (argument {value})")]
    Domain { node: String, value: f64, reason: &'static str },
    #[error("expression uses x{index} but the point has {dim} coordinates")]
    DimensionMismatch { index: usize, dim: usize },
}

impl EvalError {
    pub(crate) fn domain(e: &Expr, value: f64, reason: &'static str) -> EvalError {
        let mut node = e.to_string();
        if node.len() > 120 {
            let mut cut = 117;
            while !node.is_char_boundary(cut) {
                cut -= 1;
            }
            node.truncate(cut);
            node.push_str("...");
        }
        EvalError::Domain { node, value, reason }
    }
}

/// Target arithmetic for [`eval_in`].
pub trait Algebra {
    type Value: Clone;

    fn constant(&self, c: Constant) -> Self::Value;
    fn var(&self, index: usize) -> Result<Self::Value, EvalError>;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn neg(&self, a: &Self::Value) -> Self::Value;
    /// `node` is the divisor, for error reporting.
    fn div(&self, a: &Self::Value, b: &Self::Value, node: &Expr) -> Result<Self::Value, EvalError>;
    fn powi(&self, a: &Self::Value, k: i32, node: &Expr) -> Result<Self::Value, EvalError>;
    fn func(&self, f: Func, a: &Self::Value, node: &Expr) -> Result<Self::Value, EvalError>;
}

/// Plain `f64` evaluation at a point.
pub struct PointAlgebra<'a> {
    point: &'a [f64],
}

impl<'a> PointAlgebra<'a> {
    pub fn new(point: &'a [f64]) -> Self {
        PointAlgebra { point }
    }
}

impl Algebra for PointAlgebra<'_> {
    type Value = f64;

    fn constant(&self, c: Constant) -> f64 {
        c.value()
    }

    fn var(&self, index: usize) -> Result<f64, EvalError> {
        self.point
            .get(index)
            .copied()
            .ok_or(EvalError::DimensionMismatch { index, dim: self.point.len() })
    }

    fn add(&self, a: &f64, b: &f64) -> f64 {
        a + b
    }

    fn mul(&self, a: &f64, b: &f64) -> f64 {
        a * b
    }

    fn neg(&self, a: &f64) -> f64 {
        -a
    }

    fn div(&self, a: &f64, b: &f64, node: &Expr) -> Result<f64, EvalError> {
        if *b == 0.0 {
            return Err(EvalError::domain(node, *b, "division by zero"));
        }
        Ok(a / b)
    }

    fn powi(&self, a: &f64, k: i32, node: &Expr) -> Result<f64, EvalError> {
        if k < 0 && *a == 0.0 {
            return Err(EvalError::domain(node, *a, "negative power of zero"));
        }
        Ok(a.powi(k))
    }

    fn func(&self, f: Func, a: &f64, node: &Expr) -> Result<f64, EvalError> {
        f.apply(*a).ok_or_else(|| EvalError::domain(node, *a, domain_reason(f)))
    }
}

pub(crate) fn domain_reason(f: Func) -> &'static str {
    match f {
        Func::Log => "log of a non-positive value",
        Func::Sqrt => "sqrt of a negative value",
        _ => "non-finite value",
    }
}

/// Evaluates `e` in the algebra `alg`, visiting each shared node once.
pub fn eval_in<A: Algebra>(e: &Expr, alg: &A) -> Result<A::Value, EvalError> {
    let mut memo = HashMap::new();
    eval_rec(e, alg, &mut memo)
}

fn eval_rec<A: Algebra>(
    e: &Expr,
    alg: &A,
    memo: &mut HashMap<*const Node, A::Value>,
) -> Result<A::Value, EvalError> {
    if let Some(v) = memo.get(&e.key()) {
        return Ok(v.clone());
    }
    let v = match e.node() {
        Node::Const(c) => alg.constant(*c),
        Node::Var(i) => alg.var(*i)?,
        Node::Add(a, b) => {
            let a = eval_rec(a, alg, memo)?;
            let b = eval_rec(b, alg, memo)?;
            alg.add(&a, &b)
        }
        Node::Mul(a, b) => {
            let a = eval_rec(a, alg, memo)?;
            let b = eval_rec(b, alg, memo)?;
            alg.mul(&a, &b)
        }
        Node::Div(a, b) => {
            let x = eval_rec(a, alg, memo)?;
            let y = eval_rec(b, alg, memo)?;
            alg.div(&x, &y, b)?
        }
        Node::Neg(a) => {
            let a = eval_rec(a, alg, memo)?;
            alg.neg(&a)
        }
        Node::Pow(a, k) => {
            let x = eval_rec(a, alg, memo)?;
            alg.powi(&x, *k, e)?
        }
        Node::Func(f, a) => {
            let x = eval_rec(a, alg, memo)?;
            alg.func(*f, &x, e)?
        }
    };
    memo.insert(e.key(), v.clone());
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_errors_name_the_node() {
        let e = Expr::parse("1 + log(x0)").unwrap();
        match e.evaluate(&[-1.0]).unwrap_err() {
            EvalError::Domain { node, value, .. } => {
                assert_eq!(node, "log(x0)");
                assert_eq!(value, -1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(Expr::parse("1/x0").unwrap().evaluate(&[0.0]).is_err());
        assert!(Expr::parse("sqrt(x0)").unwrap().evaluate(&[-1e-3]).is_err());
    }

    #[test]
    fn missing_coordinate() {
        let e = Expr::parse("x3").unwrap();
        assert_eq!(
            e.evaluate(&[0.0, 1.0]).unwrap_err(),
            EvalError::DimensionMismatch { index: 3, dim: 2 }
        );
    }
}
