//! Arithmetic traits shared by tensor entries: plain reals, symbolic
//! expressions and local Taylor jets.

use crate::expr::Expr;

pub trait Scalar: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    fn constant_like(&self, c: f64) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn is_zero(&self) -> bool;

    /// `self + a*b`.
    fn mul_add(&self, a: &Self, b: &Self) -> Self {
        if a.is_zero() || b.is_zero() {
            return self.clone();
        }
        self.add(&a.mul(b))
    }
}

pub trait FieldScalar: Scalar {
    fn recip(&self) -> Self;
}

pub trait Differentiable: Scalar {
    fn partial(&self, var: usize) -> Self;
}

impl Scalar for f64 {
    fn zero_like(&self) -> f64 {
        0.0
    }
    fn constant_like(&self, c: f64) -> f64 {
        c
    }
    fn add(&self, other: &f64) -> f64 {
        self + other
    }
    fn sub(&self, other: &f64) -> f64 {
        self - other
    }
    fn mul(&self, other: &f64) -> f64 {
        self * other
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn scale(&self, c: f64) -> f64 {
        self * c
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn mul_add(&self, a: &f64, b: &f64) -> f64 {
        self + a * b
    }
}

impl FieldScalar for f64 {
    fn recip(&self) -> f64 {
        1.0 / self
    }
}

impl Scalar for Expr {
    fn zero_like(&self) -> Expr {
        Expr::zero()
    }
    fn constant_like(&self, c: f64) -> Expr {
        Expr::constant(c)
    }
    fn add(&self, other: &Expr) -> Expr {
        Expr::add(self, other)
    }
    fn sub(&self, other: &Expr) -> Expr {
        Expr::sub(self, other)
    }
    fn mul(&self, other: &Expr) -> Expr {
        Expr::mul(self, other)
    }
    fn neg(&self) -> Expr {
        Expr::neg(self)
    }
    fn scale(&self, c: f64) -> Expr {
        Expr::scale(self, c)
    }
    fn is_zero(&self) -> bool {
        Expr::is_zero(self)
    }
}

impl FieldScalar for Expr {
    fn recip(&self) -> Expr {
        Expr::one().div(self)
    }
}

impl Differentiable for Expr {
    fn partial(&self, var: usize) -> Expr {
        self.differentiate(var)
    }
}
