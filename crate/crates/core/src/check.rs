//! Two-sided comparisons shared by the verification suites.

use serde::Serialize;

use crate::tensor::Tensor;

/// Magnitudes of both sides of an identity and of their difference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Denominator used for the relative residual.
    pub scale: f64,
}

impl Comparison {
    /// Max-abs comparison of two tensors, relative to `max(|lhs|, |rhs|, 1)`.
    pub fn tensors(lhs: &Tensor<f64>, rhs: &Tensor<f64>) -> Comparison {
        let residual = match lhs.sub(rhs) {
            Ok(d) => d.max_abs(),
            Err(_) => f64::INFINITY,
        };
        let (l, r) = (lhs.max_abs(), rhs.max_abs());
        Comparison { lhs: l, rhs: r, residual, scale: l.max(r).max(1.0) }
    }

    /// Comparison of two numbers relative to `max(|lhs|, |rhs|, floor)`.
    pub fn scalars(lhs: f64, rhs: f64, floor: f64) -> Comparison {
        Comparison { lhs, rhs, residual: (lhs - rhs).abs(), scale: lhs.abs().max(rhs.abs()).max(floor) }
    }

    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual / self.scale
        } else {
            self.residual
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.relative() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floors() {
        let c = Comparison::scalars(1e-9, 2e-9, 1e-6);
        assert!((c.relative() - 1e-3).abs() < 1e-12);
        let c = Comparison::scalars(100.0, 101.0, 1e-6);
        assert!((c.relative() - 1.0 / 101.0).abs() < 1e-15);
        assert!(!Comparison::scalars(f64::NAN, 0.0, 1.0).passes(1.0));
    }
}
