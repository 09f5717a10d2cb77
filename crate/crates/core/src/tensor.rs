//! Dense tensors with explicit per-slot variance.
//!
//! Entries are stored row-major with slot 0 most significant. The entry type
//! is generic: `f64` for values at a point, [`Expr`] for symbolic fields and
//! [`crate::jet::Jet`] for local Taylor fields.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::jet::Jet;
use crate::scalar::{FieldScalar, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("slot {slot} out of range for rank {rank}")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("cannot contract slot {0} with itself")]
    SameSlot(usize),
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("variance mismatch")]
    VarianceMismatch,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("metric is singular")]
    SingularMetric,
}

#[derive(Clone)]
pub struct Tensor<S> {
    dim: usize,
    variance: Vec<Variance>,
    data: Vec<S>,
}

pub type TensorValue = Tensor<f64>;
pub type TensorFieldExpr = Tensor<Expr>;

impl<S: fmt::Debug> fmt::Debug for Tensor<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("dim", &self.dim)
            .field("variance", &self.variance)
            .field("data", &self.data)
            .finish()
    }
}

fn multi_index(mut flat: usize, dim: usize, rank: usize, out: &mut [usize]) {
    for s in (0..rank).rev() {
        out[s] = flat % dim;
        flat /= dim;
    }
}

impl<S> Tensor<S> {
    pub fn new(dim: usize, variance: Vec<Variance>, data: Vec<S>) -> Result<Self, TensorError> {
        let expected = dim.pow(variance.len() as u32);
        if data.len() != expected {
            return Err(TensorError::LengthMismatch { expected, got: data.len() });
        }
        Ok(Tensor { dim, variance, data })
    }

    pub fn from_fn(dim: usize, variance: Vec<Variance>, mut f: impl FnMut(&[usize]) -> S) -> Self {
        let rank = variance.len();
        let len = dim.pow(rank as u32);
        let mut idx = vec![0; rank];
        let data = (0..len)
            .map(|flat| {
                multi_index(flat, dim, rank, &mut idx);
                f(&idx)
            })
            .collect();
        Tensor { dim, variance, data }
    }

    pub fn scalar(value: S) -> Self {
        Tensor { dim: 1, variance: Vec::new(), data: vec![value] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &S {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: S) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    /// The value of a rank-0 tensor.
    pub fn as_scalar(&self) -> &S {
        assert_eq!(self.rank(), 0);
        &self.data[0]
    }

    pub fn map<T>(&self, f: impl FnMut(&S) -> T) -> Tensor<T> {
        Tensor { dim: self.dim, variance: self.variance.clone(), data: self.data.iter().map(f).collect() }
    }

    pub fn try_map<T, E>(&self, f: impl FnMut(&S) -> Result<T, E>) -> Result<Tensor<T>, E> {
        let data = self.data.iter().map(f).collect::<Result<Vec<T>, E>>()?;
        Ok(Tensor { dim: self.dim, variance: self.variance.clone(), data })
    }

    fn check_slot(&self, slot: usize) -> Result<(), TensorError> {
        if slot >= self.rank() {
            return Err(TensorError::SlotOutOfRange { slot, rank: self.rank() });
        }
        Ok(())
    }

    /// Reorders slots: slot `s` of the result is slot `perm[s]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor<S>, TensorError>
    where
        S: Clone,
    {
        let rank = self.rank();
        if perm.len() != rank {
            return Err(TensorError::RankMismatch(perm.len(), rank));
        }
        let mut seen = vec![false; rank];
        for &p in perm {
            self.check_slot(p)?;
            if std::mem::replace(&mut seen[p], true) {
                return Err(TensorError::SameSlot(p));
            }
        }
        let variance = perm.iter().map(|&p| self.variance[p]).collect();
        let mut src = vec![0; rank];
        Ok(Tensor::from_fn(self.dim, variance, |idx| {
            for (s, &p) in perm.iter().enumerate() {
                src[p] = idx[s];
            }
            self.get(&src).clone()
        }))
    }
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(dim: usize, variance: Vec<Variance>, proto: &S) -> Self {
        let z = proto.zero_like();
        let len = dim.pow(variance.len() as u32);
        Tensor { dim, variance, data: vec![z; len] }
    }

    fn proto(&self) -> &S {
        &self.data[0]
    }

    fn check_same_shape(&self, other: &Tensor<S>) -> Result<(), TensorError> {
        if self.dim != other.dim && self.rank() > 0 {
            return Err(TensorError::DimensionMismatch(self.dim, other.dim));
        }
        if self.rank() != other.rank() {
            return Err(TensorError::RankMismatch(self.rank(), other.rank()));
        }
        if self.variance != other.variance {
            return Err(TensorError::VarianceMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor<S>) -> Result<Tensor<S>, TensorError> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.add(b)).collect();
        Ok(Tensor { dim: self.dim, variance: self.variance.clone(), data })
    }

    pub fn sub(&self, other: &Tensor<S>) -> Result<Tensor<S>, TensorError> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.sub(b)).collect();
        Ok(Tensor { dim: self.dim, variance: self.variance.clone(), data })
    }

    pub fn scale(&self, c: f64) -> Tensor<S> {
        self.map(|x| x.scale(c))
    }

    /// Tensor product; slots of `self` come first.
    pub fn outer(&self, other: &Tensor<S>) -> Result<Tensor<S>, TensorError> {
        if self.dim != other.dim && self.rank() > 0 && other.rank() > 0 {
            return Err(TensorError::DimensionMismatch(self.dim, other.dim));
        }
        let dim = if self.rank() > 0 { self.dim } else { other.dim };
        let mut variance = self.variance.clone();
        variance.extend_from_slice(&other.variance);
        let n_other = other.data.len();
        let data = (0..self.data.len() * n_other)
            .map(|k| self.data[k / n_other].mul(&other.data[k % n_other]))
            .collect();
        Ok(Tensor { dim, variance, data })
    }

    /// Trace over two slots, inserting `g^{-1}` or `g` when both slots have
    /// the same variance.
    pub fn contract(&self, a: usize, b: usize, metric: &MetricContext<S>) -> Result<Tensor<S>, TensorError> {
        self.check_slot(a)?;
        self.check_slot(b)?;
        if a == b {
            return Err(TensorError::SameSlot(a));
        }
        if metric.dim() != self.dim {
            return Err(TensorError::DimensionMismatch(metric.dim(), self.dim));
        }
        let (a, b) = (a.min(b), a.max(b));
        let n = self.dim;
        let rank = self.rank();
        let bridge = match (self.variance[a], self.variance[b]) {
            (Variance::Lower, Variance::Lower) => Some(&metric.ginv),
            (Variance::Upper, Variance::Upper) => Some(&metric.g),
            _ => None,
        };
        let variance: Vec<Variance> =
            self.variance.iter().enumerate().filter(|&(s, _)| s != a && s != b).map(|(_, v)| *v).collect();
        let stride_a = n.pow((rank - 1 - a) as u32);
        let stride_b = n.pow((rank - 1 - b) as u32);
        let mut full = vec![0; rank];
        let zero = self.proto().zero_like();
        Ok(Tensor::from_fn(n, variance, |idx| {
            let mut k = 0;
            for (s, slot) in full.iter_mut().enumerate() {
                if s == a || s == b {
                    *slot = 0;
                } else {
                    *slot = idx[k];
                    k += 1;
                }
            }
            let base = full.iter().fold(0, |acc, &i| acc * n + i);
            let mut acc = zero.clone();
            match bridge {
                None => {
                    for p in 0..n {
                        acc = acc.add(&self.data[base + p * (stride_a + stride_b)]);
                    }
                }
                Some(m) => {
                    for p in 0..n {
                        for q in 0..n {
                            let w = &m.data[p * n + q];
                            if !w.is_zero() {
                                acc = acc.mul_add(w, &self.data[base + p * stride_a + q * stride_b]);
                            }
                        }
                    }
                }
            }
            acc
        }))
    }

    /// Changes the variance of one slot using the metric.
    pub fn set_variance(&self, slot: usize, to: Variance, metric: &MetricContext<S>) -> Result<Tensor<S>, TensorError> {
        self.check_slot(slot)?;
        if self.variance[slot] == to {
            return Ok(self.clone());
        }
        let m = match to {
            Variance::Upper => &metric.ginv,
            Variance::Lower => &metric.g,
        };
        let n = self.dim;
        let rank = self.rank();
        let stride = n.pow((rank - 1 - slot) as u32);
        let mut variance = self.variance.clone();
        variance[slot] = to;
        let zero = self.proto().zero_like();
        let mut out = Tensor { dim: n, variance, data: vec![zero.clone(); self.data.len()] };
        for flat in 0..self.data.len() {
            let i = (flat / stride) % n;
            let base = flat - i * stride;
            let mut acc = zero.clone();
            for q in 0..n {
                let w = &m.data[i * n + q];
                if !w.is_zero() {
                    acc = acc.mul_add(w, &self.data[base + q * stride]);
                }
            }
            out.data[flat] = acc;
        }
        Ok(out)
    }

    pub fn raise(&self, slot: usize, metric: &MetricContext<S>) -> Result<Tensor<S>, TensorError> {
        self.set_variance(slot, Variance::Upper, metric)
    }

    pub fn lower(&self, slot: usize, metric: &MetricContext<S>) -> Result<Tensor<S>, TensorError> {
        self.set_variance(slot, Variance::Lower, metric)
    }

    /// Full contraction of corresponding slots of `self` and `other`.
    pub fn inner(&self, other: &Tensor<S>, metric: &MetricContext<S>) -> Result<S, TensorError> {
        if self.dim != other.dim {
            return Err(TensorError::DimensionMismatch(self.dim, other.dim));
        }
        if self.rank() != other.rank() {
            return Err(TensorError::RankMismatch(self.rank(), other.rank()));
        }
        let mut t = other.clone();
        for s in 0..t.rank() {
            let opposite = match self.variance[s] {
                Variance::Upper => Variance::Lower,
                Variance::Lower => Variance::Upper,
            };
            t = t.set_variance(s, opposite, metric)?;
        }
        let mut acc = self.proto().zero_like();
        for (a, b) in self.data.iter().zip(&t.data) {
            acc = acc.mul_add(a, b);
        }
        Ok(acc)
    }

    pub fn norm2(&self, metric: &MetricContext<S>) -> Result<S, TensorError> {
        self.inner(self, metric)
    }

    /// Contracts slot `a` of `self` with slot `b` of `other` for every pair
    /// `(a, b)`. The free slots of `self` come first, then those of `other`.
    pub fn contract_with(
        &self,
        other: &Tensor<S>,
        pairs: &[(usize, usize)],
        metric: &MetricContext<S>,
    ) -> Result<Tensor<S>, TensorError> {
        if self.dim != other.dim {
            return Err(TensorError::DimensionMismatch(self.dim, other.dim));
        }
        let mut t = other.clone();
        for (i, &(a, b)) in pairs.iter().enumerate() {
            self.check_slot(a)?;
            other.check_slot(b)?;
            if pairs[..i].iter().any(|&(x, y)| x == a || y == b) {
                return Err(TensorError::SameSlot(if pairs[..i].iter().any(|&(x, _)| x == a) { a } else { b }));
            }
            let opposite = match self.variance[a] {
                Variance::Upper => Variance::Lower,
                Variance::Lower => Variance::Upper,
            };
            t = t.set_variance(b, opposite, metric)?;
        }
        let n = self.dim;
        let free_a: Vec<usize> = (0..self.rank()).filter(|s| !pairs.iter().any(|p| p.0 == *s)).collect();
        let free_b: Vec<usize> = (0..t.rank()).filter(|s| !pairs.iter().any(|p| p.1 == *s)).collect();
        let mut variance: Vec<Variance> = free_a.iter().map(|&s| self.variance[s]).collect();
        variance.extend(free_b.iter().map(|&s| t.variance[s]));
        let sums = n.pow(pairs.len() as u32);
        let mut ia = vec![0; self.rank()];
        let mut ib = vec![0; t.rank()];
        let zero = self.proto().zero_like();
        Ok(Tensor::from_fn(n, variance, |idx| {
            for (k, &s) in free_a.iter().enumerate() {
                ia[s] = idx[k];
            }
            for (k, &s) in free_b.iter().enumerate() {
                ib[s] = idx[free_a.len() + k];
            }
            let mut acc = zero.clone();
            for mut flat in 0..sums {
                for &(a, b) in pairs.iter().rev() {
                    ia[a] = flat % n;
                    ib[b] = flat % n;
                    flat /= n;
                }
                let x = self.get(&ia);
                if !x.is_zero() {
                    acc = acc.mul_add(x, t.get(&ib));
                }
            }
            acc
        }))
    }

    fn symmetrize_with(&self, slots: &[usize], signed: bool) -> Result<Tensor<S>, TensorError> {
        let mut seen = vec![false; self.rank()];
        for &s in slots {
            self.check_slot(s)?;
            if std::mem::replace(&mut seen[s], true) {
                return Err(TensorError::SameSlot(s));
            }
        }
        let v0 = slots.first().map(|&s| self.variance[s]);
        if slots.iter().any(|&s| Some(self.variance[s]) != v0) {
            return Err(TensorError::VarianceMismatch);
        }
        let perms = permutations(slots.len());
        let weight = 1.0 / perms.len() as f64;
        let mut src = vec![0; self.rank()];
        let zero = self.proto().zero_like();
        Ok(Tensor::from_fn(self.dim, self.variance.clone(), |idx| {
            let mut acc = zero.clone();
            for (perm, sign) in &perms {
                src.copy_from_slice(idx);
                for (k, &p) in perm.iter().enumerate() {
                    src[slots[k]] = idx[slots[p]];
                }
                let term = self.get(&src);
                acc = if signed && *sign < 0 { acc.sub(term) } else { acc.add(term) };
            }
            acc.scale(weight)
        }))
    }

    pub fn sym(&self, slots: &[usize]) -> Result<Tensor<S>, TensorError> {
        self.symmetrize_with(slots, false)
    }

    pub fn antisym(&self, slots: &[usize]) -> Result<Tensor<S>, TensorError> {
        self.symmetrize_with(slots, true)
    }
}

fn permutations(k: usize) -> Vec<(Vec<usize>, i32)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<(Vec<usize>, i32)>) {
        if prefix.len() == used.len() {
            let mut inversions = 0;
            for i in 0..prefix.len() {
                for j in i + 1..prefix.len() {
                    if prefix[i] > prefix[j] {
                        inversions += 1;
                    }
                }
            }
            out.push((prefix.clone(), if inversions % 2 == 0 { 1 } else { -1 }));
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

impl Tensor<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Euclidean (coordinate) norm of the entry array.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Tensor<Expr> {
    pub fn evaluate(&self, point: &[f64]) -> Result<Tensor<f64>, EvalError> {
        self.try_map(|e| e.evaluate(point))
    }
}

impl Tensor<Jet> {
    /// Values at the expansion point.
    pub fn values(&self) -> Tensor<f64> {
        self.map(Jet::value)
    }
}

/// The metric and its inverse, for index gymnastics.
#[derive(Clone, Debug)]
pub struct MetricContext<S> {
    g: Tensor<S>,
    ginv: Tensor<S>,
}

impl<S: FieldScalar> MetricContext<S> {
    /// Builds the context from a symmetric, positive-definite `g_ij`.
    pub fn new(g: Tensor<S>) -> Result<Self, TensorError> {
        if g.variance != [Variance::Lower, Variance::Lower] {
            return Err(TensorError::VarianceMismatch);
        }
        let ginv_data = invert_spd(g.dim, &g.data).ok_or(TensorError::SingularMetric)?;
        let ginv = Tensor { dim: g.dim, variance: vec![Variance::Upper, Variance::Upper], data: ginv_data };
        Ok(MetricContext { g, ginv })
    }
}

impl<S> MetricContext<S> {
    pub fn dim(&self) -> usize {
        self.g.dim
    }

    pub fn g(&self) -> &Tensor<S> {
        &self.g
    }

    pub fn ginv(&self) -> &Tensor<S> {
        &self.ginv
    }
}

/// Gauss-Jordan elimination without pivoting; adequate for positive-definite
/// matrices. Returns `None` when a pivot is exactly zero.
fn invert_spd<S: FieldScalar>(n: usize, a: &[S]) -> Option<Vec<S>> {
    let proto = &a[0];
    let mut m: Vec<S> = a.to_vec();
    let mut inv: Vec<S> =
        (0..n * n).map(|k| if k / n == k % n { proto.constant_like(1.0) } else { proto.zero_like() }).collect();
    for col in 0..n {
        let pivot = m[col * n + col].clone();
        if pivot.is_zero() {
            return None;
        }
        let r = pivot.recip();
        for j in 0..n {
            m[col * n + j] = m[col * n + j].mul(&r);
            inv[col * n + j] = inv[col * n + j].mul(&r);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = m[row * n + col].clone();
            if factor.is_zero() {
                continue;
            }
            for j in 0..n {
                let mj = m[col * n + j].clone();
                let ij = inv[col * n + j].clone();
                m[row * n + j] = m[row * n + j].sub(&factor.mul(&mj));
                inv[row * n + j] = inv[row * n + j].sub(&factor.mul(&ij));
            }
        }
    }
    // Enforce exact symmetry.
    for i in 0..n {
        for j in i + 1..n {
            let avg = inv[i * n + j].add(&inv[j * n + i]).scale(0.5);
            inv[i * n + j] = avg.clone();
            inv[j * n + i] = avg;
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    const L: Variance = Variance::Lower;
    const U: Variance = Variance::Upper;

    fn euclid(n: usize) -> MetricContext<f64> {
        MetricContext::new(Tensor::from_fn(n, vec![L, L], |i| if i[0] == i[1] { 1.0 } else { 0.0 })).unwrap()
    }

    fn skewed() -> MetricContext<f64> {
        let g = [[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 1.0]];
        MetricContext::new(Tensor::from_fn(3, vec![L, L], |i| g[i[0]][i[1]])).unwrap()
    }

    fn sample(rank: usize) -> Tensor<f64> {
        Tensor::from_fn(3, vec![L; rank], |i| i.iter().enumerate().map(|(s, &x)| ((s + 2) * (x + 1)) as f64).product::<f64>().sin())
    }

    #[test]
    fn identity_traces_to_dimension() {
        let m = euclid(5);
        let delta = Tensor::from_fn(5, vec![U, L], |i| if i[0] == i[1] { 1.0 } else { 0.0 });
        assert_eq!(*delta.contract(0, 1, &m).unwrap().as_scalar(), 5.0);
        assert_eq!(*m.g().contract(0, 1, &m).unwrap().as_scalar(), 5.0);
    }

    #[test]
    fn contraction_reduces_rank() {
        let t = sample(4);
        let c = t.contract(1, 3, &skewed()).unwrap();
        assert_eq!(c.rank(), 2);
        assert_eq!(c.data().len(), 9);
        assert!(matches!(t.contract(1, 4, &skewed()), Err(TensorError::SlotOutOfRange { .. })));
        assert!(matches!(t.contract(2, 2, &skewed()), Err(TensorError::SameSlot(2))));
    }

    #[test]
    fn inverse_metric() {
        let m = skewed();
        let prod = m.g().outer(m.ginv()).unwrap();
        let delta = prod.contract(1, 2, &m).unwrap();
        assert_eq!(delta.variance(), &[L, U]);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((delta.get(&[i, j]) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn raise_then_lower_is_identity() {
        let m = skewed();
        let t = sample(3);
        let back = t.raise(1, &m).unwrap().lower(1, &m).unwrap();
        assert!(back.sub(&t).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn norm_is_permutation_invariant() {
        let m = skewed();
        let t = sample(3);
        let p = t.permute(&[2, 0, 1]).unwrap();
        let (a, b) = (t.norm2(&m).unwrap(), p.norm2(&m).unwrap());
        assert!(a > 0.0);
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn symmetrization() {
        let t = sample(3);
        let s = t.sym(&[0, 2]).unwrap();
        assert!(s.antisym(&[0, 2]).unwrap().max_abs() < 1e-15);
        assert!(s.sym(&[0, 2]).unwrap().sub(&s).unwrap().max_abs() < 1e-15);
        let a = t.antisym(&[0, 1, 2]).unwrap();
        assert!(a.antisym(&[0, 1, 2]).unwrap().sub(&a).unwrap().max_abs() < 1e-15);
        let swapped = a.permute(&[1, 0, 2]).unwrap();
        assert!(swapped.add(&a).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn inner_is_symmetric() {
        let m = skewed();
        let a = sample(2);
        let b = sample(2).permute(&[1, 0]).unwrap();
        assert!((a.inner(&b, &m).unwrap() - b.inner(&a, &m).unwrap()).abs() < 1e-14);
        assert!(matches!(a.inner(&sample(3), &m), Err(TensorError::RankMismatch(2, 3))));
    }

    #[test]
    fn contract_with_matches_outer_then_trace() {
        let m = skewed();
        let a = sample(3);
        let b = sample(2).raise(0, &m).unwrap();
        let direct = a.contract_with(&b, &[(2, 1), (0, 0)], &m).unwrap();
        let slow = a.outer(&b).unwrap().contract(2, 4, &m).unwrap().contract(0, 2, &m).unwrap();
        assert_eq!(direct.variance(), &[L]);
        assert!(direct.sub(&slow).unwrap().max_abs() < 1e-13);
        assert!(a.contract_with(&b, &[(0, 0), (0, 1)], &m).is_err());
    }
}
