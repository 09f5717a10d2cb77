//! Truncated multivariate Taylor polynomials ("jets") at a point.
//!
//! A jet of order `k` stores the Taylor coefficients `c_a` of a smooth
//! function for every multi-index `|a| <= k`, so that
//! `F(p + h) = sum c_a h^a + O(|h|^{k+1})`. Products truncate to the smaller
//! order of the two factors and each partial derivative lowers the order by
//! one, which makes curvature chains exact up to rounding without building
//! symbolic derivative trees.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::expr::{Algebra, Constant, EvalError, Expr, Func};
use crate::scalar::{Differentiable, FieldScalar, Scalar};

/// Monomial layout and multiplication tables for `nvars` variables up to
/// total degree `max_order`.
pub struct JetSpace {
    nvars: usize,
    max_order: usize,
    exponents: Vec<Vec<u8>>,
    /// `len_by_order[k]` = number of monomials of degree `<= k`.
    len_by_order: Vec<usize>,
    degree: Vec<u8>,
    /// `(out, a, b)` with `a + b = out`, sorted by the degree of `out`.
    triples: Vec<(u16, u16, u16)>,
    triples_by_order: Vec<usize>,
    /// `product_index[a * len + b]` = index of `a + b`, or `u16::MAX`.
    product_index: Vec<u16>,
    /// `derivative[var][a]` = (index of `a + e_var`, `a_var + 1`) for `|a| < max_order`.
    derivative: Vec<Vec<(u16, f64)>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetSpace(nvars={}, order={})", self.nvars, self.max_order)
    }
}

impl JetSpace {
    pub fn new(nvars: usize, max_order: usize) -> Arc<JetSpace> {
        assert!(nvars >= 1 && max_order <= 12);
        let mut exponents: Vec<Vec<u8>> = Vec::new();
        let mut len_by_order = Vec::with_capacity(max_order + 1);
        for d in 0..=max_order {
            let mut current = vec![0u8; nvars];
            push_degree(&mut exponents, &mut current, 0, d);
            len_by_order.push(exponents.len());
        }
        assert!(exponents.len() < u16::MAX as usize, "jet space too large");
        let len = exponents.len();
        let index: HashMap<Vec<u8>, usize> =
            exponents.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let degree: Vec<u8> = exponents.iter().map(|e| e.iter().sum()).collect();

        let mut product_index = vec![u16::MAX; len * len];
        let mut triples = Vec::new();
        for a in 0..len {
            for b in 0..len {
                if (degree[a] + degree[b]) as usize > max_order {
                    continue;
                }
                let sum: Vec<u8> = exponents[a].iter().zip(&exponents[b]).map(|(x, y)| x + y).collect();
                let out = index[&sum];
                product_index[a * len + b] = out as u16;
                triples.push((out as u16, a as u16, b as u16));
            }
        }
        triples.sort_by_key(|&(out, a, b)| (degree[out as usize], out, a, b));
        let triples_by_order = (0..=max_order)
            .map(|k| triples.iter().take_while(|t| degree[t.0 as usize] as usize <= k).count())
            .collect();

        let mut derivative = vec![Vec::new(); nvars];
        let below = if max_order == 0 { 0 } else { len_by_order[max_order - 1] };
        for (var, table) in derivative.iter_mut().enumerate() {
            for e in exponents.iter().take(below) {
                let mut up = e.clone();
                up[var] += 1;
                table.push((index[&up] as u16, f64::from(e[var]) + 1.0));
            }
        }

        Arc::new(JetSpace {
            nvars,
            max_order,
            exponents,
            len_by_order,
            degree,
            triples,
            triples_by_order,
            product_index,
            derivative,
        })
    }

    /// Process-wide shared space for `(nvars, max_order)`.
    pub fn shared(nvars: usize, max_order: usize) -> Arc<JetSpace> {
        static SPACES: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let spaces = SPACES.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = spaces.lock().unwrap_or_else(|e| e.into_inner());
        guard.entry((nvars, max_order)).or_insert_with(|| JetSpace::new(nvars, max_order)).clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn len(&self, order: usize) -> usize {
        self.len_by_order[order]
    }

    pub fn exponent(&self, index: usize) -> &[u8] {
        &self.exponents[index]
    }

    pub fn index_of(&self, exponent: &[u8]) -> Option<usize> {
        self.exponents.iter().position(|e| e.as_slice() == exponent)
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, var: usize, remaining: usize) {
    // Lexicographically decreasing in the first variable keeps x0 first.
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[var] = k as u8;
        push_degree(out, current, var + 1, remaining - k);
    }
    current[var] = 0;
}

/// A truncated Taylor expansion, valid up to total degree `order`.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(order={}, value={})", self.order, self.value())
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Jet {
        let order = space.max_order;
        let mut coeffs = vec![0.0; space.len(order)];
        coeffs[0] = value;
        Jet { space: space.clone(), order, coeffs }
    }

    /// The coordinate function `x_var` expanded at `at`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, at: f64) -> Jet {
        let mut jet = Jet::constant(space, at);
        if space.max_order >= 1 {
            // Degree-one monomials follow the constant in variable order.
            jet.coeffs[1 + var] = 1.0;
        }
        jet
    }

    pub fn from_coeffs(space: &Arc<JetSpace>, order: usize, coeffs: Vec<f64>) -> Jet {
        assert_eq!(coeffs.len(), space.len(order));
        Jet { space: space.clone(), order, coeffs }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Function value at the expansion point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// The partial derivative `d^a F` at the expansion point.
    pub fn derivative(&self, exponent: &[u8]) -> Option<f64> {
        let idx = self.space.index_of(exponent)?;
        if self.space.degree[idx] as usize > self.order {
            return None;
        }
        let factorial: f64 = exponent.iter().map(|&k| (1..=u32::from(k)).map(f64::from).product::<f64>()).product();
        Some(self.coeffs[idx] * factorial)
    }

    /// The same expansion, kept only through total degree `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet { space: self.space.clone(), order, coeffs: self.truncated(order).to_vec() }
    }

    fn truncated(&self, order: usize) -> &[f64] {
        &self.coeffs[..self.space.len(order)]
    }

    fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0.0)
    }

    fn map_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.order.min(other.order);
        let len = self.space.len(order);
        let coeffs = self.coeffs[..len].iter().zip(&other.coeffs[..len]).map(|(&a, &b)| f(a, b)).collect();
        Jet { space: self.space.clone(), order, coeffs }
    }

    fn scaled_to(&self, order: usize, c: f64) -> Jet {
        let coeffs = self.truncated(order).iter().map(|x| x * c).collect();
        Jet { space: self.space.clone(), order, coeffs }
    }

    fn product(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        if self.is_constant() {
            return other.scaled_to(order, self.coeffs[0]);
        }
        if other.is_constant() {
            return self.scaled_to(order, other.coeffs[0]);
        }
        let space = &*self.space;
        let len = space.len(order);
        let mut out = vec![0.0; len];
        let a = self.truncated(order);
        let b = other.truncated(order);
        let nz_a: Vec<usize> = (0..len).filter(|&i| a[i] != 0.0).collect();
        let nz_b: Vec<usize> = (0..len).filter(|&i| b[i] != 0.0).collect();
        let dense = space.triples_by_order[order];
        if nz_a.len() * nz_b.len() < dense {
            let full = space.exponents.len();
            for &i in &nz_a {
                let di = space.degree[i] as usize;
                let row = &space.product_index[i * full..];
                let ai = a[i];
                for &j in &nz_b {
                    if di + space.degree[j] as usize <= order {
                        out[row[j] as usize] += ai * b[j];
                    }
                }
            }
        } else {
            for &(o, i, j) in &space.triples[..dense] {
                out[o as usize] += a[i as usize] * b[j as usize];
            }
        }
        Jet { space: self.space.clone(), order, coeffs: out }
    }

    /// `sum_m taylor[m] (self - self(p))^m`, for a univariate function with
    /// the given Taylor coefficients at `self(p)`.
    fn compose(&self, taylor: &[f64]) -> Jet {
        let k = self.order;
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        if k == 0 || h.coeffs.iter().all(|&c| c == 0.0) {
            return Jet::constant(&self.space, taylor[0]).scaled_to(k, 1.0);
        }
        let mut acc = Jet::constant(&self.space, taylor[k]).scaled_to(k, 1.0);
        for m in (0..k).rev() {
            acc = acc.product(&h);
            acc.coeffs[0] += taylor[m];
        }
        acc
    }

    pub fn apply(&self, func: Func) -> Option<Jet> {
        let x = self.value();
        func.apply(x)?;
        let k = self.order;
        let mut t = vec![0.0; k + 1];
        let mut factorial = 1.0;
        for (m, slot) in t.iter_mut().enumerate() {
            if m > 0 {
                factorial *= m as f64;
            }
            let mf = m as f64;
            *slot = match func {
                Func::Exp => x.exp() / factorial,
                Func::Sin => (x + mf * std::f64::consts::FRAC_PI_2).sin() / factorial,
                Func::Cos => (x + mf * std::f64::consts::FRAC_PI_2).cos() / factorial,
                Func::Log => {
                    if m == 0 {
                        x.ln()
                    } else {
                        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
                        sign / (mf * x.powi(m as i32))
                    }
                }
                Func::Sqrt => {
                    if m > 0 && x == 0.0 {
                        return None;
                    }
                    binomial_half(m) * x.sqrt() / x.powi(m as i32)
                }
            };
        }
        Some(self.compose(&t))
    }

    pub fn try_recip(&self) -> Option<Jet> {
        let x = self.value();
        if x == 0.0 {
            return None;
        }
        let k = self.order;
        let t: Vec<f64> = (0..=k)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                sign / x.powi(m as i32 + 1)
            })
            .collect();
        Some(self.compose(&t))
    }

    pub fn powi(&self, exponent: i32) -> Option<Jet> {
        let base = if exponent < 0 { self.try_recip()? } else { self.clone() };
        let mut e = exponent.unsigned_abs();
        let mut acc = Jet::constant(&self.space, 1.0).scaled_to(self.order, 1.0);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.product(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.product(&sq);
            }
        }
        Some(acc)
    }
}

fn binomial_half(m: usize) -> f64 {
    let mut c = 1.0;
    for j in 0..m {
        c *= (0.5 - j as f64) / (j as f64 + 1.0);
    }
    c
}

impl Scalar for Jet {
    fn zero_like(&self) -> Jet {
        Jet::constant(&self.space, 0.0)
    }

    fn constant_like(&self, c: f64) -> Jet {
        Jet::constant(&self.space, c)
    }

    fn add(&self, other: &Jet) -> Jet {
        self.map_with(other, |a, b| a + b)
    }

    fn sub(&self, other: &Jet) -> Jet {
        self.map_with(other, |a, b| a - b)
    }

    fn mul(&self, other: &Jet) -> Jet {
        self.product(other)
    }

    fn neg(&self) -> Jet {
        self.scaled_to(self.order, -1.0)
    }

    fn scale(&self, c: f64) -> Jet {
        self.scaled_to(self.order, c)
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn mul_add(&self, a: &Jet, b: &Jet) -> Jet {
        if a.is_zero() || b.is_zero() {
            return self.clone();
        }
        let p = a.product(b);
        self.map_with(&p, |x, y| x + y)
    }
}

impl FieldScalar for Jet {
    fn recip(&self) -> Jet {
        self.try_recip().unwrap_or_else(|| {
            let order = self.order;
            Jet { space: self.space.clone(), order, coeffs: vec![f64::NAN; self.space.len(order)] }
        })
    }
}

impl Differentiable for Jet {
    fn partial(&self, var: usize) -> Jet {
        if self.order == 0 {
            panic!("derivative of an order-0 jet");
        }
        let order = self.order - 1;
        let len = self.space.len(order);
        let table = &self.space.derivative[var];
        let coeffs = (0..len)
            .map(|a| {
                let (up, factor) = table[a];
                factor * self.coeffs[up as usize]
            })
            .collect();
        Jet { space: self.space.clone(), order, coeffs }
    }
}

/// Evaluates expressions to jets expanded at `point`.
pub struct JetAlgebra<'a> {
    space: &'a Arc<JetSpace>,
    point: &'a [f64],
}

impl<'a> JetAlgebra<'a> {
    pub fn new(space: &'a Arc<JetSpace>, point: &'a [f64]) -> Self {
        JetAlgebra { space, point }
    }
}

impl Algebra for JetAlgebra<'_> {
    type Value = Jet;

    fn constant(&self, c: Constant) -> Jet {
        Jet::constant(self.space, c.value())
    }

    fn var(&self, index: usize) -> Result<Jet, EvalError> {
        if index >= self.point.len() || index >= self.space.nvars {
            return Err(EvalError::DimensionMismatch { index, dim: self.point.len() });
        }
        Ok(Jet::variable(self.space, index, self.point[index]))
    }

    fn add(&self, a: &Jet, b: &Jet) -> Jet {
        Scalar::add(a, b)
    }

    fn mul(&self, a: &Jet, b: &Jet) -> Jet {
        a.product(b)
    }

    fn neg(&self, a: &Jet) -> Jet {
        Scalar::neg(a)
    }

    fn div(&self, a: &Jet, b: &Jet, node: &Expr) -> Result<Jet, EvalError> {
        let r = b.try_recip().ok_or_else(|| EvalError::domain(node, b.value(), "division by zero"))?;
        Ok(a.product(&r))
    }

    fn powi(&self, a: &Jet, k: i32, node: &Expr) -> Result<Jet, EvalError> {
        a.powi(k).ok_or_else(|| EvalError::domain(node, a.value(), "negative power of zero"))
    }

    fn func(&self, f: Func, a: &Jet, node: &Expr) -> Result<Jet, EvalError> {
        a.apply(f).ok_or_else(|| EvalError::domain(node, a.value(), crate::expr::domain_reason(f)))
    }
}

/// Expands `e` at `point` to the full order of `space`.
pub fn expand(e: &Expr, space: &Arc<JetSpace>, point: &[f64]) -> Result<Jet, EvalError> {
    crate::expr::eval_in(e, &JetAlgebra::new(space, point))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn monomial_counts() {
        let s = JetSpace::new(4, 6);
        assert_eq!(s.len(6), 210);
        assert_eq!(s.len(0), 1);
        assert_eq!(s.len(1), 5);
        assert_eq!(s.triples_by_order[6], 3003);
        assert_eq!(s.exponent(1), &[1, 0, 0, 0]);
        assert_eq!(s.exponent(4), &[0, 0, 0, 1]);
    }

    #[test]
    fn derivatives_match_symbolic() {
        let space = JetSpace::new(2, 6);
        let p = [0.4, -0.7];
        let e = Expr::parse("exp(sin(x0)*x1)/(2 + cos(x1)) + sqrt(3 + x0^2*x1) - log(2 + x0*x1)").unwrap();
        let jet = expand(&e, &space, &p).unwrap();
        let mut sym = e.clone();
        let mut exponent = [0u8, 0];
        for step in [0usize, 1, 1, 0, 1, 0] {
            sym = sym.differentiate(step);
            exponent[step] += 1;
            let want = sym.evaluate(&p).unwrap();
            let got = jet.derivative(&exponent).unwrap();
            assert!(close(got, want, 1e-11), "{exponent:?}: {got} vs {want}");
        }
    }

    #[test]
    fn partial_lowers_order() {
        let space = JetSpace::new(3, 4);
        let e = Expr::parse("x0^3*x1 + x2^4").unwrap();
        let jet = expand(&e, &space, &[1.0, 2.0, 3.0]).unwrap();
        let d = jet.partial(0).partial(0);
        assert_eq!(d.order(), 2);
        assert!(close(d.value(), 12.0, 1e-14));
        assert!(close(jet.partial(2).value(), 108.0, 1e-14));
    }

    #[test]
    fn sparse_and_dense_products_agree() {
        let space = JetSpace::new(3, 5);
        let p = [0.3, 0.2, -0.1];
        let a = expand(&Expr::parse("sin(x0)").unwrap(), &space, &p).unwrap();
        let b = expand(&Expr::parse("exp(x0 + x1 + x2)").unwrap(), &space, &p).unwrap();
        let dense = a.product(&b);
        let mut out = vec![0.0; space.len(5)];
        for &(o, i, j) in &space.triples {
            out[o as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
        for (x, y) in dense.coeffs.iter().zip(&out) {
            assert!(close(*x, *y, 1e-15));
        }
    }

    #[test]
    fn reciprocal_and_powers() {
        let space = JetSpace::new(1, 6);
        let x = Jet::variable(&space, 0, 0.5);
        let one = x.mul(&x.recip());
        assert!(close(one.value(), 1.0, 1e-15));
        assert!(one.coeffs[1..].iter().all(|c| c.abs() < 1e-13));
        let p = x.powi(-2).unwrap();
        // d^3/dx^3 x^-2 = -24 x^-5
        assert!(close(p.derivative(&[3]).unwrap(), -24.0 / 0.5f64.powi(5), 1e-12));
        assert!(Jet::variable(&space, 0, 0.0).try_recip().is_none());
    }

    #[test]
    fn domain_errors_propagate() {
        let space = JetSpace::new(1, 3);
        let e = Expr::parse("log(x0)").unwrap();
        assert!(expand(&e, &space, &[-1.0]).is_err());
        assert!(expand(&Expr::parse("sqrt(x0)").unwrap(), &space, &[0.0]).is_err());
    }
}
