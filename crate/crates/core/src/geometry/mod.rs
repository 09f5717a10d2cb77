//! Levi-Civita connection and the curvature stack.
//!
//! Conventions: `R^l_{ijk} d_l = Riem(d_j, d_k) d_i` with
//! `Riem(X,Y)Z = [nabla_X, nabla_Y]Z - nabla_{[X,Y]}Z`, `R_{ijkl} = g_{im} R^m_{jkl}`,
//! `R_{ik} = g^{jl} R_{ijkl}`. With these the round sphere has positive
//! scalar curvature. Covariant derivatives append a lower slot, so
//! `T_{ij,k}` is stored with `k` last.

mod chart;

pub use chart::{CoordKind, Coordinate, MetricChart};

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::expr::EvalError;
use crate::scalar::{Differentiable, FieldScalar, Scalar};
use crate::tensor::{MetricContext, Tensor, TensorError, Variance};

const L: Variance = Variance::Lower;
const U: Variance = Variance::Upper;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("{what} requires dimension at least {needed}, got {got}")]
    Dimension { what: &'static str, needed: usize, got: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },
    #[error("point {point:?} is outside the safe sampling domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
}

/// Memoized derived fields, keyed by derivation path.
pub struct CurvatureCache<S> {
    entries: Mutex<HashMap<String, Arc<Tensor<S>>>>,
}

impl<S> Default for CurvatureCache<S> {
    fn default() -> Self {
        CurvatureCache { entries: Mutex::new(HashMap::new()) }
    }
}

impl<S> CurvatureCache<S> {
    pub fn get(&self, key: &str) -> Option<Arc<Tensor<S>>> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).get(key).cloned()
    }

    /// Returns the cached value or computes it. The lock is not held while
    /// computing, so `compute` may itself use the cache; if two callers race
    /// on one key the first stored value wins.
    pub fn get_or_try_insert<E>(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<Tensor<S>, E>,
    ) -> Result<Arc<Tensor<S>>, E> {
        if let Some(hit) = self.get(key) {
            return Ok(hit);
        }
        let value = Arc::new(compute()?);
        let mut guard = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        Ok(guard.entry(key.to_string()).or_insert(value).clone())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The curvature stack of a metric whose entries are differentiable scalars.
pub struct Geometry<S> {
    metric: MetricContext<S>,
    cache: CurvatureCache<S>,
}

impl<S: Differentiable + FieldScalar> Geometry<S> {
    pub fn new(g: Tensor<S>) -> Result<Self, GeometryError> {
        Ok(Geometry { metric: MetricContext::new(g)?, cache: CurvatureCache::default() })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &MetricContext<S> {
        &self.metric
    }

    pub fn g(&self) -> &Tensor<S> {
        self.metric.g()
    }

    pub fn cache(&self) -> &CurvatureCache<S> {
        &self.cache
    }

    fn proto(&self) -> &S {
        &self.metric.g().data()[0]
    }

    fn need_dim(&self, what: &'static str, needed: usize) -> Result<(), GeometryError> {
        if self.dim() < needed {
            return Err(GeometryError::Dimension { what, needed, got: self.dim() });
        }
        Ok(())
    }

    /// `Gamma^k_{ij}`, stored as `[k][i][j]`.
    pub fn christoffel(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.cache.get_or_try_insert("christoffel", || {
            let n = self.dim();
            let g = self.metric.g();
            let dg: Vec<Tensor<S>> = (0..n).map(|l| g.map(|x| x.partial(l))).collect();
            // First kind: Gamma_{l i j} = (d_i g_jl + d_j g_il - d_l g_ij) / 2.
            let first = Tensor::from_fn(n, vec![L, L, L], |idx| {
                let (l, i, j) = (idx[0], idx[1], idx[2]);
                dg[i].get(&[j, l]).add(dg[j].get(&[i, l])).sub(dg[l].get(&[i, j])).scale(0.5)
            });
            Ok(first.raise(0, &self.metric)?)
        })
    }

    /// Appends a lower slot holding the derivative index.
    pub fn covariant_derivative(&self, t: &Tensor<S>) -> Result<Tensor<S>, GeometryError> {
        let gamma = self.christoffel()?;
        let n = self.dim();
        let rank = t.rank();
        let partials: Vec<Tensor<S>> = (0..n).map(|m| t.map(|x| x.partial(m))).collect();
        let mut variance = t.variance().to_vec();
        variance.push(L);
        let nz = nonzero_gamma(&gamma);
        let mut src = vec![0; rank];
        Ok(Tensor::from_fn(n, variance, |idx| {
            let m = idx[rank];
            let base = &idx[..rank];
            let mut acc = partials[m].get(base).clone();
            for s in 0..rank {
                src.copy_from_slice(base);
                let a = base[s];
                match t.variance()[s] {
                    Variance::Lower => {
                        // - Gamma^p_{m a} t_{..p..}
                        for (p, gm) in &nz.lower[m * n + a] {
                            src[s] = *p;
                            acc = acc.sub(&gm.mul(t.get(&src)));
                        }
                    }
                    Variance::Upper => {
                        // + Gamma^a_{m p} t^{..p..}
                        for (p, gm) in &nz.upper[m * n + a] {
                            src[s] = *p;
                            acc = acc.mul_add(gm, t.get(&src));
                        }
                    }
                }
            }
            acc
        }))
    }

    /// `T_{..a..,a}`: the covariant derivative contracted between `slot` and
    /// the new derivative slot, without forming the full derivative.
    pub fn divergence(&self, t: &Tensor<S>, slot: usize) -> Result<Tensor<S>, GeometryError> {
        let rank = t.rank();
        if slot >= rank {
            return Err(TensorError::SlotOutOfRange { slot, rank }.into());
        }
        let u = t.raise(slot, &self.metric)?;
        let gamma = self.christoffel()?;
        let n = self.dim();
        let nz = nonzero_gamma(&gamma);
        // c_m = Gamma^p_{p m}
        let zero = self.proto().zero_like();
        let trace: Vec<S> = (0..n)
            .map(|m| (0..n).fold(zero.clone(), |acc, p| acc.add(gamma.get(&[p, p, m]))))
            .collect();
        let partials: Vec<Tensor<S>> = (0..n).map(|p| u.map(|x| x.partial(p))).collect();
        let variance: Vec<Variance> =
            u.variance().iter().enumerate().filter(|&(s, _)| s != slot).map(|(_, v)| *v).collect();
        let mut full = vec![0; rank];
        let mut src = vec![0; rank];
        Ok(Tensor::from_fn(n, variance, |idx| {
            let mut k = 0;
            for (s, f) in full.iter_mut().enumerate() {
                if s != slot {
                    *f = idx[k];
                    k += 1;
                }
            }
            let mut acc = zero.clone();
            for p in 0..n {
                full[slot] = p;
                acc = acc.add(partials[p].get(&full));
                if !trace[p].is_zero() {
                    acc = acc.mul_add(&trace[p], u.get(&full));
                }
                for s in 0..rank {
                    if s == slot {
                        continue;
                    }
                    src.copy_from_slice(&full);
                    let a = full[s];
                    match u.variance()[s] {
                        Variance::Lower => {
                            for (m, gm) in &nz.lower[p * n + a] {
                                src[s] = *m;
                                acc = acc.sub(&gm.mul(u.get(&src)));
                            }
                        }
                        Variance::Upper => {
                            for (m, gm) in &nz.upper[p * n + a] {
                                src[s] = *m;
                                acc = acc.mul_add(gm, u.get(&src));
                            }
                        }
                    }
                }
            }
            acc
        }))
    }

    /// Gradient `f_i` of a scalar.
    pub fn gradient(&self, f: &S) -> Tensor<S> {
        Tensor::from_fn(self.dim(), vec![L], |i| f.partial(i[0]))
    }

    /// `R_{ijkl}`.
    pub fn riemann(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.cache.get_or_try_insert("riemann", || {
            let n = self.dim();
            let gamma = self.christoffel()?;
            let dgamma: Vec<Tensor<S>> = (0..n).map(|j| gamma.map(|x| x.partial(j))).collect();
            let zero = self.proto().zero_like();
            // R^m_{ijk} = d_j G^m_{ki} - d_k G^m_{ji} + G^m_{jp} G^p_{ki} - G^m_{kp} G^p_{ji}
            let mut up = Tensor::zeros(n, vec![U, L, L, L], self.proto());
            for m in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        for k in (j + 1)..n {
                            let mut acc = dgamma[j].get(&[m, k, i]).sub(dgamma[k].get(&[m, j, i]));
                            for p in 0..n {
                                acc = acc.mul_add(gamma.get(&[m, j, p]), gamma.get(&[p, k, i]));
                                let t = gamma.get(&[m, k, p]);
                                if !t.is_zero() {
                                    acc = acc.sub(&t.mul(gamma.get(&[p, j, i])));
                                }
                            }
                            up.set(&[m, i, k, j], zero.sub(&acc));
                            up.set(&[m, i, j, k], acc);
                        }
                    }
                }
            }
            let mut low = up.lower(0, &self.metric)?;
            enforce_curvature_symmetries(&mut low);
            Ok(low)
        })
    }

    /// `R_{ik} = g^{jl} R_{ijkl}`.
    pub fn ricci(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.cache.get_or_try_insert("ricci", || {
            let mut ric = self.riemann()?.contract(1, 3, &self.metric)?;
            symmetrize_pair(&mut ric);
            Ok(ric)
        })
    }

    pub fn scalar_curvature(&self) -> Result<S, GeometryError> {
        let r = self.cache.get_or_try_insert("scalar", || -> Result<_, GeometryError> {
            Ok(self.ricci()?.contract(0, 1, &self.metric)?)
        })?;
        Ok(r.as_scalar().clone())
    }

    /// Weyl tensor from the decomposition of Riemann.
    pub fn weyl(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.need_dim("weyl", 3)?;
        self.cache.get_or_try_insert("weyl", || {
            let n = self.dim();
            let nf = n as f64;
            let rm = self.riemann()?;
            let ric = self.ricci()?;
            let r = self.scalar_curvature()?;
            let g = self.metric.g();
            let a = 1.0 / (nf - 2.0);
            let rs = r.scale(1.0 / ((nf - 1.0) * (nf - 2.0)));
            let mut w = Tensor::from_fn(n, vec![L, L, L, L], |x| {
                let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
                let ricci_part = ric
                    .get(&[i, k])
                    .mul(g.get(&[j, l]))
                    .sub(&ric.get(&[i, l]).mul(g.get(&[j, k])))
                    .add(&ric.get(&[j, l]).mul(g.get(&[i, k])))
                    .sub(&ric.get(&[j, k]).mul(g.get(&[i, l])));
                let gg = g.get(&[i, k]).mul(g.get(&[j, l])).sub(&g.get(&[i, l]).mul(g.get(&[j, k])));
                rm.get(x).sub(&ricci_part.scale(a)).add(&rs.mul(&gg))
            });
            enforce_curvature_symmetries(&mut w);
            Ok(w)
        })
    }

    /// `R_{ij,k}`.
    pub fn ricci_derivative(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.cache.get_or_try_insert("ricci|d", || {
            let ric = self.ricci()?;
            self.covariant_derivative(&ric)
        })
    }

    /// `C_{ijk} = R_{ij,k} - R_{ik,j} - (R_k g_ij - R_j g_ik) / (2(n-1))`.
    pub fn cotton(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.need_dim("cotton", 3)?;
        self.cache.get_or_try_insert("cotton", || {
            let n = self.dim();
            let dric = self.ricci_derivative()?;
            let dr = self.gradient(&self.scalar_curvature()?);
            let g = self.metric.g();
            let c = 1.0 / (2.0 * (n as f64 - 1.0));
            Ok(Tensor::from_fn(n, vec![L, L, L], |x| {
                let (i, j, k) = (x[0], x[1], x[2]);
                let trace = dr.get(&[k]).mul(g.get(&[i, j])).sub(&dr.get(&[j]).mul(g.get(&[i, k])));
                dric.get(&[i, j, k]).sub(dric.get(&[i, k, j])).sub(&trace.scale(c))
            }))
        })
    }

    /// `W_{tijk,t}`, indexed `(i, j, k)`.
    pub fn weyl_divergence(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.cache.get_or_try_insert("weyl|div0", || {
            let w = self.weyl()?;
            self.divergence(&w, 0)
        })
    }

    /// `C_{ijk} = -((n-2)/(n-3)) W_{tijk,t}`.
    pub fn cotton_from_weyl(&self) -> Result<Tensor<S>, GeometryError> {
        self.need_dim("cotton_from_weyl", 4)?;
        let nf = self.dim() as f64;
        Ok(self.weyl_divergence()?.scale(-(nf - 2.0) / (nf - 3.0)))
    }

    /// `R^{ij}`.
    pub fn ricci_up(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.cache.get_or_try_insert("ricci|up", || -> Result<_, GeometryError> {
            Ok(self.ricci()?.raise(0, &self.metric)?.raise(1, &self.metric)?)
        })
    }

    /// `W_{ikjl,lk}`, indexed `(i, j)`.
    pub fn weyl_double_divergence(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.cache.get_or_try_insert("weyl|div3|div1", || {
            let w = self.weyl()?;
            let first = self.divergence(&w, 3)?;
            self.divergence(&first, 1)
        })
    }

    /// `B_{ij} = W_{ikjl,lk}/(n-3) + R_{kl} W_{ikjl}/(n-2)`.
    pub fn bach(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.need_dim("bach", 4)?;
        self.cache.get_or_try_insert("bach", || {
            let n = self.dim();
            let nf = n as f64;
            let dd = self.weyl_double_divergence()?;
            let w = self.weyl()?;
            let ric_up = self.ricci_up()?;
            let zero = self.proto().zero_like();
            Ok(Tensor::from_fn(n, vec![L, L], |x| {
                let (i, j) = (x[0], x[1]);
                let mut rw = zero.clone();
                for k in 0..n {
                    for l in 0..n {
                        let r = ric_up.get(&[k, l]);
                        if !r.is_zero() {
                            rw = rw.mul_add(r, w.get(&[i, k, j, l]));
                        }
                    }
                }
                dd.get(&[i, j]).scale(1.0 / (nf - 3.0)).add(&rw.scale(1.0 / (nf - 2.0)))
            }))
        })
    }

    /// `(B_{ij,j}, (n-4)/(n-2)^2 R_{kt} C_{kti})`, both indexed by `i`.
    pub fn bach_divergence_sides(&self) -> Result<(Tensor<S>, Tensor<S>), GeometryError> {
        self.need_dim("bach", 4)?;
        let n = self.dim();
        let nf = n as f64;
        let bach = self.bach()?;
        let lhs = self.divergence(&bach, 1)?;
        let ric_up = self.ricci_up()?;
        let c = self.cotton()?;
        let zero = self.proto().zero_like();
        let factor = (nf - 4.0) / ((nf - 2.0) * (nf - 2.0));
        let rhs = Tensor::from_fn(n, vec![L], |x| {
            let mut acc = zero.clone();
            for k in 0..n {
                for t in 0..n {
                    let r = ric_up.get(&[k, t]);
                    if !r.is_zero() {
                        acc = acc.mul_add(r, c.get(&[k, t, x[0]]));
                    }
                }
            }
            acc.scale(factor)
        });
        Ok((lhs, rhs))
    }
}

struct NonzeroGamma<S> {
    /// `lower[m*n + a]` = `(p, Gamma^p_{m a})`.
    lower: Vec<Vec<(usize, S)>>,
    /// `upper[m*n + a]` = `(p, Gamma^a_{m p})`.
    upper: Vec<Vec<(usize, S)>>,
}

fn nonzero_gamma<S: Scalar>(gamma: &Tensor<S>) -> NonzeroGamma<S> {
    let n = gamma.dim();
    let mut lower = vec![Vec::new(); n * n];
    let mut upper = vec![Vec::new(); n * n];
    for m in 0..n {
        for a in 0..n {
            for p in 0..n {
                let lo = gamma.get(&[p, m, a]);
                if !lo.is_zero() {
                    lower[m * n + a].push((p, lo.clone()));
                }
                let up = gamma.get(&[a, m, p]);
                if !up.is_zero() {
                    upper[m * n + a].push((p, up.clone()));
                }
            }
        }
    }
    NonzeroGamma { lower, upper }
}

/// Averages over the pair symmetries `T_ijkl = -T_jikl = -T_ijlk = T_klij`
/// to remove rounding asymmetry.
fn enforce_curvature_symmetries<S: Scalar>(t: &mut Tensor<S>) {
    let n = t.dim();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    if (i, j, k, l) > (k, l, i, j) {
                        continue;
                    }
                    let avg = t
                        .get(&[i, j, k, l])
                        .sub(t.get(&[j, i, k, l]))
                        .sub(t.get(&[i, j, l, k]))
                        .add(t.get(&[j, i, l, k]))
                        .add(t.get(&[k, l, i, j]))
                        .sub(t.get(&[l, k, i, j]))
                        .sub(t.get(&[k, l, j, i]))
                        .add(t.get(&[l, k, j, i]))
                        .scale(0.125);
                    let neg = avg.neg();
                    t.set(&[i, j, k, l], avg.clone());
                    t.set(&[j, i, l, k], avg.clone());
                    t.set(&[k, l, i, j], avg.clone());
                    t.set(&[l, k, j, i], avg);
                    t.set(&[j, i, k, l], neg.clone());
                    t.set(&[i, j, l, k], neg.clone());
                    t.set(&[l, k, i, j], neg.clone());
                    t.set(&[k, l, j, i], neg);
                }
            }
        }
    }
}

fn symmetrize_pair<S: Scalar>(t: &mut Tensor<S>) {
    let n = t.dim();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = t.get(&[i, j]).add(t.get(&[j, i])).scale(0.5);
            t.set(&[i, j], avg.clone());
            t.set(&[j, i], avg);
        }
    }
}

#[cfg(test)]
mod tests;
