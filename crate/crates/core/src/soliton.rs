//! Gradient Ricci solitons `Ric + Hess f = lambda g`.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::check::Comparison;
use crate::expr::{EvalError, Expr};
use crate::geometry::{CurvatureCache, Geometry, GeometryError, MetricChart};
use crate::jet::{expand, Jet, JetSpace};
use crate::scalar::{Differentiable, FieldScalar};
use crate::tensor::{Tensor, TensorError, Variance};

const L: Variance = Variance::Lower;

/// Default bound on `|Ric + Hess f - lambda g|` before soliton identities are asserted.
pub const DEFAULT_GATE: f64 = 1e-8;

/// Jet order needed by the integrability conditions (three derivatives of Ricci).
pub const SOLITON_ORDER: usize = 5;

#[derive(Debug, Error)]
pub enum SolitonError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("not a soliton here: residual {residual:.3e} exceeds gate {gate:.1e}")]
    Gate { residual: f64, gate: f64 },
    #[error("point {point:?} lies outside the safe domain of the chart")]
    OutsideDomain { point: Vec<f64> },
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
}

/// A chart with a potential `f` and constant `lambda`. Nothing forces this to
/// be a soliton; [`SolitonStructure::soliton_residual`] says how far it is.
#[derive(Clone, Debug)]
pub struct SolitonStructure {
    chart: MetricChart,
    potential: Expr,
    lambda: f64,
    gate: f64,
}

impl SolitonStructure {
    pub fn new(chart: MetricChart, potential: Expr, lambda: f64) -> Result<Self, SolitonError> {
        if let Some(v) = potential.max_var() {
            if v >= chart.dim() {
                return Err(SolitonError::InvalidPotential(format!("uses x{v} in dimension {}", chart.dim())));
            }
        }
        if !lambda.is_finite() {
            return Err(SolitonError::InvalidPotential("lambda must be finite".into()));
        }
        Ok(SolitonStructure { chart, potential, lambda, gate: DEFAULT_GATE })
    }

    pub fn with_gate(mut self, gate: f64) -> Self {
        self.gate = gate;
        self
    }

    pub fn chart(&self) -> &MetricChart {
        &self.chart
    }

    pub fn potential(&self) -> &Expr {
        &self.potential
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gate(&self) -> f64 {
        self.gate
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn symbolic(&self) -> Result<SolitonGeometry<Expr>, SolitonError> {
        Ok(SolitonGeometry::new(self.chart.symbolic()?, self.potential.clone(), self.lambda))
    }

    /// Local structure at `point`, exact through `order` derivatives.
    pub fn local(&self, point: &[f64], order: usize) -> Result<SolitonGeometry<Jet>, SolitonError> {
        let geo = self.chart.local(point, order)?;
        let space = JetSpace::shared(self.dim(), order);
        let f = expand(&self.potential, &space, point)?;
        Ok(SolitonGeometry::new(geo, f, self.lambda))
    }

    fn checked(&self, point: &[f64], order: usize) -> Result<SolitonGeometry<Jet>, SolitonError> {
        if !self.chart.in_safe_domain(point) {
            return Err(SolitonError::OutsideDomain { point: point.to_vec() });
        }
        self.local(point, order)
    }

    /// Local structure after checking the soliton gate.
    pub fn gated(&self, point: &[f64], order: usize) -> Result<SolitonGeometry<Jet>, SolitonError> {
        let s = self.checked(point, order.max(2))?;
        let residual = s.soliton_tensor()?.values().max_abs();
        if !(residual <= self.gate) {
            return Err(SolitonError::Gate { residual, gate: self.gate });
        }
        Ok(s)
    }

    /// `Ric + Hess f - lambda g` at `point`.
    pub fn soliton_residual(&self, point: &[f64]) -> Result<Tensor<f64>, SolitonError> {
        Ok(self.checked(point, 2)?.soliton_tensor()?.values())
    }

    /// `R + |grad f|^2 - 2 lambda f` at `point`.
    pub fn hamilton_constant(&self, point: &[f64]) -> Result<f64, SolitonError> {
        Ok(self.checked(point, 2)?.hamilton()?.value())
    }

    /// Residuals of the trace identity, the Schur-type identity and the
    /// Hamilton identity (as the drift of `c` from its value at `reference`).
    pub fn basic_identity_residuals(&self, point: &[f64], reference: &[f64]) -> Result<BasicIdentities, SolitonError> {
        let s = self.checked(point, 3)?;
        let c_ref = self.hamilton_constant(reference)?;
        Ok(BasicIdentities {
            trace: s.trace_identity()?.value().abs(),
            schur: s.schur_identity()?.values().max_abs(),
            hamilton: (s.hamilton()?.value() - c_ref).abs(),
        })
    }

    pub fn d_tensor_at(&self, point: &[f64]) -> Result<Tensor<f64>, SolitonError> {
        Ok(self.checked(point, 2)?.d_tensor()?.values())
    }

    /// The four integrability conditions at `point`, gated on the soliton residual.
    pub fn integrability_residuals(&self, point: &[f64]) -> Result<[Comparison; 4], SolitonError> {
        let s = self.gated(point, SOLITON_ORDER)?;
        let sides = s.integrability_sides()?;
        Ok(sides.map(|(l, r)| Comparison::tensors(&l.values(), &r.values())))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BasicIdentities {
    /// `|Delta f + R - n lambda|`
    pub trace: f64,
    /// `max_i |R_i - 2 f_t R_it|`
    pub schur: f64,
    /// `|c(p) - c(reference)|`
    pub hamilton: f64,
}

/// Curvature stack plus potential, over any differentiable scalar type.
pub struct SolitonGeometry<S> {
    geo: Arc<Geometry<S>>,
    f: S,
    lambda: f64,
    /// Fields that depend on `f`; the geometry cache holds metric-only fields.
    own: CurvatureCache<S>,
}

impl<S: Differentiable + FieldScalar> SolitonGeometry<S> {
    pub fn new(geo: Geometry<S>, f: S, lambda: f64) -> Self {
        Self::shared(Arc::new(geo), f, lambda)
    }

    /// A potential on a curvature stack that may be shared with other potentials.
    pub fn shared(geo: Arc<Geometry<S>>, f: S, lambda: f64) -> Self {
        SolitonGeometry { geo, f, lambda, own: CurvatureCache::default() }
    }

    pub fn shared_geometry(&self) -> &Arc<Geometry<S>> {
        &self.geo
    }

    pub fn geometry(&self) -> &Geometry<S> {
        &self.geo
    }

    pub fn potential(&self) -> &S {
        &self.f
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.geo.dim()
    }

    /// `f_i`.
    pub fn df(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.own.get_or_try_insert("f|1", || Ok::<_, GeometryError>(self.geo.gradient(&self.f)))
    }

    /// `f_ij`.
    pub fn d2f(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.own.get_or_try_insert("f|2", || {
            let df = self.df()?;
            self.geo.covariant_derivative(&df)
        })
    }

    /// `f_ijk`.
    pub fn d3f(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.own.get_or_try_insert("f|3", || {
            let d2 = self.d2f()?;
            self.geo.covariant_derivative(&d2)
        })
    }

    /// `f_ijkl`.
    pub fn d4f(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.own.get_or_try_insert("f|4", || {
            let d3 = self.d3f()?;
            self.geo.covariant_derivative(&d3)
        })
    }

    /// `Ric + Hess f - lambda g`.
    pub fn soliton_tensor(&self) -> Result<Tensor<S>, GeometryError> {
        let ric = self.geo.ricci()?;
        let d2f = self.d2f()?;
        Ok(ric.add(&d2f)?.sub(&self.geo.g().scale(self.lambda))?)
    }

    /// `R + |grad f|^2 - 2 lambda f`.
    pub fn hamilton(&self) -> Result<S, GeometryError> {
        let df = self.df()?;
        let grad2 = df.norm2(self.geo.metric())?;
        Ok(self.geo.scalar_curvature()?.add(&grad2).sub(&self.f.scale(2.0 * self.lambda)))
    }

    /// `Delta f + R - n lambda`.
    pub fn trace_identity(&self) -> Result<S, GeometryError> {
        let lap = self.d2f()?.contract(0, 1, self.geo.metric())?;
        let r = self.geo.scalar_curvature()?;
        let n = self.dim() as f64;
        Ok(lap.as_scalar().add(&r).sub(&r.constant_like(n * self.lambda)))
    }

    /// `R_i - 2 f_t R_{it}`.
    pub fn schur_identity(&self) -> Result<Tensor<S>, GeometryError> {
        let dr = self.geo.gradient(&self.geo.scalar_curvature()?);
        let ric = self.geo.ricci()?;
        let df = self.df()?;
        let fr = ric.contract_with(&df, &[(1, 0)], self.geo.metric())?;
        Ok(dr.sub(&fr.scale(2.0))?)
    }

    /// The tensor `D_{ijk}`.
    pub fn d_tensor(&self) -> Result<Arc<Tensor<S>>, GeometryError> {
        self.own.get_or_try_insert("D", || -> Result<_, GeometryError> {
            let n = self.dim();
            let nf = n as f64;
            let ric = self.geo.ricci()?;
            let r = self.geo.scalar_curvature()?;
            let df = self.df()?;
            let g = self.geo.g();
            // (f_t R_{tk})
            let fr = ric.contract_with(&df, &[(0, 0)], self.geo.metric())?;
            let a = 1.0 / (nf - 2.0);
            let b = 1.0 / ((nf - 1.0) * (nf - 2.0));
            let rb = r.scale(b);
            Ok(Tensor::from_fn(n, vec![L, L, L], |x| {
                let (i, j, k) = (x[0], x[1], x[2]);
                let (fj, fk) = (df.get(&[j]), df.get(&[k]));
                let (gij, gik) = (g.get(&[i, j]), g.get(&[i, k]));
                let first = fk.mul(ric.get(&[i, j])).sub(&fj.mul(ric.get(&[i, k]))).scale(a);
                let second = fr.get(&[k]).mul(gij).sub(&fr.get(&[j]).mul(gik)).scale(b);
                let third = rb.mul(&fk.mul(gij).sub(&fj.mul(gik)));
                first.add(&second).sub(&third)
            }))
        })
    }

    /// Both sides of the four integrability conditions, in order:
    /// `C_ijk + f_t W_tijk = D_ijk`,
    /// `(n-2) B_ij - (n-3)/(n-2) f_t C_jit = D_ijk,k`,
    /// `R_kt C_kti = (n-2) D_itk,tk`,
    /// `|C|^2/2 + R_kt C_kti,i = (n-2) D_itk,tki`.
    pub fn integrability_sides(&self) -> Result<[(Tensor<S>, Tensor<S>); 4], GeometryError> {
        let n = self.dim();
        let nf = n as f64;
        let m = self.geo.metric();
        let c = self.geo.cotton()?;
        let w = self.geo.weyl()?;
        let d = self.d_tensor()?;
        let df = self.df()?;
        let ric = self.geo.ricci()?;

        let fw = df.contract_with(&w, &[(0, 0)], m)?;
        let first = (c.add(&fw)?, (*d).clone());

        // f_t C_{jit}, indexed (j, i) before the transpose.
        let fc = c.contract_with(&df, &[(2, 0)], m)?.permute(&[1, 0])?;
        let b = self.geo.bach()?;
        let lhs2 = b.scale(nf - 2.0).sub(&fc.scale((nf - 3.0) / (nf - 2.0)))?;
        let dd = self.geo.divergence(&d, 2)?;
        let second = (lhs2, dd);

        let rc = ric.contract_with(&c, &[(0, 0), (1, 1)], m)?;
        let d_t = self.geo.divergence(&d, 1)?;
        let d_tk = self.geo.divergence(&d_t, 1)?;
        let third = (rc, d_tk.scale(nf - 2.0));

        let c_i = self.geo.divergence(&c, 2)?;
        let rci = ric.contract_with(&c_i, &[(0, 0), (1, 1)], m)?;
        let c2 = c.norm2(m)?;
        let lhs4 = Tensor::scalar(c2.scale(0.5).add(rci.as_scalar()));
        let d_tki = self.geo.divergence(&d_tk, 0)?;
        let fourth = (lhs4, d_tki.scale(nf - 2.0));

        Ok([first, second, third, fourth])
    }
}
