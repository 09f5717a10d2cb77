//! The ten Weyl scalars, general Weyl scalars and their pointwise identities.
//!
//! Naming: `w[a][b]` is the `b`-th scalar built from `a` divergences of W.

use std::sync::Arc;

use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::check::Comparison;
use crate::classify::{q, ClassifyError, CoeffVector, Q};
use crate::geometry::{Geometry, GeometryError, MetricChart};
use crate::jet::Jet;
use crate::soliton::{SolitonError, SolitonGeometry, SolitonStructure};
use crate::tensor::{MetricContext, Tensor};

/// Jet order needed for `W_{tijk,tkji}`: two metric derivatives for W plus four more.
pub const SCALAR_ORDER: usize = 6;

pub const SCALAR_NAMES: [&str; 10] = ["w01", "w02", "w03", "w04", "w11", "w12", "w21", "w22", "w31", "w41"];

/// Index of each scalar in the arrays of this module.
pub mod idx {
    pub const W01: usize = 0;
    pub const W02: usize = 1;
    pub const W03: usize = 2;
    pub const W04: usize = 3;
    pub const W11: usize = 4;
    pub const W12: usize = 5;
    pub const W21: usize = 6;
    pub const W22: usize = 7;
    pub const W31: usize = 8;
    pub const W41: usize = 9;
}

/// The ten scalars at a point. `f_form` uses derivatives of the potential,
/// `ricci_form` replaces `f_ij` by `-R_ij` (the `lambda g` part is traceless
/// against W). `w22`, `w31` and `w41` have a single form, stored twice.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeylScalarSample {
    pub f_form: [f64; 10],
    pub ricci_form: [f64; 10],
}

/// Ten coefficients `(a01, a02, a03, a04, a11, a12, a21, a22, a31, a41)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneralScalarCoeffs(pub [Q; 10]);

impl GeneralScalarCoeffs {
    pub fn zero() -> Self {
        GeneralScalarCoeffs(std::array::from_fn(|_| Q::zero()))
    }

    pub fn unit(k: usize) -> Self {
        let mut c = Self::zero();
        c.0[k] = q(1, 1);
        c
    }

    pub fn parse_list(text: &str) -> Result<Self, ClassifyError> {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 10 {
            return Err(ClassifyError::Length { expected: 10, got: parts.len() });
        }
        let mut out = Self::zero();
        for (slot, p) in out.0.iter_mut().zip(parts) {
            *slot = crate::classify::parse_rational(p)?;
        }
        Ok(out)
    }

    pub fn to_f64(&self) -> [f64; 10] {
        std::array::from_fn(|i| self.0[i].to_f64().unwrap_or(f64::NAN))
    }
}

/// `sum_k a_k w_k` using the f-forms.
pub fn general_scalar(coeffs: &GeneralScalarCoeffs, sample: &WeylScalarSample) -> f64 {
    dot(&coeffs.to_f64(), &sample.f_form)
}

pub fn dot(a: &[f64; 10], w: &[f64; 10]) -> f64 {
    a.iter().zip(w).map(|(a, w)| a * w).sum()
}

fn dim_q(n: i64) -> Result<(Q, Q), ClassifyError> {
    if n < 4 {
        return Err(ClassifyError::Dimension(n));
    }
    Ok((Q::from_integer((n - 2).into()), Q::from_integer((n - 3).into())))
}

/// Six-entry vector whose weighted integral combination equals that of the
/// ten-entry scalar, using
/// `W03 = -W11/(n-3) + (n-2)/(n-3) W12`,
/// `W04 = -(n-2)/(n-3) W12 + W21/(n-3) - (n-2)/(n-3) W41`,
/// `W22 = -W11`, `W31 = -W12`.
pub fn reduce_coefficients(c: &GeneralScalarCoeffs, n: i64) -> Result<CoeffVector, ClassifyError> {
    let (n2, n3) = dim_q(n)?;
    let a = &c.0;
    let r = &n2 / &n3;
    Ok(CoeffVector([
        a[idx::W01].clone(),
        a[idx::W02].clone(),
        &a[idx::W11] - &a[idx::W03] / &n3 - &a[idx::W22],
        &a[idx::W12] + &a[idx::W03] * &r - &a[idx::W04] * &r - &a[idx::W31],
        &a[idx::W21] + &a[idx::W04] / &n3,
        &a[idx::W41] - &a[idx::W04] * &r,
    ]))
}

/// Same as [`reduce_coefficients`] but with the dependence relations as
/// printed in the source: `W03 = -W11/(n-2) + ...` and
/// `W04 = (n-4)/(n-3) W12 + ...`.
pub fn reduce_coefficients_printed(c: &GeneralScalarCoeffs, n: i64) -> Result<CoeffVector, ClassifyError> {
    let (n2, n3) = dim_q(n)?;
    let a = &c.0;
    let r = &n2 / &n3;
    let n4 = &n2 - q(2, 1);
    Ok(CoeffVector([
        a[idx::W01].clone(),
        a[idx::W02].clone(),
        &a[idx::W11] - &a[idx::W03] / &n2 - &a[idx::W22],
        &a[idx::W12] + &a[idx::W03] * &r + &a[idx::W04] * &n4 / &n3 - &a[idx::W31],
        &a[idx::W21] + &a[idx::W04] / &n3,
        &a[idx::W41] - &a[idx::W04] * &r,
    ]))
}

/// The ten-entry scalar whose vanishing is assumed in the first mixed case,
/// read term by term from its Ricci-form statement.
pub fn mix1_raw(c: &[Q], n: i64) -> Result<GeneralScalarCoeffs, ClassifyError> {
    let (n2, n3) = dim_q(n)?;
    if c.len() != 7 {
        return Err(ClassifyError::ParamCount { case: "mix1", expected: 7, got: c.len() });
    }
    let mut a = GeneralScalarCoeffs::zero();
    a.0[idx::W41] = c[0].clone();
    a.0[idx::W31] = c[1].clone();
    a.0[idx::W22] = c[2].clone();
    // W_{tijk,tk} R_ij = -w21
    a.0[idx::W21] = -(q(1, 1) / &n3);
    // W_{tijk,t} R_{ik,j} = -w12
    a.0[idx::W12] = -c[3].clone();
    // W_{tijk,t} R_ik f_j = -w11
    a.0[idx::W11] = -c[4].clone();
    // W_{tijk} R_{ik,jt} = -w04
    a.0[idx::W04] = -c[5].clone();
    // W_{tijk} R_ik f_t f_j = -w02
    a.0[idx::W02] = -c[6].clone();
    a.0[idx::W01] = q(1, 1) / &n2;
    Ok(a)
}

/// The ten-entry scalar of the second mixed case (n = 4).
pub fn mix2_raw(c: &[Q]) -> Result<GeneralScalarCoeffs, ClassifyError> {
    if c.len() != 6 {
        return Err(ClassifyError::ParamCount { case: "mix2", expected: 6, got: c.len() });
    }
    let mut a = GeneralScalarCoeffs::zero();
    a.0[idx::W41] = c[0].clone();
    a.0[idx::W31] = c[1].clone();
    a.0[idx::W22] = c[2].clone();
    a.0[idx::W21] = -c[3].clone();
    a.0[idx::W12] = -c[4].clone();
    a.0[idx::W11] = c[2].clone();
    a.0[idx::W04] = -c[5].clone();
    a.0[idx::W01] = q(1, 2);
    Ok(a)
}

/// Successive divergences `W_{tijk,t}`, `W_{tijk,tk}`, `W_{tijk,tkj}`, `W_{tijk,tkji}`.
pub fn weyl_chain(geo: &Geometry<Jet>) -> Result<[Arc<Tensor<Jet>>; 4], GeometryError> {
    let d1 = geo.weyl_divergence()?;
    let d2 = geo.cache().get_or_try_insert("weyl|div0|div2", || geo.divergence(&d1, 2))?;
    let d3 = geo.cache().get_or_try_insert("weyl|div0|div2|div1", || geo.divergence(&d2, 1))?;
    let d4 = geo.cache().get_or_try_insert("weyl|div0|div2|div1|div0", || geo.divergence(&d3, 0))?;
    Ok([d1, d2, d3, d4])
}

/// `R_{ij,kl}`.
fn ricci_second_derivative(geo: &Geometry<Jet>) -> Result<Arc<Tensor<Jet>>, GeometryError> {
    geo.cache().get_or_try_insert("ricci|d|d", || {
        let d = geo.ricci_derivative()?;
        geo.covariant_derivative(&d)
    })
}

fn values_metric(geo: &Geometry<Jet>) -> Result<MetricContext<f64>, SolitonError> {
    Ok(MetricContext::new(geo.g().values())?)
}

/// Multiple of `kappa^3` added to every scale floor, where `kappa` is the
/// larger max-abs entry of Riemann and of `Hess f`. Without it a conformally
/// flat chart compares roundoff against roundoff.
pub const ROUNDOFF_FLOOR: f64 = 1e-4;

fn scale_floor(weyl: f64, ricci: f64, kappa: f64) -> f64 {
    (1e-6 * weyl * ricci * ricci).max(ROUNDOFF_FLOOR * kappa.powi(3)).max(1e-12)
}

fn contract(a: &Tensor<f64>, b: &Tensor<f64>, pairs: &[(usize, usize)], m: &MetricContext<f64>) -> Result<Tensor<f64>, SolitonError> {
    Ok(a.contract_with(b, pairs, m)?)
}

fn scalar_of(t: Tensor<f64>) -> f64 {
    *t.as_scalar()
}

/// Weyl, its divergence chain and `f_i` at a point.
struct Contractor {
    m: MetricContext<f64>,
    w: Tensor<f64>,
    wd1: Tensor<f64>,
    wd2: Tensor<f64>,
    wd3: Tensor<f64>,
    wd4: f64,
    f1: Tensor<f64>,
}

impl Contractor {
    fn new(s: &SolitonGeometry<Jet>) -> Result<Self, SolitonError> {
        let geo = s.geometry();
        let [wd1, wd2, wd3, wd4] = weyl_chain(geo)?;
        Ok(Contractor {
            m: values_metric(geo)?,
            w: geo.weyl()?.values(),
            wd1: wd1.values(),
            wd2: wd2.values(),
            wd3: wd3.values(),
            wd4: *wd4.values().as_scalar(),
            f1: s.df()?.values(),
        })
    }

    /// The ten scalars with `x2`, `x3`, `x4` in place of `f_ij`, `f_ijk`,
    /// `f_ijkl`. Passing `-R_ij`, `-R_ij,k`, `-R_ij,kl` gives the Ricci forms.
    fn forms(&self, x2: &Tensor<f64>, x3: &Tensor<f64>, x4: &Tensor<f64>) -> Result<[f64; 10], SolitonError> {
        let (m, w, f1) = (&self.m, &self.w, &self.f1);
        let mut out = [0.0; 10];

        let y = contract(w, x2, &[(0, 0), (2, 1)], m)?;
        out[idx::W01] = scalar_of(contract(&y, x2, &[(0, 0), (1, 1)], m)?);

        let y = contract(w, x2, &[(1, 0), (3, 1)], m)?;
        let y = contract(&y, f1, &[(0, 0)], m)?;
        out[idx::W02] = scalar_of(contract(&y, f1, &[(0, 0)], m)?);

        let y = contract(w, x3, &[(1, 0), (3, 1), (2, 2)], m)?;
        out[idx::W03] = scalar_of(contract(&y, f1, &[(0, 0)], m)?);

        out[idx::W04] = scalar_of(contract(w, x4, &[(1, 0), (3, 1), (2, 2), (0, 3)], m)?);

        let y = contract(&self.wd1, x2, &[(0, 0), (2, 1)], m)?;
        out[idx::W11] = scalar_of(contract(&y, f1, &[(0, 0)], m)?);

        out[idx::W12] = scalar_of(contract(&self.wd1, x3, &[(0, 0), (2, 1), (1, 2)], m)?);

        out[idx::W21] = self.wd2.inner(x2, m)?;

        let y = contract(&self.wd2, f1, &[(0, 0)], m)?;
        out[idx::W22] = scalar_of(contract(&y, f1, &[(0, 0)], m)?);

        out[idx::W31] = self.wd3.inner(f1, m)?;
        out[idx::W41] = self.wd4;
        Ok(out)
    }
}

/// Vector fields whose divergences appear in the pointwise identities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Remainder {
    /// `W_tijk R_ij f_t`
    WeylRicciGrad,
    /// `W_tijk R_tj,i`
    WeylDerivRicci,
    /// `W_tijk,t R_ij`
    DivWeylRicci,
    /// `W_tijk,t f_i f_j`
    DivWeylGradGrad,
}

impl Remainder {
    pub const ALL: [Remainder; 4] = [Remainder::WeylRicciGrad, Remainder::WeylDerivRicci, Remainder::DivWeylRicci, Remainder::DivWeylGradGrad];

    pub fn name(self) -> &'static str {
        match self {
            Remainder::WeylRicciGrad => "W_tijk R_ij f_t",
            Remainder::WeylDerivRicci => "W_tijk R_tj,i",
            Remainder::DivWeylRicci => "W_tijk,t R_ij",
            Remainder::DivWeylGradGrad => "W_tijk,t f_i f_j",
        }
    }

    /// Jet order at which the field's divergence is still exact.
    pub fn order(self) -> usize {
        match self {
            Remainder::WeylRicciGrad => 3,
            _ => 4,
        }
    }
}

/// The remainder field `V_k`, lower index last.
pub fn remainder_field(s: &SolitonGeometry<Jet>, r: Remainder) -> Result<Tensor<Jet>, SolitonError> {
    let geo = s.geometry();
    let m = geo.metric();
    Ok(match r {
        Remainder::WeylRicciGrad => {
            let w = geo.weyl()?;
            let ric = geo.ricci()?;
            let df = s.df()?;
            w.contract_with(&ric, &[(1, 0), (2, 1)], m)?.contract_with(&df, &[(0, 0)], m)?
        }
        Remainder::WeylDerivRicci => {
            let w = geo.weyl()?;
            let dric = geo.ricci_derivative()?;
            w.contract_with(&dric, &[(0, 0), (2, 1), (1, 2)], m)?
        }
        Remainder::DivWeylRicci => {
            let wd1 = geo.weyl_divergence()?;
            let ric = geo.ricci()?;
            wd1.contract_with(&ric, &[(0, 0), (1, 1)], m)?
        }
        Remainder::DivWeylGradGrad => {
            let wd1 = geo.weyl_divergence()?;
            let df = s.df()?;
            wd1.contract_with(&df, &[(0, 0)], m)?.contract_with(&df, &[(0, 0)], m)?
        }
    })
}

fn divergence_value(s: &SolitonGeometry<Jet>, v: &Tensor<Jet>) -> Result<f64, SolitonError> {
    Ok(s.geometry().divergence(v, 0)?.data()[0].value())
}

fn kappa(s: &SolitonGeometry<Jet>) -> Result<f64, SolitonError> {
    Ok(s.geometry().riemann()?.values().max_abs().max(s.d2f()?.values().max_abs()))
}

/// What an integrand needs at one node: the ten f-forms and the three
/// quadratic invariants of C and D.
#[derive(Clone, Debug, Serialize)]
pub struct IntegrandTerms {
    pub f_form: [f64; 10],
    pub c2: f64,
    pub cd: f64,
    pub d2: f64,
    pub floor: f64,
}

/// Needs the metric to order [`SCALAR_ORDER`] and `f` to order 4.
pub fn integrand_terms(s: &SolitonGeometry<Jet>) -> Result<IntegrandTerms, SolitonError> {
    let geo = s.geometry();
    let c = Contractor::new(s)?;
    let f_form = c.forms(&s.d2f()?.values(), &s.d3f()?.values(), &s.d4f()?.values())?;
    let cv = geo.cotton()?.values();
    let dv = s.d_tensor()?.values();
    Ok(IntegrandTerms {
        f_form,
        c2: cv.norm2(&c.m)?,
        cd: cv.inner(&dv, &c.m)?,
        d2: dv.norm2(&c.m)?,
        floor: scale_floor(c.w.max_abs(), geo.ricci()?.values().max_abs(), kappa(s)?),
    })
}

/// Everything the pointwise identities are assembled from, at one point.
#[derive(Clone, Debug, Serialize)]
pub struct ScalarTerms {
    pub sample: WeylScalarSample,
    pub c2: f64,
    pub cd: f64,
    pub d2: f64,
    /// `(W_tijk R_ij f_t)_k`
    pub rem01: f64,
    /// `(W_tijk R_tj,i)_k`
    pub rem04: f64,
    /// `(W_tijk,t R_ij)_k`
    pub rem21: f64,
    /// `(W_tijk,t f_i f_j)_k`
    pub rem22: f64,
    /// `(W_tijk,t f_i)_kj`
    pub rem31: f64,
    /// `C_ijk,kji`
    pub cotton_chain: f64,
    pub floor: f64,
    pub n: usize,
}

/// Computes all scalars and identity ingredients. The structure must be
/// expanded to at least [`SCALAR_ORDER`].
pub fn scalar_terms(s: &SolitonGeometry<Jet>) -> Result<ScalarTerms, SolitonError> {
    let geo = s.geometry();
    let n = geo.dim();
    let con = Contractor::new(s)?;
    let m = &con.m;
    let ric = geo.ricci()?.values();
    let f_form = con.forms(&s.d2f()?.values(), &s.d3f()?.values(), &s.d4f()?.values())?;
    let ricci_form = con.forms(
        &ric.scale(-1.0),
        &geo.ricci_derivative()?.values().scale(-1.0),
        &ricci_second_derivative(geo)?.values().scale(-1.0),
    )?;

    let c = geo.cotton()?;
    let (cv, dv) = (c.values(), s.d_tensor()?.values());

    let rem = |r: Remainder| divergence_value(s, &remainder_field(s, r)?);
    let wd1 = geo.weyl_divergence()?;
    let df = s.df()?;
    let wf = wd1.contract_with(&df, &[(0, 0)], geo.metric())?;
    let v31 = geo.divergence(&wf, 1)?;

    let c_k = geo.divergence(&c, 2)?;
    let c_kj = geo.divergence(&c_k, 1)?;

    Ok(ScalarTerms {
        sample: WeylScalarSample { f_form, ricci_form },
        c2: cv.norm2(m)?,
        cd: cv.inner(&dv, m)?,
        d2: dv.norm2(m)?,
        rem01: rem(Remainder::WeylRicciGrad)?,
        rem04: rem(Remainder::WeylDerivRicci)?,
        rem21: rem(Remainder::DivWeylRicci)?,
        rem22: rem(Remainder::DivWeylGradGrad)?,
        rem31: divergence_value(s, &v31)?,
        cotton_chain: geo.divergence(&c_kj, 0)?.data()[0].value(),
        floor: scale_floor(con.w.max_abs(), ric.max_abs(), kappa(s)?),
        n,
    })
}

impl ScalarTerms {
    /// Right-hand sides of the pointwise identities, in [`SCALAR_NAMES`] order.
    pub fn rhs(&self) -> [f64; 10] {
        let n = self.n as f64;
        let k = (n - 3.0) / (2.0 * (n - 2.0));
        let (c2, cd, d2) = (self.c2, self.cd, self.d2);
        [
            0.5 * c2 + 0.5 * (n - 4.0) * cd + self.rem01,
            0.5 * (n - 2.0) * (d2 - cd),
            0.5 * (cd - c2),
            k * c2 - self.rem04,
            -0.5 * (n - 3.0) * cd,
            -k * c2,
            -k * c2 - self.rem21,
            0.5 * (n - 3.0) * cd + self.rem22,
            k * c2 + self.rem31,
            -(n - 3.0) / (n - 2.0) * self.cotton_chain,
        ]
    }

    /// The `w04` right-hand side with the sign of the `|C|^2` term as printed.
    pub fn rhs04_as_printed(&self) -> f64 {
        let n = self.n as f64;
        -(n - 3.0) / (2.0 * (n - 2.0)) * self.c2 - self.rem04
    }
}

/// Two-sided pointwise identity checks at one point.
#[derive(Clone, Debug, Serialize)]
pub struct PointwiseIdentities {
    /// Direct scalar (f-form) against the assembled right-hand side.
    pub identities: [Comparison; 10],
    /// f-form against Ricci form.
    pub forms: [Comparison; 10],
    /// `w04` against the right-hand side with the `|C|^2` sign as printed.
    pub w04_as_printed: Comparison,
    pub c2: f64,
    pub cd: f64,
    pub d2: f64,
}

impl PointwiseIdentities {
    pub fn from_terms(t: &ScalarTerms) -> Self {
        let rhs = t.rhs();
        let s = &t.sample;
        PointwiseIdentities {
            identities: std::array::from_fn(|k| Comparison::scalars(s.f_form[k], rhs[k], t.floor)),
            forms: std::array::from_fn(|k| Comparison::scalars(s.f_form[k], s.ricci_form[k], t.floor)),
            w04_as_printed: Comparison::scalars(s.f_form[idx::W04], t.rhs04_as_printed(), t.floor),
            c2: t.c2,
            cd: t.cd,
            d2: t.d2,
        }
    }
}

/// The ten scalars at `point`.
pub fn weyl_scalars(s: &SolitonStructure, point: &[f64]) -> Result<WeylScalarSample, SolitonError> {
    check_dim(s.dim())?;
    if !s.chart().in_safe_domain(point) {
        return Err(SolitonError::OutsideDomain { point: point.to_vec() });
    }
    Ok(scalar_terms(&s.local(point, SCALAR_ORDER)?)?.sample)
}

/// Pointwise identities at `point`; refused unless the soliton gate passes.
pub fn pointwise_identity_residuals(s: &SolitonStructure, point: &[f64]) -> Result<PointwiseIdentities, SolitonError> {
    check_dim(s.dim())?;
    let local = s.gated(point, SCALAR_ORDER)?;
    Ok(PointwiseIdentities::from_terms(&scalar_terms(&local)?))
}

fn check_dim(n: usize) -> Result<(), SolitonError> {
    if n < 4 {
        return Err(GeometryError::Dimension { what: "Weyl scalars", needed: 4, got: n }.into());
    }
    Ok(())
}

/// Identities between Ricci forms that hold on every metric, soliton or
/// not: those of `w04`, `w12`, `w21` and `w41`. The `w04` identity appears
/// with both signs of its `|C|^2` term.
pub fn metric_identities(chart: &MetricChart, point: &[f64]) -> Result<Vec<(&'static str, Comparison)>, SolitonError> {
    check_dim(chart.dim())?;
    let geo = chart.local(point, SCALAR_ORDER)?;
    let zero = Jet::constant(geo.g().data()[0].space(), 0.0);
    let t = scalar_terms(&SolitonGeometry::new(geo, zero, 0.0))?;
    let (r, rhs) = (&t.sample.ricci_form, t.rhs());
    let cmp = |k: usize, rhs: f64| Comparison::scalars(r[k], rhs, t.floor);
    Ok(vec![
        ("w04", cmp(idx::W04, rhs[idx::W04])),
        ("w04 as printed", cmp(idx::W04, t.rhs04_as_printed())),
        ("w12", cmp(idx::W12, rhs[idx::W12])),
        ("w21", cmp(idx::W21, rhs[idx::W21])),
        ("w41", cmp(idx::W41, rhs[idx::W41])),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::geometry::{CoordKind, Coordinate};

    fn s2xr2() -> SolitonStructure {
        let pi = std::f64::consts::PI;
        let chart = MetricChart::from_upper(
            vec![
                Coordinate::new("theta", CoordKind::Interval, 0.0, pi),
                Coordinate::new("phi", CoordKind::Periodic, 0.0, 2.0 * pi),
                Coordinate::new("x", CoordKind::Line, -3.0, 3.0),
                Coordinate::new("y", CoordKind::Line, -3.0, 3.0),
            ],
            &[
                ((0, 0), Expr::one()),
                ((1, 1), Expr::parse("sin(x0)^2").unwrap()),
                ((2, 2), Expr::one()),
                ((3, 3), Expr::one()),
            ],
            0.15,
        )
        .unwrap();
        SolitonStructure::new(chart, Expr::parse("(x2^2 + x3^2)/2").unwrap(), 1.0).unwrap()
    }

    fn wavy4() -> MetricChart {
        let pi = std::f64::consts::PI;
        let coords = (0..4).map(|i| Coordinate::new(&format!("x{i}"), CoordKind::Periodic, 0.0, 2.0 * pi)).collect();
        let mut entries = Vec::new();
        for i in 0..4 {
            for j in i..4 {
                let text = if i == j {
                    format!("1 + 0.1*sin(x{i} + 2*x{})", (i + 1) % 4)
                } else {
                    format!("0.05*cos(x{i} - x{j} + {})", i + j)
                };
                entries.push(((i, j), Expr::parse(&text).unwrap()));
            }
        }
        MetricChart::from_upper(coords, &entries, 0.0).unwrap()
    }

    #[test]
    fn product_soliton_pointwise() {
        let s = s2xr2();
        let p = [1.0, 0.3, 0.8, -0.4];
        let r = pointwise_identity_residuals(&s, &p).unwrap();
        for k in 0..10 {
            assert!(r.identities[k].passes(1e-8), "{}: {:?}", SCALAR_NAMES[k], r.identities[k]);
            assert!(r.forms[k].passes(1e-8), "{}: {:?}", SCALAR_NAMES[k], r.forms[k]);
        }
        let rho2 = p[2] * p[2] + p[3] * p[3];
        assert!(r.d2 > 1e-2);
        assert!(r.c2 < 1e-20);
        // D_ijk = f_k T_ij - f_j T_ik with T = g_S/6 - g_F/3.
        assert!((r.d2 - rho2 / 3.0).abs() < 1e-12, "{} vs {}", r.d2, rho2 / 3.0);
        let w02 = weyl_scalars(&s, &p).unwrap().f_form[idx::W02];
        assert!((w02 - r.d2).abs() < 1e-12);
    }

    #[test]
    fn general_metric_identities() {
        let checks = metric_identities(&wavy4(), &[0.4, 1.3, -0.7, 2.1]).unwrap();
        let get = |name: &str| checks.iter().find(|(n, _)| *n == name).unwrap().1;
        for name in ["w04", "w12", "w21", "w41"] {
            assert!(get(name).passes(1e-8), "{name}: {:?}", get(name));
        }
        assert!(get("w04").lhs.abs() > 1e-4);
        assert!(!get("w04 as printed").passes(1e-3));
    }

    #[test]
    fn gate_refuses_non_solitons() {
        let chart = wavy4();
        let s = SolitonStructure::new(chart, Expr::zero(), 1.0).unwrap();
        assert!(matches!(pointwise_identity_residuals(&s, &[0.0; 4]), Err(SolitonError::Gate { .. })));
        assert!(weyl_scalars(&s, &[0.1, 0.2, 0.3, 0.4]).is_ok());
    }

    #[test]
    fn reductions() {
        for n in 4..=8 {
            for k in [idx::W01, idx::W02, idx::W11, idx::W12, idx::W21, idx::W41] {
                let r = reduce_coefficients(&GeneralScalarCoeffs::unit(k), n).unwrap();
                assert_eq!(r.0.iter().filter(|x| !x.is_zero()).count(), 1);
            }
            let r = reduce_coefficients(&GeneralScalarCoeffs::unit(idx::W22), n).unwrap();
            assert_eq!(r, CoeffVector::from_ints([0, 0, -1, 0, 0, 0]));
            let p = reduce_coefficients_printed(&GeneralScalarCoeffs::unit(idx::W04), n).unwrap();
            let nn = n;
            assert_eq!(*p.a21(), q(nn - 4, nn - 3));
            assert_eq!(*p.a12(), q(1, nn - 3));
            assert_eq!(*p.a14(), q(-(nn - 2), nn - 3));
            let c = reduce_coefficients(&GeneralScalarCoeffs::unit(idx::W04), n).unwrap();
            assert_eq!(*c.a21(), q(-(nn - 2), nn - 3));
        }
        assert!(reduce_coefficients(&GeneralScalarCoeffs::zero(), 3).is_err());
    }

    #[test]
    fn general_scalar_projects() {
        let sample = WeylScalarSample { f_form: std::array::from_fn(|k| k as f64 + 0.5), ricci_form: [0.0; 10] };
        assert_eq!(general_scalar(&GeneralScalarCoeffs::zero(), &sample), 0.0);
        assert_eq!(general_scalar(&GeneralScalarCoeffs::unit(idx::W01), &sample), 0.5);
    }
}
