//! The verification suites behind `weylcheck verify`, as lists of check records.

use num_traits::FromPrimitive;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::check::Comparison;
use crate::classify::{self, ClassifyError, CoeffVector, Q};
use crate::geometry::{GeometryError, MetricChart};
use crate::integrate::{self, GridSpec, IntegrateError, Integrator, WeightSpec, WgInput};
use crate::jet::Jet;
use crate::report::{CheckRecord, Report, EXIT_DOMAIN, EXIT_USAGE};
use crate::scalars;
use crate::soliton::{SolitonError, SolitonStructure, SOLITON_ORDER};
use crate::tensor::{Tensor, TensorError};
use crate::zoo::{ZooEntry, ZooError};

/// Jet order of the geometry suite: the divergence of Bach needs five derivatives.
pub const GEOMETRY_ORDER: usize = 5;

pub const TOL_EXACT: f64 = 1e-10;
pub const TOL_COTTON: f64 = 1e-9;
pub const TOL_DIVERGENCE: f64 = 1e-8;
pub const TOL_COMPATIBILITY: f64 = 1e-12;
pub const TOL_BASIC: f64 = 1e-9;
pub const TOL_INTEGRABILITY: f64 = 1e-8;
pub const TOL_POINTWISE: f64 = 1e-8;
/// `|D|^2` must exceed this at every point of a pointwise run on a structure
/// expected to have `D != 0`.
pub const NONTRIVIAL_D2: f64 = 1e-4;

pub const GENERAL_WEIGHT: &str = "exp(-u)*(1+u^2)";
pub const GENERAL_WEIGHT_DECAY: f64 = 1.0;
/// Parameters of the first mixed case used for its adjudication.
pub const MIX1_PARAMS: [(i64, i64); 7] = [(1, 2), (1, 3), (-1, 5), (2, 7), (1, 11), (-3, 13), (1, 17)];

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Zoo(#[from] ZooError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Soliton(#[from] SolitonError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("suite {suite} needs {what}")]
    Inapplicable { suite: &'static str, what: String },
}

impl SuiteError {
    /// Parse errors are usage errors; everything else is a domain error.
    pub fn exit_code(&self) -> i32 {
        match self {
            SuiteError::Classify(ClassifyError::Parse(_) | ClassifyError::Length { .. } | ClassifyError::UnknownCase(_) | ClassifyError::ParamCount { .. }) => EXIT_USAGE,
            SuiteError::Zoo(ZooError::UnknownName(_) | ZooError::Manifest { .. } | ZooError::Parameter(_)) => EXIT_USAGE,
            SuiteError::Integrate(IntegrateError::Grid(_) | IntegrateError::Weight(_)) => EXIT_USAGE,
            _ => EXIT_DOMAIN,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Geometry,
    Soliton,
    Pointwise,
    Integrals,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Geometry, Suite::Soliton, Suite::Pointwise, Suite::Integrals];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Soliton => "soliton",
            Suite::Pointwise => "pointwise",
            Suite::Integrals => "integrals",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub points: usize,
    pub seed: u64,
    pub omegas: Vec<f64>,
    pub grid: Option<GridSpec>,
    /// Random coefficient vectors for the general Weyl scalar integral.
    pub wg_count: usize,
    pub general_weight: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { points: 10, seed: 1, omegas: vec![0.5, 1.0, 2.0], grid: None, wg_count: 20, general_weight: true }
    }
}

/// Runs `suites` on `entry` and appends the records to `report`.
pub fn run(entry: &ZooEntry, suites: &[Suite], opts: &SuiteOptions, report: &mut Report) -> Result<(), SuiteError> {
    let points = entry.sample_points(opts.points, opts.seed);
    for &suite in suites {
        let records = match suite {
            Suite::Geometry => geometry_suite(&entry.chart, &points)?,
            Suite::Soliton => soliton_suite(&structure_for(entry, suite)?, &points)?,
            Suite::Pointwise => pointwise_suite(&structure_for(entry, suite)?, &points, entry.flags.d_zero == Some(false))?,
            Suite::Integrals => {
                let grid = opts.grid.clone().unwrap_or_else(|| entry.grid.clone());
                let (records, verdict) = integral_suite(&structure_for(entry, suite)?, grid, opts)?;
                if let Some(v) = verdict {
                    report.detail("mix1 adjudication", v);
                }
                records
            }
        };
        report.extend(records);
    }
    Ok(())
}

fn structure_for(entry: &ZooEntry, suite: Suite) -> Result<SolitonStructure, SuiteError> {
    if entry.potential.is_none() {
        return Err(SuiteError::Inapplicable { suite: suite.name(), what: format!("a potential, and {} has none", entry.name) });
    }
    Ok(entry.structure()?)
}

fn max_abs(t: &Tensor<Jet>) -> f64 {
    t.values().max_abs()
}

fn cyclic(t: &Tensor<f64>, slots: [usize; 3]) -> f64 {
    let n = t.dim();
    let rank = t.rank();
    let mut worst = 0.0f64;
    let mut idx = vec![0usize; rank];
    for flat in 0..n.pow(rank as u32) {
        let mut k = flat;
        for slot in (0..rank).rev() {
            idx[slot] = k % n;
            k /= n;
        }
        let mut sum = 0.0;
        for shift in 0..3 {
            let mut j = idx.clone();
            for (pos, &s) in slots.iter().enumerate() {
                j[s] = idx[slots[(pos + shift) % 3]];
            }
            sum += t.get(&j);
        }
        worst = worst.max(sum.abs());
    }
    worst
}

const GEOMETRY: &str = "geometry";

/// Curvature identities that hold on every metric.
pub fn geometry_suite(chart: &MetricChart, points: &[Vec<f64>]) -> Result<Vec<CheckRecord>, SuiteError> {
    let n = chart.dim();
    let mut out = Vec::new();
    for p in points {
        let geo = chart.local(p, if n >= 4 { GEOMETRY_ORDER } else { 3 })?;
        let pt = Some(p.as_slice());
        let m = geo.metric();
        let rec = |name: &str, anchor: &str, c: Comparison, tol: f64| CheckRecord::new(GEOMETRY, name, anchor, pt, c, tol);
        let zero = |name: &str, anchor: &str, v: f64, scale: f64, tol: f64| CheckRecord::vanishing(GEOMETRY, name, anchor, pt, v, scale, tol);

        let dg = geo.covariant_derivative(geo.g())?;
        out.push(zero("metric compatibility", "Levi-Civita connection", max_abs(&dg), 1.0, TOL_COMPATIBILITY));

        let rm = geo.riemann()?;
        let rmv = rm.values();
        let curv = rmv.max_abs();
        out.push(zero("first Bianchi (Riemann)", "Riemann symmetries", cyclic(&rmv, [1, 2, 3]), curv, TOL_EXACT));

        let ricci = geo.ricci()?;
        let div_ric = geo.divergence(&ricci, 1)?.values();
        let dr = geo.gradient(&geo.scalar_curvature()?).values().scale(0.5);
        out.push(rec("contracted Bianchi", "second Bianchi identity", Comparison::tensors(&div_ric, &dr), TOL_COTTON));

        // Riemann rebuilt from Weyl, Ricci and the scalar curvature.
        let w = geo.weyl()?;
        let wv = w.values();
        let ric = geo.ricci()?.values();
        let r = geo.scalar_curvature()?.value();
        let g = geo.g().values();
        let nf = n as f64;
        let rebuilt = Tensor::from_fn(n, rmv.variance().to_vec(), |x| {
            let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
            let gg = |a: usize, b: usize| *g.get(&[a, b]);
            let rc = |a: usize, b: usize| *ric.get(&[a, b]);
            let ricci_part = rc(i, k) * gg(j, l) - rc(i, l) * gg(j, k) + rc(j, l) * gg(i, k) - rc(j, k) * gg(i, l);
            let scalar_part = r * (gg(i, k) * gg(j, l) - gg(i, l) * gg(j, k)) / ((nf - 1.0) * (nf - 2.0));
            wv.get(x) + ricci_part / (nf - 2.0) - scalar_part
        });
        if n >= 3 {
            out.push(rec("Weyl reconstruction", "Weyl decomposition", Comparison::tensors(&rmv, &rebuilt), TOL_EXACT));
            let mut trace = 0.0f64;
            for (a, b) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
                trace = trace.max(max_abs(&w.contract(a, b, m)?));
            }
            out.push(zero("Weyl traces", "Weyl decomposition", trace, wv.max_abs(), TOL_EXACT));
            out.push(zero("first Bianchi (Weyl)", "Weyl decomposition", cyclic(&wv, [1, 2, 3]), wv.max_abs(), TOL_EXACT));
        }

        let c = geo.cotton()?;
        let cv = c.values();
        let cs = cv.max_abs();
        out.push(zero("Cotton skew symmetry", "Cotton tensor", cv.add(&cv.permute(&[0, 2, 1])?)?.max_abs(), cs, TOL_EXACT));
        out.push(zero("Cotton cyclic identity", "Cotton tensor", cyclic(&cv, [0, 1, 2]), cs, TOL_EXACT));
        let trace = [(0, 1), (0, 2), (1, 2)].iter().map(|&(a, b)| c.contract(a, b, m).map(|t| max_abs(&t))).collect::<Result<Vec<_>, _>>()?;
        out.push(zero("Cotton traces", "Cotton tensor", trace.into_iter().fold(0.0, f64::max), cs, TOL_EXACT));
        if n >= 4 {
            out.push(rec("Cotton from Weyl divergence", "Cotton tensor", Comparison::tensors(&cv, &geo.cotton_from_weyl()?.values()), TOL_COTTON));
            out.push(zero("Cotton divergence C_ijk,i", "Cotton tensor", max_abs(&geo.divergence(&c, 0)?), cs, TOL_COTTON));

            let b = geo.bach()?;
            let bv = b.values();
            let bs = bv.max_abs();
            out.push(zero("Bach symmetry", "Bach tensor", bv.sub(&bv.permute(&[1, 0])?)?.max_abs(), bs, TOL_EXACT));
            out.push(zero("Bach trace", "Bach tensor", b.contract(0, 1, m)?.as_scalar().value().abs(), bs, TOL_EXACT));
            let (lhs, rhs) = geo.bach_divergence_sides()?;
            let name = if n == 4 { "Bach divergence (free in n = 4)" } else { "Bach divergence" };
            out.push(rec(name, "Bach tensor", Comparison::tensors(&lhs.values(), &rhs.values()), TOL_DIVERGENCE));
        }
    }
    Ok(out)
}

const SOLITON: &str = "soliton";

/// The soliton equation and the identities that follow from it.
pub fn soliton_suite(s: &SolitonStructure, points: &[Vec<f64>]) -> Result<Vec<CheckRecord>, SuiteError> {
    let mut out = Vec::new();
    let reference = points.first().ok_or(SuiteError::Inapplicable { suite: "soliton", what: "at least one point".into() })?;
    let mut hamilton = Vec::with_capacity(points.len());
    for p in points {
        let pt = Some(p.as_slice());
        let local = s.local(p, SOLITON_ORDER.min(3))?;
        let d2f = local.d2f()?;
        let lhs = local.geometry().ricci()?.add(&d2f)?.values();
        let rhs = local.geometry().g().values().scale(s.lambda());
        out.push(CheckRecord::new(SOLITON, "Ric + Hess f = lambda g", "soliton equation", pt, Comparison::tensors(&lhs, &rhs), TOL_EXACT));

        let basic = s.basic_identity_residuals(p, reference)?;
        let c = s.hamilton_constant(p)?;
        hamilton.push(c);
        let lam = (s.lambda() * s.dim() as f64).abs();
        out.push(CheckRecord::vanishing(SOLITON, "trace identity", "soliton identities", pt, basic.trace, lam, TOL_BASIC));
        out.push(CheckRecord::vanishing(SOLITON, "R_i = 2 f_t R_it", "soliton identities", pt, basic.schur, 1.0, TOL_BASIC));
        out.push(CheckRecord::vanishing(SOLITON, "Hamilton identity", "soliton identities", pt, basic.hamilton, c.abs(), TOL_BASIC));

        let d = local.d_tensor()?;
        let dv = d.values();
        let ds = dv.max_abs();
        let m = local.geometry().metric();
        out.push(CheckRecord::vanishing(SOLITON, "D skew symmetry", "D tensor", pt, dv.add(&dv.permute(&[0, 2, 1])?)?.max_abs(), ds, TOL_EXACT));
        let trace = [(0, 1), (0, 2), (1, 2)].iter().map(|&(a, b)| d.contract(a, b, m).map(|t| max_abs(&t))).collect::<Result<Vec<_>, _>>()?;
        out.push(CheckRecord::vanishing(SOLITON, "D traces", "D tensor", pt, trace.into_iter().fold(0.0, f64::max), ds, TOL_EXACT));

        if s.dim() >= 4 {
            match s.integrability_residuals(p) {
                Ok(cs) => {
                    for (k, c) in cs.into_iter().enumerate() {
                        out.push(CheckRecord::new(SOLITON, format!("integrability condition {}", k + 1), "integrability conditions", pt, c, TOL_INTEGRABILITY));
                    }
                }
                Err(SolitonError::Gate { residual, gate }) => {
                    out.push(CheckRecord::vanishing(SOLITON, "integrability gate", "integrability conditions", pt, residual, 1.0, gate));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    let lo = hamilton.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = hamilton.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.push(CheckRecord::vanishing(SOLITON, "Hamilton constant spread", "soliton identities", None, hi - lo, hi.abs().max(lo.abs()), TOL_BASIC));
    Ok(out)
}

const POINTWISE: &str = "pointwise";

/// The ten pointwise Weyl scalar identities with both forms of every scalar.
/// With `nontrivial`, `|D|^2` must exceed [`NONTRIVIAL_D2`] at every point.
pub fn pointwise_suite(s: &SolitonStructure, points: &[Vec<f64>], nontrivial: bool) -> Result<Vec<CheckRecord>, SuiteError> {
    let mut out = Vec::new();
    for p in points {
        let pt = Some(p.as_slice());
        let ids = scalars::pointwise_identity_residuals(s, p)?;
        for k in 0..10 {
            let name = scalars::SCALAR_NAMES[k];
            out.push(CheckRecord::new(POINTWISE, name, "pointwise Weyl scalar identities", pt, ids.identities[k], TOL_POINTWISE));
            out.push(CheckRecord::new(POINTWISE, format!("{name} f-form = Ricci form"), "Weyl scalar forms", pt, ids.forms[k], TOL_POINTWISE));
        }
        out.push(CheckRecord::new(POINTWISE, "w04 as printed", "pointwise Weyl scalar identities", pt, ids.w04_as_printed, TOL_POINTWISE).informational());
        let guard = CheckRecord::at_least(POINTWISE, "|D|^2 nontrivial", "pointwise Weyl scalar identities", pt, ids.d2, NONTRIVIAL_D2);
        out.push(if nontrivial { guard } else { guard.informational() });
    }
    Ok(out)
}

/// `count` coefficient vectors with entries `p/q`, `|p| <= 8`, `1 <= q <= 8`.
pub fn random_coeffs(count: usize, seed: u64) -> Vec<CoeffVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| CoeffVector(std::array::from_fn(|_| classify::q(rng.random_range(-8..=8), rng.random_range(1..=8))))).collect()
}

const INTEGRALS: &str = "integrals";

/// Exponential-weight identities, dependent integrals, general Weyl scalar
/// integrals and the weighted identities for each omega, then the weighted
/// identities for [`GENERAL_WEIGHT`] and the first mixed case.
pub fn integral_suite(s: &SolitonStructure, grid: GridSpec, opts: &SuiteOptions) -> Result<(Vec<CheckRecord>, Option<integrate::Mix1Adjudication>), SuiteError> {
    let it = Integrator::new(s, grid);
    let mut out = Vec::new();
    let push = |out: &mut Vec<CheckRecord>, cs: Vec<integrate::IntegralCheck>| out.extend(cs.iter().map(|c| CheckRecord::from_integral(INTEGRALS, c)));
    let coeffs = random_coeffs(opts.wg_count, opts.seed);
    for &omega in &opts.omegas {
        push(&mut out, integrate::verify_exponential(&it, omega)?);
        push(&mut out, integrate::verify_deprels(&it, omega)?);
        let mut lemma = integrate::verify_integral_lemma(&it, &WeightSpec::exponential(omega))?;
        for c in &mut lemma {
            c.name = format!("{} (exp, omega = {omega})", c.name);
        }
        push(&mut out, lemma);
        for (k, a) in coeffs.iter().enumerate() {
            let mut c = integrate::verify_wg(&it, &WgInput::Reduced(a.clone()), omega)?;
            c.name = format!("W_G #{} (omega = {omega})", k + 1);
            push(&mut out, vec![c]);
        }
    }
    if opts.general_weight {
        let weight = WeightSpec::general(GENERAL_WEIGHT, GENERAL_WEIGHT_DECAY)?;
        let mut lemma = integrate::verify_integral_lemma(&it, &weight)?;
        for c in &mut lemma {
            c.name = format!("{} (psi = {GENERAL_WEIGHT})", c.name);
        }
        push(&mut out, lemma);
    }
    let mut verdict = None;
    if let Some(&omega) = opts.omegas.iter().find(|&&w| w == 1.0).or(opts.omegas.first()) {
        let params: Vec<Q> = MIX1_PARAMS.iter().map(|&(a, b)| classify::q(a, b)).collect();
        let adj = integrate::adjudicate_mix1(&it, &params, omega)?;
        push(&mut out, vec![adj.against_reduced.clone(), adj.against_printed.clone()]);
        verdict = Some(adj);
    }
    Ok((out, verdict))
}

/// `omega` as an exact rational, for display.
pub fn omega_label(omega: f64) -> String {
    Q::from_f64(omega).map(|q| q.to_string()).unwrap_or_else(|| omega.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make, ZooParams};

    fn entry(name: &str) -> ZooEntry {
        make(name, &ZooParams { dim: Some(4), ..ZooParams::default() }).unwrap()
    }

    #[test]
    fn geometry_on_perturbed_torus() {
        let e = entry("perturbed-torus");
        let recs = geometry_suite(&e.chart, &e.sample_points(2, 3)).unwrap();
        for r in &recs {
            assert!(r.pass, "{} at {:?}: {:e}", r.name, r.point, r.relative);
        }
        assert!(recs.iter().any(|r| r.name.starts_with("Bach divergence")));
    }

    #[test]
    fn soliton_on_s2xr2() {
        let e = entry("s2xr2");
        let recs = soliton_suite(&e.structure().unwrap(), &e.sample_points(3, 1)).unwrap();
        for r in &recs {
            assert!(r.pass, "{} at {:?}: {:e}", r.name, r.point, r.relative);
        }
        assert_eq!(recs.iter().filter(|r| r.name.starts_with("integrability")).count(), 12);
    }

    #[test]
    fn soliton_suite_reports_non_solitons() {
        let e = entry("flat-torus");
        let s = SolitonStructure::new(e.chart.clone(), crate::expr::Expr::zero(), 1.0).unwrap();
        let recs = soliton_suite(&s, &e.sample_points(1, 1)).unwrap();
        assert!(!recs[0].pass);
        assert!(recs.iter().any(|r| r.name == "integrability gate" && !r.pass));
    }

    #[test]
    fn pointwise_on_s2xr2() {
        let e = entry("s2xr2");
        let recs = pointwise_suite(&e.structure().unwrap(), &e.sample_points(1, 1), true).unwrap();
        assert_eq!(recs.len(), 22);
        for r in recs.iter().filter(|r| r.normative) {
            assert!(r.pass, "{}: {:e}", r.name, r.relative);
        }
    }

    #[test]
    fn inapplicable_suites() {
        let e = entry("perturbed-torus");
        let mut report = Report::new(vec![], None);
        let err = run(&e, &[Suite::Soliton], &SuiteOptions::default(), &mut report).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_DOMAIN);
    }

    #[test]
    fn random_coeffs_are_reproducible() {
        assert_eq!(random_coeffs(5, 9), random_coeffs(5, 9));
        assert_ne!(random_coeffs(5, 9), random_coeffs(5, 10));
    }
}
