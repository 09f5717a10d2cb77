//! Built-in example geometries, and the text manifest for user charts.
//!
//! Every entry carries flags for what it is expected to satisfy; the flags
//! are checked numerically when the entry is made.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expr::Expr;
use crate::geometry::{CoordKind, Coordinate, GeometryError, MetricChart};
use crate::integrate::GridSpec;
use crate::soliton::{SolitonError, SolitonStructure};

/// Safe distance from the poles of angular charts.
pub const SPHERE_MARGIN: f64 = 0.15;
/// Base node counts for polar and azimuthal angles.
pub const ANGULAR_NODES: (usize, usize) = (4, 3);
/// Modes per metric entry of the perturbed torus.
pub const TORUS_MODES: usize = 3;
pub const DEFAULT_AMPLITUDE: f64 = 0.05;
/// Points used to certify the flags of an entry.
const CERTIFY_POINTS: usize = 4;
const CERTIFY_SEED: u64 = 0x5eed;
const FLAG_ZERO: f64 = 1e-10;
const FLAG_NONZERO: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("unknown manifold {0:?}; known: {known}", known = NAMES.join(", "))]
    UnknownName(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Soliton(#[from] SolitonError),
    #[error("flag {flag} of {name} fails: {detail}")]
    Certification { name: String, flag: &'static str, detail: String },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}

pub const NAMES: [&str; 8] =
    ["flat-torus", "perturbed-torus", "round-sphere", "gaussian", "cylinder", "s2xr2", "s3xr2", "einstein-product"];

/// Expected properties. `d_zero` is `None` without a potential.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Flags {
    pub is_soliton: bool,
    pub weyl_zero: bool,
    pub cotton_zero: bool,
    pub d_zero: Option<bool>,
    pub einstein: bool,
}

#[derive(Clone, Debug)]
pub struct ZooEntry {
    pub name: String,
    pub chart: MetricChart,
    pub potential: Option<(Expr, f64)>,
    pub flags: Flags,
    pub grid: GridSpec,
}

/// Parameters accepted by [`make`]; unused ones are ignored.
#[derive(Clone, Debug)]
pub struct ZooParams {
    pub dim: Option<usize>,
    pub seed: u64,
    pub amplitude: f64,
    pub radius: f64,
    pub lambda: f64,
}

impl Default for ZooParams {
    fn default() -> Self {
        ZooParams { dim: None, seed: 7, amplitude: DEFAULT_AMPLITUDE, radius: 1.0, lambda: 1.0 }
    }
}

impl ZooEntry {
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// The soliton structure, or an error for plain metrics.
    pub fn structure(&self) -> Result<SolitonStructure, ZooError> {
        match &self.potential {
            Some((f, lambda)) => Ok(SolitonStructure::new(self.chart.clone(), f.clone(), *lambda)?),
            None => Err(ZooError::Parameter(format!("{} has no potential", self.name))),
        }
    }

    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        self.chart.sample_points(count, seed)
    }

    /// Measures each flag at a few points and fails if any disagrees.
    pub fn certify(&self) -> Result<(), ZooError> {
        let points = self.sample_points(CERTIFY_POINTS, CERTIFY_SEED);
        let fail = |flag: &'static str, detail: String| ZooError::Certification { name: self.name.clone(), flag, detail };
        let check = |flag: &'static str, expect_zero: bool, sizes: &[f64]| -> Result<(), ZooError> {
            let max = sizes.iter().copied().fold(0.0, f64::max);
            if expect_zero && !(max <= FLAG_ZERO) {
                return Err(fail(flag, format!("expected zero, found {max:.3e}")));
            }
            if !expect_zero && !(max > FLAG_NONZERO) {
                return Err(fail(flag, format!("expected nonzero, largest {max:.3e}")));
            }
            Ok(())
        };
        let mut weyl = Vec::new();
        let mut cotton = Vec::new();
        let mut traceless = Vec::new();
        for p in &points {
            let geo = self.chart.local(p, 3)?;
            let scale = geo.riemann()?.values().max_abs().max(1.0);
            if self.dim() >= 4 {
                weyl.push(geo.weyl()?.values().max_abs() / scale);
            }
            cotton.push(geo.cotton()?.values().max_abs() / scale);
            let ric = geo.ricci()?.values();
            let r = *geo.scalar_curvature()?.as_scalar_value();
            let g = geo.g().values();
            traceless.push(ric.sub(&g.scale(r / self.dim() as f64)).map_err(SolitonError::from)?.max_abs() / scale);
        }
        if self.dim() >= 4 {
            check("weyl_zero", self.flags.weyl_zero, &weyl)?;
        }
        check("cotton_zero", self.flags.cotton_zero, &cotton)?;
        check("einstein", self.flags.einstein, &traceless)?;
        match (self.flags.is_soliton, self.potential.is_some()) {
            (true, true) => {
                let s = self.structure()?;
                let res: Vec<f64> = points.iter().map(|p| s.soliton_residual(p).map(|t| t.max_abs())).collect::<Result<_, _>>()?;
                check("is_soliton", true, &res)?;
            }
            (true, false) => return Err(fail("is_soliton", "no potential".into())),
            (false, true) => {
                let s = self.structure()?;
                let res: Vec<f64> = points.iter().map(|p| s.soliton_residual(p).map(|t| t.max_abs())).collect::<Result<_, _>>()?;
                check("is_soliton", false, &res)?;
            }
            (false, false) => {}
        }
        if let Some(expect) = self.flags.d_zero {
            let s = self.structure()?;
            let d: Vec<f64> = points.iter().map(|p| s.d_tensor_at(p).map(|t| t.max_abs())).collect::<Result<_, _>>()?;
            check("d_zero", expect, &d)?;
        }
        Ok(())
    }
}

trait ScalarValue {
    fn as_scalar_value(&self) -> &f64;
}

impl ScalarValue for crate::jet::Jet {
    fn as_scalar_value(&self) -> &f64 {
        &self.coeffs()[0]
    }
}

fn coord(name: &str, kind: CoordKind, lo: f64, hi: f64) -> Coordinate {
    Coordinate::new(name, kind, lo, hi)
}

fn parse(text: &str) -> Expr {
    Expr::parse(text).expect("built-in expression")
}

/// Angular coordinates of the unit `S^m` starting at variable `first`:
/// `m - 1` polar angles and one periodic angle, with the diagonal metric
/// entries `r^2 prod sin^2`.
fn sphere_block(m: usize, first: usize, radius: f64) -> (Vec<Coordinate>, Vec<Expr>) {
    let mut coords = Vec::with_capacity(m);
    let mut diag = Vec::with_capacity(m);
    let r2 = Expr::constant(radius * radius);
    let mut factor = r2;
    for k in 0..m {
        let v = first + k;
        if k + 1 < m {
            coords.push(coord(&format!("theta{}", k + 1), CoordKind::Interval, 0.0, PI));
        } else {
            coords.push(coord("phi", CoordKind::Periodic, 0.0, 2.0 * PI));
        }
        diag.push(factor.clone());
        factor = factor.mul(&Expr::var(v).sin().powi(2));
    }
    (coords, diag)
}

fn diagonal_chart(coords: Vec<Coordinate>, diag: Vec<Expr>, margin: f64) -> Result<MetricChart, ZooError> {
    let entries: Vec<_> = diag.into_iter().enumerate().map(|(i, e)| ((i, i), e)).collect();
    Ok(MetricChart::from_upper(coords, &entries, margin)?)
}

fn lines(names: &[&str], first: usize) -> (Vec<Coordinate>, Vec<Expr>, String) {
    let coords = names.iter().map(|n| coord(n, CoordKind::Line, -3.0, 3.0)).collect();
    let diag = names.iter().map(|_| Expr::one()).collect();
    let sq = (0..names.len()).map(|k| format!("x{}^2", first + k)).collect::<Vec<_>>().join(" + ");
    (coords, diag, sq)
}

fn need_dim(p: &ZooParams, default: usize, min: usize) -> Result<usize, ZooError> {
    let n = p.dim.unwrap_or(default);
    if n < min {
        return Err(ZooError::Parameter(format!("dimension {n} is below {min}")));
    }
    Ok(n)
}

/// The expression of `g_ij - delta_ij` for the perturbed torus, drawn from
/// ChaCha8 seeded with `seed`: for each `i <= j` in row-major order,
/// [`TORUS_MODES`] modes, each a wave vector in `{-1,0,1}^n` (redrawn while
/// zero), an integer `c` in `[-32, 32]` and a choice of `cos`/`sin`; the entry is
/// `amplitude * sum c/32 * trig(k.x)`.
pub fn torus_perturbation(n: usize, seed: u64, amplitude: f64) -> Vec<((usize, usize), String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut terms = Vec::with_capacity(TORUS_MODES);
            for _ in 0..TORUS_MODES {
                let k = loop {
                    let k: Vec<i32> = (0..n).map(|_| rng.random_range(-1..=1)).collect();
                    if k.iter().any(|&x| x != 0) {
                        break k;
                    }
                };
                let c: i32 = rng.random_range(-32..=32);
                let trig = if rng.random_bool(0.5) { "cos" } else { "sin" };
                let arg = k
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0)
                    .map(|(v, &x)| format!("{}x{v}", if x < 0 { "-" } else { "+" }))
                    .collect::<String>();
                let arg = arg.trim_start_matches('+');
                terms.push(format!("{c}/32*{trig}({arg})"));
            }
            out.push(((i, j), format!("{amplitude}*({})", terms.join(" + "))));
        }
    }
    out
}

/// Accepts `flat_torus`, `s2xr2_soliton` and similar spellings of [`NAMES`].
pub fn canonical_name(name: &str) -> String {
    let name = name.trim().to_ascii_lowercase().replace('_', "-");
    match name.strip_suffix("-soliton") {
        Some(stem) if NAMES.contains(&stem) => stem.to_string(),
        _ => name,
    }
}

/// Builds and certifies an entry.
pub fn make(name: &str, p: &ZooParams) -> Result<ZooEntry, ZooError> {
    let entry = build(&canonical_name(name), p)?;
    entry.certify()?;
    Ok(entry)
}

fn build(name: &str, p: &ZooParams) -> Result<ZooEntry, ZooError> {
    let name_owned = name.to_string();
    let flags = |is_soliton, weyl_zero, cotton_zero, d_zero, einstein| Flags { is_soliton, weyl_zero, cotton_zero, d_zero, einstein };
    let entry = match name {
        "flat-torus" => {
            let n = need_dim(p, 4, 2)?;
            let coords = (0..n).map(|i| coord(&format!("x{i}"), CoordKind::Periodic, 0.0, 2.0 * PI)).collect();
            let chart = diagonal_chart(coords, vec![Expr::one(); n], 0.0)?;
            ZooEntry {
                name: name_owned,
                chart,
                potential: Some((Expr::zero(), 0.0)),
                flags: flags(true, true, true, Some(true), true),
                grid: GridSpec::default(),
            }
        }
        "perturbed-torus" => {
            let n = need_dim(p, 4, 3)?;
            if !(p.amplitude > 0.0 && p.amplitude <= 0.1) {
                return Err(ZooError::Parameter(format!("amplitude {} outside (0, 0.1]", p.amplitude)));
            }
            let coords = (0..n).map(|i| coord(&format!("x{i}"), CoordKind::Periodic, 0.0, 2.0 * PI)).collect();
            let entries = torus_perturbation(n, p.seed, p.amplitude)
                .into_iter()
                .map(|((i, j), text)| {
                    let e = parse(&text);
                    ((i, j), if i == j { Expr::one().add(&e) } else { e })
                })
                .collect::<Vec<_>>();
            let chart = MetricChart::from_upper(coords, &entries, 0.0)?;
            ZooEntry {
                name: name_owned,
                chart,
                potential: None,
                flags: flags(false, n < 4, false, None, false),
                grid: GridSpec::default(),
            }
        }
        "round-sphere" => {
            let n = need_dim(p, 4, 2)?;
            if !(p.radius > 0.0) {
                return Err(ZooError::Parameter(format!("radius {} is not positive", p.radius)));
            }
            let (coords, diag) = sphere_block(n, 0, p.radius);
            let chart = diagonal_chart(coords, diag, SPHERE_MARGIN)?;
            let lambda = (n as f64 - 1.0) / (p.radius * p.radius);
            ZooEntry {
                name: name_owned,
                chart,
                potential: Some((Expr::zero(), lambda)),
                flags: flags(true, true, true, Some(true), true),
                grid: GridSpec::default(),
            }
        }
        "gaussian" => {
            let n = need_dim(p, 4, 2)?;
            let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let (coords, diag, sq) = lines(&refs, 0);
            let chart = diagonal_chart(coords, diag, 0.0)?;
            let f = parse(&format!("{}*({sq})/2", p.lambda));
            ZooEntry {
                name: name_owned,
                chart,
                potential: Some((f, p.lambda)),
                flags: flags(true, true, true, Some(true), true),
                grid: GridSpec::default(),
            }
        }
        "cylinder" => {
            let n = need_dim(p, 4, 3)?;
            let (mut coords, mut diag) = sphere_block(n - 1, 0, 1.0);
            coords.push(coord("t", CoordKind::Line, -3.0, 3.0));
            diag.push(Expr::one());
            let chart = diagonal_chart(coords, diag, SPHERE_MARGIN)?;
            let lambda = n as f64 - 2.0;
            let f = parse(&format!("{lambda}*x{}^2/2", n - 1));
            ZooEntry {
                name: name_owned,
                chart,
                potential: Some((f, lambda)),
                flags: flags(true, true, true, Some(true), false),
                grid: GridSpec::default(),
            }
        }
        "s2xr2" | "s3xr2" => {
            let m = if name == "s2xr2" { 2 } else { 3 };
            let (mut coords, mut diag) = sphere_block(m, 0, 1.0);
            let (lc, ld, sq) = lines(&["x", "y"], m);
            coords.extend(lc);
            diag.extend(ld);
            let chart = diagonal_chart(coords, diag, SPHERE_MARGIN)?;
            let lambda = m as f64 - 1.0;
            let f = parse(&format!("{lambda}*({sq})/2"));
            ZooEntry {
                name: name_owned,
                chart,
                potential: Some((f, lambda)),
                flags: flags(true, false, true, Some(false), false),
                grid: GridSpec::default(),
            }
        }
        "einstein-product" => {
            let (mut coords, mut diag) = sphere_block(2, 0, 1.0);
            let (c2, d2) = sphere_block(2, 2, 1.0);
            coords.extend(c2);
            diag.extend(d2);
            coords[2].name = "theta2".into();
            coords[3].name = "phi2".into();
            let chart = diagonal_chart(coords, diag, SPHERE_MARGIN)?;
            ZooEntry {
                name: name_owned,
                chart,
                potential: Some((Expr::zero(), 1.0)),
                flags: flags(true, false, true, Some(true), true),
                grid: GridSpec::default(),
            }
        }
        other => return Err(ZooError::UnknownName(other.to_string())),
    };
    let mut entry = entry;
    if entry.chart.coords().iter().any(|c| c.kind == CoordKind::Interval) {
        entry.grid = angular_grid(&entry.chart);
    }
    Ok(entry)
}

/// Grid for charts with sphere factors: 4 Gauss-Legendre nodes per polar
/// angle, 3 per azimuth (the zoo integrands do not depend on it), defaults on lines.
fn angular_grid(chart: &MetricChart) -> GridSpec {
    let counts = chart
        .coords()
        .iter()
        .map(|c| match c.kind {
            CoordKind::Interval => Some(ANGULAR_NODES.0),
            CoordKind::Periodic => Some(ANGULAR_NODES.1),
            CoordKind::Line => None,
        })
        .collect();
    GridSpec { counts, ..GridSpec::default() }
}

/// Reads a manifest:
///
/// ```text
/// # comment
/// name my-chart
/// dim 2
/// coord theta interval 0 pi
/// coord phi periodic 0 2*pi
/// margin 0.15
/// metric 0 0 = 1
/// metric 1 1 = sin(x0)^2
/// potential = 0
/// lambda = 1
/// grid 4,6
/// ```
///
/// Omitted metric entries are zero; `metric i j` sets both `g_ij` and `g_ji`.
pub fn parse_manifest(text: &str) -> Result<ZooEntry, ZooError> {
    let mut name = "manifest".to_string();
    let mut dim: Option<usize> = None;
    let mut coords = Vec::new();
    let mut margin = 0.0;
    let mut entries: Vec<((usize, usize), Expr)> = Vec::new();
    let mut potential: Option<Expr> = None;
    let mut lambda: Option<f64> = None;
    let mut grid = GridSpec::default();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let err = |message: String| ZooError::Manifest { line: line_no, message };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        let constant = |t: &str| -> Result<f64, ZooError> {
            Expr::parse_with_dim(t, 0).map_err(|e| err(e.to_string()))?.evaluate(&[]).map_err(|e| err(e.to_string()))
        };
        let need_dim = || dim.ok_or_else(|| err("dim must come first".into()));
        // `key value` and `key = value` are both accepted.
        let value = rest.strip_prefix('=').map(str::trim).unwrap_or(rest);
        match key {
            "name" => name = value.to_string(),
            "dim" => dim = Some(value.parse().map_err(|_| err(format!("bad dimension {value:?}")))?),
            "coord" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err(err("expected: coord NAME KIND LO HI".into()));
                }
                let kind = match parts[1] {
                    "interval" => CoordKind::Interval,
                    "periodic" => CoordKind::Periodic,
                    "line" => CoordKind::Line,
                    other => return Err(err(format!("unknown coordinate kind {other:?}"))),
                };
                coords.push(coord(parts[0], kind, constant(parts[2])?, constant(parts[3])?));
            }
            "margin" => margin = constant(value)?,
            "metric" => {
                let n = need_dim()?;
                let (idx, expr) = rest.split_once('=').ok_or_else(|| err("expected: metric I J = EXPR".into()))?;
                let ij: Vec<usize> = idx.split_whitespace().map(|t| t.parse().map_err(|_| err(format!("bad index {t:?}")))).collect::<Result<_, _>>()?;
                if ij.len() != 2 || ij[0] >= n || ij[1] >= n {
                    return Err(err(format!("bad metric indices {idx:?}")));
                }
                let e = Expr::parse_with_dim(expr.trim(), n).map_err(|e| err(e.to_string()))?;
                let key = (ij[0].min(ij[1]), ij[0].max(ij[1]));
                entries.retain(|(k, _)| *k != key);
                entries.push((key, e));
            }
            "potential" => potential = Some(Expr::parse_with_dim(value, need_dim()?).map_err(|e| err(e.to_string()))?),
            "lambda" => lambda = Some(constant(value)?),
            "grid" => grid = value.parse().map_err(|e: crate::integrate::IntegrateError| err(e.to_string()))?,
            other => return Err(err(format!("unknown key {other:?}"))),
        }
    }
    let line = text.lines().count();
    let err = |message: String| ZooError::Manifest { line, message };
    let n = dim.ok_or_else(|| err("missing dim".into()))?;
    if coords.len() != n {
        return Err(err(format!("{} coordinates for dimension {n}", coords.len())));
    }
    let chart = MetricChart::from_upper(coords, &entries, margin)?;
    let potential = match (potential, lambda) {
        (Some(f), Some(l)) => Some((f, l)),
        (None, None) => None,
        _ => return Err(err("potential and lambda go together".into())),
    };
    Ok(ZooEntry {
        name,
        chart,
        potential,
        flags: Flags { is_soliton: false, weyl_zero: false, cotton_zero: false, d_zero: None, einstein: false },
        grid,
    })
}

/// Writes a manifest that [`parse_manifest`] reads back to the same chart.
pub fn render_manifest(e: &ZooEntry) -> String {
    let mut out = String::new();
    let n = e.dim();
    let _ = writeln!(out, "name {}", e.name);
    let _ = writeln!(out, "dim {n}");
    for c in e.chart.coords() {
        let kind = match c.kind {
            CoordKind::Interval => "interval",
            CoordKind::Periodic => "periodic",
            CoordKind::Line => "line",
        };
        let _ = writeln!(out, "coord {} {kind} {:?} {:?}", c.name, c.lo, c.hi);
    }
    let _ = writeln!(out, "margin {:?}", e.chart.margin());
    for i in 0..n {
        for j in i..n {
            let g = e.chart.entry(i, j);
            if !g.is_zero() {
                let _ = writeln!(out, "metric {i} {j} = {g}");
            }
        }
    }
    if let Some((f, l)) = &e.potential {
        let _ = writeln!(out, "potential = {f}");
        let _ = writeln!(out, "lambda = {l:?}");
    }
    if e.grid != GridSpec::default() {
        let _ = writeln!(out, "grid {}", e.grid);
    }
    out
}
