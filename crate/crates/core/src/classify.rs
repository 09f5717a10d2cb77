//! Exact classification of six-entry coefficient vectors by the sign
//! behaviour of `Delta(A, omega) = alpha*gamma - beta^2`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("dimension {0} is not supported (need n >= 4)")]
    Dimension(i64),
    #[error("unknown special case '{0}'")]
    UnknownCase(String),
    #[error("case '{case}' takes {expected} parameters, got {got}")]
    ParamCount { case: &'static str, expected: usize, got: usize },
    #[error("case 'mix2' is only defined for n = 4")]
    Mix2Dimension,
    #[error("alpha must be nonzero")]
    AlphaZero,
    #[error("cannot parse '{0}' as a rational number")]
    Parse(String),
    #[error("expected {expected} coefficients, got {got}")]
    Length { expected: usize, got: usize },
    #[error("coefficient {0} is not finite")]
    NotFinite(f64),
}

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

fn qi(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

/// Parses `"3"`, `"-2/7"` or a decimal such as `"0.125"` exactly.
pub fn parse_rational(text: &str) -> Result<Q, ClassifyError> {
    let t = text.trim();
    let err = || ClassifyError::Parse(text.to_string());
    if let Some((a, b)) = t.split_once('/') {
        let a = BigInt::from_str(a.trim()).map_err(|_| err())?;
        let b = BigInt::from_str(b.trim()).map_err(|_| err())?;
        if b.is_zero() {
            return Err(err());
        }
        return Ok(Q::new(a, b));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (t, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = Q::from_integer(BigInt::from_str(&digits).map_err(|_| err())?);
    let shift = exp - frac_part.len() as i32;
    let ten = Q::from_integer(BigInt::from(10));
    for _ in 0..shift.unsigned_abs() {
        value = if shift > 0 { value * &ten } else { value / &ten };
    }
    Ok(if neg { -value } else { value })
}

fn check_dim(n: i64) -> Result<Q, ClassifyError> {
    if n < 4 {
        return Err(ClassifyError::Dimension(n));
    }
    Ok(qi(n))
}

/// `(A10, A20, A11, A21, A12, A14)`: coefficients of the six independent
/// weighted integrals `W01, W02, W11, W12, W21, W41`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoeffVector(pub [Q; 6]);

pub const COEFF_NAMES: [&str; 6] = ["A10", "A20", "A11", "A21", "A12", "A14"];

impl CoeffVector {
    pub fn zero() -> Self {
        CoeffVector(std::array::from_fn(|_| Q::zero()))
    }

    pub fn from_ints(v: [i64; 6]) -> Self {
        CoeffVector(v.map(qi))
    }

    pub fn parse_list(text: &str) -> Result<Self, ClassifyError> {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 6 {
            return Err(ClassifyError::Length { expected: 6, got: parts.len() });
        }
        let mut out = CoeffVector::zero();
        for (slot, p) in out.0.iter_mut().zip(parts) {
            *slot = parse_rational(p)?;
        }
        Ok(out)
    }

    /// Exact binary value of each float.
    pub fn from_f64(v: &[f64]) -> Result<Self, ClassifyError> {
        if v.len() != 6 {
            return Err(ClassifyError::Length { expected: 6, got: v.len() });
        }
        let mut out = CoeffVector::zero();
        for (slot, &x) in out.0.iter_mut().zip(v) {
            *slot = Q::from_float(x).ok_or(ClassifyError::NotFinite(x))?;
        }
        Ok(out)
    }

    pub fn to_f64(&self) -> [f64; 6] {
        std::array::from_fn(|i| self.0[i].to_f64().unwrap_or(f64::NAN))
    }

    pub fn scaled(&self, t: &Q) -> Self {
        CoeffVector(std::array::from_fn(|i| &self.0[i] * t))
    }

    pub fn a10(&self) -> &Q {
        &self.0[0]
    }
    pub fn a20(&self) -> &Q {
        &self.0[1]
    }
    pub fn a11(&self) -> &Q {
        &self.0[2]
    }
    pub fn a21(&self) -> &Q {
        &self.0[3]
    }
    pub fn a12(&self) -> &Q {
        &self.0[4]
    }
    pub fn a14(&self) -> &Q {
        &self.0[5]
    }
}

impl fmt::Display for CoeffVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// `constant + slope * omega`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Affine {
    pub constant: Q,
    pub slope: Q,
}

impl Affine {
    pub fn new(constant: Q, slope: Q) -> Self {
        Affine { constant, slope }
    }

    pub fn eval(&self, omega: &Q) -> Q {
        &self.constant + &self.slope * omega
    }

    pub fn scaled(&self, t: &Q) -> Self {
        Affine::new(&self.constant * t, &self.slope * t)
    }

    /// Where the polynomial vanishes.
    pub fn zero_set(&self) -> OmegaSet {
        match (self.constant.is_zero(), self.slope.is_zero()) {
            (true, true) => OmegaSet::All,
            (false, true) => OmegaSet::Empty,
            _ => OmegaSet::Single(-&self.constant / &self.slope),
        }
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.constant.is_zero(), self.slope.is_zero()) {
            (_, true) => write!(f, "{}", self.constant),
            (true, false) => write!(f, "({})*w", self.slope),
            _ => write!(f, "{} + ({})*w", self.constant, self.slope),
        }
    }
}

/// A subset of the omega line of the shapes that affine conditions produce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OmegaSet {
    Empty,
    Single(Q),
    All,
    AllExcept(Q),
}

impl OmegaSet {
    pub fn contains(&self, w: &Q) -> bool {
        match self {
            OmegaSet::Empty => false,
            OmegaSet::Single(v) => v == w,
            OmegaSet::All => true,
            OmegaSet::AllExcept(v) => v != w,
        }
    }

    /// Intersection with the zero set of an affine polynomial.
    fn and_zero(&self, p: &Affine) -> OmegaSet {
        match (self, p.zero_set()) {
            (OmegaSet::Empty, _) | (_, OmegaSet::Empty) => OmegaSet::Empty,
            (s, OmegaSet::All) => s.clone(),
            (OmegaSet::All, z) => z,
            (OmegaSet::Single(v), OmegaSet::Single(w)) => {
                if *v == w {
                    OmegaSet::Single(w)
                } else {
                    OmegaSet::Empty
                }
            }
            (OmegaSet::AllExcept(v), OmegaSet::Single(w)) => {
                if *v == w {
                    OmegaSet::Empty
                } else {
                    OmegaSet::Single(w)
                }
            }
            _ => unreachable!("zero sets are never co-finite"),
        }
    }

    /// Removes the zero set of `p`.
    fn and_nonzero(&self, p: &Affine) -> OmegaSet {
        match (self, p.zero_set()) {
            (OmegaSet::Empty, _) | (_, OmegaSet::All) => OmegaSet::Empty,
            (s, OmegaSet::Empty) => s.clone(),
            (OmegaSet::All, OmegaSet::Single(w)) => OmegaSet::AllExcept(w),
            (OmegaSet::Single(v), OmegaSet::Single(w)) => {
                if *v == w {
                    OmegaSet::Empty
                } else {
                    OmegaSet::Single(v.clone())
                }
            }
            (OmegaSet::AllExcept(v), OmegaSet::Single(w)) => {
                if *v == w {
                    OmegaSet::AllExcept(w)
                } else {
                    // Two punctures never arise: callers start from a zero set.
                    unreachable!("double puncture")
                }
            }
            _ => unreachable!("zero sets are never co-finite"),
        }
    }

    /// A representative element, preferring small values.
    pub fn sample(&self) -> Option<Q> {
        match self {
            OmegaSet::Empty => None,
            OmegaSet::Single(v) => Some(v.clone()),
            OmegaSet::All => Some(Q::zero()),
            OmegaSet::AllExcept(v) => Some(if v.is_zero() { Q::one() } else { Q::zero() }),
        }
    }
}

impl fmt::Display for OmegaSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OmegaSet::Empty => write!(f, "none"),
            OmegaSet::Single(v) => write!(f, "w = {v}"),
            OmegaSet::All => write!(f, "all w"),
            OmegaSet::AllExcept(v) => write!(f, "all w != {v}"),
        }
    }
}

/// `alpha`, `beta`, `gamma` as affine polynomials in omega.
pub fn alpha_beta_gamma(a: &CoeffVector, n: i64) -> Result<[Affine; 3], ClassifyError> {
    let nq = check_dim(n)?;
    let (n2, n3, n4) = (&nq - qi(2), &nq - qi(3), &nq - qi(4));
    let half = q(1, 2);
    let quarter = q(1, 4);
    let r = &n3 / &n2;
    let alpha = Affine::new(
        &half * (a.a10() - &r * (a.a21() + a.a12())),
        &half * &r * a.a14(),
    );
    let beta = Affine::new(
        &quarter * (&n4 * a.a10() - &n2 * a.a20() - &n3 * a.a11()),
        -&quarter * (&n2 * a.a10() - &n3 * a.a12()),
    );
    let gamma = Affine::new(&n2 / qi(2) * a.a20(), &n2 / qi(2) * a.a10());
    Ok([alpha, beta, gamma])
}

/// `(delta2, delta1, delta0)` from the exact expansion of `alpha*gamma - beta^2`.
pub fn delta_coeffs(a: &CoeffVector, n: i64) -> Result<[Q; 3], ClassifyError> {
    let [al, be, ga] = alpha_beta_gamma(a, n)?;
    Ok(delta_from_abg(&al, &be, &ga))
}

fn delta_from_abg(al: &Affine, be: &Affine, ga: &Affine) -> [Q; 3] {
    let d2 = &al.slope * &ga.slope - &be.slope * &be.slope;
    let d1 = (&al.constant * &ga.slope + &al.slope * &ga.constant - qi(2) * &be.constant * &be.slope) / qi(2);
    let d0 = &al.constant * &ga.constant - &be.constant * &be.constant;
    [d2, d1, d0]
}

/// The three closed-form delta expressions, transcribed term by term.
pub fn delta_coeffs_transcribed(a: &CoeffVector, n: i64) -> Result<[Q; 3], ClassifyError> {
    let nq = check_dim(n)?;
    let (n2, n3, n4) = (&nq - qi(2), &nq - qi(3), &nq - qi(4));
    let (a10, a20, a11, a21, a12, a14) = (a.a10(), a.a20(), a.a11(), a.a21(), a.a12(), a.a14());
    let s = q(1, 16);
    let d2 = &s
        * (-(&n2 * &n2) * a10 * a10 + qi(2) * &n3 * a10 * (&n2 * a12 + qi(2) * a14) - &n3 * &n3 * a12 * a12);
    let bracket = &nq * (qi(5) * a11 + qi(5) * a12 + qi(4) * a20 - qi(2) * a21)
        + &nq * &nq * (-(a11 + a12 + a20))
        - qi(6) * a11
        - qi(6) * a12
        - qi(4) * a20
        + qi(6) * a21;
    let d1 = &s
        * (a10 * a10 * &n2 * &n2
            + a10 * bracket
            + &n3 * (a11 * a12 * &n3 + a12 * a20 * &n2 + qi(2) * a14 * a20));
    let d0 = &s
        * (-(a10 * a10) * &n4 * &n4 + qi(2) * a10 * (a11 * &n4 * &n3 + a20 * &n2 * &n2)
            - a11 * a11 * &n3 * &n3
            - qi(2) * a11 * a20 * &n3 * &n2
            - a20 * (qi(4) * a12 * &n3 + a20 * &n2 * &n2 + qi(4) * a21 * &n3));
    Ok([d2, d1, d0])
}

/// `Delta` as a quadratic in omega together with its affine factors.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaQuadratic {
    pub n: i64,
    pub alpha: Affine,
    pub beta: Affine,
    pub gamma: Affine,
    pub delta2: Q,
    pub delta1: Q,
    pub delta0: Q,
}

impl OmegaQuadratic {
    pub fn new(a: &CoeffVector, n: i64) -> Result<Self, ClassifyError> {
        let [alpha, beta, gamma] = alpha_beta_gamma(a, n)?;
        let [delta2, delta1, delta0] = delta_from_abg(&alpha, &beta, &gamma);
        Ok(OmegaQuadratic { n, alpha, beta, gamma, delta2, delta1, delta0 })
    }

    /// `delta2 w^2 + 2 delta1 w + delta0`.
    pub fn delta_at(&self, w: &Q) -> Q {
        &self.delta2 * w * w + qi(2) * &self.delta1 * w + &self.delta0
    }

    /// `alpha(w) gamma(w) - beta(w)^2`, evaluated directly.
    pub fn delta_direct(&self, w: &Q) -> Q {
        let b = self.beta.eval(w);
        self.alpha.eval(w) * self.gamma.eval(w) - &b * &b
    }

    /// `delta1^2 - delta2 delta0`.
    pub fn discriminant(&self) -> Q {
        &self.delta1 * &self.delta1 - &self.delta2 * &self.delta0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegeneracyKind {
    /// `alpha != 0`, `beta = gamma = 0`.
    C,
    /// `gamma != 0`, `alpha = beta = 0`.
    D,
}

impl fmt::Display for DegeneracyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegeneracyKind::C => write!(f, "C-degenerate"),
            DegeneracyKind::D => write!(f, "D-degenerate"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Degeneracy {
    pub kind: DegeneracyKind,
    pub omegas: OmegaSet,
}

/// Every degeneracy kind that occurs for some omega, with its exact omega set.
pub fn find_degeneracy(a: &CoeffVector, n: i64) -> Result<Vec<Degeneracy>, ClassifyError> {
    let qd = OmegaQuadratic::new(a, n)?;
    Ok(degeneracies(&qd))
}

fn degeneracies(qd: &OmegaQuadratic) -> Vec<Degeneracy> {
    let c = OmegaSet::All.and_zero(&qd.gamma).and_zero(&qd.beta).and_nonzero(&qd.alpha);
    let d = OmegaSet::All.and_zero(&qd.alpha).and_zero(&qd.beta).and_nonzero(&qd.gamma);
    let mut out = Vec::new();
    if c != OmegaSet::Empty {
        out.push(Degeneracy { kind: DegeneracyKind::C, omegas: c });
    }
    if d != OmegaSet::Empty {
        out.push(Degeneracy { kind: DegeneracyKind::D, omegas: d });
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionVerdict {
    pub quadratic: OmegaQuadratic,
    pub plus: bool,
    pub zero: bool,
    pub minus: bool,
    pub d: bool,
    /// An omega with `Delta(A, omega) > 0`, present whenever a flag is set.
    pub witness: Option<Q>,
    pub witness_delta: Option<Q>,
    pub degeneracy: Vec<Degeneracy>,
}

impl RegionVerdict {
    pub fn any(&self) -> bool {
        self.plus || self.zero || self.minus || self.d
    }

    pub fn regions(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (flag, name) in [(self.plus, "Omega+"), (self.zero, "Omega0"), (self.minus, "Omega-"), (self.d, "Omega_d")] {
            if flag {
                v.push(name);
            }
        }
        v
    }
}

pub fn classify_region(a: &CoeffVector, n: i64) -> Result<RegionVerdict, ClassifyError> {
    let qd = OmegaQuadratic::new(a, n)?;
    let (d2, d1, d0) = (&qd.delta2, &qd.delta1, &qd.delta0);
    let disc = qd.discriminant();
    let plus = d2.is_positive();
    let zero = d2.is_zero() && (!d1.is_zero() || d0.is_positive());
    let minus = d2.is_negative() && disc.is_positive();
    let d = disc.is_positive();
    let witness = if plus {
        Some(plus_witness(&qd))
    } else if zero {
        Some(zero_witness(&qd))
    } else if minus || d {
        Some(concave_witness(&qd))
    } else {
        None
    };
    let witness_delta = witness.as_ref().map(|w| qd.delta_at(w));
    let degeneracy = degeneracies(&qd);
    Ok(RegionVerdict { quadratic: qd, plus, zero, minus, d, witness, witness_delta, degeneracy })
}

/// Smallest nonnegative integer beyond which `Delta` stays positive.
fn plus_witness(qd: &OmegaQuadratic) -> Q {
    let vertex = -&qd.delta1 / &qd.delta2;
    let start = if vertex.is_positive() { vertex.ceil().to_integer() } else { BigInt::zero() };
    first_positive_integer(qd, start, BigInt::one())
}

/// `Delta` is affine (or constant) here.
fn zero_witness(qd: &OmegaQuadratic) -> Q {
    if qd.delta1.is_zero() || qd.delta0.is_positive() {
        return Q::zero();
    }
    let sign = if qd.delta1.is_positive() { BigInt::one() } else { -BigInt::one() };
    first_positive_integer(qd, BigInt::zero(), sign)
}

/// First integer `start + k*dir`, `k >= 0`, with `Delta > 0`, assuming `Delta`
/// is increasing along `dir` from `start` on.
fn first_positive_integer(qd: &OmegaQuadratic, start: BigInt, dir: BigInt) -> Q {
    let at = |k: &BigInt| qd.delta_at(&Q::from_integer(&start + k * &dir));
    if at(&BigInt::zero()).is_positive() {
        return Q::from_integer(start);
    }
    let mut hi = BigInt::one();
    while !at(&hi).is_positive() {
        hi *= 2;
    }
    let mut lo = &hi / 2;
    // Invariant: at(lo) <= 0 < at(hi).
    while &hi - &lo > BigInt::one() {
        let mid: BigInt = (&lo + &hi) / 2;
        if at(&mid).is_positive() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Q::from_integer(start + hi * dir)
}

/// Smallest-magnitude integer with `Delta > 0` when one lies between the
/// roots, otherwise the vertex.
fn concave_witness(qd: &OmegaQuadratic) -> Q {
    if qd.delta2.is_positive() {
        return plus_witness(qd);
    }
    if qd.delta2.is_zero() {
        return zero_witness(qd);
    }
    let zero = Q::zero();
    if qd.delta_at(&zero).is_positive() {
        return zero;
    }
    let vertex = -&qd.delta1 / &qd.delta2;
    // Delta increases from 0 towards the vertex.
    let (near, dir) = if vertex.is_positive() {
        (vertex.floor().to_integer(), BigInt::one())
    } else {
        (vertex.ceil().to_integer(), -BigInt::one())
    };
    let candidate = |k: &BigInt| qd.delta_at(&Q::from_integer(k * &dir)).is_positive();
    let steps = &near * &dir;
    if candidate(&steps) {
        let (mut lo, mut hi) = (BigInt::zero(), steps);
        while &hi - &lo > BigInt::one() {
            let mid: BigInt = (&lo + &hi) / 2;
            if candidate(&mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return Q::from_integer(hi * dir);
    }
    let beyond = &steps + BigInt::one();
    if candidate(&beyond) {
        return Q::from_integer(beyond * dir);
    }
    vertex
}

/// `|(a c2 + 2 b cd + g d2) - [a |C + (b/a) D|^2 + (Delta/a) |D|^2]|`.
pub fn completed_square_residual<T>(a: &T, b: &T, g: &T, c2: &T, cd: &T, d2: &T) -> Result<T, ClassifyError>
where
    T: Clone + Signed,
{
    if a.is_zero() {
        return Err(ClassifyError::AlphaZero);
    }
    let two = T::one() + T::one();
    let a = a.clone();
    let ratio = b.clone() / a.clone();
    let direct = a.clone() * c2.clone() + two.clone() * b.clone() * cd.clone() + g.clone() * d2.clone();
    let square = c2.clone() + two * ratio.clone() * cd.clone() + ratio.clone() * ratio * d2.clone();
    let delta = a.clone() * g.clone() - b.clone() * b.clone();
    let completed = a.clone() * square + delta / a * d2.clone();
    Ok((direct - completed).abs())
}

/// Coefficient vectors discussed as applications of the classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecialCase {
    WRicRic,
    DivWGradRic,
    BachRic,
    BachGradfGradf,
    Div4W,
    ModifiedBach,
    Mix1,
    Mix2,
}

impl SpecialCase {
    pub const ALL: [SpecialCase; 8] = [
        SpecialCase::WRicRic,
        SpecialCase::DivWGradRic,
        SpecialCase::BachRic,
        SpecialCase::BachGradfGradf,
        SpecialCase::Div4W,
        SpecialCase::ModifiedBach,
        SpecialCase::Mix1,
        SpecialCase::Mix2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpecialCase::WRicRic => "w-ric-ric",
            SpecialCase::DivWGradRic => "divW-gradRic",
            SpecialCase::BachRic => "bach-ric",
            SpecialCase::BachGradfGradf => "bach-gradf-gradf",
            SpecialCase::Div4W => "div4W",
            SpecialCase::ModifiedBach => "modified-bach",
            SpecialCase::Mix1 => "mix1",
            SpecialCase::Mix2 => "mix2",
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            SpecialCase::ModifiedBach => 2,
            SpecialCase::Mix1 => 7,
            SpecialCase::Mix2 => 6,
            _ => 0,
        }
    }
}

impl FromStr for SpecialCase {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SpecialCase::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ClassifyError::UnknownCase(s.to_string()))
    }
}

impl fmt::Display for SpecialCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The coefficient vector of a named case; parameters are `c1, c2, ...`.
pub fn build_special_case(case: SpecialCase, params: &[Q], n: i64) -> Result<CoeffVector, ClassifyError> {
    let nq = check_dim(n)?;
    if params.len() != case.param_count() {
        return Err(ClassifyError::ParamCount { case: case.name(), expected: case.param_count(), got: params.len() });
    }
    let (n2, n3) = (&nq - qi(2), &nq - qi(3));
    let inv = |x: &Q| Q::one() / x;
    let z = Q::zero;
    let c = |i: usize| params[i - 1].clone();
    let v = match case {
        SpecialCase::WRicRic => [Q::one(), z(), z(), z(), z(), z()],
        SpecialCase::DivWGradRic => [z(), z(), z(), Q::one(), z(), z()],
        SpecialCase::BachRic => [inv(&n2), z(), z(), z(), inv(&n3), z()],
        SpecialCase::BachGradfGradf => [z(), -inv(&n2), inv(&n3), z(), z(), z()],
        SpecialCase::Div4W => [z(), z(), z(), z(), z(), Q::one()],
        SpecialCase::ModifiedBach => [inv(&n2), z(), -c(2), z(), c(1), z()],
        SpecialCase::Mix1 => [
            inv(&n2),
            -c(7),
            c(6) / &n2 - c(5),
            -(&n2 / &n3) * c(6) - c(4),
            inv(&n3),
            c(1),
        ],
        SpecialCase::Mix2 => {
            if n != 4 {
                return Err(ClassifyError::Mix2Dimension);
            }
            [q(1, 2), z(), z(), -c(2) - c(5), -c(4) - c(6), c(1)]
        }
    };
    Ok(CoeffVector(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(v: [(i64, i64); 6]) -> CoeffVector {
        CoeffVector(v.map(|(a, b)| q(a, b)))
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("-2/6").unwrap(), q(-1, 3));
        assert_eq!(parse_rational("0.125").unwrap(), q(1, 8));
        assert_eq!(parse_rational("1e-2").unwrap(), q(1, 100));
        assert_eq!(parse_rational("+3").unwrap(), q(3, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
        assert_eq!(CoeffVector::parse_list("1,0,0,0,0,0").unwrap(), CoeffVector::from_ints([1, 0, 0, 0, 0, 0]));
        assert!(CoeffVector::parse_list("1,0").is_err());
    }

    #[test]
    fn w_ric_ric_row() {
        let a = CoeffVector::from_ints([1, 0, 0, 0, 0, 0]);
        let [al, be, ga] = alpha_beta_gamma(&a, 4).unwrap();
        assert_eq!(al, Affine::new(q(1, 2), q(0, 1)));
        assert_eq!(be, Affine::new(q(0, 1), q(-1, 2)));
        assert_eq!(ga, Affine::new(q(0, 1), q(1, 1)));
        let v = classify_region(&a, 4).unwrap();
        assert!(v.minus && v.d && !v.plus && !v.zero);
        assert_eq!(v.witness, Some(q(1, 1)));
        assert_eq!(v.witness_delta, Some(q(1, 4)));
    }

    #[test]
    fn rejects_small_dimension() {
        assert_eq!(classify_region(&CoeffVector::zero(), 3).unwrap_err(), ClassifyError::Dimension(3));
    }

    #[test]
    fn zero_vector_has_nothing() {
        let v = classify_region(&CoeffVector::zero(), 5).unwrap();
        assert!(!v.any());
        assert!(v.witness.is_none());
        assert!(v.degeneracy.is_empty());
        assert_eq!(delta_coeffs(&CoeffVector::zero(), 6).unwrap(), [q(0, 1), q(0, 1), q(0, 1)]);
    }

    #[test]
    fn degeneracies_from_table() {
        let d = find_degeneracy(&CoeffVector::from_ints([0, 0, 0, 1, 0, 0]), 6).unwrap();
        assert_eq!(d, vec![Degeneracy { kind: DegeneracyKind::C, omegas: OmegaSet::All }]);
        let b = build_special_case(SpecialCase::BachGradfGradf, &[], 5).unwrap();
        let [al, be, ga] = alpha_beta_gamma(&b, 5).unwrap();
        assert!(al.zero_set() == OmegaSet::All && be.zero_set() == OmegaSet::All);
        assert_eq!(ga, Affine::new(q(-1, 2), q(0, 1)));
        let br = build_special_case(SpecialCase::BachRic, &[], 4).unwrap();
        let d = find_degeneracy(&br, 4).unwrap();
        assert_eq!(d, vec![Degeneracy { kind: DegeneracyKind::D, omegas: OmegaSet::AllExcept(q(0, 1)) }]);
        assert!(find_degeneracy(&br, 5).unwrap().is_empty());
        let div4 = find_degeneracy(&CoeffVector::from_ints([0, 0, 0, 0, 0, 1]), 4).unwrap();
        assert_eq!(div4, vec![Degeneracy { kind: DegeneracyKind::C, omegas: OmegaSet::AllExcept(q(0, 1)) }]);
    }

    #[test]
    fn single_point_degeneracy() {
        // gamma vanishes only at omega = -A20/A10.
        let a = cv([(2, 1), (1, 1), (0, 1), (0, 1), (0, 1), (0, 1)]);
        let d = find_degeneracy(&a, 4).unwrap();
        let qd = OmegaQuadratic::new(&a, 4).unwrap();
        for deg in &d {
            if let OmegaSet::Single(w) = &deg.omegas {
                assert!(qd.gamma.eval(w).is_zero());
            }
        }
    }

    #[test]
    fn witnesses_are_positive() {
        let cases = [
            cv([(0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (1, 1)]),
            cv([(1, 3), (-5, 2), (7, 1), (1, 1), (-2, 1), (3, 1)]),
            cv([(1, 1), (1, 1), (0, 1), (0, 1), (0, 1), (0, 1)]),
            cv([(1, 100), (0, 1), (0, 1), (0, 1), (0, 1), (1000, 1)]),
        ];
        for a in cases {
            for n in 4..=8 {
                let v = classify_region(&a, n).unwrap();
                if v.any() {
                    let w = v.witness.clone().unwrap();
                    assert!(v.quadratic.delta_at(&w).is_positive(), "{a} n={n}");
                    assert_eq!(v.quadratic.delta_at(&w), v.quadratic.delta_direct(&w));
                }
                if v.plus {
                    let far = v.witness.clone().unwrap() + qi(1000);
                    assert!(v.quadratic.delta_at(&far).is_positive());
                }
            }
        }
    }

    #[test]
    fn narrow_interval_falls_back_to_vertex() {
        // Delta = -(w - 1/2)^2 + 1/100 has no integer in its positive interval.
        let qd = OmegaQuadratic {
            n: 4,
            alpha: Affine::new(q(0, 1), q(0, 1)),
            beta: Affine::new(q(0, 1), q(0, 1)),
            gamma: Affine::new(q(0, 1), q(0, 1)),
            delta2: q(-1, 1),
            delta1: q(1, 2),
            delta0: q(-24, 100),
        };
        let w = concave_witness(&qd);
        assert_eq!(w, q(1, 2));
        assert!(qd.delta_at(&w).is_positive());
    }

    #[test]
    fn completing_the_square() {
        let r = completed_square_residual(&q(2, 1), &q(3, 1), &q(5, 1), &q(1, 1), &q(1, 1), &q(1, 1)).unwrap();
        assert!(r.is_zero());
        let f = completed_square_residual(&1.0, &0.0, &1.0, &0.3, &-0.1, &0.7).unwrap();
        assert!(f < 1e-15);
        assert_eq!(completed_square_residual(&0.0, &1.0, &1.0, &1.0, &0.0, &1.0), Err(ClassifyError::AlphaZero));
    }

    #[test]
    fn special_case_builders() {
        assert_eq!(SpecialCase::from_str("bach-gradf-gradf").unwrap(), SpecialCase::BachGradfGradf);
        assert!(SpecialCase::from_str("nope").is_err());
        assert!(build_special_case(SpecialCase::Mix2, &vec![q(0, 1); 6], 5).is_err());
        assert!(build_special_case(SpecialCase::Mix1, &vec![q(0, 1); 3], 5).is_err());
        let div4 = build_special_case(SpecialCase::Div4W, &[], 6).unwrap();
        let [al, _, _] = alpha_beta_gamma(&div4, 6).unwrap();
        assert_eq!(al, Affine::new(q(0, 1), q(3, 8)));
    }
}
