//! Command-line front end: argument definitions and the three commands.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::classify::{self, Affine, ClassifyError, CoeffVector, SpecialCase, Q};
use crate::expr::Expr;
use crate::integrate::GridSpec;
use crate::report::{CheckRecord, Report, EXIT_USAGE};
use crate::scalars::{self, GeneralScalarCoeffs, SCALAR_NAMES};
use crate::soliton::SolitonStructure;
use crate::suite::{self, Suite, SuiteError, SuiteOptions};
use crate::zoo::{self, ZooEntry, ZooParams};

#[derive(Debug, Parser)]
#[command(name = "weylcheck", version, about = "Curvature, Weyl scalar and integral identity checks for gradient Ricci solitons")]
pub struct Cli {
    /// Worker threads for quadrature; all cores by default.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a six-entry coefficient vector or a named case.
    Classify(ClassifyArgs),
    /// Run verification suites on a built-in manifold or a manifest.
    Verify(VerifyArgs),
    /// Print the ten Weyl scalars at a point.
    Scalars(ScalarsArgs),
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub dim: i64,
    /// `A10,A20,A11,A21,A12,A14`, as integers, fractions or decimals.
    #[arg(long, conflicts_with = "case", allow_hyphen_values = true)]
    pub coeffs: Option<String>,
    /// Print exact rationals instead of decimals.
    #[arg(long)]
    pub rational: bool,
    #[arg(long)]
    pub case: Option<String>,
    /// Parameters `c1,c2,...` of the named case.
    #[arg(long, requires = "case", allow_hyphen_values = true)]
    pub params: Option<String>,
}

#[derive(Debug, Args)]
pub struct Subject {
    /// Built-in manifold, one of the zoo names.
    #[arg(long, conflicts_with = "manifest")]
    pub manifold: Option<String>,
    /// Manifest file describing a chart.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Seed of the perturbed torus.
    #[arg(long = "torus-seed", default_value_t = 7)]
    pub torus_seed: u64,
    #[arg(long, default_value_t = zoo::DEFAULT_AMPLITUDE)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Geometry,
    Soliton,
    Pointwise,
    Integrals,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub subject: Subject,
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    pub suite: SuiteArg,
    /// Exponential weight rates, comma-separated; `1/2,1,2` by default.
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub points: usize,
    /// Node counts per axis, e.g. `4,3,_,_@12~0.1`; the manifold's recommendation by default.
    #[arg(long)]
    pub grid: Option<String>,
    /// Seed for sample points and random coefficient vectors. For the
    /// perturbed torus this also seeds the metric unless `--torus-seed` is given.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Random coefficient vectors for the general Weyl scalar integral.
    #[arg(long = "wg-count", default_value_t = 20)]
    pub wg_count: usize,
    /// Skip the weighted identities with a non-exponential weight.
    #[arg(long = "no-general-weight")]
    pub no_general_weight: bool,
}

#[derive(Debug, Args)]
pub struct ScalarsArgs {
    #[command(flatten)]
    pub subject: Subject,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    /// Ten coefficients in the order w01,w02,w03,w04,w11,w12,w21,w22,w31,w41.
    #[arg(long, allow_hyphen_values = true)]
    pub coeffs10: Option<String>,
}

/// Output text and exit code of one invocation.
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            return if code == 0 { Outcome { stdout: text, stderr: String::new(), code } } else { Outcome { stdout: String::new(), stderr: text, code } };
        }
    };
    if let Some(t) = cli.threads {
        // Fails only if the pool already exists, as in repeated in-process calls.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let echo: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match &cli.command {
        Command::Classify(a) => cmd_classify(a, echo),
        Command::Verify(a) => cmd_verify(a, echo),
        Command::Scalars(a) => cmd_scalars(a, echo),
    };
    match result {
        Ok(report) => {
            let stdout = match cli.format {
                Format::Table => report.to_table(),
                Format::Json => report.to_json() + "\n",
                Format::Csv => match report.to_csv() {
                    Ok(s) => s,
                    Err(e) => return Outcome { stdout: String::new(), stderr: format!("error: {e}\n"), code: EXIT_USAGE },
                },
            };
            Outcome { stdout, stderr: String::new(), code: report.exit_code() }
        }
        Err(e) => Outcome { stdout: String::new(), stderr: format!("error: {e}\n"), code: e.exit_code() },
    }
}

fn show_affine(p: &Affine, rational: bool) -> String {
    let (c, s) = (show(&p.constant, rational), show(&p.slope, rational));
    match (p.constant.is_zero(), p.slope.is_zero()) {
        (_, true) => c,
        (true, false) => format!("{s} w"),
        _ if p.slope.is_negative() => format!("{c} - {} w", show(&-&p.slope, rational)),
        _ => format!("{c} + {s} w"),
    }
}

fn show(x: &Q, rational: bool) -> String {
    if rational {
        x.to_string()
    } else {
        format!("{}", x.to_f64().unwrap_or(f64::NAN))
    }
}

fn parse_list(text: &str) -> Result<Vec<Q>, ClassifyError> {
    text.split(',').map(|t| classify::parse_rational(t.trim())).collect()
}

#[derive(Serialize)]
struct DeltaRow {
    name: &'static str,
    normative: String,
    transcribed: String,
    mismatch: bool,
}

fn cmd_classify(a: &ClassifyArgs, echo: Vec<String>) -> Result<Report, SuiteError> {
    let n = a.dim;
    let (vector, subject) = match (&a.coeffs, &a.case) {
        (Some(c), None) => (CoeffVector::parse_list(c)?, "coefficients".to_string()),
        (None, Some(name)) => {
            let case: SpecialCase = name.parse()?;
            let params = match &a.params {
                Some(p) => parse_list(p)?,
                None => Vec::new(),
            };
            (classify::build_special_case(case, &params, n)?, format!("case {case}"))
        }
        _ => return Err(ClassifyError::Length { expected: 6, got: 0 }.into()),
    };
    let r = a.rational;
    let verdict = classify::classify_region(&vector, n)?;
    let qd = &verdict.quadratic;
    let transcribed = classify::delta_coeffs_transcribed(&vector, n)?;
    let mut report = Report::new(echo, Some(format!("{subject}, n = {n}")));
    report.detail("A", vector.0.iter().map(|x| show(x, r)).collect::<Vec<_>>());
    for (name, p) in [("alpha", &qd.alpha), ("beta", &qd.beta), ("gamma", &qd.gamma)] {
        report.detail(name, show_affine(p, r));
    }
    let normative = [&qd.delta2, &qd.delta1, &qd.delta0];
    let rows: Vec<DeltaRow> = ["delta2", "delta1", "delta0"]
        .into_iter()
        .zip(normative.iter().zip(&transcribed))
        .map(|(name, (x, y))| DeltaRow { name, normative: show(x, r), transcribed: show(y, r), mismatch: *x != y })
        .collect();
    report.detail("deltas", rows);
    let regions = verdict.regions();
    report.detail("regions", if regions.is_empty() { "none".to_string() } else { regions.join(", ") });
    report.detail(
        "degeneracy",
        verdict.degeneracy.iter().map(|d| format!("{} for {}", d.kind, d.omegas)).collect::<Vec<_>>(),
    );
    if let (Some(w), Some(dw)) = (&verdict.witness, &verdict.witness_delta) {
        report.detail("witness", format!("w = {}, Delta = {}", show(w, r), show(dw, r)));
        // Recomputed from alpha, beta, gamma rather than the delta coefficients.
        let direct = qd.delta_direct(w);
        let value = direct.to_f64().unwrap_or(f64::NAN);
        let mut rec = CheckRecord::at_least("classify", "Delta(witness) > 0", "region classification", None, value, 0.0);
        rec.pass = direct.is_positive() && direct == *dw;
        report.push(rec);
    }
    for (k, name) in ["delta2", "delta1", "delta0"].into_iter().enumerate() {
        let (x, y) = (normative[k].to_f64().unwrap_or(f64::NAN), transcribed[k].to_f64().unwrap_or(f64::NAN));
        let c = crate::check::Comparison { lhs: x, rhs: y, residual: if normative[k] == &transcribed[k] { 0.0 } else { (x - y).abs().max(f64::MIN_POSITIVE) }, scale: 1.0 };
        let rec = CheckRecord::new("classify", format!("{name} expansion = transcription"), "delta coefficients", None, c, 0.0);
        // A delta1 mismatch is reported, not failed.
        report.push(if k == 1 { rec.informational() } else { rec });
    }
    Ok(report)
}

fn subject_entry(s: &Subject, seed: u64) -> Result<ZooEntry, SuiteError> {
    match (&s.manifold, &s.manifest) {
        (_, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| zoo::ZooError::Manifest { line: 0, message: format!("{}: {e}", path.display()) })?;
            Ok(zoo::parse_manifest(&text)?)
        }
        (Some(name), None) => {
            let p = ZooParams { dim: s.dim, seed, amplitude: s.amplitude, radius: s.radius, lambda: s.lambda };
            Ok(zoo::make(name, &p)?)
        }
        (None, None) => Err(zoo::ZooError::Parameter("give --manifold or --manifest".into()).into()),
    }
}

fn cmd_verify(a: &VerifyArgs, echo: Vec<String>) -> Result<Report, SuiteError> {
    let explicit_torus_seed = echo.iter().any(|x| x == "--torus-seed" || x.starts_with("--torus-seed="));
    let torus_seed = if explicit_torus_seed { a.subject.torus_seed } else { a.seed };
    let entry = subject_entry(&a.subject, torus_seed)?;
    let suites: Vec<Suite> = match a.suite {
        SuiteArg::Geometry => vec![Suite::Geometry],
        SuiteArg::Soliton => vec![Suite::Soliton],
        SuiteArg::Pointwise => vec![Suite::Pointwise],
        SuiteArg::Integrals => vec![Suite::Integrals],
        SuiteArg::All if entry.potential.is_some() => Suite::ALL.to_vec(),
        SuiteArg::All => vec![Suite::Geometry],
    };
    let omegas = match &a.omega {
        Some(text) => parse_list(text)?.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect(),
        None => SuiteOptions::default().omegas,
    };
    let grid = match &a.grid {
        Some(g) => Some(g.parse::<GridSpec>()?),
        None => None,
    };
    let opts = SuiteOptions { points: a.points, seed: a.seed, omegas, grid, wg_count: a.wg_count, general_weight: !a.no_general_weight };
    let mut report = Report::new(echo, Some(format!("{} (n = {})", entry.name, entry.dim())));
    report.detail("flags", entry.flags);
    suite::run(&entry, &suites, &opts, &mut report)?;
    Ok(report)
}

#[derive(Serialize)]
struct ScalarRow {
    name: &'static str,
    f_form: f64,
    ricci_form: f64,
}

fn cmd_scalars(a: &ScalarsArgs, echo: Vec<String>) -> Result<Report, SuiteError> {
    let entry = subject_entry(&a.subject, a.subject.torus_seed)?;
    let point: Vec<f64> = a
        .point
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| ClassifyError::Parse(t.to_string())))
        .collect::<Result<_, _>>()?;
    if point.len() != entry.dim() {
        return Err(ClassifyError::Length { expected: entry.dim(), got: point.len() }.into());
    }
    let s = match &entry.potential {
        Some(_) => entry.structure()?,
        None => SolitonStructure::new(entry.chart.clone(), Expr::zero(), 0.0)?,
    };
    let sample = scalars::weyl_scalars(&s, &point)?;
    let mut report = Report::new(echo, Some(format!("{} (n = {})", entry.name, entry.dim())));
    if entry.potential.is_none() {
        report.detail("potential", "none; f = 0 and lambda = 0");
    }
    let rows: Vec<ScalarRow> = (0..10).map(|k| ScalarRow { name: SCALAR_NAMES[k], f_form: sample.f_form[k], ricci_form: sample.ricci_form[k] }).collect();
    for row in &rows {
        report.detail(row.name, format!("f-form {:.12e}, Ricci form {:.12e}", row.f_form, row.ricci_form));
    }
    if let Some(text) = &a.coeffs10 {
        let c = GeneralScalarCoeffs::parse_list(text)?;
        let w = c.to_f64();
        report.detail("w_G", format!("f-form {:.12e}, Ricci form {:.12e}", scalars::dot(&w, &sample.f_form), scalars::dot(&w, &sample.ricci_form)));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{EXIT_DOMAIN, EXIT_PASS};

    fn go(args: &[&str]) -> Outcome {
        run(std::iter::once("weylcheck").chain(args.iter().copied()))
    }

    #[test]
    fn classify_first_row() {
        let o = go(&["classify", "--dim", "4", "--coeffs", "1,0,0,0,0,0", "--rational"]);
        assert_eq!(o.code, EXIT_PASS, "{}", o.stderr);
        assert!(o.stdout.contains("Omega-"));
        assert!(o.stdout.contains("witness: w = 1,"));
    }

    #[test]
    fn classify_named_case() {
        let o = go(&["--format", "json", "classify", "--dim", "4", "--case", "bach-gradf-gradf", "--rational"]);
        assert_eq!(o.code, EXIT_PASS, "{}", o.stderr);
        let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
        assert_eq!(v["details"]["gamma"], "-1/2");
        assert!(v["details"]["degeneracy"][0].as_str().unwrap().starts_with("D-degenerate"));
    }

    #[test]
    fn classify_errors() {
        assert_eq!(go(&["classify", "--dim", "3", "--coeffs", "1,0,0,0,0,0"]).code, EXIT_DOMAIN);
        assert_eq!(go(&["classify", "--dim", "4", "--coeffs", "1,x,0,0,0,0"]).code, EXIT_USAGE);
        assert_eq!(go(&["classify", "--dim", "4", "--case", "nope"]).code, EXIT_USAGE);
        assert_eq!(go(&["classify"]).code, EXIT_USAGE);
    }

    #[test]
    fn verify_exit_codes() {
        let o = go(&["verify", "--manifold", "perturbed-torus", "--suite", "soliton"]);
        assert_eq!(o.code, EXIT_DOMAIN);
        let o = go(&["verify", "--manifold", "klein-bottle"]);
        assert_eq!(o.code, EXIT_USAGE);
        let o = go(&["verify", "--manifold", "gaussian", "--suite", "soliton", "--points", "2"]);
        assert_eq!(o.code, EXIT_PASS, "{}{}", o.stdout, o.stderr);
    }

    #[test]
    fn scalars_command() {
        let o = go(&["scalars", "--manifold", "s2xr2", "--point", "1.0,0.3,0.8,-0.4", "--coeffs10", "0,1,0,0,0,0,0,0,0,0"]);
        assert_eq!(o.code, EXIT_PASS, "{}", o.stderr);
        assert!(o.stdout.contains("w_G: f-form"));
        let o = go(&["scalars", "--manifold", "s2xr2", "--point", "0.01,0.3,0.8,-0.4"]);
        assert_eq!(o.code, EXIT_DOMAIN);
    }
}
