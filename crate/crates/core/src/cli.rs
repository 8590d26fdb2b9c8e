//! Command-line front end: argument parsing, dispatch to the library and
//! JSON-lines or CSV emission.
//!
//! Every result is one [`OutputRecord`]. Floating values are written with 17
//! significant digits so that re-parsing recovers the exact doubles. Exit
//! statuses: 0 success, 2 domain or precondition error, 3 non-convergence or a
//! failed validation criterion, 64 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::apery::{
    apery_ab_delta, apery_ab_delta_exact, apery_ab_flat, apery_ab_flat_exact, apery_classic, beukers_residual,
    delta_zeta_sum, flat_zeta_sum, j_delta, j_flat, parse_rational, rational_to_f64, Delta, DeltaMethod, FlatMethod,
    MAX_BEUKERS_N,
};
use crate::error::{Error, Result};
use crate::operator_oracle::{ModelSpec, DEFAULT_N};
use crate::quadrature::QuadratureSpec;
use crate::specfun::C64;
use crate::trace_terms::{dn_r_m_integral, family_operator, r_1_series, R1Family, TraceFamily};
use crate::validation::{run_criterion, criteria, Suite, DEFAULT_SEED};
use crate::zeta_values::{confluence_scan, parity_difference, zeta_value, ZetaMethod, ZetaRequest, DEFAULT_MAX_M};

/// Exit status for usage errors.
pub const EXIT_USAGE: i32 = 64;

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "RABI_ZETA_THREADS";

/// Real and imaginary part of an output value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexOut {
    /// Real part.
    pub re: f64,
    /// Imaginary part.
    pub im: f64,
}

impl From<C64> for ComplexOut {
    fn from(z: C64) -> Self {
        ComplexOut { re: z.re, im: z.im }
    }
}

/// One emitted result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Subcommand name.
    pub command: String,
    /// Input parameters.
    pub params: BTreeMap<String, Value>,
    /// Headline value.
    pub value: ComplexOut,
    /// Error estimate of `value`.
    pub abs_error: f64,
    /// Evaluation route.
    pub method: String,
    /// Truncation and discretisation settings.
    pub truncations: BTreeMap<String, Value>,
    /// Per-m coupling terms of a zeta value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_m_terms: Option<Vec<ComplexOut>>,
    /// Command-specific fields (exact strings, pass/fail flags, warnings).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
    /// Wall-clock time; 0 unless `--timing` is given.
    pub runtime_ms: u64,
    /// Version of this library.
    pub library_version: String,
    /// Seed of randomised steps, when any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
}

impl OutputRecord {
    fn new(command: &str, method: &str, value: C64, abs_error: f64) -> Self {
        OutputRecord {
            command: command.to_string(),
            params: BTreeMap::new(),
            value: value.into(),
            abs_error,
            method: method.to_string(),
            truncations: BTreeMap::new(),
            per_m_terms: None,
            extra: BTreeMap::new(),
            runtime_ms: 0,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            rng_seed: None,
        }
    }

    fn param(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), v.into());
        self
    }

    fn trunc(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.truncations.insert(key.to_string(), v.into());
        self
    }

    fn extra(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.extra.insert(key.to_string(), v.into());
        self
    }

    /// JSON object on one line with every float at 17 significant digits.
    pub fn to_json_line(&self) -> String {
        let v = serde_json::to_value(self).unwrap_or(Value::Null);
        let mut out = String::new();
        write_value(&v, &mut out);
        out
    }
}

/// Formats a double with 17 significant digits as a JSON number.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Number(n) if n.is_f64() => out.push_str(&format_f64(n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(x, out);
            }
            out.push(']');
        }
        Value::Object(o) => {
            out.push('{');
            for (i, (k, x)) in o.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(x, out);
            }
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Floats become JSON numbers that [`write_value`] prints at full precision.
fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn complex_value(z: C64) -> Value {
    json!({ "re": num(z.re), "im": num(z.im) })
}

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// One JSON object per line.
    Json,
    /// Flat CSV projection with a header row.
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "rabi-zeta", version, about = "Spectral zeta values of Rabi-type Hamiltonians and Apéry-like numbers")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Worker threads (falls back to RABI_ZETA_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Record wall-clock runtimes (otherwise runtime_ms is 0 and output is reproducible byte for byte).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectral zeta value ζ(H; n, λ).
    Zeta(ZetaArgs),
    /// Trace term ∂ⁿR_m of one family.
    TraceTerm(TraceArgs),
    /// Apéry-like coefficients A, B and the integral J.
    Apery(AperyArgs),
    /// Beukers identity residuals for n = 0..=n_max.
    Beukers(BeukersArgs),
    /// Bergman-to-Fock confluence scan.
    Confluence(ConfluenceArgs),
    /// Run the acceptance criteria.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelName {
    /// One-photon Rabi model.
    #[value(name = "1pqrm")]
    OnePhoton,
    /// Two-photon Rabi model.
    #[value(name = "2pqrm")]
    TwoPhoton,
    /// Single weighted-Bergman block (needs --nu).
    Bergman,
    /// Non-commutative harmonic oscillator (needs --alpha, --beta).
    Ncho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodName {
    SeriesIntegral,
    SeriesOperator,
    EigenOracle,
}

impl From<MethodName> for ZetaMethod {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::SeriesIntegral => ZetaMethod::SeriesIntegral,
            MethodName::SeriesOperator => ZetaMethod::SeriesOperator,
            MethodName::EigenOracle => ZetaMethod::EigenOracle,
        }
    }
}

/// Parses `RE` or `RE,IM`.
fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{s}' is not RE or RE,IM"));
    match s.split_once(',') {
        Some((re, im)) => Ok(C64::new(parse(re)?, parse(im)?)),
        None => Ok(C64::new(parse(s)?, 0.0)),
    }
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Hamiltonian.
    #[arg(long, value_enum)]
    model: ModelName,
    /// Coupling g.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    g: f64,
    /// Level splitting Δ.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta: f64,
    /// Bias ε.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    eps: f64,
    /// Bergman weight ν.
    #[arg(long)]
    nu: Option<f64>,
    /// Oscillator parameter α.
    #[arg(long)]
    alpha: Option<f64>,
    /// Oscillator parameter β.
    #[arg(long)]
    beta: Option<f64>,
    /// Oscillator parameter η.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    eta: f64,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Domain(format!("--{name} is required for this model")));
        let (g, delta, eps) = (self.g, self.delta, self.eps);
        let spec = match self.model {
            ModelName::OnePhoton => ModelSpec::OnePhoton { g, delta, eps },
            ModelName::TwoPhoton => ModelSpec::TwoPhoton { g, delta, eps },
            ModelName::Bergman => ModelSpec::BergmanNu { nu: need(self.nu, "nu")?, g, delta, eps },
            ModelName::Ncho => {
                ModelSpec::Ncho { alpha: need(self.alpha, "alpha")?, beta: need(self.beta, "beta")?, eta: self.eta }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
struct ZetaArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Order n ≥ 2.
    #[arg(long)]
    n: u32,
    /// Shift λ as RE or RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    lambda: C64,
    /// Evaluation route (default depends on λ).
    #[arg(long, value_enum)]
    method: Option<MethodName>,
    /// Cap on the number of coupling terms.
    #[arg(long, default_value_t = DEFAULT_MAX_M)]
    max_m: usize,
    /// Target for the discarded coupling tail.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Operator and eigenvalue truncation N.
    #[arg(long, default_value_t = DEFAULT_N)]
    trunc_n: usize,
    /// Even-minus-odd sector difference (two-photon model and oscillator).
    #[arg(long)]
    parity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyName {
    Flat,
    Plus,
    Minus,
    Nu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceMethod {
    /// Tensor quadrature of the integral representation.
    Integral,
    /// Truncated operators.
    Operator,
    /// Coupling series in Beukers-type integrals (m = 1, no derivative).
    Series,
}

#[derive(Debug, Args)]
struct TraceArgs {
    /// Trace family.
    #[arg(long, value_enum)]
    family: FamilyName,
    /// Bergman weight for --family nu.
    #[arg(long)]
    nu: Option<f64>,
    /// Trace power m.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// λ-derivative order.
    #[arg(long, default_value_t = 0)]
    deriv: usize,
    /// Shift λ as RE or RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    lambda: C64,
    /// Coupling g.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    g: f64,
    /// Bias ε as RE or RE,IM.
    #[arg(long, value_parser = parse_complex, default_value = "0", allow_hyphen_values = true)]
    eps: C64,
    /// Evaluation route.
    #[arg(long, value_enum, default_value = "operator")]
    method: TraceMethod,
    /// Operator truncation N.
    #[arg(long, default_value_t = DEFAULT_N)]
    trunc_n: usize,
    /// Tanh–sinh level for the integral route (default per dimension).
    #[arg(long)]
    level: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AperyName {
    Flat,
    Plus,
    Minus,
    Classic,
}

#[derive(Debug, Args)]
struct AperyArgs {
    /// Coefficient family.
    #[arg(long, value_enum)]
    family: AperyName,
    /// Order n (flat, plus, minus).
    #[arg(long)]
    n: Option<u32>,
    /// Largest n for the classic numbers.
    #[arg(long)]
    n_max: Option<usize>,
    /// λ as RE or RE,IM; with --exact a rational such as 3/2.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    lambda: String,
    /// ε in the same syntax as λ.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    eps: String,
    /// Exact rational arithmetic; A and B are printed as p/q strings.
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Args)]
struct BeukersArgs {
    /// Largest n.
    #[arg(long, default_value_t = 8)]
    n_max: u32,
}

#[derive(Debug, Args)]
struct ConfluenceArgs {
    /// One-photon coupling g.
    #[arg(long, allow_hyphen_values = true)]
    g: f64,
    /// One-photon Δ.
    #[arg(long, allow_hyphen_values = true)]
    delta: f64,
    /// One-photon ε.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    eps: f64,
    /// One-photon λ as RE or RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    lambda: C64,
    /// Order n ≥ 2.
    #[arg(long)]
    n: u32,
    /// Comma-separated Bergman weights.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    nu_list: Vec<f64>,
    /// Evaluation route.
    #[arg(long, value_enum, default_value = "series-operator")]
    method: MethodName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteName {
    Quick,
    Full,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Suite size.
    #[arg(long, value_enum, default_value = "quick")]
    suite: SuiteName,
    /// Seed of the random parameter draws.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

/// Records plus the exit status they imply.
struct Emission {
    records: Vec<OutputRecord>,
    status: i32,
}

impl From<Vec<OutputRecord>> for Emission {
    fn from(records: Vec<OutputRecord>) -> Self {
        Emission { records, status: 0 }
    }
}

fn zeta_cmd(a: &ZetaArgs) -> Result<Emission> {
    let model = a.model.spec()?;
    let mut req = ZetaRequest::new(model, a.n, a.lambda);
    if let Some(m) = a.method {
        req.method = m.into();
    }
    req.max_m = a.max_m;
    req.tol = a.tol;
    req.trunc_n = a.trunc_n;
    let r = if a.parity { parity_difference(&req)? } else { zeta_value(&req)? };
    let mut params = serde_json::to_value(model).unwrap_or(Value::Null);
    if let Value::Object(ref mut o) = params {
        o.insert("n".into(), a.n.into());
        o.insert("lambda".into(), complex_value(a.lambda));
        o.insert("parity".into(), a.parity.into());
    }
    let mut rec = OutputRecord::new(if a.parity { "zeta_parity" } else { "zeta" }, r.metadata.method.name(), r.value, r.abs_error)
        .trunc("max_m", a.max_m)
        .trunc("m_terms", r.metadata.m_terms)
        .trunc("tol", num(a.tol))
        .trunc("tail_bound", num(r.metadata.tail_bound))
        .trunc("trunc_n", r.metadata.trunc_n)
        .extra("base_term", complex_value(r.base_term))
        .extra("ratio", num(r.metadata.ratio))
        .extra("converged", r.metadata.converged)
        .extra("warnings", r.metadata.warnings.clone());
    if !r.metadata.quadrature.is_empty() {
        rec = rec.trunc("quadrature", r.metadata.quadrature.clone());
    }
    if let Value::Object(o) = params {
        rec.params = o.into_iter().collect();
    }
    rec.per_m_terms = Some(r.per_m_terms.iter().map(|&z| z.into()).collect());
    Ok(vec![rec].into())
}

fn trace_cmd(a: &TraceArgs) -> Result<Emission> {
    let family = match a.family {
        FamilyName::Flat => TraceFamily::Flat,
        FamilyName::Plus => TraceFamily::Plus,
        FamilyName::Minus => TraceFamily::Minus,
        FamilyName::Nu => TraceFamily::Nu(a.nu.ok_or_else(|| Error::Domain("--nu is required for --family nu".into()))?),
    };
    let (value, name, trunc) = match a.method {
        TraceMethod::Operator => {
            (family_operator(family, a.g, a.lambda, a.eps, a.m, a.deriv, a.trunc_n)?, "operator", json!({ "trunc_n": a.trunc_n }))
        }
        TraceMethod::Integral => {
            let spec = match a.level {
                Some(l) => QuadratureSpec::tanh_sinh(l),
                None => QuadratureSpec::default_for_dim(2 * a.m),
            };
            let v = dn_r_m_integral(family, a.lambda, a.g, a.eps, a.m, a.deriv, &spec)?;
            (v, "integral", serde_json::to_value(spec).unwrap_or(Value::Null))
        }
        TraceMethod::Series => {
            if a.m != 1 || a.deriv != 0 {
                return Err(Error::Domain("the series route covers m = 1 without derivatives".into()));
            }
            let f = match family {
                TraceFamily::Flat => R1Family::Flat,
                TraceFamily::Plus => R1Family::Delta(Delta::Plus),
                TraceFamily::Minus => R1Family::Delta(Delta::Minus),
                TraceFamily::Nu(_) => {
                    return Err(Error::Domain("the series route covers the flat, plus and minus families".into()))
                }
            };
            (r_1_series(f, a.lambda, a.g, a.eps, 1e-15)?, "series", json!({ "tol": num(1e-15) }))
        }
    };
    let mut rec = OutputRecord::new("trace-term", name, value.value, value.abs_error)
        .param("family", serde_json::to_value(family).unwrap_or(Value::Null))
        .param("m", a.m)
        .param("deriv", a.deriv)
        .param("lambda", complex_value(a.lambda))
        .param("g", num(a.g))
        .param("eps", complex_value(a.eps))
        .extra("converged", value.converged);
    if let Value::Object(o) = trunc {
        rec.truncations = o.into_iter().collect();
    }
    Ok(vec![rec].into())
}

fn apery_cmd(a: &AperyArgs) -> Result<Emission> {
    let delta = match a.family {
        AperyName::Classic => return classic_cmd(a),
        AperyName::Flat => None,
        AperyName::Plus => Some(Delta::Plus),
        AperyName::Minus => Some(Delta::Minus),
    };
    let n = a.n.ok_or_else(|| Error::Domain("--n is required for this family".into()))?;
    let family_name = format!("{:?}", a.family).to_lowercase();
    let (lambda, eps, mut exact_fields) = if a.exact {
        let (l, e) = (parse_rational(&a.lambda)?, parse_rational(&a.eps)?);
        let ab = match delta {
            None => apery_ab_flat_exact(n, &l, &e)?,
            Some(d) => apery_ab_delta_exact(n, d, &l, &e)?,
        };
        let fields = vec![("a_exact", ab.a.to_string()), ("b_exact", ab.b.to_string())];
        (C64::new(rational_to_f64(&l), 0.0), C64::new(rational_to_f64(&e), 0.0), fields)
    } else {
        let parse = |s: &str| parse_complex(s).map_err(Error::Domain);
        (parse(&a.lambda)?, parse(&a.eps)?, Vec::new())
    };
    let (ab, sum, j) = match delta {
        None => (
            apery_ab_flat(n, lambda, eps)?,
            flat_zeta_sum(lambda, eps)?,
            j_flat(n, lambda, eps, FlatMethod::Series, 1e-15)?,
        ),
        Some(d) => (
            apery_ab_delta(n, d, lambda, eps)?,
            delta_zeta_sum(n, d, lambda, eps)?,
            j_delta(n, d, lambda, eps, DeltaMethod::Series, 1e-15)?,
        ),
    };
    let mut rec = OutputRecord::new("apery", "series", j.value, j.abs_error)
        .param("family", family_name)
        .param("n", n)
        .param("lambda", a.lambda.clone())
        .param("eps", a.eps.clone())
        .param("exact", a.exact)
        .trunc("series_terms", j.terms_used)
        .extra("a", complex_value(ab.a))
        .extra("b", complex_value(ab.b))
        .extra("zeta_sum", complex_value(sum.value));
    for (k, v) in exact_fields.drain(..) {
        rec = rec.extra(k, v);
    }
    Ok(vec![rec].into())
}

fn classic_cmd(a: &AperyArgs) -> Result<Emission> {
    let n_max = a.n_max.or(a.n.map(|n| n as usize)).ok_or_else(|| Error::Domain("--n-max is required".into()))?;
    let ex = apery_classic(n_max)?;
    let a_last = crate::apery::rational_to_f64(&num_rational::BigRational::from_integer(ex.a_list[n_max].clone()));
    let ratio = crate::apery::rational_to_f64(
        &(ex.b_list[n_max].clone() / num_rational::BigRational::from_integer(ex.a_list[n_max].clone())),
    );
    let rec = OutputRecord::new("apery", "exact", C64::new(ratio, 0.0), 0.0)
        .param("family", "classic")
        .param("n_max", n_max)
        .extra("a", ex.a_list.iter().map(|x| x.to_string()).collect::<Vec<_>>())
        .extra("b", ex.b_list.iter().map(|x| x.to_string()).collect::<Vec<_>>())
        .extra("a_n_max", num(a_last))
        .extra("value_meaning", "B_n/A_n at n = n_max");
    Ok(vec![rec].into())
}

fn beukers_cmd(a: &BeukersArgs) -> Result<Emission> {
    if a.n_max > MAX_BEUKERS_N {
        return Err(Error::Domain(format!("--n-max must be at most {MAX_BEUKERS_N}")));
    }
    let mut out = Vec::new();
    for n in 0..=a.n_max {
        let residual = beukers_residual(n)?;
        let j = j_flat(n, C64::new(n as f64 + 1.0, 0.0), C64::new(0.0, 0.0), FlatMethod::Series, 1e-15)?;
        out.push(
            OutputRecord::new("beukers", "series", j.value, residual)
                .param("n", n)
                .extra("residual", num(residual)),
        );
    }
    Ok(out.into())
}

fn confluence_cmd(a: &ConfluenceArgs) -> Result<Emission> {
    let (reference, rows) = confluence_scan(a.g, a.delta, a.eps, a.lambda, a.n, &a.nu_list, a.method.into())?;
    let method = ZetaMethod::from(a.method).name();
    let base = |rec: OutputRecord| {
        rec.param("g", num(a.g))
            .param("delta", num(a.delta))
            .param("eps", num(a.eps))
            .param("lambda", complex_value(a.lambda))
            .param("n", a.n)
    };
    let mut out = vec![base(OutputRecord::new("confluence", method, reference.value, reference.abs_error))
        .param("nu", Value::Null)
        .extra("reference", true)];
    for r in rows {
        out.push(
            base(OutputRecord::new("confluence", method, r.value, 0.0))
                .param("nu", num(r.nu))
                .extra("deviation", num(r.deviation)),
        );
    }
    Ok(out.into())
}

fn validate_cmd(a: &ValidateArgs) -> Result<Emission> {
    let suite = match a.suite {
        SuiteName::Quick => Suite::Quick,
        SuiteName::Full => Suite::Full,
    };
    let mut out = Vec::new();
    let mut status = 0;
    for c in criteria() {
        let r = run_criterion(&c, suite, a.seed);
        eprintln!("{}", r.line());
        if !r.passed {
            status = 3;
        }
        let mut rec = OutputRecord::new("validate", "acceptance", C64::new(r.max_residual, 0.0), 0.0)
            .param("suite", format!("{:?}", a.suite).to_lowercase())
            .param("criterion", r.id)
            .param("name", r.name.clone())
            .extra("tolerance", num(r.tolerance))
            .extra("passed", r.passed)
            .extra("detail", r.detail.clone());
        rec.rng_seed = Some(a.seed);
        rec.runtime_ms = r.runtime_ms as u64;
        out.push(rec);
    }
    Ok(Emission { records: out, status })
}

fn write_csv(records: &[OutputRecord], w: &mut dyn Write) -> std::io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "command",
        "method",
        "value_re",
        "value_im",
        "abs_error",
        "runtime_ms",
        "library_version",
        "rng_seed",
        "params",
        "truncations",
        "extra",
    ])?;
    for r in records {
        let json_of = |m: &BTreeMap<String, Value>| {
            let mut s = String::new();
            write_value(&Value::Object(m.clone().into_iter().collect()), &mut s);
            s
        };
        wr.write_record([
            r.command.clone(),
            r.method.clone(),
            format_f64(r.value.re),
            format_f64(r.value.im),
            format_f64(r.abs_error),
            r.runtime_ms.to_string(),
            r.library_version.clone(),
            r.rng_seed.map(|s| s.to_string()).unwrap_or_default(),
            json_of(&r.params),
            json_of(&r.truncations),
            json_of(&r.extra),
        ])?;
    }
    wr.flush()
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| Error::Domain(format!("{THREADS_ENV} = '{s}' is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Domain("thread count must be positive".into()));
        }
        // A second configuration in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the subcommand, writes
/// records to `out` and diagnostics to `err`, and returns the exit status.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        let _ = writeln!(err, "error: {e}");
        return e.exit_code();
    }
    let start = Instant::now();
    let result = match &cli.command {
        Command::Zeta(a) => zeta_cmd(a),
        Command::TraceTerm(a) => trace_cmd(a),
        Command::Apery(a) => apery_cmd(a),
        Command::Beukers(a) => beukers_cmd(a),
        Command::Confluence(a) => confluence_cmd(a),
        Command::Validate(a) => validate_cmd(a),
    };
    let mut emission = match result {
        Ok(e) => e,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let elapsed = start.elapsed().as_millis() as u64;
    for r in &mut emission.records {
        if !cli.timing {
            r.runtime_ms = 0;
        } else if r.runtime_ms == 0 {
            r.runtime_ms = elapsed;
        }
    }
    let written = match cli.format {
        Format::Json => emission.records.iter().try_for_each(|r| writeln!(out, "{}", r.to_json_line())),
        Format::Csv => write_csv(&emission.records, out),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: cannot write output: {e}");
        return 2;
    }
    emission.status
}

/// [`run_with`] on standard output and standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("rabi-zeta").chain(args.iter().copied());
        let code = run_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn uncoupled_one_photon_is_pi_squared_over_three() {
        let (code, out, _) =
            run_capture(&["zeta", "--model", "1pqrm", "--n", "2", "--lambda", "1.0", "--g", "0", "--delta", "0", "--eps", "0"]);
        assert_eq!(code, 0);
        let rec: OutputRecord = serde_json::from_str(out.trim()).unwrap();
        assert!((rec.value.re - std::f64::consts::PI.powi(2) / 3.0).abs() < 1e-14);
        assert_eq!(rec.command, "zeta");
    }

    #[test]
    fn classic_apery_strings() {
        let (code, out, _) = run_capture(&["apery", "--family", "classic", "--n-max", "3"]);
        assert_eq!(code, 0);
        let rec: OutputRecord = serde_json::from_str(out.trim()).unwrap();
        assert_eq!(rec.extra["a"], json!(["1", "3", "19", "147"]));
        assert_eq!(rec.extra["b"][0], json!("0"));
        assert_eq!(rec.extra["b"][1], json!("5"));
        assert_eq!(rec.extra["b"][2], json!("125/4"));
    }

    #[test]
    fn records_round_trip_with_full_precision() {
        let (_, out, _) = run_capture(&["zeta", "--model", "2pqrm", "--n", "3", "--lambda", "1.2,0.3", "--g", "0.1", "--delta", "0.2"]);
        let line = out.trim();
        let rec: OutputRecord = serde_json::from_str(line).unwrap();
        assert_eq!(rec.to_json_line(), line);
        assert!(line.contains(&format_f64(rec.value.re)));
        let sum = rec.per_m_terms.as_ref().unwrap().iter().fold(
            C64::new(rec.extra["base_term"]["re"].as_f64().unwrap(), rec.extra["base_term"]["im"].as_f64().unwrap()),
            |a, t| a + C64::new(t.re, t.im),
        );
        assert_eq!(sum, C64::new(rec.value.re, rec.value.im));
    }

    #[test]
    fn identical_arguments_give_identical_bytes() {
        let args = ["trace-term", "--family", "plus", "--m", "2", "--deriv", "1", "--lambda", "1.5", "--g", "0.2", "--eps", "0.1"];
        assert_eq!(run_capture(&args).1, run_capture(&args).1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_capture(&["zeta", "--model", "1pqrm"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["no-such-command"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["--help"]).0, 0);
        let (code, _, err) = run_capture(&["zeta", "--model", "1pqrm", "--n", "2", "--lambda", "-2"]);
        assert_eq!(code, 2, "{err}");
        let (code, _, _) = run_capture(&["zeta", "--model", "1pqrm", "--n", "2", "--lambda", "1", "--delta", "3"]);
        assert_eq!(code, 2);
        let (code, _, _) = run_capture(&["zeta", "--model", "bergman", "--n", "2", "--lambda", "1"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn exact_flat_coefficients() {
        let (code, out, _) = run_capture(&["apery", "--family", "flat", "--n", "2", "--lambda", "3", "--eps", "1/3", "--exact"]);
        assert_eq!(code, 0);
        let rec: OutputRecord = serde_json::from_str(out.trim()).unwrap();
        let a_exact = rec.extra["a_exact"].as_str().unwrap();
        let a = rec.extra["a"]["re"].as_f64().unwrap();
        assert!((rational_to_f64(&parse_rational(a_exact).unwrap()) - a).abs() <= 1e-12 * a.abs());
        // J = A·Σ + B up to the sign (−1)ⁿ = 1.
        let sum = rec.extra["zeta_sum"]["re"].as_f64().unwrap();
        let b = rec.extra["b"]["re"].as_f64().unwrap();
        assert!((rec.value.re - (a * sum + b)).abs() < 1e-12);
    }

    #[test]
    fn csv_output_has_header_and_rows() {
        let (code, out, _) = run_capture(&["--format", "csv", "beukers", "--n-max", "2"]);
        assert_eq!(code, 0);
        let mut rd = csv::Reader::from_reader(out.as_bytes());
        assert_eq!(rd.headers().unwrap().get(2), Some("value_re"));
        let rows: Vec<_> = rd.records().collect::<std::result::Result<_, _>>().unwrap();
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn complex_argument_syntax() {
        assert_eq!(parse_complex("1.5").unwrap(), C64::new(1.5, 0.0));
        assert_eq!(parse_complex("-1.5, 2").unwrap(), C64::new(-1.5, 2.0));
        assert!(parse_complex("1.5i").is_err());
    }
}
