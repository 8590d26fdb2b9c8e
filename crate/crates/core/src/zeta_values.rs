//! Special values ζ(H; n, λ), n ≥ 2, assembled as a Hurwitz-zeta base term plus
//! a power series in the two-level coupling whose coefficients are λ-derivatives
//! of the trace terms R_m.
//!
//! For the one-photon model, the two-photon model, a single weighted-Bergman
//! block and the non-commutative harmonic oscillator (NCHO) the value is
//!
//! ζ = base + (−1)ⁿ/(n−1)! · Σ_{m≥1} X^{2m}/m · D_m,
//!
//! where X is Δ (or (α−β)/(α+β) for the oscillator) and D_m = ∂ⁿR_m/∂λⁿ (or
//! ∂ⁿ[λ^{2m}R_m]/∂λⁿ for the oscillator). The number of m-terms is fixed in
//! advance from an a-priori bound on |D_m| built from the operator norm C and
//! the Hilbert–Schmidt norm C′ of the diagonal resolvents.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_oracle::{zeta_eigen_oracle, zeta_eigen_oracle_by_block, ModelSpec, DEFAULT_N};
use crate::quadrature::QuadratureSpec;
use crate::specfun::{alternating_zeta_sum, hurwitz_zeta, RationalSeries, SeriesValue, C64};
use crate::trace_terms::{dn_r_m_integral_with, family_operator, leibniz_lambda_power, TraceFamily};

/// Distance to an excluded point below which a request is rejected.
pub const NEAR_POLE_RADIUS: f64 = 1e-9;

/// Distance to an excluded point below which a conditioning warning is recorded.
pub const CONDITIONING_WARNING_RADIUS: f64 = 1e-4;

/// Ratio |X|·C above which a slow-convergence warning is recorded.
pub const SLOW_CONVERGENCE_RATIO: f64 = 0.95;

/// Default cap on the number of m-terms.
pub const DEFAULT_MAX_M: usize = 12;

/// Largest m evaluated by tensor quadrature on the integral route; higher
/// terms use the operator route.
pub const MAX_INTEGRAL_M: usize = 2;

/// How the coefficients D_m (or the whole value) are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaMethod {
    /// Coupling series with D_m from the integral representations.
    SeriesIntegral,
    /// Coupling series with D_m from truncated operators.
    SeriesOperator,
    /// Direct eigenvalue sum of the truncated Hamiltonian (verification only).
    EigenOracle,
}

impl ZetaMethod {
    /// The integral route for real λ inside its domain, the operator route otherwise.
    pub fn default_for(model: &ModelSpec, lambda: C64) -> Self {
        let (offset, eps) = match *model {
            ModelSpec::OnePhoton { eps, .. } => (0.0, eps),
            ModelSpec::TwoPhoton { eps, .. } => (0.5, eps),
            ModelSpec::BergmanNu { nu, eps, .. } => (nu, eps),
            ModelSpec::Ncho { eta, .. } => (0.5, 2.0 * eta),
        };
        if lambda.im == 0.0 && lambda.re - eps.abs() + offset > 0.0 {
            ZetaMethod::SeriesIntegral
        } else {
            ZetaMethod::SeriesOperator
        }
    }

    /// Lower-case name used in output records.
    pub fn name(self) -> &'static str {
        match self {
            ZetaMethod::SeriesIntegral => "series_integral",
            ZetaMethod::SeriesOperator => "series_operator",
            ZetaMethod::EigenOracle => "eigen_oracle",
        }
    }
}

/// A request for ζ(H; n, λ).
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaRequest {
    /// The Hamiltonian.
    pub model: ModelSpec,
    /// Order n ≥ 2.
    pub n: u32,
    /// Shift λ.
    pub lambda: C64,
    /// Evaluation route.
    pub method: ZetaMethod,
    /// Cap on the number of m-terms.
    pub max_m: usize,
    /// Target for the discarded m-tail.
    pub tol: f64,
    /// Truncation N of the operator and eigenvalue routes.
    pub trunc_n: usize,
    /// Quadrature override for the integral route; `None` uses the default rule per dimension.
    pub quadrature: Option<QuadratureSpec>,
}

impl ZetaRequest {
    /// Request with the default method, max_m = 12, tol = 1e-10 and N = 400.
    pub fn new(model: ModelSpec, n: u32, lambda: C64) -> Self {
        ZetaRequest {
            model,
            n,
            lambda,
            method: ZetaMethod::default_for(&model, lambda),
            max_m: DEFAULT_MAX_M,
            tol: 1e-10,
            trunc_n: DEFAULT_N,
            quadrature: None,
        }
    }

    /// Sets the route.
    pub fn with_method(mut self, method: ZetaMethod) -> Self {
        self.method = method;
        self
    }
}

/// Bookkeeping attached to a [`ZetaResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaMetadata {
    /// Route used.
    pub method: ZetaMethod,
    /// Number of m-terms evaluated.
    pub m_terms: usize,
    /// A-priori bound on the discarded m-tail.
    pub tail_bound: f64,
    /// Whether the tail bound met the tolerance within `max_m` terms.
    pub converged: bool,
    /// |X|·C, the square root of the geometric ratio of the m-series.
    pub ratio: f64,
    /// Operator / eigenvalue truncation N.
    pub trunc_n: usize,
    /// Quadrature rules used per m on the integral route.
    pub quadrature: Vec<String>,
    /// Conditioning and convergence warnings.
    pub warnings: Vec<String>,
    /// Wall-clock time.
    pub runtime_ms: u128,
}

/// ζ(H; n, λ) with its decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaResult {
    /// The value; equals `base_term + Σ per_m_terms`.
    pub value: C64,
    /// Error estimate: base-term error, per-term route errors and the tail bound.
    pub abs_error: f64,
    /// The m-th entry is (−1)ⁿ/(n−1)!·X^{2m}/m·D_m, m = 1, 2, …
    pub per_m_terms: Vec<C64>,
    /// The coupling-free Hurwitz-zeta part.
    pub base_term: C64,
    /// Bookkeeping.
    pub metadata: ZetaMetadata,
}

/// One row of [`confluence_scan`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfluenceRow {
    /// Bergman weight ν.
    pub nu: f64,
    /// 2ⁿ·ζ(H_ν(g/√ν, 2Δ, 2ε); n, 2λ−ν).
    pub value: C64,
    /// |value − ζ(H_♭(g, Δ, ε); n, λ)|.
    pub deviation: f64,
}

/// Everything the m-series needs about a model.
struct SeriesPlan {
    family: TraceFamily,
    g: f64,
    eps: f64,
    x: f64,
    /// Multiply R_m by λ^{2m} before differentiating.
    lambda_power: bool,
    /// Resolvent spectrum of h±: |step·k + λ ± eps + offset|.
    step: f64,
    offset: f64,
    /// Number of Bergman blocks in the family (bounds |R⁺|, |R⁻| by twice one block).
    blocks: f64,
}

fn plan_for(model: &ModelSpec, parity: bool) -> Result<SeriesPlan> {
    model.validate()?;
    let two_block = if parity { TraceFamily::Minus } else { TraceFamily::Plus };
    Ok(match *model {
        ModelSpec::OnePhoton { g, delta, eps } => {
            if parity {
                return Err(Error::Domain("parity difference is defined for the two-photon model and the NCHO".into()));
            }
            SeriesPlan { family: TraceFamily::Flat, g, eps, x: delta, lambda_power: false, step: 1.0, offset: 0.0, blocks: 1.0 }
        }
        ModelSpec::TwoPhoton { g, delta, eps } => {
            SeriesPlan { family: two_block, g, eps, x: delta, lambda_power: false, step: 1.0, offset: 0.5, blocks: 2.0 }
        }
        ModelSpec::BergmanNu { nu, g, delta, eps } => {
            if parity {
                return Err(Error::Domain("parity difference is defined for the two-photon model and the NCHO".into()));
            }
            SeriesPlan { family: TraceFamily::Nu(nu), g, eps, x: delta, lambda_power: false, step: 2.0, offset: nu, blocks: 1.0 }
        }
        ModelSpec::Ncho { alpha, beta, eta } => SeriesPlan {
            family: two_block,
            g: 0.5 * (1.0 / (alpha * beta).sqrt()).atanh(),
            eps: 2.0 * eta,
            x: (alpha - beta) / (alpha + beta),
            lambda_power: true,
            step: 1.0,
            offset: 0.5,
            blocks: 2.0,
        },
    })
}

/// min over k ≥ 0 of |step·k + z|.
fn min_distance(z: C64, step: f64) -> f64 {
    let k_star = -z.re / step;
    let mut best = z.norm();
    for k in [k_star.floor(), k_star.ceil()] {
        if k >= 0.0 {
            best = best.min((z + step * k).norm());
        }
    }
    best
}

/// (C, C′) of the plan at λ, rejecting points within [`NEAR_POLE_RADIUS`] of the spectrum.
fn resolvent_norms(plan: &SeriesPlan, lambda: C64) -> Result<(f64, f64, f64)> {
    let mut dist = f64::INFINITY;
    let mut hs2: f64 = 0.0;
    for s in [1.0, -1.0] {
        let z = lambda + s * plan.eps + plan.offset;
        let d = min_distance(z, plan.step);
        if d < NEAR_POLE_RADIUS {
            return Err(Error::Pole(format!("λ ± ε + shift = {z} lies on the diagonal spectrum")));
        }
        dist = dist.min(d);
        let w = z / plan.step;
        let sum = RationalSeries::new(vec![(w, -1), (w.conj(), -1)]).sum()?.value.re / (plan.step * plan.step);
        hs2 = hs2.max(sum);
    }
    Ok((1.0 / dist, hs2.sqrt(), dist))
}

/// The Δ-radius 1/C of the model at λ (for the NCHO, the bound on |λ(α−β)/(α+β)|).
pub fn convergence_radius(model: &ModelSpec, lambda: C64) -> Result<f64> {
    let plan = plan_for(model, false)?;
    let (c, _, _) = resolvent_norms(&plan, lambda)?;
    Ok(1.0 / c)
}

fn rising(x: f64, n: u32) -> f64 {
    (0..n).map(|i| x + i as f64).product()
}

/// A-priori bound on |∂ʲR_m|: blocks·(2m)_j·C^{2m+j−2}·C′².
fn dn_bound(plan: &SeriesPlan, c: f64, cp: f64, m: usize, j: u32) -> f64 {
    plan.blocks * rising(2.0 * m as f64, j) * c.powi(2 * m as i32 + j as i32 - 2) * cp * cp
}

/// Bound on |(−1)ⁿ/(n−1)!·X^{2m}/m·D_m|.
fn term_bound(plan: &SeriesPlan, lambda: C64, c: f64, cp: f64, m: usize, n: u32) -> f64 {
    let d = if plan.lambda_power {
        let lam = lambda.norm();
        (0..=n.min(2 * m as u32))
            .map(|l| {
                let falling: f64 = (0..l).map(|i| (2 * m as u32 - i) as f64).product();
                crate::specfun::binomial(n as u64, l as u64)
                    * falling
                    * lam.powi(2 * m as i32 - l as i32)
                    * dn_bound(plan, c, cp, m, n - l)
            })
            .sum()
    } else {
        dn_bound(plan, c, cp, m, n)
    };
    let nm1: f64 = (1..n).map(|i| i as f64).product();
    plan.x.abs().powi(2 * m as i32) / m as f64 / nm1 * d
}

/// Σ_{m>M} term bounds, summed until the geometric decay makes the rest negligible.
fn tail_bound(plan: &SeriesPlan, lambda: C64, c: f64, cp: f64, m_done: usize, n: u32) -> f64 {
    let mut total = 0.0;
    for m in (m_done + 1)..(m_done + 100_000) {
        let b = term_bound(plan, lambda, c, cp, m, n);
        total += b;
        if b <= 1e-18 * total || b == 0.0 {
            break;
        }
    }
    total
}

fn base_term(model: &ModelSpec, n: u32, lambda: C64, parity: bool) -> Result<SeriesValue> {
    let pair = |a: C64, b: C64, scale: f64| -> Result<SeriesValue> {
        let f = if parity { alternating_zeta_sum } else { hurwitz_zeta };
        let s = f(n, a)?.add(f(n, b)?);
        Ok(s.scale(C64::new(scale, 0.0)))
    };
    match *model {
        ModelSpec::OnePhoton { eps, .. } => pair(lambda + eps, lambda - eps, 1.0),
        ModelSpec::TwoPhoton { eps, .. } => pair(lambda + eps + 0.5, lambda - eps + 0.5, 1.0),
        ModelSpec::BergmanNu { nu, eps, .. } => {
            pair((lambda + eps + nu) / 2.0, (lambda - eps + nu) / 2.0, 0.5f64.powi(n as i32))
        }
        ModelSpec::Ncho { eta, .. } => pair(lambda + 2.0 * eta + 0.5, lambda - 2.0 * eta + 0.5, 1.0),
    }
}

/// D_m on the operator route.
fn d_operator(plan: &SeriesPlan, lambda: C64, m: usize, n: u32, dim: usize) -> Result<SeriesValue> {
    if plan.lambda_power {
        let derivs = (0..=n as usize)
            .map(|j| family_operator(plan.family, plan.g, lambda, C64::new(plan.eps, 0.0), m, j, dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(leibniz_lambda_power(lambda, m, &derivs))
    } else {
        family_operator(plan.family, plan.g, lambda, C64::new(plan.eps, 0.0), m, n as usize, dim)
    }
}

fn quadrature_for(req: &ZetaRequest, m: usize) -> QuadratureSpec {
    req.quadrature.unwrap_or_else(|| QuadratureSpec::default_for_dim(2 * m))
}

fn describe(spec: &QuadratureSpec) -> String {
    match spec.scheme {
        crate::quadrature::Scheme::TanhSinh => format!("tanh_sinh(level={})", spec.level),
        crate::quadrature::Scheme::GaussLegendre => format!("gauss_legendre(p={})", spec.points_per_axis),
        crate::quadrature::Scheme::MonteCarlo => format!("monte_carlo(samples={}, seed={})", spec.samples, spec.rng_seed),
    }
}

fn assemble(req: &ZetaRequest, parity: bool) -> Result<ZetaResult> {
    let start = Instant::now();
    if req.n < 2 {
        return Err(Error::Domain(format!("zeta order must be >= 2, got {}", req.n)));
    }
    if !(req.tol > 0.0) || req.max_m == 0 {
        return Err(Error::Domain("tol must be positive and max_m at least 1".into()));
    }
    let plan = plan_for(&req.model, parity)?;
    let (c, cp, dist) = resolvent_norms(&plan, req.lambda)?;
    let x_eff = if plan.lambda_power { plan.x.abs() * req.lambda.norm() } else { plan.x.abs() };
    let ratio = x_eff * c;
    if ratio >= 1.0 {
        return Err(Error::RadiusExceeded { ratio });
    }
    let mut warnings = Vec::new();
    if dist < CONDITIONING_WARNING_RADIUS {
        warnings.push(format!("λ is within {dist:e} of the diagonal spectrum"));
    }
    if ratio > SLOW_CONVERGENCE_RATIO {
        warnings.push(format!("SlowConvergence: |X|·C = {ratio:.4}"));
    }
    let base = base_term(&req.model, req.n, req.lambda, parity)?;
    let n = req.n;

    if req.method == ZetaMethod::EigenOracle {
        let value = if parity {
            let blocks = zeta_eigen_oracle_by_block(&req.model, n, req.lambda, req.trunc_n)?;
            blocks[0].add(blocks[1].scale(C64::new(-1.0, 0.0)))
        } else {
            zeta_eigen_oracle(&req.model, n, req.lambda, req.trunc_n)?
        };
        warnings.push("eigen_oracle: per_m_terms holds the aggregate coupling correction".into());
        let correction = value.value - base.value;
        return Ok(ZetaResult {
            value: base.value + correction,
            abs_error: value.abs_error,
            per_m_terms: vec![correction],
            base_term: base.value,
            metadata: ZetaMetadata {
                method: req.method,
                m_terms: 0,
                tail_bound: 0.0,
                converged: value.converged,
                ratio,
                trunc_n: req.trunc_n,
                quadrature: Vec::new(),
                warnings,
                runtime_ms: start.elapsed().as_millis(),
            },
        });
    }

    // Number of terms from the a-priori tail bound.
    let mut m_terms = 0;
    let mut tail = f64::INFINITY;
    if plan.x == 0.0 {
        tail = 0.0;
    } else {
        while m_terms < req.max_m {
            m_terms += 1;
            tail = tail_bound(&plan, req.lambda, c, cp, m_terms, n);
            if tail < req.tol {
                break;
            }
        }
    }
    let converged = tail < req.tol;
    if !converged {
        warnings.push(format!("m-tail bound {tail:e} exceeds tol after {m_terms} terms"));
    }

    let nm1: f64 = (1..n).map(|i| i as f64).product();
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let mut quad_used = Vec::new();
    if req.method == ZetaMethod::SeriesIntegral {
        for m in 1..=m_terms {
            if m <= MAX_INTEGRAL_M {
                quad_used.push(format!("m={m}: {}", describe(&quadrature_for(req, m))));
            } else {
                quad_used.push(format!("m={m}: operator(N={})", req.trunc_n));
            }
        }
    }
    let eps = C64::new(plan.eps, 0.0);
    let d_values: Vec<SeriesValue> = (1..=m_terms)
        .into_par_iter()
        .map(|m| match req.method {
            ZetaMethod::SeriesIntegral if m <= MAX_INTEGRAL_M => dn_r_m_integral_with(
                plan.family,
                req.lambda,
                plan.g,
                eps,
                m,
                n as usize,
                &quadrature_for(req, m),
                plan.lambda_power,
            ),
            _ => d_operator(&plan, req.lambda, m, n, req.trunc_n),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_m_terms = Vec::with_capacity(m_terms);
    let mut value = base.value;
    let mut abs_error = base.abs_error + tail;
    for (i, d) in d_values.iter().enumerate() {
        let m = i + 1;
        let pref = sign / nm1 * plan.x.powi(2 * m as i32) / m as f64;
        let term = d.value * pref;
        abs_error += d.abs_error * pref.abs();
        per_m_terms.push(term);
        value += term;
    }
    Ok(ZetaResult {
        value,
        abs_error,
        per_m_terms,
        base_term: base.value,
        metadata: ZetaMetadata {
            method: req.method,
            m_terms,
            tail_bound: tail,
            converged,
            ratio,
            trunc_n: req.trunc_n,
            quadrature: quad_used,
            warnings,
            runtime_ms: start.elapsed().as_millis(),
        },
    })
}

/// ζ(H; n, λ) for the requested model and route.
pub fn zeta_value(req: &ZetaRequest) -> Result<ZetaResult> {
    assemble(req, false)
}

/// Even-sector minus odd-sector zeta value of the two-photon model or the NCHO:
/// alternating Hurwitz sums plus the coupling series built from R_m⁻.
pub fn parity_difference(req: &ZetaRequest) -> Result<ZetaResult> {
    match req.model {
        ModelSpec::TwoPhoton { .. } | ModelSpec::Ncho { .. } => assemble(req, true),
        _ => Err(Error::Domain("parity difference is defined for the two-photon model and the NCHO".into())),
    }
}

/// 2ⁿ·ζ(H_ν(g/√ν, 2Δ, 2ε); n, 2λ−ν) for each ν, with its distance from the
/// one-photon value ζ(H_♭(g, Δ, ε); n, λ). Returns the one-photon reference
/// and one row per ν, all on the given route.
pub fn confluence_scan(
    g: f64,
    delta: f64,
    eps: f64,
    lambda: C64,
    n: u32,
    nu_list: &[f64],
    method: ZetaMethod,
) -> Result<(ZetaResult, Vec<ConfluenceRow>)> {
    let gap = lambda - eps.abs();
    if lambda.re - eps.abs() <= 0.0 || delta.abs() >= gap.norm() {
        return Err(Error::Domain(format!(
            "confluence needs Re λ − |ε| > 0 and |Δ| < |λ − |ε||; got λ = {lambda}, Δ = {delta}, ε = {eps}"
        )));
    }
    let reference = zeta_value(&ZetaRequest::new(ModelSpec::OnePhoton { g, delta, eps }, n, lambda).with_method(method))?;
    let rows = nu_list
        .par_iter()
        .map(|&nu| {
            let model = ModelSpec::BergmanNu { nu, g: g / nu.sqrt(), delta: 2.0 * delta, eps: 2.0 * eps };
            let r = zeta_value(&ZetaRequest::new(model, n, lambda * 2.0 - nu).with_method(method))?;
            let value = r.value * 2f64.powi(n as i32);
            Ok(ConfluenceRow { nu, value, deviation: (value - reference.value).norm() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((reference, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn op(model: ModelSpec, n: u32, lambda: C64) -> ZetaRequest {
        ZetaRequest::new(model, n, lambda).with_method(ZetaMethod::SeriesOperator)
    }

    #[test]
    fn radius_examples() {
        let one = |eps| ModelSpec::OnePhoton { g: 0.3, delta: 0.1, eps };
        assert!((convergence_radius(&one(0.0), c(1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((convergence_radius(&one(0.1), c(0.6)).unwrap() - 0.5).abs() < 1e-15);
        let two = ModelSpec::TwoPhoton { g: 0.3, delta: 0.1, eps: 0.0 };
        assert!((convergence_radius(&two, c(0.2)).unwrap() - 0.7).abs() < 1e-15);
        // Nearest integer below: λ = −2.3 gives |−2.3 + 2| = 0.3.
        assert!((convergence_radius(&one(0.0), c(-2.3)).unwrap() - 0.3).abs() < 1e-12);
        assert!(matches!(convergence_radius(&one(0.0), c(-2.0)), Err(Error::Pole(_))));
    }

    #[test]
    fn zero_coupling_is_base_term() {
        let m = ModelSpec::OnePhoton { g: 0.4, delta: 0.0, eps: 0.1 };
        let r = zeta_value(&op(m, 2, c(1.0))).unwrap();
        let expect = hurwitz_zeta(2, c(1.1)).unwrap().value + hurwitz_zeta(2, c(0.9)).unwrap().value;
        assert_eq!(r.value, expect);
        assert!(r.per_m_terms.is_empty());
        let ncho = ModelSpec::Ncho { alpha: 1.5, beta: 1.5, eta: 0.1 };
        let r = zeta_value(&op(ncho, 3, c(0.7))).unwrap();
        let expect = hurwitz_zeta(3, c(1.4)).unwrap().value + hurwitz_zeta(3, c(1.0)).unwrap().value;
        assert!((r.value - expect).norm() < 1e-15);
    }

    #[test]
    fn value_is_base_plus_terms() {
        let m = ModelSpec::TwoPhoton { g: 0.2, delta: 0.3, eps: 0.1 };
        let r = zeta_value(&op(m, 2, c(1.0))).unwrap();
        let sum = r.per_m_terms.iter().fold(r.base_term, |a, &t| a + t);
        assert_eq!(sum, r.value);
    }

    #[test]
    fn one_photon_routes_agree() {
        let model = ModelSpec::OnePhoton { g: 0.2, delta: 0.3, eps: 0.1 };
        let s_op = zeta_value(&op(model, 2, c(1.0))).unwrap();
        let s_int = zeta_value(&ZetaRequest::new(model, 2, c(1.0)).with_method(ZetaMethod::SeriesIntegral)).unwrap();
        let eig = zeta_eigen_oracle(&model, 2, c(1.0), 1600).unwrap();
        assert!((s_op.value - s_int.value).norm() < 1e-7, "{} vs {}", s_op.value, s_int.value);
        assert!((s_op.value - eig.value).norm() < 1e-5);
    }

    #[test]
    fn ncho_matches_eigen_oracle() {
        let model = ModelSpec::Ncho { alpha: 2.0, beta: 1.2, eta: 0.1 };
        let s = zeta_value(&op(model, 2, c(0.8))).unwrap();
        let e = zeta_eigen_oracle(&model, 2, c(0.8), 1600).unwrap();
        assert!((s.value - e.value).norm() <= e.abs_error.max(1e-6), "{} vs {} ± {}", s.value, e.value, e.abs_error);
    }

    #[test]
    fn two_photon_is_sum_of_bergman_blocks() {
        let (g, delta, eps, lam) = (0.15, 0.2, 0.05, c(1.2));
        let two = zeta_value(&op(ModelSpec::TwoPhoton { g, delta, eps }, 3, lam)).unwrap();
        let a = zeta_value(&op(ModelSpec::BergmanNu { nu: 0.5, g, delta, eps }, 3, lam)).unwrap();
        let b = zeta_value(&op(ModelSpec::BergmanNu { nu: 1.5, g, delta, eps }, 3, lam)).unwrap();
        assert!((two.value - a.value - b.value).norm() < 1e-9);
    }

    #[test]
    fn parity_difference_examples() {
        let m0 = ModelSpec::TwoPhoton { g: 0.3, delta: 0.0, eps: 0.1 };
        let r = parity_difference(&op(m0, 2, c(1.0))).unwrap();
        let expect = alternating_zeta_sum(2, c(1.6)).unwrap().value + alternating_zeta_sum(2, c(1.4)).unwrap().value;
        assert!((r.value - expect).norm() < 1e-15);
        let m = ModelSpec::TwoPhoton { g: 0.2, delta: 0.25, eps: 0.1 };
        let diff = parity_difference(&op(m, 2, c(1.0))).unwrap();
        let total = zeta_value(&op(m, 2, c(1.0))).unwrap();
        let even = zeta_eigen_oracle(&ModelSpec::BergmanNu { nu: 0.5, g: 0.2, delta: 0.25, eps: 0.1 }, 2, c(1.0), 1600).unwrap();
        assert!((diff.value + total.value - even.value * 2.0).norm() < 1e-5);
        let eig = parity_difference(&op(m, 2, c(1.0)).with_method(ZetaMethod::EigenOracle)).unwrap();
        assert!((eig.value - diff.value).norm() < 1e-5);
        assert!(parity_difference(&op(ModelSpec::OnePhoton { g: 0.1, delta: 0.1, eps: 0.0 }, 2, c(1.0))).is_err());
    }

    #[test]
    fn tail_bound_dominates_next_term() {
        let model = ModelSpec::OnePhoton { g: 0.2, delta: 0.35, eps: 0.1 };
        let mut req = op(model, 2, c(1.0));
        req.max_m = 3;
        req.tol = 1e-30;
        let r = zeta_value(&req).unwrap();
        req.max_m = 4;
        let r4 = zeta_value(&req).unwrap();
        assert_eq!(r.metadata.m_terms, 3);
        assert!(r.metadata.tail_bound >= r4.per_m_terms[3].norm());
    }

    #[test]
    fn radius_violation() {
        let model = ModelSpec::OnePhoton { g: 0.2, delta: 1.5, eps: 0.0 };
        assert!(matches!(zeta_value(&op(model, 2, c(1.0))), Err(Error::RadiusExceeded { .. })));
    }

    #[test]
    fn confluence_trivial_case() {
        let (_, rows) = confluence_scan(0.0, 0.0, 0.1, c(1.5), 2, &[8.0, 16.0], ZetaMethod::SeriesOperator).unwrap();
        for r in rows {
            assert!(r.deviation < 1e-13, "{}", r.deviation);
        }
    }

    #[test]
    fn default_method_choice() {
        let m = ModelSpec::OnePhoton { g: 0.2, delta: 0.1, eps: 0.1 };
        assert_eq!(ZetaMethod::default_for(&m, c(1.0)), ZetaMethod::SeriesIntegral);
        assert_eq!(ZetaMethod::default_for(&m, C64::new(1.0, 0.5)), ZetaMethod::SeriesOperator);
        assert_eq!(ZetaMethod::default_for(&m, c(0.05)), ZetaMethod::SeriesOperator);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn eps_symmetry(g in 0.0f64..0.4, delta in 0.0f64..0.3, eps in 0.0f64..0.3, lam in 1.0f64..2.0, two in any::<bool>()) {
            let mk = |e: f64| if two {
                ModelSpec::TwoPhoton { g, delta, eps: e }
            } else {
                ModelSpec::OnePhoton { g, delta, eps: e }
            };
            let mut a = op(mk(eps), 2, c(lam));
            a.trunc_n = 200;
            let mut b = op(mk(-eps), 2, c(lam));
            b.trunc_n = 200;
            let va = zeta_value(&a).unwrap().value;
            let vb = zeta_value(&b).unwrap().value;
            prop_assert!((va - vb).norm() < 1e-10);
        }
    }
}
