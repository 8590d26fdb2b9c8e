//! Acceptance criteria encoded as data: each [`Criterion`] carries its
//! tolerance and runtime budget together with the function that checks it.
//!
//! The `full` suite runs every criterion at its stated size; the `quick`
//! suite runs the same checks on reduced grids and truncations.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::apery::{
    apery_ab_flat, apery_ab_flat_exact, apery_classic, beukers_residual, flat_zeta_sum, j_delta, j_flat, Delta,
    DeltaMethod, FlatMethod,
};
use crate::error::Result;
use crate::operator_oracle::{
    dn_r_m_operator, model_block_matrices, r_m_operator, two_photon_fock_matrix, zeta_eigen_oracle, Basis, ModelSpec,
};
use crate::quadrature::QuadratureSpec;
use crate::specfun::C64;
use crate::trace_terms::{
    dn_r_m_integral, family_operator, phi, psi, psi_minus_two, r_1_hypergeometric, r_1_series, IntegralBatch, R1Family,
    TraceFamily,
};
use crate::zeta_values::{confluence_scan, zeta_value, ZetaMethod, ZetaRequest};

/// Default seed of the random parameter draws.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Size of a validation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Reduced grids and truncations; a few seconds per criterion.
    Quick,
    /// Every criterion at its stated size.
    Full,
}

/// What a criterion check measured.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Largest residual compared against the tolerance.
    pub max_residual: f64,
    /// Whether every condition of the criterion held.
    pub passed: bool,
    /// Short human-readable summary.
    pub detail: String,
}

impl Outcome {
    fn from_residual(max_residual: f64, tolerance: f64, detail: String) -> Self {
        Outcome { max_residual, passed: max_residual < tolerance, detail }
    }
}

/// One acceptance criterion.
#[derive(Clone, Copy)]
pub struct Criterion {
    /// Criterion number.
    pub id: u32,
    /// Short name.
    pub name: &'static str,
    /// Tolerance of the headline residual.
    pub tolerance: f64,
    /// Runtime budget of the full-size check in seconds.
    pub budget_s: f64,
    /// The check.
    pub run: fn(Suite, u64) -> Result<Outcome>,
}

/// Result of running one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    /// Criterion number.
    pub id: u32,
    /// Short name.
    pub name: String,
    /// Tolerance of the headline residual.
    pub tolerance: f64,
    /// Largest residual observed (NaN when the check raised an error).
    pub max_residual: f64,
    /// Pass/fail.
    pub passed: bool,
    /// Runtime budget in seconds.
    pub budget_s: f64,
    /// Wall-clock time.
    pub runtime_ms: u128,
    /// Summary or error message.
    pub detail: String,
}

impl CriterionReport {
    /// `PASS`/`FAIL` line with the residual, tolerance and runtime.
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {:<28} max_residual={:.3e} tol={:.0e} runtime={:.1}s budget={}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.max_residual,
            self.tolerance,
            self.runtime_ms as f64 / 1000.0,
            self.budget_s,
            self.detail
        )
    }
}

/// The acceptance criteria in order.
pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "exact_apery_numbers", tolerance: 0.0, budget_s: 1.0, run: exact_apery },
        Criterion { id: 2, name: "beukers_identity", tolerance: 1e-9, budget_s: 5.0, run: beukers },
        Criterion { id: 3, name: "flat_decomposition", tolerance: 1e-9, budget_s: 10.0, run: flat_decomposition },
        Criterion { id: 4, name: "delta_consistency", tolerance: 1e-8, budget_s: 20.0, run: delta_consistency },
        Criterion { id: 5, name: "three_route_agreement", tolerance: 1e-6, budget_s: 180.0, run: three_routes },
        Criterion { id: 6, name: "derivative_formula", tolerance: 1e-5, budget_s: 60.0, run: derivative_formula },
        Criterion { id: 7, name: "zeta_cross_validation", tolerance: 1e-4, budget_s: 300.0, run: zeta_cross_validation },
        Criterion { id: 8, name: "parity_decomposition", tolerance: 1e-9, budget_s: 30.0, run: parity_decomposition },
        Criterion { id: 9, name: "confluence", tolerance: f64::INFINITY, budget_s: 120.0, run: confluence },
        Criterion { id: 10, name: "kernel_invariants", tolerance: 1e-13, budget_s: 30.0, run: kernel_invariants },
        Criterion { id: 11, name: "flat_b_at_zero_eps", tolerance: 1e-8, budget_s: 10.0, run: flat_b_limit },
    ]
}

/// Runs one criterion, turning a raised error into a failed report.
pub fn run_criterion(c: &Criterion, suite: Suite, seed: u64) -> CriterionReport {
    let start = Instant::now();
    let outcome = (c.run)(suite, seed);
    let runtime_ms = start.elapsed().as_millis();
    let (max_residual, passed, detail) = match outcome {
        Ok(o) => (o.max_residual, o.passed, o.detail),
        Err(e) => (f64::NAN, false, format!("error: {e}")),
    };
    CriterionReport {
        id: c.id,
        name: c.name.to_string(),
        tolerance: c.tolerance,
        max_residual,
        passed,
        budget_s: c.budget_s,
        runtime_ms,
        detail,
    }
}

/// Runs every criterion of the suite in order.
pub fn run_suite(suite: Suite, seed: u64) -> Vec<CriterionReport> {
    criteria().iter().map(|c| run_criterion(c, suite, seed)).collect()
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn sign(n: u32) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Random (λ, ε) with Re λ ∈ (1, 4), |Im λ| < 0.5 and real ε, |ε| ≤ 0.4.
fn random_points(seed: u64, count: usize) -> Vec<(C64, C64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let lambda = C64::new(rng.random_range(1.0..4.0), rng.random_range(-0.5..0.5));
            let eps = c(rng.random_range(-0.4..=0.4));
            (lambda, eps)
        })
        .collect()
}

/// Binomial sums against the three-term recurrence run forward from the
/// first two values, plus the small-n anchors.
fn exact_apery(suite: Suite, _seed: u64) -> Result<Outcome> {
    let n_max = match suite {
        Suite::Quick => 20,
        Suite::Full => 50,
    };
    let ex = apery_classic(n_max)?;
    let forward = |seed0: BigRational, seed1: BigRational| {
        let mut v = vec![seed0, seed1];
        for n in 2..=n_max as u64 {
            let nn = BigInt::from(n);
            let n2 = BigRational::from_integer(&nn * &nn);
            let mid = BigRational::from_integer(BigInt::from(11) * &nn * &nn - BigInt::from(11) * &nn + BigInt::from(3));
            let last = BigRational::from_integer(BigInt::from((n - 1) * (n - 1)));
            let next = (mid * &v[n as usize - 1] + last * &v[n as usize - 2]) / n2;
            v.push(next);
        }
        v
    };
    let a_rat: Vec<BigRational> = ex.a_list.iter().cloned().map(BigRational::from_integer).collect();
    let a_rec = forward(a_rat[0].clone(), a_rat[1].clone());
    let b_rec = forward(ex.b_list[0].clone(), ex.b_list[1].clone());
    let mismatches = (0..=n_max).filter(|&n| a_rec[n] != a_rat[n] || b_rec[n] != ex.b_list[n]).count();
    let anchors_ok = ex.a_list[..4] == [1, 3, 19, 147].map(BigInt::from)
        && ex.b_list[0] == BigRational::from_integer(BigInt::from(0))
        && ex.b_list[1] == BigRational::from_integer(BigInt::from(5));
    Ok(Outcome {
        max_residual: mismatches as f64,
        passed: mismatches == 0 && anchors_ok,
        detail: format!("n ≤ {n_max}: {mismatches} mismatches, anchors {}", if anchors_ok { "ok" } else { "wrong" }),
    })
}

fn beukers(_suite: Suite, _seed: u64) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for n in 0..=8 {
        worst = worst.max(beukers_residual(n)?);
    }
    Ok(Outcome::from_residual(worst, 1e-9, "n = 0..8".into()))
}

/// J♭ₙ from its series against (−1)ⁿ(A♭ₙ·Σ + B♭ₙ).
fn flat_decomposition(suite: Suite, seed: u64) -> Result<Outcome> {
    let count = match suite {
        Suite::Quick => 5,
        Suite::Full => 20,
    };
    let mut worst: f64 = 0.0;
    for (lambda, eps) in random_points(seed, count) {
        let sum = flat_zeta_sum(lambda, eps)?.value;
        for n in 0..=8 {
            let j = j_flat(n, lambda, eps, FlatMethod::Series, 1e-15)?.value;
            let ab = apery_ab_flat(n, lambda, eps)?;
            worst = worst.max((j - (ab.a * sum + ab.b) * sign(n)).norm());
        }
    }
    Ok(Outcome::from_residual(worst, 1e-9, format!("{count} points, n = 0..8")))
}

/// Jᵟ recurrence against series, and the hypergeometric form of R₁^± against
/// its coupling series.
fn delta_consistency(suite: Suite, seed: u64) -> Result<Outcome> {
    let (count, r1_count) = match suite {
        Suite::Quick => (5, 3),
        Suite::Full => (20, 10),
    };
    let mut worst_j: f64 = 0.0;
    for (lambda, eps) in random_points(seed ^ 0x4a, count) {
        for delta in [Delta::Plus, Delta::Minus] {
            for n in 0..=10 {
                let s = j_delta(n, delta, lambda, eps, DeltaMethod::Series, 1e-15)?.value;
                let r = j_delta(n, delta, lambda, eps, DeltaMethod::Recurrence, 1e-15)?.value;
                worst_j = worst_j.max((s - r).norm());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
    let mut worst_r: f64 = 0.0;
    for i in 0..r1_count {
        let lambda = C64::new(rng.random_range(0.5..3.0), rng.random_range(-0.3..0.3));
        let eps = c(rng.random_range(-0.4..=0.4));
        let g = rng.random_range(-0.5..=0.5);
        let delta = if i % 2 == 0 { Delta::Plus } else { Delta::Minus };
        let h = r_1_hypergeometric(delta, lambda, g, eps)?.value;
        let s = r_1_series(R1Family::Delta(delta), lambda, g, eps, 1e-15)?.value;
        worst_r = worst_r.max((h - s).norm());
    }
    let passed = worst_j < 1e-9 && worst_r < 1e-8;
    Ok(Outcome {
        max_residual: worst_j.max(worst_r),
        passed,
        detail: format!("J recurrence vs series {worst_j:.2e} (tol 1e-9), R1 hypergeometric vs series {worst_r:.2e} (tol 1e-8)"),
    })
}

const FIVE_FAMILIES: [TraceFamily; 5] =
    [TraceFamily::Flat, TraceFamily::Plus, TraceFamily::Minus, TraceFamily::Nu(0.5), TraceFamily::Nu(1.5)];

/// R₁ of a family from the m = 1 coupling series; the single Bergman blocks
/// are half the sum and difference of R₁^±.
fn r1_series_family(family: TraceFamily, lambda: C64, g: f64, eps: C64) -> Result<C64> {
    let tol = 1e-15;
    Ok(match family {
        TraceFamily::Flat => r_1_series(R1Family::Flat, lambda, g, eps, tol)?.value,
        TraceFamily::Plus => r_1_series(R1Family::Delta(Delta::Plus), lambda, g, eps, tol)?.value,
        TraceFamily::Minus => r_1_series(R1Family::Delta(Delta::Minus), lambda, g, eps, tol)?.value,
        TraceFamily::Nu(nu) => {
            let p = r_1_series(R1Family::Delta(Delta::Plus), lambda, g, eps, tol)?.value;
            let m = r_1_series(R1Family::Delta(Delta::Minus), lambda, g, eps, tol)?.value;
            if nu == 0.5 {
                (p + m) * 0.5
            } else {
                (p - m) * 0.5
            }
        }
    })
}

/// Integral, operator and (for m = 1) series routes for R₁ and R₂ on the
/// acceptance grid.
fn three_routes(suite: Suite, _seed: u64) -> Result<Outcome> {
    let (dim, levels, ms): (usize, [u32; 2], &[usize]) = match suite {
        Suite::Quick => (400, [6, 4], &[1]),
        Suite::Full => (1600, [7, 5], &[1, 2]),
    };
    let points: Vec<(C64, C64)> = [1.0, 1.5].iter().flat_map(|&l| [0.0, 0.15].map(|e| (c(l), c(e)))).collect();
    let mut worst_int: f64 = 0.0;
    let mut worst_ser: f64 = 0.0;
    for &g in &[0.1, 0.3] {
        for &m in ms {
            let batch = IntegralBatch { g, m, points: points.clone(), families: FIVE_FAMILIES.to_vec(), nmax: 0 };
            let integral = batch.evaluate(&QuadratureSpec::tanh_sinh(levels[m - 1]))?;
            for (p, &(lambda, eps)) in points.iter().enumerate() {
                for (f, &family) in FIVE_FAMILIES.iter().enumerate() {
                    let op = family_operator(family, g, lambda, eps, m, 0, dim)?.value;
                    worst_int = worst_int.max((integral.values[p][f][0].value - op).norm());
                    if m == 1 {
                        worst_ser = worst_ser.max((r1_series_family(family, lambda, g, eps)? - op).norm());
                    }
                }
            }
        }
    }
    let passed = worst_int < 1e-6 && worst_ser < 1e-7;
    Ok(Outcome {
        max_residual: worst_int,
        passed,
        detail: format!("N = {dim}: integral vs operator {worst_int:.2e} (tol 1e-6), series vs operator {worst_ser:.2e} (tol 1e-7)"),
    })
}

/// n-th derivative by central differences with one Richardson step.
fn central_difference<F: Fn(f64) -> Result<f64>>(f: F, x: f64, n: u32, h: f64) -> Result<f64> {
    let stencil = |h: f64| -> Result<f64> {
        // Δ_hⁿ f(x) / hⁿ with the centred n-th difference on half-steps.
        let mut acc = 0.0;
        for k in 0..=n {
            let w = crate::specfun::binomial(n as u64, k as u64) * sign(k);
            acc += w * f(x + (n as f64 / 2.0 - k as f64) * h)?;
        }
        Ok(acc / h.powi(n as i32))
    };
    let coarse = stencil(h)?;
    let fine = stencil(h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// ∂ⁿR_m from compositions against finite differences of R_m, and the
/// log-weighted integrals against the operator values.
fn derivative_formula(suite: Suite, _seed: u64) -> Result<Outcome> {
    let dim = match suite {
        Suite::Quick => 200,
        Suite::Full => 800,
    };
    // Finite differences compare the operator with itself, so a smaller
    // section suffices there.
    let fd_dim = 200;
    let (lambda, g, eps) = (1.5, 0.25, c(0.1));
    let mut worst_fd: f64 = 0.0;
    let mut worst_int: f64 = 0.0;
    for (basis, family) in [(Basis::Fock, TraceFamily::Flat), (Basis::Bergman(0.5), TraceFamily::Nu(0.5))] {
        for m in 1..=2usize {
            let spec = QuadratureSpec::tanh_sinh(if m == 1 { 7 } else { 5 });
            let batch = IntegralBatch { g, m, points: vec![(c(lambda), eps)], families: vec![family], nmax: 3 };
            let integral = match suite {
                Suite::Full => Some(batch.evaluate(&spec)?),
                Suite::Quick if m == 1 => Some(batch.evaluate(&spec)?),
                Suite::Quick => None,
            };
            for n in 1..=3u32 {
                let exact = dn_r_m_operator(basis, g, c(lambda), eps, m, n as usize, dim)?.value.re;
                let at_fd_dim = dn_r_m_operator(basis, g, c(lambda), eps, m, n as usize, fd_dim)?.value.re;
                let fd = central_difference(
                    |x| Ok(r_m_operator(basis, g, c(x), eps, m, fd_dim)?.value.re),
                    lambda,
                    n,
                    0.025,
                )?;
                worst_fd = worst_fd.max((fd - at_fd_dim).abs() / at_fd_dim.abs());
                if let Some(ref r) = integral {
                    worst_int = worst_int.max((r.values[0][0][n as usize].value.re - exact).abs());
                }
            }
        }
    }
    // The single-point wrapper must agree with the batch.
    let single = dn_r_m_integral(TraceFamily::Flat, c(lambda), g, eps, 1, 2, &QuadratureSpec::tanh_sinh(6))?.value;
    let op = dn_r_m_operator(Basis::Fock, g, c(lambda), eps, 1, 2, dim)?.value;
    worst_int = worst_int.max((single - op).norm());
    Ok(Outcome {
        max_residual: worst_fd.max(worst_int),
        passed: worst_fd < 1e-5 && worst_int < 1e-5,
        detail: format!("relative FD error {worst_fd:.2e}, integral vs operator {worst_int:.2e}"),
    })
}

/// Series routes against the eigenvalue oracle for the one-photon,
/// two-photon and oscillator models.
fn zeta_cross_validation(suite: Suite, _seed: u64) -> Result<Outcome> {
    let dim = match suite {
        Suite::Quick => 400,
        Suite::Full => 1600,
    };
    let mut cases: Vec<(ModelSpec, u32, f64)> = Vec::new();
    for &(g, delta, eps, lambda, n) in &[(0.2, 0.3, 0.1, 1.0, 2u32), (0.1, 0.2, 0.0, 1.5, 3u32)] {
        cases.push((ModelSpec::OnePhoton { g, delta, eps }, n, lambda));
        cases.push((ModelSpec::TwoPhoton { g, delta, eps }, n, lambda));
    }
    cases.push((ModelSpec::Ncho { alpha: 2.0, beta: 1.2, eta: 0.1 }, 2, 0.8));
    let mut worst_ratio: f64 = 0.0;
    let mut worst_err: f64 = 0.0;
    let mut worst_routes: f64 = 0.0;
    for (model, n, lambda) in cases {
        // The oracle's error estimate reaches 1e-14 for some models, so the
        // series tail target sits below it. The series routes keep the
        // default operator section; N applies to the eigenvalue oracle.
        let request = |method| {
            let mut r = ZetaRequest::new(model, n, c(lambda)).with_method(method);
            r.tol = 1e-14;
            r.max_m = 40;
            zeta_value(&r)
        };
        let integral = request(ZetaMethod::SeriesIntegral)?;
        let operator = request(ZetaMethod::SeriesOperator)?;
        let oracle = zeta_eigen_oracle(&model, n, c(lambda), dim)?;
        for s in [&integral, &operator] {
            let diff = (s.value - oracle.value).norm();
            worst_ratio = worst_ratio.max(diff / oracle.abs_error);
        }
        worst_routes = worst_routes.max((integral.value - operator.value).norm());
        worst_err = worst_err.max(oracle.abs_error).max(integral.abs_error).max(operator.abs_error);
    }
    let passed = worst_ratio <= 1.0 && worst_err <= 1e-4 && worst_routes < 1e-7;
    Ok(Outcome {
        max_residual: worst_err,
        passed,
        detail: format!(
            "oracle N = {dim}: max |series − oracle|/oracle_err {worst_ratio:.3}, integral vs operator {worst_routes:.2e}"
        ),
    })
}

/// Two-photon values against the sum of the two Bergman blocks, and the
/// Fock-space parity sectors against the block matrices entrywise.
fn parity_decomposition(suite: Suite, _seed: u64) -> Result<Outcome> {
    let dim = match suite {
        Suite::Quick => 200,
        Suite::Full => 400,
    };
    let mut worst_zeta: f64 = 0.0;
    for &(g, delta, eps, lambda, n) in &[(0.2, 0.3, 0.1, 1.0, 2u32), (0.1, 0.2, 0.0, 1.5, 3u32), (0.3, 0.1, 0.2, 0.9, 4u32)]
    {
        let run = |model| {
            let mut req = ZetaRequest::new(model, n, c(lambda)).with_method(ZetaMethod::SeriesOperator);
            req.trunc_n = dim;
            zeta_value(&req).map(|r| r.value)
        };
        let two = run(ModelSpec::TwoPhoton { g, delta, eps })?;
        let a = run(ModelSpec::BergmanNu { nu: 0.5, g, delta, eps })?;
        let b = run(ModelSpec::BergmanNu { nu: 1.5, g, delta, eps })?;
        worst_zeta = worst_zeta.max((two - a - b).norm());
    }
    let mut worst_entry: f64 = 0.0;
    let k = 40;
    for &(g, delta, eps) in &[(0.2, 0.3, 0.1), (0.7, 0.5, -0.2)] {
        let h = two_photon_fock_matrix(g, delta, eps, 2 * k);
        let blocks = model_block_matrices(&ModelSpec::TwoPhoton { g, delta, eps }, k)?;
        for (parity, blk) in blocks.iter().enumerate() {
            let idx = |i: usize, p: usize| 2 * (2 * (i / 2) + p) + i % 2;
            for i in 0..2 * k {
                for j in 0..2 * k {
                    worst_entry = worst_entry.max((h[(idx(i, parity), idx(j, parity))] - blk[(i, j)]).abs());
                    worst_entry = worst_entry.max(h[(idx(i, parity), idx(j, 1 - parity))].abs());
                }
            }
        }
    }
    Ok(Outcome {
        max_residual: worst_zeta,
        passed: worst_zeta < 1e-9 && worst_entry < 1e-13,
        detail: format!("zeta split {worst_zeta:.2e} (tol 1e-9), sector matrices {worst_entry:.2e} (tol 1e-13)"),
    })
}

/// Deviation of the rescaled Bergman values from the one-photon value as ν grows.
fn confluence(suite: Suite, _seed: u64) -> Result<Outcome> {
    let nus: &[f64] = match suite {
        Suite::Quick => &[8.0, 16.0, 32.0],
        Suite::Full => &[8.0, 16.0, 32.0, 64.0],
    };
    let (_, rows) = confluence_scan(0.2, 0.1, 0.05, c(1.5), 2, nus, ZetaMethod::SeriesOperator)?;
    let devs: Vec<f64> = rows.iter().map(|r| r.deviation).collect();
    let decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    let last = *devs.last().unwrap_or(&f64::NAN);
    Ok(Outcome {
        max_residual: last,
        passed: decreasing && last < devs[0],
        detail: format!(
            "deviations {}",
            rows.iter().map(|r| format!("ν={}: {:.3e}", r.nu, r.deviation)).collect::<Vec<_>>().join(", ")
        ),
    })
}

/// Positivity of Ψ − 2, the m = 1 closed forms and the symmetries of Φ and Ψ.
fn kernel_invariants(suite: Suite, seed: u64) -> Result<Outcome> {
    let samples = match suite {
        Suite::Quick => 10_000,
        Suite::Full => 100_000,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10);
    let mut non_positive = 0usize;
    let mut worst: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    for i in 0..samples {
        let m = 1 + i % 3;
        let g: f64 = rng.random_range(-1.0..=1.0);
        let u: Vec<f64> = (0..2 * m).map(|_| rng.random_range(f64::EPSILON..1.0)).collect();
        let uc: Vec<f64> = u.iter().map(|x| 1.0 - x).collect();
        if !(psi_minus_two(m, g, &u, &uc)? > 0.0) {
            non_positive += 1;
        }
        if i % 10 != 0 {
            continue;
        }
        // Symmetries on a moderate sub-box to keep magnitudes comparable.
        let v: Vec<f64> = u.iter().map(|x| 0.1 + 0.9 * x).collect();
        let (p0, s0) = (phi(m, &v)?, psi(m, g, &v)?);
        let mut shifted = v.clone();
        shifted.rotate_left(2);
        let mut reversed = v.clone();
        reversed.reverse();
        for w in [&shifted, &reversed] {
            worst = worst.max(rel(phi(m, w)?, p0)).max(rel(psi(m, g, w)?, s0));
        }
        if m == 1 {
            let (a, b) = (v[0], v[1]);
            worst = worst.max(rel(p0, (1.0 - a) * (1.0 - b)));
            let sh2 = (2.0 * g).sinh().powi(2);
            for s in [2.0, -2.0] {
                let lhs = a * b * (s0 + s);
                let rhs = (1.0 + s.signum() * a * b).powi(2) + sh2 * (1.0 - a * a) * (1.0 - b * b);
                worst = worst.max(rel(lhs, rhs));
            }
        }
    }
    Ok(Outcome {
        max_residual: worst,
        passed: non_positive == 0 && worst < 1e-13,
        detail: format!("{samples} points: {non_positive} with Ψ − 2 ≤ 0, identities {worst:.2e}"),
    })
}

/// B♭ₙ(n+1, ε) extrapolated to ε = 0 from ε = 1e-4 and 5e-5 in exact
/// arithmetic, against AₙΣ_{k≤n}1/k² − Bₙ.
fn flat_b_limit(_suite: Suite, _seed: u64) -> Result<Outcome> {
    let classic = apery_classic(8)?;
    let e1 = BigRational::new(BigInt::from(1), BigInt::from(10_000));
    let e2 = BigRational::new(BigInt::from(1), BigInt::from(20_000));
    let mut worst: f64 = 0.0;
    for n in 1..=8u32 {
        let lam = BigRational::from_integer(BigInt::from(n + 1));
        let b1 = apery_ab_flat_exact(n, &lam, &e1)?.b;
        let b2 = apery_ab_flat_exact(n, &lam, &e2)?.b;
        let three = BigRational::from_integer(BigInt::from(3));
        let four = BigRational::from_integer(BigInt::from(4));
        let limit = (four * b2 - b1) / three;
        let h2: BigRational =
            (1..=n as i64).map(|k| BigRational::new(BigInt::from(1), BigInt::from(k * k))).sum();
        let a = BigRational::from_integer(classic.a_list[n as usize].clone());
        let target = a * h2 - &classic.b_list[n as usize];
        worst = worst.max(crate::apery::rational_to_f64(&(limit - target)).abs());
    }
    Ok(Outcome::from_residual(worst, 1e-8, "n = 1..8, Richardson at ε = 1e-4, 5e-5".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_are_numbered_in_order() {
        let ids: Vec<u32> = criteria().iter().map(|c| c.id).collect();
        assert_eq!(ids, (1..=11).collect::<Vec<_>>());
    }

    #[test]
    fn central_difference_of_polynomial() {
        let d3 = central_difference(|x| Ok(x.powi(5)), 1.3, 3, 0.05).unwrap();
        assert!((d3 - 60.0 * 1.3f64.powi(2)).abs() < 1e-6);
        let d1 = central_difference(|x| Ok(x.exp()), 0.0, 1, 0.01).unwrap();
        assert!((d1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cheap_criteria_pass_in_quick_mode() {
        for id in [1, 2, 3, 10, 11] {
            let c = criteria().into_iter().find(|c| c.id == id).unwrap();
            let r = run_criterion(&c, Suite::Quick, DEFAULT_SEED);
            assert!(r.passed, "{}", r.line());
        }
    }

    #[test]
    fn failed_check_reports_error() {
        fn broken(_: Suite, _: u64) -> Result<Outcome> {
            Err(crate::error::Error::Domain("boom".into()))
        }
        let c = Criterion { id: 99, name: "broken", tolerance: 1.0, budget_s: 1.0, run: broken };
        let r = run_criterion(&c, Suite::Quick, 0);
        assert!(!r.passed && r.max_residual.is_nan() && r.detail.contains("boom"));
    }
}
