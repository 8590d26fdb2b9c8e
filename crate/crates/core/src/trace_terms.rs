//! Closed-form trace machinery for R_m.
//!
//! R_m is the trace of (h₊⁻¹h₋⁻¹)^m. It has integral representations over the
//! cube (0,1)^{2m} with kernels built from the cyclic polynomial Φ_m (Fock
//! family) and the 2×2 hyperbolic trace Ψ_m (Bergman families). This module
//! evaluates the kernels, integrates them with tensor tanh–sinh rules (m ≤ 2)
//! or Monte Carlo (m = 3), delegates m ≥ 4 to the operator oracle, and sums the
//! m = 1 series and hypergeometric closed forms.
//!
//! # Numerical form of the kernels
//!
//! Writing t_j = −log u_j, the product of the 2m matrices regroups as
//! B₁D₂B₃D₄⋯ with D = exp(tσ₃) and B = exp(tY), Y² = I. Each factor is I + E
//! with E = 2sinh²(t/2)·I + sinh(t)·(Y or σ₃), whose entries are evaluated from
//! 1 − u without cancellation. Accumulating E over the product yields Ψ − 2 as
//! −det E near the corner u = (1,…,1) and as tr E elsewhere, so the corner
//! singularity 1/√(Ψ−2) is resolved to full relative precision. Φ_m is
//! expanded once as a multilinear polynomial in d_j = 1 − u_j.

use std::ops::{Add, AddAssign, Mul};

use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::apery::{j_delta, j_flat, Delta, DeltaMethod, FlatMethod, HALF_INTEGER_GUARD};
use crate::error::{Error, Result};
use crate::operator_oracle::{dn_r_m_operator, Basis, DEFAULT_N};
use crate::quadrature::{integrate_monte_carlo, tanh_sinh_rule, Node, QuadratureSpec, Scheme, MAX_TENSOR_NODES};
use crate::specfun::{binomial, hypergeometric_pfq, pairwise_sum, RationalSeries, SeriesValue, C64};

/// Floor applied to Ψ − 2 at quadrature nodes.
pub const PSI_FLOOR: f64 = 1e-300;

/// Tail cutoff of the per-axis tanh–sinh rule (estimated node contribution).
const AXIS_CUTOFF: f64 = 1e-18;

/// Blocks of nodes whose combined contribution is bounded by this value are
/// skipped. The bound uses |kernel| ≤ 1/max_j(1 − u_j), which holds for the
/// Fock kernel at g = 0 and for 1/√(Ψ−2) at g = 0; for g ≠ 0 it is a
/// heuristic with many orders of magnitude of margin.
const PRUNE_BOUND: f64 = 1e-17;

/// Largest number of families in one integral batch.
pub const MAX_FAMILIES: usize = 8;

/// Largest derivative order in one integral batch.
pub const MAX_ORDER: usize = 15;

/// Family of trace terms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFamily {
    /// Fock-space family R_m^♭.
    Flat,
    /// Weighted-Bergman family R_m^ν with weight ν > 0.
    Nu(f64),
    /// R_m^+ = R_m^{1/2} + R_m^{3/2}.
    Plus,
    /// R_m^− = R_m^{1/2} − R_m^{3/2}.
    Minus,
}

impl TraceFamily {
    /// Offset added to Re λ − |Re ε| in the integrability condition.
    fn exponent_offset(self) -> f64 {
        match self {
            TraceFamily::Flat => 0.0,
            TraceFamily::Nu(nu) => nu,
            TraceFamily::Plus | TraceFamily::Minus => 0.5,
        }
    }

    fn validate(self) -> Result<()> {
        if let TraceFamily::Nu(nu) = self {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::Domain(format!("family weight must be positive, got {nu}")));
            }
        }
        Ok(())
    }

    fn uses_psi(self) -> bool {
        !matches!(self, TraceFamily::Flat)
    }
}

fn check_len(m: usize, u: &[f64]) -> Result<()> {
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    if u.len() != 2 * m {
        return Err(Error::LengthMismatch { expected: 2 * m, got: u.len() });
    }
    Ok(())
}

/// Φ_m(u) = m(1 + ∏u_j) + Σ_{l=1}^{2m−1} (−1)^l Σ_{k=1}^{2m} ∏_{j=k}^{k+l−1} u_j
/// with indices taken cyclically.
pub fn phi(m: usize, u: &[f64]) -> Result<f64> {
    check_len(m, u)?;
    Ok(phi_unchecked(m, u))
}

fn phi_unchecked(m: usize, u: &[f64]) -> f64 {
    let d = 2 * m;
    let total: f64 = u.iter().product();
    let mut s = m as f64 * (1.0 + total);
    for k in 0..d {
        let mut prod = 1.0;
        for l in 1..d {
            prod *= u[(k + l - 1) % d];
            s += if l % 2 == 1 { -prod } else { prod };
        }
    }
    s
}

/// Ψ_m^g(u): trace of the ordered product over j = 1..2m of
/// [[cosh 2g, (−1)^j sinh 2g], [(−1)^j sinh 2g, cosh 2g]]·diag(1/u_j, u_j).
pub fn psi(m: usize, g: f64, u: &[f64]) -> Result<f64> {
    check_len(m, u)?;
    let (c, s) = ((2.0 * g).cosh(), (2.0 * g).sinh());
    let mut p = [1.0, 0.0, 0.0, 1.0];
    for (j, &uj) in u.iter().enumerate() {
        // j is 0-based, so (−1)^{j+1}.
        let sj = if j % 2 == 0 { -s } else { s };
        let f = [c / uj, sj * uj, sj / uj, c * uj];
        p = mat_mul(&p, &f);
    }
    Ok(p[0] + p[3])
}

/// Ψ_m^g(u) − 2 evaluated from the complements `uc[j] = 1 − u[j]` without
/// cancellation near the corner, floored at [`PSI_FLOOR`].
pub fn psi_minus_two(m: usize, g: f64, u: &[f64], uc: &[f64]) -> Result<f64> {
    check_len(m, u)?;
    check_len(m, uc)?;
    let y = YMatrix::new(g);
    let mut e = [0.0; 4];
    for j in 0..2 * m {
        let f = axis_e(&y, j, u[j], uc[j]);
        e = compose(&e, &f);
    }
    Ok(psi_m2_from_e(&e))
}

type M2 = [f64; 4];

fn mat_mul(a: &M2, b: &M2) -> M2 {
    [a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]]
}

/// (I + a)(I + b) − I.
fn compose(a: &M2, b: &M2) -> M2 {
    let p = mat_mul(a, b);
    [a[0] + b[0] + p[0], a[1] + b[1] + p[1], a[2] + b[2] + p[2], a[3] + b[3] + p[3]]
}

fn psi_m2_from_e(e: &M2) -> f64 {
    let big = e.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let v = if big < 1.0 { e[1] * e[2] - e[0] * e[3] } else { e[0] + e[3] };
    v.max(PSI_FLOOR)
}

/// cosh 4g and sinh 4g, the entries of Y.
#[derive(Debug, Clone, Copy)]
struct YMatrix {
    c: f64,
    s: f64,
}

impl YMatrix {
    fn new(g: f64) -> Self {
        YMatrix { c: (4.0 * g).cosh(), s: (4.0 * g).sinh() }
    }
}

/// E for axis `j` (0-based): B-type on even j, D-type on odd j.
fn axis_e(y: &YMatrix, j: usize, x: f64, xc: f64) -> M2 {
    // 2sinh²(t/2) = (1−u)²/(2u), sinh t = (1−u)(1+u)/(2u).
    let a = xc * xc / (2.0 * x);
    let b = xc * (1.0 + x) / (2.0 * x);
    if j % 2 == 0 {
        [a + b * y.c, b * y.s, -b * y.s, a - b * y.c]
    } else {
        [xc / x, 0.0, 0.0, -xc]
    }
}

/// Multilinear coefficients of Φ_m(1 − d) in the variables d_j: entry `mask`
/// multiplies ∏_{j ∈ mask} d_j. Obtained by Möbius inversion of the integer
/// values of Φ_m on the vertices of the cube.
fn phi_coefficients(m: usize) -> Vec<f64> {
    let d = 2 * m;
    let n = 1usize << d;
    let vertex: Vec<f64> = (0..n)
        .map(|mask| {
            let u: Vec<f64> = (0..d).map(|j| if mask >> j & 1 == 1 { 0.0 } else { 1.0 }).collect();
            phi_unchecked(m, &u)
        })
        .collect();
    let mut c = vertex;
    for j in 0..d {
        for mask in 0..n {
            if mask >> j & 1 == 1 {
                c[mask] -= c[mask ^ (1 << j)];
            }
        }
    }
    c
}

/// Scalar type of the exponent weights: real for real (λ, ε), complex otherwise.
trait Weight:
    Copy + Send + Sync + Add<Output = Self> + AddAssign + Mul<Output = Self> + Mul<f64, Output = Self> + 'static
{
    const ZERO: Self;
    fn power(log_u: f64, a: C64) -> Self;
    fn magnitude(self) -> f64;
    fn to_c64(self) -> C64;
}

impl Weight for f64 {
    const ZERO: f64 = 0.0;
    fn power(log_u: f64, a: C64) -> f64 {
        (a.re * log_u).exp()
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
}

impl Weight for C64 {
    const ZERO: C64 = C64::new(0.0, 0.0);
    fn power(log_u: f64, a: C64) -> C64 {
        (a * log_u).exp()
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn to_c64(self) -> C64 {
        self
    }
}

/// A batch of R_m integrals sharing g and m: every (λ, ε) point, every family
/// and every derivative order 0..=nmax is accumulated from one pass over the
/// nodes.
#[derive(Debug, Clone)]
pub struct IntegralBatch {
    /// Coupling g.
    pub g: f64,
    /// Trace power m.
    pub m: usize,
    /// Parameter points (λ, ε).
    pub points: Vec<(C64, C64)>,
    /// Families to integrate.
    pub families: Vec<TraceFamily>,
    /// Highest λ-derivative order.
    pub nmax: usize,
}

/// Results of an [`IntegralBatch`]: `values[p][f][n]` is ∂ⁿR_m for point p and
/// family f.
#[derive(Debug, Clone)]
pub struct BatchResult {
    /// Values indexed by point, family, derivative order.
    pub values: Vec<Vec<Vec<SeriesValue>>>,
}

impl IntegralBatch {
    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Domain("m must be at least 1".into()));
        }
        if self.points.is_empty() || self.families.is_empty() {
            return Err(Error::Domain("integral batch needs at least one point and one family".into()));
        }
        if self.families.len() > MAX_FAMILIES || self.nmax > MAX_ORDER {
            return Err(Error::Domain(format!(
                "integral batch supports at most {MAX_FAMILIES} families and derivative order {MAX_ORDER}"
            )));
        }
        if !self.g.is_finite() {
            return Err(Error::Domain("g must be finite".into()));
        }
        for f in &self.families {
            f.validate()?;
            for &(l, e) in &self.points {
                if !(l.re.is_finite() && l.im.is_finite() && e.re.is_finite() && e.im.is_finite()) {
                    return Err(Error::Domain("λ and ε must be finite".into()));
                }
                let margin = l.re - e.re.abs() + f.exponent_offset();
                if !(margin > 0.0) {
                    return Err(Error::Domain(format!(
                        "integral representation needs Re λ − |Re ε| + {} > 0, got {margin}",
                        f.exponent_offset()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Smallest endpoint exponent over all axes, points and families.
    fn min_exponent(&self) -> f64 {
        let mut a = f64::INFINITY;
        for f in &self.families {
            for &(l, e) in &self.points {
                a = a.min((l + e).re + f.exponent_offset()).min((l - e).re + f.exponent_offset());
            }
        }
        a
    }

    /// Evaluates the batch with the given rule. Tanh–sinh and Gauss–Legendre
    /// require m ≤ 2, Monte Carlo m ≤ 3; m ≥ 4 is delegated to the operator
    /// oracle regardless of the rule.
    pub fn evaluate(&self, spec: &QuadratureSpec) -> Result<BatchResult> {
        self.validate()?;
        if self.m >= 4 {
            return self.delegate_to_operator();
        }
        match spec.scheme {
            Scheme::MonteCarlo => self.monte_carlo(spec.samples, spec.rng_seed),
            Scheme::TanhSinh | Scheme::GaussLegendre => {
                if self.m > 2 {
                    return Err(Error::Domain(format!(
                        "deterministic quadrature covers m <= 2 (d <= 4), got m = {}",
                        self.m
                    )));
                }
                let nodes = self.axis_nodes(spec)?;
                let count = (nodes.len() as f64).powi(2 * self.m as i32);
                // The four-dimensional rule visits half the tensor thanks to
                // the shift-by-two symmetry of the integrand.
                let visited = if self.m == 2 { count / 2.0 } else { count };
                if visited > 32.0 * MAX_TENSOR_NODES {
                    return Err(Error::Domain(format!("tensor rule with {count:e} nodes is too large")));
                }
                if spec.scheme == Scheme::TanhSinh {
                    return self.run_rule(&nodes, true);
                }
                // Gauss–Legendre: compare with the p/2-point rule.
                let mut fine = self.run_rule(&nodes, false)?;
                let half = spec.points_per_axis / 2;
                if half == 0 {
                    for v in fine.values.iter_mut().flatten().flatten() {
                        v.abs_error = f64::INFINITY;
                    }
                } else {
                    let coarse = self.run_rule(&self.axis_nodes(&QuadratureSpec::gauss_legendre(half))?, false)?;
                    for (vp, cp) in fine.values.iter_mut().zip(coarse.values) {
                        for (vf, cf) in vp.iter_mut().zip(cp) {
                            for (v, c) in vf.iter_mut().zip(cf) {
                                v.abs_error = (v.value - c.value).norm();
                            }
                        }
                    }
                }
                Ok(fine)
            }
        }
    }

    fn run_rule(&self, nodes: &[Node], with_coarse: bool) -> Result<BatchResult> {
        self.run_rule_pruned(nodes, with_coarse, PRUNE_BOUND)
    }

    fn run_rule_pruned(&self, nodes: &[Node], with_coarse: bool, prune: f64) -> Result<BatchResult> {
        let real = self.points.iter().all(|(l, e)| l.im == 0.0 && e.im == 0.0);
        if real {
            self.tensor::<f64>(nodes, with_coarse, prune)
        } else {
            self.tensor::<C64>(nodes, with_coarse, prune)
        }
    }

    fn axis_nodes(&self, spec: &QuadratureSpec) -> Result<Vec<Node>> {
        match spec.scheme {
            Scheme::TanhSinh => {
                if spec.level == 0 {
                    return Err(Error::Domain("tanh-sinh level must be at least 1".into()));
                }
                // Along a single axis every kernel stays bounded as u_j → 1,
                // so the upper tail uses exponent 1.
                Ok(tanh_sinh_rule(spec.level, self.min_exponent(), 1.0, AXIS_CUTOFF)
                    .into_iter()
                    .filter(|n| n.x > 0.0 && n.xc > 0.0)
                    .collect())
            }
            Scheme::GaussLegendre => {
                let (x, w) = crate::quadrature::gauss_legendre_nodes(spec.points_per_axis)?;
                Ok(x.iter().zip(&w).map(|(&x, &w)| Node { x, xc: 1.0 - x, w, coarse: false }).collect())
            }
            Scheme::MonteCarlo => unreachable!("Monte Carlo has no axis rule"),
        }
    }

    fn delegate_to_operator(&self) -> Result<BatchResult> {
        let mut values = Vec::with_capacity(self.points.len());
        for &(l, e) in &self.points {
            let mut per_family = Vec::with_capacity(self.families.len());
            for &fam in &self.families {
                let mut per_n = Vec::with_capacity(self.nmax + 1);
                for n in 0..=self.nmax {
                    per_n.push(family_operator(fam, self.g, l, e, self.m, n, DEFAULT_N)?);
                }
                per_family.push(per_n);
            }
            values.push(per_family);
        }
        Ok(BatchResult { values })
    }

    fn outputs(&self) -> usize {
        self.points.len() * self.families.len() * (self.nmax + 1)
    }

    /// Kernel values at a node given Ψ − 2 and the Fock kernel inputs.
    fn kernels(&self, out: &mut [f64], pm2: f64, flat: impl Fn() -> f64) {
        KernelPlan::new(&self.families).eval(out, pm2, flat);
    }

    fn tensor<W: Weight>(&self, nodes: &[Node], with_coarse: bool, prune: f64) -> Result<BatchResult> {
        let d = 2 * self.m;
        let np = self.points.len();
        let y = YMatrix::new(self.g);
        let four_g2 = 4.0 * self.g * self.g;
        let need_flat = self.families.contains(&TraceFamily::Flat);
        let phi_c = if need_flat { phi_coefficients(self.m) } else { vec![0.0; 1 << d] };

        // Per-node data shared by all axes.
        let prep: Vec<AxisData<W>> = nodes
            .iter()
            .map(|nd| {
                let log_u = if nd.x < 0.5 { nd.x.ln() } else { (-nd.xc).ln_1p() };
                let wts: Vec<[W; 2]> = self
                    .points
                    .iter()
                    .map(|&(l, e)| {
                        [
                            W::power(log_u, l + e - 1.0) * nd.w,
                            W::power(log_u, l - e - 1.0) * nd.w,
                        ]
                    })
                    .collect();
                let mag = wts.iter().flatten().fold(0.0f64, |m, w| m.max(w.magnitude()))
                    * (1.0 - log_u).powi(self.nmax as i32);
                AxisData {
                    x: nd.x,
                    xc: nd.xc,
                    inv_x: 1.0 / nd.x,
                    mag,
                    minus_log: -log_u,
                    coarse: nd.coarse,
                    wts,
                    e_b: axis_e(&y, 0, nd.x, nd.xc),
                    e_d: axis_e(&y, 1, nd.x, nd.xc),
                }
            })
            .collect();

        let nn = prep.len();
        let mut inner_w = Vec::with_capacity(np * nn);
        for p in 0..np {
            inner_w.extend(prep.iter().map(|a| a.wts[p][1]));
        }
        let mag_sum = prep.iter().map(|a| a.mag).sum();
        let ctx = TensorCtx {
            mag_sum,
            prune,
            plan: KernelPlan::new(&self.families),
            prep: &prep,
            inner_w,
            four_g2,
            need_flat,
            with_coarse,
            np,
            nmax: self.nmax,
        };
        let partials: Vec<Result<(Vec<W>, Vec<W>)>> = (0..nn)
            .into_par_iter()
            .map(|i0| {
                let mut acc = Accum::new(self.outputs());
                let mut scratch = Accum::new(self.outputs());
                let root = OuterState::root(&phi_c, np);
                let s1 = ctx.advance(&root, 0, i0, 1.0);
                if d == 2 {
                    ctx.inner(&s1, 0, false, &mut acc, &mut scratch)?;
                } else if !ctx.negligible(&s1, 3) {
                    for i1 in 0..nn {
                        let s2 = ctx.advance(&s1, 1, i1, 1.0);
                        if ctx.negligible(&s2, 2) {
                            continue;
                        }
                        // Shift-by-two symmetry: visit (i2, i3) ≥ (i0, i1).
                        for i2 in i0..nn {
                            let factor = if i2 > i0 { 2.0 } else { 1.0 };
                            let s3 = ctx.advance(&s2, 2, i2, factor);
                            if i2 > i0 && ctx.negligible(&s3, 1) {
                                continue;
                            }
                            if i2 > i0 {
                                ctx.inner(&s3, 0, false, &mut acc, &mut scratch)?;
                            } else {
                                ctx.inner(&s3, i1, true, &mut acc, &mut scratch)?;
                            }
                        }
                    }
                }
                Ok((acc.fine, acc.coarse))
            })
            .collect();

        let total = self.outputs();
        let mut fine_parts: Vec<Vec<C64>> = vec![Vec::with_capacity(nn); total];
        let mut coarse_parts: Vec<Vec<C64>> = vec![Vec::with_capacity(nn); total];
        for p in partials {
            let (f, c) = p?;
            for k in 0..total {
                fine_parts[k].push(f[k].to_c64());
                coarse_parts[k].push(c[k].to_c64());
            }
        }
        let coarse_scale = (1u64 << d) as f64;
        let terms = if self.m == 2 { (nn as u64).pow(4) / 2 } else { (nn as u64).pow(d as u32) };
        let mut values = Vec::with_capacity(np);
        for p in 0..np {
            let mut per_family = Vec::with_capacity(self.families.len());
            for f in 0..self.families.len() {
                let mut per_n = Vec::with_capacity(self.nmax + 1);
                for n in 0..=self.nmax {
                    let k = self.index(p, f, n);
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    let fine = pairwise_sum(&fine_parts[k]) * sign;
                    let abs_error = if with_coarse {
                        let coarse = pairwise_sum(&coarse_parts[k]) * (sign * coarse_scale);
                        (fine - coarse).norm()
                    } else {
                        f64::NAN
                    };
                    per_n.push(SeriesValue { value: fine, abs_error, terms_used: terms, converged: true });
                }
                per_family.push(per_n);
            }
            values.push(per_family);
        }
        Ok(BatchResult { values })
    }

    fn index(&self, p: usize, f: usize, n: usize) -> usize {
        (p * self.families.len() + f) * (self.nmax + 1) + n
    }

    fn monte_carlo(&self, samples: u64, seed: u64) -> Result<BatchResult> {
        let d = 2 * self.m;
        let y = YMatrix::new(self.g);
        let four_g2 = 4.0 * self.g * self.g;
        let phi_c = phi_coefficients(self.m);
        let need_flat = self.families.contains(&TraceFamily::Flat);
        let mut values = Vec::with_capacity(self.points.len());
        for &(l, e) in &self.points {
            let mut per_family = Vec::with_capacity(self.families.len());
            for fi in 0..self.families.len() {
                let mut per_n = Vec::with_capacity(self.nmax + 1);
                for n in 0..=self.nmax {
                    let f = |u: &[f64]| -> C64 {
                        let mut e_acc = [0.0; 4];
                        let mut log_sum = 0.0;
                        let mut cp = 0.0;
                        let mut expo = C64::new(0.0, 0.0);
                        for (j, &x) in u.iter().enumerate() {
                            let xc = 1.0 - x;
                            e_acc = compose(&e_acc, &axis_e(&y, j, x, xc));
                            let lu = x.ln();
                            log_sum += lu;
                            cp = xc + cp * x;
                            let a = if j % 2 == 0 { l + e - 1.0 } else { l - e - 1.0 };
                            expo += a * lu;
                        }
                        let pm2 = psi_m2_from_e(&e_acc);
                        let mut out = vec![0.0; self.families.len()];
                        self.kernels(&mut out, pm2, || {
                            let dvals: Vec<f64> = u.iter().map(|x| 1.0 - x).collect();
                            let ph = eval_multilinear(&phi_c, &dvals);
                            flat_kernel(need_flat, four_g2, ph, cp)
                        });
                        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                        expo.exp() * out[fi] * (-log_sum).powi(n as i32) * sign
                    };
                    per_n.push(integrate_monte_carlo(f, d, samples, seed)?);
                }
                per_family.push(per_n);
            }
            values.push(per_family);
        }
        Ok(BatchResult { values })
    }
}

fn eval_multilinear(c: &[f64], d: &[f64]) -> f64 {
    let mut s = 0.0;
    for (mask, &cm) in c.iter().enumerate() {
        if cm == 0.0 {
            continue;
        }
        let mut p = cm;
        for (j, &dj) in d.iter().enumerate() {
            if mask >> j & 1 == 1 {
                p *= dj;
            }
        }
        s += p;
    }
    s
}

fn flat_kernel(need: bool, four_g2: f64, phi: f64, one_minus_p: f64) -> f64 {
    if !need {
        return 0.0;
    }
    if four_g2 == 0.0 {
        1.0 / one_minus_p
    } else {
        (-four_g2 * phi / one_minus_p).exp() / one_minus_p
    }
}

/// Per-family kernel selector with the special weights ν = ½, 1, 3/2
/// resolved ahead of the node loop.
#[derive(Debug, Clone)]
struct KernelPlan {
    kinds: Vec<Kind>,
    psi: bool,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Flat,
    Plus,
    Minus,
    NuHalf,
    NuOne,
    NuThreeHalves,
    Nu(f64),
}

impl KernelPlan {
    fn new(families: &[TraceFamily]) -> Self {
        let kinds = families
            .iter()
            .map(|f| match *f {
                TraceFamily::Flat => Kind::Flat,
                TraceFamily::Plus => Kind::Plus,
                TraceFamily::Minus => Kind::Minus,
                TraceFamily::Nu(nu) if nu == 0.5 => Kind::NuHalf,
                TraceFamily::Nu(nu) if nu == 1.0 => Kind::NuOne,
                TraceFamily::Nu(nu) if nu == 1.5 => Kind::NuThreeHalves,
                TraceFamily::Nu(nu) => Kind::Nu(2.0 * nu - 2.0),
            })
            .collect();
        KernelPlan { kinds, psi: families.iter().any(|f| f.uses_psi()) }
    }

    /// With S± = √(Ψ±2) and q = 2/(S₊+S₋) = (S₊−S₋)/2: Plus = 1/S₋,
    /// Minus = 1/S₊, Nu(ν) = q^{2ν−2}/(S₊S₋).
    #[inline(always)]
    fn eval(&self, out: &mut [f64], pm2: f64, flat: impl Fn() -> f64) {
        let (mut sp, mut sm, mut inv_prod, mut q) = (0.0, 0.0, 0.0, 0.0);
        if self.psi {
            sm = pm2.sqrt();
            sp = (pm2 + 4.0).sqrt();
            inv_prod = 1.0 / (sp * sm);
            q = 2.0 / (sp + sm);
        }
        for (o, k) in out.iter_mut().zip(&self.kinds) {
            *o = match *k {
                Kind::Flat => flat(),
                Kind::Plus => sp * inv_prod,
                Kind::Minus => sm * inv_prod,
                Kind::NuHalf => 0.5 * (sp + sm) * inv_prod,
                Kind::NuOne => inv_prod,
                Kind::NuThreeHalves => q * inv_prod,
                Kind::Nu(p) => (p * q.ln()).exp() * inv_prod,
            };
        }
    }
}

struct AxisData<W> {
    x: f64,
    xc: f64,
    inv_x: f64,
    /// Bound on |weight·(−log u)^nmax| over points and parities.
    mag: f64,
    minus_log: f64,
    coarse: bool,
    wts: Vec<[W; 2]>,
    e_b: M2,
    e_d: M2,
}

/// Partial state after fixing the outer axes.
struct OuterState<W> {
    e: M2,
    phi: Vec<f64>,
    cp: f64,
    minus_log: f64,
    wts: Vec<W>,
    coarse: bool,
    /// Product of the fixed axes' magnitude bounds.
    mag: f64,
    /// Largest 1 − u_j over the fixed axes.
    xc_max: f64,
}

impl<W: Weight> OuterState<W> {
    fn root(phi_c: &[f64], np: usize) -> Self {
        OuterState {
            e: [0.0; 4],
            phi: phi_c.to_vec(),
            cp: 0.0,
            minus_log: 0.0,
            wts: vec![W::ZERO; np].into_iter().map(|_| one::<W>()).collect(),
            coarse: true,
            mag: 1.0,
            xc_max: 0.0,
        }
    }
}

fn one<W: Weight>() -> W {
    W::power(0.0, C64::new(0.0, 0.0))
}

struct Accum<W> {
    fine: Vec<W>,
    coarse: Vec<W>,
}

impl<W: Weight> Accum<W> {
    fn new(n: usize) -> Self {
        Accum { fine: vec![W::ZERO; n], coarse: vec![W::ZERO; n] }
    }
}

struct TensorCtx<'a, W> {
    plan: KernelPlan,
    prep: &'a [AxisData<W>],
    /// Innermost-axis weights, `inner_w[p·nn + i]` for point p and node i.
    inner_w: Vec<W>,
    four_g2: f64,
    need_flat: bool,
    with_coarse: bool,
    np: usize,
    nmax: usize,
    /// Σ_i mag_i over the rule.
    mag_sum: f64,
    /// Pruning threshold (zero disables pruning).
    prune: f64,
}

impl<W: Weight> TensorCtx<'_, W> {
    /// Fixes axis `j` at node `i`; `factor` multiplies the weights.
    fn advance(&self, s: &OuterState<W>, j: usize, i: usize, factor: f64) -> OuterState<W> {
        let a = &self.prep[i];
        let ej = if j % 2 == 0 { &a.e_b } else { &a.e_d };
        let phi = if self.need_flat {
            let half = s.phi.len() / 2;
            (0..half).map(|k| s.phi[2 * k] + a.xc * s.phi[2 * k + 1]).collect()
        } else {
            Vec::new()
        };
        OuterState {
            e: compose(&s.e, ej),
            phi,
            cp: a.xc + s.cp * a.x,
            minus_log: s.minus_log + a.minus_log,
            wts: s.wts.iter().zip(&a.wts).map(|(&w, aw)| w * aw[j % 2] * factor).collect(),
            coarse: s.coarse && a.coarse,
            mag: s.mag * a.mag * factor,
            xc_max: s.xc_max.max(a.xc),
        }
    }

    /// Whether every node completing `s` over `free` further axes is negligible.
    fn negligible(&self, s: &OuterState<W>, free: i32) -> bool {
        s.mag * self.mag_sum.powi(free) < self.prune * s.xc_max
    }

    /// Innermost axis over nodes `start..`. With `diag` set (equal to
    /// `start`), the first node counts once and the others twice, which
    /// completes the symmetric half of the four-dimensional tensor. Partial
    /// sums are collected locally and then added to `acc`.
    fn inner(&self, s: &OuterState<W>, start: usize, diag: bool, acc: &mut Accum<W>, scratch: &mut Accum<W>) -> Result<()> {
        let nn = self.prep.len();
        let nf = self.plan.kinds.len();
        let nmax = self.nmax;
        let stride = nf * (nmax + 1);
        scratch.fine.iter_mut().for_each(|v| *v = W::ZERO);
        scratch.coarse.iter_mut().for_each(|v| *v = W::ZERO);
        let e = s.e;
        let (phi0, phi1) = if self.need_flat { (s.phi[0], s.phi[1]) } else { (0.0, 0.0) };
        let mut kv_buf = [0.0f64; MAX_FAMILIES];
        let mut lpow = [1.0f64; MAX_ORDER + 1];
        // Trim negligible nodes from both ends of the innermost axis (the
        // diagonal node of the symmetric half is always kept).
        let scale = s.mag / s.xc_max;
        let keep = |i: usize| self.prep[i].mag * scale >= self.prune;
        let mut lo = start;
        if !diag {
            while lo < nn && !keep(lo) {
                lo += 1;
            }
        }
        let mut hi = nn;
        while hi > lo + 1 && !keep(hi - 1) {
            hi -= 1;
        }
        for i in lo..hi {
            let a = &self.prep[i];
            let (x, xc) = (a.x, a.xc);
            // The innermost axis has odd index, so its factor is diagonal:
            // (I + E)·diag(1/x, x) − I.
            let pm2 = if self.plan.psi {
                psi_m2_from_e(&[(e[0] + xc) * a.inv_x, e[1] * x, e[2] * a.inv_x, e[3] * x - xc])
            } else {
                0.0
            };
            let kv = &mut kv_buf[..nf];
            self.plan.eval(kv, pm2, || {
                let cp = xc + s.cp * x;
                flat_kernel(true, self.four_g2, phi0 + xc * phi1, cp)
            });
            let lg = s.minus_log + a.minus_log;
            for n in 1..=nmax {
                lpow[n] = lpow[n - 1] * lg;
            }
            let factor = if diag && i != start { 2.0 } else { 1.0 };
            let both_coarse = self.with_coarse && s.coarse && a.coarse;
            for p in 0..self.np {
                let w = s.wts[p] * self.inner_w[p * nn + i] * factor;
                let row = &mut scratch.fine[p * stride..(p + 1) * stride];
                for (f, &k) in kv.iter().enumerate() {
                    let wk = w * k;
                    for n in 0..=nmax {
                        row[f * (nmax + 1) + n] += wk * lpow[n];
                    }
                }
                if both_coarse {
                    let row = &mut scratch.coarse[p * stride..(p + 1) * stride];
                    for (f, &k) in kv.iter().enumerate() {
                        let wk = w * k;
                        for n in 0..=nmax {
                            row[f * (nmax + 1) + n] += wk * lpow[n];
                        }
                    }
                }
            }
        }
        for (t, v) in acc.fine.iter_mut().zip(&scratch.fine) {
            *t += *v;
        }
        for (t, v) in acc.coarse.iter_mut().zip(&scratch.coarse) {
            *t += *v;
        }
        let bad = scratch.fine.iter().any(|v| {
            let c = v.to_c64();
            !(c.re.is_finite() && c.im.is_finite())
        });
        if bad {
            return Err(Error::NodeSingularity(vec![s.cp, s.minus_log]));
        }
        Ok(())
    }
}

/// Operator-oracle value of ∂ⁿR_m for a family (Plus/Minus combine the two
/// Bergman weights).
pub fn family_operator(family: TraceFamily, g: f64, lambda: C64, eps: C64, m: usize, n: usize, dim: usize) -> Result<SeriesValue> {
    match family {
        TraceFamily::Flat => dn_r_m_operator(Basis::Fock, g, lambda, eps, m, n, dim),
        TraceFamily::Nu(nu) => dn_r_m_operator(Basis::Bergman(nu), g, lambda, eps, m, n, dim),
        TraceFamily::Plus | TraceFamily::Minus => {
            let a = dn_r_m_operator(Basis::Bergman(0.5), g, lambda, eps, m, n, dim)?;
            let b = dn_r_m_operator(Basis::Bergman(1.5), g, lambda, eps, m, n, dim)?;
            let sign = if family == TraceFamily::Plus { 1.0 } else { -1.0 };
            Ok(a.add(b.scale(C64::new(sign, 0.0))))
        }
    }
}

/// R_m(λ; g, ε) of the family by its integral representation.
///
/// Deterministic rules cover m ≤ 2; Monte Carlo covers m = 3; m ≥ 4 is
/// delegated to the operator oracle. `abs_error` is the level ℓ versus ℓ − 1
/// difference for tanh–sinh, the p versus p/2 difference for Gauss–Legendre,
/// and the standard error for Monte Carlo.
pub fn r_m_integral(family: TraceFamily, lambda: C64, g: f64, eps: C64, m: usize, spec: &QuadratureSpec) -> Result<SeriesValue> {
    dn_r_m_integral(family, lambda, g, eps, m, 0, spec)
}

/// ∂ⁿR_m/∂λⁿ by differentiating under the integral sign (weight (log ∏u_j)ⁿ).
pub fn dn_r_m_integral(
    family: TraceFamily,
    lambda: C64,
    g: f64,
    eps: C64,
    m: usize,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<SeriesValue> {
    let batch = IntegralBatch { g, m, points: vec![(lambda, eps)], families: vec![family], nmax: n };
    let mut r = batch.evaluate(spec)?;
    Ok(r.values.remove(0).remove(0).remove(n))
}

/// ∂ⁿ/∂λⁿ [λ^{2m}·R_m] from the derivatives ∂^j R_m, j = 0..=n, by the Leibniz
/// rule with ∂^l λ^{2m} = (2m)!/(2m−l)!·λ^{2m−l} in closed form.
pub fn leibniz_lambda_power(lambda: C64, m: usize, derivs: &[SeriesValue]) -> SeriesValue {
    let n = derivs.len() - 1;
    let mut value = C64::new(0.0, 0.0);
    let mut err = 0.0;
    for l in 0..=n.min(2 * m) {
        let falling: f64 = (0..l).map(|i| (2 * m - i) as f64).product();
        let coef = binomial(n as u64, l as u64) * falling;
        let pw = lambda.powu((2 * m - l) as u32) * coef;
        value += pw * derivs[n - l].value;
        err += pw.norm() * derivs[n - l].abs_error;
    }
    let terms = derivs.iter().map(|d| d.terms_used).max().unwrap_or(0);
    SeriesValue { value, abs_error: err, terms_used: terms, converged: derivs.iter().all(|d| d.converged) }
}

/// ∂ⁿR_m by integration, optionally as ∂ⁿ[λ^{2m}R_m] (the form entering the
/// oscillator series) when `lambda_power` is set.
pub fn dn_r_m_integral_with(
    family: TraceFamily,
    lambda: C64,
    g: f64,
    eps: C64,
    m: usize,
    n: usize,
    spec: &QuadratureSpec,
    lambda_power: bool,
) -> Result<SeriesValue> {
    let batch = IntegralBatch { g, m, points: vec![(lambda, eps)], families: vec![family], nmax: n };
    let mut r = batch.evaluate(spec)?;
    let derivs = r.values.remove(0).remove(0);
    if lambda_power {
        Ok(leibniz_lambda_power(lambda, m, &derivs))
    } else {
        Ok(derivs[n])
    }
}

/// Family selector for the m = 1 closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum R1Family {
    /// R₁ of the Fock family.
    Flat,
    /// R₁^± = R₁^{1/2} ± R₁^{3/2}.
    Delta(Delta),
}

/// Cap on the number of terms of the m = 1 coupling series.
const R1_TERM_CAP: u32 = 5000;

/// Accumulates a power series in the coupling until three consecutive terms
/// fall below `tol·|partial|`.
fn coupling_series<F>(tol: f64, mut term: F) -> Result<SeriesValue>
where
    F: FnMut(u32) -> Result<Option<SeriesValue>>,
{
    let mut acc = crate::specfun::CompensatedSum::new();
    let mut err = 0.0;
    let mut abs_sum = 0.0;
    let mut small = 0;
    for n in 0..R1_TERM_CAP {
        let Some(t) = term(n)? else {
            return Ok(SeriesValue::new(acc.total(), err + 4.0 * f64::EPSILON * abs_sum, n as u64));
        };
        acc.add(t.value);
        err += t.abs_error;
        abs_sum += t.value.norm();
        if t.value.norm() <= tol * acc.total().norm() {
            small += 1;
            if small >= 3 {
                let tail = t.value.norm();
                return Ok(SeriesValue::new(acc.total(), err + tail + 4.0 * f64::EPSILON * abs_sum, n as u64 + 1));
            }
        } else {
            small = 0;
        }
    }
    Err(Error::NoConvergence(format!("m = 1 coupling series did not settle within {R1_TERM_CAP} terms")))
}

/// R₁(λ; g, ε) as a power series in the coupling with Beukers-type coefficients:
/// Σₙ (−4g²)ⁿ/n!·J♭ₙ(λ,ε) for the Fock family and
/// sech(2g)·Σₙ (½)ₙ/n!·tanh²ⁿ(2g)·Jᵟ₂ₙ(λ,ε) for R₁^±.
pub fn r_1_series(family: R1Family, lambda: C64, g: f64, eps: C64, tol: f64) -> Result<SeriesValue> {
    match family {
        R1Family::Flat => {
            let x = -4.0 * g * g;
            let mut coef = 1.0;
            coupling_series(tol, |n| {
                if n > 0 {
                    coef *= x / n as f64;
                }
                if coef == 0.0 && n > 0 {
                    return Ok(None);
                }
                let j = j_flat(n, lambda, eps, FlatMethod::Series, 1e-15)?;
                Ok(Some(j.scale(C64::new(coef, 0.0))))
            })
        }
        R1Family::Delta(delta) => {
            let t2 = (2.0 * g).tanh().powi(2);
            let mut coef = 1.0;
            let sum = coupling_series(tol, |n| {
                if n > 0 {
                    coef *= (n as f64 - 0.5) / n as f64 * t2;
                }
                if coef == 0.0 && n > 0 {
                    return Ok(None);
                }
                let j = j_delta(2 * n, delta, lambda, eps, DeltaMethod::Series, 1e-15)?;
                Ok(Some(j.scale(C64::new(coef, 0.0))))
            })?;
            Ok(sum.scale(C64::new(1.0 / (2.0 * g).cosh(), 0.0)))
        }
    }
}

/// R₁^±(λ; g, ε) through a ₃F₂ closed form:
/// sech(2g)·[₃F₂(½, ½+λ, ½−λ; 1+ε, 1−ε; tanh²2g)·Σₖ δᵏ/((λ+ε+k+½)(λ−ε+k+½))
/// + Σₙ (½)ₙ/n!·tanh²ⁿ(2g)·Sₙ], where Sₙ is a finite l-sum of Pochhammer ratios.
pub fn r_1_hypergeometric(delta: Delta, lambda: C64, g: f64, eps: C64) -> Result<SeriesValue> {
    let tol = 1e-16;
    for k in 1..=(eps.norm().ceil() as i64 + 1) {
        for s in [k as f64, -(k as f64)] {
            if (eps - s).norm() <= HALF_INTEGER_GUARD {
                return Err(Error::Pole(format!("ε = {eps} is at the nonzero integer {s}")));
            }
        }
    }
    let half = C64::new(0.5, 0.0);
    let one = C64::new(1.0, 0.0);
    let t2 = (2.0 * g).tanh().powi(2);
    let alt = delta == Delta::Minus;
    let base = RationalSeries::new(vec![(lambda + eps + 0.5, -1), (lambda - eps + 0.5, -1)]).alternating(alt).sum()?;
    let f = hypergeometric_pfq(&[half, half + lambda, half - lambda], &[one + eps, one - eps], C64::new(t2, 0.0), tol)?;
    let head = SeriesValue::new(f.value * base.value, f.abs_error * base.value.norm() + base.abs_error * f.value.norm(), f.terms_used + base.terms_used);
    let mut coef = 1.0;
    let correction = coupling_series(tol, |n| {
        if n == 0 {
            return Ok(Some(SeriesValue::exact(C64::new(0.0, 0.0))));
        }
        coef *= (n as f64 - 0.5) / n as f64 * t2;
        if coef == 0.0 {
            return Ok(None);
        }
        let nf = n as f64;
        // Sₙ = Σ_{l<n} w_l · (λ−n+½)_l(−λ−n+½)_l / ((ε−n)_{l+1}(−ε−n)_{l+1}).
        let mut ratio = one / ((eps - nf) * (-eps - nf));
        let mut s = C64::new(0.0, 0.0);
        for l in 0..n {
            let lf = l as f64;
            if l > 0 {
                ratio *= (lambda - nf + 0.5 + lf - 1.0) * (-lambda - nf + 0.5 + lf - 1.0) / ((eps - nf + lf) * (-eps - nf + lf));
            }
            let w = match delta {
                Delta::Plus => lambda / (2.0 * (nf - lf) - 1.0),
                Delta::Minus => half,
            };
            s += ratio * w;
        }
        Ok(Some(SeriesValue::new(s * coef, 4.0 * f64::EPSILON * (s * coef).norm() * nf, n as u64)))
    })?;
    Ok(head.add(correction).scale(C64::new(1.0 / (2.0 * g).cosh(), 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_oracle::r_m_operator;
    use crate::specfun::hurwitz_zeta;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn phi_examples() {
        assert!((phi(1, &[0.5, 0.5]).unwrap() - 0.25).abs() < 1e-15);
        for m in 1..=4 {
            assert!(phi(m, &vec![1.0; 2 * m]).unwrap().abs() < 1e-13);
        }
        // m = 2 expanded by hand: 2(1+abcd) − (a+b+c+d) + (ab+bc+cd+da) − (abc+bcd+cda+dab).
        let u = [0.3, 0.55, 0.71, 0.42];
        let (a, b, cc, d) = (u[0], u[1], u[2], u[3]);
        let hand = 2.0 * (1.0 + a * b * cc * d) - (a + b + cc + d) + (a * b + b * cc + cc * d + d * a)
            - (a * b * cc + b * cc * d + cc * d * a + d * a * b);
        assert!((phi(2, &u).unwrap() - hand).abs() < 1e-14);
        assert!((phi(2, &[0.5; 4]).unwrap() - (2.0 * (1.0 + 0.0625) - 2.0 + 1.0 - 0.5)).abs() < 1e-15);
        assert!(matches!(phi(2, &[0.5; 3]), Err(Error::LengthMismatch { expected: 4, got: 3 })));
    }

    #[test]
    fn phi_coefficients_reproduce_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 1..=3 {
            let c = phi_coefficients(m);
            assert_eq!(c[0], 0.0);
            for j in 0..2 * m {
                assert_eq!(c[1 << j], 0.0);
            }
            for _ in 0..50 {
                let u: Vec<f64> = (0..2 * m).map(|_| rng.random::<f64>()).collect();
                let d: Vec<f64> = u.iter().map(|x| 1.0 - x).collect();
                assert!((eval_multilinear(&c, &d) - phi(m, &u).unwrap()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn psi_examples() {
        let (u, v, g) = (0.37, 0.81, 0.23f64);
        let (ch, sh) = ((2.0 * g).cosh(), (2.0 * g).sinh());
        let expect = (1.0 / (u * v) + u * v) * ch * ch - (u / v + v / u) * sh * sh;
        assert!((psi(1, g, &[u, v]).unwrap() - expect).abs() < 1e-13);
        assert!((psi(1, 0.0, &[u, v]).unwrap() - (u * v + 1.0 / (u * v))).abs() < 1e-13);
        for m in 1..=3 {
            assert!((psi(m, 0.7, &vec![1.0; 2 * m]).unwrap() - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn psi_one_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (u, v) = (rng.random::<f64>(), rng.random::<f64>());
            let g = rng.random_range(-1.0..1.0);
            let p = psi(1, g, &[u, v]).unwrap();
            let s2 = (2.0 * g).sinh().powi(2);
            let common = s2 * (1.0 - u * u) * (1.0 - v * v);
            let plus = (1.0 + u * v).powi(2) + common;
            let minus = (1.0 - u * v).powi(2) + common;
            assert!((u * v * (p + 2.0) - plus).abs() < 1e-13 * plus.max(1.0));
            assert!((u * v * (p - 2.0) - minus).abs() < 1e-13 * plus.max(1.0));
        }
    }

    #[test]
    fn stable_psi_matches_direct_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 1..=3 {
            for _ in 0..300 {
                let g = rng.random_range(-1.0..1.0);
                let u: Vec<f64> = (0..2 * m).map(|_| rng.random_range(0.05..1.0)).collect();
                let uc: Vec<f64> = u.iter().map(|x| 1.0 - x).collect();
                let direct = psi(m, g, &u).unwrap() - 2.0;
                let stable = psi_minus_two(m, g, &u, &uc).unwrap();
                assert!((direct - stable).abs() < 1e-10 * (direct.abs() + 1.0), "m={m} {direct} {stable}");
            }
        }
        // Near the corner the stable form keeps relative accuracy where the
        // direct product has cancelled: at u_j = 1 − h the leading term is
        // h²·q(1,…,1) with a positive quadratic form.
        let g = 0.4;
        let h = 1e-9;
        let u = [1.0 - h; 4];
        let uc = [h; 4];
        let v = psi_minus_two(2, g, &u, &uc).unwrap();
        let v2 = psi_minus_two(2, g, &[1.0 - 2.0 * h; 4], &[2.0 * h; 4]).unwrap();
        assert!(v > 0.0 && ((v2 / v) - 4.0).abs() < 1e-6, "{v} {v2}");
    }

    #[test]
    fn plus_at_zero_coupling_is_hurwitz() {
        let v = r_m_integral(TraceFamily::Plus, c(1.0), 0.0, c(0.0), 1, &QuadratureSpec::tanh_sinh(7)).unwrap();
        let z = hurwitz_zeta(2, c(1.5)).unwrap().value;
        assert!((v.value - z).norm() < 1e-8, "{} {}", v.value, z);
    }

    #[test]
    fn flat_at_zero_coupling_is_j0() {
        let (l, e) = (1.2, 0.1);
        let v = r_m_integral(TraceFamily::Flat, c(l), 0.0, c(e), 1, &QuadratureSpec::tanh_sinh(7)).unwrap();
        // Σ 1/((λ+ε+k)(λ−ε+k)) = (ψ(λ+ε) − ψ(λ−ε))/(2ε).
        let d = (crate::specfun::digamma(c(l + e)).unwrap() - crate::specfun::digamma(c(l - e)).unwrap()) / (2.0 * e);
        assert!((v.value - d).norm() < 1e-8, "{} {}", v.value, d);
    }

    #[test]
    fn m1_matches_operator() {
        let spec = QuadratureSpec::tanh_sinh(7);
        for fam in [TraceFamily::Flat, TraceFamily::Plus, TraceFamily::Minus, TraceFamily::Nu(0.5), TraceFamily::Nu(1.5)] {
            let v = r_m_integral(fam, c(1.2), 0.3, c(0.1), 1, &spec).unwrap();
            let o = family_operator(fam, 0.3, c(1.2), c(0.1), 1, 0, 800).unwrap();
            assert!((v.value - o.value).norm() < 1e-8, "{fam:?}: {} vs {}", v.value, o.value);
        }
    }

    #[test]
    fn pruning_is_invisible() {
        for (g, m) in [(0.5, 2usize), (0.9, 1), (0.0, 2)] {
            let batch = IntegralBatch {
                g,
                m,
                points: vec![(c(1.0), c(0.15)), (C64::new(1.5, 0.3), c(-0.1))],
                families: vec![TraceFamily::Flat, TraceFamily::Plus, TraceFamily::Minus, TraceFamily::Nu(2.5)],
                nmax: 3,
            };
            let nodes = batch.axis_nodes(&QuadratureSpec::tanh_sinh(3)).unwrap();
            let a = batch.run_rule_pruned(&nodes, true, PRUNE_BOUND).unwrap();
            let b = batch.run_rule_pruned(&nodes, true, 0.0).unwrap();
            for (x, y) in a.values.iter().flatten().flatten().zip(b.values.iter().flatten().flatten()) {
                assert!((x.value - y.value).norm() < 1e-13 * y.value.norm().max(1.0), "{} {}", x.value, y.value);
            }
        }
    }

    #[test]
    fn plus_minus_consistency() {
        let batch = IntegralBatch {
            g: 0.3,
            m: 1,
            points: vec![(c(1.0), c(0.15))],
            families: vec![TraceFamily::Plus, TraceFamily::Minus, TraceFamily::Nu(0.5), TraceFamily::Nu(1.5)],
            nmax: 0,
        };
        let r = batch.evaluate(&QuadratureSpec::tanh_sinh(6)).unwrap();
        let v: Vec<C64> = r.values[0].iter().map(|f| f[0].value).collect();
        assert!((v[0] - (v[2] + v[3])).norm() < 1e-12);
        assert!((v[1] - (v[2] - v[3])).norm() < 1e-12);
    }

    #[test]
    fn derivative_matches_operator() {
        let spec = QuadratureSpec::tanh_sinh(7);
        let v = dn_r_m_integral(TraceFamily::Flat, c(1.5), 0.25, c(0.1), 1, 2, &spec).unwrap();
        let o = family_operator(TraceFamily::Flat, 0.25, c(1.5), c(0.1), 1, 2, 800).unwrap();
        assert!((v.value - o.value).norm() < 1e-7 * o.value.norm(), "{} {}", v.value, o.value);
        // Flat, g = 0: finite difference of the integral.
        let h = 1e-3;
        let f = |l: f64| r_m_integral(TraceFamily::Flat, c(l), 0.0, c(0.2), 1, &spec).unwrap().value;
        let fd = (f(1.3 + h) - f(1.3 - h)) / (2.0 * h);
        let d1 = dn_r_m_integral(TraceFamily::Flat, c(1.3), 0.0, c(0.2), 1, 1, &spec).unwrap().value;
        assert!((fd - d1).norm() < 1e-5 * d1.norm());
        assert!(d1.im == 0.0 && d1.re < 0.0);
    }

    #[test]
    fn complex_parameters() {
        let spec = QuadratureSpec::tanh_sinh(6);
        let (l, e) = (C64::new(1.3, 0.4), C64::new(0.1, -0.2));
        let v = r_m_integral(TraceFamily::Plus, l, 0.2, e, 1, &spec).unwrap();
        let o = family_operator(TraceFamily::Plus, 0.2, l, e, 1, 0, 800).unwrap();
        assert!((v.value - o.value).norm() < 1e-8, "{} {}", v.value, o.value);
    }

    #[test]
    fn leibniz_matches_direct_product() {
        // With R ≡ e^{λ} all derivatives equal e^{λ}; ∂ⁿ[λ^{2m} e^{λ}] has the
        // closed form e^{λ} Σ_l C(n,l)(2m)_l↓ λ^{2m−l}.
        let lambda = C64::new(0.7, 0.2);
        let derivs: Vec<SeriesValue> = (0..=3).map(|_| SeriesValue::exact(lambda.exp())).collect();
        let v = leibniz_lambda_power(lambda, 1, &derivs).value;
        // n = 3, m = 1: λ² + 3·2λ + 3·2 = λ² + 6λ + 6.
        let expect = lambda.exp() * (lambda * lambda + lambda * 6.0 + 6.0);
        assert!((v - expect).norm() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let spec = QuadratureSpec::tanh_sinh(4);
        assert!(matches!(r_m_integral(TraceFamily::Flat, c(0.1), 0.1, c(0.2), 1, &spec), Err(Error::Domain(_))));
        assert!(r_m_integral(TraceFamily::Plus, c(0.1), 0.1, c(0.2), 1, &spec).is_ok());
        assert!(matches!(r_m_integral(TraceFamily::Nu(-1.0), c(1.0), 0.1, c(0.0), 1, &spec), Err(Error::Domain(_))));
        assert!(matches!(r_m_integral(TraceFamily::Flat, c(1.0), 0.1, c(0.0), 3, &spec), Err(Error::Domain(_))));
    }

    #[test]
    fn delegation_for_large_m() {
        let spec = QuadratureSpec::tanh_sinh(5);
        let v = r_m_integral(TraceFamily::Flat, c(1.5), 0.2, c(0.1), 4, &spec).unwrap();
        let o = r_m_operator(Basis::Fock, 0.2, c(1.5), c(0.1), 4, DEFAULT_N).unwrap();
        assert_eq!(v.value, o.value);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn psi_exceeds_two(seed in any::<u64>(), m in 1usize..=3, g in -1.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                let u: Vec<f64> = (0..2 * m).map(|_| rng.random_range(1e-6..1.0 - 1e-9)).collect();
                let uc: Vec<f64> = u.iter().map(|x| 1.0 - x).collect();
                prop_assert!(psi_minus_two(m, g, &u, &uc).unwrap() > 0.0);
                prop_assert!(psi(m, g, &u).unwrap() > 2.0);
            }
        }

        #[test]
        fn cyclic_and_reversal_invariance(u in proptest::collection::vec(0.01f64..0.99, 4..=6), g in -1.0f64..1.0) {
            let m = u.len() / 2;
            let u = &u[..2 * m];
            let mut shifted = u.to_vec();
            shifted.rotate_left(2);
            let rev: Vec<f64> = u.iter().rev().copied().collect();
            let (p, s) = (phi(m, u).unwrap(), psi(m, g, u).unwrap());
            prop_assert!((phi(m, &shifted).unwrap() - p).abs() < 1e-13);
            prop_assert!((phi(m, &rev).unwrap() - p).abs() < 1e-13);
            prop_assert!((psi(m, g, &shifted).unwrap() - s).abs() < 1e-13 * s);
            prop_assert!((psi(m, g, &rev).unwrap() - s).abs() < 1e-13 * s);
        }
    }

    #[test]
    fn r1_series_at_zero_coupling() {
        let (lam, eps) = (c(1.3), c(0.2));
        let flat = r_1_series(R1Family::Flat, lam, 0.0, eps, 1e-15).unwrap().value;
        let j0 = crate::apery::flat_zeta_sum(lam, eps).unwrap().value;
        assert!((flat - j0).norm() < 1e-14);
        for d in [Delta::Plus, Delta::Minus] {
            let s = r_1_series(R1Family::Delta(d), lam, 0.0, eps, 1e-15).unwrap().value;
            let h = r_1_hypergeometric(d, lam, 0.0, eps).unwrap().value;
            let alt = d == Delta::Minus;
            let direct = RationalSeries::new(vec![(lam + eps + 0.5, -1), (lam - eps + 0.5, -1)]).alternating(alt).sum().unwrap().value;
            assert!((s - direct).norm() < 1e-14);
            assert!((h - direct).norm() < 1e-14);
        }
    }

    #[test]
    fn r1_flat_series_matches_integral() {
        let s = r_1_series(R1Family::Flat, c(1.2), 0.3, c(0.1), 1e-15).unwrap().value;
        let q = r_m_integral(TraceFamily::Flat, c(1.2), 0.3, c(0.1), 1, &QuadratureSpec::tanh_sinh(7)).unwrap().value;
        assert!((s - q).norm() < 1e-8, "{s} vs {q}");
    }

    #[test]
    fn r1_delta_series_matches_hypergeometric() {
        for &(d, lam, g, eps) in &[(Delta::Plus, 1.0, 0.2, 0.15), (Delta::Minus, 0.8, 0.25, 0.1), (Delta::Plus, 2.3, 0.5, -0.3)] {
            let s = r_1_series(R1Family::Delta(d), c(lam), g, c(eps), 1e-15).unwrap().value;
            let h = r_1_hypergeometric(d, c(lam), g, c(eps)).unwrap().value;
            assert!((s - h).norm() < 1e-9, "{d:?}: {s} vs {h}");
        }
    }

    #[test]
    fn r1_delta_matches_bergman_routes() {
        // R₁^+(0; g, 0) against the integral; R₁^− against the operator oracle.
        let h = r_1_hypergeometric(Delta::Plus, c(0.0), 0.3, c(0.0)).unwrap().value;
        let q = r_m_integral(TraceFamily::Plus, c(0.0), 0.3, c(0.0), 1, &QuadratureSpec::tanh_sinh(7)).unwrap().value;
        assert!((h - q).norm() < 1e-8, "{h} vs {q}");
        let s = r_1_series(R1Family::Delta(Delta::Minus), c(1.1), 0.35, c(0.12), 1e-15).unwrap().value;
        let o = family_operator(TraceFamily::Minus, 0.35, c(1.1), c(0.12), 1, 0, 800).unwrap().value;
        assert!((s - o).norm() < 1e-8, "{s} vs {o}");
    }

    #[test]
    fn r1_hypergeometric_integer_eps_is_pole() {
        assert!(matches!(r_1_hypergeometric(Delta::Plus, c(1.0), 0.2, c(1.0)), Err(Error::Pole(_))));
    }

}
