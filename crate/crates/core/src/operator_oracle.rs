//! Truncated-operator oracle.
//!
//! Builds finite sections of the resolvent building blocks h±(λ; g, ε) in the
//! Fock basis and in the orthonormal monomial basis of the weighted Bergman
//! space, evaluates traces of products of their inverse powers, and computes
//! spectral zeta values by direct eigenvalue summation.
//!
//! Traces of inverse products decay like k^{-P} along the diagonal, so the raw
//! N-truncation converges only like N^{1-P}. [`r_m_operator`] therefore keeps
//! the exact diagonal entries on k < N/2, fits their asymptotic expansion in
//! powers of 1/(k+1) on the upper part of that window, and sums the fitted
//! expansion to infinity with Hurwitz zeta values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::specfun::{binomial, factorial, hurwitz_zeta, CompensatedSum, SeriesValue, C64};

/// Smallest singular value accepted by the invertibility guard.
pub const MIN_SINGULAR_VALUE: f64 = 1e-10;

/// Largest composition count accepted by [`dn_r_m_operator`].
pub const MAX_COMPOSITIONS: f64 = 1e6;

/// Default truncation dimension.
pub const DEFAULT_N: usize = 400;

/// Number of fitted inverse powers in the tail model.
const FIT_TERMS: usize = 6;

/// Smallest half-window for which the fitted tail is used.
const MIN_FIT_WINDOW: usize = 32;

/// Basis of the truncated operator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Fock basis w^k/√k! of the Bargmann space.
    Fock,
    /// Orthonormal monomial basis of the weighted Bergman space with weight ν > 0.
    Bergman(f64),
}

/// Sign selecting h₊ or h₋.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// h₊: coupling term with sign +.
    Plus,
    /// h₋: coupling term with sign −.
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// A finite section of a real symmetric tridiagonal operator plus a complex
/// scalar shift.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    /// Basis the matrix is written in.
    pub basis: Basis,
    /// Truncation dimension N.
    pub dim: usize,
    /// Diagonal entries, shift included.
    pub diag: Vec<C64>,
    /// Off-diagonal entries (symmetric). They carry the coupling sign, so
    /// they are negative for h₋ with g > 0.
    pub offdiag: Vec<f64>,
    /// Complex scalar already folded into `diag`.
    pub shift: C64,
}

impl TridiagonalOperator {
    /// Real diagonal of the unshifted operator.
    fn base_diag(&self) -> Vec<f64> {
        self.diag.iter().map(|d| (d - self.shift).re).collect()
    }

    /// Dense real matrix of the operator without the shift (for tests and small cases).
    pub fn dense_unshifted(&self) -> DMatrix<f64> {
        let n = self.dim;
        let base = self.base_diag();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                base[i]
            } else if i + 1 == j {
                self.offdiag[i]
            } else if j + 1 == i {
                self.offdiag[j]
            } else {
                0.0
            }
        })
    }
}

/// Builds the N×N section of h±.
///
/// Fock: diag k + g² + shift, off-diagonal ±g√(k+1).
/// Bergman(ν): diag cosh(2g)(2k+ν) + shift, off-diagonal ±sinh(2g)√((k+1)(k+ν)).
pub fn build_component_operator(basis: Basis, g: f64, shift: C64, sign: Sign, n: usize) -> Result<TridiagonalOperator> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("truncation dimension must be >= 2, got {n}")));
    }
    let s = sign.value();
    let (diag, offdiag): (Vec<C64>, Vec<f64>) = match basis {
        Basis::Fock => (
            (0..n).map(|k| shift + (k as f64 + g * g)).collect(),
            (0..n - 1).map(|k| s * g * ((k + 1) as f64).sqrt()).collect(),
        ),
        Basis::Bergman(nu) => {
            if !(nu > 0.0) {
                return Err(Error::Domain(format!("Bergman weight must be positive, got {nu}")));
            }
            let (ch, sh) = ((2.0 * g).cosh(), (2.0 * g).sinh());
            (
                (0..n).map(|k| shift + ch * (2.0 * k as f64 + nu)).collect(),
                (0..n - 1).map(|k| s * sh * (((k + 1) as f64) * (k as f64 + nu)).sqrt()).collect(),
            )
        }
    };
    Ok(TridiagonalOperator { basis, dim: n, diag, offdiag, shift })
}

/// LU factorization with partial pivoting of a complex tridiagonal matrix
/// (the band analogue of dense LU: L has one subdiagonal, U two superdiagonals).
#[derive(Debug, Clone)]
struct TridiagLu {
    dl: Vec<C64>,
    d: Vec<C64>,
    du: Vec<C64>,
    du2: Vec<C64>,
    pivot_next: Vec<bool>,
}

fn cabs1(z: C64) -> f64 {
    z.re.abs() + z.im.abs()
}

impl TridiagLu {
    fn new(op: &TridiagonalOperator) -> Self {
        let n = op.dim;
        let mut dl: Vec<C64> = op.offdiag.iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut du = dl.clone();
        let mut d = op.diag.clone();
        let mut du2 = vec![C64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut pivot_next = vec![false; n];
        for i in 0..n - 1 {
            if cabs1(d[i]) >= cabs1(dl[i]) {
                if d[i] != C64::new(0.0, 0.0) {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                pivot_next[i] = true;
            }
        }
        TridiagLu { dl, d, du, du2, pivot_next }
    }

    /// Overwrites `b` with A^{-1} b.
    fn solve(&self, b: &mut [C64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.pivot_next[i] {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                let t = self.dl[i] * b[i];
                b[i + 1] -= t;
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Eigenvalues of a real symmetric tridiagonal matrix (implicit QL with
/// Wilkinson-type shifts), returned in ascending order.
///
/// `diag` has length n, `off` length n − 1.
pub fn symmetric_tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                return Err(Error::EigenFailure(format!("QL iteration stalled at index {l}")));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(d)
}

/// Smallest singular value of a real-symmetric-plus-scalar operator:
/// min |μ + shift| over the eigenvalues μ of the unshifted matrix.
pub fn min_singular_value(op: &TridiagonalOperator) -> Result<f64> {
    let mu = symmetric_tridiagonal_eigenvalues(&op.base_diag(), &op.offdiag)?;
    Ok(mu.iter().map(|&m| (op.shift + m).norm()).fold(f64::INFINITY, f64::min))
}

/// Factorized operators with the invertibility guard applied.
fn factorize_all(ops: &[&TridiagonalOperator]) -> Result<Vec<TridiagLu>> {
    let dim = ops[0].dim;
    let basis = ops[0].basis;
    let mut out = Vec::with_capacity(ops.len());
    for op in ops {
        if op.dim != dim || op.basis != basis {
            return Err(Error::InvalidDimension("factors must share basis and dimension".into()));
        }
        let smin = min_singular_value(op)?;
        if smin <= MIN_SINGULAR_VALUE {
            return Err(Error::SingularOperator(smin));
        }
        out.push(TridiagLu::new(op));
    }
    Ok(out)
}

/// Trace of ∏ op_j^{-p_j} (ordered left to right) over the N-dimensional
/// truncation.
pub fn trace_inverse_product(factors: &[(&TridiagonalOperator, u32)]) -> Result<C64> {
    if factors.is_empty() {
        return Err(Error::Domain("empty factor list".into()));
    }
    if factors.iter().any(|&(_, p)| p == 0) {
        return Err(Error::Domain("powers must be at least 1".into()));
    }
    let ops: Vec<&TridiagonalOperator> = factors.iter().map(|&(o, _)| o).collect();
    let lus = factorize_all(&ops)?;
    let n = ops[0].dim;
    let mut acc = CompensatedSum::new();
    let mut v = vec![C64::new(0.0, 0.0); n];
    for col in 0..n {
        v.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        v[col] = C64::new(1.0, 0.0);
        for (lu, &(_, p)) in lus.iter().zip(factors).rev() {
            for _ in 0..p {
                lu.solve(&mut v);
            }
        }
        acc.add(v[col]);
    }
    Ok(acc.total())
}

/// Diagonal entries k < `count` of Σ_{|𝐧|=n} ∏_j h_{s_j}^{-n_j-1}, where the
/// factor list alternates h₊, h₋ (2m factors).
///
/// Processing factors right to left, the vector V_r (compositions of r into
/// the processed parts) obeys V'_r = h^{-1}(V_r + V'_{r-1}).
fn composition_diagonal(lus: &[TridiagLu; 2], m: usize, n: usize, dim: usize, count: usize) -> Vec<C64> {
    let zero = C64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(count);
    let mut levels = vec![vec![zero; dim]; n + 1];
    for col in 0..count {
        for (r, lv) in levels.iter_mut().enumerate() {
            lv.iter_mut().for_each(|x| *x = zero);
            if r == 0 {
                lv[col] = C64::new(1.0, 0.0);
            }
        }
        for j in (0..2 * m).rev() {
            let lu = &lus[j % 2];
            for r in 0..=n {
                if r > 0 {
                    let (lo, hi) = levels.split_at_mut(r);
                    let prev = &lo[r - 1];
                    for (x, y) in hi[0].iter_mut().zip(prev) {
                        *x += *y;
                    }
                }
                lu.solve(&mut levels[r]);
            }
        }
        out.push(levels[n][col]);
    }
    out
}

/// Sums diagonal entries d_k (k < K) and adds the fitted tail Σ_{k≥K} d_k.
///
/// Returns (value, fit-order error estimate).
fn sum_with_fitted_tail(d: &[C64], leading_power: u32) -> Result<(C64, f64)> {
    let k_len = d.len();
    let mut acc = CompensatedSum::new();
    for &x in d.iter().rev() {
        acc.add(x);
    }
    let head = acc.total();
    if k_len < MIN_FIT_WINDOW {
        return Ok((head, f64::INFINITY));
    }
    let t1 = fitted_tail(d, leading_power, FIT_TERMS)?;
    let t0 = fitted_tail(d, leading_power, FIT_TERMS - 1)?;
    Ok((head + t1, (t1 - t0).norm()))
}

fn fitted_tail(d: &[C64], p: u32, terms: usize) -> Result<C64> {
    let k_len = d.len();
    let lo = k_len / 4;
    let rows = k_len - lo;
    let kf = k_len as f64;
    let a = DMatrix::from_fn(rows, terms, |r, j| (kf / ((lo + r + 1) as f64)).powi((p as usize + j) as i32));
    let svd = a.svd(true, true);
    let solve = |rhs: DVector<f64>| -> Result<DVector<f64>> {
        svd.solve(&rhs, 1e-14).map_err(|e| Error::Inconsistent(format!("tail fit: {e}")))
    };
    let re = solve(DVector::from_iterator(rows, d[lo..].iter().map(|z| z.re)))?;
    let im = solve(DVector::from_iterator(rows, d[lo..].iter().map(|z| z.im)))?;
    let mut tail = C64::new(0.0, 0.0);
    for j in 0..terms {
        let power = p + j as u32;
        // Σ_{k≥K} (K/(k+1))^power = K^power ζ(power, K+1)
        let z = if power >= 2 {
            hurwitz_zeta(power, C64::new(kf + 1.0, 0.0))?.value.re * kf.powi(power as i32)
        } else {
            return Err(Error::Domain("fitted tail needs decay faster than 1/k".into()));
        };
        tail += C64::new(re[j], im[j]) * z;
    }
    Ok(tail)
}

fn validate_shifts(basis: Basis, lambda: C64, eps: C64) -> Result<()> {
    for s in [lambda + eps, lambda - eps] {
        let (a, what) = match basis {
            Basis::Fock => (s, "λ ± ε"),
            Basis::Bergman(nu) => ((s + nu) * 0.5, "(λ ± ε + ν)/2"),
        };
        if crate::specfun::distance_to_poles(a, 0) <= 1e-12 {
            return Err(Error::Pole(format!("{what} = {a} is a nonpositive integer")));
        }
    }
    Ok(())
}

/// Shared kernel of [`r_m_operator`] and [`dn_r_m_operator`]: returns the
/// normalized composition sum Σ_{|𝐧|=n} Tr(∏ h^{-n_j-1}) with fitted tail.
fn composition_trace(basis: Basis, g: f64, lambda: C64, eps: C64, m: usize, n: usize, dim: usize) -> Result<SeriesValue> {
    validate_shifts(basis, lambda, eps)?;
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    let run = |dim: usize| -> Result<(C64, f64)> {
        let hp = build_component_operator(basis, g, lambda + eps, Sign::Plus, dim)?;
        let hm = build_component_operator(basis, g, lambda - eps, Sign::Minus, dim)?;
        let lus = factorize_all(&[&hp, &hm])?;
        let lus = [lus[0].clone(), lus[1].clone()];
        let k = dim / 2;
        let d = composition_diagonal(&lus, m, n, dim, k);
        sum_with_fitted_tail(&d, (2 * m + n) as u32)
    };
    let (full, fit_err) = run(dim)?;
    let (half, _) = run((dim / 2).max(2))?;
    let abs_error = (full - half).norm() + fit_err;
    Ok(SeriesValue { value: full, abs_error, terms_used: dim as u64, converged: abs_error.is_finite() })
}

/// R_m(λ; g, ε) = Tr((h₊^{-1} h₋^{-1})^m) from an N-dimensional truncation
/// with fitted tail; `abs_error` combines the N versus N/2 difference and the
/// sensitivity of the tail fit to its order.
pub fn r_m_operator(basis: Basis, g: f64, lambda: C64, eps: C64, m: usize, dim: usize) -> Result<SeriesValue> {
    composition_trace(basis, g, lambda, eps, m, 0, dim)
}

/// n-th λ-derivative of R_m: (−1)ⁿ n! Σ over compositions 𝐧 of n into 2m
/// parts of Tr(∏ h₊^{-n_{2j-1}-1} h₋^{-n_{2j}-1}).
pub fn dn_r_m_operator(basis: Basis, g: f64, lambda: C64, eps: C64, m: usize, n: usize, dim: usize) -> Result<SeriesValue> {
    let count = binomial((n + 2 * m - 1) as u64, n as u64);
    if count > MAX_COMPOSITIONS {
        return Err(Error::CombinatorialBlowup(count));
    }
    let v = composition_trace(basis, g, lambda, eps, m, n, dim)?;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok(v.scale(C64::new(sign * factorial(n as u32), 0.0)))
}

/// All compositions of `n` into `parts` nonnegative parts, in colexicographic
/// order (the last part varies slowest).
pub fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if parts == 0 {
        if n == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    for last in 0..=n {
        for mut head in compositions(n - last, parts - 1) {
            head.push(last);
            out.push(head);
        }
    }
    out
}

/// Reference implementation of the derivative formula on the raw
/// N-truncation: enumerates every composition explicitly and calls
/// [`trace_inverse_product`] for each.
pub fn dn_r_m_by_compositions(basis: Basis, g: f64, lambda: C64, eps: C64, m: usize, n: usize, dim: usize) -> Result<C64> {
    let hp = build_component_operator(basis, g, lambda + eps, Sign::Plus, dim)?;
    let hm = build_component_operator(basis, g, lambda - eps, Sign::Minus, dim)?;
    let mut acc = CompensatedSum::new();
    for comp in compositions(n, 2 * m) {
        let factors: Vec<(&TridiagonalOperator, u32)> = comp
            .iter()
            .enumerate()
            .map(|(j, &nj)| (if j % 2 == 0 { &hp } else { &hm }, nj as u32 + 1))
            .collect();
        acc.add(trace_inverse_product(&factors)?);
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok(acc.total() * sign * factorial(n as u32))
}

/// Raw N-truncated diagonal sum of the composition trace (no tail model).
pub fn composition_trace_truncated(basis: Basis, g: f64, lambda: C64, eps: C64, m: usize, n: usize, dim: usize) -> Result<C64> {
    let hp = build_component_operator(basis, g, lambda + eps, Sign::Plus, dim)?;
    let hm = build_component_operator(basis, g, lambda - eps, Sign::Minus, dim)?;
    let lus = factorize_all(&[&hp, &hm])?;
    let lus = [lus[0].clone(), lus[1].clone()];
    let d = composition_diagonal(&lus, m, n, dim, dim);
    let mut acc = CompensatedSum::new();
    for &x in d.iter().rev() {
        acc.add(x);
    }
    Ok(acc.total())
}

// ---------------------------------------------------------------------------
// Models and the eigenvalue oracle
// ---------------------------------------------------------------------------

/// Hamiltonian selector.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Renormalized one-photon quantum Rabi model.
    OnePhoton { g: f64, delta: f64, eps: f64 },
    /// Renormalized two-photon quantum Rabi model (ν = 1/2 ⊕ ν = 3/2).
    TwoPhoton { g: f64, delta: f64, eps: f64 },
    /// Single weighted-Bergman block with weight ν.
    BergmanNu { nu: f64, g: f64, delta: f64, eps: f64 },
    /// Renormalized non-commutative harmonic oscillator (ν = 1/2 ⊕ ν = 3/2).
    Ncho { alpha: f64, beta: f64, eta: f64 },
}

impl ModelSpec {
    /// Checks the parameter invariants of the model.
    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match *self {
            ModelSpec::OnePhoton { g, delta, eps } | ModelSpec::TwoPhoton { g, delta, eps } => {
                if !finite(&[g, delta, eps]) {
                    return Err(Error::Domain("model parameters must be finite".into()));
                }
            }
            ModelSpec::BergmanNu { nu, g, delta, eps } => {
                if !finite(&[nu, g, delta, eps]) || nu <= 0.0 {
                    return Err(Error::Domain(format!("Bergman model requires finite parameters and ν > 0, got ν = {nu}")));
                }
            }
            ModelSpec::Ncho { alpha, beta, eta } => {
                if !finite(&[alpha, beta, eta]) || alpha <= 0.0 || beta <= 0.0 || alpha * beta <= 1.0 {
                    return Err(Error::Domain(format!(
                        "NCHO requires α > 0, β > 0, αβ > 1; got α = {alpha}, β = {beta}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One 2×2-block Hamiltonian acting on (basis) ⊗ C².
#[derive(Debug, Clone, Copy)]
enum Block {
    /// [[dτ(X(g)) + ε, Δ], [Δ, dτ(X(−g)) − ε]] in the Fock basis.
    Flat { g: f64, delta: f64, eps: f64 },
    /// [[dτ_ν(Y(g)) + ε, Δ], [Δ, dτ_ν(Y(−g)) − ε]] in the Bergman basis.
    Nu { nu: f64, g: f64, delta: f64, eps: f64 },
    /// p·(diag(α,β)(2z d/dz + ν) + σ₁((1+z²)d/dz + νz) + 2η√(αβ−1)σ₁).
    Ncho { nu: f64, alpha: f64, beta: f64, eta: f64 },
}

impl Block {
    /// The two arithmetic progressions (offset, step) of the Δ = 0 (or α = β)
    /// spectrum used as the asymptotic tail model.
    fn model_progressions(&self) -> [(f64, f64); 2] {
        match *self {
            Block::Flat { eps, .. } => [(eps, 1.0), (-eps, 1.0)],
            Block::Nu { nu, eps, .. } => [(nu + eps, 2.0), (nu - eps, 2.0)],
            Block::Ncho { nu, eta, .. } => [(nu + 2.0 * eta, 2.0), (nu - 2.0 * eta, 2.0)],
        }
    }

    /// Symmetric band matrix of the 2N-dimensional section in the interleaved
    /// basis (k,↑), (k,↓); returns (bandwidth, lower band rows).
    fn band(&self, n: usize) -> SymBand {
        let dim = 2 * n;
        match *self {
            Block::Flat { g, delta, eps } => {
                let mut b = SymBand::zeros(dim, 2);
                for k in 0..n {
                    let kf = k as f64;
                    b.set(2 * k, 2 * k, kf + g * g + eps);
                    b.set(2 * k + 1, 2 * k + 1, kf + g * g - eps);
                    b.set(2 * k + 1, 2 * k, delta);
                    if k + 1 < n {
                        let off = g * (kf + 1.0).sqrt();
                        b.set(2 * k + 2, 2 * k, off);
                        b.set(2 * k + 3, 2 * k + 1, -off);
                    }
                }
                b
            }
            Block::Nu { nu, g, delta, eps } => {
                let (ch, sh) = ((2.0 * g).cosh(), (2.0 * g).sinh());
                let mut b = SymBand::zeros(dim, 2);
                for k in 0..n {
                    let kf = k as f64;
                    b.set(2 * k, 2 * k, ch * (2.0 * kf + nu) + eps);
                    b.set(2 * k + 1, 2 * k + 1, ch * (2.0 * kf + nu) - eps);
                    b.set(2 * k + 1, 2 * k, delta);
                    if k + 1 < n {
                        let off = sh * ((kf + 1.0) * (kf + nu)).sqrt();
                        b.set(2 * k + 2, 2 * k, off);
                        b.set(2 * k + 3, 2 * k + 1, -off);
                    }
                }
                b
            }
            Block::Ncho { nu, alpha, beta, eta } => {
                let p = (alpha + beta) / (2.0 * (alpha * beta * (alpha * beta - 1.0)).sqrt());
                let c = 2.0 * eta * (alpha * beta - 1.0).sqrt();
                let mut b = SymBand::zeros(dim, 3);
                for k in 0..n {
                    let kf = k as f64;
                    b.set(2 * k, 2 * k, p * alpha * (2.0 * kf + nu));
                    b.set(2 * k + 1, 2 * k + 1, p * beta * (2.0 * kf + nu));
                    b.set(2 * k + 1, 2 * k, p * c);
                    if k + 1 < n {
                        let off = p * ((kf + 1.0) * (kf + nu)).sqrt();
                        // σ₁ couples (k,↑) with (k+1,↓) and (k,↓) with (k+1,↑).
                        b.set(2 * k + 3, 2 * k, off);
                        b.set(2 * k + 2, 2 * k + 1, off);
                    }
                }
                b
            }
        }
    }
}

fn blocks_of(model: &ModelSpec) -> Vec<Block> {
    match *model {
        ModelSpec::OnePhoton { g, delta, eps } => vec![Block::Flat { g, delta, eps }],
        ModelSpec::TwoPhoton { g, delta, eps } => vec![
            Block::Nu { nu: 0.5, g, delta, eps },
            Block::Nu { nu: 1.5, g, delta, eps },
        ],
        ModelSpec::BergmanNu { nu, g, delta, eps } => vec![Block::Nu { nu, g, delta, eps }],
        ModelSpec::Ncho { alpha, beta, eta } => vec![
            Block::Ncho { nu: 0.5, alpha, beta, eta },
            Block::Ncho { nu: 1.5, alpha, beta, eta },
        ],
    }
}

/// Real symmetric band matrix stored by lower diagonals, with one extra
/// diagonal of room for the bulge created during reduction.
#[derive(Debug, Clone)]
pub struct SymBand {
    n: usize,
    b: usize,
    width: usize,
    data: Vec<f64>,
}

impl SymBand {
    /// Zero matrix of order `n` and bandwidth `b`.
    pub fn zeros(n: usize, b: usize) -> Self {
        let width = b + 2;
        SymBand { n, b, width, data: vec![0.0; n * width] }
    }

    /// Entry (i, j) (symmetric access).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        if d >= self.width {
            0.0
        } else {
            self.data[i * self.width + d]
        }
    }

    /// Sets entry (i, j) and its mirror.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        debug_assert!(d < self.width);
        self.data[i * self.width + d] = v;
    }

    /// Dense copy (for tests).
    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Similarity transform by the Givens rotation on indices (p, p+1) chosen
    /// to annihilate entry (p+1, r).
    fn rotate_to_zero(&mut self, p: usize, r: usize) {
        let q = p + 1;
        let x = self.get(p, r);
        let y = self.get(q, r);
        if y == 0.0 {
            return;
        }
        let h = x.hypot(y);
        let (c, s) = (x / h, y / h);
        let lo = p.saturating_sub(self.b + 1);
        let hi = (q + self.b + 1).min(self.n - 1);
        for k in lo..=hi {
            if k == p || k == q {
                continue;
            }
            let apk = self.get(p, k);
            let aqk = self.get(q, k);
            if apk == 0.0 && aqk == 0.0 {
                continue;
            }
            self.set(p, k, c * apk + s * aqk);
            self.set(q, k, -s * apk + c * aqk);
        }
        let (app, aqq, apq) = (self.get(p, p), self.get(q, q), self.get(p, q));
        self.set(p, p, c * c * app + 2.0 * c * s * apq + s * s * aqq);
        self.set(q, q, s * s * app - 2.0 * c * s * apq + c * c * aqq);
        self.set(p, q, (c * c - s * s) * apq + c * s * (aqq - app));
        self.set(q, r, 0.0);
    }

    /// Reduces to tridiagonal form by Givens rotations with bulge chasing and
    /// returns (diagonal, off-diagonal).
    pub fn tridiagonalize(mut self) -> (Vec<f64>, Vec<f64>) {
        let (n, b) = (self.n, self.b);
        if b > 1 {
            for j in 0..n.saturating_sub(2) {
                let top = (j + b).min(n - 1);
                for i in (j + 2..=top).rev() {
                    // Annihilate (i, j) with a rotation on (i−1, i).
                    self.rotate_to_zero(i - 1, j);
                    // Chase the bulge at (i+b, i−1) down the band.
                    let mut row = i + b;
                    let mut col = i - 1;
                    while row < n && self.get(row, col) != 0.0 {
                        self.rotate_to_zero(row - 1, col);
                        col = row - 1;
                        row += b;
                    }
                }
            }
        }
        let diag: Vec<f64> = (0..n).map(|i| self.get(i, i)).collect();
        let off: Vec<f64> = (0..n.saturating_sub(1)).map(|i| self.get(i + 1, i)).collect();
        (diag, off)
    }
}

/// Eigenvalues of the 2N-dimensional section of every block of `model`,
/// each block's list sorted ascending.
pub fn model_eigenvalues(model: &ModelSpec, n: usize) -> Result<Vec<Vec<f64>>> {
    model.validate()?;
    if n < 2 {
        return Err(Error::InvalidDimension(format!("truncation dimension must be >= 2, got {n}")));
    }
    blocks_of(model)
        .iter()
        .map(|blk| {
            let (d, e) = blk.band(n).tridiagonalize();
            symmetric_tridiagonal_eigenvalues(&d, &e)
        })
        .collect()
}

/// Dense 2N×2N sections of every block of `model` in the interleaved basis
/// (k,↑), (k,↓), k < N.
pub fn model_block_matrices(model: &ModelSpec, n: usize) -> Result<Vec<DMatrix<f64>>> {
    model.validate()?;
    if n < 1 {
        return Err(Error::InvalidDimension("truncation dimension must be >= 1".into()));
    }
    Ok(blocks_of(model).iter().map(|blk| blk.band(n).to_dense()).collect())
}

/// Dense matrix of the two-photon Hamiltonian
/// cosh(2g)(a†a + ½) + ½ sinh(2g)(a² + a†²)σ_z + Δσ_x + εσ_z
/// on the Fock states |j⟩, j < `n_fock`, in the interleaved basis (j,↑), (j,↓).
/// Its even-j and odd-j sections are the ν = 1/2 and ν = 3/2 Bergman blocks.
pub fn two_photon_fock_matrix(g: f64, delta: f64, eps: f64, n_fock: usize) -> DMatrix<f64> {
    let (ch, sh) = ((2.0 * g).cosh(), (2.0 * g).sinh());
    let mut h = DMatrix::zeros(2 * n_fock, 2 * n_fock);
    for j in 0..n_fock {
        let jf = j as f64;
        h[(2 * j, 2 * j)] = ch * (jf + 0.5) + eps;
        h[(2 * j + 1, 2 * j + 1)] = ch * (jf + 0.5) - eps;
        h[(2 * j, 2 * j + 1)] = delta;
        h[(2 * j + 1, 2 * j)] = delta;
        if j + 2 < n_fock {
            // ⟨j+2| a†² |j⟩ = √((j+1)(j+2)).
            let off = 0.5 * sh * ((jf + 1.0) * (jf + 2.0)).sqrt();
            for (s, sign) in [(0, 1.0), (1, -1.0)] {
                h[(2 * (j + 2) + s, 2 * j + s)] = sign * off;
                h[(2 * j + s, 2 * (j + 2) + s)] = sign * off;
            }
        }
    }
    h
}

/// Lowest `count` values of the merged progressions, and the complete sum
/// Σ (a + λ)^{-n} over both progressions.
fn model_sums(progs: &[(f64, f64); 2], count: usize, lambda: C64, n: u32) -> Result<(C64, C64)> {
    let mut lowest = CompensatedSum::new();
    let (mut i, mut j) = (0usize, 0usize);
    for _ in 0..count {
        let a = progs[0].0 + progs[0].1 * i as f64;
        let b = progs[1].0 + progs[1].1 * j as f64;
        let v = if a <= b {
            i += 1;
            a
        } else {
            j += 1;
            b
        };
        lowest.add((lambda + v).powi(-(n as i32)));
    }
    let mut total = C64::new(0.0, 0.0);
    for &(off, step) in progs {
        let z = hurwitz_zeta(n, (lambda + off) / step)?;
        total += z.value / step.powi(n as i32);
    }
    Ok((lowest.total(), total))
}

fn eigen_sum(model: &ModelSpec, n: u32, lambda: C64, dim: usize) -> Result<(C64, C64)> {
    let parts = eigen_sum_blocks(model, n, lambda, dim)?;
    let mut value = CompensatedSum::new();
    let mut tail = C64::new(0.0, 0.0);
    for (v, t) in parts {
        value.add(v);
        tail += t;
    }
    Ok((value.total(), tail))
}

/// Per-block (tail-corrected value, tail correction).
fn eigen_sum_blocks(model: &ModelSpec, n: u32, lambda: C64, dim: usize) -> Result<Vec<(C64, C64)>> {
    let blocks = blocks_of(model);
    let spectra = model_eigenvalues(model, dim)?;
    let keep = dim;
    let mut out = Vec::with_capacity(blocks.len());
    for (blk, mu) in blocks.iter().zip(&spectra) {
        let mut part = CompensatedSum::new();
        for &m in mu[..keep].iter().rev() {
            let z = lambda + m;
            if z.norm() < 1e-9 {
                return Err(Error::NearPole(format!("λ = {lambda} is within 1e-9 of −μ = {}", -m)));
            }
            part.add(z.powi(-(n as i32)));
        }
        let (lowest, total) = model_sums(&blk.model_progressions(), keep, lambda, n)?;
        let t = total - lowest;
        out.push((part.total() + t, t));
    }
    Ok(out)
}

/// ζ(H; n, λ) by summing (μ_j + λ)^{-n} over the lowest N eigenvalues of each
/// 2N-dimensional block section, plus the tail of the Δ = 0 spectrum beyond
/// them. `abs_error` is the change of the corrected value between N/2 and N;
/// the tail correction itself is returned as the second component.
pub fn zeta_eigen_oracle_with_tail(model: &ModelSpec, n: u32, lambda: C64, dim: usize) -> Result<(SeriesValue, C64)> {
    if n < 2 {
        return Err(Error::Domain(format!("zeta order must be >= 2, got {n}")));
    }
    let (full, tail) = eigen_sum(model, n, lambda, dim)?;
    let (half, _) = eigen_sum(model, n, lambda, (dim / 2).max(2))?;
    let abs_error = (full - half).norm() + 64.0 * f64::EPSILON * full.norm();
    Ok((SeriesValue { value: full, abs_error, terms_used: dim as u64, converged: true }, tail))
}

/// The eigenvalue oracle split by block: one value for a single-block model,
/// and the ν = 1/2 (even sector) and ν = 3/2 (odd sector) parts for the
/// two-photon model and the oscillator. Errors are estimated per block as in
/// [`zeta_eigen_oracle_with_tail`].
pub fn zeta_eigen_oracle_by_block(model: &ModelSpec, n: u32, lambda: C64, dim: usize) -> Result<Vec<SeriesValue>> {
    if n < 2 {
        return Err(Error::Domain(format!("zeta order must be >= 2, got {n}")));
    }
    let full = eigen_sum_blocks(model, n, lambda, dim)?;
    let half = eigen_sum_blocks(model, n, lambda, (dim / 2).max(2))?;
    Ok(full
        .iter()
        .zip(&half)
        .map(|(&(f, _), &(h, _))| SeriesValue {
            value: f,
            abs_error: (f - h).norm() + 64.0 * f64::EPSILON * f.norm(),
            terms_used: dim as u64,
            converged: true,
        })
        .collect())
}

/// ζ(H; n, λ) from the eigenvalues of the truncated Hamiltonian; see
/// [`zeta_eigen_oracle_with_tail`].
pub fn zeta_eigen_oracle(model: &ModelSpec, n: u32, lambda: C64, dim: usize) -> Result<SeriesValue> {
    zeta_eigen_oracle_with_tail(model, n, lambda, dim).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn fock_operator_examples() {
        let op = build_component_operator(Basis::Fock, 0.0, c(0.7), Sign::Plus, 5).unwrap();
        for k in 0..5 {
            assert_eq!(op.diag[k], c(k as f64 + 0.7));
        }
        assert!(op.offdiag.iter().all(|&x| x == 0.0));
        let g = 0.3;
        let op = build_component_operator(Basis::Fock, g, c(0.2), Sign::Plus, 2).unwrap();
        assert_eq!(op.diag, vec![c(g * g + 0.2), c(1.0 + g * g + 0.2)]);
        assert_eq!(op.offdiag, vec![g]);
        assert!(build_component_operator(Basis::Fock, g, c(0.2), Sign::Plus, 1).is_err());
    }

    #[test]
    fn bergman_offdiag_example() {
        let g = 0.37;
        let op = build_component_operator(Basis::Bergman(0.5), g, c(0.0), Sign::Plus, 10).unwrap();
        for j in 0..9 {
            let expect = (2.0 * g).sinh() * (((j + 1) as f64) * (j as f64 + 0.5)).sqrt();
            assert!((op.offdiag[j] - expect).abs() < 1e-15);
        }
    }

    /// Bergman matrices from the action on monomials z^k with squared norms
    /// k!/(ν)_k, then conjugated by the norms: an independent construction.
    #[test]
    fn bergman_matrix_from_monomial_action() {
        let (nu, g, n) = (0.8, 0.21f64, 12);
        let (ch, sh) = ((2.0 * g).cosh(), (2.0 * g).sinh());
        let norm = |k: usize| -> f64 {
            let mut v = 1.0;
            for i in 0..k {
                v *= (i + 1) as f64 / (nu + i as f64);
            }
            v.sqrt()
        };
        // (2z d/dz + ν) z^k = (2k+ν) z^k; ((1+z²)d/dz + νz) z^k = k z^{k−1} + (k+ν) z^{k+1}.
        let op = build_component_operator(Basis::Bergman(nu), g, c(0.0), Sign::Plus, n).unwrap();
        for k in 0..n - 1 {
            // coefficient of z^{k+1} in the image of z^k, in the orthonormal basis
            let raw = sh * (k as f64 + nu);
            let entry = raw * norm(k + 1) / norm(k);
            assert!((entry - op.offdiag[k]).abs() < 1e-13);
            let raw_down = sh * (k + 1) as f64; // image of z^{k+1} onto z^k
            let entry_down = raw_down * norm(k) / norm(k + 1);
            assert!((entry_down - op.offdiag[k]).abs() < 1e-13);
            assert!((op.diag[k].re - ch * (2.0 * k as f64 + nu)).abs() < 1e-13);
        }
    }

    #[test]
    fn parity_decomposition_of_fock_operator() {
        for &g in &[0.0f64, 0.1, -0.1, 0.5, -0.5] {
            for sign in [Sign::Plus, Sign::Minus] {
                let nf = 400;
                let (ch, sh) = ((2.0 * g).cosh(), (2.0 * g).sinh());
                let s = sign.value();
                // cosh(2g)(a†a + ½) + s·sinh(2g)/2 (a² + a†²) in the Fock basis.
                let entry = |i: usize, j: usize| -> f64 {
                    if i == j {
                        ch * (i as f64 + 0.5)
                    } else if j == i + 2 {
                        s * sh * 0.5 * (((i + 1) * (i + 2)) as f64).sqrt()
                    } else if i == j + 2 {
                        s * sh * 0.5 * (((j + 1) * (j + 2)) as f64).sqrt()
                    } else {
                        0.0
                    }
                };
                for (nu, parity) in [(0.5, 0usize), (1.5, 1usize)] {
                    let op = build_component_operator(Basis::Bergman(nu), g, c(0.0), sign, nf / 2).unwrap();
                    for j in 0..nf / 2 {
                        let i = 2 * j + parity;
                        assert!((entry(i, i) - op.diag[j].re).abs() < 1e-13 * (1.0 + entry(i, i).abs()));
                        if j + 1 < nf / 2 {
                            let e = entry(i, i + 2);
                            assert!((e - op.offdiag[j]).abs() < 1e-13 * (1.0 + e.abs()), "g={g} j={j}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tridiagonal_lu_matches_dense_solve() {
        let op = build_component_operator(Basis::Fock, 0.8, C64::new(-3.3, 0.4), Sign::Minus, 30).unwrap();
        let lu = TridiagLu::new(&op);
        let b: Vec<C64> = (0..30).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut x = b.clone();
        lu.solve(&mut x);
        // residual A x − b
        for i in 0..30 {
            let mut r = op.diag[i] * x[i] - b[i];
            if i > 0 {
                r += x[i - 1] * op.offdiag[i - 1];
            }
            if i + 1 < 30 {
                r += x[i + 1] * op.offdiag[i];
            }
            assert!(r.norm() < 1e-12, "row {i}: {r}");
        }
    }

    #[test]
    fn ql_eigenvalues_match_nalgebra() {
        let op = build_component_operator(Basis::Bergman(1.5), 0.4, c(0.0), Sign::Plus, 60).unwrap();
        let ours = symmetric_tridiagonal_eigenvalues(&op.base_diag(), &op.offdiag).unwrap();
        let mut theirs: Vec<f64> = SymmetricEigen::new(op.dense_unshifted()).eigenvalues.iter().copied().collect();
        theirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn band_reduction_preserves_spectrum() {
        for model in [
            ModelSpec::OnePhoton { g: 0.4, delta: 0.7, eps: 0.2 },
            ModelSpec::BergmanNu { nu: 0.5, g: 0.3, delta: 0.5, eps: -0.1 },
            ModelSpec::Ncho { alpha: 2.0, beta: 1.2, eta: 0.1 },
        ] {
            for blk in blocks_of(&model) {
                let band = blk.band(25);
                let dense = band.to_dense();
                let mut theirs: Vec<f64> = SymmetricEigen::new(dense).eigenvalues.iter().copied().collect();
                theirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let (d, e) = band.tridiagonalize();
                let ours = symmetric_tridiagonal_eigenvalues(&d, &e).unwrap();
                for (a, b) in ours.iter().zip(&theirs) {
                    assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{model:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn diagonal_traces() {
        let n = 50;
        let a = C64::new(1.3, 0.2);
        let d = build_component_operator(Basis::Fock, 0.0, a, Sign::Plus, n).unwrap();
        let t = trace_inverse_product(&[(&d, 1)]).unwrap();
        let expect: C64 = (0..n).map(|k| (a + k as f64).inv()).sum();
        assert!((t - expect).norm() < 1e-12);
        let (lam, eps) = (c(1.2), c(0.1));
        let hp = build_component_operator(Basis::Fock, 0.0, lam + eps, Sign::Plus, n).unwrap();
        let hm = build_component_operator(Basis::Fock, 0.0, lam - eps, Sign::Minus, n).unwrap();
        let t = trace_inverse_product(&[(&hp, 1), (&hm, 1)]).unwrap();
        let expect: C64 = (0..n).map(|k| ((lam + eps + k as f64) * (lam - eps + k as f64)).inv()).sum();
        assert!((t - expect).norm() < 1e-13);
    }

    #[test]
    fn singular_operator_is_rejected() {
        let op = build_component_operator(Basis::Fock, 0.0, c(-3.0), Sign::Plus, 10).unwrap();
        assert!(matches!(trace_inverse_product(&[(&op, 1)]), Err(Error::SingularOperator(_))));
    }

    #[test]
    fn r1_flat_at_zero_coupling_is_j0() {
        let (lam, eps) = (1.2, 0.1);
        let v = r_m_operator(Basis::Fock, 0.0, c(lam), c(eps), 1, 400).unwrap();
        let j0 = crate::specfun::RationalSeries::new(vec![(c(lam + eps), -1), (c(lam - eps), -1)]).sum().unwrap();
        assert!((v.value - j0.value).norm() < 1e-12, "{}", (v.value - j0.value).norm());
        assert!(v.abs_error < 1e-9);
    }

    #[test]
    fn r1_plus_at_zero_coupling() {
        let (lam, eps) = (1.0, 0.15);
        let a = r_m_operator(Basis::Bergman(0.5), 0.0, c(lam), c(eps), 1, 400).unwrap();
        let b = r_m_operator(Basis::Bergman(1.5), 0.0, c(lam), c(eps), 1, 400).unwrap();
        let expect = crate::specfun::RationalSeries::new(vec![(c(lam + eps + 0.5), -1), (c(lam - eps + 0.5), -1)])
            .sum()
            .unwrap();
        assert!((a.value + b.value - expect.value).norm() < 1e-12);
    }

    #[test]
    fn fitted_tail_converges_in_n() {
        for basis in [Basis::Fock, Basis::Bergman(0.5)] {
            let a = r_m_operator(basis, 0.3, c(1.2), c(0.1), 1, 400).unwrap();
            let b = r_m_operator(basis, 0.3, c(1.2), c(0.1), 1, 800).unwrap();
            assert!((a.value - b.value).norm() < 1e-10, "{basis:?}: {}", (a.value - b.value).norm());
        }
    }

    #[test]
    fn raw_truncation_increases_with_n() {
        let mut prev = 0.0;
        for n in [50, 100, 200, 400] {
            let v = composition_trace_truncated(Basis::Fock, 0.3, c(1.2), c(0.1), 2, 0, n).unwrap().re;
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn cyclic_invariance_of_trace() {
        let hp = build_component_operator(Basis::Fock, 0.25, c(1.7), Sign::Plus, 120).unwrap();
        let hm = build_component_operator(Basis::Fock, 0.25, c(1.3), Sign::Minus, 120).unwrap();
        let a = trace_inverse_product(&[(&hp, 2), (&hm, 1), (&hp, 1), (&hm, 3)]).unwrap();
        let b = trace_inverse_product(&[(&hm, 1), (&hp, 1), (&hm, 3), (&hp, 2)]).unwrap();
        let cc = trace_inverse_product(&[(&hm, 3), (&hp, 2), (&hm, 1), (&hp, 1)]).unwrap();
        assert!((a - b).norm() < 1e-12 && (a - cc).norm() < 1e-12);
    }

    #[test]
    fn composition_dp_matches_enumeration() {
        let (lam, eps, g) = (c(1.5), c(0.1), 0.25);
        for (m, n) in [(1, 1), (1, 2), (2, 2), (2, 3)] {
            let dim = 80;
            let dp = composition_trace_truncated(Basis::Fock, g, lam, eps, m, n, dim).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let dp = dp * sign * factorial(n as u32);
            let en = dn_r_m_by_compositions(Basis::Fock, g, lam, eps, m, n, dim).unwrap();
            assert!((dp - en).norm() < 1e-12 * (1.0 + en.norm()), "m={m} n={n}");
        }
    }

    #[test]
    fn compositions_colex_order() {
        let cs = compositions(2, 2);
        assert_eq!(cs, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(compositions(3, 4).len(), 20);
    }

    #[test]
    fn first_derivative_two_compositions() {
        let (lam, eps, g, dim) = (c(1.5), c(0.1), 0.25, 200);
        let hp = build_component_operator(Basis::Fock, g, lam + eps, Sign::Plus, dim).unwrap();
        let hm = build_component_operator(Basis::Fock, g, lam - eps, Sign::Minus, dim).unwrap();
        let expect = -(trace_inverse_product(&[(&hp, 2), (&hm, 1)]).unwrap()
            + trace_inverse_product(&[(&hp, 1), (&hm, 2)]).unwrap());
        let got = dn_r_m_by_compositions(Basis::Fock, g, lam, eps, 1, 1, dim).unwrap();
        assert!((got - expect).norm() < 1e-13);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let (lam, eps, g) = (1.5, 0.1, 0.25);
        for basis in [Basis::Fock, Basis::Bergman(0.5)] {
            for m in [1usize, 2] {
                let h = 1e-2;
                let r = |x: f64| r_m_operator(basis, g, c(x), c(eps), m, 400).unwrap().value.re;
                let f: Vec<f64> = (-3..=3).map(|i| r(lam + i as f64 * h)).collect();
                // sixth-order central differences
                let d1 = (-f[0] + 9.0 * f[1] - 45.0 * f[2] + 45.0 * f[4] - 9.0 * f[5] + f[6]) / (60.0 * h);
                let d2 = (2.0 * f[0] - 27.0 * f[1] + 270.0 * f[2] - 490.0 * f[3] + 270.0 * f[4] - 27.0 * f[5]
                    + 2.0 * f[6])
                    / (180.0 * h * h);
                let d3 = (f[0] - 8.0 * f[1] + 13.0 * f[2] - 13.0 * f[4] + 8.0 * f[5] - f[6]) / (8.0 * h * h * h);
                for (n, fd) in [(1usize, d1), (2, d2), (3, d3)] {
                    let v = dn_r_m_operator(basis, g, c(lam), c(eps), m, n, 400).unwrap().value.re;
                    assert!((v - fd).abs() < 1e-5 * v.abs(), "{basis:?} m={m} n={n}: {v} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn combinatorial_blowup_guard() {
        let r = dn_r_m_operator(Basis::Fock, 0.1, c(1.0), c(0.0), 12, 30, 64);
        assert!(matches!(r, Err(Error::CombinatorialBlowup(_))));
    }

    #[test]
    fn two_photon_fock_sectors_are_bergman_blocks() {
        let (g, delta, eps, n) = (0.3, 0.4, 0.1, 12);
        let h = two_photon_fock_matrix(g, delta, eps, 2 * n);
        let blocks = model_block_matrices(&ModelSpec::TwoPhoton { g, delta, eps }, n).unwrap();
        for (parity, blk) in blocks.iter().enumerate() {
            let idx = |i: usize| 2 * (2 * (i / 2) + parity) + i % 2;
            for i in 0..2 * n {
                for j in 0..2 * n {
                    assert!((h[(idx(i), idx(j))] - blk[(i, j)]).abs() < 1e-13);
                    let other = |i: usize| 2 * (2 * (i / 2) + 1 - parity) + i % 2;
                    assert_eq!(h[(idx(i), other(j))], 0.0);
                }
            }
        }
    }

    #[test]
    fn eigen_oracle_uncoupled_one_photon() {
        let (lam, eps) = (1.0, 0.1);
        let v = zeta_eigen_oracle(&ModelSpec::OnePhoton { g: 0.3, delta: 0.0, eps }, 2, c(lam), 400).unwrap();
        let expect = hurwitz_zeta(2, c(lam + eps)).unwrap().value + hurwitz_zeta(2, c(lam - eps)).unwrap().value;
        assert!((v.value - expect).norm() <= v.abs_error.max(1e-10), "{} {}", (v.value - expect).norm(), v.abs_error);
    }

    #[test]
    fn eigen_oracle_ncho_equal_masses() {
        let (alpha, eta, lam) = (1.7, 0.1, 0.8);
        let v = zeta_eigen_oracle(&ModelSpec::Ncho { alpha, beta: alpha, eta }, 2, c(lam), 400).unwrap();
        let expect =
            hurwitz_zeta(2, c(lam + 2.0 * eta + 0.5)).unwrap().value + hurwitz_zeta(2, c(lam - 2.0 * eta + 0.5)).unwrap().value;
        assert!((v.value - expect).norm() <= v.abs_error.max(1e-10), "{}", (v.value - expect).norm());
    }

    #[test]
    fn model_validation() {
        assert!(ModelSpec::Ncho { alpha: 0.5, beta: 1.5, eta: 0.0 }.validate().is_err());
        assert!(ModelSpec::BergmanNu { nu: 0.0, g: 0.1, delta: 0.1, eps: 0.0 }.validate().is_err());
        assert!(ModelSpec::Ncho { alpha: 2.0, beta: 1.2, eta: 0.1 }.validate().is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn hermitian_for_real_parameters(g in -1.0f64..1.0, lam in 0.5f64..3.0, nu in 0.2f64..3.0) {
            for basis in [Basis::Fock, Basis::Bergman(nu)] {
                let op = build_component_operator(basis, g, c(lam), Sign::Minus, 20).unwrap();
                prop_assert!(op.diag.iter().all(|d| d.im == 0.0));
                let dense = op.dense_unshifted();
                prop_assert_eq!(dense.clone(), dense.transpose());
            }
        }

        #[test]
        fn epsilon_reflection(g in -0.4f64..0.4, lam in 1.0f64..2.5, eps in -0.4f64..0.4, m in 1usize..=2) {
            let a = r_m_operator(Basis::Fock, g, c(lam), c(eps), m, 128).unwrap().value;
            let b = r_m_operator(Basis::Fock, g, c(lam), c(-eps), m, 128).unwrap().value;
            prop_assert!((a - b).norm() < 1e-10);
        }
    }
}
