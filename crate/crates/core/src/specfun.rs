//! Scalar special functions: Hurwitz zeta, alternating Hurwitz sums,
//! Pochhammer symbols, binomials, truncated generalized hypergeometric series,
//! and a summation engine for rational series in the summation index.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex double-precision scalar used for every parameter that may be complex.
pub type C64 = Complex64;

/// Distance to a nonpositive integer below which an argument counts as a pole.
pub const POLE_RADIUS: f64 = 1e-12;

/// Maximum number of terms summed by [`hypergeometric_pfq`].
pub const PFQ_TERM_CAP: usize = 100_000;

/// Bernoulli numbers B₂, B₄, …, B₂₀ as exact rationals (numerator, denominator).
const BERNOULLI_EVEN: [(f64, f64); 10] = [
    (1.0, 6.0),
    (-1.0, 30.0),
    (1.0, 42.0),
    (-1.0, 30.0),
    (5.0, 66.0),
    (-691.0, 2730.0),
    (7.0, 6.0),
    (-3617.0, 510.0),
    (43867.0, 798.0),
    (-174611.0, 330.0),
];

/// A computed value together with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    /// The approximated value.
    pub value: C64,
    /// Estimated absolute error of `value`.
    pub abs_error: f64,
    /// Number of terms, nodes or samples that went into `value`.
    pub terms_used: u64,
    /// Whether the routine met its own stopping criterion.
    pub converged: bool,
}

impl SeriesValue {
    /// A converged value with the given error estimate.
    pub fn new(value: C64, abs_error: f64, terms_used: u64) -> Self {
        SeriesValue { value, abs_error, terms_used, converged: true }
    }

    /// An exactly known value.
    pub fn exact(value: C64) -> Self {
        SeriesValue { value, abs_error: 0.0, terms_used: 0, converged: true }
    }

    /// Multiplies the value and its error by a scalar.
    pub fn scale(self, s: C64) -> Self {
        SeriesValue { value: self.value * s, abs_error: self.abs_error * s.norm(), ..self }
    }

    /// Adds two values, summing their error estimates and term counts.
    pub fn add(self, other: SeriesValue) -> Self {
        SeriesValue {
            value: self.value + other.value,
            abs_error: self.abs_error + other.abs_error,
            terms_used: self.terms_used + other.terms_used,
            converged: self.converged && other.converged,
        }
    }
}

/// Neumaier-compensated accumulator for complex sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: C64,
    comp: C64,
}

impl CompensatedSum {
    /// Empty accumulator.
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one term.
    pub fn add(&mut self, x: C64) {
        let (s_re, c_re) = two_sum(self.sum.re, x.re);
        let (s_im, c_im) = two_sum(self.sum.im, x.im);
        self.sum = C64::new(s_re, s_im);
        self.comp += C64::new(c_re, c_im);
    }

    /// Current compensated total.
    pub fn total(&self) -> C64 {
        self.sum + self.comp
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Pairwise (tree) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[C64]) -> C64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().fold(C64::new(0.0, 0.0), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Ascending factorial (x)ₙ = x(x+1)⋯(x+n−1), with (x)₀ = 1.
pub fn pochhammer(x: C64, n: u32) -> C64 {
    let mut p = C64::new(1.0, 0.0);
    for i in 0..n {
        p *= x + i as f64;
    }
    p
}

/// Binomial coefficient C(n, k) in floating point (exact up to 2⁵³).
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut b = 1.0f64;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b.round()
}

/// n! in floating point.
pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Distance from `a` to the nearest integer `≤ -start`, or infinity when
/// `Re a` is far from that set.
pub fn distance_to_poles(a: C64, start: u64) -> f64 {
    let limit = -(start as f64);
    let nearest = a.re.round().min(limit);
    (a - nearest).norm()
}

fn check_pole(a: C64, what: &str) -> Result<()> {
    if !(a.re.is_finite() && a.im.is_finite()) {
        return Err(Error::Domain(format!("{what}: non-finite argument {a}")));
    }
    if distance_to_poles(a, 0) <= POLE_RADIUS {
        return Err(Error::Pole(format!("{what}: argument {a} is a nonpositive integer")));
    }
    Ok(())
}

/// (k+a)^{-n} via exp(−n·log(k+a)) with the principal logarithm.
fn inv_pow(x: C64, n: f64) -> C64 {
    (-n * x.ln()).exp()
}

/// Euler–Maclaurin evaluation of Σ_{k≥0} (x+k)^{-n} for `Re x` large.
///
/// Returns the value and the magnitude of the last correction term used.
fn hurwitz_em(n: u32, x: C64) -> (C64, f64) {
    let nf = n as f64;
    let xinv = x.inv();
    let xpow = inv_pow(x, nf); // x^{-n}
    let mut sum = x * xpow / (nf - 1.0) + xpow * 0.5;
    // term_j = B_{2j}/(2j)! · (n)_{2j−1} · x^{−n−2j+1}
    let mut rising = nf; // (n)_{2j-1}
    let mut fact = 2.0; // (2j)!
    let mut xp = xpow * xinv; // x^{-n-1}
    let mut last = 0.0;
    for (j, &(bn, bd)) in BERNOULLI_EVEN.iter().enumerate() {
        let j = j + 1;
        if j > 1 {
            let a = (2 * j - 3) as f64;
            rising *= (nf + a) * (nf + a + 1.0);
            fact *= ((2 * j - 1) * (2 * j)) as f64;
            xp *= xinv * xinv;
        }
        let term = xp * (bn / bd / fact * rising);
        sum += term;
        last = term.norm();
    }
    (sum, last)
}

/// Split point used by [`hurwitz_zeta`] for argument `a`.
fn hurwitz_split(a: C64) -> usize {
    let base = 30.0f64.max((10.0 + a.im.abs()).ceil());
    let shift = (30.0 - a.re).ceil().max(0.0);
    base.max(shift) as usize
}

/// Hurwitz zeta ζ(n, a) = Σ_{k≥0} (k+a)^{-n} for integer n ≥ 2.
///
/// The first K terms are summed directly and the remainder is evaluated by
/// Euler–Maclaurin summation with Bernoulli numbers through B₂₀.
pub fn hurwitz_zeta(n: u32, a: C64) -> Result<SeriesValue> {
    hurwitz_zeta_with_split(n, a, hurwitz_split(a))
}

/// [`hurwitz_zeta`] with an explicit direct-summation length `k_split`.
///
/// `k_split` is raised if needed so that the Euler–Maclaurin argument has
/// real part at least 20.
pub fn hurwitz_zeta_with_split(n: u32, a: C64, k_split: usize) -> Result<SeriesValue> {
    if n < 2 {
        return Err(Error::Domain(format!("hurwitz_zeta requires n >= 2, got {n}")));
    }
    check_pole(a, "hurwitz_zeta")?;
    let min_split = (20.0 - a.re).ceil().max(0.0) as usize;
    let k_split = k_split.max(min_split);
    let x = a + k_split as f64;
    let (tail, last) = hurwitz_em(n, x);
    let mut acc = CompensatedSum::new();
    acc.add(tail);
    for k in (0..k_split).rev() {
        acc.add(inv_pow(a + k as f64, n as f64));
    }
    let value = acc.total();
    let abs_error = last + 4.0 * f64::EPSILON * value.norm();
    Ok(SeriesValue::new(value, abs_error, k_split as u64 + 12))
}

/// Alternating Hurwitz sum Σ_{k≥0} (−1)^k (k+a)^{-n} for n ≥ 2, computed as
/// 2^{-n}(ζ(n, a/2) − ζ(n, (a+1)/2)).
pub fn alternating_zeta_sum(n: u32, a: C64) -> Result<SeriesValue> {
    if n < 2 {
        return Err(Error::Domain(format!("alternating_zeta_sum requires n >= 2, got {n}")));
    }
    check_pole(a, "alternating_zeta_sum")?;
    let z0 = hurwitz_zeta(n, a * 0.5)?;
    let z1 = hurwitz_zeta(n, (a + 1.0) * 0.5)?;
    let s = 0.5f64.powi(n as i32);
    let value = (z0.value - z1.value) * s;
    let abs_error = (z0.abs_error + z1.abs_error) * s + 4.0 * f64::EPSILON * value.norm();
    Ok(SeriesValue::new(value, abs_error, z0.terms_used + z1.terms_used))
}

/// Digamma ψ(a) for complex `a` off the poles.
pub fn digamma(a: C64) -> Result<C64> {
    check_pole(a, "digamma")?;
    let mut x = a;
    let mut acc = C64::new(0.0, 0.0);
    while x.re < 12.0 || x.norm() < 12.0 {
        acc -= x.inv();
        x += 1.0;
    }
    let xinv = x.inv();
    let x2 = xinv * xinv;
    let mut series = C64::new(0.0, 0.0);
    let mut p = x2;
    for (j, &(bn, bd)) in BERNOULLI_EVEN.iter().enumerate() {
        let two_j = (2 * (j + 1)) as f64;
        series += p * (bn / bd / two_j);
        p *= x2;
    }
    Ok(acc + x.ln() - xinv * 0.5 - series)
}

/// Σ_{k≥0} (−1)^k (k+a)^{-n} for any n ≥ 1 (n = 1 via digamma).
pub fn alternating_sum_any(n: u32, a: C64) -> Result<SeriesValue> {
    if n == 0 {
        return Err(Error::Domain("alternating sum of order 0 diverges".into()));
    }
    if n >= 2 {
        return alternating_zeta_sum(n, a);
    }
    check_pole(a, "alternating_sum")?;
    let value = (digamma((a + 1.0) * 0.5)? - digamma(a * 0.5)?) * 0.5;
    Ok(SeriesValue::new(value, 1e-15 * (1.0 + value.norm()), 0))
}

/// Truncated generalized hypergeometric series ₚF_q(upper; lower; x).
///
/// Terms are accumulated until the geometric tail bound falls below
/// `tol·|partial sum|`; that bound (plus rounding) is reported as `abs_error`.
/// A series that terminates because an upper parameter is a nonpositive
/// integer is summed exactly.
pub fn hypergeometric_pfq(upper: &[C64], lower: &[C64], x: C64, tol: f64) -> Result<SeriesValue> {
    for &b in lower {
        if distance_to_poles(b, 0) <= POLE_RADIUS {
            return Err(Error::Pole(format!("pFq lower parameter {b} is a nonpositive integer")));
        }
    }
    let terminating = upper.iter().any(|&a| a.im == 0.0 && a.re <= 0.0 && a.re.fract() == 0.0);
    if !terminating && x.norm() >= 1.0 {
        return Err(Error::Domain(format!("pFq requires |x| < 1, got |x| = {}", x.norm())));
    }
    let tol = tol.max(f64::EPSILON);
    let mut acc = CompensatedSum::new();
    let mut abs_sum = 0.0;
    let mut term = C64::new(1.0, 0.0);
    for k in 0..PFQ_TERM_CAP {
        acc.add(term);
        abs_sum += term.norm();
        let kf = k as f64;
        let mut next = term * x / (kf + 1.0);
        for &a in upper {
            next *= a + kf;
        }
        for &b in lower {
            next /= b + kf;
        }
        if next.norm() == 0.0 {
            let value = acc.total();
            return Ok(SeriesValue::new(value, 4.0 * f64::EPSILON * abs_sum, k as u64 + 1));
        }
        let ratio = next.norm() / term.norm();
        let r = ratio.max(x.norm());
        if r < 1.0 {
            let bound = next.norm() / (1.0 - r);
            let s = acc.total().norm();
            if bound <= tol * s || (s == 0.0 && bound == 0.0) {
                acc.add(next);
                abs_sum += next.norm();
                let value = acc.total();
                let abs_error = next.norm() * r / (1.0 - r) + 4.0 * f64::EPSILON * abs_sum;
                return Ok(SeriesValue::new(value, abs_error, k as u64 + 2));
            }
        }
        term = next;
    }
    Err(Error::NoConvergence(format!("pFq did not converge within {PFQ_TERM_CAP} terms")))
}

/// A series Σ_{k ≥ start} s^k · ∏ᵢ (k + zᵢ)^{eᵢ} with s = ±1.
///
/// The summand is a rational function of k, so the tail admits a convergent
/// expansion in inverse powers of (k + c) whose coefficients are obtained by
/// exponentiating the logarithmic series; each inverse-power sum is a Hurwitz
/// zeta value (or its alternating analogue).
#[derive(Debug, Clone)]
pub struct RationalSeries {
    /// Pairs (zᵢ, eᵢ): the summand contains the factor (k + zᵢ)^{eᵢ}.
    pub factors: Vec<(C64, i32)>,
    /// Use the sign (−1)^k.
    pub alternating: bool,
    /// First summation index.
    pub start: u64,
}

impl RationalSeries {
    /// Non-alternating series starting at k = 0.
    pub fn new(factors: Vec<(C64, i32)>) -> Self {
        RationalSeries { factors, alternating: false, start: 0 }
    }

    /// Sets the sign pattern (−1)^k.
    pub fn alternating(mut self, alt: bool) -> Self {
        self.alternating = alt;
        self
    }

    /// Sets the first summation index.
    pub fn starting_at(mut self, start: u64) -> Self {
        self.start = start;
        self
    }

    /// Summand at index k (without the sign).
    fn summand(&self, k: u64) -> C64 {
        let kf = k as f64;
        let mut t = C64::new(1.0, 0.0);
        for &(z, e) in &self.factors {
            let base = z + kf;
            if e >= 0 {
                for _ in 0..e {
                    t *= base;
                }
            } else {
                let inv = base.inv();
                for _ in 0..(-e) {
                    t *= inv;
                }
            }
        }
        t
    }

    /// Sums the series.
    pub fn sum(&self) -> Result<SeriesValue> {
        let degree: i32 = self.factors.iter().map(|&(_, e)| e).sum();
        let need = if self.alternating { -1 } else { -2 };
        if degree > need {
            return Err(Error::Domain(format!("rational series of degree {degree} diverges")));
        }
        for &(z, e) in &self.factors {
            if e < 0 && distance_to_poles(z, self.start) <= POLE_RADIUS {
                return Err(Error::Pole(format!("rational series factor (k+{z}) vanishes")));
            }
        }
        let weight: f64 = self.factors.iter().map(|&(_, e)| e.unsigned_abs() as f64).sum();
        let c = self
            .factors
            .iter()
            .fold(C64::new(0.0, 0.0), |acc, &(z, e)| acc + z * e.unsigned_abs() as f64)
            / weight.max(1.0);
        let rho = self.factors.iter().map(|&(z, _)| (z - c).norm()).fold(0.0, f64::max);
        let order = (-degree) as f64;
        let target = (8.0 * rho).max(20.0).max(0.6 * (order + 40.0)).max(c.im.abs());
        let mut k_split = (target - c.re).ceil().max(0.0) as u64;
        k_split = k_split.max(self.start);
        if self.alternating && k_split % 2 == 1 {
            k_split += 1;
        }
        let x = c + k_split as f64;

        // Coefficients of G(t) = ∏ (1 + wᵢ t)^{eᵢ}, wᵢ = zᵢ − c.
        const JMAX: usize = 400;
        let ws: Vec<(C64, f64)> = self.factors.iter().map(|&(z, e)| (z - c, e as f64)).collect();
        let mut logc = vec![C64::new(0.0, 0.0); JMAX + 1];
        let mut g = vec![C64::new(0.0, 0.0); JMAX + 1];
        g[0] = C64::new(1.0, 0.0);
        let mut pows: Vec<C64> = ws.iter().map(|&(w, _)| w).collect();
        let xn = x.norm();
        let mut tail = CompensatedSum::new();
        let mut last = f64::INFINITY;
        let mut used = 0usize;
        let mut small_run = 0;
        for j in 0..=JMAX {
            if j >= 1 {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                let mut l = C64::new(0.0, 0.0);
                for (p, &(w, e)) in pows.iter_mut().zip(&ws) {
                    l += *p * e;
                    *p *= w;
                }
                logc[j] = l * (sign / j as f64);
                let mut gj = C64::new(0.0, 0.0);
                for i in 1..=j {
                    gj += logc[i] * g[j - i] * i as f64;
                }
                g[j] = gj / j as f64;
            }
            let p = (j as i32 - degree) as u32;
            let zsum = if g[j].norm() == 0.0 {
                C64::new(0.0, 0.0)
            } else if self.alternating {
                let v = alternating_sum_large(p, x);
                if k_split % 2 == 1 {
                    -v
                } else {
                    v
                }
            } else {
                hurwitz_em(p, x).0
            };
            let term = g[j] * zsum;
            tail.add(term);
            used = j + 1;
            last = term.norm();
            let scale = tail.total().norm().max(1e-300);
            // Require consecutive small contributions and a decaying coefficient.
            if last <= 1e-18 * scale && g[j].norm() * xn.powi(-(j as i32)) < 1e-18 {
                small_run += 1;
                if small_run >= 3 {
                    break;
                }
            } else {
                small_run = 0;
            }
        }
        if small_run < 3 {
            return Err(Error::NoConvergence("rational series tail expansion".into()));
        }
        let mut acc = CompensatedSum::new();
        acc.add(tail.total());
        let mut abs_sum = tail.total().norm();
        for k in (self.start..k_split).rev() {
            let mut t = self.summand(k);
            if self.alternating && k % 2 == 1 {
                t = -t;
            }
            abs_sum += t.norm();
            acc.add(t);
        }
        let value = acc.total();
        let abs_error = last + 8.0 * f64::EPSILON * abs_sum;
        Ok(SeriesValue::new(value, abs_error, k_split - self.start + used as u64))
    }
}

/// Σ_{k≥0} (−1)^k (k+x)^{-p} for `Re x` large (no pole checks).
fn alternating_sum_large(p: u32, x: C64) -> C64 {
    if p == 1 {
        let d = digamma_large((x + 1.0) * 0.5) - digamma_large(x * 0.5);
        return d * 0.5;
    }
    let a = hurwitz_em(p, x * 0.5).0;
    let b = hurwitz_em(p, (x + 1.0) * 0.5).0;
    (a - b) * 0.5f64.powi(p as i32)
}

fn digamma_large(x: C64) -> C64 {
    digamma(x).unwrap_or(C64::new(f64::NAN, f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn basel_and_half_shift() {
        let z = hurwitz_zeta(2, c(1.0)).unwrap();
        assert!((z.value.re - PI * PI / 6.0).abs() < 1e-14);
        let z = hurwitz_zeta(2, c(0.5)).unwrap();
        assert!((z.value.re - PI * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn zeta3_minus_one_against_brute_force() {
        // Brute force 10^7 terms plus the integral tail x^{-2}/2 + x^{-3}/2.
        let kmax = 10_000_000u64;
        let mut s = 0.0f64;
        for k in (0..kmax).rev() {
            let x = (k + 2) as f64;
            s += 1.0 / (x * x * x);
        }
        let x = (kmax + 2) as f64;
        s += 0.5 / (x * x) + 0.5 / (x * x * x);
        let z = hurwitz_zeta(3, c(2.0)).unwrap();
        assert!((z.value.re - s).abs() < 1e-13, "{} vs {}", z.value.re, s);
    }

    #[test]
    fn pole_is_rejected() {
        assert!(matches!(hurwitz_zeta(2, c(-3.0)), Err(Error::Pole(_))));
        assert!(matches!(hurwitz_zeta(2, c(0.0)), Err(Error::Pole(_))));
        assert!(hurwitz_zeta(2, c(-2.5)).is_ok());
    }

    #[test]
    fn negative_real_part_argument() {
        // ζ(2, −2.5) = 1/2.5² + 1/1.5² + 1/0.5² + ζ(2, 0.5)
        let expect = 1.0 / 6.25 + 1.0 / 2.25 + 4.0 + PI * PI / 2.0;
        let z = hurwitz_zeta(2, c(-2.5)).unwrap();
        assert!((z.value.re - expect).abs() < 1e-12);
    }

    #[test]
    fn alternating_closed_forms() {
        let e = alternating_zeta_sum(2, c(1.0)).unwrap();
        assert!((e.value.re - PI * PI / 12.0).abs() < 1e-14);
        let zeta3 = 1.2020569031595942853997;
        let e = alternating_zeta_sum(3, c(1.0)).unwrap();
        assert!((e.value.re - 0.75 * zeta3).abs() < 1e-14);
        let e = alternating_zeta_sum(2, c(0.5)).unwrap();
        let d = (hurwitz_zeta(2, c(0.25)).unwrap().value - hurwitz_zeta(2, c(0.75)).unwrap().value) * 0.25;
        assert!((e.value - d).norm() < 1e-14);
    }

    #[test]
    fn alternating_by_euler_transform() {
        // Independent check: Euler transform of Σ(−1)^k/(k+1)^3 via forward differences.
        let f = |k: usize| 1.0 / ((k + 1) as f64).powi(3);
        let m = 60;
        let mut diffs: Vec<f64> = (0..m).map(f).collect();
        let mut total = 0.0;
        for j in 0..m {
            total += diffs[0] / 2f64.powi(j as i32 + 1);
            diffs = diffs.windows(2).map(|w| w[0] - w[1]).collect();
            if diffs.is_empty() {
                break;
            }
        }
        let e = alternating_zeta_sum(3, c(1.0)).unwrap();
        assert!((e.value.re - total).abs() < 1e-12);
    }

    #[test]
    fn alternating_order_one() {
        let v = alternating_sum_any(1, c(1.0)).unwrap();
        assert!((v.value.re - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn digamma_values() {
        let euler_gamma = 0.5772156649015329;
        assert!((digamma(c(1.0)).unwrap().re + euler_gamma).abs() < 1e-14);
        let half = -euler_gamma - 2.0 * 2f64.ln();
        assert!((digamma(c(0.5)).unwrap().re - half).abs() < 1e-14);
    }

    #[test]
    fn pochhammer_examples() {
        assert_eq!(pochhammer(C64::new(3.7, -1.2), 0), c(1.0));
        assert_eq!(pochhammer(c(1.0), 4), c(24.0));
        assert_eq!(pochhammer(c(0.5), 2), c(0.75));
    }

    #[test]
    fn hypergeometric_examples() {
        let v = hypergeometric_pfq(&[c(0.3), c(1.7)], &[c(2.2)], c(0.0), 1e-15).unwrap();
        assert_eq!(v.value, c(1.0));
        let v = hypergeometric_pfq(&[c(1.0), c(1.0)], &[c(2.0)], c(0.5), 1e-15).unwrap();
        assert!((v.value.re - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!(v.abs_error < 1e-14);
    }

    #[test]
    fn hypergeometric_3f2_against_direct_partial_sums() {
        // Direct 10^4-term partial sum with terms built from explicit Pochhammer products.
        let (a, b, cc) = (0.5, 0.5, -0.5);
        let x: f64 = 0.25;
        let mut s = 0.0;
        let mut t = 1.0;
        for k in 0..10_000 {
            s += t;
            let kf = k as f64;
            t *= (a + kf) * (b + kf) * (cc + kf) / ((1.0 + kf) * (1.0 + kf)) * x / (kf + 1.0);
        }
        let v = hypergeometric_pfq(&[c(a), c(b), c(cc)], &[c(1.0), c(1.0)], c(x), 1e-15).unwrap();
        assert!((v.value.re - s).abs() < 1e-12);
    }

    #[test]
    fn hypergeometric_terminating_and_poles() {
        // ₂F₁(−2, b; c; x) = 1 − 2bx/c + b(b+1)x²/(c(c+1))
        let (b, cc, x) = (0.7, 1.3, 3.0);
        let expect = 1.0 - 2.0 * b * x / cc + b * (b + 1.0) * x * x / (cc * (cc + 1.0));
        let v = hypergeometric_pfq(&[c(-2.0), c(b)], &[c(cc)], c(x), 1e-15).unwrap();
        assert!((v.value.re - expect).abs() < 1e-13);
        assert!(matches!(
            hypergeometric_pfq(&[c(1.0)], &[c(-1.0)], c(0.5), 1e-12),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn rational_series_basel() {
        let s = RationalSeries::new(vec![(c(1.0), -2)]).sum().unwrap();
        assert!((s.value.re - PI * PI / 6.0).abs() < 1e-14);
        let s = RationalSeries::new(vec![(c(1.0), -2)]).alternating(true).sum().unwrap();
        assert!((s.value.re - PI * PI / 12.0).abs() < 1e-14);
        let s = RationalSeries::new(vec![(c(1.0), -1)]).alternating(true).sum().unwrap();
        assert!((s.value.re - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn rational_series_telescoping() {
        // Σ_{k≥0} 1/((k+1)(k+2)) = 1 and Σ_{k≥2} 1/(k(k+1)) = 1/2.
        let s = RationalSeries::new(vec![(c(1.0), -1), (c(2.0), -1)]).sum().unwrap();
        assert!((s.value.re - 1.0).abs() < 1e-14);
        let s = RationalSeries::new(vec![(c(0.0), -1), (c(1.0), -1)]).starting_at(2).sum().unwrap();
        assert!((s.value.re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rational_series_high_degree_with_numerator() {
        // Σ_k (k+1)(k+2)/((k+3)^2 (k+0.5)^3 (k+7)) against a long direct sum + tail.
        let factors = vec![(c(1.0), 1), (c(2.0), 1), (c(3.0), -2), (c(0.5), -3), (c(7.0), -1)];
        let s = RationalSeries::new(factors.clone()).sum().unwrap();
        let mut direct = 0.0;
        let kmax = 2_000_000u64;
        for k in (0..kmax).rev() {
            let k = k as f64;
            direct += (k + 1.0) * (k + 2.0) / ((k + 3.0).powi(2) * (k + 0.5).powi(3) * (k + 7.0));
        }
        // Degree −4 tail ~ ∫ x^{-4} = K^{-3}/3.
        direct += (kmax as f64).powi(-3) / 3.0;
        assert!((s.value.re - direct).abs() < 1e-14, "{} {}", s.value.re, direct);
    }

    #[test]
    fn rational_series_complex_parameters() {
        let a = C64::new(0.7, 0.4);
        let s = RationalSeries::new(vec![(a, -2)]).sum().unwrap();
        let z = hurwitz_zeta(2, a).unwrap();
        assert!((s.value - z.value).norm() < 1e-14);
    }

    #[test]
    fn split_point_independence_examples() {
        for &a in &[c(0.3), C64::new(2.5, 3.0), C64::new(7.0, -4.5)] {
            for n in 2..=5 {
                let k = hurwitz_split(a);
                let z1 = hurwitz_zeta_with_split(n, a, k).unwrap();
                let z2 = hurwitz_zeta_with_split(n, a, 2 * k).unwrap();
                assert!((z1.value - z2.value).norm() < 1e-11);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn ladder_identity(re in 0.1f64..10.0, im in -5.0f64..5.0, n in 2u32..=4) {
            let a = C64::new(re, im);
            let lhs = hurwitz_zeta(n, a).unwrap().value - hurwitz_zeta(n, a + 1.0).unwrap().value;
            let rhs = inv_pow(a, n as f64);
            prop_assert!((lhs - rhs).norm() < 1e-11);
        }

        #[test]
        fn split_point_doubling(re in 0.1f64..10.0, im in -5.0f64..5.0, n in 2u32..=6) {
            let a = C64::new(re, im);
            let k = hurwitz_split(a);
            let z1 = hurwitz_zeta_with_split(n, a, k).unwrap().value;
            let z2 = hurwitz_zeta_with_split(n, a, 2 * k).unwrap().value;
            prop_assert!((z1 - z2).norm() < 1e-11);
        }

        #[test]
        fn pochhammer_recurrence(re in -5.0f64..5.0, im in -5.0f64..5.0, n in 0u32..20) {
            let x = C64::new(re, im);
            let lhs = pochhammer(x, n + 1);
            let rhs = pochhammer(x, n) * (x + n as f64);
            prop_assert!((lhs - rhs).norm() <= 1e-15 * lhs.norm().max(1e-300));
        }

        #[test]
        fn euler_transformation(
            a in -1.5f64..1.5, b in -1.5f64..1.5, cc in 0.2f64..3.0, x in -0.6f64..0.6,
            ai in -0.5f64..0.5,
        ) {
            let (a, b, cc, x) = (C64::new(a, ai), c(b), c(cc), c(x));
            let lhs = hypergeometric_pfq(&[a, b], &[cc], x, 1e-15).unwrap().value;
            let pre = ((cc - a - b) * (-x + 1.0).ln()).exp();
            let rhs = pre * hypergeometric_pfq(&[cc - a, cc - b], &[cc], x, 1e-15).unwrap().value;
            prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        }

        #[test]
        fn rational_series_matches_hurwitz_difference(a in 0.2f64..6.0, b in 0.2f64..6.0) {
            prop_assume!((a - b).abs() > 0.05);
            // Σ 1/((k+a)(k+b)) = (ψ(a) − ψ(b))/(a − b)
            let s = RationalSeries::new(vec![(c(a), -1), (c(b), -1)]).sum().unwrap().value;
            let d = (digamma(c(a)).unwrap() - digamma(c(b)).unwrap()) / (a - b);
            prop_assert!((s - d).norm() < 1e-12);
        }
    }
}
