//! Beukers-type double integrals, the generalized Apéry coefficient families
//! that decompose them, and the classical Apéry numbers for ζ(2).
//!
//! Two families are covered. The flat family
//! J♭ₙ(λ,ε) = ∫∫ (1−u)ⁿ(1−v)ⁿ/(1−uv)ⁿ⁺¹ · u^{λ+ε−1} v^{λ−ε−1} du dv
//! and the δ family (δ = ±1)
//! Jᵟₙ(λ,ε) = ∫∫ (u−δv)ⁿ/(1−δuv)ⁿ⁺¹ · u^{λ+ε−½} v^{λ−ε−½} du dv.
//! Each is an "A times a zeta-type sum plus B" combination whose coefficients
//! are rational functions of (λ, ε); every coefficient is implemented twice
//! by algebraically different finite sums that are cross-checked on each call.
//! The finite sums are generic over [`Field`], so the same code runs in complex
//! floating point and in exact rational arithmetic.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_tensor, QuadratureSpec};
use crate::specfun::{distance_to_poles, CompensatedSum, RationalSeries, SeriesValue, C64, POLE_RADIUS};

/// Guard radius around the excluded half-integer values of ε.
pub const HALF_INTEGER_GUARD: f64 = 1e-9;

/// Relative tolerance of the dual-form cross-checks in floating point.
///
/// The tolerance is applied to the sum of the absolute values of the terms of
/// both forms, which bounds the rounding error of either form.
pub const DUAL_FORM_TOL: f64 = 1e-10;

/// Largest order accepted by the coefficient families.
pub const MAX_AB_ORDER: u32 = 60;

/// Largest index accepted by [`apery_classic`].
pub const MAX_CLASSIC_N: usize = 200;

/// Largest index accepted by [`beukers_residual`].
pub const MAX_BEUKERS_N: u32 = 12;

/// Below this |ε| the floating flat B coefficient is taken from the residue
/// form, which has no 1/ε cancellation.
const FLAT_B_SMALL_EPS: f64 = 1e-3;

/// High and low parts of ζ(2) = π²/6 as a double-double.
const ZETA2_HI: f64 = 1.6449340668482264;
const ZETA2_LO: f64 = 3.040672350398476e-17;

/// The sign δ of the δ family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delta {
    /// δ = +1.
    Plus,
    /// δ = −1.
    Minus,
}

impl Delta {
    /// The sign as an integer.
    pub fn sign(self) -> i64 {
        match self {
            Delta::Plus => 1,
            Delta::Minus => -1,
        }
    }

    /// δᵏ.
    fn pow(self, k: u32) -> i64 {
        if self == Delta::Minus && k % 2 == 1 {
            -1
        } else {
            1
        }
    }
}

/// Which coefficient family an [`AperyCoefficients`] value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AperyFamily {
    /// The flat family J♭.
    Flat,
    /// The δ family Jᵟ.
    Delta(Delta),
}

/// Route used by [`j_flat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatMethod {
    /// The closed k-series.
    Series,
    /// Tensor quadrature of the defining double integral.
    Quadrature,
}

/// Route used by [`j_delta`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMethod {
    /// The closed k-series.
    Series,
    /// The two-step recurrence in n started from the closed forms of J₀, J₁.
    Recurrence,
}

/// The pair (A, B) of one family at one parameter point.
///
/// `T` is [`C64`] for floating evaluations and [`BigRational`] for exact ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AperyCoefficients<T = C64> {
    /// Coefficient of the zeta-type sum.
    pub a: T,
    /// Constant term.
    pub b: T,
    /// Order n.
    pub n: u32,
    /// Family the coefficients belong to.
    pub family: AperyFamily,
}

/// The classical Apéry numbers for ζ(2).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactApery {
    /// A₀, A₁, …
    pub a_list: Vec<BigInt>,
    /// B₀, B₁, …
    pub b_list: Vec<BigRational>,
}

/// Arithmetic needed by the finite coefficient sums.
pub trait Field:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    /// The value p/q.
    fn ratio(p: i64, q: i64) -> Self;
    /// Exact (or floating) zero test used to avoid dividing by zero.
    fn is_zero_value(&self) -> bool;
    /// Absolute value as a double, for error scales.
    fn magnitude(&self) -> f64;
    /// Conversion to a complex double.
    fn to_c64(&self) -> C64;

    /// The integer k.
    fn int(k: i64) -> Self {
        Self::ratio(k, 1)
    }
}

impl Field for C64 {
    fn ratio(p: i64, q: i64) -> Self {
        C64::new(p as f64 / q as f64, 0.0)
    }
    fn is_zero_value(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn to_c64(&self) -> C64 {
        *self
    }
}

impl Field for BigRational {
    fn ratio(p: i64, q: i64) -> Self {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }
    fn is_zero_value(&self) -> bool {
        self.is_zero()
    }
    fn magnitude(&self) -> f64 {
        rational_to_f64(&self.abs())
    }
    fn to_c64(&self) -> C64 {
        C64::new(rational_to_f64(self), 0.0)
    }
}

/// Nearest double to an exact rational.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Parses an exact rational from `p/q`, an integer, or a finite decimal such as `-2.375`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Domain(format!("cannot parse '{s}' as an exact rational"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() || digits == "-" || digits == "+" {
        return Err(bad());
    }
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Value of a finite sum together with the sum of the magnitudes of its terms.
struct Scaled<T> {
    value: T,
    scale: f64,
}

impl<T: Field> Scaled<T> {
    fn zero() -> Self {
        Scaled { value: T::int(0), scale: 0.0 }
    }
    fn push(&mut self, term: T) {
        self.scale += term.magnitude();
        self.value = self.value.clone() + term;
    }
}

/// Ascending factorial (x)ₙ.
fn poch<T: Field>(x: &T, n: u32) -> T {
    let mut p = T::int(1);
    for i in 0..n {
        p = p * (x.clone() + T::int(i as i64));
    }
    p
}

/// (x)ₙ with the factor at offset `skip` left out.
fn poch_skip<T: Field>(x: &T, n: u32, skip: u32) -> T {
    let mut p = T::int(1);
    for i in (0..n).filter(|&i| i != skip) {
        p = p * (x.clone() + T::int(i as i64));
    }
    p
}

/// a / b, or `None` when b is zero.
fn div<T: Field>(a: T, b: T) -> Option<T> {
    if b.is_zero_value() {
        None
    } else {
        Some(a / b)
    }
}

fn binom_t<T: Field>(n: u32, k: u32) -> T {
    let mut c = T::int(1);
    for i in 0..k {
        c = c * T::ratio((n - i) as i64, (i + 1) as i64);
    }
    c
}

fn factorial_t<T: Field>(n: u32) -> T {
    (1..=n).fold(T::int(1), |acc, i| acc * T::int(i as i64))
}

// ---------------------------------------------------------------------------
// Flat family: the finite sums.
// ---------------------------------------------------------------------------

/// P⁺ₗ = (λ+ε−n+l)ₙ / ((1+2ε)ₗ (1−2ε)ₙ₋ₗ).
fn flat_p_plus<T: Field>(n: u32, l: u32, lam: &T, eps: &T) -> Option<T> {
    let two_eps = T::int(2) * eps.clone();
    let num = poch(&(lam.clone() + eps.clone() - T::int(n as i64) + T::int(l as i64)), n);
    let den = poch(&(T::int(1) + two_eps.clone()), l) * poch(&(T::int(1) - two_eps), n - l);
    div(num, den)
}

/// P⁻ₗ = (λ−ε−n+l)ₙ / ((1+2ε)ₙ₋ₗ (1−2ε)ₗ).
fn flat_p_minus<T: Field>(n: u32, l: u32, lam: &T, eps: &T) -> Option<T> {
    flat_p_plus(n, l, lam, &(-eps.clone()))
}

/// Σₗ C(n,l) P±ₗ.
fn flat_a_binomial<T: Field>(n: u32, lam: &T, eps: &T, plus: bool) -> Option<Scaled<T>> {
    let mut acc = Scaled::zero();
    for l in 0..=n {
        let p = if plus { flat_p_plus(n, l, lam, eps)? } else { flat_p_minus(n, l, lam, eps)? };
        acc.push(binom_t::<T>(n, l) * p);
    }
    Some(acc)
}

/// Partial fractions in ε: Σₘ (−1)ᵐ m/(2·n!) Σₗ C(n,l)C(n,l−m)(λ−m/2−n+l)ₙ (1/(ε−m/2) − 1/(ε+m/2)).
fn flat_a_residue<T: Field>(n: u32, lam: &T, eps: &T) -> Option<Scaled<T>> {
    let mut acc = Scaled::zero();
    let nf = factorial_t::<T>(n);
    for m in 1..=n {
        let half_m = T::ratio(m as i64, 2);
        let pole = div(T::int(1), eps.clone() - half_m.clone())? - div(T::int(1), eps.clone() + half_m.clone())?;
        let sign = if m % 2 == 0 { 1 } else { -1 };
        let pref = T::int(sign * m as i64) / (T::int(2) * nf.clone());
        for l in m..=n {
            let x = lam.clone() - half_m.clone() - T::int(n as i64) + T::int(l as i64);
            let c = binom_t::<T>(n, l) * binom_t::<T>(n, l - m);
            acc.push(pref.clone() * c * poch(&x, n) * pole.clone());
        }
    }
    Some(acc)
}

/// (1/2ε) Σₗ Σₖ C(n,l) (P⁺ₗ/(λ+ε+k) − P⁻ₗ/(λ−ε+k)).
fn flat_b_partial_fraction<T: Field>(n: u32, lam: &T, eps: &T) -> Option<Scaled<T>> {
    let two_eps = T::int(2) * eps.clone();
    if two_eps.is_zero_value() {
        return None;
    }
    let mut acc = Scaled::zero();
    for l in 1..=n {
        let c = binom_t::<T>(n, l);
        let pp = flat_p_plus(n, l, lam, eps)?;
        let pm = flat_p_minus(n, l, lam, eps)?;
        for k in 0..l {
            let kk = T::int(k as i64);
            let t1 = div(pp.clone(), lam.clone() + eps.clone() + kk.clone())?;
            let t2 = div(pm.clone(), lam.clone() - eps.clone() + kk)?;
            acc.push(c.clone() * t1 / two_eps.clone());
            acc.push(-(c.clone() * t2) / two_eps.clone());
        }
    }
    Some(acc)
}

/// Partial fractions in ε of B: Σₘ (−1)ᵐ/(2·n!) ΣₗΣₖ C(n,l)C(n,l−m)(λ−m/2−n+l)ₙ/(λ−m/2+k) · (1/(ε+m/2) − 1/(ε−m/2)).
fn flat_b_residue<T: Field>(n: u32, lam: &T, eps: &T) -> Option<Scaled<T>> {
    let mut acc = Scaled::zero();
    let nf = factorial_t::<T>(n);
    for m in 1..=n {
        let half_m = T::ratio(m as i64, 2);
        let pole = div(T::int(1), eps.clone() + half_m.clone())? - div(T::int(1), eps.clone() - half_m.clone())?;
        let sign = if m % 2 == 0 { 1 } else { -1 };
        let pref = T::int(sign) / (T::int(2) * nf.clone()) * pole;
        for l in m..=n {
            let x = lam.clone() - half_m.clone() - T::int(n as i64) + T::int(l as i64);
            let c = binom_t::<T>(n, l) * binom_t::<T>(n, l - m) * poch(&x, n);
            for k in 0..m {
                let t = div(c.clone(), lam.clone() - half_m.clone() + T::int(k as i64))?;
                acc.push(pref.clone() * t);
            }
        }
    }
    Some(acc)
}

// ---------------------------------------------------------------------------
// δ family: the finite sums.
// ---------------------------------------------------------------------------

/// (λ−(n−1)/2)ₙ / (ε−n/2)ₙ₊₁.
fn delta_a_ratio<T: Field>(n: u32, lam: &T, eps: &T) -> Option<Scaled<T>> {
    let num = poch(&(lam.clone() - T::ratio(n as i64 - 1, 2)), n);
    let den = poch(&(eps.clone() - T::ratio(n as i64, 2)), n + 1);
    let v = div(num, den)?;
    Some(Scaled { scale: v.magnitude(), value: v })
}

/// Even/odd product form of Aᵟₙ.
fn delta_a_parity<T: Field>(n: u32, lam: &T, eps: &T) -> Option<Scaled<T>> {
    let half = T::ratio(1, 2);
    let one = T::int(1);
    let v = if n % 2 == 0 {
        let h = n / 2;
        let num = poch(&(half.clone() + lam.clone()), h) * poch(&(half - lam.clone()), h);
        let den = eps.clone() * poch(&(one.clone() + eps.clone()), h) * poch(&(one - eps.clone()), h);
        div(num, den)?
    } else {
        let fl = n / 2;
        let ce = n.div_ceil(2);
        let num = lam.clone() * poch(&(one.clone() + lam.clone()), fl) * poch(&(one - lam.clone()), fl);
        let den = poch(&(half.clone() + eps.clone()), ce) * poch(&(half - eps.clone()), ce);
        -div(num, den)?
    };
    Some(Scaled { scale: v.magnitude(), value: v })
}

/// ½ Σₘ (−1)ᵐ⁺¹/(m!(n−m)!) (1/(ε−n/2+m) − (−δ)ⁿ/(ε+n/2−m)) Σₖ (λ−(n−1)/2)ₙ δᵏ/(λ+k−(n−1)/2+m).
///
/// The ratio (λ−(n−1)/2)ₙ/(λ+k−(n−1)/2+m) is a polynomial because k+m < n,
/// so the corresponding factor is removed from the Pochhammer product.
fn delta_b_msum<T: Field>(n: u32, delta: Delta, lam: &T, eps: &T) -> Option<Scaled<T>> {
    let mut acc = Scaled::zero();
    let half_n = T::ratio(n as i64, 2);
    let base = lam.clone() - T::ratio(n as i64 - 1, 2);
    let minus_delta_n = (-delta.sign()).pow(n);
    for m in 0..n.div_ceil(2) {
        let sign = if m % 2 == 0 { -1 } else { 1 };
        let coef = T::int(sign) / (factorial_t::<T>(m) * factorial_t::<T>(n - m));
        let pole = div(T::int(1), eps.clone() - half_n.clone() + T::int(m as i64))?
            - div(T::int(minus_delta_n), eps.clone() + half_n.clone() - T::int(m as i64))?;
        let pref = T::ratio(1, 2) * coef * pole;
        for k in 0..(n - 2 * m) {
            let t = poch_skip(&base, n, k + m) * T::int(delta.pow(k));
            acc.push(pref.clone() * t);
        }
    }
    Some(acc)
}

/// The l-sum case forms of Bᵟₙ.
fn delta_b_lsum<T: Field>(n: u32, delta: Delta, lam: &T, eps: &T) -> Option<Scaled<T>> {
    let mut acc = Scaled::zero();
    let h = T::ratio(n as i64 - 1, 2);
    let half_n = T::ratio(n as i64, 2);
    let upper = match (delta, n % 2) {
        (Delta::Plus, 0) => n / 2,
        _ => n.div_ceil(2),
    };
    for l in 0..upper {
        let num = poch(&(lam.clone() - h.clone()), l) * poch(&(-lam.clone() - h.clone()), l);
        let den = poch(&(eps.clone() - half_n.clone()), l + 1) * poch(&(-eps.clone() - half_n.clone()), l + 1);
        let base = div(num, den)?;
        let t = match (delta, n % 2) {
            (Delta::Plus, 0) => lam.clone() * base / T::int((n - 2 * l - 1) as i64),
            (Delta::Plus, _) => eps.clone() * base / T::int((n - 2 * l) as i64),
            (Delta::Minus, _) => base / T::int(2),
        };
        acc.push(t);
    }
    Some(acc)
}

// ---------------------------------------------------------------------------
// Guards and dual-form checks.
// ---------------------------------------------------------------------------

fn check_order(n: u32) -> Result<()> {
    if n > MAX_AB_ORDER {
        return Err(Error::Domain(format!("coefficient order {n} exceeds {MAX_AB_ORDER}")));
    }
    Ok(())
}

/// Rejects ε within the guard radius of k/2 for k in `ks`.
fn guard_half_integers(eps: C64, ks: impl IntoIterator<Item = i64>) -> Result<()> {
    for k in ks {
        let d = (eps - C64::new(k as f64 / 2.0, 0.0)).norm();
        if d <= HALF_INTEGER_GUARD {
            return Err(Error::HalfIntegerPole(format!("ε = {eps} is within {HALF_INTEGER_GUARD:e} of {}/2", k)));
        }
    }
    Ok(())
}

fn flat_guard(n: u32, eps: C64) -> Result<()> {
    let n = n as i64;
    guard_half_integers(eps, (1..=n).chain((1..=n).map(|k| -k)))
}

fn delta_guard(n: u32, eps: C64) -> Result<()> {
    let n = n as i64;
    guard_half_integers(eps, (0..=n).map(|j| 2 * j - n))
}

fn check_pair(what: &str, a: &Scaled<C64>, b: &Scaled<C64>) -> Result<()> {
    let scale = a.scale.max(b.scale).max(f64::MIN_POSITIVE);
    let diff = (a.value - b.value).norm();
    if diff > DUAL_FORM_TOL * scale && diff > DUAL_FORM_TOL {
        return Err(Error::Inconsistent(format!(
            "{what}: the two closed forms differ by {diff:e} (term scale {scale:e})"
        )));
    }
    Ok(())
}

fn check_exact(what: &str, a: &BigRational, b: &BigRational) -> Result<()> {
    if a != b {
        return Err(Error::Inconsistent(format!("{what}: exact closed forms differ ({a} vs {b})")));
    }
    Ok(())
}

fn pole(what: &str) -> Error {
    Error::Pole(format!("{what}: a denominator vanishes at this parameter point"))
}

// ---------------------------------------------------------------------------
// Public coefficient routines.
// ---------------------------------------------------------------------------

/// A♭ₙ(λ,ε) and B♭ₙ(λ,ε).
///
/// A is evaluated by the binomial l-sum and by its partial-fraction expansion
/// in ε; B likewise by the double sum carrying the 1/(2ε) prefactor and by its
/// partial-fraction expansion. Both pairs must agree to [`DUAL_FORM_TOL`]
/// relative to the size of their terms. The binomial forms are returned,
/// except that B comes from the partial-fraction form when |ε| is below 1e-3,
/// where the 1/(2ε) form cancels catastrophically.
pub fn apery_ab_flat(n: u32, lambda: C64, eps: C64) -> Result<AperyCoefficients> {
    check_order(n)?;
    flat_guard(n, eps)?;
    for s in [lambda + eps, lambda - eps] {
        if distance_to_poles(s, 0) <= POLE_RADIUS {
            return Err(Error::Pole(format!("λ ± ε = {s} is a non-positive integer")));
        }
    }
    if n == 0 {
        return Ok(AperyCoefficients { a: C64::new(1.0, 0.0), b: C64::new(0.0, 0.0), n, family: AperyFamily::Flat });
    }
    let a1 = flat_a_binomial(n, &lambda, &eps, true).ok_or_else(|| pole("A♭"))?;
    let a2 = flat_a_residue(n, &lambda, &eps).ok_or_else(|| pole("A♭"))?;
    check_pair("A♭", &a1, &a2)?;
    let b_res = flat_b_residue(n, &lambda, &eps);
    let b_pf = if eps.norm() >= FLAT_B_SMALL_EPS { flat_b_partial_fraction(n, &lambda, &eps) } else { None };
    let b = match (b_pf, b_res) {
        (Some(pf), Some(res)) => {
            check_pair("B♭", &pf, &res)?;
            pf.value
        }
        (Some(pf), None) => pf.value,
        (None, Some(res)) => {
            if eps.norm() >= FLAT_B_SMALL_EPS {
                return Err(pole("B♭"));
            }
            // Only the residue form is usable here; cross-check it at a nearby
            // ε through the even symmetry B(ε) = B(−ε).
            if let (Some(p), Some(m)) =
                (flat_b_residue(n, &lambda, &C64::new(0.01, 0.0)), flat_b_residue(n, &lambda, &C64::new(-0.01, 0.0)))
            {
                check_pair("B♭ symmetry", &p, &m)?;
            }
            res.value
        }
        (None, None) => return Err(pole("B♭")),
    };
    Ok(AperyCoefficients { a: a1.value, b, n, family: AperyFamily::Flat })
}

/// Exact A♭ₙ and B♭ₙ for rational (λ, ε); the two forms must agree exactly.
///
/// At ε = 0 the 1/(2ε) form of B is undefined and only the partial-fraction
/// form is evaluated.
pub fn apery_ab_flat_exact(n: u32, lambda: &BigRational, eps: &BigRational) -> Result<AperyCoefficients<BigRational>> {
    check_order(n)?;
    flat_guard(n, eps.to_c64())?;
    if n == 0 {
        return Ok(AperyCoefficients { a: BigRational::one(), b: BigRational::zero(), n, family: AperyFamily::Flat });
    }
    let a1 = flat_a_binomial(n, lambda, eps, true).ok_or_else(|| pole("A♭"))?;
    let a2 = flat_a_residue(n, lambda, eps).ok_or_else(|| pole("A♭"))?;
    check_exact("A♭", &a1.value, &a2.value)?;
    let b_pf = flat_b_partial_fraction(n, lambda, eps);
    let b_res = flat_b_residue(n, lambda, eps);
    let b = match (b_pf, b_res) {
        (Some(pf), Some(res)) => {
            check_exact("B♭", &pf.value, &res.value)?;
            pf.value
        }
        (Some(pf), None) => pf.value,
        (None, Some(res)) => res.value,
        (None, None) => return Err(pole("B♭")),
    };
    Ok(AperyCoefficients { a: a1.value, b, n, family: AperyFamily::Flat })
}

/// Aᵟₙ(λ,ε) and Bᵟₙ(λ,ε).
///
/// A is evaluated as a Pochhammer ratio and as the even/odd product form; B by
/// the m-sum and by the l-sum case form for (δ, parity of n). Returns the
/// Pochhammer ratio and the m-sum.
pub fn apery_ab_delta(n: u32, delta: Delta, lambda: C64, eps: C64) -> Result<AperyCoefficients> {
    check_order(n)?;
    delta_guard(n, eps)?;
    let a1 = delta_a_ratio(n, &lambda, &eps).ok_or_else(|| pole("Aᵟ"))?;
    let a2 = delta_a_parity(n, &lambda, &eps).ok_or_else(|| pole("Aᵟ"))?;
    check_pair("Aᵟ", &a1, &a2)?;
    let b = if n == 0 {
        C64::new(0.0, 0.0)
    } else {
        let b1 = delta_b_msum(n, delta, &lambda, &eps).ok_or_else(|| pole("Bᵟ"))?;
        let b2 = delta_b_lsum(n, delta, &lambda, &eps).ok_or_else(|| pole("Bᵟ"))?;
        check_pair("Bᵟ", &b1, &b2)?;
        b1.value
    };
    Ok(AperyCoefficients { a: a1.value, b, n, family: AperyFamily::Delta(delta) })
}

/// Exact Aᵟₙ and Bᵟₙ for rational (λ, ε); the two forms must agree exactly.
pub fn apery_ab_delta_exact(
    n: u32,
    delta: Delta,
    lambda: &BigRational,
    eps: &BigRational,
) -> Result<AperyCoefficients<BigRational>> {
    check_order(n)?;
    delta_guard(n, eps.to_c64())?;
    let a1 = delta_a_ratio(n, lambda, eps).ok_or_else(|| pole("Aᵟ"))?;
    let a2 = delta_a_parity(n, lambda, eps).ok_or_else(|| pole("Aᵟ"))?;
    check_exact("Aᵟ", &a1.value, &a2.value)?;
    let b = if n == 0 {
        BigRational::zero()
    } else {
        let b1 = delta_b_msum(n, delta, lambda, eps).ok_or_else(|| pole("Bᵟ"))?;
        let b2 = delta_b_lsum(n, delta, lambda, eps).ok_or_else(|| pole("Bᵟ"))?;
        check_exact("Bᵟ", &b1.value, &b2.value)?;
        b1.value
    };
    Ok(AperyCoefficients { a: a1.value, b, n, family: AperyFamily::Delta(delta) })
}

// ---------------------------------------------------------------------------
// The integrals.
// ---------------------------------------------------------------------------

fn finish(mut v: SeriesValue, tol: f64) -> SeriesValue {
    v.converged = v.abs_error <= tol;
    v
}

/// Σₖ 1/((λ+ε+k)(λ−ε+k)), the zeta-type sum multiplying A♭ₙ.
pub fn flat_zeta_sum(lambda: C64, eps: C64) -> Result<SeriesValue> {
    RationalSeries::new(vec![(lambda + eps, -1), (lambda - eps, -1)]).sum()
}

/// Σₖ (1/(λ−ε+k+½) − δⁿ/(λ+ε+k+½)) δᵏ, the sum multiplying Aᵟₙ/2.
///
/// For δ = + the difference is summed as 2ε Σ 1/((λ−ε+k+½)(λ+ε+k+½)), which
/// stays accurate as ε → 0.
pub fn delta_zeta_sum(n: u32, delta: Delta, lambda: C64, eps: C64) -> Result<SeriesValue> {
    let lo = lambda - eps + 0.5;
    let hi = lambda + eps + 0.5;
    match delta {
        Delta::Plus => Ok(RationalSeries::new(vec![(lo, -1), (hi, -1)]).sum()?.scale(eps * 2.0)),
        Delta::Minus => {
            let s1 = RationalSeries::new(vec![(lo, -1)]).alternating(true).sum()?;
            let s2 = RationalSeries::new(vec![(hi, -1)]).alternating(true).sum()?;
            let sign = Delta::Minus.pow(n) as f64;
            Ok(s1.add(s2.scale(C64::new(-sign, 0.0))))
        }
    }
}

/// J♭ₙ(λ,ε) by the closed k-series or by 2-D quadrature of its defining integral.
pub fn j_flat(n: u32, lambda: C64, eps: C64, method: FlatMethod, tol: f64) -> Result<SeriesValue> {
    match method {
        FlatMethod::Series => {
            for s in [lambda + eps, lambda - eps] {
                if distance_to_poles(s, 0) <= POLE_RADIUS {
                    return Err(Error::Pole(format!("λ ± ε = {s} is a non-positive integer")));
                }
            }
            let mut factors: Vec<(C64, i32)> = (0..n).map(|i| (C64::new(1.0 + i as f64, 0.0), 1)).collect();
            for i in 0..=n {
                factors.push((lambda + eps + i as f64, -1));
                factors.push((lambda - eps + i as f64, -1));
            }
            let nf: f64 = (1..=n).map(|i| i as f64).product();
            let v = RationalSeries::new(factors).sum()?.scale(C64::new(nf, 0.0));
            Ok(finish(v, tol))
        }
        FlatMethod::Quadrature => {
            if lambda.re - eps.re.abs() <= 0.0 {
                return Err(Error::Domain(format!("flat integral needs Re λ − |Re ε| > 0, got λ = {lambda}, ε = {eps}")));
            }
            let (ep, em) = (lambda + eps - 1.0, lambda - eps - 1.0);
            let f = move |x: &[f64]| {
                let (u, v) = (x[0], x[1]);
                let w = ((1.0 - u) * (1.0 - v)).powi(n as i32) / (1.0 - u * v).powi(n as i32 + 1);
                C64::new(u, 0.0).powc(ep) * C64::new(v, 0.0).powc(em) * w
            };
            let v = integrate_tensor(f, 2, &QuadratureSpec::default_for_dim(2))?;
            Ok(finish(v, tol))
        }
    }
}

/// Jᵟₙ(λ,ε) by the closed k-series or by the recurrence in n.
pub fn j_delta(n: u32, delta: Delta, lambda: C64, eps: C64, method: DeltaMethod, tol: f64) -> Result<SeriesValue> {
    for s in [lambda + eps + 0.5, lambda - eps + 0.5] {
        if distance_to_poles(s, 0) <= POLE_RADIUS {
            return Err(Error::Pole(format!("λ ± ε = {} is a negative half-integer", s - 0.5)));
        }
    }
    let v = match method {
        DeltaMethod::Series => j_delta_series(n, delta, lambda, eps)?,
        DeltaMethod::Recurrence => j_delta_recurrence(n, delta, lambda, eps)?,
    };
    Ok(finish(v, tol))
}

/// ½ Σₖ tₖ (1/(λ−ε+k+½) + (−δ)ⁿ/(λ+ε+k+½)) δᵏ with tₖ = (a)ₖ/(a+n)ₖ₊₁, a = λ−(n−1)/2.
///
/// The leading terms are accumulated through the ratio tₖ₊₁/tₖ, which stays
/// finite when a is a non-positive integer; the remainder is the rational
/// series (a)ₙ Σ ∏ᵢ 1/(k+a+i) · (…), summed with its asymptotic tail.
fn j_delta_series(n: u32, delta: Delta, lambda: C64, eps: C64) -> Result<SeriesValue> {
    let a = lambda - (n as f64 - 1.0) / 2.0;
    let lo = lambda - eps + 0.5;
    let hi = lambda + eps + 0.5;
    let sign = (-delta.sign()).pow(n) as f64;
    let mut shifts: Vec<C64> = (0..=n).map(|i| a + i as f64).collect();
    shifts.push(lo);
    shifts.push(hi);
    let min_re = shifts.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let k0 = if min_re >= 1.0 { 0 } else { (1.0 - min_re).ceil() as u64 };

    let mut head = CompensatedSum::new();
    let mut abs_sum = 0.0;
    let mut t = C64::new(1.0, 0.0) / (a + n as f64);
    for k in 0..k0 {
        let kf = k as f64;
        let den_n = a + n as f64 + kf;
        if den_n.norm() <= POLE_RADIUS {
            return Err(Error::Pole(format!("series denominator vanishes at k = {k}")));
        }
        if k > 0 {
            t *= (a + kf - 1.0) / den_n;
        }
        let s = if delta == Delta::Minus && k % 2 == 1 { -0.5 } else { 0.5 };
        let term = t * (C64::new(1.0, 0.0) / (lo + kf) + sign / (hi + kf)) * s;
        abs_sum += term.norm();
        head.add(term);
    }

    let alt = delta == Delta::Minus;
    let mut base: Vec<(C64, i32)> = (0..=n).map(|i| (a + i as f64, -1)).collect();
    let poch_a = crate::specfun::pochhammer(a, n);
    let mut f1 = base.clone();
    f1.push((lo, -1));
    base.push((hi, -1));
    let s1 = RationalSeries::new(f1).alternating(alt).starting_at(k0).sum()?;
    let s2 = RationalSeries::new(base).alternating(alt).starting_at(k0).sum()?;
    let tail = s1.add(s2.scale(C64::new(sign, 0.0))).scale(poch_a * 0.5);
    let value = head.total() + tail.value;
    let abs_error = tail.abs_error + 8.0 * f64::EPSILON * abs_sum;
    Ok(SeriesValue::new(value, abs_error, k0 + tail.terms_used))
}

/// Two-step recurrence from the closed forms of J₀ᵟ and J₁ᵟ.
fn j_delta_recurrence(n: u32, delta: Delta, lambda: C64, eps: C64) -> Result<SeriesValue> {
    // Poles of the recurrence chain: ε = ±j/2 with j ≡ n (mod 2), 1 ≤ j ≤ n.
    let n_i = n as i64;
    guard_half_integers(eps, (1..=n_i).filter(|j| (n_i - j) % 2 == 0).flat_map(|j| [j, -j]))?;
    let lo = lambda - eps + 0.5;
    let hi = lambda + eps + 0.5;
    let alt = delta == Delta::Minus;
    let one = C64::new(1.0, 0.0);
    let mut cur = if n % 2 == 0 {
        RationalSeries::new(vec![(lo, -1), (hi, -1)]).alternating(alt).sum()?
    } else {
        let d = delta.sign() as f64;
        let sum = delta_zeta_sum(1, delta, lambda, eps)?;
        let pref = lambda / ((eps - 0.5) * (eps + 0.5) * 2.0);
        let constant = -(one / (eps - 0.5) + d / (eps + 0.5)) * 0.5;
        let mut v = sum.scale(pref);
        v.value += constant;
        v
    };
    let mut j = if n % 2 == 0 { 2 } else { 3 };
    while j <= n {
        let jf = j as f64;
        let h = (jf - 1.0) / 2.0;
        let den = (eps + jf / 2.0) * (eps - jf / 2.0);
        let factor = (lambda + h) * (lambda - h) / den;
        let correction = match (delta, j % 2) {
            (Delta::Plus, 0) => lambda / (den * (jf - 1.0)),
            (Delta::Plus, _) => eps / (den * jf),
            (Delta::Minus, _) => one / (den * 2.0),
        };
        cur = cur.scale(factor);
        cur.value -= correction;
        cur.abs_error += 4.0 * f64::EPSILON * (cur.value.norm() + correction.norm());
        j += 2;
    }
    Ok(cur)
}

// ---------------------------------------------------------------------------
// Classical Apéry numbers.
// ---------------------------------------------------------------------------

fn binom_big(n: u64, k: u64) -> BigInt {
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

/// Residue of n²Xₙ − (11n²−11n+3)Xₙ₋₁ − (n−1)²Xₙ₋₂ for n ≥ 2.
fn recurrence_residual(n: usize, x: &[BigRational]) -> BigRational {
    let nn = BigInt::from(n as u64);
    let n2 = BigRational::from_integer(&nn * &nn);
    let mid = BigRational::from_integer(BigInt::from(11u64) * &nn * &nn - BigInt::from(11u64) * &nn + BigInt::from(3u64));
    let nm1 = BigInt::from(n as u64 - 1);
    let last = BigRational::from_integer(&nm1 * &nm1);
    n2 * &x[n] - mid * &x[n - 1] - last * &x[n - 2]
}

/// Aₙ = Σₖ C(n,k)²C(n+k,k) and the companion rationals Bₙ for n ≤ `n_max`.
///
/// Both sequences are computed from their binomial sums and then checked
/// against the three-term recurrence in exact arithmetic.
pub fn apery_classic(n_max: usize) -> Result<ExactApery> {
    if n_max > MAX_CLASSIC_N {
        return Err(Error::Domain(format!("n_max = {n_max} exceeds {MAX_CLASSIC_N}")));
    }
    let mut a_list = Vec::with_capacity(n_max + 1);
    let mut b_list = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max as u64 {
        // 2 Σ_{m≤n} (−1)^{m−1}/m².
        let mut base = BigRational::zero();
        for m in 1..=n {
            let term = BigRational::new(BigInt::from(2), BigInt::from(m * m));
            base = if m % 2 == 1 { base + term } else { base - term };
        }
        let mut a = BigInt::zero();
        let mut b = BigRational::zero();
        let mut c = base;
        for k in 0..=n {
            if k >= 1 {
                // (−1)^{n+k−1} / (k² C(n,k) C(n+k,k)).
                let den = BigInt::from(k * k) * binom_big(n, k) * binom_big(n + k, k);
                let term = BigRational::new(BigInt::one(), den);
                c = if (n + k - 1) % 2 == 0 { c + term } else { c - term };
            }
            let cnk = binom_big(n, k);
            let w = &cnk * &cnk * binom_big(n + k, k);
            b += BigRational::from_integer(w.clone()) * &c;
            a += w;
        }
        a_list.push(a);
        b_list.push(b);
    }
    let a_rat: Vec<BigRational> = a_list.iter().cloned().map(BigRational::from_integer).collect();
    for n in 2..=n_max {
        if !recurrence_residual(n, &a_rat).is_zero() || !recurrence_residual(n, &b_list).is_zero() {
            return Err(Error::Inconsistent(format!("Apéry recurrence fails at n = {n}")));
        }
    }
    Ok(ExactApery { a_list, b_list })
}

/// ζ(2) as the exact rational value of its double-double approximation.
fn zeta2_rational() -> BigRational {
    let hi = BigRational::from_float(ZETA2_HI).unwrap_or_else(BigRational::zero);
    let lo = BigRational::from_float(ZETA2_LO).unwrap_or_else(BigRational::zero);
    hi + lo
}

/// |(−1)ⁿ J♭ₙ(n+1, 0) − (Aₙ ζ(2) − Bₙ)| with exact Aₙ, Bₙ.
///
/// The right-hand side is a cancellation between numbers of size Aₙ, so it is
/// formed exactly with a 32-digit rational stand-in for ζ(2) and rounded once.
pub fn beukers_residual(n: u32) -> Result<f64> {
    if n > MAX_BEUKERS_N {
        return Err(Error::Domain(format!("n = {n} exceeds {MAX_BEUKERS_N}")));
    }
    let classic = apery_classic(n as usize)?;
    let a = BigRational::from_integer(classic.a_list[n as usize].clone());
    let rhs = rational_to_f64(&(a * zeta2_rational() - &classic.b_list[n as usize]));
    let j = j_flat(n, C64::new(n as f64 + 1.0, 0.0), C64::new(0.0, 0.0), FlatMethod::Series, 1e-15)?;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok((j.value * sign - rhs).norm())
}

/// Residual of the partial-fraction decomposition of n!(x+1)ₙ/((λ+ε+x)ₙ₊₁(λ−ε+x)ₙ₊₁)
/// at the sample x, plus the difference of the two binomial sums Σ C(n,l)P±ₗ
/// (which must coincide).
pub fn partial_fraction_residual(n: u32, lambda: C64, eps: C64, x: C64) -> Result<f64> {
    check_order(n)?;
    if eps.norm() <= POLE_RADIUS {
        return Err(Error::Pole("the decomposition carries 1/(2ε)".into()));
    }
    let lhs_den = crate::specfun::pochhammer(lambda + eps + x, n + 1) * crate::specfun::pochhammer(lambda - eps + x, n + 1);
    if lhs_den.norm() <= POLE_RADIUS {
        return Err(Error::Pole(format!("x = {x} sits on a pole of the rational function")));
    }
    let nf: f64 = (1..=n).map(|i| i as f64).product();
    let lhs = crate::specfun::pochhammer(x + 1.0, n) * nf / lhs_den;
    let mut rhs = C64::new(0.0, 0.0);
    for l in 0..=n {
        let c = C64::new(crate::specfun::binomial(n as u64, l as u64), 0.0);
        let pp = flat_p_plus(n, l, &lambda, &eps).ok_or_else(|| pole("partial fractions"))?;
        let pm = flat_p_minus(n, l, &lambda, &eps).ok_or_else(|| pole("partial fractions"))?;
        rhs += c * (-pp / (lambda + eps + x + l as f64) + pm / (lambda - eps + x + l as f64));
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    rhs *= sign / (eps * 2.0);
    let plus = flat_a_binomial(n, &lambda, &eps, true).ok_or_else(|| pole("partial fractions"))?;
    let minus = flat_a_binomial(n, &lambda, &eps, false).ok_or_else(|| pole("partial fractions"))?;
    Ok((lhs - rhs).norm() + (plus.value - minus.value).norm())
}
