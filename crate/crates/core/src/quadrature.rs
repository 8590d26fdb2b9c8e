//! Deterministic tensor-product quadrature and Monte Carlo integration over
//! the open cube (0,1)^d.
//!
//! The tanh–sinh rule clusters nodes double-exponentially at both endpoints
//! without touching them, which suits integrands with algebraic endpoint
//! singularities. Nodes carry both `x` and `1 − x`, each computed without
//! cancellation, so integrands that are singular at `u → 1` can be evaluated
//! from the complement directly.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::specfun::{pairwise_sum, SeriesValue, C64};

/// Largest total node count accepted by [`integrate_tensor`].
pub const MAX_TENSOR_NODES: f64 = 1e8;

/// Name of the pseudo-random generator, recorded in output metadata.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha), one stream per 65536-sample block";

/// Samples per independent RNG stream in [`integrate_monte_carlo`].
const MC_BLOCK: u64 = 1 << 16;

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Tensor-product Gauss–Legendre rule with `points_per_axis` nodes.
    GaussLegendre,
    /// Tensor-product tanh–sinh rule at refinement `level` (step 2^{-level}).
    TanhSinh,
    /// Plain Monte Carlo with `samples` points drawn from a seeded generator.
    MonteCarlo,
}

/// Parameters of an integration run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureSpec {
    /// Integration scheme.
    pub scheme: Scheme,
    /// Nodes per axis for Gauss–Legendre.
    pub points_per_axis: usize,
    /// Refinement level for tanh–sinh (step h = 2^{-level}).
    pub level: u32,
    /// Number of Monte Carlo samples.
    pub samples: u64,
    /// Seed of the Monte Carlo generator.
    pub rng_seed: u64,
}

impl QuadratureSpec {
    /// Gauss–Legendre with `p` nodes per axis.
    pub fn gauss_legendre(p: usize) -> Self {
        QuadratureSpec { scheme: Scheme::GaussLegendre, points_per_axis: p, level: 0, samples: 0, rng_seed: 0 }
    }

    /// tanh–sinh at the given level.
    pub fn tanh_sinh(level: u32) -> Self {
        QuadratureSpec { scheme: Scheme::TanhSinh, points_per_axis: 0, level, samples: 0, rng_seed: 0 }
    }

    /// Monte Carlo with `samples` points and the given seed.
    pub fn monte_carlo(samples: u64, seed: u64) -> Self {
        QuadratureSpec { scheme: Scheme::MonteCarlo, points_per_axis: 0, level: 0, samples, rng_seed: seed }
    }

    /// Default rule for a d-dimensional trace integral: tanh–sinh level 7 in
    /// two dimensions, level 4 in four, Monte Carlo with 10⁶ samples beyond.
    pub fn default_for_dim(d: usize) -> Self {
        match d {
            0..=2 => Self::tanh_sinh(7),
            3..=4 => Self::tanh_sinh(4),
            _ => Self::monte_carlo(1_000_000, 0x5eed),
        }
    }
}

/// One node of a 1-D rule on (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    /// Abscissa in (0,1).
    pub x: f64,
    /// Complement 1 − x, computed without cancellation.
    pub xc: f64,
    /// Weight at the finest level.
    pub w: f64,
    /// Whether the node also belongs to the next coarser level.
    pub coarse: bool,
}

/// Gauss–Legendre nodes and weights on [0,1], nodes ascending.
///
/// The p-point rule integrates polynomials of degree ≤ 2p − 1 exactly and its
/// weights sum to one.
pub fn gauss_legendre_nodes(p: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if p == 0 || p > 1024 {
        return Err(Error::Domain(format!("gauss_legendre_nodes requires 1 <= p <= 1024, got {p}")));
    }
    let mut nodes = vec![0.0; p];
    let mut weights = vec![0.0; p];
    let pf = p as f64;
    for i in 0..p.div_ceil(2) {
        // Root of P_p on [-1,1], largest first.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (pf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (pn, d) = legendre_and_derivative(p, z);
            dp = d;
            let dz = pn / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_and_derivative(p, z);
                dp = d;
                break;
            }
        }
        let w = 1.0 / ((1.0 - z * z) * dp * dp); // 2/(...) halved for [0,1]
        nodes[p - 1 - i] = 0.5 + 0.5 * z;
        nodes[i] = 0.5 - 0.5 * z;
        weights[i] = w;
        weights[p - 1 - i] = w;
    }
    if p % 2 == 1 {
        nodes[p / 2] = 0.5;
    }
    Ok((nodes, weights))
}

fn legendre_and_derivative(p: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=p {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if p == 0 {
        return (1.0, 0.0);
    }
    let d = p as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Tanh–sinh nodes on (0,1) at step h = 2^{-level}.
///
/// With the mapping x = (1 + tanh(π/2·sinh t))/2 the contribution of a node
/// to ∫ u^{a−1} du behaves like w·x^{a−1}. The lower tail is cut once that
/// estimate, with `a = lower_exponent`, drops below `cutoff`; the upper tail
/// likewise with `upper_exponent` applied to 1 − x. Nodes with x or 1 − x
/// below 1e-300 are never generated.
pub fn tanh_sinh_rule(level: u32, lower_exponent: f64, upper_exponent: f64, cutoff: f64) -> Vec<Node> {
    let h = 0.5f64.powi(level as i32);
    let mut out = Vec::new();
    let node_at = |k: i64| -> Node {
        let t = k as f64 * h;
        let s = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * s.abs()).exp();
        let (x, xc) = if s >= 0.0 { (1.0 / (1.0 + e), e / (1.0 + e)) } else { (e / (1.0 + e), 1.0 / (1.0 + e)) };
        let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
        let w = h * FRAC_PI_2 * t.cosh() * sech2 * 0.5;
        Node { x, xc, w, coarse: k % 2 == 0 }
    };
    let mut k = 0i64;
    loop {
        let nd = node_at(k);
        if nd.x < 1e-300 || nd.w * nd.x.powf(lower_exponent - 1.0) < cutoff {
            break;
        }
        out.push(nd);
        k -= 1;
    }
    out.reverse();
    let mut k = 1i64;
    loop {
        let nd = node_at(k);
        if nd.xc < 1e-300 || nd.w * nd.xc.powf(upper_exponent - 1.0) < cutoff {
            break;
        }
        out.push(nd);
        k += 1;
    }
    out
}

/// The tanh–sinh rule used by [`integrate_tensor`]: the lower tail reaches the
/// underflow limit and the upper tail stops once 1 − x would round to zero
/// in the abscissa.
fn generic_tanh_sinh(level: u32) -> Vec<Node> {
    tanh_sinh_rule(level, 1.0, 1.0, 0.0)
        .into_iter()
        .filter(|n| n.xc >= 4.0 * f64::EPSILON && n.x > 0.0)
        .collect()
}

/// Tensor-product integral of `f` over (0,1)^d.
///
/// `abs_error` compares the result with the next coarser rule: p/2 nodes for
/// Gauss–Legendre, level − 1 for tanh–sinh (whose nodes are the even-index
/// subset, so both sums come from a single pass).
pub fn integrate_tensor<F>(f: F, d: usize, spec: &QuadratureSpec) -> Result<SeriesValue>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    match spec.scheme {
        Scheme::MonteCarlo => integrate_monte_carlo(f, d, spec.samples, spec.rng_seed),
        Scheme::GaussLegendre => {
            if d > 4 {
                return Err(Error::Domain(format!("deterministic quadrature limited to d <= 4, got {d}")));
            }
            let p = spec.points_per_axis;
            check_node_count(p, d)?;
            let (x, w) = gauss_legendre_nodes(p)?;
            let nodes: Vec<Node> =
                x.iter().zip(&w).map(|(&x, &w)| Node { x, xc: 1.0 - x, w, coarse: false }).collect();
            let (fine, _) = tensor_sum(&f, d, &nodes)?;
            let abs_error = if p >= 2 {
                let (x2, w2) = gauss_legendre_nodes(p / 2)?;
                let nodes2: Vec<Node> =
                    x2.iter().zip(&w2).map(|(&x, &w)| Node { x, xc: 1.0 - x, w, coarse: false }).collect();
                let (coarse, _) = tensor_sum(&f, d, &nodes2)?;
                (fine - coarse).norm()
            } else {
                f64::INFINITY
            };
            Ok(SeriesValue { value: fine, abs_error, terms_used: (p as u64).pow(d as u32), converged: true })
        }
        Scheme::TanhSinh => {
            if d > 4 {
                return Err(Error::Domain(format!("deterministic quadrature limited to d <= 4, got {d}")));
            }
            if spec.level == 0 {
                return Err(Error::Domain("tanh-sinh level must be at least 1".into()));
            }
            let nodes = generic_tanh_sinh(spec.level);
            check_node_count(nodes.len(), d)?;
            let (fine, coarse) = tensor_sum(&f, d, &nodes)?;
            Ok(SeriesValue {
                value: fine,
                abs_error: (fine - coarse).norm(),
                terms_used: (nodes.len() as u64).pow(d as u32),
                converged: true,
            })
        }
    }
}

fn check_node_count(p: usize, d: usize) -> Result<()> {
    let total = (p as f64).powi(d as i32);
    if total > MAX_TENSOR_NODES {
        return Err(Error::Domain(format!("tensor rule with {total:e} nodes exceeds the cap {MAX_TENSOR_NODES:e}")));
    }
    Ok(())
}

/// Fine and coarse tensor sums over a 1-D rule; the outermost axis is
/// distributed over the thread pool and partial sums are combined pairwise in
/// index order, so the result does not depend on the number of threads.
fn tensor_sum<F>(f: &F, d: usize, nodes: &[Node]) -> Result<(C64, C64)>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    if d == 0 {
        let v = f(&[]);
        return Ok((v, v));
    }
    let partials: Vec<Result<(C64, C64)>> = (0..nodes.len())
        .into_par_iter()
        .map(|i0| {
            let mut idx = vec![0usize; d];
            idx[0] = i0;
            let mut u = vec![0.0; d];
            let mut fine = Vec::new();
            let mut coarse = Vec::new();
            let inner = nodes.len().pow(d as u32 - 1);
            for flat in 0..inner {
                let mut r = flat;
                for ax in (1..d).rev() {
                    idx[ax] = r % nodes.len();
                    r /= nodes.len();
                }
                let mut w = 1.0;
                let mut all_coarse = true;
                for ax in 0..d {
                    let nd = nodes[idx[ax]];
                    u[ax] = nd.x;
                    w *= nd.w;
                    all_coarse &= nd.coarse;
                }
                let v = f(&u);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NodeSingularity(u.clone()));
                }
                let t = v * w;
                fine.push(t);
                if all_coarse {
                    coarse.push(t * (1u64 << d) as f64);
                }
            }
            Ok((pairwise_sum(&fine), pairwise_sum(&coarse)))
        })
        .collect();
    let mut fine = Vec::with_capacity(partials.len());
    let mut coarse = Vec::with_capacity(partials.len());
    for p in partials {
        let (a, b) = p?;
        fine.push(a);
        coarse.push(b);
    }
    Ok((pairwise_sum(&fine), pairwise_sum(&coarse)))
}

/// Draws a point of the open cube; the 53 random mantissa bits are offset by
/// half an ulp so 0 and 1 are never produced.
fn open_unit(rng: &mut ChaCha20Rng) -> f64 {
    let bits = rng.random::<u64>() >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Monte Carlo integral of `f` over (0,1)^d.
///
/// Samples are grouped into blocks of 65536; block `b` uses ChaCha20 stream
/// `b` of the generator seeded with `seed`, and block sums are combined in
/// block order. The result is therefore reproducible for a fixed seed on any
/// number of threads. `abs_error` is the standard error of the mean.
pub fn integrate_monte_carlo<F>(f: F, d: usize, samples: u64, seed: u64) -> Result<SeriesValue>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    if samples == 0 {
        return Err(Error::Domain("Monte Carlo requires at least one sample".into()));
    }
    let blocks = samples.div_ceil(MC_BLOCK);
    let partial: Vec<Result<(C64, f64, f64)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut u = vec![0.0; d];
            let mut vals = Vec::with_capacity(count as usize);
            for _ in 0..count {
                for x in u.iter_mut() {
                    *x = open_unit(&mut rng);
                }
                let v = f(&u);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NodeSingularity(u.clone()));
                }
                vals.push(v);
            }
            let sum = pairwise_sum(&vals);
            let mean = sum / count as f64;
            let m2: f64 = vals.iter().map(|v| (v - mean).norm_sqr()).sum();
            Ok((sum, m2, count as f64))
        })
        .collect();
    // Chan et al. pairwise combination of (sum, M2, count) in block order.
    let mut sum = C64::new(0.0, 0.0);
    let mut m2 = 0.0;
    let mut count = 0.0;
    for p in partial {
        let (s_b, m2_b, n_b) = p?;
        if count > 0.0 {
            let delta = s_b / n_b - sum / count;
            m2 += m2_b + delta.norm_sqr() * count * n_b / (count + n_b);
        } else {
            m2 = m2_b;
        }
        sum += s_b;
        count += n_b;
    }
    let mean = sum / count;
    let var = if count > 1.0 { m2 / (count - 1.0) } else { 0.0 };
    let abs_error = (var / count).sqrt();
    Ok(SeriesValue { value: mean, abs_error, terms_used: samples, converged: true })
}
