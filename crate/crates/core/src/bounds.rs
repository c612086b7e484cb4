//! Closed-form measurement-count and coherence bounds.
//!
//! All logarithms are natural. Universal constants that are not known
//! explicitly are passed in as `c` and are meant for relative comparisons.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `1 / ln 9`.
pub fn c1() -> f64 {
    1.0 / 9f64.ln()
}

pub const C2: f64 = 32.0;

/// `ln(3/2) / ln 9`.
pub fn c3() -> f64 {
    1.5f64.ln() / 9f64.ln()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("negative input {0}")]
    NegativeInput(f64),
}

fn param(ok: bool, msg: impl FnOnce() -> String) -> Result<(), BoundsError> {
    if ok {
        Ok(())
    } else {
        Err(BoundsError::InvalidParam(msg()))
    }
}

fn open_unit(name: &str, v: f64) -> Result<(), BoundsError> {
    param(v > 0.0 && v < 1.0, || format!("{name} = {v} must lie in (0, 1)"))
}

fn positive(name: &str, v: f64) -> Result<(), BoundsError> {
    param(v > 0.0 && v.is_finite(), || format!("{name} = {v} must be positive"))
}

fn sparsity(s: usize, n: usize) -> Result<(), BoundsError> {
    param(s >= 1 && s <= n, || format!("sparsity {s} must lie in 1..={n}"))
}

fn lambda_range(lambda: f64) -> Result<(), BoundsError> {
    param((0.0..=1.0).contains(&lambda), || format!("lambda = {lambda} must lie in [0, 1]"))
}

/// Necessary number of measurements, with a flag telling whether `4s <= N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NecessaryBound {
    pub value: f64,
    pub in_regime: bool,
}

/// Scalar measurements needed by any method recovering every `4s`-sparse
/// vector: `c1 s ln(N/(32 s)) + c3 s k`, the log term clamped at zero.
pub fn necessary_scalar_measurements(s: usize, n: usize, k: usize) -> Result<NecessaryBound, BoundsError> {
    param(s >= 1 && k >= 1 && n >= 1, || format!("s = {s}, N = {n}, k = {k} must be positive"))?;
    let (s_f, n_f) = (s as f64, n as f64);
    let log = (n_f / (C2 * s_f)).ln().max(0.0);
    Ok(NecessaryBound { value: c1() * s_f * log + c3() * s_f * k as f64, in_regime: 4 * s <= n })
}

/// Vector measurements of dimension `d` implied by the scalar bound with `m' = m d`.
pub fn necessary_vector_measurements(s: usize, n: usize, k: usize, d: usize) -> Result<NecessaryBound, BoundsError> {
    if d == 0 {
        return Err(BoundsError::InvalidDims("d must be positive".into()));
    }
    let b = necessary_scalar_measurements(s, n, k)?;
    Ok(NecessaryBound { value: b.value / d as f64, ..b })
}

/// `C alpha^4 theta^-2 max(s ln(eN/s) + s k, ln(1/eps))`.
pub fn sufficient_scalar_measurements(
    s: usize,
    n: usize,
    k: usize,
    alpha: f64,
    theta: f64,
    epsilon: f64,
    c: f64,
) -> Result<f64, BoundsError> {
    sparsity(s, n)?;
    open_unit("theta", theta)?;
    open_unit("epsilon", epsilon)?;
    positive("alpha", alpha)?;
    positive("C", c)?;
    let s_f = s as f64;
    let first = s_f * (std::f64::consts::E * n as f64 / s_f).ln() + s_f * k as f64;
    Ok(c * alpha.powi(4) / (theta * theta) * first.max((1.0 / epsilon).ln()))
}

/// `C alpha^4 max(((ln s)^2 + lambda s)(k + ln N), ln(1/eps))`.
pub fn sufficient_uniform_vector(
    s: usize,
    n: usize,
    k: usize,
    lambda: f64,
    alpha: f64,
    epsilon: f64,
    c: f64,
) -> Result<f64, BoundsError> {
    sparsity(s, n)?;
    lambda_range(lambda)?;
    open_unit("epsilon", epsilon)?;
    positive("alpha", alpha)?;
    positive("C", c)?;
    let s_f = s as f64;
    let first = (s_f.ln().powi(2) + lambda * s_f) * (k as f64 + (n as f64).ln());
    Ok(c * alpha.powi(4) * first.max((1.0 / epsilon).ln()))
}

/// `C (1 + lambda s) ln(N s k)^beta ln(1/eps)`; `beta` is 1 for Bernoulli and
/// 2 for Gaussian ensembles.
pub fn sufficient_nonuniform_vector(
    s: usize,
    n: usize,
    k: usize,
    lambda: f64,
    epsilon: f64,
    beta: u32,
    c: f64,
) -> Result<f64, BoundsError> {
    sparsity(s, n)?;
    lambda_range(lambda)?;
    open_unit("epsilon", epsilon)?;
    positive("C", c)?;
    param(beta == 1 || beta == 2, || format!("beta = {beta} must be 1 or 2"))?;
    let log = ((n * s * k) as f64).ln();
    Ok(c * (1.0 + lambda * s as f64) * log.powi(beta as i32) * (1.0 / epsilon).ln())
}

/// Smallest coherence any `N` subspaces of dimension `k` in `R^d` can have:
/// `sqrt(max(0, (kN - d) / (dN - d)))`.
pub fn lambda_lower_bound(d: usize, k: usize, n: usize) -> Result<f64, BoundsError> {
    if n < 2 || k == 0 || k > d {
        return Err(BoundsError::InvalidDims(format!("need N >= 2 and 1 <= k <= d, got d={d}, k={k}, N={n}")));
    }
    let (d, k, n) = (d as f64, k as f64, n as f64);
    Ok(((k * n - d) / (d * n - d)).max(0.0).sqrt())
}

/// Maximum number of equi-isoclinic `k`-dimensional subspaces of `R^d`:
/// `d(d+1)/2 - k(k+1)/2 + 1`.
pub fn equiisoclinic_cap(d: usize, k: usize) -> Result<u64, BoundsError> {
    if k == 0 || k > d {
        return Err(BoundsError::InvalidDims(format!("need 1 <= k <= d, got d={d}, k={k}")));
    }
    let (d, k) = (d as u64, k as u64);
    Ok(d * (d + 1) / 2 - k * (k + 1) / 2 + 1)
}

/// Sparsity below which fusion coherence `mu_f` guarantees exact recovery:
/// `(1 + 1/mu_f) / 2`, infinite for `mu_f = 0`.
pub fn mu_f_sparsity_cap(mu_f: f64) -> Result<f64, BoundsError> {
    if mu_f.is_nan() || mu_f < 0.0 {
        return Err(BoundsError::NegativeInput(mu_f));
    }
    if mu_f == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 + 1.0 / mu_f) / 2.0)
}

/// Inputs for [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub s: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub d: usize,
    /// Coherence; `None` uses [`lambda_lower_bound`].
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "one")]
    pub alpha: f64,
    /// Target isometry constant for the scalar bound.
    #[serde(default = "half")]
    pub delta: f64,
    #[serde(default = "hundredth")]
    pub epsilon: f64,
    #[serde(default = "two")]
    pub beta: u32,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub mu_f: f64,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn hundredth() -> f64 {
    0.01
}
fn two() -> u32 {
    2
}

impl BoundParams {
    pub fn new(s: usize, n: usize, k: usize, d: usize) -> Self {
        BoundParams { s, n, k, d, lambda: None, alpha: 1.0, delta: 0.5, epsilon: 0.01, beta: 2, c: 1.0, mu_f: 0.0 }
    }
}

/// Parameters echoed in a report, with `lambda` resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub s: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub beta: u32,
    pub c: f64,
    pub mu_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub necessary_scalar: f64,
    /// Whether `4s <= N`, the regime the necessary bound is stated for.
    pub necessary_in_regime: bool,
    pub necessary_vector: f64,
    pub sufficient_scalar: f64,
    pub sufficient_uniform_vector: f64,
    pub sufficient_nonuniform_vector: f64,
    pub lambda_floor: f64,
    pub equiisoclinic_cap: u64,
    /// `null` in JSON when unbounded.
    #[serde(with = "infinite_as_null")]
    pub mu_f_sparsity_cap: f64,
    pub parameters: ResolvedParams,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Evaluate every bound at one parameter point.
pub fn evaluate(p: &BoundParams) -> Result<BoundReport, BoundsError> {
    let lambda_floor = lambda_lower_bound(p.d, p.k, p.n)?;
    let lambda = p.lambda.unwrap_or(lambda_floor);
    let nec = necessary_scalar_measurements(p.s, p.n, p.k)?;
    Ok(BoundReport {
        necessary_scalar: nec.value,
        necessary_in_regime: nec.in_regime,
        necessary_vector: necessary_vector_measurements(p.s, p.n, p.k, p.d)?.value,
        sufficient_scalar: sufficient_scalar_measurements(p.s, p.n, p.k, p.alpha, p.delta, p.epsilon, p.c)?,
        sufficient_uniform_vector: sufficient_uniform_vector(p.s, p.n, p.k, lambda, p.alpha, p.epsilon, p.c)?,
        sufficient_nonuniform_vector: sufficient_nonuniform_vector(p.s, p.n, p.k, lambda, p.epsilon, p.beta, p.c)?,
        lambda_floor,
        equiisoclinic_cap: equiisoclinic_cap(p.d, p.k)?,
        mu_f_sparsity_cap: mu_f_sparsity_cap(p.mu_f)?,
        parameters: ResolvedParams {
            s: p.s,
            n: p.n,
            k: p.k,
            d: p.d,
            lambda,
            alpha: p.alpha,
            delta: p.delta,
            epsilon: p.epsilon,
            beta: p.beta,
            c: p.c,
            mu_f: p.mu_f,
        },
    })
}
