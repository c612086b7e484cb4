//! Restricted isometry constants on block-sparse signals.
//!
//! For a support `S` with restricted matrix `M_S`, the constant attached to
//! the support is `delta_S = max(sigma_max^2 - 1, 1 - sigma_min^2)`; the
//! restricted isometry constant at level `s` is the maximum over all
//! supports of size `s`.
//!
//! * [`exact_frip`]: fusion constant of `A (x) I_d` on `H_s`, from the Gram
//!   blocks `scale^2 <a_j, a_l> U_j^T U_l` (no `dm`-sized matrix is formed);
//! * [`scalar_rip_on_h`]: constant of a dense `Phi` on `H_s`, via SVD of
//!   `Phi blockdiag(U_j)`;
//! * [`classical_rip`]: constant of `A` itself on `s`-sparse vectors of `R^N`.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::SubspaceCollection;
use crate::linalg::symmetric_extreme_eigenvalues;
use crate::measurement::Normalization;
use crate::seed;
use crate::solver::binomial;

/// Largest number of supports enumerated by the exact routines.
pub const MAX_SUPPORTS: f64 = 1e6;
/// Largest restricted width `s k` handled by the exact routines.
pub const MAX_WIDTH: usize = 200;
/// Restricted widths up to this use an SVD of `M_S`; wider ones the Gram eigenvalues.
pub const SVD_WIDTH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RipError {
    #[error("enumeration too large: {supports} supports of width {width}")]
    TooLarge { supports: f64, width: usize },
    #[error("sparsity {s} invalid for {n} blocks")]
    InvalidSparsity { s: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("a Monte Carlo estimate is only a lower bound and cannot certify recovery")]
    ModeError,
    #[error("number of trials must be positive")]
    NoTrials,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RipMode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    pub s: usize,
    pub value: f64,
    pub mode: RipMode,
    pub supports_evaluated: u64,
    pub worst_support: Vec<usize>,
}

fn delta_from_eigs(lo: f64, hi: f64) -> f64 {
    (hi - 1.0).max(1.0 - lo)
}

fn delta_from_singular_values(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let hi = sv.iter().copied().fold(0.0, f64::max);
    // a wide M_S has a nontrivial kernel on the support
    let lo = if m.nrows() < m.ncols() { 0.0 } else { sv.iter().copied().fold(f64::INFINITY, f64::min) };
    delta_from_eigs(lo * lo, hi * hi)
}

/// `delta_S` from the principal submatrix of a Gram matrix on the given
/// coefficient index ranges.
fn gram_delta(gram: &DMatrix<f64>, offsets: &[usize], support: &[usize]) -> f64 {
    let idx: Vec<usize> = support.iter().flat_map(|&j| offsets[j]..offsets[j + 1]).collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| gram[(idx[r], idx[c])]);
    let (lo, hi) = symmetric_extreme_eigenvalues(&sub);
    delta_from_eigs(lo, hi)
}

/// Lexicographic combination of a given rank.
fn unrank(n: usize, s: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(s);
    let mut next = 0;
    for i in 0..s {
        let mut j = next;
        loop {
            let count = binomial(n - j - 1, s - i - 1) as u64;
            if rank < count {
                break;
            }
            rank -= count;
            j += 1;
        }
        out.push(j);
        next = j + 1;
    }
    out
}

fn advance(idx: &mut [usize], n: usize) -> bool {
    let s = idx.len();
    let mut i = s;
    while i > 0 && idx[i - 1] == n - s + i - 1 {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    idx[i - 1] += 1;
    for j in i..s {
        idx[j] = idx[j - 1] + 1;
    }
    true
}

/// Max of `f` over all `s`-subsets of `0..n`; ties keep the
/// lexicographically first support.
fn max_over_supports<F>(n: usize, s: usize, f: F) -> (f64, Vec<usize>, u64)
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    const CHUNK: u64 = 256;
    let total = binomial(n, s) as u64;
    let chunks = total.div_ceil(CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let start = ci * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut idx = unrank(n, s, start);
            let mut best = (f64::NEG_INFINITY, start);
            let mut best_support = idx.clone();
            for rank in start..end {
                let v = f(&idx);
                if v > best.0 {
                    best = (v, rank);
                    best_support.clone_from(&idx);
                }
                if rank + 1 < end {
                    advance(&mut idx, n);
                }
            }
            (best.0, best.1, best_support)
        })
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX, Vec::new()),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    (best.0, best.2, total)
}

fn check_sparsity(s: usize, n: usize) -> Result<(), RipError> {
    if s == 0 || s > n {
        return Err(RipError::InvalidSparsity { s, n });
    }
    Ok(())
}

fn check_guards(n: usize, s: usize, width: usize) -> Result<(), RipError> {
    let supports = binomial(n, s);
    if supports > MAX_SUPPORTS || width > MAX_WIDTH {
        return Err(RipError::TooLarge { supports, width });
    }
    Ok(())
}

fn max_block_width(collection: &SubspaceCollection, s: usize) -> usize {
    let mut dims: Vec<usize> = (0..collection.len()).map(|j| collection.subspace_dim(j)).collect();
    dims.sort_unstable_by(|a, b| b.cmp(a));
    dims.iter().take(s).sum()
}

/// Gram matrix of `scale * (A (x) I_d)` restricted to `H`, in coefficient
/// coordinates: block `(j, l)` is `scale^2 <a_j, a_l> U_j^T U_l`.
pub fn fusion_gram(a: &DMatrix<f64>, collection: &SubspaceCollection, scale: f64) -> Result<DMatrix<f64>, RipError> {
    if a.ncols() != collection.len() {
        return Err(RipError::DimMismatch { expected: collection.len(), found: a.ncols() });
    }
    let col_gram = a.tr_mul(a) * (scale * scale);
    let off = collection.offsets();
    let dim = collection.coeff_dim();
    let mut g = DMatrix::zeros(dim, dim);
    for j in 0..collection.len() {
        for l in j..collection.len() {
            let block = collection.basis(j).tr_mul(collection.basis(l)) * col_gram[(j, l)];
            g.view_mut((off[j], off[l]), block.shape()).copy_from(&block);
            if l != j {
                g.view_mut((off[l], off[j]), (block.ncols(), block.nrows())).copy_from(&block.transpose());
            }
        }
    }
    Ok(g)
}

/// Fusion restricted isometry constant `delta_s` of `A`, by enumeration.
pub fn exact_frip(
    a: &DMatrix<f64>,
    collection: &SubspaceCollection,
    s: usize,
    normalization: Normalization,
) -> Result<RipEstimate, RipError> {
    let n = collection.len();
    check_sparsity(s, n)?;
    check_guards(n, s, max_block_width(collection, s))?;
    let g = fusion_gram(a, collection, normalization.scale(a.nrows()))?;
    let off = collection.offsets();
    let (value, worst_support, count) = max_over_supports(n, s, |sup| gram_delta(&g, off, sup));
    Ok(RipEstimate { s, value, mode: RipMode::Exact, supports_evaluated: count, worst_support })
}

/// Monte Carlo lower bound on `delta_s`: the maximum of `delta_S` over
/// `trials` supports drawn uniformly with replacement.
pub fn mc_frip(
    a: &DMatrix<f64>,
    collection: &SubspaceCollection,
    s: usize,
    trials: usize,
    seed: u64,
    normalization: Normalization,
) -> Result<RipEstimate, RipError> {
    let n = collection.len();
    check_sparsity(s, n)?;
    if trials == 0 {
        return Err(RipError::NoTrials);
    }
    let mut rng = seed::rng(seed);
    let supports: Vec<Vec<usize>> = (0..trials)
        .map(|_| {
            let mut v = index::sample(&mut rng, n, s).into_vec();
            v.sort_unstable();
            v
        })
        .collect();
    let g = fusion_gram(a, collection, normalization.scale(a.nrows()))?;
    let off = collection.offsets();
    let values: Vec<f64> = supports.par_iter().map(|sup| gram_delta(&g, off, sup)).collect();
    let (mut value, mut worst) = (f64::NEG_INFINITY, 0);
    for (i, &v) in values.iter().enumerate() {
        if v > value {
            value = v;
            worst = i;
        }
    }
    Ok(RipEstimate {
        s,
        value,
        mode: RipMode::MonteCarlo,
        supports_evaluated: trials as u64,
        worst_support: supports[worst].clone(),
    })
}

/// Restricted isometry constant `theta_s` of a dense `Phi` (scale already
/// applied) on `s`-sparse signals of `H`.
pub fn scalar_rip_on_h(phi: &DMatrix<f64>, collection: &SubspaceCollection, s: usize) -> Result<RipEstimate, RipError> {
    let n = collection.len();
    let d = collection.ambient_dim();
    if phi.ncols() != d * n {
        return Err(RipError::DimMismatch { expected: d * n, found: phi.ncols() });
    }
    check_sparsity(s, n)?;
    let width = max_block_width(collection, s);
    check_guards(n, s, width)?;
    // Phi_j U_j for each block
    let blocks: Vec<DMatrix<f64>> =
        collection.bases().iter().enumerate().map(|(j, u)| phi.columns(j * d, d) * u).collect();
    let assemble = |sup: &[usize]| {
        let w: usize = sup.iter().map(|&j| blocks[j].ncols()).sum();
        let mut m = DMatrix::zeros(phi.nrows(), w);
        let mut col = 0;
        for &j in sup {
            m.columns_mut(col, blocks[j].ncols()).copy_from(&blocks[j]);
            col += blocks[j].ncols();
        }
        m
    };
    let (value, worst_support, count) = if width <= SVD_WIDTH {
        max_over_supports(n, s, |sup| delta_from_singular_values(&assemble(sup)))
    } else {
        max_over_supports(n, s, |sup| {
            let m = assemble(sup);
            let (lo, hi) = symmetric_extreme_eigenvalues(&m.tr_mul(&m));
            delta_from_eigs(lo, hi)
        })
    };
    Ok(RipEstimate { s, value, mode: RipMode::Exact, supports_evaluated: count, worst_support })
}

/// Classical restricted isometry constant of `scale * A` on `R^N`.
pub fn classical_rip(a: &DMatrix<f64>, s: usize, normalization: Normalization) -> Result<RipEstimate, RipError> {
    let n = a.ncols();
    check_sparsity(s, n)?;
    check_guards(n, s, s)?;
    let scale = normalization.scale(a.nrows());
    let g = a.tr_mul(a) * (scale * scale);
    let off: Vec<usize> = (0..=n).collect();
    let (value, worst_support, count) = max_over_supports(n, s, |sup| gram_delta(&g, &off, sup));
    Ok(RipEstimate { s, value, mode: RipMode::Exact, supports_evaluated: count, worst_support })
}

/// `sqrt 2 - 1`, the level-`2s` threshold that guarantees robust recovery.
pub const RECOVERY_THRESHOLD: f64 = SQRT_2 - 1.0;

/// Whether an exact constant at level `2s` certifies `s`-sparse recovery.
pub fn recovery_sufficient(rip: &RipEstimate) -> Result<bool, RipError> {
    match rip.mode {
        RipMode::Exact => Ok(rip.value < RECOVERY_THRESHOLD),
        RipMode::MonteCarlo => Err(RipError::ModeError),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{orthogonal_collection, random_collection};
    use crate::measurement::{sample_ensemble, Distribution, EnsembleSpec, MeasurementOperator};

    fn gaussian(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        sample_ensemble(&EnsembleSpec { distribution: Distribution::Gaussian, rows: m, cols: n, seed }).unwrap()
    }

    fn estimate(value: f64, mode: RipMode) -> RipEstimate {
        RipEstimate { s: 2, value, mode, supports_evaluated: 1, worst_support: vec![0, 1] }
    }

    #[test]
    fn unrank_matches_enumeration() {
        let mut idx = vec![0, 1, 2];
        let mut rank = 0;
        loop {
            assert_eq!(unrank(6, 3, rank), idx);
            rank += 1;
            if !advance(&mut idx, 6) {
                break;
            }
        }
        assert_eq!(rank, 20);
    }

    #[test]
    fn scaled_identity_is_an_isometry() {
        let m = 5;
        let a = DMatrix::identity(m, m) * (m as f64).sqrt();
        let c = random_collection(4, 2, m, 9).unwrap();
        for s in 1..=m {
            let est = exact_frip(&a, &c, s, Normalization::InvSqrtRows).unwrap();
            assert!(est.value.abs() < 1e-12);
            assert_eq!(est.supports_evaluated, binomial(m, s) as u64);
        }
    }

    #[test]
    fn level_one_is_column_norm_deviation() {
        let a = gaussian(6, 5, 1);
        let c = random_collection(5, 2, 5, 2).unwrap();
        let est = exact_frip(&a, &c, 1, Normalization::InvSqrtRows).unwrap();
        let direct = (0..5).map(|j| (a.column(j).norm_squared() / 6.0 - 1.0).abs()).fold(0.0, f64::max);
        assert!((est.value - direct).abs() < 1e-12);
        let cl = classical_rip(&a, 1, Normalization::InvSqrtRows).unwrap();
        assert!((cl.value - direct).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_columns_have_zero_classical_constant() {
        let m = 4;
        let a = DMatrix::identity(m, 3) * 2.0;
        assert!(classical_rip(&a, 2, Normalization::InvSqrtRows).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn identity_phi_has_zero_constant() {
        let c = random_collection(3, 2, 4, 5).unwrap();
        let est = scalar_rip_on_h(&DMatrix::identity(12, 12), &c, 2).unwrap();
        assert!(est.value.abs() < 1e-12);
    }

    #[test]
    fn kronecker_identity_small() {
        let a = gaussian(3, 5, 4);
        let c = random_collection(4, 2, 5, 6).unwrap();
        let phi = MeasurementOperator::vector(a.clone(), 4, Normalization::InvSqrtRows).materialize();
        for s in 1..=3 {
            let f = exact_frip(&a, &c, s, Normalization::InvSqrtRows).unwrap();
            let g = scalar_rip_on_h(&phi, &c, s).unwrap();
            assert!((f.value - g.value).abs() < 1e-12, "s={s}: {} vs {}", f.value, g.value);
        }
    }

    #[test]
    fn doubling_phi_quadruples_upper_side() {
        let c = random_collection(3, 1, 4, 2).unwrap();
        let phi = gaussian(6, 12, 8) / 6f64.sqrt();
        let base = scalar_rip_on_h(&phi, &c, 2).unwrap();
        let doubled = scalar_rip_on_h(&(&phi * 2.0), &c, 2).unwrap();
        // doubling pushes sigma_max^2 above 1, so the upper side dominates
        let blocks: Vec<_> = (0..4).map(|j| phi.columns(j * 3, 3) * c.basis(j)).collect();
        let mut upper = 0.0f64;
        for i in 0..4 {
            for j in i + 1..4 {
                let mut m = DMatrix::zeros(6, 2);
                m.set_column(0, &blocks[i].column(0));
                m.set_column(1, &blocks[j].column(0));
                let smax = m.singular_values().max();
                upper = upper.max(smax * smax);
            }
        }
        assert!((1.0 + doubled.value - 4.0 * upper).abs() < 1e-10);
        assert!(base.value >= 0.0);
    }

    #[test]
    fn monte_carlo_is_bounded_by_exact() {
        let a = gaussian(4, 6, 3);
        let c = random_collection(4, 2, 6, 3).unwrap();
        let exact = exact_frip(&a, &c, 2, Normalization::InvSqrtRows).unwrap();
        let mc = mc_frip(&a, &c, 2, 5, 1, Normalization::InvSqrtRows).unwrap();
        assert!(mc.value <= exact.value + 1e-15);
        assert_eq!(mc.mode, RipMode::MonteCarlo);
        let full = mc_frip(&a, &c, 6, 1, 1, Normalization::InvSqrtRows).unwrap();
        let full_exact = exact_frip(&a, &c, 6, Normalization::InvSqrtRows).unwrap();
        assert!((full.value - full_exact.value).abs() < 1e-12);
        assert_eq!(mc_frip(&a, &c, 2, 0, 1, Normalization::None), Err(RipError::NoTrials));
    }

    #[test]
    fn guards() {
        let c = orthogonal_collection(40, 1, 40).unwrap();
        let a = gaussian(2, 40, 1);
        assert!(matches!(exact_frip(&a, &c, 10, Normalization::None), Err(RipError::TooLarge { .. })));
        assert!(matches!(exact_frip(&a, &c, 0, Normalization::None), Err(RipError::InvalidSparsity { .. })));
        let wide = random_collection(60, 50, 5, 1).unwrap();
        assert!(matches!(
            exact_frip(&gaussian(2, 5, 1), &wide, 5, Normalization::None),
            Err(RipError::TooLarge { width: 250, .. })
        ));
    }

    #[test]
    fn sufficiency_predicate() {
        assert_eq!(recovery_sufficient(&estimate(0.0, RipMode::Exact)), Ok(true));
        assert_eq!(recovery_sufficient(&estimate(0.5, RipMode::Exact)), Ok(false));
        assert_eq!(recovery_sufficient(&estimate(0.41, RipMode::Exact)), Ok(true));
        assert_eq!(recovery_sufficient(&estimate(RECOVERY_THRESHOLD, RipMode::Exact)), Ok(false));
        assert_eq!(recovery_sufficient(&estimate(0.1, RipMode::MonteCarlo)), Err(RipError::ModeError));
    }
}
