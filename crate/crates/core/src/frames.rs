//! Collections of subspaces of `R^d` and their geometry.
//!
//! Each subspace `W_j` is stored as a `d x k_j` matrix `U_j` with orthonormal
//! columns. Projections `P_j = U_j U_j^T` are only materialized on request.
//! Since `||P_i P_j|| = sigma_max(U_i^T U_j)` for orthonormal bases, every
//! quantity here is computed from the small `k x k` cross-Gram matrices.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{
    orthonormality_error, singular_values_desc, spectral_norm, symmetric_extreme_eigenvalues, thin_qr_orthonormalize,
};
use crate::seed;

/// Tolerance on `max |U^T U - I|` for a stored basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("collection must contain at least one subspace")]
    Empty,
    #[error("basis {0} is rank deficient")]
    RankDeficient(usize),
    #[error("basis {index} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch { index: usize, expected: (usize, usize), found: (usize, usize) },
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("{n} subspaces of dimension {k} do not fit orthogonally in R^{d}")]
    TooManySubspaces { d: usize, k: usize, n: usize },
    #[error("angle {0} outside [0, pi/2]")]
    InvalidAngle(f64),
    #[error("coherence needs at least two subspaces")]
    SingleSubspace,
    #[error("subspace index {index} out of range for {n} subspaces")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("principal angles need two distinct indices, got {0} twice")]
    SameIndex(usize),
    #[error("weight {0} is not positive")]
    NonpositiveWeight(usize),
    #[error("expected {expected} weights, got {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("basis {index} is not orthonormal (error {error:e})")]
    NotOrthonormal { index: usize, error: f64 },
}

/// `N` subspaces of `R^d`, each given by an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceCollection {
    ambient_dim: usize,
    bases: Vec<DMatrix<f64>>,
    offsets: Vec<usize>,
    label: String,
}

impl SubspaceCollection {
    /// Orthonormalize `bases`, which must all share one `d x k` shape.
    pub fn build(bases: Vec<DMatrix<f64>>) -> Result<Self, FrameError> {
        let first = bases.first().ok_or(FrameError::Empty)?.shape();
        for (index, b) in bases.iter().enumerate() {
            if b.shape() != first {
                return Err(FrameError::ShapeMismatch { index, expected: first, found: b.shape() });
            }
        }
        Self::build_mixed(bases)
    }

    /// Like [`build`](Self::build) but allows subspaces of different
    /// dimensions `k_j <= d`; the block dimension is then `max_j k_j`.
    pub fn build_mixed(bases: Vec<DMatrix<f64>>) -> Result<Self, FrameError> {
        let d = bases.first().ok_or(FrameError::Empty)?.nrows();
        let mut out = Vec::with_capacity(bases.len());
        for (index, b) in bases.into_iter().enumerate() {
            if b.nrows() != d || b.ncols() == 0 || b.ncols() > d {
                return Err(FrameError::ShapeMismatch {
                    index,
                    expected: (d, b.ncols().clamp(1, d.max(1))),
                    found: b.shape(),
                });
            }
            out.push(thin_qr_orthonormalize(&b).map_err(|_| FrameError::RankDeficient(index))?);
        }
        Ok(Self::from_orthonormal(d, out))
    }

    /// Wrap bases that are already orthonormal, checking them to
    /// [`ORTHONORMAL_TOL`]. Used when reading stored collections.
    pub fn from_orthonormal_checked(ambient_dim: usize, bases: Vec<DMatrix<f64>>) -> Result<Self, FrameError> {
        if bases.is_empty() {
            return Err(FrameError::Empty);
        }
        for (index, b) in bases.iter().enumerate() {
            if b.nrows() != ambient_dim || b.ncols() == 0 || b.ncols() > ambient_dim {
                return Err(FrameError::ShapeMismatch { index, expected: (ambient_dim, b.ncols()), found: b.shape() });
            }
            let error = orthonormality_error(b);
            if error > ORTHONORMAL_TOL || !error.is_finite() {
                return Err(FrameError::NotOrthonormal { index, error });
            }
        }
        Ok(Self::from_orthonormal(ambient_dim, bases))
    }

    fn from_orthonormal(ambient_dim: usize, bases: Vec<DMatrix<f64>>) -> Self {
        let mut offsets = Vec::with_capacity(bases.len() + 1);
        offsets.push(0);
        for b in &bases {
            offsets.push(offsets.last().unwrap() + b.ncols());
        }
        SubspaceCollection { ambient_dim, bases, offsets, label: String::new() }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `d`.
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// `k = max_j dim W_j`.
    pub fn block_dim(&self) -> usize {
        self.bases.iter().map(|b| b.ncols()).max().unwrap_or(0)
    }

    pub fn subspace_dim(&self, j: usize) -> usize {
        self.bases[j].ncols()
    }

    /// `N`.
    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.bases.iter().all(|b| b.ncols() == self.bases[0].ncols())
    }

    pub fn basis(&self, j: usize) -> &DMatrix<f64> {
        &self.bases[j]
    }

    pub fn bases(&self) -> &[DMatrix<f64>] {
        &self.bases
    }

    /// Start of each coefficient block; `offsets[N]` is the coefficient dimension.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// `sum_j k_j`, the length of a coefficient vector.
    pub fn coeff_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// `P_j = U_j U_j^T`.
    pub fn projection(&self, j: usize) -> DMatrix<f64> {
        let u = &self.bases[j];
        u * u.transpose()
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<(), FrameError> {
        let n = self.len();
        for index in [i, j] {
            if index >= n {
                return Err(FrameError::IndexOutOfRange { index, n });
            }
        }
        if i == j {
            return Err(FrameError::SameIndex(i));
        }
        Ok(())
    }

    fn cross_gram(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.bases[i].transpose() * &self.bases[j]
    }

    /// `sigma_max(U_i^T U_j) = ||P_i P_j||`, clamped to `[0, 1]`.
    pub fn pair_coherence(&self, i: usize, j: usize) -> f64 {
        spectral_norm(&self.cross_gram(i, j)).clamp(0.0, 1.0)
    }
}

/// Build a collection from `d x k` bases (thin QR, nonnegative `R` diagonal).
pub fn build_collection(bases: Vec<DMatrix<f64>>) -> Result<SubspaceCollection, FrameError> {
    SubspaceCollection::build(bases)
}

/// `N` independent uniformly distributed `k`-dimensional subspaces.
pub fn random_collection(d: usize, k: usize, n: usize, seed: u64) -> Result<SubspaceCollection, FrameError> {
    if k == 0 || k > d || n == 0 {
        return Err(FrameError::InvalidDims(format!("need 1 <= k <= d and N >= 1, got d={d} k={k} N={n}")));
    }
    let mut rng = seed::rng(seed);
    let mut bases = Vec::with_capacity(n);
    for _ in 0..n {
        // a Gaussian matrix has full rank with probability one; redraw otherwise
        loop {
            let g = DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(&mut rng));
            if let Ok(q) = thin_qr_orthonormalize(&g) {
                bases.push(q);
                break;
            }
        }
    }
    Ok(SubspaceCollection::from_orthonormal(d, bases).with_label(format!("random(d={d},k={k},N={n},seed={seed})")))
}

/// `N` mutually orthogonal coordinate subspaces; `U_j` spans coordinates
/// `jk..(j+1)k`.
pub fn orthogonal_collection(d: usize, k: usize, n: usize) -> Result<SubspaceCollection, FrameError> {
    if k == 0 || k > d || n == 0 {
        return Err(FrameError::InvalidDims(format!("need 1 <= k <= d and N >= 1, got d={d} k={k} N={n}")));
    }
    if n * k > d {
        return Err(FrameError::TooManySubspaces { d, k, n });
    }
    let bases = (0..n).map(|j| DMatrix::from_fn(d, k, |r, c| if r == j * k + c { 1.0 } else { 0.0 })).collect();
    Ok(SubspaceCollection::from_orthonormal(d, bases).with_label(format!("orthogonal(d={d},k={k},N={n})")))
}

/// Subspaces sharing a common rotation towards a reference block.
///
/// Lives in `R^{k(N+1)}`: `U_j = cos(theta) E_j + sin(theta) F` where `E_j`
/// spans coordinate block `j` and `F` spans block `N`. Every cross-Gram is
/// `sin^2(theta) I_k`, so the coherence is exactly `sin^2(theta)`.
pub fn angle_family(k: usize, n: usize, theta: f64) -> Result<SubspaceCollection, FrameError> {
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(FrameError::InvalidAngle(theta));
    }
    if k == 0 || n == 0 {
        return Err(FrameError::InvalidDims(format!("need k >= 1 and N >= 1, got k={k} N={n}")));
    }
    let d = k * (n + 1);
    let (s, c) = theta.sin_cos();
    let shared = n * k;
    let bases = (0..n)
        .map(|j| {
            let mut u = DMatrix::zeros(d, k);
            for col in 0..k {
                u[(j * k + col, col)] += c;
                u[(shared + col, col)] += s;
            }
            u
        })
        .collect();
    Ok(SubspaceCollection::from_orthonormal(d, bases).with_label(format!("angle(k={k},N={n},theta={theta})")))
}

/// Largest pairwise `||P_i P_j||` and where it occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub lambda: f64,
    pub argmax_pair: (usize, usize),
    /// Symmetric `N x N`; the diagonal is NaN (unset).
    pub pairwise_sigma: DMatrix<f64>,
    /// `arccos(lambda)`, radians.
    pub min_principal_angle: f64,
}

/// Coherence `lambda = max_{i != j} ||P_i P_j||`.
pub fn coherence(collection: &SubspaceCollection) -> Result<CoherenceReport, FrameError> {
    let n = collection.len();
    if n < 2 {
        return Err(FrameError::SingleSubspace);
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs.par_iter().map(|&(i, j)| collection.pair_coherence(i, j)).collect();
    let mut sigma = DMatrix::from_element(n, n, f64::NAN);
    let mut lambda = f64::NEG_INFINITY;
    let mut argmax_pair = (0, 1);
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        sigma[(i, j)] = v;
        sigma[(j, i)] = v;
        if v > lambda {
            lambda = v;
            argmax_pair = (i, j);
        }
    }
    Ok(CoherenceReport { lambda, argmax_pair, pairwise_sigma: sigma, min_principal_angle: lambda.acos() })
}

/// Sines of the principal angles, ascending: singular values of
/// `(I - P_big) U_small`. Accurate for small angles, where `acos` of the
/// cross-Gram singular values is not.
fn principal_sines(collection: &SubspaceCollection, i: usize, j: usize) -> Vec<f64> {
    let (a, b) = (collection.basis(i), collection.basis(j));
    let (small, big) = if a.ncols() <= b.ncols() { (a, b) } else { (b, a) };
    let residual = small - big * big.tr_mul(small);
    let mut s = singular_values_desc(&residual);
    s.reverse();
    s.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Principal angles between `W_i` and `W_j`, ascending, radians.
pub fn principal_angles(collection: &SubspaceCollection, i: usize, j: usize) -> Result<Vec<f64>, FrameError> {
    collection.check_pair(i, j)?;
    // cosines descend while sines ascend, so index l pairs up angle l
    let cosines = singular_values_desc(&collection.cross_gram(i, j));
    let sines = principal_sines(collection, i, j);
    Ok(cosines.into_iter().zip(sines).map(|(c, s)| s.atan2(c.clamp(0.0, 1.0))).collect())
}

/// `d_s(W_i, W_j) = sin` of the smallest principal angle.
pub fn spectral_distance(collection: &SubspaceCollection, i: usize, j: usize) -> Result<f64, FrameError> {
    collection.check_pair(i, j)?;
    Ok(principal_sines(collection, i, j)[0])
}

/// `min_{i != j} d_s(W_i, W_j)`.
pub fn packing_diameter(collection: &SubspaceCollection) -> Result<f64, FrameError> {
    let n = collection.len();
    if n < 2 {
        return Err(FrameError::SingleSubspace);
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    Ok(pairs.par_iter().map(|&(i, j)| principal_sines(collection, i, j)[0]).reduce(|| 1.0, f64::min))
}

/// Eigenvalue bounds of the fusion frame operator.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
    pub weights: Vec<f64>,
}

/// Extreme eigenvalues of `S = sum_j v_j^2 P_j`.
pub fn fusion_frame_bounds(collection: &SubspaceCollection, weights: &[f64]) -> Result<FrameBounds, FrameError> {
    if weights.len() != collection.len() {
        return Err(FrameError::WeightCount { expected: collection.len(), found: weights.len() });
    }
    if let Some(j) = weights.iter().position(|&w| !(w > 0.0)) {
        return Err(FrameError::NonpositiveWeight(j));
    }
    let d = collection.ambient_dim();
    let mut s = DMatrix::zeros(d, d);
    for (u, &w) in collection.bases().iter().zip(weights) {
        s += (u * u.transpose()) * (w * w);
    }
    let (lo, hi) = symmetric_extreme_eigenvalues(&s);
    let lower = lo.max(0.0);
    Ok(FrameBounds { lower, upper: hi.max(lower), weights: weights.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

    #[test]
    fn orthonormal_input_is_preserved() {
        let c = random_collection(5, 2, 3, 11).unwrap();
        let rebuilt = build_collection(c.bases().to_vec()).unwrap();
        for (a, b) in c.bases().iter().zip(rebuilt.bases()) {
            assert!((a - b).abs().max() < 1e-12);
        }
    }

    #[test]
    fn scaled_line_is_normalized() {
        let c = build_collection(vec![DMatrix::from_row_slice(2, 1, &[2.0, 0.0])]).unwrap();
        assert_eq!(c.basis(0).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn repeated_columns_are_rank_deficient() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.5, 0.5, 2.0, 2.0]);
        assert_eq!(build_collection(vec![b]), Err(FrameError::RankDeficient(0)));
    }

    #[test]
    fn shapes_must_agree() {
        let err = build_collection(vec![DMatrix::identity(3, 1), DMatrix::identity(3, 2)]).unwrap_err();
        assert!(matches!(err, FrameError::ShapeMismatch { index: 1, .. }));
    }

    #[test]
    fn mixed_dimensions_use_max_block_dim() {
        let c = SubspaceCollection::build_mixed(vec![DMatrix::identity(4, 1), DMatrix::identity(4, 3)]).unwrap();
        assert_eq!(c.block_dim(), 3);
        assert_eq!(c.offsets(), &[0, 1, 4]);
        assert_eq!(principal_angles(&c, 0, 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn random_collection_is_deterministic() {
        assert_eq!(random_collection(6, 2, 4, 3).unwrap(), random_collection(6, 2, 4, 3).unwrap());
        assert_ne!(random_collection(6, 2, 4, 3).unwrap(), random_collection(6, 2, 4, 4).unwrap());
        assert!(matches!(random_collection(2, 3, 1, 0), Err(FrameError::InvalidDims(_))));
    }

    #[test]
    fn full_dimensional_subspaces_coincide() {
        let c = random_collection(3, 3, 3, 5).unwrap();
        for u in c.bases() {
            assert!(orthonormality_error(u) < 1e-12);
        }
        assert!((coherence(&c).unwrap().lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_collection_cases() {
        let c = orthogonal_collection(6, 2, 3).unwrap();
        assert_eq!(coherence(&c).unwrap().lambda, 0.0);
        let fb = fusion_frame_bounds(&c, &[1.0; 3]).unwrap();
        assert!((fb.lower - 1.0).abs() < 1e-12 && (fb.upper - 1.0).abs() < 1e-12);
        assert_eq!(orthogonal_collection(4, 2, 3), Err(FrameError::TooManySubspaces { d: 4, k: 2, n: 3 }));
    }

    #[test]
    fn angle_family_cases() {
        let zero = angle_family(2, 3, 0.0).unwrap();
        let orth = orthogonal_collection(8, 2, 3).unwrap();
        assert_eq!(zero.bases(), orth.bases());
        assert_eq!(coherence(&zero).unwrap().lambda, 0.0);

        let flat = angle_family(2, 3, FRAC_PI_2).unwrap();
        assert!((coherence(&flat).unwrap().lambda - 1.0).abs() < 1e-12);

        let c = angle_family(2, 4, FRAC_PI_6).unwrap();
        assert!((coherence(&c).unwrap().lambda - 0.25).abs() < 1e-10);

        let c = angle_family(1, 2, FRAC_PI_4).unwrap();
        assert!((coherence(&c).unwrap().lambda - 0.5).abs() < 1e-12);

        assert!(matches!(angle_family(2, 2, -0.1), Err(FrameError::InvalidAngle(_))));
        assert!(matches!(angle_family(2, 2, 1.6), Err(FrameError::InvalidAngle(_))));
    }

    #[test]
    fn coherence_needs_two_subspaces() {
        let c = orthogonal_collection(3, 1, 1).unwrap();
        assert_eq!(coherence(&c), Err(FrameError::SingleSubspace));
        assert_eq!(packing_diameter(&c), Err(FrameError::SingleSubspace));
    }

    #[test]
    fn identical_subspaces() {
        let u = DMatrix::identity(4, 2);
        let c = build_collection(vec![u.clone(), u]).unwrap();
        let rep = coherence(&c).unwrap();
        assert!((rep.lambda - 1.0).abs() < 1e-15);
        assert_eq!(rep.argmax_pair, (0, 1));
        assert_eq!(rep.min_principal_angle, 0.0);
        assert_eq!(principal_angles(&c, 0, 1).unwrap(), vec![0.0, 0.0]);
        assert_eq!(spectral_distance(&c, 1, 0).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_pair_angles() {
        let c = orthogonal_collection(4, 2, 2).unwrap();
        for a in principal_angles(&c, 0, 1).unwrap() {
            assert!((a - FRAC_PI_2).abs() < 1e-15);
        }
        assert_eq!(spectral_distance(&c, 0, 1).unwrap(), 1.0);
        assert_eq!(packing_diameter(&c).unwrap(), 1.0);
    }

    #[test]
    fn angle_family_principal_angles() {
        let c = angle_family(2, 2, FRAC_PI_6).unwrap();
        let expected = 0.25f64.acos();
        for a in principal_angles(&c, 0, 1).unwrap() {
            assert!((a - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn spectral_distance_from_cosine() {
        // two lines in the plane at cosine 0.6
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.6, 0.8]);
        let c = build_collection(vec![a, b]).unwrap();
        assert!((spectral_distance(&c, 0, 1).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pair_errors() {
        let c = orthogonal_collection(4, 1, 3).unwrap();
        assert_eq!(principal_angles(&c, 1, 1), Err(FrameError::SameIndex(1)));
        assert_eq!(principal_angles(&c, 0, 3), Err(FrameError::IndexOutOfRange { index: 3, n: 3 }));
    }

    #[test]
    fn single_subspace_frame_bounds() {
        let c = orthogonal_collection(3, 1, 1).unwrap();
        let fb = fusion_frame_bounds(&c, &[1.0]).unwrap();
        assert!(fb.lower.abs() < 1e-15 && (fb.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_partition_frame_bounds() {
        let c = orthogonal_collection(6, 2, 3).unwrap();
        let mut bases = c.bases().to_vec();
        bases.extend(c.bases().iter().cloned());
        let doubled = build_collection(bases).unwrap();
        let fb = fusion_frame_bounds(&doubled, &[1.0; 6]).unwrap();
        assert!((fb.lower - 2.0).abs() < 1e-12 && (fb.upper - 2.0).abs() < 1e-12);
    }

    #[test]
    fn weights_are_validated() {
        let c = orthogonal_collection(6, 2, 3).unwrap();
        assert_eq!(fusion_frame_bounds(&c, &[1.0, 0.0, 1.0]), Err(FrameError::NonpositiveWeight(1)));
        assert_eq!(fusion_frame_bounds(&c, &[1.0]), Err(FrameError::WeightCount { expected: 3, found: 1 }));
    }
}
