//! Block-structured signals in coefficient space.

use nalgebra::{DVector, DVectorView};
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::frames::SubspaceCollection;
use crate::seed;

/// Support threshold used when reading the support of a recovered signal.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("sparsity {s} invalid for {n} blocks")]
    InvalidSparsity { s: usize, n: usize },
    #[error("signal has {found} coefficients, collection expects {expected}")]
    DimMismatch { expected: usize, found: usize },
}

/// Distribution of the nonzero blocks of a random sparse signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeLaw {
    /// Uniform on the unit sphere of `R^k`.
    UnitNormBlocks,
    /// i.i.d. standard normal entries.
    GaussianBlocks,
}

/// A signal `x in H` represented by its coefficient blocks `c_j`, with
/// `x_j = U_j c_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSignal {
    coeffs: DVector<f64>,
    offsets: Vec<usize>,
    collection: String,
}

impl BlockSignal {
    pub fn zeros(collection: &SubspaceCollection) -> Self {
        Self::from_coeffs(collection, DVector::zeros(collection.coeff_dim())).unwrap()
    }

    /// Wrap a flat coefficient vector laid out by the collection's offsets.
    pub fn from_coeffs(collection: &SubspaceCollection, coeffs: DVector<f64>) -> Result<Self, SignalError> {
        if coeffs.len() != collection.coeff_dim() {
            return Err(SignalError::DimMismatch { expected: collection.coeff_dim(), found: coeffs.len() });
        }
        Ok(BlockSignal { coeffs, offsets: collection.offsets().to_vec(), collection: collection.label().to_string() })
    }

    /// Build from explicit offsets; `offsets` must start at 0 and end at `coeffs.len()`.
    pub fn from_parts(coeffs: DVector<f64>, offsets: Vec<usize>, collection: String) -> Result<Self, SignalError> {
        let end = offsets.last().copied().unwrap_or(0);
        if offsets.first() != Some(&0) || end != coeffs.len() || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(SignalError::DimMismatch { expected: end, found: coeffs.len() });
        }
        Ok(BlockSignal { coeffs, offsets, collection })
    }

    /// Same layout, new coefficients.
    pub fn with_coeffs(&self, coeffs: DVector<f64>) -> Self {
        assert_eq!(coeffs.len(), self.coeffs.len(), "coefficient length changed");
        BlockSignal { coeffs, offsets: self.offsets.clone(), collection: self.collection.clone() }
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DVector<f64> {
        self.coeffs
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Label of the collection the signal is bound to.
    pub fn collection(&self) -> &str {
        &self.collection
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn block(&self, j: usize) -> DVectorView<'_, f64> {
        self.coeffs.rows(self.offsets[j], self.offsets[j + 1] - self.offsets[j])
    }

    pub fn block_norms(&self) -> Vec<f64> {
        (0..self.num_blocks()).map(|j| self.block(j).norm()).collect()
    }

    /// Materialize `x = (U_j c_j)_j` in `R^{dN}`.
    pub fn to_ambient(&self, collection: &SubspaceCollection) -> DVector<f64> {
        let d = collection.ambient_dim();
        let mut x = DVector::zeros(d * collection.len());
        for (j, u) in collection.bases().iter().enumerate() {
            x.rows_mut(j * d, d).copy_from(&(u * self.block(j)));
        }
        x
    }

    /// Coefficients of the projection of an ambient vector onto `H`.
    pub fn from_ambient(collection: &SubspaceCollection, x: &DVector<f64>) -> Result<Self, SignalError> {
        let d = collection.ambient_dim();
        if x.len() != d * collection.len() {
            return Err(SignalError::DimMismatch { expected: d * collection.len(), found: x.len() });
        }
        let mut c = DVector::zeros(collection.coeff_dim());
        for (j, u) in collection.bases().iter().enumerate() {
            let o = collection.offsets()[j];
            c.rows_mut(o, u.ncols()).copy_from(&(u.transpose() * x.rows(j * d, d)));
        }
        Self::from_coeffs(collection, c)
    }
}

/// An `s`-sparse signal with a uniformly random support.
pub fn random_sparse_signal(
    collection: &SubspaceCollection,
    s: usize,
    seed: u64,
    law: AmplitudeLaw,
) -> Result<BlockSignal, SignalError> {
    let n = collection.len();
    if s == 0 || s > n {
        return Err(SignalError::InvalidSparsity { s, n });
    }
    let mut rng = seed::rng(seed);
    let mut support = index::sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let mut c = DVector::zeros(collection.coeff_dim());
    for &j in &support {
        let o = collection.offsets()[j];
        let kj = collection.subspace_dim(j);
        let mut block = c.rows_mut(o, kj);
        loop {
            for v in block.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            match law {
                AmplitudeLaw::GaussianBlocks => break,
                AmplitudeLaw::UnitNormBlocks => {
                    let nrm = block.norm();
                    if nrm > 0.0 {
                        block /= nrm;
                        break;
                    }
                }
            }
        }
    }
    BlockSignal::from_coeffs(collection, c)
}

/// `sum_j ||x_j||_2`.
pub fn norm_21(x: &BlockSignal) -> f64 {
    x.block_norms().iter().sum()
}

/// `max_j ||x_j||_2`.
pub fn norm_2inf(x: &BlockSignal) -> f64 {
    x.block_norms().into_iter().fold(0.0, f64::max)
}

/// Euclidean norm; equals the ambient norm since the bases are orthonormal.
pub fn norm_2(x: &BlockSignal) -> f64 {
    x.coeffs().norm()
}

/// Best `s`-block approximation and its `l2,1` error `sigma_s(x)_1`.
///
/// Keeps the `s` blocks of largest norm, ties going to the lower index.
pub fn best_s_term(x: &BlockSignal, s: usize) -> Result<(BlockSignal, f64), SignalError> {
    let n = x.num_blocks();
    if s > n {
        return Err(SignalError::InvalidSparsity { s, n });
    }
    let norms = x.block_norms();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps lower indices first among equal norms
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut c = x.coeffs().clone();
    let mut sigma = 0.0;
    for &j in &order[s..] {
        sigma += norms[j];
        let (o, len) = (x.offsets()[j], x.offsets()[j + 1] - x.offsets()[j]);
        c.rows_mut(o, len).fill(0.0);
    }
    Ok((x.with_coeffs(c), sigma))
}

/// Indices of blocks with norm above `tol`.
pub fn support(x: &BlockSignal, tol: f64) -> Vec<usize> {
    x.block_norms().iter().enumerate().filter(|(_, &v)| v > tol).map(|(j, _)| j).collect()
}
