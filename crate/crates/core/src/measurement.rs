//! Random measurement ensembles and measurement operators.
//!
//! Two measurement models are supported:
//!
//! * scalar: a dense `m' x dN` matrix `Phi` acting on the stacked ambient
//!   vector, `y = scale * Phi x`;
//! * vector-valued: an `m x N` matrix `A` acting blockwise,
//!   `y_i = scale * sum_j A[i,j] x_j in R^d`, i.e. `(A (x) I_d) x`. The
//!   Kronecker matrix is never formed.
//!
//! The scale is an attribute of the operator so that one sampled matrix can
//! serve both the unnormalized and the `1/sqrt(m)`-normalized statements.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::SubspaceCollection;
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasurementError {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("column {0} of the measurement matrix is zero")]
    ZeroColumn(usize),
}

/// Entry distribution of a random matrix; all have mean zero and variance one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    /// Rademacher `+-1`.
    Bernoulli,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    UniformScaled,
}

/// Subgaussian constants of an entry distribution.
///
/// `tail_alpha` is the parameter in `P(|xi| > t) <= 2 exp(-t^2 / (2 alpha^2))`
/// (Gaussian and Bernoulli are taken as 1 by convention); `psi2` is the Orlicz
/// norm `inf { K : E exp(xi^2/K^2) <= 2 }`. They differ by absolute constants
/// and are both reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgaussianConstants {
    pub tail_alpha: f64,
    pub psi2: f64,
}

impl Distribution {
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Distribution::Gaussian => StandardNormal.sample(rng),
            Distribution::Bernoulli => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Distribution::UniformScaled => {
                let r3 = 3f64.sqrt();
                rng.random_range(-r3..r3)
            }
        }
    }

    pub fn subgaussian_constants(&self) -> SubgaussianConstants {
        match self {
            Distribution::Gaussian => SubgaussianConstants { tail_alpha: 1.0, psi2: (8.0f64 / 3.0).sqrt() },
            Distribution::Bernoulli => SubgaussianConstants { tail_alpha: 1.0, psi2: 1.0 / 2f64.ln().sqrt() },
            Distribution::UniformScaled => uniform_scaled_constants(),
        }
    }
}

fn uniform_scaled_constants() -> SubgaussianConstants {
    let r3 = 3f64.sqrt();
    // smallest alpha with 1 - t/sqrt3 <= 2 exp(-t^2/(2 alpha^2)) on (0, sqrt3)
    let tail_alpha = (1..100_000)
        .map(|i| {
            let t = r3 * i as f64 / 100_000.0;
            t / (2.0 * (2.0 / (1.0 - t / r3)).ln()).sqrt()
        })
        .fold(0.0, f64::max);
    // E exp(xi^2/K^2) = (1/sqrt3) int_0^sqrt3 exp(t^2/K^2) dt, decreasing in K
    let moment = |kk: f64| {
        let n = 20_000;
        let h = r3 / n as f64;
        let f = |t: f64| (t * t / (kk * kk)).exp();
        let mut acc = f(0.0) + f(r3);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0 / r3
    };
    let (mut lo, mut hi) = (0.5, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if moment(mid) > 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    SubgaussianConstants { tail_alpha, psi2: hi }
}

/// Recipe for a random matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub distribution: Distribution,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
}

/// Sample a `rows x cols` matrix with i.i.d. entries; entries are drawn in
/// row-major order.
pub fn sample_ensemble(spec: &EnsembleSpec) -> Result<DMatrix<f64>, MeasurementError> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(MeasurementError::InvalidDims(format!("{} x {} ensemble", spec.rows, spec.cols)));
    }
    let mut rng = seed::rng(spec.seed);
    let data: Vec<f64> = (0..spec.rows * spec.cols).map(|_| spec.distribution.sample(&mut rng)).collect();
    Ok(DMatrix::from_row_slice(spec.rows, spec.cols, &data))
}

/// Scaling applied by an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Scale 1.
    None,
    /// Scale `1/sqrt(rows)` of the sampled matrix (`m` or `m'`).
    InvSqrtRows,
}

impl Normalization {
    pub fn scale(&self, rows: usize) -> f64 {
        match self {
            Normalization::None => 1.0,
            Normalization::InvSqrtRows => 1.0 / (rows as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    /// Dense `m' x dN` matrix.
    Scalar { phi: DMatrix<f64> },
    /// `m x N` coefficient matrix applied as `A (x) I_d`.
    Vector { a: DMatrix<f64>, d: usize },
}

/// A linear measurement map on the ambient space `R^{dN}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOperator {
    pub kind: OperatorKind,
    pub scale: f64,
}

impl MeasurementOperator {
    pub fn scalar(phi: DMatrix<f64>, normalization: Normalization) -> Self {
        let scale = normalization.scale(phi.nrows());
        MeasurementOperator { kind: OperatorKind::Scalar { phi }, scale }
    }

    pub fn vector(a: DMatrix<f64>, d: usize, normalization: Normalization) -> Self {
        let scale = normalization.scale(a.nrows());
        MeasurementOperator { kind: OperatorKind::Vector { a, d }, scale }
    }

    /// Length of the ambient input, `dN`.
    pub fn input_len(&self) -> usize {
        match &self.kind {
            OperatorKind::Scalar { phi } => phi.ncols(),
            OperatorKind::Vector { a, d } => a.ncols() * d,
        }
    }

    /// Length of the measurement vector: `m'` or `dm`.
    pub fn output_len(&self) -> usize {
        match &self.kind {
            OperatorKind::Scalar { phi } => phi.nrows(),
            OperatorKind::Vector { a, d } => a.nrows() * d,
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>, MeasurementError> {
        check_len(self.input_len(), x.len())?;
        Ok(match &self.kind {
            OperatorKind::Scalar { phi } => phi * x * self.scale,
            OperatorKind::Vector { a, d } => {
                // x stacked by blocks is the column-major d x N matrix X; Y = X A^T
                let xm = DMatrixView::from_slice(x.as_slice(), *d, a.ncols());
                let y = xm * a.transpose() * self.scale;
                DVector::from_column_slice(y.as_slice())
            }
        })
    }

    pub fn adjoint(&self, y: &DVector<f64>) -> Result<DVector<f64>, MeasurementError> {
        check_len(self.output_len(), y.len())?;
        Ok(match &self.kind {
            OperatorKind::Scalar { phi } => phi.tr_mul(y) * self.scale,
            OperatorKind::Vector { a, d } => {
                let ym = DMatrixView::from_slice(y.as_slice(), *d, a.nrows());
                let z = ym * a * self.scale;
                DVector::from_column_slice(z.as_slice())
            }
        })
    }

    /// Dense matrix of the operator, scale included. For the vector kind this
    /// is `scale * (A (x) I_d)`; intended for checks on small instances.
    pub fn materialize(&self) -> DMatrix<f64> {
        match &self.kind {
            OperatorKind::Scalar { phi } => phi * self.scale,
            OperatorKind::Vector { a, d } => a.kronecker(&DMatrix::<f64>::identity(*d, *d)) * self.scale,
        }
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), MeasurementError> {
    if expected != found {
        return Err(MeasurementError::DimMismatch { expected, found });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum CoefficientRepr {
    Kron { a: DMatrix<f64>, bases: Vec<DMatrix<f64>>, d: usize, scale: f64 },
    Dense { b: DMatrix<f64> },
}

/// Measurement map on coefficient space: `B c = apply(op, x(c))`.
///
/// Column block `j` is `B_j`, of width `k_j`. The vector-valued form is
/// applied matrix-free with blocks `B[i,j] = scale * A[i,j] U_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientOperator {
    repr: CoefficientRepr,
    offsets: Vec<usize>,
    nrows: usize,
    label: String,
}

impl CoefficientOperator {
    /// Wrap an explicit dense matrix with the given column-block offsets.
    pub fn from_dense(b: DMatrix<f64>, offsets: Vec<usize>) -> Result<Self, MeasurementError> {
        if offsets.first() != Some(&0) || offsets.last() != Some(&b.ncols()) || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(MeasurementError::InvalidDims("column-block offsets do not cover the matrix".into()));
        }
        let nrows = b.nrows();
        Ok(CoefficientOperator { repr: CoefficientRepr::Dense { b }, offsets, nrows, label: String::new() })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Label of the collection the operator was composed with.
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_matrix_free(&self) -> bool {
        matches!(self.repr, CoefficientRepr::Kron { .. })
    }

    pub fn apply(&self, c: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.nrows);
        self.apply_into(c, &mut out);
        out
    }

    pub fn adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols());
        self.adjoint_into(y, &mut out);
        out
    }

    pub fn apply_into(&self, c: &DVector<f64>, out: &mut DVector<f64>) {
        assert_eq!(c.len(), self.ncols(), "coefficient length");
        match &self.repr {
            CoefficientRepr::Dense { b } => b.mul_to(c, out),
            CoefficientRepr::Kron { a, bases, d, scale } => {
                let mut x = DMatrix::zeros(*d, a.ncols());
                for (j, u) in bases.iter().enumerate() {
                    let cj = c.rows(self.offsets[j], u.ncols());
                    x.column_mut(j).gemv(1.0, u, &cj, 0.0);
                }
                let mut y = DMatrixViewMut::from_slice(out.as_mut_slice(), *d, a.nrows());
                y.gemm(*scale, &x, &a.transpose(), 0.0);
            }
        }
    }

    pub fn adjoint_into(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
        assert_eq!(y.len(), self.nrows, "measurement length");
        match &self.repr {
            CoefficientRepr::Dense { b } => b.tr_mul_to(y, out),
            CoefficientRepr::Kron { a, bases, d, scale } => {
                let ym = DMatrixView::from_slice(y.as_slice(), *d, a.nrows());
                let z = ym * a * *scale;
                for (j, u) in bases.iter().enumerate() {
                    out.rows_mut(self.offsets[j], u.ncols()).gemv_tr(1.0, u, &z.column(j), 0.0);
                }
            }
        }
    }

    /// `||B_j^T v||_2` for every block `j`.
    pub fn block_adjoint_norms(&self, v: &DVector<f64>) -> Vec<f64> {
        let g = self.adjoint(v);
        self.offsets.windows(2).map(|w| g.rows(w[0], w[1] - w[0]).norm()).collect()
    }

    /// Dense column blocks `[B_j]_{j in support}`, assembled blockwise.
    pub fn columns(&self, support: &[usize]) -> DMatrix<f64> {
        let width: usize = support.iter().map(|&j| self.offsets[j + 1] - self.offsets[j]).sum();
        let mut out = DMatrix::zeros(self.nrows, width);
        let mut col = 0;
        for &j in support {
            let w = self.offsets[j + 1] - self.offsets[j];
            match &self.repr {
                CoefficientRepr::Dense { b } => {
                    out.columns_mut(col, w).copy_from(&b.columns(self.offsets[j], w));
                }
                CoefficientRepr::Kron { a, bases, d, scale } => {
                    let u = &bases[j];
                    for i in 0..a.nrows() {
                        let f = *scale * a[(i, j)];
                        out.view_mut((i * d, col), (*d, w)).copy_from(&(u * f));
                    }
                }
            }
            col += w;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.num_blocks()).collect();
        self.columns(&all)
    }
}

/// Coefficient-space operator for `op` on the signals of `collection`.
pub fn compose_with_bases(
    op: &MeasurementOperator,
    collection: &SubspaceCollection,
) -> Result<CoefficientOperator, MeasurementError> {
    let d = collection.ambient_dim();
    check_len(op.input_len(), d * collection.len())?;
    let offsets = collection.offsets().to_vec();
    match &op.kind {
        OperatorKind::Vector { a, d: opd } => {
            check_len(*opd, d)?;
            Ok(CoefficientOperator {
                repr: CoefficientRepr::Kron { a: a.clone(), bases: collection.bases().to_vec(), d, scale: op.scale },
                nrows: a.nrows() * d,
                offsets,
                label: collection.label().to_string(),
            })
        }
        OperatorKind::Scalar { phi } => {
            let mut b = DMatrix::zeros(phi.nrows(), collection.coeff_dim());
            for (j, u) in collection.bases().iter().enumerate() {
                let block = phi.columns(j * d, d) * u * op.scale;
                b.columns_mut(offsets[j], u.ncols()).copy_from(&block);
            }
            Ok(CoefficientOperator::from_dense(b, offsets)?.with_label(collection.label()))
        }
    }
}

/// `y + e` with Gaussian `e` rescaled to `||e||_2 = eta` exactly.
pub fn add_noise(y: &DVector<f64>, eta: f64, seed: u64) -> DVector<f64> {
    if eta == 0.0 || y.is_empty() {
        return y.clone();
    }
    let mut rng = seed::rng(seed);
    loop {
        let e = DVector::<f64>::from_fn(y.len(), |_, _| StandardNormal.sample(&mut rng));
        let n = e.norm();
        if n > 0.0 {
            return y + e * (eta / n);
        }
    }
}

/// Column coherence `mu` of `A` and its fusion version `mu_f`, with the
/// columns normalized first.
pub fn matrix_coherences(a: &DMatrix<f64>, collection: &SubspaceCollection) -> Result<(f64, f64), MeasurementError> {
    check_len(collection.len(), a.ncols())?;
    let n = a.ncols();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let c = a.column(j);
        let nrm = c.norm();
        if nrm == 0.0 {
            return Err(MeasurementError::ZeroColumn(j));
        }
        cols.push(c / nrm);
    }
    let mut mu: f64 = 0.0;
    let mut mu_f: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let ip = cols[i].dot(&cols[j]).abs();
            mu = mu.max(ip);
            mu_f = mu_f.max(ip * collection.pair_coherence(i, j));
        }
    }
    Ok((mu, mu_f))
}
