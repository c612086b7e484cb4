//! Seeded fixtures shared by the benchmarks.

use ffsense_core::frames::random_collection;
use ffsense_core::measurement::{compose_with_bases, sample_ensemble, Normalization};
use ffsense_core::seed::mix;
use ffsense_core::signals::{random_sparse_signal, AmplitudeLaw};
use ffsense_core::{CoefficientOperator, Distribution, EnsembleSpec, MeasurementOperator, SubspaceCollection};
use nalgebra::{DMatrix, DVector};

/// One planted recovery problem `y = B c` with an `s`-sparse `c`.
pub struct Instance {
    pub collection: SubspaceCollection,
    pub a: DMatrix<f64>,
    pub b: CoefficientOperator,
    pub c: DVector<f64>,
    pub y: DVector<f64>,
}

pub fn instance(d: usize, k: usize, n: usize, s: usize, m: usize, seed: u64) -> Instance {
    let collection = random_collection(d, k, n, seed).expect("valid dimensions");
    let a = sample_ensemble(&EnsembleSpec {
        distribution: Distribution::Gaussian,
        rows: m,
        cols: n,
        seed: mix(seed, &[2]),
    })
    .expect("valid dimensions");
    let op = MeasurementOperator::vector(a.clone(), d, Normalization::InvSqrtRows);
    let b = compose_with_bases(&op, &collection).expect("matching dimensions");
    let x =
        random_sparse_signal(&collection, s, mix(seed, &[1]), AmplitudeLaw::UnitNormBlocks).expect("valid sparsity");
    let c = x.coeffs().clone();
    let y = b.apply(&c);
    Instance { collection, a, b, c, y }
}
