//! JSON file formats.
//!
//! Every file carries `"version": 1`. Matrices are stored row-major.
//! Collections are re-validated on load: bases must be orthonormal to
//! [`ORTHONORMAL_TOL`](crate::frames::ORTHONORMAL_TOL).

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::SubspaceCollection;
use crate::signals::BlockSignal;
use crate::solver::{RecoverySolution, SolverStatus};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema error at `{field}` (line {line}, column {column}): {message}")]
    Schema { field: String, line: usize, column: usize, message: String },
    #[error("invalid content: {0}")]
    Invalid(String),
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }

    /// Whether this is a problem with the content rather than the file system.
    pub fn is_schema(&self) -> bool {
        !matches!(self, IoError::Io { .. })
    }
}

/// Parse JSON, naming the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        IoError::Schema { field, line: inner.line(), column: inner.column(), message: inner.to_string() }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_json(&text)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable value")
}

/// Write JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_text(path, &(to_json(value) + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

fn check_version(version: u32) -> Result<(), IoError> {
    if version != FORMAT_VERSION {
        return Err(IoError::Invalid(format!("unsupported version {version}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionFile {
    pub version: u32,
    pub d: usize,
    /// Largest subspace dimension; each basis holds `d * k_j` entries.
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub bases: Vec<Vec<f64>>,
    #[serde(default)]
    pub label: String,
}

impl CollectionFile {
    pub fn from_collection(c: &SubspaceCollection) -> Self {
        CollectionFile {
            version: FORMAT_VERSION,
            d: c.ambient_dim(),
            k: c.block_dim(),
            n: c.len(),
            bases: c.bases().iter().map(row_major).collect(),
            label: c.label().to_string(),
        }
    }

    pub fn into_collection(self) -> Result<SubspaceCollection, IoError> {
        check_version(self.version)?;
        if self.bases.len() != self.n {
            return Err(IoError::Invalid(format!("N = {} but {} bases given", self.n, self.bases.len())));
        }
        if self.d == 0 {
            return Err(IoError::Invalid("d must be positive".into()));
        }
        let mut bases = Vec::with_capacity(self.n);
        for (j, data) in self.bases.iter().enumerate() {
            if data.is_empty() || data.len() % self.d != 0 || data.len() / self.d > self.k {
                return Err(IoError::Invalid(format!(
                    "basis {j} has {} entries, expected a multiple of d = {} up to d * k = {}",
                    data.len(),
                    self.d,
                    self.d * self.k
                )));
            }
            bases.push(DMatrix::from_row_slice(self.d, data.len() / self.d, data));
        }
        if bases.iter().all(|b| b.ncols() < self.k) {
            return Err(IoError::Invalid(format!("no basis has the declared dimension k = {}", self.k)));
        }
        let c =
            SubspaceCollection::from_orthonormal_checked(self.d, bases).map_err(|e| IoError::Invalid(e.to_string()))?;
        Ok(c.with_label(self.label))
    }
}

pub fn read_collection(path: &Path) -> Result<SubspaceCollection, IoError> {
    read_json::<CollectionFile>(path)?.into_collection()
}

pub fn write_collection(path: &Path, c: &SubspaceCollection) -> Result<(), IoError> {
    write_json(path, &CollectionFile::from_collection(c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalFile {
    pub version: u32,
    pub collection: String,
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub coeffs: Vec<Vec<f64>>,
}

impl SignalFile {
    pub fn from_signal(x: &BlockSignal) -> Self {
        let coeffs: Vec<Vec<f64>> = (0..x.num_blocks()).map(|j| x.block(j).iter().copied().collect()).collect();
        SignalFile {
            version: FORMAT_VERSION,
            collection: x.collection().to_string(),
            k: coeffs.iter().map(Vec::len).max().unwrap_or(0),
            n: x.num_blocks(),
            coeffs,
        }
    }

    pub fn into_signal(self) -> Result<BlockSignal, IoError> {
        check_version(self.version)?;
        if self.coeffs.len() != self.n {
            return Err(IoError::Invalid(format!("N = {} but {} blocks given", self.n, self.coeffs.len())));
        }
        let mut offsets = vec![0];
        for (j, b) in self.coeffs.iter().enumerate() {
            if b.is_empty() || b.len() > self.k {
                return Err(IoError::Invalid(format!("block {j} has {} entries, k = {}", b.len(), self.k)));
            }
            offsets.push(offsets[j] + b.len());
        }
        let flat = DVector::from_iterator(offsets[self.n], self.coeffs.into_iter().flatten());
        BlockSignal::from_parts(flat, offsets, self.collection).map_err(|e| IoError::Invalid(e.to_string()))
    }

    /// Check the signal against a collection's layout and label.
    pub fn into_signal_for(self, c: &SubspaceCollection) -> Result<BlockSignal, IoError> {
        let x = self.into_signal()?;
        if x.offsets() != c.offsets() {
            return Err(IoError::Invalid("signal blocks do not match the collection's subspace dimensions".into()));
        }
        if !c.label().is_empty() && !x.collection().is_empty() && x.collection() != c.label() {
            return Err(IoError::Invalid(format!(
                "signal is bound to collection `{}`, not `{}`",
                x.collection(),
                c.label()
            )));
        }
        Ok(x)
    }
}

pub fn read_signal(path: &Path) -> Result<BlockSignal, IoError> {
    read_json::<SignalFile>(path)?.into_signal()
}

pub fn write_signal(path: &Path, x: &BlockSignal) -> Result<(), IoError> {
    write_json(path, &SignalFile::from_signal(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl MatrixFile {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixFile { version: FORMAT_VERSION, rows: m.nrows(), cols: m.ncols(), data: row_major(m) }
    }

    pub fn into_matrix(self) -> Result<DMatrix<f64>, IoError> {
        check_version(self.version)?;
        if self.data.len() != self.rows * self.cols {
            return Err(IoError::Invalid(format!(
                "{} x {} matrix needs {} entries, found {}",
                self.rows,
                self.cols,
                self.rows * self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, IoError> {
    read_json::<MatrixFile>(path)?.into_matrix()
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), IoError> {
    write_json(path, &MatrixFile::from_matrix(m))
}

/// Measurement vectors: `{ "version": 1, "len": int, "data": [reals] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorFile {
    pub version: u32,
    pub len: usize,
    pub data: Vec<f64>,
}

impl VectorFile {
    pub fn from_vector(v: &DVector<f64>) -> Self {
        VectorFile { version: FORMAT_VERSION, len: v.len(), data: v.as_slice().to_vec() }
    }

    pub fn into_vector(self) -> Result<DVector<f64>, IoError> {
        check_version(self.version)?;
        if self.data.len() != self.len {
            return Err(IoError::Invalid(format!("len = {} but {} entries given", self.len, self.data.len())));
        }
        Ok(DVector::from_vec(self.data))
    }
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>, IoError> {
    read_json::<VectorFile>(path)?.into_vector()
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<(), IoError> {
    write_json(path, &VectorFile::from_vector(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub status: SolverStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub objective: f64,
}

impl Diagnostics {
    pub fn from_solution(s: &RecoverySolution) -> Self {
        Diagnostics {
            status: s.status,
            iterations: s.iterations,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            duality_gap: s.duality_gap,
            objective: s.objective,
        }
    }
}

/// A recovered signal together with its solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub estimate: SignalFile,
    pub diagnostics: Diagnostics,
}

impl SolutionFile {
    pub fn from_solution(s: &RecoverySolution) -> Self {
        SolutionFile { estimate: SignalFile::from_signal(&s.estimate), diagnostics: Diagnostics::from_solution(s) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::random_collection;
    use crate::signals::{random_sparse_signal, AmplitudeLaw};

    #[test]
    fn collection_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let c = random_collection(5, 2, 4, 3).unwrap().with_label("demo");
        write_collection(&path, &c).unwrap();
        let back = read_collection(&path).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn row_major_layout() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(MatrixFile::from_matrix(&m).data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(MatrixFile::from_matrix(&m).into_matrix().unwrap(), m);
    }

    #[test]
    fn non_orthonormal_basis_is_rejected() {
        let text = r#"{"version":1,"d":2,"k":1,"N":2,"bases":[[1.0,0.0],[1.0,1.0]],"label":""}"#;
        let f: CollectionFile = parse_json(text).unwrap();
        let err = f.into_collection().unwrap_err();
        assert!(err.to_string().contains("basis 1"), "{err}");
    }

    #[test]
    fn schema_error_names_field() {
        let text = r#"{"version":1,"d":2,"k":"one","N":2,"bases":[],"label":""}"#;
        match parse_json::<CollectionFile>(text).unwrap_err() {
            IoError::Schema { field, line, .. } => {
                assert_eq!(field, "k");
                assert_eq!(line, 1);
            }
            e => panic!("unexpected {e}"),
        }
        let nested = "{\"version\":1,\"rows\":1,\"cols\":2,\n\"data\":[1.0,\"x\"]}";
        match parse_json::<MatrixFile>(nested).unwrap_err() {
            IoError::Schema { field, line, .. } => {
                assert_eq!(field, "data[1]");
                assert_eq!(line, 2);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn signal_round_trip_and_binding() {
        let c = random_collection(4, 2, 5, 1).unwrap().with_label("c1");
        let x = random_sparse_signal(&c, 2, 7, AmplitudeLaw::GaussianBlocks).unwrap();
        let text = to_json(&SignalFile::from_signal(&x));
        let f: SignalFile = parse_json(&text).unwrap();
        assert_eq!(f.clone().into_signal_for(&c).unwrap(), x);
        let other = random_collection(4, 2, 5, 2).unwrap().with_label("c2");
        assert!(f.into_signal_for(&other).is_err());
    }

    #[test]
    fn vector_length_checked() {
        let f = VectorFile { version: 1, len: 3, data: vec![1.0] };
        assert!(f.into_vector().is_err());
        let f = VectorFile { version: 2, len: 1, data: vec![1.0] };
        assert!(f.into_vector().is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_matrix(Path::new("/nonexistent/m.json")).unwrap_err();
        assert!(!err.is_schema());
    }
}
