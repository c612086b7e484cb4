use std::io::Write;
use std::path::Path;

use ffsense_core::experiment::{results_to_string, OutputFormat, ResultRow};
use ffsense_core::io::{self, Diagnostics};
use ffsense_core::{BlockSignal, SubspaceCollection};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::CliError;

/// Write to `out`, or standard output when absent.
pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match out {
        Some(path) => Ok(io::write_text(path, &text)?),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("standard output: {e}"))),
    }
}

/// JSON of `json`, or CSV of `rows`.
pub fn render<J: Serialize, R: ResultRow>(format: OutputFormat, json: &J, rows: impl FnOnce() -> Vec<R>) -> String {
    match format {
        OutputFormat::Json => io::to_json(json),
        OutputFormat::Csv => results_to_string(&rows(), OutputFormat::Csv),
    }
}

#[derive(Serialize)]
pub struct CollectionEntry {
    pub subspace: usize,
    pub row: usize,
    pub column: usize,
    pub value: f64,
}

impl ResultRow for CollectionEntry {
    const HEADER: &'static [&'static str] = &["subspace", "row", "column", "value"];
}

pub fn collection_entries(c: &SubspaceCollection) -> Vec<CollectionEntry> {
    let mut out = Vec::new();
    for (j, u) in c.bases().iter().enumerate() {
        for row in 0..u.nrows() {
            for column in 0..u.ncols() {
                out.push(CollectionEntry { subspace: j, row, column, value: u[(row, column)] });
            }
        }
    }
    out
}

#[derive(Serialize)]
pub struct SignalEntry {
    pub block: usize,
    pub index: usize,
    pub value: f64,
}

impl ResultRow for SignalEntry {
    const HEADER: &'static [&'static str] = &["block", "index", "value"];
}

pub fn signal_entries(x: &BlockSignal) -> Vec<SignalEntry> {
    (0..x.num_blocks())
        .flat_map(|j| {
            x.block(j)
                .iter()
                .enumerate()
                .map(move |(index, &value)| SignalEntry { block: j, index, value })
                .collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Serialize)]
pub struct MatrixEntry {
    pub row: usize,
    pub column: usize,
    pub value: f64,
}

impl ResultRow for MatrixEntry {
    const HEADER: &'static [&'static str] = &["row", "column", "value"];
}

pub fn matrix_entries(a: &DMatrix<f64>) -> Vec<MatrixEntry> {
    (0..a.nrows())
        .flat_map(|row| (0..a.ncols()).map(move |column| MatrixEntry { row, column, value: a[(row, column)] }))
        .collect()
}

#[derive(Serialize)]
pub struct VectorEntry {
    pub index: usize,
    pub value: f64,
}

impl ResultRow for VectorEntry {
    const HEADER: &'static [&'static str] = &["index", "value"];
}

pub fn vector_entries(v: &DVector<f64>) -> Vec<VectorEntry> {
    v.iter().enumerate().map(|(index, &value)| VectorEntry { index, value }).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CoherenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub lambda: f64,
    pub pair_i: usize,
    pub pair_j: usize,
    pub min_principal_angle: f64,
    pub packing_diameter: f64,
    /// Coherence floor for `N` subspaces of dimension `k` in `R^d`; absent for mixed dimensions.
    pub lambda_floor: Option<f64>,
}

impl ResultRow for CoherenceRow {
    const HEADER: &'static [&'static str] =
        &["N", "d", "k", "lambda", "pair_i", "pair_j", "min_principal_angle", "packing_diameter", "lambda_floor"];
}

#[derive(Debug, Serialize)]
pub struct RipRow {
    pub s: usize,
    pub value: f64,
    pub mode: ffsense_core::RipMode,
    pub supports_evaluated: u64,
    /// Block indices joined by `;`.
    pub worst_support: String,
    /// Whether the constant is below the recovery threshold; absent for Monte Carlo estimates.
    pub below_recovery_threshold: Option<bool>,
}

impl ResultRow for RipRow {
    const HEADER: &'static [&'static str] =
        &["s", "value", "mode", "supports_evaluated", "worst_support", "below_recovery_threshold"];
}

#[derive(Debug, Serialize)]
pub struct RecoveryRow {
    pub status: ffsense_core::SolverStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub objective: f64,
    pub certified: bool,
    /// `||x - x_hat|| / ||x||` against a generated signal; absent when measurements came from a file.
    pub rel_error: Option<f64>,
}

impl ResultRow for RecoveryRow {
    const HEADER: &'static [&'static str] = &[
        "status",
        "iterations",
        "primal_residual",
        "dual_residual",
        "duality_gap",
        "objective",
        "certified",
        "rel_error",
    ];
}

impl RecoveryRow {
    pub fn new(d: &Diagnostics, certified: bool, rel_error: Option<f64>) -> Self {
        RecoveryRow {
            status: d.status,
            iterations: d.iterations,
            primal_residual: d.primal_residual,
            dual_residual: d.dual_residual,
            duality_gap: d.duality_gap,
            objective: d.objective,
            certified,
            rel_error,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BoundsRow {
    pub s: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub lambda: f64,
    pub necessary_scalar: f64,
    pub necessary_regime: &'static str,
    pub necessary_in_regime: bool,
    pub necessary_vector: f64,
    pub sufficient_scalar: f64,
    pub sufficient_uniform_vector: f64,
    pub sufficient_nonuniform_vector: f64,
    pub lambda_floor: f64,
    pub equiisoclinic_cap: u64,
    /// Empty when unbounded.
    pub mu_f_sparsity_cap: Option<f64>,
}

impl ResultRow for BoundsRow {
    const HEADER: &'static [&'static str] = &[
        "s",
        "N",
        "k",
        "d",
        "lambda",
        "necessary_scalar",
        "necessary_regime",
        "necessary_in_regime",
        "necessary_vector",
        "sufficient_scalar",
        "sufficient_uniform_vector",
        "sufficient_nonuniform_vector",
        "lambda_floor",
        "equiisoclinic_cap",
        "mu_f_sparsity_cap",
    ];
}
