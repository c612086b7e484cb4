//! Seeded experiment sweeps: phase transitions, noise robustness, FRIP
//! sweeps and bound tables.
//!
//! Every random draw is derived from `base_seed` and the coordinates of the
//! cell it belongs to (`theta`, `s`, `m`) plus the trial index, never from
//! the position of the cell in the grid. Sub-grids of a configuration
//! therefore replay the same trials, and the parallel schedule cannot change
//! any number.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundParams};
use crate::frames::{angle_family, coherence, orthogonal_collection, random_collection, SubspaceCollection};
use crate::io::{self, IoError};
use crate::measurement::{
    add_noise, compose_with_bases, sample_ensemble, Distribution, EnsembleSpec, MeasurementOperator, Normalization,
};
use crate::rip::{self, RipMode};
use crate::seed::{mix, trial_seed};
use crate::signals::{best_s_term, random_sparse_signal, AmplitudeLaw, BlockSignal};
use crate::solver::{solve_equality, solve_noisy, SolverParams, SolverStatus};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PhaseTransition,
    NoiseRobustness,
    FripSweep,
    BoundTable,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::PhaseTransition => "phase_transition",
            ExperimentKind::NoiseRobustness => "noise_robustness",
            ExperimentKind::FripSweep => "frip_sweep",
            ExperimentKind::BoundTable => "bound_table",
        })
    }
}

/// Which subspace collection a sweep runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// Coordinate subspaces; needs `k N <= d`.
    Orthogonal,
    /// [`angle_family`] at each angle; needs `d = k (N + 1)`.
    Angle { thetas: Vec<f64> },
    /// Uniformly random subspaces.
    Random,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Orthogonal => "orthogonal",
            Family::Angle { .. } => "angle",
            Family::Random => "random",
        }
    }

    fn points(&self) -> Vec<Option<f64>> {
        match self {
            Family::Angle { thetas } => thetas.iter().map(|&t| Some(t)).collect(),
            _ => vec![None],
        }
    }
}

/// Whether trials take vector measurements `A (x) I_d` or scalar ones `Phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementModel {
    #[default]
    Vector,
    /// `m x dN` matrix `Phi`.
    Scalar,
}

/// Per-cell ensemble recipe; rows, columns and seed are filled in per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleTemplate {
    #[serde(default = "default_distribution")]
    pub distribution: Distribution,
    #[serde(default = "default_normalization")]
    pub normalization: Normalization,
    #[serde(default)]
    pub model: MeasurementModel,
}

fn default_distribution() -> Distribution {
    Distribution::Gaussian
}

fn default_normalization() -> Normalization {
    Normalization::InvSqrtRows
}

impl Default for EnsembleTemplate {
    fn default() -> Self {
        EnsembleTemplate {
            distribution: default_distribution(),
            normalization: default_normalization(),
            model: MeasurementModel::Vector,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub family: Family,
    pub d: usize,
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub sparsity_grid: Vec<usize>,
    #[serde(default)]
    pub measurement_grid: Vec<usize>,
    #[serde(default)]
    pub ensemble: EnsembleTemplate,
    #[serde(default = "default_trials")]
    pub trials_per_cell: usize,
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
    #[serde(default)]
    pub eta_grid: Vec<f64>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    /// Draw a fresh random collection per trial instead of one per cell.
    /// Deterministic families are unaffected.
    #[serde(default)]
    pub resample_collection: bool,
    #[serde(default = "default_amplitude")]
    pub amplitude: AmplitudeLaw,
    /// Norm scale of the off-support blocks in noise experiments; `0` gives
    /// exactly sparse signals.
    #[serde(default)]
    pub compressible_tail: f64,
    /// Supports sampled per ensemble when the exact FRIP is out of reach.
    #[serde(default = "default_rip_trials")]
    pub rip_trials: usize,
    /// Failure probability used by the reference bounds.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub solver: SolverParams,
}

fn default_trials() -> usize {
    20
}
fn default_success_tol() -> f64 {
    1e-6
}
fn default_amplitude() -> AmplitudeLaw {
    AmplitudeLaw::UnitNormBlocks
}
fn default_rip_trials() -> usize {
    1000
}
fn default_epsilon() -> f64 {
    0.01
}

impl ExperimentConfig {
    /// Config with default settings for the given kind and dimensions.
    pub fn new(experiment: ExperimentKind, family: Family, d: usize, k: usize, n: usize) -> Self {
        ExperimentConfig {
            experiment,
            family,
            d,
            k,
            n,
            sparsity_grid: vec![1],
            measurement_grid: vec![1],
            ensemble: EnsembleTemplate::default(),
            trials_per_cell: default_trials(),
            success_tol: default_success_tol(),
            eta_grid: Vec::new(),
            base_seed: 0,
            output_path: None,
            resample_collection: false,
            amplitude: default_amplitude(),
            compressible_tail: 0.0,
            rip_trials: default_rip_trials(),
            epsilon: default_epsilon(),
            solver: SolverParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let (d, k, n) = (self.d, self.k, self.n);
        if d == 0 || k == 0 || n == 0 || k > d {
            return Err(config_err(format!("need 1 <= k <= d and N >= 1, got d={d} k={k} N={n}")));
        }
        if self.sparsity_grid.is_empty() {
            return Err(config_err("sparsity_grid is empty"));
        }
        if let Some(&s) = self.sparsity_grid.iter().find(|&&s| s == 0 || s > n) {
            return Err(config_err(format!("sparsity_grid: s = {s} outside 1..={n}")));
        }
        if self.experiment != ExperimentKind::BoundTable {
            if self.measurement_grid.is_empty() {
                return Err(config_err("measurement_grid is empty"));
            }
            if self.measurement_grid.contains(&0) {
                return Err(config_err("measurement_grid: m = 0 is not allowed"));
            }
            if self.trials_per_cell == 0 {
                return Err(config_err("trials_per_cell must be at least 1"));
            }
        }
        if !(self.success_tol > 0.0) {
            return Err(config_err(format!("success_tol = {} must be positive", self.success_tol)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(config_err(format!("epsilon = {} must lie in (0, 1)", self.epsilon)));
        }
        if self.experiment == ExperimentKind::NoiseRobustness {
            if self.eta_grid.is_empty() {
                return Err(config_err("eta_grid is empty"));
            }
            if let Some(e) = self.eta_grid.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
                return Err(config_err(format!("eta_grid: {e} is not a nonnegative number")));
            }
        }
        if !(self.compressible_tail >= 0.0) || !self.compressible_tail.is_finite() {
            return Err(config_err("compressible_tail must be nonnegative"));
        }
        if self.experiment == ExperimentKind::FripSweep && self.rip_trials == 0 {
            return Err(config_err("rip_trials must be at least 1"));
        }
        match &self.family {
            Family::Orthogonal if k * n > d => {
                Err(config_err(format!("orthogonal family needs k N <= d, got k N = {} > d = {d}", k * n)))
            }
            Family::Angle { thetas } => {
                if thetas.is_empty() {
                    return Err(config_err("family.thetas is empty"));
                }
                if d != k * (n + 1) {
                    return Err(config_err(format!("angle family needs d = k (N + 1) = {}, got {d}", k * (n + 1))));
                }
                if let Some(t) = thetas.iter().find(|t| !(0.0..=std::f64::consts::FRAC_PI_2).contains(*t)) {
                    return Err(config_err(format!("family.thetas: {t} outside [0, pi/2]")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Parse and validate a JSON config.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let cfg: ExperimentConfig = io::read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ExperimentError> {
    let cfg: ExperimentConfig = io::parse_json(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_config(path: &Path, cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    Ok(io::write_json(path, cfg)?)
}

/// One aggregated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub experiment: ExperimentKind,
    pub family: String,
    pub theta: Option<f64>,
    pub lambda: f64,
    pub d: usize,
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: usize,
    pub m: usize,
    pub eta: Option<f64>,
    pub trials: usize,
    pub successes: usize,
    pub mean_rel_error: f64,
    pub max_rel_error: f64,
    pub mean_iterations: f64,
    pub solver_failures: usize,
    pub base_seed: u64,
}

impl CellResult {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Median and quartiles of `delta_s` over the ensembles of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FripRow {
    pub experiment: ExperimentKind,
    pub family: String,
    pub theta: Option<f64>,
    pub lambda: f64,
    pub d: usize,
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: usize,
    pub m: usize,
    pub trials: usize,
    pub mode: RipMode,
    pub median_delta: f64,
    pub q1_delta: f64,
    pub q3_delta: f64,
    /// Uniform sufficient bound at `C = 1` and the measured `lambda`.
    pub sufficient_uniform_vector: f64,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub experiment: ExperimentKind,
    pub family: String,
    pub theta: Option<f64>,
    pub lambda: f64,
    pub d: usize,
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: usize,
    pub necessary_scalar: f64,
    pub necessary_in_regime: bool,
    pub necessary_vector: f64,
    pub sufficient_scalar: f64,
    pub sufficient_uniform_vector: f64,
    pub sufficient_nonuniform_vector: f64,
    pub lambda_floor: f64,
    pub equiisoclinic_cap: u64,
}

/// Straight-line fits of recovery error against the noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFit {
    pub family: String,
    pub theta: Option<f64>,
    pub s: usize,
    pub m: usize,
    /// Least-squares fit `mean ||x - x_hat||_2 ~ intercept + slope eta`.
    pub slope: f64,
    pub intercept: f64,
    /// Fit of per-trial errors `~ c0 + c1 sigma_s(x)_1 / sqrt(s) + c2 eta`;
    /// `c1` is `None` for exactly sparse signals.
    pub c0: f64,
    pub c1: Option<f64>,
    pub c2: f64,
    pub mean_abs_errors: Vec<f64>,
    pub infeasible_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub rows: Vec<CellResult>,
    pub fits: Vec<NoiseFit>,
}

/// Rows that [`write_results`] can emit; `HEADER` fixes the CSV column order.
pub trait ResultRow: Serialize {
    const HEADER: &'static [&'static str];
}

impl ResultRow for CellResult {
    const HEADER: &'static [&'static str] = &[
        "experiment",
        "family",
        "theta",
        "lambda",
        "d",
        "k",
        "N",
        "s",
        "m",
        "eta",
        "trials",
        "successes",
        "mean_rel_error",
        "max_rel_error",
        "mean_iterations",
        "solver_failures",
        "base_seed",
    ];
}

impl ResultRow for FripRow {
    const HEADER: &'static [&'static str] = &[
        "experiment",
        "family",
        "theta",
        "lambda",
        "d",
        "k",
        "N",
        "s",
        "m",
        "trials",
        "mode",
        "median_delta",
        "q1_delta",
        "q3_delta",
        "sufficient_uniform_vector",
        "base_seed",
    ];
}

impl ResultRow for BoundRow {
    const HEADER: &'static [&'static str] = &[
        "experiment",
        "family",
        "theta",
        "lambda",
        "d",
        "k",
        "N",
        "s",
        "necessary_scalar",
        "necessary_in_regime",
        "necessary_vector",
        "sufficient_scalar",
        "sufficient_uniform_vector",
        "sufficient_nonuniform_vector",
        "lambda_floor",
        "equiisoclinic_cap",
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Rows as CSV text; the header is written even when `rows` is empty.
pub fn results_to_csv<R: ResultRow>(rows: &[R]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(R::HEADER).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn results_to_string<R: ResultRow>(rows: &[R], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => results_to_csv(rows),
        OutputFormat::Json => io::to_json(&rows) + "\n",
    }
}

pub fn write_results<R: ResultRow>(rows: &[R], path: &Path, format: OutputFormat) -> Result<(), IoError> {
    io::write_text(path, &results_to_string(rows, format))
}

/// Read back a file written by [`write_results`].
pub fn read_cell_results(path: &Path, format: OutputFormat) -> Result<Vec<CellResult>, IoError> {
    match format {
        OutputFormat::Json => io::read_json(path),
        OutputFormat::Csv => {
            let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
            let header: Vec<String> = r.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
            if header != CellResult::HEADER {
                return Err(IoError::Schema {
                    field: "header".into(),
                    line: 1,
                    column: 1,
                    message: format!("unexpected columns {header:?}"),
                });
            }
            r.deserialize().collect::<Result<Vec<_>, _>>().map_err(|e| csv_error(path, e))
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> IoError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IoError::Io { path: path.to_path_buf(), source },
        csv::ErrorKind::Deserialize { err, .. } => IoError::Schema {
            field: err
                .field()
                .map_or_else(|| "?".into(), |f| CellResult::HEADER.get(f as usize).unwrap_or(&"?").to_string()),
            line,
            column: err.field().map_or(0, |f| f as usize + 1),
            message: err.to_string(),
        },
        other => IoError::Schema { field: "?".into(), line, column: 0, message: format!("{other:?}") },
    }
}

const TAG_COLLECTION: u64 = 0xC011;
const TAG_SIGNAL: u64 = 0x5164;
const TAG_ENSEMBLE: u64 = 0xE45E;
const TAG_NOISE: u64 = 0x4015E;

/// Family point and trial-independent collection of one sweep.
struct Point {
    theta: Option<f64>,
    /// `None` when collections are drawn per trial.
    fixed: Option<SubspaceCollection>,
}

fn theta_word(theta: Option<f64>) -> u64 {
    theta.map_or(u64::MAX, f64::to_bits)
}

fn collection_for(cfg: &ExperimentConfig, theta: Option<f64>, trial: Option<u64>) -> SubspaceCollection {
    let built = match &cfg.family {
        Family::Orthogonal => orthogonal_collection(cfg.d, cfg.k, cfg.n),
        Family::Angle { .. } => angle_family(cfg.k, cfg.n, theta.expect("angle point")),
        Family::Random => {
            let words = match trial {
                Some(t) => vec![TAG_COLLECTION, t],
                None => vec![TAG_COLLECTION],
            };
            random_collection(cfg.d, cfg.k, cfg.n, mix(cfg.base_seed, &words))
        }
    };
    built.expect("dimensions checked by validate")
}

fn points(cfg: &ExperimentConfig) -> Vec<Point> {
    let per_trial = cfg.resample_collection && cfg.family == Family::Random;
    cfg.family
        .points()
        .into_iter()
        .map(|theta| Point { theta, fixed: (!per_trial).then(|| collection_for(cfg, theta, None)) })
        .collect()
}

fn measured_lambda(c: &SubspaceCollection) -> f64 {
    coherence(c).map_or(0.0, |r| r.lambda)
}

impl Point {
    fn collection(&self, cfg: &ExperimentConfig, trial: usize) -> SubspaceCollection {
        match &self.fixed {
            Some(c) => c.clone(),
            None => collection_for(cfg, self.theta, Some(trial as u64)),
        }
    }

    /// Coherence of the cell's collection, or the mean over trials when
    /// collections are drawn per trial.
    fn lambda(&self, cfg: &ExperimentConfig) -> f64 {
        match &self.fixed {
            Some(c) => measured_lambda(c),
            None => {
                let t = cfg.trials_per_cell;
                (0..t).map(|i| measured_lambda(&self.collection(cfg, i))).sum::<f64>() / t as f64
            }
        }
    }
}

fn cell_key(cfg: &ExperimentConfig, theta: Option<f64>, s: usize, m: usize) -> u64 {
    mix(cfg.base_seed, &[theta_word(theta), s as u64, m as u64])
}

/// Coefficient operator for an `m`-row ensemble drawn from `seed`.
fn sample_operator(
    cfg: &ExperimentConfig,
    c: &SubspaceCollection,
    m: usize,
    seed: u64,
) -> crate::measurement::CoefficientOperator {
    let t = cfg.ensemble;
    let cols = match t.model {
        MeasurementModel::Vector => c.len(),
        MeasurementModel::Scalar => c.ambient_dim() * c.len(),
    };
    let mat = sample_ensemble(&EnsembleSpec { distribution: t.distribution, rows: m, cols, seed })
        .expect("positive dimensions");
    let op = match t.model {
        MeasurementModel::Vector => MeasurementOperator::vector(mat, c.ambient_dim(), t.normalization),
        MeasurementModel::Scalar => MeasurementOperator::scalar(mat, t.normalization),
    };
    compose_with_bases(&op, c).expect("shapes match")
}

/// Signal for a trial: `s` sparse blocks plus an optional compressible tail.
fn trial_signal(cfg: &ExperimentConfig, c: &SubspaceCollection, s: usize, seed: u64) -> BlockSignal {
    let x = random_sparse_signal(c, s, seed, cfg.amplitude).expect("sparsity checked by validate");
    if cfg.compressible_tail == 0.0 || s == c.len() {
        return x;
    }
    let tail = random_sparse_signal(c, c.len(), mix(seed, &[1]), AmplitudeLaw::UnitNormBlocks).expect("full support");
    let mut coeffs = x.coeffs().clone();
    for (j, nrm) in x.block_norms().iter().enumerate() {
        if *nrm == 0.0 {
            let (o, len) = (c.offsets()[j], c.subspace_dim(j));
            // geometric decay keeps the tail well below the head
            let w = cfg.compressible_tail * 0.5f64.powi(j as i32 % 8);
            coeffs.rows_mut(o, len).copy_from(&(tail.block(j) * w));
        }
    }
    x.with_coeffs(coeffs)
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    rel_error: f64,
    abs_error: f64,
    iterations: usize,
    converged: bool,
    failed: bool,
    infeasible: bool,
    sigma: f64,
}

fn run_trial(
    cfg: &ExperimentConfig,
    c: &SubspaceCollection,
    s: usize,
    m: usize,
    seed: u64,
    eta: Option<f64>,
) -> TrialOutcome {
    let x = trial_signal(cfg, c, s, mix(seed, &[TAG_SIGNAL]));
    let b = sample_operator(cfg, c, m, mix(seed, &[TAG_ENSEMBLE]));
    let clean = b.apply(x.coeffs());
    let result = match eta {
        None => solve_equality(&b, &clean, &cfg.solver),
        Some(e) => solve_noisy(&b, &add_noise(&clean, e, mix(seed, &[TAG_NOISE])), e, &cfg.solver),
    };
    let x_norm = x.coeffs().norm();
    let sigma = best_s_term(&x, s).map_or(0.0, |(_, v)| v);
    match result {
        Ok(sol) => {
            let abs_error = (sol.estimate.coeffs() - x.coeffs()).norm();
            TrialOutcome {
                rel_error: abs_error / x_norm,
                abs_error,
                iterations: sol.iterations,
                converged: sol.status == SolverStatus::Converged,
                failed: sol.status != SolverStatus::Converged,
                infeasible: sol.status == SolverStatus::Infeasible,
                sigma,
            }
        }
        // a failed solve counts as the zero estimate
        Err(e) => TrialOutcome {
            rel_error: 1.0,
            abs_error: x_norm,
            iterations: 0,
            converged: false,
            failed: true,
            infeasible: matches!(e, crate::solver::SolverError::Infeasible { .. }),
            sigma,
        },
    }
}

struct CellSpec {
    point: usize,
    s: usize,
    m: usize,
    eta: Option<f64>,
}

fn run_cells(cfg: &ExperimentConfig, pts: &[Point], cells: &[CellSpec]) -> Vec<Vec<TrialOutcome>> {
    let trials = cfg.trials_per_cell;
    let outcomes: Vec<TrialOutcome> = (0..cells.len() * trials)
        .into_par_iter()
        .map(|job| {
            let (cell, t) = (&cells[job / trials], job % trials);
            let p = &pts[cell.point];
            let c = p.collection(cfg, t);
            let seed = trial_seed(cell_key(cfg, p.theta, cell.s, cell.m), 0, t as u64);
            run_trial(cfg, &c, cell.s, cell.m, seed, cell.eta)
        })
        .collect();
    outcomes.chunks(trials).map(<[TrialOutcome]>::to_vec).collect()
}

fn aggregate(cfg: &ExperimentConfig, p: &Point, lambda: f64, cell: &CellSpec, out: &[TrialOutcome]) -> CellResult {
    let trials = out.len();
    let successes = out.iter().filter(|o| o.converged && o.rel_error <= cfg.success_tol).count();
    let mean = |f: fn(&TrialOutcome) -> f64| out.iter().map(f).sum::<f64>() / trials as f64;
    CellResult {
        experiment: cfg.experiment,
        family: cfg.family.name().to_string(),
        theta: p.theta,
        lambda,
        d: cfg.d,
        k: cfg.k,
        n: cfg.n,
        s: cell.s,
        m: cell.m,
        eta: cell.eta,
        trials,
        successes,
        mean_rel_error: mean(|o| o.rel_error),
        max_rel_error: out.iter().map(|o| o.rel_error).fold(0.0, f64::max),
        mean_iterations: mean(|o| o.iterations as f64),
        solver_failures: out.iter().filter(|o| o.failed).count(),
        base_seed: cfg.base_seed,
    }
}

fn check_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<(), ExperimentError> {
    cfg.validate()?;
    if cfg.experiment != kind {
        return Err(config_err(format!("config describes a {} experiment, not {kind}", cfg.experiment)));
    }
    Ok(())
}

/// Exact-recovery success rates over the `(family point, s, m)` grid.
pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<Vec<CellResult>, ExperimentError> {
    check_kind(cfg, ExperimentKind::PhaseTransition)?;
    let pts = points(cfg);
    let mut cells = Vec::new();
    for point in 0..pts.len() {
        for &s in &cfg.sparsity_grid {
            for &m in &cfg.measurement_grid {
                cells.push(CellSpec { point, s, m, eta: None });
            }
        }
    }
    let lambdas: Vec<f64> = pts.iter().map(|p| p.lambda(cfg)).collect();
    let outcomes = run_cells(cfg, &pts, &cells);
    Ok(cells.iter().zip(&outcomes).map(|(c, o)| aggregate(cfg, &pts[c.point], lambdas[c.point], c, o)).collect())
}

/// Least-squares coefficients of `y ~ X beta`.
fn lstsq(x: DMatrix<f64>, y: DVector<f64>) -> DVector<f64> {
    x.svd(true, true).solve(&y, 1e-12).expect("SVD computed with both factors")
}

/// Recovery error as a function of the noise level. Every `eta` reuses the
/// same trial seeds, so the signal, ensemble and noise direction are shared
/// across the grid and only the noise magnitude changes.
pub fn run_noise_robustness(cfg: &ExperimentConfig) -> Result<NoiseReport, ExperimentError> {
    check_kind(cfg, ExperimentKind::NoiseRobustness)?;
    let pts = points(cfg);
    let lambdas: Vec<f64> = pts.iter().map(|p| p.lambda(cfg)).collect();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (point, p) in pts.iter().enumerate() {
        for &s in &cfg.sparsity_grid {
            for &m in &cfg.measurement_grid {
                let cells: Vec<CellSpec> =
                    cfg.eta_grid.iter().map(|&e| CellSpec { point, s, m, eta: Some(e) }).collect();
                let outcomes = run_cells(cfg, &pts, &cells);
                rows.extend(cells.iter().zip(&outcomes).map(|(c, o)| aggregate(cfg, p, lambdas[point], c, o)));
                fits.push(fit_noise(cfg, p, s, m, &outcomes));
            }
        }
    }
    Ok(NoiseReport { rows, fits })
}

fn fit_noise(cfg: &ExperimentConfig, p: &Point, s: usize, m: usize, outcomes: &[Vec<TrialOutcome>]) -> NoiseFit {
    let etas = &cfg.eta_grid;
    let mean_abs_errors: Vec<f64> =
        outcomes.iter().map(|o| o.iter().map(|t| t.abs_error).sum::<f64>() / o.len() as f64).collect();
    let (intercept, slope) = if etas.len() >= 2 {
        let x = DMatrix::from_fn(etas.len(), 2, |i, j| if j == 0 { 1.0 } else { etas[i] });
        let beta = lstsq(x, DVector::from_column_slice(&mean_abs_errors));
        (beta[0], beta[1])
    } else {
        (mean_abs_errors[0], 0.0)
    };
    let pairs: Vec<(f64, &TrialOutcome)> =
        etas.iter().zip(outcomes).flat_map(|(&e, o)| o.iter().map(move |t| (e, t))).collect();
    let compressible = pairs.iter().any(|(_, t)| t.sigma > 0.0);
    let cols = if compressible { 3 } else { 2 };
    let x = DMatrix::from_fn(pairs.len(), cols, |i, j| match (j, compressible) {
        (0, _) => 1.0,
        (1, true) => pairs[i].1.sigma / (s as f64).sqrt(),
        _ => pairs[i].0,
    });
    let y = DVector::from_iterator(pairs.len(), pairs.iter().map(|(_, t)| t.abs_error));
    let beta = lstsq(x, y);
    NoiseFit {
        family: cfg.family.name().to_string(),
        theta: p.theta,
        s,
        m,
        slope,
        intercept,
        c0: beta[0],
        c1: compressible.then(|| beta[1]),
        c2: beta[cols - 1],
        mean_abs_errors,
        infeasible_trials: outcomes.iter().flatten().filter(|t| t.infeasible).count(),
    }
}

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Distribution of `delta_s` over `trials_per_cell` ensembles per cell.
///
/// Uses the exact FRIP when enumeration fits the guards and the Monte Carlo
/// lower bound with `rip_trials` supports otherwise.
pub fn run_frip_sweep(cfg: &ExperimentConfig) -> Result<Vec<FripRow>, ExperimentError> {
    check_kind(cfg, ExperimentKind::FripSweep)?;
    if cfg.ensemble.model != MeasurementModel::Vector {
        return Err(config_err("frip_sweep needs the vector measurement model"));
    }
    let pts = points(cfg);
    let alpha = cfg.ensemble.distribution.subgaussian_constants().tail_alpha;
    let mut rows = Vec::new();
    for p in &pts {
        let lambda = p.lambda(cfg);
        for &s in &cfg.sparsity_grid {
            for &m in &cfg.measurement_grid {
                let key = cell_key(cfg, p.theta, s, m);
                let results: Vec<(f64, RipMode)> = (0..cfg.trials_per_cell)
                    .into_par_iter()
                    .map(|t| {
                        let c = p.collection(cfg, t);
                        let seed = trial_seed(key, 0, t as u64);
                        let a = sample_ensemble(&EnsembleSpec {
                            distribution: cfg.ensemble.distribution,
                            rows: m,
                            cols: c.len(),
                            seed: mix(seed, &[TAG_ENSEMBLE]),
                        })
                        .expect("positive dimensions");
                        let norm = cfg.ensemble.normalization;
                        match rip::exact_frip(&a, &c, s, norm) {
                            Ok(e) => (e.value, e.mode),
                            Err(_) => {
                                let e = rip::mc_frip(&a, &c, s, cfg.rip_trials, mix(seed, &[TAG_COLLECTION]), norm)
                                    .expect("sparsity and trials validated");
                                (e.value, e.mode)
                            }
                        }
                    })
                    .collect();
                let mut deltas: Vec<f64> = results.iter().map(|r| r.0).collect();
                deltas.sort_by(f64::total_cmp);
                let mode =
                    if results.iter().all(|r| r.1 == RipMode::Exact) { RipMode::Exact } else { RipMode::MonteCarlo };
                let reference =
                    bounds::sufficient_uniform_vector(s, cfg.n, cfg.k, lambda.clamp(0.0, 1.0), alpha, cfg.epsilon, 1.0)
                        .map_err(|e| config_err(e.to_string()))?;
                rows.push(FripRow {
                    experiment: cfg.experiment,
                    family: cfg.family.name().to_string(),
                    theta: p.theta,
                    lambda,
                    d: cfg.d,
                    k: cfg.k,
                    n: cfg.n,
                    s,
                    m,
                    trials: cfg.trials_per_cell,
                    mode,
                    median_delta: quantile(&deltas, 0.5),
                    q1_delta: quantile(&deltas, 0.25),
                    q3_delta: quantile(&deltas, 0.75),
                    sufficient_uniform_vector: reference,
                    base_seed: cfg.base_seed,
                });
            }
        }
    }
    Ok(rows)
}

/// Every closed-form bound at each family point and sparsity, with the
/// measured coherence as `lambda`.
pub fn run_bound_table(cfg: &ExperimentConfig) -> Result<Vec<BoundRow>, ExperimentError> {
    check_kind(cfg, ExperimentKind::BoundTable)?;
    let alpha = cfg.ensemble.distribution.subgaussian_constants().tail_alpha;
    let beta = match cfg.ensemble.distribution {
        Distribution::Bernoulli => 1,
        _ => 2,
    };
    let mut rows = Vec::new();
    for p in points(cfg) {
        let lambda = p.lambda(cfg);
        for &s in &cfg.sparsity_grid {
            let params = BoundParams {
                lambda: Some(lambda.clamp(0.0, 1.0)),
                alpha,
                epsilon: cfg.epsilon,
                beta,
                ..BoundParams::new(s, cfg.n, cfg.k, cfg.d)
            };
            let r = bounds::evaluate(&params).map_err(|e| config_err(e.to_string()))?;
            rows.push(BoundRow {
                experiment: cfg.experiment,
                family: cfg.family.name().to_string(),
                theta: p.theta,
                lambda,
                d: cfg.d,
                k: cfg.k,
                n: cfg.n,
                s,
                necessary_scalar: r.necessary_scalar,
                necessary_in_regime: r.necessary_in_regime,
                necessary_vector: r.necessary_vector,
                sufficient_scalar: r.sufficient_scalar,
                sufficient_uniform_vector: r.sufficient_uniform_vector,
                sufficient_nonuniform_vector: r.sufficient_nonuniform_vector,
                lambda_floor: r.lambda_floor,
                equiisoclinic_cap: r.equiisoclinic_cap,
            });
        }
    }
    Ok(rows)
}

/// Smallest `m` in each `(theta, s)` series whose success rate reaches `rate`.
pub fn minimal_measurements(rows: &[CellResult], rate: f64) -> Vec<(Option<f64>, usize, Option<usize>)> {
    let mut keys: Vec<(Option<f64>, usize)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0.map(f64::to_bits) == r.theta.map(f64::to_bits) && k.1 == r.s) {
            keys.push((r.theta, r.s));
        }
    }
    keys.into_iter()
        .map(|(theta, s)| {
            let m = rows
                .iter()
                .filter(|r| r.theta.map(f64::to_bits) == theta.map(f64::to_bits) && r.s == s)
                .filter(|r| r.success_rate() >= rate)
                .map(|r| r.m)
                .min();
            (theta, s, m)
        })
        .collect()
}
