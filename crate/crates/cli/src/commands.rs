use std::path::PathBuf;

use ffsense_core::bounds::{self, BoundParams};
use ffsense_core::experiment::{self, minimal_measurements, ExperimentConfig, ExperimentKind, Family, OutputFormat};
use ffsense_core::frames::{angle_family, coherence, orthogonal_collection, packing_diameter, random_collection};
use ffsense_core::io::{self, CollectionFile, Diagnostics, MatrixFile, SignalFile, VectorFile};
use ffsense_core::measurement::{add_noise, compose_with_bases, sample_ensemble, Distribution};
use ffsense_core::rip::{exact_frip, mc_frip, recovery_sufficient};
use ffsense_core::seed::mix;
use ffsense_core::signals::{random_sparse_signal, AmplitudeLaw};
use ffsense_core::solver::{certify, solve_equality, solve_noisy};
use ffsense_core::{
    BlockSignal, CoefficientOperator, EnsembleSpec, MeasurementOperator, RecoverySolution, RipEstimate, SolverStatus,
    SubspaceCollection,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::error::CliError;
use crate::output::*;
use crate::settings::{read_config, single, Settings};

/// Stream tags for draws derived from `--seed`; generated collections use the seed itself.
const SIGNAL_STREAM: u64 = 1;
const MATRIX_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;
const RIP_STREAM: u64 = 4;

const DEFAULT_RIP_TRIALS: usize = 1000;

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Frames(FramesCmd::Gen(a)) => frames_gen(&Settings::resolve(&a)?),
        Command::Frames(FramesCmd::Coherence(a)) => frames_coherence(&Settings::resolve(&a)?),
        Command::Signal(SignalCmd::Gen(a)) => signal_gen(&Settings::resolve(&a)?),
        Command::Measure(MeasureCmd::Sample(a)) => measure_sample(&Settings::resolve(&a)?),
        Command::Measure(MeasureCmd::Apply(a)) => measure_apply(&Settings::resolve(&a)?),
        Command::Recover(RecoverCmd::Eq(a)) => recover(&Settings::resolve(&a)?, false),
        Command::Recover(RecoverCmd::Noisy(a)) => recover(&Settings::resolve(&a)?, true),
        Command::Rip(RipCmd::Exact(a)) => rip(&Settings::resolve(&a)?, false),
        Command::Rip(RipCmd::Mc(a)) => rip(&Settings::resolve(&a)?, true),
        Command::Bounds(BoundsCmd::Eval(a)) => bounds_eval(&a),
        Command::Experiment(cmd) => {
            let (kind, a) = match cmd {
                ExperimentCmd::Phase(a) => (ExperimentKind::PhaseTransition, a),
                ExperimentCmd::Noise(a) => (ExperimentKind::NoiseRobustness, a),
                ExperimentCmd::Frip(a) => (ExperimentKind::FripSweep, a),
                ExperimentCmd::Bounds(a) => (ExperimentKind::BoundTable, a),
            };
            run_experiment(kind, &a)
        }
    }
}

fn require<T: Copy>(value: Option<T>, name: &str) -> Result<T, CliError> {
    Settings::require(value, name)
}

fn write(st: &Settings, text: &str) -> Result<(), CliError> {
    emit(st.out.as_deref(), text)
}

fn collection(st: &Settings) -> Result<SubspaceCollection, CliError> {
    if let Some(path) = &st.collection {
        return Ok(io::read_collection(path)?);
    }
    let k = require(st.k, "k")?;
    let n = require(st.n, "N")?;
    let c = match st.family.unwrap_or(if st.theta.is_some() { FamilyArg::Angle } else { FamilyArg::Random }) {
        FamilyArg::Random => random_collection(require(st.d, "d")?, k, n, st.seed())?,
        FamilyArg::Orthogonal => orthogonal_collection(require(st.d, "d")?, k, n)?,
        FamilyArg::Angle => {
            if let Some(d) = st.d.filter(|&d| d != k * (n + 1)) {
                return Err(CliError::Config(format!(
                    "the angle family lives in d = k (N + 1) = {}, got d = {d}",
                    k * (n + 1)
                )));
            }
            angle_family(k, n, require(st.theta, "theta")?)?
        }
    };
    Ok(c)
}

fn matrix(st: &Settings, cols: usize) -> Result<DMatrix<f64>, CliError> {
    let a = match &st.matrix {
        Some(path) => io::read_matrix(path)?,
        None => sample_ensemble(&EnsembleSpec {
            distribution: st.distribution.unwrap_or(Distribution::Gaussian),
            rows: require(st.m, "m")?,
            cols,
            seed: mix(st.seed(), &[MATRIX_STREAM]),
        })?,
    };
    if a.ncols() != cols {
        return Err(CliError::Config(format!(
            "matrix has {} columns but the collection has {cols} subspaces",
            a.ncols()
        )));
    }
    Ok(a)
}

fn signal(st: &Settings, c: &SubspaceCollection) -> Result<BlockSignal, CliError> {
    match &st.signal {
        Some(path) => Ok(io::read_json::<SignalFile>(path)?.into_signal_for(c)?),
        None => Ok(random_sparse_signal(
            c,
            require(st.s, "s")?,
            mix(st.seed(), &[SIGNAL_STREAM]),
            st.amplitude.unwrap_or(AmplitudeLaw::UnitNormBlocks),
        )?),
    }
}

fn operator(st: &Settings, a: DMatrix<f64>, c: &SubspaceCollection) -> Result<CoefficientOperator, CliError> {
    let op = MeasurementOperator::vector(a, c.ambient_dim(), st.normalization());
    Ok(compose_with_bases(&op, c)?)
}

fn noisy(st: &Settings, y: DVector<f64>) -> Result<DVector<f64>, CliError> {
    match st.eta {
        Some(eta) if !eta.is_finite() || eta < 0.0 => {
            Err(CliError::Config(format!("eta must be a nonnegative number, got {eta}")))
        }
        Some(eta) => Ok(add_noise(&y, eta, mix(st.seed(), &[NOISE_STREAM]))),
        None => Ok(y),
    }
}

fn frames_gen(st: &Settings) -> Result<(), CliError> {
    let c = collection(st)?;
    write(st, &render(st.format(), &CollectionFile::from_collection(&c), || collection_entries(&c)))
}

fn frames_coherence(st: &Settings) -> Result<(), CliError> {
    let c = collection(st)?;
    let report = coherence(&c)?;
    let row = CoherenceRow {
        n: c.len(),
        d: c.ambient_dim(),
        k: c.block_dim(),
        lambda: report.lambda,
        pair_i: report.argmax_pair.0,
        pair_j: report.argmax_pair.1,
        min_principal_angle: report.min_principal_angle,
        packing_diameter: packing_diameter(&c)?,
        lambda_floor: if c.is_uniform() {
            bounds::lambda_lower_bound(c.ambient_dim(), c.block_dim(), c.len()).ok()
        } else {
            None
        },
    };
    write(st, &render(st.format(), &row, || vec![row.clone()]))
}

fn signal_gen(st: &Settings) -> Result<(), CliError> {
    let c = collection(st)?;
    let x = signal(st, &c)?;
    write(st, &render(st.format(), &SignalFile::from_signal(&x), || signal_entries(&x)))
}

fn measure_sample(st: &Settings) -> Result<(), CliError> {
    let cols = match (&st.collection, st.n) {
        (Some(_), _) => collection(st)?.len(),
        (None, n) => require(n, "N")?,
    };
    let a = matrix(st, cols)?;
    write(st, &render(st.format(), &MatrixFile::from_matrix(&a), || matrix_entries(&a)))
}

fn measure_apply(st: &Settings) -> Result<(), CliError> {
    let c = collection(st)?;
    let a = matrix(st, c.len())?;
    let x = signal(st, &c)?;
    let b = operator(st, a, &c)?;
    let y = noisy(st, b.apply(x.coeffs()))?;
    write(st, &render(st.format(), &VectorFile::from_vector(&y), || vector_entries(&y)))
}

#[derive(Serialize)]
struct RecoverOutput {
    estimate: SignalFile,
    diagnostics: Diagnostics,
    certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_error: Option<f64>,
}

fn recover(st: &Settings, with_noise: bool) -> Result<(), CliError> {
    let c = collection(st)?;
    let a = matrix(st, c.len())?;
    let b = operator(st, a, &c)?;
    let (y, truth) = match &st.measurements {
        Some(path) => (io::read_vector(path)?, None),
        None => {
            let x = signal(st, &c)?;
            let y = b.apply(x.coeffs());
            (if with_noise { noisy(st, y)? } else { y }, Some(x))
        }
    };
    let params = st.solver();
    let sol: RecoverySolution = if with_noise {
        solve_noisy(&b, &y, require(st.eta, "eta")?, &params)?
    } else {
        solve_equality(&b, &y, &params)?
    };
    let cert = certify(&sol, &b, &y);
    if sol.status != SolverStatus::Converged {
        eprintln!("ffsense: solver stopped with status {:?} after {} iterations", sol.status, sol.iterations);
    }
    let rel_error = truth.map(|x| {
        let norm = x.coeffs().norm();
        let err = (sol.estimate.coeffs() - x.coeffs()).norm();
        if norm > 0.0 {
            err / norm
        } else {
            err
        }
    });
    let out = RecoverOutput {
        estimate: SignalFile::from_signal(&sol.estimate),
        diagnostics: Diagnostics::from_solution(&sol),
        certified: cert.passed,
        rel_error,
    };
    write(st, &render(st.format(), &out, || vec![RecoveryRow::new(&out.diagnostics, cert.passed, rel_error)]))
}

fn rip(st: &Settings, monte_carlo: bool) -> Result<(), CliError> {
    let c = collection(st)?;
    let a = matrix(st, c.len())?;
    let s = require(st.s, "s")?;
    let est: RipEstimate = if monte_carlo {
        let trials = st.trials.unwrap_or(DEFAULT_RIP_TRIALS);
        mc_frip(&a, &c, s, trials, mix(st.seed(), &[RIP_STREAM]), st.normalization())?
    } else {
        exact_frip(&a, &c, s, st.normalization())?
    };
    let row = RipRow {
        s: est.s,
        value: est.value,
        mode: est.mode,
        supports_evaluated: est.supports_evaluated,
        worst_support: est.worst_support.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
        below_recovery_threshold: recovery_sufficient(&est).ok(),
    };
    write(st, &render(st.format(), &est, || vec![row]))
}

/// Bound inputs; every field may come from `--config` or a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundSettings {
    s: Option<usize>,
    #[serde(rename = "N")]
    n: Option<usize>,
    k: Option<usize>,
    d: Option<usize>,
    lambda: Option<f64>,
    alpha: Option<f64>,
    delta: Option<f64>,
    epsilon: Option<f64>,
    beta: Option<u32>,
    c: Option<f64>,
    mu_f: Option<f64>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
}

const NECESSARY_REGIME: &str = "4s-sparse uniform recovery";

#[derive(Serialize)]
struct BoundsOutput {
    #[serde(flatten)]
    report: ffsense_core::BoundReport,
    necessary_regime: &'static str,
}

fn bounds_eval(a: &BoundsArgs) -> Result<(), CliError> {
    let file = match &a.common.config {
        Some(path) => read_config::<BoundSettings>(path)?,
        None => BoundSettings::default(),
    };
    let cm = &a.common;
    let s = require(single(&cm.s, "s")?.or(file.s), "s")?;
    let mut p = BoundParams::new(
        s,
        require(cm.n.or(file.n), "N")?,
        require(cm.k.or(file.k), "k")?,
        require(cm.d.or(file.d), "d")?,
    );
    p.lambda = a.lambda.or(file.lambda);
    p.alpha = a.alpha.or(file.alpha).unwrap_or(p.alpha);
    p.delta = a.delta.or(file.delta).unwrap_or(p.delta);
    p.epsilon = a.epsilon.or(file.epsilon).unwrap_or(p.epsilon);
    p.beta = a.beta.or(file.beta).unwrap_or(p.beta);
    p.c = a.c.or(file.c).unwrap_or(p.c);
    p.mu_f = a.mu_f.or(file.mu_f).unwrap_or(p.mu_f);
    let report = bounds::evaluate(&p)?;
    let r = &report;
    let row = BoundsRow {
        s: p.s,
        n: p.n,
        k: p.k,
        d: p.d,
        lambda: r.parameters.lambda,
        necessary_scalar: r.necessary_scalar,
        necessary_regime: NECESSARY_REGIME,
        necessary_in_regime: r.necessary_in_regime,
        necessary_vector: r.necessary_vector,
        sufficient_scalar: r.sufficient_scalar,
        sufficient_uniform_vector: r.sufficient_uniform_vector,
        sufficient_nonuniform_vector: r.sufficient_nonuniform_vector,
        lambda_floor: r.lambda_floor,
        equiisoclinic_cap: r.equiisoclinic_cap,
        mu_f_sparsity_cap: Some(r.mu_f_sparsity_cap).filter(|v| v.is_finite()),
    };
    let format = cm.format.map(Into::into).or(file.format).unwrap_or(OutputFormat::Json);
    let out = cm.out.clone().or(file.out);
    let json = BoundsOutput { report: report.clone(), necessary_regime: NECESSARY_REGIME };
    emit(out.as_deref(), &render(format, &json, || vec![row]))
}

fn experiment_config(kind: ExperimentKind, a: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let cm = &a.common;
    let mut cfg = match &cm.config {
        Some(path) => {
            let cfg = experiment::load_config(path)?;
            if cfg.experiment != kind {
                return Err(CliError::Config(format!(
                    "{} holds a `{}` experiment, not `{kind}`",
                    path.display(),
                    cfg.experiment
                )));
            }
            cfg
        }
        None => {
            let k = require(cm.k, "k")?;
            let n = require(cm.n, "N")?;
            let angle = a.family == Some(FamilyArg::Angle) || (a.family.is_none() && !a.theta.is_empty());
            let d = match cm.d {
                Some(d) => d,
                None if angle => k * (n + 1),
                None => return Err(CliError::Config("missing `d` (flag --d or config field)".into())),
            };
            let cfg = ExperimentConfig::new(kind, Family::Random, d, k, n);
            if cm.s.is_empty() {
                return Err(CliError::Config("missing `s` (flag --s or config field)".into()));
            }
            if cm.m.is_empty() && kind != ExperimentKind::BoundTable {
                return Err(CliError::Config("missing `m` (flag --m or config field)".into()));
            }
            cfg
        }
    };
    if let Some(v) = cm.d {
        cfg.d = v;
    }
    if let Some(v) = cm.k {
        cfg.k = v;
    }
    if let Some(v) = cm.n {
        cfg.n = v;
    }
    if !cm.s.is_empty() {
        cfg.sparsity_grid = cm.s.clone();
    }
    if !cm.m.is_empty() {
        cfg.measurement_grid = cm.m.clone();
    }
    if let Some(v) = cm.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = &cm.out {
        cfg.output_path = Some(v.display().to_string());
    }
    let family = a.family.or((!a.theta.is_empty()).then_some(FamilyArg::Angle));
    match family {
        Some(FamilyArg::Random) => cfg.family = Family::Random,
        Some(FamilyArg::Orthogonal) => cfg.family = Family::Orthogonal,
        Some(FamilyArg::Angle) => {
            let thetas = match (&cfg.family, a.theta.is_empty()) {
                (_, false) => a.theta.clone(),
                (Family::Angle { thetas }, true) => thetas.clone(),
                _ => return Err(CliError::Config("the angle family needs --theta".into())),
            };
            cfg.family = Family::Angle { thetas };
        }
        None => {}
    }
    if !a.eta.is_empty() {
        cfg.eta_grid = a.eta.clone();
    }
    if let Some(v) = a.trials {
        cfg.trials_per_cell = v;
    }
    if let Some(v) = a.distribution {
        cfg.ensemble.distribution = v.into();
    }
    if a.resample_collection {
        cfg.resample_collection = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_experiment(kind: ExperimentKind, a: &ExperimentArgs) -> Result<(), CliError> {
    let cfg = experiment_config(kind, a)?;
    let format = a.common.format.map(Into::into).unwrap_or(OutputFormat::Csv);
    let out = cfg.output_path.as_ref().map(PathBuf::from);
    let text = match kind {
        ExperimentKind::PhaseTransition => {
            let rows = experiment::run_phase_transition(&cfg)?;
            for (theta, s, m) in minimal_measurements(&rows, 0.95) {
                let theta = theta.map(|t| format!(" theta={t}")).unwrap_or_default();
                let m = m.map(|m| m.to_string()).unwrap_or_else(|| "none".into());
                eprintln!("m* (95% success){theta} s={s}: {m}");
            }
            experiment::results_to_string(&rows, format)
        }
        ExperimentKind::NoiseRobustness => {
            let report = experiment::run_noise_robustness(&cfg)?;
            for f in &report.fits {
                let theta = f.theta.map(|t| format!(" theta={t}")).unwrap_or_default();
                eprintln!("fit{theta} s={} m={}: slope {:e}, intercept {:e}", f.s, f.m, f.slope, f.intercept);
            }
            match format {
                OutputFormat::Csv => experiment::results_to_string(&report.rows, format),
                OutputFormat::Json => io::to_json(&report),
            }
        }
        ExperimentKind::FripSweep => experiment::results_to_string(&experiment::run_frip_sweep(&cfg)?, format),
        ExperimentKind::BoundTable => experiment::results_to_string(&experiment::run_bound_table(&cfg)?, format),
    };
    emit(out.as_deref(), &text)
}
