use std::path::{Path, PathBuf};

use ffsense_core::experiment::OutputFormat;
use ffsense_core::io::{self, IoError};
use ffsense_core::measurement::{Distribution, Normalization};
use ffsense_core::signals::AmplitudeLaw;
use ffsense_core::SolverParams;
use serde::Deserialize;

use crate::args::{Common, FamilyArg, InstanceArgs};
use crate::error::CliError;

/// Single-instance settings; every field may come from `--config` or a flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub d: Option<usize>,
    pub k: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub s: Option<usize>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub collection: Option<PathBuf>,
    pub family: Option<FamilyArg>,
    pub theta: Option<f64>,
    pub matrix: Option<PathBuf>,
    pub signal: Option<PathBuf>,
    pub measurements: Option<PathBuf>,
    pub distribution: Option<Distribution>,
    pub normalization: Option<Normalization>,
    pub amplitude: Option<AmplitudeLaw>,
    pub eta: Option<f64>,
    pub trials: Option<usize>,
    pub solver: Option<SolverParams>,
}

/// A single value from a list flag; experiments are the only place grids are allowed.
pub fn single(values: &[usize], flag: &str) -> Result<Option<usize>, CliError> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => Err(CliError::Config(format!("--{flag} takes one value here, got {}", values.len()))),
    }
}

/// Parse a JSON config file, keeping I/O and content errors apart.
pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    io::read_json(path).map_err(|e| match e {
        IoError::Io { .. } => CliError::Io(e.to_string()),
        other => CliError::Config(format!("{}: {other}", path.display())),
    })
}

impl Settings {
    pub fn from_flags(a: &InstanceArgs) -> Result<Self, CliError> {
        let c: &Common = &a.common;
        let solver_flags = a.max_iters.is_some() || a.tol_gap.is_some() || a.rho.is_some();
        Ok(Settings {
            d: c.d,
            k: c.k,
            n: c.n,
            s: single(&c.s, "s")?,
            m: single(&c.m, "m")?,
            seed: c.seed,
            out: c.out.clone(),
            format: c.format.map(Into::into),
            collection: a.collection.clone(),
            family: a.family,
            theta: a.theta,
            matrix: a.matrix.clone(),
            signal: a.signal.clone(),
            measurements: a.measurements.clone(),
            distribution: a.distribution.map(Into::into),
            normalization: a.normalization.map(Into::into),
            amplitude: a.amplitude.map(Into::into),
            eta: a.eta,
            trials: a.trials,
            solver: solver_flags.then(SolverParams::default),
        })
    }

    /// Flags from the command line over the config file, if any.
    pub fn resolve(a: &InstanceArgs) -> Result<Self, CliError> {
        let flags = Settings::from_flags(a)?;
        let base = match &a.common.config {
            Some(path) => read_config::<Settings>(path)?,
            None => Settings::default(),
        };
        let mut s = base.overlay(flags);
        if let Some(p) = s.solver.as_mut() {
            if let Some(v) = a.max_iters {
                p.max_iters = v;
            }
            if let Some(v) = a.tol_gap {
                p.tol_gap = v;
            }
            if let Some(v) = a.rho {
                p.rho = v;
            }
        }
        Ok(s)
    }

    fn overlay(self, top: Settings) -> Settings {
        Settings {
            d: top.d.or(self.d),
            k: top.k.or(self.k),
            n: top.n.or(self.n),
            s: top.s.or(self.s),
            m: top.m.or(self.m),
            seed: top.seed.or(self.seed),
            out: top.out.or(self.out),
            format: top.format.or(self.format),
            collection: top.collection.or(self.collection),
            family: top.family.or(self.family),
            theta: top.theta.or(self.theta),
            matrix: top.matrix.or(self.matrix),
            signal: top.signal.or(self.signal),
            measurements: top.measurements.or(self.measurements),
            distribution: top.distribution.or(self.distribution),
            normalization: top.normalization.or(self.normalization),
            amplitude: top.amplitude.or(self.amplitude),
            eta: top.eta.or(self.eta),
            trials: top.trials.or(self.trials),
            // the file's solver block is the base that solver flags edit
            solver: self.solver.or(top.solver),
        }
    }

    pub fn require<T: Copy>(value: Option<T>, name: &str) -> Result<T, CliError> {
        value.ok_or_else(|| CliError::Config(format!("missing `{name}` (flag --{name} or config field)")))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn format(&self) -> OutputFormat {
        self.format.unwrap_or(OutputFormat::Json)
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization.unwrap_or(Normalization::InvSqrtRows)
    }

    pub fn solver(&self) -> SolverParams {
        self.solver.unwrap_or_default()
    }
}
