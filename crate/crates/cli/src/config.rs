//! Run configuration files.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "system": {"m": 1.0, "c": 10.0, "kb_t": 1.0},
//!   "potential": {"type": "harmonic", "k": 1.0},
//!   "job": {"smoluchowski": {"grid": {"n": 80, "x_min": -10.0, "length": 20.0},
//!                            "initial": {"type": "gaussian", "x0": 0.5, "sigma": 0.7},
//!                            "dt": 2e-4}}
//! }
//! ```
//! Unknown keys anywhere are rejected. Omitted `system` fields take natural units.

use std::path::Path;

use rqbm_core::langevin::EnsembleConfig;
use rqbm_core::madelung::{ChemicalForm, Variant};
use rqbm_core::phase_space::{Mode, MomentumGrid};
use rqbm_core::smoluchowski::Closure;
use rqbm_core::{Grid, PhysicalSystem, Potential};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub system: PhysicalSystem,
    #[serde(default)]
    pub potential: Potential,
    pub job: Job,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Job {
    Langevin(EnsembleConfig),
    Kramers(PhaseSpaceJob),
    Wigner(PhaseSpaceJob),
    Schrodinger(WaveJob),
    Madelung(HydroJob),
    Smoluchowski(SmoluchowskiJob),
    Effpot(EffpotJob),
}

impl Job {
    /// The subcommand that runs this job.
    pub fn command(&self) -> &'static str {
        match self {
            Job::Langevin(_) => "langevin",
            Job::Kramers(_) => "kramers",
            Job::Wigner(_) => "wigner",
            Job::Schrodinger(_) => "schrodinger",
            Job::Madelung(_) => "madelung",
            Job::Smoluchowski(_) => "smoluchowski",
            Job::Effpot(_) => "effpot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpaceJob {
    pub grid: Grid,
    pub momentum: MomentumGrid,
    /// `kramers` jobs default to `kramers`, `wigner` jobs to `wigner_kramers`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub initial: PhaseInit,
    pub dt: f64,
    pub n_steps: usize,
    /// Snapshot interval in steps; the first and last states are always written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseInit {
    Juttner,
    Gaussian { x0: f64, p0: f64, sigma_x: f64, sigma_p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveJob {
    pub grid: Grid,
    pub initial: WaveInit,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaveInit {
    Gaussian { x0: f64, p0: f64, sigma: f64 },
    CoherentState { omega: f64, x0: f64, p0: f64 },
    PlaneWave { k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroJob {
    pub grid: Grid,
    pub initial: WaveInit,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub form: ChemicalForm,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
}

/// With `n_steps` the density is advanced for exactly that many steps; without it
/// the run continues until `max |d rho/dt| < tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoluchowskiJob {
    pub grid: Grid,
    pub initial: DensityInit,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub form: ChemicalForm,
    #[serde(default)]
    pub closure: Closure,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityInit {
    Gaussian { x0: f64, sigma: f64 },
    Boltzmann,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffpotJob {
    pub grid: Grid,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialise")
    }

    /// Checks that need no solver: schema version and parameter ranges.
    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.system.validate()?;
        self.potential.validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config(format!("`{name}` must be positive, got {v}")))
            }
        };
        let interval = |every: Option<usize>| match every {
            Some(0) => Err(CliError::Config("`snapshot_every` must be at least 1".into())),
            _ => Ok(()),
        };
        match &self.job {
            Job::Langevin(e) => e.validate()?,
            Job::Kramers(j) | Job::Wigner(j) => {
                j.grid.validate()?;
                j.momentum.validate()?;
                positive("dt", j.dt)?;
                interval(j.snapshot_every)?;
                match (&self.job, j.mode) {
                    (Job::Kramers(_), Some(m)) if m != Mode::Kramers => {
                        return Err(CliError::Config(format!("a kramers job cannot use mode {m:?}; use a wigner job")))
                    }
                    (Job::Wigner(_), Some(Mode::Kramers)) => {
                        return Err(CliError::Config("a wigner job needs a Wigner mode".into()))
                    }
                    _ => {}
                }
            }
            Job::Schrodinger(j) => {
                j.grid.validate()?;
                positive("dt", j.dt)?;
                interval(j.snapshot_every)?;
            }
            Job::Madelung(j) => {
                j.grid.validate()?;
                positive("dt", j.dt)?;
                interval(j.snapshot_every)?;
            }
            Job::Smoluchowski(j) => {
                j.grid.validate()?;
                positive("dt", j.dt)?;
                interval(j.snapshot_every)?;
                if let Some(tol) = j.tol {
                    positive("tol", tol)?;
                }
                if j.n_steps.is_some() && (j.tol.is_some() || j.max_steps.is_some()) {
                    return Err(CliError::Config("give either `n_steps` or `tol`/`max_steps`, not both".into()));
                }
            }
            Job::Effpot(j) => j.grid.validate()?,
        }
        Ok(())
    }
}
