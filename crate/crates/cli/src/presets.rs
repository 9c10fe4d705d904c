//! Pinned run configurations, one per checked claim, with the acceptance
//! criterion each one belongs to.

use std::f64::consts::PI;

use rqbm_core::langevin::{EnsembleConfig, InitialDistribution};
use rqbm_core::madelung::{ChemicalForm, Variant};
use rqbm_core::phase_space::{Mode, MomentumGrid};
use rqbm_core::smoluchowski::Closure;
use rqbm_core::{Grid, PhysicalSystem, Potential};

use crate::config::{
    DensityInit, EffpotJob, Job, PhaseInit, PhaseSpaceJob, RunConfig, SmoluchowskiJob, WaveInit, WaveJob,
    SCHEMA_VERSION,
};
use crate::error::{CliError, CliResult};

pub struct PresetInfo {
    pub name: &'static str,
    pub criterion: usize,
    pub claim: &'static str,
}

pub const PRESETS: [PresetInfo; 8] = [
    PresetInfo {
        name: "juttner_equilibrium",
        criterion: 2,
        claim: "Langevin ensemble relaxes to the Juttner momentum density",
    },
    PresetInfo {
        name: "moyal_harmonic",
        criterion: 4,
        claim: "Wigner force term equals the classical one for a quadratic potential",
    },
    PresetInfo {
        name: "planewave_flux",
        criterion: 5,
        claim: "plane-wave flux velocity (hbar k/m)(1 - 2 lambda_C^2 k^2)",
    },
    PresetInfo {
        name: "double_well_barrier",
        criterion: 8,
        claim: "double-well effective potential with barrier and zero-barrier temperature",
    },
    PresetInfo { name: "cosine_tunneling", criterion: 8, claim: "cosine effective potential suppression factor" },
    PresetInfo {
        name: "barometric_factor",
        criterion: 9,
        claim: "quantum potential raised by (T_g/T)^2 in a gravitational field",
    },
    PresetInfo {
        name: "c_infinity_reduction",
        criterion: 10,
        claim: "relativistic overdamped equation approaches the nonrelativistic one as c^-2",
    },
    PresetInfo {
        name: "cubic_friction_stationary",
        criterion: 11,
        claim: "cubic-friction flux vanishes at the stationary density",
    },
];

pub fn info(name: &str) -> CliResult<&'static PresetInfo> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        CliError::Config(format!("unknown preset `{name}`; valid presets: {}", names.join(", ")))
    })
}

fn centered(n: usize, length: f64) -> Grid {
    Grid { n, x_min: -0.5 * length, length }
}

fn config(system: PhysicalSystem, potential: Potential, job: Job) -> RunConfig {
    RunConfig { schema_version: SCHEMA_VERSION, system, potential, job }
}

fn overdamped(system: PhysicalSystem) -> RunConfig {
    config(
        system,
        Potential::Harmonic { k: 1.0 },
        Job::Smoluchowski(SmoluchowskiJob {
            grid: centered(80, 20.0),
            initial: DensityInit::Gaussian { x0: 0.5, sigma: 0.7 },
            variant: Variant::QuantumRelativistic,
            form: ChemicalForm::QExpressed,
            closure: Closure::SelfConsistent,
            dt: 2e-4,
            n_steps: None,
            snapshot_every: None,
            tol: Some(1e-11),
            max_steps: None,
        }),
    )
}

pub fn preset(name: &str) -> CliResult<RunConfig> {
    let natural = PhysicalSystem::natural();
    let cfg = match info(name)?.name {
        "juttner_equilibrium" => config(
            natural,
            Potential::Free,
            Job::Langevin(EnsembleConfig {
                n_particles: 200_000,
                dt: 1e-3,
                n_steps: 50_000,
                seed: 2024,
                init: InitialDistribution::Delta { r: 0.0, p: 0.0 },
                record_every: 1000,
            }),
        ),
        "moyal_harmonic" => config(
            natural,
            Potential::Harmonic { k: 1.0 },
            Job::Wigner(PhaseSpaceJob {
                grid: centered(64, 16.0),
                momentum: MomentumGrid { n: 128, p_max: 12.0 },
                mode: Some(Mode::WignerKramers),
                initial: PhaseInit::Gaussian { x0: 0.5, p0: -0.4, sigma_x: 0.8, sigma_p: 1.0 },
                dt: 1e-3,
                n_steps: 1000,
                snapshot_every: Some(250),
            }),
        ),
        "planewave_flux" => config(
            natural,
            Potential::Free,
            Job::Schrodinger(WaveJob {
                grid: Grid { n: 32, x_min: 0.0, length: 32.0 * PI },
                initial: WaveInit::PlaneWave { k: 1.0 / 16.0 },
                dt: 1e-2,
                n_steps: 100,
                snapshot_every: None,
            }),
        ),
        "double_well_barrier" => config(
            PhysicalSystem { kb_t: 25.0, c: 10.0, ..natural },
            Potential::DoubleWell { alpha: 1.0, beta: 1.0 },
            Job::Effpot(EffpotJob { grid: centered(256, 4.0) }),
        ),
        "cosine_tunneling" => config(
            PhysicalSystem { kb_t: 0.3, c: 4.0, ..natural },
            Potential::Cosine { u0: 0.7, q: 2.0 * PI / 2.5 },
            Job::Effpot(EffpotJob { grid: centered(128, 10.0) }),
        ),
        "barometric_factor" => config(
            PhysicalSystem { c: 10.0, ..natural },
            Potential::LinearGravity { mg: 1.0 },
            Job::Effpot(EffpotJob { grid: centered(64, 4.0) }),
        ),
        "c_infinity_reduction" => overdamped(PhysicalSystem { c: 10.0, ..natural }),
        "cubic_friction_stationary" => overdamped(PhysicalSystem { c: 10.0, b3: 1.0, ..natural }),
        _ => unreachable!("names come from PRESETS"),
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_a_valid_config() {
        for p in &PRESETS {
            let cfg = preset(p.name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg, "{}", p.name);
        }
    }

    #[test]
    fn claims_are_single_csv_cells() {
        assert!(PRESETS.iter().all(|p| !p.claim.contains(',') && !p.claim.contains('"')));
    }

    #[test]
    fn unknown_preset_lists_valid_names() {
        let msg = preset("nope").unwrap_err().to_string();
        assert!(msg.contains("nope") && PRESETS.iter().all(|p| msg.contains(p.name)));
    }
}
