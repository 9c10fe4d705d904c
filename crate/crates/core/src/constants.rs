//! Physical parameters, CODATA constants and derived length and temperature scales.
//!
//! Solvers work in natural units (`m = c = hbar = k_B = 1` unless overridden);
//! SI values only appear here.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};

/// CODATA 2018 recommended values (NIST snapshot of May 2019), SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodataConstants {
    /// Reduced Planck constant (J s)
    pub hbar: f64,
    /// Speed of light in vacuum (m/s)
    pub c: f64,
    /// Boltzmann constant (J/K)
    pub k_b: f64,
    /// Newtonian constant of gravitation (m^3 kg^-1 s^-2)
    pub g_newton: f64,
    /// Standard acceleration of gravity (m/s^2)
    pub g_standard: f64,
    /// Electron mass (kg)
    pub m_e: f64,
    /// Classical electron radius (m)
    pub r_e: f64,
}

pub const CODATA_2018: CodataConstants = CodataConstants {
    hbar: 1.054_571_817e-34,
    c: 299_792_458.0,
    k_b: 1.380_649e-23,
    g_newton: 6.674_30e-11,
    g_standard: 9.806_65,
    m_e: 9.109_383_701_5e-31,
    r_e: 2.817_940_326_2e-15,
};

impl Default for CodataConstants {
    fn default() -> Self {
        CODATA_2018
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitSystem {
    #[default]
    Natural,
    Si,
}

/// Particle and bath parameters.
///
/// `kb_t` is the thermal energy `k_B T`; `b` the linear friction coefficient and
/// `b3` the coefficient of the macroscopic cubic friction force `-b3 V^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalSystem {
    pub m: f64,
    pub c: f64,
    pub hbar: f64,
    pub kb_t: f64,
    pub b: f64,
    pub b3: f64,
    pub units: UnitSystem,
}

impl Default for PhysicalSystem {
    fn default() -> Self {
        Self::natural()
    }
}

impl PhysicalSystem {
    /// `m = c = hbar = k_B T = b = 1`, no cubic friction.
    pub const fn natural() -> Self {
        Self { m: 1.0, c: 1.0, hbar: 1.0, kb_t: 1.0, b: 1.0, b3: 0.0, units: UnitSystem::Natural }
    }

    /// An electron in SI units at temperature `t_kelvin` without friction.
    pub fn electron_si(t_kelvin: f64) -> Self {
        let k = CODATA_2018;
        Self { m: k.m_e, c: k.c, hbar: k.hbar, kb_t: k.k_b * t_kelvin, b: 0.0, b3: 0.0, units: UnitSystem::Si }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("m", self.m)?;
        require_positive("c", self.c)?;
        require_positive("hbar", self.hbar)?;
        require_non_negative("kb_t", self.kb_t)?;
        require_non_negative("b", self.b)?;
        require_non_negative("b3", self.b3)
    }

    /// Boltzmann constant in the unit system of `self`.
    pub fn k_b(&self) -> f64 {
        match self.units {
            UnitSystem::Natural => 1.0,
            UnitSystem::Si => CODATA_2018.k_b,
        }
    }

    /// Temperature `T = k_B T / k_B`.
    pub fn temperature(&self) -> f64 {
        self.kb_t / self.k_b()
    }

    /// Copy of `self` at absolute temperature `t`.
    pub fn at_temperature(&self, t: f64) -> Self {
        Self { kb_t: self.k_b() * t, ..*self }
    }
}

/// Compton wavelength in the convention `lambda_C = hbar / (2 m c)`.
pub fn compton_wavelength(sys: &PhysicalSystem) -> Result<f64> {
    if !(sys.m > 0.0 && sys.c > 0.0) {
        return Err(Error::Domain(format!("Compton wavelength needs m > 0 and c > 0 (m = {}, c = {})", sys.m, sys.c)));
    }
    Ok(sys.hbar / (2.0 * sys.m * sys.c))
}

/// Thermal de Broglie wavelength `lambda_T = hbar / (2 sqrt(m k_B T))`.
pub fn thermal_wavelength(sys: &PhysicalSystem) -> Result<f64> {
    if !(sys.m > 0.0) {
        return Err(Error::Domain(format!("thermal wavelength needs m > 0, got {}", sys.m)));
    }
    if !(sys.kb_t > 0.0) {
        return Err(Error::Domain("thermal wavelength diverges at zero temperature".into()));
    }
    Ok(sys.hbar / (2.0 * (sys.m * sys.kb_t).sqrt()))
}

/// Gravitational Hawking-Unruh temperature `T_g = hbar g / (4 c k_B)` in kelvin.
pub fn hawking_unruh_temperature(g: f64, consts: &CodataConstants) -> Result<f64> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Domain(format!("acceleration must be positive, got {g}")));
    }
    Ok(consts.hbar * g / (4.0 * consts.c * consts.k_b))
}

/// Same temperature in the unit system of `sys` (`hbar g / (4 c k_B)`).
pub fn hawking_unruh_temperature_in(sys: &PhysicalSystem, g: f64) -> Result<f64> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Domain(format!("acceleration must be positive, got {g}")));
    }
    Ok(sys.hbar * g / (4.0 * sys.c * sys.k_b()))
}

/// Relative increase `(T_g / T)^2` of the quantum potential of a barometric density
/// `rho ~ exp(-m g z / k_B T)` caused by the relativistic correction.
///
/// Equals `-Q / (2 m c^2)` with `Q = -hbar^2 (m g / 2 k_B T)^2 / 2m`.
pub fn barometric_relativistic_factor(sys: &PhysicalSystem, g: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("temperature must be positive, got {t}")));
    }
    let t_g = hawking_unruh_temperature_in(sys, g)?;
    Ok((t_g / t).powi(2))
}

/// Wavelength below which a photon lies inside its own Schwarzschild radius,
/// `sqrt(4 pi hbar G / c^3)`.
pub fn black_photon_threshold(consts: &CodataConstants) -> f64 {
    (4.0 * PI * consts.hbar * consts.g_newton / consts.c.powi(3)).sqrt()
}

/// Photon mass `M = 2 pi hbar / (lambda c)`.
pub fn photon_mass(wavelength: f64, consts: &CodataConstants) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(Error::Domain(format!("wavelength must be positive, got {wavelength}")));
    }
    Ok(2.0 * PI * consts.hbar / (wavelength * consts.c))
}

/// Schwarzschild radius `R = 2 G M / c^2`.
pub fn schwarzschild_radius(mass: f64, consts: &CodataConstants) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {mass}")));
    }
    Ok(2.0 * consts.g_newton * mass / consts.c.powi(2))
}

/// Einstein diffusion constant `D = k_B T / b`.
pub fn diffusion_constant(sys: &PhysicalSystem) -> Result<f64> {
    if !(sys.b > 0.0) {
        return Err(Error::Domain("diffusion constant needs a positive friction coefficient".into()));
    }
    Ok(sys.kb_t / sys.b)
}

/// One derived quantity, as printed by the `constants` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedValue {
    pub name: &'static str,
    pub value: f64,
    pub unit: &'static str,
}

/// Every derived SI value: electron Compton wavelength and its ratio to the
/// classical electron radius, thermal wavelength at 300 K, `T_g` at 9.81 m/s^2
/// and standard gravity, and the black-photon wavelength threshold.
pub fn derived_table(consts: &CodataConstants) -> Vec<DerivedValue> {
    let electron = PhysicalSystem {
        m: consts.m_e,
        c: consts.c,
        hbar: consts.hbar,
        kb_t: consts.k_b * 300.0,
        b: 0.0,
        b3: 0.0,
        units: UnitSystem::Si,
    };
    // Both wavelengths are well defined for these inputs.
    let lambda_c = compton_wavelength(&electron).expect("electron parameters are positive");
    let lambda_t = thermal_wavelength(&electron).expect("electron parameters are positive");
    let t_g = hawking_unruh_temperature(9.81, consts).expect("g > 0");
    let t_g_std = hawking_unruh_temperature(consts.g_standard, consts).expect("g > 0");
    vec![
        DerivedValue { name: "compton_wavelength_electron", value: lambda_c, unit: "m" },
        DerivedValue { name: "compton_to_electron_radius", value: lambda_c / consts.r_e, unit: "1" },
        DerivedValue { name: "thermal_wavelength_electron_300K", value: lambda_t, unit: "m" },
        DerivedValue { name: "hawking_unruh_temperature_g9.81", value: t_g, unit: "K" },
        DerivedValue { name: "hawking_unruh_temperature_standard_gravity", value: t_g_std, unit: "K" },
        DerivedValue { name: "black_photon_threshold", value: black_photon_threshold(consts), unit: "m" },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn electron_compton_wavelength() {
        let e = PhysicalSystem::electron_si(300.0);
        let l = compton_wavelength(&e).unwrap();
        // hbar / (2 m_e c) evaluated at 30 digits.
        assert_relative_eq!(l, 1.930_796_338_621_416_8e-13, max_relative = 1e-12);
        assert!((1.9e-13..=2.0e-13).contains(&l));
        let ratio = l / CODATA_2018.r_e;
        assert_relative_eq!(ratio, 68.5, max_relative = 0.01);
    }

    #[test]
    fn natural_unit_wavelengths() {
        let sys = PhysicalSystem::natural();
        assert_eq!(compton_wavelength(&sys).unwrap(), 0.5);
        assert_eq!(thermal_wavelength(&sys).unwrap(), 0.5);
        let hot = PhysicalSystem { kb_t: 4.0, ..sys };
        assert_eq!(thermal_wavelength(&hot).unwrap(), 0.25);
    }

    #[test]
    fn electron_thermal_wavelength_matches_high_precision_value() {
        let e = PhysicalSystem::electron_si(300.0);
        // hbar / (2 sqrt(m_e k_B 300 K)) evaluated at 30 digits.
        assert_relative_eq!(thermal_wavelength(&e).unwrap(), 8.584_191_522_358_652e-10, max_relative = 1e-10);
    }

    #[test]
    fn wavelength_domain_errors() {
        let cold = PhysicalSystem { kb_t: 0.0, ..PhysicalSystem::natural() };
        assert!(matches!(thermal_wavelength(&cold), Err(Error::Domain(_))));
        let massless = PhysicalSystem { m: 0.0, ..PhysicalSystem::natural() };
        assert!(compton_wavelength(&massless).is_err());
        let bad_c = PhysicalSystem { c: -1.0, ..PhysicalSystem::natural() };
        assert!(compton_wavelength(&bad_c).is_err());
    }

    #[test]
    fn hawking_unruh_temperature_at_earth_gravity() {
        let t = hawking_unruh_temperature(9.81, &CODATA_2018).unwrap();
        assert_relative_eq!(t, 6.25e-20, max_relative = 0.005);
        assert_relative_eq!(t, 6.248_577_940_045_836e-20, max_relative = 1e-12);
        let t2 = hawking_unruh_temperature(2.0 * 9.81, &CODATA_2018).unwrap();
        assert_relative_eq!(t2, 2.0 * t, max_relative = 1e-15);
        let t1 = hawking_unruh_temperature(1.0, &CODATA_2018).unwrap();
        assert_relative_eq!(t1, t / 9.81, max_relative = 1e-15);
        assert!(hawking_unruh_temperature(0.0, &CODATA_2018).is_err());
    }

    #[test]
    fn barometric_factor_square_law() {
        let sys = PhysicalSystem { c: 10.0, ..PhysicalSystem::natural() };
        let t_g = hawking_unruh_temperature_in(&sys, 1.0).unwrap();
        assert_eq!(t_g, 1.0 / 40.0);
        assert_relative_eq!(barometric_relativistic_factor(&sys, 1.0, t_g).unwrap(), 1.0);
        assert_relative_eq!(barometric_relativistic_factor(&sys, 1.0, 2.0 * t_g).unwrap(), 0.25);
        assert!(barometric_relativistic_factor(&sys, 1.0, 0.0).is_err());
    }

    #[test]
    fn barometric_factor_equals_minus_q_over_two_mc2() {
        // m = g = k_B = hbar = 1, c = 10, T = 1: rho ~ exp(-z), sqrt(rho) = exp(-z/2),
        // Q = -hbar^2 (sqrt rho)'' / (2 m sqrt rho) = -1/8.
        let sys = PhysicalSystem { c: 10.0, ..PhysicalSystem::natural() };
        let a = sys.m * 1.0 / (sys.k_b() * 1.0);
        let q = -sys.hbar.powi(2) * (a / 2.0).powi(2) / (2.0 * sys.m);
        assert_eq!(q, -0.125);
        let factor = barometric_relativistic_factor(&sys, 1.0, 1.0).unwrap();
        assert!((factor - (-q / (2.0 * sys.m * sys.c.powi(2)))).abs() < 1e-15);
    }

    #[test]
    fn black_photon_threshold_is_fixed_point() {
        let k = CODATA_2018;
        let l = black_photon_threshold(&k);
        assert_relative_eq!(l, 5.729_474_882_415_091e-35, max_relative = 1e-12);
        assert!(l > 5e-35 / 1.5 && l < 5e-35 * 1.5);
        let r = schwarzschild_radius(photon_mass(l, &k).unwrap(), &k).unwrap();
        assert_relative_eq!(r, l, max_relative = 1e-10);
        let r2 = schwarzschild_radius(photon_mass(2.0 * l, &k).unwrap(), &k).unwrap();
        assert_relative_eq!(r2, l / 2.0, max_relative = 1e-12);
        assert!(r2 < 2.0 * l);
        assert!(photon_mass(0.0, &k).is_err());
        assert!(schwarzschild_radius(-1.0, &k).is_err());
    }

    #[test]
    fn einstein_diffusion_constant() {
        let mut sys = PhysicalSystem::natural();
        assert_eq!(diffusion_constant(&sys).unwrap(), 1.0);
        sys.kb_t = 2.0;
        sys.b = 4.0;
        assert_eq!(diffusion_constant(&sys).unwrap(), 0.5);
        sys.kb_t = 0.0;
        assert_eq!(diffusion_constant(&sys).unwrap(), 0.0);
        sys.b = 0.0;
        assert!(diffusion_constant(&sys).is_err());
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(PhysicalSystem::natural().validate().is_ok());
        for bad in [
            PhysicalSystem { m: 0.0, ..PhysicalSystem::natural() },
            PhysicalSystem { hbar: -1.0, ..PhysicalSystem::natural() },
            PhysicalSystem { kb_t: -1.0, ..PhysicalSystem::natural() },
            PhysicalSystem { b3: -0.1, ..PhysicalSystem::natural() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn derived_table_reports_expected_magnitudes() {
        let table = derived_table(&CODATA_2018);
        let get = |name: &str| table.iter().find(|d| d.name == name).unwrap().value;
        assert!((67.0..=70.0).contains(&get("compton_to_electron_radius")));
        assert_relative_eq!(get("hawking_unruh_temperature_g9.81"), 6.25e-20, max_relative = 0.005);
    }

    proptest! {
        #[test]
        fn wavelengths_decrease_with_mass(m in 1e-3f64..1e3, dm in 1e-3f64..10.0, kt in 1e-3f64..1e3) {
            let a = PhysicalSystem { m, kb_t: kt, ..PhysicalSystem::natural() };
            let b = PhysicalSystem { m: m + dm, ..a };
            prop_assert!(compton_wavelength(&b).unwrap() < compton_wavelength(&a).unwrap());
            prop_assert!(thermal_wavelength(&b).unwrap() < thermal_wavelength(&a).unwrap());
            let hotter = PhysicalSystem { kb_t: kt + dm, ..a };
            prop_assert!(thermal_wavelength(&hotter).unwrap() < thermal_wavelength(&a).unwrap());
        }
    }
}
