//! Acceptance checks. Each criterion runs a self-contained numerical experiment
//! against an independent oracle and reports pass/fail with the measured numbers.
//! Tolerances are the constants below; they are not configurable.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use crate::constants::{
    barometric_relativistic_factor, black_photon_threshold, compton_wavelength, hawking_unruh_temperature,
    hawking_unruh_temperature_in, PhysicalSystem, CODATA_2018,
};
use crate::error::Result;
use crate::grid::Grid;
use crate::langevin::{simulate_ensemble, EnsembleConfig, InitialDistribution};
use crate::madelung::{quantum_part, ChemicalForm, HydroFields, HydroSolver, Variant};
use crate::phase_space::{
    kramers_rhs, marginal_p, marginal_x, wigner_quantum_term, Mode, MomentumGrid, PhaseSpaceField, PhaseSpaceOperator,
};
use crate::potentials::Potential;
use crate::quadrature::{adaptive_simpson, ks_distance, l1_distance, log_log_slope, sup_norm, TabulatedCdf};
use crate::smoluchowski::{
    cosine_analysis, cubic_friction_rhs, double_well_analysis, effective_potential_numeric, evolve_to_stationary,
    signed_cbrt, zero_barrier_temperature_numeric, DensityField, SmoluchowskiSolver, StationaryOptions,
};
use crate::wavefunction::{continuity_residual, kinetic_energy, probability_flux, Propagator, WaveField};

/// Criterion 1.
pub const T_G_REFERENCE: f64 = 6.25e-20;
pub const T_G_REL_TOL: f64 = 0.005;
pub const COMPTON_RANGE: (f64, f64) = (1.9e-13, 2.0e-13);
pub const COMPTON_TO_RADIUS_RANGE: (f64, f64) = (67.0, 70.0);
pub const BLACK_PHOTON_REFERENCE: f64 = 5e-35;
pub const BLACK_PHOTON_FACTOR: f64 = 1.5;
pub const CONSTANTS_SECONDS: f64 = 1.0;
/// Criterion 2.
pub const JUTTNER_KS: f64 = 0.01;
pub const JUTTNER_P2_REL: f64 = 0.01;
pub const JUTTNER_SECONDS: f64 = 120.0;
/// Criterion 3.
pub const KRAMERS_RATIO: (f64, f64) = (4.0, 0.8);
pub const KRAMERS_RESIDUAL: f64 = 1e-4;
/// Criterion 4.
pub const MOYAL_HARMONIC: f64 = 1e-8;
pub const MOYAL_SLOPE: (f64, f64) = (2.0, 0.1);
/// Criterion 5.
pub const PLANE_WAVE_REL: f64 = 1e-10;
/// Criterion 6.
pub const CONTINUITY_RATIO: (f64, f64) = (4.0, 0.8);
pub const CONTINUITY_ABS: f64 = 1e-6;
/// Criterion 7.
pub const MADELUNG_L1: f64 = 1e-3;
/// Criterion 8.
pub const EFFPOT_COEFF: f64 = 1e-8;
pub const ZERO_BARRIER_REL: f64 = 0.005;
pub const COSINE_FACTOR: f64 = 1e-10;
pub const FREE_DIFFUSION_FACTOR: f64 = 1e-8;
/// Criterion 9.
pub const BAROMETRIC_REL: f64 = 1e-10;
/// Criterion 10.
pub const C_SLOPE: (f64, f64) = (-2.0, 0.2);
/// Criterion 11: stationary cubic residual relative to that of the initial density.
pub const CUBIC_RELATIVE: f64 = 1e-3;
pub const MASS_PER_STEP: f64 = 1e-12;
/// Round-off allowance for the U -> -U flux reversal, relative to the largest flux.
pub const ODD_ROUNDOFF: f64 = 1e-12;
/// Criterion 12: Monte-Carlo band in standard deviations.
pub const MC_SIGMAS: f64 = 3.0;

/// Titles of criteria 1-12.
pub const TITLES: [&str; 12] = [
    "derived constants",
    "Juttner equilibrium from the Langevin ensemble",
    "Klein-Kramers stationarity of the Juttner density",
    "Moyal bracket reduces to the Poisson bracket",
    "plane-wave flux and group velocity",
    "continuity of the relativistic flux",
    "Madelung and Wigner-Liouville reproduce Schrodinger",
    "effective-potential algebra",
    "barometric relativistic factor",
    "limit reductions of the overdamped equation",
    "cubic friction",
    "Kramers marginal against Langevin histogram",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} [{}] {} ({:.1} s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.seconds,
            self.detail
        )
    }
}

/// Runs criterion `id` (1-12). Solver errors count as failures.
pub fn run_criterion(id: usize) -> Option<CriterionReport> {
    let check: fn() -> Result<(bool, String)> = match id {
        1 => constants_check,
        2 => juttner_langevin,
        3 => kramers_stationarity,
        4 => moyal_poisson,
        5 => plane_wave_flux,
        6 => continuity,
        7 => madelung_schrodinger,
        8 => effective_potential_algebra,
        9 => barometric_factor,
        10 => limit_reductions,
        11 => cubic_friction,
        12 => kramers_vs_langevin,
        _ => return None,
    };
    let start = Instant::now();
    let outcome = check();
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if id == 1 && seconds > CONSTANTS_SECONDS {
        passed = false;
        detail.push_str(&format!("; runtime {seconds:.2} s > {CONSTANTS_SECONDS} s"));
    }
    if id == 2 && seconds > JUTTNER_SECONDS {
        passed = false;
        detail.push_str(&format!("; runtime {seconds:.0} s > {JUTTNER_SECONDS} s"));
    }
    Some(CriterionReport { id, title: TITLES[id - 1], passed, detail, seconds })
}

/// Runs all twelve criteria in order.
pub fn run_all() -> Vec<CriterionReport> {
    (1..=12).filter_map(run_criterion).collect()
}

fn within(value: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&value)
}

fn near(value: f64, (target, tol): (f64, f64)) -> bool {
    (value - target).abs() <= tol
}

fn constants_check() -> Result<(bool, String)> {
    let k = CODATA_2018;
    let t_g = hawking_unruh_temperature(9.81, &k)?;
    let electron = PhysicalSystem::electron_si(300.0);
    let lc = compton_wavelength(&electron)?;
    let ratio = lc / k.r_e;
    let black = black_photon_threshold(&k);
    let ok = ((t_g - T_G_REFERENCE) / T_G_REFERENCE).abs() <= T_G_REL_TOL
        && within(lc, COMPTON_RANGE)
        && within(ratio, COMPTON_TO_RADIUS_RANGE)
        && black > BLACK_PHOTON_REFERENCE / BLACK_PHOTON_FACTOR
        && black < BLACK_PHOTON_REFERENCE * BLACK_PHOTON_FACTOR;
    Ok((
        ok,
        format!("T_g = {t_g:.4e} K, lambda_C = {lc:.4e} m, lambda_C/r_e = {ratio:.2}, black photon = {black:.3e} m"),
    ))
}

fn juttner_langevin() -> Result<(bool, String)> {
    let sys = PhysicalSystem::natural();
    let cfg = EnsembleConfig {
        n_particles: 200_000,
        dt: 1e-3,
        n_steps: 50_000,
        seed: 2024,
        init: InitialDistribution::Delta { r: 0.0, p: 0.0 },
        record_every: 50_000,
    };
    let rec = simulate_ensemble(&sys, &Potential::Free, &cfg)?;
    let weight = |p: f64| (-((1.0 + p * p).sqrt() - 1.0)).exp();
    let cdf = TabulatedCdf::new(&weight, -60.0, 60.0, 12_000);
    let p: Vec<f64> = rec.final_samples.iter().map(|s| s.p).collect();
    let ks = ks_distance(&p, |x| cdf.eval(x));
    let z = adaptive_simpson(&weight, -60.0, 60.0, 1e-13);
    let p2_oracle = adaptive_simpson(&|p| p * p * weight(p), -60.0, 60.0, 1e-13) / z;
    let p2 = rec.moments.last().map(|m| m.mean_p2).unwrap_or(f64::NAN);
    let rel = (p2 - p2_oracle).abs() / p2_oracle;
    Ok((
        ks < JUTTNER_KS && rel < JUTTNER_P2_REL,
        format!("KS = {ks:.4}, <p^2> = {p2:.4} vs {p2_oracle:.4} (rel {rel:.2e})"),
    ))
}

fn kramers_stationarity() -> Result<(bool, String)> {
    let sys = PhysicalSystem::natural();
    let pot = Potential::Harmonic { k: 1.0 };
    let x = Grid::centered(256, 16.0)?;
    let residual = |n_p: usize| -> Result<f64> {
        let f = PhaseSpaceField::juttner(&sys, &pot, x, MomentumGrid::new(n_p, 24.0)?)?;
        Ok(sup_norm(&kramers_rhs(&sys, &pot, &f)?))
    };
    let r = [residual(64)?, residual(128)?, residual(256)?];
    let ratios = [r[0] / r[1], r[1] / r[2]];
    let ok = ratios.iter().all(|&q| near(q, KRAMERS_RATIO)) && r[2] < KRAMERS_RESIDUAL;
    Ok((
        ok,
        format!(
            "residuals {:.3e} {:.3e} {:.3e}, ratios {:.2} {:.2}; 256x256 residual must be < {KRAMERS_RESIDUAL:e}",
            r[0], r[1], r[2], ratios[0], ratios[1]
        ),
    ))
}

/// Gaussian Wigner function and its analytic momentum derivative.
fn gaussian_with_dp(
    x: Grid,
    p: MomentumGrid,
    centre: (f64, f64),
    sig: (f64, f64),
) -> Result<(PhaseSpaceField, Vec<f64>)> {
    let f = PhaseSpaceField::gaussian(x, p, centre, sig)?;
    let n_p = p.n;
    let dw = f.w.iter().enumerate().map(|(n, w)| -w * (p.p(n % n_p) - centre.1) / (sig.1 * sig.1)).collect();
    Ok((f, dw))
}

fn moyal_poisson() -> Result<(bool, String)> {
    let x = Grid::centered(64, 16.0)?;
    let p = MomentumGrid::new(128, 12.0)?;
    let (f, dw) = gaussian_with_dp(x, p, (0.5, -0.4), (0.8, 1.0))?;
    let gap = |sys: &PhysicalSystem, pot: &Potential| -> Result<f64> {
        let q = wigner_quantum_term(sys, pot, &f)?;
        Ok((0..f.w.len()).map(|n| (q[n] - pot.grad(x.x(n / p.n)) * dw[n]).abs()).fold(0.0, f64::max))
    };
    let harmonic = gap(&PhysicalSystem::natural(), &Potential::Harmonic { k: 1.3 })?;
    let cosine = Potential::Cosine { u0: 1.0, q: 2.0 * PI / 8.0 };
    let hbars = [1.0, 0.5, 0.25];
    let mut d = vec![];
    for hbar in hbars {
        d.push(gap(&PhysicalSystem { hbar, ..PhysicalSystem::natural() }, &cosine)?);
    }
    let slope = log_log_slope(&hbars, &d);
    Ok((
        harmonic < MOYAL_HARMONIC && near(slope, MOYAL_SLOPE),
        format!(
            "harmonic sup gap {harmonic:.2e}; cosine gaps {:.3e} {:.3e} {:.3e}, slope {slope:.3}",
            d[0], d[1], d[2]
        ),
    ))
}

fn plane_wave_flux() -> Result<(bool, String)> {
    let sys = PhysicalSystem::natural();
    let lc = compton_wavelength(&sys)?;
    let grid = Grid::new(32, 0.0, 32.0 * PI)?;
    let (mut worst_formula, mut worst_group) = (0.0f64, 0.0f64);
    for n in 1..=5 {
        let k = n as f64 / 16.0;
        let f = WaveField::plane_wave(grid, k);
        let j = probability_flux(&sys, &f)?;
        let rho = f.density();
        let formula = sys.hbar * k / sys.m * (1.0 - 2.0 * lc * lc * k * k);
        // Five-point stencil, exact for the quartic dispersion.
        let h = 1e-2;
        let e = |q: f64| kinetic_energy(&sys, q);
        let group = (e(k - 2.0 * h) - 8.0 * e(k - h) + 8.0 * e(k + h) - e(k + 2.0 * h)) / (12.0 * h * sys.hbar);
        for (a, r) in j.iter().zip(&rho) {
            worst_formula = worst_formula.max((a / r - formula).abs() / formula.abs());
        }
        worst_group = worst_group.max((group - formula).abs() / formula.abs());
    }
    Ok((
        worst_formula < PLANE_WAVE_REL && worst_group < PLANE_WAVE_REL,
        format!("max rel. error vs (hbar k/m)(1 - 2 lambda_C^2 k^2): {worst_formula:.2e}; vs group velocity {worst_group:.2e}"),
    ))
}

fn continuity() -> Result<(bool, String)> {
    let sys = PhysicalSystem { c: 15.0, ..PhysicalSystem::natural() };
    let g = Grid::centered(128, 20.0)?;
    let pot = Potential::Harmonic { k: 1.0 };
    let f = WaveField::gaussian(g, 1.0, 0.5, 0.8, 1.0)?;
    let r1 = continuity_residual(&sys, &pot, &f, 2e-4)?;
    let r2 = continuity_residual(&sys, &pot, &f, 1e-4)?;
    let ratio = r1 / r2;
    Ok((
        near(ratio, CONTINUITY_RATIO) && r2 < CONTINUITY_ABS,
        format!("residual {r1:.3e} at dt=2e-4, {r2:.3e} at dt=1e-4, ratio {ratio:.3}"),
    ))
}

fn madelung_schrodinger() -> Result<(bool, String)> {
    let sys = PhysicalSystem { kb_t: 0.0, b: 0.0, c: 1e6, ..PhysicalSystem::natural() };
    let pot = Potential::Harmonic { k: 1.0 };
    let g = Grid::centered(128, 16.0)?;
    let checkpoints = 8;
    let per = 400;
    let dt = 2.0 * PI / (checkpoints * per) as f64;

    let mut psi = WaveField::coherent_state(g, &sys, 1.0, 1.0, 0.0)?;
    let prop = Propagator::new(&sys, &pot, g, dt)?;
    let mut reference = vec![psi.density()];
    for _ in 0..checkpoints {
        prop.run(&mut psi, per)?;
        reference.push(psi.density());
    }

    let psi0 = WaveField::coherent_state(g, &sys, 1.0, 1.0, 0.0)?;
    let mut hydro = HydroFields::from_wave(&sys, &psi0);
    let solver = HydroSolver::new(&sys, &pot, g, Variant::QuantumRelativistic, ChemicalForm::QExpressed)?;
    let mut madelung_err = 0.0f64;
    solver.evolve_with(&mut hydro, dt, checkpoints * per, |step, h| {
        if step % per == 0 {
            madelung_err = madelung_err.max(l1_distance(&h.rho, &reference[step / per], g.dx()));
        }
    })?;

    let sigma = (sys.hbar / (2.0 * sys.m)).sqrt();
    let mut w =
        PhaseSpaceField::gaussian(g, MomentumGrid::new(128, 8.0)?, (1.0, 0.0), (sigma, sys.hbar / (2.0 * sigma)))?;
    let op = PhaseSpaceOperator::new(&sys, &pot, g, w.p, Mode::WignerLiouville)?;
    let sub = (2.0 * PI / checkpoints as f64 / op.stability_bound().0).ceil() as usize;
    let dt_w = 2.0 * PI / (checkpoints * sub) as f64;
    let mut wigner_err = l1_distance(&marginal_x(&w), &reference[0], g.dx());
    for rho in reference.iter().skip(1) {
        op.evolve_with(&mut w, dt_w, sub, |_, _| {})?;
        wigner_err = wigner_err.max(l1_distance(&marginal_x(&w), rho, g.dx()));
    }
    Ok((
        madelung_err < MADELUNG_L1 && wigner_err < MADELUNG_L1,
        format!("max L1 over one period: Madelung {madelung_err:.2e}, Wigner-Liouville marginal {wigner_err:.2e}"),
    ))
}

fn effective_potential_algebra() -> Result<(bool, String)> {
    let (alpha, beta) = (1.0, 1.0);
    // lambda_T = 0.1, lambda_C = 0.05.
    let sys = PhysicalSystem { kb_t: 25.0, c: 10.0, ..PhysicalSystem::natural() };
    let pot = Potential::DoubleWell { alpha, beta };
    let rep = effective_potential_numeric(&sys, &pot, &Grid::centered(256, 4.0)?)?;
    let (_, a2, a4) = fit_even_quartic(&rep.x, &rep.u_eff);
    let lt2 = rep.lambda_t.powi(2);
    let quad = -2.0 * (alpha - 6.0 * beta * lt2);
    let coeff_err = (a2 - quad).abs().max((a4 - beta).abs());
    let e_a = beta * (alpha / beta - 6.0 * lt2).powi(2);
    let e_a_numeric = a2 * a2 / (4.0 * a4);
    let e_a_analysis = double_well_analysis(&sys, alpha, beta)?.barrier;
    let e_a_err = (e_a_numeric - e_a).abs().max((e_a_analysis - e_a).abs());

    let t_zero = 3.0 * beta * sys.hbar * sys.hbar / (2.0 * alpha * sys.m * sys.k_b());
    let t_bisect = zero_barrier_temperature_numeric(&sys, alpha, beta, &Grid::centered(4096, 4.0)?)?;
    let t_rel = (t_bisect - t_zero).abs() / t_zero;

    let cos_sys = PhysicalSystem { kb_t: 0.3, c: 4.0, ..PhysicalSystem::natural() };
    let q = 2.0 * PI / 2.5;
    let cos_pot = Potential::Cosine { u0: 0.7, q };
    let cos_rep = effective_potential_numeric(&cos_sys, &cos_pot, &Grid::centered(128, 10.0)?)?;
    let (lt, lc) = (cos_rep.lambda_t, cos_rep.lambda_c);
    let closed = 1.0 - (1.0 - lc * lc * q * q) * lt * lt * q * q;
    let mut factor_err = 0.0f64;
    for (u, v) in cos_rep.u.iter().zip(&cos_rep.u_eff) {
        if u.abs() > 1e-3 {
            factor_err = factor_err.max((v / u - closed).abs());
        }
    }
    let at_inverse_compton = cosine_analysis(&cos_sys, 1.0 / lc)?;
    let t_free = cosine_analysis(&cos_sys, q)?.t_free.unwrap_or(f64::NAN);
    let free = cosine_analysis(&cos_sys.at_temperature(t_free), q)?.factor;

    let ok = coeff_err < EFFPOT_COEFF
        && e_a_err < EFFPOT_COEFF
        && t_rel < ZERO_BARRIER_REL
        && factor_err < COSINE_FACTOR
        && at_inverse_compton.factor == 1.0
        && at_inverse_compton.factor_at_inverse_compton == 1.0
        && free.abs() < FREE_DIFFUSION_FACTOR;
    Ok((
        ok,
        format!(
            "double well: coeff err {coeff_err:.1e}, E_a {e_a_numeric:.6} (err {e_a_err:.1e}), zero-barrier T {t_bisect:.6} vs {t_zero} (rel {t_rel:.1e}); cosine: factor err {factor_err:.1e}, factor at 1/lambda_C = {}, factor at T_free = {free:.1e}",
            at_inverse_compton.factor
        ),
    ))
}

/// Least-squares `a0 + a2 x^2 + a4 x^4` through the samples.
fn fit_even_quartic(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (&x, &y) in x.iter().zip(y) {
        let b = [1.0, x * x, x.powi(4)];
        for i in 0..3 {
            r[i] += b[i] * y;
            for j in 0..3 {
                m[i][j] += b[i] * b[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting on the 3x3 normal equations.
    for c in 0..3 {
        let piv = (c..3).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap_or(c);
        m.swap(c, piv);
        r.swap(c, piv);
        for row in c + 1..3 {
            let f = m[row][c] / m[c][c];
            for k in c..3 {
                m[row][k] -= f * m[c][k];
            }
            r[row] -= f * r[c];
        }
    }
    let mut a = [0.0; 3];
    for c in (0..3).rev() {
        a[c] = (r[c] - (c + 1..3).map(|k| m[c][k] * a[k]).sum::<f64>()) / m[c][c];
    }
    (a[0], a[1], a[2])
}

fn barometric_factor() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut forms = 0.0f64;
    for (m, g, kb_t, c, hbar) in [(1.0, 1.0, 1.0, 10.0, 1.0), (2.0, 3.0, 0.5, 4.0, 0.7), (0.3, 9.81, 2.0, 1.5, 1.2)] {
        let sys = PhysicalSystem { m, c, hbar, kb_t, ..PhysicalSystem::natural() };
        let a = m * g / kb_t;
        let factor = 1.0 + barometric_relativistic_factor(&sys, g, sys.temperature())?;
        let t_g = hawking_unruh_temperature_in(&sys, g)?;
        let direct = 1.0 + (t_g / sys.temperature()).powi(2);
        worst = worst.max((factor - direct).abs());
        for z in [0.0, 0.5, 2.0] {
            let s = (-0.5 * a * z).exp();
            let (s2, s4) = (a * a / 4.0 * s, a.powi(4) / 16.0 * s);
            let q = quantum_part(&sys, s, s2, s4, Variant::QuantumNonrelativistic, ChemicalForm::Exact);
            let exact = quantum_part(&sys, s, s2, s4, Variant::QuantumRelativistic, ChemicalForm::Exact);
            let qexp = quantum_part(&sys, s, s2, s4, Variant::QuantumRelativistic, ChemicalForm::QExpressed);
            worst = worst.max((exact / q - factor).abs() / factor).max((qexp / q - factor).abs() / factor);
            forms = forms.max((exact - qexp).abs() / q.abs());
        }
    }
    Ok((
        worst < BAROMETRIC_REL && forms < BAROMETRIC_REL,
        format!("max rel. deviation from 1 + (T_g/T)^2: {worst:.1e}; between forms {forms:.1e}"),
    ))
}

fn limit_reductions() -> Result<(bool, String)> {
    let g = Grid::centered(80, 20.0)?;
    let pot = Potential::Harmonic { k: 1.0 };
    let f0 = DensityField::gaussian(g, 0.5, 0.7)?;
    let opts = StationaryOptions { dt: 2e-4, tol: 1e-11, ..Default::default() };
    let mut slopes = vec![];
    let cs = [10.0, 20.0, 40.0];
    for form in [ChemicalForm::QExpressed, ChemicalForm::Exact] {
        let nr =
            evolve_to_stationary(&PhysicalSystem::natural(), &pot, &f0, Variant::QuantumNonrelativistic, form, &opts)?;
        let mut d = vec![];
        for c in cs {
            let sys = PhysicalSystem { c, ..PhysicalSystem::natural() };
            let r = evolve_to_stationary(&sys, &pot, &f0, Variant::QuantumRelativistic, form, &opts)?;
            d.push(l1_distance(&r.field.rho, &nr.field.rho, g.dx()));
        }
        slopes.push(log_log_slope(&cs, &d));
    }
    let classical = |m: f64| {
        let sys = PhysicalSystem { m, ..PhysicalSystem::natural() };
        let opts = StationaryOptions { dt: 5e-3, tol: 1e-10, ..Default::default() };
        evolve_to_stationary(&sys, &pot, &f0, Variant::Classical, ChemicalForm::QExpressed, &opts)
    };
    let (a, b) = (classical(1.0)?, classical(2.0)?);
    let identical = a.field.rho.iter().zip(&b.field.rho).all(|(x, y)| x.to_bits() == y.to_bits()) && a.steps == b.steps;
    Ok((
        slopes.iter().all(|&s| near(s, C_SLOPE)) && identical,
        format!("c^-2 slopes of stationary densities: q_expressed {:.3}, exact {:.3}; classical m -> 2m bit-identical: {identical}", slopes[0], slopes[1]),
    ))
}

fn cubic_friction() -> Result<(bool, String)> {
    let sys = PhysicalSystem { c: 10.0, b3: 1.0, ..PhysicalSystem::natural() };
    let g = Grid::centered(80, 20.0)?;
    let pot = Potential::Harmonic { k: 1.0 };
    let f0 = DensityField::gaussian(g, 0.5, 0.7)?;
    let mut ratio = 0.0f64;
    for form in [ChemicalForm::QExpressed, ChemicalForm::Exact] {
        let opts = StationaryOptions { dt: 2e-4, tol: 1e-11, ..Default::default() };
        let st = evolve_to_stationary(&sys, &pot, &f0, Variant::QuantumRelativistic, form, &opts)?;
        let initial = sup_norm(&cubic_friction_rhs(&sys, &pot, &f0, Variant::QuantumRelativistic, form)?);
        let stationary = sup_norm(&cubic_friction_rhs(&sys, &pot, &st.field, Variant::QuantumRelativistic, form)?);
        ratio = ratio.max(stationary / initial);
    }

    let solver = SmoluchowskiSolver::new(&sys, &pot, g, Variant::QuantumRelativistic, ChemicalForm::QExpressed)?;
    let mut f = f0.clone();
    let mut last = f.mass();
    let mut mass_drift = 0.0f64;
    solver.evolve_with(&mut f, 2e-4, 2000, |_, h| {
        mass_drift = mass_drift.max((h.mass() - last).abs());
        last = h.mass();
    })?;

    // Odd symmetry: the cube root itself, and the flux reversal under U -> -U on a
    // uniform density.
    let mut odd = (1..2000).all(|i| {
        let y = (i as f64 * 0.37).sin() * 10f64.powi(i % 17 - 8);
        signed_cbrt(-y) == -signed_cbrt(y) && (signed_cbrt(y).powi(3) - y).abs() <= 1e-12 * y.abs()
    });
    let uniform = DensityField::new(g, vec![1.0 / 20.0; g.n])?;
    for u0 in [0.3, 2.0] {
        let up = Potential::Cosine { u0, q: 2.0 * PI / 5.0 };
        let down = Potential::Cosine { u0: -u0, q: 2.0 * PI / 5.0 };
        for variant in [Variant::Classical, Variant::QuantumRelativistic] {
            let a = cubic_friction_rhs(&sys, &up, &uniform, variant, ChemicalForm::Exact)?;
            let b = cubic_friction_rhs(&sys, &down, &uniform, variant, ChemicalForm::Exact)?;
            let scale = sup_norm(&a);
            odd &= a.iter().zip(&b).all(|(x, y)| (x + y).abs() <= ODD_ROUNDOFF * scale);
        }
    }
    Ok((
        ratio < CUBIC_RELATIVE && mass_drift < MASS_PER_STEP && odd,
        format!("stationary/initial cubic residual {ratio:.2e}; max mass change per step {mass_drift:.1e}; odd symmetry {odd}"),
    ))
}

fn kramers_vs_langevin() -> Result<(bool, String)> {
    let sys = PhysicalSystem::natural();
    let pot = Potential::Harmonic { k: 1.0 };
    let (x0, sx, sp) = (1.0, 0.5, 0.5);
    let t_end = 2.0;

    let x = Grid::centered(128, 16.0)?;
    let p = MomentumGrid::new(128, 8.0)?;
    let mut w = PhaseSpaceField::gaussian(x, p, (x0, 0.0), (sx, sp))?;
    let op = PhaseSpaceOperator::new(&sys, &pot, x, p, Mode::Kramers)?;
    let n = (t_end / op.stability_bound().0).ceil() as usize;
    op.evolve_with(&mut w, t_end / n as f64, n, |_, _| {})?;
    let marginal = marginal_p(&w);

    let n_particles = 100_000;
    let dt = 1e-3;
    let cfg = EnsembleConfig {
        n_particles,
        dt,
        n_steps: (t_end / dt).round() as usize,
        seed: 12,
        init: InitialDistribution::Gaussian { mean_r: x0, std_r: sx, mean_p: 0.0, std_p: sp },
        record_every: 1000,
    };
    let rec = simulate_ensemble(&sys, &pot, &cfg)?;
    let mut counts = vec![0usize; p.n];
    let dp = p.dp();
    for s in &rec.final_samples {
        let j = ((s.p + p.p_max) / dp).floor();
        if j >= 0.0 && (j as usize) < p.n {
            counts[j as usize] += 1;
        }
    }
    let nf = n_particles as f64;
    let (mut worst, mut bins) = (0.0f64, 0);
    for (c, m) in counts.iter().zip(&marginal) {
        let prob = m * dp;
        let expected = nf * prob;
        if expected < 10.0 {
            continue;
        }
        bins += 1;
        let sigma = (nf * prob * (1.0 - prob)).sqrt();
        worst = worst.max((*c as f64 - expected).abs() / sigma);
    }
    Ok((worst <= MC_SIGMAS, format!("{bins} bins, largest deviation {worst:.2} sigma")))
}
