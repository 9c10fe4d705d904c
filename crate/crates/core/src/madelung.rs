//! Dissipative Madelung hydrodynamics
//!
//! `d rho/dt = -d(rho V)/dx`,
//! `m dV/dt = -m V dV/dx - b V - d/dx (mu + k_B T ln rho)`,
//!
//! with the chemical potential `mu` built from the Bohm quantum potential
//! `Q = -hbar^2 d^2 sqrt(rho) / (2m sqrt(rho))` and its relativistic correction.
//!
//! [`hydro_rhs`] evaluates these tendencies pointwise with spectral derivatives.
//! Time stepping the same equations pointwise is fragile where the density drops
//! below round-off: `Q` and `ln rho` there are noise, and a spectral or upwind
//! flux spreads it. The solver therefore uses two exact reformulations:
//!
//! - Quantum variants. In one dimension the friction force is a gradient,
//!   `b V = d(b S / m)/dx` with `V = S'/m`, so the momentum equation integrates to
//!   a Hamilton-Jacobi equation and `psi = sqrt(rho) exp(i S / hbar)` obeys the
//!   Schrodinger-Langevin equation
//!   `i hbar psi_t = [-hbar^2 d^2/2m + U + (mu - U - Q) + k_B T ln rho + b S / m] psi`.
//!   It is split Strang-wise into an exact kinetic step in Fourier space and an
//!   exact pointwise phase step; density stays non-negative and mass is conserved
//!   to round-off. Only the phase of nearly empty nodes is affected by noise.
//! - Classical variant. A finite-volume scheme for `(rho, rho V)` with minmod
//!   reconstruction, the Rusanov flux and RK4; it never references `hbar` or `c`.
//!
//! `ln rho` and `sqrt(rho)` use the floored density `rho + eps`,
//! `eps = DENSITY_FLOOR * max rho`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalSystem;
use crate::error::{require_positive, Error, Result};
use crate::grid::{Grid, Spectral};
use crate::potentials::Potential;
use crate::quadrature::sup_norm;
use crate::wavefunction::{polar_decompose, WaveField};
use crate::DENSITY_FLOOR;

/// Safety factor applied to every explicit stability limit.
pub const SAFETY: f64 = 0.4;

/// Depth of negative density tolerated before a run is aborted.
pub const NEGATIVITY_LIMIT: f64 = 1e-10;

/// Which physics enters the chemical potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `U + Q` plus the `1/c^2` correction.
    #[default]
    QuantumRelativistic,
    /// `U + Q`.
    QuantumNonrelativistic,
    /// `U` alone; independent of `hbar` and `c`.
    Classical,
}

/// Reading of the relativistic correction to the quantum potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChemicalForm {
    /// `rho^{-1/2} H_BF rho^{1/2}`: `U + Q - hbar^4 d^4 sqrt(rho) / (8 m^3 c^2 sqrt(rho))`.
    Exact,
    /// `U + (1 - Q / 2mc^2) Q`.
    #[default]
    QExpressed,
}

/// Density and velocity on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroFields {
    pub x: Grid,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
}

impl HydroFields {
    pub fn new(x: Grid, rho: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        x.validate()?;
        if rho.len() != x.n || v.len() != x.n {
            return Err(Error::Domain("hydrodynamic fields do not match the grid".into()));
        }
        Ok(Self { x, rho, v })
    }

    /// Density and phase velocity of a wavefunction.
    pub fn from_wave(sys: &PhysicalSystem, field: &WaveField) -> Self {
        let p = polar_decompose(sys, field);
        Self { x: field.x, rho: p.rho, v: p.v }
    }

    pub fn mass(&self) -> f64 {
        self.x.integrate(&self.rho)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("cannot normalise a density of mass {m}")));
        }
        self.rho.iter_mut().for_each(|r| *r /= m);
        Ok(())
    }

    /// Warns when `max |V|` exceeds `0.1 c`, outside the slow-flow regime.
    pub fn check_slow_flow(&self, sys: &PhysicalSystem) -> bool {
        let v_max = sup_norm(&self.v);
        let ok = v_max <= 0.1 * sys.c;
        if !ok {
            log::warn!("max |V| = {v_max:e} exceeds 0.1 c = {:e}", 0.1 * sys.c);
        }
        ok
    }
}

/// `eps = DENSITY_FLOOR * max rho`.
pub fn density_floor(rho: &[f64]) -> f64 {
    DENSITY_FLOOR * rho.iter().fold(0.0, |m: f64, &r| m.max(r))
}

/// Quantum part of the chemical potential at one point from `s = sqrt(rho)` and its
/// second and fourth derivatives.
#[inline]
pub fn quantum_part(sys: &PhysicalSystem, s: f64, s2: f64, s4: f64, variant: Variant, form: ChemicalForm) -> f64 {
    let q = -sys.hbar * sys.hbar * s2 / (2.0 * sys.m * s);
    let mc2 = sys.m * sys.c * sys.c;
    match (variant, form) {
        (Variant::Classical, _) => 0.0,
        (Variant::QuantumNonrelativistic, _) => q,
        (Variant::QuantumRelativistic, ChemicalForm::QExpressed) => (1.0 - q / (2.0 * mc2)) * q,
        (Variant::QuantumRelativistic, ChemicalForm::Exact) => {
            let h2 = sys.hbar * sys.hbar;
            q - h2 * h2 * s4 / (8.0 * sys.m * mc2 * sys.m * s)
        }
    }
}

/// Smoothly floored amplitude `sqrt(max(rho, 0) + eps)` and the count of nodes below `eps`.
fn amplitude(rho: &[f64]) -> (Vec<f64>, usize) {
    let eps = density_floor(rho);
    let floored = rho.iter().filter(|&&r| r < eps).count();
    (rho.iter().map(|&r| (r.max(0.0) + eps).sqrt()).collect(), floored)
}

pub(crate) fn quantum_part_on_grid(
    sys: &PhysicalSystem,
    spectral: &Spectral,
    rho: &[f64],
    variant: Variant,
    form: ChemicalForm,
) -> (Vec<f64>, usize) {
    if variant == Variant::Classical {
        return (vec![0.0; rho.len()], 0);
    }
    let (s, floored) = amplitude(rho);
    let d = spectral.derivatives(&s, &[2, 4]);
    let q = (0..s.len()).map(|i| quantum_part(sys, s[i], d[0][i], d[1][i], variant, form)).collect();
    (q, floored)
}

pub(crate) fn warn_floored(floored: usize, n: usize) {
    if floored * 20 > n {
        log::warn!("{floored} of {n} nodes are below the density floor");
    }
}

/// Bohm quantum potential `Q = -hbar^2 d^2 sqrt(rho) / (2m sqrt(rho))` with spectral
/// derivatives; `rho` is floored at `eps = DENSITY_FLOOR * max rho`.
pub fn bohm_quantum_potential(sys: &PhysicalSystem, grid: &Grid, rho: &[f64]) -> Result<Vec<f64>> {
    sys.validate()?;
    check_len(grid, rho)?;
    let (q, floored) =
        quantum_part_on_grid(sys, &Spectral::new(grid), rho, Variant::QuantumNonrelativistic, ChemicalForm::QExpressed);
    warn_floored(floored, rho.len());
    Ok(q)
}

/// Chemical potential `U + Q (1 - Q / 2mc^2)` or the exact Breit-Fermi sandwich.
pub fn quantum_chemical_potential(
    sys: &PhysicalSystem,
    pot: &Potential,
    grid: &Grid,
    rho: &[f64],
    form: ChemicalForm,
) -> Result<Vec<f64>> {
    sys.validate()?;
    check_len(grid, rho)?;
    let (q, floored) = quantum_part_on_grid(sys, &Spectral::new(grid), rho, Variant::QuantumRelativistic, form);
    warn_floored(floored, rho.len());
    Ok(q.iter().enumerate().map(|(i, q)| q + pot.value(grid.x(i))).collect())
}

fn check_len(grid: &Grid, rho: &[f64]) -> Result<()> {
    grid.validate()?;
    if rho.len() != grid.n {
        return Err(Error::Domain(format!("density has {} samples but the grid has {}", rho.len(), grid.n)));
    }
    Ok(())
}

/// Time integrator for the hydrodynamic equations on one grid.
#[derive(Debug, Clone)]
pub struct HydroSolver {
    sys: PhysicalSystem,
    grid: Grid,
    spectral: Spectral,
    variant: Variant,
    form: ChemicalForm,
    potential: Vec<f64>,
    force: Vec<f64>,
}

impl HydroSolver {
    pub fn new(
        sys: &PhysicalSystem,
        pot: &Potential,
        grid: Grid,
        variant: Variant,
        form: ChemicalForm,
    ) -> Result<Self> {
        sys.validate()?;
        pot.validate()?;
        grid.validate()?;
        Ok(Self {
            sys: *sys,
            grid,
            spectral: Spectral::new(&grid),
            variant,
            form,
            potential: pot.sample_on_grid(&grid, 0),
            force: pot.sample_on_grid(&grid, 1),
        })
    }

    fn check(&self, f: &HydroFields) -> Result<()> {
        if f.x != self.grid || f.rho.len() != self.grid.n || f.v.len() != self.grid.n {
            return Err(Error::Domain("fields do not match the solver grid".into()));
        }
        Ok(())
    }

    /// `(d rho/dt, dV/dt)` with spectral derivatives. The force is divided by the
    /// floored density `rho + eps`, so nodes below the floor feel no force.
    pub fn rhs(&self, f: &HydroFields) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(f)?;
        let (rho, v) = (&f.rho, &f.v);
        let n = rho.len();
        let PhysicalSystem { m, b, kb_t, .. } = self.sys;
        let flux: Vec<f64> = rho.iter().zip(v).map(|(r, v)| r * v).collect();
        let drho = self.spectral.derivative(&flux, 1).into_iter().map(|d| -d).collect();
        let dv_dx = self.spectral.derivative(v, 1);
        let drho_dx = if kb_t > 0.0 { self.spectral.derivative(rho, 1) } else { vec![0.0; n] };
        let fq = self.quantum_force_density(rho);
        let eps = density_floor(rho);
        let dv = (0..n)
            .map(|i| {
                let force = rho[i] * self.force[i] + fq[i] + kb_t * drho_dx[i];
                -v[i] * dv_dx[i] - b * v[i] / m - force / (m * (rho[i].max(0.0) + eps))
            })
            .collect();
        Ok((drho, dv))
    }

    /// `rho d(mu - U)/dx`. The Bohm part is written in the density itself,
    /// `rho dQ/dx = -hbar^2 (rho''' - (rho'^2 / rho)') / 4m`, which does not amplify
    /// round-off where the density is negligible.
    fn quantum_force_density(&self, rho: &[f64]) -> Vec<f64> {
        let n = rho.len();
        if self.variant == Variant::Classical {
            return vec![0.0; n];
        }
        let PhysicalSystem { m, hbar, c, .. } = self.sys;
        let eps = density_floor(rho);
        let d = self.spectral.derivatives(rho, &[1, 2, 3]);
        let g: Vec<f64> = (0..n).map(|i| d[0][i] * d[0][i] / (rho[i].max(0.0) + eps)).collect();
        let dg = self.spectral.derivative(&g, 1);
        let h2 = hbar * hbar;
        let mc2 = m * c * c;
        let mut fq: Vec<f64> = (0..n).map(|i| -h2 / (4.0 * m) * (d[2][i] - dg[i])).collect();
        match (self.variant, self.form) {
            (Variant::QuantumRelativistic, ChemicalForm::QExpressed) => {
                // d(Q^2)/dx = 2 Q dQ/dx
                for i in 0..n {
                    let q = -h2 / (8.0 * m) * (2.0 * d[1][i] - g[i]) / (rho[i].max(0.0) + eps);
                    fq[i] *= 1.0 - q / mc2;
                }
            }
            (Variant::QuantumRelativistic, ChemicalForm::Exact) => {
                // rho d(s''''/s)/dx = s s^(5) - s' s^(4)
                let (s, _) = amplitude(rho);
                let ds = self.spectral.derivatives(&s, &[1, 4, 5]);
                for i in 0..n {
                    fq[i] -= h2 * h2 / (8.0 * m * m * mc2) * (s[i] * ds[2][i] - ds[0][i] * ds[1][i]);
                }
            }
            _ => {}
        }
        fq
    }

    /// Largest stable step for the current fields and the limiting process.
    pub fn stability_bound(&self, f: &HydroFields) -> (f64, &'static str) {
        let PhysicalSystem { m, b, kb_t, hbar, c, .. } = self.sys;
        let dx = self.grid.dx();
        let k = self.grid.nyquist();
        let mut bounds = vec![];
        let speed = sup_norm(&f.v) + (kb_t / m).sqrt();
        if self.variant == Variant::Classical && speed > 0.0 {
            bounds.push((SAFETY * dx / speed, "advection"));
        }
        if b > 0.0 {
            bounds.push((SAFETY * 2.5 * m / b, "friction"));
        }
        if self.variant != Variant::Classical {
            // Phase advance of the fastest mode, hbar k^2 / 2m (+ hbar^3 k^4 / 8 m^3 c^2).
            let mut rate = hbar * k * k / (2.0 * m);
            if self.variant == Variant::QuantumRelativistic {
                rate += hbar.powi(3) * k.powi(4) / (8.0 * m.powi(3) * c * c);
            }
            bounds.push((SAFETY * std::f64::consts::PI / rate, "quantum dispersion"));
        }
        bounds.into_iter().fold((f64::INFINITY, "none"), |a, b| if b.0 < a.0 { b } else { a })
    }

    /// Advance `n_steps` steps of `dt`; `observe(step, fields)` is called for step 0
    /// and after each step.
    pub fn evolve_with(
        &self,
        f: &mut HydroFields,
        dt: f64,
        n_steps: usize,
        mut observe: impl FnMut(usize, &HydroFields),
    ) -> Result<()> {
        self.check(f)?;
        require_positive("dt", dt)?;
        let (bound, limiting) = self.stability_bound(f);
        if dt > bound {
            return Err(Error::Unstable { dt, bound, limiting });
        }
        observe(0, f);
        if n_steps == 0 {
            return Ok(());
        }
        match self.variant {
            Variant::Classical => self.evolve_classical(f, dt, n_steps, observe),
            _ => self.evolve_quantum(f, dt, n_steps, observe),
        }
    }

    /// `sqrt(rho) exp(i S / hbar)` with `S = m int V dx`: the mean of `V` is
    /// integrated exactly, the rest spectrally.
    fn to_wave(&self, f: &HydroFields) -> Vec<Complex64> {
        let n = f.rho.len();
        let PhysicalSystem { m, hbar, .. } = self.sys;
        let mean = f.v.iter().sum::<f64>() / n as f64;
        let mut s: Vec<Complex64> = f.v.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
        self.spectral.forward(&mut s);
        let nyquist = self.grid.nyquist();
        for (z, &k) in s.iter_mut().zip(self.spectral.wavenumbers()) {
            *z = if k == 0.0 || k.abs() >= nyquist { Complex64::new(0.0, 0.0) } else { *z / Complex64::new(0.0, k) };
        }
        self.spectral.inverse(&mut s);
        let x0 = self.grid.x(argmax(&f.rho));
        (0..n)
            .map(|i| {
                let phase = m * (mean * (self.grid.x(i) - x0) + s[i].re) / hbar;
                Complex64::from_polar(f.rho[i].max(0.0).sqrt(), phase)
            })
            .collect()
    }

    /// Density and velocity of `psi`, with `V = 0` below the density floor.
    fn polar_fields(&self, psi: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let PhysicalSystem { m, hbar, .. } = self.sys;
        let rho: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        let eps = density_floor(&rho);
        let d = self.spectral.derivative_complex(psi, 1);
        let v = (0..psi.len())
            .map(|i| if rho[i] > eps { hbar * (psi[i].conj() * d[i]).im / (m * rho[i]) } else { 0.0 })
            .collect();
        (rho, v)
    }

    /// Exact solution of `dS/dt = -(U + mu - U - Q + k_B T ln rho) - b S / m` at
    /// fixed density over `h`, applied as a phase.
    fn phase_step(&self, psi: &mut [Complex64], h: f64) {
        let PhysicalSystem { m, b, kb_t, hbar, .. } = self.sys;
        let rho: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        let eps = density_floor(&rho);
        let correction = self.relativistic_correction(&rho);
        let (decay, gain) = if b > 0.0 { ((-b * h / m).exp(), -(-b * h / m).exp_m1() * m / b) } else { (1.0, h) };
        let phase = if b > 0.0 { unwrapped_phase(psi, argmax(&rho)) } else { vec![0.0; psi.len()] };
        for i in 0..psi.len() {
            let thermal = if kb_t > 0.0 { kb_t * (rho[i] + eps).ln() } else { 0.0 };
            let w = self.potential[i] + correction[i] + thermal;
            let shift = phase[i] * (decay - 1.0) - w * gain / hbar;
            psi[i] *= Complex64::from_polar(1.0, shift);
        }
    }

    /// `mu - U - Q`, nonzero only for the relativistic variant.
    fn relativistic_correction(&self, rho: &[f64]) -> Vec<f64> {
        if self.variant != Variant::QuantumRelativistic {
            return vec![0.0; rho.len()];
        }
        let (s, _) = amplitude(rho);
        let d = self.spectral.derivatives(&s, &[2, 4]);
        (0..s.len())
            .map(|i| {
                let full = quantum_part(&self.sys, s[i], d[0][i], d[1][i], self.variant, self.form);
                let bohm = quantum_part(&self.sys, s[i], d[0][i], d[1][i], Variant::QuantumNonrelativistic, self.form);
                full - bohm
            })
            .collect()
    }

    fn evolve_quantum(
        &self,
        f: &mut HydroFields,
        dt: f64,
        n_steps: usize,
        mut observe: impl FnMut(usize, &HydroFields),
    ) -> Result<()> {
        let PhysicalSystem { m, hbar, .. } = self.sys;
        let kinetic: Vec<Complex64> = self
            .spectral
            .wavenumbers()
            .iter()
            .map(|k| Complex64::from_polar(1.0, -hbar * k * k * dt / (2.0 * m)))
            .collect();
        let mut psi = self.to_wave(f);
        for step in 1..=n_steps {
            self.phase_step(&mut psi, 0.5 * dt);
            self.spectral.forward(&mut psi);
            psi.iter_mut().zip(&kinetic).for_each(|(z, k)| *z *= k);
            self.spectral.inverse(&mut psi);
            self.phase_step(&mut psi, 0.5 * dt);
            if !psi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite { step });
            }
            (f.rho, f.v) = self.polar_fields(&psi);
            observe(step, f);
        }
        Ok(())
    }

    /// Finite-volume tendencies of `(rho, J = rho V)`: minmod-limited
    /// reconstruction of `rho` and `V`, Rusanov flux with speed `|V| + sqrt(k_B T / m)`.
    fn classical_rhs(&self, rho: &[f64], j: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = rho.len();
        let PhysicalSystem { m, b, kb_t, .. } = self.sys;
        let dx = self.grid.dx();
        let v = velocity_of(rho, j);
        let cs2 = kb_t / m;
        let cs = cs2.sqrt();
        let minmod = |a: f64, b: f64| {
            if a * b <= 0.0 {
                0.0
            } else if a.abs() < b.abs() {
                a
            } else {
                b
            }
        };
        let slope = |u: &[f64], i: usize| minmod(u[i] - u[(i + n - 1) % n], u[(i + 1) % n] - u[i]);
        let sr: Vec<f64> = (0..n).map(|i| slope(rho, i)).collect();
        let sv: Vec<f64> = (0..n).map(|i| slope(&v, i)).collect();
        let faces: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let r = (i + 1) % n;
                let (rl, vl) = (rho[i] + 0.5 * sr[i], v[i] + 0.5 * sv[i]);
                let (rr, vr) = (rho[r] - 0.5 * sr[r], v[r] - 0.5 * sv[r]);
                let a = vl.abs().max(vr.abs()) + cs;
                let mass = 0.5 * (rl * vl + rr * vr) - 0.5 * a * (rr - rl);
                let momentum = 0.5 * (rl * (vl * vl + cs2) + rr * (vr * vr + cs2)) - 0.5 * a * (rr * vr - rl * vl);
                (mass, momentum)
            })
            .collect();
        let mut drho = vec![0.0; n];
        let mut dj = vec![0.0; n];
        for i in 0..n {
            let l = (i + n - 1) % n;
            drho[i] = -(faces[i].0 - faces[l].0) / dx;
            dj[i] = -(faces[i].1 - faces[l].1) / dx - (rho[i] * self.force[i] + b * j[i]) / m;
        }
        (drho, dj)
    }

    fn evolve_classical(
        &self,
        f: &mut HydroFields,
        dt: f64,
        n_steps: usize,
        mut observe: impl FnMut(usize, &HydroFields),
    ) -> Result<()> {
        let n = f.rho.len();
        let axpy = |a: &[f64], d: &[f64], h: f64| -> Vec<f64> { a.iter().zip(d).map(|(a, d)| a + h * d).collect() };
        let mut j: Vec<f64> = f.rho.iter().zip(&f.v).map(|(r, v)| r * v).collect();
        for step in 1..=n_steps {
            let (k1r, k1j) = self.classical_rhs(&f.rho, &j);
            let (k2r, k2j) = self.classical_rhs(&axpy(&f.rho, &k1r, 0.5 * dt), &axpy(&j, &k1j, 0.5 * dt));
            let (k3r, k3j) = self.classical_rhs(&axpy(&f.rho, &k2r, 0.5 * dt), &axpy(&j, &k2j, 0.5 * dt));
            let (k4r, k4j) = self.classical_rhs(&axpy(&f.rho, &k3r, dt), &axpy(&j, &k3j, dt));
            for i in 0..n {
                f.rho[i] += dt / 6.0 * (k1r[i] + 2.0 * (k2r[i] + k3r[i]) + k4r[i]);
                j[i] += dt / 6.0 * (k1j[i] + 2.0 * (k2j[i] + k3j[i]) + k4j[i]);
            }
            if !f.rho.iter().chain(&j).all(|x| x.is_finite()) {
                return Err(Error::NonFinite { step });
            }
            let min = f.rho.iter().fold(f64::INFINITY, |m: f64, &r| m.min(r));
            if min < -NEGATIVITY_LIMIT {
                return Err(Error::NegativeDensity { step, value: min });
            }
            clamp_preserving_mass(&mut f.rho);
            f.v = velocity_of(&f.rho, &j);
            observe(step, f);
        }
        Ok(())
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, &x)| if x > a.1 { (i, x) } else { a }).0
}

/// Phase of `psi` made continuous outward from node `start`.
fn unwrapped_phase(psi: &[Complex64], start: usize) -> Vec<f64> {
    let n = psi.len();
    let mut s = vec![0.0; n];
    s[start] = psi[start].arg();
    for i in start + 1..n {
        s[i] = s[i - 1] + (psi[i] * psi[i - 1].conj()).arg();
    }
    for i in (0..start).rev() {
        s[i] = s[i + 1] + (psi[i] * psi[i + 1].conj()).arg();
    }
    s
}

/// `J / rho` above the density floor, zero below it.
fn velocity_of(rho: &[f64], j: &[f64]) -> Vec<f64> {
    let eps = density_floor(rho);
    rho.iter().zip(j).map(|(&r, &j)| if r > eps { j / r } else { 0.0 }).collect()
}

/// Small negative round-off is cut to zero and the total rescaled so the mass is unchanged.
fn clamp_preserving_mass(rho: &mut [f64]) {
    let before: f64 = rho.iter().sum();
    let mut after = 0.0;
    for r in rho.iter_mut() {
        *r = r.max(0.0);
        after += *r;
    }
    if after > 0.0 && after != before {
        let scale = before / after;
        rho.iter_mut().for_each(|r| *r *= scale);
    }
}

/// `(d rho/dt, dV/dt)` for the chosen physics.
pub fn hydro_rhs(
    sys: &PhysicalSystem,
    pot: &Potential,
    fields: &HydroFields,
    variant: Variant,
    form: ChemicalForm,
) -> Result<(Vec<f64>, Vec<f64>)> {
    HydroSolver::new(sys, pot, fields.x, variant, form)?.rhs(fields)
}

/// Evolve in place by `n_steps` RK4 steps.
pub fn evolve(
    sys: &PhysicalSystem,
    pot: &Potential,
    fields: &mut HydroFields,
    dt: f64,
    n_steps: usize,
    variant: Variant,
    form: ChemicalForm,
) -> Result<()> {
    HydroSolver::new(sys, pot, fields.x, variant, form)?.evolve_with(fields, dt, n_steps, |_, _| {})
}

/// `int (rho m V^2 / 2 + rho U + hbar^2 (d sqrt(rho))^2 / 2m) dx`; the quantum
/// term is dropped for the classical variant.
pub fn energy_functional(sys: &PhysicalSystem, pot: &Potential, f: &HydroFields, variant: Variant) -> f64 {
    let s: Vec<f64> = f.rho.iter().map(|r| r.max(0.0).sqrt()).collect();
    let ds = if variant == Variant::Classical { vec![0.0; s.len()] } else { Spectral::new(&f.x).derivative(&s, 1) };
    let density: Vec<f64> = (0..s.len())
        .map(|i| {
            let r = f.rho[i];
            0.5 * sys.m * r * f.v[i] * f.v[i]
                + r * pot.value(f.x.x(i))
                + sys.hbar * sys.hbar * ds[i] * ds[i] / (2.0 * sys.m)
        })
        .collect();
    f.x.integrate(&density)
}

/// `int |rho b V + rho d(mu)/dx + k_B T d(rho)/dx| dx`: distance from the
/// overdamped force balance, weighted by density so empty regions do not count.
pub fn overdamped_residual(
    sys: &PhysicalSystem,
    pot: &Potential,
    f: &HydroFields,
    variant: Variant,
    form: ChemicalForm,
) -> f64 {
    let spectral = Spectral::new(&f.x);
    let (mu_q, _) = quantum_part_on_grid(sys, &spectral, &f.rho, variant, form);
    let dmu = spectral.derivative(&mu_q, 1);
    let drho = spectral.derivative(&f.rho, 1);
    let r: Vec<f64> = (0..f.rho.len())
        .map(|i| {
            let rho = f.rho[i];
            (rho * (sys.b * f.v[i] + pot.grad(f.x.x(i)) + dmu[i]) + sys.kb_t * drho[i]).abs()
        })
        .collect();
    f.x.integrate(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::l1_distance;
    use crate::wavefunction::Propagator;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// `max |a|` over nodes holding at least `1e-8` of the peak density.
    fn bulk_sup(rho: &[f64], a: &[f64]) -> f64 {
        let cut = 1e-8 * rho.iter().fold(0.0, |m: f64, &r| m.max(r));
        rho.iter().zip(a).filter(|(r, _)| **r > cut).fold(0.0, |m, (_, a)| m.max(a.abs()))
    }

    /// `max |rho dV/dt|`, the unbalanced force density.
    fn force_residual(rho: &[f64], dv: &[f64]) -> f64 {
        rho.iter().zip(dv).fold(0.0, |m, (r, d)| m.max((r * d).abs()))
    }

    fn gaussian(grid: &Grid, x0: f64, sigma: f64) -> Vec<f64> {
        let z = (2.0 * std::f64::consts::PI).sqrt() * sigma;
        grid.sample(|x| (-(x - x0) * (x - x0) / (2.0 * sigma * sigma)).exp() / z)
    }

    #[test]
    fn gaussian_quantum_potential() {
        let sys = PhysicalSystem { hbar: 0.7, m: 1.3, ..PhysicalSystem::natural() };
        let g = Grid::centered(256, 30.0).unwrap();
        let sigma = 1.2;
        let q = bohm_quantum_potential(&sys, &g, &gaussian(&g, 0.0, sigma)).unwrap();
        for i in 0..g.n {
            let x = g.x(i);
            if x.abs() < 5.0 {
                let exact = sys.hbar * sys.hbar / (4.0 * sys.m * sigma * sigma) * (1.0 - x * x / (2.0 * sigma * sigma));
                assert!((q[i] - exact).abs() < 1e-8, "{x} {} {exact}", q[i]);
            }
        }
    }

    #[test]
    fn uniform_density_has_no_quantum_potential() {
        let g = Grid::centered(32, 10.0).unwrap();
        let q = bohm_quantum_potential(&PhysicalSystem::natural(), &g, &vec![0.1; 32]).unwrap();
        assert!(sup_norm(&q) < 1e-14);
    }

    #[test]
    fn exponential_density_forms_agree() {
        // s = exp(-a z / 2): s'' = a^2 s / 4, s'''' = a^4 s / 16
        let sys = PhysicalSystem { c: 3.0, hbar: 0.8, m: 1.1, ..PhysicalSystem::natural() };
        let a: f64 = 1.7;
        for z in [0.0, 1.0, 4.0] {
            let s = (-0.5 * a * z).exp();
            let (s2, s4) = (a * a / 4.0 * s, a.powi(4) / 16.0 * s);
            let q = quantum_part(&sys, s, s2, s4, Variant::QuantumNonrelativistic, ChemicalForm::Exact);
            assert_relative_eq!(q, -sys.hbar * sys.hbar * a * a / (8.0 * sys.m), max_relative = 1e-14);
            let factor = 1.0 + sys.hbar.powi(2) * a * a / (16.0 * sys.m.powi(2) * sys.c.powi(2));
            for form in [ChemicalForm::Exact, ChemicalForm::QExpressed] {
                let mu = quantum_part(&sys, s, s2, s4, Variant::QuantumRelativistic, form);
                assert_relative_eq!(mu, q * factor, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn forms_coincide_as_c_grows() {
        let g = Grid::centered(128, 20.0).unwrap();
        let rho = gaussian(&g, 0.0, 1.0);
        let pot = Potential::Harmonic { k: 1.0 };
        let sys = PhysicalSystem { c: 1e6, ..PhysicalSystem::natural() };
        let exact = quantum_chemical_potential(&sys, &pot, &g, &rho, ChemicalForm::Exact).unwrap();
        let qexp = quantum_chemical_potential(&sys, &pot, &g, &rho, ChemicalForm::QExpressed).unwrap();
        let q = bohm_quantum_potential(&sys, &g, &rho).unwrap();
        for i in 0..g.n {
            let base = q[i] + pot.value(g.x(i));
            assert!((exact[i] - base).abs() < 1e-10 && (qexp[i] - base).abs() < 1e-10);
        }
    }

    #[test]
    fn gaussian_forms_differ() {
        // sigma = 1: s = exp(-x^2/4), s''/s = x^2/4 - 1/2 and s''''/s = 3/4 at x = 0,
        // so Q(0) = 1/4; with m c^2 = 4 the exact form gives 1/4 - 3/128 and the
        // Q-expressed form 1/4 - 1/128.
        let g = Grid::centered(128, 20.0).unwrap();
        let rho = gaussian(&g, 0.0, 1.0);
        let sys = PhysicalSystem { c: 2.0, ..PhysicalSystem::natural() };
        let a = quantum_chemical_potential(&sys, &Potential::Free, &g, &rho, ChemicalForm::Exact).unwrap();
        let b = quantum_chemical_potential(&sys, &Potential::Free, &g, &rho, ChemicalForm::QExpressed).unwrap();
        let i0 = g.n / 2;
        assert_relative_eq!(a[i0], 0.25 - 3.0 / 128.0, max_relative = 1e-9);
        assert_relative_eq!(b[i0], 0.25 - 1.0 / 128.0, max_relative = 1e-9);
    }

    #[test]
    fn boltzmann_profile_is_stationary() {
        let sys = PhysicalSystem { kb_t: 0.5, b: 1.0, ..PhysicalSystem::natural() };
        let pot = Potential::Harmonic { k: 1.0 };
        let g = Grid::centered(128, 20.0).unwrap();
        let f = HydroFields::new(g, gaussian(&g, 0.0, 0.5f64.sqrt()), vec![0.0; 128]).unwrap();
        let (dr, dv) = hydro_rhs(&sys, &pot, &f, Variant::Classical, ChemicalForm::QExpressed).unwrap();
        assert!(sup_norm(&dr) < 1e-14);
        let r = force_residual(&f.rho, &dv);
        assert!(r < 1e-13, "{r}");
    }

    #[test]
    fn ground_state_is_stationary() {
        let sys = PhysicalSystem { kb_t: 0.0, b: 0.0, c: 1e6, ..PhysicalSystem::natural() };
        let pot = Potential::Harmonic { k: 1.0 };
        let g = Grid::centered(128, 20.0).unwrap();
        let f = HydroFields::new(g, gaussian(&g, 0.0, 0.5f64.sqrt()), vec![0.0; 128]).unwrap();
        let (dr, dv) = hydro_rhs(&sys, &pot, &f, Variant::QuantumRelativistic, ChemicalForm::QExpressed).unwrap();
        assert!(sup_norm(&dr) < 1e-14);
        let r = force_residual(&f.rho, &dv);
        assert!(r < 1e-10, "{r}");
    }

    #[test]
    fn small_hbar_large_c_is_classical() {
        let pot = Potential::DoubleWell { alpha: 1.0, beta: 0.5 };
        let g = Grid::centered(128, 20.0).unwrap();
        let f = HydroFields::new(g, gaussian(&g, 0.3, 1.0), g.sample(|x| 0.1 * x.sin())).unwrap();
        let sys = PhysicalSystem { hbar: 1e-6, c: 1e6, kb_t: 0.3, ..PhysicalSystem::natural() };
        let (qr, qv) = hydro_rhs(&sys, &pot, &f, Variant::QuantumRelativistic, ChemicalForm::QExpressed).unwrap();
        let (cr, cv) = hydro_rhs(&sys, &pot, &f, Variant::Classical, ChemicalForm::QExpressed).unwrap();
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d(&qr, &cr) < 1e-10 && d(&qv, &cv) < 1e-10);
    }

    #[test]
    fn classical_output_ignores_hbar_and_c() {
        let pot = Potential::Harmonic { k: 1.0 };
        let g = Grid::centered(64, 16.0).unwrap();
        let run = |hbar: f64, c: f64| {
            let sys = PhysicalSystem { hbar, c, kb_t: 0.2, b: 0.5, ..PhysicalSystem::natural() };
            let mut f = HydroFields::new(g, gaussian(&g, 1.0, 1.0), vec![0.0; 64]).unwrap();
            evolve(&sys, &pot, &mut f, 1e-3, 200, Variant::Classical, ChemicalForm::Exact).unwrap();
            f
        };
        assert_eq!(run(1.0, 1.0), run(0.3, 50.0));
    }

    #[test]
    fn zero_steps_is_identity_and_mass_is_conserved() {
        let sys = PhysicalSystem { c: 10.0, kb_t: 0.1, ..PhysicalSystem::natural() };
        let pot = Potential::Harmonic { k: 1.0 };
        let g = Grid::centered(128, 20.0).unwrap();
        let f0 = HydroFields::new(g, gaussian(&g, 1.0, 0.8), vec![0.0; 128]).unwrap();
        let mut f = f0.clone();
        evolve(&sys, &pot, &mut f, 1e-3, 0, Variant::QuantumRelativistic, ChemicalForm::QExpressed).unwrap();
        assert_eq!(f, f0);
        evolve(&sys, &pot, &mut f, 2e-3, 1000, Variant::QuantumRelativistic, ChemicalForm::QExpressed).unwrap();
        assert!((f.mass() - f0.mass()).abs() < 1e-8);
    }

    #[test]
    fn matches_schrodinger_for_a_coherent_state() {
        let sys = PhysicalSystem { kb_t: 0.0, b: 0.0, c: 1e6, ..PhysicalSystem::natural() };
        let pot = Potential::Harmonic { k: 1.0 };
        let g = Grid::centered(128, 16.0).unwrap();
        let mut psi = WaveField::coherent_state(g, &sys, 1.0, 1.0, 0.0).unwrap();
        let mut hydro = HydroFields::from_wave(&sys, &psi);
        let dt = 2e-3;
        let n = (std::f64::consts::PI / dt).round() as usize;
        evolve(&sys, &pot, &mut hydro, dt, n, Variant::QuantumRelativistic, ChemicalForm::QExpressed).unwrap();
        Propagator::new(&sys, &pot, g, dt).unwrap().run(&mut psi, n).unwrap();
        let err = l1_distance(&hydro.rho, &psi.density(), g.dx());
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn split_steps_follow_the_pointwise_tendencies() {
        let sys = PhysicalSystem { kb_t: 0.3, b: 0.7, c: 6.0, ..PhysicalSystem::natural() };
        let pot = Potential::DoubleWell { alpha: 1.0, beta: 0.5 };
        let g = Grid::centered(256, 24.0).unwrap();
        for form in [ChemicalForm::QExpressed, ChemicalForm::Exact] {
            let f0 = HydroFields::new(g, gaussian(&g, 0.4, 0.9), g.sample(|x| 0.2 * (-(x * x) / 8.0).exp())).unwrap();
            let solver = HydroSolver::new(&sys, &pot, g, Variant::QuantumRelativistic, form).unwrap();
            let (dr, dv) = solver.rhs(&f0).unwrap();
            let dt = 1e-4;
            let mut f = f0.clone();
            solver.evolve_with(&mut f, dt, 1, |_, _| {}).unwrap();
            let fd_r: Vec<f64> = (0..g.n).map(|i| (f.rho[i] - f0.rho[i]) / dt - dr[i]).collect();
            let fd_v: Vec<f64> = (0..g.n).map(|i| (f.v[i] - f0.v[i]) / dt - dv[i]).collect();
            let scale_r = sup_norm(&dr);
            let scale_v = bulk_sup(&f0.rho, &dv);
            let cut: Vec<f64> = f0.rho.iter().map(|&r| if r > 1e-4 { r } else { 0.0 }).collect();
            assert!(bulk_sup(&cut, &fd_r) < 1e-2 * scale_r, "{form:?} rho {} vs {scale_r}", bulk_sup(&cut, &fd_r));
            assert!(bulk_sup(&cut, &fd_v) < 1e-2 * scale_v, "{form:?} v {} vs {scale_v}", bulk_sup(&cut, &fd_v));
        }
    }

    #[test]
    fn relativistic_correction_scales_as_inverse_c_squared() {
        let pot = Potential::Harmonic { k: 1.0 };
        let g = Grid::centered(128, 16.0).unwrap();
        let run = |variant: Variant, c: f64| {
            let sys = PhysicalSystem { kb_t: 0.0, b: 0.0, c, ..PhysicalSystem::natural() };
            let mut f = HydroFields::new(g, gaussian(&g, 1.0, 0.6), vec![0.0; 128]).unwrap();
            evolve(&sys, &pot, &mut f, 1e-3, 1000, variant, ChemicalForm::QExpressed).unwrap();
            f.rho
        };
        let cs = [10.0, 20.0, 40.0];
        let diffs: Vec<f64> = cs
            .iter()
            .map(|&c| {
                l1_distance(&run(Variant::QuantumRelativistic, c), &run(Variant::QuantumNonrelativistic, c), g.dx())
            })
            .collect();
        let slope = crate::quadrature::log_log_slope(&cs, &diffs);
        assert!((slope + 2.0).abs() < 0.2, "{slope} {diffs:?}");
    }

    #[test]
    fn friction_never_raises_the_energy() {
        let sys = PhysicalSystem { kb_t: 0.0, b: 0.5, c: 20.0, ..PhysicalSystem::natural() };
        let pot = Potential::Harmonic { k: 1.0 };
        let g = Grid::centered(128, 16.0).unwrap();
        let mut f = HydroFields::new(g, gaussian(&g, 1.5, 0.8), vec![0.0; 128]).unwrap();
        let solver =
            HydroSolver::new(&sys, &pot, g, Variant::QuantumNonrelativistic, ChemicalForm::QExpressed).unwrap();
        let mut last = f64::INFINITY;
        let mut worst = f64::NEG_INFINITY;
        solver
            .evolve_with(&mut f, 2e-3, 1500, |_, s| {
                let e = energy_functional(&sys, &pot, s, Variant::QuantumNonrelativistic);
                worst = worst.max(e - last);
                last = e;
            })
            .unwrap();
        assert!(worst <= 1e-12, "energy rose by {worst:e}");
    }

    #[test]
    fn strong_friction_approaches_overdamped_balance() {
        let pot = Potential::Harmonic { k: 1.0 };
        let g = Grid::centered(64, 16.0).unwrap();
        let res = |b: f64| {
            let sys = PhysicalSystem { kb_t: 0.5, b, ..PhysicalSystem::natural() };
            let mut f = HydroFields::new(g, gaussian(&g, 1.0, 1.5), vec![0.0; 64]).unwrap();
            let dt = 0.5
                * HydroSolver::new(&sys, &pot, g, Variant::Classical, ChemicalForm::QExpressed)
                    .unwrap()
                    .stability_bound(&f)
                    .0
                    .min(1e-2);
            evolve(&sys, &pot, &mut f, dt, (1.0 / dt).round() as usize, Variant::Classical, ChemicalForm::QExpressed)
                .unwrap();
            overdamped_residual(&sys, &pot, &f, Variant::Classical, ChemicalForm::QExpressed)
        };
        let (r5, r20) = (res(5.0), res(20.0));
        assert!(r20 < r5, "{r5} {r20}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn rhs_conserves_mass(x0 in -1.0f64..1.0, sigma in 0.6f64..2.0, amp in -0.5f64..0.5) {
            let sys = PhysicalSystem { c: 5.0, kb_t: 0.2, b: 0.3, ..PhysicalSystem::natural() };
            let g = Grid::centered(64, 20.0).unwrap();
            let f = HydroFields::new(g, gaussian(&g, x0, sigma), g.sample(|x| amp * (x * 0.3).sin())).unwrap();
            let (dr, _) = hydro_rhs(&sys, &Potential::Harmonic { k: 1.0 }, &f, Variant::QuantumRelativistic, ChemicalForm::Exact).unwrap();
            prop_assert!(g.integrate(&dr).abs() < 1e-14);
        }
    }
}
