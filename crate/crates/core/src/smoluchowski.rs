//! Overdamped quantum-relativistic diffusion
//!
//! `d rho/dt = d/dx [ rho d(mu)/dx / b + D d(rho)/dx ]`, `D = k_B T / b`,
//!
//! with the chemical potential `mu = U + (1 - Q/2mc^2) Q` (or the exact
//! Breit-Fermi sandwich, see [`ChemicalForm`]). Also the linearised
//! high-temperature effective potential `U + lambda_T^2 U'' + lambda_C^2 lambda_T^2 U''''`
//! and the cubic-friction law `d rho/dt = d/dx [ rho cbrt(d g/dx / b3) ]`,
//! `g = mu + k_B T ln rho`.
//!
//! Spatial discretisation is a flux form on the periodic grid. The face flux of the
//! overdamped equation is the Scharfetter-Gummel flux
//! `F = [w(-Delta mu) rho_r - w(Delta mu) rho_l] / (b dx)`, `w(d) = d / (exp(d / k_B T) - 1)`,
//! which vanishes exactly when `rho_r / rho_l = exp(-Delta mu / k_B T)`, is central
//! for small `Delta mu / k_B T` and upwind for large. The cubic law uses the
//! logarithmic face mean `rho_lm = (rho_r - rho_l) / (ln rho_r - ln rho_l)`, so
//! both laws stop on densities with a flat discrete `g`. `mu` itself uses spectral
//! derivatives of `sqrt(rho)`.

use serde::{Deserialize, Serialize};

use crate::constants::{compton_wavelength, thermal_wavelength, PhysicalSystem};
use crate::error::{require_positive, Error, Result};
use crate::grid::{Grid, Spectral};
use crate::madelung::{quantum_part_on_grid, warn_floored, ChemicalForm, Variant};
use crate::potentials::Potential;
use crate::quadrature::sup_norm;

/// Safety factor applied to the explicit drift limits.
pub const SAFETY: f64 = 0.4;

/// Depth of negative density tolerated before a run is aborted.
pub const NEGATIVITY_LIMIT: f64 = 1e-10;

/// Faces whose density is below this fraction of the peak do not limit the step.
const BULK: f64 = 1e-8;

/// How the density inside the quantum potential is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// `Q` is evaluated on the evolving density.
    #[default]
    SelfConsistent,
    /// `Q` is frozen at the Boltzmann density `exp(-U / k_B T)`, which makes the
    /// equation linear.
    QuasiEquilibrium,
}

/// Probability density on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub x: Grid,
    pub rho: Vec<f64>,
}

impl DensityField {
    pub fn new(x: Grid, rho: Vec<f64>) -> Result<Self> {
        x.validate()?;
        if rho.len() != x.n {
            return Err(Error::Domain(format!("density has {} samples but the grid has {}", rho.len(), x.n)));
        }
        if let Some(r) = rho.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(Error::Domain(format!("density must be finite and non-negative, found {r}")));
        }
        Ok(Self { x, rho })
    }

    /// Normalised `exp(-(x - x0)^2 / 2 sigma^2)`.
    pub fn gaussian(x: Grid, x0: f64, sigma: f64) -> Result<Self> {
        require_positive("sigma", sigma)?;
        let mut f = Self::new(x, x.sample(|y| (-(y - x0).powi(2) / (2.0 * sigma * sigma)).exp()))?;
        f.normalize()?;
        Ok(f)
    }

    /// Normalised Boltzmann density `exp(-U / k_B T)`.
    pub fn boltzmann(sys: &PhysicalSystem, pot: &Potential, x: Grid) -> Result<Self> {
        require_positive("kb_t", sys.kb_t)?;
        let u = pot.sample_on_grid(&x, 0);
        let u_min = u.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut f = Self::new(x, u.iter().map(|u| (-(u - u_min) / sys.kb_t).exp()).collect())?;
        f.normalize()?;
        Ok(f)
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

    pub fn mean(&self) -> f64 {
        let xr: Vec<f64> = (0..self.x.n).map(|i| self.x.x(i) * self.rho[i]).collect();
        self.x.integrate(&xr) / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let v: Vec<f64> = (0..self.x.n).map(|i| (self.x.x(i) - mu).powi(2) * self.rho[i]).collect();
        self.x.integrate(&v) / self.mass()
    }
}

/// Logarithmic mean of two densities; zero if either is not positive.
#[inline]
fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let u = (b - a) / (b + a);
    if u.abs() < 1e-3 {
        // u / atanh(u) = 1 - u^2/3 - 4u^4/45 - ...
        let u2 = u * u;
        0.5 * (a + b) * (1.0 - u2 / 3.0 - 4.0 * u2 * u2 / 45.0)
    } else {
        (b - a) / (b.ln() - a.ln())
    }
}

/// `ln rho_r - ln rho_l`, zero when the face density vanishes anyway.
#[inline]
fn log_difference(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        (b / a).ln()
    }
}

/// `d / (exp(d / k_B T) - 1)`, the Scharfetter-Gummel weight; `max(-d, 0)` at `k_B T = 0`.
#[inline]
fn bernoulli_weight(d: f64, kt: f64) -> f64 {
    if kt <= 0.0 {
        return (-d).max(0.0);
    }
    let p = d / kt;
    if p.abs() < 1e-6 {
        kt * (1.0 - 0.5 * p + p * p / 12.0)
    } else {
        d / p.exp_m1()
    }
}

/// Effective face diffusivity `D (P/2) coth(P/2)` times `b`, which is at least
/// `max(k_B T, |d| / 2)`.
#[inline]
fn effective_diffusion(d: f64, kt: f64) -> f64 {
    0.5 * (bernoulli_weight(d, kt) + bernoulli_weight(-d, kt))
}

/// Chemical potential without the entropic term, on one grid.
#[derive(Debug, Clone)]
struct Chemistry {
    sys: PhysicalSystem,
    grid: Grid,
    spectral: Spectral,
    u: Vec<f64>,
    variant: Variant,
    form: ChemicalForm,
    frozen: Option<Vec<f64>>,
}

impl Chemistry {
    fn new(sys: &PhysicalSystem, pot: &Potential, grid: Grid, variant: Variant, form: ChemicalForm) -> Result<Self> {
        sys.validate()?;
        pot.validate()?;
        grid.validate()?;
        Ok(Self {
            sys: *sys,
            grid,
            spectral: Spectral::new(&grid),
            u: pot.sample_on_grid(&grid, 0),
            variant,
            form,
            frozen: None,
        })
    }

    fn freeze_at_boltzmann(&mut self) -> Result<()> {
        let rho_b = boltzmann_on(&self.sys, &self.u)?;
        let (q, floored) = quantum_part_on_grid(&self.sys, &self.spectral, &rho_b, self.variant, self.form);
        warn_floored(floored, rho_b.len());
        self.frozen = Some(q);
        Ok(())
    }

    fn check(&self, f: &DensityField) -> Result<()> {
        if f.x != self.grid || f.rho.len() != self.grid.n {
            return Err(Error::Domain("density does not match the solver grid".into()));
        }
        Ok(())
    }

    /// `U + mu_q(rho)`.
    fn potential(&self, rho: &[f64]) -> Vec<f64> {
        match &self.frozen {
            Some(q) => self.u.iter().zip(q).map(|(u, q)| u + q).collect(),
            None => {
                let (q, _) = quantum_part_on_grid(&self.sys, &self.spectral, rho, self.variant, self.form);
                self.u.iter().zip(&q).map(|(u, q)| u + q).collect()
            }
        }
    }

    /// Face differences `Delta g_{i+1/2} = g_{i+1} - g_i` of `g = mu + k_B T ln rho`
    /// and the face densities `rho_lm`.
    fn face_gradients(&self, rho: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = rho.len();
        let mu = self.potential(rho);
        let kt = self.sys.kb_t;
        let mut dg = vec![0.0; n];
        let mut rf = vec![0.0; n];
        for i in 0..n {
            let j = (i + 1) % n;
            dg[i] = mu[j] - mu[i] + kt * log_difference(rho[i], rho[j]);
            rf[i] = log_mean(rho[i], rho[j]);
        }
        (dg, rf)
    }
}

fn boltzmann_on(sys: &PhysicalSystem, u: &[f64]) -> Result<Vec<f64>> {
    require_positive("kb_t", sys.kb_t)?;
    let u_min = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let rho: Vec<f64> = u.iter().map(|u| (-(u - u_min) / sys.kb_t).exp()).collect();
    let total: f64 = rho.iter().sum();
    Ok(rho.iter().map(|r| r / total).collect())
}

/// `(F_{i+1/2} - F_{i-1/2}) / dx` with `face[i] = F_{i+1/2}`.
fn divergence(face: &[f64], dx: f64) -> Vec<f64> {
    let n = face.len();
    (0..n).map(|i| (face[i] - face[(i + n - 1) % n]) / dx).collect()
}

/// `x = A^{-1} r` for the symmetric circulant tridiagonal `A = tridiag(-r, 1 + 2r, -r)`,
/// by the Thomas algorithm and a Sherman-Morrison correction for the corners.
#[derive(Debug, Clone)]
struct ImplicitDiffusion {
    off: f64,
    gamma: f64,
    c_prime: Vec<f64>,
    denom: Vec<f64>,
    z: Vec<f64>,
    fact_den: f64,
}

impl ImplicitDiffusion {
    fn new(n: usize, r: f64) -> Self {
        let (off, diag) = (-r, 1.0 + 2.0 * r);
        let gamma = -diag;
        let mut bb = vec![diag; n];
        bb[0] = diag - gamma;
        bb[n - 1] = diag - off * off / gamma;
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = bb[0];
        for i in 1..n {
            c_prime[i - 1] = off / denom[i - 1];
            denom[i] = bb[i] - off * c_prime[i - 1];
        }
        let mut solver = Self { off, gamma, c_prime, denom, z: vec![], fact_den: 0.0 };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = off;
        let z = solver.thomas(&u);
        solver.fact_den = 1.0 + z[0] + off * z[n - 1] / gamma;
        solver.z = z;
        solver
    }

    fn thomas(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut x = vec![0.0; n];
        x[0] = rhs[0] / self.denom[0];
        for i in 1..n {
            x[i] = (rhs[i] - self.off * x[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.c_prime[i] * x[i + 1];
        }
        x
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut x = self.thomas(rhs);
        let fact = (x[0] + self.off * x[n - 1] / self.gamma) / self.fact_den;
        x.iter_mut().zip(&self.z).for_each(|(x, z)| *x -= fact * z);
        x
    }
}

/// Stopping rule and bookkeeping for [`SmoluchowskiSolver::evolve_to_stationary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaryOptions {
    pub dt: f64,
    /// Stop once `max |d rho/dt| < tol`.
    pub tol: f64,
    pub max_steps: usize,
    /// Record the residual every this many steps.
    pub history_stride: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self { dt: 1e-3, tol: 1e-10, max_steps: 5_000_000, history_stride: 1000 }
    }
}

/// Outcome of a run to stationarity.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub field: DensityField,
    pub steps: usize,
    pub time: f64,
    /// `max |d rho/dt|` over the last step.
    pub residual: f64,
    /// `max |F|` of the total face flux at the returned density.
    pub flux_residual: f64,
    /// Largest drift speed `|d mu/dx| / b` where `rho > 1e-8 max rho`; reported only.
    pub max_drift_speed: f64,
    pub history: Vec<f64>,
}

/// Semi-implicit integrator: implicit diffusion, explicit drift.
#[derive(Debug, Clone)]
pub struct SmoluchowskiSolver {
    chem: Chemistry,
}

impl SmoluchowskiSolver {
    pub fn new(
        sys: &PhysicalSystem,
        pot: &Potential,
        grid: Grid,
        variant: Variant,
        form: ChemicalForm,
    ) -> Result<Self> {
        require_positive("b", sys.b)?;
        Ok(Self { chem: Chemistry::new(sys, pot, grid, variant, form)? })
    }

    pub fn with_closure(mut self, closure: Closure) -> Result<Self> {
        match closure {
            Closure::SelfConsistent => self.chem.frozen = None,
            Closure::QuasiEquilibrium => self.chem.freeze_at_boltzmann()?,
        }
        Ok(self)
    }

    pub fn grid(&self) -> Grid {
        self.chem.grid
    }

    /// `U + mu_q` on the grid (no entropic term).
    pub fn chemical_potential(&self, f: &DensityField) -> Result<Vec<f64>> {
        self.chem.check(f)?;
        Ok(self.chem.potential(&f.rho))
    }

    /// Total face fluxes `F_{i+1/2}` (Scharfetter-Gummel); positive moves mass left.
    fn fluxes(&self, rho: &[f64]) -> Vec<f64> {
        let n = rho.len();
        let kt = self.chem.sys.kb_t;
        let scale = 1.0 / (self.chem.sys.b * self.chem.grid.dx());
        let mu = self.chem.potential(rho);
        (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                let d = mu[j] - mu[i];
                (bernoulli_weight(-d, kt) * rho[j] - bernoulli_weight(d, kt) * rho[i]) * scale
            })
            .collect()
    }

    /// The part of [`Self::fluxes`] treated explicitly: all but `k_B T Delta rho / (b dx)`.
    fn explicit_fluxes(&self, rho: &[f64]) -> Vec<f64> {
        let n = rho.len();
        let kt = self.chem.sys.kb_t;
        let scale = 1.0 / (self.chem.sys.b * self.chem.grid.dx());
        self.fluxes(rho).iter().enumerate().map(|(i, f)| f - kt * (rho[(i + 1) % n] - rho[i]) * scale).collect()
    }

    /// `d rho / dt`.
    pub fn rhs(&self, f: &DensityField) -> Result<Vec<f64>> {
        self.chem.check(f)?;
        Ok(divergence(&self.fluxes(&f.rho), self.chem.grid.dx()))
    }

    /// Largest stable step for the explicit drift and the limiting process.
    pub fn stability_bound(&self, f: &DensityField) -> (f64, &'static str) {
        let PhysicalSystem { m, b, kb_t, hbar, c, .. } = self.chem.sys;
        let dx = self.chem.grid.dx();
        let mu = self.chem.potential(&f.rho);
        let n = mu.len();
        // Faces carrying a negligible density are held in check by the flux limiter.
        let cut = BULK * f.rho.iter().cloned().fold(0.0, f64::max);
        let mut bounds = vec![];
        // Per face: central advection a = |Delta mu| / (b dx) with explicit extra
        // diffusion D' = D_eff - D against implicit D is stable for
        // dt <= 2 D_eff / a^2 and dt <= dx^2 / 2 D'.
        let drift = (0..n)
            .filter(|&i| log_mean(f.rho[i], f.rho[(i + 1) % n]) > cut)
            .map(|i| {
                let d = mu[(i + 1) % n] - mu[i];
                let a = d.abs() / (b * dx);
                let d_eff = effective_diffusion(d, kb_t) / b;
                let extra = d_eff - kb_t / b;
                let mut bound = if a > 0.0 { 2.0 * d_eff / (a * a) } else { f64::INFINITY };
                if extra > 0.0 {
                    bound = bound.min(dx * dx / (2.0 * extra));
                }
                bound
            })
            .fold(f64::INFINITY, f64::min);
        if drift.is_finite() {
            bounds.push((SAFETY * drift, "drift"));
        }
        if self.chem.variant != Variant::Classical && self.chem.frozen.is_none() {
            // Linearised Q-drift is hyperdiffusion hbar^2 d^4 / 4mb, enhanced by
            // (1 + |Q|/mc^2) in the Q-expressed relativistic form.
            let k = self.chem.grid.nyquist();
            let mut rate = hbar * hbar * k * k / (4.0 * m) * 4.0 / (dx * dx) / b;
            if self.chem.variant == Variant::QuantumRelativistic && self.chem.form == ChemicalForm::QExpressed {
                let q_max =
                    (0..n).filter(|&i| f.rho[i] > cut).map(|i| (mu[i] - self.chem.u[i]).abs()).fold(0.0, f64::max);
                rate *= 1.0 + 2.0 * q_max / (m * c * c);
            }
            bounds.push((SAFETY * 2.0 / rate, "quantum drift"));
        }
        bounds.into_iter().fold((f64::INFINITY, "none"), |a, b| if b.0 < a.0 { b } else { a })
    }

    fn check_run(&self, f: &DensityField, dt: f64) -> Result<ImplicitDiffusion> {
        self.chem.check(f)?;
        require_positive("dt", dt)?;
        if self.chem.variant == Variant::QuantumRelativistic {
            let k_limit = 1.0 / compton_wavelength(&self.chem.sys)?;
            let k_nyquist = self.chem.grid.nyquist();
            if k_nyquist >= k_limit {
                return Err(Error::ExpansionInvalid { k_nyquist, k_limit });
            }
        }
        let (bound, limiting) = self.stability_bound(f);
        if dt > bound {
            return Err(Error::Unstable { dt, bound, limiting });
        }
        let dx = self.chem.grid.dx();
        let r = dt * self.chem.sys.kb_t / (self.chem.sys.b * dx * dx);
        Ok(ImplicitDiffusion::new(self.chem.grid.n, r))
    }

    fn step(&self, implicit: &ImplicitDiffusion, rho: &[f64], dt: f64, step: usize) -> Result<Vec<f64>> {
        let dx = self.chem.grid.dx();
        let n = rho.len();
        let mut faces = self.explicit_fluxes(rho);
        // Neither neighbour may lose more than half its content through one face;
        // this only bites where the density is negligible and Q is round-off.
        for (i, g) in faces.iter_mut().enumerate() {
            let cap = 0.5 * rho[i].min(rho[(i + 1) % n]) * dx / dt;
            *g = g.clamp(-cap, cap);
        }
        let div = divergence(&faces, dx);
        let explicit: Vec<f64> = rho.iter().zip(&div).map(|(r, d)| r + dt * d).collect();
        let mut next = implicit.solve(&explicit);
        let mut lowest = 0.0f64;
        for r in next.iter_mut() {
            if !r.is_finite() {
                return Err(Error::NonFinite { step });
            }
            lowest = lowest.min(*r);
            // Round-off below zero is harmless; ln and the face mean treat it as empty.
            if *r < 0.0 {
                *r = 0.0;
            }
        }
        if lowest < -NEGATIVITY_LIMIT {
            return Err(Error::NegativeDensity { step, value: lowest });
        }
        Ok(next)
    }

    /// Advance `n_steps` steps of `dt`; `observe(step, field)` is called for step 0
    /// and after each step.
    pub fn evolve_with(
        &self,
        f: &mut DensityField,
        dt: f64,
        n_steps: usize,
        mut observe: impl FnMut(usize, &DensityField),
    ) -> Result<()> {
        let implicit = self.check_run(f, dt)?;
        observe(0, f);
        for step in 1..=n_steps {
            f.rho = self.step(&implicit, &f.rho, dt, step)?;
            observe(step, f);
        }
        Ok(())
    }

    /// Step until `max |d rho/dt| < tol`.
    pub fn evolve_to_stationary(&self, rho0: &DensityField, opts: &StationaryOptions) -> Result<Stationary> {
        require_positive("tol", opts.tol)?;
        let dt = opts.dt;
        let implicit = self.check_run(rho0, dt)?;
        let stride = opts.history_stride.max(1);
        let mut rho = rho0.rho.clone();
        let mut history = vec![];
        let mut residual = f64::INFINITY;
        for step in 1..=opts.max_steps {
            let next = self.step(&implicit, &rho, dt, step)?;
            residual = next.iter().zip(&rho).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / dt;
            rho = next;
            if step % stride == 0 {
                history.push(residual);
            }
            if residual < opts.tol {
                let field = DensityField { x: rho0.x, rho };
                let flux_residual = sup_norm(&self.fluxes(&field.rho));
                let max_drift_speed = self.max_drift_speed(&field.rho);
                log::debug!("stationary after {step} steps, residual {residual:e}");
                return Ok(Stationary {
                    field,
                    steps: step,
                    time: step as f64 * dt,
                    residual,
                    flux_residual,
                    max_drift_speed,
                    history,
                });
            }
        }
        Err(Error::NoConvergence { steps: opts.max_steps, residual, history })
    }

    fn max_drift_speed(&self, rho: &[f64]) -> f64 {
        let cut = BULK * rho.iter().cloned().fold(0.0, f64::max);
        let mu = self.chem.potential(rho);
        let dmu = self.chem.spectral.derivative(&mu, 1);
        (0..rho.len()).filter(|&i| rho[i] > cut).map(|i| dmu[i].abs() / self.chem.sys.b).fold(0.0, f64::max)
    }
}

/// `d rho/dt` of the overdamped equation.
pub fn smoluchowski_rhs(
    sys: &PhysicalSystem,
    pot: &Potential,
    field: &DensityField,
    variant: Variant,
    form: ChemicalForm,
) -> Result<Vec<f64>> {
    SmoluchowskiSolver::new(sys, pot, field.x, variant, form)?.rhs(field)
}

/// Semi-implicit run to the stationary density.
pub fn evolve_to_stationary(
    sys: &PhysicalSystem,
    pot: &Potential,
    rho0: &DensityField,
    variant: Variant,
    form: ChemicalForm,
    opts: &StationaryOptions,
) -> Result<Stationary> {
    SmoluchowskiSolver::new(sys, pot, rho0.x, variant, form)?.evolve_to_stationary(rho0, opts)
}

/// Signed cube root.
#[inline]
pub fn signed_cbrt(y: f64) -> f64 {
    y.cbrt()
}

/// `d rho/dt = d/dx [ rho cbrt(d(mu + k_B T ln rho)/dx / b3) ]` in the same flux form
/// as [`smoluchowski_rhs`]; both vanish on the same densities.
pub fn cubic_friction_rhs(
    sys: &PhysicalSystem,
    pot: &Potential,
    field: &DensityField,
    variant: Variant,
    form: ChemicalForm,
) -> Result<Vec<f64>> {
    require_positive("b3", sys.b3)?;
    let chem = Chemistry::new(sys, pot, field.x, variant, form)?;
    chem.check(field)?;
    let dx = field.x.dx();
    let (dg, rf) = chem.face_gradients(&field.rho);
    Ok(divergence(&cubic_fluxes(&dg, &rf, dx, sys.b3), dx))
}

fn cubic_fluxes(dg: &[f64], rho_face: &[f64], dx: f64, b3: f64) -> Vec<f64> {
    dg.iter().zip(rho_face).map(|(g, r)| r * signed_cbrt(g / (dx * b3))).collect()
}

/// Analytic double-well results for `U = beta x^4 - 2 alpha x^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleWellAnalysis {
    /// Coefficients of `U_eff = quartic x^4 + quadratic x^2 + constant`.
    pub quartic: f64,
    pub quadratic: f64,
    pub constant: f64,
    /// `E_a = beta (alpha/beta - 6 lambda_T^2)^2`; zero once the barrier has gone.
    pub barrier: f64,
    /// `T = 3 beta hbar^2 / (2 alpha m k_B)`; independent of `c`.
    pub t_zero_barrier: f64,
}

/// Analytic cosine results for `U = u0 cos(q x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineAnalysis {
    /// `1 - (1 - lambda_C^2 q^2) lambda_T^2 q^2`, with `U_eff = factor * U`.
    pub factor: f64,
    /// `lambda_C^2 q^2 (1 - lambda_C^2 q^2) m c^2 / k_B`; `None` when not positive.
    pub t_free: Option<f64>,
    /// The factor with `lambda_C q = 1` substituted: exactly 1 at every temperature.
    pub factor_at_inverse_compton: f64,
    /// `lambda_C^2 q^2 <= 1`.
    pub within_expansion: bool,
}

/// `U_eff` on a grid plus whatever closed forms the potential admits.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivePotentialReport {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub u_eff: Vec<f64>,
    pub lambda_t: f64,
    pub lambda_c: f64,
    /// Barrier of the sampled `U_eff` (see [`grid_barrier`]).
    pub barrier: f64,
    pub double_well: Option<DoubleWellAnalysis>,
    pub cosine: Option<CosineAnalysis>,
}

fn effective_potential_at(pot: &Potential, x: f64, lt2: f64, lc2: f64) -> f64 {
    pot.value(x) + lt2 * pot.laplacian(x) + lc2 * lt2 * pot.bilaplacian(x)
}

/// `U + lambda_T^2 U'' + lambda_C^2 lambda_T^2 U''''` from the analytic derivatives.
pub fn effective_potential_numeric(
    sys: &PhysicalSystem,
    pot: &Potential,
    grid: &Grid,
) -> Result<EffectivePotentialReport> {
    sys.validate()?;
    pot.validate()?;
    grid.validate()?;
    let lambda_t = thermal_wavelength(sys)?;
    let lambda_c = compton_wavelength(sys)?;
    let (lt2, lc2) = (lambda_t * lambda_t, lambda_c * lambda_c);
    let x = grid.points();
    let u = x.iter().map(|&x| pot.value(x)).collect();
    let u_eff: Vec<f64> = x.iter().map(|&x| effective_potential_at(pot, x, lt2, lc2)).collect();
    let barrier = grid_barrier(&u_eff);
    let (double_well, cosine) = match *pot {
        Potential::DoubleWell { alpha, beta } => (Some(double_well_analysis(sys, alpha, beta)?), None),
        Potential::Cosine { q, .. } => (None, Some(cosine_analysis(sys, q)?)),
        _ => (None, None),
    };
    Ok(EffectivePotentialReport { x, u, u_eff, lambda_t, lambda_c, barrier, double_well, cosine })
}

/// Barrier height of sampled values: the highest point on the way from the global
/// minimum to the deepest other interior local minimum, relative to the global
/// minimum. Zero when there is only one well.
pub fn grid_barrier(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let g = (0..n).fold(0, |a, i| if v[i] < v[a] { i } else { a });
    let other = (1..n - 1)
        .filter(|&i| i != g && v[i] <= v[i - 1] && v[i] <= v[i + 1] && (v[i] < v[i - 1] || v[i] < v[i + 1]))
        .filter(|&i| i.abs_diff(g) > 1)
        .fold(None, |best: Option<usize>, i| match best {
            Some(b) if v[b] <= v[i] => Some(b),
            _ => Some(i),
        });
    match other {
        None => 0.0,
        Some(h) => {
            let (lo, hi) = (g.min(h), g.max(h));
            v[lo..=hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v[g]
        }
    }
}

/// Closed-form effective-potential coefficients, barrier and zero-barrier temperature
/// for `U = beta x^4 - 2 alpha x^2`.
pub fn double_well_analysis(sys: &PhysicalSystem, alpha: f64, beta: f64) -> Result<DoubleWellAnalysis> {
    sys.validate()?;
    require_positive("alpha", alpha)?;
    require_positive("beta", beta)?;
    let lt2 = thermal_wavelength(sys)?.powi(2);
    let lc2 = compton_wavelength(sys)?.powi(2);
    let shifted = alpha / beta - 6.0 * lt2;
    Ok(DoubleWellAnalysis {
        quartic: beta,
        quadratic: -2.0 * (alpha - 6.0 * beta * lt2),
        constant: -4.0 * alpha * lt2 + 24.0 * beta * lc2 * lt2,
        barrier: if shifted > 0.0 { beta * shifted * shifted } else { 0.0 },
        t_zero_barrier: 3.0 * beta * sys.hbar * sys.hbar / (2.0 * alpha * sys.m * sys.k_b()),
    })
}

/// Temperature at which the sampled double-well `U_eff` loses its barrier, by
/// bisection on [`grid_barrier`]. The grid should contain `x = 0`.
pub fn zero_barrier_temperature_numeric(sys: &PhysicalSystem, alpha: f64, beta: f64, grid: &Grid) -> Result<f64> {
    sys.validate()?;
    let pot = Potential::DoubleWell { alpha, beta };
    pot.validate()?;
    grid.validate()?;
    let lc2 = compton_wavelength(sys)?.powi(2);
    let x = grid.points();
    let has_barrier = |t: f64| -> Result<bool> {
        let lt2 = thermal_wavelength(&sys.at_temperature(t))?.powi(2);
        let v: Vec<f64> = x.iter().map(|&x| effective_potential_at(&pot, x, lt2, lc2)).collect();
        Ok(grid_barrier(&v) > 0.0)
    };
    // Thermal smearing grows as T falls, so the barrier exists above the root.
    let t0 = if sys.temperature() > 0.0 { sys.temperature() } else { 1.0 };
    let (mut lo, mut hi) = (t0, t0);
    for _ in 0..200 {
        if !has_barrier(lo)? {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..200 {
        if has_barrier(hi)? {
            break;
        }
        hi *= 2.0;
    }
    if has_barrier(lo)? || !has_barrier(hi)? {
        return Err(Error::Consistency("could not bracket the zero-barrier temperature".into()));
    }
    while (hi - lo) > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if has_barrier(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `1 - (1 - w^2) lambda_T^2 q^2`, `w = lambda_C q`.
#[inline]
fn cosine_factor(lt2: f64, q: f64, w: f64) -> f64 {
    1.0 - (1.0 - w) * (1.0 + w) * lt2 * q * q
}

/// Suppression factor of a cosine lattice, the free-diffusion temperature and the
/// no-tunnelling check at `q = 1/lambda_C`.
pub fn cosine_analysis(sys: &PhysicalSystem, q: f64) -> Result<CosineAnalysis> {
    sys.validate()?;
    require_positive("q", q)?;
    let lt2 = thermal_wavelength(sys)?.powi(2);
    let lc = compton_wavelength(sys)?;
    let w = lc * q;
    let within_expansion = w * w <= 1.0;
    if !within_expansion {
        log::warn!("lambda_C^2 q^2 = {:e} > 1: outside the validity of the expansion", w * w);
    }
    let mc2 = sys.m * sys.c * sys.c;
    let t_free = w * w * (1.0 - w) * (1.0 + w) * mc2 / sys.k_b();
    Ok(CosineAnalysis {
        factor: cosine_factor(lt2, q, w),
        t_free: (t_free > 0.0).then_some(t_free),
        factor_at_inverse_compton: cosine_factor(lt2, 1.0 / lc, 1.0),
        within_expansion,
    })
}
