//! Schrodinger evolution under the Breit-Fermi Hamiltonian
//! `H = -hbar^2 d^2/2m - hbar^4 d^4/(8 m^3 c^2) + U`, the matching probability
//! flux, and the polar decomposition `psi = sqrt(rho) exp(i S / hbar)`.

use num_complex::Complex64;

use crate::constants::{compton_wavelength, PhysicalSystem};
use crate::error::{require_positive, Error, Result};
use crate::grid::{Grid, Spectral};
use crate::potentials::Potential;
use crate::DENSITY_FLOOR;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Complex wavefunction on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub x: Grid,
    pub psi: Vec<Complex64>,
}

impl WaveField {
    pub fn new(x: Grid, psi: Vec<Complex64>) -> Result<Self> {
        x.validate()?;
        if psi.len() != x.n {
            return Err(Error::Domain(format!("wavefunction has {} samples but the grid has {}", psi.len(), x.n)));
        }
        Ok(Self { x, psi })
    }

    pub fn from_fn(x: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        Self { x, psi: (0..x.n).map(|i| f(x.x(i))).collect() }
    }

    /// Normalised `exp(i k x)`; `k` should be a multiple of `2 pi / L`.
    pub fn plane_wave(x: Grid, k: f64) -> Self {
        let amp = 1.0 / x.length.sqrt();
        Self::from_fn(x, |r| Complex64::from_polar(amp, k * r))
    }

    /// Normalised Gaussian packet `exp(-(x - x0)^2 / (4 sigma^2) + i p0 x / hbar)`;
    /// `sigma` is the standard deviation of `|psi|^2`.
    pub fn gaussian(x: Grid, x0: f64, p0: f64, sigma: f64, hbar: f64) -> Result<Self> {
        require_positive("sigma", sigma)?;
        require_positive("hbar", hbar)?;
        let mut f = Self::from_fn(x, |r| {
            let a = (r - x0) / sigma;
            Complex64::from_polar((-0.25 * a * a).exp(), p0 * r / hbar)
        });
        f.normalize()?;
        Ok(f)
    }

    /// Coherent state of the oscillator `m omega^2 x^2 / 2` centred at `(x0, p0)`.
    pub fn coherent_state(x: Grid, sys: &PhysicalSystem, omega: f64, x0: f64, p0: f64) -> Result<Self> {
        require_positive("omega", omega)?;
        Self::gaussian(x, x0, p0, (sys.hbar / (2.0 * sys.m * omega)).sqrt(), sys.hbar)
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.x.integrate(&self.density())
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Domain(format!("cannot normalise a wavefunction of norm {n}")));
        }
        let s = 1.0 / n.sqrt();
        self.psi.iter_mut().for_each(|z| *z *= s);
        Ok(())
    }

    /// Largest spectral amplitude in the upper eighth of the resolved band,
    /// relative to the peak amplitude.
    pub fn spectral_tail_ratio(&self) -> f64 {
        let spectral = Spectral::new(&self.x);
        let mut buf = self.psi.clone();
        spectral.forward(&mut buf);
        let k_cut = 0.875 * self.x.nyquist();
        let (mut peak, mut tail) = (0.0f64, 0.0f64);
        for (z, &k) in buf.iter().zip(spectral.wavenumbers()) {
            peak = peak.max(z.norm());
            if k.abs() >= k_cut {
                tail = tail.max(z.norm());
            }
        }
        tail / peak
    }
}

/// Kinetic dispersion `hbar^2 k^2 / 2m - hbar^4 k^4 / (8 m^3 c^2)`.
#[inline]
pub fn kinetic_energy(sys: &PhysicalSystem, k: f64) -> f64 {
    let t = sys.hbar * sys.hbar * k * k / (2.0 * sys.m);
    t - t * t / (2.0 * sys.m * sys.c * sys.c)
}

/// Spectral Breit-Fermi operator on one grid.
#[derive(Debug, Clone)]
pub struct BreitFermi {
    grid: Grid,
    spectral: Spectral,
    kinetic: Vec<f64>,
    potential: Vec<f64>,
}

impl BreitFermi {
    /// Refuses grids whose Nyquist wavenumber reaches `1 / lambda_C`, beyond which the
    /// truncated kinetic energy turns over and becomes negative.
    pub fn new(sys: &PhysicalSystem, pot: &Potential, grid: Grid) -> Result<Self> {
        sys.validate()?;
        pot.validate()?;
        grid.validate()?;
        let k_limit = 1.0 / compton_wavelength(sys)?;
        let k_nyquist = grid.nyquist();
        if k_nyquist >= k_limit {
            return Err(Error::ExpansionInvalid { k_nyquist, k_limit });
        }
        let spectral = Spectral::new(&grid);
        let kinetic = spectral.wavenumbers().iter().map(|&k| kinetic_energy(sys, k)).collect();
        Ok(Self { grid, spectral, kinetic, potential: pot.sample_on_grid(&grid, 0) })
    }

    fn check(&self, field: &WaveField) -> Result<()> {
        if field.x != self.grid || field.psi.len() != self.grid.n {
            return Err(Error::Domain("wavefunction grid does not match the operator".into()));
        }
        Ok(())
    }

    pub fn apply(&self, field: &WaveField) -> Result<Vec<Complex64>> {
        self.check(field)?;
        let mut buf = field.psi.clone();
        self.spectral.forward(&mut buf);
        buf.iter_mut().zip(&self.kinetic).for_each(|(z, t)| *z *= t);
        self.spectral.inverse(&mut buf);
        for ((h, z), u) in buf.iter_mut().zip(&field.psi).zip(&self.potential) {
            *h += z * u;
        }
        Ok(buf)
    }
}

/// `H_BF psi`.
pub fn apply_breit_fermi(sys: &PhysicalSystem, pot: &Potential, field: &WaveField) -> Result<Vec<Complex64>> {
    BreitFermi::new(sys, pot, field.x)?.apply(field)
}

/// Strang-split propagator: half potential kick, exact kinetic phase in transform
/// space, half potential kick. Each factor has unit modulus.
#[derive(Debug, Clone)]
pub struct Propagator {
    op: BreitFermi,
    half_kick: Vec<Complex64>,
    drift: Vec<Complex64>,
    pub dt: f64,
}

impl Propagator {
    pub fn new(sys: &PhysicalSystem, pot: &Potential, grid: Grid, dt: f64) -> Result<Self> {
        require_positive("dt", dt)?;
        let op = BreitFermi::new(sys, pot, grid)?;
        let h = sys.hbar;
        let half_kick = op.potential.iter().map(|u| (-I * (0.5 * dt * u / h)).exp()).collect();
        let drift = op.kinetic.iter().map(|t| (-I * (dt * t / h)).exp()).collect();
        Ok(Self { op, half_kick, drift, dt })
    }

    pub fn step(&self, field: &mut WaveField) -> Result<()> {
        self.op.check(field)?;
        let psi = &mut field.psi;
        psi.iter_mut().zip(&self.half_kick).for_each(|(z, p)| *z *= p);
        self.op.spectral.forward(psi);
        psi.iter_mut().zip(&self.drift).for_each(|(z, p)| *z *= p);
        self.op.spectral.inverse(psi);
        psi.iter_mut().zip(&self.half_kick).for_each(|(z, p)| *z *= p);
        Ok(())
    }

    pub fn run(&self, field: &mut WaveField, n_steps: usize) -> Result<()> {
        for _ in 0..n_steps {
            self.step(field)?;
        }
        Ok(())
    }
}

/// One Strang step of `i hbar dpsi/dt = H_BF psi`.
pub fn schrodinger_step(sys: &PhysicalSystem, pot: &Potential, field: &WaveField, dt: f64) -> Result<WaveField> {
    let mut out = field.clone();
    Propagator::new(sys, pot, field.x, dt)?.step(&mut out)?;
    Ok(out)
}

/// Probability flux of the Breit-Fermi Hamiltonian,
///
/// `j = (i hbar / 2m) [psi d psi* - psi* d psi
///      + lambda_C^2 (d psi* d2 psi - psi* d3 psi + psi d3 psi* - d psi d2 psi*)]`.
pub fn probability_flux(sys: &PhysicalSystem, field: &WaveField) -> Result<Vec<f64>> {
    let lc = compton_wavelength(sys)?;
    let spectral = Spectral::new(&field.x);
    let d = spectral.derivatives_complex(&field.psi, &[1, 2, 3]);
    let (d1, d2, d3) = (&d[0], &d[1], &d[2]);
    let pre = I * (sys.hbar / (2.0 * sys.m));
    let lc2 = lc * lc;
    let mut out = Vec::with_capacity(field.x.n);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..field.x.n {
        let z = field.psi[i];
        let nonrel = z * d1[i].conj() - z.conj() * d1[i];
        let rel = d1[i].conj() * d2[i] - z.conj() * d3[i] + z * d3[i].conj() - d1[i] * d2[i].conj();
        let j = pre * (nonrel + lc2 * rel);
        worst = worst.max(j.im.abs());
        scale = scale.max(j.re.abs());
        out.push(j.re);
    }
    if worst > 1e-8 * scale.max(1.0) {
        return Err(Error::Consistency(format!("flux has imaginary residue {worst:e}")));
    }
    Ok(out)
}

/// L2 norm of `(rho(t+dt) - rho(t)) / dt + d/dx [(j(t) + j(t+dt)) / 2]` over one step.
pub fn continuity_residual(sys: &PhysicalSystem, pot: &Potential, field: &WaveField, dt: f64) -> Result<f64> {
    let next = schrodinger_step(sys, pot, field, dt)?;
    let (j0, j1) = (probability_flux(sys, field)?, probability_flux(sys, &next)?);
    let j_mid: Vec<f64> = j0.iter().zip(&j1).map(|(a, b)| 0.5 * (a + b)).collect();
    let dj = Spectral::new(&field.x).derivative(&j_mid, 1);
    let (r0, r1) = (field.density(), next.density());
    let sq: Vec<f64> = (0..field.x.n)
        .map(|i| {
            let r = (r1[i] - r0[i]) / dt + dj[i];
            r * r
        })
        .collect();
    Ok(field.x.integrate(&sq).sqrt())
}

/// Density and phase-gradient velocity of a wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct Polar {
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
    /// Nodes below the density floor, where `v` is set to zero.
    pub floored: usize,
}

/// `rho = |psi|^2`, `V = hbar Im(psi* dpsi) / (m rho)`.
pub fn polar_decompose(sys: &PhysicalSystem, field: &WaveField) -> Polar {
    let rho = field.density();
    let d1 = Spectral::new(&field.x).derivative_complex(&field.psi, 1);
    let eps = DENSITY_FLOOR * rho.iter().fold(0.0, |m: f64, &r| m.max(r));
    let mut floored = 0;
    let v = rho
        .iter()
        .zip(field.psi.iter().zip(&d1))
        .map(|(&r, (z, dz))| {
            if r <= eps {
                floored += 1;
                0.0
            } else {
                sys.hbar * (z.conj() * dz).im / (sys.m * r)
            }
        })
        .collect();
    if floored * 100 > rho.len() {
        log::warn!("{floored} of {} nodes are below the density floor; their velocity is set to zero", rho.len());
    }
    Polar { rho, v, floored }
}

/// Hydrodynamic flux `rho V`, which omits the relativistic flux correction.
pub fn hydrodynamic_flux(sys: &PhysicalSystem, field: &WaveField) -> Vec<f64> {
    let p = polar_decompose(sys, field);
    p.rho.iter().zip(&p.v).map(|(r, v)| r * v).collect()
}
