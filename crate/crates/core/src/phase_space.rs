//! Phase-space kinetics: the relativistic Klein-Kramers equation
//!
//! `dW/dt = -(p/M) dW/dx + U'(x) dW/dp + b d/dp (p W / M + k_B T dW/dp)`
//!
//! and its Wigner counterpart, where the force term is replaced by the nonlocal
//! operator `[U(x + i hbar d_p / 2) - U(x - i hbar d_p / 2)] W / (i hbar)`.
//!
//! Storage is x-major: `w[ix * n_p + ip]`. The x direction is periodic and
//! differentiated spectrally. The p direction is cell-centred on `[-P, P]`; the
//! drift and diffusion in p are written as differences of interface fluxes with
//! zero flux through both ends, so the discrete mass is conserved exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalSystem;
use crate::error::{require_positive, Error, Result};
use crate::grid::{Grid, Spectral};
use crate::langevin::{dynamic_mass, juttner_log_density};
use crate::potentials::Potential;

/// Stability safety factor for explicit RK4.
pub const SAFETY: f64 = 0.4;

/// Cell-centred momentum grid `p_j = -P + (j + 1/2) dp`, `dp = 2P / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumGrid {
    pub n: usize,
    pub p_max: f64,
}

impl MomentumGrid {
    pub fn new(n: usize, p_max: f64) -> Result<Self> {
        let g = Self { n, p_max };
        g.validate()?;
        Ok(g)
    }

    /// Grid whose span `P` satisfies `exp(-(E(P) - mc^2) / k_B T) = tail`.
    pub fn for_juttner(sys: &PhysicalSystem, n: usize, tail: f64) -> Result<Self> {
        require_positive("k_B T", sys.kb_t)?;
        if !(tail > 0.0 && tail < 1.0) {
            return Err(Error::InvalidParameter { name: "tail", reason: format!("must lie in (0, 1), got {tail}") });
        }
        let mc2 = sys.m * sys.c * sys.c;
        let e = mc2 - sys.kb_t * tail.ln();
        Self::new(n, ((e * e - mc2 * mc2) / (sys.c * sys.c)).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::InvalidParameter {
                name: "n_p",
                reason: format!("need at least 4 momentum cells, got {}", self.n),
            });
        }
        require_positive("p_max", self.p_max)
    }

    #[inline]
    pub fn dp(&self) -> f64 {
        2.0 * self.p_max / self.n as f64
    }

    #[inline]
    pub fn p(&self, j: usize) -> f64 {
        -self.p_max + (j as f64 + 0.5) * self.dp()
    }

    /// Interface between cells `j` and `j + 1`.
    #[inline]
    pub fn interface(&self, j: usize) -> f64 {
        -self.p_max + (j + 1) as f64 * self.dp()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.p(j)).collect()
    }

    /// The same points seen as a periodic grid, used for transforms in p.
    fn as_periodic(&self) -> Grid {
        Grid { n: self.n, x_min: -self.p_max + 0.5 * self.dp(), length: 2.0 * self.p_max }
    }
}

/// Phase-space density `W(x, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceField {
    pub x: Grid,
    pub p: MomentumGrid,
    pub w: Vec<f64>,
}

impl PhaseSpaceField {
    pub fn zeros(x: Grid, p: MomentumGrid) -> Self {
        Self { x, p, w: vec![0.0; x.n * p.n] }
    }

    pub fn from_fn(x: Grid, p: MomentumGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut w = Vec::with_capacity(x.n * p.n);
        for i in 0..x.n {
            let xi = x.x(i);
            w.extend((0..p.n).map(|j| f(xi, p.p(j))));
        }
        Self { x, p, w }
    }

    /// Normalised Boltzmann-Juttner density `exp(-E / k_B T)` sampled on the grid.
    pub fn juttner(sys: &PhysicalSystem, pot: &Potential, x: Grid, p: MomentumGrid) -> Result<Self> {
        let shift = juttner_log_density(sys, pot, 0.0, 0.0)?;
        let mut field = Self::from_fn(x, p, |r, q| {
            (juttner_log_density(sys, pot, r, q).unwrap_or(f64::NEG_INFINITY) - shift).exp()
        });
        field.normalize()?;
        Ok(field)
    }

    /// Minimum-uncertainty Gaussian, the Wigner function of a coherent state when
    /// `sigma_x * sigma_p = hbar / 2`.
    pub fn gaussian(x: Grid, p: MomentumGrid, (x0, p0): (f64, f64), (sigma_x, sigma_p): (f64, f64)) -> Result<Self> {
        require_positive("sigma_x", sigma_x)?;
        require_positive("sigma_p", sigma_p)?;
        let mut field = Self::from_fn(x, p, |r, q| {
            let a = (r - x0) / sigma_x;
            let b = (q - p0) / sigma_p;
            (-0.5 * (a * a + b * b)).exp()
        });
        field.normalize()?;
        Ok(field)
    }

    #[inline]
    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.w[ix * self.p.n + ip]
    }

    pub fn cell_area(&self) -> f64 {
        self.x.dx() * self.p.dp()
    }

    /// `sum W dx dp`.
    pub fn mass(&self) -> f64 {
        self.w.iter().sum::<f64>() * self.cell_area()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m.is_finite() && m != 0.0) {
            return Err(Error::Domain(format!("cannot normalise a field of mass {m}")));
        }
        for v in self.w.iter_mut() {
            *v /= m;
        }
        Ok(())
    }

    /// Largest `|W|` on the two outermost momentum cells relative to `max |W|`.
    pub fn boundary_ratio(&self) -> f64 {
        let n_p = self.p.n;
        let edge = self.w.chunks(n_p).map(|row| row[0].abs().max(row[n_p - 1].abs())).fold(0.0, f64::max);
        edge / crate::quadrature::sup_norm(&self.w)
    }
}

/// Position marginal `rho(x) = int W dp`.
pub fn marginal_x(field: &PhaseSpaceField) -> Vec<f64> {
    let dp = field.p.dp();
    field.w.chunks(field.p.n).map(|row| row.iter().sum::<f64>() * dp).collect()
}

/// Momentum marginal `int W dx`.
pub fn marginal_p(field: &PhaseSpaceField) -> Vec<f64> {
    let n_p = field.p.n;
    let mut out = vec![0.0; n_p];
    for row in field.w.chunks(n_p) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let dx = field.x.dx();
    out.iter_mut().for_each(|v| *v *= dx);
    out
}

/// Probability flux `j(x) = int (p / M) W dp`.
pub fn flux_x(sys: &PhysicalSystem, field: &PhaseSpaceField) -> Vec<f64> {
    let dp = field.p.dp();
    let v: Vec<f64> = field.p.points().iter().map(|&p| p / dynamic_mass(sys, p)).collect();
    field.w.chunks(field.p.n).map(|row| row.iter().zip(&v).map(|(w, v)| w * v).sum::<f64>() * dp).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Classical relativistic Klein-Kramers.
    #[default]
    Kramers,
    /// Wigner force operator with classical friction and diffusion.
    WignerKramers,
    /// Wigner force operator, friction switched off.
    WignerLiouville,
}

impl Mode {
    fn is_wigner(self) -> bool {
        !matches!(self, Mode::Kramers)
    }
}

/// Right-hand side operator with precomputed velocities and transform plans.
#[derive(Debug, Clone)]
pub struct PhaseSpaceOperator {
    x: Grid,
    p: MomentumGrid,
    mode: Mode,
    b: f64,
    kb_t: f64,
    x_spec: Spectral,
    p_spec: Spectral,
    /// `v(p_j)` at cell centres.
    v: Vec<f64>,
    /// `v` at the `n_p - 1` interior interfaces.
    v_face: Vec<f64>,
    /// `U'(x_i)`
    force: Vec<f64>,
    /// Wigner multiplier `[U(x - hbar s/2) - U(x + hbar s/2)] / hbar`, x-major; the
    /// transform of the term is `-i` times this times the transform of W.
    quantum: Vec<f64>,
}

impl PhaseSpaceOperator {
    pub fn new(sys: &PhysicalSystem, pot: &Potential, x: Grid, p: MomentumGrid, mode: Mode) -> Result<Self> {
        let velocity = |q: f64| q / dynamic_mass(sys, q);
        Self::with_velocity(sys, pot, x, p, mode, velocity)
    }

    fn with_velocity(
        sys: &PhysicalSystem,
        pot: &Potential,
        x: Grid,
        p: MomentumGrid,
        mode: Mode,
        velocity: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        sys.validate()?;
        pot.validate()?;
        x.validate()?;
        p.validate()?;
        let b = if mode == Mode::WignerLiouville { 0.0 } else { sys.b };
        let p_grid = p.as_periodic();
        let quantum = if mode.is_wigner() { quantum_multiplier(sys.hbar, pot, &x, &p_grid) } else { Vec::new() };
        Ok(Self {
            x,
            p,
            mode,
            b,
            kb_t: sys.kb_t,
            x_spec: Spectral::new(&x),
            p_spec: Spectral::new(&p_grid),
            v: p.points().into_iter().map(&velocity).collect(),
            v_face: (0..p.n - 1).map(|j| velocity(p.interface(j))).collect(),
            force: pot.sample_on_grid(&x, 1),
            quantum,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Largest stable RK4 step and the term that limits it.
    pub fn stability_bound(&self) -> (f64, &'static str) {
        let dx = self.x.dx();
        let dp = self.p.dp();
        let v_max = self.v.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let f_max = self.force.iter().fold(0.0, |m: f64, f| m.max(f.abs()));
        let mut bounds: Vec<(f64, &'static str)> = vec![(SAFETY * dx / v_max, "streaming")];
        let drift = if self.mode.is_wigner() { 0.0 } else { f_max } + self.b * v_max;
        if drift > 0.0 {
            bounds.push((SAFETY * dp / drift, "momentum drift"));
        }
        if self.b * self.kb_t > 0.0 {
            bounds.push((SAFETY * dp * dp / (self.b * self.kb_t), "momentum diffusion"));
        }
        if self.mode.is_wigner() {
            let rate = self.quantum.iter().fold(0.0, |m: f64, q| m.max(q.abs()));
            // For quadratic U the rate is F_max * pi / dp; this reproduces the drift bound.
            if rate > 0.0 {
                bounds.push((SAFETY * std::f64::consts::PI / rate, "quantum force"));
            }
        }
        bounds.into_iter().fold((f64::INFINITY, "none"), |a, b| if b.0 < a.0 { b } else { a })
    }

    fn check_shape(&self, field: &PhaseSpaceField) -> Result<()> {
        if field.x != self.x || field.p != self.p || field.w.len() != self.x.n * self.p.n {
            return Err(Error::Domain("field grid does not match the operator".into()));
        }
        Ok(())
    }

    /// `-v(p) dW/dx`, spectral in x.
    fn add_streaming(&self, w: &[f64], out: &mut [f64]) {
        let (n_x, n_p) = (self.x.n, self.p.n);
        let mut buf = vec![Complex64::default(); n_x * n_p];
        for j in 0..n_p {
            for i in 0..n_x {
                buf[j * n_x + i] = Complex64::new(w[i * n_p + j], 0.0);
            }
        }
        // Batched transforms over the p-major copy.
        self.x_spec.forward(&mut buf);
        let k = self.x_spec.wavenumbers();
        let nyquist = (n_x % 2 == 0).then_some(n_x / 2);
        for (j, col) in buf.chunks_mut(n_x).enumerate() {
            let v = self.v[j];
            for (m, z) in col.iter_mut().enumerate() {
                *z = if Some(m) == nyquist { Complex64::default() } else { *z * Complex64::new(0.0, -v * k[m]) };
            }
        }
        self.x_spec.inverse(&mut buf);
        for j in 0..n_p {
            for i in 0..n_x {
                out[i * n_p + j] += buf[j * n_x + i].re;
            }
        }
    }

    /// `d/dp G` with interface flux `G = a W + b k_B T dW/dp`, zero flux at both ends.
    /// `a` is `U' + b v` (Kramers) or `b v` (Wigner modes).
    fn add_momentum_flux(&self, w: &[f64], out: &mut [f64]) {
        let n_p = self.p.n;
        let dp = self.p.dp();
        let inv_dp = 1.0 / dp;
        let diff = self.b * self.kb_t * inv_dp;
        let with_force = !self.mode.is_wigner();
        if !with_force && self.b == 0.0 {
            return;
        }
        for (i, (row, o)) in w.chunks(n_p).zip(out.chunks_mut(n_p)).enumerate() {
            let f = if with_force { self.force[i] } else { 0.0 };
            let mut left = 0.0;
            for j in 0..n_p {
                let right = if j + 1 < n_p {
                    let a = f + self.b * self.v_face[j];
                    a * 0.5 * (row[j] + row[j + 1]) + diff * (row[j + 1] - row[j])
                } else {
                    0.0
                };
                o[j] += (right - left) * inv_dp;
                left = right;
            }
        }
    }

    /// Nonlocal Wigner force term, spectral in p. Returns the imaginary residue
    /// relative to the magnitude of the term.
    fn add_quantum(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        let n_p = self.p.n;
        let mut buf: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.p_spec.forward(&mut buf);
        for (z, &q) in buf.iter_mut().zip(&self.quantum) {
            *z *= Complex64::new(0.0, -q);
        }
        self.p_spec.inverse(&mut buf);
        let mut im = 0.0f64;
        let mut re = 0.0f64;
        for (o, z) in out.iter_mut().zip(&buf) {
            *o += z.re;
            im = im.max(z.im.abs());
            re = re.max(z.re.abs());
        }
        debug_assert_eq!(buf.len() % n_p, 0);
        if im > 1e-8 * re.max(f64::MIN_POSITIVE) && im > 1e-300 {
            return Err(Error::Consistency(format!(
                "Wigner term has imaginary residue {im:e} against magnitude {re:e}"
            )));
        }
        Ok(())
    }

    /// Full time derivative for the operator's mode.
    pub fn rhs(&self, field: &PhaseSpaceField) -> Result<Vec<f64>> {
        self.check_shape(field)?;
        let mut out = vec![0.0; field.w.len()];
        self.rhs_into(&field.w, &mut out)?;
        Ok(out)
    }

    fn rhs_into(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.add_streaming(w, out);
        self.add_momentum_flux(w, out);
        if self.mode.is_wigner() {
            self.add_quantum(w, out)?;
        }
        Ok(())
    }

    /// Only the Wigner force term.
    pub fn quantum_term(&self, field: &PhaseSpaceField) -> Result<Vec<f64>> {
        self.check_shape(field)?;
        if !self.mode.is_wigner() {
            return Err(Error::Domain("the Kramers operator has no Wigner term".into()));
        }
        let mut out = vec![0.0; field.w.len()];
        self.add_quantum(&field.w, &mut out)?;
        Ok(out)
    }

    /// Advance `field` by `n_steps` RK4 steps, calling `observe(step, field)` after
    /// every step (and once for step 0).
    pub fn evolve_with(
        &self,
        field: &mut PhaseSpaceField,
        dt: f64,
        n_steps: usize,
        mut observe: impl FnMut(usize, &PhaseSpaceField),
    ) -> Result<()> {
        self.check_shape(field)?;
        require_positive("dt", dt)?;
        let (bound, limiting) = self.stability_bound();
        if dt > bound {
            return Err(Error::Unstable { dt, bound, limiting });
        }
        observe(0, field);
        let len = field.w.len();
        let mut k = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        let mut stage = vec![0.0; len];
        for step in 1..=n_steps {
            let w = &field.w;
            self.rhs_into(w, &mut k[0])?;
            for ((s, a), d) in stage.iter_mut().zip(w).zip(&k[0]) {
                *s = a + 0.5 * dt * d;
            }
            self.rhs_into(&stage, &mut k[1])?;
            for ((s, a), d) in stage.iter_mut().zip(w).zip(&k[1]) {
                *s = a + 0.5 * dt * d;
            }
            self.rhs_into(&stage, &mut k[2])?;
            for ((s, a), d) in stage.iter_mut().zip(w).zip(&k[2]) {
                *s = a + dt * d;
            }
            self.rhs_into(&stage, &mut k[3])?;
            for (idx, v) in field.w.iter_mut().enumerate() {
                *v += dt / 6.0 * (k[0][idx] + 2.0 * (k[1][idx] + k[2][idx]) + k[3][idx]);
            }
            if !field.w.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { step });
            }
            observe(step, field);
        }
        Ok(())
    }
}

fn quantum_multiplier(hbar: f64, pot: &Potential, x: &Grid, p_grid: &Grid) -> Vec<f64> {
    let s = p_grid.wavenumbers();
    let n_p = p_grid.n;
    let nyquist = n_p.is_multiple_of(2).then_some(n_p / 2);
    let mut out = Vec::with_capacity(x.n * n_p);
    for i in 0..x.n {
        let xi = x.x(i);
        for (m, &sm) in s.iter().enumerate() {
            let a = 0.5 * hbar * sm;
            // The multiplier is odd in s; the unpaired Nyquist mode is dropped.
            let d = if Some(m) == nyquist { 0.0 } else { (pot.value(xi - a) - pot.value(xi + a)) / hbar };
            out.push(d);
        }
    }
    out
}

/// Classical Klein-Kramers time derivative of `field`.
pub fn kramers_rhs(sys: &PhysicalSystem, pot: &Potential, field: &PhaseSpaceField) -> Result<Vec<f64>> {
    PhaseSpaceOperator::new(sys, pot, field.x, field.p, Mode::Kramers)?.rhs(field)
}

/// The Wigner force term alone. For quadratic potentials it equals `U' dW/dp`
/// evaluated spectrally.
pub fn wigner_quantum_term(sys: &PhysicalSystem, pot: &Potential, field: &PhaseSpaceField) -> Result<Vec<f64>> {
    PhaseSpaceOperator::new(sys, pot, field.x, field.p, Mode::WignerLiouville)?.quantum_term(field)
}

/// Evolve `field` in place by `n_steps` RK4 steps of size `dt`.
pub fn evolve(
    sys: &PhysicalSystem,
    pot: &Potential,
    field: &mut PhaseSpaceField,
    dt: f64,
    n_steps: usize,
    mode: Mode,
) -> Result<()> {
    PhaseSpaceOperator::new(sys, pot, field.x, field.p, mode)?.evolve_with(field, dt, n_steps, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::sup_norm;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grids(n_x: usize, l: f64, n_p: usize, p_max: f64) -> (Grid, MomentumGrid) {
        (Grid::centered(n_x, l).unwrap(), MomentumGrid::new(n_p, p_max).unwrap())
    }

    #[test]
    fn momentum_grid_is_symmetric() {
        let g = MomentumGrid::new(6, 3.0).unwrap();
        assert_eq!(g.points(), vec![-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]);
        assert_eq!(g.interface(0), -2.0);
        assert!(MomentumGrid::new(2, 1.0).is_err());
    }

    #[test]
    fn juttner_span_meets_tail() {
        let sys = PhysicalSystem::natural();
        let g = MomentumGrid::for_juttner(&sys, 64, 1e-12).unwrap();
        let e = |p: f64| (1.0 + p * p).sqrt();
        assert_relative_eq!((-(e(g.p_max) - 1.0)).exp(), 1e-12, max_relative = 1e-9);
    }

    #[test]
    fn separable_marginals() {
        let (x, p) = grids(32, 20.0, 64, 8.0);
        let rho = |r: f64| (-r * r / 2.0).exp();
        let g = |q: f64| (-q * q).exp();
        let f = PhaseSpaceField::from_fn(x, p, |r, q| rho(r) * g(q));
        let norm_p = std::f64::consts::PI.sqrt();
        for (i, m) in marginal_x(&f).iter().enumerate() {
            assert_relative_eq!(*m, rho(x.x(i)) * norm_p, max_relative = 1e-12, epsilon = 1e-300);
        }
        let norm_x = (2.0 * std::f64::consts::PI).sqrt();
        for (j, m) in marginal_p(&f).iter().enumerate() {
            assert_relative_eq!(*m, g(p.p(j)) * norm_x, max_relative = 1e-10, epsilon = 1e-300);
        }
    }

    #[test]
    fn flux_of_even_field_vanishes() {
        let sys = PhysicalSystem::natural();
        let (x, p) = grids(16, 10.0, 40, 6.0);
        let f = PhaseSpaceField::from_fn(x, p, |r, q| (-(r - 1.0).powi(2) - q * q * q * q / 3.0).exp());
        assert!(sup_norm(&flux_x(&sys, &f)) < 1e-15);
    }

    #[test]
    fn juttner_marginal_is_boltzmann() {
        let sys = PhysicalSystem { kb_t: 0.5, ..PhysicalSystem::natural() };
        let pot = Potential::Harmonic { k: 1.0 };
        let (x, p) = grids(64, 16.0, 256, 16.0);
        let f = PhaseSpaceField::juttner(&sys, &pot, x, p).unwrap();
        assert_relative_eq!(f.mass(), 1.0, max_relative = 1e-12);
        assert!(f.boundary_ratio() < 1e-10);
        let rho = marginal_x(&f);
        let z = (2.0 * std::f64::consts::PI * sys.kb_t).sqrt();
        for (i, r) in rho.iter().enumerate() {
            let exact = (-pot.value(x.x(i)) / sys.kb_t).exp() / z;
            assert!((r - exact).abs() < 1e-10, "{r} {exact}");
        }
    }

    #[test]
    fn uniform_free_field_has_zero_rhs() {
        let sys = PhysicalSystem { b: 0.0, ..PhysicalSystem::natural() };
        let (x, p) = grids(16, 4.0, 32, 8.0);
        let f = PhaseSpaceField::from_fn(x, p, |_, q| (-q * q).exp());
        assert!(sup_norm(&kramers_rhs(&sys, &Potential::Free, &f).unwrap()) < 1e-14);
    }

    #[test]
    fn juttner_residual_converges_at_second_order() {
        let sys = PhysicalSystem::natural();
        let pot = Potential::Harmonic { k: 1.0 };
        let res = |n_p: usize| {
            let (x, p) = grids(128, 16.0, n_p, 24.0);
            let f = PhaseSpaceField::juttner(&sys, &pot, x, p).unwrap();
            sup_norm(&kramers_rhs(&sys, &pot, &f).unwrap())
        };
        let r: Vec<f64> = [64, 128, 256].iter().map(|&n| res(n)).collect();
        for w in r.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.8, "residuals {r:?}");
        }
    }

    #[test]
    fn large_c_matches_nonrelativistic_kramers() {
        let sys = PhysicalSystem { c: 1e6, ..PhysicalSystem::natural() };
        let pot = Potential::DoubleWell { alpha: 1.0, beta: 0.5 };
        let (x, p) = grids(32, 8.0, 64, 8.0);
        let f = PhaseSpaceField::gaussian(x, p, (0.3, 0.5), (1.0, 1.0)).unwrap();
        let rel = PhaseSpaceOperator::new(&sys, &pot, x, p, Mode::Kramers).unwrap().rhs(&f).unwrap();
        let m = sys.m;
        let nonrel =
            PhaseSpaceOperator::with_velocity(&sys, &pot, x, p, Mode::Kramers, |q| q / m).unwrap().rhs(&f).unwrap();
        let diff: Vec<f64> = rel.iter().zip(&nonrel).map(|(a, b)| a - b).collect();
        assert!(sup_norm(&diff) <= 1e-8 * sup_norm(&nonrel));
    }

    fn gaussian_dwdp(x: Grid, p: MomentumGrid, centre: (f64, f64), sig: (f64, f64)) -> (PhaseSpaceField, Vec<f64>) {
        let f = PhaseSpaceField::gaussian(x, p, centre, sig).unwrap();
        let d = PhaseSpaceField::from_fn(x, p, |_, q| -(q - centre.1) / (sig.1 * sig.1));
        let dw = f.w.iter().zip(&d.w).map(|(a, b)| a * b).collect();
        (f, dw)
    }

    #[test]
    fn harmonic_wigner_term_is_the_poisson_bracket() {
        let sys = PhysicalSystem::natural();
        let pot = Potential::Harmonic { k: 1.3 };
        let (x, p) = grids(64, 16.0, 128, 12.0);
        let (f, dw) = gaussian_dwdp(x, p, (0.5, -0.4), (0.8, 1.0));
        let q = wigner_quantum_term(&sys, &pot, &f).unwrap();
        let err = (0..f.w.len()).map(|n| (q[n] - pot.grad(x.x(n / p.n)) * dw[n]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn free_wigner_term_vanishes() {
        let sys = PhysicalSystem::natural();
        let (x, p) = grids(16, 8.0, 32, 8.0);
        let f = PhaseSpaceField::gaussian(x, p, (0.0, 0.0), (1.0, 1.0)).unwrap();
        assert_eq!(sup_norm(&wigner_quantum_term(&sys, &Potential::Free, &f).unwrap()), 0.0);
    }

    #[test]
    fn zero_steps_is_identity() {
        let sys = PhysicalSystem::natural();
        let (x, p) = grids(16, 8.0, 32, 8.0);
        let f0 = PhaseSpaceField::gaussian(x, p, (0.0, 0.0), (1.0, 1.0)).unwrap();
        for mode in [Mode::Kramers, Mode::WignerKramers, Mode::WignerLiouville] {
            let mut f = f0.clone();
            evolve(&sys, &Potential::Harmonic { k: 1.0 }, &mut f, 1e-3, 0, mode).unwrap();
            assert_eq!(f, f0);
        }
    }

    #[test]
    fn refuses_unstable_step() {
        let sys = PhysicalSystem::natural();
        let (x, p) = grids(32, 8.0, 64, 8.0);
        let mut f = PhaseSpaceField::gaussian(x, p, (0.0, 0.0), (1.0, 1.0)).unwrap();
        let err = evolve(&sys, &Potential::Harmonic { k: 1.0 }, &mut f, 1.0, 10, Mode::Kramers).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
    }

    #[test]
    fn mass_is_conserved_by_every_mode() {
        let sys = PhysicalSystem::natural();
        let pot = Potential::Cosine { u0: 0.5, q: 2.0 * std::f64::consts::PI / 8.0 };
        let (x, p) = grids(32, 8.0, 64, 10.0);
        for mode in [Mode::Kramers, Mode::WignerKramers, Mode::WignerLiouville] {
            let op = PhaseSpaceOperator::new(&sys, &pot, x, p, mode).unwrap();
            let mut f = PhaseSpaceField::gaussian(x, p, (0.5, 1.0), (1.0, 1.5)).unwrap();
            let dt = 0.9 * op.stability_bound().0;
            op.evolve_with(&mut f, dt, 1000, |_, _| {}).unwrap();
            assert!((f.mass() - 1.0).abs() < 1e-8, "{mode:?} {}", f.mass());
        }
    }

    #[test]
    fn juttner_is_nearly_stationary_under_kramers() {
        let sys = PhysicalSystem::natural();
        let pot = Potential::Harmonic { k: 1.0 };
        let drift = |n_p: usize| {
            let (x, p) = grids(64, 16.0, n_p, 24.0);
            let f0 = PhaseSpaceField::juttner(&sys, &pot, x, p).unwrap();
            let op = PhaseSpaceOperator::new(&sys, &pot, x, p, Mode::Kramers).unwrap();
            let mut f = f0.clone();
            let n = (2.0 / op.stability_bound().0).ceil() as usize;
            op.evolve_with(&mut f, 2.0 / n as f64, n, |_, _| {}).unwrap();
            let d: Vec<f64> = f.w.iter().zip(&f0.w).map(|(a, b)| a - b).collect();
            sup_norm(&d)
        };
        let (coarse, fine) = (drift(64), drift(128));
        assert!(coarse < 5e-3, "{coarse}");
        assert!(fine < coarse / 3.0, "{coarse} {fine}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn rhs_integrates_to_zero(x0 in -1.0f64..1.0, p0 in -1.0f64..1.0, sx in 0.5f64..1.5, sp in 0.5f64..2.0,
                                  mode in prop_oneof![Just(Mode::Kramers), Just(Mode::WignerKramers)]) {
            let sys = PhysicalSystem::natural();
            let pot = Potential::DoubleWell { alpha: 0.5, beta: 0.2 };
            let (x, p) = grids(32, 10.0, 48, 10.0);
            let f = PhaseSpaceField::gaussian(x, p, (x0, p0), (sx, sp)).unwrap();
            let op = PhaseSpaceOperator::new(&sys, &pot, x, p, mode).unwrap();
            let r = op.rhs(&f).unwrap();
            let total: f64 = r.iter().sum::<f64>() * f.cell_area();
            let scale = r.iter().map(|v| v.abs()).sum::<f64>() * f.cell_area();
            prop_assert!(total.abs() < 1e-13 * scale.max(1.0));
        }
    }
}
