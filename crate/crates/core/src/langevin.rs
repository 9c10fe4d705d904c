//! Relativistic Langevin dynamics `dr = p/M dt`, `dp = (-U' - b p/M) dt + sqrt(2 b k_B T) dW`.
//!
//! The noise amplitude is the one for which the Fokker-Planck equation of the
//! process carries the momentum diffusion `b k_B T d^2/dp^2`, so the
//! Boltzmann-Juttner density `exp(-E / k_B T)` is stationary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalSystem;
use crate::error::{Error, Result};
use crate::potentials::Potential;

/// Trajectories per work unit. Fixed so that the reduction order, and therefore
/// every floating point sum, does not depend on the thread count.
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParticleState {
    pub r: f64,
    pub p: f64,
}

impl ParticleState {
    pub fn is_finite(&self) -> bool {
        self.r.is_finite() && self.p.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDistribution {
    Delta { r: f64, p: f64 },
    Gaussian { mean_r: f64, std_r: f64, mean_p: f64, std_p: f64 },
}

impl Default for InitialDistribution {
    fn default() -> Self {
        InitialDistribution::Delta { r: 0.0, p: 0.0 }
    }
}

impl InitialDistribution {
    fn sample<R: Rng>(&self, rng: &mut R) -> ParticleState {
        match *self {
            InitialDistribution::Delta { r, p } => ParticleState { r, p },
            InitialDistribution::Gaussian { mean_r, std_r, mean_p, std_p } => {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                ParticleState { r: mean_r + std_r * a, p: mean_p + std_p * b }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub init: InitialDistribution,
    /// Moments are recorded every `record_every` steps (and at the last step).
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    100
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::InvalidParameter { name: "n_particles", reason: "need at least one particle".into() });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {}", self.dt) });
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter { name: "record_every", reason: "must be at least 1".into() });
        }
        Ok(())
    }

    /// Step indices at which moments are recorded, always including 0 and `n_steps`.
    pub fn record_steps(&self) -> Vec<usize> {
        let mut steps: Vec<usize> = (0..=self.n_steps).step_by(self.record_every).collect();
        if *steps.last().unwrap() != self.n_steps {
            steps.push(self.n_steps);
        }
        steps
    }
}

/// Ensemble moments at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRecord {
    pub t: f64,
    pub mean_r: f64,
    pub mean_p: f64,
    pub var_r: f64,
    pub var_p: f64,
    pub mean_p2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRecord {
    pub moments: Vec<MomentRecord>,
    pub final_samples: Vec<ParticleState>,
}

/// Relativistic dynamic mass `M = sqrt(m^2 + p^2 / c^2)`.
#[inline]
pub fn dynamic_mass(sys: &PhysicalSystem, p: f64) -> f64 {
    let pc = p / sys.c;
    (sys.m * sys.m + pc * pc).sqrt()
}

/// Deterministic part of the equations of motion, `(dr/dt, dp/dt)`.
#[inline]
pub fn drift(sys: &PhysicalSystem, pot: &Potential, state: ParticleState) -> (f64, f64) {
    let v = state.p / dynamic_mass(sys, state.p);
    (v, -pot.grad(state.r) - sys.b * v)
}

/// One stochastic Heun step driven by the standard normal deviate `noise`.
///
/// The momentum increment `sqrt(2 b k_B T dt) * noise` enters both the predictor
/// and the corrector; the drift is averaged between the start and predicted states.
pub fn step(sys: &PhysicalSystem, pot: &Potential, state: ParticleState, dt: f64, noise: f64) -> ParticleState {
    let kick = (2.0 * sys.b * sys.kb_t * dt).sqrt() * noise;
    heun(sys, pot, state, dt, kick)
}

#[inline(always)]
fn heun(sys: &PhysicalSystem, pot: &Potential, s: ParticleState, dt: f64, kick: f64) -> ParticleState {
    let (vr, fp) = drift(sys, pot, s);
    let predicted = ParticleState { r: s.r + vr * dt, p: s.p + fp * dt + kick };
    let (vr2, fp2) = drift(sys, pot, predicted);
    ParticleState { r: s.r + 0.5 * (vr + vr2) * dt, p: s.p + 0.5 * (fp + fp2) * dt + kick }
}

/// Random stream of trajectory `index` for a given seed. The initial condition is
/// drawn from it, then it seeds the trajectory's noise generator ([`noise_rng`]).
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Per-step noise generator seeded from a trajectory stream. Xoshiro is several
/// times cheaper per draw than ChaCha, which dominates long ensemble runs.
pub fn noise_rng(stream: &mut ChaCha8Rng) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::from_rng(stream)
}

struct ChunkResult {
    // sum r, sum p, sum r^2, sum p^2 per record
    sums: Vec<[f64; 4]>,
    finals: Vec<ParticleState>,
    failure: Option<usize>,
}

/// Trajectories advanced in lockstep; independent lanes let the compiler
/// overlap the square roots and divisions of neighbouring trajectories.
const LANES: usize = 8;

#[derive(Clone, Copy)]
struct Kernel {
    m2: f64,
    inv_c2: f64,
    b: f64,
    dt: f64,
    amp: f64,
}

impl Kernel {
    #[inline(always)]
    fn advance<G: Fn(f64) -> f64>(
        &self,
        grad: &G,
        r: &mut [f64; LANES],
        p: &mut [f64; LANES],
        rngs: &mut [Xoshiro256PlusPlus],
        n: usize,
    ) {
        let Kernel { m2, inv_c2, b, dt, amp } = *self;
        let mut kick = [0.0; LANES];
        let mut v0 = [0.0; LANES];
        let mut f0 = [0.0; LANES];
        let mut r1 = [0.0; LANES];
        let mut p1 = [0.0; LANES];
        for _ in 0..n {
            for (k, rng) in kick.iter_mut().zip(rngs.iter_mut()) {
                *k = amp * rng.sample::<f64, _>(StandardNormal);
            }
            for l in 0..LANES {
                v0[l] = p[l] / (m2 + p[l] * p[l] * inv_c2).sqrt();
            }
            for l in 0..LANES {
                f0[l] = -grad(r[l]) - b * v0[l];
                r1[l] = r[l] + v0[l] * dt;
                p1[l] = p[l] + f0[l] * dt + kick[l];
            }
            for l in 0..LANES {
                let v1 = p1[l] / (m2 + p1[l] * p1[l] * inv_c2).sqrt();
                let f1 = -grad(r1[l]) - b * v1;
                r[l] += 0.5 * (v0[l] + v1) * dt;
                p[l] += 0.5 * (f0[l] + f1) * dt + kick[l];
            }
        }
    }
}

fn run_chunk(
    sys: &PhysicalSystem,
    pot: &Potential,
    cfg: &EnsembleConfig,
    records: &[usize],
    range: std::ops::Range<usize>,
) -> ChunkResult {
    // One monomorphised kernel per potential family keeps the force inlined.
    match *pot {
        Potential::Free => run_chunk_with(sys, |_| 0.0, cfg, records, range),
        Potential::Harmonic { k } => run_chunk_with(sys, move |x| k * x, cfg, records, range),
        Potential::LinearGravity { mg } => run_chunk_with(sys, move |_| mg, cfg, records, range),
        Potential::DoubleWell { alpha, beta } => {
            run_chunk_with(sys, move |x| 4.0 * beta * x * x * x - 4.0 * alpha * x, cfg, records, range)
        }
        Potential::Cosine { .. } => {
            let pot = *pot;
            run_chunk_with(sys, move |x| pot.grad(x), cfg, records, range)
        }
    }
}

fn run_chunk_with<G: Fn(f64) -> f64>(
    sys: &PhysicalSystem,
    grad: G,
    cfg: &EnsembleConfig,
    records: &[usize],
    range: std::ops::Range<usize>,
) -> ChunkResult {
    let kernel = Kernel {
        m2: sys.m * sys.m,
        inv_c2: 1.0 / (sys.c * sys.c),
        b: sys.b,
        dt: cfg.dt,
        amp: (2.0 * sys.b * sys.kb_t * cfg.dt).sqrt(),
    };
    let mut sums = vec![[0.0; 4]; records.len()];
    let mut finals = Vec::with_capacity(range.len());
    let mut failure: Option<usize> = None;
    let end = range.end;
    let mut first = range.start;
    while first < end {
        let live = LANES.min(end - first);
        // Padding lanes reuse a live lane's stream index but are never accumulated.
        let mut r = [0.0; LANES];
        let mut p = [0.0; LANES];
        let mut rngs: Vec<Xoshiro256PlusPlus> = Vec::with_capacity(LANES);
        for l in 0..LANES {
            let mut stream = trajectory_rng(cfg.seed, (first + l.min(live - 1)) as u64);
            let s = cfg.init.sample(&mut stream);
            r[l] = s.r;
            p[l] = s.p;
            rngs.push(noise_rng(&mut stream));
        }
        let mut step_index = 0usize;
        for (slot, &target) in sums.iter_mut().zip(records) {
            kernel.advance(&grad, &mut r, &mut p, &mut rngs, target - step_index);
            step_index = target;
            if (0..live).any(|l| !(r[l].is_finite() && p[l].is_finite())) {
                failure = Some(failure.map_or(step_index, |f| f.min(step_index)));
                break;
            }
            for l in 0..live {
                slot[0] += r[l];
                slot[1] += p[l];
                slot[2] += r[l] * r[l];
                slot[3] += p[l] * p[l];
            }
        }
        finals.extend((0..live).map(|l| ParticleState { r: r[l], p: p[l] }));
        first += live;
    }
    ChunkResult { sums, finals, failure }
}

/// Integrate `cfg.n_particles` independent trajectories and record ensemble moments.
///
/// Trajectory `i` draws from its own stream (`trajectory_rng(seed, i)`), so the output
/// is a pure function of the inputs regardless of how the work is scheduled.
pub fn simulate_ensemble(sys: &PhysicalSystem, pot: &Potential, cfg: &EnsembleConfig) -> Result<EnsembleRecord> {
    sys.validate()?;
    pot.validate()?;
    cfg.validate()?;
    let records = cfg.record_steps();
    let n = cfg.n_particles;
    let chunks: Vec<ChunkResult> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| run_chunk(sys, pot, cfg, &records, c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect();

    if let Some(step) = chunks.iter().filter_map(|c| c.failure).min() {
        return Err(Error::NonFinite { step });
    }

    let mut totals = vec![[0.0; 4]; records.len()];
    for chunk in &chunks {
        for (t, s) in totals.iter_mut().zip(&chunk.sums) {
            for k in 0..4 {
                t[k] += s[k];
            }
        }
    }
    let inv = 1.0 / n as f64;
    let moments = records
        .iter()
        .zip(&totals)
        .map(|(&step, s)| {
            let mean_r = s[0] * inv;
            let mean_p = s[1] * inv;
            let mean_p2 = s[3] * inv;
            MomentRecord {
                t: step as f64 * cfg.dt,
                mean_r,
                mean_p,
                var_r: s[2] * inv - mean_r * mean_r,
                var_p: mean_p2 - mean_p * mean_p,
                mean_p2,
            }
        })
        .collect();
    let final_samples = chunks.into_iter().flat_map(|c| c.finals).collect();
    Ok(EnsembleRecord { moments, final_samples })
}

/// Unnormalised log of the Boltzmann-Juttner density,
/// `-(sqrt(m^2 c^4 + c^2 p^2) + U(r)) / k_B T`.
pub fn juttner_log_density(sys: &PhysicalSystem, pot: &Potential, r: f64, p: f64) -> Result<f64> {
    if !(sys.kb_t > 0.0) {
        return Err(Error::Domain("the Boltzmann-Juttner density needs k_B T > 0".into()));
    }
    let rest = sys.c * (sys.m * sys.m * sys.c * sys.c + p * p).sqrt();
    Ok(-(rest + pot.value(r)) / sys.kb_t)
}

/// Relativistic energy `sqrt(m^2 c^4 + c^2 p^2) + U(r)`.
pub fn energy(sys: &PhysicalSystem, pot: &Potential, s: ParticleState) -> f64 {
    sys.c * (sys.m * sys.m * sys.c * sys.c + s.p * s.p).sqrt() + pot.value(s.r)
}
