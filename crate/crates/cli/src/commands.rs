//! One function per solver subcommand. Each returns the files it would write.

use rqbm_core::constants::{derived_table, hawking_unruh_temperature_in};
use rqbm_core::langevin::simulate_ensemble;
use rqbm_core::madelung::{HydroFields, HydroSolver};
use rqbm_core::phase_space::{marginal_p, marginal_x, Mode, PhaseSpaceField, PhaseSpaceOperator};
use rqbm_core::smoluchowski::{
    cubic_friction_rhs, effective_potential_numeric, zero_barrier_temperature_numeric, DensityField,
    SmoluchowskiSolver, StationaryOptions,
};
use rqbm_core::wavefunction::{probability_flux, Propagator, WaveField};
use rqbm_core::{Grid, PhysicalSystem, Potential, CODATA_2018};

use crate::config::{
    DensityInit, EffpotJob, HydroJob, Job, PhaseInit, PhaseSpaceJob, RunConfig, SmoluchowskiJob, WaveInit, WaveJob,
};
use crate::error::CliResult;
use crate::output::{csv, g17, report, Outputs};

pub fn constants() -> Outputs {
    let mut text = String::from("name,value,unit\n");
    for d in derived_table(&CODATA_2018) {
        text.push_str(&format!("{},{},{}\n", d.name, g17(d.value), d.unit));
    }
    let mut out = Outputs::default();
    out.add("constants.csv", text);
    out
}

pub fn run_job(cfg: &RunConfig) -> CliResult<Outputs> {
    let (sys, pot) = (&cfg.system, &cfg.potential);
    match &cfg.job {
        Job::Langevin(e) => {
            let rec = simulate_ensemble(sys, pot, e)?;
            let mut out = Outputs::default();
            out.add(
                "moments.csv",
                csv(
                    &["t", "mean_r", "mean_p", "var_r", "var_p", "mean_p2"],
                    rec.moments.iter().map(|m| [m.t, m.mean_r, m.mean_p, m.var_r, m.var_p, m.mean_p2]),
                ),
            );
            out.add("final_samples.csv", csv(&["r", "p"], rec.final_samples.iter().map(|s| [s.r, s.p])));
            Ok(out)
        }
        Job::Kramers(j) => phase_space(sys, pot, j, Mode::Kramers),
        Job::Wigner(j) => phase_space(sys, pot, j, Mode::WignerKramers),
        Job::Schrodinger(j) => schrodinger(sys, pot, j),
        Job::Madelung(j) => madelung(sys, pot, j),
        Job::Smoluchowski(j) => smoluchowski(sys, pot, j),
        Job::Effpot(j) => effpot(sys, pot, j),
    }
}

/// Whether `step` of an `n_steps` run is written out.
fn is_snapshot(step: usize, n_steps: usize, every: Option<usize>) -> bool {
    step == 0 || step == n_steps || every.is_some_and(|e| step.is_multiple_of(e))
}

fn phase_space(sys: &PhysicalSystem, pot: &Potential, j: &PhaseSpaceJob, default_mode: Mode) -> CliResult<Outputs> {
    let mut field = match j.initial {
        PhaseInit::Juttner => PhaseSpaceField::juttner(sys, pot, j.grid, j.momentum)?,
        PhaseInit::Gaussian { x0, p0, sigma_x, sigma_p } => {
            PhaseSpaceField::gaussian(j.grid, j.momentum, (x0, p0), (sigma_x, sigma_p))?
        }
    };
    let op = PhaseSpaceOperator::new(sys, pot, j.grid, j.momentum, j.mode.unwrap_or(default_mode))?;
    let mut out = Outputs::default();
    let (mut mx, mut mp) = (vec![], vec![]);
    let (x, p) = (j.grid.points(), j.momentum.points());
    op.evolve_with(&mut field, j.dt, j.n_steps, |step, f| {
        if !is_snapshot(step, j.n_steps, j.snapshot_every) {
            return;
        }
        let t = step as f64 * j.dt;
        let rows = (0..x.len()).flat_map(|ix| (0..p.len()).map(move |ip| (ix, ip)));
        out.add(format!("W_t{step}.csv"), csv(&["x", "p", "W"], rows.map(|(ix, ip)| [x[ix], p[ip], f.at(ix, ip)])));
        mx.extend(x.iter().zip(marginal_x(f)).map(|(&x, m)| [step as f64, t, x, m]));
        mp.extend(p.iter().zip(marginal_p(f)).map(|(&p, m)| [step as f64, t, p, m]));
    })?;
    out.add("marginal_x.csv", csv(&["step", "t", "x", "rho"], mx));
    out.add("marginal_p.csv", csv(&["step", "t", "p", "rho"], mp));
    Ok(out)
}

fn wave(sys: &PhysicalSystem, grid: Grid, init: WaveInit) -> CliResult<WaveField> {
    Ok(match init {
        WaveInit::Gaussian { x0, p0, sigma } => WaveField::gaussian(grid, x0, p0, sigma, sys.hbar)?,
        WaveInit::CoherentState { omega, x0, p0 } => WaveField::coherent_state(grid, sys, omega, x0, p0)?,
        WaveInit::PlaneWave { k } => WaveField::plane_wave(grid, k),
    })
}

fn schrodinger(sys: &PhysicalSystem, pot: &Potential, j: &WaveJob) -> CliResult<Outputs> {
    let mut field = wave(sys, j.grid, j.initial)?;
    let prop = Propagator::new(sys, pot, j.grid, j.dt)?;
    let x = j.grid.points();
    let mut out = Outputs::default();
    for step in 0..=j.n_steps {
        if step > 0 {
            prop.step(&mut field)?;
        }
        if is_snapshot(step, j.n_steps, j.snapshot_every) {
            let flux = probability_flux(sys, &field)?;
            let rows = (0..x.len()).map(|i| {
                let psi = field.psi[i];
                [x[i], psi.re, psi.im, psi.norm_sqr(), flux[i]]
            });
            out.add(format!("psi_t{step}.csv"), csv(&["x", "re_psi", "im_psi", "rho", "j"], rows));
        }
    }
    Ok(out)
}

fn madelung(sys: &PhysicalSystem, pot: &Potential, j: &HydroJob) -> CliResult<Outputs> {
    let mut hydro = HydroFields::from_wave(sys, &wave(sys, j.grid, j.initial)?);
    let solver = HydroSolver::new(sys, pot, j.grid, j.variant, j.form)?;
    let x = j.grid.points();
    let mut out = Outputs::default();
    solver.evolve_with(&mut hydro, j.dt, j.n_steps, |step, h| {
        if is_snapshot(step, j.n_steps, j.snapshot_every) {
            let rows = (0..x.len()).map(|i| [x[i], h.rho[i], h.v[i]]);
            out.add(format!("hydro_t{step}.csv"), csv(&["x", "rho", "v"], rows));
        }
    })?;
    Ok(out)
}

fn density_csv(f: &DensityField) -> String {
    let x = f.x.points();
    csv(&["x", "rho"], x.iter().zip(&f.rho).map(|(&x, &r)| [x, r]))
}

fn smoluchowski(sys: &PhysicalSystem, pot: &Potential, j: &SmoluchowskiJob) -> CliResult<Outputs> {
    let initial = match j.initial {
        DensityInit::Gaussian { x0, sigma } => DensityField::gaussian(j.grid, x0, sigma)?,
        DensityInit::Boltzmann => DensityField::boltzmann(sys, pot, j.grid)?,
        DensityInit::Uniform => DensityField::new(j.grid, vec![1.0 / j.grid.length; j.grid.n])?,
    };
    let mut field = initial.clone();
    let solver = SmoluchowskiSolver::new(sys, pot, j.grid, j.variant, j.form)?.with_closure(j.closure)?;
    let mut out = Outputs::default();
    let mut rows: Vec<(&str, f64)> = vec![];
    match j.n_steps {
        Some(n) => {
            solver.evolve_with(&mut field, j.dt, n, |step, f| {
                if is_snapshot(step, n, j.snapshot_every) {
                    out.add(format!("rho_t{step}.csv"), density_csv(f));
                }
            })?;
            rows.extend([("steps", n as f64), ("time", n as f64 * j.dt)]);
        }
        None => {
            let defaults = StationaryOptions::default();
            let opts = StationaryOptions {
                dt: j.dt,
                tol: j.tol.unwrap_or(defaults.tol),
                max_steps: j.max_steps.unwrap_or(defaults.max_steps),
                history_stride: j.snapshot_every.unwrap_or(defaults.history_stride),
            };
            out.add("rho_t0.csv", density_csv(&field));
            let st = solver.evolve_to_stationary(&field, &opts)?;
            out.add(format!("rho_t{}.csv", st.steps), density_csv(&st.field));
            let history = st.history.iter().enumerate().map(|(i, r)| [(i * opts.history_stride) as f64, *r]);
            out.add("history.csv", csv(&["step", "residual"], history));
            rows.extend([
                ("steps", st.steps as f64),
                ("time", st.time),
                ("residual", st.residual),
                ("flux_residual", st.flux_residual),
                ("max_drift_speed", st.max_drift_speed),
            ]);
            field = st.field;
        }
    }
    rows.extend([("mass", field.mass()), ("mean_x", field.mean()), ("variance_x", field.variance())]);
    if sys.b3 > 0.0 {
        let sup = |f: &DensityField| -> CliResult<f64> {
            let r = cubic_friction_rhs(sys, pot, f, j.variant, j.form)?;
            Ok(r.iter().fold(0.0, |a: f64, v| a.max(v.abs())))
        };
        rows.extend([("cubic_residual_initial", sup(&initial)?), ("cubic_residual", sup(&field)?)]);
    }
    let eff = effpot(sys, pot, &EffpotJob { grid: j.grid })?;
    out.add("u_eff.csv", eff.get("u_eff.csv").unwrap_or_default().to_string());
    out.add("report.csv", report(&rows));
    out.add("effpot_report.csv", eff.get("report.csv").unwrap_or_default().to_string());
    Ok(out)
}

fn effpot(sys: &PhysicalSystem, pot: &Potential, j: &EffpotJob) -> CliResult<Outputs> {
    let rep = effective_potential_numeric(sys, pot, &j.grid)?;
    let mut rows = vec![("lambda_t", rep.lambda_t), ("lambda_c", rep.lambda_c), ("barrier_numeric", rep.barrier)];
    if let (Some(dw), Potential::DoubleWell { alpha, beta }) = (rep.double_well, *pot) {
        rows.extend([
            ("quartic", dw.quartic),
            ("quadratic", dw.quadratic),
            ("constant", dw.constant),
            ("E_a", dw.barrier),
            ("T_zero_barrier", dw.t_zero_barrier),
            ("T_zero_barrier_numeric", zero_barrier_temperature_numeric(sys, alpha, beta, &j.grid)?),
        ]);
    }
    if let Some(c) = rep.cosine {
        rows.push(("suppression_factor", c.factor));
        if let Some(t) = c.t_free {
            rows.push(("T_free", t));
        }
        rows.push(("factor_at_inverse_compton", c.factor_at_inverse_compton));
        rows.push(("within_expansion", if c.within_expansion { 1.0 } else { 0.0 }));
    }
    if let Potential::LinearGravity { mg } = *pot {
        let t_g = hawking_unruh_temperature_in(sys, mg / sys.m)?;
        rows.push(("T_g", t_g));
        rows.push(("quantum_potential_factor", 1.0 + (t_g / sys.temperature()).powi(2)));
    }
    let mut out = Outputs::default();
    let points = (0..rep.x.len()).map(|i| [rep.x[i], rep.u[i], rep.u_eff[i]]);
    out.add("u_eff.csv", csv(&["x", "u", "u_eff"], points));
    out.add("report.csv", report(&rows));
    Ok(out)
}
