use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rqbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rqbm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

const LANGEVIN: &str = r#"{
  "schema_version": 1,
  "system": {"c": 2.0},
  "potential": {"type": "harmonic", "k": 1.0},
  "job": {"langevin": {"n_particles": 300, "dt": 0.01, "n_steps": 200, "seed": 5, "record_every": 50,
                       "init": {"type": "gaussian", "mean_r": 1.0, "std_r": 0.2, "mean_p": 0.0, "std_p": 0.3}}}
}"#;

const KRAMERS: &str = r#"{
  "schema_version": 1,
  "potential": {"type": "harmonic", "k": 1.0},
  "job": {"kramers": {"grid": {"n": 32, "x_min": -8.0, "length": 16.0}, "momentum": {"n": 48, "p_max": 8.0},
                      "initial": {"type": "gaussian", "x0": 1.0, "p0": 0.0, "sigma_x": 0.6, "sigma_p": 0.6},
                      "dt": 0.01, "n_steps": 20, "snapshot_every": 10}}
}"#;

const MADELUNG: &str = r#"{
  "schema_version": 1,
  "system": {"kb_t": 0.0, "b": 0.0, "c": 1000000.0},
  "potential": {"type": "harmonic", "k": 1.0},
  "job": {"madelung": {"grid": {"n": 64, "x_min": -8.0, "length": 16.0},
                       "initial": {"type": "coherent_state", "omega": 1.0, "x0": 1.0, "p0": 0.0},
                       "variant": "quantum_nonrelativistic", "dt": 0.002, "n_steps": 50, "snapshot_every": 25}}
}"#;

#[test]
fn constants_prints_csv_with_header() {
    let o = rqbm(&["constants"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "name,value,unit");
    assert_eq!(lines.len(), 7);
    let t_g: f64 = lines
        .iter()
        .find(|l| l.starts_with("hawking_unruh_temperature_g9.81,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((t_g / 6.25e-20 - 1.0).abs() < 0.005);
}

#[test]
fn malformed_config_exits_1_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy();
    let cases = [
        "{ not json",
        r#"{"schema_version": 1, "job": {"effpot": {"grid": {"n": 8, "x_min": 0.0, "length": 1.0}}}, "colour": 1}"#,
        r#"{"schema_version": 7, "job": {"effpot": {"grid": {"n": 8, "x_min": 0.0, "length": 1.0}}}}"#,
        r#"{"schema_version": 1, "system": {"m": -1.0}, "job": {"effpot": {"grid": {"n": 8, "x_min": 0.0, "length": 1.0}}}}"#,
    ];
    for (i, json) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), json);
        let o = rqbm(&["effpot", "--config", &cfg, "--out", &out_s]);
        assert_eq!(o.status.code(), Some(1), "{json}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
        assert!(!out.exists());
    }
    let o = rqbm(&["effpot", "--config", &dir.path().join("missing.json").to_string_lossy()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn job_must_match_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.json", KRAMERS);
    let o = rqbm(&["wigner", "--config", &cfg, "--out", &dir.path().join("o").to_string_lossy()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rqbm kramers"));
}

#[test]
fn unknown_preset_lists_valid_names() {
    let o = rqbm(&["smoluchowski", "--preset", "warp_drive", "--out", "unused"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cubic_friction_stationary"));
}

#[test]
fn step_above_stability_bound_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.json", &KRAMERS.replace("\"dt\": 0.01", "\"dt\": 5.0"));
    let out = dir.path().join("o");
    let o = rqbm(&["kramers", "--config", &cfg, "--out", &out.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("stability bound"));
    assert!(!out.exists());
}

#[test]
fn non_convergence_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{
      "schema_version": 1,
      "system": {"c": 10.0},
      "potential": {"type": "harmonic", "k": 1.0},
      "job": {"smoluchowski": {"grid": {"n": 80, "x_min": -10.0, "length": 20.0},
                               "initial": {"type": "gaussian", "x0": 0.5, "sigma": 0.7},
                               "dt": 0.0002, "tol": 1e-11, "max_steps": 10}}
    }"#;
    let cfg = write_config(dir.path(), "s.json", json);
    let out = dir.path().join("o");
    let o = rqbm(&["smoluchowski", "--config", &cfg, "--out", &out.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("no convergence"));
    assert!(!out.exists());
}

#[test]
fn langevin_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "l.json", LANGEVIN);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(rqbm(&["langevin", "--config", &cfg, "--out", &a.to_string_lossy()]).status.success());
    assert!(rqbm(&["--threads", "1", "langevin", "--config", &cfg, "--out", &b.to_string_lossy()]).status.success());
    for f in ["moments.csv", "final_samples.csv"] {
        let (x, y) = (fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        assert_eq!(x, y, "{f}");
    }
    let moments = fs::read_to_string(a.join("moments.csv")).unwrap();
    assert!(moments.starts_with("t,mean_r,mean_p,var_r,var_p,mean_p2\n"));
    // Steps 0, 50, 100, 150 and 200.
    assert_eq!(moments.lines().count(), 1 + 5);
    let samples = fs::read_to_string(a.join("final_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 300);
}

#[test]
fn kramers_writes_snapshots_and_normalised_marginals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.json", KRAMERS);
    let out = dir.path().join("o");
    let o = rqbm(&["kramers", "--config", &cfg, "--out", &out.to_string_lossy()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["W_t0.csv", "W_t10.csv", "W_t20.csv", "marginal_x.csv", "marginal_p.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let w = fs::read_to_string(out.join("W_t20.csv")).unwrap();
    assert_eq!(w.lines().next(), Some("x,p,W"));
    assert_eq!(w.lines().count(), 1 + 32 * 48);
    let mx = fs::read_to_string(out.join("marginal_x.csv")).unwrap();
    let last: f64 = mx
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .filter(|r| r[0] == 20.0)
        .map(|r| r[3] * 0.5)
        .sum();
    assert!((last - 1.0).abs() < 1e-10, "mass {last}");
}

#[test]
fn madelung_writes_hydro_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.json", MADELUNG);
    let out = dir.path().join("o");
    let o = rqbm(&["madelung", "--config", &cfg, "--out", &out.to_string_lossy()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("hydro_t50.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("x,rho,v"));
    assert_eq!(text.lines().count(), 65);
    assert!(out.join("hydro_t25.csv").exists() && out.join("hydro_t0.csv").exists());
}

#[test]
fn planewave_preset_flux_velocity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = rqbm(&["schrodinger", "--preset", "planewave_flux", "--out", &out.to_string_lossy()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("psi_t100.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("x,re_psi,im_psi,rho,j"));
    // m = c = hbar = 1, k = 1/16: lambda_C = 1/2.
    let k = 1.0 / 16.0;
    let expected = k * (1.0 - 2.0 * 0.25 * k * k);
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[4] / v[3] - expected).abs() < 1e-10 * expected);
    }
}

#[test]
fn effpot_without_out_prints_report() {
    let o = rqbm(&["effpot", "--preset", "double_well_barrier"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("quantity,value\n"));
    let get = |name: &str| -> f64 {
        text.lines().find(|l| l.starts_with(&format!("{name},"))).unwrap().split(',').nth(1).unwrap().parse().unwrap()
    };
    // lambda_T = 0.1: quadratic -2(1 - 6 * 0.01), E_a = (1 - 0.06)^2.
    assert!((get("quadratic") + 1.88).abs() < 1e-12);
    assert!((get("E_a") - 0.8836).abs() < 1e-12);
    assert_eq!(get("T_zero_barrier"), 1.5);
}

#[test]
fn barometric_preset_reports_factor() {
    let o = rqbm(&["effpot", "--preset", "barometric_factor"]);
    assert!(o.status.success());
    // T_g = hbar g / (4 c k_B) = 1/40 for g = 1, c = 10.
    assert!(stdout(&o).contains("quantum_potential_factor,1.000625"));
}

#[test]
fn print_config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = rqbm(&["smoluchowski", "--preset", "cubic_friction_stationary", "--print-config"]);
    assert!(o.status.success());
    let cfg = write_config(dir.path(), "c.json", &stdout(&o));
    let again = rqbm(&["smoluchowski", "--config", &cfg, "--print-config"]);
    assert_eq!(stdout(&again), stdout(&o));
}

#[test]
fn validate_single_criterion_and_list() {
    let dir = tempfile::tempdir().unwrap();
    let o = rqbm(&["validate", "--criterion", "5", "--out", &dir.path().to_string_lossy()]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("criterion  5 [PASS]"));
    let table = fs::read_to_string(dir.path().join("validation.csv")).unwrap();
    assert!(table.starts_with("criterion,passed,seconds,title,detail\n5,true,"));

    let o = rqbm(&["validate", "--preset", "barometric_factor"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("criterion  9 [PASS]"));

    let o = rqbm(&["validate", "--list"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 4));

    assert_eq!(rqbm(&["validate"]).status.code(), Some(1));
    assert_eq!(rqbm(&["validate", "--criterion", "13"]).status.code(), Some(1));
}
