use std::path::Path;
use std::process::{Command, Output};

use mlz::harness::{config_from_output, Command as Cmd, ScenarioConfig};

fn mlz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlz")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fields_row_at_origin() {
    let out = mlz(&["fields", "--nu", "0.8", "--points", "2001"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().any(|l| l == "nu_t,omega_x_over_eta,omega_z_over_eta"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 2001);
    assert_eq!(rows[1000], vec![0.0, 1.0, 0.0]);
    let cell = text.lines().last().unwrap().split(',').next().unwrap();
    assert_eq!(cell.split_once('e').unwrap().0.len(), 18);
    assert!((rows[2000][0] - 10.0 * std::f64::consts::PI).abs() < 1e-13);
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        &["populations", "--j", "3/2", "--points", "301"][..],
        &["transitions", "--j", "1", "--m", "0", "--points", "301"][..],
        &["sweep", "--axis", "gamma", "--values", "0,0.001,0.01", "--nu-tau-c", "8"][..],
    ] {
        let a = mlz(args);
        let b = mlz(args);
        assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn config_file_round_trips_through_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "j = \"1\"\nnu = 0.5\nnu_tau_c = 12.0\npoints = 101\nm = 1\n").unwrap();
    let cfg_arg = cfg.to_str().unwrap();
    let first = mlz(&["populations", "--config", cfg_arg]);
    assert!(first.status.success());
    let text = stdout(&first);

    let parsed = config_from_output(&text).unwrap();
    let expected = ScenarioConfig::from_toml_str(&std::fs::read_to_string(&cfg).unwrap())
        .unwrap()
        .resolve(Cmd::Populations)
        .unwrap();
    assert_eq!(parsed, expected);

    let replay = dir.path().join("replay.toml");
    std::fs::write(&replay, parsed.to_toml()).unwrap();
    let second = mlz(&["populations", "--config", replay.to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "nu = 0.5\ntau_c = 3.0\npoints = 11\n").unwrap();
    let out = mlz(&["fields", "--config", cfg.to_str().unwrap(), "--nu", "0.25", "--nu-tau-c", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let c = config_from_output(&stdout(&out)).unwrap();
    assert_eq!((c.nu, c.nu_tau_c, c.tau_c, c.points), (0.25, Some(2.0), None, 11));
    assert_eq!(data_rows(&stdout(&out))[0][0], -2.0);
}

#[test]
fn json_output_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("levels.json");
    let out = mlz(&["levels", "--j", "1", "--points", "3", "--format", "json", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(Path::new(&path)).unwrap();
    assert!(text.starts_with('{'));
    for key in ["\"meta\"", "\"columns\"", "\"rows\"", "\"E_dia(0)/eta\""] {
        assert!(text.contains(key), "{key}");
    }
    assert_eq!(config_from_output(&text).unwrap().points, 3);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, "nu_tua_c = 3.0\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["fields", "--nu", "1.5"],
        vec!["fields", "--config", typo.to_str().unwrap()],
        vec!["populations", "--j", "1", "--m", "0.5"],
        vec!["noise", "--j", "1"],
        vec!["noise", "--gamma-x", "0.1", "--gamma-z", "0.2"],
        vec!["sweep"],
        vec!["sweep", "--axis", "phase"],
        vec!["verify", "--tol", "0.01"],
        vec!["fields", "--config", "/nonexistent/mlz.toml"],
    ];
    for args in cases {
        let out = mlz(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn verify_passes_with_default_and_loose_tolerance() {
    for tol in ["1e-10", "1e-4"] {
        let out = mlz(&["verify", "--j", "1", "--tol", tol, "--format", "json"]);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
        assert!(stdout(&out).contains("\"passed\":true"));
    }
}

#[test]
fn empty_sweep_is_header_only() {
    let out = mlz(&["sweep", "--axis", "tau_c", "--values", ""]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(
        text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>(),
        ["nu_t,nu_tau_c,kappa,P,P_delta,bound,F"]
    );
}
