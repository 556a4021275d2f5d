//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a dataset as JSON text (`meta`, `columns`, `rows`); the
//! page parses it and draws the columns against `nu_t`.

use mlz::harness::{self, Scenario, ScenarioConfig};
use mlz::Spin;
use wasm_bindgen::prelude::*;

const DEMO_POINTS: usize = 801;

fn base(nu_over_eta: f64, j: &str, nu_tau_c: f64) -> Result<ScenarioConfig, String> {
    let j: Spin = j.parse().map_err(|e: mlz::Error| e.to_string())?;
    Ok(ScenarioConfig {
        eta: 1.0,
        nu: nu_over_eta,
        j,
        nu_tau_c: Some(nu_tau_c),
        points: DEMO_POINTS,
        ..Default::default()
    })
}

pub fn levels_json(nu_over_eta: f64, j: &str, nu_tau_c: f64) -> Result<String, String> {
    let config = base(nu_over_eta, j, nu_tau_c)?;
    Ok(harness::cmd_levels(&config).map_err(|e| e.to_string())?.to_json())
}

/// Populations from the closed-form propagator, starting in level `m`.
pub fn populations_json(nu_over_eta: f64, j: &str, m: f64, nu_tau_c: f64) -> Result<String, String> {
    let config = ScenarioConfig { m: Some(m), scenario: Some(Scenario::Exact), ..base(nu_over_eta, j, nu_tau_c)? };
    Ok(harness::cmd_populations(&config).map_err(|e| e.to_string())?.to_json())
}

/// Spin-1/2 fidelity under `channel` ("dephasing" or "spinflip") at rate `γ/ν`.
pub fn noise_json(nu_over_eta: f64, channel: &str, gamma_over_nu: f64, nu_tau_c: f64) -> Result<String, String> {
    let mut config = base(nu_over_eta, "1/2", nu_tau_c)?;
    match channel {
        "dephasing" => (config.scenario, config.gamma_z) = (Some(Scenario::Dephasing), Some(gamma_over_nu)),
        "spinflip" => (config.scenario, config.gamma) = (Some(Scenario::Spinflip), Some(gamma_over_nu)),
        other => return Err(format!("unknown channel `{other}`")),
    }
    Ok(harness::cmd_noise(&config).map_err(|e| e.to_string())?.to_json())
}

#[wasm_bindgen]
pub fn levels(nu_over_eta: f64, j: &str, nu_tau_c: f64) -> Result<String, JsValue> {
    levels_json(nu_over_eta, j, nu_tau_c).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn populations(nu_over_eta: f64, j: &str, m: f64, nu_tau_c: f64) -> Result<String, JsValue> {
    populations_json(nu_over_eta, j, m, nu_tau_c).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn noise(nu_over_eta: f64, channel: &str, gamma_over_nu: f64, nu_tau_c: f64) -> Result<String, JsValue> {
    noise_json(nu_over_eta, channel, gamma_over_nu, nu_tau_c).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(json: &str) -> usize {
        json.matches("],[").count() + 1
    }

    #[test]
    fn exports_produce_datasets() {
        let l = levels_json(0.8, "1", 10.0).unwrap();
        assert!(l.contains("\"E_ad(0)/eta\""));
        assert_eq!(rows(&l), DEMO_POINTS);
        let p = populations_json(0.8, "3/2", 1.5, 10.0).unwrap();
        assert!(p.contains("\"p(-3/2)\""));
        let n = noise_json(0.8, "spinflip", 0.01, 8.0).unwrap();
        assert!(n.contains("\"spinflip\""));
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(levels_json(1.5, "1", 10.0).is_err());
        assert!(populations_json(0.8, "1", 0.5, 10.0).is_err());
        assert!(noise_json(0.8, "amplitude", 0.01, 8.0).is_err());
        assert!(levels_json(0.8, "x", 10.0).is_err());
    }
}
