//! Scenario configuration, dataset emitters and the verification suite behind
//! the `mlz` command-line tool.
//!
//! Every quantity at this level is dimensionless: times are reported as `νt`,
//! energies and fields in units of `η`, and damping rates are given as `γ/ν`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact;
use crate::linalg::{hermitian_eigenvalues, spectral_norm};
use crate::model::{adiabatic_energy, field_components, ModelParams, Spin};
use crate::ode::uniform_grid;
use crate::open_system::{self, BlochVector, DampingRates};
use crate::oracle::{self, Labeling, QuantumState, DEFAULT_POINTS, DEFAULT_TOL};

pub const ENGINE: &str = concat!("mlz ", env!("CARGO_PKG_VERSION"));

/// Default half-window `ντ_c = 10π`.
pub const DEFAULT_NU_TAU_C: f64 = 10.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Fields,
    Levels,
    Populations,
    Transitions,
    Noise,
    Sweep,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fields => "fields",
            Command::Levels => "levels",
            Command::Populations => "populations",
            Command::Transitions => "transitions",
            Command::Noise => "noise",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }

    fn accepts(self, scenario: Scenario) -> bool {
        use Scenario as S;
        matches!(
            (self, scenario),
            (Command::Fields, S::Fields)
                | (Command::Levels, S::Levels)
                | (Command::Populations, S::Exact | S::Oracle)
                | (Command::Transitions, S::Transitions)
                | (Command::Noise, S::Dephasing | S::Spinflip)
                | (Command::Sweep, S::Sweep)
                | (Command::Verify, _)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Fields,
    Levels,
    /// Populations from the closed-form propagator.
    Exact,
    /// Populations from direct integration.
    Oracle,
    Transitions,
    Dephasing,
    Spinflip,
    Sweep,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Values are `ντ_c`.
    TauC,
    /// Values are `γ/ν` for the configured channel.
    Gamma,
    /// Values are `η/ν`; `ν` stays fixed.
    EtaOverNu,
}

impl SweepAxis {
    fn column(self) -> &'static str {
        match self {
            SweepAxis::TauC => "nu_tau_c",
            SweepAxis::Gamma => "gamma_over_nu",
            SweepAxis::EtaOverNu => "eta_over_nu",
        }
    }

    fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::TauC => (1..=10).map(|k| k as f64 * PI).collect(),
            SweepAxis::Gamma => vec![0.0, 1e-3, 5e-3, 1e-2],
            SweepAxis::EtaOverNu => vec![1.25, 2.0, 5.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Dephasing,
    Spinflip,
}

fn default_eta() -> f64 {
    1.0
}

fn default_nu() -> f64 {
    0.8
}

fn default_spin() -> Spin {
    Spin::HALF
}

fn default_points() -> usize {
    DEFAULT_POINTS
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

/// Flat scenario description, read from TOML and overridden by CLI flags.
///
/// Rates are dimensionless (`γ/ν`); the window is either `nu_tau_c` or the
/// absolute `tau_c`, never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_spin")]
    pub j: Spin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_tau_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_c: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_z: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Channel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default)]
    pub format: Format,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::from_table(toml::Table::new()).expect("empty table is a valid config")
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        table.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    /// Parses the optional file text, then lays `overrides` on top key by key.
    /// A window given in `overrides` replaces either window form in the file.
    pub fn load(file: Option<&str>, overrides: toml::Table) -> Result<Self> {
        let mut table: toml::Table = match file {
            Some(text) => text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?,
            None => toml::Table::new(),
        };
        if overrides.contains_key("nu_tau_c") || overrides.contains_key("tau_c") {
            table.remove("nu_tau_c");
            table.remove("tau_c");
        }
        table.extend(overrides);
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.eta, self.nu, self.j)
    }

    /// Absolute half-window `τ_c`.
    pub fn window(&self) -> Result<f64> {
        let tau = match (self.nu_tau_c, self.tau_c) {
            (Some(_), Some(_)) => return Err(Error::Config("give either nu_tau_c or tau_c, not both".into())),
            (Some(x), None) => x / self.nu,
            (None, Some(tau)) => tau,
            (None, None) => DEFAULT_NU_TAU_C / self.nu,
        };
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::NonPositiveWindow(tau));
        }
        Ok(tau)
    }

    /// Rates in units of `ν`. `gamma` sets all three components and excludes the others.
    pub fn rates_over_nu(&self) -> Result<DampingRates> {
        let parts = [self.gamma_x, self.gamma_y, self.gamma_z];
        match self.gamma {
            Some(_) if parts.iter().any(Option::is_some) => {
                Err(Error::Config("gamma excludes gamma_x/gamma_y/gamma_z".into()))
            }
            Some(g) => DampingRates::isotropic(g),
            None => DampingRates::new(parts[0].unwrap_or(0.0), parts[1].unwrap_or(0.0), parts[2].unwrap_or(0.0)),
        }
    }

    fn absolute_rates(&self, over_nu: DampingRates) -> Result<DampingRates> {
        DampingRates::new(over_nu.gamma_x * self.nu, over_nu.gamma_y * self.nu, over_nu.gamma_z * self.nu)
    }

    fn level(&self, params: &ModelParams) -> Result<f64> {
        let m = self.m.unwrap_or(params.j());
        params.spin().index_of(m)?;
        Ok(m)
    }

    /// Checks every key before any computation and fills in the scenario implied by `command`.
    pub fn resolve(mut self, command: Command) -> Result<Self> {
        let params = self.params()?;
        self.window()?;
        if self.points < 2 {
            return Err(Error::Config(format!("points must be at least 2, got {}", self.points)));
        }
        if !(crate::ode::MIN_TOL..=crate::ode::MAX_TOL).contains(&self.tol) {
            return Err(Error::InvalidTolerance(self.tol));
        }
        let rates = self.rates_over_nu()?;
        if let Some(m) = self.m {
            params.spin().index_of(m)?;
        }
        if let Some(values) = &self.values {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sweep values must be finite".into()));
            }
        }
        if let Some(s) = self.scenario {
            if !command.accepts(s) {
                return Err(Error::Config(format!(
                    "scenario `{}` does not belong to the `{}` command",
                    scenario_name(s),
                    command.name()
                )));
            }
        }
        let implied = match command {
            Command::Fields => Some(Scenario::Fields),
            Command::Levels => Some(Scenario::Levels),
            Command::Populations => Some(Scenario::Oracle),
            Command::Transitions => Some(Scenario::Transitions),
            Command::Noise => Some(noise_channel(self.scenario, &rates)?),
            Command::Sweep => Some(Scenario::Sweep),
            Command::Verify => None,
        };
        self.scenario = self.scenario.or(implied);
        Ok(self)
    }
}

fn scenario_name(s: Scenario) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn noise_channel(requested: Option<Scenario>, rates: &DampingRates) -> Result<Scenario> {
    let dephasing = rates.gamma_x == 0.0 && rates.gamma_y == 0.0;
    match requested {
        Some(Scenario::Dephasing) if !dephasing => {
            Err(Error::Config("dephasing takes gamma_z only; gamma_x and gamma_y must be zero".into()))
        }
        Some(Scenario::Spinflip) if !rates.is_isotropic() => {
            Err(Error::Config("spinflip needs equal rates; use gamma".into()))
        }
        Some(s) => Ok(s),
        None if dephasing => Ok(Scenario::Dephasing),
        None if rates.is_isotropic() => Ok(Scenario::Spinflip),
        None => Err(Error::Config("rates match neither dephasing (gamma_z only) nor spinflip (equal rates)".into())),
    }
}

/// Columns of reals plus the resolved configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub command: Command,
    pub config: ScenarioConfig,
    pub units: &'static str,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Meta<'a> {
    engine: &'a str,
    command: &'a str,
    tol: f64,
    units: &'a str,
    config: &'a ScenarioConfig,
}

impl Dataset {
    fn new(command: Command, config: &ScenarioConfig, units: &'static str, columns: Vec<String>) -> Self {
        Self { command, config: config.clone(), units, columns, rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    fn meta(&self) -> Meta<'_> {
        Meta {
            engine: ENGINE,
            command: self.command.name(),
            tol: self.config.tol,
            units: self.units,
            config: &self.config,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// `#`-prefixed TOML metadata, a header row, then rows at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = comment_block(&toml::to_string(&self.meta()).expect("metadata serializes"));
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let doc = serde_json::json!({
            "meta": self.meta(),
            "columns": self.columns,
            "rows": self.rows,
        });
        let mut s = serde_json::to_string(&doc).expect("dataset serializes");
        s.push('\n');
        s
    }
}

fn comment_block(toml_text: &str) -> String {
    let mut s = String::new();
    for line in toml_text.lines().filter(|l| !l.is_empty()) {
        let _ = writeln!(s, "# {line}");
    }
    s
}

/// Recovers the configuration from the metadata of a rendered CSV or JSON dataset.
pub fn config_from_output(text: &str) -> Result<ScenarioConfig> {
    let bad = |what: String| Error::Config(format!("cannot read dataset metadata: {what}"));
    let config = if text.trim_start().starts_with('{') {
        let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let cfg = doc.get("meta").and_then(|m| m.get("config")).cloned().ok_or_else(|| bad("no meta.config".into()))?;
        serde_json::from_value(cfg).map_err(|e| bad(e.to_string()))?
    } else {
        let header: String = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| format!("{}\n", l.trim_start_matches('#').trim_start()))
            .collect();
        let mut meta: toml::Table = header.parse().map_err(|e: toml::de::Error| bad(e.message().to_string()))?;
        match meta.remove("config") {
            Some(toml::Value::Table(t)) => ScenarioConfig::from_table(t)?,
            _ => return Err(bad("no [config] table".into())),
        }
    };
    Ok(config)
}

fn level_label(m: f64) -> String {
    let twice = (2.0 * m).round() as i64;
    let sign = if twice > 0 {
        "+"
    } else if twice < 0 {
        "-"
    } else {
        ""
    };
    let a = twice.unsigned_abs();
    if a.is_multiple_of(2) {
        format!("{sign}{}", a / 2)
    } else {
        format!("{sign}{a}/2")
    }
}

fn time_grid(config: &ScenarioConfig) -> Result<Vec<f64>> {
    let tau = config.window()?;
    Ok(uniform_grid(-tau, tau, config.points))
}

pub fn cmd_fields(config: &ScenarioConfig) -> Result<Dataset> {
    let config = config.clone().resolve(Command::Fields)?;
    let params = config.params()?;
    let mut ds = Dataset::new(
        Command::Fields,
        &config,
        "time as nu*t; fields in units of eta",
        vec!["nu_t".into(), "omega_x_over_eta".into(), "omega_z_over_eta".into()],
    );
    for t in time_grid(&config)? {
        let f = field_components(&params, t);
        ds.rows.push(vec![params.nu() * t, f.x / params.eta(), f.z / params.eta()]);
    }
    Ok(ds)
}

pub fn cmd_levels(config: &ScenarioConfig) -> Result<Dataset> {
    let config = config.clone().resolve(Command::Levels)?;
    let params = config.params()?;
    let levels: Vec<f64> = params.spin().levels().collect();
    let mut columns = vec!["nu_t".to_string()];
    columns.extend(levels.iter().map(|&m| format!("E_ad({})/eta", level_label(m))));
    columns.extend(levels.iter().map(|&m| format!("E_dia({})/eta", level_label(m))));
    let mut ds = Dataset::new(Command::Levels, &config, "time as nu*t; energies in units of eta", columns);
    for t in time_grid(&config)? {
        let mut row = vec![params.nu() * t];
        for &m in &levels {
            row.push(adiabatic_energy(&params, m, t)? / params.eta());
        }
        for &m in &levels {
            row.push(exact::diabatic_energy(&params, m, t)? / params.eta());
        }
        ds.rows.push(row);
    }
    Ok(ds)
}

/// Level populations `p_m(t)` of a sweep started in `|m⟩` at `−τ_c`.
pub fn cmd_populations(config: &ScenarioConfig) -> Result<Dataset> {
    let config = config.clone().resolve(Command::Populations)?;
    let params = config.params()?;
    let m0 = config.level(&params)?;
    let grid = time_grid(&config)?;
    let mut columns = vec!["nu_t".to_string()];
    columns.extend(params.spin().levels().map(|m| format!("p({})", level_label(m))));
    let mut ds = Dataset::new(Command::Populations, &config, "time as nu*t", columns);

    let psi0 = QuantumState::basis(&params, m0, grid[0])?;
    let states: Vec<QuantumState> = match config.scenario {
        Some(Scenario::Exact) => grid
            .iter()
            .map(|&t| {
                let u = exact::propagator(&params, grid[0], t)?;
                Ok(QuantumState { t, amplitudes: u * &psi0.amplitudes })
            })
            .collect::<Result<_>>()?,
        _ => oracle::integrate_schrodinger(&params, &params.operators(), &psi0, &grid, config.tol)?.states,
    };
    for s in states {
        let mut row = vec![params.nu() * s.t];
        row.extend(s.populations());
        ds.rows.push(row);
    }
    Ok(ds)
}

/// Column `n` of the transition matrix along the sweep, rows labeled by the
/// diabatic sign convention so that a completed transfer reads `T(−n,n) → 1`.
pub fn cmd_transitions(config: &ScenarioConfig) -> Result<Dataset> {
    let config = config.clone().resolve(Command::Transitions)?;
    let params = config.params()?;
    let ops = params.operators();
    let n = config.level(&params)?;
    let col = params.spin().index_of(n)?;
    let tau = config.window()?;
    let trajectories = oracle::transition_trajectories(&params, &ops, tau, config.points, config.tol)?;
    let history = oracle::transition_history(&params, &ops, &trajectories, Labeling::Diabatic)?;
    let mut columns = vec!["nu_t".to_string()];
    columns.extend(params.spin().levels().map(|m| format!("T({},{})", level_label(m), level_label(n))));
    let mut ds = Dataset::new(Command::Transitions, &config, "time as nu*t", columns);
    for tm in history {
        let mut row = vec![params.nu() * tm.t];
        row.extend(tm.t_matrix.column(col).iter());
        ds.rows.push(row);
    }
    Ok(ds)
}

/// Fidelity with the target `|φ_+(t)⟩` under dephasing or spin-flip noise.
pub fn cmd_noise(config: &ScenarioConfig) -> Result<Dataset> {
    let config = config.clone().resolve(Command::Noise)?;
    let params = config.params()?;
    let rates = config.absolute_rates(config.rates_over_nu()?)?;
    let curve = open_system::run_scenario(&params, rates, config.window()?, config.points, config.tol)?;
    let columns = ["nu_t", "F", "transfer", "r_x", "r_y", "r_z"].map(String::from).to_vec();
    let mut ds = Dataset::new(Command::Noise, &config, "time as nu*t; rates as gamma/nu", columns);
    for (k, r) in curve.bloch.iter().enumerate() {
        ds.rows.push(vec![curve.nu_t[k], curve.fidelity[k], curve.transfer[k], r.rx, r.ry, r.rz]);
    }
    Ok(ds)
}

/// Endpoint transfer and fidelity across one sweep axis (spin 1/2).
///
/// Columns: `nu_t` (the endpoint `ντ_c`), the axis value, `kappa`, the closed-form
/// transfer `P`, its loss `P_delta`, the bound `(1+ν²τ_c²)⁻¹` and the noisy endpoint
/// fidelity `F`.
pub fn cmd_sweep(config: &ScenarioConfig) -> Result<Dataset> {
    let config = config.clone().resolve(Command::Sweep)?;
    let axis = config.axis.ok_or_else(|| Error::Config("sweep needs an axis: tau_c, gamma or eta_over_nu".into()))?;
    let values = config.values.clone().unwrap_or_else(|| axis.default_values());
    let base = config.params()?;
    if !base.spin().is_half() {
        return Err(Error::RequiresSpinHalf { what: "the sweep command", j: base.j(), hint: "set j = 1/2" });
    }
    let columns = ["nu_t", axis.column(), "kappa", "P", "P_delta", "bound", "F"].map(String::from).to_vec();
    let mut ds = Dataset::new(Command::Sweep, &config, "time as nu*t; rates as gamma/nu", columns);
    let point = |v: f64| -> Result<Vec<f64>> {
        let (mut params, mut tau, mut rates) = (base, config.window()?, config.rates_over_nu()?);
        match axis {
            SweepAxis::TauC => tau = v / base.nu(),
            SweepAxis::Gamma => {
                rates = match config.channel.unwrap_or(Channel::Spinflip) {
                    Channel::Dephasing => DampingRates::dephasing(v)?,
                    Channel::Spinflip => DampingRates::isotropic(v)?,
                }
            }
            SweepAxis::EtaOverNu => params = ModelParams::new(v * base.nu(), base.nu(), base.spin())?,
        }
        let report = exact::transfer_probability(&params, tau)?;
        let curve = open_system::run_scenario(&params, config.absolute_rates(rates)?, tau, 2, config.tol)?;
        let nu_t = if axis == SweepAxis::TauC { v } else { params.nu() * tau };
        Ok(vec![nu_t, v, params.kappa(), report.probability, report.loss, report.bound, curve.final_fidelity()])
    };
    // independent points run concurrently; rows keep the order of `values`
    let rows: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = values.iter().map(|&v| scope.spawn(move || point(v))).collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    ds.rows = rows.into_iter().collect::<Result<_>>()?;
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub gate: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &'static str, value: f64, gate: f64) -> Self {
        Self { name, value, gate, passed: value < gate }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub config: ScenarioConfig,
    pub checks: Vec<Check>,
}

#[derive(Serialize)]
struct ReportMeta<'a> {
    engine: &'a str,
    command: &'a str,
    tol: f64,
    passed: bool,
    config: &'a ScenarioConfig,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn meta(&self) -> ReportMeta<'_> {
        ReportMeta {
            engine: ENGINE,
            command: Command::Verify.name(),
            tol: self.config.tol,
            passed: self.passed(),
            config: &self.config,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = comment_block(&toml::to_string(&self.meta()).expect("metadata serializes"));
                s.push_str("check,value,gate,status\n");
                for c in &self.checks {
                    let status = if c.passed { "pass" } else { "FAIL" };
                    let _ = writeln!(s, "{},{:.16e},{:.16e},{status}", c.name, c.value, c.gate);
                }
                s
            }
            Format::Json => {
                let doc = serde_json::json!({ "meta": self.meta(), "checks": self.checks });
                let mut s = serde_json::to_string(&doc).expect("report serializes");
                s.push('\n');
                s
            }
        }
    }
}

/// Gate for agreement between the two engines; widens once the integrator
/// tolerance is looser than the default.
pub fn oracle_gate(tol: f64) -> f64 {
    (100.0 * tol).max(1e-6)
}

/// Runs the cross-module invariant suite with the configured `eta`, `nu`, `j` and `tol`.
pub fn cmd_verify(config: &ScenarioConfig) -> Result<VerifyReport> {
    let config = config.clone().resolve(Command::Verify)?;
    verify_params(&config, &config.params()?)
}

/// Like [`cmd_verify`] but on explicit parameters, which need not be self-consistent.
pub fn verify_params(config: &ScenarioConfig, params: &ModelParams) -> Result<VerifyReport> {
    let tol = config.tol;
    let ops = params.operators();
    let nu = params.nu();
    let dt = exact::default_dt(params);
    let sample_times = [-50.0, -5.0, -1.0, -0.3, 0.0, 0.2, 1.0, 3.0, 50.0].map(|x| x / nu);
    let mut checks = Vec::new();

    let mut defect: f64 = 0.0;
    let mut spectrum: f64 = 0.0;
    let mut connection: f64 = 0.0;
    for &t in &sample_times {
        defect = defect.max(exact::invariant_defect(params, &ops, t, dt)?);
        let eig = hermitian_eigenvalues(&exact::invariant_matrix(params, &ops, t));
        for (k, e) in eig.iter().enumerate() {
            spectrum = spectrum.max((e - params.spin().level_at(params.dim() - 1 - k)).abs());
        }
        for m in params.spin().levels() {
            connection = connection.max(exact::geometric_connection(params, m, t, dt)?.norm());
        }
    }
    checks.push(Check::below("invariant_defect", defect, 1e-6));
    checks.push(Check::below("invariant_spectrum", spectrum, 1e-10));
    checks.push(Check::below("geometric_connection", connection, 1e-8));

    let tau = 5.0 / nu;
    let u_exact = exact::propagator(params, -tau, tau)?;
    let u_oracle = oracle::propagator_oracle(params, &ops, -tau, tau, tol)?;
    checks.push(Check::below("oracle_vs_exact", spectral_norm(&(u_exact - u_oracle)), oracle_gate(tol)));

    let psi0 = QuantumState::basis(params, params.j(), -tau)?;
    let traj = oracle::integrate_schrodinger(params, &ops, &psi0, &uniform_grid(-tau, tau, 201), tol)?;
    checks.push(Check::below("oracle_norm_drift", traj.max_norm_drift(), 10.0 * tol));

    let tau_t = DEFAULT_NU_TAU_C / nu;
    let trajectories = oracle::transition_trajectories(params, &ops, tau_t, 1001, tol)?;
    let history = oracle::transition_history(params, &ops, &trajectories, Labeling::Diabatic)?;
    let stochastic = history.iter().map(|m| m.stochasticity_defect()).fold(0.0, f64::max);
    checks.push(Check::below("transition_stochasticity", stochastic, (100.0 * tol).max(1e-8)));
    let start = &history[0].t_matrix;
    let start_defect = (start - nalgebra::DMatrix::<f64>::identity(start.nrows(), start.ncols())).amax();
    checks.push(Check::below("transition_identity_at_start", start_defect, (100.0 * tol).max(1e-8)));

    let half = params.with_spin(Spin::HALF);
    let tau_p = 8.0 / nu;
    let p_formula = exact::transfer_probability(&half, tau_p)?.probability;
    let u = oracle::propagator_oracle(&half, &half.operators(), -tau_p, tau_p, tol)?;
    checks.push(Check::below("transfer_formula_vs_oracle", (p_formula - u[(1, 0)].norm_sqr()).abs(), oracle_gate(tol)));

    let gamma = 0.01 * nu;
    let grid = uniform_grid(-tau_p, tau_p, 401);
    let bloch = open_system::integrate_master(
        &half,
        &DampingRates::isotropic(gamma)?,
        &BlochVector::spin_up(-tau_p),
        &grid,
        tol,
    )?;
    let decay = bloch.iter().map(|r| (r.length() - (-gamma * (r.t + tau_p)).exp()).abs()).fold(0.0, f64::max);
    checks.push(Check::below("isotropic_decay_law", decay, 10.0 * tol));

    Ok(VerifyReport { config: config.clone(), checks })
}

/// Result of any subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Data(Dataset),
    Report(VerifyReport),
}

impl Output {
    pub fn render(&self, format: Format) -> String {
        match self {
            Output::Data(d) => d.render(format),
            Output::Report(r) => r.render(format),
        }
    }

    /// False only for a verification report with a failed check.
    pub fn passed(&self) -> bool {
        match self {
            Output::Data(_) => true,
            Output::Report(r) => r.passed(),
        }
    }
}

pub fn run(command: Command, config: &ScenarioConfig) -> Result<Output> {
    Ok(match command {
        Command::Fields => Output::Data(cmd_fields(config)?),
        Command::Levels => Output::Data(cmd_levels(config)?),
        Command::Populations => Output::Data(cmd_populations(config)?),
        Command::Transitions => Output::Data(cmd_transitions(config)?),
        Command::Noise => Output::Data(cmd_noise(config)?),
        Command::Sweep => Output::Data(cmd_sweep(config)?),
        Command::Verify => Output::Report(cmd_verify(config)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let c = ScenarioConfig::default();
        assert_eq!((c.eta, c.nu, c.points, c.tol), (1.0, 0.8, 2001, 1e-10));
        assert_eq!(c.j, Spin::HALF);
        assert!((c.window().unwrap() * c.nu - DEFAULT_NU_TAU_C).abs() < 1e-12);
        let err = ScenarioConfig::from_toml_str("eta = 1.0\nnu_tau = 3.0\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref s) if s.contains("nu_tau")), "{err}");
    }

    #[test]
    fn overrides_win_over_file() {
        let mut over = toml::Table::new();
        over.insert("nu".into(), toml::Value::Float(0.5));
        over.insert("nu_tau_c".into(), toml::Value::Float(4.0));
        let c = ScenarioConfig::load(Some("nu = 0.2\nj = \"3/2\"\ntau_c = 9.0\n"), over).unwrap();
        assert_eq!(c.nu, 0.5);
        assert_eq!(c.j.twice(), 3);
        assert_eq!((c.nu_tau_c, c.tau_c), (Some(4.0), None));
    }

    #[test]
    fn resolve_rejects_bad_inputs() {
        let base = ScenarioConfig::default();
        let with = |f: fn(&mut ScenarioConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c.resolve(Command::Noise)
        };
        assert!(with(|c| c.points = 1).is_err());
        assert!(with(|c| c.tol = 1e-2).is_err());
        assert!(with(|c| c.m = Some(1.0)).is_err());
        assert!(with(|c| (c.nu_tau_c, c.tau_c) = (Some(1.0), Some(1.0))).is_err());
        assert!(with(|c| (c.gamma, c.gamma_z) = (Some(0.1), Some(0.1))).is_err());
        assert!(with(|c| (c.gamma_x, c.gamma_z) = (Some(0.1), Some(0.2))).is_err());
        assert!(with(|c| c.scenario = Some(Scenario::Fields)).is_err());
        assert!(with(|c| (c.scenario, c.gamma) = (Some(Scenario::Dephasing), Some(0.1))).is_err());
        assert!(with(|c| c.nu = 2.0).is_err());
        assert_eq!(with(|c| c.gamma = Some(0.01)).unwrap().scenario, Some(Scenario::Spinflip));
        assert_eq!(with(|c| c.gamma_z = Some(0.01)).unwrap().scenario, Some(Scenario::Dephasing));
    }

    #[test]
    fn level_labels() {
        let labels: Vec<String> = [1.5, 1.0, 0.5, 0.0, -0.5, -2.0].iter().map(|&m| level_label(m)).collect();
        assert_eq!(labels, ["+3/2", "+1", "+1/2", "0", "-1/2", "-2"]);
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let mut c = ScenarioConfig { points: 5, j: Spin::from_twice(2).unwrap(), ..Default::default() };
        c.nu_tau_c = Some(2.0);
        let ds = cmd_fields(&c).unwrap();
        let text = ds.to_csv();
        let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
        assert_eq!(lines.next(), Some("nu_t,omega_x_over_eta,omega_z_over_eta"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "-2.0000000000000000e0");
        let back = config_from_output(&text).unwrap();
        assert_eq!(back, ds.config);
        assert_eq!(config_from_output(&ds.to_json()).unwrap(), ds.config);
    }

    #[test]
    fn verify_default_passes() {
        let c = ScenarioConfig { j: Spin::from_twice(2).unwrap(), ..Default::default() };
        let report = cmd_verify(&c).unwrap();
        assert!(report.passed(), "{}", report.render(Format::Csv));
    }

    #[test]
    fn verify_catches_inconsistent_kappa() {
        let c = ScenarioConfig::default();
        let faulty = c.params().unwrap().with_kappa_fault(0.59);
        let report = verify_params(&c, &faulty).unwrap();
        let failed: Vec<&str> = report.checks.iter().filter(|k| !k.passed).map(|k| k.name).collect();
        assert!(failed.contains(&"invariant_defect"), "{failed:?}");
        assert!(!report.passed());
    }

    #[test]
    fn loose_tolerance_degrades_but_passes() {
        let c = ScenarioConfig { tol: 1e-4, ..Default::default() };
        let report = cmd_verify(&c).unwrap();
        let agreement = report.checks.iter().find(|k| k.name == "oracle_vs_exact").unwrap();
        assert!(agreement.value > 1e-6, "{agreement:?}");
        assert!(report.passed());
    }
}
