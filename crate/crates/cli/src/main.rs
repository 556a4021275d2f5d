//! `mlz`: datasets and checks for the modulated Landau-Zener sweep.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mlz::harness::{self, Command, ScenarioConfig};
use toml::Value;

#[derive(Parser)]
#[command(name = "mlz", version, about = "Modulated Landau-Zener datasets and verification")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML file with scenario keys; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Field amplitude η (default 1).
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Sweep frequency ν, at most η (default 0.8).
    #[arg(long, global = true)]
    nu: Option<f64>,
    /// Spin quantum number, e.g. 1/2, 1, 3/2.
    #[arg(long, global = true)]
    j: Option<String>,
    /// Half-window as ν·τ_c.
    #[arg(long, global = true)]
    nu_tau_c: Option<f64>,
    /// Half-window in absolute time units.
    #[arg(long, global = true, conflicts_with = "nu_tau_c")]
    tau_c: Option<f64>,
    /// Output grid size (default 2001).
    #[arg(long, global = true)]
    points: Option<i64>,
    /// Initial level.
    #[arg(long, global = true, allow_negative_numbers = true)]
    m: Option<f64>,
    /// Isotropic rate γ/ν.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Rate γ_x/ν.
    #[arg(long, global = true)]
    gamma_x: Option<f64>,
    /// Rate γ_y/ν.
    #[arg(long, global = true)]
    gamma_y: Option<f64>,
    /// Rate γ_z/ν (dephasing).
    #[arg(long, global = true)]
    gamma_z: Option<f64>,
    /// Integrator tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Scenario variant, e.g. exact/oracle for populations or dephasing/spinflip for noise.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Noise channel swept along the gamma axis.
    #[arg(long, global = true)]
    channel: Option<String>,
    /// Sweep axis: tau_c, gamma or eta_over_nu.
    #[arg(long, global = true)]
    axis: Option<String>,
    /// Comma-separated sweep values; pass an empty string for none.
    #[arg(long, global = true)]
    values: Option<String>,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    format: Option<Format>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Field components Ω_x/η and Ω_z/η.
    Fields,
    /// Adiabatic and diabatic energy levels.
    Levels,
    /// Level populations from an initial level m.
    Populations,
    /// Transition-matrix column of the adiabatic state n (given by --m).
    Transitions,
    /// Fidelity under dephasing or spin-flip noise (j = 1/2).
    Noise,
    /// Endpoint transfer and fidelity along a parameter axis.
    Sweep,
    /// Run the invariant suite; exits with 2 on any failed check.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Cmd {
    fn harness(self) -> Command {
        match self {
            Cmd::Fields => Command::Fields,
            Cmd::Levels => Command::Levels,
            Cmd::Populations => Command::Populations,
            Cmd::Transitions => Command::Transitions,
            Cmd::Noise => Command::Noise,
            Cmd::Sweep => Command::Sweep,
            Cmd::Verify => Command::Verify,
        }
    }
}

impl Cli {
    fn overrides(&self) -> Result<toml::Table, String> {
        let mut t = toml::Table::new();
        let floats = [
            ("eta", self.eta),
            ("nu", self.nu),
            ("nu_tau_c", self.nu_tau_c),
            ("tau_c", self.tau_c),
            ("m", self.m),
            ("gamma", self.gamma),
            ("gamma_x", self.gamma_x),
            ("gamma_y", self.gamma_y),
            ("gamma_z", self.gamma_z),
            ("tol", self.tol),
        ];
        for (key, v) in floats {
            if let Some(v) = v {
                t.insert(key.into(), Value::Float(v));
            }
        }
        let strings = [
            ("j", self.j.clone()),
            ("scenario", self.scenario.clone()),
            ("channel", self.channel.clone()),
            ("axis", self.axis.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("format", self.format.map(|f| if matches!(f, Format::Json) { "json" } else { "csv" }.to_string())),
        ];
        for (key, v) in strings {
            if let Some(v) = v {
                t.insert(key.into(), Value::String(v));
            }
        }
        if let Some(p) = self.points {
            t.insert("points".into(), Value::Integer(p));
        }
        if let Some(text) = &self.values {
            let values = text
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(|v| v.parse::<f64>().map(Value::Float).map_err(|_| format!("bad sweep value `{v}`")))
                .collect::<Result<_, _>>()?;
            t.insert("values".into(), Value::Array(values));
        }
        Ok(t)
    }
}

fn load(cli: &Cli) -> Result<ScenarioConfig, String> {
    let file = match &cli.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?),
        None => None,
    };
    ScenarioConfig::load(file.as_deref(), cli.overrides()?).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let output = match harness::run(cli.command.harness(), &config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let text = output.render(config.format);
    match &config.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: cannot write {path}: {e}");
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    if output.passed() {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: verification failed");
        ExitCode::from(2)
    }
}
