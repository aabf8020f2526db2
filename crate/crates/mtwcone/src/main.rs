use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mtwcone::config::KEY_HELP;
use mtwcone::{run_experiment, validate_map, ConfigError, Experiment};
use serde_json::{Map, Value};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Reproducible MTW-regularity experiments on radially symmetric surfaces.
///
/// Exit status: 0 when the experiment completed (whatever its verdicts),
/// 2 on configuration errors (nothing is written), 3 on numeric failures
/// (partial outputs are written and flagged in report.json).
#[derive(Parser, Debug)]
#[command(version, after_help = KEY_HELP)]
struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for sampled configurations [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiplies integration and solver tolerances [default: 1].
    #[arg(long, global = true)]
    tol_scale: Option<f64>,
    /// Surface: plane, sphere, cone, capped or perturbed [default: cone].
    #[arg(long, global = true)]
    surface: Option<String>,
    /// Half deficit angle of the cone [default: 0.02].
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Any other config key, as KEY=VALUE with VALUE in JSON (bare words are strings).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build the surface and report its curvature conditions.
    BuildSurface,
    /// DASM profile along the configured c-segment.
    Dasm,
    /// Grid scan of the A3w term.
    A3wScan,
    /// Random and configured Toponogov hinges.
    Toponogov,
    /// Empirical cut and conjugate radii.
    InjRadius,
    /// Angle excess of geodesic triangles.
    GaussBonnet,
    /// The full pipeline on the configured surface.
    ReproducePaper,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::BuildSurface => Experiment::BuildSurface,
            Command::Dasm => Experiment::Dasm,
            Command::A3wScan => Experiment::A3wScan,
            Command::Toponogov => Experiment::Toponogov,
            Command::InjRadius => Experiment::InjRadius,
            Command::GaussBonnet => Experiment::GaussBonnet,
            Command::ReproducePaper => Experiment::ReproducePaper,
        }
    }
}

fn merged_config(cli: &Cli) -> Result<Map<String, Value>, ConfigError> {
    let fail = |msg: String| ConfigError { diagnostics: vec![msg] };
    let mut map = match &cli.config {
        None => Map::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| fail(format!("cannot read {}: {e}", path.display())))?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(fail("configuration must be a JSON object".into())),
                Err(e) => return Err(fail(format!("malformed JSON in {}: {e}", path.display()))),
            }
        }
    };
    let mut diags = Vec::new();
    for kv in &cli.set {
        match kv.split_once('=') {
            Some((k, v)) => {
                let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
                map.insert(k.trim().to_string(), value);
            }
            None => diags.push(format!("--set {kv}: expected KEY=VALUE")),
        }
    }
    if !diags.is_empty() {
        return Err(ConfigError { diagnostics: diags });
    }
    let num = |v: f64| serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null);
    if let Some(s) = &cli.surface {
        map.insert("surface".into(), Value::String(s.clone()));
    }
    if let Some(t) = cli.theta {
        map.insert("theta".into(), num(t));
    }
    if let Some(s) = cli.seed {
        map.insert("seed".into(), Value::from(s));
    }
    if let Some(t) = cli.tol_scale {
        map.insert("tol_scale".into(), num(t));
    }
    if let Some(d) = &cli.out_dir {
        map.insert("out_dir".into(), Value::String(d.display().to_string()));
    }
    map.insert("experiment".into(), Value::String(cli.command.experiment().name().into()));
    Ok(map)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match merged_config(&cli).and_then(|m| validate_map(&m)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let (bundle, failure) = match run_experiment(&cfg) {
        Ok(b) => (b, None),
        Err(boxed) => {
            let (b, msg) = *boxed;
            (b, Some(msg))
        }
    };
    if let Err(e) = bundle.write(&cfg.out_dir) {
        eprintln!("cannot write outputs to {}: {e}", cfg.out_dir.display());
        return ExitCode::from(EXIT_NUMERIC);
    }
    for s in &bundle.report.stages {
        match &s.error {
            Some(e) => println!("{:<13} {:<34} {e}", s.name, s.verdict),
            None => println!("{:<13} {}", s.name, s.verdict),
        }
    }
    println!("outputs in {}", cfg.out_dir.display());
    match failure {
        None => ExitCode::SUCCESS,
        Some(msg) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}
