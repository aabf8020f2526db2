//! Experiment configuration: a flat JSON object, validated as a whole so that
//! every problem is reported at once.

use std::fmt;
use std::path::PathBuf;

use mtwcone_core::{make_flattened_cone, ConeMode, Error as CoreError};
use serde::Serialize;
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Plane,
    Sphere,
    Cone,
    Capped,
    Perturbed,
}

impl SurfaceKind {
    pub const ALL: [SurfaceKind; 5] = [Self::Plane, Self::Sphere, Self::Cone, Self::Capped, Self::Perturbed];

    pub fn name(self) -> &'static str {
        match self {
            Self::Plane => "plane",
            Self::Sphere => "sphere",
            Self::Cone => "cone",
            Self::Capped => "capped",
            Self::Perturbed => "perturbed",
        }
    }

    /// Surfaces carrying the smoothed cone tip.
    pub fn has_tip(self) -> bool {
        matches!(self, Self::Cone | Self::Capped | Self::Perturbed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    BuildSurface,
    Dasm,
    A3wScan,
    Toponogov,
    InjRadius,
    GaussBonnet,
    ReproducePaper,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Self::BuildSurface,
        Self::Dasm,
        Self::A3wScan,
        Self::Toponogov,
        Self::InjRadius,
        Self::GaussBonnet,
        Self::ReproducePaper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::BuildSurface => "build-surface",
            Self::Dasm => "dasm",
            Self::A3wScan => "a3w-scan",
            Self::Toponogov => "toponogov",
            Self::InjRadius => "inj-radius",
            Self::GaussBonnet => "gauss-bonnet",
            Self::ReproducePaper => "reproduce-paper",
        }
    }
}

/// A validated configuration. Everything except `out_dir` is echoed into the
/// report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub schema_version: u64,
    pub surface: SurfaceKind,
    pub experiment: Experiment,
    pub theta: f64,
    pub mode: ConeMode,
    pub delta: f64,
    pub cap_radius: f64,
    pub rounding_width: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub tol_scale: f64,
    pub t_grid: usize,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub xbar0: [f64; 2],
    pub xbar1: [f64; 2],
    /// `None`: balance only on the perturbed surface.
    pub balance_probe: Option<bool>,
    pub hinges: usize,
    pub sphere_samples: usize,
    pub inj_directions: usize,
    pub inj_length: f64,
    pub inj_step: f64,
    pub a3w_t_values: Vec<f64>,
    pub a3w_dt: f64,
    pub plots: bool,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            surface: SurfaceKind::Cone,
            experiment: Experiment::ReproducePaper,
            theta: 0.02,
            mode: ConeMode::Desk,
            delta: 1.0,
            cap_radius: 100.0,
            rounding_width: 5.0,
            epsilon: 1e-3,
            seed: 0,
            tol_scale: 1.0,
            t_grid: 101,
            x: [10.0, 10.0],
            y: [10.0, 11.0],
            xbar0: [-10.0, 0.5],
            xbar1: [10.0, 0.5],
            balance_probe: None,
            hinges: 1000,
            sphere_samples: 20,
            inj_directions: 64,
            inj_length: 50.0,
            inj_step: 1.0,
            a3w_t_values: vec![0.3, 0.45, 0.47, 0.5, 0.53],
            a3w_dt: 0.05,
            plots: true,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn balance(&self) -> bool {
        self.balance_probe.unwrap_or(self.surface == SurfaceKind::Perturbed)
    }
}

/// Key reference printed by `--help`.
pub const KEY_HELP: &str = "\
Config keys (JSON object; all optional):
  schema_version   1
  surface          plane | sphere | cone | capped | perturbed      [cone]
  experiment       build-surface | dasm | a3w-scan | toponogov |
                   inj-radius | gauss-bonnet | reproduce-paper     [reproduce-paper]
  theta            half deficit angle, in (0, pi/2)                [0.02]
  mode             desk | paper_strict (requires max K < 1e-4)     [desk]
  delta            sphere curvature, > 0                           [1]
  cap_radius       capped: radius of the glued disk                [100]
  rounding_width   capped: width of the rounding band              [5]
  epsilon          perturbed: added curvature scale, in (0, 0.1]   [0.001]
  seed             RNG seed for sampled configurations             [0]
  tol_scale        multiplies every integration/solver tolerance   [1]
  t_grid           DASM grid points on [0, 1]                      [101]
  x, y             base and probe, development coordinates         [[10,10], [10,11]]
  xbar0, xbar1     c-segment endpoints, development coordinates    [[-10,0.5], [10,0.5]]
  balance_probe    rotate y so that f_0(y) = f_1(y)                [perturbed only]
  hinges           random Toponogov hinges                         [1000]
  sphere_samples   random DASM configurations on the sphere        [20]
  inj_directions   directions of the cut/conjugate scan            [64]
  inj_length       scan length                                     [50]
  inj_step         cut scan spacing                                [1]
  a3w_t_values     t values of the A3w scan                        [[0.3,0.45,0.47,0.5,0.53]]
  a3w_dt           A3w second-difference step                      [0.05]
  plots            write SVG plots                                 [true]
  out_dir          output directory                                [out]";

/// Every diagnostic found while validating.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub diagnostics: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for d in &self.diagnostics {
            write!(f, "\n  - {d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Parses and validates raw JSON text.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| ConfigError { diagnostics: vec![format!("malformed JSON: {e}")] })?;
    match value {
        Value::Object(map) => validate_map(&map),
        _ => Err(ConfigError { diagnostics: vec!["configuration must be a JSON object".into()] }),
    }
}

struct Reader<'a> {
    map: &'a Map<String, Value>,
    diags: Vec<String>,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn number(&mut self, key: &str, default: f64) -> f64 {
        match self.get(key) {
            None => default,
            Some(Value::Number(n)) => n.as_f64().unwrap_or(default),
            Some(_) => {
                self.diags.push(format!("`{key}`: expected a number"));
                default
            }
        }
    }

    fn count(&mut self, key: &str, default: usize) -> usize {
        match self.get(key) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(n) => n as usize,
                None => {
                    self.diags.push(format!("`{key}`: expected a non-negative integer"));
                    default
                }
            },
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        match self.get(key) {
            None => None,
            Some(Value::Bool(b)) => Some(*b),
            Some(_) => {
                self.diags.push(format!("`{key}`: expected true or false"));
                None
            }
        }
    }

    fn choice<T: Copy>(&mut self, key: &str, default: T, options: &[(&str, T)]) -> T {
        match self.get(key) {
            None => default,
            Some(Value::String(s)) => match options.iter().find(|(n, _)| n == s) {
                Some(&(_, v)) => v,
                None => {
                    let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                    self.diags.push(format!("`{key}`: unknown value \"{s}\" (expected one of {})", names.join(", ")));
                    default
                }
            },
            Some(_) => {
                self.diags.push(format!("`{key}`: expected a string"));
                default
            }
        }
    }

    fn point(&mut self, key: &str, default: [f64; 2]) -> [f64; 2] {
        match self.get(key) {
            None => default,
            Some(Value::Array(a)) if a.len() == 2 && a.iter().all(|v| v.as_f64().is_some_and(f64::is_finite)) => {
                [a[0].as_f64().unwrap(), a[1].as_f64().unwrap()]
            }
            Some(_) => {
                self.diags.push(format!("`{key}`: expected [a, b] with finite numbers"));
                default
            }
        }
    }

    fn numbers(&mut self, key: &str, default: Vec<f64>) -> Vec<f64> {
        match self.get(key) {
            None => default,
            Some(Value::Array(a)) if a.iter().all(|v| v.as_f64().is_some()) => a.iter().map(|v| v.as_f64().unwrap()).collect(),
            Some(_) => {
                self.diags.push(format!("`{key}`: expected an array of numbers"));
                default
            }
        }
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.diags.push(msg.into());
        }
    }
}

const KEYS: [&str; 26] = [
    "schema_version",
    "surface",
    "experiment",
    "theta",
    "mode",
    "delta",
    "cap_radius",
    "rounding_width",
    "epsilon",
    "seed",
    "tol_scale",
    "t_grid",
    "x",
    "y",
    "xbar0",
    "xbar1",
    "balance_probe",
    "hinges",
    "sphere_samples",
    "inj_directions",
    "inj_length",
    "inj_step",
    "a3w_t_values",
    "a3w_dt",
    "plots",
    "out_dir",
];

/// Validates an already parsed object (used to merge command-line overrides).
pub fn validate_map(map: &Map<String, Value>) -> Result<ExperimentConfig, ConfigError> {
    let d = ExperimentConfig::default();
    let mut r = Reader { map, diags: Vec::new() };
    for key in map.keys() {
        if !KEYS.contains(&key.as_str()) {
            r.diags.push(format!("unknown key `{key}`"));
        }
    }
    let schema_version = match r.get("schema_version") {
        None => SCHEMA_VERSION,
        Some(v) => v.as_u64().unwrap_or(0),
    };
    r.check(schema_version == SCHEMA_VERSION, format!("`schema_version`: only version {SCHEMA_VERSION} is supported"));
    let surfaces: Vec<(&str, SurfaceKind)> = SurfaceKind::ALL.iter().map(|&s| (s.name(), s)).collect();
    let surface = r.choice("surface", d.surface, &surfaces);
    let experiments: Vec<(&str, Experiment)> = Experiment::ALL.iter().map(|&e| (e.name(), e)).collect();
    let experiment = r.choice("experiment", d.experiment, &experiments);
    let mode = r.choice("mode", d.mode, &[("desk", ConeMode::Desk), ("paper_strict", ConeMode::PaperStrict)]);
    let theta = r.number("theta", d.theta);
    let delta = r.number("delta", d.delta);
    let cap_radius = r.number("cap_radius", d.cap_radius);
    let rounding_width = r.number("rounding_width", d.rounding_width);
    let epsilon = r.number("epsilon", d.epsilon);
    let seed = match r.get("seed") {
        None => d.seed,
        Some(v) => v.as_u64().unwrap_or_else(|| {
            r.diags.push("`seed`: expected a non-negative integer".into());
            d.seed
        }),
    };
    let tol_scale = r.number("tol_scale", d.tol_scale);
    let t_grid = r.count("t_grid", d.t_grid);
    let x = r.point("x", d.x);
    let y = r.point("y", d.y);
    let xbar0 = r.point("xbar0", d.xbar0);
    let xbar1 = r.point("xbar1", d.xbar1);
    let balance_probe = r.boolean("balance_probe");
    let hinges = r.count("hinges", d.hinges);
    let sphere_samples = r.count("sphere_samples", d.sphere_samples);
    let inj_directions = r.count("inj_directions", d.inj_directions);
    let inj_length = r.number("inj_length", d.inj_length);
    let inj_step = r.number("inj_step", d.inj_step);
    let a3w_t_values = r.numbers("a3w_t_values", d.a3w_t_values.clone());
    let a3w_dt = r.number("a3w_dt", d.a3w_dt);
    let plots = r.boolean("plots").unwrap_or(d.plots);
    let out_dir = match r.get("out_dir") {
        None => d.out_dir.clone(),
        Some(Value::String(s)) => PathBuf::from(s),
        Some(_) => {
            r.diags.push("`out_dir`: expected a string".into());
            d.out_dir.clone()
        }
    };

    if surface.has_tip() {
        let in_range = theta > 0.0 && theta < std::f64::consts::FRAC_PI_2;
        r.check(in_range, "theta out of range (0, π/2)");
        if in_range && mode == ConeMode::PaperStrict {
            match make_flattened_cone(theta, ConeMode::PaperStrict) {
                Err(CoreError::StrictCurvatureBound { max_curvature }) => r.diags.push(format!(
                    "`mode` paper_strict: theta = {theta} gives max K = {max_curvature:.4e} on B, violating 0 < K < 1/10000 \
                     (needs theta < {:.3e})",
                    theta * 1e-4 / max_curvature
                )),
                Err(e) => r.diags.push(format!("`mode` paper_strict: {e}")),
                Ok(_) => {}
            }
        }
    }
    if surface == SurfaceKind::Sphere {
        r.check(delta > 0.0 && delta.is_finite(), "`delta`: sphere curvature must be positive");
    }
    if surface == SurfaceKind::Capped {
        r.check(cap_radius.is_finite() && cap_radius > 40.0, "`cap_radius`: must exceed 40 (the configuration lives in r < 40)");
        r.check(rounding_width > 0.0 && rounding_width < cap_radius, "`rounding_width`: must lie in (0, cap_radius)");
    }
    if surface == SurfaceKind::Perturbed {
        r.check(epsilon > 0.0 && epsilon <= 0.1, "`epsilon`: must lie in (0, 0.1]");
    }
    r.check(tol_scale > 0.0 && tol_scale.is_finite() && (1e-3..=1e3).contains(&tol_scale), "`tol_scale`: must lie in [1e-3, 1e3]");
    r.check(t_grid >= 3, "`t_grid`: needs at least 3 points");
    r.check(inj_directions >= 1, "`inj_directions`: needs at least one direction");
    r.check(inj_length > 0.0 && inj_length.is_finite(), "`inj_length`: must be positive");
    r.check(inj_step > 0.0 && inj_step <= inj_length, "`inj_step`: must lie in (0, inj_length]");
    r.check(a3w_dt > 0.0 && a3w_dt <= 0.25, "`a3w_dt`: must lie in (0, 0.25]");
    r.check(!a3w_t_values.is_empty(), "`a3w_t_values`: needs at least one value");
    r.check(a3w_t_values.iter().all(|t| (0.0..=1.0).contains(t)), "`a3w_t_values`: values must lie in [0, 1]");
    if surface != SurfaceKind::Sphere && matches!(experiment, Experiment::Dasm | Experiment::ReproducePaper | Experiment::A3wScan) {
        r.check(x != y, "`y`: must differ from `x`");
    }

    if !r.diags.is_empty() {
        return Err(ConfigError { diagnostics: r.diags });
    }
    Ok(ExperimentConfig {
        schema_version,
        surface,
        experiment,
        theta,
        mode,
        delta,
        cap_radius,
        rounding_width,
        epsilon,
        seed,
        tol_scale,
        t_grid,
        x,
        y,
        xbar0,
        xbar1,
        balance_probe,
        hinges,
        sphere_samples,
        inj_directions,
        inj_length,
        inj_step,
        a3w_t_values,
        a3w_dt,
        plots,
        out_dir,
    })
}
