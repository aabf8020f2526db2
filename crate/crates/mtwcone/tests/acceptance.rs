//! Pass/fail report over the acceptance criteria. Run with
//! `cargo test -p mtwcone --test acceptance -- --nocapture` or plain
//! `cargo test`; the process exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::process::{Command, ExitCode};
use std::time::Instant;

use mtwcone::core::*;
use mtwcone::{build_surface, run_experiment, Experiment, ExperimentConfig, ReportBundle, SurfaceKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const ENDPOINT_TOL: f64 = 1e-8;
/// Frozen from the independent oracle in the core crate's `dasm_oracle` test.
const GAP_REGRESSION: f64 = 6.74631e-6;
const GAP_REGRESSION_TOL: f64 = 1e-9;
const REFINEMENT_REL: f64 = 0.10;
const PLANE_F_TOL: f64 = 1e-9;
const PLANE_A3W_TOL: f64 = 1e-5;
const SPHERE_A3W_FLOOR: f64 = -1e-4;
const MIN_SPHERE_SAMPLES: u64 = 20;
const HINGE_TOL: f64 = 1e-9;
const LAW_OF_COSINES_TOL: f64 = 1e-6;
const TOTAL_CURVATURE_TOL: f64 = 1e-6;
const INJ_LENGTH: f64 = 50.0;
const INJ_DIRECTIONS: u64 = 64;
const SPHERE_RADIUS_TOL: f64 = 5e-3;
const EXCESS_BALL_TOL: f64 = 1e-4;
const EXCESS_FLAT_TOL: f64 = 1e-7;
const EXCESS_OCTANT_TOL: f64 = 1e-6;
const ROUND_TRIP_TOL: f64 = 1e-7;
const DRIFT_PER_LENGTH: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-9;
const HYGIENE_SAMPLES: usize = 60;
const LIMIT_CONE_S: f64 = 60.0;
const LIMIT_PERTURBED_S: f64 = 90.0;
const LIMIT_CONTROLS_S: f64 = 300.0;

type Criterion<'a> = (&'static str, &'a mut dyn FnMut(&mut Ctx) -> Result<String, String>);

struct Checks(Vec<String>);

impl Checks {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.0.push(what());
        }
    }

    fn finish(self, detail: String) -> Result<String, String> {
        if self.0.is_empty() {
            Ok(detail)
        } else {
            Err(self.0.join("; "))
        }
    }
}

fn cfg(surface: SurfaceKind, experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig { surface, experiment, ..ExperimentConfig::default() }
}

fn run(cfg: &ExperimentConfig) -> Result<ReportBundle, String> {
    run_experiment(cfg).map_err(|b| format!("{} on {}: {}", cfg.experiment.name(), cfg.surface.name(), b.1))
}

fn data<'a>(b: &'a ReportBundle, stage: &str) -> &'a Value {
    &b.report.stage(stage).unwrap_or_else(|| panic!("stage {stage}")).data
}

fn verdict<'a>(b: &'a ReportBundle, stage: &str) -> &'a str {
    &b.report.stage(stage).unwrap_or_else(|| panic!("stage {stage}")).verdict
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

#[derive(Default)]
struct Ctx {
    full: BTreeMap<&'static str, ReportBundle>,
    secs: BTreeMap<&'static str, f64>,
}

impl Ctx {
    fn full(&mut self, s: SurfaceKind) -> Result<ReportBundle, String> {
        if !self.full.contains_key(s.name()) {
            let t = Instant::now();
            let b = run(&cfg(s, Experiment::ReproducePaper))?;
            self.secs.insert(s.name(), t.elapsed().as_secs_f64());
            self.full.insert(s.name(), b);
        }
        Ok(self.full[s.name()].clone())
    }
}

fn gap_of(b: &ReportBundle) -> f64 {
    num(&data(b, "dasm")["gap"])
}

fn criterion_1(ctx: &mut Ctx) -> Result<String, String> {
    let t = Instant::now();
    let b = ctx.full(SurfaceKind::Cone)?;
    let d = data(&b, "dasm");
    let (f0, f1, gap, err) = (num(&d["f0"]), num(&d["f1"]), gap_of(&b), num(&d["error"]));
    let mut c = Checks::new();
    c.check((f0 + 10.0).abs() <= ENDPOINT_TOL, || format!("f0 = {f0}"));
    c.check((f1 + 10.0).abs() <= ENDPOINT_TOL, || format!("f1 = {f1}"));
    c.check(gap > 0.0 && gap > 10.0 * err, || format!("gap {gap:e} vs error {err:e}"));
    c.check((gap - GAP_REGRESSION).abs() <= GAP_REGRESSION_TOL, || format!("gap {gap:e} drifted from {GAP_REGRESSION:e}"));
    let fine = run(&ExperimentConfig { t_grid: 201, ..cfg(SurfaceKind::Cone, Experiment::Dasm) })?;
    let tight = run(&ExperimentConfig { tol_scale: 0.1, ..cfg(SurfaceKind::Cone, Experiment::Dasm) })?;
    for (name, g) in [("2x grid", gap_of(&fine)), ("0.1x tol", gap_of(&tight))] {
        c.check((g - gap).abs() <= REFINEMENT_REL * gap, || format!("{name}: gap {g:e} vs {gap:e}"));
    }
    let secs = t.elapsed().as_secs_f64();
    c.check(secs <= LIMIT_CONE_S, || format!("took {secs:.1} s"));
    c.finish(format!(
        "f0+10 = {:.1e}, f1+10 = {:.1e}, gap = {gap:.6e} (error {err:.1e}), refined {:.6e} / {:.6e}, {secs:.1} s",
        f0 + 10.0,
        f1 + 10.0,
        gap_of(&fine),
        gap_of(&tight)
    ))
}

fn criterion_2(ctx: &mut Ctx) -> Result<String, String> {
    let b = ctx.full(SurfaceKind::Perturbed)?;
    let secs = ctx.secs["perturbed"];
    let (k, d) = (num(&data(&b, "conditions")["min_curvature"]), data(&b, "dasm"));
    let (gap, err) = (num(&d["gap"]), num(&d["error"]));
    let mut c = Checks::new();
    c.check(k > 0.0, || format!("min K = {k:e}"));
    c.check(gap > 0.0 && d["violation"] == true, || format!("gap {gap:e} vs error {err:e}"));
    c.check(secs <= LIMIT_PERTURBED_S, || format!("took {secs:.1} s"));
    c.finish(format!("min K = {k:.2e}, gap = {gap:.4e} (error {err:.1e}), {secs:.1} s"))
}

fn criterion_3(ctx: &mut Ctx) -> Result<String, String> {
    let mut c = Checks::new();
    let plane = ctx.full(SurfaceKind::Plane)?;
    let spread = num(&data(&plane, "dasm")["f_spread"]);
    let pmin = num(&data(&plane, "a3w")["min_value"]);
    c.check(spread <= PLANE_F_TOL, || format!("plane f spread {spread:e}"));
    c.check(pmin.abs() <= PLANE_A3W_TOL, || format!("plane a3w min {pmin:e}"));
    let sphere = ctx.full(SurfaceKind::Sphere)?;
    let d = data(&sphere, "dasm");
    let (n, viol) = (d["evaluated"].as_u64().unwrap_or(0), d["violations"].as_u64().unwrap_or(u64::MAX));
    let smin = num(&data(&sphere, "a3w")["min_value"]);
    c.check(n >= MIN_SPHERE_SAMPLES && viol == 0, || format!("sphere: {viol} violations over {n}"));
    c.check(smin >= SPHERE_A3W_FLOOR, || format!("sphere a3w min {smin:e}"));
    let secs = ctx.secs["plane"] + ctx.secs["sphere"];
    c.check(secs <= LIMIT_CONTROLS_S, || format!("took {secs:.1} s"));
    c.finish(format!(
        "plane spread {spread:.1e}, a3w min {pmin:.1e}; sphere {viol}/{n} violations, a3w min {smin:.3}; {secs:.1} s"
    ))
}

fn criterion_4(ctx: &mut Ctx) -> Result<String, String> {
    let mut c = Checks::new();
    let mut parts = Vec::new();
    for s in SurfaceKind::ALL {
        let b = ctx.full(s)?;
        let violation = verdict(&b, "dasm") == "violation";
        let negative = verdict(&b, "a3w") == "negative";
        let min = num(&data(&b, "a3w")["min_value"]);
        c.check(violation == negative, || format!("{}: dasm {} but a3w {}", s.name(), verdict(&b, "dasm"), verdict(&b, "a3w")));
        parts.push(format!("{} {}/{:.2e}", s.name(), if violation { "violation" } else { "none" }, min));
    }
    c.finish(parts.join(", "))
}

fn criterion_5(ctx: &mut Ctx) -> Result<String, String> {
    let mut c = Checks::new();
    let mut worst = f64::INFINITY;
    let mut total = 0;
    for s in SurfaceKind::ALL {
        let d = data(&ctx.full(s)?, "toponogov").clone();
        let (n, v, min) = (d["evaluated"].as_u64().unwrap_or(0), d["violations"].as_u64().unwrap_or(1), num(&d["min_gap"]));
        c.check(n >= 1000 && v == 0 && min >= -HINGE_TOL, || format!("{}: {v} violations over {n}, min gap {min:e}", s.name()));
        worst = worst.min(min);
        total += n;
        if s.has_tip() {
            let g = num(&d["reference_hinge"]["gap"]);
            c.check(g > 0.0, || format!("{}: reference hinge gap {g:e}", s.name()));
        }
        if s == SurfaceKind::Sphere {
            let dev = num(&d["law_of_cosines"]["deviation"]);
            c.check(dev <= LAW_OF_COSINES_TOL, || format!("law of cosines off by {dev:e}"));
        }
    }
    let cone = data(&ctx.full(SurfaceKind::Cone)?, "toponogov").clone();
    c.finish(format!("{total} hinges, min gap {worst:.1e}, cone reference hinge gap {:.3e}", num(&cone["reference_hinge"]["gap"])))
}

fn criterion_6(ctx: &mut Ctx) -> Result<String, String> {
    let mut c = Checks::new();
    let theta = ExperimentConfig::default().theta;
    let b = ctx.full(SurfaceKind::Cone)?;
    let d = data(&b, "injectivity");
    let total = num(&d["total_positive_curvature"]);
    c.check((total - 2.0 * theta).abs() <= TOTAL_CURVATURE_TOL && total < PI, || format!("total curvature {total}"));
    c.check(
        d["conjugate"].is_null() && d["injectivity"].is_null(),
        || format!("cone conjugate {} injectivity {}", d["conjugate"], d["injectivity"]),
    );
    c.check(
        num(&d["length"]) >= INJ_LENGTH && d["directions"].as_u64() >= Some(INJ_DIRECTIONS) && d["sample_failures"] == 0,
        || format!("cone scan coverage {d}"),
    );
    let spec = build_surface(&cfg(SurfaceKind::Cone, Experiment::InjRadius)).map_err(|e| e.to_string())?;
    let x = spec.dev_to_polar(PointDev::new(10.0, 10.0)).map_err(|e| e.to_string())?;
    let mut jacobi_hits = 0;
    for i in 0..INJ_DIRECTIONS {
        let alpha = std::f64::consts::TAU * (i as f64 + 0.5) / INJ_DIRECTIONS as f64;
        if jacobi_first_zero(&spec, x, alpha, INJ_LENGTH).map_err(|e| e.to_string())?.is_some() {
            jacobi_hits += 1;
        }
    }
    c.check(jacobi_hits == 0, || format!("{jacobi_hits} directions with a conjugate point"));
    let s = data(&ctx.full(SurfaceKind::Sphere)?, "injectivity").clone();
    let (cut, conj) = (num(&s["injectivity"]), num(&s["conjugate"]));
    c.check((cut - PI).abs() <= SPHERE_RADIUS_TOL && (conj - PI).abs() <= SPHERE_RADIUS_TOL, || format!("sphere cut {cut} conj {conj}"));
    c.finish(format!("total K+ = {total:.9} (2 theta = {}), cone clean to {INJ_LENGTH}, sphere cut {cut:.6} conj {conj:.6}", 2.0 * theta))
}

fn criterion_7() -> Result<String, String> {
    let mut c = Checks::new();
    let mut excess = BTreeMap::new();
    for s in [SurfaceKind::Cone, SurfaceKind::Sphere] {
        let b = run(&cfg(s, Experiment::GaussBonnet))?;
        for t in data(&b, "gauss_bonnet")["triangles"].as_array().cloned().unwrap_or_default() {
            excess.insert(format!("{}/{}", s.name(), t["name"].as_str().unwrap_or("?")), num(&t["excess"]));
        }
    }
    let theta = ExperimentConfig::default().theta;
    for (key, want, tol) in [
        ("cone/around_ball", 2.0 * theta, EXCESS_BALL_TOL),
        ("cone/flat", 0.0, EXCESS_FLAT_TOL),
        ("sphere/octant", FRAC_PI_2, EXCESS_OCTANT_TOL),
    ] {
        let got = excess.get(key).copied().unwrap_or(f64::NAN);
        c.check((got - want).abs() <= tol, || format!("{key}: excess {got} vs {want}"));
    }
    c.finish(excess.iter().map(|(k, v)| format!("{k} {v:.3e}")).collect::<Vec<_>>().join(", "))
}

fn criterion_8() -> Result<String, String> {
    let cone = build_surface(&ExperimentConfig::default()).map_err(|e| e.to_string())?;
    let perturbed = build_surface(&cfg(SurfaceKind::Perturbed, Experiment::Dasm)).map_err(|e| e.to_string())?;
    let sphere = build_surface(&cfg(SurfaceKind::Sphere, Experiment::Dasm)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cone_point = |rng: &mut ChaCha8Rng| PointPolar::new(rng.gen_range(1.5..30.0), rng.gen_range(0.0..std::f64::consts::TAU));
    let guard = |e: &Error| matches!(e, Error::ApexGuard { .. });
    let (mut round, mut drift, mut ident, mut sym) = (0f64, 0f64, 0f64, 0f64);
    let mut failures = Vec::new();
    for _ in 0..HYGIENE_SAMPLES {
        for (spec, x, v) in [
            (&cone, cone_point(&mut rng), Tangent::from_angle(rng.gen_range(-3.1..3.1), rng.gen_range(0.1..30.0))),
            (
                &sphere,
                PointPolar::new(rng.gen_range(0.9..2.2), rng.gen_range(2.2..4.1)),
                Tangent::from_angle(rng.gen_range(-3.1..3.1), rng.gen_range(0.05..3.0)),
            ),
        ] {
            match exp_map(spec, x, v).and_then(|y| connect(spec, x, y)) {
                Ok(back) => round = round.max(back.velocity.sub(&v).norm()),
                Err(e) if guard(&e) => {}
                Err(e) => failures.push(e.to_string()),
            }
        }
        let spec = if rng.gen_bool(0.5) { &cone } else { &perturbed };
        let len = 20.0;
        match shoot(spec, PointPolar::new(rng.gen_range(0.5..8.0), 0.3), rng.gen_range(-3.0..3.0), len) {
            Ok(g) => {
                let c0 = g.state(0.0).clairaut();
                for i in 1..=50 {
                    let s = len * i as f64 / 50.0;
                    let st = g.state(s);
                    drift = drift.max((st.clairaut() - c0).abs() / s).max((st.speed() - 1.0).abs() / s);
                }
            }
            Err(e) if guard(&e) => {}
            Err(e) => failures.push(e.to_string()),
        }
        let (x, b0, b1) = (cone_point(&mut rng), cone_point(&mut rng), cone_point(&mut rng));
        match c_segment(&cone, x, b0, b1) {
            Ok(seg) => {
                for t in [0.1, 0.6, 0.9] {
                    match seg.point(&cone, t).and_then(|p| cost(&cone, x, p)) {
                        Ok(c) => ident = ident.max((c - 0.5 * seg.vector(t).norm().powi(2)).abs()),
                        Err(e) => failures.push(e.to_string()),
                    }
                }
            }
            Err(e) if guard(&e) => {}
            Err(e) => failures.push(e.to_string()),
        }
        let (a, b) = (cone_point(&mut rng), cone_point(&mut rng));
        match (connect(&cone, a, b), connect(&cone, b, a)) {
            (Ok(ab), Ok(ba)) => sym = sym.max((ab.distance - ba.distance).abs()),
            (Err(e), _) | (_, Err(e)) => failures.push(e.to_string()),
        }
    }
    let mut c = Checks::new();
    c.check(failures.is_empty(), || format!("errors: {}", failures.join(", ")));
    c.check(round <= ROUND_TRIP_TOL, || format!("exp/log round trip {round:e}"));
    c.check(drift <= DRIFT_PER_LENGTH, || format!("drift per length {drift:e}"));
    c.check(ident <= IDENTITY_TOL, || format!("c-segment identity {ident:e}"));
    c.check(sym <= SYMMETRY_TOL, || format!("distance symmetry {sym:e}"));
    c.finish(format!("round trip {round:.1e}, drift/length {drift:.1e}, identity {ident:.1e}, symmetry {sym:.1e}"))
}

fn criterion_9() -> Result<String, String> {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    let mut bytes = Vec::new();
    for d in &dirs {
        let out = Command::new(env!("CARGO_BIN_EXE_mtwcone"))
            .args(["reproduce-paper", "--seed", "3", "--out-dir"])
            .arg(d.path())
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
        }
        bytes.push(std::fs::read(d.path().join("report.json")).map_err(|e| e.to_string())?);
    }
    if bytes[0] == bytes[1] {
        Ok(format!("report.json identical ({} bytes)", bytes[0].len()))
    } else {
        Err("report.json differs between runs".into())
    }
}

fn main() -> ExitCode {
    let mut ctx = Ctx::default();
    let criteria: [Criterion; 9] = [
        ("counterexample reproduction", &mut criterion_1),
        ("positive-curvature persistence", &mut criterion_2),
        ("controls", &mut criterion_3),
        ("A3w / DASM cross-consistency", &mut criterion_4),
        ("Toponogov", &mut criterion_5),
        ("injectivity machinery", &mut criterion_6),
        ("Gauss-Bonnet step", &mut |_| criterion_7()),
        ("numerical hygiene", &mut |_| criterion_8()),
        ("determinism", &mut |_| criterion_9()),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match f(&mut ctx) {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {} {name} [{:.1} s]: {detail}", i + 1, t.elapsed().as_secs_f64());
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
