//! The verification pipeline: stages producing verdicts, tables and plots.
//!
//! Every stage records its verdict even when a later stage fails. Numbers in
//! `report.json` are sufficient to re-derive each verdict; timings go to a
//! separate `timings.json` so that the report is byte-identical across runs.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;
use std::time::Instant;

use mtwcone_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, SurfaceKind};
use crate::plot::{render_plot, PlotSpec};
use crate::table::CsvTable;

/// Significance factor for negative A3w samples and DASM gaps.
pub const SIGNIFICANCE: f64 = 10.0;
/// Tolerance of the Toponogov inequality `d_M ≤ d_flat`.
pub const HINGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NumericFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub name: String,
    /// `error` when the stage did not complete, `skipped` when a stage it
    /// depends on failed.
    pub verdict: String,
    pub error: Option<String>,
    pub data: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u64,
    pub experiment: String,
    pub surface: String,
    pub status: Status,
    pub config: ExperimentConfig,
    pub stages: Vec<Stage>,
}

impl Report {
    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub report: Report,
    /// `(file stem, table)`.
    pub tables: Vec<(String, CsvTable)>,
    /// `(file stem, SVG document)`.
    pub plots: Vec<(String, String)>,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(String, f64)>,
}

impl ReportBundle {
    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn timings_json(&self) -> String {
        let map: serde_json::Map<String, Value> = self.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("timings serialize");
        s.push('\n');
        s
    }

    /// Writes `report.json`, `timings.json`, tables and plots into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report_json())?;
        std::fs::write(dir.join("timings.json"), self.timings_json())?;
        for (name, t) in &self.tables {
            t.write(&dir.join(format!("{name}.csv")))?;
        }
        for (name, svg) in &self.plots {
            std::fs::write(dir.join(format!("{name}.svg")), svg)?;
        }
        Ok(())
    }
}

/// Builds the surface selected by `cfg`.
pub fn build_surface(cfg: &ExperimentConfig) -> Result<SurfaceSpec> {
    match cfg.surface {
        SurfaceKind::Plane => Ok(make_plane()),
        SurfaceKind::Sphere => make_sphere(cfg.delta),
        SurfaceKind::Cone => make_flattened_cone(cfg.theta, cfg.mode),
        SurfaceKind::Capped => make_capped_closed(cfg.theta, cfg.cap_radius, cfg.rounding_width),
        SurfaceKind::Perturbed => perturb_positive(&make_flattened_cone(cfg.theta, cfg.mode)?, cfg.epsilon),
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    spec: SurfaceSpec,
    connect: ConnectOptions,
    tables: Vec<(String, CsvTable)>,
    plots: Vec<(String, String)>,
}

/// Points and the c-segment of the configured experiment.
struct Setup {
    x: PointPolar,
    y: PointPolar,
    seg: CSegment,
}

type StageResult = std::result::Result<(String, Value), String>;

impl Ctx<'_> {
    fn dev(&self, p: [f64; 2]) -> Result<PointPolar> {
        self.spec.dev_to_polar(PointDev::new(p[0], p[1]))
    }

    fn table(&mut self, name: &str, t: CsvTable, plot: Option<PlotSpec>) {
        if let Some(p) = plot.filter(|_| self.cfg.plots) {
            if let Ok(svg) = render_plot(&t, &p) {
                self.plots.push((name.to_string(), svg));
            }
        }
        self.tables.push((name.to_string(), t));
    }

    fn dasm_options(&self) -> DasmOptions {
        DasmOptions { connect: self.connect.clone(), ..DasmOptions::default() }
    }

    fn t_grid(&self) -> Vec<f64> {
        let n = self.cfg.t_grid - 1;
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    fn is_sphere(&self) -> bool {
        self.cfg.surface == SurfaceKind::Sphere
    }

    // ---- stages ----

    fn conditions(&mut self) -> StageResult {
        let spec = &self.spec;
        let cfg = self.cfg;
        let kmin = spec.min_curvature();
        let kmax = spec.max_curvature;
        let tpc = spec.total_positive_curvature();
        let r_flat_end = match cfg.surface {
            SurfaceKind::Capped => cfg.cap_radius - cfg.rounding_width,
            _ => 40.0,
        };
        let flat_outside = (0..=2000).map(|i| 1.0 + (r_flat_end - 1.0) * i as f64 / 2000.0).all(|r| spec.gaussian_curvature(r) == 0.0);
        let ball = spec.disk_curvature(1.0);
        let (verdict_ok, expected) = match cfg.surface {
            SurfaceKind::Plane => (kmax == 0.0 && kmin == 0.0, json!(0.0)),
            SurfaceKind::Sphere => ((spec.gaussian_curvature(0.7) - cfg.delta).abs() < 1e-9, json!(4.0 * PI)),
            SurfaceKind::Cone => (kmin >= 0.0 && flat_outside && (tpc - 2.0 * cfg.theta).abs() <= 1e-6 && tpc < PI, json!(2.0 * cfg.theta)),
            SurfaceKind::Capped => (kmin >= 0.0 && flat_outside && (tpc - 4.0 * PI).abs() <= 1e-6, json!(4.0 * PI)),
            SurfaceKind::Perturbed => (kmin > 0.0, Value::Null),
        };
        let r_max = match cfg.surface {
            SurfaceKind::Sphere => PI / cfg.delta.sqrt(),
            SurfaceKind::Capped => spec.profile.r_end(),
            _ => 3.0,
        };
        let mut t = CsvTable::new(["r", "phi", "dphi", "K"]);
        for i in 0..=600 {
            let r = r_max * i as f64 / 600.0;
            let [phi, dphi, _] = spec.profile.eval(r);
            t.push(vec![r, phi, dphi, spec.gaussian_curvature(r)]);
        }
        let plot = PlotSpec {
            title: format!("Gaussian curvature, {}", cfg.surface.name()),
            x: "r".into(),
            y: vec!["K".into()],
            x_label: "r (length)".into(),
            y_label: "K (1/length²)".into(),
            references: vec![],
        };
        let data = json!({
            "construction": spec.construction,
            "chart": spec.chart,
            "min_curvature": kmin,
            "max_curvature": kmax,
            "curvature_at_apex": spec.gaussian_curvature(0.0),
            "k_nonnegative": kmin >= 0.0,
            "k_positive": kmin > 0.0,
            "flat_outside_ball": flat_outside,
            "flat_check_radius": r_flat_end,
            "ball_curvature": ball,
            "total_positive_curvature": tpc,
            "expected_total_curvature": expected,
            "total_below_pi": tpc < PI,
            "strict_curvature_bound": kmax < 1e-4,
        });
        self.table("profile", t, Some(plot));
        Ok((if verdict_ok { "satisfied" } else { "not_satisfied" }.into(), data))
    }

    fn setup(&self) -> Result<Setup> {
        if self.is_sphere() {
            let x = PointPolar::new(1.0, 0.5);
            let seg = CSegment::from_tangents(&self.spec, x, Tangent::new(0.2, -0.5), Tangent::new(0.3, 0.8))?;
            let y = exp_map(&self.spec, x, Tangent::new(-0.4, 0.15))?;
            return Ok(Setup { x, y, seg });
        }
        let x = self.dev(self.cfg.x)?;
        let y = self.dev(self.cfg.y)?;
        let seg = c_segment(&self.spec, x, self.dev(self.cfg.xbar0)?, self.dev(self.cfg.xbar1)?)?;
        Ok(Setup { x, y, seg })
    }

    fn segment(&mut self, s: &Setup) -> StageResult {
        let spec = &self.spec;
        let mut identity = 0.0f64;
        let mut straight = 0.0f64;
        let mut straight_samples = 0;
        // the development line is the c-segment only where the metric is flat
        let flat_outside = matches!(self.cfg.surface, SurfaceKind::Plane | SurfaceKind::Cone | SurfaceKind::Capped);
        let dev_line = |t: f64| {
            let (a, b) = (self.cfg.xbar0, self.cfg.xbar1);
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        };
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let g = s.seg.geodesic(spec, t).map_err(|e| e.to_string())?;
            let xt = g.end().point();
            let c = cost(spec, s.x, xt).map_err(|e| e.to_string())?;
            let w = s.seg.vector(t).norm();
            identity = identity.max((c - 0.5 * w * w).abs());
            if flat_outside && g.min_radius(400) > 1.0 {
                let e = spec.polar_to_dev(xt);
                let l = dev_line(t);
                straight = straight.max((e.a - l[0]).hypot(e.b - l[1]));
                straight_samples += 1;
            }
        }
        let mid = s.seg.point(spec, 0.5).map_err(|e| e.to_string())?;
        let frame = |v: Tangent| spec.chart.tangent_to_dev(s.x, v);
        let probe = connect_with(spec, s.x, s.y, &self.connect).map_err(|e| e.to_string())?.velocity;
        let ok = identity <= 1e-8 && straight <= 1e-7;
        let data = json!({
            "base": s.x,
            "start": s.seg.start,
            "end": s.seg.end,
            "p": s.seg.p,
            "q": s.seg.q,
            "xi": s.seg.xi,
            "p_dev": frame(s.seg.p),
            "xi_dev": frame(s.seg.xi),
            "identity_max_error": identity,
            "straightness_max_error": straight,
            "straightness_samples": straight_samples,
            "midpoint": mid,
            "midpoint_in_ball": mid.r < 1.0,
            "probe": probe,
            "probe_dot_xi": probe.dot(&s.seg.xi),
        });
        Ok((if ok { "identity_holds" } else { "identity_fails" }.into(), data))
    }

    fn dasm(&mut self, s: &Setup) -> StageResult {
        if self.is_sphere() {
            return self.dasm_sphere();
        }
        let spec = &self.spec;
        let grid = self.t_grid();
        let (y, probe) = if self.cfg.balance() {
            let b = balanced_probe(spec, s.x, &s.seg, s.y, 1.0).map_err(|e| e.to_string())?;
            (b.y, json!({"balanced": true, "y": b.y, "rotation": b.rotation, "imbalance": b.imbalance}))
        } else {
            (s.y, json!({"balanced": false, "y": s.y}))
        };
        let rep = dasm_profile_with(spec, s.x, y, &s.seg, &grid, &self.dasm_options()).map_err(|e| e.to_string())?;
        let d = |p: [f64; 2]| PointDev::new(p[0], p[1]);
        let c = self.cfg;
        let flat: Vec<f64> = grid.iter().map(|&t| flat_baseline(d(c.x), d(c.y), d(c.xbar0), d(c.xbar1), t)).collect();
        let baseline_dev = rep.f.iter().zip(&flat).fold(0.0f64, |m, (f, b)| m.max((f - b).abs()));
        let spread = rep.f.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) - rep.f.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        let mut t = CsvTable::new(["t", "f", "xbar_r", "xbar_theta"]);
        for ((&tt, &f), p) in rep.t.iter().zip(&rep.f).zip(&rep.xbar) {
            t.push(vec![tt, f, p.r, p.theta]);
        }
        let plot = PlotSpec {
            title: format!("DASM profile, {}", c.surface.name()),
            x: "t".into(),
            y: vec!["f".into()],
            x_label: "t (segment parameter, dimensionless)".into(),
            y_label: "f_t(y) (length²)".into(),
            references: vec![("max(f0, f1)".into(), rep.f0.max(rep.f1))],
        };
        self.table("dasm", t, Some(plot));
        let g = s.seg.geodesic(&self.spec, rep.t_max).map_err(|e| e.to_string())?;
        let mut gt = CsvTable::new(["s", "r", "theta", "a", "b"]);
        for i in 0..=400 {
            let sv = g.length * i as f64 / 400.0;
            let p = g.point(sv);
            let e = self.spec.polar_to_dev(p);
            gt.push(vec![sv, p.r, p.theta, e.a, e.b]);
        }
        self.table("geodesic", gt, None);
        let data = json!({
            "grid_points": grid.len(),
            "probe": probe,
            "f0": rep.f0,
            "f1": rep.f1,
            "t_max": rep.t_max,
            "f_max": rep.f_max,
            "gap": rep.gap,
            "error": rep.error,
            "violation_factor": self.dasm_options().violation_factor,
            "violation": rep.violation,
            "curved_interval": rep.curved_interval,
            "f_spread": spread,
            "flat_baseline_t0": flat[0],
            "flat_baseline_max_deviation": baseline_dev,
        });
        Ok((if rep.violation { "violation" } else { "no_violation" }.into(), data))
    }

    fn dasm_sphere(&mut self) -> StageResult {
        let spec = &self.spec;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0x6461_736d);
        let grid = self.t_grid();
        let opts = self.dasm_options();
        let mut t = CsvTable::new(["sample", "gap", "error", "violation"]);
        let (mut violations, mut max_gap, mut failures) = (0, 0.0f64, Vec::new());
        let scale = 1.0 / self.cfg.delta.sqrt();
        for i in 0..self.cfg.sphere_samples {
            let x = PointPolar::new(scale * rng.gen_range(0.8..2.3), rng.gen_range(0.0..TAU));
            let tangent = |rng: &mut ChaCha8Rng, max: f64| Tangent::from_angle(rng.gen_range(-PI..PI), scale * rng.gen_range(0.05..max));
            let (p, q, w) = (tangent(&mut rng, 1.2), tangent(&mut rng, 1.2), tangent(&mut rng, 1.0));
            let run = || -> Result<DasmReport> {
                let seg = CSegment::from_tangents(spec, x, p, q.sub(&p))?;
                let y = exp_map(spec, x, w)?;
                dasm_profile_with(spec, x, y, &seg, &grid, &opts)
            };
            match run() {
                Ok(rep) => {
                    violations += rep.violation as usize;
                    max_gap = max_gap.max(rep.gap);
                    t.push(vec![i as f64, rep.gap, rep.error, rep.violation as u8 as f64]);
                }
                Err(e) => failures.push(json!({"sample": i, "error": e.to_string()})),
            }
        }
        let evaluated = t.rows.len();
        let data = json!({
            "samples": self.cfg.sphere_samples,
            "evaluated": evaluated,
            "violations": violations,
            "max_gap": max_gap,
            "failures": failures,
        });
        self.table("sphere_dasm", t, None);
        if evaluated == 0 && self.cfg.sphere_samples > 0 {
            return Err(format!("every sampled configuration failed: {}", data["failures"]));
        }
        Ok((if violations > 0 { "violation" } else { "no_violation" }.into(), data))
    }

    fn toponogov(&mut self, s: Option<&Setup>, t0: Option<f64>) -> StageResult {
        let spec = &self.spec;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0x746f_706f);
        let sphere = self.is_sphere();
        let scale = if sphere { 1.0 / self.cfg.delta.sqrt() } else { 1.0 };
        let hinges: Vec<Hinge> = (0..self.cfg.hinges)
            .map(|_| {
                let apex = if sphere {
                    PointPolar::new(scale * rng.gen_range(0.5..2.6), rng.gen_range(0.0..TAU))
                } else {
                    PointPolar::new(rng.gen_range(1.5..30.0), rng.gen_range(0.0..TAU))
                };
                let a1 = rng.gen_range(-PI..PI);
                let gamma = rng.gen_range(0.05..PI);
                let (lmax, lmin) = if sphere { (1.5 * scale, 0.1 * scale) } else { (20.0, 0.5) };
                Hinge { apex, alpha1: a1, alpha2: a1 + gamma, l1: rng.gen_range(lmin..lmax), l2: rng.gen_range(lmin..lmax) }
            })
            .collect();
        let mut t = CsvTable::new(["l1", "l2", "gamma", "d_m", "d_flat", "gap"]);
        let (mut skipped, mut violations, mut min_gap) = (0usize, 0usize, f64::INFINITY);
        for h in &hinges {
            match toponogov_check(spec, *h) {
                Ok(r) => {
                    min_gap = min_gap.min(r.gap);
                    violations += (r.gap < -HINGE_TOL) as usize;
                    t.push(vec![h.l1, h.l2, r.gamma, r.d_m, r.d_flat, r.gap]);
                }
                Err(Error::ApexGuard { .. }) | Err(Error::AmbiguousCut { .. }) => skipped += 1,
                Err(e) => return Err(format!("hinge {h:?}: {e}")),
            }
        }
        let mut data = json!({
            "hinges": hinges.len(),
            "evaluated": t.rows.len(),
            "skipped": skipped,
            "min_gap": if min_gap.is_finite() { json!(min_gap) } else { Value::Null },
            "violations": violations,
            "tolerance": HINGE_TOL,
        });
        self.tables.push(("hinges".into(), t));
        let mut ok = violations == 0 || spec.min_curvature() < 0.0;
        if sphere {
            let h = Hinge { apex: PointPolar::new(1.2 * scale, 0.3), alpha1: 0.4, alpha2: 0.4 + FRAC_PI_2, l1: scale, l2: scale };
            let r = toponogov_check(spec, h).map_err(|e| e.to_string())?;
            let expected = scale * (1f64.cos() * 1f64.cos()).acos();
            let dev = (r.d_m - expected).abs();
            ok &= dev <= 1e-6;
            data["law_of_cosines"] = json!({"d_m": r.d_m, "expected": expected, "deviation": dev, "d_flat": r.d_flat});
        } else if let Some(s) = s {
            let to_y = connect_with(spec, s.x, s.y, &self.connect).map_err(|e| e.to_string())?.velocity;
            let t0 = t0.unwrap_or(0.5);
            let to_xbar = s.seg.vector(t0);
            let h = Hinge { apex: s.x, alpha1: to_y.angle(), alpha2: to_xbar.angle(), l1: to_y.norm(), l2: to_xbar.norm() };
            let r = toponogov_check(spec, h).map_err(|e| e.to_string())?;
            let strict = r.gap > HINGE_TOL;
            if spec.min_curvature() >= 0.0 && r.meets_curvature {
                ok &= strict;
            }
            data["reference_hinge"] = json!({
                "t0": t0, "gamma": r.gamma, "l1": h.l1, "l2": h.l2,
                "d_m": r.d_m, "d_flat": r.d_flat, "gap": r.gap,
                "meets_curvature": r.meets_curvature, "strict": strict,
            });
        }
        Ok((if ok { "holds" } else { "fails" }.into(), data))
    }

    fn a3w(&mut self, s: &Setup) -> StageResult {
        let spec = &self.spec;
        let (bases, base_seg) = if self.is_sphere() {
            let k = 1.0 / self.cfg.delta.sqrt();
            let b = vec![s.x, PointPolar::new(1.6 * k, 2.0), PointPolar::new(2.2 * k, 4.0)];
            (b, (s.seg.p, s.seg.xi))
        } else {
            let near = |da: f64, db: f64| self.dev([self.cfg.x[0] + da, self.cfg.x[1] + db]);
            let b = vec![s.x, near(0.0, -0.5).map_err(|e| e.to_string())?, near(0.5, 0.0).map_err(|e| e.to_string())?];
            (b, (s.seg.p, s.seg.xi))
        };
        let rot = |v: Tangent, a: f64| Tangent::from_angle(v.angle() + a, v.norm());
        let (p, xi) = base_seg;
        let segments = vec![(p, xi), (rot(p, 0.02), rot(xi, 0.02)), (rot(p, -0.02), rot(xi, -0.02))];
        let cfg = A3wScanConfig {
            bases,
            segments,
            t_values: self.cfg.a3w_t_values.clone(),
            steps: A3wSteps { dt: self.cfg.a3w_dt, hessian_step: None },
        };
        let res = a3w_scan(spec, &cfg);
        let mut t = CsvTable::new(["base_r", "base_theta", "t", "value", "error"]);
        for smp in &res.samples {
            t.push(vec![smp.base.r, smp.base.theta, smp.t, smp.value, smp.error]);
        }
        self.table("a3w", t, None);
        let Some(min) = res.minimum() else {
            return Err(format!("every A3w sample failed ({} failures)", res.failures.len()));
        };
        let significant: Vec<&A3wSample> = res.samples.iter().filter(|s| s.value < -SIGNIFICANCE * s.error).collect();
        let witness = significant.iter().min_by(|a, b| (a.value / a.error).total_cmp(&(b.value / b.error)));
        let data = json!({
            "samples": res.samples.len(),
            "failures": res.failures.iter().map(|f| json!({"base": f.base, "t": f.t, "error": f.error})).collect::<Vec<_>>(),
            "min_value": min.value,
            "min_error": min.error,
            "min_t": min.t,
            "min_base": min.base,
            "max_abs_value": res.samples.iter().fold(0.0f64, |m, s| m.max(s.value.abs())),
            "significant_negative": significant.len(),
            "witness": witness.map(|w| json!({"base": w.base, "t": w.t, "value": w.value, "error": w.error, "xbar": w.xbar})),
            "significance_factor": SIGNIFICANCE,
        });
        Ok((if significant.is_empty() { "nonnegative" } else { "negative" }.into(), data))
    }

    fn injectivity(&mut self) -> StageResult {
        let spec = &self.spec;
        let x = if self.is_sphere() { PointPolar::new(1.0 / self.cfg.delta.sqrt(), 0.5) } else { self.dev(self.cfg.x).map_err(|e| e.to_string())? };
        let n = self.cfg.inj_directions;
        let angles: Vec<f64> = (0..n).map(|i| TAU * (i as f64 + 0.5) / n as f64).collect();
        let est = empirical_injectivity(spec, x, &angles, self.cfg.inj_length, self.cfg.inj_step);
        let tpc = spec.total_positive_curvature();
        let kmax = spec.max_curvature;
        let bound = if kmax > 0.0 { PI / kmax.sqrt() } else { f64::INFINITY };
        let errors: Vec<Value> = est.directions.iter().filter_map(|d| d.error.as_ref().map(|e| json!({"alpha": d.alpha, "error": e}))).collect();
        let failures: usize = est.directions.iter().map(|d| d.failures).sum();
        let conj_ok = est.conjugate.is_none_or(|c| c >= bound - 1e-6);
        let equal = match (est.injectivity, est.conjugate) {
            (None, None) => true,
            (Some(i), Some(c)) => (i - c).abs() <= 5e-3,
            _ => false,
        };
        let ok = conj_ok && equal && errors.is_empty();
        let data = json!({
            "base": x,
            "directions": n,
            "length": self.cfg.inj_length,
            "step": self.cfg.inj_step,
            "total_positive_curvature": tpc,
            "total_below_pi": tpc < PI,
            "max_curvature": kmax,
            "conjugate_radius_bound": if bound.is_finite() { json!(bound) } else { Value::Null },
            "injectivity": est.injectivity,
            "conjugate": est.conjugate,
            "conjugate_respects_bound": conj_ok,
            "injectivity_equals_conjugate": equal,
            "sample_failures": failures,
            "direction_errors": errors,
        });
        let verdict = if !ok {
            "inconsistent"
        } else if est.injectivity.is_none() {
            "no_cut_or_conjugate_within_length"
        } else {
            "injectivity_equals_conjugate"
        };
        Ok((verdict.into(), data))
    }

    fn gauss_bonnet(&mut self) -> StageResult {
        let spec = &self.spec;
        let mut tri = Vec::new();
        let mut ok = true;
        let mut check = |name: &str, v: [PointPolar; 3], expected: Option<f64>, tol: f64| -> std::result::Result<(), String> {
            let r = gauss_bonnet_triangle(spec, v[0], v[1], v[2]).map_err(|e| format!("{name}: {e}"))?;
            let dev = expected.map(|e| (r.excess - e).abs());
            if let Some(d) = dev {
                ok &= d <= tol;
            }
            tri.push(json!({
                "name": name, "vertices": r.vertices, "angles": r.angles, "sides": r.sides,
                "excess": r.excess, "winding": r.winding, "expected": expected, "deviation": dev, "tolerance": tol,
            }));
            Ok(())
        };
        match self.cfg.surface {
            SurfaceKind::Sphere => {
                let k = 1.0 / self.cfg.delta.sqrt();
                check("octant", [PointPolar::new(0.0, 0.0), PointPolar::new(FRAC_PI_2 * k, 0.0), PointPolar::new(FRAC_PI_2 * k, FRAC_PI_2)], Some(FRAC_PI_2), 1e-6)?;
            }
            kind => {
                let v = |t: f64| PointPolar::new(5.0, t);
                let around = if kind.has_tip() && kind != SurfaceKind::Perturbed { Some(2.0 * self.cfg.theta) } else if kind == SurfaceKind::Plane { Some(0.0) } else { None };
                check("around_ball", [v(0.0), v(TAU / 3.0), v(2.0 * TAU / 3.0)], around, 1e-4)?;
                let d = |a: f64, b: f64| spec.dev_to_polar(PointDev::new(a, b)).map_err(|e| e.to_string());
                let flat_ref = if kind == SurfaceKind::Perturbed { None } else { Some(0.0) };
                check("flat", [d(10.0, 10.0)?, d(10.0, 11.0)?, d(-10.0, 5.0)?], flat_ref, 1e-7)?;
            }
        }
        Ok((if ok { "consistent" } else { "inconsistent" }.into(), json!({ "triangles": tri })))
    }
}

fn error_stage(name: &str, e: String) -> Stage {
    Stage { name: name.into(), verdict: "error".into(), error: Some(e), data: Value::Null }
}

fn skipped(name: &str, dep: &str) -> Stage {
    Stage { name: name.into(), verdict: "skipped".into(), error: Some(format!("requires stage `{dep}`")), data: Value::Null }
}

/// Runs the configured experiment. Verdicts (including found violations) are
/// data; `Err` is returned, with the partial bundle, only when a stage failed
/// numerically.
pub fn run_experiment(cfg: &ExperimentConfig) -> std::result::Result<ReportBundle, Box<(ReportBundle, String)>> {
    let mut stages = Vec::new();
    let mut timings = Vec::new();
    let started = Instant::now();
    let spec = match build_surface(cfg) {
        Ok(s) => s,
        Err(e) => {
            stages.push(error_stage("surface", e.to_string()));
            let bundle = finish(cfg, stages, Vec::new(), Vec::new(), timings);
            return Err(Box::new((bundle, format!("surface construction failed: {e}"))));
        }
    };
    timings.push(("surface".to_string(), started.elapsed().as_secs_f64()));
    let g = GeodesicOptions::default().scaled(cfg.tol_scale);
    let base = ConnectOptions::default();
    let connect = ConnectOptions { geodesic: g, tol: base.tol * cfg.tol_scale, tol_stall: base.tol_stall * cfg.tol_scale, ..base };
    let mut ctx = Ctx { cfg, spec, connect, tables: Vec::new(), plots: Vec::new() };

    let plan: &[&str] = match cfg.experiment {
        Experiment::BuildSurface => &["conditions"],
        Experiment::Dasm => &["segment", "dasm"],
        Experiment::A3wScan => &["segment", "a3w"],
        Experiment::Toponogov => &["segment", "toponogov"],
        Experiment::InjRadius => &["injectivity"],
        Experiment::GaussBonnet => &["gauss_bonnet"],
        Experiment::ReproducePaper => &["conditions", "segment", "dasm", "toponogov", "a3w", "injectivity"],
    };
    let mut setup: Option<Setup> = None;
    let mut setup_error = None;
    let mut t0 = None;
    let mut failed = None;
    for &name in plan {
        let clock = Instant::now();
        let needs_setup = matches!(name, "segment" | "dasm" | "a3w") || (name == "toponogov" && !ctx.is_sphere());
        if needs_setup && setup.is_none() && setup_error.is_none() {
            match ctx.setup() {
                Ok(s) => setup = Some(s),
                Err(e) => setup_error = Some(e.to_string()),
            }
        }
        let result = match name {
            "conditions" => ctx.conditions(),
            "injectivity" => ctx.injectivity(),
            "gauss_bonnet" => ctx.gauss_bonnet(),
            _ => match (&setup, &setup_error) {
                (Some(s), _) => match name {
                    "segment" => ctx.segment(s),
                    "dasm" => ctx.dasm(s),
                    "toponogov" => ctx.toponogov(Some(s), t0),
                    _ => ctx.a3w(s),
                },
                (None, Some(e)) if name == "segment" => Err(e.clone()),
                (None, None) => ctx.toponogov(None, None),
                _ => {
                    stages.push(skipped(name, "segment"));
                    continue;
                }
            },
        };
        timings.push((name.to_string(), clock.elapsed().as_secs_f64()));
        match result {
            Ok((verdict, data)) => {
                if name == "dasm" {
                    t0 = data["t_max"].as_f64();
                }
                stages.push(Stage { name: name.into(), verdict, error: None, data });
            }
            Err(e) => {
                failed.get_or_insert_with(|| format!("stage `{name}` failed: {e}"));
                stages.push(error_stage(name, e));
            }
        }
    }
    timings.push(("total".to_string(), started.elapsed().as_secs_f64()));
    let bundle = finish(cfg, stages, ctx.tables, ctx.plots, timings);
    match failed {
        None => Ok(bundle),
        Some(msg) => Err(Box::new((bundle, msg))),
    }
}

fn finish(
    cfg: &ExperimentConfig,
    stages: Vec<Stage>,
    tables: Vec<(String, CsvTable)>,
    plots: Vec<(String, String)>,
    timings: Vec<(String, f64)>,
) -> ReportBundle {
    let status = if stages.iter().any(|s| s.verdict == "error") { Status::NumericFailure } else { Status::Ok };
    ReportBundle {
        report: Report {
            schema_version: cfg.schema_version,
            experiment: cfg.experiment.name().into(),
            surface: cfg.surface.name().into(),
            status,
            config: cfg.clone(),
            stages,
        },
        tables,
        plots,
        timings,
    }
}
