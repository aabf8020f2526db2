//! c-segments, the local DASM profile, the A3w term and Toponogov hinges for
//! the cost `c = dist²/2`.
//!
//! Conventions: `ξ` is the segment direction and `η ⊥ ξ` the test direction,
//! both tangent at the base point `x`. `x̄(t) = exp_x(p + tξ)`.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use alloc::string::String;
use alloc::vec::Vec;

use crate::connect::{connect_with, cost_with, hessian_cost_with, ConnectOptions};
use crate::geodesic::{exp_map, shoot_with, Geodesic, GeodesicOptions};
use crate::par;
use crate::surface::{wrap_pi, PointDev, PointPolar, SurfaceSpec, Tangent};
use crate::{Error, Result};

/// The tangent-space line `t ↦ exp_x(p + tξ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CSegment {
    pub base: PointPolar,
    pub start: PointPolar,
    pub end: PointPolar,
    /// `log_x(x̄₀)`.
    pub p: Tangent,
    /// `log_x(x̄₁)`.
    pub q: Tangent,
    /// `q - p`.
    pub xi: Tangent,
}

impl CSegment {
    /// Segment given directly by tangent data at `x`; endpoints are shot.
    pub fn from_tangents(spec: &SurfaceSpec, x: PointPolar, p: Tangent, xi: Tangent) -> Result<Self> {
        let q = p.add(&xi);
        let start = exp_map(spec, x, p)?;
        let end = exp_map(spec, x, q)?;
        Ok(Self { base: x, start, end, p, q, xi })
    }

    pub fn vector(&self, t: f64) -> Tangent {
        self.p.add(&self.xi.scale(t))
    }

    /// `x̄(t)`.
    pub fn point(&self, spec: &SurfaceSpec, t: f64) -> Result<PointPolar> {
        exp_map(spec, self.base, self.vector(t))
    }

    pub fn geodesic(&self, spec: &SurfaceSpec, t: f64) -> Result<Geodesic> {
        let v = self.vector(t);
        shoot_with(spec, self.base, v.angle(), v.norm(), &GeodesicOptions::default())
    }
}

fn separation(spec: &SurfaceSpec, a: PointPolar, b: PointPolar) -> f64 {
    let phi = spec.phi(0.5 * (a.r + b.r));
    (a.r - b.r).hypot(phi * wrap_pi(a.theta - b.theta))
}

/// Builds the c-segment from `x̄₀` to `x̄₁` and checks `x̄(t)` against its
/// endpoints and `c(x, x̄(t)) = |p + tξ|²/2` at `t ∈ {0, ¼, ½, ¾, 1}`.
pub fn c_segment(spec: &SurfaceSpec, x: PointPolar, xb0: PointPolar, xb1: PointPolar) -> Result<CSegment> {
    let opts = ConnectOptions::default();
    let p = connect_with(spec, x, xb0, &opts)?.velocity;
    let q = connect_with(spec, x, xb1, &opts)?.velocity;
    let seg = CSegment { base: x, start: xb0, end: xb1, p, q, xi: q.sub(&p) };
    for (t, target) in [(0.0, Some(xb0)), (0.25, None), (0.5, None), (0.75, None), (1.0, Some(xb1))] {
        let xt = seg.point(spec, t)?;
        if let Some(target) = target {
            let miss = separation(spec, xt, target);
            if miss > 1e-8 {
                return Err(Error::SegmentIdentity { t, cost: miss, expected: 0.0 });
            }
        }
        let c = cost_with(spec, x, xt, &opts)?;
        let w = seg.vector(t).norm();
        let expected = 0.5 * w * w;
        if (c - expected).abs() > 1e-8 {
            return Err(Error::SegmentIdentity { t, cost: c, expected });
        }
    }
    Ok(seg)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DasmOptions {
    pub connect: ConnectOptions,
    /// Tolerance reduction for the re-evaluation part of the error estimate.
    pub recheck_factor: f64,
    /// Golden-section tolerance on `t` around the grid maximum.
    pub t_tol: f64,
    /// The verdict requires `gap > violation_factor × error`.
    pub violation_factor: f64,
}

impl Default for DasmOptions {
    fn default() -> Self {
        Self { connect: ConnectOptions::default(), recheck_factor: 0.1, t_tol: 1e-7, violation_factor: 10.0 }
    }
}

/// The profile `f_t(y) = -c(y, x̄(t)) + c(x, x̄(t))`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DasmReport {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    pub xbar: Vec<PointPolar>,
    pub f0: f64,
    pub f1: f64,
    /// Location and value of the refined maximum.
    pub t_max: f64,
    pub f_max: f64,
    /// `f_max - max(f0, f1)`; zero when the maximum sits at an endpoint.
    pub gap: f64,
    pub error: f64,
    pub violation: bool,
    /// Grid sub-interval on which `x̄(t)` sits where `K > 0`.
    pub curved_interval: Option<(f64, f64)>,
}

fn dasm_value(spec: &SurfaceSpec, x: PointPolar, y: PointPolar, seg: &CSegment, t: f64, opts: &ConnectOptions) -> Result<(f64, PointPolar)> {
    let v = seg.vector(t);
    let g = shoot_with(spec, x, v.angle(), v.norm(), &opts.geodesic)?;
    let xt = g.end().point();
    let cy = cost_with(spec, y, xt, opts)?;
    let cx = cost_with(spec, x, xt, opts)?;
    Ok((cx - cy, xt))
}

/// DASM profile on `t_grid` (must contain 0 and 1 as first and last entries).
pub fn dasm_profile(spec: &SurfaceSpec, x: PointPolar, y: PointPolar, seg: &CSegment, t_grid: &[f64]) -> Result<DasmReport> {
    dasm_profile_with(spec, x, y, seg, t_grid, &DasmOptions::default())
}

pub fn dasm_profile_with(
    spec: &SurfaceSpec,
    x: PointPolar,
    y: PointPolar,
    seg: &CSegment,
    t_grid: &[f64],
    opts: &DasmOptions,
) -> Result<DasmReport> {
    if t_grid.len() < 2 {
        return Err(Error::InvalidParameter("t grid needs at least two points".into()));
    }
    let copts = &opts.connect;
    let vals = par::map(t_grid, |&t| dasm_value(spec, x, y, seg, t, copts));
    let mut f = Vec::with_capacity(t_grid.len());
    let mut xbar = Vec::with_capacity(t_grid.len());
    for v in vals {
        let (fv, xt) = v?;
        f.push(fv);
        xbar.push(xt);
    }
    let n = f.len();
    let (f0, f1) = (f[0], f[n - 1]);
    let ends = f0.max(f1);
    let (mut imax, mut fgrid) = (0, f[0]);
    for (i, &v) in f.iter().enumerate() {
        if v > fgrid {
            imax = i;
            fgrid = v;
        }
    }
    let scale = 1.0 + f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (t_max, f_max, gap, error) = if imax == 0 || imax == n - 1 {
        (t_grid[imax], fgrid, 0.0, 1e-12 * scale)
    } else {
        let (a, b) = (t_grid[imax - 1], t_grid[imax + 1]);
        let eval = |t: f64| dasm_value(spec, x, y, seg, t, copts).map(|v| v.0);
        let (tm, fm) = golden_max(eval, a, b, t_grid[imax], fgrid, opts.t_tol)?;
        let tight = ConnectOptions {
            geodesic: copts.geodesic.scaled(opts.recheck_factor),
            tol: copts.tol * opts.recheck_factor,
            ..copts.clone()
        };
        let (fm_tight, _) = dasm_value(spec, x, y, seg, tm, &tight)?;
        let (e0, _) = dasm_value(spec, x, y, seg, t_grid[0], &tight)?;
        let (e1, _) = dasm_value(spec, x, y, seg, t_grid[n - 1], &tight)?;
        let recheck = (fm_tight - fm).abs() + (e0 - f0).abs().max((e1 - f1).abs());
        let error = 2.0 * recheck + (fm - fgrid).abs() + 1e-12 * scale;
        (tm, fm, fm - ends, error)
    };
    let curved: Vec<f64> = t_grid
        .iter()
        .zip(&xbar)
        .filter(|(_, p)| spec.gaussian_curvature(p.r) > 0.0)
        .map(|(t, _)| *t)
        .collect();
    let curved_interval = match (curved.first(), curved.last()) {
        (Some(&a), Some(&b)) => Some((a, b)),
        _ => None,
    };
    Ok(DasmReport {
        t: t_grid.to_vec(),
        f,
        xbar,
        f0,
        f1,
        t_max,
        f_max,
        gap,
        error,
        violation: gap > opts.violation_factor * error,
        curved_interval,
    })
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, t_best: f64, f_best: f64, tol: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let (t, v) = if fc > fd { (c, fc) } else { (d, fd) };
    Ok(if v > f_best { (t, v) } else { (t_best, f_best) })
}

/// The same profile on the Euclidean plane in development coordinates:
/// `-|y - x̄(t)|²/2 + |x - x̄(t)|²/2` with `x̄(t) = (1-t) x̄₀ + t x̄₁`.
pub fn flat_baseline(x: PointDev, y: PointDev, xb0: PointDev, xb1: PointDev, t: f64) -> f64 {
    let xa = xb0.a + t * (xb1.a - xb0.a);
    let xb = xb0.b + t * (xb1.b - xb0.b);
    let dy = (y.a - xa) * (y.a - xa) + (y.b - xb) * (y.b - xb);
    let dx = (x.a - xa) * (x.a - xa) + (x.b - xb) * (x.b - xb);
    0.5 * (dx - dy)
}

/// Probe point at distance `s0` from `x` whose endpoint values agree.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BalancedProbe {
    pub y: PointPolar,
    /// Rotation of the launch angle away from the direction toward `toward`.
    pub rotation: f64,
    /// Remaining `f₀(y) - f₁(y)`.
    pub imbalance: f64,
}

/// Rotates the probe direction at `x` until `f₀(y) = f₁(y)`.
///
/// On a perturbed surface the flat endpoint identity breaks slightly, and the
/// endpoint mismatch can dwarf the interior bump; balancing restores the
/// comparison `max_t f_t` against equal endpoints.
pub fn balanced_probe(spec: &SurfaceSpec, x: PointPolar, seg: &CSegment, toward: PointPolar, s0: f64) -> Result<BalancedProbe> {
    let copts = ConnectOptions::default();
    let base = connect_with(spec, x, toward, &copts)?.velocity.angle();
    let (xb0, xb1) = (seg.point(spec, 0.0)?, seg.point(spec, 1.0)?);
    let eval = |delta: f64| -> Result<(f64, PointPolar)> {
        let y = exp_map(spec, x, Tangent::from_angle(base + delta, s0))?;
        let f = |p| -> Result<f64> { Ok(cost_with(spec, x, p, &copts)? - cost_with(spec, y, p, &copts)?) };
        Ok((f(xb0)? - f(xb1)?, y))
    };
    let (mut d0, mut d1) = (0.0, 1e-3);
    let (mut g0, mut y) = eval(d0)?;
    let (mut g1, y1) = eval(d1)?;
    if g0.abs() <= g1.abs() {
        core::mem::swap(&mut d0, &mut d1);
        core::mem::swap(&mut g0, &mut g1);
    } else {
        y = y1;
    }
    for _ in 0..30 {
        if g1.abs() < 1e-12 * (1.0 + s0) || g1 == g0 {
            break;
        }
        let d2 = d1 - g1 * (d1 - d0) / (g1 - g0);
        if !d2.is_finite() || (d2 - d1).abs() > 0.5 {
            return Err(Error::NoConvergence { residual: g1.abs() });
        }
        let (g2, y2) = eval(d2)?;
        if g2.abs() >= g1.abs() && (d2 - d1).abs() < 1e-14 {
            break;
        }
        d0 = d1;
        g0 = g1;
        d1 = d2;
        g1 = g2;
        y = y2;
    }
    Ok(BalancedProbe { y, rotation: d1, imbalance: g1 })
}

/// Finite-difference settings for [`a3w_term`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct A3wSteps {
    pub dt: f64,
    /// Hessian step; `None` uses `1e-3 max(1, dist)`.
    pub hessian_step: Option<f64>,
}

impl Default for A3wSteps {
    fn default() -> Self {
        Self { dt: 0.05, hessian_step: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct A3wSample {
    pub base: PointPolar,
    pub segment: CSegment,
    /// Test direction after projection onto `ξ⊥`.
    pub eta: Tangent,
    pub t: f64,
    pub xbar: PointPolar,
    /// `d²/dt² [-D²ₓₓ c(x, x̄(t))](η, η)`.
    pub value: f64,
    pub error: f64,
    pub dt: f64,
    pub hessian_step: f64,
}

fn project_out(eta: Tangent, xi: Tangent) -> Tangent {
    let n2 = xi.dot(&xi);
    if n2 == 0.0 {
        return eta;
    }
    let mut e = eta.sub(&xi.scale(eta.dot(&xi) / n2));
    // one more pass removes what cancellation left behind
    e = e.sub(&xi.scale(e.dot(&xi) / n2));
    e
}

/// Central second difference in `t` of `g(t) = -D²ₓₓc(x, x̄(t))[η, η]`,
/// steps `Δt` and `Δt/2`, Richardson combined.
pub fn a3w_term(spec: &SurfaceSpec, x: PointPolar, seg: &CSegment, eta: Tangent, t: f64, steps: A3wSteps) -> Result<A3wSample> {
    a3w_term_with(spec, x, seg, eta, t, steps, &ConnectOptions::default())
}

pub fn a3w_term_with(
    spec: &SurfaceSpec,
    x: PointPolar,
    seg: &CSegment,
    eta: Tangent,
    t: f64,
    steps: A3wSteps,
    opts: &ConnectOptions,
) -> Result<A3wSample> {
    let eta = project_out(eta, seg.xi);
    if !(eta.norm() > 0.0) {
        return Err(Error::InvalidParameter("test direction is parallel to the segment".into()));
    }
    let dt = steps.dt;
    let g = |tau: f64| -> Result<(f64, f64, f64)> {
        let xt = seg.point(spec, tau)?;
        let h = hessian_cost_with(spec, x, xt, eta, steps.hessian_step, opts)?;
        Ok((-h.value, h.error, h.step))
    };
    let mut v = [(0.0, 0.0, 0.0); 5];
    for (i, tau) in [t - dt, t - 0.5 * dt, t, t + 0.5 * dt, t + dt].into_iter().enumerate() {
        v[i] = g(tau)?;
    }
    let d_full = (v[0].0 - 2.0 * v[2].0 + v[4].0) / (dt * dt);
    let hd = 0.5 * dt;
    let d_half = (v[1].0 - 2.0 * v[2].0 + v[3].0) / (hd * hd);
    let value = (4.0 * d_half - d_full) / 3.0;
    let herr = v.iter().fold(0.0f64, |m, s| m.max(s.1));
    let error = (value - d_half).abs() + 4.0 / 3.0 * 4.0 * herr / (hd * hd);
    Ok(A3wSample {
        base: x,
        segment: *seg,
        eta,
        t,
        xbar: seg.point(spec, t)?,
        value,
        error,
        dt,
        hessian_step: v[2].2,
    })
}

/// Deterministic grid for [`a3w_scan`]: every base point with every segment
/// (tangent data `(p, ξ)` at the base) and every `t`; `η` is the unit normal
/// of `ξ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct A3wScanConfig {
    pub bases: Vec<PointPolar>,
    pub segments: Vec<(Tangent, Tangent)>,
    pub t_values: Vec<f64>,
    pub steps: A3wSteps,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct A3wFailure {
    pub base: PointPolar,
    pub segment: (Tangent, Tangent),
    pub t: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct A3wScanResult {
    /// Ascending by value.
    pub samples: Vec<A3wSample>,
    pub failures: Vec<A3wFailure>,
}

impl A3wScanResult {
    pub fn minimum(&self) -> Option<&A3wSample> {
        self.samples.first()
    }
}

pub fn a3w_scan(spec: &SurfaceSpec, config: &A3wScanConfig) -> A3wScanResult {
    let mut jobs = Vec::new();
    for &b in &config.bases {
        for &s in &config.segments {
            for &t in &config.t_values {
                jobs.push((b, s, t));
            }
        }
    }
    let out = par::map(&jobs, |&(base, (p, xi), t)| {
        CSegment::from_tangents(spec, base, p, xi)
            .and_then(|seg| a3w_term(spec, base, &seg, xi.perp().scale(1.0 / xi.norm()), t, config.steps))
    });
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (r, &(base, segment, t)) in out.into_iter().zip(&jobs) {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => failures.push(A3wFailure { base, segment, t, error: alloc::format!("{e}") }),
        }
    }
    samples.sort_by(|a, b| a.value.total_cmp(&b.value));
    A3wScanResult { samples, failures }
}

/// Two geodesic sides from a common apex.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hinge {
    pub apex: PointPolar,
    pub alpha1: f64,
    pub alpha2: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Hinge {
    /// Angle between the sides in `[0, π]`.
    pub fn gamma(&self) -> f64 {
        wrap_pi(self.alpha2 - self.alpha1).abs()
    }

    pub fn flat_distance(&self) -> f64 {
        let c = self.gamma().cos();
        (self.l1 * self.l1 + self.l2 * self.l2 - 2.0 * self.l1 * self.l2 * c).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToponogovHinge {
    pub hinge: Hinge,
    pub gamma: f64,
    pub ends: [PointPolar; 2],
    pub d_m: f64,
    pub d_flat: f64,
    /// `d_flat - d_M`.
    pub gap: f64,
    /// Whether a side, or the closing geodesic, meets `K > 0`.
    pub meets_curvature: bool,
}

fn meets_curvature(spec: &SurfaceSpec, g: &Geodesic) -> bool {
    (0..=200).any(|i| spec.gaussian_curvature(g.state(g.length * i as f64 / 200.0).r) > 0.0)
}

pub fn toponogov_check(spec: &SurfaceSpec, hinge: Hinge) -> Result<ToponogovHinge> {
    let o = GeodesicOptions::default();
    let g1 = shoot_with(spec, hinge.apex, hinge.alpha1, hinge.l1, &o)?;
    let g2 = shoot_with(spec, hinge.apex, hinge.alpha2, hinge.l2, &o)?;
    let ends = [g1.end().point(), g2.end().point()];
    let closing = connect_with(spec, ends[0], ends[1], &ConnectOptions::default())?;
    let d_flat = hinge.flat_distance();
    let meets = meets_curvature(spec, &g1) || meets_curvature(spec, &g2) || meets_curvature(spec, &closing.geodesic);
    Ok(ToponogovHinge {
        hinge,
        gamma: hinge.gamma(),
        ends,
        d_m: closing.distance,
        d_flat,
        gap: d_flat - closing.distance,
        meets_curvature: meets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_is_constant_for_orthogonal_probe() {
        let x = PointDev::new(10.0, 10.0);
        let y = PointDev::new(10.0, 11.0);
        let (a, b) = (PointDev::new(-10.0, 0.5), PointDev::new(10.0, 0.5));
        for i in 0..=10 {
            assert_eq!(flat_baseline(x, y, a, b, i as f64 / 10.0), -10.0);
        }
        let tilted = PointDev::new(10.0, 1.0);
        let d = flat_baseline(x, y, a, tilted, 1.0) - flat_baseline(x, y, a, tilted, 0.0);
        assert!(d.abs() > 0.1);
    }

    #[test]
    fn projection_is_orthogonal() {
        let xi = Tangent::new(3.2, -7.1);
        let e = project_out(Tangent::new(0.3, 1.9), xi);
        assert!(e.dot(&xi).abs() <= 1e-12);
    }
}
