//! Geodesic boundary-value problem: `log_x(y)`, the cost `c = dist²/2` and
//! its second derivative in the first slot.
//!
//! Newton iterations run on `(L, α)` using the Jacobi field for the
//! transversal derivative; every seed (chart straight lines on both sides of
//! the apex, the closed-form spherical log, optional multi-start angles)
//! is refined and the shortest converged geodesic wins.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::geodesic::{shoot_with, Geodesic, GeodesicOptions};
use crate::surface::{wrap_pi, PointPolar, SurfaceSpec, Tangent};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConnectOptions {
    pub geodesic: GeodesicOptions,
    /// Target endpoint miss, relative to `1 + L`.
    pub tol: f64,
    /// Miss accepted when Newton stagnates.
    pub tol_stall: f64,
    pub max_iter: usize,
    /// Distinct geodesics closer than this in length raise [`Error::AmbiguousCut`].
    pub ambiguity: f64,
    /// Number of extra initial angles tried (0 disables the scan).
    pub multistart: usize,
    pub extra_seeds: Vec<Tangent>,
}

impl Default for ConnectOptions {
    fn default() -> Self {
        Self {
            geodesic: GeodesicOptions::default(),
            tol: 1e-13,
            tol_stall: 1e-10,
            max_iter: 60,
            ambiguity: 1e-9,
            multistart: 0,
            extra_seeds: Vec::new(),
        }
    }
}

/// Evidence that the returned geodesic is minimizing.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MinimalityEvidence {
    /// No conjugate point in `(0, L]`.
    pub jacobi_positive: bool,
    /// Length gap to the next distinct candidate found by the multi-start
    /// scan; infinite when every start converged to the same geodesic.
    pub scan_margin: Option<f64>,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectResult {
    pub from: PointPolar,
    pub to: PointPolar,
    pub distance: f64,
    /// `log_x(y)` in the orthonormal frame at `x`.
    pub velocity: Tangent,
    pub geodesic: Geodesic,
    /// Final endpoint miss.
    pub residual: f64,
    pub evidence: MinimalityEvidence,
}

fn same_point(x: PointPolar, y: PointPolar) -> bool {
    x.r == y.r && (x.r == 0.0 || wrap_pi(x.theta - y.theta) == 0.0)
}

fn miss(x: &Geodesic, y: PointPolar) -> (f64, f64, f64) {
    let e = x.end();
    let er = e.r - y.r;
    let et = e.phi * wrap_pi(e.theta - y.theta);
    (er, et, er.hypot(et))
}

/// Newton on `(L, α)` from `seed`.
fn refine(spec: &SurfaceSpec, x: PointPolar, y: PointPolar, seed: Tangent, opts: &ConnectOptions) -> Result<(Geodesic, f64)> {
    let mut len = seed.norm().max(1e-9);
    let mut alpha = seed.angle();
    let mut g = shoot_with(spec, x, alpha, len, &opts.geodesic)?;
    let (mut er, mut et, mut res) = miss(&g, y);
    let mut best = res;
    for _ in 0..opts.max_iter {
        if res <= opts.tol * (1.0 + len) {
            return Ok((g, res));
        }
        let e = g.end();
        let v = e.velocity();
        let j = e.jacobi;
        if j.abs() < 1e-12 {
            return Err(Error::NoConvergence { residual: res });
        }
        let mut dl = -(er * v.radial + et * v.circ);
        let mut da = -(-er * v.circ + et * v.radial) / j;
        let lim = 0.3;
        if da.abs() > lim {
            dl *= lim / da.abs();
            da = da.signum() * lim;
        }
        dl = dl.max(-0.5 * len);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (nl, na) = (len + lambda * dl, alpha + lambda * da);
            if let Ok(ng) = shoot_with(spec, x, na, nl, &opts.geodesic) {
                let (ner, net, nres) = miss(&ng, y);
                if nres < res {
                    len = nl;
                    alpha = na;
                    g = ng;
                    er = ner;
                    et = net;
                    res = nres;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        best = best.min(res);
    }
    if res <= opts.tol_stall * (1.0 + len) {
        Ok((g, res))
    } else {
        Err(Error::NoConvergence { residual: best.min(res) })
    }
}

fn zero_result(spec: &SurfaceSpec, x: PointPolar, y: PointPolar, opts: &ConnectOptions) -> Result<ConnectResult> {
    let geodesic = shoot_with(spec, x, 0.0, 0.0, &opts.geodesic)?;
    Ok(ConnectResult {
        from: x,
        to: y,
        distance: 0.0,
        velocity: Tangent::default(),
        geodesic,
        residual: 0.0,
        evidence: MinimalityEvidence { jacobi_positive: true, scan_margin: None, candidates: 1 },
    })
}

/// Minimizing geodesic from `x` to `y`.
pub fn connect(spec: &SurfaceSpec, x: PointPolar, y: PointPolar) -> Result<ConnectResult> {
    connect_with(spec, x, y, &ConnectOptions::default())
}

pub fn connect_with(spec: &SurfaceSpec, x: PointPolar, y: PointPolar, opts: &ConnectOptions) -> Result<ConnectResult> {
    if same_point(x, y) {
        return zero_result(spec, x, y, opts);
    }
    let mut seeds = spec.seed_tangents(x, y);
    seeds.extend_from_slice(&opts.extra_seeds);
    let base_len = seeds.first().map_or(1.0, |s| s.norm().max(1e-6));
    for k in 0..opts.multistart {
        let a = TAU * (k as f64 + 0.5) / opts.multistart as f64;
        seeds.push(Tangent::from_angle(a, base_len));
    }
    let mut found: Vec<(Geodesic, f64)> = Vec::new();
    let mut last_err = None;
    for seed in seeds {
        match refine(spec, x, y, seed, opts) {
            Ok((g, res)) => {
                let dup = found.iter().any(|(h, _)| {
                    (h.length - g.length).abs() < 1e-7 * (1.0 + g.length)
                        && wrap_pi(h.alpha - g.alpha).abs() < 1e-6
                });
                if !dup {
                    found.push((g, res));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if found.is_empty() {
        return Err(last_err.unwrap_or(Error::NoConvergence { residual: f64::INFINITY }));
    }
    found.sort_by(|a, b| a.0.length.total_cmp(&b.0.length));
    let candidates = found.len();
    let margin = found.get(1).map(|s| s.0.length - found[0].0.length);
    let mut results = found.into_iter().map(|(g, res)| {
        let jacobi_positive = g.jacobi_zero(g.length * (1.0 - 1e-12)).is_none();
        ConnectResult {
            from: x,
            to: y,
            distance: g.length,
            velocity: g.initial_vector(),
            residual: res,
            geodesic: g,
            evidence: MinimalityEvidence {
                jacobi_positive,
                scan_margin: if opts.multistart > 0 { Some(margin.unwrap_or(f64::INFINITY)) } else { None },
                candidates,
            },
        }
    });
    let best = results.next().unwrap();
    if let Some(second) = results.next() {
        if second.distance - best.distance < opts.ambiguity {
            return Err(Error::AmbiguousCut { first: Box::new(best), second: Box::new(second) });
        }
    }
    Ok(best)
}

/// `c(x, y) = dist(x, y)² / 2`.
pub fn cost(spec: &SurfaceSpec, x: PointPolar, y: PointPolar) -> Result<f64> {
    let d = connect(spec, x, y)?.distance;
    Ok(0.5 * d * d)
}

pub(crate) fn cost_with(spec: &SurfaceSpec, x: PointPolar, y: PointPolar, opts: &ConnectOptions) -> Result<f64> {
    let d = connect_with(spec, x, y, opts)?.distance;
    Ok(0.5 * d * d)
}

/// Finite-difference second derivative of the cost.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HessianEstimate {
    /// `D²ₓₓc(x, x̄)[η, η]`.
    pub value: f64,
    pub error: f64,
    /// Base step `h` along `η/|η|`.
    pub step: f64,
}

/// Five-point second difference of `s ↦ c(exp_x(s η/|η|), x̄)`, Richardson
/// extrapolated over `h` and `h/2`, scaled by `|η|²`.
pub fn hessian_cost(spec: &SurfaceSpec, x: PointPolar, xbar: PointPolar, eta: Tangent) -> Result<HessianEstimate> {
    hessian_cost_with(spec, x, xbar, eta, None, &ConnectOptions::default())
}

pub fn hessian_cost_with(
    spec: &SurfaceSpec,
    x: PointPolar,
    xbar: PointPolar,
    eta: Tangent,
    step: Option<f64>,
    opts: &ConnectOptions,
) -> Result<HessianEstimate> {
    let n = eta.norm();
    if !(n > 0.0) {
        return Err(Error::InvalidParameter("test direction must be non-zero".into()));
    }
    let u = eta.scale(1.0 / n);
    let f0 = cost_with(spec, x, xbar, opts)?;
    let h = step.unwrap_or_else(|| 1e-3 * (2.0 * f0).sqrt().max(1.0));
    let shift = |s: f64| -> Result<f64> {
        let dir = if s < 0.0 { u.angle() + core::f64::consts::PI } else { u.angle() };
        let q = shoot_with(spec, x, dir, s.abs(), &opts.geodesic)?.end().point();
        cost_with(spec, q, xbar, opts)
    };
    let mut v = [0.0; 6];
    for (i, s) in [-2.0 * h, -h, -0.5 * h, 0.5 * h, h, 2.0 * h].into_iter().enumerate() {
        v[i] = shift(s)?;
    }
    let [m2, m1, mh, ph, p1, p2] = v;
    let d_h = (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h * h);
    let hh = 0.5 * h;
    let d_hh = (-p1 + 16.0 * ph - 30.0 * f0 + 16.0 * mh - m1) / (12.0 * hh * hh);
    let rich = (16.0 * d_hh - d_h) / 15.0;
    // eight ulps of cost noise through the stencil weights
    let noise = 64.0 / 12.0 * 8.0 * f64::EPSILON * (1.0 + f0) / (hh * hh);
    Ok(HessianEstimate { value: rich * n * n, error: ((rich - d_hh).abs() + noise) * n * n, step: h })
}

/// One sample of a [`CutScan`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CutSample {
    pub s: f64,
    pub distance: Option<f64>,
    pub ambiguous: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CutScan {
    pub alpha: f64,
    pub samples: Vec<CutSample>,
    /// First `s` whose endpoint is reached by something shorter than `s - 1e-7`
    /// (or ambiguously), located to `1e-6 (1 + s)`.
    pub first_cut: Option<f64>,
}

/// Walks the geodesic from `x` in direction `alpha` and compares the arclength
/// with the distance recomputed by [`connect`]. The first flagged grid
/// interval is refined by bisection.
pub fn cut_point_scan(spec: &SurfaceSpec, x: PointPolar, alpha: f64, s_grid: &[f64]) -> Result<CutScan> {
    let s_max = s_grid.iter().copied().fold(0.0, f64::max);
    let g = shoot_with(spec, x, alpha, s_max, &GeodesicOptions::default())?;
    let sample_at = |s: f64| {
        let p = g.point(s);
        let opts = ConnectOptions { extra_seeds: alloc::vec![Tangent::from_angle(alpha, s)], ..Default::default() };
        match connect_with(spec, x, p, &opts) {
            Ok(r) => CutSample { s, distance: Some(r.distance), ambiguous: false, error: None },
            Err(Error::AmbiguousCut { first, .. }) => CutSample { s, distance: Some(first.distance), ambiguous: true, error: None },
            Err(e) => CutSample { s, distance: None, ambiguous: false, error: Some(alloc::format!("{e}")) },
        }
    };
    let is_cut = |c: &CutSample| c.ambiguous || c.distance.is_some_and(|d| d < c.s - 1e-7);
    let mut samples = Vec::with_capacity(s_grid.len());
    let mut first_cut = None;
    let mut last_clean = 0.0;
    for &s in s_grid {
        let sample = sample_at(s);
        if first_cut.is_none() {
            if is_cut(&sample) {
                let (mut lo, mut hi) = (last_clean, s);
                while hi - lo > 1e-6 * (1.0 + s) {
                    let mid = 0.5 * (lo + hi);
                    let c = sample_at(mid);
                    if is_cut(&c) {
                        hi = mid;
                    } else if c.error.is_none() {
                        lo = mid;
                    } else {
                        break;
                    }
                }
                first_cut = Some(hi);
            } else if sample.error.is_none() {
                last_clean = s;
            }
        }
        samples.push(sample);
    }
    Ok(CutScan { alpha, samples, first_cut })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{make_plane, make_sphere, PointDev};

    #[test]
    fn plane_unit_distance() {
        let p = make_plane();
        let x = p.dev_to_polar(PointDev::new(10.0, 10.0)).unwrap();
        let y = p.dev_to_polar(PointDev::new(10.0, 11.0)).unwrap();
        let r = connect(&p, x, y).unwrap();
        assert!((r.distance - 1.0).abs() < 1e-12);
        assert!((cost(&p, x, y).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(cost(&p, x, x).unwrap(), 0.0);
    }

    #[test]
    fn sphere_hessian_circumferential() {
        // distance 1 along a meridian; η perpendicular to it
        let s = make_sphere(1.0).unwrap();
        let x = PointPolar::new(1.0, 0.0);
        let xb = PointPolar::new(2.0, 0.0);
        let h = hessian_cost(&s, x, xb, Tangent::new(0.0, 1.0)).unwrap();
        let d: f64 = 1.0;
        assert!((h.value - d * d.cos() / d.sin()).abs() < 1e-6, "{h:?}");
    }

    #[test]
    fn sphere_antipode_is_ambiguous() {
        let s = make_sphere(1.0).unwrap();
        let x = PointPolar::new(1.0, 0.0);
        let y = PointPolar::new(core::f64::consts::PI - 1.0, core::f64::consts::PI);
        let opts = ConnectOptions { multistart: 8, ..Default::default() };
        assert!(matches!(connect_with(&s, x, y, &opts), Err(Error::AmbiguousCut { .. })));
    }
}
