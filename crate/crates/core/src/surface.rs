//! Surfaces of revolution used by the experiments: the smoothed flat cone,
//! its closed capped variant, a positively curved perturbation, and the
//! plane/sphere controls.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::profile::{sample_curvature, CurvatureLaw, ProfileOptions, RadialProfile, Zone};
use crate::quad;
use crate::{Error, Result};

/// `k(r) = A exp(-1/(1 - (r/r₁)²))` on `[0, r₁)`, zero beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvatureBump {
    pub amplitude: f64,
    pub support: f64,
}

impl CurvatureBump {
    pub fn new(amplitude: f64) -> Self {
        Self { amplitude, support: 1.0 }
    }

    pub fn eval(&self, r: f64) -> f64 {
        CurvatureLaw::Bump { amplitude: self.amplitude, support: self.support }.eval(r)
    }

    /// Value at the apex, `A/e`; also the maximum.
    pub fn peak(&self) -> f64 {
        self.amplitude * (-1.0f64).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Topology {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConeMode {
    /// Moderate deficit; minimality is checked directly instead of via `inj > 314`.
    Desk,
    /// Enforces `max K < 1e-4`.
    PaperStrict,
}

/// How a [`SurfaceSpec`] was built.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Construction {
    Plane,
    Sphere { curvature: f64 },
    Cone { theta: f64, mode: ConeMode, amplitude: f64 },
    Capped { theta: f64, amplitude: f64, cap_radius: f64, rounding_width: f64 },
    Perturbed { theta: f64, amplitude: f64, epsilon: f64, r_max: f64 },
    Custom,
}

/// Development chart: flat regions `φ = β (r + offset)` unroll onto the slit
/// plane with the removed sector centred on the direction `3π/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Chart {
    pub beta: f64,
    /// Development radius minus intrinsic radius.
    pub offset: f64,
}

/// Intrinsic polar coordinates; `theta` may be unwound.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointPolar {
    pub r: f64,
    pub theta: f64,
}

impl PointPolar {
    pub const fn new(r: f64, theta: f64) -> Self {
        Self { r, theta }
    }

    /// Same point with `theta` reduced to `[0, 2π)`.
    pub fn reduced(self) -> Self {
        Self { r: self.r, theta: reduce_angle(self.theta) }
    }
}

/// Cartesian coordinates of the slit development.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointDev {
    pub a: f64,
    pub b: f64,
}

impl PointDev {
    pub const fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }
}

/// Tangent vector in the orthonormal (radial, circumferential) frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tangent {
    pub radial: f64,
    pub circ: f64,
}

impl Tangent {
    pub const fn new(radial: f64, circ: f64) -> Self {
        Self { radial, circ }
    }

    pub fn from_angle(alpha: f64, len: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Self { radial: len * c, circ: len * s }
    }

    pub fn norm(&self) -> f64 {
        self.radial.hypot(self.circ)
    }

    pub fn angle(&self) -> f64 {
        self.circ.atan2(self.radial)
    }

    pub fn dot(&self, o: &Tangent) -> f64 {
        self.radial * o.radial + self.circ * o.circ
    }

    pub fn cross(&self, o: &Tangent) -> f64 {
        self.radial * o.circ - self.circ * o.radial
    }

    pub fn scale(&self, k: f64) -> Tangent {
        Tangent::new(self.radial * k, self.circ * k)
    }

    pub fn add(&self, o: &Tangent) -> Tangent {
        Tangent::new(self.radial + o.radial, self.circ + o.circ)
    }

    pub fn sub(&self, o: &Tangent) -> Tangent {
        Tangent::new(self.radial - o.radial, self.circ - o.circ)
    }

    /// Counter-clockwise quarter turn.
    pub fn perp(&self) -> Tangent {
        Tangent::new(-self.circ, self.radial)
    }
}

pub(crate) fn reduce_angle(theta: f64) -> f64 {
    let t = theta - TAU * (theta / TAU).floor();
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Wraps an angle difference into `(-π, π]`.
pub(crate) fn wrap_pi(d: f64) -> f64 {
    let mut t = d - TAU * (d / TAU).floor();
    if t > PI {
        t -= TAU;
    }
    t
}

impl Chart {
    pub const IDENTITY: Chart = Chart { beta: 1.0, offset: 0.0 };

    /// Half-angle `ϑ` of the removed sector.
    pub fn half_deficit(&self) -> f64 {
        PI * (1.0 - self.beta)
    }

    /// Development angle of the slit edge where intrinsic `θ = 0`.
    fn edge(&self) -> f64 {
        -FRAC_PI_2 + self.half_deficit()
    }

    /// Development polar angle of the intrinsic angle `theta`.
    pub fn dev_angle(&self, theta: f64) -> f64 {
        self.edge() + self.beta * reduce_angle(theta)
    }

    pub fn to_polar(&self, p: PointDev) -> Result<PointPolar> {
        let rho = p.a.hypot(p.b);
        if rho < self.offset {
            return Err(Error::InvalidParameter("point lies inside the chart hole around the apex".into()));
        }
        let edge = self.edge();
        let mut psi = p.b.atan2(p.a);
        if psi < edge {
            psi += TAU;
        }
        let width = TAU * self.beta;
        let span = psi - edge;
        // removed sector: (edge + 2πβ, edge + 2π)
        if span > width * (1.0 + 1e-15) && span < TAU {
            return Err(Error::InRemovedSector);
        }
        let mut theta = span.min(width) / self.beta;
        if theta >= TAU {
            theta = 0.0;
        }
        Ok(PointPolar { r: rho - self.offset, theta })
    }

    pub fn to_dev(&self, p: PointPolar) -> PointDev {
        let rho = p.r + self.offset;
        let (s, c) = self.dev_angle(p.theta).sin_cos();
        PointDev { a: rho * c, b: rho * s }
    }

    /// Tangent at `p` expressed in development Cartesian components.
    pub fn tangent_to_dev(&self, p: PointPolar, v: Tangent) -> [f64; 2] {
        let (s, c) = self.dev_angle(p.theta).sin_cos();
        [v.radial * c - v.circ * s, v.radial * s + v.circ * c]
    }

    pub fn tangent_from_dev(&self, p: PointPolar, w: [f64; 2]) -> Tangent {
        let (s, c) = self.dev_angle(p.theta).sin_cos();
        Tangent { radial: w[0] * c + w[1] * s, circ: -w[0] * s + w[1] * c }
    }
}

/// A radially symmetric surface `dr² + φ(r)² dθ²`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurfaceSpec {
    pub profile: RadialProfile,
    pub topology: Topology,
    pub construction: Construction,
    pub chart: Chart,
    /// Maximum curvature on a 10⁴-point grid per curved zone.
    pub max_curvature: f64,
}

const GRID: usize = 10_000;

impl SurfaceSpec {
    pub fn from_profile(profile: RadialProfile, construction: Construction, chart: Chart) -> Self {
        let topology = if profile.is_closed() { Topology::Closed } else { Topology::Open };
        let max_curvature = profile.max_curvature(GRID);
        Self { profile, topology, construction, chart, max_curvature }
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.profile.phi(r)
    }

    pub fn gaussian_curvature(&self, r: f64) -> f64 {
        self.profile.curvature(r)
    }

    pub fn min_curvature(&self) -> f64 {
        self.profile.min_curvature(GRID)
    }

    /// `2π ∫ K₊ φ dr` over the radial domain.
    pub fn total_positive_curvature(&self) -> f64 {
        let mut total = 0.0;
        for z in self.profile.zones() {
            if z.is_flat() {
                continue;
            }
            let (a, b) = (z.start(), z.end());
            let f = |r: f64| z.curvature(r).max(0.0) * z.eval(r)[0].max(0.0);
            let (v, _) = quad::integrate(f, a, b, 1e-10);
            total += v;
        }
        TAU * total
    }

    /// Curvature enclosed by the circle `r = radius`: `2π (1 - φ'(radius))`.
    pub fn disk_curvature(&self, radius: f64) -> f64 {
        TAU * (1.0 - self.profile.dphi(radius))
    }

    pub fn dev_to_polar(&self, p: PointDev) -> Result<PointPolar> {
        self.chart.to_polar(p)
    }

    pub fn polar_to_dev(&self, p: PointPolar) -> PointDev {
        self.chart.to_dev(p)
    }

    pub fn is_sphere(&self) -> Option<f64> {
        match self.construction {
            Construction::Sphere { curvature } => Some(curvature),
            _ => None,
        }
    }

    /// Initial guesses for `log_x(y)`.
    pub(crate) fn seed_tangents(&self, x: PointPolar, y: PointPolar) -> Vec<Tangent> {
        if let Some(k) = self.is_sphere() {
            return sphere_log_seeds(k, x, y);
        }
        let beta = self.chart.beta;
        let rx = x.r + self.chart.offset;
        let ry = y.r + self.chart.offset;
        let d = wrap_pi(y.theta - x.theta);
        let alt = if d >= 0.0 { d - TAU } else { d + TAU };
        let mut seeds = Vec::with_capacity(2);
        for (i, dt) in [d, alt].into_iter().enumerate() {
            let psi = beta * dt;
            if i > 0 && psi.abs() >= PI {
                continue;
            }
            let (s, c) = psi.sin_cos();
            seeds.push(Tangent::new(ry * c - rx, ry * s));
        }
        seeds
    }
}

fn sphere_embed(k: f64, p: PointPolar) -> [f64; 3] {
    let a = k.sqrt() * p.r;
    let (sa, ca) = a.sin_cos();
    let (st, ct) = p.theta.sin_cos();
    [sa * ct, sa * st, ca]
}

fn sphere_log_seeds(k: f64, x: PointPolar, y: PointPolar) -> Vec<Tangent> {
    let c = k.sqrt();
    let ux = sphere_embed(k, x);
    let uy = sphere_embed(k, y);
    let a = c * x.r;
    let (sa, ca) = a.sin_cos();
    let (st, ct) = x.theta.sin_cos();
    let er = [ca * ct, ca * st, -sa];
    let et = [-st, ct, 0.0];
    let dot = ux[0] * uy[0] + ux[1] * uy[1] + ux[2] * uy[2];
    let w = [uy[0] - dot * ux[0], uy[1] - dot * ux[1], uy[2] - dot * ux[2]];
    let wn = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let ang = wn.atan2(dot);
    if wn < 1e-300 {
        return vec![Tangent::new(0.0, 0.0)];
    }
    let dir = Tangent::new(
        (w[0] * er[0] + w[1] * er[1] + w[2] * er[2]) / wn,
        (w[0] * et[0] + w[1] * et[1] + w[2] * et[2]) / wn,
    );
    vec![dir.scale(ang / c), dir.scale(-(TAU - ang) / c)]
}

pub fn make_plane() -> SurfaceSpec {
    let profile = RadialProfile::new(
        vec![Zone::Linear { r0: 0.0, r1: f64::INFINITY, phi0: 0.0, slope: 1.0 }],
        false,
    );
    SurfaceSpec::from_profile(profile, Construction::Plane, Chart::IDENTITY)
}

/// Round sphere of curvature `delta`.
pub fn make_sphere(delta: f64) -> Result<SurfaceSpec> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter("sphere curvature must be positive".into()));
    }
    let profile = RadialProfile::new(vec![Zone::Sine { curvature: delta, r1: PI / delta.sqrt() }], true);
    Ok(SurfaceSpec::from_profile(profile, Construction::Sphere { curvature: delta }, Chart::IDENTITY))
}

/// `∫₀¹ e^{-1/(1-r²)} r dr = (e^{-1} - E₁(1))/2`.
const BUMP_FIRST_MOMENT: f64 = 0.074247753387961;

fn cone_slope(amplitude: f64, opts: &ProfileOptions) -> Result<f64> {
    let bump = CurvatureBump::new(amplitude);
    let solver = crate::ode::Dop853::new(opts.rtol, opts.atol);
    let rhs = |r: f64, y: &[f64; 2]| [y[1], -bump.eval(r) * y[0]];
    let y = solver.integrate(&rhs, 0.0, [0.0, 1.0], 1.0).map_err(Error::Integrator)?;
    Ok(y[1])
}

/// Secant iteration for the amplitude whose cone slope is `1 - ϑ/π`.
pub(crate) fn calibrate_amplitude(theta: f64, opts: &ProfileOptions) -> Result<f64> {
    let target = 1.0 - theta / PI;
    let mut a0 = theta / PI / BUMP_FIRST_MOMENT;
    let mut a1 = a0 * 1.02;
    let mut g0 = cone_slope(a0, opts)? - target;
    let mut g1 = cone_slope(a1, opts)? - target;
    for it in 0..60 {
        if g1.abs() <= 1e-12 * 0.01 {
            return Ok(a1);
        }
        let denom = g1 - g0;
        if denom == 0.0 {
            // flat secant at roundoff; accept if already within tolerance
            if g1.abs() <= 1e-12 {
                return Ok(a1);
            }
            return Err(Error::CalibrationFailed { iterations: it, residual: g1.abs() });
        }
        let a2 = a1 - g1 * (a1 - a0) / denom;
        a0 = a1;
        g0 = g1;
        a1 = a2;
        g1 = cone_slope(a1, opts)? - target;
    }
    if g1.abs() <= 1e-12 {
        Ok(a1)
    } else {
        Err(Error::CalibrationFailed { iterations: 60, residual: g1.abs() })
    }
}

fn cone_zones(theta: f64, opts: &ProfileOptions) -> Result<(f64, crate::profile::SampledZone)> {
    let amplitude = calibrate_amplitude(theta, opts)?;
    let bump = CurvatureBump::new(amplitude);
    let mut zone = sample_curvature(&|r| bump.eval(r), 1.0, opts)?;
    zone.law = Some(CurvatureLaw::Bump { amplitude, support: bump.support });
    Ok((amplitude, zone))
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..FRAC_PI_2).contains(&theta) || !theta.is_finite() {
        return Err(Error::InvalidParameter("theta out of range (0, π/2)".into()));
    }
    Ok(())
}

/// The smoothed cone of total angle `2π - 2ϑ`: curvature bump on `r < 1`,
/// flat outside, amplitude calibrated so the outer slope is `1 - ϑ/π`.
pub fn make_flattened_cone(theta: f64, mode: ConeMode) -> Result<SurfaceSpec> {
    make_flattened_cone_with(theta, mode, &ProfileOptions::default())
}

pub fn make_flattened_cone_with(theta: f64, mode: ConeMode, opts: &ProfileOptions) -> Result<SurfaceSpec> {
    check_theta(theta)?;
    if theta == 0.0 {
        let mut spec = make_plane();
        spec.construction = Construction::Cone { theta, mode, amplitude: 0.0 };
        return Ok(spec);
    }
    let (amplitude, zone) = cone_zones(theta, opts)?;
    let bump = CurvatureBump::new(amplitude);
    if mode == ConeMode::PaperStrict && bump.peak() >= 1e-4 {
        return Err(Error::StrictCurvatureBound { max_curvature: bump.peak() });
    }
    let phi1 = *zone.phi.last().unwrap();
    let beta = *zone.dphi.last().unwrap();
    let profile = RadialProfile::new(
        vec![
            Zone::Sampled(zone),
            Zone::Linear { r0: 1.0, r1: f64::INFINITY, phi0: phi1, slope: beta },
        ],
        false,
    );
    let chart = Chart { beta, offset: phi1 / beta - 1.0 };
    Ok(SurfaceSpec::from_profile(profile, Construction::Cone { theta, mode, amplitude }, chart))
}

/// Closed variant: the cone up to `cap_radius - rounding_width`, a convex
/// rounding band on which `φ'` turns from `β` to `-1`, then a flat disk.
pub fn make_capped_closed(theta: f64, cap_radius: f64, rounding_width: f64) -> Result<SurfaceSpec> {
    check_theta(theta)?;
    if theta == 0.0 {
        return Err(Error::InvalidParameter("capped surface needs theta > 0".into()));
    }
    if !(rounding_width > 0.0) || !(cap_radius - rounding_width > 1.0) {
        return Err(Error::InvalidParameter("need cap_radius - rounding_width > 1 and rounding_width > 0".into()));
    }
    let opts = ProfileOptions::default();
    let (amplitude, zone) = cone_zones(theta, &opts)?;
    let phi1 = *zone.phi.last().unwrap();
    let beta = *zone.dphi.last().unwrap();
    let band_start = cap_radius - rounding_width;
    let phi_band = phi1 + beta * (band_start - 1.0);
    let band = Zone::Blend { r0: band_start, width: rounding_width, phi0: phi_band, slope0: beta, slope1: -1.0 };
    let phi_cap = band.eval(cap_radius)[0];
    if !(phi_cap > 0.0) {
        return Err(Error::NegativeCurvature);
    }
    // φ must stay positive across the band
    for i in 0..=1000 {
        let r = band_start + rounding_width * i as f64 / 1000.0;
        if band.eval(r)[0] <= 0.0 {
            return Err(Error::NegativeCurvature);
        }
    }
    let pole = cap_radius + phi_cap;
    let profile = RadialProfile::new(
        vec![
            Zone::Sampled(zone),
            Zone::Linear { r0: 1.0, r1: band_start, phi0: phi1, slope: beta },
            band,
            Zone::Linear { r0: cap_radius, r1: pole, phi0: phi_cap, slope: -1.0 },
        ],
        true,
    );
    let chart = Chart { beta, offset: phi1 / beta - 1.0 };
    let construction = Construction::Capped { theta, amplitude, cap_radius, rounding_width };
    Ok(SurfaceSpec::from_profile(profile, construction, chart))
}

/// Perturbation radius used by [`perturb_positive`].
pub const PERTURBED_RADIUS: f64 = 200.0;

/// Adds `ε (1 + r²)⁻²` to the curvature of an open cone (or plane).
/// `ε = 0` returns the input unchanged.
pub fn perturb_positive(spec: &SurfaceSpec, epsilon: f64) -> Result<SurfaceSpec> {
    perturb_positive_with(spec, epsilon, PERTURBED_RADIUS, &ProfileOptions::default())
}

pub fn perturb_positive_with(
    spec: &SurfaceSpec,
    epsilon: f64,
    r_max: f64,
    opts: &ProfileOptions,
) -> Result<SurfaceSpec> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter("epsilon must be non-negative".into()));
    }
    let (theta, amplitude) = match spec.construction {
        Construction::Cone { theta, amplitude, .. } => (theta, amplitude),
        Construction::Plane => (0.0, 0.0),
        _ => return Err(Error::Unsupported("perturbation is implemented for open cones and the plane")),
    };
    if epsilon == 0.0 {
        return Ok(spec.clone());
    }
    let law = CurvatureLaw::BumpPlusDecay { amplitude, support: 1.0, epsilon };
    let mut zone = sample_curvature(&|r| law.eval(r), r_max, opts)?;
    zone.law = Some(law);
    let slope = *zone.dphi.last().unwrap();
    if !(slope > 0.0) {
        return Err(Error::CompletenessBudget { slope });
    }
    let profile = RadialProfile::new(vec![Zone::Sampled(zone)], false);
    let construction = Construction::Perturbed { theta, amplitude, epsilon, r_max };
    Ok(SurfaceSpec::from_profile(profile, construction, spec.chart))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slit_edges_are_adjacent() {
        let chart = Chart { beta: 1.0 - 0.02 / PI, offset: 0.0 };
        let th = chart.half_deficit();
        let edge_angle = 1.5 * PI + th;
        let eps = 1e-9;
        let right = PointDev::new(5.0 * (edge_angle + eps).cos(), 5.0 * (edge_angle + eps).sin());
        let left_angle = 1.5 * PI - th;
        let left = PointDev::new(5.0 * (left_angle - eps).cos(), 5.0 * (left_angle - eps).sin());
        let pr = chart.to_polar(right).unwrap();
        let pl = chart.to_polar(left).unwrap();
        assert!(pr.theta < 1e-6, "{pr:?}");
        assert!(TAU - pl.theta < 1e-6, "{pl:?}");
        // metric distance across the slit ~ 5 * β * Δθ
        let gap = 5.0 * chart.beta * wrap_pi(pr.theta - pl.theta).abs();
        assert!(gap < 1e-7);
        let inside = PointDev::new(0.0, -5.0);
        assert!(matches!(chart.to_polar(inside), Err(Error::InRemovedSector)));
    }

    #[test]
    fn dev_round_trip() {
        let chart = Chart { beta: 0.99, offset: 0.003 };
        let p = PointDev::new(10.0, 10.0);
        let q = chart.to_polar(p).unwrap();
        assert!((q.r + chart.offset - 200f64.sqrt()).abs() < 1e-14);
        let back = chart.to_dev(q);
        assert!((back.a - 10.0).abs() < 1e-12 && (back.b - 10.0).abs() < 1e-12);
    }

    #[test]
    fn bump_shape() {
        let b = CurvatureBump::new(2.0);
        assert_eq!(b.eval(1.0), 0.0);
        assert_eq!(b.eval(1.5), 0.0);
        assert!(b.eval(0.999) > 0.0);
        assert!((b.eval(0.3) - b.eval(-0.3)).abs() == 0.0);
        assert!((b.eval(0.0) - b.peak()).abs() < 1e-15);
    }

    #[test]
    fn theta_out_of_range() {
        let e = make_flattened_cone(2.0, ConeMode::Desk).unwrap_err();
        assert!(alloc::format!("{e}").contains("theta out of range"));
    }
}
