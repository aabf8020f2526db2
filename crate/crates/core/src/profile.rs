//! Warp profiles `φ(r)` of radially symmetric metrics `dr² + φ(r)² dθ²`.
//!
//! A profile is a contiguous list of [`Zone`]s. Zones with linear `φ` are
//! flat (`K = 0`) and geodesics cross them in closed form; the remaining
//! zones are either closed-form (`Sine`, `Blend`) or densely sampled from the
//! warp equation `φ'' = -K φ`.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use alloc::vec::Vec;

use crate::hermite::quintic;
use crate::ode::Dop853;
use crate::{Error, Result};

/// Node table of a numerically integrated profile.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampledZone {
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    /// Prescribed curvature at the nodes; `φ'' = -k φ` there.
    pub k: Vec<f64>,
    /// Closed form of the prescribed curvature, when known.
    pub law: Option<CurvatureLaw>,
}

/// Analytic curvature laws that sampled zones can carry.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CurvatureLaw {
    /// `A exp(-1/(1 - (r/r₁)²))` on `[0, r₁)`.
    Bump { amplitude: f64, support: f64 },
    /// Bump plus `ε (1 + r²)⁻²`.
    BumpPlusDecay { amplitude: f64, support: f64, epsilon: f64 },
}

impl CurvatureLaw {
    pub fn eval(&self, r: f64) -> f64 {
        let bump = |a: f64, r1: f64| {
            let u = r / r1;
            let d = 1.0 - u * u;
            if d <= 0.0 {
                0.0
            } else {
                a * (-1.0 / d).exp()
            }
        };
        match *self {
            CurvatureLaw::Bump { amplitude, support } => bump(amplitude, support),
            CurvatureLaw::BumpPlusDecay { amplitude, support, epsilon } => {
                let q = 1.0 + r * r;
                bump(amplitude, support) + epsilon / (q * q)
            }
        }
    }
}

impl SampledZone {
    fn start(&self) -> f64 {
        self.r[0]
    }

    fn end(&self) -> f64 {
        *self.r.last().unwrap()
    }

    fn eval(&self, r: f64) -> [f64; 3] {
        let n = self.r.len();
        let i = match self.r.partition_point(|&x| x <= r) {
            0 => 0,
            j if j >= n => n - 2,
            j => j - 1,
        };
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        let a = [self.phi[i], self.dphi[i], -self.k[i] * self.phi[i]];
        let b = [self.phi[i + 1], self.dphi[i + 1], -self.k[i + 1] * self.phi[i + 1]];
        quintic(r0, r1 - r0, a, b, r)
    }

    fn curvature(&self, r: f64) -> f64 {
        if let Some(law) = &self.law {
            return law.eval(r);
        }
        // even extension below the first node
        let r1 = self.r[1];
        if self.r[0] == 0.0 && r < r1 {
            let k1 = self.k[1];
            let k0 = self.k[0];
            let u = r / r1;
            return k0 + (k1 - k0) * u * u;
        }
        let [p, _, pp] = self.eval(r);
        -pp / p
    }
}

/// One piece of a profile, valid on `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Zone {
    /// `φ(r) = phi0 + slope (r - r0)`; `r1` may be infinite.
    Linear { r0: f64, r1: f64, phi0: f64, slope: f64 },
    /// `φ(r) = sin(√k r)/√k` (round sphere of curvature `k`).
    Sine { curvature: f64, r1: f64 },
    /// `φ'` moves from `slope0` to `slope1` along a quintic smoothstep.
    Blend { r0: f64, width: f64, phi0: f64, slope0: f64, slope1: f64 },
    Sampled(SampledZone),
}

impl Zone {
    pub fn start(&self) -> f64 {
        match self {
            Zone::Linear { r0, .. } | Zone::Blend { r0, .. } => *r0,
            Zone::Sine { .. } => 0.0,
            Zone::Sampled(s) => s.start(),
        }
    }

    pub fn end(&self) -> f64 {
        match self {
            Zone::Linear { r1, .. } | Zone::Sine { r1, .. } => *r1,
            Zone::Blend { r0, width, .. } => r0 + width,
            Zone::Sampled(s) => s.end(),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, Zone::Linear { .. })
    }

    /// `[φ, φ', φ'']` at `r` (extrapolated outside the zone).
    pub fn eval(&self, r: f64) -> [f64; 3] {
        match *self {
            Zone::Linear { r0, phi0, slope, .. } => [phi0 + slope * (r - r0), slope, 0.0],
            Zone::Sine { curvature, .. } => {
                let c = curvature.sqrt();
                let (s, co) = (c * r).sin_cos();
                [s / c, co, -c * s]
            }
            Zone::Blend { r0, width, phi0, slope0, slope1 } => {
                let u = ((r - r0) / width).clamp(0.0, 1.0);
                let ds = slope1 - slope0;
                let u2 = u * u;
                let u3 = u2 * u;
                let u4 = u3 * u;
                let step = 6.0 * u4 * u - 15.0 * u4 + 10.0 * u3;
                let step_int = u4 * u2 - 3.0 * u4 * u + 2.5 * u4;
                let step_d = 30.0 * u4 - 60.0 * u3 + 30.0 * u2;
                let base = phi0 + width * (slope0 * u + ds * step_int);
                // linear extrapolation outside the band
                let extra = r - (r0 + u * width);
                let slope = slope0 + ds * step;
                [base + slope * extra, slope, ds * step_d / width]
            }
            Zone::Sampled(ref s) => s.eval(r),
        }
    }

    pub fn curvature(&self, r: f64) -> f64 {
        match self {
            Zone::Linear { .. } => 0.0,
            Zone::Sine { curvature, .. } => *curvature,
            Zone::Sampled(s) => s.curvature(r),
            Zone::Blend { .. } => {
                let [p, _, pp] = self.eval(r);
                if p > 0.0 {
                    -pp / p
                } else {
                    0.0
                }
            }
        }
    }
}

/// A warp profile; `φ(0) = 0`, `φ'(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadialProfile {
    zones: Vec<Zone>,
    /// `φ` returns to zero at the end of the domain (a second pole).
    closed: bool,
}

impl RadialProfile {
    pub fn new(zones: Vec<Zone>, closed: bool) -> Self {
        debug_assert!(!zones.is_empty());
        Self { zones, closed }
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Upper end of the radial domain (infinite for complete open profiles).
    pub fn r_end(&self) -> f64 {
        self.zones.last().unwrap().end()
    }

    /// Index of the zone containing `r`; on a boundary the zone in the
    /// direction of travel wins.
    pub fn zone_index(&self, r: f64, outward: bool) -> usize {
        let last = self.zones.len() - 1;
        for (i, z) in self.zones.iter().enumerate() {
            let e = z.end();
            if (outward && r < e) || (!outward && r <= e) {
                return i;
            }
        }
        last
    }

    pub fn zone(&self, i: usize) -> &Zone {
        &self.zones[i]
    }

    /// `[φ, φ', φ'']`; odd extension for `r < 0`.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        if r < 0.0 {
            let [p, d, s] = self.eval(-r);
            return [-p, d, -s];
        }
        self.zones[self.zone_index(r, true)].eval(r)
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.eval(r)[0]
    }

    pub fn dphi(&self, r: f64) -> f64 {
        self.eval(r)[1]
    }

    /// Gaussian curvature `-φ''/φ`, with the apex value taken as a limit.
    pub fn curvature(&self, r: f64) -> f64 {
        let r = r.abs();
        self.zones[self.zone_index(r, true)].curvature(r)
    }

    /// Slope of the outermost zone when it is an unbounded linear zone.
    pub fn asymptotic_slope(&self) -> Option<f64> {
        match self.zones.last() {
            Some(Zone::Linear { r1, slope, .. }) if r1.is_infinite() => Some(*slope),
            _ => None,
        }
    }

    /// Largest `K` over a uniform grid of each curved zone.
    pub fn max_curvature(&self, samples_per_zone: usize) -> f64 {
        self.grid_extreme(samples_per_zone, f64::max, f64::NEG_INFINITY)
    }

    pub fn min_curvature(&self, samples_per_zone: usize) -> f64 {
        self.grid_extreme(samples_per_zone, f64::min, f64::INFINITY)
    }

    fn grid_extreme(&self, n: usize, pick: fn(f64, f64) -> f64, init: f64) -> f64 {
        let mut acc = init;
        for z in &self.zones {
            if z.is_flat() {
                acc = pick(acc, 0.0);
                continue;
            }
            let (a, b) = (z.start(), z.end());
            for i in 0..=n {
                let r = a + (b - a) * i as f64 / n as f64;
                let k = z.curvature(r);
                if k.is_finite() {
                    acc = pick(acc, k);
                }
            }
        }
        acc
    }
}

/// Sampling controls for [`profile_from_curvature`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfileOptions {
    /// Node spacing near the apex; spacing grows like `h0 max(1, r)`.
    pub h0: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { h0: 1e-3, rtol: 1e-14, atol: 1e-16 }
    }
}

pub(crate) fn sample_curvature<K: Fn(f64) -> f64>(
    k: &K,
    r_end: f64,
    opts: &ProfileOptions,
) -> Result<SampledZone> {
    if !(r_end > 0.0) || !r_end.is_finite() {
        return Err(Error::InvalidParameter("profile domain must be a finite positive length".into()));
    }
    let solver = Dop853::new(opts.rtol, opts.atol);
    let rhs = |r: f64, y: &[f64; 2]| [y[1], -k(r) * y[0]];
    let mut zone = SampledZone { r: Vec::new(), phi: Vec::new(), dphi: Vec::new(), k: Vec::new(), law: None };
    let mut r = 0.0;
    let mut y = [0.0, 1.0];
    zone.r.push(0.0);
    zone.phi.push(0.0);
    zone.dphi.push(1.0);
    zone.k.push(k(0.0));
    while r < r_end {
        let mut next = r + opts.h0 * r.max(1.0);
        if next > r_end - 0.25 * opts.h0 {
            next = r_end;
        }
        y = solver.integrate(&rhs, r, y, next).map_err(Error::Integrator)?;
        r = next;
        if y[0] <= 0.0 {
            return Err(Error::ProfileCollapse { radius: r });
        }
        zone.r.push(r);
        zone.phi.push(y[0]);
        zone.dphi.push(y[1]);
        zone.k.push(k(r));
    }
    Ok(zone)
}

/// Integrates `φ'' = -k φ`, `φ(0) = 0`, `φ'(0) = 1` on `[0, r_max]`.
///
/// Rejects profiles whose `φ` reaches zero inside the domain.
pub fn profile_from_curvature<K: Fn(f64) -> f64>(
    k: K,
    r_max: f64,
    opts: &ProfileOptions,
) -> Result<RadialProfile> {
    let zone = sample_curvature(&k, r_max, opts)?;
    Ok(RadialProfile::new(alloc::vec![Zone::Sampled(zone)], false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn zero_curvature_is_identity_warp() {
        let p = profile_from_curvature(|_| 0.0, 10.0, &ProfileOptions::default()).unwrap();
        for i in 0..=100 {
            let r = 0.1 * i as f64;
            assert!((p.phi(r) - r).abs() < 1e-13, "{r}");
            assert!((p.dphi(r) - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn unit_curvature_gives_sine() {
        let p = profile_from_curvature(|_| 1.0, 3.0, &ProfileOptions::default()).unwrap();
        assert!((p.phi(PI / 2.0) - 1.0).abs() < 1e-9);
        for i in 1..=60 {
            let r = 0.05 * i as f64;
            assert!((p.phi(r) - r.sin()).abs() < 1e-11);
            assert!((p.curvature(r) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn collapse_is_reported() {
        match profile_from_curvature(|_| 1.0, 4.0, &ProfileOptions::default()) {
            Err(Error::ProfileCollapse { radius }) => assert!((radius - PI).abs() < 0.01),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn blend_zone_matches_slopes() {
        let z = Zone::Blend { r0: 10.0, width: 2.0, phi0: 5.0, slope0: 0.5, slope1: -1.0 };
        let [p0, d0, s0] = z.eval(10.0);
        let [_, d1, s1] = z.eval(12.0);
        assert_eq!((p0, d0, s0), (5.0, 0.5, 0.0));
        assert!((d1 + 1.0).abs() < 1e-15 && s1.abs() < 1e-15);
        // derivative consistency
        let h = 1e-6;
        let fd = (z.eval(11.0 + h)[0] - z.eval(11.0 - h)[0]) / (2.0 * h);
        assert!((fd - z.eval(11.0)[1]).abs() < 1e-8);
        assert!(z.curvature(11.0) > 0.0);
    }
}
