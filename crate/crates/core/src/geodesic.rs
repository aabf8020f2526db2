//! Arclength-parameterized geodesics with their Jacobi field `J(0) = 0,
//! J'(0) = 1`.
//!
//! A path is a chain of pieces, one per zone visited. In flat zones the
//! geodesic is a straight line of the local development; on the round sphere
//! it is a great circle. Everywhere else the state
//! `[r, θ, r', θ', J, J']` is advanced with [`Dop853`] and stored as nodes
//! for quintic Hermite dense output. `θ` is never reduced.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::connect::{connect_with, ConnectOptions};
use crate::hermite::quintic;
use crate::ode::Dop853;
use crate::profile::Zone;
use crate::surface::{PointPolar, SurfaceSpec, Tangent};
use crate::{Error, Result};

/// Smallest radius a trajectory may reach near the apex.
pub const APEX_GUARD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeodesicOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest integrator step at `r ≥ 1`, scaled by `r` below; bounds the
    /// dense-output spacing.
    pub h_max: f64,
    pub max_steps: usize,
    pub apex_guard: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-13, h_max: 0.02, max_steps: 500_000, apex_guard: APEX_GUARD }
    }
}

impl GeodesicOptions {
    /// Both tolerances multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self { rtol: self.rtol * factor, atol: self.atol * factor, ..self }
    }
}

/// Position, velocity and Jacobi field at one arclength.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeodesicState {
    pub r: f64,
    /// Unwound polar angle.
    pub theta: f64,
    pub dr: f64,
    pub dtheta: f64,
    /// `φ(r)`.
    pub phi: f64,
    pub jacobi: f64,
    pub djacobi: f64,
}

impl GeodesicState {
    pub fn point(&self) -> PointPolar {
        PointPolar::new(self.r, self.theta)
    }

    /// Velocity in the orthonormal (radial, circumferential) frame.
    pub fn velocity(&self) -> Tangent {
        Tangent::new(self.dr, self.phi * self.dtheta)
    }

    pub fn speed(&self) -> f64 {
        self.velocity().norm()
    }

    pub fn clairaut(&self) -> f64 {
        self.phi * self.phi * self.dtheta
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LinePiece {
    s0: f64,
    s1: f64,
    slope: f64,
    zone_r0: f64,
    zone_phi0: f64,
    r_start: f64,
    theta0: f64,
    p0: [f64; 2],
    v: [f64; 2],
    j0: f64,
    dj0: f64,
}

impl LinePiece {
    fn eval(&self, s: f64) -> GeodesicState {
        let u = s - self.s0;
        let p = [self.p0[0] + u * self.v[0], self.p0[1] + u * self.v[1]];
        let jacobi = self.j0 + self.dj0 * u;
        if self.slope == 0.0 {
            let phi = self.zone_phi0;
            return GeodesicState {
                r: self.r_start + p[0],
                theta: self.theta0 + p[1] / phi,
                dr: self.v[0],
                dtheta: self.v[1] / phi,
                phi,
                jacobi,
                djacobi: self.dj0,
            };
        }
        let m = self.slope.abs();
        let sg = self.slope.signum();
        let rho = p[0].hypot(p[1]);
        let psi = p[1].atan2(p[0]);
        let phi = m * rho;
        let circ = (p[0] * self.v[1] - p[1] * self.v[0]) / rho;
        GeodesicState {
            r: self.zone_r0 + (phi - self.zone_phi0) / self.slope,
            theta: self.theta0 + psi / m,
            dr: sg * (p[0] * self.v[0] + p[1] * self.v[1]) / rho,
            dtheta: circ / phi,
            phi,
            jacobi,
            djacobi: self.dj0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct GreatPiece {
    s0: f64,
    s1: f64,
    c: f64,
    e0: [f64; 3],
    t0: [f64; 3],
    theta_start: f64,
    lon0: f64,
    /// `(u0, w)`: argument of latitude at `s0` and `cos` of the inclination,
    /// `None` for (near) meridians.
    orbit: Option<(f64, f64)>,
    j0: f64,
    dj0: f64,
}

fn unwound_longitude(u: f64, w: f64) -> f64 {
    let g = (w * u.sin()).atan2(u.cos());
    let lead = if w > 0.0 { u } else { -u };
    g + TAU * ((lead - g) / TAU).round()
}

impl GreatPiece {
    fn new(spec_c: f64, x: PointPolar, v: Tangent, s0: f64, j0: f64, dj0: f64) -> Self {
        let a = spec_c * x.r;
        let (sa, ca) = a.sin_cos();
        let (st, ct) = x.theta.sin_cos();
        let e0 = [sa * ct, sa * st, ca];
        let er = [ca * ct, ca * st, -sa];
        let et = [-st, ct, 0.0];
        let t0 = [
            v.radial * er[0] + v.circ * et[0],
            v.radial * er[1] + v.circ * et[1],
            v.radial * er[2] + v.circ * et[2],
        ];
        let n = cross3(e0, t0);
        let nh = [-n[1], n[0]];
        let nn = nh[0].hypot(nh[1]);
        let orbit = if nn < 1e-12 || n[2].abs() < 1e-12 {
            if nn < 1e-12 {
                // equatorial: longitude advances uniformly
                Some((0.0, n[2].signum()))
            } else {
                None
            }
        } else {
            let node = [nh[0] / nn, nh[1] / nn, 0.0];
            let w3 = cross3(n, node);
            let u0 = dot3(e0, w3).atan2(dot3(e0, node));
            let perp = [-node[1], node[0], 0.0];
            Some((u0, dot3(w3, perp)))
        };
        Self { s0, s1: s0, c: spec_c, e0, t0, theta_start: x.theta, lon0: e0[1].atan2(e0[0]), orbit, j0, dj0 }
    }

    fn eval(&self, s: f64) -> GeodesicState {
        let u = self.c * (s - self.s0);
        let (su, cu) = u.sin_cos();
        let x = [
            cu * self.e0[0] + su * self.t0[0],
            cu * self.e0[1] + su * self.t0[1],
            cu * self.e0[2] + su * self.t0[2],
        ];
        let t = [
            -su * self.e0[0] + cu * self.t0[0],
            -su * self.e0[1] + cu * self.t0[1],
            -su * self.e0[2] + cu * self.t0[2],
        ];
        let horiz = x[0].hypot(x[1]);
        let a = horiz.atan2(x[2]);
        let lon = x[1].atan2(x[0]);
        let theta = match self.orbit {
            Some((u0, w)) => self.theta_start + unwound_longitude(u0 + u, w) - unwound_longitude(u0, w),
            None => self.theta_start + crate::surface::wrap_pi(lon - self.lon0),
        };
        let (sl, cl) = lon.sin_cos();
        let (sa, ca) = a.sin_cos();
        let er = [ca * cl, ca * sl, -sa];
        let et = [-sl, cl, 0.0];
        let phi = horiz / self.c;
        let circ = dot3(t, et);
        let (sj, cj) = u.sin_cos();
        GeodesicState {
            r: a / self.c,
            theta,
            dr: dot3(t, er),
            dtheta: if phi > 0.0 { circ / phi } else { 0.0 },
            phi,
            jacobi: self.j0 * cj + self.dj0 * sj / self.c,
            djacobi: -self.j0 * self.c * sj + self.dj0 * cj,
        }
    }
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Debug, Clone, PartialEq)]
struct NodesPiece {
    s: Vec<f64>,
    y: Vec<[f64; 6]>,
    dy: Vec<[f64; 6]>,
    /// `φ` and its first two arclength derivatives at each node.
    phi: Vec<[f64; 3]>,
}

impl NodesPiece {
    fn start(&self) -> f64 {
        self.s[0]
    }

    fn end(&self) -> f64 {
        *self.s.last().unwrap()
    }

    fn eval(&self, s: f64) -> GeodesicState {
        let n = self.s.len();
        if n == 1 {
            let y = self.y[0];
            return GeodesicState {
                r: y[0],
                theta: y[1],
                dr: y[2],
                dtheta: y[3],
                phi: self.phi[0][0],
                jacobi: y[4],
                djacobi: y[5],
            };
        }
        let i = match self.s.partition_point(|&x| x <= s) {
            0 => 0,
            j if j >= n => n - 2,
            j => j - 1,
        };
        let (s0, h) = (self.s[i], self.s[i + 1] - self.s[i]);
        let (a, b) = (&self.y[i], &self.y[i + 1]);
        let (da, db) = (&self.dy[i], &self.dy[i + 1]);
        let r = quintic(s0, h, [a[0], a[2], da[2]], [b[0], b[2], db[2]], s);
        let th = quintic(s0, h, [a[1], a[3], da[3]], [b[1], b[3], db[3]], s);
        let j = quintic(s0, h, [a[4], a[5], da[5]], [b[4], b[5], db[5]], s);
        let phi = quintic(s0, h, self.phi[i], self.phi[i + 1], s);
        GeodesicState { r: r[0], theta: th[0], dr: r[1], dtheta: th[1], phi: phi[0], jacobi: j[0], djacobi: j[1] }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Line(LinePiece),
    Great(GreatPiece),
    Nodes(NodesPiece),
}

impl Piece {
    fn start(&self) -> f64 {
        match self {
            Piece::Line(l) => l.s0,
            Piece::Great(g) => g.s0,
            Piece::Nodes(n) => n.start(),
        }
    }

    fn end(&self) -> f64 {
        match self {
            Piece::Line(l) => l.s1,
            Piece::Great(g) => g.s1,
            Piece::Nodes(n) => n.end(),
        }
    }

    fn eval(&self, s: f64) -> GeodesicState {
        match self {
            Piece::Line(l) => l.eval(s),
            Piece::Great(g) => g.eval(s),
            Piece::Nodes(n) => n.eval(s),
        }
    }
}

/// A unit-speed geodesic `s ↦ γ(s)`, `s ∈ [0, length]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Geodesic {
    pub start: PointPolar,
    /// Initial direction, counter-clockwise from the outward radial direction.
    pub alpha: f64,
    pub length: f64,
    /// `ν = φ² θ'`.
    pub clairaut: f64,
    pieces: Vec<Piece>,
}

impl Geodesic {
    pub fn state(&self, s: f64) -> GeodesicState {
        let s = s.clamp(0.0, self.length);
        let i = self.pieces.partition_point(|p| p.end() < s).min(self.pieces.len() - 1);
        self.pieces[i].eval(s)
    }

    pub fn point(&self, s: f64) -> PointPolar {
        self.state(s).point()
    }

    pub fn end(&self) -> GeodesicState {
        self.state(self.length)
    }

    /// Initial velocity scaled to the length.
    pub fn initial_vector(&self) -> Tangent {
        Tangent::from_angle(self.alpha, self.length)
    }

    /// `(s_start, s_end, flat)` for every piece.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
        self.pieces.iter().map(|p| (p.start(), p.end(), matches!(p, Piece::Line(_))))
    }

    /// Arclengths of the stored integrator nodes and piece ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for p in &self.pieces {
            match p {
                Piece::Nodes(n) => out.extend_from_slice(&n.s),
                _ => {
                    out.push(p.start());
                    out.push(p.end());
                }
            }
        }
        out.dedup();
        out
    }

    /// Smallest `r` along the path on a grid of `n` samples plus breakpoints.
    pub fn min_radius(&self, n: usize) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..=n {
            m = m.min(self.state(self.length * i as f64 / n as f64).r);
        }
        for s in self.breakpoints() {
            m = m.min(self.state(s).r);
        }
        m
    }

    /// First zero of the Jacobi field in `(0, s_max]`, to about `1e-10`.
    pub fn jacobi_zero(&self, s_max: f64) -> Option<f64> {
        let s_max = s_max.min(self.length);
        let floor = 1e-9;
        for p in &self.pieces {
            let (a, b) = (p.start(), p.end().min(s_max));
            if b <= a || b <= floor {
                continue;
            }
            let found = match p {
                Piece::Line(l) => {
                    if l.dj0 != 0.0 {
                        let z = l.s0 - l.j0 / l.dj0;
                        (z > a.max(floor) && z <= b).then_some(z)
                    } else {
                        None
                    }
                }
                Piece::Great(g) => {
                    // J = R sin(c u + φ₀)
                    let phase = (g.j0 * g.c).atan2(g.dj0);
                    let mut z = None;
                    for k in 0..64 {
                        let u = (k as f64 * PI - phase) / g.c;
                        let s = g.s0 + u;
                        if s > a.max(floor) && s <= b {
                            z = Some(s);
                            break;
                        }
                        if s > b {
                            break;
                        }
                    }
                    z
                }
                Piece::Nodes(n) => nodes_jacobi_zero(n, a, b, floor),
            };
            if found.is_some() {
                return found;
            }
        }
        None
    }
}

fn nodes_jacobi_zero(n: &NodesPiece, a: f64, b: f64, floor: f64) -> Option<f64> {
    let mut prev_s = a;
    let mut prev_j = n.eval(a).jacobi;
    let mut grid: Vec<f64> = n.s.iter().copied().filter(|&s| s > a && s < b).collect();
    grid.push(b);
    for s in grid {
        let j = n.eval(s).jacobi;
        let sign_change = prev_s >= floor && prev_j != 0.0 && j.signum() != prev_j.signum();
        if sign_change || (j == 0.0 && s > floor) {
            let (mut lo, mut hi) = (prev_s, s);
            let jlo = prev_j;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if hi - lo < 1e-12 {
                    break;
                }
                if n.eval(mid).jacobi.signum() == jlo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev_s = s;
        prev_j = j;
    }
    None
}

struct Tracer<'a> {
    spec: &'a SurfaceSpec,
    opts: GeodesicOptions,
    length: f64,
    pieces: Vec<Piece>,
}

impl Tracer<'_> {
    fn guard(&self, r: f64, s: f64) -> Result<()> {
        if r < self.opts.apex_guard {
            return Err(Error::ApexGuard { radius: r, arclength: s });
        }
        Ok(())
    }

    /// Traces one flat zone; returns the state at the exit (or the end).
    fn line(&mut self, zi: usize, s: f64, st: GeodesicState) -> Result<(f64, GeodesicState, Option<f64>)> {
        let Zone::Linear { r0, r1, phi0, slope } = *self.spec.profile.zone(zi) else { unreachable!() };
        let remaining = self.length - s;
        let circ = st.phi * st.dtheta;
        let mut piece = LinePiece {
            s0: s,
            s1: self.length,
            slope,
            zone_r0: r0,
            zone_phi0: phi0,
            r_start: st.r,
            theta0: st.theta,
            p0: [0.0, 0.0],
            v: [st.dr, circ],
            j0: st.jacobi,
            dj0: st.djacobi,
        };
        let mut exit: Option<(f64, f64)> = None;
        if slope == 0.0 {
            if st.dr > 0.0 {
                exit = Some(((r1 - st.r) / st.dr, r1));
            } else if st.dr < 0.0 {
                exit = Some(((r0 - st.r) / st.dr, r0));
            }
        } else {
            let m = slope.abs();
            let rho0 = st.phi / m;
            piece.p0 = [rho0, 0.0];
            piece.v = [slope.signum() * st.dr, circ];
            let b = rho0 * piece.v[0];
            let rho_at = |r: f64| (phi0 + slope * (r - r0)) / m;
            let (ra, rb) = (rho_at(r0), rho_at(r1));
            let (lo, lo_r, hi, hi_r) = if ra <= rb { (ra, r0, rb, r1) } else { (rb, r1, ra, r0) };
            if hi.is_finite() {
                let disc = b * b - rho0 * rho0 + hi * hi;
                let t = -b + disc.max(0.0).sqrt();
                if t > 0.0 {
                    exit = Some((t, hi_r));
                }
            }
            if lo > 0.0 && b < 0.0 {
                let disc = b * b - rho0 * rho0 + lo * lo;
                if disc >= 0.0 {
                    let t = -b - disc.sqrt();
                    if t > 0.0 && exit.is_none_or(|(e, _)| t < e) {
                        exit = Some((t, lo_r));
                    }
                }
            }
            if r0 == 0.0 && slope > 0.0 && b < 0.0 {
                // closest approach to the apex inside this zone
                let t = -b;
                let t_end = exit.map_or(remaining, |(e, _)| e.min(remaining));
                if t <= t_end {
                    let rmin = (rho0 * rho0 - b * b).max(0.0).sqrt() * m;
                    self.guard(rmin, s + t)?;
                }
            }
        }
        match exit {
            Some((t, r_exit)) if t < remaining => {
                piece.s1 = s + t;
                let mut end = piece.eval(s + t);
                end.r = r_exit;
                self.pieces.push(Piece::Line(piece));
                Ok((s + t, end, Some(r_exit)))
            }
            _ => {
                piece.s1 = self.length;
                let end = piece.eval(self.length);
                self.pieces.push(Piece::Line(piece));
                Ok((self.length, end, None))
            }
        }
    }

    fn nodes(&mut self, zi: usize, s: f64, st: GeodesicState) -> Result<(f64, GeodesicState, Option<f64>)> {
        let zone = self.spec.profile.zone(zi);
        let (za, zb) = (zone.start(), zone.end());
        let rhs = |_s: f64, y: &[f64; 6]| {
            let [p, dp, _] = zone.eval(y[0]);
            let k = zone.curvature(y[0]);
            [y[2], y[3], p * dp * y[3] * y[3], -2.0 * dp / p * y[2] * y[3], y[5], -k * y[4]]
        };
        let phi_triple = |y: &[f64; 6], dy: &[f64; 6]| {
            let [p, dp, ddp] = zone.eval(y[0]);
            [p, dp * y[2], ddp * y[2] * y[2] + dp * dy[2]]
        };
        let solver = Dop853 { rtol: self.opts.rtol, atol: self.opts.atol, h_max: self.opts.h_max, max_steps: 0 };
        let mut t = s;
        let mut y = [st.r, st.theta, st.dr, st.dtheta, st.jacobi, st.djacobi];
        let mut k = rhs(t, &y);
        let mut piece = NodesPiece { s: Vec::new(), y: Vec::new(), dy: Vec::new(), phi: Vec::new() };
        piece.s.push(t);
        piece.y.push(y);
        piece.dy.push(k);
        piece.phi.push(phi_triple(&y, &k));
        let span = self.length - t;
        let mut h = solver.initial_h(&rhs, t, &y, &k, span);
        let mut steps = 0usize;
        loop {
            if t >= self.length {
                self.pieces.push(Piece::Nodes(piece));
                let end = self.pieces.last().unwrap().eval(self.length);
                return Ok((self.length, end, None));
            }
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(Error::Integrator("too many steps"));
            }
            h = h.min(self.opts.h_max * y[0].clamp(self.opts.apex_guard, 1.0));
            let remaining = self.length - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };
            let step = solver.try_step(&rhs, t, &y, &k, hs);
            if !step.err.is_finite() || !step.y[0].is_finite() {
                h *= 0.25;
                if h < 1e-14 {
                    return Err(Error::Integrator("step size underflow"));
                }
                continue;
            }
            if step.err > 1.0 {
                h = solver.next_h(hs, step.err).min(hs);
                if h < 1e-14 * (1.0 + t) {
                    return Err(Error::Integrator("step size underflow"));
                }
                continue;
            }
            let rn = step.y[0];
            let crossing = if rn > zb && zb.is_finite() {
                Some(zb)
            } else if rn < za && za > 0.0 {
                Some(za)
            } else {
                None
            };
            if crossing.is_none() && rn < self.opts.apex_guard {
                return Err(Error::ApexGuard { radius: rn, arclength: t + hs });
            }
            if let Some(bound) = crossing {
                let hc = locate(&solver, &rhs, t, &y, &k, hs, bound);
                let mut sc = solver.try_step(&rhs, t, &y, &k, hc);
                sc.y[0] = bound;
                let tc = if last && hc == hs { self.length } else { t + hc };
                if tc > t {
                    piece.s.push(tc);
                    piece.y.push(sc.y);
                    piece.dy.push(sc.dy);
                    piece.phi.push(phi_triple(&sc.y, &sc.dy));
                }
                let end = GeodesicState {
                    r: bound,
                    theta: sc.y[1],
                    dr: sc.y[2],
                    dtheta: sc.y[3],
                    phi: zone.eval(bound)[0],
                    jacobi: sc.y[4],
                    djacobi: sc.y[5],
                };
                self.pieces.push(Piece::Nodes(piece));
                return Ok((tc, end, Some(bound)));
            }
            t = if last { self.length } else { t + hs };
            y = step.y;
            k = step.dy;
            piece.s.push(t);
            piece.y.push(y);
            piece.dy.push(k);
            piece.phi.push(phi_triple(&y, &k));
            h = solver.next_h(hs, step.err);
        }
    }
}

/// Step `h ∈ (0, h_max]` at which `r` reaches `bound`: safeguarded Newton
/// on single integrator steps from the last accepted node.
fn locate<F>(solver: &Dop853, f: &F, t: f64, y: &[f64; 6], k: &[f64; 6], h_max: f64, bound: f64) -> f64
where
    F: Fn(f64, &[f64; 6]) -> [f64; 6],
{
    let g0 = y[0] - bound;
    let (mut lo, mut hi) = (0.0, h_max);
    let mut h = if y[2] != 0.0 { (-(g0) / y[2]).clamp(0.0, h_max) } else { 0.5 * h_max };
    for _ in 0..60 {
        let st = solver.try_step(f, t, y, k, h);
        let g = st.y[0] - bound;
        if g == 0.0 {
            return h;
        }
        if g.signum() == g0.signum() {
            lo = h;
        } else {
            hi = h;
        }
        let mut next = h - g / st.y[2];
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - h).abs() <= 1e-15 * (1.0 + t) || hi - lo <= 1e-15 * (1.0 + t) {
            return next.clamp(lo, hi);
        }
        h = next;
    }
    h
}

/// Shoots the geodesic from `x` with initial angle `alpha` for arclength `length`.
pub fn shoot(spec: &SurfaceSpec, x: PointPolar, alpha: f64, length: f64) -> Result<Geodesic> {
    shoot_with(spec, x, alpha, length, &GeodesicOptions::default())
}

pub fn shoot_with(
    spec: &SurfaceSpec,
    x: PointPolar,
    alpha: f64,
    length: f64,
    opts: &GeodesicOptions,
) -> Result<Geodesic> {
    if !(length >= 0.0) || !length.is_finite() || !alpha.is_finite() || !x.r.is_finite() || !x.theta.is_finite() {
        return Err(Error::InvalidParameter("geodesic length must be finite and non-negative".into()));
    }
    let prof = &spec.profile;
    let r_end = prof.r_end();
    if x.r > r_end || x.r < 0.0 {
        return Err(Error::OutsideDomain { radius: x.r, arclength: 0.0 });
    }
    let dir = Tangent::from_angle(alpha, 1.0);
    if let Some(delta) = spec.is_sphere() {
        let mut g = GreatPiece::new(delta.sqrt(), x, dir, 0.0, 0.0, 1.0);
        g.s1 = length;
        let clairaut = prof.phi(x.r) * dir.circ;
        return Ok(Geodesic { start: x, alpha, length, clairaut, pieces: alloc::vec![Piece::Great(g)] });
    }
    if x.r < opts.apex_guard {
        return Err(Error::ApexGuard { radius: x.r, arclength: 0.0 });
    }
    let phi = prof.phi(x.r);
    let mut st = GeodesicState {
        r: x.r,
        theta: x.theta,
        dr: dir.radial,
        dtheta: dir.circ / phi,
        phi,
        jacobi: 0.0,
        djacobi: 1.0,
    };
    let clairaut = phi * dir.circ;
    let mut tr = Tracer { spec, opts: *opts, length, pieces: Vec::new() };
    let mut s = 0.0;
    let last = prof.zones().len() - 1;
    let mut visits = 0usize;
    loop {
        visits += 1;
        if visits > 100_000 {
            return Err(Error::Integrator("zone switching stalled"));
        }
        let zi = prof.zone_index(st.r, st.dr > 0.0);
        let (s1, end, exit) = if prof.zone(zi).is_flat() { tr.line(zi, s, st)? } else { tr.nodes(zi, s, st)? };
        s = s1;
        st = end;
        match exit {
            None => break,
            Some(b) => {
                if zi == last && b >= prof.zone(last).end() && st.dr > 0.0 && !prof.is_closed() {
                    return Err(Error::OutsideDomain { radius: b, arclength: s });
                }
                if zi == last && b >= prof.zone(last).end() && prof.is_closed() {
                    return Err(Error::Unsupported("geodesic through the far pole"));
                }
            }
        }
        if s >= length {
            break;
        }
    }
    Ok(Geodesic { start: x, alpha, length, clairaut, pieces: tr.pieces })
}

/// `exp_x(v)` with `v` in the orthonormal (radial, circumferential) frame.
pub fn exp_map(spec: &SurfaceSpec, x: PointPolar, v: Tangent) -> Result<PointPolar> {
    let len = v.norm();
    if len == 0.0 {
        return Ok(x);
    }
    Ok(shoot(spec, x, v.angle(), len)?.end().point())
}

/// First conjugate point along the geodesic from `x` in direction `alpha`,
/// or `None` if `J > 0` on `(0, s_max]`.
pub fn jacobi_first_zero(spec: &SurfaceSpec, x: PointPolar, alpha: f64, s_max: f64) -> Result<Option<f64>> {
    let g = shoot(spec, x, alpha, s_max)?;
    Ok(g.jacobi_zero(s_max))
}

/// Interior angles and angle excess of a geodesic triangle.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TriangleReport {
    pub vertices: [PointPolar; 3],
    pub angles: [f64; 3],
    pub sides: [f64; 3],
    /// `Σ angles - π`.
    pub excess: f64,
    /// Winding number of the boundary around the center.
    pub winding: i32,
    /// Enclosed curvature when it is forced by the geometry: every side in
    /// one flat zone, so the triangle holds either all of the inner disk or
    /// none of it.
    pub enclosed_reference: Option<f64>,
}

pub fn gauss_bonnet_triangle(
    spec: &SurfaceSpec,
    x1: PointPolar,
    x2: PointPolar,
    x3: PointPolar,
) -> Result<TriangleReport> {
    let opts = ConnectOptions::default();
    let v = [x1, x2, x3];
    let mut sides = [0.0; 3];
    let mut out: [Tangent; 3] = [Tangent::default(); 3];
    let mut inc: [Tangent; 3] = [Tangent::default(); 3];
    let mut dtheta = 0.0;
    let mut flat_zone: Option<usize> = None;
    let mut all_flat = spec.is_sphere().is_none();
    for i in 0..3 {
        let (a, b) = (v[i], v[(i + 1) % 3]);
        let res = connect_with(spec, a, b, &opts)?;
        if res.distance == 0.0 {
            return Err(Error::InvalidParameter("triangle vertices must be distinct".into()));
        }
        sides[i] = res.distance;
        out[i] = res.velocity;
        inc[(i + 1) % 3] = res.geodesic.end().velocity();
        let g = &res.geodesic;
        dtheta += g.end().theta - g.start.theta;
        if all_flat {
            for k in 0..=256 {
                let r = g.state(g.length * k as f64 / 256.0).r;
                let zi = spec.profile.zone_index(r, true);
                if !spec.profile.zone(zi).is_flat() || flat_zone.is_some_and(|z| z != zi) {
                    all_flat = false;
                    break;
                }
                flat_zone = Some(zi);
            }
        }
    }
    let mut angles = [0.0; 3];
    for i in 0..3 {
        // outgoing toward the next vertex, and back toward the previous one
        let fwd = out[i];
        let back = inc[i].scale(-1.0);
        angles[i] = fwd.cross(&back).abs().atan2(fwd.dot(&back));
    }
    let winding = (dtheta / TAU).round() as i32;
    let enclosed_reference = match (all_flat, flat_zone) {
        (true, Some(zi)) => match *spec.profile.zone(zi) {
            Zone::Linear { slope, .. } if winding != 0 => Some(TAU * (1.0 - slope)),
            _ => Some(0.0),
        },
        _ => None,
    };
    Ok(TriangleReport {
        vertices: v,
        angles,
        sides,
        excess: angles.iter().sum::<f64>() - PI,
        winding,
        enclosed_reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{make_flattened_cone, make_plane, make_sphere, ConeMode};

    #[test]
    fn radial_plane_geodesic() {
        let g = shoot(&make_plane(), PointPolar::new(1.0, 0.0), 0.0, 1.0).unwrap();
        let e = g.end();
        assert!((e.r - 2.0).abs() < 1e-14);
        assert_eq!(e.theta, 0.0);
        assert_eq!(g.jacobi_zero(1.0), None);
        assert!((e.jacobi - 1.0).abs() < 1e-14);
    }

    #[test]
    fn plane_apex_guard() {
        let e = shoot(&make_plane(), PointPolar::new(1.0, 0.0), PI, 2.0).unwrap_err();
        assert!(matches!(e, Error::ApexGuard { .. }));
    }

    #[test]
    fn sphere_antipode() {
        let s = make_sphere(1.0).unwrap();
        let g = shoot(&s, PointPolar::new(0.7, 0.3), 1.1, PI).unwrap();
        let e = g.end();
        assert!((e.r - (PI - 0.7)).abs() < 1e-12);
        assert!(e.jacobi.abs() < 1e-12);
        let z = g.jacobi_zero(PI + 1e-9).unwrap();
        assert!((z - PI).abs() < 1e-12);
    }

    #[test]
    fn sphere_longitude_is_continuous() {
        let s = make_sphere(1.0).unwrap();
        let g = shoot(&s, PointPolar::new(1.0, 6.0), 1.3, 6.0).unwrap();
        let mut prev = g.state(0.0).theta;
        for i in 1..=600 {
            let th = g.state(0.01 * i as f64).theta;
            assert!((th - prev).abs() < 0.1, "jump at {i}: {prev} -> {th}");
            prev = th;
        }
    }

    #[test]
    fn cone_crossing_through_cap_keeps_invariants() {
        let spec = make_flattened_cone(0.02, ConeMode::Desk).unwrap();
        let x = PointPolar::new(3.0, 0.5);
        let g = shoot(&spec, x, PI - 0.1, 8.0).unwrap();
        assert!(g.pieces().any(|(_, _, flat)| !flat));
        for i in 0..=80 {
            let st = g.state(0.1 * i as f64);
            assert!((st.speed() - 1.0).abs() < 1e-10, "{i} {}", st.speed());
            assert!((st.clairaut() - g.clairaut).abs() < 1e-10, "{i} {st:?} {}", g.clairaut);
        }
    }
}
