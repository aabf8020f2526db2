//! Brute-force reference implementation for the smoothed cone, independent of
//! the library: fixed-step RK4 for the warp and for geodesics in polar
//! coordinates, Newton shooting with a finite-difference Jacobian.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI, TAU};

pub struct Warp {
    pub beta: f64,
    pub amplitude: f64,
    h: f64,
    nodes: Vec<[f64; 3]>,
}

fn bump(a: f64, r: f64) -> f64 {
    let d = 1.0 - r * r;
    if d <= 0.0 {
        0.0
    } else {
        a * (-1.0 / d).exp()
    }
}

fn integrate_warp(a: f64, n: usize) -> Vec<[f64; 3]> {
    let h = 1.0 / n as f64;
    let f = |r: f64, y: [f64; 2]| [y[1], -bump(a, r) * y[0]];
    let mut y = [0.0, 1.0];
    let mut out = vec![[0.0, 1.0, 0.0]];
    for i in 0..n {
        let r = i as f64 * h;
        let k1 = f(r, y);
        let k2 = f(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = f(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let r1 = r + h;
        out.push([y[0], y[1], -bump(a, r1) * y[0]]);
    }
    out
}

impl Warp {
    /// Bump amplitude chosen by secant so that `φ'(1) = 1 - θ/π`.
    pub fn cone(theta: f64) -> Self {
        let n = 10_000;
        let beta = 1.0 - theta / PI;
        let g = |a: f64| integrate_warp(a, n)[n][1] - beta;
        let (mut a0, mut a1) = (0.0, 0.1);
        let (mut g0, mut g1) = (g(a0), g(a1));
        for _ in 0..50 {
            if g1.abs() < 1e-16 || g1 == g0 {
                break;
            }
            let a2 = a1 - g1 * (a1 - a0) / (g1 - g0);
            a0 = a1;
            g0 = g1;
            a1 = a2;
            g1 = g(a1);
        }
        Self { beta, amplitude: a1, h: 1.0 / n as f64, nodes: integrate_warp(a1, n) }
    }

    /// `(φ, φ')` by cubic Hermite interpolation inside the bump, linear outside.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let last = self.nodes[self.nodes.len() - 1];
        if r >= 1.0 {
            return (last[0] + self.beta * (r - 1.0), self.beta);
        }
        let i = ((r / self.h) as usize).min(self.nodes.len() - 2);
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let s = (r - i as f64 * self.h) / self.h;
        let herm = |v0: f64, d0: f64, v1: f64, d1: f64| {
            let (s2, s3) = (s * s, s * s * s);
            (2.0 * s3 - 3.0 * s2 + 1.0) * v0
                + (s3 - 2.0 * s2 + s) * self.h * d0
                + (-2.0 * s3 + 3.0 * s2) * v1
                + (s3 - s2) * self.h * d1
        };
        (herm(a[0], a[1], b[0], b[1]), herm(a[1], a[2], b[1], b[2]))
    }

    pub fn offset(&self) -> f64 {
        self.eval(1.0).0 / self.beta - 1.0
    }

    fn edge(&self) -> f64 {
        -FRAC_PI_2 + PI * (1.0 - self.beta)
    }

    /// Development point to intrinsic `(r, θ)`; valid outside the bump.
    pub fn dev_to_polar(&self, a: f64, b: f64) -> (f64, f64) {
        let mut psi = b.atan2(a);
        if psi < self.edge() {
            psi += TAU;
        }
        (a.hypot(b) - self.offset(), (psi - self.edge()) / self.beta)
    }

    pub fn to_dev(&self, p: (f64, f64)) -> (f64, f64) {
        let rho = p.0 + self.offset();
        let psi = self.edge() + self.beta * p.1;
        (rho * psi.cos(), rho * psi.sin())
    }

    fn rhs(&self, y: [f64; 4]) -> [f64; 4] {
        let (phi, dphi) = self.eval(y[0]);
        [y[2], y[3], phi * dphi * y[3] * y[3], -2.0 * dphi / phi * y[2] * y[3]]
    }

    /// Endpoint of the unit-speed geodesic from `p` at angle `alpha`
    /// (measured from `∂r` toward `∂θ`) after length `len`.
    pub fn shoot(&self, p: (f64, f64), alpha: f64, len: f64, ds: f64) -> (f64, f64) {
        let n = (len / ds).ceil().max(1.0) as usize;
        let h = len / n as f64;
        let (phi, _) = self.eval(p.0);
        let mut y = [p.0, p.1, alpha.cos(), alpha.sin() / phi];
        for _ in 0..n {
            let k1 = self.rhs(y);
            let k2 = self.rhs(add(y, k1, h / 2.0));
            let k3 = self.rhs(add(y, k2, h / 2.0));
            let k4 = self.rhs(add(y, k3, h));
            for j in 0..4 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        (y[0], y[1])
    }

    /// `(alpha, length)` of the geodesic from `p` to `q` near the
    /// development straight line.
    pub fn log(&self, p: (f64, f64), q: (f64, f64), ds: f64) -> (f64, f64) {
        let (pa, pb) = self.to_dev(p);
        let (qa, qb) = self.to_dev(q);
        let psi = self.edge() + self.beta * p.1;
        let (da, db) = (qa - pa, qb - pb);
        let radial = da * psi.cos() + db * psi.sin();
        let circ = -da * psi.sin() + db * psi.cos();
        let mut x = [circ.atan2(radial), radial.hypot(circ)];
        let phi_q = self.eval(q.0).0;
        let res = |x: [f64; 2]| {
            let e = self.shoot(p, x[0], x[1], ds);
            let mut dt = (e.1 - q.1) % TAU;
            if dt > PI {
                dt -= TAU;
            } else if dt < -PI {
                dt += TAU;
            }
            [e.0 - q.0, phi_q * dt]
        };
        for _ in 0..40 {
            let r0 = res(x);
            if r0[0].hypot(r0[1]) < 1e-13 * (1.0 + x[1]) {
                break;
            }
            let eps = 1e-6;
            let ra = res([x[0] + eps, x[1]]);
            let rl = res([x[0], x[1] + eps]);
            let j = [[(ra[0] - r0[0]) / eps, (rl[0] - r0[0]) / eps], [(ra[1] - r0[1]) / eps, (rl[1] - r0[1]) / eps]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let dx0 = (j[1][1] * r0[0] - j[0][1] * r0[1]) / det;
            let dx1 = (-j[1][0] * r0[0] + j[0][0] * r0[1]) / det;
            x = [x[0] - dx0, x[1] - dx1];
        }
        (x[0], x[1])
    }

    pub fn cost(&self, p: (f64, f64), q: (f64, f64), ds: f64) -> f64 {
        let l = self.log(p, q, ds).1;
        0.5 * l * l
    }
}

fn add(y: [f64; 4], k: [f64; 4], h: f64) -> [f64; 4] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]]
}

/// Reference DASM profile for base `x`, probe `y` and endpoints `x̄₀`, `x̄₁`
/// given in development coordinates.
pub struct DasmOracle {
    pub warp: Warp,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub p: [f64; 2],
    pub xi: [f64; 2],
    pub ds: f64,
}

impl DasmOracle {
    pub fn new(theta: f64, x: (f64, f64), y: (f64, f64), xb0: (f64, f64), xb1: (f64, f64), ds: f64) -> Self {
        let warp = Warp::cone(theta);
        let x = warp.dev_to_polar(x.0, x.1);
        let y = warp.dev_to_polar(y.0, y.1);
        let vec = |q: (f64, f64)| {
            let (a, l) = warp.log(x, warp.dev_to_polar(q.0, q.1), ds);
            [l * a.cos(), l * a.sin()]
        };
        let p = vec(xb0);
        let q = vec(xb1);
        Self { warp, x, y, p, xi: [q[0] - p[0], q[1] - p[1]], ds }
    }

    pub fn xbar(&self, t: f64) -> (f64, f64) {
        let v = [self.p[0] + t * self.xi[0], self.p[1] + t * self.xi[1]];
        self.warp.shoot(self.x, v[1].atan2(v[0]), v[0].hypot(v[1]), self.ds)
    }

    pub fn f(&self, t: f64) -> f64 {
        let xt = self.xbar(t);
        self.warp.cost(self.x, xt, self.ds) - self.warp.cost(self.y, xt, self.ds)
    }

    /// Golden-section maximum of `f` on `[a, b]`.
    pub fn max_on(&self, a: f64, b: f64, tol: f64) -> (f64, f64) {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (a, b);
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fd) = (self.f(c), self.f(d));
        while b - a > tol {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.f(d);
            }
        }
        if fc > fd {
            (c, fc)
        } else {
            (d, fd)
        }
    }
}
