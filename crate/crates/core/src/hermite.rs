//! Quintic Hermite interpolation from value, first and second derivative.

/// Value, first and second derivative of the quintic matching
/// `(f0, d0, s0)` at `x0` and `(f1, d1, s1)` at `x0 + h`, evaluated at `x`.
#[inline]
pub(crate) fn quintic(x0: f64, h: f64, a: [f64; 3], b: [f64; 3], x: f64) -> [f64; 3] {
    let u = (x - x0) / h;
    let u2 = u * u;
    let u3 = u2 * u;
    let u4 = u3 * u;
    let u5 = u4 * u;
    let h0 = 1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5;
    let h1 = u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5;
    let h2 = 0.5 * (u2 - 3.0 * u3 + 3.0 * u4 - u5);
    let h3 = 1.0 - h0;
    let h4 = -4.0 * u3 + 7.0 * u4 - 3.0 * u5;
    let h5 = 0.5 * (u3 - 2.0 * u4 + u5);

    let dh0 = -30.0 * u2 + 60.0 * u3 - 30.0 * u4;
    let dh1 = 1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u4;
    let dh2 = 0.5 * (2.0 * u - 9.0 * u2 + 12.0 * u3 - 5.0 * u4);
    let dh4 = -12.0 * u2 + 28.0 * u3 - 15.0 * u4;
    let dh5 = 0.5 * (3.0 * u2 - 8.0 * u3 + 5.0 * u4);

    let ddh0 = -60.0 * u + 180.0 * u2 - 120.0 * u3;
    let ddh1 = -36.0 * u + 96.0 * u2 - 60.0 * u3;
    let ddh2 = 0.5 * (2.0 - 18.0 * u + 36.0 * u2 - 20.0 * u3);
    let ddh4 = -24.0 * u + 84.0 * u2 - 60.0 * u3;
    let ddh5 = 0.5 * (6.0 * u - 24.0 * u2 + 20.0 * u3);

    let hh = h * h;
    let v = a[0] * h0 + h * a[1] * h1 + hh * a[2] * h2 + b[0] * h3 + h * b[1] * h4 + hh * b[2] * h5;
    let d = (a[0] * dh0 + h * a[1] * dh1 + hh * a[2] * dh2 - b[0] * dh0 + h * b[1] * dh4 + hh * b[2] * dh5) / h;
    let s = (a[0] * ddh0 + h * a[1] * ddh1 + hh * a[2] * ddh2 - b[0] * ddh0 + h * b[1] * ddh4 + hh * b[2] * ddh5)
        / hh;
    [v, d, s]
}

#[cfg(test)]
mod tests {
    use super::quintic;

    #[test]
    fn reproduces_quintic_polynomials() {
        let p = |x: f64| [
            1.0 + x - 2.0 * x * x + 0.5 * x.powi(5),
            1.0 - 4.0 * x + 2.5 * x.powi(4),
            -4.0 + 10.0 * x.powi(3),
        ];
        let (x0, h) = (0.3, 0.7);
        for k in 0..=10 {
            let x = x0 + h * k as f64 / 10.0;
            let got = quintic(x0, h, p(x0), p(x0 + h), x);
            let want = p(x);
            for i in 0..3 {
                assert!((got[i] - want[i]).abs() < 1e-12, "{i}: {got:?} vs {want:?}");
            }
        }
    }

}
