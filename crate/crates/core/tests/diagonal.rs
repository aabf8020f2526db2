use mtwcone_core::*;

/// A3w value on the sphere of curvature `delta` at the diagonal `x̄(0) = x`,
/// with unit orthonormal `ξ`, `η`, divided by `delta`.
fn kappa(delta: f64, frac: f64, theta: f64, alpha: f64) -> f64 {
    let spec = make_sphere(delta).unwrap();
    let x = PointPolar::new(frac * std::f64::consts::PI / delta.sqrt(), theta);
    let xi = Tangent::from_angle(alpha, 1.0);
    let seg = CSegment::from_tangents(&spec, x, Tangent::new(0.0, 0.0), xi).unwrap();
    let steps = A3wSteps { dt: 0.05 / delta.sqrt(), hessian_step: None };
    let s = a3w_term(&spec, x, &seg, xi.perp(), 0.0, steps).unwrap();
    assert!(s.error < 1e-2 * s.value.abs(), "{s:?}");
    s.value / delta
}

#[test]
fn sphere_diagonal_constant_is_reproducible() {
    let reference = kappa(1.0, 0.5, 0.0, 0.0);
    for delta in [0.5, 1.0, 2.0] {
        for (frac, theta, alpha) in [(0.5, 0.0, 0.0), (0.3, 1.0, 0.7), (0.7, 4.0, -2.0)] {
            let k = kappa(delta, frac, theta, alpha);
            assert!((k - reference).abs() <= 0.02 * reference, "delta {delta}, base ({frac}, {theta}): {k} vs {reference}");
        }
    }
    // matches the (2/3) K normalization of the cost-curvature at the diagonal
    assert!((reference - 2.0 / 3.0).abs() < 1e-5, "{reference}");
}
