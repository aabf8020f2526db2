use alloc::boxed::Box;
use alloc::string::String;

use crate::connect::ConnectResult;

/// Errors raised by surface construction and geodesic computations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("profile collapses (phi reaches zero) at r = {radius}")]
    ProfileCollapse { radius: f64 },
    #[error("amplitude calibration did not converge after {iterations} iterations (residual {residual:e})")]
    CalibrationFailed { iterations: usize, residual: f64 },
    #[error("max curvature {max_curvature:e} violates the strict bound K < 1e-4")]
    StrictCurvatureBound { max_curvature: f64 },
    #[error("rounding band would create negative curvature")]
    NegativeCurvature,
    #[error("completeness budget exceeded: asymptotic slope {slope:e} is not positive")]
    CompletenessBudget { slope: f64 },
    #[error("point lies in the removed sector of the development")]
    InRemovedSector,
    #[error("trajectory entered the apex guard (r = {radius:e} at s = {arclength})")]
    ApexGuard { radius: f64, arclength: f64 },
    #[error("trajectory left the profile domain (r = {radius} at s = {arclength})")]
    OutsideDomain { radius: f64, arclength: f64 },
    #[error("integrator failed: {0}")]
    Integrator(&'static str),
    #[error("points are (near) the cut locus: two geodesics of lengths {} and {}", .first.distance, .second.distance)]
    AmbiguousCut {
        first: Box<ConnectResult>,
        second: Box<ConnectResult>,
    },
    #[error("boundary-value solver did not converge (best residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("c-segment identity failed at t = {t}: cost {cost} vs |p + t xi|^2/2 = {expected}")]
    SegmentIdentity { t: f64, cost: f64, expected: f64 },
    #[error("operation not supported: {0}")]
    Unsupported(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
