//! Radially symmetric surfaces and numerical tests of the Ma–Trudinger–Wang
//! regularity condition for the distance-squared cost.
//!
//! The crate is `no_std` (it needs `alloc`). Everything is built on four
//! layers:
//!
//! - [`profile`] / [`surface`]: warp profiles `dr² + φ(r)² dθ²`, the smoothed
//!   flat cone, its closed capped variant, positive perturbations and the
//!   plane/sphere controls.
//! - [`geodesic`]: exponential map, Jacobi fields and triangle diagnostics.
//!   Flat zones are advanced in closed form, curved zones by an adaptive
//!   8th-order Runge–Kutta integrator ([`ode`]).
//! - [`connect`]: the geodesic boundary-value problem, the cost
//!   `c = dist²/2` and its Hessian in the first slot.
//! - [`mtw`]: c-segments, the local DASM profile, the A3w fourth-derivative
//!   term, Toponogov hinges.
//!
//! Enable the `parallel` feature to run scans on the rayon thread pool and
//! `serde` to serialize reports.
#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons keep NaN on the failing side

extern crate alloc;
#[cfg(feature = "parallel")]
extern crate std;

pub mod connect;
mod error;
pub mod geodesic;
pub mod injectivity;
pub mod mtw;
pub mod ode;
pub mod profile;
pub mod quad;
pub mod surface;

mod hermite;
mod par;

pub use connect::{
    connect, connect_with, cost, cut_point_scan, hessian_cost, ConnectOptions, ConnectResult,
    CutScan, HessianEstimate, MinimalityEvidence,
};
pub use error::{Error, Result};
pub use geodesic::{
    exp_map, gauss_bonnet_triangle, jacobi_first_zero, shoot, shoot_with, Geodesic,
    GeodesicOptions, GeodesicState, TriangleReport,
};
pub use injectivity::{empirical_injectivity, DirectionScan, InjectivityEstimate};
pub use mtw::{
    a3w_scan, a3w_term, balanced_probe, c_segment, dasm_profile, dasm_profile_with, flat_baseline, toponogov_check, A3wSample, A3wSteps,
    A3wScanConfig, A3wScanResult, BalancedProbe, CSegment, DasmOptions, DasmReport, Hinge, ToponogovHinge,
};
pub use profile::{profile_from_curvature, CurvatureLaw, ProfileOptions, RadialProfile, SampledZone, Zone};
pub use surface::{
    make_capped_closed, make_flattened_cone, make_plane, make_sphere, perturb_positive,
    Chart, ConeMode, Construction, CurvatureBump, PointDev, PointPolar, SurfaceSpec, Tangent,
    Topology,
};
