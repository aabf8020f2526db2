//! Empirical injectivity and conjugate radii from direction scans.

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use alloc::string::String;
use alloc::vec::Vec;

use crate::connect::{cut_point_scan, CutScan};
use crate::geodesic::jacobi_first_zero;
use crate::par;
use crate::surface::{PointPolar, SurfaceSpec};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectionScan {
    pub alpha: f64,
    pub cut: Option<f64>,
    pub conjugate: Option<f64>,
    /// Samples whose distance could not be recomputed.
    pub failures: usize,
    /// Failure of the direction as a whole (the geodesic itself).
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InjectivityEstimate {
    pub base: PointPolar,
    pub l_max: f64,
    pub directions: Vec<DirectionScan>,
    /// Smallest cut distance found, `None` if none up to `l_max`.
    pub injectivity: Option<f64>,
    pub conjugate: Option<f64>,
}

/// Scans every angle for cut points (grid spacing `ds`) and conjugate points.
pub fn empirical_injectivity(
    spec: &SurfaceSpec,
    x: PointPolar,
    angles: &[f64],
    l_max: f64,
    ds: f64,
) -> InjectivityEstimate {
    let n = (l_max / ds).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (1..=n).map(|i| (i as f64 * ds).min(l_max)).collect();
    let directions = par::map(angles, |&alpha| {
        let conjugate = jacobi_first_zero(spec, x, alpha, l_max);
        let scan: crate::Result<CutScan> = cut_point_scan(spec, x, alpha, &grid);
        match (conjugate, scan) {
            (Ok(conjugate), Ok(scan)) => DirectionScan {
                alpha,
                cut: scan.first_cut,
                conjugate,
                failures: scan.samples.iter().filter(|s| s.error.is_some()).count(),
                error: None,
            },
            (Err(e), _) | (_, Err(e)) => DirectionScan {
                alpha,
                cut: None,
                conjugate: None,
                failures: grid.len(),
                error: Some(alloc::format!("{e}")),
            },
        }
    });
    let min_of = |f: fn(&DirectionScan) -> Option<f64>| directions.iter().filter_map(f).reduce(f64::min);
    let injectivity = min_of(|d| d.cut);
    let conjugate = min_of(|d| d.conjugate);
    InjectivityEstimate { base: x, l_max, directions, injectivity, conjugate }
}
