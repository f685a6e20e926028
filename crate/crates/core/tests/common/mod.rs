#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use annulus_core::boundary::{make_trace, AngularSeries, BoundarySpec, CircleData};
use annulus_core::{BoundaryTrace, PolarGrid};

pub fn grid(n_r: usize, n_theta: usize) -> Arc<PolarGrid> {
    PolarGrid::new(n_r, n_theta, 1.0, 2.0).unwrap()
}

pub fn preset(spec: BoundarySpec) -> BoundaryTrace {
    make_trace(&spec, 1.0, 2.0, 1.0).unwrap()
}

/// Couette-type rotation with non-axisymmetric wall motion and inner flux `flux`.
pub fn wavy(flux: f64, size: f64) -> BoundaryTrace {
    BoundaryTrace::new(
        1.0,
        2.0,
        CircleData {
            normal: AngularSeries {
                mean: -flux / (4.0 * PI),
                cos: vec![0.1 * size, 0.0, 0.05 * size],
                sin: vec![0.0, -0.2 * size],
            },
            tangential: AngularSeries {
                mean: 1.0,
                cos: vec![0.0, 0.3 * size],
                sin: vec![0.1 * size],
            },
        },
        CircleData {
            normal: AngularSeries {
                mean: flux / (2.0 * PI),
                cos: vec![],
                sin: vec![0.2 * size, 0.0, 0.1 * size],
            },
            tangential: AngularSeries {
                mean: -0.5,
                cos: vec![0.2 * size],
                sin: vec![],
            },
        },
    )
    .unwrap()
}
