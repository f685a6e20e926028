//! Reading nodal field dumps (`r,theta,u_r,u_theta,p`, radial index outermost).

use std::path::Path;
use std::sync::Arc;

use annulus_core::{PolarGrid, ScalarField, VelocityField};
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::{io_error, CliError};

#[derive(Debug, Deserialize)]
struct Row {
    r: f64,
    theta: f64,
    u_r: f64,
    u_theta: f64,
    p: f64,
}

pub struct FieldDump {
    pub grid: Arc<PolarGrid>,
    pub velocity: VelocityField,
    pub pressure: ScalarField,
}

pub fn read_fields(path: &Path) -> Result<FieldDump, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let rows: Vec<Row> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| io_error(path, e))?;
    let bad = |m: &str| io_error(path, m);
    if rows.is_empty() {
        return Err(bad("no data rows"));
    }
    if rows.iter().any(|w| ![w.r, w.theta, w.u_r, w.u_theta, w.p].iter().all(|v| v.is_finite())) {
        return Err(bad("non-finite entry"));
    }
    let n_theta = rows.iter().take_while(|w| w.r == rows[0].r).count();
    if !rows.len().is_multiple_of(n_theta) {
        return Err(bad("row count is not a multiple of the angular resolution"));
    }
    let n_r = rows.len() / n_theta;
    let grid = PolarGrid::new(n_r, n_theta, rows[0].r, rows[rows.len() - 1].r).map_err(|e| io_error(path, e))?;
    let tol = 1e-12 * grid.r_outer();
    for (idx, w) in rows.iter().enumerate() {
        let (i, j) = (idx / n_theta, idx % n_theta);
        if (w.r - grid.r()[i]).abs() > tol || (w.theta - grid.theta()[j]).abs() > 1e-12 {
            return Err(bad(&format!("row {} is not on the collocation grid", idx + 2)));
        }
    }
    let column = |f: fn(&Row) -> f64| DMatrix::from_fn(n_r, n_theta, |i, j| f(&rows[i * n_theta + j]));
    let velocity = VelocityField::new(
        ScalarField::new(&grid, column(|w| w.u_r)),
        ScalarField::new(&grid, column(|w| w.u_theta)),
    )?;
    let pressure = ScalarField::new(&grid, column(|w| w.p));
    Ok(FieldDump {
        grid,
        velocity,
        pressure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use annulus_core::oracle::couette;

    #[test]
    fn round_trip() {
        let g = PolarGrid::new(10, 8, 1.0, 2.0).unwrap();
        let flow = couette(&g, 1.0, 2.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fields.csv");
        flow.velocity
            .write_csv(Some(&flow.pressure), std::fs::File::create(&path).unwrap())
            .unwrap();
        let back = read_fields(&path).unwrap();
        assert_eq!(back.grid.n_r(), 10);
        assert_eq!(back.grid.n_theta(), 8);
        assert_eq!(back.velocity.sub(&flow.velocity).abs_max(), 0.0);
        assert_eq!(back.pressure.sub(&flow.pressure).abs_max(), 0.0);
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        for body in [
            "r,theta,u_r,u_theta,p\n1,0,0,0\n",
            "r,theta,u_r,u_theta,p\n1,0,0,0,x\n",
            "r,theta,u_r,u_theta,p\n",
            "r,theta,u_r,u_theta,p\n1.5,0,0,0,0\n1.5,3,0,0,0\n1.7,0,0,0,0\n1.7,3,0,0,0\n",
        ] {
            std::fs::write(&path, body).unwrap();
            assert!(matches!(read_fields(&path), Err(CliError::Config(_))), "{body}");
        }
    }
}
