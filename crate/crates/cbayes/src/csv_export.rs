//! CSV exports. Report points use the columns
//! `x,value,stderr,method,effort,series`; chains use one row per
//! (step, coordinate).

use std::io::Write;

use cbayes_core::experiments::Point;
use cbayes_core::posterior::Chain;
use cbayes_core::series_prior::{mode_index, FieldSample};
use serde::Serialize;

use crate::Result;

pub const POINT_COLUMNS: [&str; 6] = ["x", "value", "stderr", "method", "effort", "series"];

#[derive(Serialize)]
struct PointRow<'a> {
    x: f64,
    value: f64,
    stderr: f64,
    method: &'a str,
    effort: usize,
    series: &'a str,
}

pub fn write_points<W: Write>(points: &[Point], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(PointRow { x: p.x, value: p.value, stderr: p.stderr, method: &p.method, effort: p.effort, series: &p.series })?;
    }
    if points.is_empty() {
        w.write_record(POINT_COLUMNS)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_chain<W: Write>(chain: &Chain, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "position", "value"])?;
    for (step, state) in chain.states.iter().enumerate() {
        for (p, v) in state.iter().enumerate() {
            w.write_record([step.to_string(), p.to_string(), v.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Coefficients of prior draws: `sample,position,mode,coefficient`.
pub fn write_coefficients<W: Write>(samples: &[FieldSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample", "position", "mode", "coefficient"])?;
    for (i, s) in samples.iter().enumerate() {
        for (p, c) in s.coefficients.iter().enumerate() {
            w.write_record([i.to_string(), p.to_string(), mode_index(p).to_string(), c.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Field values on a grid: `sample,x,value`.
pub fn write_field_values<W: Write>(rows: &[(usize, f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample", "x", "value"])?;
    for (i, x, v) in rows {
        w.write_record([i.to_string(), x.to_string(), v.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
