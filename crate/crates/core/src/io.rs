//! CSV and JSON artifacts. Every CSV has a header row.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::controlled::ControlledPath;
use crate::error::{dim, Result};
use crate::fbm::FbmSample;
use crate::flow::FlowField;
use crate::grid::{TimeGrid, Triangular};
use crate::localtime::LambdaField;
use crate::permanent::MultiIndexPoly;
use crate::rough::RoughPath;
use crate::transport::TransportSolution;

/// `{name, gamma, value}` norm record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub name: String,
    pub gamma: f64,
    pub value: f64,
}

pub fn write_json<T: Serialize>(w: impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

/// Levels of a rough path as `(i, j, level, value)`.
pub fn write_rough_path(w: impl Write, x: &RoughPath) -> Result<()> {
    let mut out = writer(w, &["i", "j", "level", "value"])?;
    for n in 1..=x.p() {
        write_triangular_rows(&mut out, x.level(n), n)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_triangular(w: impl Write, t: &Triangular, level: usize) -> Result<()> {
    let mut out = writer(w, &["i", "j", "level", "value"])?;
    write_triangular_rows(&mut out, t, level)?;
    out.flush()?;
    Ok(())
}

fn write_triangular_rows<W: Write>(out: &mut csv::Writer<W>, t: &Triangular, level: usize) -> Result<()> {
    for i in 0..t.points() {
        for (k, v) in t.row(i).iter().enumerate() {
            out.serialize((i, i + k + 1, level, v))?;
        }
    }
    Ok(())
}

/// Reads `(i, j, level, value)` rows back into one triangular array per level.
pub fn read_triangular(r: impl Read, points: usize) -> Result<Vec<Triangular>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut levels: Vec<Triangular> = Vec::new();
    for rec in rd.deserialize() {
        let (i, j, level, value): (usize, usize, usize, f64) = rec?;
        if level == 0 || i >= j || j >= points {
            return dim(format!("row ({i}, {j}, {level}) outside a {points}-point grid"));
        }
        while levels.len() < level {
            levels.push(Triangular::zeros(points));
        }
        levels[level - 1].set(i, j, value);
    }
    Ok(levels)
}

/// `(t, k, value)` for each Gubinelli component `Y^(k)`.
pub fn write_controlled(w: impl Write, y: &ControlledPath) -> Result<()> {
    let mut out = writer(w, &["t", "k", "value"])?;
    let times = y.grid().times();
    for k in 0..y.p() {
        for (t, v) in times.iter().zip(y.component(k)) {
            out.serialize((t, k, v))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_fbm(w: impl Write, grid: &TimeGrid, samples: &[FbmSample]) -> Result<()> {
    let mut out = writer(w, &["path_id", "t", "value"])?;
    let times = grid.times();
    for s in samples {
        for (t, v) in times.iter().zip(&s.values) {
            out.serialize((s.path_id, t, v))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `(t, x, phi)` with `x` the starting node.
pub fn write_flow(w: impl Write, flow: &FlowField) -> Result<()> {
    let mut out = writer(w, &["t", "x", "phi"])?;
    let times = flow.grid.times();
    for (i, t) in times.iter().enumerate() {
        for (x, phi) in flow.nodes.iter().zip(&flow.phi) {
            out.serialize((t, x, phi[i]))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_lambda(w: impl Write, fields: &[(u64, &LambdaField)]) -> Result<()> {
    let mut out = writer(w, &["path_id", "y", "value"])?;
    for (id, f) in fields {
        for (y, v) in f.y.iter().zip(&f.values) {
            out.serialize((id, y, v))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_transport(w: impl Write, sol: &TransportSolution) -> Result<()> {
    let mut out = writer(w, &["t", "x", "u"])?;
    for (&ti, row) in sol.t_indices.iter().zip(&sol.values) {
        let t = sol.grid.time(ti);
        for (x, u) in sol.x.iter().zip(row) {
            out.serialize((t, x, u))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `(alpha, coeff)` with `alpha` written as the exponent digits `a_1 a_2 .. a_m`.
pub fn write_polynomial(w: impl Write, p: &MultiIndexPoly) -> Result<()> {
    let mut out = writer(w, &["alpha", "coeff"])?;
    for (&key, &c) in &p.terms {
        let alpha: String = p.exponents(key).iter().map(|d| char::from(b'0' + d)).collect();
        out.serialize((alpha, c))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough::geometric_lift;

    #[test]
    fn triangular_roundtrip() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let path: Vec<f64> = grid.times().iter().map(|t| (5.0 * t).sin()).collect();
        let x = geometric_lift(&grid, &path, 0.3).unwrap();
        let mut buf = Vec::new();
        write_rough_path(&mut buf, &x).unwrap();
        let back = read_triangular(buf.as_slice(), grid.len()).unwrap();
        assert_eq!(back.len(), x.p());
        for (n, t) in back.iter().enumerate() {
            assert_eq!(t, x.level(n + 1));
        }
    }

    #[test]
    fn polynomial_dump() {
        let p = crate::permanent::p_m_expand(2).unwrap();
        let mut buf = Vec::new();
        write_polynomial(&mut buf, &p).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "alpha,coeff\n20,2\n11,1\n");
    }

    #[test]
    fn out_of_range_rows_are_rejected() {
        let csv = "i,j,level,value\n3,2,1,0.5\n";
        assert!(read_triangular(csv.as_bytes(), 4).is_err());
    }
}
