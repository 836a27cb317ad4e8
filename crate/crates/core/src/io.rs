//! CSV emission and ingestion.
//!
//! All floats are written with Rust's shortest round-trip formatting, so
//! re-ingesting an emitted file reproduces the values bit for bit.
//!
//! Schemas:
//! - complex tables (BCF, J, g, spectra): `t_or_omega,re,im` or `energy_eV,re,im`
//! - curves: `energy_eV,value`
//! - reflectivity maps: angle header row, energy first column
//! - minima data: `angle_deg,E_LP,E_UP,depth_LP,depth_UP` (depth = R at the dip)

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fit::{Curve, MinimaRow};
use crate::response::Spectrum;
use crate::tmm::ReflectivityMap;
use crate::uncertainty::PeakError;

fn io_err(e: std::io::Error) -> Error {
    Error::Data(format!("io: {e}"))
}

/// Write `label,re,im` rows for a complex-valued table.
pub fn write_complex_table<W: Write>(
    w: &mut W,
    label: &str,
    xs: &[f64],
    values: &[Complex64],
) -> Result<()> {
    writeln!(w, "{label},re,im").map_err(io_err)?;
    for (x, v) in xs.iter().zip(values) {
        writeln!(w, "{x},{},{}", v.re, v.im).map_err(io_err)?;
    }
    Ok(())
}

/// Write a spectrum as `energy_eV,re,im`.
pub fn write_spectrum<W: Write>(w: &mut W, spectrum: &Spectrum) -> Result<()> {
    write_complex_table(w, "energy_eV", &spectrum.omegas, &spectrum.values)
}

/// Write a real curve as `energy_eV,value` (or a custom header).
pub fn write_curve<W: Write>(w: &mut W, header: &str, curve: &Curve) -> Result<()> {
    writeln!(w, "{header}").map_err(io_err)?;
    for (x, y) in curve.x.iter().zip(&curve.y) {
        writeln!(w, "{x},{y}").map_err(io_err)?;
    }
    Ok(())
}

/// Reflectivity map: header `energy_eV,θ1,θ2,...`, one row per energy.
pub fn write_map<W: Write>(w: &mut W, map: &ReflectivityMap) -> Result<()> {
    write!(w, "energy_eV").map_err(io_err)?;
    for t in &map.thetas_deg {
        write!(w, ",{t}").map_err(io_err)?;
    }
    writeln!(w).map_err(io_err)?;
    for (e, row) in map.energies.iter().zip(&map.values) {
        write!(w, "{e}").map_err(io_err)?;
        for v in row {
            write!(w, ",{v}").map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    Ok(())
}

/// Per-angle polariton dip positions with shared error bars.
pub fn write_peaks<W: Write>(w: &mut W, peaks: &[PeakError]) -> Result<()> {
    writeln!(w, "angle_deg,E_LP,E_UP,err,n_valid,flagged").map_err(io_err)?;
    for p in peaks {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            p.theta_deg, p.e_lp, p.e_up, p.err, p.n_valid, p.flagged
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn parse_f64(s: &str, lineno: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::data(format!("line {lineno}: {e} in {s:?}")))
}

/// Ingest a two-column `x,value` CSV (header required). Rows are sorted and
/// duplicate abscissae averaged; any such normalization is reported as a
/// warning string.
pub fn read_curve<R: BufRead>(r: R) -> Result<(Curve, Vec<String>)> {
    let mut points = Vec::new();
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::data("empty file".to_string()))?
        .map_err(io_err)?;
    if header.trim().parse::<f64>().is_ok() {
        return Err(Error::data("missing header row".to_string()));
    }
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let x = parse_f64(
            cols.next().ok_or_else(|| Error::data(format!("line {}: empty row", i + 2)))?,
            i + 2,
        )?;
        let y = parse_f64(
            cols.next()
                .ok_or_else(|| Error::data(format!("line {}: missing value column", i + 2)))?,
            i + 2,
        )?;
        points.push((x, y));
    }
    Curve::from_points(points)
}

/// Ingest a complex table written by [`write_complex_table`].
pub fn read_complex_table<R: BufRead>(r: R) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.split(',').next().unwrap_or("").parse::<f64>().is_err())
        {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 3 {
            return Err(Error::data(format!("line {}: expected 3 columns", i + 1)));
        }
        xs.push(parse_f64(cols[0], i + 1)?);
        vs.push(Complex64::new(parse_f64(cols[1], i + 1)?, parse_f64(cols[2], i + 1)?));
    }
    if xs.is_empty() {
        return Err(Error::data("empty table".to_string()));
    }
    Ok((xs, vs))
}

/// Ingest minima rows: `angle_deg,E_LP,E_UP,depth_LP,depth_UP`.
pub fn read_minima<R: BufRead>(r: R) -> Result<Vec<MinimaRow>> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("angle")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 5 {
            return Err(Error::data(format!("line {}: expected 5 columns", i + 1)));
        }
        rows.push(MinimaRow {
            angle_deg: parse_f64(cols[0], i + 1)?,
            e_lp: parse_f64(cols[1], i + 1)?,
            e_up: parse_f64(cols[2], i + 1)?,
            depth_lp: parse_f64(cols[3], i + 1)?,
            depth_up: parse_f64(cols[4], i + 1)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::data("no minima rows".to_string()));
    }
    Ok(rows)
}

/// Write the minima schema.
pub fn write_minima<W: Write>(w: &mut W, rows: &[MinimaRow]) -> Result<()> {
    writeln!(w, "angle_deg,E_LP,E_UP,depth_LP,depth_UP").map_err(io_err)?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.angle_deg, r.e_lp, r.e_up, r.depth_lp, r.depth_up)
            .map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::SpectrumRole;

    #[test]
    fn spectrum_roundtrip_is_bit_identical() {
        let spec = Spectrum::new(
            vec![1.0, 2.0 / 3.0 + 2.0, std::f64::consts::PI],
            vec![
                Complex64::new(0.1, -0.2),
                Complex64::new(1.0 / 3.0, 7e-23),
                Complex64::new(-5.5e8, 2.0),
            ],
            SpectrumRole::Susceptibility,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &spec).unwrap();
        let (xs, vs) = read_complex_table(&buf[..]).unwrap();
        assert_eq!(xs, spec.omegas);
        assert_eq!(vs, spec.values);
    }

    #[test]
    fn curve_roundtrip_and_warnings() {
        let text = "energy_eV,value\n3.0,0.5\n2.0,0.25\n2.0,0.35\n";
        let (curve, warnings) = read_curve(text.as_bytes()).unwrap();
        assert_eq!(curve.x, vec![2.0, 3.0]);
        assert_eq!(curve.y, vec![0.3, 0.5]);
        assert_eq!(warnings.len(), 2);
        let mut buf = Vec::new();
        write_curve(&mut buf, "energy_eV,value", &curve).unwrap();
        let (again, w2) = read_curve(&buf[..]).unwrap();
        assert_eq!(again, curve);
        assert!(w2.is_empty());
    }

    #[test]
    fn bad_rows_rejected() {
        assert!(read_curve("energy_eV,value\n1.0,abc\n".as_bytes()).is_err());
        assert!(read_curve("".as_bytes()).is_err());
        assert!(read_curve("1.0,0.5\n".as_bytes()).is_err());
    }

    #[test]
    fn minima_roundtrip() {
        let rows = vec![MinimaRow {
            angle_deg: 35.0,
            e_lp: 3.1,
            e_up: 4.0,
            depth_lp: 0.3,
            depth_up: 0.55,
        }];
        let mut buf = Vec::new();
        write_minima(&mut buf, &rows).unwrap();
        let again = read_minima(&buf[..]).unwrap();
        assert_eq!(again.len(), 1);
        assert_eq!(again[0].e_lp, 3.1);
    }
}
