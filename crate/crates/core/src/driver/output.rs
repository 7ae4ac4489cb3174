use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::HistoryRecord;
use crate::deform::DeformationState;
use crate::error::Result;
use crate::mesh::{write_vtk, Point2, VtkField};
use crate::problems::StateSolution;

pub const HISTORY_HEADER: &str = "iter,J,Jerr,grad_norm,step,min_det";
pub const RATES_HEADER: &str = "level,h,Jerr,fitted_rate";

/// 17 significant digits; round-trips every finite double.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn history_csv(history: &[HistoryRecord]) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for r in history {
        let jerr = r.jerr.map_or_else(|| "nan".to_string(), format_real);
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.iteration,
            format_real(r.j),
            jerr,
            format_real(r.gradient_norm),
            format_real(r.step),
            format_real(r.min_det)
        )
        .unwrap();
    }
    s
}

pub fn vector_text(values: &[f64]) -> String {
    let mut s = String::with_capacity(24 * values.len());
    for v in values {
        s.push_str(&format_real(*v));
        s.push('\n');
    }
    s
}

/// Reads a vector written by [`vector_text`].
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|e| crate::Error::Parse {
                line: i + 1,
                msg: format!("{e}"),
            })
        })
        .collect()
}

pub fn rates_csv(rows: &[(usize, f64, f64)], rate: f64) -> String {
    let mut s = String::from(RATES_HEADER);
    s.push('\n');
    for &(level, h, jerr) in rows {
        writeln!(s, "{level},{},{},{}", format_real(h), format_real(jerr), format_real(rate)).unwrap();
    }
    s
}

/// Deformed mesh with vertex values of the state (and pressure).
pub fn vtk_text(def: &DeformationState, sol: Option<&StateSolution>) -> Result<String> {
    let mesh = def.space().mesh();
    let nv = mesh.num_nodes();
    let f = def.coeffs();
    let points: Vec<Point2> = (0..nv).map(|i| Point2::new(f[2 * i], f[2 * i + 1])).collect();
    let mut owned: Vec<(String, Vec<f64>, bool)> = Vec::new();
    if let Some(sol) = sol {
        let nc = sol.state.space.components();
        let vals = sol.state.coeffs[..nc * nv].to_vec();
        owned.push(("state".into(), vals, nc == 2));
        if let Some(p) = &sol.pressure {
            owned.push(("pressure".into(), p.coeffs[..nv].to_vec(), false));
        }
        if let Some(a) = &sol.adjoint {
            owned.push(("adjoint".into(), a.coeffs[..nv].to_vec(), false));
        }
    }
    let fields: Vec<VtkField<'_>> = owned
        .iter()
        .map(|(name, values, vector)| {
            if *vector {
                VtkField::Vector { name, values }
            } else {
                VtkField::Scalar { name, values }
            }
        })
        .collect();
    let mut buf = Vec::new();
    write_vtk(&mut buf, "morphopt deformed configuration", &points, mesh.cells(), &fields)?;
    Ok(String::from_utf8(buf).expect("VTK output is ASCII"))
}
