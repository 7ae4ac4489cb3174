use std::io::Write;

use super::Point2;
use crate::error::{Error, Result};

/// Point data attached to a VTK export.
#[derive(Debug, Clone)]
pub enum VtkField<'a> {
    Scalar { name: &'a str, values: &'a [f64] },
    /// Interleaved `(x, y)` pairs, one per point.
    Vector { name: &'a str, values: &'a [f64] },
}

/// Legacy ASCII VTK (`UNSTRUCTURED_GRID`, linear triangles).
pub fn write_vtk<W: Write>(
    out: &mut W,
    title: &str,
    points: &[Point2],
    cells: &[[usize; 3]],
    fields: &[VtkField<'_>],
) -> Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", points.len())?;
    for p in points {
        writeln!(out, "{:.16e} {:.16e} 0", p.x, p.y)?;
    }
    writeln!(out, "CELLS {} {}", cells.len(), 4 * cells.len())?;
    for c in cells {
        writeln!(out, "3 {} {} {}", c[0], c[1], c[2])?;
    }
    writeln!(out, "CELL_TYPES {}", cells.len())?;
    for _ in cells {
        writeln!(out, "5")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", points.len())?;
    }
    for f in fields {
        match f {
            VtkField::Scalar { name, values } => {
                if values.len() != points.len() {
                    return Err(Error::DimensionMismatch {
                        expected: points.len(),
                        found: values.len(),
                    });
                }
                writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
                for v in values.iter() {
                    writeln!(out, "{v:.16e}")?;
                }
            }
            VtkField::Vector { name, values } => {
                if values.len() != 2 * points.len() {
                    return Err(Error::DimensionMismatch {
                        expected: 2 * points.len(),
                        found: values.len(),
                    });
                }
                writeln!(out, "VECTORS {name} double")?;
                for v in values.chunks(2) {
                    writeln!(out, "{:.16e} {:.16e} 0", v[0], v[1])?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_counts() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let mut buf = Vec::new();
        write_vtk(
            &mut buf,
            "t",
            &pts,
            &[[0, 1, 2]],
            &[VtkField::Scalar {
                name: "u",
                values: &[1.0, 2.0, 3.0],
            }],
        )
        .unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\n"));
        assert!(s.contains("CELLS 1 4\n3 0 1 2\nCELL_TYPES 1\n5\n"));
        assert!(s.contains("POINT_DATA 3\nSCALARS u double 1"));
    }
}
