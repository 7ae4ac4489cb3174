use nalgebra::{Matrix2, Vector2};

use super::{reference_basis, CellQuadrature, FeSpace};
use crate::error::{Error, Result};
use crate::mesh::Point2;

/// Geometry of one quadrature point of a mapped cell.
#[derive(Debug, Clone, Copy)]
pub struct QpGeom {
    pub x: Point2,
    /// `D(F o G_K)` at the reference point.
    pub jac: Matrix2<f64>,
    pub det: f64,
    /// `J^{-T}`, which maps reference gradients to physical ones.
    pub jinv_t: Matrix2<f64>,
    /// Quadrature weight times `det J`.
    pub dx: f64,
}

/// The map `x -> sum_j f_j b_j(x)` given by coefficients of a vector space.
#[derive(Debug, Clone, Copy)]
pub struct IsoMap<'a> {
    space: &'a FeSpace,
    coeffs: &'a [f64],
}

impl<'a> IsoMap<'a> {
    pub fn new(space: &'a FeSpace, coeffs: &'a [f64]) -> Result<Self> {
        if space.components() != 2 {
            return Err(Error::IncompatibleSpaces(
                "geometry needs a 2-vector space".into(),
            ));
        }
        if coeffs.len() != space.ndofs() {
            return Err(Error::DimensionMismatch {
                expected: space.ndofs(),
                found: coeffs.len(),
            });
        }
        Ok(Self { space, coeffs })
    }

    /// Interleaved node coordinates: the identity map.
    pub fn identity_coeffs(space: &FeSpace) -> Vec<f64> {
        space.dof_coords().iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn space(&self) -> &'a FeSpace {
        self.space
    }

    pub fn coeffs(&self) -> &'a [f64] {
        self.coeffs
    }

    fn node(&self, d: usize) -> Vector2<f64> {
        Vector2::new(self.coeffs[2 * d], self.coeffs[2 * d + 1])
    }

    /// Point and Jacobian from tabulated basis values and reference gradients.
    #[inline]
    pub fn eval_tab(&self, cell: usize, values: &[f64], grads: &[Vector2<f64>]) -> (Point2, Matrix2<f64>) {
        let mut x = Vector2::zeros();
        let mut jac = Matrix2::zeros();
        for (l, &d) in self.space.cell_dofs(cell).iter().enumerate() {
            let f = self.node(d);
            x += f * values[l];
            jac += f * grads[l].transpose();
        }
        (Point2::from(x), jac)
    }

    /// Point, Jacobian and determinant at reference point `xhat` of `cell`.
    pub fn eval(&self, cell: usize, xhat: &Point2) -> (Point2, Matrix2<f64>, f64) {
        let (v, g) = reference_basis(self.space.degree(), xhat);
        let (x, jac) = self.eval_tab(cell, &v, &g);
        (x, jac, jac.determinant())
    }

    /// Geometry at every point of `quad`; fails on a non-positive determinant.
    pub fn cell_geometry(&self, cell: usize, quad: &CellQuadrature) -> Result<Vec<QpGeom>> {
        let tab = quad.table(self.space.degree());
        let mut out = Vec::with_capacity(quad.len());
        for q in 0..quad.len() {
            let (x, jac) = self.eval_tab(cell, &tab.values[q], &tab.grads[q]);
            let det = jac.determinant();
            if !(det > 0.0) {
                return Err(Error::InvertedElement { cell, det });
            }
            let inv = Matrix2::new(jac[(1, 1)], -jac[(0, 1)], -jac[(1, 0)], jac[(0, 0)]) / det;
            out.push(QpGeom {
                x,
                jac,
                det,
                jinv_t: inv.transpose(),
                dx: quad.rule.weights[q] * det,
            });
        }
        Ok(out)
    }

    /// Smallest `det J / det B` of `cell` over the points of `quad`.
    pub fn min_det_ratio(&self, cell: usize, quad: &CellQuadrature) -> f64 {
        let tab = quad.table(self.space.degree());
        let b = 2.0 * self.space.mesh().cell_area(cell);
        (0..quad.len())
            .map(|q| self.eval_tab(cell, &tab.values[q], &tab.grads[q]).1.determinant() / b)
            .fold(f64::INFINITY, f64::min)
    }

    /// Mapped position of every node of `target` (which shares the mesh).
    pub fn map_nodes(&self, target: &FeSpace) -> Result<Vec<Point2>> {
        if !target.same_mesh(self.space) {
            return Err(Error::IncompatibleSpaces("spaces live on different meshes".into()));
        }
        if target.degree() <= self.space.degree() {
            // nodes of the target are nodes of the geometry space
            return Ok((0..target.num_scalar()).map(|d| Point2::from(self.node(d))).collect());
        }
        let mut out = vec![Point2::origin(); target.num_scalar()];
        let nodes = super::reference_nodes(target.degree());
        for k in 0..target.mesh().num_cells() {
            for (l, &d) in target.cell_dofs(k).iter().enumerate() {
                out[d] = self.eval(k, &nodes[l]).0;
            }
        }
        Ok(out)
    }
}

/// Checked point evaluation of the isoparametric map.
pub fn physical_geometry(map: &IsoMap<'_>, cell: usize, xhat: &Point2) -> Result<(Point2, Matrix2<f64>, f64)> {
    let (x, jac, det) = map.eval(cell, xhat);
    if !(det > 0.0) {
        return Err(Error::InvertedElement { cell, det });
    }
    Ok((x, jac, det))
}
