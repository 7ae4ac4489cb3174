//! Lagrangian P1/P2 finite elements on [`TriMesh`], with isoparametric
//! geometry supplied by a vector field in a P1 or P2 space.

mod assemble;
mod geometry;
mod reference;

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::CsrPattern;
use crate::mesh::{BoundaryTag, Point2, TriMesh};

pub use assemble::{
    assemble_cells, assemble_vector, boundary_load, elasticity, h1, integrate, laplace, load, mass,
    stokes, StokesBlocks,
};
pub use geometry::{physical_geometry, IsoMap, QpGeom};
pub use reference::{local_dim, reference_basis, reference_nodes, CellQuadrature, RefTable};

/// Scalar or 2-vector Lagrange space. Vector dof `2 i + c` is component `c`
/// at scalar node `i`; P2 node `V + e` sits at the midpoint of edge `e`.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<TriMesh>,
    degree: usize,
    components: usize,
    cell_dofs: Vec<[usize; 6]>,
    dof_coords: Vec<Point2>,
    boundary_dofs: BTreeMap<BoundaryTag, Vec<usize>>,
    // (cell, local edge, tag) for every tagged boundary edge
    boundary_faces: Vec<(usize, usize, BoundaryTag)>,
    pattern: OnceLock<Arc<CsrPattern>>,
}

impl FeSpace {
    pub fn new(mesh: Arc<TriMesh>, degree: usize, components: usize) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return Err(Error::InvalidInput(format!("FE degree {degree} not in 1..=2")));
        }
        if !(1..=2).contains(&components) {
            return Err(Error::InvalidInput(format!(
                "{components} components requested; only scalar and 2-vector spaces exist"
            )));
        }
        let nv = mesh.num_nodes();
        let mut cell_dofs = Vec::with_capacity(mesh.num_cells());
        for (cell, ce) in mesh.cells().iter().zip(mesh.cell_edges()) {
            let mut d = [usize::MAX; 6];
            d[..3].copy_from_slice(cell);
            if degree == 2 {
                for j in 0..3 {
                    d[3 + j] = nv + ce[j];
                }
            }
            cell_dofs.push(d);
        }
        let mut dof_coords = mesh.nodes().to_vec();
        if degree == 2 {
            dof_coords.extend(mesh.edges().iter().map(|e| {
                Point2::from((mesh.nodes()[e[0]].coords + mesh.nodes()[e[1]].coords) * 0.5)
            }));
        }

        let mut owner = vec![None; mesh.num_edges()];
        for (k, ce) in mesh.cell_edges().iter().enumerate() {
            for (j, &e) in ce.iter().enumerate() {
                owner[e] = Some((k, j));
            }
        }
        let mut boundary_dofs: BTreeMap<BoundaryTag, Vec<usize>> = BTreeMap::new();
        let mut boundary_faces = Vec::with_capacity(mesh.boundary_edges().len());
        for be in mesh.boundary_edges() {
            let e = mesh.edge_id(be.nodes[0], be.nodes[1]).expect("tagged edge exists");
            let (cell, local) = owner[e].expect("every edge has a cell");
            boundary_faces.push((cell, local, be.tag));
            let list = boundary_dofs.entry(be.tag).or_default();
            list.extend_from_slice(&be.nodes);
            if degree == 2 {
                list.push(nv + e);
            }
        }
        for list in boundary_dofs.values_mut() {
            list.sort_unstable();
            list.dedup();
        }

        Ok(Self {
            mesh,
            degree,
            components,
            cell_dofs,
            dof_coords,
            boundary_dofs,
            boundary_faces,
            pattern: OnceLock::new(),
        })
    }

    /// Same mesh and degree with a different number of components.
    pub fn with_components(&self, components: usize) -> Result<Self> {
        Self::new(self.mesh.clone(), self.degree, components)
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn num_scalar(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn ndofs(&self) -> usize {
        self.components * self.num_scalar()
    }

    /// Scalar nodes per cell.
    pub fn local_dim(&self) -> usize {
        local_dim(self.degree)
    }

    /// Scalar node indices of `cell` in local order.
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell][..self.local_dim()]
    }

    /// Global dofs of `cell`; local index `components * l + c`.
    pub fn cell_vector_dofs(&self, cell: usize) -> Vec<usize> {
        let nc = self.components;
        self.cell_dofs(cell)
            .iter()
            .flat_map(|&d| (0..nc).map(move |c| nc * d + c))
            .collect()
    }

    /// Node coordinates in the initial polytope.
    pub fn dof_coords(&self) -> &[Point2] {
        &self.dof_coords
    }

    /// Scalar nodes on edges carrying `tag`.
    pub fn boundary_dofs(&self, tag: BoundaryTag) -> Result<&[usize]> {
        self.boundary_dofs
            .get(&tag)
            .map(|v| v.as_slice())
            .ok_or(Error::UnknownTag(tag))
    }

    /// `(cell, local edge)` of every boundary edge carrying `tag`.
    pub fn boundary_faces(&self, tag: BoundaryTag) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.boundary_faces
            .iter()
            .filter(move |f| f.2 == tag)
            .map(|f| (f.0, f.1))
    }

    /// Sparsity pattern of a bilinear form on this space.
    pub fn pattern(&self) -> Arc<CsrPattern> {
        self.pattern
            .get_or_init(|| {
                let mut rows = vec![Vec::new(); self.ndofs()];
                for k in 0..self.mesh.num_cells() {
                    let dofs = self.cell_vector_dofs(k);
                    for &i in &dofs {
                        rows[i].extend_from_slice(&dofs);
                    }
                }
                Arc::new(CsrPattern::from_rows(self.ndofs(), rows))
            })
            .clone()
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// Value (per component) of the field with `coeffs` at tabulated basis
    /// values of one cell.
    pub fn eval_at(&self, coeffs: &[f64], cell: usize, basis: &[f64]) -> [f64; 2] {
        let nc = self.components;
        let mut out = [0.0; 2];
        for (l, &d) in self.cell_dofs(cell).iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate().take(nc) {
                *o += coeffs[nc * d + c] * basis[l];
            }
        }
        out
    }

    /// Physical gradient (rows are components) of the field with `coeffs`
    /// at one quadrature point.
    pub fn grad_at(
        &self,
        coeffs: &[f64],
        cell: usize,
        ref_grads: &[nalgebra::Vector2<f64>],
        qp: &QpGeom,
    ) -> nalgebra::Matrix2<f64> {
        let nc = self.components;
        let mut g = nalgebra::Matrix2::zeros();
        for (l, &d) in self.cell_dofs(cell).iter().enumerate() {
            let pg = qp.jinv_t * ref_grads[l];
            for c in 0..nc {
                let w = coeffs[nc * d + c];
                g[(c, 0)] += w * pg.x;
                g[(c, 1)] += w * pg.y;
            }
        }
        g
    }
}

/// Coefficients of a function in an [`FeSpace`].
#[derive(Debug, Clone)]
pub struct FeField {
    pub space: Arc<FeSpace>,
    pub coeffs: Vec<f64>,
}

impl FeField {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.ndofs() {
            return Err(Error::DimensionMismatch {
                expected: space.ndofs(),
                found: coeffs.len(),
            });
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let coeffs = vec![0.0; space.ndofs()];
        Self { space, coeffs }
    }

    /// Nodal values of component `c`.
    pub fn component(&self, c: usize) -> Vec<f64> {
        let nc = self.space.components();
        self.coeffs.iter().skip(c).step_by(nc).copied().collect()
    }
}
