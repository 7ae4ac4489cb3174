use std::sync::Arc;

use nalgebra::Vector2;
use rayon::prelude::*;

use super::{CellQuadrature, FeSpace, IsoMap};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, CsrPattern};
use crate::mesh::{BoundaryTag, Point2};
use crate::quadrature::gauss_legendre;

// cells per parallel batch; local results of a batch are scattered in order
const BATCH: usize = 4096;

/// Sums square local matrices `(global dofs, row-major values)` into a
/// matrix with the given pattern. Deterministic for any thread count.
pub fn assemble_cells<F>(ncells: usize, pattern: Arc<CsrPattern>, local: F) -> Result<CsrMatrix>
where
    F: Fn(usize) -> Result<(Vec<usize>, Vec<f64>)> + Sync,
{
    let mut m = CsrMatrix::zeros(pattern);
    for start in (0..ncells).step_by(BATCH) {
        let end = (start + BATCH).min(ncells);
        let locals = (start..end)
            .into_par_iter()
            .map(&local)
            .collect::<Result<Vec<_>>>()?;
        for (dofs, vals) in locals {
            let n = dofs.len();
            for (r, &i) in dofs.iter().enumerate() {
                for (s, &j) in dofs.iter().enumerate() {
                    let v = vals[r * n + s];
                    if v != 0.0 {
                        m.add(i, j, v);
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Sums local vectors into a global vector of length `n`.
pub fn assemble_vector<F>(n: usize, ncells: usize, local: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<(Vec<usize>, Vec<f64>)> + Sync,
{
    let mut out = vec![0.0; n];
    for start in (0..ncells).step_by(BATCH) {
        let end = (start + BATCH).min(ncells);
        let locals = (start..end)
            .into_par_iter()
            .map(&local)
            .collect::<Result<Vec<_>>>()?;
        for (dofs, vals) in locals {
            for (i, v) in dofs.into_iter().zip(vals) {
                out[i] += v;
            }
        }
    }
    Ok(out)
}

/// Sums per-cell values in cell order.
pub fn integrate<F>(ncells: usize, local: F) -> Result<f64>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    let vals = (0..ncells)
        .into_par_iter()
        .map(local)
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.iter().sum())
}

fn check_mesh(space: &FeSpace, map: &IsoMap<'_>) -> Result<()> {
    if space.same_mesh(map.space()) {
        Ok(())
    } else {
        Err(Error::IncompatibleSpaces(
            "state and geometry spaces live on different meshes".into(),
        ))
    }
}

/// Componentwise `a_grad * (grad u, grad v) + a_mass * (u, v)`.
fn scalar_forms(
    space: &FeSpace,
    map: &IsoMap<'_>,
    quad: &CellQuadrature,
    a_grad: f64,
    a_mass: f64,
) -> Result<CsrMatrix> {
    check_mesh(space, map)?;
    let tab = quad.table(space.degree());
    let nl = space.local_dim();
    let nc = space.components();
    assemble_cells(space.mesh().num_cells(), space.pattern(), |k| {
        let geo = map.cell_geometry(k, quad)?;
        let mut scalar = vec![0.0; nl * nl];
        let mut g = vec![Vector2::zeros(); nl];
        for (q, qp) in geo.iter().enumerate() {
            for l in 0..nl {
                g[l] = qp.jinv_t * tab.grads[q][l];
            }
            let v = &tab.values[q];
            for r in 0..nl {
                for s in 0..nl {
                    scalar[r * nl + s] += qp.dx * (a_grad * g[r].dot(&g[s]) + a_mass * v[r] * v[s]);
                }
            }
        }
        let n = nl * nc;
        let mut vals = vec![0.0; n * n];
        for r in 0..nl {
            for s in 0..nl {
                for c in 0..nc {
                    vals[(nc * r + c) * n + nc * s + c] = scalar[r * nl + s];
                }
            }
        }
        Ok((space.cell_vector_dofs(k), vals))
    })
}

/// `(grad u, grad v)` on the mapped domain, componentwise for vector spaces.
pub fn laplace(space: &FeSpace, map: &IsoMap<'_>, quad: &CellQuadrature) -> Result<CsrMatrix> {
    scalar_forms(space, map, quad, 1.0, 0.0)
}

/// `(u, v)` on the mapped domain.
pub fn mass(space: &FeSpace, map: &IsoMap<'_>, quad: &CellQuadrature) -> Result<CsrMatrix> {
    scalar_forms(space, map, quad, 0.0, 1.0)
}

/// `(grad u, grad v) + (u, v)`.
pub fn h1(space: &FeSpace, map: &IsoMap<'_>, quad: &CellQuadrature) -> Result<CsrMatrix> {
    scalar_forms(space, map, quad, 1.0, 1.0)
}

/// `(2 mu e(u) + lambda tr e(u) I, e(v))` for a 2-vector space.
pub fn elasticity(
    space: &FeSpace,
    map: &IsoMap<'_>,
    quad: &CellQuadrature,
    lambda: f64,
    mu: f64,
) -> Result<CsrMatrix> {
    check_mesh(space, map)?;
    if space.components() != 2 {
        return Err(Error::IncompatibleSpaces("elasticity needs a 2-vector space".into()));
    }
    let tab = quad.table(space.degree());
    let nl = space.local_dim();
    let n = 2 * nl;
    assemble_cells(space.mesh().num_cells(), space.pattern(), |k| {
        let geo = map.cell_geometry(k, quad)?;
        let mut vals = vec![0.0; n * n];
        let mut g = vec![Vector2::zeros(); nl];
        for (q, qp) in geo.iter().enumerate() {
            for l in 0..nl {
                g[l] = qp.jinv_t * tab.grads[q][l];
            }
            // basis (l, c): D phi = e_c (x) g_l
            for r in 0..n {
                let (lr, cr) = (r / 2, r % 2);
                for s in 0..n {
                    let (ls, cs) = (s / 2, s % 2);
                    // e(phi_r) : e(phi_s) = 1/2 (delta g_r.g_s + g_r[cs] g_s[cr])
                    let delta = if cr == cs { g[lr].dot(&g[ls]) } else { 0.0 };
                    let ee = 0.5 * (delta + g[lr][cs] * g[ls][cr]);
                    let div = g[lr][cr] * g[ls][cs];
                    vals[r * n + s] += qp.dx * (2.0 * mu * ee + lambda * div);
                }
            }
        }
        Ok((space.cell_vector_dofs(k), vals))
    })
}

/// `(f, v)` for a source `f` given at physical points.
pub fn load(
    space: &FeSpace,
    map: &IsoMap<'_>,
    quad: &CellQuadrature,
    f: impl Fn(&Point2) -> [f64; 2] + Sync,
) -> Result<Vec<f64>> {
    check_mesh(space, map)?;
    let tab = quad.table(space.degree());
    let nl = space.local_dim();
    let nc = space.components();
    assemble_vector(space.ndofs(), space.mesh().num_cells(), |k| {
        let geo = map.cell_geometry(k, quad)?;
        let mut vals = vec![0.0; nl * nc];
        for (q, qp) in geo.iter().enumerate() {
            let fx = f(&qp.x);
            for l in 0..nl {
                for c in 0..nc {
                    vals[nc * l + c] += qp.dx * fx[c] * tab.values[q][l];
                }
            }
        }
        Ok((space.cell_vector_dofs(k), vals))
    })
}

/// `int_{tag} g . v ds` by 3-point Gauss quadrature on each mapped edge.
pub fn boundary_load(
    space: &FeSpace,
    map: &IsoMap<'_>,
    tag: BoundaryTag,
    g: impl Fn(&Point2) -> [f64; 2],
) -> Result<Vec<f64>> {
    check_mesh(space, map)?;
    space.boundary_dofs(tag)?;
    let (gx, gw) = gauss_legendre(3);
    let corners = super::reference_nodes(1);
    let nc = space.components();
    let mut out = vec![0.0; space.ndofs()];
    for (k, j) in space.boundary_faces(tag) {
        let (a, b) = (corners[j], corners[(j + 1) % 3]);
        let dofs = space.cell_dofs(k);
        for (t, w) in gx.iter().zip(&gw) {
            let s = 0.5 * (t + 1.0);
            let xhat = a + (b - a) * s;
            let (x, jac, _) = map.eval(k, &xhat);
            let ds = (jac * (b - a)).norm() * 0.5 * w;
            let (vals, _) = super::reference_basis(space.degree(), &xhat);
            let gv = g(&x);
            for (l, &d) in dofs.iter().enumerate() {
                for c in 0..nc {
                    out[nc * d + c] += ds * gv[c] * vals[l];
                }
            }
        }
    }
    Ok(out)
}

/// Index layout of the Taylor–Hood saddle system: velocity dofs first, then
/// pressure, then (optionally) one multiplier enforcing zero mean pressure.
#[derive(Debug)]
pub struct StokesBlocks {
    pub velocity: Arc<FeSpace>,
    pub pressure: Arc<FeSpace>,
    pub zero_mean: bool,
    pattern: Arc<CsrPattern>,
}

impl StokesBlocks {
    pub fn new(velocity: Arc<FeSpace>, pressure: Arc<FeSpace>, zero_mean: bool) -> Result<Self> {
        if !velocity.same_mesh(&pressure)
            || velocity.components() != 2
            || pressure.components() != 1
            || velocity.degree() != 2
            || pressure.degree() != 1
        {
            return Err(Error::IncompatibleSpaces(
                "Stokes needs P2 vector velocity and P1 scalar pressure on one mesh".into(),
            ));
        }
        let nu = velocity.ndofs();
        let np = pressure.ndofs();
        let n = nu + np + usize::from(zero_mean);
        let mut rows = vec![Vec::new(); n];
        for k in 0..velocity.mesh().num_cells() {
            let dofs = Self::cell_dofs_of(&velocity, &pressure, k);
            for &i in &dofs {
                rows[i].extend_from_slice(&dofs);
            }
        }
        if zero_mean {
            rows[n - 1] = (nu..nu + np).collect();
            for r in rows.iter_mut().skip(nu).take(np) {
                r.push(n - 1);
            }
        }
        Ok(Self {
            pattern: Arc::new(CsrPattern::from_rows(n, rows)),
            velocity,
            pressure,
            zero_mean,
        })
    }

    fn cell_dofs_of(velocity: &FeSpace, pressure: &FeSpace, k: usize) -> Vec<usize> {
        let nu = velocity.ndofs();
        let mut d = velocity.cell_vector_dofs(k);
        d.extend(pressure.cell_dofs(k).iter().map(|&p| nu + p));
        d
    }

    pub fn cell_dofs(&self, k: usize) -> Vec<usize> {
        Self::cell_dofs_of(&self.velocity, &self.pressure, k)
    }

    pub fn num_velocity(&self) -> usize {
        self.velocity.ndofs()
    }

    pub fn num_pressure(&self) -> usize {
        self.pressure.ndofs()
    }

    pub fn size(&self) -> usize {
        self.num_velocity() + self.num_pressure() + usize::from(self.zero_mean)
    }
}

/// Symmetric saddle matrix `[[A, -B^T, 0], [-B, 0, -m], [0, -m^T, 0]]` with
/// `A` the vector Laplacian, `B_qv = (q, div v)` and `m_q = (q, 1)`.
pub fn stokes(blocks: &StokesBlocks, map: &IsoMap<'_>, quad: &CellQuadrature) -> Result<CsrMatrix> {
    let vel = &blocks.velocity;
    let pre = &blocks.pressure;
    check_mesh(vel, map)?;
    let tv = quad.table(2);
    let tp = quad.table(1);
    let nu = blocks.num_velocity();
    let np = blocks.num_pressure();
    let mut m = assemble_cells(vel.mesh().num_cells(), blocks.pattern.clone(), |k| {
        let geo = map.cell_geometry(k, quad)?;
        let n = 15;
        let mut vals = vec![0.0; n * n];
        let mut g = [Vector2::zeros(); 6];
        for (q, qp) in geo.iter().enumerate() {
            for l in 0..6 {
                g[l] = qp.jinv_t * tv.grads[q][l];
            }
            for r in 0..6 {
                for s in 0..6 {
                    let a = qp.dx * g[r].dot(&g[s]);
                    vals[(2 * r) * n + 2 * s] += a;
                    vals[(2 * r + 1) * n + 2 * s + 1] += a;
                }
            }
            for (i, psi) in tp.values[q].iter().enumerate() {
                for s in 0..6 {
                    for c in 0..2 {
                        // -(psi_i, d_c phi_s)
                        let b = -qp.dx * psi * g[s][c];
                        vals[(12 + i) * n + 2 * s + c] += b;
                        vals[(2 * s + c) * n + 12 + i] += b;
                    }
                }
            }
        }
        Ok((blocks.cell_dofs(k), vals))
    })?;
    if blocks.zero_mean {
        let ones = load(pre, map, quad, |_| [1.0, 0.0])?;
        let last = nu + np;
        for (i, v) in ones.iter().enumerate() {
            m.add(nu + i, last, -v);
            m.add(last, nu + i, -v);
        }
    }
    Ok(m)
}
