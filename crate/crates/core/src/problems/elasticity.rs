use std::sync::Arc;

use nalgebra::Matrix2;

use super::{
    shape_gradient, volume_moments, Discretization, Objective, Penalties, ProblemKind, ShapeProblem, StateSolution,
};
use crate::deform::DeformationState;
use crate::error::Result;
use crate::fem::{boundary_load, elasticity, integrate, FeField, FeSpace};
use crate::linalg::{Factorization, LinearSystem, SymbolicCache};
use crate::mesh::BoundaryTag;

/// Compliance `int A e(u) : e(u)` of a body clamped on `Clamp` and loaded by
/// a constant traction on `Load`, with an area penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityParams {
    pub young: f64,
    pub poisson: f64,
    pub plane_stress: bool,
    pub traction: [f64; 2],
    pub area_weight: f64,
}

impl Default for ElasticityParams {
    fn default() -> Self {
        Self {
            young: 15.0,
            poisson: 0.35,
            plane_stress: true,
            traction: [0.0, -1.0],
            area_weight: 5.0,
        }
    }
}

impl ElasticityParams {
    /// `(lambda, mu)` of the Hooke tensor.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.young, self.poisson);
        let mu = e / (2.0 * (1.0 + nu));
        let lambda = if self.plane_stress {
            e * nu / (1.0 - nu * nu)
        } else {
            e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        };
        (lambda, mu)
    }
}

#[derive(Debug)]
pub struct Elasticity {
    disc: Discretization,
    params: ElasticityParams,
    space: Arc<FeSpace>,
    initial_area: f64,
    cache: SymbolicCache,
}

impl Elasticity {
    pub fn new(disc: Discretization, params: ElasticityParams) -> Result<Self> {
        let space = disc.space(disc.degree(), 2)?;
        space.boundary_dofs(BoundaryTag::Clamp)?;
        space.boundary_dofs(BoundaryTag::Load)?;
        let initial_area = volume_moments(&disc.initial_deformation()?, disc.quadrature())?[0];
        Ok(Self {
            disc,
            params,
            space,
            initial_area,
            cache: SymbolicCache::default(),
        })
    }

    pub fn params(&self) -> &ElasticityParams {
        &self.params
    }

    pub fn initial_area(&self) -> f64 {
        self.initial_area
    }

    /// `int_Load g . u ds` on the current configuration.
    pub fn work(&self, def: &DeformationState, sol: &StateSolution) -> Result<f64> {
        let g = self.params.traction;
        let f = boundary_load(&self.space, &def.map(), BoundaryTag::Load, |_| g)?;
        Ok(f.iter().zip(&sol.state.coeffs).map(|(a, b)| a * b).sum())
    }

    fn stress(&self, g: &Matrix2<f64>) -> (Matrix2<f64>, Matrix2<f64>) {
        let (lambda, mu) = self.params.lame();
        let e = (g + g.transpose()) * 0.5;
        (e * (2.0 * mu) + Matrix2::identity() * (lambda * e.trace()), e)
    }
}

impl ShapeProblem for Elasticity {
    fn kind(&self) -> ProblemKind {
        ProblemKind::Elasticity
    }

    fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn solve_state(&self, def: &DeformationState) -> Result<StateSolution> {
        let map = def.map();
        let (lambda, mu) = self.params.lame();
        let a = elasticity(&self.space, &map, self.disc.quadrature(), lambda, mu)?;
        let g = self.params.traction;
        let f = boundary_load(&self.space, &map, BoundaryTag::Load, |_| g)?;
        let mut sys = LinearSystem::new(a, f)?;
        for &d in self.space.boundary_dofs(BoundaryTag::Clamp)? {
            sys.fix(2 * d, 0.0);
            sys.fix(2 * d + 1, 0.0);
        }
        let u = sys.solve(Factorization::Cholesky, Some(&self.cache))?;
        let mut sol = StateSolution {
            state: FeField::new(self.space.clone(), u)?,
            pressure: None,
            multiplier: None,
            adjoint: None,
            objective: Objective::plain(0.0),
        };
        sol.objective = self.eval_j(def, &sol)?;
        Ok(sol)
    }

    fn eval_j(&self, def: &DeformationState, sol: &StateSolution) -> Result<Objective> {
        let map = def.map();
        let quad = self.disc.quadrature();
        let tab = quad.table(self.space.degree());
        let u = &sol.state.coeffs;
        let j = integrate(self.space.mesh().num_cells(), |k| {
            let geo = map.cell_geometry(k, quad)?;
            Ok(geo
                .iter()
                .enumerate()
                .map(|(q, qp)| {
                    let (s, e) = self.stress(&self.space.grad_at(u, k, &tab.grads[q], qp));
                    qp.dx * s.dot(&e)
                })
                .sum())
        })?;
        let area = volume_moments(def, quad)?[0];
        Ok(Objective::with_penalties(
            j,
            Penalties {
                area: area - self.initial_area,
                barycenter: [0.0, 0.0],
                weights: [self.params.area_weight, 0.0, 0.0],
            },
        ))
    }

    fn assemble_dj(&self, def: &DeformationState, sol: &StateSolution) -> Result<Vec<f64>> {
        let quad = self.disc.quadrature();
        let tab = quad.table(self.space.degree());
        let u = &sol.state.coeffs;
        let pen = sol.objective.penalties.expect("elasticity objective carries penalties");
        shape_gradient(def, quad, |k, q, qp| {
            let g = self.space.grad_at(u, k, &tab.grads[q], qp);
            let (s, e) = self.stress(&g);
            let s1 = g.transpose() * s * 2.0 - Matrix2::identity() * s.dot(&e);
            let (ps1, ps0) = pen.density(&qp.x);
            (s1 + ps1, ps0)
        })
    }

    fn fixed_tags(&self) -> &[BoundaryTag] {
        &[BoundaryTag::Clamp, BoundaryTag::Load]
    }
}
