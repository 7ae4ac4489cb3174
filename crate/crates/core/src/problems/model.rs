use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use super::{require_adjoint, shape_gradient, Discretization, Objective, ProblemKind, ShapeProblem, StateSolution};
use crate::deform::DeformationState;
use crate::error::Result;
use crate::fem::{h1, integrate, load, mass, FeField, FeSpace};
use crate::linalg::{Factorization, LinearSystem, SymbolicCache};
use crate::mesh::BoundaryTag;

/// `J = 1/2 int u^2` where `(grad u, grad v) + (u, v) = (1, v)` with natural
/// boundary conditions.
#[derive(Debug)]
pub struct ModelProblem {
    disc: Discretization,
    space: Arc<FeSpace>,
    cache: SymbolicCache,
}

impl ModelProblem {
    pub fn new(disc: Discretization) -> Result<Self> {
        let space = disc.space(disc.degree(), 1)?;
        Ok(Self {
            disc,
            space,
            cache: SymbolicCache::default(),
        })
    }

    fn solve_h1(&self, def: &DeformationState, rhs: Vec<f64>) -> Result<Vec<f64>> {
        let a = h1(&self.space, &def.map(), self.disc.quadrature())?;
        LinearSystem::new(a, rhs)?.solve(Factorization::Cholesky, Some(&self.cache))
    }
}

impl ShapeProblem for ModelProblem {
    fn kind(&self) -> ProblemKind {
        ProblemKind::Model
    }

    fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn solve_state(&self, def: &DeformationState) -> Result<StateSolution> {
        let rhs = load(&self.space, &def.map(), self.disc.quadrature(), |_| [1.0, 0.0])?;
        let u = self.solve_h1(def, rhs)?;
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

    fn solve_adjoint(&self, def: &DeformationState, sol: &StateSolution) -> Result<Option<FeField>> {
        let m = mass(&self.space, &def.map(), self.disc.quadrature())?;
        let p = self.solve_h1(def, m.mul_vec(&sol.state.coeffs))?;
        Ok(Some(FeField::new(self.space.clone(), p)?))
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
                .map(|(q, qp)| qp.dx * 0.5 * self.space.eval_at(u, k, &tab.values[q])[0].powi(2))
                .sum())
        })?;
        Ok(Objective::plain(j))
    }

    fn assemble_dj(&self, def: &DeformationState, sol: &StateSolution) -> Result<Vec<f64>> {
        let p = require_adjoint(sol, "model")?;
        let tab = self.disc.quadrature().table(self.space.degree());
        let u = &sol.state.coeffs;
        shape_gradient(def, self.disc.quadrature(), |k, q, qp| {
            let uv = self.space.eval_at(u, k, &tab.values[q])[0];
            let pv = self.space.eval_at(&p.coeffs, k, &tab.values[q])[0];
            let gu: Vector2<f64> = self.space.grad_at(u, k, &tab.grads[q], qp).row(0).transpose();
            let gp: Vector2<f64> = self.space.grad_at(&p.coeffs, k, &tab.grads[q], qp).row(0).transpose();
            let c = 0.5 * uv * uv - gu.dot(&gp) - uv * pv + pv;
            let s1 = Matrix2::identity() * c + gu * gp.transpose() + gp * gu.transpose();
            (s1, Vector2::zeros())
        })
    }

    fn fixed_tags(&self) -> &[BoundaryTag] {
        &[]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{AnnulusOptions, Circle, Point2, Rect};
    use crate::problems::domains::AnnulusDomain;
    use crate::problems::testing::taylor_order;
    use crate::spline::SplineGrid;

    fn problem(p: usize) -> ModelProblem {
        let dom = AnnulusDomain {
            hole: Circle::new(Point2::origin(), 0.4),
            outer: Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
            n_theta: 16,
            n_r: 4,
            options: AnnulusOptions::default(),
        };
        let (mesh, curved) = dom.build(1).unwrap();
        ModelProblem::new(Discretization::new(Arc::new(mesh), curved, p, true).unwrap()).unwrap()
    }

    #[test]
    fn state_and_adjoint_are_one() {
        for p in 1..=2 {
            let pb = problem(p);
            let def = pb.discretization().initial_deformation().unwrap();
            let (sol, dj) = pb.gradient(&def).unwrap();
            assert!(sol.state.coeffs.iter().all(|u| (u - 1.0).abs() < 1e-10));
            assert!(sol.adjoint.as_ref().unwrap().coeffs.iter().all(|u| (u - 1.0).abs() < 1e-10));
            let area = crate::problems::volume_moments(&def, pb.discretization().quadrature()).unwrap()[0];
            assert!((sol.objective.j - 0.5 * area).abs() < 1e-10);
            assert_eq!(dj.len(), pb.discretization().geometry().ndofs());
        }
    }

    #[test]
    fn derivative_is_half_the_divergence() {
        // with u = p = 1 the derivative of 1/2 |Omega| is 1/2 int div V
        let pb = problem(2);
        let def = pb.discretization().initial_deformation().unwrap();
        let (_, dj) = pb.gradient(&def).unwrap();
        // V(x) = x has div V = 2
        let v = def.coeffs();
        let pairing: f64 = dj.iter().zip(v).map(|(a, b)| a * b).sum();
        let area = crate::problems::volume_moments(&def, pb.discretization().quadrature()).unwrap()[0];
        assert!((pairing - area).abs() < 1e-9, "{pairing} vs {area}");
    }

    #[test]
    fn missing_adjoint_is_an_error() {
        let pb = problem(1);
        let def = pb.discretization().initial_deformation().unwrap();
        let sol = pb.solve_state(&def).unwrap();
        assert!(matches!(pb.assemble_dj(&def, &sol), Err(crate::Error::MissingAdjoint(_))));
    }

    #[test]
    fn taylor_remainder_is_second_order() {
        let pb = problem(2);
        let grid = SplineGrid::new(Rect::new(Point2::new(-0.9, -0.9), Point2::new(0.9, 0.9)), 6, 3).unwrap();
        let (order, rem) = taylor_order(&pb, grid, 7, 0.2);
        assert!(order > 1.9, "order {order}, remainders {rem:?}");
    }
}
