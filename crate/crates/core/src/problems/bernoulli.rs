use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use super::{shape_gradient, Discretization, Objective, ProblemKind, ShapeProblem, StateSolution};
use crate::deform::DeformationState;
use crate::error::Result;
use crate::fem::{integrate, laplace, FeField, FeSpace};
use crate::linalg::{Factorization, LinearSystem, SymbolicCache};
use crate::mesh::BoundaryTag;

/// Optimal value for the default parameters, `25 - pi + 2 pi ln 5 - ...`
/// evaluated to double precision.
pub const BERNOULLI_OPTIMUM: f64 = 28.306941614057237;

/// Exterior Bernoulli problem: `u = 0` on the free inner boundary,
/// `u = ln(r0) - ln|x|` on the outer one, and the misfit
/// `J = int |grad u|^2 + g^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliParams {
    /// Radius of the optimal circle, entering the outer data.
    pub optimal_radius: f64,
    pub inner_value: f64,
    /// Prescribed Neumann trace on the free boundary.
    pub flux: f64,
}

impl Default for BernoulliParams {
    fn default() -> Self {
        Self {
            optimal_radius: 0.4,
            inner_value: 0.0,
            flux: 2.5,
        }
    }
}

impl BernoulliParams {
    pub fn outer_value(&self, x: &crate::mesh::Point2) -> f64 {
        self.optimal_radius.ln() - x.coords.norm().ln()
    }
}

#[derive(Debug)]
pub struct Bernoulli {
    disc: Discretization,
    params: BernoulliParams,
    space: Arc<FeSpace>,
    cache: SymbolicCache,
}

impl Bernoulli {
    pub fn new(disc: Discretization, params: BernoulliParams) -> Result<Self> {
        let space = disc.space(disc.degree(), 1)?;
        space.boundary_dofs(BoundaryTag::Inner)?;
        space.boundary_dofs(BoundaryTag::Outer)?;
        Ok(Self {
            disc,
            params,
            space,
            cache: SymbolicCache::default(),
        })
    }

    pub fn params(&self) -> &BernoulliParams {
        &self.params
    }
}

impl ShapeProblem for Bernoulli {
    fn kind(&self) -> ProblemKind {
        ProblemKind::Bernoulli
    }

    fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn solve_state(&self, def: &DeformationState) -> Result<StateSolution> {
        let map = def.map();
        let a = laplace(&self.space, &map, self.disc.quadrature())?;
        let n = self.space.ndofs();
        let mut sys = LinearSystem::new(a, vec![0.0; n])?;
        let x = map.map_nodes(&self.space)?;
        for &d in self.space.boundary_dofs(BoundaryTag::Outer)? {
            sys.fix(d, self.params.outer_value(&x[d]));
        }
        for &d in self.space.boundary_dofs(BoundaryTag::Inner)? {
            sys.fix(d, self.params.inner_value);
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
        let g2 = self.params.flux.powi(2);
        let u = &sol.state.coeffs;
        let j = integrate(self.space.mesh().num_cells(), |k| {
            let geo = map.cell_geometry(k, quad)?;
            Ok(geo
                .iter()
                .enumerate()
                .map(|(q, qp)| {
                    let g = self.space.grad_at(u, k, &tab.grads[q], qp);
                    qp.dx * (g.norm_squared() + g2)
                })
                .sum())
        })?;
        Ok(Objective::plain(j))
    }

    fn assemble_dj(&self, def: &DeformationState, sol: &StateSolution) -> Result<Vec<f64>> {
        let tab = self.disc.quadrature().table(self.space.degree());
        let g2 = self.params.flux.powi(2);
        let u = &sol.state.coeffs;
        shape_gradient(def, self.disc.quadrature(), |k, q, qp| {
            let g: Vector2<f64> = self.space.grad_at(u, k, &tab.grads[q], qp).row(0).transpose();
            let s1 = Matrix2::identity() * (g.norm_squared() + g2) - g * g.transpose() * 2.0;
            (s1, Vector2::zeros())
        })
    }

    fn fixed_tags(&self) -> &[BoundaryTag] {
        &[BoundaryTag::Outer]
    }

    fn reference_value(&self) -> Option<f64> {
        (self.params == BernoulliParams::default()).then_some(BERNOULLI_OPTIMUM)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{AnnulusOptions, Circle, Point2, Rect};
    use crate::problems::domains::AnnulusDomain;
    use crate::problems::testing::taylor_order;
    use crate::problems::volume_moments;
    use crate::spline::SplineGrid;

    fn problem(hole: Circle, p: usize, refinements: usize) -> Bernoulli {
        let dom = AnnulusDomain {
            hole,
            outer: Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
            n_theta: 16,
            n_r: 4,
            options: AnnulusOptions::default(),
        };
        let (mesh, curved) = dom.build(refinements).unwrap();
        let disc = Discretization::new(Arc::new(mesh), curved, p, true).unwrap();
        Bernoulli::new(disc, BernoulliParams::default()).unwrap()
    }

    fn optimal(p: usize, refinements: usize) -> Bernoulli {
        problem(Circle::new(Point2::origin(), 0.4), p, refinements)
    }

    #[test]
    fn state_at_optimum_approaches_logarithm() {
        let mut errs = Vec::new();
        for r in 0..3 {
            let pb = optimal(2, r);
            let def = pb.discretization().initial_deformation().unwrap();
            let sol = pb.solve_state(&def).unwrap();
            let x = def.map().map_nodes(&pb.space).unwrap();
            let e = x
                .iter()
                .zip(&sol.state.coeffs)
                .map(|(x, u)| (u - pb.params.outer_value(x)).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[1] < errs[0] / 4.0 && errs[2] < errs[1] / 4.0, "{errs:?}");
    }

    #[test]
    fn functional_bounded_below_by_flux_area() {
        let pb = problem(Circle::new(Point2::new(0.04, 0.05), 0.5), 1, 1);
        let def = pb.discretization().initial_deformation().unwrap();
        let sol = pb.solve_state(&def).unwrap();
        let area = volume_moments(&def, pb.discretization().quadrature()).unwrap()[0];
        assert!(sol.objective.j >= 6.25 * area);
    }

    #[test]
    fn translation_does_not_change_the_functional() {
        // moving every node by a constant leaves J invariant only if both
        // boundaries move; the derivative pairing with a constant field is
        // the sum over one component
        let pb = optimal(2, 1);
        let def = pb.discretization().initial_deformation().unwrap();
        let (sol, dj) = pb.gradient(&def).unwrap();
        let sx: f64 = dj.iter().step_by(2).sum();
        let sy: f64 = dj.iter().skip(1).step_by(2).sum();
        assert!(sx.abs() < 1e-9 * sol.objective.j && sy.abs() < 1e-9 * sol.objective.j, "{sx} {sy}");
    }

    #[test]
    fn derivative_is_linear_and_vanishes_on_zero_field() {
        let pb = problem(Circle::new(Point2::new(0.04, 0.05), 0.5), 2, 0);
        let def = pb.discretization().initial_deformation().unwrap();
        let (_, dj) = pb.gradient(&def).unwrap();
        let n = dj.len();
        let u: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| (0.5 * i as f64).cos()).collect();
        let dot = |a: &[f64]| a.iter().zip(&dj).map(|(x, y)| x * y).sum::<f64>();
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.3 * a - 1.7 * b).collect();
        assert!((dot(&w) - (0.3 * dot(&u) - 1.7 * dot(&v))).abs() < 1e-12 * dot(&u).abs().max(1.0) * 10.0);
        assert_eq!(dot(&vec![0.0; n]), 0.0);
    }

    #[test]
    fn taylor_remainder_is_second_order() {
        for (p, iso) in [(1, true), (2, true), (2, false)] {
            let dom = AnnulusDomain {
                hole: Circle::new(Point2::new(0.04, 0.05), 0.5),
                outer: Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
                n_theta: 16,
                n_r: 4,
                options: AnnulusOptions::default(),
            };
            let (mesh, curved) = dom.build(1).unwrap();
            let pb = Bernoulli::new(
                Discretization::new(Arc::new(mesh), curved, p, iso).unwrap(),
                BernoulliParams::default(),
            )
            .unwrap();
            let grid = SplineGrid::new(Rect::new(Point2::new(-0.9, -0.9), Point2::new(0.9, 0.9)), 6, 3).unwrap();
            let (order, rem) = taylor_order(&pb, grid, 11, 0.2);
            assert!(order > 1.9, "p={p} iso={iso}: order {order}, remainders {rem:?}");
        }
    }
}
