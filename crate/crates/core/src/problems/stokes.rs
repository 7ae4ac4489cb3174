use std::sync::Arc;

use nalgebra::Matrix2;

use super::{
    shape_gradient, volume_moments, Discretization, Objective, Penalties, ProblemKind, ShapeProblem, StateSolution,
};
use crate::deform::DeformationState;
use crate::error::{Error, Result};
use crate::fem::{integrate, stokes, FeField, FeSpace, StokesBlocks};
use crate::linalg::{Factorization, LinearSystem, SymbolicCache};
use crate::mesh::{BoundaryTag, Point2, Rect};

/// Dissipation `int |Du|^2` of Stokes flow past an obstacle, with penalties
/// keeping the fluid area and barycenter at their initial values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesParams {
    /// Channel; the inflow profile vanishes on its bottom and top sides.
    pub channel: Rect,
    /// Peak speed of the parabolic inflow.
    pub inflow_speed: f64,
    /// Constrain the pressure to zero mean with a multiplier.
    pub zero_mean: bool,
    /// `mu_0` (area) and `mu_1, mu_2` (barycenter).
    pub weights: [f64; 3],
}

impl Default for StokesParams {
    fn default() -> Self {
        Self {
            channel: Rect::new(Point2::new(-6.0, -2.5), Point2::new(6.0, 2.5)),
            inflow_speed: 1.0,
            zero_mean: true,
            weights: [1e2, 1e3, 1e3],
        }
    }
}

impl StokesParams {
    pub fn inflow(&self, x: &Point2) -> [f64; 2] {
        let h = self.channel.height();
        let y = x.y - self.channel.min.y;
        [self.inflow_speed * 4.0 * y * (h - y) / (h * h), 0.0]
    }
}

#[derive(Debug)]
pub struct Stokes {
    disc: Discretization,
    params: StokesParams,
    blocks: StokesBlocks,
    initial_moments: [f64; 3],
    cache: SymbolicCache,
}

impl Stokes {
    pub fn new(disc: Discretization, params: StokesParams) -> Result<Self> {
        if disc.degree() != 2 {
            return Err(Error::InvalidInput(
                "Stokes uses P2 velocities (FE degree 2)".into(),
            ));
        }
        let velocity = disc.space(2, 2)?;
        let pressure: Arc<FeSpace> = disc.space(1, 1)?;
        for tag in [BoundaryTag::Inflow, BoundaryTag::Wall, BoundaryTag::Obstacle] {
            velocity.boundary_dofs(tag)?;
        }
        let blocks = StokesBlocks::new(velocity, pressure, params.zero_mean)?;
        let initial_moments = volume_moments(&disc.initial_deformation()?, disc.quadrature())?;
        Ok(Self {
            disc,
            params,
            blocks,
            initial_moments,
            cache: SymbolicCache::default(),
        })
    }

    pub fn params(&self) -> &StokesParams {
        &self.params
    }

    /// `(|Omega|, int x, int y)` of the initial configuration.
    pub fn initial_moments(&self) -> [f64; 3] {
        self.initial_moments
    }

    pub fn blocks(&self) -> &StokesBlocks {
        &self.blocks
    }
}

impl ShapeProblem for Stokes {
    fn kind(&self) -> ProblemKind {
        ProblemKind::Stokes
    }

    fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn solve_state(&self, def: &DeformationState) -> Result<StateSolution> {
        let map = def.map();
        let vel = &self.blocks.velocity;
        let a = stokes(&self.blocks, &map, self.disc.quadrature())?;
        let mut sys = LinearSystem::new(a, vec![0.0; self.blocks.size()])?;
        let x = map.map_nodes(vel)?;
        for &d in vel.boundary_dofs(BoundaryTag::Inflow)? {
            let g = self.params.inflow(&x[d]);
            sys.fix(2 * d, g[0]);
            sys.fix(2 * d + 1, g[1]);
        }
        for tag in [BoundaryTag::Wall, BoundaryTag::Obstacle] {
            for &d in vel.boundary_dofs(tag)? {
                sys.fix(2 * d, 0.0);
                sys.fix(2 * d + 1, 0.0);
            }
        }
        let sol = sys.solve(Factorization::Lu, Some(&self.cache))?;
        let nu = self.blocks.num_velocity();
        let np = self.blocks.num_pressure();
        let mut out = StateSolution {
            state: FeField::new(vel.clone(), sol[..nu].to_vec())?,
            pressure: Some(FeField::new(self.blocks.pressure.clone(), sol[nu..nu + np].to_vec())?),
            multiplier: self.params.zero_mean.then(|| sol[nu + np]),
            adjoint: None,
            objective: Objective::plain(0.0),
        };
        out.objective = self.eval_j(def, &out)?;
        Ok(out)
    }

    fn eval_j(&self, def: &DeformationState, sol: &StateSolution) -> Result<Objective> {
        let map = def.map();
        let quad = self.disc.quadrature();
        let vel = &self.blocks.velocity;
        let tab = quad.table(2);
        let u = &sol.state.coeffs;
        let j = integrate(vel.mesh().num_cells(), |k| {
            let geo = map.cell_geometry(k, quad)?;
            Ok(geo
                .iter()
                .enumerate()
                .map(|(q, qp)| qp.dx * vel.grad_at(u, k, &tab.grads[q], qp).norm_squared())
                .sum())
        })?;
        let m = volume_moments(def, quad)?;
        let m0 = self.initial_moments;
        Ok(Objective::with_penalties(
            j,
            Penalties {
                area: m[0] - m0[0],
                barycenter: [m[1] - m0[1], m[2] - m0[2]],
                weights: self.params.weights,
            },
        ))
    }

    fn assemble_dj(&self, def: &DeformationState, sol: &StateSolution) -> Result<Vec<f64>> {
        let quad = self.disc.quadrature();
        let vel = &self.blocks.velocity;
        let pre = &self.blocks.pressure;
        let (tv, tp) = (quad.table(2), quad.table(1));
        let u = &sol.state.coeffs;
        let p = &sol
            .pressure
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("Stokes state without pressure".into()))?
            .coeffs;
        let lambda = sol.multiplier.unwrap_or(0.0);
        let pen = sol.objective.penalties.expect("Stokes objective carries penalties");
        shape_gradient(def, quad, |k, q, qp| {
            let g = vel.grad_at(u, k, &tv.grads[q], qp);
            let pv = pre.eval_at(p, k, &tp.values[q])[0];
            let div = g.trace();
            let c = g.norm_squared() - 2.0 * pv * div - 2.0 * lambda * pv;
            let s1 = Matrix2::identity() * c - g.transpose() * g * 2.0 + g.transpose() * (2.0 * pv);
            let (ps1, ps0) = pen.density(&qp.x);
            (s1 + ps1, ps0)
        })
    }

    fn fixed_tags(&self) -> &[BoundaryTag] {
        &[BoundaryTag::Inflow, BoundaryTag::Outflow, BoundaryTag::Wall]
    }
}

/// Pressure-block residual `B u + lambda m` of a solved state, relative to
/// the velocity scale.
pub fn divergence_residual(problem: &Stokes, def: &DeformationState, sol: &StateSolution) -> Result<f64> {
    let a = stokes(problem.blocks(), &def.map(), problem.discretization().quadrature())?;
    let mut x = sol.state.coeffs.clone();
    x.extend_from_slice(&sol.pressure.as_ref().expect("pressure").coeffs);
    if let Some(l) = sol.multiplier {
        x.push(l);
    }
    let r = a.mul_vec(&x);
    let nu = problem.blocks().num_velocity();
    let scale = sol.state.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    Ok(r[nu..].iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale)
}
