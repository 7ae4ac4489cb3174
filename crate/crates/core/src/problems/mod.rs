//! PDE-constrained shape functionals: state solve, adjoint, value, and the
//! volume form of the shape derivative tested with every vector basis
//! function of the geometry space.
//!
//! Each derivative is written as `dJ(V) = int S1 : DV + s0 . V dx` over the
//! current configuration; the problem supplies the densities `S1` and `s0`.

mod bernoulli;
mod domains;
mod elasticity;
mod model;
mod stokes;

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::deform::DeformationState;
use crate::error::{Error, Result};
use crate::fem::{assemble_vector, integrate, CellQuadrature, FeField, FeSpace, QpGeom};
use crate::mesh::{BoundaryTag, CurvedBoundary, TriMesh};

pub use bernoulli::{Bernoulli, BernoulliParams, BERNOULLI_OPTIMUM};
pub use domains::{AnnulusDomain, RectangleDomain};
pub use elasticity::{Elasticity, ElasticityParams};
pub use model::ModelProblem;
pub use stokes::{divergence_residual, Stokes, StokesParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Model,
    Bernoulli,
    Stokes,
    Elasticity,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [Self::Model, Self::Bernoulli, Self::Stokes, Self::Elasticity];

    pub fn name(self) -> &'static str {
        match self {
            Self::Model => "model",
            Self::Bernoulli => "bernoulli",
            Self::Stokes => "stokes",
            Self::Elasticity => "elasticity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Mesh, analytic curved boundaries, FE degree and the geometry space.
///
/// With `isoparametric` the geometry space has the state degree; otherwise
/// it is P1 and curved boundaries are resolved only by the mesh vertices.
#[derive(Debug)]
pub struct Discretization {
    mesh: Arc<TriMesh>,
    curved: CurvedBoundary,
    degree: usize,
    isoparametric: bool,
    geometry: Arc<FeSpace>,
    quad: CellQuadrature,
}

impl Discretization {
    pub fn new(mesh: Arc<TriMesh>, curved: CurvedBoundary, degree: usize, isoparametric: bool) -> Result<Self> {
        let geo_degree = if isoparametric { degree } else { 1 };
        let geometry = Arc::new(FeSpace::new(mesh.clone(), geo_degree, 2)?);
        Ok(Self {
            mesh,
            curved,
            degree,
            isoparametric,
            geometry,
            quad: CellQuadrature::for_degree(degree),
        })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn curved(&self) -> &CurvedBoundary {
        &self.curved
    }

    /// FE degree of the state.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn isoparametric(&self) -> bool {
        self.isoparametric
    }

    /// Vector space carrying the deformation `F`.
    pub fn geometry(&self) -> &Arc<FeSpace> {
        &self.geometry
    }

    pub fn quadrature(&self) -> &CellQuadrature {
        &self.quad
    }

    pub fn initial_deformation(&self) -> Result<DeformationState> {
        DeformationState::init(self.geometry.clone(), &self.curved)
    }

    /// A state space of the given degree and component count on the mesh.
    pub fn space(&self, degree: usize, components: usize) -> Result<Arc<FeSpace>> {
        if degree == self.geometry.degree() && components == 2 {
            return Ok(self.geometry.clone());
        }
        Ok(Arc::new(FeSpace::new(self.mesh.clone(), degree, components)?))
    }
}

/// Constraint values `A(T)` and `B_i(T)` with their penalty weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalties {
    pub area: f64,
    pub barycenter: [f64; 2],
    /// `mu_0, mu_1, mu_2`; a zero weight switches the term off.
    pub weights: [f64; 3],
}

impl Penalties {
    pub fn value(&self) -> f64 {
        let [m0, m1, m2] = self.weights;
        0.5 * (m0 * self.area.powi(2) + m1 * self.barycenter[0].powi(2) + m2 * self.barycenter[1].powi(2))
    }

    /// Contribution `(S1, s0)` of the squared-constraint penalties at `x`.
    pub fn density(&self, x: &crate::mesh::Point2) -> (Matrix2<f64>, Vector2<f64>) {
        let [m0, m1, m2] = self.weights;
        let (b1, b2) = (m1 * self.barycenter[0], m2 * self.barycenter[1]);
        let s1 = Matrix2::identity() * (m0 * self.area + b1 * x.x + b2 * x.y);
        (s1, Vector2::new(b1, b2))
    }
}

/// Value of the functional; `penalized` adds the constraint penalties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub j: f64,
    pub penalized: f64,
    pub penalties: Option<Penalties>,
}

impl Objective {
    fn plain(j: f64) -> Self {
        Self {
            j,
            penalized: j,
            penalties: None,
        }
    }

    fn with_penalties(j: f64, p: Penalties) -> Self {
        Self {
            j,
            penalized: j + p.value(),
            penalties: Some(p),
        }
    }
}

/// Discrete state (and adjoint) on one configuration.
#[derive(Debug, Clone)]
pub struct StateSolution {
    pub state: FeField,
    pub pressure: Option<FeField>,
    /// Multiplier of the zero-mean pressure constraint.
    pub multiplier: Option<f64>,
    pub adjoint: Option<FeField>,
    pub objective: Objective,
}

pub trait ShapeProblem: Send + Sync + fmt::Debug {
    fn kind(&self) -> ProblemKind;

    fn discretization(&self) -> &Discretization;

    /// Solves the state equation and evaluates the functional.
    fn solve_state(&self, def: &DeformationState) -> Result<StateSolution>;

    /// Solves the adjoint equation, where the problem has one.
    fn solve_adjoint(&self, _def: &DeformationState, _sol: &StateSolution) -> Result<Option<FeField>> {
        Ok(None)
    }

    fn eval_j(&self, def: &DeformationState, sol: &StateSolution) -> Result<Objective>;

    /// `dJ(v_i)` for every vector basis function `v_i` of the geometry space.
    fn assemble_dj(&self, def: &DeformationState, sol: &StateSolution) -> Result<Vec<f64>>;

    /// Boundaries that must not move; the hold-all box must avoid them.
    fn fixed_tags(&self) -> &[BoundaryTag];

    /// Known optimal value, if any.
    fn reference_value(&self) -> Option<f64> {
        None
    }

    /// Penalized functional value on `def`.
    fn evaluate(&self, def: &DeformationState) -> Result<f64> {
        Ok(self.solve_state(def)?.objective.penalized)
    }

    /// State, adjoint and derivative vector on `def`.
    fn gradient(&self, def: &DeformationState) -> Result<(StateSolution, Vec<f64>)> {
        let mut sol = self.solve_state(def)?;
        sol.adjoint = self.solve_adjoint(def, &sol)?;
        let dj = self.assemble_dj(def, &sol)?;
        Ok((sol, dj))
    }
}

/// `int S1 : D v_i + s0 . v_i` for every vector basis function `v_i` of the
/// geometry space, with densities given per `(cell, point, geometry)`.
pub fn shape_gradient<F>(def: &DeformationState, quad: &CellQuadrature, density: F) -> Result<Vec<f64>>
where
    F: Fn(usize, usize, &QpGeom) -> (Matrix2<f64>, Vector2<f64>) + Sync,
{
    let space = def.space();
    let map = def.map();
    let tab = quad.table(space.degree());
    let nl = space.local_dim();
    assemble_vector(space.ndofs(), space.mesh().num_cells(), |k| {
        let geo = map.cell_geometry(k, quad)?;
        let mut vals = vec![0.0; 2 * nl];
        for (q, qp) in geo.iter().enumerate() {
            let (s1, s0) = density(k, q, qp);
            for l in 0..nl {
                let sg = s1 * (qp.jinv_t * tab.grads[q][l]);
                let v = tab.values[q][l];
                vals[2 * l] += qp.dx * (sg.x + s0.x * v);
                vals[2 * l + 1] += qp.dx * (sg.y + s0.y * v);
            }
        }
        Ok((space.cell_vector_dofs(k), vals))
    })
}

/// `(|T(Omega)|, int x, int y)` over the current configuration.
pub fn volume_moments(def: &DeformationState, quad: &CellQuadrature) -> Result<[f64; 3]> {
    let map = def.map();
    let ncells = def.space().mesh().num_cells();
    let moment = |f: fn(&QpGeom) -> f64| {
        integrate(ncells, |k| {
            Ok(map.cell_geometry(k, quad)?.iter().map(|qp| qp.dx * f(qp)).sum())
        })
    };
    Ok([moment(|_| 1.0)?, moment(|qp| qp.x.x)?, moment(|qp| qp.x.y)?])
}

fn require_adjoint<'a>(sol: &'a StateSolution, name: &'static str) -> Result<&'a FeField> {
    sol.adjoint.as_ref().ok_or(Error::MissingAdjoint(name))
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::deform::InterpolationMatrix;
    use crate::spline::{SplineGrid, SplineSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Fitted order of the Taylor remainder along a random spline direction.
    pub fn taylor_order(problem: &dyn ShapeProblem, grid: SplineGrid, seed: u64, scale: f64) -> (f64, Vec<f64>) {
        let spline = SplineSpace::new(grid).unwrap();
        let geo = problem.discretization().geometry();
        let ih = InterpolationMatrix::build(&spline, geo).unwrap();
        let def = problem.discretization().initial_deformation().unwrap();
        let (sol, dj) = problem.gradient(&def).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dt: Vec<f64> = (0..spline.dim()).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let slope: f64 = ih.apply(&dt).unwrap().iter().zip(&dj).map(|(a, b)| a * b).sum();
        let j0 = sol.objective.penalized;
        let steps = [1e-1, 1e-2, 1e-3];
        let rem: Vec<f64> = steps
            .iter()
            .map(|&s| {
                let js = problem.evaluate(&def.apply_update(&ih, &dt, s).unwrap()).unwrap();
                (js - j0 - s * slope).abs()
            })
            .collect();
        let order = (rem[0].ln() - rem[2].ln()) / (steps[0].ln() - steps[2].ln());
        (order, rem)
    }
}
