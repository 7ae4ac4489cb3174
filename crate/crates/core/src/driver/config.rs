use std::path::PathBuf;
use std::sync::Arc;

use crate::descent::default_step_grid;
use crate::deform::DET_THRESHOLD;
use crate::error::{Error, Result};
use crate::mesh::{
    parse_msh, AnnulusOptions, BoundaryTag, Circle, CurvedBoundary, Point2, Rect, TagDictionary, TriMesh,
};
use crate::problems::{
    AnnulusDomain, Bernoulli, BernoulliParams, Discretization, Elasticity, ElasticityParams, ModelProblem,
    ProblemKind, RectangleDomain, ShapeProblem, Stokes, StokesParams, BERNOULLI_OPTIMUM,
};
use crate::spline::{SplineGrid, SplineSpace};

/// Generated initial polytope.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Annulus(AnnulusDomain),
    Rectangle(RectangleDomain),
}

/// Everything needed to set up and run one optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ProblemKind,
    pub domain: Domain,
    /// Gmsh file replacing the generated mesh; curved boundaries are still
    /// taken from `domain`.
    pub mesh_file: Option<PathBuf>,
    pub refinements: usize,
    pub fe_degree: usize,
    pub isoparametric: bool,
    pub bernoulli: BernoulliParams,
    pub stokes: StokesParams,
    pub elasticity: ElasticityParams,
    pub spline_degree: usize,
    pub grid_width: f64,
    pub hold_all: Rect,
    pub max_iterations: usize,
    pub step_grid: Vec<f64>,
    pub det_threshold: f64,
    /// Stop once the H1(D) gradient norm drops below this value.
    pub gradient_tolerance: f64,
    /// Retry a stagnating line search once on a grid scaled by this factor.
    pub retry_scale: f64,
    pub reference: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

/// Grid widths `1.8 * 2^-level`.
pub fn grid_width_for_level(level: u32) -> f64 {
    1.8 * 0.5f64.powi(level as i32)
}

impl RunConfig {
    /// Defaults reproducing the shipped experiment for `kind`.
    pub fn preset(kind: ProblemKind) -> Self {
        let square = Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0));
        let base = Self {
            kind,
            domain: Domain::Annulus(AnnulusDomain {
                hole: Circle::new(Point2::new(0.04, 0.05), 0.5),
                outer: square,
                n_theta: 16,
                n_r: 4,
                options: AnnulusOptions::default(),
            }),
            mesh_file: None,
            refinements: 2,
            fe_degree: 2,
            isoparametric: true,
            bernoulli: BernoulliParams::default(),
            stokes: StokesParams::default(),
            elasticity: ElasticityParams::default(),
            spline_degree: 3,
            grid_width: grid_width_for_level(4),
            hold_all: Rect::new(Point2::new(-0.9, -0.9), Point2::new(0.9, 0.9)),
            max_iterations: 200,
            step_grid: default_step_grid(),
            det_threshold: DET_THRESHOLD,
            gradient_tolerance: 1e-10,
            retry_scale: 0.1,
            reference: None,
            output_dir: None,
        };
        match kind {
            ProblemKind::Bernoulli => Self {
                reference: Some(BERNOULLI_OPTIMUM),
                ..base
            },
            ProblemKind::Model => Self {
                refinements: 1,
                max_iterations: 20,
                ..base
            },
            ProblemKind::Stokes => {
                let stokes = StokesParams::default();
                Self {
                    domain: Domain::Annulus(AnnulusDomain {
                        hole: Circle::new(Point2::origin(), 0.5),
                        outer: stokes.channel,
                        n_theta: 48,
                        n_r: 10,
                        options: AnnulusOptions {
                            inner_tag: BoundaryTag::Obstacle,
                            side_tags: [BoundaryTag::Inflow, BoundaryTag::Outflow, BoundaryTag::Wall, BoundaryTag::Wall],
                            grading: 1.8,
                        },
                    }),
                    refinements: 0,
                    stokes,
                    grid_width: 0.2,
                    hold_all: Rect::new(Point2::new(-2.0, -2.0), Point2::new(2.0, 2.0)),
                    max_iterations: 100,
                    ..base
                }
            }
            ProblemKind::Elasticity => Self {
                domain: Domain::Rectangle(RectangleDomain {
                    rect: Rect::new(Point2::new(0.0, 0.0), Point2::new(2.0, 1.0)),
                    nx: 40,
                    ny: 20,
                    clamped: vec![(0.0, 0.2), (0.8, 1.0)],
                    loaded: vec![(0.45, 0.55)],
                }),
                refinements: 0,
                fe_degree: 1,
                grid_width: 0.1,
                hold_all: Rect::new(Point2::new(0.25, -0.2), Point2::new(1.9, 1.2)),
                max_iterations: 100,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(1..=2).contains(&self.fe_degree) {
            return bad(format!("FE degree {} not in 1..=2", self.fe_degree));
        }
        if !(1..=3).contains(&self.spline_degree) {
            return bad(format!("spline degree {} not in 1..=3", self.spline_degree));
        }
        if self.kind == ProblemKind::Stokes && self.fe_degree != 2 {
            return bad("stokes needs FE degree 2 (Taylor-Hood)".into());
        }
        if self.step_grid.is_empty() || self.step_grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return bad("line-search steps must lie in [0, 1]".into());
        }
        if !(self.det_threshold > 0.0) {
            return bad("determinant threshold must be positive".into());
        }
        if !(self.grid_width > 0.0) {
            return bad("grid width must be positive".into());
        }
        if !(self.retry_scale > 0.0 && self.retry_scale < 1.0) {
            return bad("retry scale must lie in (0, 1)".into());
        }
        match (self.kind, &self.domain) {
            (ProblemKind::Elasticity, Domain::Annulus(_)) => bad("elasticity needs a rectangle domain".into()),
            (ProblemKind::Elasticity, _) | (_, Domain::Annulus(_)) => Ok(()),
            _ => bad(format!("{} needs an annulus domain", self.kind)),
        }
    }

    /// Mesh and curved boundaries of the initial polytope.
    pub fn build_mesh(&self) -> Result<(TriMesh, CurvedBoundary)> {
        let (generated, curved) = match &self.domain {
            Domain::Annulus(d) => match &self.mesh_file {
                Some(_) => (None, CurvedBoundary::circle(d.options.inner_tag, d.hole)),
                None => {
                    let (m, c) = d.build(self.refinements)?;
                    (Some(m), c)
                }
            },
            Domain::Rectangle(d) => match &self.mesh_file {
                Some(_) => (None, CurvedBoundary::none()),
                None => {
                    let (m, c) = d.build(self.refinements)?;
                    (Some(m), c)
                }
            },
        };
        if let Some(m) = generated {
            return Ok((m, curved));
        }
        let path = self.mesh_file.as_ref().expect("mesh file set");
        let text = std::fs::read_to_string(path)?;
        let mut mesh = parse_msh(&text, &TagDictionary::default())?;
        for _ in 0..self.refinements {
            mesh = crate::mesh::uniform_refine(&mesh, Some(&curved))?;
        }
        Ok((mesh, curved))
    }

    pub fn spline_grid(&self) -> Result<SplineGrid> {
        SplineGrid::with_width(self.hold_all, self.grid_width, self.spline_degree)
    }

    /// The problem instance on the initial polytope.
    pub fn build_problem(&self) -> Result<Arc<dyn ShapeProblem>> {
        self.validate()?;
        let (mesh, curved) = self.build_mesh()?;
        let disc = Discretization::new(Arc::new(mesh), curved, self.fe_degree, self.isoparametric)?;
        let problem: Arc<dyn ShapeProblem> = match self.kind {
            ProblemKind::Model => Arc::new(ModelProblem::new(disc)?),
            ProblemKind::Bernoulli => Arc::new(Bernoulli::new(disc, self.bernoulli)?),
            ProblemKind::Stokes => Arc::new(Stokes::new(disc, self.stokes)?),
            ProblemKind::Elasticity => Arc::new(Elasticity::new(disc, self.elasticity)?),
        };
        check_hold_all(problem.as_ref(), &self.hold_all)?;
        Ok(problem)
    }

    pub fn spline_space(&self) -> Result<SplineSpace> {
        SplineSpace::new(self.spline_grid()?)
    }
}

/// Fails if a node of a fixed boundary lies strictly inside the box.
pub fn check_hold_all(problem: &dyn ShapeProblem, hold_all: &Rect) -> Result<()> {
    let geo = problem.discretization().geometry();
    // nodes on the box boundary up to rounding count as outside
    let tol = 1e-9 * hold_all.width().max(hold_all.height());
    let interior = |p: &Point2| {
        p.x > hold_all.min.x + tol
            && p.x < hold_all.max.x - tol
            && p.y > hold_all.min.y + tol
            && p.y < hold_all.max.y - tol
    };
    for &tag in problem.fixed_tags() {
        let Ok(dofs) = geo.boundary_dofs(tag) else {
            continue;
        };
        if let Some(&d) = dofs.iter().find(|&&d| interior(&geo.dof_coords()[d])) {
            return Err(Error::InvalidInput(format!(
                "hold-all box overlaps the fixed {} boundary at {:?}",
                tag.name(),
                geo.dof_coords()[d]
            )));
        }
    }
    Ok(())
}
