//! The optimization loop, Taylor-remainder gradient checks and convergence
//! studies.

mod config;
pub mod output;

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::deform::{DeformationState, InterpolationMatrix};
use crate::descent::{line_search, riesz_descent, DescentDirection, LineSearch};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, SymbolicCache};
use crate::problems::{ShapeProblem, StateSolution};
use crate::spline::SplineSpace;

pub use config::{check_hold_all, grid_width_for_level, Domain, RunConfig};

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub iteration: usize,
    /// Penalized functional value.
    pub j: f64,
    pub jerr: Option<f64>,
    /// H1(D) norm of the gradient at this iterate.
    pub gradient_norm: f64,
    /// Step that produced this iterate (0 for the initial one).
    pub step: f64,
    pub min_det: f64,
}

/// Initialized spaces and operators shared by every iteration.
pub struct Session {
    pub config: RunConfig,
    pub problem: Arc<dyn ShapeProblem>,
    pub spline: SplineSpace,
    pub interp: InterpolationMatrix,
    pub gram: CsrMatrix,
    gram_cache: SymbolicCache,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("kind", &self.config.kind)
            .field("spline_dim", &self.spline.dim())
            .finish()
    }
}

impl Session {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let problem = config.build_problem()?;
        let spline = config.spline_space()?;
        let interp = InterpolationMatrix::build(&spline, problem.discretization().geometry())?;
        let gram = spline.gram_h1();
        Ok(Self {
            config: config.clone(),
            problem,
            spline,
            interp,
            gram,
            gram_cache: SymbolicCache::default(),
        })
    }

    pub fn direction(&self, dj: &[f64]) -> Result<DescentDirection> {
        riesz_descent(&self.gram, &self.interp, dj, Some(&self.gram_cache))
    }

    fn jerr(&self, j: f64) -> Option<f64> {
        self.config.reference.map(|r| (j - r).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Budget,
    Stagnation,
    GradientTolerance,
}

/// A line search together with the data it started from.
#[derive(Debug, Clone)]
pub struct SearchRecord {
    pub iteration: usize,
    pub j0: f64,
    pub direction: DescentDirection,
    pub result: LineSearch,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub session: Session,
    pub history: Vec<HistoryRecord>,
    pub initial: DeformationState,
    pub final_state: DeformationState,
    pub solution: StateSolution,
    pub searches: Vec<SearchRecord>,
    pub stop: StopReason,
}

impl RunOutcome {
    pub fn final_value(&self) -> f64 {
        self.history.last().expect("history has the initial record").j
    }
}

/// Runs the descent loop; with an output directory configured the history
/// is persisted even when the run aborts.
pub fn optimize(config: &RunConfig) -> Result<RunOutcome> {
    let session = Session::new(config)?;
    let mut history = Vec::new();
    let result = run_loop(session, &mut history);
    match (&result, &config.output_dir) {
        (Ok(out), Some(dir)) => persist(out, dir)?,
        (Err(_), Some(dir)) => output::write_atomic(&dir.join("history.csv"), output::history_csv(&history).as_bytes())?,
        _ => {}
    }
    result
}

fn run_loop(session: Session, history: &mut Vec<HistoryRecord>) -> Result<RunOutcome> {
    let cfg = session.config.clone();
    let problem = session.problem.clone();
    let quad = problem.discretization().quadrature();
    let initial = problem.discretization().initial_deformation()?;
    let mut def = initial.clone();
    let (mut sol, mut dj) = problem.gradient(&def)?;
    let mut dir = session.direction(&dj)?;
    let mut j = sol.objective.penalized;
    history.push(HistoryRecord {
        iteration: 0,
        j,
        jerr: session.jerr(j),
        gradient_norm: dir.gradient_norm,
        step: 0.0,
        min_det: def.min_det_ratio(quad),
    });
    let mut searches = Vec::new();
    let mut stop = StopReason::Budget;
    let retry_grid: Vec<f64> = cfg.step_grid.iter().map(|s| s * cfg.retry_scale).collect();
    for k in 0..cfg.max_iterations {
        if dir.gradient_norm < cfg.gradient_tolerance {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut ls = line_search(problem.as_ref(), &def, j, &session.interp, &dir, &cfg.step_grid, cfg.det_threshold)?;
        if ls.step == 0.0 {
            log::debug!("iteration {k}: no decrease on the step grid, retrying with scale {}", cfg.retry_scale);
            ls = line_search(problem.as_ref(), &def, j, &session.interp, &dir, &retry_grid, cfg.det_threshold)?;
        }
        let step = ls.step;
        searches.push(SearchRecord {
            iteration: k,
            j0: j,
            direction: dir.clone(),
            result: ls,
        });
        if step == 0.0 {
            stop = StopReason::Stagnation;
            break;
        }
        def = def.apply_update(&session.interp, &dir.dt, step)?;
        (sol, dj) = problem.gradient(&def)?;
        dir = session.direction(&dj)?;
        j = sol.objective.penalized;
        let rec = HistoryRecord {
            iteration: k + 1,
            j,
            jerr: session.jerr(j),
            gradient_norm: dir.gradient_norm,
            step,
            min_det: def.min_det_ratio(quad),
        };
        log::info!(
            "iter {:4}  J = {:.12e}  |grad| = {:.3e}  s = {:.3}  min det = {:.3}",
            rec.iteration,
            rec.j,
            rec.gradient_norm,
            rec.step,
            rec.min_det
        );
        history.push(rec);
    }
    Ok(RunOutcome {
        session,
        history: history.clone(),
        initial,
        final_state: def,
        solution: sol,
        searches,
        stop,
    })
}

/// Writes `history.csv`, `final_state.txt`, `initial.vtk` and `final.vtk`.
pub fn persist(out: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    output::write_atomic(&dir.join("history.csv"), output::history_csv(&out.history).as_bytes())?;
    output::write_atomic(&dir.join("final_state.txt"), output::vector_text(out.final_state.coeffs()).as_bytes())?;
    let problem = &out.session.problem;
    let init_sol = problem.solve_state(&out.initial)?;
    output::write_atomic(&dir.join("initial.vtk"), output::vtk_text(&out.initial, Some(&init_sol))?.as_bytes())?;
    output::write_atomic(&dir.join("final.vtk"), output::vtk_text(&out.final_state, Some(&out.solution))?.as_bytes())?;
    Ok(())
}

/// Outcome of a Taylor-remainder test.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    /// Fitted order; `None` when every remainder is at rounding level.
    pub order: Option<f64>,
    /// `(s, |J(s) - J(0) - s dJ(dt)|)`.
    pub remainders: Vec<(f64, f64)>,
    pub j0: f64,
}

impl GradientCheck {
    pub fn describe(&self) -> String {
        match self.order {
            Some(o) => format!("order={o:.6}"),
            None => "order=exact".to_string(),
        }
    }
}

/// Steps `10^-1, ..., 10^-4`.
pub fn default_check_steps() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}

/// Random spline direction scaled so the largest nodal displacement is
/// `5%` of the shorter side of the hold-all box.
pub fn random_direction(session: &Session, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt: Vec<f64> = (0..session.spline.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v = session.interp.apply(&dt)?;
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if vmax == 0.0 {
        return Ok(dt);
    }
    let b = session.config.hold_all;
    let scale = 0.05 * b.width().min(b.height()) / vmax;
    Ok(dt.into_iter().map(|x| x * scale).collect())
}

/// Compares `J(F + s I dt)` with its linearization; `dj_scale != 1`
/// deliberately corrupts the derivative.
pub fn gradient_check(session: &Session, dt: &[f64], steps: &[f64], dj_scale: f64) -> Result<GradientCheck> {
    if steps.len() < 2 {
        return Err(Error::InvalidInput("gradient check needs at least two steps".into()));
    }
    let (lo, hi) = steps.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    if !(lo > 0.0) || hi / lo < 100.0 {
        return Err(Error::InvalidInput("gradient-check steps must be positive and span two decades".into()));
    }
    let problem = session.problem.as_ref();
    let def = problem.discretization().initial_deformation()?;
    let (sol, dj) = problem.gradient(&def)?;
    let j0 = sol.objective.penalized;
    let v = session.interp.apply(dt)?;
    let slope = dj_scale * v.iter().zip(&dj).map(|(a, b)| a * b).sum::<f64>();
    let values = steps
        .par_iter()
        .map(|&s| problem.evaluate(&def.apply_update(&session.interp, dt, s)?))
        .collect::<Result<Vec<_>>>()?;
    let remainders: Vec<(f64, f64)> = steps
        .iter()
        .zip(&values)
        .map(|(&s, &js)| (s, (js - j0 - s * slope).abs()))
        .collect();
    let noise = 1e-13 * j0.abs().max(f64::MIN_POSITIVE);
    let pts: Vec<(f64, f64)> = remainders
        .iter()
        .filter(|(_, r)| *r > noise)
        .map(|&(s, r)| (s.ln(), r.ln()))
        .collect();
    let order = (pts.len() >= 2).then(|| fit_slope(&pts));
    Ok(GradientCheck { order, remainders, j0 })
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyAxis {
    Mesh,
    Grid,
}

impl StudyAxis {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "mesh" => Some(Self::Mesh),
            "grid" => Some(Self::Grid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    /// `(level, h, saturated Jerr)`.
    pub rows: Vec<(usize, f64, f64)>,
    pub rate: f64,
    /// `false` if Jerr fails to decrease from one level to the next.
    pub monotone: bool,
}

/// Runs `levels` optimizations, refining the mesh or halving the grid width
/// at each level, and fits `Jerr ~ h^rate`.
pub fn convergence_study(template: &RunConfig, axis: StudyAxis, levels: usize) -> Result<StudyResult> {
    if levels < 3 {
        return Err(Error::InvalidInput(format!("a study needs at least 3 levels, got {levels}")));
    }
    let reference = template
        .reference
        .ok_or_else(|| Error::InvalidInput("a study needs a reference value".into()))?;
    let rows = (0..levels)
        .into_par_iter()
        .map(|level| {
            let mut cfg = template.clone();
            cfg.output_dir = None;
            match axis {
                StudyAxis::Mesh => cfg.refinements += level,
                StudyAxis::Grid => cfg.grid_width *= 0.5f64.powi(level as i32),
            }
            let out = optimize(&cfg)?;
            let h = match axis {
                StudyAxis::Mesh => out.session.problem.discretization().mesh().max_edge_length(),
                StudyAxis::Grid => cfg.grid_width,
            };
            let jerr = (out.final_value() - reference).abs();
            log::info!("study level {level}: h = {h:.4e}, Jerr = {jerr:.4e}");
            Ok((level, h, jerr))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(study_fit(rows))
}

/// Fits the rate of an already computed study table.
pub fn study_fit(rows: Vec<(usize, f64, f64)>) -> StudyResult {
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(_, h, e)| (h.ln(), e.max(f64::MIN_POSITIVE).ln())).collect();
    let rate = fit_slope(&pts);
    let monotone = rows.windows(2).all(|w| w[1].2 < w[0].2);
    if !monotone {
        log::warn!("Jerr is not monotone across levels; fitted rate {rate:.3} is unreliable");
    }
    StudyResult { rows, rate, monotone }
}
