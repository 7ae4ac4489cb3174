//! Riesz representative of the shape derivative in the spline space and the
//! grid line search over step sizes.

use rayon::prelude::*;

use crate::deform::{DeformationState, InterpolationMatrix};
use crate::error::{Error, Result};
use crate::linalg::{solve_sparse, CsrMatrix, Factorization, SymbolicCache};
use crate::problems::ShapeProblem;

/// Steps `0, 0.1, ..., 1`.
pub fn default_step_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentDirection {
    pub dt: Vec<f64>,
    /// `sqrt(dt^T K dt)`, the H1(D) norm of the gradient.
    pub gradient_norm: f64,
    /// `dt^T K dt`, the decrease predicted by the derivative at unit step.
    pub predicted_decrease: f64,
}

/// Solves `K dt = -I^T dJ` with the frozen Gram matrix `K`.
pub fn riesz_descent(
    gram: &CsrMatrix,
    interp: &InterpolationMatrix,
    dj: &[f64],
    cache: Option<&SymbolicCache>,
) -> Result<DescentDirection> {
    if gram.nrows() != interp.ncols() {
        return Err(Error::DimensionMismatch {
            expected: interp.ncols(),
            found: gram.nrows(),
        });
    }
    let rhs: Vec<f64> = interp.apply_transpose(dj)?.into_iter().map(|v| -v).collect();
    let dt = solve_sparse(gram, &rhs, Factorization::Cholesky, cache)?;
    let predicted_decrease = gram.bilinear(&dt, &dt).max(0.0);
    Ok(DescentDirection {
        dt,
        gradient_norm: predicted_decrease.sqrt(),
        predicted_decrease,
    })
}

/// One trial step of a line search.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub step: f64,
    pub min_det: f64,
    /// `None` when the step is inadmissible or its state solve failed.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearch {
    pub step: f64,
    pub value: f64,
    pub min_det: f64,
    pub candidates: Vec<Candidate>,
}

/// Evaluates the functional at every admissible step of `grid` (in
/// parallel) and returns the minimizer; ties go to the smaller step. The
/// step 0 always competes with the current value `j0`.
pub fn line_search(
    problem: &dyn ShapeProblem,
    def: &DeformationState,
    j0: f64,
    interp: &InterpolationMatrix,
    direction: &DescentDirection,
    grid: &[f64],
    threshold: f64,
) -> Result<LineSearch> {
    let quad = problem.discretization().quadrature();
    let current_det = def.min_det_ratio(quad);
    let mut candidates = grid
        .par_iter()
        .map(|&s| {
            if s == 0.0 {
                return Ok(Candidate {
                    step: 0.0,
                    min_det: current_det,
                    value: Some(j0),
                });
            }
            let trial = def.apply_update(interp, &direction.dt, s)?;
            let min_det = trial.min_det_ratio(quad);
            let value = if min_det >= threshold {
                match problem.evaluate(&trial) {
                    Ok(v) if v.is_finite() => Some(v),
                    Ok(_) | Err(Error::Solver { .. }) | Err(Error::InvertedElement { .. }) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            Ok(Candidate { step: s, min_det, value })
        })
        .collect::<Result<Vec<_>>>()?;
    if !grid.contains(&0.0) {
        candidates.push(Candidate {
            step: 0.0,
            min_det: current_det,
            value: Some(j0),
        });
    }
    candidates.sort_by(|a, b| a.step.total_cmp(&b.step));
    let best = candidates
        .iter()
        .filter_map(|c| c.value.map(|v| (v, c)))
        .fold(None::<(f64, &Candidate)>, |acc, (v, c)| match acc {
            Some((bv, _)) if bv <= v => acc,
            _ => Some((v, c)),
        })
        .expect("step 0 is always admissible");
    Ok(LineSearch {
        step: best.1.step,
        value: best.0,
        min_det: best.1.min_det,
        candidates,
    })
}

/// `(s, J0 - s * predicted_decrease)` for each step.
pub fn predicted_descent_line(j0: f64, direction: &DescentDirection, steps: &[f64]) -> Vec<(f64, f64)> {
    steps
        .iter()
        .map(|&s| (s, j0 - s * direction.predicted_decrease))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{AnnulusOptions, Circle, Point2, Rect};
    use crate::problems::{AnnulusDomain, Bernoulli, BernoulliParams, Discretization};
    use crate::spline::{SplineGrid, SplineSpace};
    use std::sync::Arc;

    fn setup() -> (Bernoulli, SplineSpace, InterpolationMatrix, CsrMatrix) {
        let dom = AnnulusDomain {
            hole: Circle::new(Point2::new(0.04, 0.05), 0.5),
            outer: Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
            n_theta: 16,
            n_r: 4,
            options: AnnulusOptions::default(),
        };
        let (mesh, curved) = dom.build(1).unwrap();
        let pb = Bernoulli::new(
            Discretization::new(Arc::new(mesh), curved, 2, true).unwrap(),
            BernoulliParams::default(),
        )
        .unwrap();
        let spline =
            SplineSpace::new(SplineGrid::new(Rect::new(Point2::new(-0.9, -0.9), Point2::new(0.9, 0.9)), 8, 3).unwrap())
                .unwrap();
        let ih = InterpolationMatrix::build(&spline, pb.discretization().geometry()).unwrap();
        let gram = spline.gram_h1();
        (pb, spline, ih, gram)
    }

    #[test]
    fn riesz_direction_properties() {
        let (pb, _, ih, gram) = setup();
        let def = pb.discretization().initial_deformation().unwrap();
        let (_, dj) = pb.gradient(&def).unwrap();
        let d = riesz_descent(&gram, &ih, &dj, None).unwrap();
        let pairing: f64 = ih.apply(&d.dt).unwrap().iter().zip(&dj).map(|(a, b)| a * b).sum();
        assert!((pairing + d.predicted_decrease).abs() <= 1e-9 * d.predicted_decrease);
        assert!(d.predicted_decrease > 0.0);

        let scaled: Vec<f64> = dj.iter().map(|v| 3.0 * v).collect();
        let d3 = riesz_descent(&gram, &ih, &scaled, None).unwrap();
        for (a, b) in d3.dt.iter().zip(&d.dt) {
            assert!((a - 3.0 * b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
        let zero = riesz_descent(&gram, &ih, &vec![0.0; dj.len()], None).unwrap();
        assert!(zero.dt.iter().all(|&v| v == 0.0) && zero.gradient_norm == 0.0);
        assert!(riesz_descent(&gram, &ih, &[1.0], None).is_err());
    }

    #[test]
    fn search_decreases_and_respects_admissibility() {
        let (pb, _, ih, gram) = setup();
        let def = pb.discretization().initial_deformation().unwrap();
        let (sol, dj) = pb.gradient(&def).unwrap();
        let j0 = sol.objective.penalized;
        let d = riesz_descent(&gram, &ih, &dj, None).unwrap();
        let ls = line_search(&pb, &def, j0, &ih, &d, &default_step_grid(), 0.01).unwrap();
        assert!(ls.step > 0.0 && ls.value < j0);
        assert_eq!(ls.candidates.len(), 11);

        // a threshold no step can meet leaves only s = 0 (identity has 1)
        let ls = line_search(&pb, &def, j0, &ih, &d, &default_step_grid(), 1.5).unwrap();
        assert_eq!(ls.step, 0.0);
        assert_eq!(ls.value, j0);

        // zero direction
        let zero = riesz_descent(&gram, &ih, &vec![0.0; dj.len()], None).unwrap();
        let ls = line_search(&pb, &def, j0, &ih, &zero, &default_step_grid(), 0.01).unwrap();
        assert_eq!((ls.step, ls.value), (0.0, j0));
    }

    #[test]
    fn excluded_candidate_never_wins() {
        // a huge direction inverts elements for large steps
        let (pb, _, ih, gram) = setup();
        let def = pb.discretization().initial_deformation().unwrap();
        let (sol, dj) = pb.gradient(&def).unwrap();
        let mut d = riesz_descent(&gram, &ih, &dj, None).unwrap();
        d.dt.iter_mut().for_each(|v| *v *= 50.0);
        let ls = line_search(&pb, &def, sol.objective.penalized, &ih, &d, &default_step_grid(), 0.01).unwrap();
        let sel = ls.candidates.iter().find(|c| c.step == ls.step).unwrap();
        assert!(sel.min_det >= 0.01);
        assert!(ls.candidates.iter().any(|c| c.value.is_none()));
    }

    #[test]
    fn tie_break_prefers_smaller_step() {
        let (pb, _, ih, gram) = setup();
        let def = pb.discretization().initial_deformation().unwrap();
        let zero = riesz_descent(&gram, &ih, &vec![0.0; ih.nrows()], None).unwrap();
        let j0 = pb.evaluate(&def).unwrap();
        let ls = line_search(&pb, &def, j0, &ih, &zero, &[0.5, 1.0], 0.01).unwrap();
        // all values equal; s = 0 is added and wins
        assert_eq!(ls.step, 0.0);
        assert_eq!(ls.candidates.len(), 3);
    }

    #[test]
    fn predicted_line_is_affine() {
        let d = DescentDirection {
            dt: vec![],
            gradient_norm: 2.0,
            predicted_decrease: 4.0,
        };
        let line = predicted_descent_line(10.0, &d, &[0.0, 0.5, 1.0]);
        assert_eq!(line, vec![(0.0, 10.0), (0.5, 8.0), (1.0, 6.0)]);
    }
}
