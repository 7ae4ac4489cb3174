//! End-to-end acceptance criteria. Runs without the libtest harness so that
//! every criterion prints its `criterion N: PASS|FAIL ...` line; the process
//! exits non-zero if any criterion fails.

use std::sync::Arc;
use std::time::Instant;

use morphopt::deform::InterpolationMatrix;
use morphopt::driver::{
    convergence_study, default_check_steps, fit_slope, gradient_check, grid_width_for_level, optimize,
    random_direction, RunConfig, Session, StudyAxis,
};
use morphopt::fem::{h1, CellQuadrature, FeSpace, IsoMap};
use morphopt::mesh::{AnnulusOptions, BoundaryTag, Circle, Point2, Rect};
use morphopt::problems::{
    volume_moments, AnnulusDomain, Bernoulli, BernoulliParams, Discretization, ProblemKind, ShapeProblem,
    BERNOULLI_OPTIMUM,
};
use morphopt::spline::{SplineGrid, SplineSpace};

type Outcome = (bool, String);

fn bernoulli_at_optimum(refinements: usize) -> f64 {
    let dom = AnnulusDomain {
        hole: Circle::new(Point2::origin(), 0.4),
        outer: Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
        n_theta: 16,
        n_r: 4,
        options: AnnulusOptions::default(),
    };
    let (mesh, curved) = dom.build(refinements).unwrap();
    let disc = Discretization::new(Arc::new(mesh), curved, 2, true).unwrap();
    let pb = Bernoulli::new(disc, BernoulliParams::default()).unwrap();
    pb.evaluate(&pb.discretization().initial_deformation().unwrap()).unwrap()
}

fn criterion_1_bernoulli_ground_truth() -> Outcome {
    let t = Instant::now();
    let j: Vec<f64> = (1..=3).map(bernoulli_at_optimum).collect();
    let q = ((j[0] - j[1]) / (j[1] - j[2])).log2();
    let extrapolated = j[2] + (j[2] - j[1]) / (2f64.powf(q) - 1.0);
    let rel = (extrapolated - BERNOULLI_OPTIMUM).abs() / BERNOULLI_OPTIMUM;
    let secs = t.elapsed().as_secs_f64();
    (
        rel <= 1e-5 && secs <= 120.0,
        format!("extrapolated J = {extrapolated:.12} (observed order {q:.2}), relative error {rel:.2e}, {secs:.1} s"),
    )
}

fn bernoulli_run_config() -> RunConfig {
    let mut c = RunConfig::preset(ProblemKind::Bernoulli);
    c.refinements = 2;
    c.fe_degree = 2;
    c.isoparametric = true;
    c.spline_degree = 3;
    c.grid_width = grid_width_for_level(4);
    c.max_iterations = 200;
    c
}

fn criterion_2_bernoulli_optimization() -> Outcome {
    let t = Instant::now();
    let out = optimize(&bernoulli_run_config()).unwrap();
    let jerr = out.history.last().unwrap().jerr.unwrap();
    let secs = t.elapsed().as_secs_f64();
    (
        jerr <= 1e-3 && secs <= 1800.0,
        format!("final Jerr = {jerr:.3e} after {} iterations ({:?}), {secs:.1} s", out.history.len() - 1, out.stop),
    )
}

fn study_template(fe_degree: usize) -> RunConfig {
    let mut c = RunConfig::preset(ProblemKind::Bernoulli);
    c.fe_degree = fe_degree;
    c.isoparametric = true;
    c.spline_degree = 3;
    c.grid_width = grid_width_for_level(4);
    c.max_iterations = 200;
    c
}

fn criterion_3_fe_convergence_rates() -> Outcome {
    let t = Instant::now();
    // coarse linear meshes drift into collapsed elements once the plateau is
    // reached, so the linear study starts finer and stops on the plateau
    let mut linear = study_template(1);
    linear.refinements = 2;
    linear.max_iterations = 40;
    let lin = convergence_study(&linear, StudyAxis::Mesh, 3).unwrap();
    let mut quadratic = study_template(2);
    quadratic.refinements = 0;
    let quad = convergence_study(&quadratic, StudyAxis::Mesh, 3).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let ok = (1.6..=2.4).contains(&lin.rate) && (2.6..=3.8).contains(&quad.rate) && secs <= 7200.0;
    let fmt = |r: &morphopt::driver::StudyResult| {
        r.rows.iter().map(|(_, h, e)| format!("{h:.3}:{e:.2e}")).collect::<Vec<_>>().join(" ")
    };
    (
        ok,
        format!(
            "linear rate {:.2} [{}], quadratic iso rate {:.2} [{}], {secs:.0} s",
            lin.rate,
            fmt(&lin),
            quad.rate,
            fmt(&quad)
        ),
    )
}

fn criterion_4_affine_versus_isoparametric() -> Outcome {
    let mut iso = study_template(2);
    iso.refinements = 1;
    let mut affine = iso.clone();
    affine.isoparametric = false;
    let e_iso = optimize(&iso).unwrap().history.last().unwrap().jerr.unwrap();
    let e_aff = optimize(&affine).unwrap().history.last().unwrap().jerr.unwrap();
    (e_aff > e_iso, format!("affine P2 Jerr = {e_aff:.3e}, isoparametric P2 Jerr = {e_iso:.3e}"))
}

fn criterion_5_derivative_correctness() -> Outcome {
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in ProblemKind::ALL {
        let session = Session::new(&RunConfig::preset(kind)).unwrap();
        for seed in [1, 2] {
            let dt = random_direction(&session, seed).unwrap();
            let chk = gradient_check(&session, &dt, &default_check_steps(), 1.0).unwrap();
            let order = chk.order.unwrap_or(f64::INFINITY);
            ok &= order >= 1.9;
            lines.push(format!("{kind}/{seed}: {order:.3}"));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    (ok && secs <= 600.0, format!("orders {} ({secs:.0} s)", lines.join(", ")))
}

fn criterion_6_linesearch_tangency() -> Outcome {
    let mut cfg = bernoulli_run_config();
    cfg.max_iterations = 2;
    let out = optimize(&cfg).unwrap();
    let session = &out.session;
    let problem = session.problem.as_ref();
    let mut def = out.initial.clone();
    let mut exps = Vec::new();
    for search in out.searches.iter().take(2) {
        let d = &search.direction;
        let steps = [1e-1, 1e-2, 1e-3, 1e-4];
        let pts: Vec<(f64, f64)> = steps
            .iter()
            .map(|&s| {
                let js = problem.evaluate(&def.apply_update(&session.interp, &d.dt, s).unwrap()).unwrap();
                let model = search.j0 - s * d.predicted_decrease;
                (s.ln(), (js - model).abs().ln())
            })
            .collect();
        exps.push(fit_slope(&pts));
        def = def.apply_update(&session.interp, &d.dt, search.result.step).unwrap();
    }
    let decreased = out.history.len() >= 2 && out.history[1].j < out.history[0].j;
    (
        exps.len() == 2 && exps.iter().all(|&e| e >= 1.9) && decreased,
        format!("remainder exponents {exps:?}, first search J {:.6} -> {:.6}", out.history[0].j, out.history[1].j),
    )
}

fn criterion_7_stokes_and_elasticity_properties() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for kind in [ProblemKind::Stokes, ProblemKind::Elasticity] {
        let cfg = RunConfig::preset(kind);
        let out = optimize(&cfg).unwrap();
        let monotone = out.history.windows(2).all(|w| w[1].j <= w[0].j);
        let dets = out.history.iter().all(|r| r.min_det >= cfg.det_threshold);
        let pen = out.solution.objective.penalties.unwrap();
        let quad = out.session.problem.discretization().quadrature();
        let (ref_area, char_len) = match kind {
            ProblemKind::Stokes => (std::f64::consts::PI * 0.25, 1.0),
            _ => (volume_moments(&out.initial, quad).unwrap()[0], 1.0),
        };
        let area_ok = pen.area.abs() <= 0.01 * ref_area;
        let bary_ok = kind != ProblemKind::Stokes
            || pen.barycenter.iter().all(|b| b.abs() <= 0.01 * ref_area * char_len);
        let mut checks = vec![("monotone", monotone), ("min_det", dets), ("area", area_ok)];
        let mut line = format!(
            "{kind}: {} iters, J_p {:.4} -> {:.4}, A = {:.2e}",
            out.history.len() - 1,
            out.history[0].j,
            out.final_value(),
            pen.area
        );
        if kind == ProblemKind::Stokes {
            checks.push(("barycenter", bary_ok));
            let geo = out.session.problem.discretization().geometry();
            let dofs = geo.boundary_dofs(BoundaryTag::Obstacle).unwrap();
            let f = out.final_state.coeffs();
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &d in dofs {
                for c in 0..2 {
                    lo[c] = lo[c].min(f[2 * d + c]);
                    hi[c] = hi[c].max(f[2 * d + c]);
                }
            }
            let aspect = (hi[0] - lo[0]) / (hi[1] - lo[1]);
            checks.push(("aspect > 1.5", aspect > 1.5));
            line.push_str(&format!(
                ", B = [{:.2e}, {:.2e}], obstacle aspect ratio {aspect:.2}",
                pen.barycenter[0], pen.barycenter[1]
            ));
        }
        let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
        ok &= failed.is_empty();
        line.push_str(&format!(", failed checks {failed:?}"));
        details.push(line);
    }
    (ok, details.join("; "))
}

fn criterion_8_unit_properties() -> Outcome {
    let mut checks = Vec::new();
    // partition of unity of the full B-spline basis and interpolation reproduction
    let grid = SplineGrid::new(Rect::new(Point2::new(-0.9, -0.9), Point2::new(0.9, 0.9)), 8, 2).unwrap();
    let spline = SplineSpace::new(grid).unwrap();
    let mut t = 0.0f64;
    for i in 0..200 {
        let x = Point2::new(-0.9 + 1.8 * ((i * 37) % 200) as f64 / 200.0, -0.9 + 1.8 * ((i * 91) % 200) as f64 / 200.0);
        let s: f64 = (-2i64..10)
            .flat_map(|a| (-2i64..10).map(move |b| (a, b)))
            .map(|(a, b)| {
                let h = 1.8 / 8.0;
                morphopt::spline::cardinal(2, (x.x + 0.9) / h - a as f64).0
                    * morphopt::spline::cardinal(2, (x.y + 0.9) / h - b as f64).0
            })
            .sum();
        t = t.max((s - 1.0).abs());
    }
    checks.push(("partition of unity", t < 1e-12));

    let dom = AnnulusDomain {
        hole: Circle::new(Point2::origin(), 0.4),
        outer: Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
        n_theta: 16,
        n_r: 4,
        options: AnnulusOptions::default(),
    };
    let (mesh, curved) = dom.build(1).unwrap();
    let space = Arc::new(FeSpace::new(Arc::new(mesh), 2, 2).unwrap());
    let ih = InterpolationMatrix::build(&spline, &space).unwrap();
    let dt: Vec<f64> = (0..spline.dim()).map(|k| (0.7 * k as f64).sin()).collect();
    let v = ih.apply(&dt).unwrap();
    let reproduces = space.dof_coords().iter().enumerate().all(|(i, x)| {
        let (w, _) = spline.eval_field(&dt, x).unwrap();
        (v[2 * i] - w.x).abs() < 1e-12 && (v[2 * i + 1] - w.y).abs() < 1e-12
    });
    checks.push(("interpolation reproduction", reproduces));

    // SPD assembly: symmetric and positive on random vectors
    let scalar = FeSpace::new(space.mesh().clone(), 2, 1).unwrap();
    let f = IsoMap::identity_coeffs(&space);
    let map = IsoMap::new(&space, &f).unwrap();
    let a = h1(&scalar, &map, &CellQuadrature::for_degree(2)).unwrap();
    let x: Vec<f64> = (0..a.nrows()).map(|i| (1.3 * i as f64).cos()).collect();
    checks.push(("SPD assembly", a.asymmetry() < 1e-14 && a.bilinear(&x, &x) > 0.0));

    // Gram entry of two overlapping hats against a midpoint-rule oracle
    let g1 = SplineSpace::new(SplineGrid::new(Rect::new(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)), 4, 1).unwrap())
        .unwrap();
    let k = g1.gram_h1();
    let m = 400;
    let mut oracle = 0.0;
    for i in 0..m {
        for j in 0..m {
            let x = Point2::new((i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64);
            let (a0, ga) = g1.eval_basis(0, &x);
            let (b0, gb) = g1.eval_basis(1, &x);
            oracle += (a0 * b0 + ga.dot(&gb)) / (m * m) as f64;
        }
    }
    checks.push(("Gram oracle", (k.get(0, 2) - oracle).abs() < 1e-4));

    // determinant normalization on the identity and on x -> 2x
    let def = morphopt::deform::DeformationState::init(space.clone(), &curved).unwrap();
    let q = CellQuadrature::for_degree(2);
    let id_ok = {
        let s = morphopt::deform::DeformationState::from_coeffs(space.clone(), f.clone()).unwrap();
        (s.min_det_ratio(&q) - 1.0).abs() < 1e-12
    };
    let twice = morphopt::deform::DeformationState::from_coeffs(space.clone(), f.iter().map(|v| 2.0 * v).collect())
        .unwrap();
    checks.push(("min_det normalization", id_ok && (twice.min_det_ratio(&q) - 4.0).abs() < 1e-12 && def.min_det_ratio(&q) > 0.0));

    // CSV format
    let csv = morphopt::driver::output::history_csv(&[]);
    checks.push(("CSV header", csv == "iter,J,Jerr,grad_norm,step,min_det\n"));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    (
        failed.is_empty(),
        format!("{} checks, failed: {:?} (full property suites run as unit tests)", checks.len(), failed),
    )
}

fn criterion_9_out_of_desk_scope() -> Outcome {
    if std::env::var_os("MORPHOPT_FULL_STUDY").is_none() {
        return (
            true,
            "not required; set MORPHOPT_FULL_STUDY=1 to run the linear-spline grid study".into(),
        );
    }
    let mut c = RunConfig::preset(ProblemKind::Bernoulli);
    c.refinements = 5;
    c.spline_degree = 1;
    c.grid_width = grid_width_for_level(3);
    let r = convergence_study(&c, StudyAxis::Grid, 4).unwrap();
    ((1.8..=3.0).contains(&r.rate), format!("grid-axis rate {:.2}", r.rate))
}

fn main() {
    let criteria: [fn() -> Outcome; 9] = [
        criterion_1_bernoulli_ground_truth,
        criterion_2_bernoulli_optimization,
        criterion_3_fe_convergence_rates,
        criterion_4_affine_versus_isoparametric,
        criterion_5_derivative_correctness,
        criterion_6_linesearch_tangency,
        criterion_7_stokes_and_elasticity_properties,
        criterion_8_unit_properties,
        criterion_9_out_of_desk_scope,
    ];
    let mut failures = 0;
    for (i, run) in criteria.iter().enumerate() {
        let (pass, detail) = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        println!("criterion {}: {} {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
        failures += usize::from(!pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
