//! The isoparametric map `F`, the spline-to-FE interpolation matrix, the
//! update `f + s I dt`, and the Jacobian-determinant admissibility test.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{CellQuadrature, FeSpace, IsoMap};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::CurvedBoundary;
use crate::spline::SplineSpace;

/// Default admissibility margin on the normalized determinant.
pub const DET_THRESHOLD: f64 = 0.01;

/// Coefficients `f` of the current map and `f0` of the initial one, in a
/// 2-vector FE space on the initial polytope.
#[derive(Debug, Clone)]
pub struct DeformationState {
    space: Arc<FeSpace>,
    f: Vec<f64>,
    f0: Arc<Vec<f64>>,
}

impl DeformationState {
    /// Identity map, with nodes on curved tagged boundaries (other than mesh
    /// vertices) projected onto their analytic curves.
    pub fn init(space: Arc<FeSpace>, geometry: &CurvedBoundary) -> Result<Self> {
        if space.components() != 2 {
            return Err(Error::IncompatibleSpaces("deformation needs a 2-vector space".into()));
        }
        let mut f = IsoMap::identity_coeffs(&space);
        let nv = space.mesh().num_nodes();
        for (tag, circle) in &geometry.circles {
            let Ok(dofs) = space.boundary_dofs(*tag) else {
                continue;
            };
            for &d in dofs.iter().filter(|&&d| d >= nv) {
                let p = circle.project(&space.dof_coords()[d])?;
                f[2 * d] = p.x;
                f[2 * d + 1] = p.y;
            }
        }
        let f0 = Arc::new(f.clone());
        Ok(Self { space, f, f0 })
    }

    pub fn from_coeffs(space: Arc<FeSpace>, f: Vec<f64>) -> Result<Self> {
        if f.len() != space.ndofs() || space.components() != 2 {
            return Err(Error::DimensionMismatch {
                expected: space.ndofs(),
                found: f.len(),
            });
        }
        let f0 = Arc::new(f.clone());
        Ok(Self { space, f, f0 })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.f
    }

    pub fn initial(&self) -> &[f64] {
        &self.f0
    }

    pub fn map(&self) -> IsoMap<'_> {
        IsoMap::new(&self.space, &self.f).expect("state coefficients match their space")
    }

    /// `f + s I dt`; `self` is left untouched.
    pub fn apply_update(&self, interp: &InterpolationMatrix, dt: &[f64], s: f64) -> Result<Self> {
        let v = interp.apply(dt)?;
        if v.len() != self.f.len() {
            return Err(Error::DimensionMismatch {
                expected: self.f.len(),
                found: v.len(),
            });
        }
        let f = self.f.iter().zip(&v).map(|(a, b)| a + s * b).collect();
        Ok(Self {
            space: self.space.clone(),
            f,
            f0: self.f0.clone(),
        })
    }

    /// Smallest `det D(F o G_K) / det B_K` over all cells and points of `quad`.
    pub fn min_det_ratio(&self, quad: &CellQuadrature) -> f64 {
        let map = self.map();
        (0..self.space.mesh().num_cells())
            .into_par_iter()
            .map(|k| map.min_det_ratio(k, quad))
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// [`Self::min_det_ratio`] of the state after the update `s dt`.
    pub fn min_det(&self, interp: &InterpolationMatrix, dt: &[f64], s: f64, quad: &CellQuadrature) -> Result<f64> {
        Ok(self.apply_update(interp, dt, s)?.min_det_ratio(quad))
    }
}

/// Sparse `M x N` matrix with entry `(2 i + c, 2 a + c) = q_a(x_i)`, built
/// once from the node coordinates of the initial polytope.
#[derive(Debug, Clone)]
pub struct InterpolationMatrix {
    matrix: CsrMatrix,
}

impl InterpolationMatrix {
    pub fn build(spline: &SplineSpace, space: &FeSpace) -> Result<Self> {
        if space.components() != 2 {
            return Err(Error::IncompatibleSpaces(
                "interpolation targets a 2-vector space".into(),
            ));
        }
        let rows: Vec<Vec<(usize, f64)>> = space
            .dof_coords()
            .par_iter()
            .map(|x| {
                spline
                    .active_at(x)
                    .into_iter()
                    .filter_map(|a| {
                        let v = spline.eval_basis(a, x).0;
                        (v != 0.0).then_some((a, v))
                    })
                    .collect()
            })
            .collect();
        let mut tb = TripletBuilder::new(space.ndofs(), spline.dim());
        for (i, row) in rows.iter().enumerate() {
            for &(a, v) in row {
                tb.add(2 * i, 2 * a, v);
                tb.add(2 * i + 1, 2 * a + 1, v);
            }
        }
        Ok(Self { matrix: tb.build() })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, dt: &[f64]) -> Result<Vec<f64>> {
        if dt.len() != self.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.ncols(),
                found: dt.len(),
            });
        }
        Ok(self.matrix.mul_vec(dt))
    }

    /// `I^T v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.nrows(),
                found: v.len(),
            });
        }
        Ok(self.matrix.tr_mul_vec(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{
        generate_annulus, uniform_refine, AnnulusOptions, BoundaryTag, Circle, Point2, Rect, TriMesh,
    };
    use crate::spline::SplineGrid;
    use proptest::prelude::*;

    fn setup(p: usize) -> (Arc<FeSpace>, SplineSpace, CurvedBoundary) {
        let circle = Circle::new(Point2::origin(), 0.4);
        let mesh: TriMesh = generate_annulus(
            circle,
            Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
            16,
            4,
            &AnnulusOptions::default(),
        )
        .unwrap();
        let geo = CurvedBoundary::circle(BoundaryTag::Inner, circle);
        let mesh = uniform_refine(&mesh, Some(&geo)).unwrap();
        let space = Arc::new(FeSpace::new(Arc::new(mesh), p, 2).unwrap());
        let grid = SplineGrid::new(Rect::new(Point2::new(-0.9, -0.9), Point2::new(0.9, 0.9)), 8, 2).unwrap();
        (space, SplineSpace::new(grid).unwrap(), geo)
    }

    #[test]
    fn initial_map_projects_midpoints_only() {
        let (space, _, geo) = setup(2);
        let st = DeformationState::init(space.clone(), &geo).unwrap();
        let id = IsoMap::identity_coeffs(&space);
        let nv = space.mesh().num_nodes();
        let inner = space.boundary_dofs(BoundaryTag::Inner).unwrap();
        for d in 0..space.num_scalar() {
            let moved = st.coeffs()[2 * d] != id[2 * d] || st.coeffs()[2 * d + 1] != id[2 * d + 1];
            if moved {
                assert!(d >= nv && inner.contains(&d));
            }
            if inner.contains(&d) {
                let r = (st.coeffs()[2 * d].powi(2) + st.coeffs()[2 * d + 1].powi(2)).sqrt();
                assert!((r - 0.4).abs() < 1e-15);
            }
        }
        assert!(st.min_det_ratio(&CellQuadrature::for_degree(2)) > 0.5);

        let (p1, _, geo) = setup(1);
        let st = DeformationState::init(p1.clone(), &geo).unwrap();
        assert_eq!(st.coeffs(), IsoMap::identity_coeffs(&p1).as_slice());
        assert_eq!(DeformationState::init(p1, &CurvedBoundary::none()).unwrap().coeffs(), st.coeffs());
    }

    #[test]
    fn interpolation_reproduces_spline_at_nodes() {
        let (space, spline, _) = setup(2);
        let ih = InterpolationMatrix::build(&spline, &space).unwrap();
        assert_eq!((ih.nrows(), ih.ncols()), (space.ndofs(), spline.dim()));
        let dt: Vec<f64> = (0..spline.dim()).map(|k| (0.3 * k as f64).sin()).collect();
        let v = ih.apply(&dt).unwrap();
        for (i, x) in space.dof_coords().iter().enumerate() {
            let (w, _) = spline.eval_field(&dt, x).unwrap();
            assert!((v[2 * i] - w.x).abs() < 1e-12 && (v[2 * i + 1] - w.y).abs() < 1e-12);
        }
        for a in [0, 5, spline.dim() - 1] {
            let mut e = vec![0.0; spline.dim()];
            e[a] = 1.0;
            let v = ih.apply(&e).unwrap();
            for (i, x) in space.dof_coords().iter().enumerate() {
                assert_eq!(v[2 * i + a % 2], spline.eval_basis(a / 2, x).0);
                assert_eq!(v[2 * i + 1 - a % 2], 0.0);
            }
        }
        assert!(ih.apply(&vec![0.0; spline.dim()]).unwrap().iter().all(|&x| x == 0.0));
        for i in 0..ih.nrows() {
            assert!(ih.matrix().row(i).0.len() <= 9);
        }
        assert!(ih.apply(&[1.0]).is_err());
    }

    #[test]
    fn update_rules() {
        let (space, spline, geo) = setup(2);
        let ih = InterpolationMatrix::build(&spline, &space).unwrap();
        let st = DeformationState::init(space, &geo).unwrap();
        let dt: Vec<f64> = (0..spline.dim()).map(|k| 0.01 * (k as f64).cos()).collect();
        assert_eq!(st.apply_update(&ih, &dt, 0.0).unwrap().coeffs(), st.coeffs());
        let zero = vec![0.0; spline.dim()];
        assert_eq!(st.apply_update(&ih, &zero, 0.7).unwrap().coeffs(), st.coeffs());
        let two = st.apply_update(&ih, &dt, 0.3).unwrap().apply_update(&ih, &dt, 0.5).unwrap();
        let one = st.apply_update(&ih, &dt, 0.8).unwrap();
        for (a, b) in two.coeffs().iter().zip(one.coeffs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let quad = CellQuadrature::for_degree(2);
        assert_eq!(st.min_det(&ih, &dt, 0.0, &quad).unwrap(), st.min_det_ratio(&quad));
    }

    #[test]
    fn determinant_normalization() {
        let (space, _, _) = setup(1);
        let quad = CellQuadrature::for_degree(1);
        let id = DeformationState::from_coeffs(space.clone(), IsoMap::identity_coeffs(&space)).unwrap();
        assert!((id.min_det_ratio(&quad) - 1.0).abs() < 1e-12);
        let scaled: Vec<f64> = IsoMap::identity_coeffs(&space).iter().map(|v| 2.0 * v).collect();
        let st = DeformationState::from_coeffs(space.clone(), scaled).unwrap();
        assert!((st.min_det_ratio(&quad) - 4.0).abs() < 1e-12);
        let swapped: Vec<f64> = IsoMap::identity_coeffs(&space)
            .chunks(2)
            .flat_map(|c| [c[1], c[0]])
            .collect();
        let st = DeformationState::from_coeffs(space, swapped).unwrap();
        assert!(st.min_det_ratio(&quad) < 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn update_commutes_with_linear_combination(alpha in -1.0f64..1.0, beta in -1.0f64..1.0, seed in 0u64..100) {
            let (space, spline, geo) = setup(1);
            let ih = InterpolationMatrix::build(&spline, &space).unwrap();
            let st = DeformationState::init(space, &geo).unwrap();
            let u: Vec<f64> = (0..spline.dim()).map(|k| 0.01 * ((k as u64 + seed) as f64).sin()).collect();
            let v: Vec<f64> = (0..spline.dim()).map(|k| 0.01 * ((3 * k as u64 + seed) as f64).cos()).collect();
            let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + beta * b).collect();
            let direct = st.apply_update(&ih, &w, 1.0).unwrap();
            let staged = st.apply_update(&ih, &u, alpha).unwrap().apply_update(&ih, &v, beta).unwrap();
            for (a, b) in direct.coeffs().iter().zip(staged.coeffs()) {
                prop_assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
