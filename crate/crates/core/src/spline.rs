//! Tensor-product cardinal B-spline vector fields on a hold-all box.
//!
//! Only basis functions whose support lies inside the closed box are kept,
//! so every field vanishes on the box boundary. Coefficient `2 a + c` is
//! component `c` of active basis function `a`.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::{Point2, Rect};
use crate::quadrature::gauss_legendre;

/// Uniform grid of `n x n` cells over a box, with spline degree `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineGrid {
    pub rect: Rect,
    pub n: usize,
    pub degree: usize,
}

impl SplineGrid {
    pub fn new(rect: Rect, n: usize, degree: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::InvalidInput(format!(
                "spline degree {degree} not in 1..=3"
            )));
        }
        if n <= degree {
            return Err(Error::InvalidInput(format!(
                "spline grid needs more than {degree} cells per axis for degree {degree}, got {n}"
            )));
        }
        if !(rect.width() > 0.0 && rect.height() > 0.0) {
            return Err(Error::InvalidInput("empty hold-all box".into()));
        }
        Ok(Self { rect, n, degree })
    }

    /// Grid whose cell width is as close as possible to `h` on the wider axis.
    pub fn with_width(rect: Rect, h: f64, degree: usize) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidInput("grid width must be positive".into()));
        }
        let n = (rect.width().max(rect.height()) / h).round().max(1.0) as usize;
        Self::new(rect, n, degree)
    }

    pub fn h(&self) -> Vector2<f64> {
        Vector2::new(
            self.rect.width() / self.n as f64,
            self.rect.height() / self.n as f64,
        )
    }
}

/// Cardinal B-spline of degree `p` on `[0, p+1]` and its derivative.
///
/// The degree-0 function takes the value 1/2 at its end points so that
/// derivatives at knots are the average of the one-sided limits.
pub fn cardinal(p: usize, t: f64) -> (f64, f64) {
    if p == 0 {
        let v = if t > 0.0 && t < 1.0 {
            1.0
        } else if t == 0.0 || t == 1.0 {
            0.5
        } else {
            0.0
        };
        return (v, 0.0);
    }
    if t <= 0.0 || t >= (p + 1) as f64 {
        return (0.0, 0.0);
    }
    let pf = p as f64;
    let (a, _) = cardinal(p - 1, t);
    let (b, _) = cardinal(p - 1, t - 1.0);
    (t / pf * a + (pf + 1.0 - t) / pf * b, a - b)
}

#[derive(Debug, Clone)]
pub struct SplineSpace {
    grid: SplineGrid,
    // per-axis active range is p..n, i.e. n - p functions
    per_axis: usize,
}

impl SplineSpace {
    pub fn new(grid: SplineGrid) -> Result<Self> {
        let grid = SplineGrid::new(grid.rect, grid.n, grid.degree)?;
        Ok(Self {
            per_axis: grid.n - grid.degree,
            grid,
        })
    }

    pub fn grid(&self) -> &SplineGrid {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.grid.degree
    }

    /// Number of scalar active basis functions.
    pub fn num_scalar(&self) -> usize {
        self.per_axis * self.per_axis
    }

    /// Dimension of the vector space.
    pub fn dim(&self) -> usize {
        2 * self.num_scalar()
    }

    /// Tensor index `(i, j)` (x first) of active function `a`.
    pub fn tensor_index(&self, a: usize) -> (usize, usize) {
        let p = self.grid.degree;
        (a % self.per_axis + p, a / self.per_axis + p)
    }

    fn active_index(&self, i: usize, j: usize) -> Option<usize> {
        let p = self.grid.degree;
        let r = p..self.grid.n;
        (r.contains(&i) && r.contains(&j)).then(|| (j - p) * self.per_axis + (i - p))
    }

    /// Support box of active function `a`.
    pub fn support(&self, a: usize) -> Rect {
        let (i, j) = self.tensor_index(a);
        let p = self.grid.degree;
        let h = self.grid.h();
        let o = self.grid.rect.min;
        Rect::new(
            Point2::new(o.x + (i - p) as f64 * h.x, o.y + (j - p) as f64 * h.y),
            Point2::new(o.x + (i + 1) as f64 * h.x, o.y + (j + 1) as f64 * h.y),
        )
    }

    fn local_coords(&self, x: &Point2) -> Vector2<f64> {
        let h = self.grid.h();
        let o = self.grid.rect.min;
        Vector2::new((x.x - o.x) / h.x, (x.y - o.y) / h.y)
    }

    /// Value and gradient of scalar active basis function `a` at `x`.
    pub fn eval_basis(&self, a: usize, x: &Point2) -> (f64, Vector2<f64>) {
        let (i, j) = self.tensor_index(a);
        let p = self.grid.degree;
        let t = self.local_coords(x);
        let h = self.grid.h();
        let (vx, dx) = cardinal(p, t.x - (i - p) as f64);
        let (vy, dy) = cardinal(p, t.y - (j - p) as f64);
        (vx * vy, Vector2::new(dx * vy / h.x, vx * dy / h.y))
    }

    /// Active functions that may be nonzero at `x`.
    pub fn active_at(&self, x: &Point2) -> Vec<usize> {
        let t = self.local_coords(x);
        let range = |s: f64| -> std::ops::Range<usize> {
            if !s.is_finite() {
                return 0..0;
            }
            let lo = (s.floor() as i64 - 1).max(0) as usize;
            let hi = (s.floor() as i64 + self.grid.degree as i64 + 2).max(0) as usize;
            lo..hi.min(self.grid.n)
        };
        let mut out = Vec::new();
        for j in range(t.y) {
            for i in range(t.x) {
                if let Some(a) = self.active_index(i, j) {
                    out.push(a);
                }
            }
        }
        out
    }

    /// Field value and Jacobian `D V` (rows are components).
    pub fn eval_field(&self, coeffs: &[f64], x: &Point2) -> Result<(Vector2<f64>, Matrix2<f64>)> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: coeffs.len(),
            });
        }
        let mut v = Vector2::zeros();
        let mut jac = Matrix2::zeros();
        for a in self.active_at(x) {
            let (q, g) = self.eval_basis(a, x);
            for c in 0..2 {
                let w = coeffs[2 * a + c];
                v[c] += w * q;
                jac[(c, 0)] += w * g.x;
                jac[(c, 1)] += w * g.y;
            }
        }
        Ok((v, jac))
    }

    /// `H^1(D)` Gram matrix of the vector basis, by tensor Gauss quadrature
    /// with `p + 1` points per axis on each grid cell.
    pub fn gram_h1(&self) -> CsrMatrix {
        let p = self.grid.degree;
        let n = self.grid.n;
        let h = self.grid.h();
        let (gx, gw) = gauss_legendre(p + 1);
        let o = self.grid.rect.min;
        let mut tb = TripletBuilder::new(self.dim(), self.dim());
        let mut local = Vec::with_capacity((p + 1) * (p + 1));
        for cy in 0..n {
            for cx in 0..n {
                local.clear();
                for j in cy..=cy + p {
                    for i in cx..=cx + p {
                        if let Some(a) = self.active_index(i, j) {
                            local.push(a);
                        }
                    }
                }
                if local.is_empty() {
                    continue;
                }
                let mut elem = vec![0.0; local.len() * local.len()];
                for (qy, wy) in gx.iter().zip(&gw) {
                    for (qx, wx) in gx.iter().zip(&gw) {
                        let x = Point2::new(
                            o.x + (cx as f64 + 0.5 * (qx + 1.0)) * h.x,
                            o.y + (cy as f64 + 0.5 * (qy + 1.0)) * h.y,
                        );
                        let w = wx * wy * 0.25 * h.x * h.y;
                        let vals: Vec<_> = local.iter().map(|&a| self.eval_basis(a, &x)).collect();
                        for (r, (vr, gr)) in vals.iter().enumerate() {
                            for (s, (vs, gs)) in vals.iter().enumerate() {
                                elem[r * local.len() + s] += w * (gr.dot(gs) + vr * vs);
                            }
                        }
                    }
                }
                for (r, &a) in local.iter().enumerate() {
                    for (s, &b) in local.iter().enumerate() {
                        let v = elem[r * local.len() + s];
                        tb.add(2 * a, 2 * b, v);
                        tb.add(2 * a + 1, 2 * b + 1, v);
                    }
                }
            }
        }
        tb.build()
    }
}
