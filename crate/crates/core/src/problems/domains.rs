use crate::error::Result;
use crate::mesh::{
    generate_annulus, generate_rectangle, uniform_refine, AnnulusOptions, BoundaryTag, Circle, CurvedBoundary,
    Point2, Rect, Side, TriMesh,
};

/// A rectangle with one circular hole, meshed by rays and refined with the
/// new hole vertices snapped onto the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusDomain {
    pub hole: Circle,
    pub outer: Rect,
    pub n_theta: usize,
    pub n_r: usize,
    pub options: AnnulusOptions,
}

impl AnnulusDomain {
    pub fn build(&self, refinements: usize) -> Result<(TriMesh, CurvedBoundary)> {
        let curved = CurvedBoundary::circle(self.options.inner_tag, self.hole);
        let mut mesh = generate_annulus(self.hole, self.outer, self.n_theta, self.n_r, &self.options)?;
        for _ in 0..refinements {
            mesh = uniform_refine(&mesh, Some(&curved))?;
        }
        Ok((mesh, curved))
    }
}

/// Axis-aligned rectangle whose left and right sides carry tagged segments;
/// every other boundary edge is `Free`.
#[derive(Debug, Clone, PartialEq)]
pub struct RectangleDomain {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    /// `(y_min, y_max)` intervals of the left side tagged `Clamp`.
    pub clamped: Vec<(f64, f64)>,
    /// `(y_min, y_max)` intervals of the right side tagged `Load`.
    pub loaded: Vec<(f64, f64)>,
}

impl RectangleDomain {
    pub fn build(&self, refinements: usize) -> Result<(TriMesh, CurvedBoundary)> {
        let inside = |ivs: &[(f64, f64)], y: f64| ivs.iter().any(|&(a, b)| a < y && y < b);
        let mut mesh = generate_rectangle(self.rect, self.nx, self.ny, |side, m: Point2| match side {
            Side::Left if inside(&self.clamped, m.y) => BoundaryTag::Clamp,
            Side::Right if inside(&self.loaded, m.y) => BoundaryTag::Load,
            _ => BoundaryTag::Free,
        })?;
        for _ in 0..refinements {
            mesh = uniform_refine(&mesh, None)?;
        }
        Ok((mesh, CurvedBoundary::none()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_segments_are_tagged() {
        let d = RectangleDomain {
            rect: Rect::new(Point2::new(0.0, 0.0), Point2::new(2.0, 1.0)),
            nx: 40,
            ny: 20,
            clamped: vec![(0.0, 0.2), (0.8, 1.0)],
            loaded: vec![(0.45, 0.55)],
        };
        let (m, c) = d.build(0).unwrap();
        assert!(c.is_empty());
        let count = |t| m.boundary_edges().iter().filter(|e| e.tag == t).count();
        assert_eq!(count(BoundaryTag::Clamp), 8);
        assert_eq!(count(BoundaryTag::Load), 2);
        assert_eq!(count(BoundaryTag::Free), 2 * 40 + 2 * 20 - 10);
    }

    #[test]
    fn refined_hole_stays_on_circle() {
        let d = AnnulusDomain {
            hole: Circle::new(Point2::new(0.04, 0.05), 0.5),
            outer: Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
            n_theta: 16,
            n_r: 4,
            options: AnnulusOptions::default(),
        };
        let (m, c) = d.build(2).unwrap();
        assert_eq!(m.num_cells(), 128 * 16);
        let circle = c.curve_for(BoundaryTag::Inner).unwrap();
        for e in m.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Inner) {
            for &n in &e.nodes {
                let r = (m.nodes()[n] - circle.center).norm();
                assert!((r - 0.5).abs() < 1e-14);
            }
        }
    }
}
