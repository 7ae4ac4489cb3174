//! Simplicial triangulations of the initial polytope.
//!
//! A [`TriMesh`] is immutable once built. Construction validates the
//! orientation of every cell, the edge/cell incidence, and that the tagged
//! boundary edges cover the topological boundary exactly once.

mod generate;
mod msh;
mod refine;
mod vtk;

use std::collections::HashMap;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub use generate::{generate_annulus, generate_rectangle, AnnulusOptions, Side};
pub use msh::{parse_msh, write_msh, TagDictionary};
pub use refine::uniform_refine;
pub use vtk::{write_vtk, VtkField};

pub type Point2 = nalgebra::Point2<f64>;

/// Boundary labels used by the shipped problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Inner,
    Outer,
    Inflow,
    Outflow,
    Wall,
    Obstacle,
    Clamp,
    Load,
    Free,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 9] = [
        BoundaryTag::Inner,
        BoundaryTag::Outer,
        BoundaryTag::Inflow,
        BoundaryTag::Outflow,
        BoundaryTag::Wall,
        BoundaryTag::Obstacle,
        BoundaryTag::Clamp,
        BoundaryTag::Load,
        BoundaryTag::Free,
    ];

    /// Default physical-group id used by the MSH writer.
    pub fn code(self) -> i64 {
        self as i64 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Inner => "inner",
            BoundaryTag::Outer => "outer",
            BoundaryTag::Inflow => "inflow",
            BoundaryTag::Outflow => "outflow",
            BoundaryTag::Wall => "wall",
            BoundaryTag::Obstacle => "obstacle",
            BoundaryTag::Clamp => "clamp",
            BoundaryTag::Load => "load",
            BoundaryTag::Free => "free",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// A circle used both as mesh geometry and as snapping target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point2,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Point2, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Radial projection onto the circle.
    pub fn project(&self, p: &Point2) -> Result<Point2> {
        let d = p - self.center;
        let n = d.norm();
        if n < 1e-300 {
            return Err(Error::Geometry(format!(
                "cannot project the circle center {:?} radially",
                p
            )));
        }
        Ok(self.center + d * (self.radius / n))
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }
}

/// Axis-aligned rectangle `[min.x, max.x] x [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Analytic description of curved boundaries, used for snapping refined
/// midpoints and for building the initial isoparametric map.
#[derive(Debug, Clone, Default)]
pub struct CurvedBoundary {
    pub circles: Vec<(BoundaryTag, Circle)>,
}

impl CurvedBoundary {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn circle(tag: BoundaryTag, circle: Circle) -> Self {
        Self {
            circles: vec![(tag, circle)],
        }
    }

    pub fn curve_for(&self, tag: BoundaryTag) -> Option<&Circle> {
        self.circles.iter().find(|(t, _)| *t == tag).map(|(_, c)| c)
    }

    pub fn is_empty(&self) -> bool {
        self.circles.is_empty()
    }
}

/// `G_K(x̂) = B x̂ + b`, mapping the reference triangle onto a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineCellMap {
    pub cell: usize,
    pub b: Matrix2<f64>,
    pub offset: Vector2<f64>,
}

impl AffineCellMap {
    pub fn det(&self) -> f64 {
        self.b.determinant()
    }

    pub fn map(&self, xhat: &Point2) -> Point2 {
        Point2::from(self.b * xhat.coords + self.offset)
    }

    pub fn inverse(&self, x: &Point2) -> Point2 {
        let inv = self.b.try_inverse().expect("affine map is invertible");
        Point2::from(inv * (x.coords - self.offset))
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<Point2>,
    cells: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    edges: Vec<[usize; 2]>,
    // local edge j joins local vertices (j, j+1 mod 3)
    cell_edges: Vec<[usize; 3]>,
    edge_index: HashMap<(usize, usize), usize>,
}

pub(crate) fn signed_area(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriMesh {
    /// Validates and builds a mesh. Clockwise cells are reoriented.
    pub fn new(
        nodes: Vec<Point2>,
        mut cells: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        if let Some(i) = nodes.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidMesh(format!("node {i} is not finite")));
        }
        let nv = nodes.len();
        for (k, cell) in cells.iter_mut().enumerate() {
            if cell.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("cell {k} references a missing node")));
            }
            let area = signed_area(&nodes[cell[0]], &nodes[cell[1]], &nodes[cell[2]]);
            if area == 0.0 || !area.is_finite() {
                return Err(Error::InvalidMesh(format!("cell {k} is degenerate")));
            }
            if area < 0.0 {
                cell.swap(1, 2);
            }
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_count: Vec<u32> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for cell in &cells {
            let mut ce = [0usize; 3];
            for j in 0..3 {
                let key = edge_key(cell[j], cell[(j + 1) % 3]);
                let idx = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_count.push(0);
                    edges.len() - 1
                });
                edge_count[idx] += 1;
                ce[j] = idx;
            }
            cell_edges.push(ce);
        }
        if let Some(e) = edge_count.iter().position(|&c| c > 2) {
            return Err(Error::InvalidMesh(format!(
                "edge {:?} is shared by more than two cells",
                edges[e]
            )));
        }

        let mut tagged = vec![false; edges.len()];
        for be in &boundary {
            let key = edge_key(be.nodes[0], be.nodes[1]);
            match edge_index.get(&key) {
                Some(&e) if edge_count[e] == 1 => {
                    if tagged[e] {
                        return Err(Error::InvalidMesh(format!(
                            "boundary edge {:?} is tagged twice",
                            be.nodes
                        )));
                    }
                    tagged[e] = true;
                }
                Some(_) => {
                    return Err(Error::InvalidMesh(format!(
                        "tagged edge {:?} is an interior edge",
                        be.nodes
                    )))
                }
                None => {
                    return Err(Error::InvalidMesh(format!(
                        "tagged edge {:?} belongs to no cell",
                        be.nodes
                    )))
                }
            }
        }
        if let Some(e) = (0..edges.len()).find(|&e| edge_count[e] == 1 && !tagged[e]) {
            return Err(Error::InvalidMesh(format!(
                "boundary edge {:?} carries no tag",
                edges[e]
            )));
        }

        Ok(Self {
            nodes,
            cells,
            boundary,
            edges,
            cell_edges,
            edge_index,
        })
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Unique edges, each stored with sorted vertex indices.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&edge_key(a, b)).copied()
    }

    pub fn tags(&self) -> Vec<BoundaryTag> {
        let mut t: Vec<_> = self.boundary.iter().map(|e| e.tag).collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary.iter().any(|e| e.tag == tag)
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let c = self.cells[cell];
        signed_area(&self.nodes[c[0]], &self.nodes[c[1]], &self.nodes[c[2]])
    }

    pub fn area(&self) -> f64 {
        (0..self.cells.len()).map(|k| self.cell_area(k)).sum()
    }

    /// Longest edge length.
    pub fn max_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| (self.nodes[e[0]] - self.nodes[e[1]]).norm())
            .fold(0.0, f64::max)
    }

    pub fn affine_map(&self, cell: usize) -> Result<AffineCellMap> {
        let c = self
            .cells
            .get(cell)
            .ok_or_else(|| Error::InvalidInput(format!("cell index {cell} out of range")))?;
        let p0 = self.nodes[c[0]];
        let b = Matrix2::from_columns(&[self.nodes[c[1]] - p0, self.nodes[c[2]] - p0]);
        let det = b.determinant();
        if det <= 0.0 {
            return Err(Error::InvertedElement { cell, det });
        }
        Ok(AffineCellMap {
            cell,
            b,
            offset: p0.coords,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tri(pts: [(f64, f64); 3]) -> TriMesh {
        let nodes = pts.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        let boundary = [[0, 1], [1, 2], [2, 0]]
            .iter()
            .map(|&n| BoundaryEdge {
                nodes: n,
                tag: BoundaryTag::Outer,
            })
            .collect();
        TriMesh::new(nodes, vec![[0, 1, 2]], boundary).unwrap()
    }

    #[test]
    fn reference_cell_has_identity_map() {
        let m = tri([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let g = m.affine_map(0).unwrap();
        assert_eq!(g.b, Matrix2::identity());
        assert_eq!(g.offset, Vector2::zeros());
    }

    #[test]
    fn scaled_and_translated_cells() {
        let m = tri([(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]);
        assert_abs_diff_eq!(m.affine_map(0).unwrap().det(), 4.0);
        assert_abs_diff_eq!(m.affine_map(0).unwrap().det(), 2.0 * m.cell_area(0));

        let t = tri([(3.0, -1.0), (4.0, -1.0), (3.0, 0.0)]);
        let g = t.affine_map(0).unwrap();
        assert_eq!(g.b, Matrix2::identity());
        assert_eq!(g.offset, Vector2::new(3.0, -1.0));
    }

    #[test]
    fn clockwise_cells_are_reoriented() {
        let m = tri([(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]);
        assert_abs_diff_eq!(m.cell_area(0), 0.5);
    }

    #[test]
    fn map_inverse_roundtrip_on_reference_vertices() {
        let m = tri([(0.3, 0.1), (1.7, 0.4), (0.2, 1.9)]);
        let g = m.affine_map(0).unwrap();
        for v in [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)] {
            let back = g.inverse(&g.map(&v));
            assert!((back - v).norm() < 1e-14);
        }
        assert!((g.map(&Point2::new(1.0, 0.0)) - m.nodes()[m.cells()[0][1]]).norm() < 1e-15);
    }

    #[test]
    fn untagged_boundary_is_rejected() {
        let nodes = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let boundary = vec![BoundaryEdge {
            nodes: [0, 1],
            tag: BoundaryTag::Outer,
        }];
        assert!(TriMesh::new(nodes, vec![[0, 1, 2]], boundary).is_err());
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        let nodes = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)];
        assert!(TriMesh::new(nodes, vec![[0, 1, 2]], vec![]).is_err());
    }
}
