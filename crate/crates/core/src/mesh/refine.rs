use super::{BoundaryEdge, CurvedBoundary, Point2, TriMesh};
use crate::error::Result;

/// Splits every cell into four through its edge midpoints.
///
/// New vertex `V + e` is the midpoint of edge `e`. With `snap`, midpoints of
/// boundary edges whose tag has an analytic curve are projected onto it.
pub fn uniform_refine(mesh: &TriMesh, snap: Option<&CurvedBoundary>) -> Result<TriMesh> {
    let nv = mesh.num_nodes();
    let mut nodes = mesh.nodes().to_vec();
    nodes.extend(mesh.edges().iter().map(|e| {
        Point2::from((mesh.nodes()[e[0]].coords + mesh.nodes()[e[1]].coords) * 0.5)
    }));

    let mut boundary = Vec::with_capacity(2 * mesh.boundary_edges().len());
    for be in mesh.boundary_edges() {
        let e = mesh
            .edge_id(be.nodes[0], be.nodes[1])
            .expect("boundary edge exists in the mesh");
        let mid = nv + e;
        if let Some(circle) = snap.and_then(|s| s.curve_for(be.tag)) {
            nodes[mid] = circle.project(&nodes[mid])?;
        }
        boundary.push(BoundaryEdge {
            nodes: [be.nodes[0], mid],
            tag: be.tag,
        });
        boundary.push(BoundaryEdge {
            nodes: [mid, be.nodes[1]],
            tag: be.tag,
        });
    }

    let mut cells = Vec::with_capacity(4 * mesh.num_cells());
    for (cell, ce) in mesh.cells().iter().zip(mesh.cell_edges()) {
        let [a, b, c] = *cell;
        let (m0, m1, m2) = (nv + ce[0], nv + ce[1], nv + ce[2]);
        cells.push([a, m0, m2]);
        cells.push([m0, b, m1]);
        cells.push([m2, m1, c]);
        cells.push([m0, m1, m2]);
    }
    TriMesh::new(nodes, cells, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_annulus, AnnulusOptions, BoundaryTag, Circle, Rect};

    fn single() -> TriMesh {
        let nodes = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
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
    fn single_triangle() {
        let r = uniform_refine(&single(), None).unwrap();
        assert_eq!(r.num_cells(), 4);
        assert_eq!(r.num_nodes(), 6);
        assert_eq!(r.boundary_edges().len(), 6);
        assert!((r.area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn euler_bookkeeping_and_area() {
        let m = generate_annulus(
            Circle::new(Point2::new(0.1, 0.0), 0.3),
            Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
            16,
            3,
            &AnnulusOptions::default(),
        )
        .unwrap();
        let r = uniform_refine(&m, None).unwrap();
        assert_eq!(r.num_cells(), 4 * m.num_cells());
        assert_eq!(r.num_nodes(), m.num_nodes() + m.num_edges());
        assert_eq!(r.boundary_edges().len(), 2 * m.boundary_edges().len());
        assert!(((r.area() - m.area()) / m.area()).abs() < 1e-12);
    }

    #[test]
    fn snapping_projects_inner_midpoints() {
        let circle = Circle::new(Point2::origin(), 0.4);
        let m = generate_annulus(
            circle,
            Rect::new(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
            16,
            4,
            &AnnulusOptions::default(),
        )
        .unwrap();
        let snap = CurvedBoundary::circle(BoundaryTag::Inner, circle);
        let r = uniform_refine(&uniform_refine(&m, Some(&snap)).unwrap(), Some(&snap)).unwrap();
        for e in r.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Inner) {
            for &v in &e.nodes {
                assert!((r.nodes()[v].coords.norm() - 0.4).abs() < 1e-14);
            }
        }
        // outer square is untouched by snapping
        assert!(r
            .boundary_edges()
            .iter()
            .filter(|e| e.tag == BoundaryTag::Outer)
            .flat_map(|e| e.nodes)
            .all(|v| {
                let p = r.nodes()[v];
                (p.x.abs() - 1.0).abs() < 1e-15 || (p.y.abs() - 1.0).abs() < 1e-15
            }));
    }
}
