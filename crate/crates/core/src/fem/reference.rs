use nalgebra::Vector2;

use crate::mesh::Point2;
use crate::quadrature::TriangleRule;

/// Reference coordinates of the local nodes of a degree-`p` element:
/// vertices, then midpoints of edges (0,1), (1,2), (2,0).
pub fn reference_nodes(degree: usize) -> &'static [Point2] {
    const P2: [Point2; 6] = [
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(0.0, 1.0),
        Point2::new(0.5, 0.0),
        Point2::new(0.5, 0.5),
        Point2::new(0.0, 0.5),
    ];
    match degree {
        1 => &P2[..3],
        2 => &P2,
        _ => panic!("Lagrange degree {degree} is not supported"),
    }
}

pub fn local_dim(degree: usize) -> usize {
    match degree {
        1 => 3,
        2 => 6,
        _ => panic!("Lagrange degree {degree} is not supported"),
    }
}

/// Values and reference gradients of the Lagrange basis at `xhat`.
pub fn reference_basis(degree: usize, xhat: &Point2) -> (Vec<f64>, Vec<Vector2<f64>>) {
    let l = [1.0 - xhat.x - xhat.y, xhat.x, xhat.y];
    let dl = [Vector2::new(-1.0, -1.0), Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)];
    match degree {
        1 => (l.to_vec(), dl.to_vec()),
        2 => {
            let mut v = Vec::with_capacity(6);
            let mut g = Vec::with_capacity(6);
            for i in 0..3 {
                v.push(l[i] * (2.0 * l[i] - 1.0));
                g.push(dl[i] * (4.0 * l[i] - 1.0));
            }
            for i in 0..3 {
                let j = (i + 1) % 3;
                v.push(4.0 * l[i] * l[j]);
                g.push((dl[i] * l[j] + dl[j] * l[i]) * 4.0);
            }
            (v, g)
        }
        _ => panic!("Lagrange degree {degree} is not supported"),
    }
}

/// Basis values and reference gradients tabulated at the points of a rule.
#[derive(Debug, Clone)]
pub struct RefTable {
    pub degree: usize,
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<Vector2<f64>>>,
}

impl RefTable {
    pub fn new(degree: usize, points: &[Point2]) -> Self {
        let (values, grads) = points.iter().map(|p| reference_basis(degree, p)).unzip();
        Self {
            degree,
            values,
            grads,
        }
    }
}

/// A triangle rule with basis tables for both Lagrange degrees.
#[derive(Debug, Clone)]
pub struct CellQuadrature {
    pub rule: TriangleRule,
    p1: RefTable,
    p2: RefTable,
}

impl CellQuadrature {
    pub fn new(rule: TriangleRule) -> Self {
        let p1 = RefTable::new(1, &rule.points);
        let p2 = RefTable::new(2, &rule.points);
        Self { rule, p1, p2 }
    }

    /// Rule exact to degree `2 p + 2` for FE degree `p`.
    pub fn for_degree(p: usize) -> Self {
        Self::new(TriangleRule::with_degree(2 * p + 2))
    }

    pub fn table(&self, degree: usize) -> &RefTable {
        match degree {
            1 => &self.p1,
            2 => &self.p2,
            _ => panic!("Lagrange degree {degree} is not supported"),
        }
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }
}
