use std::f64::consts::PI;

use super::{BoundaryEdge, BoundaryTag, Circle, Point2, Rect, TriMesh};
use crate::error::{Error, Result};

/// Sides of an axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    fn of_point(rect: &Rect, p: &Point2, tol: f64) -> Vec<Side> {
        let mut s = Vec::with_capacity(2);
        if (p.x - rect.min.x).abs() <= tol {
            s.push(Side::Left);
        }
        if (p.x - rect.max.x).abs() <= tol {
            s.push(Side::Right);
        }
        if (p.y - rect.min.y).abs() <= tol {
            s.push(Side::Bottom);
        }
        if (p.y - rect.max.y).abs() <= tol {
            s.push(Side::Top);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusOptions {
    pub inner_tag: BoundaryTag,
    /// Tags for the left, right, bottom and top sides of the outer rectangle.
    pub side_tags: [BoundaryTag; 4],
    /// Radial layers sit at `(j / n_r)^grading`; values above 1 cluster
    /// layers near the inner circle.
    pub grading: f64,
}

impl Default for AnnulusOptions {
    fn default() -> Self {
        Self {
            inner_tag: BoundaryTag::Inner,
            side_tags: [BoundaryTag::Outer; 4],
            grading: 1.0,
        }
    }
}

impl AnnulusOptions {
    fn side_tag(&self, side: Side) -> BoundaryTag {
        match side {
            Side::Left => self.side_tags[0],
            Side::Right => self.side_tags[1],
            Side::Bottom => self.side_tags[2],
            Side::Top => self.side_tags[3],
        }
    }
}

/// Transfinite mesh between a polygonal circle and a rectangle.
///
/// Rays from the circle center at uniform angles connect the inner ring to
/// the outer boundary; the ray closest to each rectangle corner is turned
/// onto that corner so the corners are mesh vertices.
pub fn generate_annulus(
    inner: Circle,
    outer: Rect,
    n_theta: usize,
    n_r: usize,
    opts: &AnnulusOptions,
) -> Result<TriMesh> {
    if n_theta < 8 {
        return Err(Error::InvalidInput(format!("n_theta = {n_theta} < 8")));
    }
    if n_r < 2 {
        return Err(Error::InvalidInput(format!("n_r = {n_r} < 2")));
    }
    if !(opts.grading > 0.0) {
        return Err(Error::InvalidInput("grading must be positive".into()));
    }
    let c = inner.center;
    let clearance = (c.x - outer.min.x)
        .min(outer.max.x - c.x)
        .min(c.y - outer.min.y)
        .min(outer.max.y - c.y);
    if !(inner.radius > 0.0) || clearance <= inner.radius {
        return Err(Error::Geometry(
            "inner circle must lie strictly inside the outer rectangle".into(),
        ));
    }

    let dtheta = 2.0 * PI / n_theta as f64;
    let mut theta: Vec<f64> = (0..n_theta).map(|k| k as f64 * dtheta).collect();
    let corners = [
        outer.min,
        Point2::new(outer.max.x, outer.min.y),
        outer.max,
        Point2::new(outer.min.x, outer.max.y),
    ];
    let mut snapped = vec![false; n_theta];
    for corner in &corners {
        let phi = (corner.y - c.y).atan2(corner.x - c.x).rem_euclid(2.0 * PI);
        let k = ((phi / dtheta).round() as usize) % n_theta;
        if snapped[k] {
            return Err(Error::InvalidInput(format!(
                "n_theta = {n_theta} is too small to resolve the rectangle corners"
            )));
        }
        snapped[k] = true;
        // keep the snapped angle within half a step of its slot
        let mut a = phi;
        if a - theta[k] > PI {
            a -= 2.0 * PI;
        }
        theta[k] = a;
    }

    let ray_hit = |t: f64| -> Point2 {
        let d = (t.cos(), t.sin());
        let mut s = f64::INFINITY;
        if d.0 > 1e-15 {
            s = s.min((outer.max.x - c.x) / d.0);
        } else if d.0 < -1e-15 {
            s = s.min((outer.min.x - c.x) / d.0);
        }
        if d.1 > 1e-15 {
            s = s.min((outer.max.y - c.y) / d.1);
        } else if d.1 < -1e-15 {
            s = s.min((outer.min.y - c.y) / d.1);
        }
        Point2::new(c.x + s * d.0, c.y + s * d.1)
    };

    let mut inner_pts = Vec::with_capacity(n_theta);
    let mut outer_pts = Vec::with_capacity(n_theta);
    for (k, &t) in theta.iter().enumerate() {
        inner_pts.push(Point2::new(
            c.x + inner.radius * t.cos(),
            c.y + inner.radius * t.sin(),
        ));
        outer_pts.push(if snapped[k] {
            corners
                .iter()
                .copied()
                .min_by(|a, b| {
                    let da = (a.y - c.y).atan2(a.x - c.x).rem_euclid(2.0 * PI);
                    let db = (b.y - c.y).atan2(b.x - c.x).rem_euclid(2.0 * PI);
                    let tk = t.rem_euclid(2.0 * PI);
                    let dist = |x: f64| {
                        let d = (x - tk).abs();
                        d.min(2.0 * PI - d)
                    };
                    dist(da).total_cmp(&dist(db))
                })
                .unwrap()
        } else {
            ray_hit(t)
        });
    }

    let mut nodes = Vec::with_capacity((n_r + 1) * n_theta);
    for j in 0..=n_r {
        let rho = (j as f64 / n_r as f64).powf(opts.grading);
        for k in 0..n_theta {
            let p = inner_pts[k].coords * (1.0 - rho) + outer_pts[k].coords * rho;
            nodes.push(Point2::from(p));
        }
    }
    // snap the last layer exactly onto the outer boundary
    for k in 0..n_theta {
        nodes[n_r * n_theta + k] = outer_pts[k];
    }

    let idx = |j: usize, k: usize| j * n_theta + (k % n_theta);
    let mut cells = Vec::with_capacity(2 * n_theta * n_r);
    for j in 0..n_r {
        for k in 0..n_theta {
            let (a, b, cc, d) = (idx(j, k), idx(j, k + 1), idx(j + 1, k + 1), idx(j + 1, k));
            let diag_ac = (nodes[a] - nodes[cc]).norm();
            let diag_bd = (nodes[b] - nodes[d]).norm();
            if diag_ac <= diag_bd {
                cells.push([a, cc, b]);
                cells.push([a, d, cc]);
            } else {
                cells.push([a, d, b]);
                cells.push([b, d, cc]);
            }
        }
    }

    let tol = 1e-12 * (outer.width() + outer.height());
    let mut boundary = Vec::with_capacity(2 * n_theta);
    for k in 0..n_theta {
        boundary.push(BoundaryEdge {
            nodes: [idx(0, k), idx(0, k + 1)],
            tag: opts.inner_tag,
        });
    }
    for k in 0..n_theta {
        let (a, b) = (idx(n_r, k), idx(n_r, k + 1));
        let sa = Side::of_point(&outer, &nodes[a], tol);
        let sb = Side::of_point(&outer, &nodes[b], tol);
        let side = sa
            .iter()
            .find(|s| sb.contains(s))
            .copied()
            .ok_or_else(|| Error::Geometry("outer edge spans two sides".into()))?;
        boundary.push(BoundaryEdge {
            nodes: [a, b],
            tag: opts.side_tag(side),
        });
    }

    let mesh = TriMesh::new(nodes, cells, boundary)?;
    if let Some(k) = (0..mesh.num_cells()).find(|&k| mesh.cell_area(k) <= 0.0) {
        return Err(Error::Geometry(format!("cell {k} has non-positive area")));
    }
    Ok(mesh)
}

/// Structured triangulation of a rectangle with `nx * ny` quads split along
/// alternating diagonals. `tagger` receives the side and the midpoint of each
/// boundary edge.
pub fn generate_rectangle(
    rect: Rect,
    nx: usize,
    ny: usize,
    tagger: impl Fn(Side, Point2) -> BoundaryTag,
) -> Result<TriMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("rectangle needs nx, ny >= 1".into()));
    }
    if !(rect.width() > 0.0 && rect.height() > 0.0) {
        return Err(Error::Geometry("empty rectangle".into()));
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(Point2::new(
                rect.min.x + rect.width() * i as f64 / nx as f64,
                rect.min.y + rect.height() * j as f64 / ny as f64,
            ));
        }
    }
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                cells.push([a, b, c]);
                cells.push([a, c, d]);
            } else {
                cells.push([a, b, d]);
                cells.push([b, c, d]);
            }
        }
    }
    let mut boundary = Vec::new();
    let mut push = |a: usize, b: usize, side: Side, nodes: &[Point2]| {
        let mid = Point2::from((nodes[a].coords + nodes[b].coords) * 0.5);
        boundary.push(BoundaryEdge {
            nodes: [a, b],
            tag: tagger(side, mid),
        });
    };
    for i in 0..nx {
        push(idx(i, 0), idx(i + 1, 0), Side::Bottom, &nodes);
        push(idx(i + 1, ny), idx(i, ny), Side::Top, &nodes);
    }
    for j in 0..ny {
        push(idx(nx, j), idx(nx, j + 1), Side::Right, &nodes);
        push(idx(0, j + 1), idx(0, j), Side::Left, &nodes);
    }
    TriMesh::new(nodes, cells, boundary)
}
