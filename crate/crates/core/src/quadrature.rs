//! Quadrature rules on `[-1, 1]` and on the reference triangle
//! `{(0,0), (1,0), (0,1)}`.

use crate::mesh::Point2;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, `n` in `1..=5`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let x = 1.0 / 3f64.sqrt();
            (vec![-x, x], vec![1.0, 1.0])
        }
        3 => {
            let x = (0.6f64).sqrt();
            (vec![-x, 0.0, x], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, 128.0 / 225.0, wa, wb])
        }
        _ => panic!("Gauss-Legendre rule with {n} points is not tabulated"),
    }
}

/// Symmetric rule on the reference triangle; weights sum to 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

fn push_orbit(pts: &mut Vec<[f64; 3]>, w: &mut Vec<f64>, bary: [f64; 3], weight: f64) {
    let [a, b, c] = bary;
    let mut uniq: Vec<[f64; 3]> = Vec::new();
    for p in [[a, b, c], [b, c, a], [c, a, b], [a, c, b], [c, b, a], [b, a, c]] {
        if !uniq.contains(&p) {
            uniq.push(p);
        }
    }
    for p in uniq {
        pts.push(p);
        w.push(weight);
    }
}

impl TriangleRule {
    /// Smallest tabulated rule exact for polynomials of total degree `degree`.
    pub fn with_degree(degree: usize) -> Self {
        let mut pts = Vec::new();
        let mut w = Vec::new();
        let exact = match degree {
            0 | 1 => {
                push_orbit(&mut pts, &mut w, [1.0 / 3.0; 3], 1.0);
                1
            }
            2 => {
                push_orbit(&mut pts, &mut w, [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0);
                2
            }
            3 | 4 => {
                push_orbit(
                    &mut pts,
                    &mut w,
                    [0.108103018168070, 0.445948490915965, 0.445948490915965],
                    0.223381589678011,
                );
                push_orbit(
                    &mut pts,
                    &mut w,
                    [0.816847572980459, 0.091576213509771, 0.091576213509771],
                    0.109951743655322,
                );
                4
            }
            5 | 6 => {
                push_orbit(
                    &mut pts,
                    &mut w,
                    [0.501426509658179, 0.249286745170910, 0.249286745170910],
                    0.116786275726379,
                );
                push_orbit(
                    &mut pts,
                    &mut w,
                    [0.873821971016996, 0.063089014491502, 0.063089014491502],
                    0.050844906370207,
                );
                push_orbit(
                    &mut pts,
                    &mut w,
                    [0.053145049844817, 0.310352451033784, 0.636502499121399],
                    0.082851075618374,
                );
                6
            }
            _ => panic!("no triangle rule of degree {degree} is tabulated"),
        };
        // tabulated weights carry 15 digits; renormalize to the exact area
        let total: f64 = w.iter().sum();
        Self {
            points: pts.iter().map(|b| Point2::new(b[1], b[2])).collect(),
            weights: w.iter().map(|x| 0.5 * x / total).collect(),
            degree: exact,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn triangle_rules_are_exact() {
        for deg in [1, 2, 4, 6] {
            let r = TriangleRule::with_degree(deg);
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for i in 0..=deg {
                for j in 0..=deg - i {
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p.x.powi(i as i32) * p.y.powi(j as i32))
                        .sum();
                    let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                    assert!((q - exact).abs() < 1e-14, "deg {deg}: x^{i} y^{j}");
                }
            }
        }
        assert_eq!(TriangleRule::with_degree(4).len(), 6);
        assert_eq!(TriangleRule::with_degree(6).len(), 12);
    }

    #[test]
    fn gauss_legendre_is_exact() {
        for n in 1..=5 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }
}
