//! Quadrature on triangles and segments.

use std::sync::OnceLock;

use crate::mesh::Point;

/// Rule on the reference simplex in barycentric coordinates; weights sum to 1
/// so that `∫_T f ≈ |T| Σ w_i f(x_i)`.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: u32,
}

impl TriangleRule {
    /// Seven-point rule exact for polynomials of degree 5.
    pub fn degree5() -> &'static TriangleRule {
        static RULE: OnceLock<TriangleRule> = OnceLock::new();
        RULE.get_or_init(|| {
            let s15 = 15f64.sqrt();
            let (a1, a2) = ((6.0 - s15) / 21.0, (6.0 + s15) / 21.0);
            let (w1, w2) = ((155.0 - s15) / 1200.0, (155.0 + s15) / 1200.0);
            let mut points = vec![[1.0 / 3.0; 3]];
            let mut weights = vec![9.0 / 40.0];
            for (a, w) in [(a1, w1), (a2, w2)] {
                let b = 1.0 - 2.0 * a;
                points.extend([[b, a, a], [a, b, a], [a, a, b]]);
                weights.extend([w; 3]);
            }
            TriangleRule { points, weights, degree: 5 }
        })
    }

    /// Edge-midpoint rule, exact for quadratics.
    pub fn midpoints() -> &'static TriangleRule {
        static RULE: OnceLock<TriangleRule> = OnceLock::new();
        RULE.get_or_init(|| TriangleRule {
            points: vec![[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        })
    }

    /// Collapsed Gauss–Legendre product rule with `n` points per direction,
    /// exact for degree `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> TriangleRule {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                // (u, v) ∈ [0,1]², λ1 = u, λ2 = v(1-u), Jacobian (1-u), area normalization 2.
                let (u, v) = (x[i], x[j]);
                let l1 = u;
                let l2 = v * (1.0 - u);
                points.push([1.0 - l1 - l2, l1, l2]);
                weights.push(2.0 * w[i] * w[j] * (1.0 - u));
            }
        }
        TriangleRule { points, weights, degree: (2 * n - 2) as u32 }
    }

    /// Cheapest available rule exact for the given polynomial degree.
    pub fn for_degree(degree: u32) -> TriangleRule {
        if degree <= 5 {
            Self::degree5().clone()
        } else {
            Self::collapsed_gauss((degree as usize + 3) / 2)
        }
    }

    pub fn map(&self, verts: &[Point; 3]) -> impl Iterator<Item = (Point, f64)> + '_ {
        let v = *verts;
        self.points.iter().zip(&self.weights).map(move |(l, &w)| {
            (
                [
                    l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
                    l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
                ],
                w,
            )
        })
    }

    /// `∫_T f` for the triangle with vertices `verts` and area `area`.
    pub fn integrate(&self, verts: &[Point; 3], area: f64, mut f: impl FnMut(Point) -> f64) -> f64 {
        area * self.map(verts).map(|(x, w)| w * f(x)).sum::<f64>()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `∫_S f ds` on the segment `a`–`b` with an `n`-point Gauss rule.
pub fn integrate_segment(a: Point, b: Point, n: usize, mut f: impl FnMut(Point) -> f64) -> f64 {
    let (x, w) = gauss_legendre(n);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    len * x.iter().zip(&w).map(|(&t, &wt)| wt * f([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])).sum::<f64>()
}
