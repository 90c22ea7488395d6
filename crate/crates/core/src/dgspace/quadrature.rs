//! Gauss rules on segments, triangles (collapsed coordinates) and polygons.

use crate::error::{Error, Result};
use crate::mesh::geometry::{self, Point};
use crate::mesh::{Element, Face};

#[derive(Debug, Clone, Default)]
pub struct QuadRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// `n`-point Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Points per direction for exactness up to total degree `order`.
fn points_for(order: usize) -> usize {
    (order + 2).div_ceil(2).max(1)
}

/// Collapsed-coordinate Gauss rule on a triangle, exact up to `order`.
pub fn triangle_rule(tri: [Point; 3], order: usize) -> QuadRule {
    let n = points_for(order);
    let (x, w) = gauss_legendre(n);
    let [a, b, c] = tri;
    let area2 = geometry::cross(geometry::sub(b, a), geometry::sub(c, a)).abs();
    let mut rule = QuadRule {
        points: Vec::with_capacity(n * n),
        weights: Vec::with_capacity(n * n),
    };
    for i in 0..n {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..n {
            let v = 0.5 * (x[j] + 1.0);
            let (s, t) = (u, v * (1.0 - u));
            rule.points.push([
                a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
                a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
            ]);
            rule.weights.push(0.25 * w[i] * w[j] * (1.0 - u) * area2);
        }
    }
    rule
}

/// Sub-triangulate the element (centroid fan, else ear clipping) and
/// concatenate triangle rules.
pub fn element_quadrature(element: &Element, order: usize) -> Result<QuadRule> {
    let tris = geometry::triangulate(&element.vertices).ok_or_else(|| {
        Error::InvalidMesh(format!(
            "cannot triangulate element with centroid ({}, {})",
            element.centroid[0], element.centroid[1]
        ))
    })?;
    let mut rule = QuadRule::default();
    for t in tris {
        let r = triangle_rule(t, order);
        rule.points.extend(r.points);
        rule.weights.extend(r.weights);
    }
    Ok(rule)
}

/// Gauss-Legendre rule on a face, exact up to `order`.
pub fn face_quadrature(face: &Face, order: usize) -> QuadRule {
    segment_rule(face.a, face.b, order)
}

pub fn segment_rule(a: Point, b: Point, order: usize) -> QuadRule {
    let n = (order + 1).div_ceil(2).max(1);
    let (x, w) = gauss_legendre(n);
    let len = geometry::dist(a, b);
    QuadRule {
        points: x
            .iter()
            .map(|&s| {
                let t = 0.5 * (s + 1.0);
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            })
            .collect(),
        weights: w.iter().map(|&wi| 0.5 * wi * len).collect(),
    }
}
