//! Shape/contact regularity reporting and the face averages used by the penalty.

use super::PolyMesh;
use crate::error::{Error, Result};

/// Harmonic mean `2ab/(a+b)` of two positive numbers.
pub fn harmonic_avg(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "harmonic average needs positive inputs, got {a} and {b}"
        )));
    }
    Ok(2.0 * a * b / (a + b))
}

pub fn arithmetic_avg(a: f64, b: f64) -> f64 {
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary {
                min: f64::NAN,
                max: f64::NAN,
                mean: f64::NAN,
            };
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Summary { min, max, mean }
    }
}

#[derive(Debug, Clone)]
pub struct RegularityReport {
    /// `|K| / h_K^2` per element.
    pub shape_ratio: Vec<f64>,
    /// `|F| / h_K` for every (face, adjacent element) pair, in face order.
    pub contact_ratio: Vec<f64>,
    pub shape: Summary,
    pub contact: Summary,
    /// Elements whose shape ratio is below `shape_threshold`.
    pub flagged: Vec<usize>,
    pub shape_threshold: f64,
}

pub const DEFAULT_SHAPE_THRESHOLD: f64 = 0.05;

pub fn mesh_metrics(mesh: &PolyMesh) -> RegularityReport {
    mesh_metrics_with(mesh, DEFAULT_SHAPE_THRESHOLD)
}

pub fn mesh_metrics_with(mesh: &PolyMesh, shape_threshold: f64) -> RegularityReport {
    let shape_ratio: Vec<f64> = mesh
        .elements
        .iter()
        .map(|e| e.area / (e.diameter * e.diameter))
        .collect();
    let mut contact_ratio = Vec::new();
    for f in &mesh.faces {
        match f.kind {
            super::FaceKind::Interior { plus, minus } => {
                contact_ratio.push(f.length / mesh.elements[plus].diameter);
                contact_ratio.push(f.length / mesh.elements[minus].diameter);
            }
            super::FaceKind::Boundary { element, .. } => {
                contact_ratio.push(f.length / mesh.elements[element].diameter);
            }
        }
    }
    let flagged = shape_ratio
        .iter()
        .enumerate()
        .filter(|(_, &r)| r < shape_threshold)
        .map(|(i, _)| i)
        .collect();
    RegularityReport {
        shape: Summary::of(&shape_ratio),
        contact: Summary::of(&contact_ratio),
        shape_ratio,
        contact_ratio,
        flagged,
        shape_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_poly_mesh, BoundaryTag, RawMesh};
    use rand::{Rng, SeedableRng};

    fn single(poly: Vec<[f64; 2]>) -> PolyMesh {
        let n = poly.len();
        build_poly_mesh(&RawMesh {
            vertices: poly,
            polygons: vec![(0..n).collect()],
            labels: vec![0],
            boundary_tags: vec![],
            default_tag: Some(BoundaryTag::Neumann),
        })
        .unwrap()
    }

    #[test]
    fn unit_square_shape_ratio_is_half() {
        let m = single(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let r = mesh_metrics(&m);
        assert!((r.shape_ratio[0] - 0.5).abs() < 1e-15);
        assert!(r.flagged.is_empty());
    }

    #[test]
    fn equilateral_triangle_shape_ratio() {
        let m = single(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]]);
        let r = mesh_metrics(&m);
        assert!((r.shape_ratio[0] - 3f64.sqrt() / 4.0).abs() < 1e-14);
    }

    #[test]
    fn sliver_is_flagged() {
        let m = single(vec![[0.0, 0.0], [100.0, 0.0], [100.0, 1.0], [0.0, 1.0]]);
        let r = mesh_metrics(&m);
        // area 100, diameter^2 = 100^2 + 1
        let expected = 100.0 / (100.0f64 * 100.0 + 1.0);
        assert!((r.shape_ratio[0] - expected).abs() < 1e-15);
        assert_eq!(r.flagged, vec![0]);
        assert!(r.contact.min > 0.0 && r.contact.max.is_finite());
    }

    #[test]
    fn averages_closed_form() {
        assert_eq!(harmonic_avg(2.0, 2.0).unwrap(), 2.0);
        assert_eq!(arithmetic_avg(2.0, 2.0), 2.0);
        assert_eq!(harmonic_avg(1.0, 3.0).unwrap(), 1.5);
        assert_eq!(arithmetic_avg(1.0, 3.0), 2.0);
        assert!(harmonic_avg(0.0, 1.0).is_err());
        assert!(harmonic_avg(-1.0, 1.0).is_err());
    }

    fn penalty_scale(h: (f64, f64), d: (f64, f64), p: (f64, f64)) -> (f64, f64) {
        let lhs = harmonic_avg(h.0, h.1).unwrap() / (arithmetic_avg(d.0, d.1) * arithmetic_avg(p.0 * p.0, p.1 * p.1));
        let one_sided = (h.0 / (d.0 * p.0 * p.0)).min(h.1 / (d.1 * p.1 * p.1));
        (lhs, one_sided)
    }

    #[test]
    fn averaged_penalty_scale_bound_uniform_degree() {
        // {h}_H / ({D}_A {p^2}_A) <= 4 min(h-/(D- p-^2), h+/(D+ p+^2))
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let h = (rng.gen_range(1e-3..10.0), rng.gen_range(1e-3..10.0));
            let d = (rng.gen_range(1e-3..100.0), rng.gen_range(1e-3..100.0));
            let p = rng.gen_range(1..9) as f64;
            let (lhs, one_sided) = penalty_scale(h, d, (p, p));
            assert!(lhs <= 4.0 * one_sided * (1.0 + 1e-14), "{lhs} > 4 * {one_sided}");
            assert!(harmonic_avg(h.0, h.1).unwrap() <= arithmetic_avg(h.0, h.1) * (1.0 + 1e-15));
        }
    }

    #[test]
    fn averaged_penalty_scale_bound_variable_degree() {
        // With differing degrees only the factor 8 survives.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let h = (rng.gen_range(1e-3..10.0), rng.gen_range(1e-3..10.0));
            let d = (rng.gen_range(1e-3..100.0), rng.gen_range(1e-3..100.0));
            let p = (rng.gen_range(1..9) as f64, rng.gen_range(1..9) as f64);
            let (lhs, one_sided) = penalty_scale(h, d, p);
            assert!(lhs <= 8.0 * one_sided * (1.0 + 1e-14));
        }
        let (lhs, one_sided) = penalty_scale((1e-3, 10.0), (100.0, 1e-3), (8.0, 1.0));
        assert!(lhs > 4.0 * one_sided);
    }
}
