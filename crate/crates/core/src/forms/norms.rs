//! DG norms, the discrete entropy and the inverse-trace constant estimate.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::model::apply;
use super::Forms;
use crate::dgspace::{element_quadrature, face_quadrature, DgSpace};
use crate::mesh::geometry::Point;
use crate::mesh::FaceKind;

/// Dirichlet-face convention for the jump term of a DG norm.
#[derive(Clone, Copy)]
pub enum JumpData<'d> {
    /// `[[v]] = v n`: the norm of a function.
    Homogeneous,
    /// `[[v]] = (v - g) n` with `g` evaluated at the face point.
    Datum(&'d (dyn Fn(Point) -> f64 + Sync)),
}

/// `s(c) = c (log c - 1) + 1` written in `lambda = log c`.
pub fn entropy_density(lambda: f64) -> f64 {
    lambda.exp() * (lambda - 1.0) + 1.0
}

impl<'a> Forms<'a> {
    /// DG norm of the discrete function `dofs`, homogeneous jumps.
    pub fn dg_norm(&self, dofs: &[f64]) -> f64 {
        self.dg_norm_mapped(dofs, |v| (v, 1.0), JumpData::Homogeneous)
    }

    /// DG norm of `m(v)` for a pointwise map `m` returning `(m(v), m'(v))`.
    pub fn dg_norm_mapped(&self, dofs: &[f64], map: impl Fn(f64) -> (f64, f64) + Sync, data: JumpData<'_>) -> f64 {
        let space = self.space;
        let vol: f64 = (0..space.num_elements())
            .into_par_iter()
            .map(|k| {
                let c = space.element(k);
                let d = &self.model.diffusion[k];
                let coef = &dofs[space.range(k)];
                (0..c.rule.len())
                    .map(|q| {
                        let (v, g) = c.tables.eval(coef, q);
                        let (_, dm) = map(v);
                        let g = [dm * g[0], dm * g[1]];
                        let dg = apply(d, g);
                        c.rule.weights[q] * (g[0] * dg[0] + g[1] * dg[1])
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        let jumps: f64 = (0..space.mesh().num_faces())
            .into_par_iter()
            .map(|f| {
                let face = &space.mesh().faces[f];
                if !face.is_penalized() {
                    return 0.0;
                }
                let cache = space.face(f);
                (0..cache.rule.len())
                    .map(|q| {
                        let vals: Vec<f64> = cache
                            .sides
                            .iter()
                            .map(|s| map(s.tables.eval(&dofs[space.range(s.element)], q).0).0)
                            .collect();
                        let j = match (face.kind, data) {
                            (FaceKind::Interior { .. }, _) => vals[0] - vals[1],
                            (_, JumpData::Homogeneous) => vals[0],
                            (_, JumpData::Datum(g)) => vals[0] - g(cache.rule.points[q]),
                        };
                        cache.rule.weights[q] * self.penalty.zeta[f] * j * j
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        (vol + jumps).sqrt()
    }

    /// DG norm (homogeneous jumps) of an elementwise-smooth field given as
    /// `field(element, x) -> (value, gradient)`, integrated at `order`.
    pub fn dg_norm_field(&self, field: impl Fn(usize, Point) -> (f64, [f64; 2]) + Sync, order: usize) -> (f64, f64) {
        let space = self.space;
        let mesh = space.mesh();
        let vol: f64 = (0..space.num_elements())
            .into_par_iter()
            .map(|k| {
                let d = &self.model.diffusion[k];
                let rule = element_quadrature(&mesh.elements[k], order).expect("element was triangulated at build time");
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| {
                        let (_, g) = field(k, x);
                        let dg = apply(d, g);
                        w * (g[0] * dg[0] + g[1] * dg[1])
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        let jumps: f64 = mesh
            .faces
            .par_iter()
            .enumerate()
            .map(|(f, face)| {
                if !face.is_penalized() {
                    return 0.0;
                }
                let rule = face_quadrature(face, order);
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| {
                        let j = match face.kind {
                            FaceKind::Interior { plus, minus } => field(plus, x).0 - field(minus, x).0,
                            FaceKind::Boundary { element, .. } => field(element, x).0,
                        };
                        w * self.penalty.zeta[f] * j * j
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        (vol.sqrt(), (vol + jumps).sqrt())
    }

    /// `S_h = int e^l (l - 1) + 1`.
    pub fn discrete_entropy(&self, dofs: &[f64]) -> f64 {
        discrete_entropy(self.space, dofs)
    }
}

pub fn discrete_entropy(space: &DgSpace, dofs: &[f64]) -> f64 {
    (0..space.num_elements())
        .into_par_iter()
        .map(|k| {
            let w = &space.element(k).rule.weights;
            space
                .values_at_quadrature(dofs, k)
                .iter()
                .zip(w)
                .map(|(&l, &w)| w * entropy_density(l))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

/// Largest generalized eigenvalue of (boundary mass, volume mass) on element
/// `k`, scaled by `h_K / p_K^2`.
pub fn element_ci(space: &DgSpace, k: usize) -> f64 {
    let mesh = space.mesh();
    let n = space.dim(k);
    let mut b = DMatrix::<f64>::zeros(n, n);
    for &f in &mesh.elements[k].faces {
        let cache = space.face(f);
        let side = cache.sides.iter().find(|s| s.element == k).expect("face is adjacent");
        for (q, &w) in cache.rule.weights.iter().enumerate() {
            let phi = side.tables.phi(q);
            for i in 0..n {
                for j in 0..n {
                    b[(i, j)] += w * phi[i] * phi[j];
                }
            }
        }
    }
    let m = space.local_mass(k);
    let l = m.cholesky().expect("mass matrix is SPD").l();
    let li = l.try_inverse().expect("Cholesky factor is invertible");
    let c = &li * b * li.transpose();
    let c = 0.5 * (&c + c.transpose());
    let lam = c.symmetric_eigenvalues().max();
    let p = space.degree(k) as f64;
    lam * mesh.elements[k].diameter / (p * p)
}

/// Estimate of the inverse trace constant, maximized over elements.
pub fn estimate_ci(space: &DgSpace) -> f64 {
    (0..space.num_elements())
        .into_par_iter()
        .map(|k| element_ci(space, k))
        .reduce(|| 0.0, f64::max)
}
