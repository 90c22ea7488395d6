//! Linear operators: mass, stiffness, jump penalty and the symmetric interior
//! penalty matrix used by the baseline scheme.

use rayon::prelude::*;

use super::model::apply;
use super::Forms;
use crate::dgspace::DgSpace;
use crate::linalg::Triplets;
use crate::mesh::geometry::Point;

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn element_blocks(
    space: &DgSpace,
    kernel: impl Fn(usize, usize, &[f64], &[[f64; 2]], &mut [f64]) + Sync,
) -> Triplets {
    let blocks: Vec<Vec<f64>> = (0..space.num_elements())
        .into_par_iter()
        .map(|k| {
            let c = space.element(k);
            let n = c.tables.dim;
            let mut out = vec![0.0; n * n];
            for q in 0..c.rule.len() {
                kernel(k, q, c.tables.phi(q), c.tables.grad(q), &mut out);
            }
            out
        })
        .collect();
    let mut t = Triplets::new(space.ndofs());
    for (k, b) in blocks.iter().enumerate() {
        let n = space.dim(k);
        t.add_block(space.offset(k), space.offset(k), n, n, b);
    }
    t
}

/// `(psi_j, phi_i)` weighted by `w(element, quadrature index)`.
pub fn weighted_mass(space: &DgSpace, weight: impl Fn(usize, usize) -> f64 + Sync) -> Triplets {
    element_blocks(space, |k, q, phi, _, out| {
        let n = phi.len();
        let w = space.element(k).rule.weights[q] * weight(k, q);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] += w * phi[i] * phi[j];
            }
        }
    })
}

pub fn mass_matrix(space: &DgSpace) -> Triplets {
    weighted_mass(space, |_, _| 1.0)
}

impl<'a> Forms<'a> {
    /// `(D grad psi_j, grad phi_i)`.
    pub fn stiffness(&self) -> Triplets {
        element_blocks(self.space, |k, q, _, grad, out| {
            let n = grad.len();
            let w = self.space.element(k).rule.weights[q];
            let d = &self.model.diffusion[k];
            for j in 0..n {
                let dg = apply(d, grad[j]);
                for i in 0..n {
                    out[i * n + j] += w * dot(dg, grad[i]);
                }
            }
        })
    }

    /// Face terms `sum_F int (-{{D grad v}}.[[w]] - [[v]].{{D grad w}} * sym + zeta [[v]].[[w]])`,
    /// homogeneous data; `sym = 0` keeps only the penalty.
    fn face_matrix(&self, consistency: bool) -> Triplets {
        let space = self.space;
        let mesh = space.mesh();
        let blocks: Vec<Vec<(usize, usize, Vec<f64>)>> = (0..mesh.num_faces())
            .into_par_iter()
            .map(|f| {
                let face = &mesh.faces[f];
                if !face.is_penalized() {
                    return Vec::new();
                }
                let cache = space.face(f);
                let ns = cache.sides.len();
                let half = if ns == 2 { 0.5 } else { 1.0 };
                let n = face.normal;
                let zeta = self.penalty.zeta[f];
                let mut out = Vec::new();
                for (si, s) in cache.sides.iter().enumerate() {
                    for (ti, t) in cache.sides.iter().enumerate() {
                        let (sig_s, sig_t) = (if si == 0 { 1.0 } else { -1.0 }, if ti == 0 { 1.0 } else { -1.0 });
                        let (ds, dt) = (&self.model.diffusion[s.element], &self.model.diffusion[t.element]);
                        let (nsd, ntd) = (s.tables.dim, t.tables.dim);
                        let mut b = vec![0.0; nsd * ntd];
                        for q in 0..cache.rule.len() {
                            let w = cache.rule.weights[q];
                            let (ps, gs) = (s.tables.phi(q), s.tables.grad(q));
                            let (pt, gt) = (t.tables.phi(q), t.tables.grad(q));
                            for i in 0..nsd {
                                let fi = dot(apply(ds, gs[i]), n);
                                for j in 0..ntd {
                                    let mut v = zeta * sig_t * pt[j] * sig_s * ps[i];
                                    if consistency {
                                        let fj = dot(apply(dt, gt[j]), n);
                                        v -= half * fj * sig_s * ps[i] + sig_t * pt[j] * half * fi;
                                    }
                                    b[i * ntd + j] += w * v;
                                }
                            }
                        }
                        out.push((s.element, t.element, b));
                    }
                }
                out
            })
            .collect();
        let mut trip = Triplets::new(space.ndofs());
        for face in blocks {
            for (ks, kt, b) in face {
                trip.add_block(space.offset(ks), space.offset(kt), space.dim(ks), space.dim(kt), &b);
            }
        }
        trip
    }

    /// `(zeta [[psi_j]], [[phi_i]])` over interior and Dirichlet faces.
    pub fn jump_penalty(&self) -> Triplets {
        self.face_matrix(false)
    }

    /// Symmetric interior penalty matrix for the linear operator `-div(D grad c)`.
    pub fn sip_matrix(&self) -> Triplets {
        let mut a = self.stiffness();
        a.extend(&self.face_matrix(true), 1.0);
        a
    }

    /// Right-hand side of the SIP operator for Dirichlet data `g`.
    pub fn sip_dirichlet_rhs(&self, g: impl Fn(Point) -> f64 + Sync) -> Vec<f64> {
        let space = self.space;
        let mesh = space.mesh();
        let parts: Vec<(usize, Vec<f64>)> = mesh
            .faces
            .par_iter()
            .enumerate()
            .filter(|(_, f)| f.is_penalized() && !f.is_interior())
            .map(|(f, face)| {
                let cache = space.face(f);
                let s = &cache.sides[0];
                let d = &self.model.diffusion[s.element];
                let mut out = vec![0.0; s.tables.dim];
                for q in 0..cache.rule.len() {
                    let w = cache.rule.weights[q];
                    let gv = g(cache.rule.points[q]);
                    let (ps, gs) = (s.tables.phi(q), s.tables.grad(q));
                    for i in 0..out.len() {
                        out[i] += w * gv * (self.penalty.zeta[f] * ps[i] - dot(apply(d, gs[i]), face.normal));
                    }
                }
                (s.element, out)
            })
            .collect();
        let mut r = vec![0.0; space.ndofs()];
        for (k, loc) in parts {
            for (ri, li) in r[space.range(k)].iter_mut().zip(loc) {
                *ri += li;
            }
        }
        r
    }

    /// `(f, phi_i)` at time `t`.
    pub fn load(&self, t: f64) -> Vec<f64> {
        let space = self.space;
        let parts: Vec<Vec<f64>> = (0..space.num_elements())
            .into_par_iter()
            .map(|k| {
                let c = space.element(k);
                let mut out = vec![0.0; c.tables.dim];
                for q in 0..c.rule.len() {
                    let v = c.rule.weights[q] * self.model.forcing_at(c.rule.points[q], t);
                    for (o, p) in out.iter_mut().zip(c.tables.phi(q)) {
                        *o += v * p;
                    }
                }
                out
            })
            .collect();
        parts.concat()
    }
}
