//! Residual and frozen-penalty Jacobian of the fully discrete theta scheme.

use rayon::prelude::*;

use super::model::apply;
use super::{eta_table, EtaTable, Forms};
use crate::dgspace::Tables;
use crate::error::{Error, Result};
use crate::linalg::Triplets;
use crate::mesh::geometry::Point;
use crate::mesh::FaceKind;

/// Time-level data of one step from `t_old` to `t_new = t_old + dt`.
#[derive(Debug, Clone, Copy)]
pub struct TimeStep {
    pub theta: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub t_old: f64,
    pub t_new: f64,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// One side of a face at one quadrature point.
struct Trace<'t> {
    tables: &'t Tables,
    q: usize,
    sigma: f64,
    u: f64,
    e: f64,
    /// `(D grad u) . n`
    flux: f64,
    /// `D^T n`, so that `(D grad phi) . n = grad phi . dn`
    dn: [f64; 2],
}

impl<'a> Forms<'a> {
    fn traces<'t>(&'t self, f: usize, q: usize, dofs: &[f64]) -> Vec<Trace<'t>> {
        let face = &self.space.mesh().faces[f];
        let n = face.normal;
        self.space
            .face(f)
            .sides
            .iter()
            .enumerate()
            .map(|(s, side)| {
                let d = &self.model.diffusion[side.element];
                let (u, g) = side.tables.eval(&dofs[self.space.range(side.element)], q);
                let dn = [d[0][0] * n[0] + d[1][0] * n[1], d[0][1] * n[0] + d[1][1] * n[1]];
                Trace {
                    tables: &side.tables,
                    q,
                    sigma: if s == 0 { 1.0 } else { -1.0 },
                    u,
                    e: u.exp(),
                    flux: dot(apply(d, g), n),
                    dn,
                }
            })
            .collect()
    }

    fn non_finite(&self, k: usize, dofs: &[f64]) -> Error {
        let max_lambda = super::linf_per_element(self.space, dofs)[k];
        Error::NonFiniteResidual { max_lambda, element: k }
    }

    /// `A(u; v, w)` with homogeneous Dirichlet data.
    pub fn form_a(&self, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
        for x in [u, v, w] {
            self.check_len(x)?;
        }
        let space = self.space;
        let eta = eta_table(space, self.penalty, u);
        let vol: f64 = (0..space.num_elements())
            .into_par_iter()
            .map(|k| {
                let c = space.element(k);
                let d = &self.model.diffusion[k];
                let r = space.range(k);
                (0..c.rule.len())
                    .map(|q| {
                        let (uu, _) = c.tables.eval(&u[r.clone()], q);
                        let (_, gv) = c.tables.eval(&v[r.clone()], q);
                        let (_, gw) = c.tables.eval(&w[r.clone()], q);
                        c.rule.weights[q] * uu.exp() * dot(apply(d, gv), gw)
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        let faces: f64 = (0..space.mesh().num_faces())
            .into_par_iter()
            .map(|f| {
                if !space.mesh().faces[f].is_penalized() {
                    return 0.0;
                }
                let cache = space.face(f);
                let interior = cache.sides.len() == 2;
                let half = if interior { 0.5 } else { 1.0 };
                let mut s = 0.0;
                for q in 0..cache.rule.len() {
                    let tu = self.traces(f, q, u);
                    let tv = self.traces(f, q, v);
                    let tw = self.traces(f, q, w);
                    let jv: f64 = tv.iter().map(|t| t.sigma * t.u).sum();
                    let jw: f64 = tw.iter().map(|t| t.sigma * t.u).sum();
                    let avg_v: f64 = tu.iter().zip(&tv).map(|(a, b)| half * a.e * b.flux).sum();
                    let avg_w: f64 = tu.iter().zip(&tw).map(|(a, b)| half * a.e * b.flux).sum();
                    s += cache.rule.weights[q] * (-(avg_v * jw + jv * avg_w) + eta.0[f][q] * jv * jw);
                }
                s
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        Ok(vol + faces)
    }

    /// Residual of the theta scheme tested against every basis function.
    pub fn residual(&self, new: &[f64], old: &[f64], ts: &TimeStep) -> Result<Vec<f64>> {
        self.check_len(new)?;
        self.check_len(old)?;
        let eta_new = eta_table(self.space, self.penalty, new);
        let eta_old = eta_table(self.space, self.penalty, old);
        self.residual_with_eta(new, old, ts, &eta_new, &eta_old)
    }

    /// Residual with both penalty tables supplied by the caller.
    pub fn residual_with_eta(
        &self,
        new: &[f64],
        old: &[f64],
        ts: &TimeStep,
        eta_new: &EtaTable,
        eta_old: &EtaTable,
    ) -> Result<Vec<f64>> {
        let space = self.space;
        let elems = (0..space.num_elements())
            .into_par_iter()
            .map(|k| self.element_residual(k, new, old, ts))
            .collect::<Result<Vec<_>>>()?;
        let faces = (0..space.mesh().num_faces())
            .into_par_iter()
            .map(|f| self.face_residual(f, new, old, ts, &eta_new.0[f], &eta_old.0[f]))
            .collect::<Result<Vec<_>>>()?;
        let mut r = vec![0.0; space.ndofs()];
        for (k, loc) in elems.into_iter().enumerate() {
            for (ri, li) in r[space.range(k)].iter_mut().zip(loc) {
                *ri += li;
            }
        }
        for (f, sides) in faces.into_iter().enumerate() {
            for (side, loc) in space.face(f).sides.iter().zip(sides) {
                for (ri, li) in r[space.range(side.element)].iter_mut().zip(loc) {
                    *ri += li;
                }
            }
        }
        Ok(r)
    }

    fn element_residual(&self, k: usize, new: &[f64], old: &[f64], ts: &TimeStep) -> Result<Vec<f64>> {
        let space = self.space;
        let c = space.element(k);
        let d = &self.model.diffusion[k];
        let alpha = self.model.alpha[k];
        let range = space.range(k);
        let l1 = &new[range.clone()];
        let l0 = &old[range];
        let diff: Vec<f64> = l1.iter().zip(l0).map(|(a, b)| a - b).collect();
        let (th, dt, eps) = (ts.theta, ts.dt, ts.epsilon);
        let mut out = vec![0.0; c.tables.dim];
        for q in 0..c.rule.len() {
            let x: Point = c.rule.points[q];
            let w = c.rule.weights[q];
            let (v1, g1) = c.tables.eval(l1, q);
            let (v0, g0) = c.tables.eval(l0, q);
            let (dv, _) = c.tables.eval(&diff, q);
            let (e1, e0) = (v1.exp(), v0.exp());
            if !(e1.is_finite() && e0.is_finite()) {
                return Err(self.non_finite(k, if e1.is_finite() { old } else { new }));
            }
            // e1 - e0 without cancellation for small increments
            let dc = e0 * dv.exp_m1();
            let cbar = th * e1 + (1.0 - th) * e0;
            let f = th * self.model.forcing_at(x, ts.t_new) + (1.0 - th) * self.model.forcing_at(x, ts.t_old);
            let s = dc / dt - alpha * cbar * (1.0 - cbar) + eps / dt * v1 - f;
            let dg1 = apply(d, g1);
            let dg0 = apply(d, g0);
            let a1 = eps / dt + th * e1;
            let a0 = (1.0 - th) * e0;
            let flux = [a1 * dg1[0] + a0 * dg0[0], a1 * dg1[1] + a0 * dg0[1]];
            let phi = c.tables.phi(q);
            let grad = c.tables.grad(q);
            for i in 0..out.len() {
                out[i] += w * (s * phi[i] + dot(flux, grad[i]));
            }
        }
        Ok(out)
    }

    fn face_residual(
        &self,
        f: usize,
        new: &[f64],
        old: &[f64],
        ts: &TimeStep,
        eta_new: &[f64],
        eta_old: &[f64],
    ) -> Result<Vec<Vec<f64>>> {
        let space = self.space;
        let face = &space.mesh().faces[f];
        let cache = space.face(f);
        let mut out: Vec<Vec<f64>> = cache.sides.iter().map(|s| vec![0.0; s.tables.dim]).collect();
        if !face.is_penalized() {
            return Ok(out);
        }
        let interior = matches!(face.kind, FaceKind::Interior { .. });
        let half = if interior { 0.5 } else { 1.0 };
        let zeta = self.penalty.zeta[f];
        let levels = [(new, ts.theta, ts.t_new, eta_new), (old, 1.0 - ts.theta, ts.t_old, eta_old)];
        for q in 0..cache.rule.len() {
            let x = cache.rule.points[q];
            let w = cache.rule.weights[q];
            for (lvl, &(dofs, weight, t, eta)) in levels.iter().enumerate() {
                let need_eps = lvl == 0 && ts.epsilon > 0.0;
                if weight == 0.0 && !need_eps {
                    continue;
                }
                let tr = self.traces(f, q, dofs);
                if tr.iter().any(|s| !s.e.is_finite()) {
                    return Err(self.non_finite(face.owner(), dofs));
                }
                let jump = if interior {
                    tr[0].u - tr[1].u
                } else {
                    tr[0].u - (self.model.dirichlet)(x, t)
                };
                let avg: f64 = tr.iter().map(|s| half * s.e * s.flux).sum();
                let pen = if weight != 0.0 { weight * eta[q] } else { 0.0 };
                let eps = if need_eps { ts.epsilon / ts.dt * zeta } else { 0.0 };
                for (s, o) in tr.iter().zip(out.iter_mut()) {
                    let phi = s.tables.phi(s.q);
                    let grad = s.tables.grad(s.q);
                    for i in 0..o.len() {
                        let cons = -weight * (avg * s.sigma * phi[i] + jump * half * s.e * dot(grad[i], s.dn));
                        o[i] += w * (cons + (pen + eps) * jump * s.sigma * phi[i]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Jacobian of [`Forms::residual`] in `new`, with `eta(new)` frozen.
    pub fn jacobian(&self, new: &[f64], old: &[f64], ts: &TimeStep) -> Result<Triplets> {
        self.check_len(new)?;
        self.check_len(old)?;
        let eta = eta_table(self.space, self.penalty, new);
        self.jacobian_with_eta(new, old, ts, &eta)
    }

    pub fn jacobian_with_eta(&self, new: &[f64], old: &[f64], ts: &TimeStep, eta: &EtaTable) -> Result<Triplets> {
        let space = self.space;
        let elems = (0..space.num_elements())
            .into_par_iter()
            .map(|k| self.element_jacobian(k, new, old, ts))
            .collect::<Result<Vec<_>>>()?;
        let faces = (0..space.mesh().num_faces())
            .into_par_iter()
            .map(|f| self.face_jacobian(f, new, ts, &eta.0[f]))
            .collect::<Result<Vec<_>>>()?;
        let mut jac = Triplets::new(space.ndofs());
        for (k, block) in elems.iter().enumerate() {
            let d = space.dim(k);
            jac.add_block(space.offset(k), space.offset(k), d, d, block);
        }
        for (f, blocks) in faces.iter().enumerate() {
            let sides = &space.face(f).sides;
            for (b, block) in blocks.iter().enumerate() {
                let (s, t) = (b / sides.len(), b % sides.len());
                let (ks, kt) = (sides[s].element, sides[t].element);
                jac.add_block(space.offset(ks), space.offset(kt), space.dim(ks), space.dim(kt), block);
            }
        }
        Ok(jac)
    }

    fn element_jacobian(&self, k: usize, new: &[f64], old: &[f64], ts: &TimeStep) -> Result<Vec<f64>> {
        let space = self.space;
        let c = space.element(k);
        let d = &self.model.diffusion[k];
        let alpha = self.model.alpha[k];
        let range = space.range(k);
        let l1 = &new[range.clone()];
        let l0 = &old[range];
        let (th, dt, eps) = (ts.theta, ts.dt, ts.epsilon);
        let n = c.tables.dim;
        let mut out = vec![0.0; n * n];
        let mut dgrad = vec![[0.0; 2]; n];
        for q in 0..c.rule.len() {
            let w = c.rule.weights[q];
            let (v1, g1) = c.tables.eval(l1, q);
            let (v0, _) = c.tables.eval(l0, q);
            let (e1, e0) = (v1.exp(), v0.exp());
            if !(e1.is_finite() && e0.is_finite()) {
                return Err(self.non_finite(k, new));
            }
            let cbar = th * e1 + (1.0 - th) * e0;
            // coefficient of psi * phi
            let m = e1 / dt - alpha * (1.0 - 2.0 * cbar) * th * e1 + eps / dt;
            let dg1 = apply(d, g1);
            let a = eps / dt + th * e1;
            let phi = c.tables.phi(q);
            let grad = c.tables.grad(q);
            for (j, g) in grad.iter().enumerate() {
                dgrad[j] = apply(d, *g);
            }
            for i in 0..n {
                let gi_dg1 = dot(grad[i], dg1);
                let row = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    row[j] += w * (m * phi[j] * phi[i] + th * e1 * phi[j] * gi_dg1 + a * dot(dgrad[j], grad[i]));
                }
            }
        }
        Ok(out)
    }

    /// Blocks `(s, t)` in row-major side order, each `dim_s x dim_t` row-major.
    fn face_jacobian(&self, f: usize, new: &[f64], ts: &TimeStep, eta: &[f64]) -> Result<Vec<Vec<f64>>> {
        let space = self.space;
        let face = &space.mesh().faces[f];
        let cache = space.face(f);
        let ns = cache.sides.len();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(ns * ns);
        for s in &cache.sides {
            for t in &cache.sides {
                out.push(vec![0.0; s.tables.dim * t.tables.dim]);
            }
        }
        if !face.is_penalized() {
            return Ok(out);
        }
        let interior = ns == 2;
        let half = if interior { 0.5 } else { 1.0 };
        let th = ts.theta;
        let zeta = self.penalty.zeta[f];
        for q in 0..cache.rule.len() {
            let x = cache.rule.points[q];
            let w = cache.rule.weights[q];
            let tr = self.traces(f, q, new);
            if tr.iter().any(|s| !s.e.is_finite()) {
                return Err(self.non_finite(face.owner(), new));
            }
            let jump = if interior {
                tr[0].u - tr[1].u
            } else {
                tr[0].u - (self.model.dirichlet)(x, ts.t_new)
            };
            let pen = th * eta[q] + ts.epsilon / ts.dt * zeta;
            for (si, s) in tr.iter().enumerate() {
                let phi_s = s.tables.phi(q);
                let grad_s = s.tables.grad(q);
                for (ti, t) in tr.iter().enumerate() {
                    let phi_t = t.tables.phi(q);
                    let grad_t = t.tables.grad(q);
                    let nt = phi_t.len();
                    let block = &mut out[si * ns + ti];
                    for i in 0..phi_s.len() {
                        let dphi_s = dot(grad_s[i], s.dn);
                        for j in 0..nt {
                            // derivative of the average flux in direction psi_j on side t
                            let d_avg = half * t.e * (phi_t[j] * t.flux + dot(grad_t[j], t.dn));
                            let mut v = -th * d_avg * s.sigma * phi_s[i];
                            v -= th * t.sigma * phi_t[j] * half * s.e * dphi_s;
                            if si == ti {
                                v -= th * jump * half * s.e * phi_t[j] * dphi_s;
                            }
                            v += pen * t.sigma * phi_t[j] * s.sigma * phi_s[i];
                            block[i * nt + j] += w * v;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
