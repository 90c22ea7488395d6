//! Interior-penalty forms for the log-concentration: penalties, the nonlinear
//! diffusion form, the fully discrete residual and its Jacobian, DG norms and
//! the discrete entropy.
//!
//! Face conventions: on an interior face with normal `n` from `K+` to `K-`,
//! `[[v]] = (v+ - v-) n` and `{{q}} = (q+ + q-)/2`. On a Dirichlet face
//! `[[v]] = (v - g) n` and `{{q}} = q`; test functions carry `g = 0`.
//! Neumann faces contribute nothing.

mod assemble;
mod matrices;
pub use matrices::{mass_matrix, weighted_mass};
pub mod model;
mod norms;

pub use assemble::TimeStep;
pub use model::{axonal, isotropic, ModelData, ScalarFn, State, Tensor};
pub use norms::{discrete_entropy, entropy_density, estimate_ci, JumpData};

use rayon::prelude::*;

use crate::dgspace::DgSpace;
use crate::error::{Error, Result};
use crate::mesh::{arithmetic_avg, harmonic_avg, FaceKind};

/// `zeta` of face `f` for penalty constant `eta0`.
pub fn penalty_zeta(space: &DgSpace, model: &ModelData, f: usize, eta0: f64) -> Result<f64> {
    let mesh = space.mesh();
    let p2 = |k: usize| (space.degree(k) * space.degree(k)) as f64;
    match mesh.faces[f].kind {
        FaceKind::Interior { plus, minus } => {
            let h = harmonic_avg(mesh.elements[plus].diameter, mesh.elements[minus].diameter)?;
            Ok(eta0 * arithmetic_avg(model.d_k(plus), model.d_k(minus)) * arithmetic_avg(p2(plus), p2(minus)) / h)
        }
        FaceKind::Boundary {
            element,
            tag: crate::mesh::BoundaryTag::Dirichlet,
        } => Ok(eta0 * model.d_k(element) * p2(element) / mesh.elements[element].diameter),
        FaceKind::Boundary { .. } => Err(Error::NeumannFace(f)),
    }
}

/// Face-wise `zeta` values; zero on Neumann faces.
#[derive(Debug, Clone)]
pub struct Penalty {
    pub eta0: f64,
    pub zeta: Vec<f64>,
}

impl Penalty {
    pub fn new(space: &DgSpace, model: &ModelData, eta0: f64) -> Result<Penalty> {
        if !(eta0 > 0.0) {
            return Err(Error::InvalidArgument(format!("penalty constant must be positive, got {eta0}")));
        }
        let zeta = (0..space.mesh().num_faces())
            .map(|f| match penalty_zeta(space, model, f, eta0) {
                Err(Error::NeumannFace(_)) => Ok(0.0),
                other => other,
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Penalty { eta0, zeta })
    }
}

/// `max |v|` over the element's quadrature points and vertices, per element.
pub fn linf_per_element(space: &DgSpace, dofs: &[f64]) -> Vec<f64> {
    (0..space.num_elements())
        .into_par_iter()
        .map(|k| {
            let q = space.values_at_quadrature(dofs, k);
            let verts = &space.mesh().elements[k].vertices;
            let t = space.eval_basis(k, verts);
            let coef = &dofs[space.range(k)];
            let vmax = (0..verts.len()).map(|i| t.eval(coef, i).0.abs()).fold(0.0, f64::max);
            q.iter().fold(vmax, |m, v| m.max(v.abs()))
        })
        .collect()
}

/// Pointwise `eta` at each face quadrature point; empty on Neumann faces.
#[derive(Debug, Clone)]
pub struct EtaTable(pub Vec<Vec<f64>>);

pub fn eta_table(space: &DgSpace, penalty: &Penalty, dofs: &[f64]) -> EtaTable {
    let linf = linf_per_element(space, dofs);
    EtaTable(
        (0..space.mesh().num_faces())
            .into_par_iter()
            .map(|f| face_eta(space, penalty, dofs, &linf, f))
            .collect(),
    )
}

fn face_eta(space: &DgSpace, penalty: &Penalty, dofs: &[f64], linf: &[f64], f: usize) -> Vec<f64> {
    if !space.mesh().faces[f].is_penalized() {
        return Vec::new();
    }
    let cache = space.face(f);
    let lmax = cache.sides.iter().map(|s| linf[s.element]).fold(f64::NEG_INFINITY, f64::max);
    let scale = lmax.exp() * penalty.zeta[f];
    (0..cache.rule.len())
        .map(|q| {
            let trace = cache
                .sides
                .iter()
                .map(|s| s.tables.eval(&dofs[space.range(s.element)], q).0)
                .fold(f64::NEG_INFINITY, f64::max);
            trace.exp() * scale
        })
        .collect()
}

/// `eta` at the quadrature points of face `f` for the state `dofs`.
pub fn penalty_eta(space: &DgSpace, penalty: &Penalty, f: usize, dofs: &[f64]) -> Result<Vec<f64>> {
    let face = &space.mesh().faces[f];
    if !face.is_penalized() {
        return Err(Error::NeumannFace(f));
    }
    let mut linf = vec![0.0; space.num_elements()];
    let all = linf_per_element(space, dofs);
    for s in &space.face(f).sides {
        linf[s.element] = all[s.element];
    }
    Ok(face_eta(space, penalty, dofs, &linf, f))
}

/// Space, data and penalty bundled for form evaluation.
#[derive(Clone, Copy)]
pub struct Forms<'a> {
    pub space: &'a DgSpace,
    pub model: &'a ModelData,
    pub penalty: &'a Penalty,
}

impl<'a> Forms<'a> {
    pub fn new(space: &'a DgSpace, model: &'a ModelData, penalty: &'a Penalty) -> Self {
        Forms { space, model, penalty }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.space.ndofs() {
            return Err(Error::InvalidArgument(format!(
                "vector of length {} does not match {} dofs",
                v.len(),
                self.space.ndofs()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
