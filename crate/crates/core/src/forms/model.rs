//! Physical data: diffusion tensors, reaction rates, forcing and Dirichlet data.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::geometry::Point;

/// Symmetric 2x2 tensor, row-major.
pub type Tensor = [[f64; 2]; 2];

pub fn isotropic(d: f64) -> Tensor {
    [[d, 0.0], [0.0, d]]
}

/// `d_ext I + d_axn n (x) n` with `n` normalized.
pub fn axonal(d_ext: f64, d_axn: f64, n: Point) -> Tensor {
    let len = n[0].hypot(n[1]);
    let (a, b) = if len > 0.0 { (n[0] / len, n[1] / len) } else { (0.0, 0.0) };
    [
        [d_ext + d_axn * a * a, d_axn * a * b],
        [d_axn * a * b, d_ext + d_axn * b * b],
    ]
}

pub fn apply(t: &Tensor, v: [f64; 2]) -> [f64; 2] {
    [t[0][0] * v[0] + t[0][1] * v[1], t[1][0] * v[0] + t[1][1] * v[1]]
}

/// Eigenvalues `(min, max)` of a symmetric tensor.
pub fn eigenvalues(t: &Tensor) -> (f64, f64) {
    let m = 0.5 * (t[0][0] + t[1][1]);
    let r = (0.5 * (t[0][0] - t[1][1])).hypot(t[0][1]);
    (m - r, m + r)
}

/// Space-time scalar field `(x, t) -> value`.
pub type ScalarFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ModelData {
    /// Constant diffusion tensor per element.
    pub diffusion: Vec<Tensor>,
    /// Reaction rate per element.
    pub alpha: Vec<f64>,
    pub forcing: Option<ScalarFn>,
    /// Dirichlet datum for the log-concentration.
    pub dirichlet: ScalarFn,
}

impl fmt::Debug for ModelData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelData")
            .field("elements", &self.diffusion.len())
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

impl ModelData {
    pub fn uniform(n: usize, d: Tensor, alpha: f64) -> ModelData {
        ModelData {
            diffusion: vec![d; n],
            alpha: vec![alpha; n],
            forcing: None,
            dirichlet: Arc::new(|_, _| 0.0),
        }
    }

    pub fn with_forcing(mut self, f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.forcing = Some(Arc::new(f));
        self
    }

    pub fn with_dirichlet(mut self, g: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dirichlet = Arc::new(g);
        self
    }

    pub fn validate(&self, n_elements: usize) -> Result<()> {
        if self.diffusion.len() != n_elements || self.alpha.len() != n_elements {
            return Err(Error::InvalidArgument(format!(
                "model data sized for {} elements, mesh has {n_elements}",
                self.diffusion.len()
            )));
        }
        for (k, t) in self.diffusion.iter().enumerate() {
            let (lo, _) = eigenvalues(t);
            if !(lo > 0.0) || t[0][1] != t[1][0] || t.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "diffusion tensor of element {k} is not symmetric positive definite"
                )));
            }
        }
        if let Some(k) = self.alpha.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument(format!("reaction rate of element {k} is not finite")));
        }
        Ok(())
    }

    /// Largest eigenvalue of the tensor on element `k`.
    pub fn d_k(&self, k: usize) -> f64 {
        eigenvalues(&self.diffusion[k]).1
    }

    /// Global `(d0, D0)` bounds on the tensor spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        self.diffusion.iter().map(eigenvalues).fold((f64::INFINITY, 0.0), |(lo, hi), (a, b)| {
            (lo.min(a), hi.max(b))
        })
    }

    pub fn forcing_at(&self, x: Point, t: f64) -> f64 {
        self.forcing.as_ref().map_or(0.0, |f| f(x, t))
    }
}

/// Log-concentration dofs at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub dofs: Vec<f64>,
    pub time: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axonal_tensor_eigenvalues() {
        let t = axonal(8.0, 80.0, [0.0, 1.0]);
        assert_eq!(t, [[8.0, 0.0], [0.0, 88.0]]);
        let (lo, hi) = eigenvalues(&axonal(8.0, 80.0, [3.0, 4.0]));
        assert!((lo - 8.0).abs() < 1e-12 && (hi - 88.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let m = ModelData::uniform(3, isotropic(1.0), 0.1);
        assert!(m.validate(3).is_ok());
        assert!(m.validate(4).is_err());
        let mut bad = m.clone();
        bad.diffusion[1] = [[1.0, 2.0], [2.0, 1.0]];
        assert!(bad.validate(3).is_err());
        assert_eq!(m.spectral_bounds(), (1.0, 1.0));
    }
}
