//! Discontinuous polynomial spaces with elementwise degree on polygonal meshes.
//!
//! Dofs are laid out element-major: element `k` owns
//! `offset(k)..offset(k) + dim(k)` in modal order (see [`basis::modes`]).
//! Quadrature points and basis tables are cached at order `2 p_K + extra`
//! (`extra = 4` by default), shared by every form.

pub mod basis;
pub mod quadrature;

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

pub use basis::ModalBasis;
pub use quadrature::{element_quadrature, face_quadrature, QuadRule};

use crate::error::{Error, Result};
use crate::mesh::geometry::Point;
use crate::mesh::{FaceKind, PolyMesh};

#[derive(Debug, Clone)]
pub enum Degrees {
    Uniform(usize),
    PerElement(Vec<usize>),
}

#[derive(Debug, Clone, Copy)]
pub struct SpaceOptions {
    /// Quadrature order is `2 p + quad_extra`.
    pub quad_extra: usize,
}

impl Default for SpaceOptions {
    fn default() -> Self {
        SpaceOptions { quad_extra: 4 }
    }
}

/// Basis tables at quadrature points, point-major: entry `q * dim + i`.
#[derive(Debug, Clone)]
pub struct Tables {
    pub dim: usize,
    pub phi: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
}

impl Tables {
    fn build(basis: &ModalBasis, points: &[Point]) -> Tables {
        let dim = basis.dim();
        let mut phi = vec![0.0; points.len() * dim];
        let mut grad = vec![[0.0; 2]; points.len() * dim];
        for (q, &x) in points.iter().enumerate() {
            basis.eval(x, &mut phi[q * dim..(q + 1) * dim], &mut grad[q * dim..(q + 1) * dim]);
        }
        Tables { dim, phi, grad }
    }

    pub fn phi(&self, q: usize) -> &[f64] {
        &self.phi[q * self.dim..(q + 1) * self.dim]
    }

    pub fn grad(&self, q: usize) -> &[[f64; 2]] {
        &self.grad[q * self.dim..(q + 1) * self.dim]
    }

    /// Value and gradient of the local expansion `coef` at point `q`.
    pub fn eval(&self, coef: &[f64], q: usize) -> (f64, [f64; 2]) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for ((c, p), d) in coef.iter().zip(self.phi(q)).zip(self.grad(q)) {
            v += c * p;
            g[0] += c * d[0];
            g[1] += c * d[1];
        }
        (v, g)
    }
}

#[derive(Debug, Clone)]
pub struct ElementCache {
    pub rule: QuadRule,
    pub tables: Tables,
}

#[derive(Debug, Clone)]
pub struct FaceSide {
    pub element: usize,
    pub tables: Tables,
}

/// Face rule plus basis tables of the `+` side and, on interior faces, the `-` side.
#[derive(Debug, Clone)]
pub struct FaceCache {
    pub rule: QuadRule,
    pub sides: Vec<FaceSide>,
}

#[derive(Debug, Clone)]
pub struct DgSpace {
    mesh: Arc<PolyMesh>,
    degrees: Vec<usize>,
    offsets: Vec<usize>,
    bases: Vec<ModalBasis>,
    elements: Vec<ElementCache>,
    faces: Vec<FaceCache>,
    mass: Vec<Cholesky<f64, Dyn>>,
    options: SpaceOptions,
}

impl DgSpace {
    pub fn new(mesh: Arc<PolyMesh>, degrees: Degrees) -> Result<DgSpace> {
        DgSpace::with_options(mesh, degrees, SpaceOptions::default())
    }

    pub fn with_options(mesh: Arc<PolyMesh>, degrees: Degrees, options: SpaceOptions) -> Result<DgSpace> {
        let n = mesh.num_elements();
        let degrees = match degrees {
            Degrees::Uniform(p) => vec![p; n],
            Degrees::PerElement(d) => {
                if d.len() != n {
                    return Err(Error::InvalidArgument(format!("{} degrees for {n} elements", d.len())));
                }
                d
            }
        };
        if let Some((element, &degree)) = degrees
            .iter()
            .enumerate()
            .find(|(_, &p)| p == 0 || p > basis::MAX_DEGREE)
        {
            return Err(Error::InvalidDegree { element, degree });
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for &p in &degrees {
            offsets.push(offsets.last().unwrap() + basis::dim(p));
        }
        let bases: Vec<ModalBasis> = mesh
            .elements
            .iter()
            .zip(&degrees)
            .map(|(e, &p)| ModalBasis::new(p, e.bbox))
            .collect();
        let elements = mesh
            .elements
            .par_iter()
            .zip(&degrees)
            .zip(&bases)
            .map(|((e, &p), b)| {
                let rule = element_quadrature(e, 2 * p + options.quad_extra)?;
                let tables = Tables::build(b, &rule.points);
                Ok(ElementCache { rule, tables })
            })
            .collect::<Result<Vec<_>>>()?;
        let faces = mesh
            .faces
            .par_iter()
            .map(|f| {
                let owners: Vec<usize> = match f.kind {
                    FaceKind::Interior { plus, minus } => vec![plus, minus],
                    FaceKind::Boundary { element, .. } => vec![element],
                };
                let p = owners.iter().map(|&k| degrees[k]).max().unwrap();
                let rule = face_quadrature(f, 2 * p + options.quad_extra);
                let sides = owners
                    .into_iter()
                    .map(|k| FaceSide {
                        element: k,
                        tables: Tables::build(&bases[k], &rule.points),
                    })
                    .collect();
                FaceCache { rule, sides }
            })
            .collect();
        let mut space = DgSpace {
            mesh,
            degrees,
            offsets,
            bases,
            elements,
            faces,
            mass: Vec::new(),
            options,
        };
        space.mass = (0..n)
            .into_par_iter()
            .map(|k| {
                Cholesky::new(space.local_mass(k)).ok_or_else(|| {
                    Error::InvalidMesh(format!("element {k} has a singular mass matrix"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(space)
    }

    pub fn mesh(&self) -> &PolyMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<PolyMesh> {
        &self.mesh
    }

    pub fn options(&self) -> SpaceOptions {
        self.options
    }

    pub fn num_elements(&self) -> usize {
        self.degrees.len()
    }

    pub fn degree(&self, k: usize) -> usize {
        self.degrees[k]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn dim(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    pub fn offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    pub fn range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn ndofs(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn basis(&self, k: usize) -> &ModalBasis {
        &self.bases[k]
    }

    pub fn element(&self, k: usize) -> &ElementCache {
        &self.elements[k]
    }

    pub fn face(&self, f: usize) -> &FaceCache {
        &self.faces[f]
    }

    /// Values and gradients of every basis function of `k` at `points`.
    pub fn eval_basis(&self, k: usize, points: &[Point]) -> Tables {
        Tables::build(&self.bases[k], points)
    }

    pub fn eval(&self, dofs: &[f64], k: usize, x: Point) -> (f64, [f64; 2]) {
        self.eval_basis(k, &[x]).eval(&dofs[self.range(k)], 0)
    }

    pub fn local_mass(&self, k: usize) -> DMatrix<f64> {
        let c = &self.elements[k];
        let d = c.tables.dim;
        let mut m = DMatrix::zeros(d, d);
        for (q, &w) in c.rule.weights.iter().enumerate() {
            let phi = c.tables.phi(q);
            for i in 0..d {
                for j in 0..=i {
                    m[(i, j)] += w * phi[i] * phi[j];
                }
            }
        }
        m.fill_upper_triangle_with_lower_triangle();
        m
    }

    /// Spectral condition number of the element mass matrix.
    pub fn mass_condition(&self, k: usize) -> f64 {
        let ev = self.local_mass(k).symmetric_eigenvalues();
        ev.max() / ev.min()
    }

    /// Elementwise L2 projection of `f(element, x)`.
    pub fn project_with(&self, f: impl Fn(usize, Point) -> f64 + Sync) -> Result<Vec<f64>> {
        let parts = (0..self.num_elements())
            .into_par_iter()
            .map(|k| {
                let c = &self.elements[k];
                let mut b = DVector::zeros(c.tables.dim);
                for (q, (&x, &w)) in c.rule.points.iter().zip(&c.rule.weights).enumerate() {
                    let v = f(k, x);
                    if !v.is_finite() {
                        return Err(Error::NonFiniteField {
                            x: x[0],
                            y: x[1],
                            what: "projected field".into(),
                        });
                    }
                    for (bi, p) in b.iter_mut().zip(c.tables.phi(q)) {
                        *bi += w * v * p;
                    }
                }
                Ok(self.mass[k].solve(&b))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.into_iter().flat_map(|v| v.iter().copied().collect::<Vec<f64>>()).collect())
    }

    pub fn project(&self, f: impl Fn(Point) -> f64 + Sync) -> Result<Vec<f64>> {
        self.project_with(|_, x| f(x))
    }

    /// Values of the expansion at the cached quadrature points of `k`.
    pub fn values_at_quadrature(&self, dofs: &[f64], k: usize) -> Vec<f64> {
        let c = &self.elements[k];
        let coef = &dofs[self.range(k)];
        (0..c.rule.len()).map(|q| c.tables.eval(coef, q).0).collect()
    }

    /// Area-weighted mean of `g(value)` on element `k`.
    pub fn element_mean(&self, dofs: &[f64], k: usize, g: impl Fn(f64) -> f64) -> f64 {
        let c = &self.elements[k];
        let vals = self.values_at_quadrature(dofs, k);
        let s: f64 = vals.iter().zip(&c.rule.weights).map(|(&v, &w)| w * g(v)).sum();
        s / self.mesh.elements[k].area
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_poly_mesh, generate_voronoi, BoundaryTag, RawMesh, Rect};

    fn voronoi(n: usize, seed: u64) -> Arc<PolyMesh> {
        Arc::new(generate_voronoi(n, Rect::unit(), seed, 30).unwrap())
    }

    #[test]
    fn dof_counts() {
        let m30 = Arc::new(generate_voronoi(30, Rect::new(0.0, 5.0, 0.0, 1.0), 1, 20).unwrap());
        assert_eq!(DgSpace::new(m30.clone(), Degrees::Uniform(1)).unwrap().ndofs(), 90);
        assert_eq!(DgSpace::new(m30, Degrees::Uniform(4)).unwrap().ndofs(), 450);
        let m100 = Arc::new(generate_voronoi(100, Rect::new(0.0, 5.0, 0.0, 1.0), 1, 20).unwrap());
        assert_eq!(DgSpace::new(m100, Degrees::Uniform(2)).unwrap().ndofs(), 600);
    }

    #[test]
    fn zero_degree_rejected() {
        let m = voronoi(5, 0);
        let mut d = vec![1; 5];
        d[3] = 0;
        let err = DgSpace::new(m, Degrees::PerElement(d)).unwrap_err();
        assert!(matches!(err, Error::InvalidDegree { element: 3, degree: 0 }));
    }

    #[test]
    fn variable_degree_offsets() {
        let m = voronoi(4, 2);
        let s = DgSpace::new(m, Degrees::PerElement(vec![1, 3, 2, 1])).unwrap();
        assert_eq!(s.ndofs(), 3 + 10 + 6 + 3);
        assert_eq!(s.range(2), 13..19);
    }

    #[test]
    fn gram_matrix_on_rectangle_is_identity() {
        let m = Arc::new(
            build_poly_mesh(&RawMesh {
                vertices: vec![[0.2, 0.1], [1.7, 0.1], [1.7, 0.6], [0.2, 0.6]],
                polygons: vec![vec![0, 1, 2, 3]],
                labels: vec![0],
                boundary_tags: vec![],
                default_tag: Some(BoundaryTag::Dirichlet),
            })
            .unwrap(),
        );
        let s = DgSpace::new(m, Degrees::Uniform(5)).unwrap();
        let g = s.local_mass(0);
        let err = (g - DMatrix::identity(21, 21)).abs().max();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn mass_conditioning_on_voronoi() {
        let m = voronoi(40, 9);
        for p in 1..=6 {
            let s = DgSpace::new(m.clone(), Degrees::Uniform(p)).unwrap();
            let worst = (0..s.num_elements()).map(|k| s.mass_condition(k)).fold(0.0, f64::max);
            // Only linear modes stay below 10; higher modes see the part of the box outside K.
            let bound = [10.0, 50.0, 500.0, 5e3, 5e4, 5e5][p - 1];
            assert!(worst.is_finite() && worst >= 1.0 && worst <= bound, "p={p}: {worst}");
        }
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let m = voronoi(20, 4);
        let s = DgSpace::new(m, Degrees::Uniform(2)).unwrap();
        let f = |x: Point| 1.0 + 2.0 * x[0] - 3.0 * x[1] + x[0] * x[1] - 0.5 * x[1] * x[1];
        let dofs = s.project(f).unwrap();
        for k in 0..s.num_elements() {
            for &x in &s.mesh().elements[k].vertices {
                assert!((s.eval(&dofs, k, x).0 - f(x)).abs() < 1e-10);
            }
        }
        let again = s
            .project_with(|k, x| s.eval(&dofs, k, x).0)
            .unwrap();
        let diff = dofs.iter().zip(&again).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn constant_projects_to_constant_mode() {
        let m = voronoi(10, 5);
        let s = DgSpace::new(m, Degrees::Uniform(3)).unwrap();
        let dofs = s.project(|_| 1.0).unwrap();
        for k in 0..s.num_elements() {
            let r = s.range(k);
            for (i, v) in dofs[r].iter().enumerate() {
                if i > 0 {
                    assert!(v.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn nonfinite_projection_is_located() {
        let m = voronoi(3, 5);
        let s = DgSpace::new(m, Degrees::Uniform(1)).unwrap();
        let err = s.project(|x| if x[0] > 0.5 { f64::NAN } else { 0.0 }).unwrap_err();
        assert!(matches!(err, Error::NonFiniteField { x, .. } if x > 0.5));
    }

    fn l2_projection_error(n: usize) -> (f64, f64) {
        let m = voronoi(n, 11);
        let h = m.h_max();
        let s = DgSpace::new(m, Degrees::Uniform(2)).unwrap();
        let f = |x: Point| (std::f64::consts::PI * x[0]).cos() * (std::f64::consts::PI * x[1]).cos();
        let dofs = s.project(f).unwrap();
        let mut e = 0.0;
        for k in 0..s.num_elements() {
            let c = s.element(k);
            let v = s.values_at_quadrature(&dofs, k);
            for q in 0..c.rule.len() {
                e += c.rule.weights[q] * (v[q] - f(c.rule.points[q])).powi(2);
            }
        }
        (h, e.sqrt())
    }

    #[test]
    fn projection_error_rate_p2() {
        let (h1, e1) = l2_projection_error(100);
        let (h2, e2) = l2_projection_error(400);
        let rate = (e1 / e2).ln() / (h1 / h2).ln();
        assert!((rate - 3.0).abs() < 0.5, "rate {rate}");
    }
}
