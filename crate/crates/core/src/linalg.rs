//! Sparse matrices in coordinate form and the direct solver behind Newton.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Square sparse matrix as unsorted triplets; duplicates are summed.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets { n, entries: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i, j, v));
    }

    /// Add a dense row-major block at `(row0, col0)`.
    pub fn add_block(&mut self, row0: usize, col0: usize, rows: usize, cols: usize, block: &[f64]) {
        for i in 0..rows {
            for j in 0..cols {
                let v = block[i * cols + j];
                if v != 0.0 {
                    self.entries.push((row0 + i, col0 + j, v));
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for e in &mut self.entries {
            e.2 *= s;
        }
    }

    pub fn extend(&mut self, other: &Triplets, s: f64) {
        self.entries.extend(other.entries.iter().map(|&(i, j, v)| (i, j, s * v)));
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    pub fn to_csc(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<Triplet<usize, usize, f64>> =
            self.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &t).map_err(|e| Error::LinearSolve(format!("{e:?}")))
    }

    /// Solve `A x = b` by sparse LU with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let a = self.to_csc()?;
        let lu = a.sp_lu().map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = lu.solve(&rhs);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("singular or ill-conditioned system".into()));
        }
        Ok(out)
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_solve_works() {
        let mut t = Triplets::new(3);
        t.push(0, 0, 1.0);
        t.push(0, 0, 1.0);
        t.push(1, 1, 3.0);
        t.push(2, 2, 4.0);
        t.push(0, 2, 1.0);
        t.push(2, 0, -1.0);
        let b = [1.0, 2.0, 3.0];
        let x = t.solve(&b).unwrap();
        let r = t.matvec(&x);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-14);
        }
        assert_eq!(t.to_dense()[(0, 0)], 2.0);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut t = Triplets::new(2);
        t.push(0, 0, 1.0);
        t.push(1, 0, 1.0);
        assert!(t.solve(&[1.0, 1.0]).is_err());
    }
}
