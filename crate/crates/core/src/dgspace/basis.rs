//! Modal basis: tensor Legendre products of total degree <= p, scaled to be
//! L2-orthonormal on the element bounding box.

use crate::mesh::geometry::Point;

pub fn dim(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// `(i, j)` exponent pairs in hierarchical order: by total degree, then by
/// increasing `j`. Mode 0 is the constant.
pub fn modes(p: usize) -> Vec<(usize, usize)> {
    let mut m = Vec::with_capacity(dim(p));
    for d in 0..=p {
        for j in 0..=d {
            m.push((d - j, j));
        }
    }
    m
}

/// Legendre values and first derivatives `L_0..L_p` at `x`.
pub fn legendre(p: usize, x: f64, val: &mut [f64], der: &mut [f64]) {
    val[0] = 1.0;
    der[0] = 0.0;
    if p == 0 {
        return;
    }
    val[1] = x;
    der[1] = 1.0;
    for n in 2..=p {
        let k = n as f64;
        val[n] = ((2.0 * k - 1.0) * x * val[n - 1] - (k - 1.0) * val[n - 2]) / k;
        der[n] = der[n - 2] + (2.0 * k - 1.0) * val[n - 1];
    }
}

/// Basis of one element, fixed by its degree and bounding box.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    pub degree: usize,
    center: Point,
    half: [f64; 2],
    modes: Vec<(usize, usize)>,
    scale: Vec<f64>,
}

impl ModalBasis {
    pub fn new(degree: usize, bbox: (Point, Point)) -> Self {
        let (lo, hi) = bbox;
        let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let half = [0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1])];
        let area = 4.0 * half[0] * half[1];
        let modes = modes(degree);
        let scale = modes
            .iter()
            .map(|&(i, j)| (((2 * i + 1) * (2 * j + 1)) as f64 / area).sqrt())
            .collect();
        ModalBasis {
            degree,
            center,
            half,
            modes,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    /// Values and gradients of all modes at `x`, written into the slices.
    pub fn eval(&self, x: Point, val: &mut [f64], grad: &mut [[f64; 2]]) {
        let p = self.degree;
        let mut lx = [0.0; 32];
        let mut dx = [0.0; 32];
        let mut ly = [0.0; 32];
        let mut dy = [0.0; 32];
        let xi = (x[0] - self.center[0]) / self.half[0];
        let eta = (x[1] - self.center[1]) / self.half[1];
        legendre(p, xi, &mut lx, &mut dx);
        legendre(p, eta, &mut ly, &mut dy);
        for (m, &(i, j)) in self.modes.iter().enumerate() {
            let s = self.scale[m];
            val[m] = s * lx[i] * ly[j];
            grad[m] = [s * dx[i] * ly[j] / self.half[0], s * lx[i] * dy[j] / self.half[1]];
        }
    }

    pub fn values(&self, x: Point) -> (Vec<f64>, Vec<[f64; 2]>) {
        let mut v = vec![0.0; self.dim()];
        let mut g = vec![[0.0; 2]; self.dim()];
        self.eval(x, &mut v, &mut g);
        (v, g)
    }
}

/// Highest degree the fixed-size scratch buffers in `eval` support.
pub const MAX_DEGREE: usize = 31;
