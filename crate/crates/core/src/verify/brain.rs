//! Desk-scale two-tissue disk: an inner "white" region with radial axonal
//! diffusion and faster growth, surrounded by isotropic "grey" tissue.
//! Lengths in mm, times in years.

use std::sync::Arc;

use crate::dgspace::{Degrees, DgSpace};
use crate::error::Result;
use crate::forms::{axonal, isotropic, ModelData};
use crate::mesh::{agglomerate, ring_disk, BoundaryTag, Point, PolyMesh};
use crate::solver::{initial_lambda, RunConfig, Solver, Trajectory, DEFAULT_FLOOR};

pub const GREY: i32 = 0;
pub const WHITE: i32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DiskCase {
    pub rings: usize,
    pub radius: f64,
    /// Rings belonging to the white region.
    pub inner_rings: usize,
    pub target_elements: usize,
    pub d_ext: f64,
    pub d_axn_white: f64,
    pub d_axn_grey: f64,
    pub alpha_white: f64,
    pub alpha_grey: f64,
    /// Gaussian seed at the centre.
    pub seed_amplitude: f64,
    pub seed_width: f64,
    /// Uniform level added everywhere so the first Newton step starts away from `c = 0`.
    pub seed_background: f64,
}

impl Default for DiskCase {
    fn default() -> Self {
        DiskCase {
            rings: 18,
            radius: 40.0,
            inner_rings: 12,
            target_elements: 50,
            d_ext: 8.0,
            d_axn_white: 80.0,
            d_axn_grey: 0.0,
            alpha_white: 0.9,
            alpha_grey: 0.45,
            seed_amplitude: 0.5,
            seed_width: 5.0,
            seed_background: 1e-3,
        }
    }
}

impl DiskCase {
    pub fn mesh(&self) -> Result<PolyMesh> {
        let tri = ring_disk(self.rings, self.radius, self.inner_rings, BoundaryTag::Neumann)?;
        agglomerate(&tri, self.target_elements)
    }

    /// Radial fibre direction from the disk centre through the element centroid.
    pub fn model(&self, mesh: &PolyMesh) -> ModelData {
        let mut m = ModelData::uniform(mesh.num_elements(), isotropic(self.d_ext), self.alpha_grey);
        for (k, e) in mesh.elements.iter().enumerate() {
            let c = e.centroid;
            let r = c[0].hypot(c[1]);
            let n = if r > 0.0 { [c[0] / r, c[1] / r] } else { [1.0, 0.0] };
            if e.label == WHITE {
                m.diffusion[k] = axonal(self.d_ext, self.d_axn_white, n);
                m.alpha[k] = self.alpha_white;
            } else {
                m.diffusion[k] = axonal(self.d_ext, self.d_axn_grey, n);
            }
        }
        m
    }

    pub fn initial_c(&self) -> impl Fn(Point) -> f64 + Sync + '_ {
        move |x| self.seed_background + self.seed_amplitude * (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * self.seed_width * self.seed_width)).exp()
    }

    /// Implicit Euler, `dt = 0.01` over 25 years, `eta0 = 10`.
    ///
    /// With `eta0 = 1` the strongly anisotropic white region settles on a
    /// non-constant steady state instead of `c = 1`.
    pub fn run_config(&self) -> RunConfig {
        let mut c = RunConfig::new(1.0, 0.01, 25.0, 10.0);
        c.newton.max_iters = 200;
        c.output_every = 10;
        c
    }
}

/// Mesh, solve with `config` at degree 1, and return the space and trajectory.
pub fn run_disk(case: &DiskCase, config: &RunConfig) -> Result<(DgSpace, Trajectory)> {
    let mesh = Arc::new(case.mesh()?);
    let space = DgSpace::new(mesh.clone(), Degrees::Uniform(1))?;
    let model = case.model(&mesh);
    let solver = Solver::new(&space, &model, config.clone())?;
    let init = initial_lambda(&space, case.initial_c(), DEFAULT_FLOOR)?;
    let traj = solver.run(init)?;
    Ok((space, traj))
}
