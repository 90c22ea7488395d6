//! Smooth manufactured solution on the unit square:
//! `c = (cos(pi x) cos(pi y) + 2) e^{-t}`, identity diffusion.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{error_norms, error_order, ConvergenceTable, ErrorNorms, StudyKind};
use crate::dgspace::{Degrees, DgSpace};
use crate::error::Result;
use crate::forms::{isotropic, ModelData};
use crate::mesh::{generate_voronoi, Point, PolyMesh, Rect};
use crate::solver::{initial_lambda, RunConfig, Solver, Trajectory, DEFAULT_FLOOR};

pub const ALPHA: f64 = 0.1;

pub fn exact_c(x: Point, t: f64) -> f64 {
    ((PI * x[0]).cos() * (PI * x[1]).cos() + 2.0) * (-t).exp()
}

pub fn exact_grad_c(x: Point, t: f64) -> [f64; 2] {
    let e = (-t).exp();
    [
        -PI * (PI * x[0]).sin() * (PI * x[1]).cos() * e,
        -PI * (PI * x[0]).cos() * (PI * x[1]).sin() * e,
    ]
}

pub fn exact_lambda(x: Point, t: f64) -> f64 {
    exact_c(x, t).ln()
}

/// `f = c_t - lap c - alpha c (1 - c)`.
pub fn forcing(x: Point, t: f64, alpha: f64) -> f64 {
    let c = exact_c(x, t);
    let lap = -2.0 * PI * PI * (PI * x[0]).cos() * (PI * x[1]).cos() * (-t).exp();
    -c - lap - alpha * c * (1.0 - c)
}

pub fn model(n_elements: usize) -> ModelData {
    ModelData::uniform(n_elements, isotropic(1.0), ALPHA)
        .with_forcing(|x, t| forcing(x, t, ALPHA))
        .with_dirichlet(exact_lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedRun {
    pub elements: usize,
    pub degree: usize,
    pub seed: u64,
    pub lloyd_iters: usize,
    pub config: RunConfig,
}

impl ManufacturedRun {
    /// Short horizon used for the space studies.
    pub fn space_study(elements: usize, degree: usize, theta: f64) -> Self {
        let mut config = RunConfig::new(theta, 1e-6, 2e-5, 1.0);
        config.output_every = usize::MAX;
        ManufacturedRun {
            elements,
            degree,
            seed: 1,
            lloyd_iters: 20,
            config,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManufacturedResult {
    pub h: f64,
    pub dofs: usize,
    pub errors: ErrorNorms,
    pub trajectory: Trajectory,
}

pub fn unit_square_mesh(elements: usize, seed: u64, lloyd_iters: usize) -> Result<Arc<PolyMesh>> {
    Ok(Arc::new(generate_voronoi(elements, Rect::unit(), seed, lloyd_iters)?))
}

pub fn run_on(mesh: Arc<PolyMesh>, degree: usize, config: &RunConfig) -> Result<ManufacturedResult> {
    let space = DgSpace::new(mesh.clone(), Degrees::Uniform(degree))?;
    let model = model(mesh.num_elements());
    let solver = Solver::new(&space, &model, config.clone())?;
    let init = initial_lambda(&space, |x| exact_c(x, 0.0), DEFAULT_FLOOR)?;
    let trajectory = solver.run(init)?;
    let last = trajectory.last();
    let t = last.time;
    let errors = error_norms(
        &solver.forms(),
        &last.dofs,
        trajectory.variable,
        |x| (exact_c(x, t), exact_grad_c(x, t)),
        error_order(degree),
    );
    Ok(ManufacturedResult {
        h: mesh.h_max(),
        dofs: space.ndofs(),
        errors,
        trajectory,
    })
}

pub fn run(spec: &ManufacturedRun) -> Result<ManufacturedResult> {
    run_on(unit_square_mesh(spec.elements, spec.seed, spec.lloyd_iters)?, spec.degree, &spec.config)
}

/// Run each point and tabulate errors; failures are recorded and skipped.
pub fn convergence_study(kind: StudyKind, points: &[ManufacturedRun]) -> ConvergenceTable {
    let mut table = ConvergenceTable::new(kind);
    for spec in points {
        match run(spec) {
            Ok(r) => {
                let param = match kind {
                    StudyKind::H => r.h,
                    StudyKind::P => spec.degree as f64,
                    StudyKind::Dt => spec.config.steps().map(|(_, dt)| dt).unwrap_or(spec.config.dt),
                };
                table.push(param, r.dofs, Ok(r.errors));
            }
            Err(e) => {
                let param = match kind {
                    StudyKind::H => f64::NAN,
                    StudyKind::P => spec.degree as f64,
                    StudyKind::Dt => spec.config.dt,
                };
                table.push(param, 0, Err(e.to_string()));
            }
        }
    }
    table
}
