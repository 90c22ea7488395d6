//! Travelling-wave benchmark on `(0, 5) x (0, 1)`: `c(x, t) = psi(x - v t)`
//! where `psi` solves the profile ODE
//! `chi' = -(v/d) chi + (alpha/d) psi (psi - 1)`, `psi' = chi`.

use std::sync::Arc;

use super::{error_norms, error_order, linear_fit, ErrorNorms, LinearFit};
use crate::dgspace::{Degrees, DgSpace};
use crate::error::{Error, Result};
use crate::forms::{isotropic, ModelData};
use crate::mesh::{generate_voronoi, BoundaryTag, Point, PolyMesh, Rect};
use crate::solver::{initial_concentration, initial_lambda, RunConfig, Scheme, Solver, Trajectory, Variable, DEFAULT_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams {
    pub d: f64,
    pub alpha: f64,
    pub v: f64,
    pub psi0: f64,
    pub chi0: f64,
    pub xi_max: f64,
    /// Integration step of the profile ODE.
    pub step: f64,
}

impl Default for WaveParams {
    fn default() -> Self {
        WaveParams {
            d: 1e-3,
            alpha: 1.0,
            v: 0.1,
            psi0: 1.0,
            chi0: -1e-2,
            xi_max: 5.0,
            step: 1e-5,
        }
    }
}

pub const DOMAIN: Rect = Rect {
    x0: 0.0,
    x1: 5.0,
    y0: 0.0,
    y1: 1.0,
};

#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub params: WaveParams,
    h: f64,
    psi: Vec<f64>,
    chi: Vec<f64>,
}

fn rhs(p: &WaveParams, psi: f64, chi: f64) -> (f64, f64) {
    (chi, -(p.v / p.d) * chi + (p.alpha / p.d) * psi * (psi - 1.0))
}

/// Classical fourth-order Runge-Kutta on `[0, xi_max]`.
pub fn wave_oracle(params: WaveParams) -> Result<WaveProfile> {
    if !(params.d > 0.0 && params.v > 0.0 && params.step > 0.0 && params.xi_max > 0.0) {
        return Err(Error::InvalidArgument("wave parameters must be positive".into()));
    }
    let n = (params.xi_max / params.step).ceil() as usize;
    let h = params.xi_max / n as f64;
    let mut psi = Vec::with_capacity(n + 1);
    let mut chi = Vec::with_capacity(n + 1);
    let (mut y, mut z) = (params.psi0, params.chi0);
    psi.push(y);
    chi.push(z);
    for i in 0..n {
        let (k1y, k1z) = rhs(&params, y, z);
        let (k2y, k2z) = rhs(&params, y + 0.5 * h * k1y, z + 0.5 * h * k1z);
        let (k3y, k3z) = rhs(&params, y + 0.5 * h * k2y, z + 0.5 * h * k2z);
        let (k4y, k4z) = rhs(&params, y + h * k3y, z + h * k3z);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        if !(-0.1..=1.1).contains(&y) {
            return Err(Error::InvalidArgument(format!(
                "wave profile left [-0.1, 1.1] at xi = {}: psi = {y}",
                (i + 1) as f64 * h
            )));
        }
        psi.push(y);
        chi.push(z);
    }
    Ok(WaveProfile { params, h, psi, chi })
}

impl WaveProfile {
    /// `(psi, psi')` by cubic Hermite interpolation; constant 1 behind the
    /// start of the profile, held at the last value beyond its end.
    pub fn eval(&self, xi: f64) -> (f64, f64) {
        if xi <= 0.0 {
            return (1.0, 0.0);
        }
        let last = self.psi.len() - 1;
        let s = xi / self.h;
        if s >= last as f64 {
            return (self.psi[last], 0.0);
        }
        let i = s.floor() as usize;
        let t = s - i as f64;
        let (p0, p1) = (self.psi[i], self.psi[i + 1]);
        let (m0, m1) = (self.chi[i] * self.h, self.chi[i + 1] * self.h);
        let (t2, t3) = (t * t, t * t * t);
        let val = (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1;
        let der = (6.0 * t2 - 6.0 * t) * p0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * p1 + (3.0 * t2 - 2.0 * t) * m1;
        (val, der / self.h)
    }

    pub fn psi(&self, xi: f64) -> f64 {
        self.eval(xi).0
    }

    /// Exact concentration and its gradient.
    pub fn c(&self, x: Point, t: f64) -> (f64, [f64; 2]) {
        let (v, d) = self.eval(x[0] - self.params.v * t);
        (v, [d, 0.0])
    }

    /// Grid values `(xi, psi, chi)`.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.psi.iter().zip(&self.chi).enumerate().map(|(i, (&p, &c))| (i as f64 * self.h, p, c))
    }

    /// First `xi` where `psi` drops to `level`.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        let i = self.psi.iter().position(|&p| p <= level)?;
        if i == 0 {
            return Some(0.0);
        }
        let (a, b) = (self.psi[i - 1], self.psi[i]);
        Some(((i - 1) as f64 + (a - level) / (a - b)) * self.h)
    }
}

/// Diffusion `d I`, Dirichlet data from the profile, no forcing.
pub fn model(n_elements: usize, profile: Arc<WaveProfile>, floor: f64) -> ModelData {
    let p = profile.params;
    ModelData::uniform(n_elements, isotropic(p.d), p.alpha)
        .with_dirichlet(move |x, t| profile.c(x, t).0.max(floor).ln())
}

/// Dirichlet on `x = 0`, Neumann elsewhere.
pub fn tag_boundary(mesh: &mut PolyMesh) {
    mesh.retag_boundary(|mid, _| if mid[0] < 1e-12 { BoundaryTag::Dirichlet } else { BoundaryTag::Neumann });
}

/// Voronoi mesh of the wave domain whose largest diameter is within
/// `tolerance` (relative) of `h_target`, found by sweeping the seed count.
pub fn mesh_for_h(h_target: f64, tolerance: f64, seed: u64, lloyd_iters: usize) -> Result<PolyMesh> {
    if !(h_target > 0.0) {
        return Err(Error::InvalidArgument("target mesh size must be positive".into()));
    }
    // cells of a centroidal tessellation have diameter about 1.3 / sqrt(density)
    let guess = (DOMAIN.area() * (1.3 / h_target).powi(2)).round().max(2.0) as usize;
    let mut best: Option<(f64, PolyMesh)> = None;
    for delta in 0..=guess.max(50) {
        for n in [guess + delta, guess.saturating_sub(delta)] {
            if n < 2 || (delta == 0 && n != guess) {
                continue;
            }
            let mut m = generate_voronoi(n, DOMAIN, seed, lloyd_iters)?;
            let err = (m.h_max() / h_target - 1.0).abs();
            if err <= tolerance {
                tag_boundary(&mut m);
                return Ok(m);
            }
            if best.as_ref().map_or(true, |(e, _)| err < *e) {
                best = Some((err, m));
            }
        }
    }
    let (err, _) = best.expect("at least one candidate");
    Err(Error::InvalidArgument(format!(
        "no Voronoi mesh within {tolerance} of h = {h_target} (closest off by {err:.3})"
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveRun {
    pub h_target: f64,
    pub degree: usize,
    pub seed: u64,
    pub lloyd_iters: usize,
    pub floor: f64,
    pub params: WaveParams,
    pub config: RunConfig,
}

impl WaveRun {
    /// Penalty 1, `dt = 0.01`, Newton tolerance `1e-6`.
    pub fn new(h_target: f64, degree: usize, t_final: f64, scheme: Scheme) -> Self {
        let mut config = RunConfig::new(1.0, 0.01, t_final, 1.0);
        config.newton.tol = 1e-6;
        config.scheme = scheme;
        WaveRun {
            h_target,
            degree,
            seed: 1,
            lloyd_iters: 20,
            floor: DEFAULT_FLOOR,
            params: WaveParams::default(),
            config,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WaveResult {
    pub space: DgSpace,
    pub profile: Arc<WaveProfile>,
    pub trajectory: Trajectory,
    pub errors: ErrorNorms,
    /// Smallest concentration at quadrature points over all steps.
    pub min_c: f64,
}

pub fn run_wave(spec: &WaveRun) -> Result<WaveResult> {
    let mesh = Arc::new(mesh_for_h(spec.h_target, 0.05, spec.seed, spec.lloyd_iters)?);
    run_wave_on(mesh, spec)
}

pub fn run_wave_on(mesh: Arc<PolyMesh>, spec: &WaveRun) -> Result<WaveResult> {
    let profile = Arc::new(wave_oracle(spec.params)?);
    let space = DgSpace::new(mesh.clone(), Degrees::Uniform(spec.degree))?;
    let model = model(mesh.num_elements(), profile.clone(), spec.floor);
    let solver = Solver::new(&space, &model, spec.config.clone())?;
    let c0 = |x: Point| profile.c(x, 0.0).0.max(0.0);
    let init = match spec.config.scheme {
        Scheme::ExpTransform => initial_lambda(&space, c0, spec.floor)?,
        Scheme::Baseline => initial_concentration(&space, c0)?,
    };
    let trajectory = solver.run(init)?;
    let t = trajectory.last().time;
    let errors = error_norms(
        &solver.forms(),
        &trajectory.last().dofs,
        trajectory.variable,
        |x| profile.c(x, t),
        error_order(spec.degree),
    );
    let min_c = trajectory.stats.iter().map(|s| s.min_c).fold(trajectory.initial_min_c, f64::min);
    Ok(WaveResult {
        space,
        profile,
        trajectory,
        errors,
        min_c,
    })
}

/// Speed from a least-squares fit of element centroid `x` against
/// activation time. Elements active from the start carry no information and
/// are skipped; `None` with fewer than two usable elements.
pub fn front_speed(centroids: &[Point], activation: &[Option<f64>]) -> Option<LinearFit> {
    let (t, x): (Vec<f64>, Vec<f64>) = centroids
        .iter()
        .zip(activation)
        .filter_map(|(c, a)| a.filter(|&t| t > 0.0).map(|t| (t, c[0])))
        .unzip();
    (t.len() >= 2).then(|| linear_fit(&t, &x))
}

/// Front position as the width of the equivalent step:
/// `(integral of c) / (height of the domain)`.
pub fn equivalent_front(space: &DgSpace, variable: Variable, dofs: &[f64]) -> f64 {
    let to_c = |v: f64| match variable {
        Variable::LogConcentration => v.exp(),
        Variable::Concentration => v,
    };
    let mass: f64 = (0..space.num_elements())
        .map(|k| space.element_mean(dofs, k, to_c) * space.mesh().elements[k].area)
        .sum();
    mass / (DOMAIN.y1 - DOMAIN.y0)
}

impl WaveProfile {
    /// Exact counterpart of [`equivalent_front`] at time `t`.
    pub fn equivalent_front(&self, t: f64) -> f64 {
        let n = 20_000;
        let h = (DOMAIN.x1 - DOMAIN.x0) / n as f64;
        // composite Simpson
        let f = |i: usize| self.psi(DOMAIN.x0 + i as f64 * h - self.params.v * t);
        let mut s = f(0) + f(n);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i);
        }
        s * h / 3.0
    }
}
