//! Time stepping: the θ-method with Newton for the log-concentration, and a
//! semi-implicit scheme for the concentration itself used as a reference.

use std::time::Instant;

use rayon::prelude::*;

use crate::dgspace::DgSpace;
use crate::error::{Error, Result};
use crate::forms::{eta_table, linf_per_element, weighted_mass, EtaTable, Forms, ModelData, Penalty, State, TimeStep};
use crate::linalg::{norm2, Triplets};
use crate::mesh::Point;


/// Newton aborts when an iterate exceeds this in the maximum norm.
pub const DIVERGENCE_LIMIT: f64 = 1e3;
pub const DEFAULT_FLOOR: f64 = 1e-10;
/// Relative Newton update below which the iteration has stagnated at round-off.
pub const STAGNATION: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExpTransform,
    Baseline,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::ExpTransform => "exp_transform",
            Scheme::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exp_transform" => Ok(Scheme::ExpTransform),
            "baseline" => Ok(Scheme::Baseline),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Absolute tolerance on the residual 2-norm.
    pub tol: f64,
    pub max_iters: usize,
    pub relaxation: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-10,
            max_iters: 50,
            relaxation: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub theta: f64,
    pub dt: f64,
    pub t_final: f64,
    pub epsilon: f64,
    pub eta0: f64,
    pub newton: NewtonConfig,
    pub scheme: Scheme,
    /// Penalty constant of the baseline scheme.
    pub baseline_eta0: f64,
    /// Keep every `output_every`-th state; the final state is always kept.
    pub output_every: usize,
}

impl RunConfig {
    pub fn new(theta: f64, dt: f64, t_final: f64, eta0: f64) -> RunConfig {
        RunConfig {
            theta,
            dt,
            t_final,
            epsilon: 0.0,
            eta0,
            newton: NewtonConfig::default(),
            scheme: Scheme::ExpTransform,
            baseline_eta0: 10.0,
            output_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("theta out of range [0, 1]");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad("final time must be positive");
        }
        if self.t_final < self.dt * (1.0 - 1e-12) {
            return bad("final time is shorter than one time step");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be non-negative");
        }
        if !(self.eta0 > 0.0) || !(self.baseline_eta0 > 0.0) {
            return bad("penalty constant must be positive");
        }
        if !(self.newton.tol > 0.0) {
            return bad("newton tolerance must be positive");
        }
        if !(self.newton.relaxation > 0.0 && self.newton.relaxation <= 1.0) {
            return bad("newton relaxation out of range (0, 1]");
        }
        if self.newton.max_iters == 0 || self.output_every == 0 {
            return bad("iteration counts must be positive");
        }
        Ok(())
    }

    /// Uniform partition of `[0, T]`: step count and effective step size.
    pub fn steps(&self) -> Result<(usize, f64)> {
        self.validate()?;
        let r = self.t_final / self.dt;
        let n = if (r - r.round()).abs() < 1e-9 { r.round() } else { r.ceil() } as usize;
        let n = n.max(1);
        Ok((n, self.t_final / n as f64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub time: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Residual norm before each Newton update, then the final one.
    pub history: Vec<f64>,
    /// Minimum concentration over all element quadrature points.
    pub min_c: f64,
    pub entropy: f64,
    pub wall_time: f64,
}

/// What the state dofs represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    LogConcentration,
    Concentration,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub variable: Variable,
    /// Stored states, starting with the initial one.
    pub states: Vec<State>,
    /// One entry per step.
    pub stats: Vec<StepStats>,
    pub initial_entropy: f64,
    pub initial_min_c: f64,
}

impl Trajectory {
    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Map a stored dof value to a concentration.
    pub fn to_c(&self, v: f64) -> f64 {
        match self.variable {
            Variable::LogConcentration => v.exp(),
            Variable::Concentration => v,
        }
    }

    /// Area-averaged concentration of state `s` on element `k`.
    pub fn element_mean(&self, space: &DgSpace, s: usize, k: usize) -> f64 {
        space.element_mean(&self.states[s].dofs, k, |v| self.to_c(v))
    }
}

/// Minimum over all element quadrature points of `map(u_h)`.
pub fn min_over_quadrature(space: &DgSpace, dofs: &[f64], map: impl Fn(f64) -> f64 + Sync) -> f64 {
    (0..space.num_elements())
        .into_par_iter()
        .map(|k| space.values_at_quadrature(dofs, k).into_iter().map(&map).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min)
}

fn check_concentration(space: &DgSpace, c0: &(impl Fn(Point) -> f64 + Sync)) -> Result<()> {
    for k in 0..space.num_elements() {
        for &x in &space.element(k).rule.points {
            let v = c0(x);
            if !(v >= 0.0) {
                return Err(Error::NegativeConcentration { x: x[0], y: x[1], value: v });
            }
        }
    }
    Ok(())
}

/// `log(max(c0, floor))` projected onto the space.
pub fn initial_lambda(space: &DgSpace, c0: impl Fn(Point) -> f64 + Sync, floor: f64) -> Result<Vec<f64>> {
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument("concentration floor must be positive".into()));
    }
    check_concentration(space, &c0)?;
    space.project(|x| c0(x).max(floor).ln())
}

/// `c0` projected onto the space, for the baseline scheme.
pub fn initial_concentration(space: &DgSpace, c0: impl Fn(Point) -> f64 + Sync) -> Result<Vec<f64>> {
    check_concentration(space, &c0)?;
    space.project(c0)
}

struct Baseline {
    penalty: Penalty,
    fixed: Triplets,
    mass: Triplets,
}

pub struct Solver<'a> {
    space: &'a DgSpace,
    model: &'a ModelData,
    cfg: RunConfig,
    penalty: Penalty,
    baseline: Option<Baseline>,
}

impl<'a> Solver<'a> {
    pub fn new(space: &'a DgSpace, model: &'a ModelData, cfg: RunConfig) -> Result<Solver<'a>> {
        cfg.validate()?;
        model.validate(space.num_elements())?;
        let penalty = Penalty::new(space, model, cfg.eta0)?;
        let mut s = Solver {
            space,
            model,
            cfg,
            penalty,
            baseline: None,
        };
        if s.cfg.scheme == Scheme::Baseline {
            let (_, dt) = s.cfg.steps()?;
            let penalty = Penalty::new(space, model, s.cfg.baseline_eta0)?;
            let mass = crate::forms::mass_matrix(space);
            let mut fixed = Forms::new(space, model, &penalty).sip_matrix();
            fixed.extend(&mass, 1.0 / dt);
            s.baseline = Some(Baseline { penalty, fixed, mass });
        }
        Ok(s)
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    pub fn forms(&self) -> Forms<'_> {
        Forms::new(self.space, self.model, &self.penalty)
    }

    fn time_step(&self, t_old: f64, dt: f64) -> TimeStep {
        TimeStep {
            theta: self.cfg.theta,
            dt,
            epsilon: self.cfg.epsilon,
            t_old,
            t_new: t_old + dt,
        }
    }

    /// One θ-step: Newton on the residual with the penalty frozen per iteration.
    pub fn step_theta(&self, old: &State, dt: f64) -> Result<(State, StepStats)> {
        let start = Instant::now();
        let forms = self.forms();
        let ts = self.time_step(old.time, dt);
        let omega = self.cfg.newton.relaxation;
        let eta_old = eta_table(self.space, &self.penalty, &old.dofs);
        let mut x = old.dofs.clone();
        let mut history = Vec::new();
        let mut iterations = 0;
        loop {
            let eta: EtaTable = eta_table(self.space, &self.penalty, &x);
            let r = forms.residual_with_eta(&x, &old.dofs, &ts, &eta, &eta_old)?;
            let rn = norm2(&r);
            if !rn.is_finite() {
                let linf = linf_per_element(self.space, &x);
                let (element, &max_lambda) = linf
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .expect("mesh has elements");
                return Err(Error::NonFiniteResidual { max_lambda, element });
            }
            history.push(rn);
            if rn <= self.cfg.newton.tol {
                break;
            }
            if iterations == self.cfg.newton.max_iters {
                return Err(Error::NewtonNotConverged { iterations, history });
            }
            let jac = forms.jacobian_with_eta(&x, &old.dofs, &ts, &eta)?;
            let dx = jac.solve(&r)?;
            let mut step: f64 = 0.0;
            let mut size: f64 = 0.0;
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi -= omega * di;
                step = step.max((omega * di).abs());
                size = size.max(xi.abs());
            }
            iterations += 1;
            let max_abs = linf_per_element(self.space, &x).into_iter().fold(0.0, f64::max);
            if !(max_abs <= DIVERGENCE_LIMIT) {
                return Err(Error::NewtonDiverged {
                    max_abs,
                    limit: DIVERGENCE_LIMIT,
                });
            }
            if step <= STAGNATION * (1.0 + size) {
                // update at round-off level: the residual cannot decrease further
                let eta = eta_table(self.space, &self.penalty, &x);
                history.push(norm2(&forms.residual_with_eta(&x, &old.dofs, &ts, &eta, &eta_old)?));
                break;
            }
        }
        let stats = StepStats {
            time: ts.t_new,
            iterations,
            residual: *history.last().unwrap(),
            min_c: min_over_quadrature(self.space, &x, f64::exp),
            entropy: forms.discrete_entropy(&x),
            wall_time: start.elapsed().as_secs_f64(),
            history,
        };
        Ok((State { dofs: x, time: ts.t_new }, stats))
    }

    /// One semi-implicit step for the concentration with the quadratic term lagged.
    pub fn step_baseline(&self, old: &State, dt: f64) -> Result<(State, StepStats)> {
        let start = Instant::now();
        let b = self.baseline.as_ref().ok_or_else(|| Error::InvalidArgument("solver not set up for the baseline scheme".into()))?;
        let space = self.space;
        let t_new = old.time + dt;
        let alpha = &self.model.alpha;
        let mut lhs = b.fixed.clone();
        lhs.extend(
            &weighted_mass(space, |k, q| {
                let c = space.element(k).tables.eval(&old.dofs[space.range(k)], q).0;
                alpha[k] * (c - 1.0)
            }),
            1.0,
        );
        let forms = Forms::new(space, self.model, &b.penalty);
        let g = &self.model.dirichlet;
        let mut rhs = b.mass.matvec(&old.dofs);
        rhs.iter_mut().for_each(|v| *v /= dt);
        for (r, (l, d)) in rhs
            .iter_mut()
            .zip(forms.load(t_new).into_iter().zip(forms.sip_dirichlet_rhs(|x| g(x, t_new).exp())))
        {
            *r += l + d;
        }
        let c = lhs.solve(&rhs)?;
        let min_c = min_over_quadrature(space, &c, |v| v);
        let stats = StepStats {
            time: t_new,
            iterations: 1,
            residual: 0.0,
            history: Vec::new(),
            min_c,
            entropy: f64::NAN,
            wall_time: start.elapsed().as_secs_f64(),
        };
        Ok((State { dofs: c, time: t_new }, stats))
    }

    /// Advance from `initial` (log-concentration, or concentration for the
    /// baseline scheme) to the final time.
    pub fn run(&self, initial: Vec<f64>) -> Result<Trajectory> {
        self.run_with(initial, |_, _| Ok(()))
    }

    /// As [`Solver::run`], calling `observe(step, stats)` after every step.
    pub fn run_with(&self, initial: Vec<f64>, mut observe: impl FnMut(usize, &StepStats) -> Result<()>) -> Result<Trajectory> {
        let (n, dt) = self.cfg.steps()?;
        if initial.len() != self.space.ndofs() {
            return Err(Error::InvalidArgument(format!(
                "initial state has {} dofs, space has {}",
                initial.len(),
                self.space.ndofs()
            )));
        }
        let (variable, initial_entropy, initial_min_c) = match self.cfg.scheme {
            Scheme::ExpTransform => (
                Variable::LogConcentration,
                crate::forms::discrete_entropy(self.space, &initial),
                min_over_quadrature(self.space, &initial, f64::exp),
            ),
            Scheme::Baseline => (Variable::Concentration, f64::NAN, min_over_quadrature(self.space, &initial, |v| v)),
        };
        let mut traj = Trajectory {
            variable,
            states: vec![State { dofs: initial, time: 0.0 }],
            stats: Vec::with_capacity(n),
            initial_entropy,
            initial_min_c,
        };
        let mut current = traj.states[0].clone();
        for k in 1..=n {
            // exact multiple avoids drift in the final time
            let t_old = (k - 1) as f64 * dt;
            current.time = t_old;
            let (next, stats) = match self.cfg.scheme {
                Scheme::ExpTransform => self.step_theta(&current, dt)?,
                Scheme::Baseline => self.step_baseline(&current, dt)?,
            };
            observe(k, &stats)?;
            traj.stats.push(stats);
            current = next;
            current.time = if k == n { self.cfg.t_final } else { k as f64 * dt };
            if k % self.cfg.output_every == 0 || k == n {
                traj.states.push(current.clone());
            }
        }
        Ok(traj)
    }
}
