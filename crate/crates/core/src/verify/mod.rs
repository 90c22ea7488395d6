//! Verification studies and post-processing: error norms, convergence
//! tables, activation times and regional means.

pub mod brain;
pub mod manufactured;
pub mod wave;

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dgspace::{element_quadrature, DgSpace};
use crate::forms::Forms;
use crate::mesh::Point;
use crate::solver::{min_over_quadrature, Trajectory, Variable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub dg: f64,
    /// Broken-gradient part of the DG error.
    pub grad: f64,
}

/// Quadrature order used for errors against smooth fields.
pub fn error_order(p: usize) -> usize {
    2 * p + 6
}

/// Errors of the concentration `c_h - c` in L2 and DG norms. `exact` returns
/// the value and gradient of `c`.
pub fn error_norms(
    forms: &Forms<'_>,
    dofs: &[f64],
    variable: Variable,
    exact: impl Fn(Point) -> (f64, [f64; 2]) + Sync,
    order: usize,
) -> ErrorNorms {
    let space = forms.space;
    let diff = |k: usize, x: Point| {
        let (u, g) = space.eval(dofs, k, x);
        let (c, gc) = match variable {
            Variable::LogConcentration => {
                let c = u.exp();
                (c, [c * g[0], c * g[1]])
            }
            Variable::Concentration => (u, g),
        };
        let (e, ge) = exact(x);
        (c - e, [gc[0] - ge[0], gc[1] - ge[1]])
    };
    let l2: f64 = (0..space.num_elements())
        .into_par_iter()
        .map(|k| {
            let rule = element_quadrature(&space.mesh().elements[k], order).expect("element was triangulated at build time");
            rule.points.iter().zip(&rule.weights).map(|(&x, &w)| w * diff(k, x).0.powi(2)).sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let (grad, dg) = forms.dg_norm_field(diff, order);
    ErrorNorms { l2: l2.sqrt(), dg, grad }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    H,
    P,
    Dt,
}

impl StudyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyKind::H => "h",
            StudyKind::P => "p",
            StudyKind::Dt => "dt",
        }
    }
}

impl std::str::FromStr for StudyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "h" => Ok(StudyKind::H),
            "p" => Ok(StudyKind::P),
            "dt" => Ok(StudyKind::Dt),
            other => Err(format!("unknown study kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    /// Mesh size, degree or time step.
    pub param: f64,
    pub dofs: usize,
    pub err_l2: f64,
    pub err_dg: f64,
    pub rate_l2: Option<f64>,
    pub rate_dg: Option<f64>,
    /// Solver failure at this point, if any.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub kind: StudyKind,
    pub rows: Vec<ConvergenceRow>,
}

pub const CONVERGENCE_HEADER: &str = "kind,param,dofs,err_L2,err_DG,rate_L2,rate_DG";

impl ConvergenceTable {
    pub fn new(kind: StudyKind) -> Self {
        ConvergenceTable { kind, rows: Vec::new() }
    }

    pub fn push(&mut self, param: f64, dofs: usize, errors: std::result::Result<ErrorNorms, String>) {
        let row = match errors {
            Ok(e) => ConvergenceRow {
                param,
                dofs,
                err_l2: e.l2,
                err_dg: e.dg,
                rate_l2: None,
                rate_dg: None,
                failure: None,
            },
            Err(msg) => ConvergenceRow {
                param,
                dofs,
                err_l2: f64::NAN,
                err_dg: f64::NAN,
                rate_l2: None,
                rate_dg: None,
                failure: Some(msg),
            },
        };
        self.rows.push(row);
        self.update_rates();
    }

    /// Rates between consecutive rows: `log(e1/e2)/log(x1/x2)` for h and dt;
    /// for p the decay `log(e1/e2)` per unit degree.
    fn update_rates(&mut self) {
        let kind = self.kind;
        for i in 1..self.rows.len() {
            let (a, b) = (&self.rows[i - 1], &self.rows[i]);
            let rate = |e1: f64, e2: f64| {
                let r = match kind {
                    StudyKind::P => (e1 / e2).ln() / (b.param - a.param),
                    _ => (e1 / e2).ln() / (a.param / b.param).ln(),
                };
                r.is_finite().then_some(r)
            };
            let (rl, rd) = (rate(a.err_l2, b.err_l2), rate(a.err_dg, b.err_dg));
            self.rows[i].rate_l2 = rl;
            self.rows[i].rate_dg = rd;
        }
    }

    /// Least-squares slope of `log(err)` against `log(param)` (h, dt) or
    /// against `param` (p), over successful rows.
    pub fn fitted_rates(&self) -> (f64, f64) {
        let x: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.failure.is_none())
            .map(|r| if self.kind == StudyKind::P { r.param } else { r.param.ln() })
            .collect();
        let fit = |sel: fn(&ConvergenceRow) -> f64| {
            let y: Vec<f64> = self.rows.iter().filter(|r| r.failure.is_none()).map(|r| sel(r).ln()).collect();
            let f = linear_fit(&x, &y);
            if self.kind == StudyKind::P {
                -f.slope
            } else {
                f.slope
            }
        };
        (fit(|r| r.err_l2), fit(|r| r.err_dg))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CONVERGENCE_HEADER}");
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.6e}"));
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{},{:.6e},{:.6e},{},{}",
                self.kind.as_str(),
                r.param,
                r.dofs,
                r.err_l2,
                r.err_dg,
                opt(r.rate_l2),
                opt(r.rate_dg)
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r2,
    }
}

/// Earliest stored time at which each element mean exceeds `c_crit`.
pub fn activation_time(traj: &Trajectory, space: &DgSpace, c_crit: f64) -> Vec<Option<f64>> {
    (0..space.num_elements())
        .into_par_iter()
        .map(|k| {
            (0..traj.states.len())
                .find(|&s| traj.element_mean(space, s, k) > c_crit)
                .map(|s| traj.states[s].time)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSeries {
    pub labels: Vec<i32>,
    pub times: Vec<f64>,
    pub global: Vec<f64>,
    /// `per_label[i][s]`: mean on `labels[i]` at stored state `s`.
    pub per_label: Vec<Vec<f64>>,
}

/// Area-weighted mean concentration per label and globally, per stored state.
pub fn region_means(traj: &Trajectory, space: &DgSpace) -> RegionSeries {
    let mesh = space.mesh();
    let labels = mesh.labels();
    let area_of = |l: i32| -> f64 { mesh.elements.iter().filter(|e| e.label == l).map(|e| e.area).sum() };
    let areas: Vec<f64> = labels.iter().map(|&l| area_of(l)).collect();
    let total: f64 = areas.iter().sum();
    let mut per_label = vec![Vec::with_capacity(traj.states.len()); labels.len()];
    let mut global = Vec::with_capacity(traj.states.len());
    for s in 0..traj.states.len() {
        let means: Vec<f64> = (0..space.num_elements())
            .into_par_iter()
            .map(|k| traj.element_mean(space, s, k))
            .collect();
        let mut sums = vec![0.0; labels.len()];
        for (k, e) in mesh.elements.iter().enumerate() {
            let i = labels.binary_search(&e.label).expect("label listed");
            sums[i] += means[k] * e.area;
        }
        for i in 0..labels.len() {
            per_label[i].push(sums[i] / areas[i]);
        }
        global.push(sums.iter().sum::<f64>() / total);
    }
    RegionSeries {
        labels,
        times: traj.states.iter().map(|s| s.time).collect(),
        global,
        per_label,
    }
}

/// `t,S_h,min_c,mean_c_global,mean_c_label_<l>...` per stored state.
pub fn time_series_csv(traj: &Trajectory, space: &DgSpace) -> String {
    let series = region_means(traj, space);
    let mut s = String::from("t,S_h,min_c,mean_c_global");
    for l in &series.labels {
        let _ = write!(s, ",mean_c_label_{l}");
    }
    s.push('\n');
    for (i, st) in traj.states.iter().enumerate() {
        let (entropy, min_c) = match traj.variable {
            Variable::LogConcentration => (
                crate::forms::discrete_entropy(space, &st.dofs),
                min_over_quadrature(space, &st.dofs, f64::exp),
            ),
            Variable::Concentration => (f64::NAN, min_over_quadrature(space, &st.dofs, |v| v)),
        };
        let fmt = |v: f64| if v.is_finite() { format!("{v:.12e}") } else { "NA".into() };
        let _ = write!(s, "{:.12e},{},{},{}", st.time, fmt(entropy), fmt(min_c), fmt(series.global[i]));
        for m in &series.per_label {
            let _ = write!(s, ",{}", fmt(m[i]));
        }
        s.push('\n');
    }
    s
}

/// `element_id,label,t_activate` with `NA` for elements never activated.
pub fn activation_csv(space: &DgSpace, times: &[Option<f64>]) -> String {
    let mut s = String::from("element_id,label,t_activate\n");
    for (k, t) in times.iter().enumerate() {
        let label = space.mesh().elements[k].label;
        match t {
            Some(t) => {
                let _ = writeln!(s, "{k},{label},{t:.12e}");
            }
            None => {
                let _ = writeln!(s, "{k},{label},NA");
            }
        }
    }
    s
}
