//! From a [`Config`] to a solved trajectory and a populated run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use polyfk_core::dgspace::{Degrees, DgSpace, SpaceOptions};
use polyfk_core::forms::{axonal, Forms, ModelData, Penalty};
use polyfk_core::mesh::io::read_poly_mesh;
use polyfk_core::mesh::{BoundaryTag, Point, PolyMesh};
use polyfk_core::solver::{Scheme, Solver, StepStats, Trajectory, Variable};
use polyfk_core::verify::brain::DiskCase;
use polyfk_core::verify::wave::{self, WaveProfile};
use polyfk_core::verify::{activation_csv, activation_time, error_norms, error_order, manufactured, time_series_csv, ErrorNorms};

use crate::config::{BoundaryRule, Config, Initial, MeshSpec, Problem};
use crate::error::{io_err, CliError, Result};
use crate::vtk::{write_vtk, Fields, NOT_ACTIVATED};

/// Known solution, when the problem has one.
#[derive(Debug, Clone)]
pub enum Exact {
    Manufactured,
    Wave(Arc<WaveProfile>),
}

impl Exact {
    pub fn eval(&self, x: Point, t: f64) -> (f64, [f64; 2]) {
        match self {
            Exact::Manufactured => (manufactured::exact_c(x, t), manufactured::exact_grad_c(x, t)),
            Exact::Wave(p) => p.c(x, t),
        }
    }
}

fn retag(mesh: &mut PolyMesh, rule: BoundaryRule) {
    let x_min = mesh.vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
    match rule {
        BoundaryRule::Keep => {}
        BoundaryRule::Dirichlet => mesh.retag_boundary(|_, _| BoundaryTag::Dirichlet),
        BoundaryRule::Neumann => mesh.retag_boundary(|_, _| BoundaryTag::Neumann),
        BoundaryRule::LeftDirichlet => mesh.retag_boundary(|mid, _| {
            if mid[0] < x_min + 1e-12 {
                BoundaryTag::Dirichlet
            } else {
                BoundaryTag::Neumann
            }
        }),
    }
}

pub fn build_mesh(spec: &MeshSpec, seed: u64) -> Result<PolyMesh> {
    Ok(match spec {
        MeshSpec::Voronoi {
            elements,
            domain,
            lloyd,
            boundary,
        } => {
            let mut m = polyfk_core::mesh::generate_voronoi(*elements, *domain, seed, *lloyd)?;
            retag(&mut m, *boundary);
            m
        }
        MeshSpec::Wave { h_target, lloyd } => wave::mesh_for_h(*h_target, 0.05, seed, *lloyd)?,
        MeshSpec::Disk {
            rings,
            radius,
            inner_rings,
            target,
        } => DiskCase {
            rings: *rings,
            radius: *radius,
            inner_rings: *inner_rings,
            target_elements: *target,
            ..DiskCase::default()
        }
        .mesh()?,
        MeshSpec::File { path, boundary } => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            let mut m = read_poly_mesh(&text)?;
            retag(&mut m, *boundary);
            m
        }
    })
}

pub fn build_model(cfg: &Config, mesh: &PolyMesh) -> Result<(ModelData, Option<Exact>)> {
    let n = mesh.num_elements();
    Ok(match &cfg.problem {
        Problem::Manufactured => (manufactured::model(n), Some(Exact::Manufactured)),
        Problem::Wave(params) => {
            let profile = Arc::new(wave::wave_oracle(*params)?);
            (wave::model(n, profile.clone(), cfg.floor), Some(Exact::Wave(profile)))
        }
        Problem::Disk(case) => (case.model(mesh), None),
        Problem::Custom(m) => {
            let norm = m.fibre[0].hypot(m.fibre[1]);
            let fibre = [m.fibre[0] / norm, m.fibre[1] / norm];
            let g = m.dirichlet_c.ln();
            (ModelData::uniform(n, axonal(m.d_ext, m.d_axn, fibre), m.alpha).with_dirichlet(move |_, _| g), None)
        }
    })
}

/// Element-wise initial concentration `c0(k, x)`.
fn initial_c(cfg: &Config, mesh: &PolyMesh, exact: Option<&Exact>) -> Result<Box<dyn Fn(usize, Point) -> f64 + Sync>> {
    Ok(match &cfg.initial {
        Initial::Manufactured | Initial::Wave => {
            let exact = exact.cloned().ok_or_else(|| CliError::Usage("preset initial condition needs a known solution".into()))?;
            Box::new(move |_, x| exact.eval(x, 0.0).0.max(0.0))
        }
        Initial::SeededRegion(s) => {
            let s = s.clone();
            let labels: Vec<i32> = mesh.elements.iter().map(|e| e.label).collect();
            Box::new(move |k, x| {
                let inside = s.label.map_or(true, |l| labels[k] == l);
                let r2 = (x[0] - s.center[0]).powi(2) + (x[1] - s.center[1]).powi(2);
                let bump = if inside { s.amplitude * (-r2 / (2.0 * s.width * s.width)).exp() } else { 0.0 };
                s.background + bump
            })
        }
        Initial::File(path) => {
            let values = read_element_values(path, mesh.num_elements())?;
            Box::new(move |k, _| values[k])
        }
    })
}

/// CSV with header `element_id,c` and one row per element.
pub fn read_element_values(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize, msg: &str| CliError::Usage(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "element_id,c" => {}
        _ => return Err(bad(1, "expected header `element_id,c`")),
    }
    let mut values = vec![f64::NAN; n];
    for (i, line) in lines {
        let (k, c) = line.split_once(',').ok_or_else(|| bad(i + 1, "expected two columns"))?;
        let k: usize = k.trim().parse().map_err(|_| bad(i + 1, "bad element id"))?;
        let c: f64 = c.trim().parse().map_err(|_| bad(i + 1, "bad value"))?;
        if k >= n {
            return Err(bad(i + 1, "element id out of range"));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(bad(i + 1, "concentration must be finite and non-negative"));
        }
        values[k] = c;
    }
    if let Some(k) = values.iter().position(|v| v.is_nan()) {
        return Err(bad(0, &format!("no value for element {k}")));
    }
    Ok(values)
}

/// A finished run: the space, trajectory and errors against the exact
/// solution at each stored state (when known).
pub struct Solved {
    pub space: DgSpace,
    pub trajectory: Trajectory,
    pub errors: Option<Vec<ErrorNorms>>,
}

pub fn solve(cfg: &Config, observe: impl FnMut(usize, &StepStats) -> polyfk_core::Result<()>) -> Result<Solved> {
    let mesh = Arc::new(build_mesh(&cfg.mesh, cfg.seed)?);
    let space = DgSpace::with_options(
        mesh.clone(),
        Degrees::Uniform(cfg.degree),
        SpaceOptions {
            quad_extra: cfg.quad_extra,
        },
    )?;
    let (model, exact) = build_model(cfg, &mesh)?;
    let c0 = initial_c(cfg, &mesh, exact.as_ref())?;
    if let Some(k) = (0..mesh.num_elements()).find(|&k| !(c0(k, mesh.elements[k].centroid) >= 0.0)) {
        return Err(CliError::Usage(format!("initial concentration is negative on element {k}")));
    }
    let floor = cfg.floor;
    let init = match cfg.run.scheme {
        Scheme::ExpTransform => space.project_with(|k, x| c0(k, x).max(floor).ln())?,
        Scheme::Baseline => space.project_with(&c0)?,
    };
    let solver = Solver::new(&space, &model, cfg.run.clone())?;
    let trajectory = solver.run_with(init, observe)?;
    let errors = exact.map(|exact| {
        let penalty = Penalty::new(&space, &model, cfg.run.eta0).expect("penalty built by the solver");
        let forms = Forms::new(&space, &model, &penalty);
        trajectory
            .states
            .iter()
            .map(|s| error_norms(&forms, &s.dofs, trajectory.variable, |x| exact.eval(x, s.time), error_order(cfg.degree)))
            .collect()
    });
    drop(solver);
    Ok(Solved {
        space,
        trajectory,
        errors,
    })
}

/// Create `path`, or clear a previous run there when `force` is set.
pub fn prepare_dir(path: &Path, force: bool) -> Result<()> {
    if path.exists() {
        let non_empty = std::fs::read_dir(path).map_err(io_err(path))?.next().is_some();
        if non_empty {
            if !force {
                return Err(CliError::OutputExists(path.to_path_buf()));
            }
            if !path.join("metadata.txt").is_file() {
                return Err(CliError::ForeignDirectory(path.to_path_buf()));
            }
            std::fs::remove_dir_all(path).map_err(io_err(path))?;
        }
    }
    std::fs::create_dir_all(path).map_err(io_err(path))?;
    // replaced on completion; lets --force clear the directory after a failed run
    let marker = path.join("metadata.txt");
    std::fs::write(&marker, "status = incomplete\n").map_err(io_err(marker))
}

pub fn git_commit() -> String {
    std::process::Command::new("git")
        .args(["-C", env!("CARGO_MANIFEST_DIR"), "rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

/// `key = value` lines describing the build, machine and numerical choices.
pub fn metadata(cfg: Option<&Config>, command: &str, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: &dyn std::fmt::Display| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("polyfk_version", &env!("CARGO_PKG_VERSION"));
    kv("git_commit", &git_commit());
    kv("os", &std::env::consts::OS);
    kv("arch", &std::env::consts::ARCH);
    kv("threads", &rayon::current_num_threads());
    kv("command", &command);
    if let Some(cfg) = cfg {
        kv("scheme", &cfg.run.scheme.as_str());
        kv("quadrature_order", &format!("2p + {}", cfg.quad_extra));
        kv("penalty_traces", &"pointwise at face quadrature nodes");
        kv("linf_estimate", &"max |lambda| over quadrature points and vertices");
        kv("newton_stop", &format!("residual <= {:e} or update below 1e-13 relative", cfg.run.newton.tol));
        if cfg.run.scheme == Scheme::Baseline {
            kv("baseline_splitting", &"implicit alpha c_new, lagged -alpha c_new c_old");
        }
        if matches!(cfg.problem, Problem::Wave(_)) {
            kv("wave_boundary", &"dirichlet from profile at x = 0, neumann elsewhere");
        }
    }
    for (k, v) in extra {
        kv(k, v);
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(io_err(path))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub elements: usize,
    pub dofs: usize,
    pub h_max: f64,
    pub steps: usize,
    pub final_time: f64,
    pub final_errors: Option<ErrorNorms>,
    pub min_c: f64,
    pub newton_iterations: usize,
    pub activation: Vec<Option<f64>>,
    pub centroids: Vec<Point>,
}

pub const STEPS_HEADER: &str = "step,t,newton_iterations,residual,min_c,entropy,wall_time";
pub const ERRORS_HEADER: &str = "t,err_L2,err_DG,err_grad";

/// Solve and write the run directory: `config.cfg`, `metadata.txt`,
/// `steps.csv`, `series.csv`, `activation.csv`, `errors.csv` (known
/// solutions only), `field_NNNNN.vtk` per stored state, numbered by step,
/// and `final.vtk`.
pub fn execute(cfg: &Config, dir: &Path, force: bool, command: &str, verbose: bool) -> Result<RunSummary> {
    prepare_dir(dir, force)?;
    write(&dir.join("config.cfg"), &cfg.normalized())?;
    let (n, step_dt) = cfg.run.steps()?;
    let solved = solve(cfg, |k, s| {
        if verbose && (k % cfg.run.output_every == 0 || k == n) {
            eprintln!(
                "step {k}/{n} t = {:.6e} newton {} residual {:.3e} min c {:.3e}",
                s.time, s.iterations, s.residual, s.min_c
            );
        }
        Ok(())
    })?;
    let Solved {
        space,
        trajectory,
        errors,
    } = solved;
    let mesh = space.mesh();

    write(
        &dir.join("metadata.txt"),
        &metadata(
            Some(cfg),
            command,
            &[
                ("elements", mesh.num_elements().to_string()),
                ("dofs", space.ndofs().to_string()),
                ("h_max", format!("{:e}", mesh.h_max())),
                ("steps", n.to_string()),
            ],
        ),
    )?;

    let mut steps = format!("{STEPS_HEADER}\n");
    for (k, s) in trajectory.stats.iter().enumerate() {
        let e = if s.entropy.is_finite() { format!("{:.12e}", s.entropy) } else { "NA".into() };
        let _ = writeln!(
            steps,
            "{},{:.12e},{},{:.6e},{:.12e},{e},{:.6e}",
            k + 1,
            s.time,
            s.iterations,
            s.residual,
            s.min_c,
            s.wall_time
        );
    }
    write(&dir.join("steps.csv"), &steps)?;
    write(&dir.join("series.csv"), &time_series_csv(&trajectory, &space))?;
    let activation = activation_time(&trajectory, &space, cfg.c_crit);
    write(&dir.join("activation.csv"), &activation_csv(&space, &activation))?;
    if let Some(errs) = &errors {
        let mut s = format!("{ERRORS_HEADER}\n");
        for (st, e) in trajectory.states.iter().zip(errs) {
            let _ = writeln!(s, "{:.12e},{:.12e},{:.12e},{:.12e}", st.time, e.l2, e.dg, e.grad);
        }
        write(&dir.join("errors.csv"), &s)?;
    }

    let variable: Variable = trajectory.variable;
    for (i, st) in trajectory.states.iter().enumerate() {
        let fields = Fields::from_state(&space, variable, &st.dofs, st.time);
        let act: Vec<f64> = activation
            .iter()
            .map(|a| a.filter(|&t| t <= st.time).unwrap_or(NOT_ACTIVATED))
            .collect();
        let step = (st.time / step_dt).round() as usize;
        write_vtk(&dir.join(format!("field_{step:05}.vtk")), mesh, &fields, Some(&act))?;
        if i + 1 == trajectory.states.len() {
            write_vtk(&dir.join("final.vtk"), mesh, &fields, Some(&act))?;
        }
    }

    let min_c = trajectory.stats.iter().map(|s| s.min_c).fold(trajectory.initial_min_c, f64::min);
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        elements: mesh.num_elements(),
        dofs: space.ndofs(),
        h_max: mesh.h_max(),
        steps: n,
        final_time: trajectory.last().time,
        final_errors: errors.and_then(|e| e.last().copied()),
        min_c,
        newton_iterations: trajectory.stats.iter().map(|s| s.iterations).sum(),
        centroids: mesh.elements.iter().map(|e| e.centroid).collect(),
        activation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prepare_dir_guards_existing_output() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("out");
        prepare_dir(&dir, false).unwrap();
        assert!(dir.join("metadata.txt").is_file());
        assert!(matches!(prepare_dir(&dir, false), Err(CliError::OutputExists(_))));
        std::fs::write(dir.join("x.csv"), "1").unwrap();
        prepare_dir(&dir, true).unwrap();
        assert!(!dir.join("x.csv").exists());

        let foreign = tmp.path().join("foreign");
        std::fs::create_dir(&foreign).unwrap();
        std::fs::write(foreign.join("notes.txt"), "keep").unwrap();
        assert!(matches!(prepare_dir(&foreign, true), Err(CliError::ForeignDirectory(_))));
        assert!(foreign.join("notes.txt").is_file());

        // an empty directory is fine without --force
        let empty = tmp.path().join("empty");
        std::fs::create_dir(&empty).unwrap();
        prepare_dir(&empty, false).unwrap();
    }

    #[test]
    fn element_values_file() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("c0.csv");
        std::fs::write(&path, "element_id,c\n1,0.5\n0,0.25\n\n").unwrap();
        assert_eq!(read_element_values(&path, 2).unwrap(), vec![0.25, 0.5]);
        for bad in ["id,c\n0,1\n1,1\n", "element_id,c\n0,1\n", "element_id,c\n0,1\n1,-1\n", "element_id,c\n0,1\n2,1\n"] {
            std::fs::write(&path, bad).unwrap();
            assert!(read_element_values(&path, 2).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn exact_wave_is_one_behind_the_front() {
        let profile = Arc::new(wave::wave_oracle(Default::default()).unwrap());
        let e = Exact::Wave(profile);
        assert!((e.eval([0.0, 0.3], 1.0).0 - 1.0).abs() < 1e-12);
        assert!(e.eval([4.5, 0.3], 0.0).0 < 1e-3);
    }
}
