//! Subcommand definitions and their implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use polyfk_core::mesh::io::{read_poly_mesh, read_tri_mesh, write_poly_mesh};
use polyfk_core::mesh::{agglomerate, generate_voronoi, mesh_metrics_with, BoundaryTag, PolyMesh, Rect, TriMesh};
use polyfk_core::solver::{RunConfig, Scheme};
use polyfk_core::verify::wave::{front_speed, WaveParams, DOMAIN};
use polyfk_core::verify::{ConvergenceTable, StudyKind};

use crate::config::{read_config, Config, Initial, MeshSpec, Problem};
use crate::error::{io_err, CliError, Result};
use crate::pipeline::{execute, metadata, prepare_dir, solve};
use crate::vtk::parse_vtk;

#[derive(Debug, Parser)]
#[command(name = "polyfk", version, about = "Positivity-preserving polygonal DG solver for the Fisher-Kolmogorov equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one configuration and write a run directory.
    Run(RunArgs),
    /// Convergence study on the manufactured solution.
    Study(StudyArgs),
    /// Travelling-wave benchmark on (0, 5) x (0, 1).
    Wave(WaveArgs),
    /// Agglomerate a labelled triangle mesh into polygons.
    Agglomerate(AgglomerateArgs),
    /// Print size and shape-regularity statistics of a mesh.
    MeshInfo(MeshInfoArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace the contents of an existing output directory.
    #[arg(long)]
    pub force: bool,
    /// Print per-step progress to stderr.
    #[arg(long, short)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration file (`polyfk-config v1`).
    #[arg(long)]
    pub config: PathBuf,
    /// Seed for mesh generation; overrides `mesh.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Study kind: h (element counts), p (degrees) or dt (time steps).
    #[arg(long)]
    pub kind: StudyKind,
    /// Configuration of the base run; must use the manufactured problem on a Voronoi mesh.
    #[arg(long)]
    pub config: PathBuf,
    /// Sweep values, comma separated. Defaults: h 30,100,300,1000; p 1,2,3,4,5; dt dt,dt/2,dt/4,dt/8.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    /// Seed for mesh generation; overrides `mesh.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct WaveArgs {
    /// Target largest element diameter.
    #[arg(long)]
    pub h_target: f64,
    /// Polynomial degree.
    #[arg(long)]
    pub p: usize,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: f64,
    /// Time step.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Time-stepping parameter theta.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Penalty constant.
    #[arg(long, default_value_t = 1.0)]
    pub eta0: f64,
    /// Penalty constant of the baseline scheme.
    #[arg(long, default_value_t = 10.0)]
    pub baseline_eta0: f64,
    /// Newton tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// exp_transform or baseline.
    #[arg(long, default_value = "exp_transform")]
    pub scheme: Scheme,
    /// Store and write every n-th step.
    #[arg(long, default_value_t = 10)]
    pub every: usize,
    /// Activation threshold used for the front speed.
    #[arg(long, default_value_t = 0.5)]
    pub c_crit: f64,
    /// Seed for mesh generation.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AgglomerateArgs {
    /// Triangle mesh in `polyfk-mesh v1` format (three vertices per element).
    #[arg(long, conflicts_with = "disk_rings", required_unless_present = "disk_rings")]
    pub input: Option<PathBuf>,
    /// Build a synthetic two-label ring disk with this many rings instead of reading a file.
    #[arg(long)]
    pub disk_rings: Option<usize>,
    /// Disk radius.
    #[arg(long, default_value_t = 40.0)]
    pub disk_radius: f64,
    /// Inner rings carrying label 1.
    #[arg(long, default_value_t = 12)]
    pub inner_rings: usize,
    /// Target number of polygons.
    #[arg(long)]
    pub target: usize,
    /// Output polygon mesh.
    #[arg(long)]
    pub output: PathBuf,
    /// Overwrite the output file.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct MeshInfoArgs {
    /// Mesh file in `polyfk-mesh v1` format.
    #[arg(long, conflicts_with = "voronoi", required_unless_present = "voronoi")]
    pub mesh: Option<PathBuf>,
    /// Generate a Voronoi mesh of the unit square with this many cells instead.
    #[arg(long)]
    pub voronoi: Option<usize>,
    /// Seed for the Voronoi generator.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Lloyd iterations for the Voronoi generator.
    #[arg(long, default_value_t = 20)]
    pub lloyd: usize,
    /// Flag elements whose area / diameter^2 is below this value.
    #[arg(long, default_value_t = 0.05)]
    pub shape_threshold: f64,
}

pub fn dispatch(cli: Cli, command_line: &str) -> Result<()> {
    match cli.command {
        Command::Run(a) => run(a, command_line),
        Command::Study(a) => study(a, command_line),
        Command::Wave(a) => wave(a, command_line),
        Command::Agglomerate(a) => agglomerate_cmd(a),
        Command::MeshInfo(a) => mesh_info(a),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned())
}

fn out_dir(args: &OutputArgs, cfg: Option<&Config>, fallback: String) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("runs").join(fallback))
}

fn run(a: RunArgs, command_line: &str) -> Result<()> {
    let mut cfg = read_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let dir = out_dir(&a.output, Some(&cfg), stem(&a.config));
    let s = execute(&cfg, &dir, a.output.force, command_line, a.output.verbose)?;
    println!("elements {} dofs {} h_max {:.5} steps {}", s.elements, s.dofs, s.h_max, s.steps);
    println!("t = {:.6e}  min c = {:.6e}  newton iterations {}", s.final_time, s.min_c, s.newton_iterations);
    if let Some(e) = s.final_errors {
        println!("err_L2 = {:.6e}  err_DG = {:.6e}", e.l2, e.dg);
    }
    println!("output in {}", s.dir.display());
    Ok(())
}

/// Configurations of a study sweep.
pub fn study_points(base: &Config, kind: StudyKind, values: Option<&[f64]>) -> Result<Vec<Config>> {
    if base.problem != Problem::Manufactured {
        return Err(CliError::Usage("studies need `model.problem = manufactured`".into()));
    }
    let as_count = |v: f64, what: &str| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(CliError::Usage(format!("{what} must be a positive integer, got {v}")))
        }
    };
    let defaults: Vec<f64> = match kind {
        StudyKind::H => vec![30.0, 100.0, 300.0, 1000.0],
        StudyKind::P => (1..=5).map(f64::from).collect(),
        StudyKind::Dt => (0..4).map(|i| base.run.dt / f64::from(1 << i)).collect(),
    };
    let values = values.map_or(defaults, <[f64]>::to_vec);
    values
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            c.run.output_every = usize::MAX;
            match kind {
                StudyKind::H => match &mut c.mesh {
                    MeshSpec::Voronoi { elements, .. } => *elements = as_count(v, "element count")?,
                    _ => return Err(CliError::Usage("h studies need `mesh.kind = voronoi`".into())),
                },
                StudyKind::P => c.degree = as_count(v, "degree")?,
                StudyKind::Dt => {
                    if !(v > 0.0 && v <= c.run.t_final) {
                        return Err(CliError::Usage(format!("time step {v} outside (0, t_final]")));
                    }
                    c.run.dt = v;
                }
            }
            Ok(c)
        })
        .collect()
}

pub fn run_study(points: &[Config], kind: StudyKind, verbose: bool) -> ConvergenceTable {
    let mut table = ConvergenceTable::new(kind);
    for cfg in points {
        let fallback = match kind {
            StudyKind::P => cfg.degree as f64,
            StudyKind::Dt => cfg.run.dt,
            StudyKind::H => f64::NAN,
        };
        match solve(cfg, |_, _| Ok(())) {
            Ok(s) => {
                let param = match kind {
                    StudyKind::H => s.space.mesh().h_max(),
                    StudyKind::P => cfg.degree as f64,
                    StudyKind::Dt => cfg.run.steps().map_or(cfg.run.dt, |(_, dt)| dt),
                };
                let err = s.errors.as_ref().and_then(|e| e.last().copied()).expect("manufactured runs have errors");
                if verbose {
                    eprintln!("{} = {param:e}: L2 {:.6e} DG {:.6e}", kind.as_str(), err.l2, err.dg);
                }
                table.push(param, s.space.ndofs(), Ok(err));
            }
            Err(e) => {
                if verbose {
                    eprintln!("{} = {fallback:e}: failed: {e}", kind.as_str());
                }
                table.push(fallback, 0, Err(e.to_string()));
            }
        }
    }
    table
}

fn study(a: StudyArgs, command_line: &str) -> Result<()> {
    let mut base = read_config(&a.config)?;
    if let Some(s) = a.seed {
        base.seed = s;
    }
    let points = study_points(&base, a.kind, a.values.as_deref())?;
    let dir = out_dir(&a.output, None, format!("{}-study-{}", stem(&a.config), a.kind.as_str()));
    prepare_dir(&dir, a.output.force)?;
    std::fs::write(dir.join("config.cfg"), base.normalized()).map_err(io_err(dir.join("config.cfg")))?;
    let table = run_study(&points, a.kind, a.output.verbose);
    let (rl2, rdg) = table.fitted_rates();
    let meta = metadata(
        Some(&base),
        command_line,
        &[
            ("study_kind", a.kind.as_str().to_string()),
            ("fitted_rate_L2", format!("{rl2:.6}")),
            ("fitted_rate_DG", format!("{rdg:.6}")),
        ],
    );
    std::fs::write(dir.join("metadata.txt"), meta).map_err(io_err(dir.join("metadata.txt")))?;
    let csv = table.to_csv();
    std::fs::write(dir.join("convergence.csv"), &csv).map_err(io_err(dir.join("convergence.csv")))?;
    print!("{csv}");
    println!("fitted rates: L2 {rl2:.4}  DG {rdg:.4}");
    for r in table.rows.iter().filter(|r| r.failure.is_some()) {
        println!("failed at {}: {}", r.param, r.failure.as_deref().unwrap_or(""));
    }
    println!("output in {}", dir.display());
    Ok(())
}

/// Configuration of the travelling-wave benchmark from command-line values.
pub fn wave_config(a: &WaveArgs) -> Config {
    let mut run = RunConfig::new(a.theta, a.dt, a.t_final, a.eta0);
    run.newton.tol = a.tol;
    run.scheme = a.scheme;
    run.baseline_eta0 = a.baseline_eta0;
    run.output_every = a.every.max(1);
    Config {
        mesh: MeshSpec::Wave {
            h_target: a.h_target,
            lloyd: 20,
        },
        degree: a.p,
        seed: a.seed,
        quad_extra: 4,
        problem: Problem::Wave(WaveParams::default()),
        initial: Initial::Wave,
        floor: polyfk_core::solver::DEFAULT_FLOOR,
        run,
        c_crit: a.c_crit,
        out_dir: None,
    }
}

fn wave(a: WaveArgs, command_line: &str) -> Result<()> {
    if !(a.h_target > 0.0) || a.p == 0 {
        return Err(CliError::Usage("need --h-target > 0 and --p >= 1".into()));
    }
    let cfg = wave_config(&a);
    // same checks as a config file
    crate::config::parse_config(&cfg.normalized())?;
    let dir = out_dir(&a.output, None, format!("wave-h{}-p{}-T{}-{}", a.h_target, a.p, a.t_final, a.scheme.as_str()));
    let s = execute(&cfg, &dir, a.output.force, command_line, a.output.verbose)?;
    let e = s.final_errors.expect("wave runs have errors");
    let mut report = String::new();
    let _ = writeln!(report, "scheme {} p {} elements {} dofs {} h_max {:.5}", a.scheme.as_str(), a.p, s.elements, s.dofs, s.h_max);
    let _ = writeln!(report, "T = {}: err_L2 = {:.6e}  err_DG = {:.6e}", s.final_time, e.l2, e.dg);
    let _ = writeln!(report, "min c over all steps = {:.6e}", s.min_c);
    match front_speed(&s.centroids, &s.activation) {
        Some(fit) => {
            let _ = writeln!(report, "front speed from activation (c > {}) = {:.5} (r^2 {:.4})", a.c_crit, fit.slope, fit.r2);
        }
        None => {
            let _ = writeln!(report, "front speed: too few activated elements");
        }
    }
    let text = std::fs::read_to_string(dir.join("final.vtk")).map_err(io_err(dir.join("final.vtk")))?;
    if let (Some(front), Problem::Wave(p)) = (parse_vtk(&text)?.equivalent_front(DOMAIN.y1 - DOMAIN.y0), &cfg.problem) {
        let exact = polyfk_core::verify::wave::wave_oracle(*p)?.equivalent_front(s.final_time);
        let _ = writeln!(report, "equivalent front at T: computed {front:.5}, exact {exact:.5}");
    }
    std::fs::write(dir.join("report.txt"), &report).map_err(io_err(dir.join("report.txt")))?;
    print!("{report}");
    println!("output in {}", dir.display());
    Ok(())
}

fn agglomerate_cmd(a: AgglomerateArgs) -> Result<()> {
    if a.output.exists() && !a.force {
        return Err(CliError::Usage(format!("{} exists; pass --force to overwrite", a.output.display())));
    }
    let tri: TriMesh = match (&a.input, a.disk_rings) {
        (Some(path), _) => read_tri_mesh(&std::fs::read_to_string(path).map_err(io_err(path))?)?,
        (None, Some(rings)) => polyfk_core::mesh::ring_disk(rings, a.disk_radius, a.inner_rings, BoundaryTag::Neumann)?,
        (None, None) => return Err(CliError::Usage("need --input or --disk-rings".into())),
    };
    let poly = agglomerate(&tri, a.target)?;
    let tri_area: f64 = (0..tri.triangles.len()).map(|t| tri.area(t)).sum();
    std::fs::write(&a.output, write_poly_mesh(&poly)).map_err(io_err(&a.output))?;
    println!(
        "{} triangles -> {} polygons, labels {:?}, relative area change {:.3e}",
        tri.triangles.len(),
        poly.num_elements(),
        poly.labels(),
        (poly.total_area() - tri_area).abs() / tri_area
    );
    println!("written to {}", a.output.display());
    Ok(())
}

pub fn mesh_report(mesh: &PolyMesh, shape_threshold: f64) -> String {
    let r = mesh_metrics_with(mesh, shape_threshold);
    let dirichlet = mesh
        .boundary_faces()
        .filter(|(_, f)| matches!(f.kind, polyfk_core::mesh::FaceKind::Boundary { tag: BoundaryTag::Dirichlet, .. }))
        .count();
    let mut s = String::new();
    let _ = writeln!(s, "elements {}", mesh.num_elements());
    let _ = writeln!(s, "vertices {}", mesh.vertices.len());
    let _ = writeln!(
        s,
        "faces {} (interior {}, boundary {}, dirichlet {dirichlet})",
        mesh.num_faces(),
        mesh.interior_faces().count(),
        mesh.boundary_faces().count()
    );
    let _ = writeln!(s, "labels {:?}", mesh.labels());
    let _ = writeln!(s, "h_max {:.6e}", mesh.h_max());
    let _ = writeln!(s, "total area {:.12e}", mesh.total_area());
    let _ = writeln!(s, "shape |K|/h_K^2: min {:.4} mean {:.4} max {:.4}", r.shape.min, r.shape.mean, r.shape.max);
    let _ = writeln!(s, "contact |F|/h_K: min {:.4} mean {:.4} max {:.4}", r.contact.min, r.contact.mean, r.contact.max);
    let _ = writeln!(s, "flagged (shape < {}): {:?}", r.shape_threshold, r.flagged);
    s
}

fn mesh_info(a: MeshInfoArgs) -> Result<()> {
    let mesh = match (&a.mesh, a.voronoi) {
        (Some(path), _) => read_poly_mesh(&std::fs::read_to_string(path).map_err(io_err(path))?)?,
        (None, Some(n)) => generate_voronoi(n, Rect::unit(), a.seed, a.lloyd)?,
        (None, None) => return Err(CliError::Usage("need --mesh or --voronoi".into())),
    };
    print!("{}", mesh_report(&mesh, a.shape_threshold));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const BASE: &str = "format = polyfk-config v1\n[mesh]\nkind = voronoi\nelements = 20\ndegree = 1\n[model]\nproblem = manufactured\n[time]\ntheta = 1\ndt = 1e-3\nt_final = 4e-3\n[scheme]\neta0 = 1\n";

    #[test]
    fn study_points_per_kind() {
        let base = parse_config(BASE).unwrap();
        let h = study_points(&base, StudyKind::H, Some(&[10.0, 40.0])).unwrap();
        assert!(matches!(h[1].mesh, MeshSpec::Voronoi { elements: 40, .. }));
        let p = study_points(&base, StudyKind::P, None).unwrap();
        assert_eq!(p.iter().map(|c| c.degree).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        let dt = study_points(&base, StudyKind::Dt, None).unwrap();
        assert_eq!(dt.iter().map(|c| c.run.dt).collect::<Vec<_>>(), vec![1e-3, 5e-4, 2.5e-4, 1.25e-4]);
        assert!(study_points(&base, StudyKind::P, Some(&[1.5])).is_err());
        assert!(study_points(&base, StudyKind::Dt, Some(&[1.0])).is_err());
    }

    #[test]
    fn study_needs_manufactured_problem() {
        let text = BASE.replace("problem = manufactured", "problem = custom\nd_ext = 1\nalpha = 1\ndirichlet_c = 1\ninitial = seeded_region");
        let base = parse_config(&text).unwrap();
        assert!(matches!(study_points(&base, StudyKind::P, None), Err(CliError::Usage(_))));
    }

    #[test]
    fn wave_config_round_trips() {
        let cli = Cli::parse_from(["polyfk", "wave", "--h-target", "0.5", "--p", "2", "--T", "1", "--scheme", "baseline"]);
        let Command::Wave(a) = cli.command else { panic!("not a wave command") };
        let cfg = wave_config(&a);
        assert_eq!(cfg.run.scheme, Scheme::Baseline);
        assert_eq!(cfg.run.newton.tol, 1e-6);
        assert_eq!(parse_config(&cfg.normalized()).unwrap(), cfg);
    }

    #[test]
    fn mesh_report_counts() {
        let m = generate_voronoi(16, Rect::unit(), 2, 5).unwrap();
        let r = mesh_report(&m, 0.05);
        assert!(r.starts_with("elements 16\n"));
        assert!(r.contains("total area 1.000000000000e0"));
    }
}
