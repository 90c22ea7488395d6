//! Run configuration files, `polyfk-config v1`.
//!
//! An INI-like text file. The first non-comment line must be
//! `format = polyfk-config v1`; everything else lives in the sections
//! `[mesh]`, `[model]`, `[time]`, `[newton]`, `[scheme]` and `[output]`.
//! Comments start with `#` or `;`. Unknown sections and keys are errors.
//!
//! ```text
//! format = polyfk-config v1
//!
//! [mesh]
//! kind = voronoi          # voronoi | wave | disk | file
//! elements = 100          # voronoi
//! x0 = 0                  # voronoi domain, default unit square
//! x1 = 1
//! y0 = 0
//! y1 = 1
//! lloyd = 20              # voronoi, Lloyd iterations
//! boundary = dirichlet    # voronoi/file: dirichlet | neumann | left_dirichlet | keep (file only)
//! h_target = 0.41         # wave: target largest element diameter
//! rings = 18              # disk
//! radius = 40
//! inner_rings = 12
//! target = 50             # disk: agglomerated element count
//! path = mesh.txt         # file, polyfk-mesh v1
//! degree = 1              # polynomial degree, mandatory
//! seed = 1                # overridden by --seed
//! quad_extra = 4          # quadrature order 2p + quad_extra
//!
//! [model]
//! problem = manufactured  # manufactured | wave | disk | custom
//! # wave:   d alpha v psi0 chi0
//! # disk:   d_ext d_axn_white d_axn_grey alpha_white alpha_grey
//! # custom: d_ext d_axn fibre_x fibre_y alpha dirichlet_c
//! initial = manufactured  # manufactured | wave | seeded_region | file
//! # seeded_region: seed_x seed_y seed_amplitude seed_width background seed_label
//! #                (background defaults to 1e-3 for the disk problem, else 0)
//! # file:          initial_file (CSV `element_id,c`)
//! floor = 1e-10           # lower bound for log of the initial data
//!
//! [time]
//! theta = 1               # mandatory
//! dt = 1e-6               # mandatory
//! t_final = 2e-5          # mandatory
//! epsilon = 0
//!
//! [newton]
//! tol = 1e-10
//! max_iters = 50
//! relaxation = 1
//!
//! [scheme]
//! name = exp_transform    # exp_transform | baseline
//! eta0 = 1                # mandatory
//! baseline_eta0 = 10
//!
//! [output]
//! every = 1               # store and write every n-th step
//! c_crit = 0.95           # activation threshold
//! dir = runs/tc1          # overridden by --out
//! ```

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, ParseOption};
use polyfk_core::mesh::Rect;
use polyfk_core::solver::{NewtonConfig, RunConfig, Scheme, DEFAULT_FLOOR};
use polyfk_core::verify::brain::DiskCase;
use polyfk_core::verify::wave::WaveParams;

use crate::error::{CliError, Result};

pub const FORMAT: &str = "polyfk-config v1";
const SECTIONS: [&str; 6] = ["mesh", "model", "time", "newton", "scheme", "output"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRule {
    Dirichlet,
    Neumann,
    /// Dirichlet on the left edge of the bounding box, Neumann elsewhere.
    LeftDirichlet,
    /// Tags as read from the mesh file.
    Keep,
}

impl BoundaryRule {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryRule::Dirichlet => "dirichlet",
            BoundaryRule::Neumann => "neumann",
            BoundaryRule::LeftDirichlet => "left_dirichlet",
            BoundaryRule::Keep => "keep",
        }
    }
}

impl FromStr for BoundaryRule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dirichlet" => Ok(BoundaryRule::Dirichlet),
            "neumann" => Ok(BoundaryRule::Neumann),
            "left_dirichlet" => Ok(BoundaryRule::LeftDirichlet),
            "keep" => Ok(BoundaryRule::Keep),
            other => Err(format!("unknown boundary rule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Voronoi {
        elements: usize,
        domain: Rect,
        lloyd: usize,
        boundary: BoundaryRule,
    },
    Wave {
        h_target: f64,
        lloyd: usize,
    },
    Disk {
        rings: usize,
        radius: f64,
        inner_rings: usize,
        target: usize,
    },
    File {
        path: PathBuf,
        boundary: BoundaryRule,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomModel {
    pub d_ext: f64,
    pub d_axn: f64,
    pub fibre: [f64; 2],
    pub alpha: f64,
    /// Concentration imposed on Dirichlet faces.
    pub dirichlet_c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Manufactured,
    Wave(WaveParams),
    Disk(DiskCase),
    Custom(CustomModel),
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Manufactured => "manufactured",
            Problem::Wave(_) => "wave",
            Problem::Disk(_) => "disk",
            Problem::Custom(_) => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeededRegion {
    pub center: [f64; 2],
    pub amplitude: f64,
    pub width: f64,
    pub background: f64,
    /// Restrict the seed to elements carrying this label.
    pub label: Option<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Manufactured,
    Wave,
    SeededRegion(SeededRegion),
    File(PathBuf),
}

impl Initial {
    pub fn name(&self) -> &'static str {
        match self {
            Initial::Manufactured => "manufactured",
            Initial::Wave => "wave",
            Initial::SeededRegion(_) => "seeded_region",
            Initial::File(_) => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub mesh: MeshSpec,
    pub degree: usize,
    pub seed: u64,
    pub quad_extra: usize,
    pub problem: Problem,
    pub initial: Initial,
    pub floor: f64,
    pub run: RunConfig,
    pub c_crit: f64,
    pub out_dir: Option<PathBuf>,
}

/// Key-value pairs of one section with use tracking, so leftovers can be
/// reported as unknown keys.
struct Table {
    name: &'static str,
    entries: Vec<(String, String)>,
    used: RefCell<BTreeSet<String>>,
}

impl Table {
    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e: T::Err| CliError::InvalidValue {
                key: self.path(key),
                msg: format!("`{v}`: {e}"),
            }),
        }
    }

    fn req<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?.ok_or_else(|| CliError::MissingKey(self.path(key)))
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn check(&self, key: &str, ok: bool, msg: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(CliError::InvalidValue {
                key: self.path(key),
                msg: msg.to_string(),
            })
        }
    }

    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.iter().find(|(k, _)| !used.contains(k)) {
            Some((k, _)) => Err(CliError::UnknownKey(self.path(k))),
            None => Ok(()),
        }
    }
}

fn tables(text: &str) -> Result<Vec<Table>> {
    let opt = ParseOption {
        enabled_quote: false,
        enabled_escape: false,
        ..ParseOption::default()
    };
    let ini = Ini::load_from_str_opt(text, opt).map_err(|e| CliError::Syntax(e.to_string()))?;
    let mut format = None;
    let mut out: Vec<Table> = SECTIONS
        .iter()
        .map(|&name| Table {
            name,
            entries: Vec::new(),
            used: RefCell::new(BTreeSet::new()),
        })
        .collect();
    for (section, props) in ini.iter() {
        let idx = match section {
            None => {
                for (k, v) in props.iter() {
                    if k != "format" {
                        return Err(CliError::UnknownKey(k.to_string()));
                    }
                    format = Some(v.trim().to_string());
                }
                continue;
            }
            Some(s) => SECTIONS
                .iter()
                .position(|&n| n == s)
                .ok_or_else(|| CliError::UnknownSection(s.to_string()))?,
        };
        for (k, v) in props.iter() {
            let entries = &mut out[idx].entries;
            if entries.iter().any(|(e, _)| e == k) {
                return Err(CliError::InvalidValue {
                    key: format!("{}.{k}", SECTIONS[idx]),
                    msg: "duplicate key".into(),
                });
            }
            entries.push((k.to_string(), strip_comment(v)));
        }
    }
    match format.as_deref() {
        Some(FORMAT) => Ok(out),
        Some(other) => Err(CliError::Syntax(format!("unsupported format `{other}`, expected `{FORMAT}`"))),
        None => Err(CliError::MissingKey("format".into())),
    }
}

/// Inline comments: `key = value  # note`.
fn strip_comment(v: &str) -> String {
    let cut = v.find(" #").or_else(|| v.find("\t#")).unwrap_or(v.len());
    v[..cut].trim().to_string()
}

pub fn parse_config(text: &str) -> Result<Config> {
    let t = tables(text)?;
    let [mesh, model, time, newton, scheme, output] = &t[..] else {
        unreachable!("one table per section")
    };

    let kind: String = mesh.req("kind")?;
    let mesh_spec = match kind.as_str() {
        "voronoi" => {
            let elements: usize = mesh.req("elements")?;
            mesh.check("elements", elements >= 2, "need at least 2 elements")?;
            let domain = Rect::new(mesh.or("x0", 0.0)?, mesh.or("x1", 1.0)?, mesh.or("y0", 0.0)?, mesh.or("y1", 1.0)?);
            mesh.check("x1", domain.x1 > domain.x0 && domain.y1 > domain.y0, "empty domain")?;
            let boundary = mesh.or("boundary", BoundaryRule::Dirichlet)?;
            mesh.check("boundary", boundary != BoundaryRule::Keep, "`keep` needs a mesh file")?;
            MeshSpec::Voronoi {
                elements,
                domain,
                lloyd: mesh.or("lloyd", 20)?,
                boundary,
            }
        }
        "wave" => {
            let h_target: f64 = mesh.req("h_target")?;
            mesh.check("h_target", h_target > 0.0, "must be positive")?;
            MeshSpec::Wave {
                h_target,
                lloyd: mesh.or("lloyd", 20)?,
            }
        }
        "disk" => {
            let d = DiskCase::default();
            let spec = MeshSpec::Disk {
                rings: mesh.or("rings", d.rings)?,
                radius: mesh.or("radius", d.radius)?,
                inner_rings: mesh.or("inner_rings", d.inner_rings)?,
                target: mesh.or("target", d.target_elements)?,
            };
            if let MeshSpec::Disk {
                rings, radius, target, ..
            } = spec
            {
                mesh.check("rings", rings >= 1, "need at least one ring")?;
                mesh.check("radius", radius > 0.0, "must be positive")?;
                mesh.check("target", target >= 1, "need at least one element")?;
            }
            spec
        }
        "file" => MeshSpec::File {
            path: mesh.req::<String>("path")?.into(),
            boundary: mesh.or("boundary", BoundaryRule::Keep)?,
        },
        other => {
            return Err(CliError::InvalidValue {
                key: mesh.path("kind"),
                msg: format!("unknown mesh kind `{other}`"),
            })
        }
    };
    let degree: usize = mesh.req("degree")?;
    mesh.check("degree", (1..=10).contains(&degree), "degree must be in 1..=10")?;
    let seed = mesh.or("seed", 1u64)?;
    let quad_extra = mesh.or("quad_extra", 4usize)?;

    let problem_name: String = model.req("problem")?;
    let problem = match problem_name.as_str() {
        "manufactured" => Problem::Manufactured,
        "wave" => {
            let w = WaveParams::default();
            let p = WaveParams {
                d: model.or("d", w.d)?,
                alpha: model.or("alpha", w.alpha)?,
                v: model.or("v", w.v)?,
                psi0: model.or("psi0", w.psi0)?,
                chi0: model.or("chi0", w.chi0)?,
                ..w
            };
            model.check("d", p.d > 0.0, "must be positive")?;
            model.check("v", p.v > 0.0, "must be positive")?;
            Problem::Wave(p)
        }
        "disk" => {
            let d = DiskCase::default();
            let case = DiskCase {
                d_ext: model.or("d_ext", d.d_ext)?,
                d_axn_white: model.or("d_axn_white", d.d_axn_white)?,
                d_axn_grey: model.or("d_axn_grey", d.d_axn_grey)?,
                alpha_white: model.or("alpha_white", d.alpha_white)?,
                alpha_grey: model.or("alpha_grey", d.alpha_grey)?,
                ..d
            };
            model.check("d_ext", case.d_ext > 0.0, "must be positive")?;
            model.check("d_axn_white", case.d_axn_white >= 0.0, "must be non-negative")?;
            model.check("d_axn_grey", case.d_axn_grey >= 0.0, "must be non-negative")?;
            Problem::Disk(case)
        }
        "custom" => {
            let m = CustomModel {
                d_ext: model.req("d_ext")?,
                d_axn: model.or("d_axn", 0.0)?,
                fibre: [model.or("fibre_x", 1.0)?, model.or("fibre_y", 0.0)?],
                alpha: model.req("alpha")?,
                dirichlet_c: model.or("dirichlet_c", 1.0)?,
            };
            model.check("d_ext", m.d_ext > 0.0, "must be positive")?;
            model.check("d_axn", m.d_axn >= 0.0, "must be non-negative")?;
            model.check("fibre_x", m.fibre[0].hypot(m.fibre[1]) > 0.0, "fibre direction must be non-zero")?;
            model.check("dirichlet_c", m.dirichlet_c > 0.0, "must be positive")?;
            Problem::Custom(m)
        }
        other => {
            return Err(CliError::InvalidValue {
                key: model.path("problem"),
                msg: format!("unknown problem `{other}`"),
            })
        }
    };
    let default_initial = match problem {
        Problem::Manufactured => "manufactured",
        Problem::Wave(_) => "wave",
        _ => "seeded_region",
    };
    let initial_name = model.or("initial", default_initial.to_string())?;
    let initial = match initial_name.as_str() {
        "manufactured" => Initial::Manufactured,
        "wave" => Initial::Wave,
        "seeded_region" => {
            let d = DiskCase::default();
            let s = SeededRegion {
                center: [model.or("seed_x", 0.0)?, model.or("seed_y", 0.0)?],
                amplitude: model.or("seed_amplitude", d.seed_amplitude)?,
                width: model.or("seed_width", d.seed_width)?,
                background: model.or("background", if matches!(problem, Problem::Disk(_)) { d.seed_background } else { 0.0 })?,
                label: model.get("seed_label")?,
            };
            model.check("seed_width", s.width > 0.0, "must be positive")?;
            model.check("seed_amplitude", s.amplitude >= 0.0, "must be non-negative")?;
            model.check("background", s.background >= 0.0, "must be non-negative")?;
            Initial::SeededRegion(s)
        }
        "file" => Initial::File(model.req::<String>("initial_file")?.into()),
        other => {
            return Err(CliError::InvalidValue {
                key: model.path("initial"),
                msg: format!("unknown initial condition `{other}`"),
            })
        }
    };
    let consistent = match (&initial, &problem) {
        (Initial::Manufactured, Problem::Manufactured) | (Initial::Wave, Problem::Wave(_)) => true,
        (Initial::Manufactured, _) | (Initial::Wave, _) => false,
        _ => true,
    };
    model.check("initial", consistent, "preset initial condition must match the problem")?;
    let floor = model.or("floor", DEFAULT_FLOOR)?;
    model.check("floor", floor > 0.0, "must be positive")?;

    let theta: f64 = time.req("theta")?;
    time.check("theta", (0.0..=1.0).contains(&theta), "theta out of range [0, 1]")?;
    let dt: f64 = time.req("dt")?;
    time.check("dt", dt > 0.0 && dt.is_finite(), "dt must be positive")?;
    let t_final: f64 = time.req("t_final")?;
    time.check("t_final", t_final >= dt, "t_final must be at least dt")?;
    let epsilon = time.or("epsilon", 0.0)?;
    time.check("epsilon", epsilon >= 0.0, "must be non-negative")?;

    let nd = NewtonConfig::default();
    let newton_cfg = NewtonConfig {
        tol: newton.or("tol", nd.tol)?,
        max_iters: newton.or("max_iters", nd.max_iters)?,
        relaxation: newton.or("relaxation", nd.relaxation)?,
    };
    newton.check("tol", newton_cfg.tol > 0.0, "must be positive")?;
    newton.check("max_iters", newton_cfg.max_iters >= 1, "must be at least 1")?;
    newton.check(
        "relaxation",
        newton_cfg.relaxation > 0.0 && newton_cfg.relaxation <= 1.0,
        "relaxation out of range (0, 1]",
    )?;

    let scheme_kind: Scheme = scheme.or("name", Scheme::ExpTransform)?;
    let eta0: f64 = scheme.req("eta0")?;
    scheme.check("eta0", eta0 > 0.0, "eta0 must be positive")?;
    let baseline_eta0 = scheme.or("baseline_eta0", 10.0)?;
    scheme.check("baseline_eta0", baseline_eta0 > 0.0, "must be positive")?;

    let every: usize = output.or("every", 1)?;
    output.check("every", every >= 1, "must be at least 1")?;
    let c_crit = output.or("c_crit", 0.95)?;
    let out_dir = output.get::<String>("dir")?.map(PathBuf::from);

    for table in &t {
        table.finish()?;
    }

    let mut run = RunConfig::new(theta, dt, t_final, eta0);
    run.epsilon = epsilon;
    run.newton = newton_cfg;
    run.scheme = scheme_kind;
    run.baseline_eta0 = baseline_eta0;
    run.output_every = every;
    run.validate().map_err(|e| CliError::InvalidValue {
        key: "time".into(),
        msg: e.to_string(),
    })?;

    Ok(Config {
        mesh: mesh_spec,
        degree,
        seed,
        quad_extra,
        problem,
        initial,
        floor,
        run,
        c_crit,
        out_dir,
    })
}

pub fn read_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut cfg = parse_config(&text)?;
    // relative paths inside the file are relative to the file
    let base = path.parent().unwrap_or(Path::new(""));
    if let MeshSpec::File { path: p, .. } = &mut cfg.mesh {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if let Initial::File(p) = &mut cfg.initial {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

impl Config {
    /// Every setting, defaults included, in canonical order. Parses back to
    /// an equal `Config` (the output directory is omitted).
    pub fn normalized(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("format", &FORMAT);
        let mut out = std::mem::take(&mut s);
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            let _ = writeln!(out, "\n[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        };
        let f = |v: f64| format!("{v:?}");
        let mut mesh: Vec<(&str, String)> = Vec::new();
        match &self.mesh {
            MeshSpec::Voronoi {
                elements,
                domain,
                lloyd,
                boundary,
            } => {
                mesh.push(("kind", "voronoi".into()));
                mesh.push(("elements", elements.to_string()));
                mesh.push(("x0", f(domain.x0)));
                mesh.push(("x1", f(domain.x1)));
                mesh.push(("y0", f(domain.y0)));
                mesh.push(("y1", f(domain.y1)));
                mesh.push(("lloyd", lloyd.to_string()));
                mesh.push(("boundary", boundary.as_str().into()));
            }
            MeshSpec::Wave { h_target, lloyd } => {
                mesh.push(("kind", "wave".into()));
                mesh.push(("h_target", f(*h_target)));
                mesh.push(("lloyd", lloyd.to_string()));
            }
            MeshSpec::Disk {
                rings,
                radius,
                inner_rings,
                target,
            } => {
                mesh.push(("kind", "disk".into()));
                mesh.push(("rings", rings.to_string()));
                mesh.push(("radius", f(*radius)));
                mesh.push(("inner_rings", inner_rings.to_string()));
                mesh.push(("target", target.to_string()));
            }
            MeshSpec::File { path, boundary } => {
                mesh.push(("kind", "file".into()));
                mesh.push(("path", path.display().to_string()));
                mesh.push(("boundary", boundary.as_str().into()));
            }
        }
        mesh.push(("degree", self.degree.to_string()));
        mesh.push(("seed", self.seed.to_string()));
        mesh.push(("quad_extra", self.quad_extra.to_string()));
        section("mesh", mesh);

        let mut model: Vec<(&str, String)> = vec![("problem", self.problem.name().into())];
        match &self.problem {
            Problem::Manufactured => {}
            Problem::Wave(p) => {
                model.push(("d", f(p.d)));
                model.push(("alpha", f(p.alpha)));
                model.push(("v", f(p.v)));
                model.push(("psi0", f(p.psi0)));
                model.push(("chi0", f(p.chi0)));
            }
            Problem::Disk(d) => {
                model.push(("d_ext", f(d.d_ext)));
                model.push(("d_axn_white", f(d.d_axn_white)));
                model.push(("d_axn_grey", f(d.d_axn_grey)));
                model.push(("alpha_white", f(d.alpha_white)));
                model.push(("alpha_grey", f(d.alpha_grey)));
            }
            Problem::Custom(m) => {
                model.push(("d_ext", f(m.d_ext)));
                model.push(("d_axn", f(m.d_axn)));
                model.push(("fibre_x", f(m.fibre[0])));
                model.push(("fibre_y", f(m.fibre[1])));
                model.push(("alpha", f(m.alpha)));
                model.push(("dirichlet_c", f(m.dirichlet_c)));
            }
        }
        model.push(("initial", self.initial.name().into()));
        match &self.initial {
            Initial::SeededRegion(s) => {
                model.push(("seed_x", f(s.center[0])));
                model.push(("seed_y", f(s.center[1])));
                model.push(("seed_amplitude", f(s.amplitude)));
                model.push(("seed_width", f(s.width)));
                model.push(("background", f(s.background)));
                if let Some(l) = s.label {
                    model.push(("seed_label", l.to_string()));
                }
            }
            Initial::File(p) => model.push(("initial_file", p.display().to_string())),
            _ => {}
        }
        model.push(("floor", f(self.floor)));
        section("model", model);

        let r = &self.run;
        section(
            "time",
            vec![
                ("theta", f(r.theta)),
                ("dt", f(r.dt)),
                ("t_final", f(r.t_final)),
                ("epsilon", f(r.epsilon)),
            ],
        );
        section(
            "newton",
            vec![
                ("tol", f(r.newton.tol)),
                ("max_iters", r.newton.max_iters.to_string()),
                ("relaxation", f(r.newton.relaxation)),
            ],
        );
        section(
            "scheme",
            vec![
                ("name", r.scheme.as_str().into()),
                ("eta0", f(r.eta0)),
                ("baseline_eta0", f(r.baseline_eta0)),
            ],
        );
        section(
            "output",
            vec![("every", r.output_every.to_string()), ("c_crit", f(self.c_crit))],
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "format = polyfk-config v1
[mesh]
kind = voronoi
elements = 30
degree = 1
[model]
problem = manufactured
[time]
theta = 1
dt = 1e-6
t_final = 2e-5
[scheme]
eta0 = 1
";

    fn with(line_after: &str, extra: &str) -> String {
        MINIMAL.replace(line_after, &format!("{line_after}\n{extra}"))
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.degree, 1);
        assert_eq!(c.seed, 1);
        assert_eq!(c.initial, Initial::Manufactured);
        assert_eq!(c.run.newton, NewtonConfig::default());
        assert_eq!(c.run.scheme, Scheme::ExpTransform);
        assert_eq!(
            c.mesh,
            MeshSpec::Voronoi {
                elements: 30,
                domain: Rect::unit(),
                lloyd: 20,
                boundary: BoundaryRule::Dirichlet
            }
        );
    }

    #[test]
    fn theta_out_of_range() {
        let err = parse_config(&MINIMAL.replace("theta = 1", "theta = 1.5")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("time.theta") && msg.contains("theta out of range"), "{msg}");
    }

    #[test]
    fn nonpositive_dt() {
        let err = parse_config(&MINIMAL.replace("dt = 1e-6", "dt = 0")).unwrap_err();
        assert!(err.to_string().contains("time.dt"), "{err}");
    }

    #[test]
    fn mandatory_keys() {
        for (line, key) in [
            ("theta = 1", "time.theta"),
            ("dt = 1e-6", "time.dt"),
            ("t_final = 2e-5", "time.t_final"),
            ("eta0 = 1", "scheme.eta0"),
            ("degree = 1", "mesh.degree"),
        ] {
            let err = parse_config(&MINIMAL.replace(line, "")).unwrap_err();
            assert!(matches!(&err, CliError::MissingKey(k) if k == key), "{line}: {err}");
        }
    }

    #[test]
    fn unknown_key_and_section() {
        let err = parse_config(&with("[time]", "thetta = 1")).unwrap_err();
        assert!(matches!(&err, CliError::UnknownKey(k) if k == "time.thetta"), "{err}");
        let err = parse_config(&format!("{MINIMAL}[solver]\nx = 1\n")).unwrap_err();
        assert!(matches!(&err, CliError::UnknownSection(s) if s == "solver"), "{err}");
    }

    #[test]
    fn unknown_scheme() {
        let err = parse_config(&with("[scheme]", "name = upwind")).unwrap_err();
        assert!(err.to_string().contains("scheme.name"), "{err}");
    }

    #[test]
    fn duplicate_key() {
        let err = parse_config(&with("[time]", "theta = 0.5")).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn wrong_format_marker() {
        assert!(parse_config(&MINIMAL.replace("v1", "v2")).is_err());
        assert!(parse_config(&MINIMAL.replace("format = polyfk-config v1\n", "")).is_err());
    }

    #[test]
    fn inline_comments_are_stripped() {
        let c = parse_config(&MINIMAL.replace("elements = 30", "elements = 30   # coarse")).unwrap();
        assert!(matches!(c.mesh, MeshSpec::Voronoi { elements: 30, .. }));
    }

    #[test]
    fn preset_must_match_problem() {
        let text = MINIMAL.replace("problem = manufactured", "problem = custom\nd_ext = 1\nalpha = 1\ninitial = wave");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("model.initial"), "{err}");
    }

    #[test]
    fn normalized_round_trip() {
        let texts = [
            MINIMAL.to_string(),
            MINIMAL
                .replace("problem = manufactured", "problem = disk")
                .replace("kind = voronoi\nelements = 30", "kind = disk\nrings = 6"),
            MINIMAL
                .replace("problem = manufactured", "problem = wave\nv = 0.2")
                .replace("kind = voronoi\nelements = 30", "kind = wave\nh_target = 0.7"),
            MINIMAL.replace(
                "problem = manufactured",
                "problem = custom\nd_ext = 2\nd_axn = 3\nalpha = 0.5\ninitial = seeded_region\nseed_label = 1",
            ),
        ];
        for text in texts {
            let c = parse_config(&text).unwrap();
            let again = parse_config(&c.normalized()).unwrap();
            assert_eq!(c, again);
            assert_eq!(c.normalized(), again.normalized());
        }
    }
}
