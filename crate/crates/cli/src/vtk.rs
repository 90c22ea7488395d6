//! Legacy ASCII VTK polygonal datasets.
//!
//! ```text
//! # vtk DataFile Version 3.0
//! polyfk t=<time>
//! ASCII
//! DATASET POLYDATA
//! POINTS <n> double          x y 0 per mesh vertex
//! POLYGONS <m> <size>        k i_0 ... i_k-1 per element
//! CELL_DATA <m>
//! SCALARS c_mean double 1    element mean of c
//! SCALARS label int 1
//! SCALARS t_activate double 1  (optional, -1 = not activated)
//! POINT_DATA <n>
//! SCALARS c double 1         c at each vertex, averaged over adjacent elements
//! ```
//!
//! Reals are written with `{:.12e}` so identical inputs give identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use polyfk_core::dgspace::DgSpace;
use polyfk_core::mesh::PolyMesh;
use polyfk_core::solver::Variable;

use crate::error::{io_err, CliError, Result};

/// Concentration fields of one state, derived from its dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct Fields {
    pub time: f64,
    pub c_mean: Vec<f64>,
    pub c_vertex: Vec<f64>,
}

impl Fields {
    pub fn from_state(space: &DgSpace, variable: Variable, dofs: &[f64], time: f64) -> Fields {
        let to_c = |v: f64| match variable {
            Variable::LogConcentration => v.exp(),
            Variable::Concentration => v,
        };
        let mesh = space.mesh();
        let c_mean = (0..space.num_elements()).map(|k| space.element_mean(dofs, k, to_c)).collect();
        let mut sum = vec![0.0; mesh.vertices.len()];
        let mut count = vec![0usize; mesh.vertices.len()];
        for (k, e) in mesh.elements.iter().enumerate() {
            for (&id, &x) in e.vertex_ids.iter().zip(&e.vertices) {
                sum[id] += to_c(space.eval(dofs, k, x).0);
                count[id] += 1;
            }
        }
        let c_vertex = sum
            .iter()
            .zip(&count)
            .map(|(&s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect();
        Fields { time, c_mean, c_vertex }
    }
}

pub const NOT_ACTIVATED: f64 = -1.0;

pub fn vtk_string(mesh: &PolyMesh, fields: &Fields, activation: Option<&[f64]>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "polyfk t={:.12e}", fields.time);
    let _ = writeln!(s, "ASCII\nDATASET POLYDATA");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:.12e} {:.12e} 0", v[0], v[1]);
    }
    let size: usize = mesh.elements.iter().map(|e| e.vertex_ids.len() + 1).sum();
    let _ = writeln!(s, "POLYGONS {} {size}", mesh.num_elements());
    for e in &mesh.elements {
        let _ = write!(s, "{}", e.vertex_ids.len());
        for id in &e.vertex_ids {
            let _ = write!(s, " {id}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_DATA {}", mesh.num_elements());
    scalars(&mut s, "c_mean", "double", fields.c_mean.iter().map(|v| format!("{v:.12e}")));
    scalars(&mut s, "label", "int", mesh.elements.iter().map(|e| e.label.to_string()));
    if let Some(a) = activation {
        scalars(&mut s, "t_activate", "double", a.iter().map(|v| format!("{v:.12e}")));
    }
    let _ = writeln!(s, "POINT_DATA {}", mesh.vertices.len());
    scalars(&mut s, "c", "double", fields.c_vertex.iter().map(|v| format!("{v:.12e}")));
    s
}

fn scalars(s: &mut String, name: &str, ty: &str, values: impl Iterator<Item = String>) {
    let _ = writeln!(s, "SCALARS {name} {ty} 1\nLOOKUP_TABLE default");
    for v in values {
        let _ = writeln!(s, "{v}");
    }
}

pub fn write_vtk(path: &Path, mesh: &PolyMesh, fields: &Fields, activation: Option<&[f64]>) -> Result<()> {
    std::fs::write(path, vtk_string(mesh, fields, activation)).map_err(io_err(path))
}

/// Contents of a file written by [`vtk_string`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtkData {
    pub points: Vec<[f64; 2]>,
    pub polygons: Vec<Vec<usize>>,
    pub cell_data: BTreeMap<String, Vec<f64>>,
    pub point_data: BTreeMap<String, Vec<f64>>,
}

impl VtkData {
    /// Vertex-average centre of each polygon.
    pub fn cell_centres(&self) -> Vec<[f64; 2]> {
        self.polygons
            .iter()
            .map(|p| {
                let n = p.len() as f64;
                let sx: f64 = p.iter().map(|&i| self.points[i][0]).sum();
                let sy: f64 = p.iter().map(|&i| self.points[i][1]).sum();
                [sx / n, sy / n]
            })
            .collect()
    }

    /// Polygon areas by the shoelace formula.
    pub fn cell_areas(&self) -> Vec<f64> {
        self.polygons
            .iter()
            .map(|p| {
                let n = p.len();
                0.5 * (0..n)
                    .map(|i| {
                        let (a, b) = (self.points[p[i]], self.points[p[(i + 1) % n]]);
                        a[0] * b[1] - a[1] * b[0]
                    })
                    .sum::<f64>()
                    .abs()
            })
            .collect()
    }

    /// `sum(c_mean * area) / height`: the position of a unit step from the
    /// left edge carrying the same mass.
    pub fn equivalent_front(&self, height: f64) -> Option<f64> {
        let c = self.cell_data.get("c_mean")?;
        Some(c.iter().zip(self.cell_areas()).map(|(c, a)| c * a).sum::<f64>() / height)
    }
}

/// Reader for the subset of legacy VTK produced by this module.
pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let bad = |msg: String| CliError::Usage(format!("vtk: {msg}"));
    let mut tokens = text.lines().skip(2).flat_map(str::split_whitespace);
    let mut next = || tokens.next().ok_or_else(|| bad("unexpected end of file".into()));
    let num = |t: &str| t.parse::<f64>().map_err(|_| bad(format!("bad number `{t}`")));
    let count = |t: &str| t.parse::<usize>().map_err(|_| bad(format!("bad count `{t}`")));
    let mut data = VtkData::default();
    let mut target: Option<(bool, usize)> = None;
    loop {
        let Ok(tok) = next() else { break };
        match tok {
            "ASCII" | "DATASET" | "POLYDATA" => {}
            "POINTS" => {
                let n = count(next()?)?;
                next()?;
                for _ in 0..n {
                    let (x, y) = (num(next()?)?, num(next()?)?);
                    next()?;
                    data.points.push([x, y]);
                }
            }
            "POLYGONS" => {
                let m = count(next()?)?;
                next()?;
                for _ in 0..m {
                    let k = count(next()?)?;
                    let ids = (0..k).map(|_| count(next()?)).collect::<Result<Vec<_>>>()?;
                    data.polygons.push(ids);
                }
            }
            "CELL_DATA" => target = Some((true, count(next()?)?)),
            "POINT_DATA" => target = Some((false, count(next()?)?)),
            "SCALARS" => {
                let name = next()?.to_string();
                next()?;
                next()?;
                if next()? != "LOOKUP_TABLE" {
                    return Err(bad("expected LOOKUP_TABLE".into()));
                }
                next()?;
                let (cells, n) = target.ok_or_else(|| bad("SCALARS before CELL_DATA/POINT_DATA".into()))?;
                let values = (0..n).map(|_| num(next()?)).collect::<Result<Vec<_>>>()?;
                if cells {
                    data.cell_data.insert(name, values);
                } else {
                    data.point_data.insert(name, values);
                }
            }
            other => return Err(bad(format!("unexpected token `{other}`"))),
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use polyfk_core::dgspace::Degrees;
    use polyfk_core::mesh::{generate_voronoi, Rect};

    use super::*;

    fn space(p: usize) -> DgSpace {
        let mesh = Arc::new(generate_voronoi(12, Rect::unit(), 3, 5).unwrap());
        DgSpace::new(mesh, Degrees::Uniform(p)).unwrap()
    }

    #[test]
    fn constant_state_gives_unit_cell_data() {
        let sp = space(2);
        let lambda = vec![0.0; sp.ndofs()];
        let f = Fields::from_state(&sp, Variable::LogConcentration, &lambda, 0.0);
        let data = parse_vtk(&vtk_string(sp.mesh(), &f, None)).unwrap();
        assert!(data.cell_data["c_mean"].iter().all(|&c| c == 1.0));
        assert!(data.point_data["c"].iter().all(|&c| (c - 1.0).abs() < 1e-14));
    }

    #[test]
    fn round_trip_counts_and_labels() {
        let sp = space(1);
        let c = sp.project(|x| 1.0 + x[0]).unwrap();
        let f = Fields::from_state(&sp, Variable::Concentration, &c, 0.5);
        let act: Vec<f64> = (0..sp.num_elements()).map(|k| if k % 2 == 0 { 0.25 } else { NOT_ACTIVATED }).collect();
        let text = vtk_string(sp.mesh(), &f, Some(&act));
        let data = parse_vtk(&text).unwrap();
        assert_eq!(data.polygons.len(), sp.num_elements());
        assert_eq!(data.points.len(), sp.mesh().vertices.len());
        assert_eq!(data.cell_data["t_activate"], act);
        assert_eq!(data.cell_data["label"].len(), sp.num_elements());
        for (k, e) in sp.mesh().elements.iter().enumerate() {
            assert!((data.cell_data["c_mean"][k] - (1.0 + e.centroid[0])).abs() < 1e-10);
        }
        // bit-stable
        assert_eq!(text, vtk_string(sp.mesh(), &f, Some(&act)));
    }

    #[test]
    fn vertex_values_of_linear_field_are_exact() {
        let sp = space(1);
        let c = sp.project(|x| 2.0 * x[0] - x[1]).unwrap();
        let f = Fields::from_state(&sp, Variable::Concentration, &c, 0.0);
        for (v, cv) in sp.mesh().vertices.iter().zip(&f.c_vertex) {
            assert!((cv - (2.0 * v[0] - v[1])).abs() < 1e-10);
        }
    }
}
