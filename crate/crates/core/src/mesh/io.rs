//! Text mesh format, `polyfk-mesh v1`.
//!
//! ```text
//! polyfk-mesh v1
//! # blank lines and lines starting with '#' are ignored
//! vertices <N>
//! <x> <y>                         N lines
//! elements <M>
//! <label> <k> <i_0> ... <i_k-1>   M lines, vertex indices are 0-based
//! boundary <E>
//! <i> <j> <dirichlet|neumann>     E lines, one per boundary edge
//! ```
//!
//! Every boundary edge must be listed. Triangle meshes use the same grammar
//! with `k = 3` on every element line.

use std::fmt::Write as _;

use super::agglomerate::TriMesh;
use super::{BoundaryTag, FaceKind, PolyMesh, RawMesh};
use crate::error::{Error, Result};

pub const HEADER: &str = "polyfk-mesh v1";

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some((i + 1, t.split_whitespace().collect()));
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.next().ok_or_else(|| Error::MeshFormat {
            line: 0,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let (line, tok) = self.expect(name)?;
        if tok.len() != 2 || tok[0] != name {
            return Err(Error::MeshFormat {
                line,
                msg: format!("expected `{name} <count>`"),
            });
        }
        parse(line, tok[1])
    }
}

fn parse<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::MeshFormat {
        line,
        msg: format!("cannot parse `{tok}`"),
    })
}

/// Parse the text format into a raw polygon soup.
pub fn parse_mesh(text: &str) -> Result<RawMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (line, tok) = lines.expect("header")?;
    if tok.join(" ") != HEADER {
        return Err(Error::MeshFormat {
            line,
            msg: format!("expected header `{HEADER}`"),
        });
    }
    let nv = lines.section("vertices")?;
    let mut raw = RawMesh::default();
    for _ in 0..nv {
        let (line, tok) = lines.expect("vertex")?;
        if tok.len() != 2 {
            return Err(Error::MeshFormat {
                line,
                msg: "vertex line needs two coordinates".into(),
            });
        }
        raw.vertices.push([parse(line, tok[0])?, parse(line, tok[1])?]);
    }
    let ne = lines.section("elements")?;
    for _ in 0..ne {
        let (line, tok) = lines.expect("element")?;
        if tok.len() < 2 {
            return Err(Error::MeshFormat {
                line,
                msg: "element line needs a label and a vertex count".into(),
            });
        }
        let label: i32 = parse(line, tok[0])?;
        let k: usize = parse(line, tok[1])?;
        if tok.len() != 2 + k || k < 3 {
            return Err(Error::MeshFormat {
                line,
                msg: format!("element declares {k} vertices but lists {}", tok.len() - 2),
            });
        }
        let ids = tok[2..]
            .iter()
            .map(|t| {
                let i: usize = parse(line, t)?;
                if i >= nv {
                    return Err(Error::MeshFormat {
                        line,
                        msg: format!("vertex index {i} out of range"),
                    });
                }
                Ok(i)
            })
            .collect::<Result<Vec<_>>>()?;
        raw.polygons.push(ids);
        raw.labels.push(label);
    }
    let nb = lines.section("boundary")?;
    for _ in 0..nb {
        let (line, tok) = lines.expect("boundary edge")?;
        if tok.len() != 3 {
            return Err(Error::MeshFormat {
                line,
                msg: "boundary line needs `<i> <j> <tag>`".into(),
            });
        }
        let tag: BoundaryTag = tok[2].parse().map_err(|msg| Error::MeshFormat { line, msg })?;
        raw.boundary_tags.push(((parse(line, tok[0])?, parse(line, tok[1])?), tag));
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::MeshFormat {
            line,
            msg: "trailing content after boundary section".into(),
        });
    }
    Ok(raw)
}

pub fn read_poly_mesh(text: &str) -> Result<PolyMesh> {
    super::build_poly_mesh(&parse_mesh(text)?)
}

pub fn read_tri_mesh(text: &str) -> Result<TriMesh> {
    let raw = parse_mesh(text)?;
    let mut triangles = Vec::with_capacity(raw.polygons.len());
    for (k, p) in raw.polygons.iter().enumerate() {
        if p.len() != 3 {
            return Err(Error::InvalidMesh(format!("element {k} is not a triangle")));
        }
        triangles.push([p[0], p[1], p[2]]);
    }
    TriMesh::new(raw.vertices, triangles, raw.labels, raw.boundary_tags)
}

pub fn write_poly_mesh(mesh: &PolyMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "vertices {}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
    }
    let _ = writeln!(s, "elements {}", mesh.elements.len());
    for e in &mesh.elements {
        let _ = write!(s, "{} {}", e.label, e.vertex_ids.len());
        for i in &e.vertex_ids {
            let _ = write!(s, " {i}");
        }
        s.push('\n');
    }
    let bnd: Vec<_> = mesh
        .faces
        .iter()
        .filter_map(|f| match f.kind {
            FaceKind::Boundary { tag, .. } => Some((f.vertex_ids, tag)),
            FaceKind::Interior { .. } => None,
        })
        .collect();
    let _ = writeln!(s, "boundary {}", bnd.len());
    for ((i, j), tag) in bnd {
        let _ = writeln!(s, "{i} {j} {tag}");
    }
    s
}

pub fn write_tri_mesh(tri: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "vertices {}", tri.vertices.len());
    for v in &tri.vertices {
        let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
    }
    let _ = writeln!(s, "elements {}", tri.triangles.len());
    for (t, l) in tri.triangles.iter().zip(&tri.labels) {
        let _ = writeln!(s, "{l} 3 {} {} {}", t[0], t[1], t[2]);
    }
    let mut edges: Vec<_> = tri.boundary_tags.iter().map(|(&k, &v)| (k, v)).collect();
    edges.sort_by_key(|&(k, _)| k);
    let _ = writeln!(s, "boundary {}", edges.len());
    for ((i, j), tag) in edges {
        let _ = writeln!(s, "{i} {j} {tag}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_voronoi, Rect};

    const SQUARE: &str = "polyfk-mesh v1
# two triangles
vertices 4
0 0
1 0
1 1
0 1
elements 2
0 3 0 1 2
1 3 0 2 3
boundary 4
0 1 dirichlet
1 2 neumann
2 3 neumann
3 0 dirichlet
";

    #[test]
    fn parses_square() {
        let m = read_poly_mesh(SQUARE).unwrap();
        assert_eq!(m.num_elements(), 2);
        assert_eq!(m.elements[1].label, 1);
        assert_eq!(m.interior_faces().count(), 1);
        let tri = read_tri_mesh(SQUARE).unwrap();
        assert_eq!(tri.triangles.len(), 2);
    }

    #[test]
    fn missing_boundary_tag_is_an_error() {
        let text = SQUARE.replace("boundary 4", "boundary 3").replace("3 0 dirichlet\n", "");
        assert!(matches!(read_poly_mesh(&text), Err(Error::UntaggedBoundary { .. })));
    }

    #[test]
    fn bad_header_is_reported_with_line() {
        let err = parse_mesh("polyfk-mesh v2\n").unwrap_err();
        assert!(matches!(err, Error::MeshFormat { line: 1, .. }));
        let err = parse_mesh(&SQUARE.replace("1 3 0 2 3", "1 4 0 2 3")).unwrap_err();
        assert!(matches!(err, Error::MeshFormat { line: 10, .. }), "{err}");
    }

    #[test]
    fn voronoi_round_trip() {
        let m = generate_voronoi(25, Rect::unit(), 5, 10).unwrap();
        let back = read_poly_mesh(&write_poly_mesh(&m)).unwrap();
        assert_eq!(back.num_elements(), m.num_elements());
        assert_eq!(back.num_faces(), m.num_faces());
        for (a, b) in back.elements.iter().zip(&m.elements) {
            assert_eq!(a.area.to_bits(), b.area.to_bits());
        }
    }
}
