use std::collections::HashMap;

use super::geometry::{self, Point};
use super::{BoundaryTag, Element, Face, FaceKind, PolyMesh};
use crate::error::{Error, Result};

/// Polygon soup plus labels and boundary tags, before face extraction.
#[derive(Debug, Clone, Default)]
pub struct RawMesh {
    pub vertices: Vec<Point>,
    /// Vertex index loops, one per element. Orientation is normalized to CCW.
    pub polygons: Vec<Vec<usize>>,
    pub labels: Vec<i32>,
    /// Tags for boundary edges, keyed by raw vertex indices (either order).
    pub boundary_tags: Vec<((usize, usize), BoundaryTag)>,
    /// Tag for boundary edges absent from `boundary_tags`; `None` makes them an error.
    pub default_tag: Option<BoundaryTag>,
}

/// Relative tolerance for vertex coincidence, scaled by the smallest element diameter.
const MATCH_TOL: f64 = 1e-9;

struct FaceRec {
    a: usize,
    b: usize,
    plus: usize,
    minus: Option<usize>,
}

pub fn build_poly_mesh(raw: &RawMesh) -> Result<PolyMesh> {
    if raw.polygons.is_empty() {
        return Err(Error::InvalidMesh("no polygons".into()));
    }
    if raw.labels.len() != raw.polygons.len() {
        return Err(Error::InvalidMesh(format!(
            "{} labels for {} polygons",
            raw.labels.len(),
            raw.polygons.len()
        )));
    }
    for (k, poly) in raw.polygons.iter().enumerate() {
        if poly.len() < 3 {
            return Err(Error::InvalidMesh(format!("polygon {k} has fewer than 3 vertices")));
        }
        if let Some(&bad) = poly.iter().find(|&&i| i >= raw.vertices.len()) {
            return Err(Error::InvalidMesh(format!("polygon {k} references missing vertex {bad}")));
        }
    }

    let h_min = raw
        .polygons
        .iter()
        .map(|p| {
            let pts: Vec<Point> = p.iter().map(|&i| raw.vertices[i]).collect();
            geometry::diameter(&pts)
        })
        .fold(f64::INFINITY, f64::min);
    if !(h_min > 0.0) {
        return Err(Error::InvalidMesh("polygon with zero diameter".into()));
    }
    let tol = MATCH_TOL * h_min;

    let (vertices, remap) = snap_vertices(&raw.vertices, tol);

    // Element loops in snapped indices, CCW, without repeated vertices.
    let mut loops: Vec<Vec<usize>> = Vec::with_capacity(raw.polygons.len());
    for (k, poly) in raw.polygons.iter().enumerate() {
        let mut ids: Vec<usize> = poly.iter().map(|&i| remap[i]).collect();
        ids.dedup();
        while ids.len() > 1 && ids.first() == ids.last() {
            ids.pop();
        }
        if ids.len() < 3 {
            return Err(Error::InvalidMesh(format!("polygon {k} degenerates after vertex merging")));
        }
        let pts: Vec<Point> = ids.iter().map(|&i| vertices[i]).collect();
        let area = geometry::signed_area(&pts);
        if area.abs() <= tol * tol {
            return Err(Error::InvalidMesh(format!("polygon {k} has zero area")));
        }
        if area < 0.0 {
            ids.reverse();
        }
        loops.push(ids);
    }

    let mut recs: Vec<FaceRec> = Vec::new();
    let mut by_key: HashMap<(usize, usize), usize> = HashMap::new();
    let mut elem_faces: Vec<Vec<usize>> = vec![Vec::new(); loops.len()];
    for (k, ids) in loops.iter().enumerate() {
        let n = ids.len();
        for i in 0..n {
            let (a, b) = (ids[i], ids[(i + 1) % n]);
            let key = (a.min(b), a.max(b));
            match by_key.get(&key) {
                None => {
                    by_key.insert(key, recs.len());
                    elem_faces[k].push(recs.len());
                    recs.push(FaceRec { a, b, plus: k, minus: None });
                }
                Some(&fi) => {
                    let rec = &mut recs[fi];
                    if rec.minus.is_some() || rec.plus == k {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        return Err(Error::InvalidMesh(format!(
                            "edge ({}, {})-({}, {}) is shared by more than two polygons",
                            pa[0], pa[1], pb[0], pb[1]
                        )));
                    }
                    if rec.a != b || rec.b != a {
                        return Err(Error::InvalidMesh(format!(
                            "polygons {} and {k} overlap along a shared edge",
                            rec.plus
                        )));
                    }
                    rec.minus = Some(k);
                    elem_faces[k].push(fi);
                }
            }
        }
    }

    check_t_junctions(&vertices, &recs, tol)?;

    let mut tags: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
    for &((i, j), tag) in &raw.boundary_tags {
        if i >= remap.len() || j >= remap.len() {
            return Err(Error::InvalidMesh(format!("boundary tag references missing vertex ({i}, {j})")));
        }
        let (a, b) = (remap[i], remap[j]);
        tags.insert((a.min(b), a.max(b)), tag);
    }

    let mut faces = Vec::with_capacity(recs.len());
    for rec in &recs {
        let (pa, pb) = (vertices[rec.a], vertices[rec.b]);
        let d = geometry::sub(pb, pa);
        let length = d[0].hypot(d[1]);
        let normal = [d[1] / length, -d[0] / length];
        let kind = match rec.minus {
            Some(minus) => FaceKind::Interior { plus: rec.plus, minus },
            None => {
                let key = (rec.a.min(rec.b), rec.a.max(rec.b));
                let tag = tags.get(&key).copied().or(raw.default_tag).ok_or(
                    Error::UntaggedBoundary {
                        ax: pa[0],
                        ay: pa[1],
                        bx: pb[0],
                        by: pb[1],
                    },
                )?;
                FaceKind::Boundary { element: rec.plus, tag }
            }
        };
        faces.push(Face {
            a: pa,
            b: pb,
            vertex_ids: (rec.a, rec.b),
            normal,
            length,
            kind,
        });
    }

    let elements = loops
        .into_iter()
        .zip(elem_faces)
        .zip(&raw.labels)
        .map(|((ids, fs), &label)| {
            let pts: Vec<Point> = ids.iter().map(|&i| vertices[i]).collect();
            Element {
                area: geometry::signed_area(&pts),
                diameter: geometry::diameter(&pts),
                centroid: geometry::centroid(&pts),
                bbox: geometry::bounding_box(&pts),
                vertices: pts,
                vertex_ids: ids,
                label,
                faces: fs,
            }
        })
        .collect();

    Ok(PolyMesh {
        vertices,
        elements,
        faces,
    })
}

/// Merge vertices closer than `tol`, returning the merged table and a map from
/// raw to merged indices. Only the first representative's coordinates are kept.
fn snap_vertices(raw: &[Point], tol: f64) -> (Vec<Point>, Vec<usize>) {
    let cell = tol.max(f64::MIN_POSITIVE);
    let key = |p: Point| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut out: Vec<Point> = Vec::new();
    let mut remap = Vec::with_capacity(raw.len());
    for &p in raw {
        let (kx, ky) = key(p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = grid.get(&(kx + dx, ky + dy)) {
                    for &q in list {
                        if geometry::dist(out[q], p) <= tol {
                            found = Some(q);
                            break 'search;
                        }
                    }
                }
            }
        }
        let id = found.unwrap_or_else(|| {
            out.push(p);
            grid.entry((kx, ky)).or_default().push(out.len() - 1);
            out.len() - 1
        });
        remap.push(id);
    }
    (out, remap)
}

/// An unmatched edge with some other vertex strictly inside it means two
/// polygons share only part of an edge.
fn check_t_junctions(vertices: &[Point], recs: &[FaceRec], tol: f64) -> Result<()> {
    let open: Vec<&FaceRec> = recs.iter().filter(|r| r.minus.is_none()).collect();
    if open.is_empty() {
        return Ok(());
    }
    let mean_len = open
        .iter()
        .map(|r| geometry::dist(vertices[r.a], vertices[r.b]))
        .sum::<f64>()
        / open.len() as f64;
    let cell = mean_len.max(tol);
    let key = |p: Point| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in vertices.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    for r in open {
        let (a, b) = (vertices[r.a], vertices[r.b]);
        let len = geometry::dist(a, b);
        let (lo, hi) = (key([a[0].min(b[0]), a[1].min(b[1])]), key([a[0].max(b[0]), a[1].max(b[1])]));
        for gx in lo.0 - 1..=hi.0 + 1 {
            for gy in lo.1 - 1..=hi.1 + 1 {
                let Some(list) = grid.get(&(gx, gy)) else { continue };
                for &v in list {
                    if v == r.a || v == r.b {
                        continue;
                    }
                    let (d, t) = geometry::point_segment(vertices[v], a, b);
                    let slack = tol / len;
                    if d <= tol.max(MATCH_TOL * len) && t > slack && t < 1.0 - slack {
                        return Err(Error::NonMatchingInterface {
                            ax: a[0],
                            ay: a[1],
                            bx: b[0],
                            by: b[1],
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_two_triangles() -> RawMesh {
        RawMesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            polygons: vec![vec![0, 1, 2], vec![0, 2, 3]],
            labels: vec![0, 0],
            boundary_tags: vec![],
            default_tag: Some(BoundaryTag::Dirichlet),
        }
    }

    #[test]
    fn split_square_counts() {
        let m = build_poly_mesh(&unit_square_two_triangles()).unwrap();
        assert_eq!(m.interior_faces().count(), 1);
        assert_eq!(m.boundary_faces().count(), 4);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interior_normal_points_from_plus_to_minus() {
        let m = build_poly_mesh(&unit_square_two_triangles()).unwrap();
        let (_, f) = m.interior_faces().next().unwrap();
        let FaceKind::Interior { plus, minus } = f.kind else { unreachable!() };
        let cp = m.elements[plus].centroid;
        let cm = m.elements[minus].centroid;
        let d = geometry::sub(cm, cp);
        assert!(geometry::dot(d, f.normal) > 0.0);
        assert!((f.normal[0].hypot(f.normal[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let mut raw = unit_square_two_triangles();
        raw.polygons[0].reverse();
        let m = build_poly_mesh(&raw).unwrap();
        assert!(m.elements.iter().all(|e| e.area > 0.0));
        assert_eq!(m.interior_faces().count(), 1);
    }

    #[test]
    fn partial_edge_is_rejected() {
        let raw = RawMesh {
            vertices: vec![
                [0.0, 0.0],
                [1.0, 0.0],
                [1.0, 1.0],
                [0.0, 1.0],
                [0.5, 1.0],
                [0.5, 2.0],
                [0.0, 2.0],
            ],
            polygons: vec![vec![0, 1, 2, 3], vec![3, 4, 5, 6]],
            labels: vec![0, 0],
            boundary_tags: vec![],
            default_tag: Some(BoundaryTag::Neumann),
        };
        let err = build_poly_mesh(&raw).unwrap_err();
        assert!(matches!(err, Error::NonMatchingInterface { .. }), "{err}");
        assert!(err.to_string().contains("non-matching interface"));
    }

    #[test]
    fn untagged_boundary_is_rejected() {
        let mut raw = unit_square_two_triangles();
        raw.default_tag = None;
        raw.boundary_tags = vec![((0, 1), BoundaryTag::Dirichlet), ((1, 2), BoundaryTag::Neumann), ((2, 3), BoundaryTag::Neumann)];
        let err = build_poly_mesh(&raw).unwrap_err();
        assert!(matches!(err, Error::UntaggedBoundary { .. }));
        raw.boundary_tags.push(((3, 0), BoundaryTag::Neumann));
        let m = build_poly_mesh(&raw).unwrap();
        let dir = m
            .boundary_faces()
            .filter(|(_, f)| matches!(f.kind, FaceKind::Boundary { tag: BoundaryTag::Dirichlet, .. }))
            .count();
        assert_eq!(dir, 1);
    }

    #[test]
    fn nearly_coincident_vertices_are_merged() {
        let mut raw = unit_square_two_triangles();
        raw.vertices.push([1.0 + 1e-13, 1.0 - 1e-13]);
        raw.polygons[1] = vec![0, 4, 3];
        let m = build_poly_mesh(&raw).unwrap();
        assert_eq!(m.interior_faces().count(), 1);
        assert_eq!(m.vertices.len(), 4);
    }
}
