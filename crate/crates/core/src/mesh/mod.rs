//! Polygonal meshes: construction, ingestion, agglomeration and regularity checks.
//!
//! A [`PolyMesh`] is immutable once built. Elements are counter-clockwise
//! vertex loops; faces are the deduplicated polygon edges, each carrying a
//! unit normal that points from its first owner (`K+`) towards the second
//! (`K-`), or outward on the boundary.

mod agglomerate;
mod build;
pub mod geometry;
pub mod io;
mod metrics;
mod voronoi;

pub use agglomerate::{agglomerate, ring_disk, TriMesh};
pub use build::{build_poly_mesh, RawMesh};
pub use geometry::Point;
pub use metrics::{arithmetic_avg, harmonic_avg, mesh_metrics, mesh_metrics_with, RegularityReport, Summary, DEFAULT_SHAPE_THRESHOLD};
pub use voronoi::{generate_voronoi, Rect};

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Dirichlet => "dirichlet",
            BoundaryTag::Neumann => "neumann",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BoundaryTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dirichlet" => Ok(BoundaryTag::Dirichlet),
            "neumann" => Ok(BoundaryTag::Neumann),
            other => Err(format!("unknown boundary tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceKind {
    Interior { plus: usize, minus: usize },
    Boundary { element: usize, tag: BoundaryTag },
}

#[derive(Debug, Clone)]
pub struct Face {
    /// Endpoints, ordered as traversed counter-clockwise by the first owner.
    pub a: Point,
    pub b: Point,
    /// Mesh vertex indices of `a` and `b`.
    pub vertex_ids: (usize, usize),
    pub normal: Point,
    pub length: f64,
    pub kind: FaceKind,
}

impl Face {
    pub fn midpoint(&self) -> Point {
        [0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1])]
    }

    pub fn is_interior(&self) -> bool {
        matches!(self.kind, FaceKind::Interior { .. })
    }

    /// Interior and Dirichlet faces carry penalty and consistency terms.
    pub fn is_penalized(&self) -> bool {
        !matches!(
            self.kind,
            FaceKind::Boundary {
                tag: BoundaryTag::Neumann,
                ..
            }
        )
    }

    /// The element on the `+` side (the only side on the boundary).
    pub fn owner(&self) -> usize {
        match self.kind {
            FaceKind::Interior { plus, .. } => plus,
            FaceKind::Boundary { element, .. } => element,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Element {
    pub vertices: Vec<Point>,
    /// Indices into the mesh vertex table, parallel to `vertices`.
    pub vertex_ids: Vec<usize>,
    pub label: i32,
    pub area: f64,
    pub diameter: f64,
    pub centroid: Point,
    pub bbox: (Point, Point),
    pub faces: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PolyMesh {
    pub vertices: Vec<Point>,
    pub elements: Vec<Element>,
    pub faces: Vec<Face>,
}

impl PolyMesh {
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces.iter().enumerate().filter(|(_, f)| f.is_interior())
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces.iter().enumerate().filter(|(_, f)| !f.is_interior())
    }

    /// Largest element diameter.
    pub fn h_max(&self) -> f64 {
        self.elements.iter().map(|e| e.diameter).fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    /// Distinct labels in ascending order.
    pub fn labels(&self) -> Vec<i32> {
        let mut l: Vec<i32> = self.elements.iter().map(|e| e.label).collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// Re-tag every boundary face with `rule(midpoint, outward normal)`.
    pub fn retag_boundary(&mut self, rule: impl Fn(Point, Point) -> BoundaryTag) {
        for f in &mut self.faces {
            if let FaceKind::Boundary { element, .. } = f.kind {
                let tag = rule(f.midpoint(), f.normal);
                f.kind = FaceKind::Boundary { element, tag };
            }
        }
    }

    /// Element sharing face `face` with `element`, if any.
    pub fn neighbor(&self, element: usize, face: usize) -> Option<usize> {
        match self.faces[face].kind {
            FaceKind::Interior { plus, minus } if plus == element => Some(minus),
            FaceKind::Interior { plus, minus } if minus == element => Some(plus),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2x2() -> PolyMesh {
        let mut v = Vec::new();
        for j in 0..3 {
            for i in 0..3 {
                v.push([i as f64, j as f64]);
            }
        }
        let q = |i: usize, j: usize| vec![j * 3 + i, j * 3 + i + 1, (j + 1) * 3 + i + 1, (j + 1) * 3 + i];
        let raw = RawMesh {
            vertices: v,
            polygons: vec![q(0, 0), q(1, 0), q(0, 1), q(1, 1)],
            labels: vec![0; 4],
            boundary_tags: vec![],
            default_tag: Some(BoundaryTag::Dirichlet),
        };
        build_poly_mesh(&raw).unwrap()
    }

    #[test]
    fn two_by_two_grid_face_counts() {
        let m = grid2x2();
        assert_eq!(m.interior_faces().count(), 4);
        assert_eq!(m.boundary_faces().count(), 8);
    }

    #[test]
    fn retagging_changes_only_boundary() {
        let mut m = grid2x2();
        m.retag_boundary(|mid, _| if mid[0] < 1e-12 { BoundaryTag::Dirichlet } else { BoundaryTag::Neumann });
        let dir = m
            .boundary_faces()
            .filter(|(_, f)| matches!(f.kind, FaceKind::Boundary { tag: BoundaryTag::Dirichlet, .. }))
            .count();
        assert_eq!(dir, 2);
        assert_eq!(m.interior_faces().count(), 4);
    }

    #[test]
    fn neighbor_lookup_is_symmetric() {
        let m = grid2x2();
        for (fi, f) in m.interior_faces() {
            if let FaceKind::Interior { plus, minus } = f.kind {
                assert_eq!(m.neighbor(plus, fi), Some(minus));
                assert_eq!(m.neighbor(minus, fi), Some(plus));
            }
        }
    }
}
