//! Seeded, Lloyd-relaxed bounded Voronoi meshes of a rectangle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::geometry::{self, Point};
use super::{build_poly_mesh, BoundaryTag, PolyMesh, RawMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Rect::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn corners(&self) -> Vec<Point> {
        vec![
            [self.x0, self.y0],
            [self.x1, self.y0],
            [self.x1, self.y1],
            [self.x0, self.y1],
        ]
    }
}

/// Generate an `n`-cell Voronoi mesh of `domain`, relaxing the seeds with
/// `lloyd_iters` centroid iterations. Every boundary face is tagged Dirichlet.
pub fn generate_voronoi(n: usize, domain: Rect, seed: u64, lloyd_iters: usize) -> Result<PolyMesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("element count must be at least 1".into()));
    }
    if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) || !domain.area().is_finite() {
        return Err(Error::DegenerateDomain(format!(
            "rectangle [{}, {}] x [{}, {}] has no positive area",
            domain.x0, domain.x1, domain.y0, domain.y1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds: Vec<Point> = (0..n)
        .map(|_| {
            [
                rng.gen_range(domain.x0..domain.x1),
                rng.gen_range(domain.y0..domain.y1),
            ]
        })
        .collect();

    for _ in 0..lloyd_iters {
        let cells = voronoi_cells(&seeds, domain)?;
        seeds = cells.iter().map(|c| geometry::centroid(c)).collect();
    }
    let cells = voronoi_cells(&seeds, domain)?;

    let mut raw = RawMesh {
        default_tag: Some(BoundaryTag::Dirichlet),
        labels: vec![0; n],
        ..Default::default()
    };
    for cell in cells {
        let start = raw.vertices.len();
        raw.polygons.push((start..start + cell.len()).collect());
        raw.vertices.extend(cell);
    }
    build_poly_mesh(&raw)
}

/// Bounded Voronoi cells by successive half-plane clipping of the domain.
fn voronoi_cells(seeds: &[Point], domain: Rect) -> Result<Vec<Vec<Point>>> {
    let n = seeds.len();
    let grid = SeedGrid::new(seeds, domain);
    let tiny = 1e-14 * domain.area() / n as f64;
    let mut cells = Vec::with_capacity(n);
    for (i, &s) in seeds.iter().enumerate() {
        let mut cell = domain.corners();
        let mut ring = 0usize;
        loop {
            let mut cand = grid.ring(s, ring);
            cand.retain(|&j| j != i);
            cand.sort_by(|&a, &b| {
                let da = geometry::dist(seeds[a], s);
                let db = geometry::dist(seeds[b], s);
                da.total_cmp(&db).then(a.cmp(&b))
            });
            for j in cand {
                if seeds[j] == s {
                    // coincident seeds: the later one gets nothing
                    if j < i {
                        cell.clear();
                        break;
                    }
                    continue;
                }
                cell = clip(&cell, s, seeds[j]);
                if cell.is_empty() {
                    break;
                }
            }
            if cell.is_empty() {
                break;
            }
            let radius = cell.iter().map(|&p| geometry::dist(p, s)).fold(0.0, f64::max);
            // Seeds beyond this ring are at least `ring * cell` away.
            let reach = ring as f64 * grid.cell;
            if reach > 2.0 * radius || ring > grid.nx.max(grid.ny) {
                break;
            }
            ring += 1;
        }
        let area = geometry::signed_area(&cell);
        if cell.len() < 3 || area <= tiny {
            return Err(Error::CellCollapse {
                index: i,
                x: s[0],
                y: s[1],
            });
        }
        cells.push(cell);
    }
    Ok(cells)
}

/// Keep the part of `poly` closer to `s` than to `t`.
fn clip(poly: &[Point], s: Point, t: Point) -> Vec<Point> {
    let d = geometry::sub(t, s);
    let m = [0.5 * (s[0] + t[0]), 0.5 * (s[1] + t[1])];
    let side = |p: Point| geometry::dot(geometry::sub(p, m), d);
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let (sa, sb) = (side(a), side(b));
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let w = sa / (sa - sb);
            out.push([a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]);
        }
    }
    out
}

struct SeedGrid {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl SeedGrid {
    fn new(seeds: &[Point], domain: Rect) -> Self {
        let cell = (domain.area() / seeds.len() as f64).sqrt();
        let nx = (((domain.x1 - domain.x0) / cell).ceil() as usize).max(1);
        let ny = (((domain.y1 - domain.y0) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let mut g = SeedGrid {
            x0: domain.x0,
            y0: domain.y0,
            cell,
            nx,
            ny,
            buckets: Vec::new(),
        };
        for (i, &p) in seeds.iter().enumerate() {
            let (cx, cy) = g.coords(p);
            buckets[cy * nx + cx].push(i);
        }
        g.buckets = buckets;
        g
    }

    fn coords(&self, p: Point) -> (usize, usize) {
        let cx = ((p[0] - self.x0) / self.cell).floor().max(0.0) as usize;
        let cy = ((p[1] - self.y0) / self.cell).floor().max(0.0) as usize;
        (cx.min(self.nx - 1), cy.min(self.ny - 1))
    }

    /// Seeds in the square ring of cells at Chebyshev distance `r` from `p`'s cell.
    fn ring(&self, p: Point, r: usize) -> Vec<usize> {
        let (cx, cy) = self.coords(p);
        let (cx, cy, r) = (cx as i64, cy as i64, r as i64);
        let mut out = Vec::new();
        for gy in cy - r..=cy + r {
            for gx in cx - r..=cx + r {
                if (gx - cx).abs() != r && (gy - cy).abs() != r {
                    continue;
                }
                if gx < 0 || gy < 0 || gx >= self.nx as i64 || gy >= self.ny as i64 {
                    continue;
                }
                out.extend_from_slice(&self.buckets[gy as usize * self.nx + gx as usize]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::FaceKind;

    #[test]
    fn single_cell_is_the_domain() {
        let m = generate_voronoi(1, Rect::unit(), 0, 10).unwrap();
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.boundary_faces().count(), 4);
        assert_eq!(m.interior_faces().count(), 0);
        assert!((m.elements[0].area - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thirty_cells_tile_the_square() {
        let m = generate_voronoi(30, Rect::unit(), 42, 100).unwrap();
        assert_eq!(m.num_elements(), 30);
        assert!((m.total_area() - 1.0).abs() < 1e-10);
        assert!(m.boundary_faces().all(|(_, f)| matches!(
            f.kind,
            FaceKind::Boundary {
                tag: BoundaryTag::Dirichlet,
                ..
            }
        )));
    }

    #[test]
    fn generation_is_bit_deterministic() {
        let a = generate_voronoi(50, Rect::new(0.0, 5.0, 0.0, 1.0), 7, 20).unwrap();
        let b = generate_voronoi(50, Rect::new(0.0, 5.0, 0.0, 1.0), 7, 20).unwrap();
        assert_eq!(a.vertices.len(), b.vertices.len());
        for (p, q) in a.vertices.iter().zip(&b.vertices) {
            assert_eq!(p[0].to_bits(), q[0].to_bits());
            assert_eq!(p[1].to_bits(), q[1].to_bits());
        }
    }

    #[test]
    fn degenerate_domain_is_rejected() {
        let err = generate_voronoi(4, Rect::new(0.0, 0.0, 0.0, 1.0), 1, 0).unwrap_err();
        assert!(matches!(err, Error::DegenerateDomain(_)));
    }

    #[test]
    fn duplicate_seeds_collapse() {
        let seeds = vec![[0.3, 0.3], [0.3, 0.3], [0.7, 0.7]];
        let err = voronoi_cells(&seeds, Rect::unit()).unwrap_err();
        assert!(matches!(err, Error::CellCollapse { .. }), "{err}");
    }
}
