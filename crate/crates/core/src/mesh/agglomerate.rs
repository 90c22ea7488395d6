//! Triangle meshes and their label-segregated agglomeration into polygons.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::geometry::{self, Point};
use super::{build_poly_mesh, BoundaryTag, PolyMesh, RawMesh};
use crate::error::{Error, Result};

type EdgeKey = (usize, usize);

fn key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

/// Labeled, positively oriented triangulation with tagged boundary edges.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub labels: Vec<i32>,
    /// Keyed by `(min, max)` vertex index.
    pub boundary_tags: HashMap<EdgeKey, BoundaryTag>,
}

impl TriMesh {
    /// Validate and normalize: clockwise triangles are flipped, every boundary
    /// edge must be tagged and tags may only sit on boundary edges.
    pub fn new(
        vertices: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        labels: Vec<i32>,
        tags: impl IntoIterator<Item = (EdgeKey, BoundaryTag)>,
    ) -> Result<TriMesh> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        if labels.len() != triangles.len() {
            return Err(Error::InvalidMesh(format!(
                "{} labels for {} triangles",
                labels.len(),
                triangles.len()
            )));
        }
        for (k, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {k} references a missing vertex")));
            }
            let a = geometry::signed_area(&[vertices[t[0]], vertices[t[1]], vertices[t[2]]]);
            if !(a.abs() > 0.0) {
                return Err(Error::InvalidMesh(format!("triangle {k} is degenerate")));
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
        }
        let boundary_tags: HashMap<EdgeKey, BoundaryTag> =
            tags.into_iter().map(|((i, j), t)| (key(i, j), t)).collect();
        let mesh = TriMesh {
            vertices,
            triangles,
            labels,
            boundary_tags,
        };
        let owners = mesh.edge_owners()?;
        for (&k, tris) in &owners {
            if tris.len() == 1 && !mesh.boundary_tags.contains_key(&k) {
                let (a, b) = (mesh.vertices[k.0], mesh.vertices[k.1]);
                return Err(Error::UntaggedBoundary {
                    ax: a[0],
                    ay: a[1],
                    bx: b[0],
                    by: b[1],
                });
            }
        }
        if let Some(k) = mesh
            .boundary_tags
            .keys()
            .find(|k| owners.get(k).is_none_or(|t| t.len() != 1))
        {
            return Err(Error::InvalidMesh(format!(
                "edge ({}, {}) is tagged but is not a boundary edge",
                k.0, k.1
            )));
        }
        Ok(mesh)
    }

    fn edge_owners(&self) -> Result<HashMap<EdgeKey, Vec<usize>>> {
        let mut owners: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
        for (k, t) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let list = owners.entry(key(t[e], t[(e + 1) % 3])).or_default();
                list.push(k);
                if list.len() > 2 {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) is shared by more than two triangles",
                        t[e],
                        t[(e + 1) % 3]
                    )));
                }
            }
        }
        Ok(owners)
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        geometry::triangle_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Treat the triangles as polygons, without agglomeration.
    pub fn to_poly_mesh(&self) -> Result<PolyMesh> {
        build_poly_mesh(&self.raw(self.triangles.iter().map(|t| t.to_vec()).collect(), self.labels.clone()))
    }

    fn raw(&self, polygons: Vec<Vec<usize>>, labels: Vec<i32>) -> RawMesh {
        RawMesh {
            vertices: self.vertices.clone(),
            polygons,
            labels,
            boundary_tags: self.boundary_tags.iter().map(|(&k, &t)| (k, t)).collect(),
            default_tag: None,
        }
    }
}

/// Triangulated disk of radius `radius` with `rings` concentric rings; ring
/// `i` carries `6i` equally spaced points, giving `6 rings^2` triangles.
/// Triangles inside ring `inner_rings` get label 1, the rest label 0.
pub fn ring_disk(rings: usize, radius: f64, inner_rings: usize, tag: BoundaryTag) -> Result<TriMesh> {
    if rings == 0 || !(radius > 0.0) {
        return Err(Error::InvalidArgument("ring_disk needs rings >= 1 and radius > 0".into()));
    }
    let mut vertices = vec![[0.0, 0.0]];
    let mut start = vec![0usize];
    for i in 1..=rings {
        start.push(vertices.len());
        let r = radius * i as f64 / rings as f64;
        let n = 6 * i;
        for k in 0..n {
            let th = std::f64::consts::TAU * k as f64 / n as f64;
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut triangles = Vec::with_capacity(6 * rings * rings);
    let mut labels = Vec::with_capacity(6 * rings * rings);
    for i in 1..=rings {
        let label = i32::from(i <= inner_rings);
        let n = 6 * i;
        let outer = |k: usize| start[i] + k % n;
        if i == 1 {
            for k in 0..n {
                triangles.push([0, outer(k), outer(k + 1)]);
                labels.push(label);
            }
            continue;
        }
        let m = 6 * (i - 1);
        let inner = |k: usize| start[i - 1] + k % m;
        let (mut a, mut b) = (0usize, 0usize);
        while a < m || b < n {
            // Advance along whichever ring has the next point at the smaller angle.
            let next_a = (a + 1) as f64 / m as f64;
            let next_b = (b + 1) as f64 / n as f64;
            if a == m || (b < n && next_b <= next_a) {
                triangles.push([inner(a), outer(b), outer(b + 1)]);
                b += 1;
            } else {
                triangles.push([inner(a), outer(b), inner(a + 1)]);
                a += 1;
            }
            labels.push(label);
        }
    }
    let n = 6 * rings;
    let tags = (0..n).map(|k| ((start[rings] + k, start[rings] + (k + 1) % n), tag));
    TriMesh::new(vertices, triangles, labels, tags)
}

struct Graph {
    /// Neighbouring triangles with the same label.
    adj: Vec<Vec<usize>>,
    area: Vec<f64>,
    centroid: Vec<Point>,
}

/// Merge triangles into roughly `target` polygons. Aggregates never cross a
/// label interface and stay edge-connected and simply connected.
pub fn agglomerate(tri: &TriMesh, target: usize) -> Result<PolyMesh> {
    let mut distinct = tri.labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if target < distinct.len() {
        return Err(Error::InvalidArgument(format!(
            "target of {target} elements is below the {} distinct labels",
            distinct.len()
        )));
    }
    let owners = tri.edge_owners()?;
    let nt = tri.triangles.len();
    let mut adj = vec![Vec::new(); nt];
    let mut edges: Vec<(&EdgeKey, &Vec<usize>)> = owners.iter().collect();
    edges.sort_by_key(|(k, _)| **k);
    for (_, t) in edges {
        if let [a, b] = t[..] {
            if tri.labels[a] == tri.labels[b] {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
    }
    let g = Graph {
        adj,
        area: (0..nt).map(|t| tri.area(t)).collect(),
        centroid: (0..nt).map(|t| tri.centroid(t)).collect(),
    };

    let comps = components(&g);
    let total: f64 = g.area.iter().sum();
    let mut assign = vec![usize::MAX; nt];
    let mut n_agg = 0;
    for comp in &comps {
        let area: f64 = comp.iter().map(|&t| g.area[t]).sum();
        let k = ((target as f64 * area / total).round() as usize).clamp(1, comp.len());
        let local = partition(tri, &g, comp, k);
        for (&t, &a) in comp.iter().zip(&local) {
            assign[t] = n_agg + a;
        }
        n_agg += local.iter().max().map_or(0, |m| m + 1);
    }

    let mut members = vec![Vec::new(); n_agg];
    for (t, &a) in assign.iter().enumerate() {
        members[a].push(t);
    }
    let mut polygons = Vec::with_capacity(n_agg);
    let mut labels = Vec::with_capacity(n_agg);
    for tris in &members {
        polygons.push(boundary_loop(tri, tris)?);
        labels.push(tri.labels[tris[0]]);
    }
    build_poly_mesh(&tri.raw(polygons, labels))
}

fn components(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.adj.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            for &nb in &g.adj[comp[i]] {
                if !seen[nb] {
                    seen[nb] = true;
                    comp.push(nb);
                }
            }
            i += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

const LLOYD_PASSES: usize = 3;

/// Split one connected single-label component into about `k` aggregates.
/// Returns the local aggregate index of every triangle in `comp`.
fn partition(tri: &TriMesh, g: &Graph, comp: &[usize], k: usize) -> Vec<usize> {
    let pos: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut seeds = farthest_points(g, comp, k);
    let mut assign = grow(tri, g, comp, &pos, &seeds);
    for _ in 0..LLOYD_PASSES {
        let mut next = Vec::with_capacity(k);
        for a in 0..seeds.len() {
            let tris: Vec<usize> = comp
                .iter()
                .zip(&assign)
                .filter(|(_, &x)| x == a)
                .map(|(&t, _)| t)
                .collect();
            let w: f64 = tris.iter().map(|&t| g.area[t]).sum();
            let c = tris.iter().fold([0.0, 0.0], |acc, &t| {
                let (p, m) = (g.centroid[t], g.area[t] / w);
                [acc[0] + m * p[0], acc[1] + m * p[1]]
            });
            let best = tris
                .iter()
                .copied()
                .min_by(|&x, &y| {
                    geometry::dist(g.centroid[x], c)
                        .total_cmp(&geometry::dist(g.centroid[y], c))
                        .then(x.cmp(&y))
                })
                .expect("aggregates are non-empty");
            next.push(best);
        }
        next.sort_unstable();
        next.dedup();
        seeds = next;
        assign = grow(tri, g, comp, &pos, &seeds);
    }
    assign
}

fn farthest_points(g: &Graph, comp: &[usize], k: usize) -> Vec<usize> {
    let n = comp.len() as f64;
    let mean = comp.iter().fold([0.0, 0.0], |acc, &t| {
        [acc[0] + g.centroid[t][0] / n, acc[1] + g.centroid[t][1] / n]
    });
    let far = |from: &dyn Fn(usize) -> f64| {
        comp.iter()
            .copied()
            .max_by(|&x, &y| from(x).total_cmp(&from(y)).then(y.cmp(&x)))
            .expect("component is non-empty")
    };
    let mut seeds = vec![far(&|t| geometry::dist(g.centroid[t], mean))];
    let mut d: Vec<f64> = comp.iter().map(|&t| geometry::dist(g.centroid[t], g.centroid[seeds[0]])).collect();
    while seeds.len() < k {
        let (i, _) = d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("component is non-empty");
        let s = comp[i];
        seeds.push(s);
        for (dj, &t) in d.iter_mut().zip(comp) {
            *dj = dj.min(geometry::dist(g.centroid[t], g.centroid[s]));
        }
    }
    seeds
}

struct Aggregate {
    area: f64,
    seed: Point,
    verts: HashSet<usize>,
    frontier: BTreeSet<usize>,
    blocked: bool,
}

/// Area-balanced region growing from `seeds`; triangles that no aggregate can
/// absorb while staying a topological disk start new aggregates.
fn grow(tri: &TriMesh, g: &Graph, comp: &[usize], pos: &HashMap<usize, usize>, seeds: &[usize]) -> Vec<usize> {
    let mut assign = vec![usize::MAX; comp.len()];
    let mut aggs: Vec<Aggregate> = Vec::new();
    let add = |aggs: &mut Vec<Aggregate>, assign: &mut Vec<usize>, a: usize, t: usize| {
        assign[pos[&t]] = a;
        let agg = &mut aggs[a];
        agg.area += g.area[t];
        agg.verts.extend(tri.triangles[t]);
        agg.frontier.remove(&t);
        for &nb in &g.adj[t] {
            if assign[pos[&nb]] == usize::MAX {
                agg.frontier.insert(nb);
            }
        }
    };
    let open = |aggs: &mut Vec<Aggregate>, assign: &mut Vec<usize>, t: usize| {
        aggs.push(Aggregate {
            area: 0.0,
            seed: g.centroid[t],
            verts: HashSet::new(),
            frontier: BTreeSet::new(),
            blocked: false,
        });
        add(aggs, assign, aggs.len() - 1, t);
    };
    for &s in seeds {
        open(&mut aggs, &mut assign, s);
    }
    let mut remaining = comp.len() - seeds.len();
    while remaining > 0 {
        let pick = aggs
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.blocked)
            .min_by(|x, y| x.1.area.total_cmp(&y.1.area).then(x.0.cmp(&y.0)))
            .map(|(i, _)| i);
        let Some(a) = pick else {
            let t = comp
                .iter()
                .zip(&assign)
                .find(|(_, &x)| x == usize::MAX)
                .map(|(&t, _)| t)
                .expect("remaining triangles exist");
            open(&mut aggs, &mut assign, t);
            remaining -= 1;
            continue;
        };
        let agg = &aggs[a];
        let best = agg
            .frontier
            .iter()
            .copied()
            .filter(|&t| assign[pos[&t]] == usize::MAX && admissible(tri, g, pos, &assign, agg, a, t))
            .min_by(|&x, &y| {
                geometry::dist(g.centroid[x], agg.seed)
                    .total_cmp(&geometry::dist(g.centroid[y], agg.seed))
                    .then(x.cmp(&y))
            });
        match best {
            Some(t) => {
                add(&mut aggs, &mut assign, a, t);
                remaining -= 1;
            }
            None => aggs[a].blocked = true,
        }
    }
    assign
}

/// Adding `t` keeps the aggregate a disk: either it shares two or three
/// edges, or one edge and its opposite vertex is new.
fn admissible(
    tri: &TriMesh,
    g: &Graph,
    pos: &HashMap<usize, usize>,
    assign: &[usize],
    agg: &Aggregate,
    a: usize,
    t: usize,
) -> bool {
    let shared: Vec<usize> = g.adj[t].iter().copied().filter(|nb| assign[pos[nb]] == a).collect();
    match shared.len() {
        0 => false,
        1 => {
            let nb = tri.triangles[shared[0]];
            tri.triangles[t]
                .iter()
                .find(|v| !nb.contains(v))
                .is_some_and(|v| !agg.verts.contains(v))
        }
        _ => true,
    }
}

/// Counter-clockwise outer vertex loop of a set of triangles forming a disk.
fn boundary_loop(tri: &TriMesh, tris: &[usize]) -> Result<Vec<usize>> {
    let mut directed: HashSet<(usize, usize)> = HashSet::new();
    for &t in tris {
        let v = tri.triangles[t];
        for e in 0..3 {
            let (a, b) = (v[e], v[(e + 1) % 3]);
            if !directed.remove(&(b, a)) {
                directed.insert((a, b));
            }
        }
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    for &(a, b) in &directed {
        if next.insert(a, b).is_some() {
            return Err(Error::InvalidMesh(format!("aggregate boundary pinches at vertex {a}")));
        }
    }
    let start = *next.keys().min().expect("aggregate has a boundary");
    let mut lp = vec![start];
    let mut v = next[&start];
    while v != start {
        lp.push(v);
        v = next[&v];
        if lp.len() > directed.len() {
            break;
        }
    }
    if lp.len() != directed.len() {
        return Err(Error::InvalidMesh("aggregate is not simply connected".into()));
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::FaceKind;

    /// 2x2 squares, each cut along its diagonal; labels by column.
    fn eight_triangles(split: bool) -> TriMesh {
        let mut v = Vec::new();
        for j in 0..3 {
            for i in 0..3 {
                v.push([i as f64, j as f64]);
            }
        }
        let id = |i: usize, j: usize| j * 3 + i;
        let mut tris = Vec::new();
        let mut labels = Vec::new();
        for j in 0..2 {
            for i in 0..2 {
                tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                let l = if split { i as i32 } else { 0 };
                labels.extend([l, l]);
            }
        }
        let mut tags = Vec::new();
        for k in 0..2 {
            tags.push(((id(k, 0), id(k + 1, 0)), BoundaryTag::Dirichlet));
            tags.push(((id(k, 2), id(k + 1, 2)), BoundaryTag::Dirichlet));
            tags.push(((id(0, k), id(0, k + 1)), BoundaryTag::Dirichlet));
            tags.push(((id(2, k), id(2, k + 1)), BoundaryTag::Dirichlet));
        }
        TriMesh::new(v, tris, labels, tags).unwrap()
    }

    #[test]
    fn eight_triangles_into_two() {
        let tri = eight_triangles(false);
        let m = agglomerate(&tri, 2).unwrap();
        assert_eq!(m.num_elements(), 2);
        assert!((m.total_area() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn two_labels_give_the_label_regions() {
        let tri = eight_triangles(true);
        let m = agglomerate(&tri, 2).unwrap();
        assert_eq!(m.num_elements(), 2);
        for e in &m.elements {
            // each column region is a 1x2 rectangle
            assert!((e.area - 2.0).abs() < 1e-12);
            let xs: Vec<f64> = e.vertices.iter().map(|p| p[0]).collect();
            let (lo, hi) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(0.0, f64::max));
            assert_eq!((hi - lo), 1.0);
            assert_eq!(lo as i32, e.label);
        }
    }

    #[test]
    fn target_below_label_count_is_an_error() {
        let tri = eight_triangles(true);
        assert!(matches!(agglomerate(&tri, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ring_disk_counts_and_area() {
        let tri = ring_disk(5, 2.0, 2, BoundaryTag::Neumann).unwrap();
        assert_eq!(tri.triangles.len(), 150);
        assert_eq!(tri.boundary_tags.len(), 30);
        assert_eq!(tri.labels.iter().filter(|&&l| l == 1).count(), 24);
        let area: f64 = (0..tri.triangles.len()).map(|t| tri.area(t)).sum();
        // inscribed 30-gon
        let expected = 0.5 * 30.0 * 4.0 * (std::f64::consts::TAU / 30.0).sin();
        assert!((area - expected).abs() < 1e-12);
    }

    #[test]
    fn disk_agglomeration_respects_labels() {
        let tri = ring_disk(12, 1.0, 7, BoundaryTag::Neumann).unwrap();
        let m = agglomerate(&tri, 40).unwrap();
        let n = m.num_elements() as f64;
        assert!((36.0..=44.0).contains(&n), "{n} elements");
        let tri_area: f64 = (0..tri.triangles.len()).map(|t| tri.area(t)).sum();
        assert!((m.total_area() - tri_area).abs() < 1e-10 * tri_area);
        for (_, f) in m.boundary_faces() {
            assert!(matches!(f.kind, FaceKind::Boundary { tag: BoundaryTag::Neumann, .. }));
        }
    }

    #[test]
    fn untagged_triangle_boundary_is_rejected() {
        let r = TriMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![0],
            [((0, 1), BoundaryTag::Neumann)],
        );
        assert!(matches!(r, Err(Error::UntaggedBoundary { .. })));
    }
}
