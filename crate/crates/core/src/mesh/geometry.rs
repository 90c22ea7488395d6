//! Planar polygon helpers shared by the mesh builders and the quadrature code.

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

/// Signed area of a triangle, positive when counter-clockwise.
#[inline]
pub fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(sub(b, a), sub(c, a))
}

/// Signed area by the shoelace formula.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

/// Area centroid. Falls back to the vertex mean for degenerate input.
pub fn centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    let area = signed_area(poly);
    if area.abs() < f64::MIN_POSITIVE * 1e10 {
        let (sx, sy) = poly.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        return [sx / n as f64, sy / n as f64];
    }
    // Shift to the first vertex to limit cancellation on far-from-origin polygons.
    let o = poly[0];
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let a = sub(poly[i], o);
        let b = sub(poly[(i + 1) % n], o);
        let w = a[0] * b[1] - b[0] * a[1];
        cx += (a[0] + b[0]) * w;
        cy += (a[1] + b[1]) * w;
    }
    [o[0] + cx / (6.0 * area), o[1] + cy / (6.0 * area)]
}

/// Largest vertex-to-vertex distance.
pub fn diameter(poly: &[Point]) -> f64 {
    let mut h: f64 = 0.0;
    for (i, a) in poly.iter().enumerate() {
        for b in &poly[i + 1..] {
            h = h.max(dist(*a, *b));
        }
    }
    h
}

pub fn perimeter(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| dist(poly[i], poly[(i + 1) % n])).sum()
}

/// Axis-aligned bounding box as `(min, max)`.
pub fn bounding_box(poly: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// True when no two non-adjacent edges intersect.
pub fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        for j in i + 1..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let c = poly[j];
            let d = poly[(j + 1) % n];
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(sub(b, a), sub(c, a));
    let d2 = cross(sub(b, a), sub(d, a));
    let d3 = cross(sub(d, c), sub(a, c));
    let d4 = cross(sub(d, c), sub(b, c));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point, q: Point, r: Point, o: f64| {
        o == 0.0
            && r[0] >= p[0].min(q[0])
            && r[0] <= p[0].max(q[0])
            && r[1] >= p[1].min(q[1])
            && r[1] <= p[1].max(q[1])
    };
    on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4)
}

/// Distance from `p` to segment `ab` together with the projection parameter.
pub fn point_segment(p: Point, a: Point, b: Point) -> (f64, f64) {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 { dot(sub(p, a), ab) / len2 } else { 0.0 };
    let tc = t.clamp(0.0, 1.0);
    let q = [a[0] + tc * ab[0], a[1] + tc * ab[1]];
    (dist(p, q), t)
}

/// Triangulate a simple counter-clockwise polygon.
///
/// Uses a fan from the area centroid when every fan triangle is positively
/// oriented, otherwise ear clipping. Returns vertex triples in coordinates.
pub fn triangulate(poly: &[Point]) -> Option<Vec<[Point; 3]>> {
    let area = signed_area(poly);
    if area <= 0.0 {
        return None;
    }
    let c = centroid(poly);
    let n = poly.len();
    let tol = 1e-12 * area;
    let fan_ok = (0..n).all(|i| triangle_area(c, poly[i], poly[(i + 1) % n]) > tol);
    if fan_ok {
        return Some((0..n).map(|i| [c, poly[i], poly[(i + 1) % n]]).collect());
    }
    ear_clip(poly)
}

fn ear_clip(poly: &[Point]) -> Option<Vec<[Point; 3]>> {
    let area = signed_area(poly);
    let tol = 1e-14 * area.abs();
    // Collinear vertices contribute nothing and confuse the ear test.
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    loop {
        let m = idx.len();
        if m <= 3 {
            break;
        }
        let pos = (0..m).find(|&k| {
            let a = poly[idx[(k + m - 1) % m]];
            let b = poly[idx[k]];
            let c = poly[idx[(k + 1) % m]];
            triangle_area(a, b, c).abs() <= tol
        });
        match pos {
            Some(k) => {
                idx.remove(k);
            }
            None => break,
        }
    }
    let mut out = Vec::with_capacity(idx.len().saturating_sub(2));
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let ia = idx[(k + m - 1) % m];
            let ib = idx[k];
            let ic = idx[(k + 1) % m];
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            let t_area = triangle_area(a, b, c);
            if t_area <= tol {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = poly[j];
                triangle_area(a, b, p) >= -tol
                    && triangle_area(b, c, p) >= -tol
                    && triangle_area(c, a, p) >= -tol
                    && p != a
                    && p != b
                    && p != c
            });
            if blocked {
                continue;
            }
            out.push([a, b, c]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            return None;
        }
    }
    if idx.len() == 3 {
        let t = [poly[idx[0]], poly[idx[1]], poly[idx[2]]];
        if triangle_area(t[0], t[1], t[2]) > 0.0 {
            out.push(t);
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_metrics() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(signed_area(&sq), 1.0);
        assert_eq!(centroid(&sq), [0.5, 0.5]);
        assert!((diameter(&sq) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(perimeter(&sq), 4.0);
        assert!(is_simple(&sq));
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bow = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(!is_simple(&bow));
    }

    #[test]
    fn ear_clipping_handles_nonconvex_l_shape() {
        // centroid of this L lies outside the polygon's kernel
        let l = [
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, 0.2],
            [0.2, 0.2],
            [0.2, 3.0],
            [0.0, 3.0],
        ];
        let tris = triangulate(&l).unwrap();
        let total: f64 = tris.iter().map(|t| triangle_area(t[0], t[1], t[2])).sum();
        assert!((total - signed_area(&l)).abs() < 1e-12);
        assert!(tris.iter().all(|t| triangle_area(t[0], t[1], t[2]) > 0.0));
    }

    #[test]
    fn collinear_vertices_are_tolerated() {
        let p = [
            [0.0, 0.0],
            [0.5, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
        ];
        let tris = triangulate(&p).unwrap();
        let total: f64 = tris.iter().map(|t| triangle_area(t[0], t[1], t[2])).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }
}
