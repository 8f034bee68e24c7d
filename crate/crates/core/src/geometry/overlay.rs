use serde::{Deserialize, Serialize};

use super::polygon::{
    point_segment_distance, ring_crossings, ring_edges, BoundingBox, Point, Polygon, Tolerance,
};

/// Whether `pt` lies in `p`: inside the exterior ring and outside every hole.
/// Boundary points count as inside.
pub fn contains_point(p: &Polygon, pt: Point) -> bool {
    contains_point_with(p, pt, &Tolerance::default())
}

pub(crate) fn contains_point_with(p: &Polygon, pt: Point, tol: &Tolerance) -> bool {
    if !p.bbox().contains(pt, tol.length) {
        return false;
    }
    if on_boundary(p, pt, tol.length) {
        return true;
    }
    strictly_inside(p, pt)
}

fn on_boundary(p: &Polygon, pt: Point, eps: f64) -> bool {
    p.rings()
        .any(|r| ring_edges(r).any(|(a, b)| point_segment_distance(pt, a, b) <= eps))
}

fn strictly_inside(p: &Polygon, pt: Point) -> bool {
    p.rings().fold(false, |acc, r| acc ^ ring_crossings(r, pt))
}

/// Area of the geometric intersection of `a` and `b`.
///
/// The intersection boundary is made of the parts of each polygon's boundary
/// that lie inside the other one, so the area follows from the shoelace sum
/// over those pieces without building the intersection polygon. Boundary
/// pieces shared by both polygons count once when the interiors lie on the
/// same side, and not at all otherwise.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    intersection_area_with(a, b, &Tolerance::default())
}

pub(crate) fn intersection_area_with(a: &Polygon, b: &Polygon, tol: &Tolerance) -> f64 {
    let (ba, bb) = (a.bbox(), b.bbox());
    if !ba.intersects(&bb, tol.length) {
        return 0.0;
    }
    // Shoelace terms are taken relative to a common origin; sorting the pair
    // makes the result independent of argument order.
    let (first, second) = if (a.id(), ba.min.x, ba.min.y) <= (b.id(), bb.min.x, bb.min.y) {
        (a, b)
    } else {
        (b, a)
    };
    let origin = Point::new(ba.min.x.min(bb.min.x), ba.min.y.min(bb.min.y));
    let twice = boundary_inside(first, second, true, origin, tol)
        + boundary_inside(second, first, false, origin, tol);
    (twice / 2.0).max(0.0)
}

/// Twice the shoelace contribution of the boundary of `p` lying inside `other`.
fn boundary_inside(
    p: &Polygon,
    other: &Polygon,
    keep_shared: bool,
    origin: Point,
    tol: &Tolerance,
) -> f64 {
    let eps = tol.length;
    let other_box = other.bbox();
    let other_edges: Vec<(Point, Point)> = other.rings().flat_map(ring_edges).collect();
    let mut twice = 0.0;
    let mut cuts: Vec<f64> = Vec::new();
    for ring in p.rings() {
        for (s, e) in ring_edges(ring) {
            let d = e.sub(s);
            let len2 = d.dot(d);
            if len2 == 0.0 {
                continue;
            }
            let edge_box = BoundingBox::of(&[s, e]);
            if !edge_box.intersects(&other_box, eps) {
                continue;
            }
            cuts.clear();
            cuts.push(0.0);
            cuts.push(1.0);
            for &(r, q) in &other_edges {
                if !edge_box.intersects(&BoundingBox::of(&[r, q]), eps) {
                    continue;
                }
                for x in [r, q] {
                    if point_segment_distance(x, s, e) <= eps {
                        cuts.push((x.sub(s).dot(d) / len2).clamp(0.0, 1.0));
                    }
                }
                if let Some(t) = proper_crossing(s, e, r, q) {
                    cuts.push(t);
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|x, y| (*x - *y).abs() * len2.sqrt() <= eps * 1e-3);
            for w in cuts.windows(2) {
                let (u, v) = (s.add(d.scale(w[0])), s.add(d.scale(w[1])));
                if u.distance(v) <= eps * 1e-3 {
                    continue;
                }
                let mid = u.add(v).scale(0.5);
                let include = match shared_direction(mid, d, &other_edges, eps) {
                    Some(same) => same && keep_shared,
                    None => strictly_inside(other, mid),
                };
                if include {
                    twice += u.sub(origin).cross(v.sub(origin));
                }
            }
        }
    }
    twice
}

/// If `mid` lies on an edge of `edges`, whether that edge runs the same way as `dir`.
fn shared_direction(mid: Point, dir: Point, edges: &[(Point, Point)], eps: f64) -> Option<bool> {
    edges
        .iter()
        .find(|(r, q)| point_segment_distance(mid, *r, *q) <= eps)
        .map(|(r, q)| q.sub(*r).dot(dir) > 0.0)
}

/// Parameter along `s`-`e` of a proper (interior) crossing with `r`-`q`.
fn proper_crossing(s: Point, e: Point, r: Point, q: Point) -> Option<f64> {
    let d = e.sub(s);
    let f = q.sub(r);
    let denom = d.cross(f);
    if denom == 0.0 {
        return None;
    }
    let w = r.sub(s);
    let t = w.cross(f) / denom;
    let u = w.cross(d) / denom;
    if t > 0.0 && t < 1.0 && u > 0.0 && u < 1.0 {
        Some(t)
    } else {
        None
    }
}

/// Uniform-grid bucket index over bounding boxes.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
    boxes: Vec<BoundingBox>,
}

impl SpatialIndex {
    pub fn new(boxes: Vec<BoundingBox>) -> Self {
        if boxes.is_empty() {
            return SpatialIndex {
                origin: Point::default(),
                cell: 1.0,
                nx: 1,
                ny: 1,
                buckets: vec![Vec::new()],
                boxes,
            };
        }
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut mean_extent = 0.0;
        for b in &boxes {
            min.x = min.x.min(b.min.x);
            min.y = min.y.min(b.min.y);
            max.x = max.x.max(b.max.x);
            max.y = max.y.max(b.max.y);
            mean_extent += (b.max.x - b.min.x).max(b.max.y - b.min.y);
        }
        mean_extent /= boxes.len() as f64;
        let span = (max.x - min.x).max(max.y - min.y).max(1e-9);
        let cell = mean_extent.max(span / 1024.0).max(1e-9);
        let nx = (((max.x - min.x) / cell).floor() as usize + 1).min(4096);
        let ny = (((max.y - min.y) / cell).floor() as usize + 1).min(4096);
        let mut idx = SpatialIndex {
            origin: min,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
            boxes: Vec::new(),
        };
        for (i, b) in boxes.iter().enumerate() {
            let (x0, y0, x1, y1) = idx.cell_range(b);
            for gy in y0..=y1 {
                for gx in x0..=x1 {
                    idx.buckets[gy * nx + gx].push(i);
                }
            }
        }
        idx.boxes = boxes;
        idx
    }

    fn cell_range(&self, b: &BoundingBox) -> (usize, usize, usize, usize) {
        let clampx =
            |v: f64| (((v - self.origin.x) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let clampy =
            |v: f64| (((v - self.origin.y) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        (
            clampx(b.min.x),
            clampy(b.min.y),
            clampx(b.max.x),
            clampy(b.max.y),
        )
    }

    /// Indices of boxes intersecting `query` (grown by `margin`), ascending.
    pub fn query(&self, query: &BoundingBox, margin: f64) -> Vec<usize> {
        if self.boxes.is_empty() {
            return Vec::new();
        }
        let grown = BoundingBox {
            min: Point::new(query.min.x - margin, query.min.y - margin),
            max: Point::new(query.max.x + margin, query.max.y + margin),
        };
        let (x0, y0, x1, y1) = self.cell_range(&grown);
        let mut out = Vec::new();
        for gy in y0..=y1 {
            for gx in x0..=x1 {
                out.extend(
                    self.buckets[gy * self.nx + gx]
                        .iter()
                        .copied()
                        .filter(|&i| self.boxes[i].intersects(&grown, 0.0)),
                );
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// A neighbor sharing a boundary of positive length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    /// Position of the neighbor in the input list.
    pub index: usize,
    /// Shared boundary length, m.
    pub shared_length: f64,
}

/// Perimeter-sharing neighborhoods of a polygon layer, aligned with the input order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Adjacency {
    pub ids: Vec<String>,
    pub neighbors: Vec<Vec<Neighbor>>,
    /// Pairs whose interiors overlap by more than the area tolerance.
    pub overlaps: Vec<(usize, usize)>,
}

impl Adjacency {
    /// Neighbor list of the polygon with id `id`, as `(neighbor id, shared length)`.
    pub fn by_id(&self, id: &str) -> Option<Vec<(&str, f64)>> {
        let i = self.ids.iter().position(|x| x == id)?;
        Some(
            self.neighbors[i]
                .iter()
                .map(|n| (self.ids[n.index].as_str(), n.shared_length))
                .collect(),
        )
    }
}

/// Neighbors of every polygon, weighted by shared boundary length.
///
/// Polygons touching only at points are not neighbors. Overlapping pairs are
/// tolerated and reported in [`Adjacency::overlaps`].
pub fn adjacency_weights(polygons: &[Polygon], tol: &Tolerance) -> Adjacency {
    use rayon::prelude::*;

    let boxes: Vec<BoundingBox> = polygons.iter().map(Polygon::bbox).collect();
    let index = SpatialIndex::new(boxes.clone());
    let pairs: Vec<(Vec<Neighbor>, Vec<(usize, usize)>)> = (0..polygons.len())
        .into_par_iter()
        .map(|i| {
            let mut nbrs = Vec::new();
            let mut overlaps = Vec::new();
            for j in index.query(&boxes[i], tol.length) {
                if j == i {
                    continue;
                }
                // Canonical argument order keeps the weight bit-identical on both sides.
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                let len = shared_boundary_length(&polygons[lo], &polygons[hi], tol.length);
                if len > tol.length {
                    nbrs.push(Neighbor {
                        index: j,
                        shared_length: len,
                    });
                }
                if i < j && intersection_area_with(&polygons[i], &polygons[j], tol) > tol.area {
                    overlaps.push((i, j));
                }
            }
            (nbrs, overlaps)
        })
        .collect();
    let mut adjacency = Adjacency {
        ids: polygons.iter().map(|p| p.id().to_string()).collect(),
        ..Default::default()
    };
    for (n, o) in pairs {
        adjacency.neighbors.push(n);
        adjacency.overlaps.extend(o);
    }
    if !adjacency.overlaps.is_empty() {
        log::warn!(
            "{} overlapping polygon pairs in the layer",
            adjacency.overlaps.len()
        );
    }
    adjacency
}

/// Total length of collinear overlap between the boundaries of `a` and `b`.
pub(crate) fn shared_boundary_length(a: &Polygon, b: &Polygon, eps: f64) -> f64 {
    let eb: Vec<(Point, Point)> = b.rings().flat_map(ring_edges).collect();
    let mut total = 0.0;
    for ra in a.rings() {
        for (s, e) in ring_edges(ra) {
            let d = e.sub(s);
            let len = d.dot(d).sqrt();
            if len <= eps {
                continue;
            }
            let u = d.scale(1.0 / len);
            for &(r, q) in &eb {
                if point_segment_distance(r, s, e).min(point_segment_distance(q, s, e)) > eps
                    && point_segment_distance(s, r, q).min(point_segment_distance(e, r, q)) > eps
                {
                    continue;
                }
                // both endpoints of the other edge must sit on the supporting line
                let off_r = u.cross(r.sub(s)).abs();
                let off_q = u.cross(q.sub(s)).abs();
                if off_r > eps || off_q > eps {
                    continue;
                }
                let (tr, tq) = (r.sub(s).dot(u), q.sub(s).dot(u));
                let lo = tr.min(tq).max(0.0);
                let hi = tr.max(tq).min(len);
                if hi > lo {
                    total += hi - lo;
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(id: &str, x0: f64, y0: f64, s: f64) -> Polygon {
        Polygon::from_coords(
            id,
            &[(x0, y0), (x0 + s, y0), (x0 + s, y0 + s), (x0, y0 + s)],
        )
        .unwrap()
    }

    fn holed() -> Polygon {
        let outer = square("o", 0.0, 0.0, 3.0).exterior().to_vec();
        let hole = square("h", 1.0, 1.0, 1.0).exterior().to_vec();
        Polygon::new("holed", outer, vec![hole]).unwrap()
    }

    #[test]
    fn point_containment() {
        let s = square("s", 0.0, 0.0, 1.0);
        assert!(contains_point(&s, Point::new(0.5, 0.5)));
        assert!(!contains_point(&s, Point::new(2.0, 2.0)));
        assert!(contains_point(&s, Point::new(1.0, 0.5)));
        assert!(contains_point(&s, Point::new(0.0, 0.0)));
        let h = holed();
        assert!(!contains_point(&h, Point::new(1.5, 1.5)));
        assert!(contains_point(&h, Point::new(0.5, 1.5)));
        assert!(contains_point(&h, Point::new(1.0, 1.5)));
    }

    #[test]
    fn intersection_closed_forms() {
        let a = square("a", 0.0, 0.0, 1.0);
        let b = square("b", 0.5, 0.0, 1.0);
        let far = square("far", 5.0, 5.0, 1.0);
        assert!((intersection_area(&a, &a) - 1.0).abs() < 1e-12);
        assert!((intersection_area(&a, &b) - 0.5).abs() < 1e-12);
        assert_eq!(intersection_area(&a, &b), intersection_area(&b, &a));
        assert_eq!(intersection_area(&a, &far), 0.0);
        let touching = square("t", 1.0, 0.0, 1.0);
        assert!(intersection_area(&a, &touching).abs() < 1e-12);
    }

    #[test]
    fn intersection_with_hole() {
        let h = holed();
        let inner = square("i", 1.0, 1.0, 1.0);
        assert!(intersection_area(&h, &inner).abs() < 1e-12);
        let cover = square("c", 0.0, 0.0, 3.0);
        assert!((intersection_area(&h, &cover) - 8.0).abs() < 1e-12);
        let straddle = square("st", 0.5, 0.5, 1.0);
        assert!((intersection_area(&h, &straddle) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn adjacency_closed_forms() {
        let tol = Tolerance::default();
        let strip = vec![
            square("a", 0.0, 0.0, 1.0),
            square("b", 1.0, 0.0, 1.0),
            square("c", 2.0, 0.0, 1.0),
        ];
        let adj = adjacency_weights(&strip, &tol);
        assert_eq!(adj.by_id("b").unwrap(), vec![("a", 1.0), ("c", 1.0)]);
        assert_eq!(adj.by_id("a").unwrap(), vec![("b", 1.0)]);
        assert_eq!(adj.by_id("c").unwrap(), vec![("b", 1.0)]);
        assert!(adj.overlaps.is_empty());

        let corner = vec![square("a", 0.0, 0.0, 1.0), square("d", 1.0, 1.0, 1.0)];
        let adj = adjacency_weights(&corner, &tol);
        assert!(adj.neighbors.iter().all(Vec::is_empty));
    }

    #[test]
    fn adjacency_handles_t_junctions() {
        // one big square next to two stacked half-height squares
        let big = square("big", 0.0, 0.0, 2.0);
        let top = square("top", 2.0, 1.0, 1.0);
        let bottom = square("bottom", 2.0, 0.0, 1.0);
        let adj = adjacency_weights(&[big, top, bottom], &Tolerance::default());
        assert_eq!(
            adj.by_id("big").unwrap(),
            vec![("top", 1.0), ("bottom", 1.0)]
        );
    }

    #[test]
    fn overlaps_are_flagged() {
        let adj = adjacency_weights(
            &[square("a", 0.0, 0.0, 1.0), square("b", 0.5, 0.0, 1.0)],
            &Tolerance::default(),
        );
        assert_eq!(adj.overlaps, vec![(0, 1)]);
    }

    #[test]
    fn index_query() {
        let boxes: Vec<BoundingBox> = (0..10)
            .map(|i| square("x", i as f64, 0.0, 1.0).bbox())
            .collect();
        let idx = SpatialIndex::new(boxes);
        let q = BoundingBox {
            min: Point::new(3.5, 0.2),
            max: Point::new(4.5, 0.4),
        };
        assert_eq!(idx.query(&q, 0.0), vec![3, 4]);
    }
}
