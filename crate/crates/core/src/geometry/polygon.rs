use serde::{Deserialize, Serialize};

use super::GeometryError;

/// A point in a planar, metric coordinate system.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub(crate) fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub(crate) fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub(crate) fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub(crate) fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub(crate) fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn distance(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

/// Geometric tolerances shared by every geometry operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    /// Areas at or below this (m²) are treated as zero.
    pub area: f64,
    /// Lengths at or below this (m) are treated as zero; also the snapping distance.
    pub length: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            area: 1e-9,
            length: 1e-6,
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn of(points: &[Point]) -> BoundingBox {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        BoundingBox { min, max }
    }

    pub fn intersects(&self, other: &BoundingBox, margin: f64) -> bool {
        self.min.x <= other.max.x + margin
            && other.min.x <= self.max.x + margin
            && self.min.y <= other.max.y + margin
            && other.min.y <= self.max.y + margin
    }

    pub fn contains(&self, p: Point, margin: f64) -> bool {
        p.x >= self.min.x - margin
            && p.x <= self.max.x + margin
            && p.y >= self.min.y - margin
            && p.y <= self.max.y + margin
    }
}

/// Signed area of an open ring (positive when counter-clockwise).
pub fn ring_signed_area(ring: &[Point]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    // Coordinates are taken relative to the first vertex to limit cancellation
    // on georeferenced (large-offset) inputs.
    let o = ring[0];
    let mut twice = 0.0;
    for i in 0..ring.len() {
        let a = ring[i].sub(o);
        let b = ring[(i + 1) % ring.len()].sub(o);
        twice += a.cross(b);
    }
    twice / 2.0
}

pub(crate) fn ring_length(ring: &[Point]) -> f64 {
    (0..ring.len())
        .map(|i| ring[i].distance(ring[(i + 1) % ring.len()]))
        .sum()
}

pub(crate) fn ring_edges(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    (0..ring.len()).map(move |i| (ring[i], ring[(i + 1) % ring.len()]))
}

/// Squared distance from `p` to segment `a`-`b`, and the segment parameter of the foot.
pub(crate) fn segment_foot(p: Point, a: Point, b: Point) -> (f64, f64) {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    let t = if len2 == 0.0 {
        0.0
    } else {
        (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0)
    };
    let foot = a.add(ab.scale(t));
    let d = p.sub(foot);
    (d.dot(d), t)
}

pub(crate) fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    segment_foot(p, a, b).0.sqrt()
}

/// Even-odd crossing test against a single ring; boundary behaviour is unspecified.
pub(crate) fn ring_crossings(ring: &[Point], p: Point) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Whether closed segments `a`-`b` and `c`-`d` share at least one point, with a
/// snapping distance `eps`.
pub(crate) fn segments_touch(a: Point, b: Point, c: Point, d: Point, eps: f64) -> bool {
    if point_segment_distance(c, a, b) <= eps
        || point_segment_distance(d, a, b) <= eps
        || point_segment_distance(a, c, d) <= eps
        || point_segment_distance(b, c, d) <= eps
    {
        return true;
    }
    let d1 = (b.sub(a)).cross(c.sub(a));
    let d2 = (b.sub(a)).cross(d.sub(a));
    let d3 = (d.sub(c)).cross(a.sub(c));
    let d4 = (d.sub(c)).cross(b.sub(c));
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0
}

/// A validated planar polygon with optional holes and an optional class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    id: String,
    exterior: Vec<Point>,
    interiors: Vec<Vec<Point>>,
    label: Option<String>,
}

impl Polygon {
    /// Builds a polygon with the default tolerances.
    pub fn new(
        id: impl Into<String>,
        exterior: Vec<Point>,
        interiors: Vec<Vec<Point>>,
    ) -> Result<Self, GeometryError> {
        Self::with_tolerance(id, exterior, interiors, &Tolerance::default())
    }

    /// Normalizes and validates the rings. Self-intersecting rings are rejected,
    /// never repaired.
    pub fn with_tolerance(
        id: impl Into<String>,
        exterior: Vec<Point>,
        interiors: Vec<Vec<Point>>,
        tol: &Tolerance,
    ) -> Result<Self, GeometryError> {
        let id = id.into();
        let exterior = normalize_ring(&id, exterior, tol, true)?;
        let mut holes = Vec::with_capacity(interiors.len());
        for hole in interiors {
            holes.push(normalize_ring(&id, hole, tol, false)?);
        }
        for (h, hole) in holes.iter().enumerate() {
            if !hole.iter().all(|&p| {
                ring_crossings(&exterior, p) && ring_boundary_distance(&exterior, p) > tol.length
            }) {
                return Err(GeometryError::HoleOutside { id, hole: h });
            }
            if rings_touch(&exterior, hole, tol.length) {
                return Err(GeometryError::RingsCross {
                    id,
                    first: 0,
                    second: h + 1,
                });
            }
        }
        for i in 0..holes.len() {
            for j in i + 1..holes.len() {
                let nested = ring_crossings(&holes[i], holes[j][0])
                    || ring_crossings(&holes[j], holes[i][0]);
                if nested || rings_touch(&holes[i], &holes[j], tol.length) {
                    return Err(GeometryError::RingsCross {
                        id,
                        first: i + 1,
                        second: j + 1,
                    });
                }
            }
        }
        Ok(Polygon {
            id,
            exterior,
            interiors: holes,
            label: None,
        })
    }

    /// Convenience constructor for a hole-free polygon from coordinate pairs.
    pub fn from_coords(
        id: impl Into<String>,
        coords: &[(f64, f64)],
    ) -> Result<Self, GeometryError> {
        Self::new(id, coords.iter().map(|&c| c.into()).collect(), Vec::new())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn set_label(&mut self, label: Option<String>) {
        self.label = label;
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Exterior ring, counter-clockwise, without the closing vertex.
    pub fn exterior(&self) -> &[Point] {
        &self.exterior
    }

    /// Hole rings, clockwise, without closing vertices.
    pub fn interiors(&self) -> &[Vec<Point>] {
        &self.interiors
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.exterior.as_slice()).chain(self.interiors.iter().map(Vec::as_slice))
    }

    /// Area of the exterior ring minus hole areas.
    pub fn area(&self) -> f64 {
        self.rings().map(ring_signed_area).sum()
    }

    /// Length of the exterior ring only.
    pub fn perimeter(&self) -> f64 {
        ring_length(&self.exterior)
    }

    /// Area centroid, holes accounted for.
    pub fn centroid(&self) -> Point {
        let o = self.exterior[0];
        let (mut cx, mut cy, mut twice_area) = (0.0, 0.0, 0.0);
        for ring in self.rings() {
            for (a, b) in ring_edges(ring) {
                let (a, b) = (a.sub(o), b.sub(o));
                let w = a.cross(b);
                twice_area += w;
                cx += (a.x + b.x) * w;
                cy += (a.y + b.y) * w;
            }
        }
        Point::new(o.x + cx / (3.0 * twice_area), o.y + cy / (3.0 * twice_area))
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::of(&self.exterior)
    }

    /// Returns a copy with every vertex mapped through `f`. The result is
    /// re-validated, so the map must keep the polygon simple.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Result<Polygon, GeometryError> {
        let ext = self.exterior.iter().map(|&p| f(p)).collect();
        let holes = self
            .interiors
            .iter()
            .map(|r| r.iter().map(|&p| f(p)).collect())
            .collect();
        let mut out = Polygon::new(self.id.clone(), ext, holes)?;
        out.label = self.label.clone();
        Ok(out)
    }
}

fn ring_boundary_distance(ring: &[Point], p: Point) -> f64 {
    ring_edges(ring)
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

fn rings_touch(r1: &[Point], r2: &[Point], eps: f64) -> bool {
    let b1 = BoundingBox::of(r1);
    let b2 = BoundingBox::of(r2);
    if !b1.intersects(&b2, eps) {
        return false;
    }
    ring_edges(r1).any(|(a, b)| ring_edges(r2).any(|(c, d)| segments_touch(a, b, c, d, eps)))
}

fn normalize_ring(
    id: &str,
    ring: Vec<Point>,
    tol: &Tolerance,
    ccw: bool,
) -> Result<Vec<Point>, GeometryError> {
    if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(GeometryError::NonFinite { id: id.to_string() });
    }
    let mut out: Vec<Point> = Vec::with_capacity(ring.len());
    for p in ring {
        if out.last().is_none_or(|q| q.distance(p) > tol.length) {
            out.push(p);
        }
    }
    while out.len() > 1 && out[0].distance(*out.last().unwrap()) <= tol.length {
        out.pop();
    }
    if out.len() < 3 {
        return Err(GeometryError::TooFewVertices { id: id.to_string() });
    }
    let area = ring_signed_area(&out);
    if area.abs() <= tol.area {
        return Err(GeometryError::ZeroArea { id: id.to_string() });
    }
    if is_self_intersecting(&out, tol.length) {
        return Err(GeometryError::SelfIntersecting { id: id.to_string() });
    }
    if (area > 0.0) != ccw {
        out.reverse();
    }
    Ok(out)
}

fn is_self_intersecting(ring: &[Point], eps: f64) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        for j in i + 1..n {
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            let adjacent_next = j == i + 1;
            let adjacent_wrap = i == 0 && j == n - 1;
            if adjacent_next || adjacent_wrap {
                // Consecutive edges share one vertex; they must not fold back
                // onto each other.
                let (shared, p, q) = if adjacent_next { (b, a, d) } else { (a, b, c) };
                let u = p.sub(shared);
                let v = q.sub(shared);
                let longest = u.dot(u).max(v.dot(v)).sqrt();
                if u.cross(v).abs() <= eps * longest && u.dot(v) > 0.0 {
                    return true;
                }
                continue;
            }
            if segments_touch(a, b, c, d, eps) {
                return true;
            }
        }
    }
    false
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

    #[test]
    fn normalizes_orientation_and_closing_vertex() {
        let p = Polygon::from_coords(
            "a",
            &[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0)],
        )
        .unwrap();
        assert_eq!(p.exterior().len(), 4);
        assert!(ring_signed_area(p.exterior()) > 0.0);
        assert_eq!(p.area(), 1.0);
    }

    #[test]
    fn holes_are_clockwise_and_subtracted() {
        let hole = vec![
            Point::new(0.25, 0.25),
            Point::new(0.75, 0.25),
            Point::new(0.75, 0.75),
            Point::new(0.25, 0.75),
        ];
        let p = Polygon::new(
            "h",
            square("s", 0.0, 0.0, 1.0).exterior().to_vec(),
            vec![hole],
        )
        .unwrap();
        assert!(ring_signed_area(&p.interiors()[0]) < 0.0);
        assert!((p.area() - 0.75).abs() < 1e-12);
        let c = p.centroid();
        assert!((c.x - 0.5).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_rings() {
        assert!(matches!(
            Polygon::from_coords("d", &[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]),
            Err(GeometryError::TooFewVertices { .. })
        ));
        assert!(matches!(
            Polygon::from_coords("z", &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]),
            Err(GeometryError::ZeroArea { .. })
        ));
    }

    #[test]
    fn rejects_bow_tie() {
        let r = Polygon::from_coords("bow", &[(0.0, 0.0), (2.0, 2.0), (2.0, 0.0), (0.0, 1.0)]);
        assert!(matches!(r, Err(GeometryError::SelfIntersecting { .. })));
    }

    #[test]
    fn rejects_hole_outside_or_crossing() {
        let ext = square("s", 0.0, 0.0, 1.0).exterior().to_vec();
        let outside = square("o", 2.0, 2.0, 0.5).exterior().to_vec();
        assert!(matches!(
            Polygon::new("x", ext.clone(), vec![outside]),
            Err(GeometryError::HoleOutside { .. })
        ));
        let crossing = square("c", 0.5, 0.5, 1.0).exterior().to_vec();
        assert!(Polygon::new("x", ext, vec![crossing]).is_err());
    }

    #[test]
    fn centroid_of_triangle() {
        let t = Polygon::from_coords("t", &[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)]).unwrap();
        let c = t.centroid();
        assert!((c.x - 1.0).abs() < 1e-12 && (c.y - 1.0).abs() < 1e-12);
    }
}
