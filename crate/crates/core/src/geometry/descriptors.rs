use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::hull::{convex_hull, min_area_rectangle};
use super::polygon::{ring_signed_area, segment_foot, Point, Polygon};
use super::GeometryError;

/// Number of signature samples used for the geometry attributes.
pub const SIGNATURE_SAMPLES: usize = 20;

/// Shape attributes of one polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptors {
    /// Exterior area minus hole areas, m².
    pub surface: f64,
    /// `area / area(convex hull)`.
    pub convexity: f64,
    /// `4π·area / perimeter²`, exterior perimeter only.
    pub compactness: f64,
    /// Long over short side of the minimum-area oriented bounding box.
    pub elongation: f64,
    pub hole_count: usize,
    /// Perimeter-normalized centroid distances, see [`polygonal_signature`].
    pub signature: Vec<f64>,
}

impl ShapeDescriptors {
    /// Names of the flattened attribute vector returned by [`ShapeDescriptors::to_vec`].
    pub fn attribute_names(samples: usize) -> Vec<String> {
        let mut names: Vec<String> = ["surface", "convexity", "compactness", "elongation", "holes"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        names.extend((0..samples).map(|i| format!("signature_{i:02}")));
        names
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![
            self.surface,
            self.convexity,
            self.compactness,
            self.elongation,
            self.hole_count as f64,
        ];
        v.extend_from_slice(&self.signature);
        v
    }
}

/// Computes every shape attribute, with a 20-sample signature.
pub fn shape_descriptors(p: &Polygon) -> Result<ShapeDescriptors, GeometryError> {
    let surface = p.area();
    if surface <= 0.0 || p.exterior().len() < 3 {
        return Err(GeometryError::ZeroArea {
            id: p.id().to_string(),
        });
    }
    let hull = convex_hull(p.exterior());
    let hull_area = ring_signed_area(&hull);
    let perimeter = p.perimeter();
    let obb = min_area_rectangle(&hull).ok_or_else(|| GeometryError::ZeroArea {
        id: p.id().to_string(),
    })?;
    Ok(ShapeDescriptors {
        surface,
        convexity: (surface / hull_area).min(1.0),
        compactness: 4.0 * PI * surface / (perimeter * perimeter),
        elongation: obb.elongation(),
        hole_count: p.interiors().len(),
        signature: polygonal_signature(p, SIGNATURE_SAMPLES)?,
    })
}

/// Distances from the area centroid to `n_samples` points spaced at equal arc
/// length along the exterior ring, divided by the perimeter.
///
/// Sample 0 is the boundary point closest to the centroid; the following
/// samples proceed clockwise.
pub fn polygonal_signature(p: &Polygon, n_samples: usize) -> Result<Vec<f64>, GeometryError> {
    if n_samples < 3 {
        return Err(GeometryError::TooFewSamples(n_samples));
    }
    if p.area() <= 0.0 {
        return Err(GeometryError::ZeroArea {
            id: p.id().to_string(),
        });
    }
    let center = p.centroid();
    // Exterior is stored counter-clockwise; walk it backwards.
    let ring: Vec<Point> = p.exterior().iter().rev().copied().collect();
    let n = ring.len();
    let lengths: Vec<f64> = (0..n)
        .map(|i| ring[i].distance(ring[(i + 1) % n]))
        .collect();
    let perimeter: f64 = lengths.iter().sum();

    let mut start_arc = 0.0;
    let mut best = f64::INFINITY;
    let mut arc = 0.0;
    for i in 0..n {
        let (d2, t) = segment_foot(center, ring[i], ring[(i + 1) % n]);
        if d2 < best {
            best = d2;
            start_arc = arc + t * lengths[i];
        }
        arc += lengths[i];
    }

    let step = perimeter / n_samples as f64;
    let mut out = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let s = (start_arc + k as f64 * step) % perimeter;
        let pt = point_at_arc(&ring, &lengths, s);
        out.push(pt.distance(center) / perimeter);
    }
    Ok(out)
}

fn point_at_arc(ring: &[Point], lengths: &[f64], mut s: f64) -> Point {
    let n = ring.len();
    for i in 0..n {
        if s <= lengths[i] || i == n - 1 {
            let t = if lengths[i] > 0.0 {
                (s / lengths[i]).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            return a.add(b.sub(a).scale(t));
        }
        s -= lengths[i];
    }
    unreachable!("ring has at least three vertices")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[(f64, f64)]) -> Polygon {
        Polygon::from_coords("p", c).unwrap()
    }

    #[test]
    fn unit_square() {
        let d =
            shape_descriptors(&poly(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(d.surface, 1.0);
        assert_eq!(d.convexity, 1.0);
        assert!((d.compactness - PI / 4.0).abs() < 1e-12);
        assert!((d.elongation - 1.0).abs() < 1e-12);
        assert_eq!(d.hole_count, 0);
        assert_eq!(d.signature.len(), SIGNATURE_SAMPLES);
        // starts at an edge midpoint, half a side away from the center
        assert!((d.signature[0] - 0.5 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn four_by_one_rectangle() {
        let d =
            shape_descriptors(&poly(&[(0.0, 0.0), (4.0, 0.0), (4.0, 1.0), (0.0, 1.0)])).unwrap();
        assert!((d.elongation - 4.0).abs() < 1e-12);
        assert_eq!(d.convexity, 1.0);
    }

    #[test]
    fn signature_goes_clockwise() {
        // Trapezoid whose closest boundary point is the middle of the bottom
        // edge; clockwise from there heads towards the lower-left corner.
        let p = poly(&[(0.0, 0.0), (10.0, 0.0), (7.0, 4.0), (3.0, 4.0)]);
        let s = polygonal_signature(&p, 40).unwrap();
        let c = p.centroid();
        let perim = p.perimeter();
        let step = perim / 40.0;
        let foot_x = c.x;
        // next sample is `step` further towards x = 0 along the bottom edge
        let expected = Point::new(foot_x - step, 0.0).distance(c) / perim;
        assert!((s[1] - expected).abs() < 1e-12, "{} vs {}", s[1], expected);
    }

    #[test]
    fn too_few_samples_rejected() {
        let p = poly(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        assert_eq!(
            polygonal_signature(&p, 2),
            Err(GeometryError::TooFewSamples(2))
        );
    }
}
