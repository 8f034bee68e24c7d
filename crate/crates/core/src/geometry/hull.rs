use std::f64::consts::FRAC_PI_2;

use super::polygon::Point;

/// Convex hull by the monotone-chain method: counter-clockwise, no repeated or
/// collinear vertices, starting from the lowest-then-leftmost point.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: Point, a: Point, b: Point| a.sub(o).cross(b.sub(o));
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Minimum-area enclosing rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Point,
    /// Longer side.
    pub length: f64,
    /// Shorter side.
    pub width: f64,
    /// Direction of one side, folded into `[0, π/2)`.
    pub angle: f64,
}

impl OrientedBox {
    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// `length / width`, at least 1.
    pub fn elongation(&self) -> f64 {
        self.length / self.width
    }
}

/// Rotating calipers over the hull edge directions. Ties on area (acute
/// triangles always tie) go to the less elongated box, then to the smaller
/// folded angle.
///
/// `hull` must be a counter-clockwise convex polygon such as the output of
/// [`convex_hull`] with at least 3 vertices.
pub fn min_area_rectangle(hull: &[Point]) -> Option<OrientedBox> {
    let n = hull.len();
    if n < 3 {
        return None;
    }
    let o = hull[0];
    let h: Vec<Point> = hull.iter().map(|p| p.sub(o)).collect();
    let at = |i: usize| h[i % n];

    let dir = |i: usize| {
        let e = at(i + 1).sub(at(i));
        e.scale(1.0 / e.dot(e).sqrt())
    };

    // Caliper indices: far end along the edge, farthest from the edge, near end.
    let u0 = dir(0);
    let v0 = Point::new(-u0.y, u0.x);
    let argmax =
        |f: &dyn Fn(Point) -> f64| (0..n).max_by(|&a, &b| f(h[a]).total_cmp(&f(h[b]))).unwrap();
    let mut right = argmax(&|p| p.dot(u0));
    let mut top = argmax(&|p| p.dot(v0));
    let mut left = argmax(&|p| -p.dot(u0));

    let mut best: Option<(f64, OrientedBox)> = None;
    for i in 0..n {
        let u = dir(i);
        let v = Point::new(-u.y, u.x);
        for _ in 0..n {
            if at(right + 1).dot(u) > at(right).dot(u) {
                right += 1;
            } else {
                break;
            }
        }
        for _ in 0..n {
            if at(top + 1).dot(v) > at(top).dot(v) {
                top += 1;
            } else {
                break;
            }
        }
        for _ in 0..n {
            if at(left + 1).dot(u) < at(left).dot(u) {
                left += 1;
            } else {
                break;
            }
        }
        let base = at(i);
        let min_u = at(left).dot(u);
        let max_u = at(right).dot(u);
        let base_v = base.dot(v);
        let max_v = at(top).dot(v);
        let extent_u = max_u - min_u;
        let extent_v = max_v - base_v;
        let area = extent_u * extent_v;

        let mut angle = u.y.atan2(u.x).rem_euclid(FRAC_PI_2);
        if FRAC_PI_2 - angle < 1e-12 {
            angle = 0.0;
        }
        let mid_u = 0.5 * (min_u + max_u);
        let mid_v = 0.5 * (base_v + max_v);
        let center = u.scale(mid_u).add(v.scale(mid_v)).add(o);
        let candidate = OrientedBox {
            center,
            length: extent_u.max(extent_v),
            width: extent_u.min(extent_v),
            angle,
        };
        let better = match &best {
            None => true,
            Some((a, b)) => {
                let scale = a.abs().max(area.abs()).max(f64::MIN_POSITIVE);
                let rel = (area - a) / scale;
                if rel.abs() > 1e-12 {
                    rel < 0.0
                } else {
                    let (e, be) = (candidate.elongation(), b.elongation());
                    if (e - be).abs() > 1e-12 * be {
                        e < be
                    } else {
                        angle < b.angle
                    }
                }
            }
        };
        if better {
            best = Some((area, candidate));
        }
    }
    best.map(|(_, b)| b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(c: &[(f64, f64)]) -> Vec<Point> {
        c.iter().map(|&p| p.into()).collect()
    }

    #[test]
    fn hull_drops_interior_and_collinear_points() {
        let h = convex_hull(&pts(&[
            (0.0, 0.0),
            (1.0, 0.0),
            (2.0, 0.0),
            (2.0, 2.0),
            (1.0, 1.0),
            (0.0, 2.0),
        ]));
        assert_eq!(h, pts(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]));
    }

    #[test]
    fn rectangle_box_is_itself() {
        let h = convex_hull(&pts(&[(0.0, 0.0), (4.0, 0.0), (4.0, 1.0), (0.0, 1.0)]));
        let b = min_area_rectangle(&h).unwrap();
        assert!((b.length - 4.0).abs() < 1e-12);
        assert!((b.width - 1.0).abs() < 1e-12);
        assert!((b.elongation() - 4.0).abs() < 1e-12);
        assert_eq!(b.angle, 0.0);
        assert!((b.center.x - 2.0).abs() < 1e-12 && (b.center.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rotated_rectangle_box_matches() {
        let (s, c) = 0.3f64.sin_cos();
        let rect = pts(&[(0.0, 0.0), (3.0, 0.0), (3.0, 1.0), (0.0, 1.0)]);
        let rot: Vec<Point> = rect
            .iter()
            .map(|p| Point::new(c * p.x - s * p.y, s * p.x + c * p.y))
            .collect();
        let b = min_area_rectangle(&convex_hull(&rot)).unwrap();
        assert!((b.area() - 3.0).abs() < 1e-9);
        assert!((b.elongation() - 3.0).abs() < 1e-9);
        assert!((b.angle - 0.3).abs() < 1e-9);
    }

    #[test]
    fn equal_area_boxes_prefer_the_squarer_one() {
        // every edge-aligned box of an acute triangle has twice its area
        let tri = pts(&[(0.0, 0.0), (4.0, 0.0), (1.5, 3.0)]);
        let b = min_area_rectangle(&convex_hull(&tri)).unwrap();
        let (s, c) = 1.1f64.sin_cos();
        let rot: Vec<Point> = tri
            .iter()
            .map(|p| Point::new(c * p.x - s * p.y, s * p.x + c * p.y))
            .collect();
        let r = min_area_rectangle(&convex_hull(&rot)).unwrap();
        assert!((b.elongation() - r.elongation()).abs() < 1e-9);
        assert!((b.area() - 12.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_hull_has_no_box() {
        assert!(min_area_rectangle(&pts(&[(0.0, 0.0), (1.0, 0.0)])).is_none());
    }
}
