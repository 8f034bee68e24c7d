//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lufusion::evidence::{Frame, MassFunction};
use lufusion::geometry::{Point, Polygon};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

// ---- geometry -------------------------------------------------------------

pub type Ring = Vec<(f64, f64)>;

pub fn shoelace(ring: &[(f64, f64)]) -> f64 {
    let n = ring.len();
    let mut s = 0.0;
    for i in 0..n {
        let (x1, y1) = ring[i];
        let (x2, y2) = ring[(i + 1) % n];
        s += x1 * y2 - x2 * y1;
    }
    s / 2.0
}

pub fn ring_length(ring: &[(f64, f64)]) -> f64 {
    let n = ring.len();
    (0..n).map(|i| dist(ring[i], ring[(i + 1) % n])).sum()
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Gift wrapping; returns the hull counter-clockwise without collinear points.
pub fn jarvis_hull(pts: &[(f64, f64)]) -> Ring {
    let start = (0..pts.len())
        .min_by(|&a, &b| pts[a].partial_cmp(&pts[b]).unwrap())
        .unwrap();
    let mut hull = vec![pts[start]];
    let mut cur = start;
    loop {
        let mut next = if cur == 0 { 1 } else { 0 };
        for i in 0..pts.len() {
            if i == cur {
                continue;
            }
            let c = cross(pts[cur], pts[next], pts[i]);
            if c < 0.0 || (c == 0.0 && dist(pts[cur], pts[i]) > dist(pts[cur], pts[next])) {
                next = i;
            }
        }
        if next == start {
            break;
        }
        hull.push(pts[next]);
        cur = next;
    }
    hull
}

/// Minimum-area rectangle by trying every hull edge direction; returns
/// (long side, short side). Equal areas keep the less elongated rectangle.
pub fn brute_min_rect(hull: &[(f64, f64)]) -> (f64, f64) {
    let n = hull.len();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        let len = dist(a, b);
        let (ux, uy) = ((b.0 - a.0) / len, (b.1 - a.1) / len);
        let (mut lo_u, mut hi_u, mut lo_v, mut hi_v) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for p in hull {
            let u = p.0 * ux + p.1 * uy;
            let v = -p.0 * uy + p.1 * ux;
            lo_u = lo_u.min(u);
            hi_u = hi_u.max(u);
            lo_v = lo_v.min(v);
            hi_v = hi_v.max(v);
        }
        let (w, h) = (hi_u - lo_u, hi_v - lo_v);
        let (area, e) = (w * h, w.max(h) / w.min(h));
        let tie = (area - best.0).abs() <= 1e-12 * area;
        if (!tie && area < best.0) || (tie && e < best.1 / best.2) {
            best = (area, w.max(h), w.min(h));
        }
    }
    (best.1, best.2)
}

/// Area centroid of a ring with holes (any orientation).
pub fn centroid(ext: &[(f64, f64)], holes: &[Ring]) -> (f64, f64) {
    let part = |r: &[(f64, f64)]| {
        let n = r.len();
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let (p, q) = (r[i], r[(i + 1) % n]);
            let c = p.0 * q.1 - q.0 * p.1;
            a += c;
            cx += (p.0 + q.0) * c;
            cy += (p.1 + q.1) * c;
        }
        let a = a / 2.0;
        (a.abs(), cx / (6.0 * a), cy / (6.0 * a))
    };
    let (a0, x0, y0) = part(ext);
    let (mut a, mut sx, mut sy) = (a0, a0 * x0, a0 * y0);
    for h in holes {
        let (ah, xh, yh) = part(h);
        a -= ah;
        sx -= ah * xh;
        sy -= ah * yh;
    }
    (sx / a, sy / a)
}

/// Signature by dense arc-length sampling: 10,000 boundary points walked
/// clockwise from the boundary point nearest the centroid, every 500th kept.
pub fn dense_signature(ext: &[(f64, f64)], holes: &[Ring]) -> Vec<f64> {
    let c = centroid(ext, holes);
    let mut ring = ext.to_vec();
    if shoelace(&ring) > 0.0 {
        ring.reverse();
    }
    let n = ring.len();
    let lens: Vec<f64> = (0..n).map(|i| dist(ring[i], ring[(i + 1) % n])).collect();
    let perimeter: f64 = lens.iter().sum();
    let (mut best, mut s0, mut acc) = (f64::INFINITY, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let t = (((c.0 - a.0) * dx + (c.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        let d = dist(c, (a.0 + t * dx, a.1 + t * dy));
        if d < best {
            best = d;
            s0 = acc + t * lens[i];
        }
        acc += lens[i];
    }
    let at = |s: f64| {
        let mut s = s.rem_euclid(perimeter);
        for i in 0..n {
            if s <= lens[i] || i == n - 1 {
                let t = (s / lens[i]).min(1.0);
                let (a, b) = (ring[i], ring[(i + 1) % n]);
                return (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            }
            s -= lens[i];
        }
        unreachable!()
    };
    (0..10_000)
        .filter(|j| j % 500 == 0)
        .map(|j| dist(at(s0 + j as f64 * perimeter / 10_000.0), c) / perimeter)
        .collect()
}

/// Random star-shaped polygon around `center`, optionally with a small hole.
pub fn star(
    rng: &mut impl Rng,
    center: (f64, f64),
    scale: f64,
    with_hole: bool,
) -> (Ring, Vec<Ring>) {
    let n = rng.gen_range(5..=12);
    let mut angles: Vec<f64> = (0..n)
        .map(|i| (i as f64 + rng.gen_range(0.1..0.9)) * 2.0 * PI / n as f64)
        .collect();
    angles.sort_by(f64::total_cmp);
    let radii: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(0.5..1.5)).collect();
    let ext: Ring = angles
        .iter()
        .zip(&radii)
        .map(|(a, r)| (center.0 + r * a.cos(), center.1 + r * a.sin()))
        .collect();
    let mut holes = Vec::new();
    if with_hole {
        let mut max_gap: f64 = 0.0;
        for i in 0..n {
            let next = if i + 1 < n {
                angles[i + 1]
            } else {
                angles[0] + 2.0 * PI
            };
            max_gap = max_gap.max(next - angles[i]);
        }
        let inner = 0.5 * scale * (max_gap / 2.0).cos() * 0.3;
        holes.push(
            (0..6)
                .map(|k| {
                    let a = k as f64 * PI / 3.0;
                    (center.0 + inner * a.cos(), center.1 + inner * a.sin())
                })
                .collect(),
        );
    }
    (ext, holes)
}

pub fn polygon(id: &str, ext: &[(f64, f64)], holes: &[Ring]) -> Polygon {
    let pts = |r: &[(f64, f64)]| r.iter().map(|&(x, y)| Point::new(x, y)).collect::<Vec<_>>();
    Polygon::new(id, pts(ext), holes.iter().map(|h| pts(h)).collect()).unwrap()
}

pub fn rigid(ring: &[(f64, f64)], theta: f64, dx: f64, dy: f64) -> Ring {
    let (s, c) = theta.sin_cos();
    ring.iter()
        .map(|&(x, y)| (c * x - s * y + dx, s * x + c * y + dy))
        .collect()
}

// ---- evidence -------------------------------------------------------------

pub fn lu_frame() -> Frame {
    Frame::new(["LU2", "LU3", "LU5"]).unwrap()
}

/// Random mass function over a 3-hypothesis frame with 1 to 7 focal sets.
pub fn random_mass(rng: &mut impl Rng, frame: &Frame) -> MassFunction {
    let size = frame.powerset_size();
    let k = rng.gen_range(1..size);
    let mut masks: Vec<u32> = (1..size as u32).collect();
    for i in 0..k {
        let j = rng.gen_range(i..masks.len());
        masks.swap(i, j);
    }
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let focal: Vec<(u32, f64)> = masks[..k]
        .iter()
        .zip(&w)
        .map(|(&m, &v)| (m, v / total))
        .collect();
    MassFunction::from_focal(frame, &focal).unwrap()
}

/// Subsets as explicit name sets.
pub fn as_sets(m: &MassFunction) -> Vec<(BTreeSet<String>, f64)> {
    let names = m.frame().hypotheses().to_vec();
    m.focal_sets()
        .map(|(mask, v)| {
            let set = names
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, n)| n.clone())
                .collect();
            (set, v)
        })
        .collect()
}

/// κ summed over every pair of focal sets with an empty set intersection.
pub fn brute_conflict(a: &MassFunction, b: &MassFunction) -> f64 {
    let mut k = 0.0;
    for (x, mx) in as_sets(a) {
        for (y, my) in as_sets(b) {
            if x.intersection(&y).next().is_none() {
                k += mx * my;
            }
        }
    }
    k
}

// ---- learners -------------------------------------------------------------

#[derive(Debug)]
pub enum CartNode {
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<CartNode>,
        right: Box<CartNode>,
    },
}

impl CartNode {
    pub fn predict(&self, row: &[f64]) -> &[f64] {
        match self {
            CartNode::Leaf(p) => p,
            CartNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

/// Unpruned Gini CART over raw values. Thresholds sit halfway between a node
/// value and the next value of the whole training column; ties go to the
/// first feature, then the lowest threshold.
pub fn cart(x: &[Vec<f64>], y: &[usize], k: usize) -> CartNode {
    let d = x[0].len();
    let mut global: Vec<Vec<f64>> = (0..d).map(|f| x.iter().map(|r| r[f]).collect()).collect();
    for g in &mut global {
        g.sort_by(f64::total_cmp);
        g.dedup();
    }
    grow_cart(x, y, k, &global, (0..y.len()).collect())
}

fn ssq_over(c: &[f64]) -> f64 {
    let n: f64 = c.iter().sum();
    c.iter().map(|v| v * v).sum::<f64>() / n
}

fn grow_cart(
    x: &[Vec<f64>],
    y: &[usize],
    k: usize,
    global: &[Vec<f64>],
    rows: Vec<usize>,
) -> CartNode {
    let counts = |rs: &[usize]| {
        let mut c = vec![0.0; k];
        for &r in rs {
            c[y[r]] += 1.0;
        }
        c
    };
    let total = counts(&rows);
    let n = rows.len() as f64;
    if total.iter().filter(|&&c| c > 0.0).count() < 2 {
        return CartNode::Leaf(total.iter().map(|c| c / n).collect());
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for (f, g) in global.iter().enumerate() {
        let mut vals: Vec<f64> = rows.iter().map(|&r| x[r][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for &v in &vals[..vals.len().saturating_sub(1)] {
            let next = g[g.partition_point(|&u| u <= v)];
            let t = (v + next) / 2.0;
            let left: Vec<usize> = rows.iter().copied().filter(|&r| x[r][f] <= t).collect();
            let right: Vec<usize> = rows.iter().copied().filter(|&r| x[r][f] > t).collect();
            let gain = ssq_over(&counts(&left)) + ssq_over(&counts(&right)) - ssq_over(&total);
            if gain > 1e-12 && best.map_or(true, |b| gain > b.2) {
                best = Some((f, t, gain));
            }
        }
    }
    match best {
        None => CartNode::Leaf(total.iter().map(|c| c / n).collect()),
        Some((feature, threshold, _)) => {
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| x[i][feature] <= threshold);
            CartNode::Split {
                feature,
                threshold,
                left: Box::new(grow_cart(x, y, k, global, l)),
                right: Box::new(grow_cart(x, y, k, global, r)),
            }
        }
    }
}

/// Three Gaussian-free blobs: uniform squares around fixed centers.
pub fn blobs(per_class: usize, spread: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut r = rng(seed);
    let centers = [(0.0, 0.0), (6.0, 0.0), (0.0, 6.0)];
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (c, &(cx, cy)) in centers.iter().enumerate() {
        for _ in 0..per_class {
            x.push(vec![
                cx + r.gen_range(-spread..spread),
                cy + r.gen_range(-spread..spread),
            ]);
            y.push(c);
        }
    }
    (x, y)
}

pub fn numeric_matrix(rows: Vec<Vec<f64>>) -> lufusion::data::Matrix {
    let d = rows.first().map_or(0, Vec::len);
    lufusion::data::Matrix::new(
        (0..d).map(|i| format!("x{i}")).collect(),
        vec![lufusion::data::ColumnKind::Numeric; d],
        rows,
    )
}

pub fn class_names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}
