//! Planar polygon kernel.
//!
//! Everything here works in a projected, metric coordinate system. Rings are
//! normalized on construction: the closing vertex is dropped, the exterior
//! ring is counter-clockwise and hole rings are clockwise. All operations are
//! pure functions of their inputs.

mod descriptors;
mod hull;
mod overlay;
mod polygon;

pub use descriptors::{
    polygonal_signature, shape_descriptors, ShapeDescriptors, SIGNATURE_SAMPLES,
};
pub use hull::{convex_hull, min_area_rectangle, OrientedBox};
pub use overlay::{
    adjacency_weights, contains_point, intersection_area, Adjacency, Neighbor, SpatialIndex,
};
pub(crate) use overlay::{contains_point_with, intersection_area_with};
pub use polygon::{ring_signed_area, BoundingBox, Point, Polygon, Tolerance};

use thiserror::Error;

/// Rejected geometry input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("polygon {id}: ring has fewer than 3 distinct vertices")]
    TooFewVertices { id: String },
    #[error("polygon {id}: ring has zero area")]
    ZeroArea { id: String },
    #[error("polygon {id}: ring is self-intersecting")]
    SelfIntersecting { id: String },
    #[error("polygon {id}: hole {hole} is not strictly inside the exterior ring")]
    HoleOutside { id: String, hole: usize },
    #[error("polygon {id}: rings {first} and {second} cross each other")]
    RingsCross {
        id: String,
        first: usize,
        second: usize,
    },
    #[error("polygon {id}: non-finite coordinate")]
    NonFinite { id: String },
    #[error("signature needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
}
