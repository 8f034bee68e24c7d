//! Land-use classification of polygons from several heterogeneous sources,
//! by feature-level fusion or by Dempster-Shafer fusion of per-source
//! classifiers.
//!
//! The guide in `book/` walks through every stage; its code blocks are
//! compiled as doc-tests of this crate.

pub mod data;
pub mod evaluation;
pub mod evidence;
pub mod features;
pub mod geometry;
pub mod learners;
pub mod pipeline;
pub mod resampling;
pub mod rng;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/balancing.md")]
    mod balancing {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/evidence.md")]
    mod evidence {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
