//! Exact oracles and samplers for biconditioned random structures: nondecreasing
//! random-walk bridges, Galton-Watson trees conditioned on their vertex and leaf
//! counts, and Boltzmann bipartite planar maps conditioned on edges and vertices.
//!
//! The pipeline runs from weight sequences ([`genfun`]) through exact
//! distributions ([`exactdist`]) and bridge samplers ([`bridge`]) to
//! Łukasiewicz paths and trees ([`lukas`]), label bridges ([`labels`]) and the
//! labelled-tree to map construction ([`mapbij`]). [`harness`] runs seeded
//! Monte Carlo experiments over all of it.

pub mod bridge;
pub mod conv;
pub mod exactdist;
pub mod genfun;
pub mod harness;
pub mod labels;
pub mod lukas;
pub mod mapbij;
pub mod stats;

pub use genfun::{Family, WeightSequence};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/bridges.md")]
    mod bridges {}
    #[doc = include_str!("../../../book/src/trees.md")]
    mod trees {}
    #[doc = include_str!("../../../book/src/maps.md")]
    mod maps {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
