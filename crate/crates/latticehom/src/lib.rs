//! Lattice homology of plumbing forests.
//!
//! The crate builds finite boxed models of the cube complex attached to a
//! plumbing forest, computes their homology over F2[U]/U^n together with the
//! U-module decomposition, and verifies the surgery triangle relating the
//! complexes of G - v, G and G with the framing at v bumped by one.

// index loops here usually walk several parallel arrays or an odometer;
// iterator rewrites obscure that
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod charlat;
pub mod complex;
pub mod exactseq;
pub mod graph;
pub mod homology;
pub mod matrix;
pub mod persist;
pub mod series;
