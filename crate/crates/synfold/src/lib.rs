//! Workbench for distance-space models of syntactic workspaces.
//!
//! The model: a lexicon starts as a constant-distance (ultrametric) field;
//! building structure means pulling selected points closer together, which
//! metrizes the field. Structural descriptions are directed graphs over
//! field addresses in which multidominance is allowed, so chain collapse is
//! literal identification (distance zero) rather than indexing. On top of
//! that sit analyzers: folding / end-to-end gluing / self-intersection of
//! annotated sentences, monotonic-growth segmentation of plain trees, and a
//! Gauss-code knot engine that makes the crossing-versus-intersection
//! contrast executable.
//!
//! Modules:
//!
//! * [`space`] — finite distance spaces: axiom classification, triangle
//!   census, neighborhoods, boundaries, metric closure, metrization.
//! * [`tree`] — dendrograms as the unique tree form of ultrametric
//!   matrices; X-bar matrices; height-based domination.
//! * [`lgraph`] — directed structural descriptions with multidominance:
//!   dominance, order, walk/trail/path classification, copies.
//! * [`derivation`] — annotated sentences, topology reports, substitution,
//!   chain collapse, homomorphism checks, derivation scripts.
//! * [`mono`] — monotonic vs non-monotonic growth and finite-state
//!   describability of plain trees.
//! * [`knot`] — signed Gauss codes, Reidemeister moves, tricolorability,
//!   bounded unknotting, and the always-failing collapse demonstration.
//! * [`fixtures`] — the bundled example corpus used by the CLI and the
//!   acceptance suite.

pub mod cli;
pub mod derivation;
pub mod fixtures;
pub mod knot;
pub mod lgraph;
pub mod mono;
pub mod rat;
pub mod space;
pub mod tree;

pub use rat::Rat;
pub use space::{DistanceMatrix, PointId, SpaceClass};
