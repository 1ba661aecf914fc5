//! Empirical push-forward measures on a grid, a weak* surrogate built from a
//! finite observable suite, and local unstable leaves.

mod histogram;
mod leaf;
mod pushforward;
mod suite;

pub use histogram::{Grid, GridHistogram, HistogramAccumulator, HistogramHeader};
pub use leaf::{construct_unstable_leaf, construct_unstable_leaf_with, LeafOptions, LeafSegment};
pub use pushforward::{
    basin_fraction, birkhoff_average, checkpoints, invariance_defect, pushforward_leaf,
    pushforward_lebesgue, suite_integrals, weak_star_distance, BasinEstimate, BirkhoffAverage,
    InvarianceDefect, DEGENERATE_WITHIN,
};
pub use suite::{Observable, TestFunction, TestFunctionSuite, SUITE_VERSION};
