//! Consensus segmentation fusion.
//!
//! This crate holds the allocation-only algorithmic core: segmentation and
//! constraint types, pair-counting metrics, the k-means base segmenter, the
//! simplex-constrained weight solvers and the move-based fusion engine
//! (unsupervised and constraint-driven semi-supervised). It builds without
//! `std`; file formats and the command line live in the `segfuse` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod connectivity;
pub mod constraints;
pub mod contingency;
pub mod error;
pub mod fusion;
pub mod image;
pub mod kmeans;
pub mod metrics;
pub mod segmentation;
pub mod weights;

pub use connectivity::{consensus_connectivity, SoftConnectivity};
pub use constraints::{close_constraints, ConstraintSet, RawConstraints};
pub use contingency::{contingency, ContingencyTable};
pub use error::{Error, Result};
pub use fusion::{
    bok_init, fuse, fuse_sssf, fuse_usf, move_delta, FusionConfig, FusionMode, FusionOutcome, IterationRecord,
    LambdaRule, Move,
};
pub use image::MultiBandImage;
pub use kmeans::{band_ensemble, kmeans_segment, KMeansConfig, KMeansRun};
pub use metrics::{
    adjusted_mutual_information, adjusted_rand_index, bregman_connectivity_distance, connectivity_entry, pair_counts,
    pairwise_d, rand_index, sdd, PairCounts,
};
pub use segmentation::{Ensemble, LabelMapping, Segmentation};
pub use weights::{simplex_project, solve_l1, solve_quadratic, L1Solution, SolverConfig, WeightVector};
