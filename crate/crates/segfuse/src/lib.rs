//! File formats, synthetic data, the experiment harness and the command
//! line for `segfuse-core`.

pub mod cli;
pub mod config;
pub mod constraints_io;
pub mod error;
pub mod harness;
pub mod labels;
pub mod pgm;
pub mod raster;
pub mod split;
pub mod synth;

pub use constraints_io::{read_constraints, write_constraints};
pub use error::{Error, Result};
pub use labels::{read_label_map, write_label_map};
pub use raster::{read_image, write_image};
pub use split::{DatasetSplit, SplitSpec};
pub use synth::{constraints_from_ground_truth, generate_synthetic, SynthSpec};
