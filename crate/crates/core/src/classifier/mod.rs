//! Detection of hours whose corrections were hidden by concurrent views.
//!
//! A gradient-boosted tree ensemble scores every hour from the surrounding
//! observed deltas and clock position; flagged hours then receive a magnitude
//! from the same neighbor-window rule the benchmark uses for visible ones.

pub mod features;
pub mod gbdt;
mod reconstruct;
pub mod tuning;

pub use features::{build_training_set, extract_features, FeatureRow, LabeledSet};
pub use gbdt::{train, Dataset, ModelParams, Node, Tree, TreeEnsembleModel};
pub use reconstruct::{reconstruct, reconstruct_with_flags, Reconstructor};
pub use tuning::{cross_validate, f1, CvOutcome, CvRow, ParamGrid};
