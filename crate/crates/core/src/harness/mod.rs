//! Experiment plumbing behind the `barylab` binary: synthetic and image
//! measure families, the 1-D W2 metric, and JSON-configured runs.

pub mod experiment;
pub mod family;
pub mod images;

pub use experiment::{exit_code, run_experiment, run_experiment_text, ExperimentConfig, ExperimentReport};
pub use family::{
    gen_gaussian_histograms, true_gaussian_barycenter, w2_distance_1d, GaussianFamily, GaussianFamilySpec, GridSpec,
};
