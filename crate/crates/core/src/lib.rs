//! Quantification of renal chronicity indices from six-class segmentation
//! label rasters.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`fusion`] combines per-class model masks into one [`LabelRaster`],
//!    optionally per patch of a [`raster::tiling`] grid.
//! 2. [`instances`] and [`features`] turn the raster into glomerular counts
//!    and tissue areas ([`DiagnosticFeatures`]), merging objects cut by
//!    patch borders.
//! 3. [`scoring`] forms the four proportions (GS, FC, IF, TA), maps each to
//!    a sub-score under a [`ScoringRule`] and sums them.
//!
//! [`metrics`] and [`survival`] hold the evaluation statistics (Dice with
//! bootstrap intervals, Spearman, Cohen's kappa, Kaplan-Meier, log-rank,
//! Cox regression, AUC). [`synth`] generates slides and cohorts with known
//! ground truth.

pub mod error;
pub mod features;
pub mod fusion;
pub mod instances;
pub mod metrics;
mod par;
pub mod raster;
pub mod scoring;
pub mod stats;
pub mod survival;
pub mod synth;

pub use error::{Error, Result};
pub use features::{aggregate_patient, extract_features, DiagnosticFeatures, FeatureConfig};
pub use fusion::{fuse, MaskSource, PrecedenceOrder};
pub use instances::{connected_components, Connectivity, Instance, InstanceSet};
pub use raster::{BinaryMask, ClassId, ClassSet, LabelRaster};
pub use scoring::{score_patient, ChronicityResult, ProportionParams, ScoringRule, SubScores};
pub use metrics::{cohens_kappa, dice, spearman, BootstrapConfig};
pub use survival::{cox_fit, km_estimate, logrank, Cohort, SurvivalRecord};
pub use synth::{generate, generate_cohort, CohortSpec, SynthSpec};
