//! Data-centric utility metrics: AOI label retention after privatization
//! and angular accuracy on a target-grid validation task.

mod aoi;
mod validation;

pub use aoi::{
    aoi_label, aoi_retention, aoi_retention_pooled, aoi_retention_with, weighted_scores, AoiLabel,
    AoiRegion, AoiRetentionReport, ClassScore, Scene, BACKGROUND_LABEL,
};
pub use validation::{
    validation_error, TargetError, ValidationReport, ValidationSchedule, DEFAULT_DWELL_S,
    DEFAULT_GRID_SPAN_DEG,
};
