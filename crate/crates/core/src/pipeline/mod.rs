//! End-to-end runs: render coded frames, estimate depth, track, evaluate.

mod config;
mod run;

pub use config::{
    BinsConfig, DatasetConfig, EstimatorConfig, EvalConfig, MaskConfig, PipelineConfig, RenderConfig, SetError,
};
pub use run::{
    build_mask, build_optics, estimate_depth, render_frame, run_pipeline, run_sequence, FrameOutput, Optics,
    PipelineOutput,
};
