//! Trajectory association, alignment, ATE and ablation sweeps.

mod ablation;
mod ate;

pub use ablation::{
    format_ablation_table, run_ablation, AblationAxis, AblationRow, AblationSpec, AblationTable,
};
pub use ate::{
    align_trajectories, associate, associate_timestamps, compute_ate, rigid_align, rigid_align_no_scale,
    AlignmentResult, DEFAULT_MAX_DT,
};
