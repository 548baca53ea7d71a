//! Training: schedules, loss terms, the three phases, and checkpointing.

pub mod checkpoint;
pub mod losses;
pub mod phases;
pub mod schedule;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
pub use phases::{
    eval_reconstruction, mean_euclid, predict_coords, run_align, run_finetune, run_pretrain,
    AlignOutcome, EarlyStopSpec, EpochRecord, FinetuneOutcome, Phase, PhaseConfig, TrainingState,
};
pub use schedule::{ScheduleKind, ScheduleSpec};
