//! Offline collection and augmentation, energy-regularized offline training,
//! and online fine-tuning with mixed replay.

mod buffers;
mod pipeline;
mod record;

pub use buffers::{BetaSchedule, ReplayBuffers, Source};
pub use pipeline::{
    augment_dataset, collect_offline, dataset_for, draw_behavior_action, evaluate, finetune_online,
    train_offline, CollectionConfig, CriticEvaluator, OfflineConfig, OfflineLog, OnlineConfig,
    OnlineLog, Policy, StepLog, Units,
};
pub use record::{action_columns, Dataset, TransitionRecord};
