//! Weighted cross-entropy, SGD, schedules, augmentation and training loops.

mod augment;
mod loops;
mod loss;
mod schedule;

pub use augment::{apply_augment, augment, sample_params, AugmentConfig, AugmentParams, LabelGrid};
pub use loops::{
    classification_accuracy, finetune, finetune_grid, param_checksum, pretrain, pssl_to_seg_samples,
    segmenter_sample_grad, train_classifier, EpochRecord, GridSearch, PsslSample, SegSample, Sgd, TrainLog,
};
pub use loss::{
    softmax, softmax_rows, weighted_ce, ClassWeights, BACKGROUND_WEIGHT_GRID, DEFAULT_BACKGROUND_WEIGHT, PROB_FLOOR,
};
pub use schedule::{lr_at, lr_grid, Schedule, TrainConfig, MOMENTUM, POLY_POWER};
