//! The desk-scale pipeline: a stratified subsample of the training grid,
//! the test grid split into validation and test parts, and the three models
//! trained identically.

use crate::dictionary::{self, build_dictionary, build_from_params, split_dictionary, Dictionary, GridSpec};
use crate::error::Result;
use crate::inn::ModelKind;
use crate::seed;
use crate::sim::{SequenceSchedule, DEFAULT_FAT_SHIFT_HZ, DEFAULT_LENGTH};
use crate::training::{train, TrainConfig, TrainOutcome};

/// Approximate training-set size of the desk preset.
pub const DESK_TRAIN_ENTRIES: usize = 5000;
/// Share of the test grid held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct DeskData {
    pub train: Dictionary,
    pub val: Dictionary,
    pub test: Dictionary,
}

/// Stratified (FF x T1 water) subsample of a grid, simulated.
pub fn stratified_dictionary(
    spec: &GridSpec,
    target: usize,
    schedule: &SequenceSchedule,
    fat_shift: f64,
    seed_value: u64,
) -> Result<Dictionary> {
    let all = dictionary::expand_grid(spec)?;
    let chosen = dictionary::stratified_sample(&all, target, seed::sub_seed(seed_value, "desk-train"));
    build_from_params(
        &chosen,
        schedule,
        fat_shift,
        Some(spec.clone()),
        seed_value,
        &format!("stratified({target})"),
    )
}

pub fn desk_data(seed_value: u64) -> Result<DeskData> {
    let schedule = SequenceSchedule::reference(DEFAULT_LENGTH);
    let train = stratified_dictionary(
        &GridSpec::standard_training(),
        DESK_TRAIN_ENTRIES,
        &schedule,
        DEFAULT_FAT_SHIFT_HZ,
        seed_value,
    )?;
    let testing = build_dictionary(&GridSpec::standard_testing(), &schedule, DEFAULT_FAT_SHIFT_HZ, seed_value)?;
    let (val, test) = split_dictionary(&testing, VALIDATION_FRACTION, seed::sub_seed(seed_value, "desk-split"))?;
    Ok(DeskData { train, val, test })
}

/// Trains every kind with the same configuration.
pub fn train_all(data: &DeskData, config: &TrainConfig) -> Result<Vec<(ModelKind, TrainOutcome)>> {
    ModelKind::ALL
        .iter()
        .map(|&kind| Ok((kind, train(kind, &data.train, &data.val, config)?)))
        .collect()
}
