//! Experiment harness: configuration, training loop and the command
//! implementations behind the CLI.

mod commands;
mod config;
mod train;

pub use commands::{
    ber_grid, cmd_ber, cmd_energy, cmd_eval_sweep, cmd_generate_dataset, cmd_train, energy_for,
    load_model, record_activity, sweep, BerPoint, RunRecord, SweepPoint, RUN_RECORD,
};
pub use config::{
    BerConfig, ChannelRanges, DatasetConfig, EnergyConfig, EvalConfig, ExperimentConfig,
    LrSchedule, Range, TrainingConfig,
};
pub use train::{evaluate, train, EpochRecord, EvalLink, TrainOutcome};
