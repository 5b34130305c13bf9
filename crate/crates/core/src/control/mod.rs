//! Neural speed controller and its specialized training through the engine
//! model with recursive Gauss-Newton updates.

mod controller;
mod rls;
mod train;

pub use controller::{Controller, ControllerInputs, PUMP_RANGE};
pub use rls::{CriterionWeights, RlsState, SensitivityPair};
pub use train::{
    run_model_episode, sensitivity_psi, train_controller, write_metrics_csv, EpisodeStart, EpisodeTrace,
    EpochMetrics, OpacityError, TrainConfig, TrainOutcome,
};
