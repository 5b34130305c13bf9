//! Output-error identification of the interconnected engine networks and
//! Final Prediction Error structure selection.

mod engine;
mod fit;
mod fpe;
mod regressor;
mod submodel;

pub use engine::{
    find_peaks, identify_engine, match_peaks, nrmse, simulate_engine_model, simulate_on_log, EngineInit,
    EngineModel, EngineSimulator, EngineTrajectory, IdentifyConfig, IdentifySummary,
};
pub use fit::{fit_oe_model, fit_oe_on, normalisation_from_log, FitConfig, FitResult};
pub use fpe::{fpe, order_grid, select_structure, FpeCandidate, FpeReport, SelectConfig};
pub use regressor::{Affine, ChannelData, InputLags, RegressorSpec};
pub use submodel::{oe_sensitivities, simulate_submodel, SubModel};
