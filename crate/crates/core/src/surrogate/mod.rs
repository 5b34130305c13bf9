//! Deterministic diesel-engine surrogate and engine-log I/O.

mod excitation;
mod plant;
mod signal;

pub use excitation::{generate_excitation, Excitation, MIN_SAMPLES};
pub use plant::{plant_step, simulate_plant, NoiseParams, Plant, PlantParams, PlantState};
pub use signal::{load_log, save_log, Channel, SignalLog, SignalRecord, CSV_HEADER};
