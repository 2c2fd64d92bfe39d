//! Forward models and the experiment generators built on them.

pub mod burgers;
pub mod experiments;
pub mod oscillator;
pub mod rk45;
pub mod selkov;

pub use burgers::{burgers_series, BurgersSetup};
pub use experiments::{generate_experiment, ExperimentConfig, ExperimentData, ExperimentKind, ObservedSource};
pub use oscillator::{oscillator_solution, OscillatorParams};
pub use rk45::{rk45_integrate, Rk45Options};
pub use selkov::{selkov_series, SelkovParams};
