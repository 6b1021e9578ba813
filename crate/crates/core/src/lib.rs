//! Larvae abundance regression and recursive climate forecasting.
//!
//! The crate is organised around the three stages of the pipeline:
//!
//! - [`ingest`] and [`preprocess`] turn raw observation, station and climate
//!   CSV exports into standardized training data.
//! - [`nn`] trains the dense abundance regressor; [`lstm`] trains the climate
//!   sequence model; [`forecast`] rolls it forward block by block.
//! - [`pipeline`] wires the stages into the commands exposed by the CLI.
//!
//! [`stats`] and [`trend`] hold the evaluation statistics and the auxiliary
//! closed-form models (trend curve, min/max offsets, days-of-precipitation
//! regression).

pub mod error;
pub mod forecast;
pub mod ingest;
pub mod lstm;
pub mod model_doc;
pub mod nn;
pub mod optim;
pub mod params;
pub mod pipeline;
pub mod preprocess;
pub mod seeding;
pub mod stats;
pub mod synth;
pub mod trend;

pub use error::{Error, Result};
pub use params::Parameters;
