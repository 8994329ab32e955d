//! Rental-yield index and rent-prediction models for real-estate listings.

pub mod domain;
pub mod evaluation;
pub mod features;
pub mod finance;
pub mod forest;
pub mod ingest;
pub mod model;
pub mod regression;
pub mod svr;
pub mod synth;
pub mod text;

pub use domain::*;
