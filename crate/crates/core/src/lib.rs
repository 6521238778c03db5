//! Measurement engine for standardized behavioral time series.

pub mod model;
pub mod fsutil;
pub mod ingest;
pub mod kinematics;
pub mod expressions;
pub mod social;
pub mod provenance;
