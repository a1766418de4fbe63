pub mod bridge;
pub mod controller;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod flow;
pub mod mask;
pub mod metrics;
pub mod models;
pub mod report;
pub mod scene;

pub use error::{Error, Result};
