//! Synthetic line-chart generation, camera-style augmentation and
//! detection-to-data recovery with tolerance-based scoring.

pub mod augment;
pub mod calibrate;
pub mod config;
mod decimal;
pub mod detect;
pub mod font;
pub mod geometry;
pub mod grouping;
mod linalg;
pub mod metric;
pub mod pipeline;
pub mod quadfit;
pub mod raster;
pub mod seeds;
pub mod synthgen;
