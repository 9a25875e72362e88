//! Reasoning-driven region editing.
//!
//! The crate is organised around the stages of an edit:
//!
//! * [`ssr`] builds and manipulates the structured scene representation
//!   (object masks, labels, depths and derived attributes).
//! * [`gateway`] talks to the external perception, inpainting, embedding and
//!   chat models, validating every response before it reaches the engine.
//! * [`reasoning`] runs the refinement chain that turns an implicit query into
//!   resolved `(mask, instruction)` steps.
//! * [`exec`] applies those steps with an inpainting backend.
//! * [`eval`] scores results and runs benchmarks.

pub mod canonical;
pub mod eval;
pub mod exec;
pub mod gateway;
pub mod pipeline;
pub mod raster;
pub mod reasoning;
pub mod ssr;

pub use image::{Rgb, RgbImage};
