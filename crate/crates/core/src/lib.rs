//! Synthesis of optical-flow training tuples from single images with depth
//! or from stereo pairs.
//!
//! Stereo and monocular sources share one pipeline: depth becomes a virtual
//! second view ([`unify`]), a random camera motion adds a third view
//! ([`egomotion`]), and lateral augmentations ([`lateral`]) transform one
//! side of a tuple while keeping its ground truth exact. [`classifier`]
//! recognizes which augmentation a flow field contains, and [`metrics`]
//! scores predictions.
//!
//! Runnable examples live under `examples/`, one per capability.

pub mod classifier;
pub mod config;
pub mod egomotion;
pub mod error;
pub mod fields;
pub mod generate;
pub mod io;
pub mod lateral;
pub mod manifest;
pub mod metrics;
pub mod rng;
pub mod selftest;
pub mod synthetic;
pub mod tuple;
pub mod unify;
pub mod warp;

pub use error::{Error, Result};
pub use fields::{FlowField, Image, PixelGrid, ScalarField};
