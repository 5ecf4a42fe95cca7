//! Probabilistic object maps (POMs) and localization against them.
//!
//! A POM models where movable objects of one class tend to appear, as a
//! Gaussian-process classifier over SE(2) poses. The localizer uses POMs as
//! observation factors alongside odometry, so detections of parked cars (or
//! any other movable class) pull a drifting trajectory back into the map frame
//! without any data association.

// NaN must fail the parameter checks, which `!(x >= 0.0)` does and `x < 0.0` does not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builder;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod localizer;
pub mod map;
pub mod metrics;
pub mod rng;
pub mod se2;
pub mod sim;

pub use error::{Error, Result};
pub use map::{KernelParams, LocalPom, MapParams, ObjectMap, PomSample};
pub use se2::{Covariance3, Pose2};
