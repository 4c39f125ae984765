//! One-way travel-time inverted-USBL navigation and single-beacon multi-AUV coordination.
//!
//! The crate covers the full signal chain from chirp synthesis to fleet behaviors:
//!
//! * [`waveforms`]: LFM chirps and the per-mode template bank.
//! * [`ranging`]: PHAT matched filtering, element combination and mode identification.
//! * [`doa`]: plane-wave delays, conventional and sensor-pair-decomposition beamforming.
//! * [`geometry`]: frames, attitude rotations and spherical coordinates.
//! * [`filter`]: the factored range/angle particle filter.
//! * [`world`]: ground-truth simulator, acoustic channel, clocks, LBL and dead reckoning.
//! * [`behaviors`]: beacon-relative autonomy behaviors.
//! * [`mission`]: mission configs, the simulation loop, logs, statistics and calibration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behaviors;
pub mod error;
pub mod doa;
pub mod dsp;
pub mod filter;
pub mod geometry;
pub mod mission;
pub mod ranging;
pub mod waveforms;
pub mod world;

pub use error::{Error, Result};
