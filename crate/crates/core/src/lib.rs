//! Pointing-direction and angular-velocity tracking on S² for a rigid body.
//!
//! The crate provides the tracking control moment, the Lyapunov machinery
//! that certifies it for a given inertia estimate and reference envelope,
//! and a closed-loop simulator that checks those certificates along
//! trajectories.
//!
//! * [`geom`]: hat/vee, Rodrigues exponential, rotation repair.
//! * [`error_geometry`]: tracking errors on S² and their kinematics.
//! * [`control`]: drift model, sliding surface and control moment.
//! * [`certification`]: bounds, gain conditions, W matrices, radius.
//! * [`lyapunov`]: runtime monitors.
//! * [`sim`]: rigid-body closed loop and reference profiles.
//! * [`scenario`]: configuration files, commands and output formats.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certification;
pub mod control;
pub mod error;
pub mod error_geometry;
pub mod geom;
pub mod lyapunov;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
