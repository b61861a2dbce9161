//! Numerics for connection times in mobile ad-hoc networks viewed as dynamic
//! continuum percolation.
//!
//! The crate is `no_std` (with `alloc`). It holds the pure algorithmic parts:
//! geometry, Poisson/Gilbert-graph percolation estimates, random waypoint
//! mobility, the N-walker connection time, the deterministic limit objects,
//! and the two-walker arrival chain with its large-deviation diagnostics.
//! Anything that touches files, threads or the command line lives in the
//! `perconet` crate.
//!
//! Monte Carlo entry points take a [`StreamKey`] and a [`TrialRunner`]. Every
//! trial derives its own random stream from the key, so results do not depend
//! on how the runner schedules work.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chain;
pub mod connectivity;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod limit;
pub mod math;
pub mod mobility;
pub mod percolation;
pub mod rng;
pub mod stats;
pub mod unionfind;

pub use error::{Error, Result};
pub use exec::{Sequential, TrialRunner};
pub use geometry::{CellGrid, Domain, Point};
pub use rng::StreamKey;
