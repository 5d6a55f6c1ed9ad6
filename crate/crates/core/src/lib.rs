//! Equilibrium solvers for heterogeneous-agent incomplete-market economies.
//!
//! The crate houses three solver families over shared model primitives:
//!
//! * [`classical`] — the textbook grid-DP / stationary-distribution /
//!   bisection pipeline for the pure-credit economy, together with the probes
//!   that expose its demand discontinuity;
//! * [`huggett`] — the time-invariant equilibrium solver for the pure-credit
//!   economy built on distribution transport over consumption;
//! * [`ksaffine`] — the affine-reduction backward-induction solver for the
//!   production economy with aggregate risk, plus [`simlab`] for long-run
//!   simulation in the random environment of productivity transitions.
//!
//! [`fn1d`] provides the monotone interpolation machinery all of them share,
//! and [`io`] the configuration schema, presets, and CSV emission.

pub mod classical;
pub mod error;
pub mod fn1d;
pub mod huggett;
pub mod io;
pub mod ksaffine;
pub mod model;
pub mod simlab;

pub use error::{Error, Result};
