//! Greedy energy-constrained link scheduling and power control for wireless
//! networks under binary interference and average power budgets.
//!
//! * [`netmodel`]: links, conflict sets, maximal activation vectors.
//! * [`ratepower`]: power levels, rate-power curves, solo-optimal power.
//! * [`solver`]: small dense LP solver.
//! * [`capacity`]: power-constrained stability region queries.
//! * [`lpf`]: local pooling factor with witnesses.
//! * [`schedulers`]: GECS, GMW, MaxWeight and fixed-power GMS.
//! * [`sim`]: slotted queue simulation and stability diagnostics.
//! * [`scenario`] and [`cli`]: scenario files and the `gecs` command line.

pub mod capacity;
pub mod cli;
pub mod error;
pub mod lpf;
pub mod netmodel;
pub mod ratepower;
pub mod scenario;
pub mod schedulers;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
