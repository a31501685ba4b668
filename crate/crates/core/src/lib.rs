//! Distributed, differentially private receding-horizon control of
//! multi-agent systems under metric temporal logic specifications.
//!
//! Each agent privatises its output with Gaussian noise, tracks the
//! system-wide average through Kalman filtering and randomized gossip, and
//! plans inputs by solving a mixed-integer program that encodes its own
//! specification and a probabilistic guarantee on the system-level one.

pub mod dynamics;
pub mod encode;
pub mod estimation;
pub mod mtl;
pub mod privacy;
pub mod rhc;
pub mod sim;
