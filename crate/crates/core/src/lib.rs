//! Inter-operator bandwidth sharing for deadline-constrained wireless traffic.
//!
//! Operators serve clients in several regions. Every period of `T` timeslots
//! each client may receive one packet that must be delivered within the
//! period. Operators may lend slots to each other region by region, subject
//! to a long-run balance between every pair. The online policy in [`policy`]
//! picks schedules and slot transfers each period by minimizing a
//! debt-weighted objective; [`simulator`] runs it in closed loop and
//! [`experiments`] sweeps the scenarios reported in the figures.

pub mod arrivals;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod queueing;
pub mod rng;
pub mod simulator;
