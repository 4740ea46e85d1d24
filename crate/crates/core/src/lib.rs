//! G-SGDM: a generalized stochastic gradient method with momentum that covers
//! heavy ball, Nesterov, SUM, QHM and MASS as parameter choices, plus the
//! condition checks and bound verifiers for its convergence guarantees.

pub mod analysis;
pub mod engine;
pub mod problems;
pub mod rng;
pub mod schedules;
pub mod trace;
pub mod variants;
pub mod vector;

pub use engine::{run, EngineConfig, RunOutcome, RunState};
pub use problems::{NoiseModel, Problem};
pub use rng::RngStream;
pub use schedules::{Schedule, ScheduleStep, TheoremId, ValidationReport};
pub use trace::{Trace, TraceRow};
pub use variants::{Method, Variant};
