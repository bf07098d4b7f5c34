//! Certification protocols: wire formats, the two basic baselines and the
//! decentralized engine.

pub mod basic;
pub mod engine;
pub mod messages;

pub use basic::{run_basic_p1, run_basic_p2, BasicConfig, BasicMetrics, BasicOutcome, BasicRole};
pub use engine::{run, Genesis, Population, RunConfig, RunMetrics, RunOutcome, SimError};
pub use messages::Protocol;
