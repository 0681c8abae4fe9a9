//! Communication-optimal parallel STTSV (y = A ×₂ x ×₃ x for a symmetric
//! 3-tensor A) via tetrahedral block partitions built from Steiner systems.
//!
//! The pipeline runs: [`steiner`] designs → [`partition`] of tensor blocks
//! and vector chunks → point-to-point [`schedule`] → stepped execution on
//! virtual processors in [`simulator`], checked against the closed-form
//! costs and the lower bounds in [`bounds`].

pub mod bounds;
pub mod error;
pub mod exec;
pub mod field;
pub mod matching;
pub mod partition;
pub mod report;
pub mod schedule;
pub mod simulator;
pub mod steiner;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Exec;
pub use partition::{BlockIndex, TetraPartition, VectorLayout};
pub use schedule::CommSchedule;
pub use simulator::{Mode, SimReport};
pub use steiner::SteinerSystem;
pub use tensor::PackedSymTensor;
