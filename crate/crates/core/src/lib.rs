//! Behavioral transient simulation of a GaN push-pull gate-drive chain.
//!
//! The chain runs from dual PWM inputs through digital isolators and
//! complementary Si totem-poles to a GaN push-pull stage, which drives either
//! an open output or a SiC MOSFET hard-switching test circuit.

pub mod chain;
pub mod error;
pub mod harness;
pub mod load;
pub mod metrics;
pub mod signal;
pub mod solver;
pub mod stages;

pub use chain::{ChainSystem, Load, Scenario, Topology};
pub use error::{Error, Result};
