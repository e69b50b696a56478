//! Cycle-accurate simulation of a burst-based, multi-channel on-chip
//! protocol with ID-based transaction ordering.
//!
//! Every component exchanges beats over five-channel links (read command,
//! read response, write command, write data, write response) using
//! valid/ready handshakes. A [`kernel::Netlist`] advances all components
//! with a two-phase step: combinational settle, then registered commit.

pub mod dma;
pub mod error;
pub mod idconv;
pub mod initiator;
pub mod junctions;
pub mod kernel;
pub mod llc;
pub mod memory;
pub mod protocol;
pub mod widthconv;

pub use error::ConfigError;
