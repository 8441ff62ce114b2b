//! Experiment harness for the quantamp detector lab: BER sweeps, bitwidth
//! search jobs, profile comparison reports, and the file formats they emit.

pub mod io;
pub mod sweep;
