//! Octahedral-frame guided neural implicit surface reconstruction.

pub mod fixtures;
pub mod geometry;
pub mod losses;
pub mod nets;
pub mod oracle;
pub mod selftest;
pub mod sh;
pub mod spatial;
pub mod training;
