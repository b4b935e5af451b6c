pub mod association;
pub mod baseline;
pub mod cli;
pub mod colmap;
pub mod error;
pub mod evaluation;
pub mod export;
pub mod masks;
pub mod predictions;
pub mod synth;
