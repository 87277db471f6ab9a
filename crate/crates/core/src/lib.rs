pub mod error;
pub mod fitting;
pub mod model;
pub mod surrogate;
pub mod optimizer;
pub mod synth;
pub mod analysis;
pub mod cli;
