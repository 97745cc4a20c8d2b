pub mod agreement;
pub mod align;
pub mod cluster;
pub mod config;
pub mod corpus;
pub mod error;
pub mod pipeline;
pub mod reduce;
pub mod synth;
pub mod taxonomy;
