//! Entity-centric analytics over sentiment-annotated text archives.

pub mod cli;
pub mod corpus;
pub mod distinct;
pub mod export;
pub mod index;
pub mod measures;
pub mod relations;
pub mod spam;
pub mod synth;
pub mod timeline;
