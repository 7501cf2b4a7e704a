pub mod a2a;
pub mod media;
pub mod registry;
pub mod mar;
pub mod net;
pub mod agents;
pub mod benchmark;
pub mod client;
pub mod mesh;
pub mod orchestrator;
pub mod stats;
pub mod experiment;
pub mod cli;
