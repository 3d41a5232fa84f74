//! Throughput optimization for tree-style relay-assisted mmWave backhaul
//! networks: linear programs for the maximum supportable traffic demand, a
//! depth-first TDMA scheduler that realizes the optimum on per-BS radio
//! chains, and an independent schedule validator.

pub mod capacity;
pub mod experiment;
pub mod formulations;
pub mod generator;
pub mod lp;
pub mod model;
pub mod scheduler;
pub(crate) mod timeline;
pub mod validator;
