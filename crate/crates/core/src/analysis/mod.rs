//! Analyses over an event log: activity, toxicity, the reply graph, its
//! core–periphery structure, and text metrics.

pub mod activity;
pub mod coreperiphery;
pub mod network;
pub mod textmetrics;
pub mod toxicity;
