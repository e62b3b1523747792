//! A persona-driven forum simulator with an event-sourced platform and the
//! analyses used to compare simulated activity against a reference forum.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod events;
pub mod gen;
pub mod personas;
pub mod platform;
pub mod scheduler;
pub mod services;
pub mod topic;
