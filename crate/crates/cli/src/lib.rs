pub mod advisor;
pub mod cli;
pub mod service;
