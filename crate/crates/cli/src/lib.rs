//! The `meshfid` command line and experiment server.

pub mod commands;
pub mod config;
pub mod server;
