//! Configuration-driven experiment runner: TOML in, versioned CSV and SVG out.

pub mod config;
pub mod figure;
pub mod run;
pub mod table_io;
