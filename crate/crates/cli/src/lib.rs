//! Command line and HTTP front ends over `mbms-core`.

mod cli;
pub mod files;
pub mod server;

pub use cli::run;
