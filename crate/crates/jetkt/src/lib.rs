//! Command-line front end for the jet-space calculus library: a small
//! problem-description language, its lowering onto [`jetkt_core`] objects,
//! and text/JSON reporting for each subcommand.

pub mod dsl;
pub mod emit;
pub mod problem;
