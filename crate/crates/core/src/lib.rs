//! Verification toolkit for quantum while-programs.

pub mod lang;
pub mod operator;
pub mod relations;
pub mod semantics;
pub mod hoare;
pub mod outline;
pub mod random;
pub mod flow;
pub mod report;
pub mod cli;
