//! File formats, the HTTP policy backend, the benchmark pipeline and the
//! command line for [`navfuse_core`].

pub mod cli;
pub mod io;
pub mod pipeline;
pub mod remote;

pub use navfuse_core as core;
