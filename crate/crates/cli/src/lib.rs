//! Library surface of the CLI package: the run-configuration type and its
//! provenance header, shared between the binary and its integration tests.

pub mod config;
