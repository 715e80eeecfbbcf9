//! Test-only support shared by the integration and acceptance suites.
#![allow(dead_code)]

pub mod gen;
pub mod oracles;
pub mod props;
