pub mod calibrate;
pub mod cli;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod nodes;
pub mod polybasis;
pub mod sampling;
pub mod statmodel;
pub mod surrogate;
pub mod testmodels;
