pub mod error;
pub mod forward;
pub mod grid;
pub mod potential;
pub mod tridiag;
pub mod linalg;
pub mod rom;
pub mod estimation;
pub mod lanczos;
pub mod inversion;
pub mod experiment;
pub mod config;
pub mod io;
pub mod manifest;
pub mod app;
