//! Simulation of Mach-Zehnder interferometer meshes: topologies, transfer
//! matrices, calibration and programming protocols, optical neural network
//! training, robustness sweeps and energy accounting.

pub mod calibration;
pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod linalg;
pub mod mzi;
pub mod onn;
pub mod optimize;
pub mod programming;
pub mod propagation;
pub mod rng;
pub mod robustness;
pub mod svg;
pub mod topology;

pub use error::{MeshError, Result};
pub use linalg::{Complex, ComplexMatrix, ComplexVector};
pub use mzi::{MziImperfection, MziPhases};
pub use topology::{MeshKind, MeshTopology};
