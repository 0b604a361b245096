//! Quantum phase-map toolkit: ground states of spin-1/2 chain Hamiltonians
//! via DMRG, fidelity kernels between them, and unsupervised phase
//! classification through spectral clustering.

pub mod dmrg;
pub mod ed;
pub mod eigen;
pub mod kernel;
pub mod models;
pub mod mpo;
pub mod pipeline;
pub mod render;
pub mod selection;
pub mod spectral;
pub mod tensor;
