//! Witness-based quantifiers of continuous-variable quantum resources
//! (Wigner negativity, genuine and standard non-Gaussianity) and the
//! measure-and-prepare channels that activate them into two-qubit
//! entanglement and steering.

extern crate blas_src;

pub mod activation;
pub mod channels;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod linalg;
pub mod monotones;
pub mod optimize;
pub mod phase_space;
pub mod quadrature;
pub mod states;
pub mod witness;

pub use error::{Error, Result};
pub use fock::{
    displacement_op, fidelity, ladder_ops, parity_op, quadrature_ops, trace_norm, Budget,
    DensityMatrix, FockCutoff, OperatorMatrix, PureState, QuadratureBasis, Space,
};
pub use linalg::{CMatrix, CVector, C64};
