//! Reconstruction of a discrete Gaussian free field from its values modulo
//! `2π/T`: exact GFF sampling, the shifted integer-valued GFF, coupled-pair
//! variance estimators, cluster diagnostics, theta-function identities, the
//! random-phase Sine-Gordon model and level lines.

pub mod error;
pub mod gff;
pub mod iv_gff;
pub mod lattice;
pub mod level_lines;
pub mod peierls;
pub mod phase;
pub mod reconstruction;
pub mod rng;
pub mod sine_gordon;
pub mod stats;
pub mod theta;

pub use error::{Error, Result};
pub use gff::{sample_via_white_noise, GffSampler};
pub use lattice::{
    BoundaryCondition, DirichletSolver, EdgeField, IntegerField, Lattice, VertexField,
};
pub use phase::{beta_of, lift, observe, PhaseField};
