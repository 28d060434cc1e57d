//! Fixtures shared by the benchmarks.

use modgff::rng::stream;
use modgff::{observe, BoundaryCondition, GffSampler, Lattice, PhaseField, VertexField};

pub fn box_lattice(n: usize) -> Lattice {
    Lattice::new(n, BoundaryCondition::Dirichlet).expect("valid size")
}

/// One exact GFF draw and its phases at temperature `t`.
pub fn observed(l: &Lattice, t: f64, seed: u64) -> (VertexField, PhaseField) {
    let phi = GffSampler::new(l).sample(&mut stream(seed, &[]));
    let a = observe(l, &phi, t);
    (phi, a)
}
