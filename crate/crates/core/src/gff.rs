//! Exact sampling of the discrete Gaussian free field with density
//! `∝ exp(−⟨∇φ,∇φ⟩/2)` and zero boundary values.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::{DirichletSolver, EdgeField, Lattice, VertexField};

/// Draws `φ = L^{-T} z` where `L Lᵀ = −Δ` and `z` is standard normal.
#[derive(Debug, Clone)]
pub struct GffSampler<'a> {
    lattice: &'a Lattice,
    solver: Arc<DirichletSolver>,
}

impl<'a> GffSampler<'a> {
    pub fn new(lattice: &'a Lattice) -> Self {
        Self {
            lattice,
            solver: lattice.solver(),
        }
    }

    pub fn lattice(&self) -> &'a Lattice {
        self.lattice
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> VertexField {
        sample_with(self.lattice, &self.solver, rng)
    }

    /// Split `φ = φ_B + φ^B` where `φ_B` is harmonic off `B ∪ ∂Λ` and `φ^B`
    /// is an independent GFF vanishing on `B ∪ ∂Λ`.
    pub fn sample_markov_split<R: Rng + ?Sized>(
        &self,
        set: &[usize],
        rng: &mut R,
    ) -> Result<(VertexField, VertexField)> {
        let l = self.lattice;
        let mut fixed = l.boundary_mask().to_vec();
        for &v in set {
            if v >= l.vertex_count() {
                return Err(Error::InvalidParameter(format!("vertex {v} out of range")));
            }
            if l.is_boundary(v) {
                return Err(Error::SetTouchesBoundary(v));
            }
            fixed[v] = true;
        }
        let phi = self.sample(rng);
        let inner = DirichletSolver::new(l, &fixed)?;
        let mut data = vec![0.0; l.vertex_count()];
        for &v in set {
            data[v] = phi[v];
        }
        let harmonic = inner.harmonic_extension(l, &data);
        let rest: Vec<f64> = phi.iter().zip(harmonic.iter()).map(|(a, b)| a - b).collect();
        let mut rest = VertexField::from_vec(rest);
        for v in 0..l.vertex_count() {
            if fixed[v] {
                rest[v] = 0.0;
            }
        }
        Ok((harmonic, rest))
    }
}

fn sample_with<R: Rng + ?Sized>(
    lattice: &Lattice,
    solver: &DirichletSolver,
    rng: &mut R,
) -> VertexField {
    let mut z: Vec<f64> = (0..solver.unknowns().len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    solver.factor().backward(&mut z);
    let mut out = lattice.zero_vertex_field();
    for (k, &v) in solver.unknowns().iter().enumerate() {
        out[v] = z[k];
    }
    out
}

/// White noise `W` on edges together with `φ = (−Δ)^{-1}(−∇·W)`, which is a GFF.
pub fn sample_via_white_noise<R: Rng + ?Sized>(
    lattice: &Lattice,
    rng: &mut R,
) -> (EdgeField, VertexField) {
    let w: Vec<f64> = (0..lattice.edge_count())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let w = EdgeField::from_vec(w);
    let mut rhs = lattice.divergence(&w);
    rhs.iter_mut().for_each(|x| *x = -*x);
    let phi = lattice.solve_poisson(&rhs);
    (w, phi)
}
