//! The grid graph `Λ_n = [-1,1]² ∩ (1/n)Z²`, its fields, the discrete
//! differential operators and Dirichlet solves.
//!
//! Vertices are numbered row-major from the bottom-left corner. Undirected
//! edges carry a fixed orientation: east edges point to increasing column,
//! north edges to increasing row. East edges come first in the edge list.

mod band;
mod fields;

use std::sync::{Arc, OnceLock};

pub use band::BandCholesky;
pub use fields::{dot, EdgeField, IntegerField, VertexField};

use crate::error::{Error, Result};

/// Boundary designation of a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// The outer frame of the grid is pinned to zero.
    Dirichlet,
    /// Only the root vertex, given as `(column, row)`, is pinned.
    Free { root: (usize, usize) },
}

/// Rectangular grid graph with a designated boundary set.
#[derive(Debug, Clone)]
pub struct Lattice {
    nx: usize,
    ny: usize,
    mesh: f64,
    origin: (f64, f64),
    n: usize,
    bc: BoundaryCondition,
    boundary: Vec<bool>,
    interior: Vec<usize>,
    interior_index: Vec<usize>,
    edges: Vec<(usize, usize)>,
    nbrs: Vec<[usize; 4]>,
    deg: Vec<u8>,
    solver: OnceLock<Arc<DirichletSolver>>,
}

const NONE: usize = usize::MAX;

impl Lattice {
    /// `Λ_n`: a `(2n+1)×(2n+1)` grid with spacing `1/n` centred at the origin.
    pub fn new(n: usize, bc: BoundaryCondition) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroMesh);
        }
        let side = 2 * n + 1;
        Self::build(side, side, n as f64, (n as f64, n as f64), n, bc)
    }

    /// A `nx × ny` vertex grid with unit spacing, used for small exact
    /// instances that `Λ_n` cannot express (e.g. a 2×2 interior).
    pub fn rectangle(nx: usize, ny: usize, bc: BoundaryCondition) -> Result<Self> {
        let min = match bc {
            BoundaryCondition::Dirichlet => 3,
            BoundaryCondition::Free { .. } => 1,
        };
        if nx < min || ny < min {
            return Err(Error::GridTooSmall { nx, ny, min });
        }
        let origin = ((nx - 1) as f64 / 2.0, (ny - 1) as f64 / 2.0);
        let n = (nx.min(ny) - 1) / 2;
        Self::build(nx, ny, 1.0, origin, n.max(1), bc)
    }

    fn build(
        nx: usize,
        ny: usize,
        mesh: f64,
        origin: (f64, f64),
        n: usize,
        bc: BoundaryCondition,
    ) -> Result<Self> {
        let count = nx * ny;
        let mut boundary = vec![false; count];
        match bc {
            BoundaryCondition::Dirichlet => {
                for j in 0..ny {
                    for i in 0..nx {
                        if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                            boundary[j * nx + i] = true;
                        }
                    }
                }
            }
            BoundaryCondition::Free { root: (ri, rj) } => {
                if ri >= nx || rj >= ny {
                    return Err(Error::RootOutsideGrid(ri, rj));
                }
                boundary[rj * nx + ri] = true;
            }
        }
        let mut interior = Vec::new();
        let mut interior_index = vec![NONE; count];
        for v in 0..count {
            if !boundary[v] {
                interior_index[v] = interior.len();
                interior.push(v);
            }
        }
        let mut edges = Vec::with_capacity((nx - 1) * ny + nx * (ny - 1));
        for j in 0..ny {
            for i in 0..nx - 1 {
                let v = j * nx + i;
                edges.push((v, v + 1));
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let v = j * nx + i;
                edges.push((v, v + nx));
            }
        }
        let mut nbrs = vec![[NONE; 4]; count];
        let mut deg = vec![0u8; count];
        for &(a, b) in &edges {
            nbrs[a][deg[a] as usize] = b;
            deg[a] += 1;
            nbrs[b][deg[b] as usize] = a;
            deg[b] += 1;
        }
        Ok(Self {
            nx,
            ny,
            mesh,
            origin,
            n,
            bc,
            boundary,
            interior,
            interior_index,
            edges,
            nbrs,
            deg,
            solver: OnceLock::new(),
        })
    }

    /// Mesh parameter `n` (for rectangles: half the shorter side).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn vertex_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Oriented undirected edges `(tail, head)`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of east-pointing edges; they precede the north edges.
    pub fn east_edge_count(&self) -> usize {
        (self.nx - 1) * self.ny
    }

    /// Vertex at `(column, row)`.
    pub fn vertex(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    /// `(column, row)` of a vertex.
    pub fn grid_pos(&self, v: usize) -> (usize, usize) {
        (v % self.nx, v / self.nx)
    }

    /// Coordinates of a vertex in the plane (`[-1,1]²` for `Λ_n`).
    pub fn coords(&self, v: usize) -> (f64, f64) {
        let (i, j) = self.grid_pos(v);
        (
            (i as f64 - self.origin.0) / self.mesh,
            (j as f64 - self.origin.1) / self.mesh,
        )
    }

    /// Grid spacing in plane coordinates.
    pub fn spacing(&self) -> f64 {
        1.0 / self.mesh
    }

    /// The vertex closest to the origin (ties toward the bottom-left).
    pub fn center(&self) -> usize {
        self.vertex((self.nx - 1) / 2, (self.ny - 1) / 2)
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Non-boundary vertices in row-major order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Position of `v` in [`Lattice::interior`], if it is not a boundary vertex.
    pub fn interior_index(&self, v: usize) -> Option<usize> {
        let k = self.interior_index[v];
        (k != NONE).then_some(k)
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.nbrs[v][..self.deg[v] as usize]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.deg[v] as usize
    }

    pub fn zero_vertex_field(&self) -> VertexField {
        VertexField::zeros(self.vertex_count())
    }

    pub fn zero_edge_field(&self) -> EdgeField {
        EdgeField::zeros(self.edge_count())
    }

    pub fn zero_integer_field(&self) -> IntegerField {
        IntegerField::zeros(self.vertex_count())
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.vertex_count() {
            return Err(Error::LengthMismatch {
                expected: self.vertex_count(),
                got: len,
            });
        }
        Ok(())
    }

    /// `∇S(x→y) = S(y) − S(x)` on every oriented edge.
    pub fn gradient(&self, s: &[f64]) -> EdgeField {
        let values = self.edges.iter().map(|&(a, b)| s[b] - s[a]).collect();
        EdgeField::from_vec(values)
    }

    /// `∇·A(x) = Σ_{x→y} A(x→y)` using antisymmetry of the orientation.
    pub fn divergence(&self, a: &[f64]) -> VertexField {
        let mut out = vec![0.0; self.vertex_count()];
        for (&(t, h), &val) in self.edges.iter().zip(a) {
            out[t] += val;
            out[h] -= val;
        }
        VertexField::from_vec(out)
    }

    /// `ΔS(x) = Σ_{y∼x} (S(y) − S(x))`.
    pub fn laplacian(&self, s: &[f64]) -> VertexField {
        let out = (0..self.vertex_count())
            .map(|v| {
                self.neighbors(v)
                    .iter()
                    .map(|&w| s[w] - s[v])
                    .sum::<f64>()
            })
            .collect();
        VertexField::from_vec(out)
    }

    /// `⟨∇S, ∇S⟩`, summed over undirected edges.
    pub fn dirichlet_energy(&self, s: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|&(a, b)| {
                let d = s[b] - s[a];
                d * d
            })
            .sum()
    }

    /// Cached factorization of `−Δ` on the non-boundary vertices.
    pub fn solver(&self) -> Arc<DirichletSolver> {
        self.solver
            .get_or_init(|| {
                Arc::new(
                    DirichletSolver::new(self, &self.boundary)
                        .expect("Laplacian with nonempty boundary is positive definite"),
                )
            })
            .clone()
    }

    /// `S = (−Δ)^{-1} rhs`: `−ΔS = rhs` off the boundary and `S = 0` on it.
    /// Boundary entries of `rhs` are ignored.
    pub fn solve_poisson(&self, rhs: &[f64]) -> VertexField {
        self.solver().solve(self, rhs, None)
    }

    /// Green's function `G(x, y)`; zero when either vertex is on the boundary.
    pub fn green(&self, x: usize, y: usize) -> f64 {
        if self.boundary[x] || self.boundary[y] {
            return 0.0;
        }
        let mut rhs = vec![0.0; self.vertex_count()];
        rhs[x] = 1.0;
        self.solve_poisson(&rhs)[y]
    }

    /// Column `G(x, ·)` of the Green's function.
    pub fn green_column(&self, x: usize) -> VertexField {
        let mut rhs = vec![0.0; self.vertex_count()];
        if !self.boundary[x] {
            rhs[x] = 1.0;
        }
        self.solve_poisson(&rhs)
    }

    /// `⟨f, (−Δ)^{-1} f⟩`.
    pub fn green_quadratic(&self, f: &[f64]) -> f64 {
        let g = self.solve_poisson(f);
        g.iter()
            .zip(f)
            .enumerate()
            .filter(|(v, _)| !self.boundary[*v])
            .map(|(_, (a, b))| a * b)
            .sum()
    }
}

/// Factorization of `−Δ` restricted to the vertices not marked fixed.
#[derive(Debug, Clone)]
pub struct DirichletSolver {
    fixed: Vec<bool>,
    unknowns: Vec<usize>,
    chol: BandCholesky,
}

impl DirichletSolver {
    /// Factor the Laplacian with Dirichlet conditions on `fixed`.
    pub fn new(lattice: &Lattice, fixed: &[bool]) -> Result<Self> {
        lattice.check_len(fixed.len())?;
        let mut unknowns = Vec::new();
        let mut index = vec![NONE; lattice.vertex_count()];
        for v in 0..lattice.vertex_count() {
            if !fixed[v] {
                index[v] = unknowns.len();
                unknowns.push(v);
            }
        }
        let mut bw = 0;
        for &(a, b) in lattice.edges() {
            if index[a] != NONE && index[b] != NONE {
                bw = bw.max(index[a].abs_diff(index[b]));
            }
        }
        // Off-diagonal lookup: -1 when the two unknowns are adjacent.
        let entry = |i: usize, j: usize| -> f64 {
            let vi = unknowns[i];
            if i == j {
                return lattice.degree(vi) as f64;
            }
            let vj = unknowns[j];
            if lattice.neighbors(vi).contains(&vj) {
                -1.0
            } else {
                0.0
            }
        };
        let chol = if unknowns.is_empty() {
            BandCholesky::factor(0, 0, entry)?
        } else {
            BandCholesky::factor(unknowns.len(), bw, entry)?
        };
        Ok(Self {
            fixed: fixed.to_vec(),
            unknowns,
            chol,
        })
    }

    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    pub fn factor(&self) -> &BandCholesky {
        &self.chol
    }

    /// Solve `−Δu = rhs` on the unknowns with `u = data` on fixed vertices
    /// (`data = None` means zero).
    pub fn solve(&self, lattice: &Lattice, rhs: &[f64], data: Option<&[f64]>) -> VertexField {
        let mut b: Vec<f64> = self.unknowns.iter().map(|&v| rhs[v]).collect();
        if let Some(g) = data {
            for (k, &v) in self.unknowns.iter().enumerate() {
                for &w in lattice.neighbors(v) {
                    if self.fixed[w] {
                        b[k] += g[w];
                    }
                }
            }
        }
        self.chol.solve(&mut b);
        let mut out = match data {
            Some(g) => g
                .iter()
                .zip(&self.fixed)
                .map(|(&x, &f)| if f { x } else { 0.0 })
                .collect(),
            None => vec![0.0; lattice.vertex_count()],
        };
        for (k, &v) in self.unknowns.iter().enumerate() {
            out[v] = b[k];
        }
        VertexField::from_vec(out)
    }

    /// Harmonic extension of `data` from the fixed set.
    pub fn harmonic_extension(&self, lattice: &Lattice, data: &[f64]) -> VertexField {
        let zero = vec![0.0; lattice.vertex_count()];
        self.solve(lattice, &zero, Some(data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dirichlet(n: usize) -> Lattice {
        Lattice::new(n, BoundaryCondition::Dirichlet).unwrap()
    }

    fn random_field(l: &Lattice, rng: &mut impl Rng, respect_boundary: bool) -> Vec<f64> {
        (0..l.vertex_count())
            .map(|v| {
                if respect_boundary && l.is_boundary(v) {
                    0.0
                } else {
                    rng.random_range(-1.0..1.0)
                }
            })
            .collect()
    }

    #[test]
    fn vertex_and_interior_counts() {
        let l = dirichlet(1);
        assert_eq!(l.vertex_count(), 9);
        assert_eq!(l.interior().len(), 1);
        let l = dirichlet(2);
        assert_eq!(l.vertex_count(), 25);
        assert_eq!(l.interior().len(), 9);
        let l = Lattice::new(1, BoundaryCondition::Free { root: (1, 1) }).unwrap();
        assert_eq!(l.vertex_count(), 9);
        assert_eq!(l.interior().len(), 8);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            Lattice::new(0, BoundaryCondition::Dirichlet).unwrap_err(),
            Error::ZeroMesh
        );
        assert_eq!(
            Lattice::new(1, BoundaryCondition::Free { root: (3, 0) }).unwrap_err(),
            Error::RootOutsideGrid(3, 0)
        );
    }

    #[test]
    fn dirichlet_boundary_is_the_frame() {
        let l = dirichlet(3);
        for v in 0..l.vertex_count() {
            let (x, y) = l.coords(v);
            let frame = (x.abs() - 1.0).abs() < 1e-12 || (y.abs() - 1.0).abs() < 1e-12;
            assert_eq!(l.is_boundary(v), frame);
            assert!(l.degree(v) <= 4);
            if !l.is_boundary(v) {
                assert_eq!(l.degree(v), 4);
            }
        }
    }

    #[test]
    fn gradient_of_constant_and_linear_fields() {
        let l = dirichlet(3);
        let c = vec![2.5; l.vertex_count()];
        assert!(l.gradient(&c).iter().all(|&g| g == 0.0));
        let x: Vec<f64> = (0..l.vertex_count()).map(|v| l.coords(v).0).collect();
        let g = l.gradient(&x);
        let east = l.east_edge_count();
        for (e, &val) in g.iter().enumerate() {
            let expect = if e < east { 1.0 / 3.0 } else { 0.0 };
            assert!((val - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_norm_is_dirichlet_energy() {
        let l = dirichlet(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_field(&l, &mut rng, false);
        let g = l.gradient(&s);
        let dot: f64 = g.iter().map(|x| x * x).sum();
        assert!((dot - l.dirichlet_energy(&s)).abs() < 1e-12 * dot);
    }

    #[test]
    fn laplacian_examples() {
        let l = dirichlet(1);
        let mut s = vec![0.0; 9];
        s[l.center()] = 1.0;
        assert_eq!(l.laplacian(&s)[l.center()], -4.0);
        assert!(l.laplacian(&[7.0; 9]).iter().all(|&x| x == 0.0));
        // x² + y² in grid units has Laplacian exactly 4 away from the frame.
        let l = dirichlet(4);
        let q: Vec<f64> = (0..l.vertex_count())
            .map(|v| {
                let (i, j) = l.grid_pos(v);
                (i * i + j * j) as f64
            })
            .collect();
        let lap = l.laplacian(&q);
        for &v in l.interior() {
            assert!((lap[v] - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let l = dirichlet(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_field(&l, &mut rng, false);
        let a = l.divergence(&l.gradient(&s));
        let b = l.laplacian(&s);
        for v in 0..l.vertex_count() {
            assert!((a[v] - b[v]).abs() < 1e-12);
        }
        let zero = l.zero_edge_field();
        assert!(l.divergence(&zero).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn poisson_single_interior_vertex() {
        let l = dirichlet(1);
        let mut rhs = vec![0.0; 9];
        rhs[l.center()] = 1.0;
        let s = l.solve_poisson(&rhs);
        assert!((s[l.center()] - 0.25).abs() < 1e-15);
        assert!((l.green(l.center(), l.center()) - 0.25).abs() < 1e-15);
        assert!(l.solve_poisson(&[0.0; 9]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn green_is_symmetric_and_nonnegative() {
        let l = dirichlet(4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = l.interior()[rng.random_range(0..l.interior().len())];
            let y = l.interior()[rng.random_range(0..l.interior().len())];
            let gxy = l.green(x, y);
            let gyx = l.green(y, x);
            assert!((gxy - gyx).abs() < 1e-10);
            assert!(gxy >= 0.0);
        }
        assert_eq!(l.green(0, l.center()), 0.0);
    }

    #[test]
    fn free_boundary_green_vanishes_at_root() {
        let l = Lattice::new(2, BoundaryCondition::Free { root: (2, 2) }).unwrap();
        let root = l.vertex(2, 2);
        let col = l.green_column(l.vertex(0, 0));
        assert_eq!(col[root], 0.0);
        assert!(col.iter().all(|&g| g >= 0.0));
    }

    #[test]
    fn green_grows_logarithmically() {
        // G_n(0,0) should be affine in log n with positive slope.
        let ns = [8usize, 16, 32, 64];
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let l = dirichlet(n);
                l.green(l.center(), l.center())
            })
            .collect();
        let fit = crate::stats::linear_fit(&xs, &ys);
        assert!(fit.slope > 0.0);
        assert!(fit.r_squared > 0.99, "R² = {}", fit.r_squared);
    }

    #[test]
    fn harmonic_extension_reproduces_affine_data() {
        let l = dirichlet(3);
        let f: Vec<f64> = (0..l.vertex_count())
            .map(|v| {
                let (x, y) = l.coords(v);
                2.0 * x - y + 0.5
            })
            .collect();
        let u = l.solver().harmonic_extension(&l, &f);
        for v in 0..l.vertex_count() {
            assert!((u[v] - f[v]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn duality_of_gradient_and_divergence(seed in any::<u64>(), n in 1usize..6) {
            let l = dirichlet(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_field(&l, &mut rng, false);
            let a: Vec<f64> = (0..l.edge_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs: f64 = l.gradient(&s).iter().zip(&a).map(|(x, y)| x * y).sum();
            let rhs: f64 = -s.iter().zip(l.divergence(&a).iter()).map(|(x, y)| x * y).sum::<f64>();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn minus_laplacian_is_positive_definite(seed in any::<u64>(), n in 1usize..6) {
            let l = dirichlet(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_field(&l, &mut rng, true);
            let q: f64 = -s.iter().zip(l.laplacian(&s).iter()).map(|(x, y)| x * y).sum::<f64>();
            prop_assert!((q - l.dirichlet_energy(&s)).abs() <= 1e-12 * (1.0 + q));
            prop_assert!(q > 0.0);
        }

        #[test]
        fn poisson_round_trip(seed in any::<u64>(), n in 1usize..8, free in any::<bool>()) {
            let bc = if free {
                BoundaryCondition::Free { root: (n, n) }
            } else {
                BoundaryCondition::Dirichlet
            };
            let l = Lattice::new(n, bc).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rhs = random_field(&l, &mut rng, true);
            let s = l.solve_poisson(&rhs);
            let back = l.laplacian(&s);
            let scale = rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for &v in l.interior() {
                prop_assert!((-back[v] - rhs[v]).abs() <= 1e-9 * scale.max(1e-300));
            }
            for v in 0..l.vertex_count() {
                if l.is_boundary(v) {
                    prop_assert_eq!(s[v], 0.0);
                }
            }
        }
    }
}
