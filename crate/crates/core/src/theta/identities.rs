//! Numerical checks of the modular identities and of the information bound.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{jacobi_theta, riemann_theta, sigma_t, wrapped_cond_mean};
use crate::error::{Error, Result};
use crate::iv_gff::enumerate_exact;
use crate::lattice::{dot, Lattice};
use crate::stats::{mean, std_error};

/// Relative gap in `θ(z/τ | −1/τ) = (−iτ)^{1/2} e^{πiz²/τ} θ(z|τ)` under
/// `z = iβa`, `τ = 2πiβ`.
pub fn jacobi_identity_gap(beta: f64, a: f64) -> Result<f64> {
    let z = Complex64::new(0.0, beta * a);
    let tau = Complex64::new(0.0, 2.0 * PI * beta);
    let lhs = jacobi_theta(z / tau, -tau.inv())?.value;
    let alpha = (-Complex64::i() * tau).sqrt() * (Complex64::i() * PI * z * z / tau).exp();
    let rhs = alpha * jacobi_theta(z, tau)?.value;
    Ok((lhs - rhs).norm() / rhs.norm())
}

/// Relative gap in
/// `θ(Ω⁻¹z | −Ω⁻¹) = det(−iΩ)^{1/2} exp(πi zᵀΩ⁻¹z) θ(z|Ω)`.
///
/// The square root is the principal branch, which is the correct one when
/// `Ω` is purely imaginary.
pub fn riemann_identity_gap(z: &[Complex64], omega: &DMatrix<Complex64>) -> Result<f64> {
    let g = z.len();
    let inv = omega
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("Ω is singular".into()))?;
    let zv = nalgebra::DVector::from_column_slice(z);
    let wz = &inv * &zv;
    let lhs = riemann_theta(wz.as_slice(), &(-&inv))?.value;
    let det = (omega * -Complex64::i()).determinant();
    let quad = (zv.transpose() * &inv * &zv)[(0, 0)];
    let rhs = det.sqrt() * (Complex64::i() * PI * quad).exp() * riemann_theta(z, omega)?.value;
    debug_assert_eq!(wz.len(), g);
    Ok((lhs - rhs).norm() / rhs.norm())
}

/// `Ω = 2πiβ(−Δ)` and `z = iβ(−Δ)a` on the interior vertices of a lattice,
/// with `a` given per vertex in the `2π`-periodic convention.
pub fn laplacian_theta_params(lattice: &Lattice, beta: f64, a: &[f64]) -> (Vec<Complex64>, DMatrix<Complex64>) {
    let idx = lattice.interior();
    let g = idx.len();
    let mut lap = DMatrix::<f64>::zeros(g, g);
    for (i, &v) in idx.iter().enumerate() {
        lap[(i, i)] = lattice.degree(v) as f64;
        for &w in lattice.neighbors(v) {
            if let Some(j) = lattice.interior_index(w) {
                lap[(i, j)] -= 1.0;
            }
        }
    }
    let av = nalgebra::DVector::from_iterator(g, idx.iter().map(|&v| a[v]));
    let la = &lap * av;
    let z = la.iter().map(|&x| Complex64::new(0.0, beta * x)).collect();
    let omega = lap.map(|x| Complex64::new(0.0, 2.0 * PI * beta * x));
    (z, omega)
}

/// Both sides of the modular invariance identity on a tiny lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Compare `E[⟨φ,f⟩]` for the shifted integer model on fibers `2π(m + a)`
/// with `−⟨σ, ∇_a log Z(β,a)⟩`, `σ = (1/β)(−Δ)⁻¹f`. Here `a` is in units of
/// the fiber period and derivatives are taken with respect to `2πa`, by
/// central differences with one Richardson step.
pub fn modular_invariance_check(
    lattice: &Lattice,
    beta: f64,
    a: &[f64],
    f: &[f64],
    window: i64,
    h: f64,
) -> Result<ModularCheck> {
    lattice.check_len(a.len())?;
    lattice.check_len(f.len())?;
    if lattice.interior().len() > 4 {
        return Err(Error::TooLarge(format!(
            "{} interior vertices (max 4)",
            lattice.interior().len()
        )));
    }
    if !(1..=8).contains(&window) {
        return Err(Error::TooLarge(format!("window {window} (must be 1..=8)")));
    }
    // fibers 2π(m + a) with weight e^{−β/2 ⟨∇φ,∇φ⟩} are the unit-fiber model at 4π²β
    let beta_z = 4.0 * PI * PI * beta;
    let table = enumerate_exact(lattice, a, beta_z, window)?;
    let verts = table.vertices.clone();
    let lhs = 2.0
        * PI
        * table.expect(|m| {
            verts
                .iter()
                .zip(m)
                .map(|(&v, &k)| (k as f64 + a[v]) * f[v])
                .sum()
        });
    let mut sigma = lattice.solve_poisson(f);
    sigma.iter_mut().for_each(|s| *s /= beta);
    let log_z = |shifted: &[f64]| -> Result<f64> {
        Ok(enumerate_exact(lattice, shifted, beta_z, window)?.log_partition)
    };
    let central = |v: usize, step: f64| -> Result<f64> {
        let mut plus = a.to_vec();
        let mut minus = a.to_vec();
        plus[v] += step / (2.0 * PI);
        minus[v] -= step / (2.0 * PI);
        Ok((log_z(&plus)? - log_z(&minus)?) / (2.0 * step))
    };
    let mut rhs = 0.0;
    for &v in lattice.interior() {
        if sigma[v] == 0.0 {
            continue;
        }
        let d = (4.0 * central(v, h / 2.0)? - central(v, h)?) / 3.0;
        rhs -= sigma[v] * d;
    }
    Ok(ModularCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// Monte Carlo estimate of `E[E[⟨φ,f⟩ | e^{iTW}]²]` against `σ(T)⟨f,(−Δ)⁻¹f⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationBound {
    pub lhs: f64,
    pub lhs_std_error: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `E[⟨φ,f⟩²] = ⟨f,(−Δ)⁻¹f⟩`.
    pub second_moment: f64,
}

/// Uses `⟨φ,f⟩ = Σ_e g_e W_e` with `g = ∇(−Δ)⁻¹f`; given the phases of the
/// independent edge variables, each `W_e` is replaced by its one-site
/// conditional mean.
pub fn information_bound_check<R: Rng + ?Sized>(
    lattice: &Lattice,
    t: f64,
    f: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<InformationBound> {
    lattice.check_len(f.len())?;
    for v in 0..lattice.vertex_count() {
        if lattice.is_boundary(v) && f[v] != 0.0 {
            return Err(Error::BoundaryViolation(v));
        }
    }
    let green_f = lattice.solve_poisson(f);
    let g = lattice.gradient(&green_f);
    let second_moment = dot(f, &green_f);
    let rhs = sigma_t(t) * second_moment;
    if second_moment == 0.0 {
        return Ok(InformationBound {
            lhs: 0.0,
            lhs_std_error: 0.0,
            rhs,
            ratio: f64::NAN,
            second_moment,
        });
    }
    let beta = crate::phase::beta_of(t);
    let scale = t / (2.0 * PI);
    let xs: Vec<f64> = (0..samples)
        .map(|_| {
            let x: f64 = g
                .iter()
                .map(|&ge| {
                    let w: f64 = rng.sample(StandardNormal);
                    let a = crate::phase::reduce_unit(scale * w);
                    ge * wrapped_cond_mean(beta, a) / scale
                })
                .sum();
            x * x
        })
        .collect();
    let lhs = mean(&xs);
    Ok(InformationBound {
        lhs,
        lhs_std_error: std_error(&xs),
        rhs,
        ratio: lhs / rhs,
        second_moment,
    })
}
