//! The observation map `φ ↦ e^{iTφ}`, stored as the shift `a ∈ [0,1)^Λ`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{IntegerField, Lattice, VertexField};

/// Inverse temperature `(2π)²/T²` of the integer model induced by observing
/// the field modulo `2π/T`.
pub fn beta_of(t: f64) -> f64 {
    (2.0 * PI / t).powi(2)
}

/// `x mod 1` in `[0, 1)`, with values rounding to 1 sent to 0.
pub fn reduce_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 - 1e-12 {
        0.0
    } else {
        r
    }
}

/// Observed phase data for a temperature `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub a: VertexField,
    pub t: f64,
}

impl PhaseField {
    /// Phase data from raw shifts; entries are reduced into `[0,1)` and
    /// boundary entries must be zero.
    pub fn new(lattice: &Lattice, a: Vec<f64>, t: f64) -> Result<Self> {
        lattice.check_len(a.len())?;
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("temperature {t}")));
        }
        let mut a: Vec<f64> = a.into_iter().map(reduce_unit).collect();
        for v in 0..lattice.vertex_count() {
            if lattice.is_boundary(v) {
                if a[v] != 0.0 {
                    return Err(Error::BoundaryViolation(v));
                }
                a[v] = 0.0;
            }
        }
        Ok(Self {
            a: VertexField::from_vec(a),
            t,
        })
    }

    pub fn zeros(lattice: &Lattice, t: f64) -> Self {
        Self {
            a: lattice.zero_vertex_field(),
            t,
        }
    }

    pub fn beta(&self) -> f64 {
        beta_of(self.t)
    }
}

/// `a = (T/2π)φ mod 1`.
pub fn observe(lattice: &Lattice, phi: &[f64], t: f64) -> PhaseField {
    let scale = t / (2.0 * PI);
    let a = phi
        .iter()
        .enumerate()
        .map(|(v, &x)| {
            if lattice.is_boundary(v) {
                0.0
            } else {
                reduce_unit(scale * x)
            }
        })
        .collect();
    PhaseField {
        a: VertexField::from_vec(a),
        t,
    }
}

/// `φ = (2π/T)(m + a)`.
pub fn lift(lattice: &Lattice, m: &IntegerField, a: &PhaseField) -> Result<VertexField> {
    lattice.check_len(m.len())?;
    lattice.check_len(a.a.len())?;
    let scale = 2.0 * PI / a.t;
    Ok(m.iter()
        .zip(a.a.iter())
        .map(|(&k, &x)| scale * (k as f64 + x))
        .collect::<Vec<_>>()
        .into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BoundaryCondition;
    use proptest::prelude::*;

    fn l1() -> Lattice {
        Lattice::new(1, BoundaryCondition::Dirichlet).unwrap()
    }

    fn circ_dist(x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        d.min(1.0 - d)
    }

    #[test]
    fn observe_examples() {
        let l = l1();
        let c = l.center();
        assert!(observe(&l, &[0.0; 9], 2.0).a.iter().all(|&x| x == 0.0));
        let mut phi = vec![0.0; 9];
        phi[c] = 2.0 * PI / 2.0;
        assert_eq!(observe(&l, &phi, 2.0).a[c], 0.0);
        // half a period lands in the middle of the unit interval
        phi[c] = PI / 2.0;
        assert!((observe(&l, &phi, 2.0).a[c] - 0.5).abs() < 1e-15);
        phi[c] = PI / 4.0;
        assert!((observe(&l, &phi, 2.0).a[c] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn lift_examples() {
        let l = l1();
        let m = l.zero_integer_field();
        let a = PhaseField::zeros(&l, 2.0 * PI);
        assert!(lift(&l, &m, &a).unwrap().iter().all(|&x| x == 0.0));
        let mut m = m;
        m[l.center()] = 1;
        assert!((lift(&l, &m, &a).unwrap()[l.center()] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn beta_examples() {
        assert!((beta_of(2.0 * PI) - 1.0).abs() < 1e-15);
        assert!((beta_of(2.0) - PI * PI).abs() < 1e-12);
        let ts: Vec<f64> = (1..50).map(|k| k as f64 * 0.3).collect();
        assert!(ts.windows(2).all(|w| beta_of(w[0]) > beta_of(w[1])));
    }

    #[test]
    fn reduce_unit_stays_in_range() {
        assert_eq!(reduce_unit(-1e-17), 0.0);
        assert_eq!(reduce_unit(3.0), 0.0);
        assert!((reduce_unit(-0.25) - 0.75).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn observe_inverts_lift(seed in any::<u64>(), t in 0.1f64..40.0) {
            use rand::{Rng, SeedableRng};
            let l = Lattice::new(3, BoundaryCondition::Dirichlet).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..l.vertex_count())
                .map(|v| if l.is_boundary(v) { 0.0 } else { rng.random_range(0.0..1.0) })
                .collect();
            let a = PhaseField::new(&l, a, t).unwrap();
            let mut m = l.zero_integer_field();
            for &v in l.interior() {
                m[v] = rng.random_range(-20..=20);
            }
            let phi = lift(&l, &m, &a).unwrap();
            let back = observe(&l, &phi, t);
            for v in 0..l.vertex_count() {
                prop_assert!(back.a[v] >= 0.0 && back.a[v] < 1.0);
                prop_assert!(circ_dist(back.a[v], a.a[v]) < 1e-12);
            }
        }

        #[test]
        fn observe_ignores_fiber_shifts(seed in any::<u64>(), t in 0.1f64..40.0) {
            use rand::{Rng, SeedableRng};
            let l = Lattice::new(3, BoundaryCondition::Dirichlet).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let phi: Vec<f64> = (0..l.vertex_count())
                .map(|v| if l.is_boundary(v) { 0.0 } else { rng.random_range(-5.0..5.0) })
                .collect();
            let shifted: Vec<f64> = phi
                .iter()
                .enumerate()
                .map(|(v, &x)| {
                    if l.is_boundary(v) { x } else { x + 2.0 * PI / t * rng.random_range(-5..=5) as f64 }
                })
                .collect();
            let a = observe(&l, &phi, t);
            let b = observe(&l, &shifted, t);
            for v in 0..l.vertex_count() {
                prop_assert!(circ_dist(a.a[v], b.a[v]) < 1e-12);
            }
        }
    }
}
