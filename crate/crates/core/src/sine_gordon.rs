//! Random-phase Sine-Gordon model
//! `∝ exp(−β/2 ⟨∇φ,∇φ⟩ + z Σ cos(φ_i − a_i))` with quenched phases `a`.
//!
//! Finite `z` is sampled by single-site random-walk Metropolis; `z = ∞`
//! pins `φ` to `a + 2πℤ` and is handed to the integer-valued heat bath.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gff::GffSampler;
use crate::iv_gff::{enumerate_exact, ground_state, unwrap_lift, ChainConfig, IvGibbsChain};
use crate::lattice::{BoundaryCondition, Lattice, VertexField};
use crate::phase::{observe, reduce_unit};
use crate::rng::{derive_seed, stream};
use crate::stats::{mean, split_rhat, std_error};

/// Law of the quenched phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Disorder {
    /// i.i.d. uniform on `[0, 2π)`.
    Uniform,
    /// `Tφ mod 2π` for a unit GFF `φ`.
    GffMod { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgConfig {
    pub beta: f64,
    /// Activity; `f64::INFINITY` selects the pinned model.
    pub z: f64,
    pub disorder: Disorder,
    pub chain: ChainConfig,
    /// Independent chains per disorder (at least 2 for R-hat).
    pub chains: usize,
}

impl SgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.z >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta {} z {}", self.beta, self.z)));
        }
        if let Disorder::GffMod { t } = self.disorder {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("disorder T {t}")));
            }
        }
        if self.chains < 2 || self.chain.samples < 4 || self.chain.thin == 0 {
            return Err(Error::InvalidParameter("need 2 chains and 4 samples".into()));
        }
        Ok(())
    }
}

/// Phases in `[0, 2π)` on the interior, zero on the boundary.
pub fn draw_disorder<R: Rng + ?Sized>(lattice: &Lattice, disorder: Disorder, rng: &mut R) -> VertexField {
    match disorder {
        Disorder::Uniform => {
            let mut a = lattice.zero_vertex_field();
            for &v in lattice.interior() {
                a[v] = 2.0 * PI * rng.random::<f64>();
            }
            a
        }
        Disorder::GffMod { t } => {
            let phi = GffSampler::new(lattice).sample(rng);
            let p = observe(lattice, &phi, t);
            p.a.iter().map(|x| 2.0 * PI * x).collect::<Vec<_>>().into()
        }
    }
}

/// Unnormalised log density of `φ` (boundary values are taken as given).
pub fn log_density(lattice: &Lattice, phi: &[f64], a: &[f64], beta: f64, z: f64) -> f64 {
    let cos: f64 = lattice.interior().iter().map(|&v| (phi[v] - a[v]).cos()).sum();
    -0.5 * beta * lattice.dirichlet_energy(phi) + z * cos
}

/// Metropolis chain for finite activity.
#[derive(Debug, Clone)]
pub struct SgChain<'a, R> {
    lattice: &'a Lattice,
    beta: f64,
    z: f64,
    a: Vec<f64>,
    phi: Vec<f64>,
    scale: Vec<f64>,
    accepted: Vec<u32>,
    proposed: u32,
    rng: R,
}

impl<'a, R: Rng> SgChain<'a, R> {
    pub fn new(lattice: &'a Lattice, a: &[f64], beta: f64, z: f64, init: VertexField, rng: R) -> Result<Self> {
        lattice.check_len(a.len())?;
        lattice.check_len(init.len())?;
        if !(beta > 0.0) || !(z >= 0.0) || z.is_infinite() {
            return Err(Error::InvalidParameter(format!("beta {beta} z {z}")));
        }
        let scale = (0..lattice.vertex_count())
            .map(|v| 2.0 / (beta * lattice.degree(v).max(1) as f64).sqrt())
            .collect();
        Ok(Self {
            lattice,
            beta,
            z,
            a: a.to_vec(),
            phi: init.into_vec(),
            scale,
            accepted: vec![0; lattice.vertex_count()],
            proposed: 0,
            rng,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.phi
    }

    /// Change the inverse temperature (used to anneal during burn-in).
    pub fn set_beta(&mut self, beta: f64) {
        self.beta = beta;
    }

    pub fn scales(&self) -> &[f64] {
        &self.scale
    }

    /// `log π(φ with φ_v = x) − log π(φ)`.
    pub fn log_acceptance(&self, v: usize, x: f64) -> f64 {
        let old = self.phi[v];
        let mut d = 0.0;
        for &w in self.lattice.neighbors(v) {
            let p = self.phi[w];
            d += (old - p) * (old - p) - (x - p) * (x - p);
        }
        0.5 * self.beta * d + self.z * ((x - self.a[v]).cos() - (old - self.a[v]).cos())
    }

    fn metropolis(&mut self, v: usize, x: f64) -> bool {
        let la = self.log_acceptance(v, x);
        if la >= 0.0 || self.rng.random::<f64>() < la.exp() {
            self.phi[v] = x;
            true
        } else {
            false
        }
    }

    /// One systematic sweep. Each site gets a uniform random-walk proposal
    /// followed by a jump of `±2π`, which leaves the cosine term unchanged
    /// and lets the chain move between wells without crossing the barrier.
    /// Returns the number of accepted random-walk moves.
    pub fn sweep(&mut self) -> usize {
        let mut acc = 0;
        for idx in 0..self.lattice.interior().len() {
            let v = self.lattice.interior()[idx];
            let x = self.phi[v] + self.scale[v] * (2.0 * self.rng.random::<f64>() - 1.0);
            if self.metropolis(v, x) {
                self.accepted[v] += 1;
                acc += 1;
            }
            if self.z > 0.0 {
                let jump = if self.rng.random::<bool>() { 2.0 * PI } else { -2.0 * PI };
                self.metropolis(v, self.phi[v] + jump);
            }
        }
        self.proposed += 1;
        acc
    }

    /// Rescale per-site proposals towards an acceptance rate in
    /// `[0.3, 0.5]` using the counts since the last call.
    pub fn adapt(&mut self) {
        if self.proposed == 0 {
            return;
        }
        let p = self.proposed as f64;
        for &v in self.lattice.interior() {
            let r = self.accepted[v] as f64 / p;
            if r < 0.3 {
                self.scale[v] *= 0.8;
            } else if r > 0.5 {
                self.scale[v] *= 1.25;
            }
            self.accepted[v] = 0;
        }
        self.proposed = 0;
    }

    pub fn acceptance_rate(&self) -> f64 {
        let n = self.lattice.interior().len() as f64 * self.proposed as f64;
        let a: u32 = self.lattice.interior().iter().map(|&v| self.accepted[v]).sum();
        a as f64 / n
    }
}

const ADAPT_EVERY: usize = 25;

/// Run one chain on the phases `a` and call `record` with `φ` at every
/// retained time. Finite `z` starts from a GFF sample at `β`, anneals the
/// inverse temperature up from `β/50` over the first half of burn-in when
/// `z > 0` and
/// adapts proposals throughout burn-in; `z = ∞` runs the heat bath at `4π²β` on the
/// shift `a/2π` from its ground state.
pub fn run_chain<R: Rng>(
    lattice: &Lattice,
    a: &[f64],
    beta: f64,
    z: f64,
    chain: &ChainConfig,
    mut rng: R,
    mut record: impl FnMut(&[f64]),
) -> Result<()> {
    if z.is_infinite() {
        let shift: Vec<f64> = a.iter().map(|x| reduce_unit(x / (2.0 * PI))).collect();
        let start = unwrap_lift(lattice, &shift, Some(&mut rng));
        let init = ground_state(lattice, &shift, &start, chain.ground_rounds)?.m;
        let seed: u64 = rng.random();
        let mut c = IvGibbsChain::new(lattice, &shift, 4.0 * PI * PI * beta, init, crate::rng::Rng::seed_from_u64(seed))?;
        for _ in 0..chain.burn_in {
            c.sweep();
        }
        let mut phi = vec![0.0; lattice.vertex_count()];
        for _ in 0..chain.samples {
            for _ in 0..chain.thin {
                c.sweep();
            }
            for (p, h) in phi.iter_mut().zip(c.heights()) {
                *p = 2.0 * PI * h;
            }
            record(&phi);
        }
        return Ok(());
    }
    let mut init = GffSampler::new(lattice).sample(&mut rng);
    init.iter_mut().for_each(|x| *x /= beta.sqrt());
    let seed: u64 = rng.random();
    let mut c = SgChain::new(lattice, a, beta, z, init, crate::rng::Rng::seed_from_u64(seed))?;
    // anneal from β/50 up to β over the first half of burn-in; at z = 0 the
    // start is already an exact draw and annealing would only push it away
    let ramp = if z > 0.0 { chain.burn_in / 2 } else { 0 };
    for s in 0..chain.burn_in {
        if s < ramp {
            c.set_beta(beta * (0.02 + 0.98 * s as f64 / ramp as f64));
        } else if s == ramp {
            c.set_beta(beta);
        }
        c.sweep();
        if (s + 1) % ADAPT_EVERY == 0 {
            c.adapt();
        }
    }
    for _ in 0..chain.samples {
        for _ in 0..chain.thin {
            c.sweep();
        }
        record(c.state());
    }
    Ok(())
}

/// Annealed `Var φ(x)` estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub n: usize,
    pub variance: f64,
    pub std_error: f64,
    /// `G_n(0,0)/β`, the value at `z = 0`.
    pub gff_variance: f64,
    pub max_rhat: f64,
    /// Disorders whose chains fail the R-hat threshold.
    pub unconverged: usize,
    pub n_disorder: usize,
}

/// R-hat threshold above which a disorder's chains count as unconverged.
pub const RHAT_MAX: f64 = 1.1;

/// Annealed variance of `φ` at the centre of a Dirichlet box of size `n`.
pub fn annealed_variance(n: usize, cfg: &SgConfig, n_disorder: usize, seed: u64) -> Result<ProfileRow> {
    cfg.validate()?;
    let lattice = Lattice::new(n, BoundaryCondition::Dirichlet)?;
    let c = lattice.center();
    let _ = lattice.solver();
    let per: Vec<(f64, f64)> = (0..n_disorder)
        .into_par_iter()
        .map(|d| {
            let a = draw_disorder(&lattice, cfg.disorder, &mut stream(seed, &[d as u64]));
            let mut traces = Vec::with_capacity(cfg.chains);
            for k in 0..cfg.chains {
                let mut tr = Vec::with_capacity(cfg.chain.samples);
                let rng = stream(seed, &[d as u64, 1 + k as u64]);
                run_chain(&lattice, &a, cfg.beta, cfg.z, &cfg.chain, rng, |phi| tr.push(phi[c]))?;
                traces.push(tr);
            }
            let sq: Vec<f64> = traces.iter().flatten().map(|x| x * x).collect();
            let refs: Vec<&[f64]> = traces.iter().map(|t| t.as_slice()).collect();
            Ok((mean(&sq), split_rhat(&refs)))
        })
        .collect::<Result<_>>()?;
    let vals: Vec<f64> = per.iter().map(|p| p.0).collect();
    Ok(ProfileRow {
        n,
        variance: mean(&vals),
        std_error: if vals.len() > 1 { std_error(&vals) } else { f64::INFINITY },
        gff_variance: lattice.green(c, c) / cfg.beta,
        max_rhat: per.iter().map(|p| p.1).filter(|r| !r.is_nan()).fold(1.0, f64::max),
        unconverged: per.iter().filter(|p| p.1 > RHAT_MAX).count(),
        n_disorder,
    })
}

pub fn variance_profile(cfg: &SgConfig, ns: &[usize], n_disorder: usize, seed: u64) -> Result<Vec<ProfileRow>> {
    ns.iter()
        .enumerate()
        .map(|(i, &n)| annealed_variance(n, cfg, n_disorder, derive_seed(seed, &[i as u64])))
        .collect()
}

/// Total variation between the annealed law of the pinned model with
/// `GffMod(T)` disorder at `β = 1/T²` and the GFF at the same `β`, on the
/// lattice with one interior vertex. The conditional law given `a` is read
/// off the enumeration table of the integer model; the disorder density is
/// the wrapped Gaussian. Integration over `a` uses `nodes` midpoints.
pub fn annealed_gff_tv(t: f64, window: i64, nodes: usize) -> Result<f64> {
    let lattice = Lattice::new(1, BoundaryCondition::Dirichlet)?;
    let c = lattice.center();
    let beta = 1.0 / (t * t);
    // φ(0) ~ N(0, G/β) with G = 1/4
    let var = 0.25 / beta;
    let gauss = |x: f64| (-0.5 * x * x / var).exp() / (2.0 * PI * var).sqrt();
    let h = 2.0 * PI / nodes as f64;
    let mut tv = 0.0;
    let mut covered = 0.0;
    for i in 0..nodes {
        let a = (i as f64 + 0.5) * h;
        let wrapped: f64 = (-window - 40..=window + 40).map(|k| gauss(a + 2.0 * PI * k as f64)).sum();
        let mut shift = lattice.zero_vertex_field();
        shift[c] = a / (2.0 * PI);
        let table = enumerate_exact(&lattice, &shift, 4.0 * PI * PI * beta, window)?;
        for (m, p) in table.support.iter().zip(&table.probs) {
            let x = a + 2.0 * PI * m[0] as f64;
            let g = gauss(x);
            tv += (wrapped * p - g).abs() * h;
            covered += g * h;
        }
    }
    // GFF mass on fibers outside the window
    Ok(0.5 * (tv + (1.0 - covered).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::total_variation;

    fn dirichlet(n: usize) -> Lattice {
        Lattice::new(n, BoundaryCondition::Dirichlet).unwrap()
    }

    #[test]
    fn acceptance_ratio_is_density_ratio() {
        let l = dirichlet(3);
        let mut rng = stream(1, &[]);
        let a = draw_disorder(&l, Disorder::Uniform, &mut rng);
        let init = GffSampler::new(&l).sample(&mut rng);
        let chain = SgChain::new(&l, &a, 0.7, 2.5, init, stream(2, &[])).unwrap();
        for _ in 0..50 {
            let v = l.interior()[rng.random_range(0..l.interior().len())];
            let x = chain.state()[v] + rng.random_range(-3.0..3.0);
            let mut moved = chain.state().to_vec();
            moved[v] = x;
            let exact = log_density(&l, &moved, &a, 0.7, 2.5) - log_density(&l, chain.state(), &a, 0.7, 2.5);
            assert!((chain.log_acceptance(v, x) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn disorder_is_in_range_and_zero_on_boundary() {
        let l = dirichlet(4);
        for d in [Disorder::Uniform, Disorder::GffMod { t: 2.0 }] {
            let a = draw_disorder(&l, d, &mut stream(3, &[]));
            for v in 0..l.vertex_count() {
                assert!((0.0..2.0 * PI).contains(&a[v]));
                if l.is_boundary(v) {
                    assert_eq!(a[v], 0.0);
                }
            }
        }
    }

    #[test]
    fn shifting_disorder_by_full_turn_leaves_density_unchanged() {
        let l = dirichlet(3);
        let mut rng = stream(4, &[]);
        let a = draw_disorder(&l, Disorder::Uniform, &mut rng);
        let shifted: Vec<f64> = a.iter().map(|x| x + 2.0 * PI).collect();
        let phi = GffSampler::new(&l).sample(&mut rng);
        let d0 = log_density(&l, &phi, &a, 0.3, 1.7);
        let d1 = log_density(&l, &phi, &shifted, 0.3, 1.7);
        assert!((d0 - d1).abs() < 1e-12 * d0.abs().max(1.0));
    }

    fn variance_at(z: f64, seed: u64) -> (f64, f64) {
        let cfg = SgConfig {
            beta: 0.5,
            z,
            disorder: Disorder::Uniform,
            chain: ChainConfig {
                burn_in: 200,
                thin: 4,
                samples: 1500,
                ground_rounds: 100,
            },
            chains: 2,
        };
        let row = annealed_variance(4, &cfg, 8, seed).unwrap();
        (row.variance, row.gff_variance)
    }

    #[test]
    fn zero_activity_reduces_to_gff() {
        let (v, g) = variance_at(0.0, 5);
        assert!((v / g - 1.0).abs() < 0.05, "{v} vs {g}");
    }

    #[test]
    fn small_activity_stays_close_to_gff() {
        let (v, g) = variance_at(0.1, 6);
        assert!((v / g - 1.0).abs() < 0.15, "{v} vs {g}");
    }

    #[test]
    fn adaptation_reaches_target_band() {
        let l = dirichlet(4);
        let mut rng = stream(7, &[]);
        let a = draw_disorder(&l, Disorder::Uniform, &mut rng);
        let mut c = SgChain::new(&l, &a, 0.2, 4.0, l.zero_vertex_field(), stream(8, &[])).unwrap();
        for s in 0..1000 {
            c.sweep();
            if (s + 1) % ADAPT_EVERY == 0 {
                c.adapt();
            }
        }
        for _ in 0..200 {
            c.sweep();
        }
        let r = c.acceptance_rate();
        assert!((0.25..0.55).contains(&r), "{r}");
    }

    #[test]
    fn pinned_model_is_annealed_gff() {
        for t in [1.0, 3.0, 6.0] {
            let tv = annealed_gff_tv(t, 8, 2000).unwrap();
            assert!(tv <= 1e-6, "T={t}: {tv}");
        }
    }

    #[test]
    fn pinned_model_matches_integer_enumeration() {
        // 2x2 interior: pinned chain heights against the table
        let l = Lattice::rectangle(4, 4, BoundaryCondition::Dirichlet).unwrap();
        let mut rng = stream(9, &[]);
        let a = draw_disorder(&l, Disorder::Uniform, &mut rng);
        let beta = 0.04;
        let shift: Vec<f64> = a.iter().map(|x| reduce_unit(x / (2.0 * PI))).collect();
        let table = enumerate_exact(&l, &shift, 4.0 * PI * PI * beta, 4).unwrap();
        let chain = ChainConfig {
            burn_in: 100,
            thin: 2,
            samples: 40_000,
            ground_rounds: 100,
        };
        let mut counts = vec![0.0; table.support.len()];
        run_chain(&l, &a, beta, f64::INFINITY, &chain, stream(10, &[]), |phi| {
            let m: Vec<i64> = table
                .vertices
                .iter()
                .map(|&v| ((phi[v] - a[v]) / (2.0 * PI)).round() as i64)
                .collect();
            if let Some(k) = table.support.iter().position(|s| *s == m) {
                counts[k] += 1.0;
            }
        })
        .unwrap();
        let total: f64 = counts.iter().sum();
        let emp: Vec<f64> = counts.iter().map(|c| c / total).collect();
        let tv = total_variation(&emp, &table.probs);
        assert!(tv < 0.02, "{tv}");
    }
}
