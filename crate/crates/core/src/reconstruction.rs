//! The reconstruction function `F_T = E[φ | e^{iTφ}]` and the coupled-pair
//! estimators of the conditional variance.
//!
//! A *disorder* is a GFF sample `φ` and its phase `a`; for each disorder
//! several pairs of independent heat-bath chains are run on `a`, and
//! statistics of the two lifts are accumulated over the retained times.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gff::GffSampler;
use crate::iv_gff::{run_pair, ChainConfig};
use crate::lattice::{dot, Lattice, VertexField};
use crate::phase::{beta_of, observe, PhaseField};
use crate::rng::{stream, Rng};
use crate::stats::{mean, pairwise_sum, split_rhat, std_error};

/// Budget for the outer disorder loop and the inner chain pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    pub chain: ChainConfig,
    pub pairs_per_disorder: usize,
    /// Pairs whose split R-hat exceeds this are excluded and counted.
    pub rhat_max: f64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            chain: ChainConfig::default(),
            pairs_per_disorder: 4,
            rhat_max: 1.1,
        }
    }
}

impl PairConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chain.samples < 4 || self.chain.thin == 0 || self.pairs_per_disorder == 0 {
            return Err(Error::InvalidParameter(
                "need samples >= 4, thin >= 1 and at least one pair per disorder".into(),
            ));
        }
        Ok(())
    }
}

/// Accumulates a statistic of the two lifts along a pair of chains.
pub trait PairStatistic: Sync {
    type Acc: Send;

    fn start(&self, lattice: &Lattice, phi: &[f64], a: &PhaseField) -> Self::Acc;

    /// Called at every retained time with the two integer fields.
    fn record(&self, acc: &mut Self::Acc, m1: &[i64], m2: &[i64], a: &PhaseField);

    /// Scalar observables of one chain monitored by the R-hat diagnostic.
    fn trace(&self, m: &[i64], a: &PhaseField) -> [f64; 2];
}

/// Outcome of one chain pair.
#[derive(Debug, Clone)]
pub struct PairOutcome<A> {
    pub disorder: usize,
    pub pair: usize,
    pub acc: A,
    pub rhat: f64,
    pub converged: bool,
}

/// Draw the disorder with index `d`: a GFF sample and its phase.
pub fn disorder(lattice: &Lattice, t: f64, seed: u64, d: usize) -> (VertexField, PhaseField) {
    let phi = GffSampler::new(lattice).sample(&mut stream(seed, &[d as u64]));
    let a = observe(lattice, &phi, t);
    (phi, a)
}

/// Run one chain pair on `a`, feeding `stat` at each retained time.
pub fn run_one_pair<S: PairStatistic>(
    lattice: &Lattice,
    phi: &[f64],
    a: &PhaseField,
    cfg: &PairConfig,
    stat: &S,
    mut rng: Rng,
) -> Result<(S::Acc, f64)> {
    let mut acc = stat.start(lattice, phi, a);
    let mut traces = vec![Vec::with_capacity(cfg.chain.samples); 4];
    run_pair(lattice, &a.a, a.beta(), &cfg.chain, &mut rng, |_, m1, m2| {
        stat.record(&mut acc, m1, m2, a);
        let t1 = stat.trace(m1, a);
        let t2 = stat.trace(m2, a);
        traces[0].push(t1[0]);
        traces[1].push(t2[0]);
        traces[2].push(t1[1]);
        traces[3].push(t2[1]);
    })?;
    let r0 = split_rhat(&[&traces[0], &traces[1]]);
    let r1 = split_rhat(&[&traces[2], &traces[3]]);
    Ok((acc, r0.max(r1)))
}

/// Run `pairs_per_disorder` pairs on each of `n_disorder` disorders in
/// parallel. Output order (disorder-major) and values do not depend on the
/// number of worker threads.
pub fn run_pairs<S: PairStatistic>(
    lattice: &Lattice,
    t: f64,
    n_disorder: usize,
    cfg: &PairConfig,
    seed: u64,
    stat: &S,
) -> Result<Vec<PairOutcome<S::Acc>>> {
    cfg.validate()?;
    let _ = lattice.solver();
    let per = cfg.pairs_per_disorder;
    (0..n_disorder * per)
        .into_par_iter()
        .map(|task| {
            let (d, p) = (task / per, task % per);
            let (phi, a) = disorder(lattice, t, seed, d);
            let rng = stream(seed, &[d as u64, 1 + p as u64]);
            let (acc, rhat) = run_one_pair(lattice, &phi, &a, cfg, stat, rng)?;
            Ok(PairOutcome {
                disorder: d,
                pair: p,
                acc,
                rhat,
                converged: !(rhat > cfg.rhat_max),
            })
        })
        .collect()
}

/// A Monte Carlo estimate with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_disorder: usize,
    pub n_chain_pairs: usize,
    /// Pairs dropped for failing the R-hat threshold.
    pub n_excluded: usize,
    pub max_rhat: f64,
}

/// Average per-pair values within each disorder, then across disorders.
/// Standard errors come from the spread of disorder averages.
fn disorder_average(outcomes: &[PairOutcome<f64>], scale: f64) -> VarianceEstimate {
    let n_disorder = outcomes.iter().map(|o| o.disorder + 1).max().unwrap_or(0);
    let mut per_disorder = Vec::new();
    let mut used = 0;
    for d in 0..n_disorder {
        let vals: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.disorder == d && o.converged)
            .map(|o| o.acc)
            .collect();
        if !vals.is_empty() {
            used += vals.len();
            per_disorder.push(mean(&vals));
        }
    }
    let max_rhat = outcomes
        .iter()
        .map(|o| o.rhat)
        .filter(|r| !r.is_nan())
        .fold(1.0, f64::max);
    let value = scale * mean(&per_disorder);
    let se = if per_disorder.len() > 1 {
        scale * std_error(&per_disorder)
    } else {
        f64::INFINITY
    };
    VarianceEstimate {
        value,
        std_error: se,
        n_disorder: per_disorder.len(),
        n_chain_pairs: used,
        n_excluded: outcomes.len() - used,
        max_rhat,
    }
}

/// Mean over retained times of `⟨m1 − m2, f⟩²`, traced by `⟨m + a, f⟩`
/// and the height at a reference vertex.
struct FieldDiffSq {
    f: Vec<f64>,
    reference: usize,
}

impl PairStatistic for FieldDiffSq {
    type Acc = (f64, usize);

    fn start(&self, _: &Lattice, _: &[f64], _: &PhaseField) -> Self::Acc {
        (0.0, 0)
    }

    fn record(&self, acc: &mut Self::Acc, m1: &[i64], m2: &[i64], _: &PhaseField) {
        let d: f64 = m1
            .iter()
            .zip(m2)
            .zip(&self.f)
            .map(|((&x, &y), &w)| (x - y) as f64 * w)
            .sum();
        acc.0 += d * d;
        acc.1 += 1;
    }

    fn trace(&self, m: &[i64], a: &PhaseField) -> [f64; 2] {
        let s: f64 = m
            .iter()
            .zip(a.a.iter())
            .zip(&self.f)
            .map(|((&k, &x), &w)| (k as f64 + x) * w)
            .sum();
        let v = self.reference;
        [s, m[v] as f64 + a.a[v]]
    }
}

/// `½E[⟨φ₁ − φ₂, f⟩²]` over disorders and chain pairs.
pub fn conditional_variance(
    lattice: &Lattice,
    f: &[f64],
    t: f64,
    n_disorder: usize,
    cfg: &PairConfig,
    seed: u64,
) -> Result<VarianceEstimate> {
    lattice.check_len(f.len())?;
    if f.iter().all(|&x| x == 0.0) {
        return Ok(VarianceEstimate {
            value: 0.0,
            std_error: 0.0,
            n_disorder,
            n_chain_pairs: 0,
            n_excluded: 0,
            max_rhat: 1.0,
        });
    }
    let stat = FieldDiffSq {
        f: f.to_vec(),
        reference: lattice.center(),
    };
    let out = run_pairs(lattice, t, n_disorder, cfg, seed, &stat)?;
    let per_pair: Vec<PairOutcome<f64>> = out
        .into_iter()
        .map(|o| PairOutcome {
            acc: o.acc.0 / o.acc.1 as f64,
            disorder: o.disorder,
            pair: o.pair,
            rhat: o.rhat,
            converged: o.converged,
        })
        .collect();
    let scale = 0.5 * (2.0 * PI / t).powi(2);
    Ok(disorder_average(&per_pair, scale))
}

/// Subtract the lattice average (test functions for the free field must
/// have zero mean).
pub fn recentre(f: &[f64]) -> Vec<f64> {
    let m = pairwise_sum(f) / f.len() as f64;
    f.iter().map(|x| x - m).collect()
}

/// Per-site and two-point statistics of `φ₁ − φ₂` at a vertex `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnePointStats {
    /// `E[(φ₁ − φ₂)²(x)]`.
    pub var_diff: VarianceEstimate,
    /// `(‖x − y‖ in lattice steps, E[(φ₁−φ₂)(x)(φ₁−φ₂)(y)], std error)`.
    pub two_point: Vec<(f64, f64, f64)>,
}

struct PointDiff {
    points: Vec<usize>,
}

impl PairStatistic for PointDiff {
    // sums of D(x)D(y) for each y (the first entry is y = x), and the count
    type Acc = (Vec<f64>, usize);

    fn start(&self, _: &Lattice, _: &[f64], _: &PhaseField) -> Self::Acc {
        (vec![0.0; self.points.len()], 0)
    }

    fn record(&self, acc: &mut Self::Acc, m1: &[i64], m2: &[i64], _: &PhaseField) {
        let x = self.points[0];
        let dx = (m1[x] - m2[x]) as f64;
        for (s, &y) in acc.0.iter_mut().zip(&self.points) {
            *s += dx * (m1[y] - m2[y]) as f64;
        }
        acc.1 += 1;
    }

    fn trace(&self, m: &[i64], a: &PhaseField) -> [f64; 2] {
        let x = self.points[0];
        let s: f64 = self.points.iter().map(|&y| m[y] as f64 + a.a[y]).sum();
        [m[x] as f64 + a.a[x], s]
    }
}

/// Vertices on the horizontal ray to the right of `x`, up to the last
/// non-boundary vertex.
pub fn ray_from(lattice: &Lattice, x: usize) -> Vec<usize> {
    let (i, j) = lattice.grid_pos(x);
    (i + 1..lattice.nx())
        .map(|k| lattice.vertex(k, j))
        .take_while(|&v| !lattice.is_boundary(v))
        .collect()
}

pub fn one_point_stats(
    lattice: &Lattice,
    t: f64,
    x: usize,
    ray: &[usize],
    n_disorder: usize,
    cfg: &PairConfig,
    seed: u64,
) -> Result<OnePointStats> {
    if lattice.is_boundary(x) {
        return Err(Error::BoundaryViolation(x));
    }
    let mut points = vec![x];
    points.extend_from_slice(ray);
    let stat = PointDiff { points };
    let out = run_pairs(lattice, t, n_disorder, cfg, seed, &stat)?;
    let scale = (2.0 * PI / t).powi(2);
    let column = |k: usize| -> VarianceEstimate {
        let per_pair: Vec<PairOutcome<f64>> = out
            .iter()
            .map(|o| PairOutcome {
                acc: o.acc.0[k] / o.acc.1 as f64,
                disorder: o.disorder,
                pair: o.pair,
                rhat: o.rhat,
                converged: o.converged,
            })
            .collect();
        disorder_average(&per_pair, scale)
    };
    let var_diff = column(0);
    let (xi, xj) = lattice.grid_pos(x);
    let two_point = ray
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let (yi, yj) = lattice.grid_pos(y);
            let dist = ((yi as f64 - xi as f64).powi(2) + (yj as f64 - xj as f64).powi(2)).sqrt();
            let est = column(k + 1);
            (dist, est.value, est.std_error)
        })
        .collect();
    Ok(OnePointStats { var_diff, two_point })
}

/// Estimate of `F_T(a)` from the retained states of several chains.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    pub mean_field: VertexField,
    pub per_site_var: VertexField,
    pub max_rhat: f64,
    pub converged: bool,
    pub t: f64,
    pub sweeps: usize,
}

struct MomentAcc;

impl PairStatistic for MomentAcc {
    // per-vertex sums of m and m² over both chains, and the count
    type Acc = (Vec<f64>, Vec<f64>, usize);

    fn start(&self, lattice: &Lattice, _: &[f64], _: &PhaseField) -> Self::Acc {
        let n = lattice.vertex_count();
        (vec![0.0; n], vec![0.0; n], 0)
    }

    fn record(&self, acc: &mut Self::Acc, m1: &[i64], m2: &[i64], _: &PhaseField) {
        for m in [m1, m2] {
            for (v, &k) in m.iter().enumerate() {
                let k = k as f64;
                acc.0[v] += k;
                acc.1[v] += k * k;
            }
            acc.2 += 1;
        }
    }

    fn trace(&self, m: &[i64], a: &PhaseField) -> [f64; 2] {
        let s: f64 = m.iter().zip(a.a.iter()).map(|(&k, &x)| k as f64 + x).sum();
        let c = m.len() / 2;
        [s, m[c] as f64 + a.a[c]]
    }
}

/// `F_T(a)(x) = (2π/T)(a(x) + E[m(x)])`, averaged over the retained states
/// of `pairs_per_disorder` chain pairs.
pub fn reconstruct(lattice: &Lattice, a: &PhaseField, cfg: &PairConfig, seed: u64) -> Result<ReconResult> {
    cfg.validate()?;
    lattice.check_len(a.a.len())?;
    let stat = MomentAcc;
    let results: Vec<(<MomentAcc as PairStatistic>::Acc, f64)> = (0..cfg.pairs_per_disorder)
        .into_par_iter()
        .map(|p| run_one_pair(lattice, &a.a, a, cfg, &stat, stream(seed, &[p as u64])))
        .collect::<Result<_>>()?;
    let n = lattice.vertex_count();
    let count: usize = results.iter().map(|r| r.0 .2).sum();
    let scale = 2.0 * PI / a.t;
    let mut mean_field = vec![0.0; n];
    let mut per_site_var = vec![0.0; n];
    for v in 0..n {
        let s: Vec<f64> = results.iter().map(|r| r.0 .0[v]).collect();
        let s2: Vec<f64> = results.iter().map(|r| r.0 .1[v]).collect();
        let m = pairwise_sum(&s) / count as f64;
        let m2 = pairwise_sum(&s2) / count as f64;
        mean_field[v] = scale * (a.a[v] + m);
        per_site_var[v] = scale * scale * (m2 - m * m).max(0.0);
    }
    let max_rhat = results
        .iter()
        .map(|r| r.1)
        .filter(|r| !r.is_nan())
        .fold(1.0, f64::max);
    Ok(ReconResult {
        mean_field: mean_field.into(),
        per_site_var: per_site_var.into(),
        max_rhat,
        converged: max_rhat <= cfg.rhat_max,
        t: a.t,
        sweeps: cfg.chain.total_sweeps(),
    })
}

/// `E[φ(x) | a]` on a lattice with a single interior vertex, by direct
/// summation over the fiber.
pub fn single_site_posterior_mean(a: f64, t: f64, degree: usize) -> f64 {
    let beta = beta_of(t) * degree as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for m in -200..=200 {
        let h = m as f64 + a;
        let w = (-0.5 * beta * h * h).exp();
        num += w * h;
        den += w;
    }
    2.0 * PI / t * num / den
}

/// One row of the localisation/delocalisation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub t: f64,
    pub n: usize,
    /// `½E[(φ₁ − φ₂)(0)²] / G_n(0,0)`.
    pub ratio: f64,
    pub std_error: f64,
    pub max_rhat: f64,
    pub n_excluded: usize,
}

pub fn transition_sweep(
    ts: &[f64],
    ns: &[usize],
    n_disorder: usize,
    cfg: &PairConfig,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if ts.is_empty() || ns.is_empty() {
        return Err(Error::InvalidParameter("empty temperature or size grid".into()));
    }
    let mut rows = Vec::new();
    for (ti, &t) in ts.iter().enumerate() {
        for (ni, &n) in ns.iter().enumerate() {
            let lattice = Lattice::new(n, crate::lattice::BoundaryCondition::Dirichlet)?;
            let c = lattice.center();
            let mut f = vec![0.0; lattice.vertex_count()];
            f[c] = 1.0;
            let task_seed = crate::rng::derive_seed(seed, &[ti as u64, ni as u64]);
            let est = conditional_variance(&lattice, &f, t, n_disorder, cfg, task_seed)?;
            let g = lattice.green(c, c);
            rows.push(SweepRow {
                t,
                n,
                ratio: est.value / g,
                std_error: est.std_error / g,
                max_rhat: est.max_rhat,
                n_excluded: est.n_excluded,
            });
        }
    }
    Ok(rows)
}

/// `n⁻²⟨φ, f⟩`, the macroscopic pairing.
pub fn macroscopic(lattice: &Lattice, phi: &[f64], f: &[f64]) -> f64 {
    dot(phi, f) / (lattice.n() as f64).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BoundaryCondition;

    fn quick() -> PairConfig {
        PairConfig {
            chain: ChainConfig {
                burn_in: 100,
                thin: 2,
                samples: 50,
                ground_rounds: 1000,
            },
            pairs_per_disorder: 2,
            rhat_max: 1.1,
        }
    }

    #[test]
    fn zero_test_function_has_zero_variance() {
        let l = Lattice::new(3, BoundaryCondition::Dirichlet).unwrap();
        let est = conditional_variance(&l, &vec![0.0; l.vertex_count()], 1.0, 4, &quick(), 1).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn zero_phase_at_low_temperature_reconstructs_zero() {
        let l = Lattice::new(4, BoundaryCondition::Dirichlet).unwrap();
        let a = PhaseField::zeros(&l, 0.5);
        let r = reconstruct(&l, &a, &quick(), 3).unwrap();
        assert!(r.mean_field.iter().all(|&x| x == 0.0));
        assert!(r.converged);
    }

    #[test]
    fn single_site_reconstruction_matches_direct_sum() {
        let l = Lattice::new(1, BoundaryCondition::Dirichlet).unwrap();
        let c = l.center();
        let t = 3.0;
        let mut raw = vec![0.0; 9];
        raw[c] = 0.37;
        let a = PhaseField::new(&l, raw, t).unwrap();
        let cfg = PairConfig {
            chain: ChainConfig {
                burn_in: 100,
                thin: 1,
                samples: 40_000,
                ground_rounds: 100,
            },
            pairs_per_disorder: 2,
            rhat_max: 1.1,
        };
        let r = reconstruct(&l, &a, &cfg, 5).unwrap();
        let exact = single_site_posterior_mean(0.37, t, 4);
        let se = (r.per_site_var[c] / (4.0 * 40_000.0)).sqrt();
        assert!((r.mean_field[c] - exact).abs() < 4.0 * se, "{} vs {exact} ± {se}", r.mean_field[c]);
        // the direct sum is the one-site conditional mean in the 2π convention
        let x = 2.0 * PI * (0.37f64 - 0.37f64.round());
        let via_theta = crate::theta::cond_mean_primal(4.0 / (t * t), x) / t;
        assert!((exact - via_theta).abs() < 1e-12);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let l = Lattice::new(4, BoundaryCondition::Dirichlet).unwrap();
        let mut f = vec![0.0; l.vertex_count()];
        f[l.center()] = 1.0;
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| conditional_variance(&l, &f, 2.0, 6, &quick(), 11).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn one_point_stats_shapes() {
        let l = Lattice::new(4, BoundaryCondition::Dirichlet).unwrap();
        let c = l.center();
        let ray = ray_from(&l, c);
        assert_eq!(ray.len(), 3);
        let s = one_point_stats(&l, 4.0, c, &ray, 4, &quick(), 2).unwrap();
        assert_eq!(s.two_point.len(), 3);
        assert!(s.var_diff.value >= 0.0);
        assert_eq!(s.two_point[0].0, 1.0);
    }

    #[test]
    fn recentre_gives_zero_mean() {
        let f = recentre(&[1.0, 2.0, 3.0, 6.0]);
        assert!(pairwise_sum(&f).abs() < 1e-15);
    }
}
