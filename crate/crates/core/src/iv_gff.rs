//! The `a`-shifted integer-valued GFF: integer fields `m` with boundary
//! value 0 and mass `∝ exp(−(β/2)⟨∇(m+a), ∇(m+a)⟩)`.
//!
//! Includes a single-site heat-bath sampler, an iterated-conditional-modes
//! ground-state search and exact enumeration for tiny lattices.

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::lattice::{IntegerField, Lattice};
use crate::rng::Rng as ChainRng;
use crate::stats::{log_sum_exp, split_rhat};

/// `(β/2)⟨∇(m+a), ∇(m+a)⟩`.
pub fn energy(lattice: &Lattice, m: &[i64], a: &[f64], beta: f64) -> f64 {
    let h: Vec<f64> = m.iter().zip(a).map(|(&k, &x)| k as f64 + x).collect();
    0.5 * beta * lattice.dirichlet_energy(&h)
}

/// Half-width of the heat-bath enumeration window around the conditional mode.
pub fn window_radius(beta: f64, degree: usize) -> i64 {
    (8.0 / (beta * degree as f64).sqrt()).ceil() as i64 + 2
}

/// Unnormalized heat-bath weights `exp(−c(k−μ)²)` for `k = lo, lo+1, …`,
/// written into `out`. Returns `lo`.
fn conditional_weights(mu: f64, c: f64, radius: i64, out: &mut Vec<f64>) -> i64 {
    let k0 = mu.round();
    let lo = k0 as i64 - radius;
    let len = (2 * radius + 1) as usize;
    out.clear();
    out.resize(len, 0.0);
    let mid = radius as usize;
    let d = k0 - mu;
    let q = (-2.0 * c).exp();
    out[mid] = (-c * d * d).exp();
    // w(k+1)/w(k) = exp(−c(2(k−μ)+1)), and the ratio shrinks by e^{−2c} per step
    let mut w = out[mid];
    let mut r = (-c * (2.0 * d + 1.0)).exp();
    for slot in out[mid + 1..].iter_mut() {
        w *= r;
        r *= q;
        *slot = w;
    }
    let mut w = out[mid];
    let mut r = (-c * (1.0 - 2.0 * d)).exp();
    for slot in out[..mid].iter_mut().rev() {
        w *= r;
        r *= q;
        *slot = w;
    }
    lo
}

/// Heat-bath Markov chain targeting the shifted integer-valued GFF.
#[derive(Debug, Clone)]
pub struct IvGibbsChain<'a, R> {
    lattice: &'a Lattice,
    beta: f64,
    a: Vec<f64>,
    m: Vec<i64>,
    h: Vec<f64>,
    sweeps: u64,
    rng: R,
    buf: Vec<f64>,
}

impl<'a, R: Rng> IvGibbsChain<'a, R> {
    pub fn new(lattice: &'a Lattice, a: &[f64], beta: f64, init: IntegerField, rng: R) -> Result<Self> {
        lattice.check_len(a.len())?;
        lattice.check_len(init.len())?;
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta {beta}")));
        }
        for v in 0..lattice.vertex_count() {
            if lattice.is_boundary(v) && (init[v] != 0 || a[v] != 0.0) {
                return Err(Error::BoundaryViolation(v));
            }
        }
        let m = init.into_vec();
        let h = m.iter().zip(a).map(|(&k, &x)| k as f64 + x).collect();
        Ok(Self {
            lattice,
            beta,
            a: a.to_vec(),
            m,
            h,
            sweeps: 0,
            rng,
            buf: Vec::new(),
        })
    }

    pub fn state(&self) -> &[i64] {
        &self.m
    }

    /// Current `m + a`.
    pub fn heights(&self) -> &[f64] {
        &self.h
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps
    }

    pub fn into_state(self) -> IntegerField {
        IntegerField::from_vec(self.m)
    }

    fn neighbor_mean(&self, v: usize) -> (f64, usize) {
        let nb = self.lattice.neighbors(v);
        let s: f64 = nb.iter().map(|&w| self.h[w]).sum();
        (s / nb.len() as f64, nb.len())
    }

    /// Conditional law of `m_v` given the rest: `(lowest value, probabilities)`.
    pub fn site_conditional(&self, v: usize) -> (i64, Vec<f64>) {
        let (mean, deg) = self.neighbor_mean(v);
        let mu = mean - self.a[v];
        let mut w = Vec::new();
        let lo = conditional_weights(mu, 0.5 * self.beta * deg as f64, window_radius(self.beta, deg), &mut w);
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        (lo, w)
    }

    /// One systematic row-major sweep of heat-bath updates.
    pub fn sweep(&mut self) {
        let beta = self.beta;
        for idx in 0..self.lattice.interior().len() {
            let v = self.lattice.interior()[idx];
            let (mean, deg) = self.neighbor_mean(v);
            let mu = mean - self.a[v];
            let lo = conditional_weights(mu, 0.5 * beta * deg as f64, window_radius(beta, deg), &mut self.buf);
            let total: f64 = self.buf.iter().sum();
            let mut u = self.rng.random::<f64>() * total;
            let mut pick = self.buf.len() - 1;
            for (j, &w) in self.buf.iter().enumerate() {
                if u < w {
                    pick = j;
                    break;
                }
                u -= w;
            }
            let k = lo + pick as i64;
            self.m[v] = k;
            self.h[v] = k as f64 + self.a[v];
        }
        self.sweeps += 1;
    }
}

/// Index of the integer minimizing `(k − μ)²`, ties resolved so that
/// `k + a ∈ (−1/2, 1/2]`, then by smaller `|k + a|`, then by smaller `k`.
fn site_argmin(mu: f64, a: f64) -> i64 {
    let lo = mu.floor();
    let hi = lo + 1.0;
    let dl = (lo - mu).abs();
    let dh = (hi - mu).abs();
    if dl < dh {
        return lo as i64;
    }
    if dh < dl {
        return hi as i64;
    }
    let centered = |k: f64| k + a > -0.5 && k + a <= 0.5;
    match (centered(lo), centered(hi)) {
        (true, false) => lo as i64,
        (false, true) => hi as i64,
        _ => {
            if (hi + a).abs() < (lo + a).abs() {
                hi as i64
            } else {
                lo as i64
            }
        }
    }
}

/// Result of the coordinate-descent ground-state search.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub m: IntegerField,
    pub rounds: usize,
    pub converged: bool,
}

/// Iterated conditional modes on `⟨∇(m+a), ∇(m+a)⟩` starting from `init`.
/// Stops at a local minimum or after `max_rounds` sweeps.
pub fn ground_state(
    lattice: &Lattice,
    a: &[f64],
    init: &IntegerField,
    max_rounds: usize,
) -> Result<GroundState> {
    lattice.check_len(a.len())?;
    lattice.check_len(init.len())?;
    for v in 0..lattice.vertex_count() {
        if lattice.is_boundary(v) && init[v] != 0 {
            return Err(Error::BoundaryViolation(v));
        }
    }
    let mut m = init.clone();
    let mut h: Vec<f64> = m.iter().zip(a).map(|(&k, &x)| k as f64 + x).collect();
    for round in 1..=max_rounds {
        let mut changed = false;
        for &v in lattice.interior() {
            let nb = lattice.neighbors(v);
            let mean = nb.iter().map(|&w| h[w]).sum::<f64>() / nb.len() as f64;
            let k = site_argmin(mean - a[v], a[v]);
            if k != m[v] {
                m[v] = k;
                h[v] = k as f64 + a[v];
                changed = true;
            }
        }
        if !changed {
            return Ok(GroundState {
                m,
                rounds: round,
                converged: true,
            });
        }
    }
    Ok(GroundState {
        m,
        rounds: max_rounds,
        converged: false,
    })
}

/// Integer lift obtained by growing a spanning tree from the boundary and
/// choosing each new height within 1/2 of its parent's. With `rng`, the
/// tree grows from a uniformly random frontier edge at each step; without,
/// breadth-first in row-major order.
pub fn unwrap_lift<R: Rng + ?Sized>(lattice: &Lattice, a: &[f64], rng: Option<&mut R>) -> IntegerField {
    let count = lattice.vertex_count();
    let mut m = lattice.zero_integer_field();
    let mut seen: Vec<bool> = lattice.boundary_mask().to_vec();
    let mut frontier: Vec<(usize, usize)> = Vec::new();
    for v in 0..count {
        if seen[v] {
            for &w in lattice.neighbors(v) {
                if !seen[w] {
                    frontier.push((v, w));
                }
            }
        }
    }
    let attach = |m: &mut IntegerField, parent: usize, v: usize| {
        let hp = m[parent] as f64 + a[parent];
        m[v] = (hp - a[v]).round() as i64;
    };
    match rng {
        None => {
            let mut head = 0;
            while head < frontier.len() {
                let (p, v) = frontier[head];
                head += 1;
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                attach(&mut m, p, v);
                for &w in lattice.neighbors(v) {
                    if !seen[w] {
                        frontier.push((v, w));
                    }
                }
            }
        }
        Some(rng) => {
            while !frontier.is_empty() {
                let j = rng.random_range(0..frontier.len());
                let (p, v) = frontier.swap_remove(j);
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                attach(&mut m, p, v);
                for &w in lattice.neighbors(v) {
                    if !seen[w] {
                        frontier.push((v, w));
                    }
                }
            }
        }
    }
    m
}

/// Exact law over `m ∈ {−K..K}^interior`.
#[derive(Debug, Clone)]
pub struct IvDistributionTable {
    pub window: i64,
    pub vertices: Vec<usize>,
    pub support: Vec<Vec<i64>>,
    pub probs: Vec<f64>,
    pub log_partition: f64,
    /// Mass on configurations touching the window edge; an estimate of the
    /// truncation error.
    pub shell_mass: f64,
}

impl IvDistributionTable {
    fn index_of(&self, values: &[i64]) -> Option<usize> {
        let base = (2 * self.window + 1) as usize;
        let mut idx = 0usize;
        for &x in values {
            if x.abs() > self.window {
                return None;
            }
            idx = idx * base + (x + self.window) as usize;
        }
        Some(idx)
    }

    /// Probability of a full integer field.
    pub fn prob(&self, m: &[i64]) -> f64 {
        let vals: Vec<i64> = self.vertices.iter().map(|&v| m[v]).collect();
        self.index_of(&vals).map_or(0.0, |i| self.probs[i])
    }

    /// Marginal of `m_v` over `−K..=K`.
    pub fn marginal(&self, v: usize) -> Vec<f64> {
        let pos = self
            .vertices
            .iter()
            .position(|&x| x == v)
            .expect("vertex is in the table");
        let mut out = vec![0.0; (2 * self.window + 1) as usize];
        for (cfg, &p) in self.support.iter().zip(&self.probs) {
            out[(cfg[pos] + self.window) as usize] += p;
        }
        out
    }

    /// `E[g(m)]` where `g` receives the interior values in table order.
    pub fn expect(&self, g: impl Fn(&[i64]) -> f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(cfg, &p)| p * g(cfg))
            .sum()
    }
}

/// Enumerate the exact law on a lattice with at most 6 interior vertices.
pub fn enumerate_exact(lattice: &Lattice, a: &[f64], beta: f64, window: i64) -> Result<IvDistributionTable> {
    lattice.check_len(a.len())?;
    let vertices = lattice.interior().to_vec();
    let count = vertices.len();
    if count > 6 {
        return Err(Error::TooLarge(format!("{count} interior vertices (max 6)")));
    }
    if !(1..=12).contains(&window) {
        return Err(Error::TooLarge(format!("window {window} (must be 1..=12)")));
    }
    let base = (2 * window + 1) as usize;
    let total = base
        .checked_pow(count as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::TooLarge(format!("{base}^{count} configurations")))?;
    let mut m = vec![0i64; lattice.vertex_count()];
    let mut support = Vec::with_capacity(total);
    let mut logw = Vec::with_capacity(total);
    let mut digits = vec![-window; count];
    for _ in 0..total {
        for (k, &v) in vertices.iter().enumerate() {
            m[v] = digits[k];
        }
        logw.push(-energy(lattice, &m, a, beta));
        support.push(digits.clone());
        for d in digits.iter_mut().rev() {
            if *d < window {
                *d += 1;
                break;
            }
            *d = -window;
        }
    }
    let log_partition = log_sum_exp(&logw);
    let probs: Vec<f64> = logw.iter().map(|&w| (w - log_partition).exp()).collect();
    let shell_mass = support
        .iter()
        .zip(&probs)
        .filter(|(cfg, _)| cfg.iter().any(|x| x.abs() == window))
        .map(|(_, &p)| p)
        .sum();
    Ok(IvDistributionTable {
        window,
        vertices,
        support,
        probs,
        log_partition,
        shell_mass,
    })
}

/// Sweep budget for a pair of chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub thin: usize,
    /// Number of recorded states after burn-in.
    pub samples: usize,
    /// Round limit for the ground-state search used to start chain 1.
    pub ground_rounds: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            thin: 10,
            samples: 100,
            ground_rounds: 10_000,
        }
    }
}

impl ChainConfig {
    pub fn total_sweeps(&self) -> usize {
        self.burn_in + self.thin * self.samples
    }
}

/// Starting states for the two chains of a coupled pair: a ground state
/// found from a deterministic unwrapping, and an independent lift grown
/// along a random spanning tree.
pub fn pair_initial_states<R: Rng + ?Sized>(
    lattice: &Lattice,
    a: &[f64],
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<(IntegerField, IntegerField, bool)> {
    let start = unwrap_lift::<R>(lattice, a, None);
    let gs = ground_state(lattice, a, &start, cfg.ground_rounds)?;
    let other = unwrap_lift(lattice, a, Some(rng));
    Ok((gs.m, other, gs.converged))
}

/// Run two independent chains on the same shift `a` and call `record` with
/// both states at every retained time. Returns the terminal states.
pub fn run_pair<R, F>(
    lattice: &Lattice,
    a: &[f64],
    beta: f64,
    cfg: &ChainConfig,
    mut rng: R,
    mut record: F,
) -> Result<(IntegerField, IntegerField)>
where
    R: Rng,
    F: FnMut(usize, &[i64], &[i64]),
{
    let (init1, init2, _) = pair_initial_states(lattice, a, cfg, &mut rng)?;
    let seed1: u64 = rng.random();
    let seed2: u64 = rng.random();
    let mut c1 = IvGibbsChain::new(lattice, a, beta, init1, ChainRng::seed_from_u64(seed1))?;
    let mut c2 = IvGibbsChain::new(lattice, a, beta, init2, ChainRng::seed_from_u64(seed2))?;
    for _ in 0..cfg.burn_in {
        c1.sweep();
        c2.sweep();
    }
    for t in 0..cfg.samples {
        for _ in 0..cfg.thin {
            c1.sweep();
            c2.sweep();
        }
        record(t, c1.state(), c2.state());
    }
    Ok((c1.into_state(), c2.into_state()))
}

/// Terminal states of a coupled pair.
pub fn sample_pair<R: Rng>(
    lattice: &Lattice,
    a: &[f64],
    beta: f64,
    cfg: &ChainConfig,
    rng: R,
) -> Result<(IntegerField, IntegerField)> {
    run_pair(lattice, a, beta, cfg, rng, |_, _, _| {})
}

/// Split-chain R-hat of a scalar observable recorded along both chains.
pub fn pair_rhat(series1: &[f64], series2: &[f64]) -> f64 {
    split_rhat(&[series1, series2])
}
