//! Agreement sets of two lifts and the disagreement clusters around them.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::Result;
use crate::iv_gff::{run_pair, ChainConfig};
use crate::lattice::{BoundaryCondition, Lattice};
use crate::reconstruction::disorder;
use crate::rng::stream;
use crate::stats::{linear_fit, LinearFit};

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Connected components of the subgraph induced by `keep`, by union-find.
/// Vertices outside `keep` get `usize::MAX`; components are numbered from 0
/// in order of their smallest vertex.
pub fn components(lattice: &Lattice, keep: impl Fn(usize) -> bool) -> (Vec<usize>, usize) {
    let n = lattice.vertex_count();
    let mut uf = UnionFind::new(n);
    for &(a, b) in lattice.edges() {
        if keep(a) && keep(b) {
            uf.union(a, b);
        }
    }
    let mut id = vec![usize::MAX; n];
    let mut root_id = vec![usize::MAX; n];
    let mut count = 0;
    for v in 0..n {
        if !keep(v) {
            continue;
        }
        let r = uf.find(v);
        if root_id[r] == usize::MAX {
            root_id[r] = count;
            count += 1;
        }
        id[v] = root_id[r];
    }
    (id, count)
}

/// Same labelling as [`components`], by breadth-first search.
pub fn components_bfs(lattice: &Lattice, keep: impl Fn(usize) -> bool) -> (Vec<usize>, usize) {
    let n = lattice.vertex_count();
    let mut id = vec![usize::MAX; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for s in 0..n {
        if !keep(s) || id[s] != usize::MAX {
            continue;
        }
        id[s] = count;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &w in lattice.neighbors(v) {
                if keep(w) && id[w] == usize::MAX {
                    id[w] = count;
                    queue.push_back(w);
                }
            }
        }
        count += 1;
    }
    (id, count)
}

/// Extent of a vertex set in lattice steps: the larger side of its
/// bounding box.
fn extent(lattice: &Lattice, vs: impl Iterator<Item = usize>) -> Option<usize> {
    let mut bb: Option<(usize, usize, usize, usize)> = None;
    for v in vs {
        let (i, j) = lattice.grid_pos(v);
        bb = Some(match bb {
            None => (i, i, j, j),
            Some((i0, i1, j0, j1)) => (i0.min(i), i1.max(i), j0.min(j), j1.max(j)),
        });
    }
    bb.map(|(i0, i1, j0, j1)| (i1 - i0).max(j1 - j0))
}

/// Partition of the vertices into the agreement set (label 0) and the
/// components of its complement (labels 1, 2, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentMap {
    pub label: Vec<usize>,
    /// Offset `m₂ − m₁` on the agreement set (free boundary only).
    pub m_i: Option<i64>,
    /// Extent of each label class; `None` for an empty class.
    pub diam: Vec<Option<usize>>,
    pub empty_i: bool,
}

impl ComponentMap {
    fn build(lattice: &Lattice, in_i: &[bool], m_i: Option<i64>, empty_i: bool) -> Self {
        let (id, count) = components(lattice, |v| !in_i[v]);
        let label: Vec<usize> = id
            .iter()
            .map(|&c| if c == usize::MAX { 0 } else { c + 1 })
            .collect();
        let mut members = vec![Vec::new(); count + 1];
        for (v, &l) in label.iter().enumerate() {
            members[l].push(v);
        }
        let diam = members
            .iter()
            .map(|vs| extent(lattice, vs.iter().copied()))
            .collect();
        Self {
            label,
            m_i,
            diam,
            empty_i,
        }
    }

    pub fn component_count(&self) -> usize {
        self.diam.len() - 1
    }

    pub fn in_agreement(&self, v: usize) -> bool {
        self.label[v] == 0
    }

    /// Extent of `O(x)`, or `None` when `x` lies in the agreement set.
    pub fn cluster_diam(&self, x: usize) -> Option<usize> {
        match self.label[x] {
            0 => None,
            l => self.diam[l],
        }
    }
}

/// Agreement set for Dirichlet lifts: the component of `{m₁ = m₂}` that
/// contains the boundary frame.
pub fn agreement_dirichlet(lattice: &Lattice, m1: &[i64], m2: &[i64]) -> Result<ComponentMap> {
    lattice.check_len(m1.len())?;
    lattice.check_len(m2.len())?;
    let (id, _) = components(lattice, |v| m1[v] == m2[v]);
    let mut touches = vec![false; lattice.vertex_count()];
    for v in 0..lattice.vertex_count() {
        if lattice.is_boundary(v) && id[v] != usize::MAX {
            touches[id[v]] = true;
        }
    }
    let in_i: Vec<bool> = id.iter().map(|&c| c != usize::MAX && touches[c]).collect();
    Ok(ComponentMap::build(lattice, &in_i, None, false))
}

/// Agreement set for free-boundary lifts. For every value `k` of `m₂ − m₁`
/// take its largest level component (ties to the smallest vertex index);
/// if exactly one of these has extent above `n/2` it becomes `I`, otherwise
/// `I` is empty and all vertices form one cluster.
pub fn agreement_free(lattice: &Lattice, m1: &[i64], m2: &[i64]) -> Result<ComponentMap> {
    lattice.check_len(m1.len())?;
    lattice.check_len(m2.len())?;
    let nv = lattice.vertex_count();
    let diff: Vec<i64> = m2.iter().zip(m1).map(|(b, a)| b - a).collect();
    let mut uf = UnionFind::new(nv);
    for &(a, b) in lattice.edges() {
        if diff[a] == diff[b] {
            uf.union(a, b);
        }
    }
    // per root: size, smallest vertex, members
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for v in 0..nv {
        let r = uf.find(v);
        members[r].push(v);
    }
    let mut best: std::collections::BTreeMap<i64, (usize, usize)> = Default::default();
    for (r, vs) in members.iter().enumerate() {
        let Some(&first) = vs.first() else { continue };
        let k = diff[first];
        let e = best.entry(k).or_insert((r, first));
        let cur = &members[e.0];
        if vs.len() > cur.len() || (vs.len() == cur.len() && first < e.1) {
            *e = (r, first);
        }
    }
    let half = lattice.n() as f64 / 2.0;
    let big: Vec<(i64, usize)> = best
        .iter()
        .filter(|(_, &(r, _))| extent(lattice, members[r].iter().copied()).unwrap_or(0) as f64 > half)
        .map(|(&k, &(r, _))| (k, r))
        .collect();
    if let [(k, r)] = big[..] {
        let mut in_i = vec![false; nv];
        for &v in &members[r] {
            in_i[v] = true;
        }
        Ok(ComponentMap::build(lattice, &in_i, Some(k), false))
    } else {
        Ok(ComponentMap::build(lattice, &vec![false; nv], None, true))
    }
}

/// Agreement set for the lattice's boundary condition.
pub fn agreement(lattice: &Lattice, m1: &[i64], m2: &[i64]) -> Result<ComponentMap> {
    match lattice.bc() {
        BoundaryCondition::Dirichlet => agreement_dirichlet(lattice, m1, m2),
        BoundaryCondition::Free { .. } => agreement_free(lattice, m1, m2),
    }
}

/// Count edges between a cluster and the agreement set on which neither
/// lift has a gradient of at least half a fiber period (in units of the
/// period, so `π/T` becomes `1/2`). The two lifts differ by a nonzero
/// integer across such an edge, so the count is always zero.
pub fn gradient_rule_violations(
    lattice: &Lattice,
    map: &ComponentMap,
    m1: &[i64],
    m2: &[i64],
    a: &[f64],
) -> usize {
    lattice
        .edges()
        .iter()
        .filter(|&&(u, w)| (map.label[u] == 0) != (map.label[w] == 0))
        .filter(|&&(u, w)| {
            let d1 = (m1[u] - m1[w]) as f64 + (a[u] - a[w]);
            let d2 = (m2[u] - m2[w]) as f64 + (a[u] - a[w]);
            // (d1 − d2) is an exact nonzero integer; allow for the rounding
            // of the shared fractional part
            d1.abs().max(d2.abs()) < 0.5 - 1e-12
        })
        .count()
}

/// Empirical survival function of cluster extents.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTail {
    pub ls: Vec<usize>,
    /// `P(O(x) nonempty and extent ≥ L)`.
    pub survival: Vec<f64>,
    /// Least-squares fit of `log survival` against `L` over the nonzero
    /// entries.
    pub fit: Option<LinearFit>,
    pub degenerate: bool,
    pub pairs: usize,
    pub gradient_violations: usize,
}

impl ClusterTail {
    /// Estimated decay rate, minus the fitted slope.
    pub fn rate(&self) -> Option<f64> {
        self.fit.map(|f| -f.slope)
    }
}

/// Survival curve of `extents` (one entry per sample, `None` for an empty
/// cluster) over `L = 0..=max_l`.
pub fn survival_curve(extents: &[Option<usize>], max_l: usize) -> ClusterTail {
    let total = extents.len().max(1) as f64;
    let ls: Vec<usize> = (0..=max_l).collect();
    let survival: Vec<f64> = ls
        .iter()
        .map(|&l| extents.iter().filter(|e| matches!(e, Some(d) if *d >= l)).count() as f64 / total)
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = ls
        .iter()
        .zip(&survival)
        .filter(|(_, &s)| s > 0.0)
        .map(|(&l, &s)| (l as f64, s.ln()))
        .unzip();
    let fit = (xs.len() >= 2).then(|| linear_fit(&xs, &ys));
    ClusterTail {
        ls,
        survival,
        degenerate: fit.is_none(),
        fit,
        pairs: extents.len(),
        gradient_violations: 0,
    }
}

/// Sample `pairs` coupled pairs (one disorder each) at temperature `t` and
/// record the extent of the cluster of `x`, checking the gradient rule on
/// every pair.
pub fn cluster_tail(
    lattice: &Lattice,
    t: f64,
    pairs: usize,
    x: usize,
    chain: &ChainConfig,
    seed: u64,
) -> Result<ClusterTail> {
    let _ = lattice.solver();
    let per_pair: Vec<(Option<usize>, usize)> = (0..pairs)
        .into_par_iter()
        .map(|d| {
            let (_, a) = disorder(lattice, t, seed, d);
            let rng = stream(seed, &[d as u64, 1]);
            let (m1, m2) = run_pair(lattice, &a.a, a.beta(), chain, rng, |_, _, _| {})?;
            let map = agreement(lattice, &m1, &m2)?;
            let bad = gradient_rule_violations(lattice, &map, &m1, &m2, &a.a);
            Ok((map.cluster_diam(x), bad))
        })
        .collect::<Result<_>>()?;
    let extents: Vec<Option<usize>> = per_pair.iter().map(|p| p.0).collect();
    let max_l = lattice.nx().max(lattice.ny());
    let mut tail = survival_curve(&extents, max_l);
    tail.gradient_violations = per_pair.iter().map(|p| p.1).sum();
    Ok(tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dirichlet(n: usize) -> Lattice {
        Lattice::new(n, BoundaryCondition::Dirichlet).unwrap()
    }

    fn free(n: usize) -> Lattice {
        Lattice::new(n, BoundaryCondition::Free { root: (n, n) }).unwrap()
    }

    #[test]
    fn identical_fields_agree_everywhere() {
        let l = dirichlet(4);
        let m = vec![0; l.vertex_count()];
        let map = agreement_dirichlet(&l, &m, &m).unwrap();
        assert!(map.label.iter().all(|&x| x == 0));
        assert_eq!(map.component_count(), 0);
        assert_eq!(map.cluster_diam(l.center()), None);
    }

    #[test]
    fn disagreement_inside_the_frame_is_one_cluster() {
        let l = dirichlet(4);
        let m1 = vec![0; l.vertex_count()];
        let m2: Vec<i64> = (0..l.vertex_count()).map(|v| (!l.is_boundary(v)) as i64).collect();
        let map = agreement_dirichlet(&l, &m1, &m2).unwrap();
        assert_eq!(map.component_count(), 1);
        for v in 0..l.vertex_count() {
            assert_eq!(map.in_agreement(v), l.is_boundary(v));
        }
        assert_eq!(map.cluster_diam(l.center()), Some(6));
    }

    #[test]
    fn checkerboard_components_match_hand_count() {
        // disagreement on interior sites with i+j even. Odd sites on the
        // first interior ring touch the frame and join I; the 12 odd sites
        // deeper in are cut off and stay outside. The 25 even sites link up
        // through those 12, except the four ring corners, whose neighbours
        // are all in I.
        let l = dirichlet(4);
        let nv = l.vertex_count();
        let m1 = vec![0; nv];
        let m2: Vec<i64> = (0..nv)
            .map(|v| {
                let (i, j) = l.grid_pos(v);
                (!l.is_boundary(v) && (i + j) % 2 == 0) as i64
            })
            .collect();
        let map = agreement_dirichlet(&l, &m1, &m2).unwrap();
        let outside = (0..nv).filter(|&v| !map.in_agreement(v)).count();
        assert_eq!(outside, 37);
        assert_eq!(map.component_count(), 5);
        assert_eq!(map.cluster_diam(l.vertex(1, 1)), Some(0));
        assert_eq!(map.cluster_diam(l.center()), Some(6));
    }

    #[test]
    fn isolated_checkerboard_cells_are_separate_clusters() {
        // disagreement on isolated cells (both coordinates even) keeps every
        // cell its own cluster because the agreeing lattice around them is
        // connected to the frame
        let l = dirichlet(4);
        let nv = l.vertex_count();
        let m1 = vec![0; nv];
        let m2: Vec<i64> = (0..nv)
            .map(|v| {
                let (i, j) = l.grid_pos(v);
                (!l.is_boundary(v) && i % 2 == 0 && j % 2 == 0) as i64
            })
            .collect();
        let map = agreement_dirichlet(&l, &m1, &m2).unwrap();
        // i, j in {2, 4, 6}
        assert_eq!(map.component_count(), 9);
        assert!(map.diam[1..].iter().all(|&d| d == Some(0)));
    }

    #[test]
    fn free_global_offset_is_all_agreement() {
        let l = free(4);
        let m1: Vec<i64> = (0..l.vertex_count() as i64).map(|v| v % 3).collect();
        let m2: Vec<i64> = m1.iter().map(|x| x + 1).collect();
        let map = agreement_free(&l, &m1, &m2).unwrap();
        assert_eq!(map.m_i, Some(1));
        assert!(!map.empty_i);
        assert!(map.label.iter().all(|&x| x == 0));
        let same = agreement_free(&l, &m1, &m1).unwrap();
        assert_eq!(same.m_i, Some(0));
    }

    #[test]
    fn free_two_plateaus_leave_agreement_empty() {
        let l = free(4);
        let m1 = vec![0; l.vertex_count()];
        let m2: Vec<i64> = (0..l.vertex_count())
            .map(|v| (l.grid_pos(v).0 > 4) as i64)
            .collect();
        let map = agreement_free(&l, &m1, &m2).unwrap();
        assert!(map.empty_i);
        assert_eq!(map.m_i, None);
        assert!(map.label.iter().all(|&x| x == 1));
        assert_eq!(map.component_count(), 1);
    }

    #[test]
    fn free_small_island_keeps_unique_offset() {
        let l = free(4);
        let nv = l.vertex_count();
        let m1 = vec![0; nv];
        let mut m2 = vec![2; nv];
        let c = l.center();
        m2[c] = 5;
        let map = agreement_free(&l, &m1, &m2).unwrap();
        assert_eq!(map.m_i, Some(2));
        assert_eq!(map.component_count(), 1);
        assert_eq!(map.cluster_diam(c), Some(0));
    }

    #[test]
    fn free_no_large_component_leaves_agreement_empty() {
        // a checkerboard of two offsets has only single-site components
        let l = free(4);
        let nv = l.vertex_count();
        let m1 = vec![0; nv];
        let m2: Vec<i64> = (0..nv)
            .map(|v| {
                let (i, j) = l.grid_pos(v);
                ((i + j) % 2) as i64
            })
            .collect();
        let map = agreement_free(&l, &m1, &m2).unwrap();
        assert!(map.empty_i);
        assert!(map.label.iter().all(|&x| x == 1));
    }

    #[test]
    fn survival_beyond_lattice_is_zero() {
        let ext = vec![None, Some(0), Some(3), Some(8)];
        let tail = survival_curve(&ext, 20);
        assert_eq!(tail.survival[0], 0.75);
        assert_eq!(tail.survival[4], 0.25);
        assert!(tail.survival[9..].iter().all(|&s| s == 0.0));
        assert!(!tail.degenerate);
        let empty = survival_curve(&[None, None], 5);
        assert!(empty.degenerate);
        assert!(empty.rate().is_none());
    }

    #[test]
    fn sampled_pairs_obey_gradient_rule() {
        let l = dirichlet(6);
        let chain = ChainConfig {
            burn_in: 20,
            thin: 1,
            samples: 5,
            ground_rounds: 1000,
        };
        let tail = cluster_tail(&l, 6.0, 12, l.center(), &chain, 4).unwrap();
        assert_eq!(tail.gradient_violations, 0);
        assert_eq!(tail.pairs, 12);
    }

    proptest! {
        #[test]
        fn union_find_matches_bfs(seed in any::<u64>(), n in 1usize..7) {
            use rand::Rng;
            let l = dirichlet(n);
            let mut rng = stream(seed, &[]);
            let keep: Vec<bool> = (0..l.vertex_count()).map(|_| rng.random_bool(0.55)).collect();
            prop_assert_eq!(components(&l, |v| keep[v]), components_bfs(&l, |v| keep[v]));
        }
    }
}
