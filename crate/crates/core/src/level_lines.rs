//! Level lines on the dual lattice: interfaces with negative values on
//! their left and non-negative values on their right, traced from the
//! bottom of the box to the top.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, VertexField};
use crate::phase::PhaseField;
use crate::reconstruction::{reconstruct, PairConfig, ReconResult};

/// Boundary height of the level line, `√(π/8)`.
pub const LAMBDA: f64 = 0.626_657_068_657_750_1;

/// Harmonic function with boundary values `+λ` where `Re x ≥ 0` and `−λ`
/// elsewhere on the boundary.
pub fn harmonic_boundary(lattice: &Lattice, lambda: f64) -> VertexField {
    let mut data = lattice.zero_vertex_field();
    for v in 0..lattice.vertex_count() {
        if lattice.is_boundary(v) {
            data[v] = if lattice.coords(v).0 >= 0.0 { lambda } else { -lambda };
        }
    }
    lattice.solver().harmonic_extension(lattice, &data)
}

/// A path on the dual lattice, stored as the primal edges it crosses.
/// Each crossing is `(left vertex, right vertex)` relative to the direction
/// of travel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualPath {
    pub crossings: Vec<(usize, usize)>,
    /// Dual vertices in doubled grid units (plaquette centres have odd
    /// coordinates), from the anchor below the box to the one above it.
    pub vertices: Vec<(i64, i64)>,
}

impl DualPath {
    pub fn len(&self) -> usize {
        self.crossings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crossings.is_empty()
    }

    /// Dual vertices in the lattice's continuum coordinates.
    pub fn points(&self, lattice: &Lattice) -> Vec<(f64, f64)> {
        let (x0, y0) = lattice.coords(lattice.vertex(0, 0));
        let h = lattice.spacing();
        self.vertices
            .iter()
            .map(|&(a, b)| (x0 + 0.5 * a as f64 * h, y0 + 0.5 * b as f64 * h))
            .collect()
    }
}

/// First column whose vertices have `Re x ≥ 0`.
fn split_column(lattice: &Lattice) -> usize {
    (0..lattice.nx())
        .find(|&i| lattice.coords(lattice.vertex(i, 0)).0 >= 0.0)
        .unwrap_or(lattice.nx())
}

/// `(left, right)` vertices of the bottom and top anchor edges.
pub fn anchors(lattice: &Lattice) -> ((usize, usize), (usize, usize)) {
    let c = split_column(lattice);
    let top = lattice.ny() - 1;
    (
        (lattice.vertex(c - 1, 0), lattice.vertex(c, 0)),
        (lattice.vertex(c - 1, top), lattice.vertex(c, top)),
    )
}

fn positive(x: f64) -> bool {
    x >= 0.0
}

/// Trace the level line of `s` from the bottom anchor to the top anchor.
/// At each plaquette the path turns left when it can, goes straight
/// otherwise, and turns right as a last resort; values equal to zero count
/// as positive.
pub fn trace_level_line(s: &[f64], lattice: &Lattice) -> Result<DualPath> {
    lattice.check_len(s.len())?;
    if lattice.bc() != crate::lattice::BoundaryCondition::Dirichlet {
        return Err(Error::InvalidParameter("level lines need a Dirichlet box".into()));
    }
    let c = split_column(lattice);
    if c == 0 || c >= lattice.nx() {
        return Err(Error::DegenerateAnchor("no sign change along the bottom row".into()));
    }
    let (start, end) = anchors(lattice);
    if positive(s[start.0]) || !positive(s[start.1]) {
        return Err(Error::DegenerateAnchor(format!(
            "bottom anchor values {} and {}",
            s[start.0], s[start.1]
        )));
    }
    if positive(s[end.0]) || !positive(s[end.1]) {
        return Err(Error::DegenerateAnchor(format!(
            "top anchor values {} and {}",
            s[end.0], s[end.1]
        )));
    }
    let (nx, ny) = (lattice.nx() as i64, lattice.ny() as i64);
    let at = |p: (i64, i64)| -> Option<usize> {
        (p.0 >= 0 && p.1 >= 0 && p.0 < nx && p.1 < ny).then(|| lattice.vertex(p.0 as usize, p.1 as usize))
    };
    let mut left = (c as i64 - 1, 0i64);
    let mut right = (c as i64, 0i64);
    let mut d = (0i64, 1i64);
    let centre = |l: (i64, i64), r: (i64, i64), d: (i64, i64)| (l.0 + r.0 + d.0, l.1 + r.1 + d.1);
    let mut crossings = vec![start];
    let mut vertices = vec![centre(left, right, (0, -1)), centre(left, right, d)];
    let limit = 2 * lattice.edge_count() + 2;
    let mut seen = std::collections::HashSet::new();
    seen.insert((start.0.min(start.1), start.0.max(start.1)));
    loop {
        if crossings.len() > limit {
            let p = *vertices.last().unwrap();
            return Err(Error::StuckTrace(0.5 * p.0 as f64, 0.5 * p.1 as f64));
        }
        let fl = (left.0 + d.0, left.1 + d.1);
        let fr = (right.0 + d.0, right.1 + d.1);
        let (Some(vfl), Some(vfr)) = (at(fl), at(fr)) else {
            let p = *vertices.last().unwrap();
            return Err(Error::StuckTrace(0.5 * p.0 as f64, 0.5 * p.1 as f64));
        };
        if positive(s[vfl]) {
            right = fl;
            d = (-d.1, d.0);
        } else if positive(s[vfr]) {
            left = fl;
            right = fr;
        } else {
            left = fr;
            d = (d.1, -d.0);
        }
        let edge = (at(left).unwrap(), at(right).unwrap());
        if !seen.insert((edge.0.min(edge.1), edge.0.max(edge.1))) {
            let p = *vertices.last().unwrap();
            return Err(Error::StuckTrace(0.5 * p.0 as f64, 0.5 * p.1 as f64));
        }
        crossings.push(edge);
        vertices.push(centre(left, right, d));
        if edge == end && d == (0, 1) {
            return Ok(DualPath { crossings, vertices });
        }
        let (cx, cy) = *vertices.last().unwrap();
        if cx < 0 || cy < 0 || cx > 2 * (nx - 1) || cy > 2 * (ny - 1) {
            return Err(Error::StuckTrace(0.5 * cx as f64, 0.5 * cy as f64));
        }
    }
}

/// Check a traced path against `s`: anchored at both ends, consecutive
/// crossings share a plaquette, no dual edge is used twice, and every
/// crossing has a negative left and non-negative right endpoint. Returns a
/// description of the first violation.
pub fn check_path(s: &[f64], lattice: &Lattice, path: &DualPath) -> std::result::Result<(), String> {
    let (start, end) = anchors(lattice);
    if path.crossings.first() != Some(&start) || path.crossings.last() != Some(&end) {
        return Err("path is not anchored".into());
    }
    if path.vertices.len() != path.crossings.len() + 1 {
        return Err("vertex and crossing counts disagree".into());
    }
    let mut seen = std::collections::HashSet::new();
    for (k, &(l, r)) in path.crossings.iter().enumerate() {
        if !lattice.neighbors(l).contains(&r) {
            return Err(format!("crossing {k} is not a primal edge"));
        }
        if positive(s[l]) || !positive(s[r]) {
            return Err(format!("crossing {k} breaks the sign rule"));
        }
        if !seen.insert((l.min(r), l.max(r))) {
            return Err(format!("crossing {k} repeats a dual edge"));
        }
        let (a, b) = (path.vertices[k], path.vertices[k + 1]);
        if (a.0 - b.0).abs() + (a.1 - b.1).abs() != 2 {
            return Err(format!("dual step {k} is not a unit step"));
        }
        // the crossed edge is the one between the two plaquette centres
        let (li, lj) = lattice.grid_pos(l);
        let (ri, rj) = lattice.grid_pos(r);
        if (li + ri) as i64 * 2 != a.0 + b.0 || (lj + rj) as i64 * 2 != a.1 + b.1 {
            return Err(format!("crossing {k} does not separate its dual step"));
        }
    }
    Ok(())
}

/// Level line of `Im e^{iT(φ+u)}` computed from the phase `a`; requires
/// `Tλ < π` so that the boundary signs survive.
pub fn trace_phase_level_line(a: &PhaseField, lambda: f64, lattice: &Lattice) -> Result<DualPath> {
    if !(a.t * lambda < PI) {
        return Err(Error::InvalidParameter(format!("T·λ = {} is not below π", a.t * lambda)));
    }
    let u = harmonic_boundary(lattice, lambda);
    let s: Vec<f64> = a
        .a
        .iter()
        .zip(u.iter())
        .map(|(&x, &h)| (2.0 * PI * x + a.t * h).sin())
        .collect();
    trace_level_line(&s, lattice)
}

/// Symmetric Hausdorff distance between the dual vertex sets of two paths,
/// in continuum coordinates.
pub fn hausdorff(p1: &DualPath, p2: &DualPath, lattice: &Lattice) -> f64 {
    let a = p1.points(lattice);
    let b = p2.points(lattice);
    let directed = |x: &[(f64, f64)], y: &[(f64, f64)]| {
        x.iter()
            .map(|p| {
                y.iter()
                    .map(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(&a, &b).max(directed(&b, &a))
}

/// Level line of `F_T(a) + u`, the reconstruction plus the harmonic
/// boundary term.
pub fn reconstructed_level_line(
    a: &PhaseField,
    lambda: f64,
    lattice: &Lattice,
    cfg: &PairConfig,
    seed: u64,
) -> Result<(DualPath, ReconResult)> {
    let rec = reconstruct(lattice, a, cfg, seed)?;
    let u = harmonic_boundary(lattice, lambda);
    let s: Vec<f64> = rec.mean_field.iter().zip(u.iter()).map(|(x, h)| x + h).collect();
    Ok((trace_level_line(&s, lattice)?, rec))
}
