//! Theta functions and the one-site conditional mean of a Gaussian given its
//! value modulo the fiber period.
//!
//! Sums are truncated by a Gaussian tail budget around their largest term.
//! When the terms cancel (the sum is many orders of magnitude below its
//! largest term) the sum is recomputed in multiprecision arithmetic.

mod bigsum;
mod identities;

use std::f64::consts::{LN_2, PI};

use astro_float::BigFloat;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use bigsum::Ctx;

pub use identities::{
    information_bound_check, jacobi_identity_gap, laplacian_theta_params, modular_invariance_check, riemann_identity_gap,
    InformationBound, ModularCheck,
};

/// Log-magnitude budget (natural units) below the largest term before a
/// term is dropped.
const TAIL_BUDGET: f64 = 45.0;
/// Cancellation ratio `Σ|t| / |Σt|` tolerated in double precision.
const MAX_F64_CANCELLATION: f64 = 1e3;

/// A truncated theta sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSum {
    pub value: Complex64,
    pub terms: usize,
    /// `Σ|t| / |Σt|`; large values mean heavy cancellation.
    pub cancellation: f64,
    /// 53 when double precision sufficed.
    pub precision_bits: usize,
}

/// Sum `exp(iπA(m) − shift)` over the lattice points returned by
/// `points(budget)`, switching to multiprecision if needed. `shift` must be
/// the (approximate) largest real part of `iπA`.
fn theta_sum(
    points: impl Fn(f64) -> Vec<Vec<i64>>,
    a_f64: impl Fn(&[i64]) -> Complex64,
    a_big: impl Fn(&Ctx, &[i64]) -> (BigFloat, BigFloat),
    shift: f64,
) -> ThetaSum {
    let pts = points(TAIL_BUDGET);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut abs = 0.0;
    for m in &pts {
        let t = (Complex64::i() * PI * a_f64(m) - shift).exp();
        sum += t;
        abs += t.norm();
    }
    let cancel = abs / sum.norm();
    if cancel.is_finite() && cancel <= MAX_F64_CANCELLATION {
        return ThetaSum {
            value: sum * shift.exp(),
            terms: pts.len(),
            cancellation: cancel,
            precision_bits: 53,
        };
    }
    let mut loss = if cancel.is_finite() { cancel.log2() } else { 200.0 };
    loop {
        let pts = points(TAIL_BUDGET + loss * LN_2);
        let mut ctx = Ctx::for_loss(loss + 16.0);
        let mut re = ctx.num(0.0);
        let mut im = ctx.num(0.0);
        let mut abs = 0.0;
        for m in &pts {
            let (ar, ai) = a_big(&ctx, m);
            let (tr, ti) = ctx.exp_i_pi(&ar, &ai, shift);
            re = ctx.add(&re, &tr);
            im = ctx.add(&im, &ti);
            abs += (-PI * a_f64(m).im - shift).exp();
        }
        let value = Complex64::new(ctx.to_f64(&re), ctx.to_f64(&im));
        let true_loss = (abs / value.norm()).log2();
        if true_loss.is_finite() && true_loss <= loss {
            return ThetaSum {
                value: value * shift.exp(),
                terms: pts.len(),
                cancellation: abs / value.norm(),
                precision_bits: ctx.p,
            };
        }
        if loss > 4000.0 {
            return ThetaSum {
                value: value * shift.exp(),
                terms: pts.len(),
                cancellation: f64::INFINITY,
                precision_bits: ctx.p,
            };
        }
        loss = if true_loss.is_finite() { true_loss + 8.0 } else { 2.0 * loss };
    }
}

/// `θ(z|τ) = Σ_n exp(iπn²τ + 2iπnz)`.
pub fn jacobi_theta(z: Complex64, tau: Complex64) -> Result<ThetaSum> {
    if !(tau.im > 0.0) || !tau.re.is_finite() || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "theta needs Im τ > 0 and finite z (τ = {tau}, z = {z})"
        )));
    }
    let y = tau.im;
    let c = -z.im / y;
    let n0 = c.round();
    let shift = -PI * (n0 * n0 * y + 2.0 * n0 * z.im);
    let points = |budget: f64| {
        let d0 = n0 - c;
        let r = (d0 * d0 + budget / (PI * y)).sqrt();
        ((c - r).floor() as i64..=(c + r).ceil() as i64)
            .map(|n| vec![n])
            .collect()
    };
    let a_f64 = |m: &[i64]| {
        let n = m[0] as f64;
        n * n * tau + 2.0 * n * z
    };
    let a_big = |ctx: &Ctx, m: &[i64]| {
        let n = ctx.int(m[0]);
        let nn = ctx.mul(&n, &n);
        let two_n = ctx.mul(&ctx.int(2), &n);
        let re = ctx.add(&ctx.mul(&nn, &ctx.num(tau.re)), &ctx.mul(&two_n, &ctx.num(z.re)));
        let im = ctx.add(&ctx.mul(&nn, &ctx.num(tau.im)), &ctx.mul(&two_n, &ctx.num(z.im)));
        (re, im)
    };
    Ok(theta_sum(points, a_f64, a_big, shift))
}

/// `θ(z|Ω) = Σ_{m∈Z^g} exp(πi mᵀΩm + 2πi m·z)` for symmetric `Ω` with
/// positive-definite imaginary part.
pub fn riemann_theta(z: &[Complex64], omega: &DMatrix<Complex64>) -> Result<ThetaSum> {
    let g = z.len();
    if g == 0 || omega.nrows() != g || omega.ncols() != g {
        return Err(Error::InvalidParameter("Ω must be g×g with g = len(z) ≥ 1".into()));
    }
    let y = omega.map(|w| w.im);
    let chol = y
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("Im Ω is not positive definite".into()))?;
    let yinv = chol.inverse();
    let zi = nalgebra::DVector::from_iterator(g, z.iter().map(|w| w.im));
    let c = -(&yinv * &zi);
    let quad = |m: &[f64]| {
        let d = nalgebra::DVector::from_iterator(g, m.iter().zip(c.iter()).map(|(a, b)| a - b));
        (d.transpose() * &y * &d)[(0, 0)]
    };
    let rounded: Vec<f64> = c.iter().map(|x| x.round()).collect();
    let q0 = quad(&rounded);
    let cyc = (c.transpose() * &y * &c)[(0, 0)];
    let shift = PI * (cyc - q0);
    let points = |budget: f64| {
        let s = q0 + budget / PI;
        let ranges: Vec<(i64, i64)> = (0..g)
            .map(|i| {
                let r = (s * yinv[(i, i)]).sqrt();
                ((c[i] - r).floor() as i64, (c[i] + r).ceil() as i64)
            })
            .collect();
        let mut out = Vec::new();
        let mut m: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            let mf: Vec<f64> = m.iter().map(|&k| k as f64).collect();
            if quad(&mf) <= s {
                out.push(m.clone());
            }
            let mut k = 0;
            loop {
                if k == g {
                    return out;
                }
                if m[k] < ranges[k].1 {
                    m[k] += 1;
                    break;
                }
                m[k] = ranges[k].0;
                k += 1;
            }
        }
    };
    let a_f64 = |m: &[i64]| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..g {
            let mi = m[i] as f64;
            acc += 2.0 * mi * z[i];
            for j in 0..g {
                acc += mi * m[j] as f64 * omega[(i, j)];
            }
        }
        acc
    };
    let a_big = |ctx: &Ctx, m: &[i64]| {
        let mut re = ctx.num(0.0);
        let mut im = ctx.num(0.0);
        for i in 0..g {
            let two_mi = ctx.int(2 * m[i]);
            re = ctx.add(&re, &ctx.mul(&two_mi, &ctx.num(z[i].re)));
            im = ctx.add(&im, &ctx.mul(&two_mi, &ctx.num(z[i].im)));
            for j in 0..g {
                let mm = ctx.int(m[i] * m[j]);
                re = ctx.add(&re, &ctx.mul(&mm, &ctx.num(omega[(i, j)].re)));
                im = ctx.add(&im, &ctx.mul(&mm, &ctx.num(omega[(i, j)].im)));
            }
        }
        (re, im)
    };
    Ok(theta_sum(points, a_f64, a_big, shift))
}

/// `Σ_n e^{−β(2πn+a)²/2}(2πn+a) / Σ_n e^{−β(2πn+a)²/2}`: the conditional
/// mean of a centred Gaussian of variance `1/β` given its value modulo 2π.
pub fn cond_mean_primal(beta: f64, a: f64) -> f64 {
    // center on the nearest fiber point so the largest weight is e^0
    let n0 = (-a / (2.0 * PI)).round();
    let x0 = 2.0 * PI * n0 + a;
    let e0 = 0.5 * beta * x0 * x0;
    let r = ((2.0 * TAIL_BUDGET / beta).sqrt() / (2.0 * PI)).ceil() as i64 + 1;
    let weight = |x: f64| (e0 - 0.5 * beta * x * x).exp();
    let mut num = weight(x0) * x0;
    let mut den = weight(x0);
    // pair ±k so that a = 0 gives exactly 0
    for k in 1..=r {
        let xp = x0 + 2.0 * PI * k as f64;
        let xm = x0 - 2.0 * PI * k as f64;
        let (wp, wm) = (weight(xp), weight(xm));
        num += wp * xp + wm * xm;
        den += wp + wm;
    }
    num / den
}

/// Dual form `(1/β) Σ_q q e^{−q²/2β} sin(qa) / Σ_q e^{−q²/2β} cos(qa)`.
pub fn cond_mean_dual(beta: f64, a: f64) -> f64 {
    let terms = |budget: f64| (2.0 * beta * budget).sqrt().ceil() as i64;
    let r = terms(TAIL_BUDGET);
    let mut num = 0.0;
    let mut den = 1.0;
    let mut num_abs = 0.0;
    let mut den_abs = 1.0;
    for q in 1..=r {
        let qf = q as f64;
        let w = (-qf * qf / (2.0 * beta)).exp();
        // q and −q contribute equally
        num += 2.0 * qf * w * (qf * a).sin();
        den += 2.0 * w * (qf * a).cos();
        num_abs += 2.0 * qf * w;
        den_abs += 2.0 * w;
    }
    let cancel = (den_abs / den.abs()).max(if num == 0.0 { 1.0 } else { num_abs / num.abs() });
    if cancel <= MAX_F64_CANCELLATION || a == 0.0 {
        return num / den / beta;
    }
    let mut loss = if cancel.is_finite() { cancel.log2() } else { 200.0 };
    loop {
        let r = terms(TAIL_BUDGET + loss * LN_2);
        let mut ctx = Ctx::for_loss(loss + 16.0);
        let a_big = ctx.num(a);
        let two_beta = ctx.num(2.0 * beta);
        let mut num = ctx.num(0.0);
        let mut den = ctx.num(1.0);
        for q in 1..=r {
            let qb = ctx.int(q);
            let expo = ctx.div(&ctx.mul(&qb, &qb), &two_beta).neg();
            let w = ctx.exp(&expo);
            let arg = ctx.mul(&qb, &a_big);
            let s = ctx.sin(&arg);
            let c = ctx.cos(&arg);
            let two_w = ctx.mul(&ctx.int(2), &w);
            num = ctx.add(&num, &ctx.mul(&ctx.mul(&two_w, &qb), &s));
            den = ctx.add(&den, &ctx.mul(&two_w, &c));
        }
        let nv = ctx.to_f64(&num);
        let dv = ctx.to_f64(&den);
        let need = (den_abs / dv.abs())
            .max(if nv == 0.0 { 1.0 } else { num_abs / nv.abs() })
            .log2();
        if need <= loss || loss > 4000.0 {
            return nv / dv / beta;
        }
        loss = need + 8.0;
    }
}

/// `E[Z | Z mod 1 = a]` for `Z ~ N(0, 1/β)`, using whichever of the two
/// representations converges fastest at this `β`.
pub fn wrapped_cond_mean(beta: f64, a: f64) -> f64 {
    let x = 2.0 * PI * (a - a.round());
    let b = beta / (4.0 * PI * PI);
    let m = if beta >= 2.0 * PI {
        cond_mean_primal(b, x)
    } else {
        cond_mean_dual(b, x)
    };
    m / (2.0 * PI)
}

/// Density `p(a)` of `Z mod 1` on `[0,1)` and its derivative, for `Z ~ N(0, 1/β)`.
pub fn wrapped_density(beta: f64, a: f64) -> (f64, f64) {
    if beta > 2.0 * PI {
        let norm = (beta / (2.0 * PI)).sqrt();
        let x0 = a - a.round();
        let r = (2.0 * TAIL_BUDGET / beta).sqrt().ceil() as i64 + 1;
        let mut p = 0.0;
        let mut dp = 0.0;
        for k in -r..=r {
            let x = x0 + k as f64;
            let w = (-0.5 * beta * x * x).exp();
            p += w;
            dp -= beta * x * w;
        }
        (norm * p, norm * dp)
    } else {
        let c = 2.0 * PI * PI / beta;
        let r = (TAIL_BUDGET / c).sqrt().ceil() as i64 + 1;
        let mut p = 1.0;
        let mut dp = 0.0;
        for q in 1..=r {
            let qf = q as f64;
            let w = 2.0 * (-c * qf * qf).exp();
            let arg = 2.0 * PI * qf * a;
            p += w * arg.cos();
            dp -= w * 2.0 * PI * qf * arg.sin();
        }
        (p, dp)
    }
}

/// `σ(T) = β_T E[E[Z | Z mod 1]²]` with `Z ~ N(0, 1/β_T)`, evaluated as
/// `(1/β_T) ∫_0^1 p'(a)²/p(a) da` by the periodic trapezoid rule.
pub fn sigma_t(t: f64) -> f64 {
    let mut nodes = 64;
    let mut prev = sigma_t_nodes(t, nodes);
    loop {
        nodes *= 2;
        let next = sigma_t_nodes(t, nodes);
        if (next - prev).abs() <= 1e-13 * next.abs() || nodes >= 1 << 20 {
            return next;
        }
        prev = next;
    }
}

/// Trapezoid approximation of `σ(T)` with a fixed number of nodes.
pub fn sigma_t_nodes(t: f64, nodes: usize) -> f64 {
    let beta = crate::phase::beta_of(t);
    let vals: Vec<f64> = (0..nodes)
        .map(|k| {
            let a = k as f64 / nodes as f64;
            let (p, dp) = wrapped_density(beta, a);
            if p < 1e-300 {
                0.0
            } else {
                dp * dp / p
            }
        })
        .collect();
    crate::stats::pairwise_sum(&vals) / nodes as f64 / beta
}
