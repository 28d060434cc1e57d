//! Multiprecision fallback for exponential sums that cancel in double
//! precision (e.g. `Σ_q e^{−q²/2β} cos(qa)` at large `β`, whose value is
//! exponentially smaller than its largest terms).

use astro_float::{BigFloat, Consts, Radix, RoundingMode};

pub(crate) const RM: RoundingMode = RoundingMode::ToEven;

pub(crate) struct Ctx {
    pub p: usize,
    pub cc: Consts,
    pub pi: BigFloat,
}

impl Ctx {
    /// Context whose working precision absorbs a loss of `log2_loss` bits.
    pub fn for_loss(log2_loss: f64) -> Self {
        let bits = (log2_loss.max(0.0) + 128.0).ceil() as usize;
        let p = bits.div_ceil(64) * 64;
        let mut cc = Consts::new().expect("constants cache");
        let pi = cc.pi(p, RM);
        Self { p, cc, pi }
    }

    pub fn num(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.p)
    }

    pub fn int(&self, k: i64) -> BigFloat {
        BigFloat::from_f64(k as f64, self.p)
    }

    pub fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.p, RM)
    }

    pub fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.p, RM)
    }

    pub fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.p, RM)
    }

    pub fn exp(&mut self, a: &BigFloat) -> BigFloat {
        a.exp(self.p, RM, &mut self.cc)
    }

    pub fn cos(&mut self, a: &BigFloat) -> BigFloat {
        a.cos(self.p, RM, &mut self.cc)
    }

    pub fn sin(&mut self, a: &BigFloat) -> BigFloat {
        a.sin(self.p, RM, &mut self.cc)
    }

    /// `exp(iπA − shift)` for `A = re + i·im`, returned as (real, imaginary).
    pub fn exp_i_pi(&mut self, re: &BigFloat, im: &BigFloat, shift: f64) -> (BigFloat, BigFloat) {
        let mag_arg = self.mul(&self.pi, im).neg().sub(&self.num(shift), self.p, RM);
        let mag = self.exp(&mag_arg);
        let phase = self.mul(&self.pi, re);
        let c = self.cos(&phase);
        let s = self.sin(&phase);
        (self.mul(&mag, &c), self.mul(&mag, &s))
    }

    pub fn to_f64(&mut self, x: &BigFloat) -> f64 {
        if x.is_zero() {
            return 0.0;
        }
        x.format(Radix::Dec, RM, &mut self.cc)
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(f64::NAN)
    }
}
