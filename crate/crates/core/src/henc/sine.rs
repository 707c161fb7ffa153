use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Ciphertext, Context, HencError};

/// Input is divided by `2^t` before the Taylor expansion; `k` Taylor terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SineParams {
    pub t: u32,
    pub k: u32,
}

impl Default for SineParams {
    fn default() -> Self {
        SineParams { t: 10, k: 7 }
    }
}

impl SineParams {
    pub fn new(t: u32, k: u32) -> Result<SineParams, HencError> {
        let p = SineParams { t, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), HencError> {
        if self.t > 40 {
            return Err(HencError::InvalidParams(format!("t = {} exceeds 40", self.t)));
        }
        if !(1..=64).contains(&self.k) {
            return Err(HencError::InvalidParams(format!("k = {} outside 1..=64", self.k)));
        }
        Ok(())
    }

    /// Levels consumed by [`sine_compute`].
    pub fn levels(&self) -> u32 {
        self.k + self.t + 3
    }
}

fn taylor_exp(ctx: &mut Context, ct: &Ciphertext, k: u32) -> Result<Ciphertext, HencError> {
    let mut sum = ctx.encrypt_constant(1.0);
    let mut pow = ctx.encrypt_constant(1.0);
    let mut fact = 1.0f64;
    for i in 1..=k {
        fact *= i as f64;
        pow = ctx.mul(&pow, ct)?;
        let term = ctx.cmul(&pow, 1.0 / fact)?;
        sum = ctx.add(&sum, &term)?;
    }
    Ok(sum)
}

/// Returns encryptions of `exp(i·s·x)` and `exp(-i·s·x)`.
///
/// `x` is multiplied by `scale / 2^t`, both exponentials are expanded to `k`
/// Taylor terms independently and then squared `t` times. Consumes
/// `k + t + 2` levels.
pub fn exp_i_pair(
    ctx: &mut Context,
    ct: &Ciphertext,
    scale: f64,
    p: SineParams,
) -> Result<(Ciphertext, Ciphertext), HencError> {
    p.validate()?;
    let shrink = scale / 2f64.powi(p.t as i32);
    let theta = ctx.cmul(ct, shrink)?;
    let pos = ctx.imul(&theta)?;
    let neg = ctx.neg(&pos)?;
    let mut e_pos = taylor_exp(ctx, &pos, p.k)?;
    let mut e_neg = taylor_exp(ctx, &neg, p.k)?;
    for _ in 0..p.t {
        e_pos = ctx.square(&e_pos)?;
        e_neg = ctx.square(&e_neg)?;
    }
    Ok((e_pos, e_neg))
}

/// `sin(a) = (e^{ia} - e^{-ia}) / 2i`, computed as `i·(-1/2)·(e^{ia} - e^{-ia})`.
pub(crate) fn sin_from_pair(ctx: &mut Context, e_pos: &Ciphertext, e_neg: &Ciphertext) -> Result<Ciphertext, HencError> {
    let minus = ctx.neg(e_neg)?;
    let diff = ctx.add(e_pos, &minus)?;
    let half = ctx.cmul(&diff, Complex64::new(-0.5, 0.0))?;
    ctx.imul(&half)
}

/// Slotwise sine through Euler's formula; consumes `k + t + 3` levels.
///
/// The Taylor argument is `|x| / 2^t`; accuracy degrades once it is much
/// larger than `1e-2`.
pub fn sine_compute(ctx: &mut Context, ct: &Ciphertext, p: SineParams) -> Result<Ciphertext, HencError> {
    let (e_pos, e_neg) = exp_i_pair(ctx, ct, 1.0, p)?;
    let out = sin_from_pair(ctx, &e_pos, &e_neg)?;
    if out.slots.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(HencError::NonFinite);
    }
    Ok(out)
}
