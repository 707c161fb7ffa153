//! A leveled homomorphic arithmetic simulator.
//!
//! Ciphertexts hold their slot values in the clear together with a level
//! (remaining multiplicative budget). Every multiplication, by a ciphertext
//! or by a constant, consumes one level; additions, negation and
//! multiplication by the imaginary unit are free. Binary operations align
//! both operands to the lower level. When `auto_bootstrap` is set, an operand
//! with no level left is bootstrapped before it is multiplied.
//!
//! No cryptography happens here; the simulator exists to measure depth,
//! multiplication counts and bootstraps, and optionally to inject Gaussian
//! noise after each multiplication.

mod forward;
mod sine;

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{horner_with, paterson_stockmeyer_with, PolyEvaluator, Polynomial};

pub use forward::forward_encrypted;
pub use sine::{exp_i_pair, sine_compute, SineParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HencError {
    #[error("ciphertext belongs to context {found}, not {expected}")]
    ContextMismatch { expected: u64, found: u64 },
    #[error("multiplicative levels exhausted")]
    LevelExhausted,
    #[error("{given} values do not fit in {slots} slots")]
    TooManyValues { given: usize, slots: usize },
    #[error("non-finite slot value")]
    NonFinite,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

static NEXT_CONTEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextParams {
    pub slot_count: usize,
    pub max_level: u32,
    /// Standard deviation of the complex Gaussian added per slot after every
    /// multiplication.
    pub noise_sigma: f64,
    pub auto_bootstrap: bool,
    /// Constant added to the real part of every slot by a bootstrap.
    pub bootstrap_perturbation: f64,
    /// Seeds the noise stream.
    pub seed: u64,
}

impl Default for ContextParams {
    fn default() -> Self {
        ContextParams {
            slot_count: 8192,
            max_level: 40,
            noise_sigma: 0.0,
            auto_bootstrap: false,
            bootstrap_perturbation: 0.0,
            seed: 0,
        }
    }
}

/// Operation counters; they only ever grow.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub ct_mults: u64,
    pub scalar_mults: u64,
    pub bootstraps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    slots: Vec<Complex64>,
    level: u32,
    depth: u32,
    context_id: u64,
}

impl Ciphertext {
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Length of the longest multiplication chain behind this ciphertext,
    /// counted across bootstraps.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn context_id(&self) -> u64 {
        self.context_id
    }
}

pub struct Context {
    params: ContextParams,
    id: u64,
    counters: Counters,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl Context {
    pub fn new(params: ContextParams) -> Result<Context, HencError> {
        if params.slot_count == 0 {
            return Err(HencError::InvalidParams("slot_count must be positive".into()));
        }
        if params.max_level == 0 {
            return Err(HencError::InvalidParams("max_level must be positive".into()));
        }
        if !(params.noise_sigma >= 0.0 && params.noise_sigma.is_finite()) {
            return Err(HencError::InvalidParams("noise_sigma must be finite and nonnegative".into()));
        }
        let noise = if params.noise_sigma > 0.0 {
            Some(Normal::new(0.0, params.noise_sigma).map_err(|e| HencError::InvalidParams(e.to_string()))?)
        } else {
            None
        };
        Ok(Context {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            id: NEXT_CONTEXT_ID.fetch_add(1, Ordering::Relaxed),
            counters: Counters::default(),
            noise,
            params,
        })
    }

    pub fn params(&self) -> &ContextParams {
        &self.params
    }

    pub fn slot_count(&self) -> usize {
        self.params.slot_count
    }

    pub fn max_level(&self) -> u32 {
        self.params.max_level
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    fn check(&self, ct: &Ciphertext) -> Result<(), HencError> {
        if ct.context_id != self.id {
            return Err(HencError::ContextMismatch {
                expected: self.id,
                found: ct.context_id,
            });
        }
        Ok(())
    }

    /// Fresh ciphertext at the top level; short inputs are zero-padded.
    pub fn encrypt(&mut self, values: &[Complex64]) -> Result<Ciphertext, HencError> {
        let n = self.params.slot_count;
        if values.len() > n {
            return Err(HencError::TooManyValues {
                given: values.len(),
                slots: n,
            });
        }
        let mut slots = values.to_vec();
        slots.resize(n, Complex64::new(0.0, 0.0));
        Ok(Ciphertext {
            slots,
            level: self.params.max_level,
            depth: 0,
            context_id: self.id,
        })
    }

    pub fn encrypt_real(&mut self, values: &[f64]) -> Result<Ciphertext, HencError> {
        let v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.encrypt(&v)
    }

    /// Encryption of `c` in every slot.
    pub fn encrypt_constant(&mut self, c: impl Into<Complex64>) -> Ciphertext {
        Ciphertext {
            slots: vec![c.into(); self.params.slot_count],
            level: self.params.max_level,
            depth: 0,
            context_id: self.id,
        }
    }

    pub fn decrypt(&self, ct: &Ciphertext) -> Result<Vec<Complex64>, HencError> {
        self.check(ct)?;
        Ok(ct.slots.clone())
    }

    /// Real parts of the slots.
    pub fn decrypt_real(&self, ct: &Ciphertext) -> Result<Vec<f64>, HencError> {
        self.check(ct)?;
        Ok(ct.slots.iter().map(|c| c.re).collect())
    }

    fn zip_with(
        &self,
        a: &Ciphertext,
        b: &Ciphertext,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Ciphertext, HencError> {
        self.check(a)?;
        self.check(b)?;
        Ok(Ciphertext {
            slots: a.slots.iter().zip(&b.slots).map(|(&x, &y)| f(x, y)).collect(),
            level: a.level.min(b.level),
            depth: a.depth.max(b.depth),
            context_id: self.id,
        })
    }

    fn map(&self, a: &Ciphertext, f: impl Fn(Complex64) -> Complex64) -> Result<Ciphertext, HencError> {
        self.check(a)?;
        Ok(Ciphertext {
            slots: a.slots.iter().map(|&x| f(x)).collect(),
            level: a.level,
            depth: a.depth,
            context_id: self.id,
        })
    }

    pub fn add(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HencError> {
        self.zip_with(a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HencError> {
        self.zip_with(a, b, |x, y| x - y)
    }

    pub fn cadd(&mut self, a: &Ciphertext, c: impl Into<Complex64>) -> Result<Ciphertext, HencError> {
        let c = c.into();
        self.map(a, |x| x + c)
    }

    pub fn neg(&mut self, a: &Ciphertext) -> Result<Ciphertext, HencError> {
        self.map(a, |x| -x)
    }

    /// Multiplies every slot by the imaginary unit.
    pub fn imul(&mut self, a: &Ciphertext) -> Result<Ciphertext, HencError> {
        self.map(a, |x| Complex64::new(-x.im, x.re))
    }

    /// Brings `ct` to a level that can absorb one multiplication.
    fn ensure_level(&mut self, ct: &Ciphertext) -> Result<Option<Ciphertext>, HencError> {
        if ct.level >= 1 {
            return Ok(None);
        }
        if !self.params.auto_bootstrap {
            return Err(HencError::LevelExhausted);
        }
        self.bootstrap(ct).map(Some)
    }

    fn add_noise(&mut self, slots: &mut [Complex64]) {
        if let Some(dist) = self.noise {
            for s in slots {
                s.re += dist.sample(&mut self.rng);
                s.im += dist.sample(&mut self.rng);
            }
        }
    }

    /// Slotwise product of two ciphertexts.
    pub fn mul(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HencError> {
        self.check(a)?;
        self.check(b)?;
        let fa = self.ensure_level(a)?;
        let a = fa.as_ref().unwrap_or(a);
        let fb = if std::ptr::eq(a, b) { None } else { self.ensure_level(b)? };
        let b = fb.as_ref().unwrap_or(if std::ptr::eq(a, b) { a } else { b });
        let mut slots: Vec<Complex64> = a.slots.iter().zip(&b.slots).map(|(&x, &y)| x * y).collect();
        self.add_noise(&mut slots);
        self.counters.ct_mults += 1;
        Ok(Ciphertext {
            slots,
            level: a.level.min(b.level) - 1,
            depth: a.depth.max(b.depth) + 1,
            context_id: self.id,
        })
    }

    pub fn square(&mut self, a: &Ciphertext) -> Result<Ciphertext, HencError> {
        self.mul(a, a)
    }

    /// Product with a constant; consumes one level like a rescale would.
    pub fn cmul(&mut self, a: &Ciphertext, c: impl Into<Complex64>) -> Result<Ciphertext, HencError> {
        self.check(a)?;
        let c = c.into();
        let fa = self.ensure_level(a)?;
        let a = fa.as_ref().unwrap_or(a);
        let mut slots: Vec<Complex64> = a.slots.iter().map(|&x| x * c).collect();
        self.add_noise(&mut slots);
        self.counters.scalar_mults += 1;
        Ok(Ciphertext {
            slots,
            level: a.level - 1,
            depth: a.depth + 1,
            context_id: self.id,
        })
    }

    /// Restores the level to the maximum.
    pub fn bootstrap(&mut self, a: &Ciphertext) -> Result<Ciphertext, HencError> {
        self.check(a)?;
        self.counters.bootstraps += 1;
        let shift = self.params.bootstrap_perturbation;
        Ok(Ciphertext {
            slots: a.slots.iter().map(|&x| x + shift).collect(),
            level: self.params.max_level,
            depth: a.depth,
            context_id: self.id,
        })
    }

    /// Horner evaluation of `p` on every slot.
    pub fn eval_horner(&mut self, p: &Polynomial, ct: &Ciphertext) -> Result<Ciphertext, HencError> {
        horner_with(&mut EncryptedEvaluator { ctx: self }, p, ct)
    }

    /// Paterson–Stockmeyer evaluation of `p` on every slot.
    pub fn eval_paterson_stockmeyer(&mut self, p: &Polynomial, ct: &Ciphertext) -> Result<Ciphertext, HencError> {
        paterson_stockmeyer_with(&mut EncryptedEvaluator { ctx: self }, p, ct)
    }
}

/// Adapter running the generic polynomial schemes on ciphertexts.
pub struct EncryptedEvaluator<'a> {
    pub ctx: &'a mut Context,
}

impl PolyEvaluator for EncryptedEvaluator<'_> {
    type Value = Ciphertext;
    type Error = HencError;

    fn constant(&mut self, c: f64) -> Result<Ciphertext, HencError> {
        Ok(self.ctx.encrypt_constant(c))
    }

    fn add(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HencError> {
        self.ctx.add(a, b)
    }

    fn add_const(&mut self, a: &Ciphertext, c: f64) -> Result<Ciphertext, HencError> {
        self.ctx.cadd(a, c)
    }

    fn mul(&mut self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HencError> {
        self.ctx.mul(a, b)
    }

    fn mul_const(&mut self, a: &Ciphertext, c: f64) -> Result<Ciphertext, HencError> {
        self.ctx.cmul(a, c)
    }
}
