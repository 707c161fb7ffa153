//! Fourier sine series of odd targets, evaluated in the clear or on
//! ciphertexts through the exponential core of [`crate::henc::sine_compute`].

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::fmt17;
use crate::henc::{exp_i_pair, Ciphertext, Context, HencError, SineParams};

pub const DEFAULT_SUBINTERVALS: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FourierError {
    #[error("Simpson's rule needs a positive even number of subintervals, got {0}")]
    OddIntervals(usize),
    #[error("integrand is not finite at x = {0}")]
    NonFinite(f64),
    #[error("invalid series: {0}")]
    Invalid(String),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Henc(#[from] HencError),
}

/// Composite Simpson's rule with `m` subintervals.
pub fn simpson_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> Result<f64, FourierError> {
    if m == 0 || m % 2 == 1 {
        return Err(FourierError::OddIntervals(m));
    }
    let h = (b - a) / m as f64;
    let sample = |i: usize| {
        let x = if i == m { b } else { a + h * i as f64 };
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(FourierError::NonFinite(x))
        }
    };
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..m {
        if i % 2 == 1 {
            odd += sample(i)?;
        } else {
            even += sample(i)?;
        }
    }
    Ok(h / 3.0 * (sample(0)? + 4.0 * odd + 2.0 * even + sample(m)?))
}

/// `F(x) = Σ b_n sin(nπx/l)`, odd and `2l`-periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub period_half: f64,
    pub coeffs: Vec<f64>,
}

impl FourierSeries {
    pub fn new(period_half: f64, coeffs: Vec<f64>) -> Result<FourierSeries, FourierError> {
        if !(period_half > 0.0 && period_half.is_finite()) {
            return Err(FourierError::Invalid(format!("period half-length {period_half}")));
        }
        if coeffs.is_empty() {
            return Err(FourierError::Invalid("no harmonics".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FourierError::Invalid("non-finite coefficient".into()));
        }
        Ok(FourierSeries { period_half, coeffs })
    }

    pub fn harmonics(&self) -> usize {
        self.coeffs.len()
    }

    /// Levels consumed by [`eval_series_encrypted`].
    pub fn encrypted_levels(&self, p: SineParams) -> u32 {
        (p.k + p.t + 2) + (self.harmonics() as u32 - 1) + 2
    }

    /// First line `l,N`, then one coefficient per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{},{}\n", fmt17(self.period_half), self.harmonics());
        for c in &self.coeffs {
            writeln!(s, "{}", fmt17(*c)).expect("writing to a String");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<FourierSeries, FourierError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or(FourierError::Malformed {
            line: 1,
            msg: "empty file".into(),
        })?;
        let bad_head = |msg: String| FourierError::Malformed { line: 1, msg };
        let (l, n) = head
            .split_once(',')
            .ok_or_else(|| bad_head("expected `l,N`".into()))?;
        let l: f64 = l.trim().parse().map_err(|e| bad_head(format!("bad l: {e}")))?;
        let n: usize = n.trim().parse().map_err(|e| bad_head(format!("bad N: {e}")))?;
        let coeffs = lines
            .map(|(i, line)| {
                line.trim().parse::<f64>().map_err(|e| FourierError::Malformed {
                    line: i + 1,
                    msg: format!("bad coefficient `{}`: {e}", line.trim()),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if coeffs.len() != n {
            return Err(bad_head(format!("header announces {n} coefficients, found {}", coeffs.len())));
        }
        FourierSeries::new(l, coeffs)
    }
}

/// `b_n = (2/l) ∫_0^l f(x) sin(nπx/l) dx` for `n = 1..=harmonics`.
pub fn fourier_sine_coeffs(
    f: impl Fn(f64) -> f64,
    period_half: f64,
    harmonics: usize,
    m: usize,
) -> Result<FourierSeries, FourierError> {
    if harmonics == 0 {
        return Err(FourierError::Invalid("no harmonics".into()));
    }
    let l = period_half;
    let coeffs = (1..=harmonics)
        .map(|n| {
            let w = n as f64 * PI / l;
            Ok(2.0 / l * simpson_integrate(|x| f(x) * (w * x).sin(), 0.0, l, m)?)
        })
        .collect::<Result<Vec<_>, FourierError>>()?;
    FourierSeries::new(l, coeffs)
}

pub fn eval_series_plain(s: &FourierSeries, x: f64) -> f64 {
    let theta = PI * x / s.period_half;
    s.coeffs
        .iter()
        .enumerate()
        .map(|(i, b)| b * ((i + 1) as f64 * theta).sin())
        .sum()
}

/// Encrypted partial sum.
///
/// `e^{±iθ}` with `θ = πx/l` comes from one Taylor-and-squaring pass; the
/// harmonics `e^{±inθ}` follow by repeated multiplication. Consumes
/// `(k + t + 2) + (N - 1) + 2` levels.
pub fn eval_series_encrypted(
    ctx: &mut Context,
    s: &FourierSeries,
    ct_x: &Ciphertext,
    p: SineParams,
) -> Result<Ciphertext, FourierError> {
    let (base_pos, base_neg) = exp_i_pair(ctx, ct_x, PI / s.period_half, p)?;
    let mut e_pos = base_pos.clone();
    let mut e_neg = base_neg.clone();
    let mut acc: Option<Ciphertext> = None;
    for (i, &b) in s.coeffs.iter().enumerate() {
        if i > 0 {
            e_pos = ctx.mul(&e_pos, &base_pos)?;
            e_neg = ctx.mul(&e_neg, &base_neg)?;
        }
        let minus = ctx.neg(&e_neg)?;
        let diff = ctx.add(&e_pos, &minus)?;
        let half = ctx.cmul(&diff, Complex64::new(-0.5, 0.0))?;
        let sin = ctx.imul(&half)?;
        let term = ctx.cmul(&sin, b)?;
        acc = Some(match acc {
            Some(a) => ctx.add(&a, &term)?,
            None => term,
        });
    }
    Ok(acc.expect("series has at least one harmonic"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::henc::{sine_compute, ContextParams};
    use rand::{Rng, SeedableRng};

    fn sigmoid_shift(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp()) - 0.5
    }

    #[test]
    fn simpson_known_integrals() {
        let v = simpson_integrate(f64::sin, 0.0, PI, 1000).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
        let cubic = simpson_integrate(|x| x * x * x, 0.0, 1.0, 2).unwrap();
        assert!((cubic - 0.25).abs() < 1e-16);
        let e = simpson_integrate(f64::exp, 0.0, 1.0, 1000).unwrap();
        let reference = simpson_integrate(f64::exp, 0.0, 1.0, 1_000_000).unwrap();
        assert!((e - reference).abs() < 1e-12);
        assert!((reference - (std::f64::consts::E - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn simpson_errors() {
        assert_eq!(simpson_integrate(f64::sin, 0.0, 1.0, 3), Err(FourierError::OddIntervals(3)));
        assert_eq!(simpson_integrate(f64::sin, 0.0, 1.0, 0), Err(FourierError::OddIntervals(0)));
        assert!(matches!(
            simpson_integrate(|x| 1.0 / x, 0.0, 1.0, 10),
            Err(FourierError::NonFinite(_))
        ));
    }

    #[test]
    fn orthogonality() {
        let l = 3.0;
        let s = fourier_sine_coeffs(|x| (PI * x / l).sin(), l, 6, DEFAULT_SUBINTERVALS).unwrap();
        assert!((s.coeffs[0] - 1.0).abs() < 1e-9);
        assert!(s.coeffs[1..].iter().all(|b| b.abs() < 1e-9));
    }

    #[test]
    fn square_function_matches_closed_form() {
        // b_n of x^2 on [0, l]: (2l^2/(nπ)) (-1)^{n+1} + (4l^2/(nπ)^3) ((-1)^n - 1)
        let l = 2.0;
        let s = fourier_sine_coeffs(|x| x * x, l, 10, DEFAULT_SUBINTERVALS).unwrap();
        for (i, b) in s.coeffs.iter().enumerate() {
            let n = (i + 1) as f64;
            let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
            let want = -2.0 * l * l / (n * PI) * sign + 4.0 * l * l / (n * PI).powi(3) * (sign - 1.0);
            assert!((b - want).abs() < 1e-9, "b_{} = {b}, want {want}", i + 1);
        }
    }

    #[test]
    fn plain_series_is_odd_and_periodic() {
        let s = fourier_sine_coeffs(sigmoid_shift, 40.0, 32, 4096).unwrap();
        assert_eq!(eval_series_plain(&s, 0.0), 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x: f64 = rng.random_range(-40.0..40.0);
            assert!((eval_series_plain(&s, x) + eval_series_plain(&s, -x)).abs() < 1e-12);
            assert!((eval_series_plain(&s, x + 80.0) - eval_series_plain(&s, x)).abs() < 1e-9);
        }
    }

    #[test]
    fn text_round_trip() {
        let s = FourierSeries::new(40.0, vec![0.5, -1.25e-3, 3.0e-7]).unwrap();
        let text = s.to_text();
        assert!(text.starts_with("4.0000000000000000e1,3\n"));
        assert_eq!(FourierSeries::from_text(&text).unwrap(), s);
        assert!(matches!(
            FourierSeries::from_text("40,3\n1\n2\n"),
            Err(FourierError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            FourierSeries::from_text("40,2\n1\nabc\n"),
            Err(FourierError::Malformed { line: 3, .. })
        ));
    }

    fn ctx(slots: usize) -> Context {
        Context::new(ContextParams {
            slot_count: slots,
            max_level: 60,
            ..ContextParams::default()
        })
        .unwrap()
    }

    #[test]
    fn encrypted_matches_plain() {
        let s = fourier_sine_coeffs(sigmoid_shift, 40.0, 16, 4096).unwrap();
        let xs: Vec<f64> = (0..=600).map(|i| -30.0 + 0.1 * i as f64).collect();
        let mut ctx = ctx(xs.len());
        let ct = ctx.encrypt_real(&xs).unwrap();
        let p = SineParams { t: 10, k: 7 };
        let out = eval_series_encrypted(&mut ctx, &s, &ct, p).unwrap();
        assert_eq!(60 - out.level(), s.encrypted_levels(p));
        assert_eq!(out.depth(), (7 + 10 + 2) + 15 + 2);
        for (x, g) in xs.iter().zip(ctx.decrypt_real(&out).unwrap()) {
            assert!((g - eval_series_plain(&s, *x)).abs() <= 1e-6, "x={x}");
        }
    }

    #[test]
    fn single_harmonic_is_scaled_sine() {
        let l = 4.0;
        let s = FourierSeries::new(l, vec![0.8]).unwrap();
        let xs: Vec<f64> = (0..=80).map(|i| -4.0 + 0.1 * i as f64).collect();
        let p = SineParams::default();
        let mut c1 = ctx(xs.len());
        let ct = c1.encrypt_real(&xs).unwrap();
        let series = eval_series_encrypted(&mut c1, &s, &ct, p).unwrap();
        let mut c2 = ctx(xs.len());
        let scaled: Vec<f64> = xs.iter().map(|x| PI * x / l).collect();
        let ct = c2.encrypt_real(&scaled).unwrap();
        let sine = sine_compute(&mut c2, &ct, p).unwrap();
        let a = c1.decrypt_real(&series).unwrap();
        let b = c2.decrypt_real(&sine).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - 0.8 * v).abs() <= 1e-8);
        }
    }
}
