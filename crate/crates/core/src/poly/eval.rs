use super::{MultCount, Polynomial};

/// Arithmetic backend for polynomial evaluation schemes.
///
/// `constant` produces a value in the evaluator's domain (for an encrypted
/// backend: a fresh encryption of `c`), so every `mul` is a full
/// ciphertext-by-ciphertext product.
pub trait PolyEvaluator {
    type Value: Clone;
    type Error;

    fn constant(&mut self, c: f64) -> Result<Self::Value, Self::Error>;
    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, Self::Error>;
    fn add_const(&mut self, a: &Self::Value, c: f64) -> Result<Self::Value, Self::Error>;
    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, Self::Error>;
    fn mul_const(&mut self, a: &Self::Value, c: f64) -> Result<Self::Value, Self::Error>;
}

/// A plaintext value carrying the depth of the multiplication chain that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tracked {
    pub value: f64,
    pub depth: u64,
}

/// Plaintext evaluator that counts multiplications.
#[derive(Debug, Default)]
pub struct CountingEvaluator {
    pub count: MultCount,
}

impl CountingEvaluator {
    pub fn input(&self, x: f64) -> Tracked {
        Tracked { value: x, depth: 0 }
    }

    fn finish(mut self, v: Tracked) -> (f64, MultCount) {
        self.count.depth = v.depth;
        (v.value, self.count)
    }
}

impl PolyEvaluator for CountingEvaluator {
    type Value = Tracked;
    type Error = std::convert::Infallible;

    fn constant(&mut self, c: f64) -> Result<Tracked, Self::Error> {
        Ok(Tracked { value: c, depth: 0 })
    }

    fn add(&mut self, a: &Tracked, b: &Tracked) -> Result<Tracked, Self::Error> {
        Ok(Tracked {
            value: a.value + b.value,
            depth: a.depth.max(b.depth),
        })
    }

    fn add_const(&mut self, a: &Tracked, c: f64) -> Result<Tracked, Self::Error> {
        Ok(Tracked {
            value: a.value + c,
            depth: a.depth,
        })
    }

    fn mul(&mut self, a: &Tracked, b: &Tracked) -> Result<Tracked, Self::Error> {
        self.count.ct_mults += 1;
        Ok(Tracked {
            value: a.value * b.value,
            depth: a.depth.max(b.depth) + 1,
        })
    }

    fn mul_const(&mut self, a: &Tracked, c: f64) -> Result<Tracked, Self::Error> {
        self.count.scalar_mults += 1;
        Ok(Tracked {
            value: a.value * c,
            depth: a.depth + 1,
        })
    }
}

/// Horner's rule: `degree(p)` sequential multiplications.
pub fn horner_with<E: PolyEvaluator>(ev: &mut E, p: &Polynomial, x: &E::Value) -> Result<E::Value, E::Error> {
    let c = p.coeffs();
    let mut acc = ev.constant(c[c.len() - 1])?;
    for &ci in c.iter().rev().skip(1) {
        let prod = ev.mul(&acc, x)?;
        acc = ev.add_const(&prod, ci)?;
    }
    Ok(acc)
}

/// Computes `x^1..=x^k`; `x^m` has multiplicative depth `ceil(log2 m)`.
pub fn powers<E: PolyEvaluator>(ev: &mut E, x: &E::Value, k: usize) -> Result<Vec<E::Value>, E::Error> {
    // index 0 unused so that pows[m] = x^m
    let mut pows: Vec<E::Value> = Vec::with_capacity(k + 1);
    pows.push(x.clone());
    pows.push(x.clone());
    for m in 2..=k {
        let high = 1usize << (usize::BITS - 1 - (m - 1).leading_zeros());
        let v = if high == m {
            ev.mul(&pows[m / 2], &pows[m / 2])?
        } else {
            ev.mul(&pows[high], &pows[m - high])?
        };
        pows.push(v);
    }
    Ok(pows)
}

/// Paterson–Stockmeyer evaluation with `k = ceil(sqrt(d+1))` baby steps.
///
/// Uses `(k-1) + (ceil((d+1)/k) - 1)` ciphertext multiplications; the inner
/// chunks only need scalar multiplications.
pub fn paterson_stockmeyer_with<E: PolyEvaluator>(
    ev: &mut E,
    p: &Polynomial,
    x: &E::Value,
) -> Result<E::Value, E::Error> {
    let c = p.coeffs();
    let n = c.len();
    if n == 1 {
        return ev.constant(c[0]);
    }
    let k = (n as f64).sqrt().ceil() as usize;
    let chunks = n.div_ceil(k);
    let baby = if chunks > 1 { k } else { n - 1 };
    let pows = powers(ev, x, baby)?;

    let mut chunk_values = Vec::with_capacity(chunks);
    for j in 0..chunks {
        let part = &c[j * k..((j + 1) * k).min(n)];
        let mut acc: Option<E::Value> = None;
        for (i, &ci) in part.iter().enumerate().skip(1) {
            if ci == 0.0 {
                continue;
            }
            let term = ev.mul_const(&pows[i], ci)?;
            acc = Some(match acc {
                Some(a) => ev.add(&a, &term)?,
                None => term,
            });
        }
        let v = match acc {
            Some(a) => ev.add_const(&a, part[0])?,
            None => ev.constant(part[0])?,
        };
        chunk_values.push(v);
    }

    let mut acc = chunk_values.pop().expect("at least one chunk");
    while let Some(q) = chunk_values.pop() {
        let prod = ev.mul(&acc, &pows[k])?;
        acc = ev.add(&prod, &q)?;
    }
    Ok(acc)
}

/// Evaluates `p(x)` by Horner's rule.
pub fn eval_horner(p: &Polynomial, x: f64) -> (f64, MultCount) {
    let mut ev = CountingEvaluator::default();
    let input = ev.input(x);
    let Ok(v) = horner_with(&mut ev, p, &input);
    ev.finish(v)
}

/// Evaluates `p(x)` by Paterson–Stockmeyer.
pub fn eval_paterson_stockmeyer(p: &Polynomial, x: f64) -> (f64, MultCount) {
    let mut ev = CountingEvaluator::default();
    let input = ev.input(x);
    let Ok(v) = paterson_stockmeyer_with(&mut ev, p, &input);
    ev.finish(v)
}
