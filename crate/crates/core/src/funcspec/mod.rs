//! Target functions and the grids they are sampled on.

mod expr;

use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

pub use expr::{parse, sign, BinOp, Expr, Func, ParseError};

use crate::fmt17;

#[derive(Debug, Error)]
pub enum FuncError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid target: {0}")]
    Invalid(String),
    #[error("non-finite value f({x}) = {y}")]
    NonFinite { x: f64, y: f64 },
    #[error("malformed sample CSV at line {line}: {msg}")]
    MalformedRow { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Sigmoid,
    Tanh,
    Relu,
    Abs,
    Sign,
    Sin,
    Gauss,
}

impl Builtin {
    pub const ALL: [Builtin; 7] = [
        Builtin::Sigmoid,
        Builtin::Tanh,
        Builtin::Relu,
        Builtin::Abs,
        Builtin::Sign,
        Builtin::Sin,
        Builtin::Gauss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sigmoid => "sigmoid",
            Builtin::Tanh => "tanh",
            Builtin::Relu => "relu",
            Builtin::Abs => "abs",
            Builtin::Sign => "sign",
            Builtin::Sin => "sin",
            Builtin::Gauss => "gauss",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Builtin::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Builtin::Tanh => x.tanh(),
            Builtin::Relu => x.max(0.0),
            Builtin::Abs => x.abs(),
            Builtin::Sign => sign(x),
            Builtin::Sin => x.sin(),
            Builtin::Gauss => (-x * x).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Builtin(Builtin),
    Expression { text: String, expr: Expr },
}

impl Source {
    /// A builtin name, or otherwise an expression in `x`.
    pub fn parse(text: &str) -> Result<Source, ParseError> {
        let trimmed = text.trim();
        if let Some(b) = Builtin::from_name(trimmed) {
            return Ok(Source::Builtin(b));
        }
        let expr = parse(trimmed)?;
        Ok(Source::Expression {
            text: trimmed.to_string(),
            expr,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Source::Builtin(b) => b.eval(x),
            Source::Expression { expr, .. } => expr.eval(x),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Builtin(b) => f.write_str(b.name()),
            Source::Expression { text, .. } => f.write_str(text),
        }
    }
}

/// A function to approximate on `[-radius, radius]`, sampled every `sample_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFunction {
    pub source: Source,
    pub radius: f64,
    pub sample_step: f64,
}

impl TargetFunction {
    pub fn new(source: Source, radius: f64, sample_step: f64) -> Result<Self, FuncError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(FuncError::Invalid(format!("radius must be positive, got {radius}")));
        }
        if !(sample_step > 0.0 && sample_step <= 2.0 * radius) {
            return Err(FuncError::Invalid(format!(
                "sample step must lie in (0, 2R] = (0, {}], got {sample_step}",
                2.0 * radius
            )));
        }
        Ok(TargetFunction {
            source,
            radius,
            sample_step,
        })
    }

    pub fn builtin(b: Builtin, radius: f64, sample_step: f64) -> Result<Self, FuncError> {
        Self::new(Source::Builtin(b), radius, sample_step)
    }

    /// Builtin name or expression text.
    pub fn parse_expression(text: &str, radius: f64, sample_step: f64) -> Result<Self, FuncError> {
        Self::new(Source::parse(text)?, radius, sample_step)
    }

    /// The sampling precision `1 / sample_step`.
    pub fn precision(&self) -> f64 {
        1.0 / self.sample_step
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.source.eval(x)
    }

    /// Same function on a different grid step.
    pub fn with_step(&self, sample_step: f64) -> Result<Self, FuncError> {
        Self::new(self.source.clone(), self.radius, sample_step)
    }

    pub fn sample(&self) -> Result<SampleSet, FuncError> {
        sample(self)
    }
}

/// Number of points on the grid `-R, -R+step, ..., <= R`.
pub fn grid_len(radius: f64, step: f64) -> usize {
    let q = 2.0 * radius / step;
    let r = q.round();
    let n = if (q - r).abs() <= 1e-9 * r.max(1.0) { r } else { q.floor() };
    n as usize + 1
}

/// The `i`-th grid abscissa.
pub fn grid_point(radius: f64, step: f64, i: usize) -> f64 {
    i as f64 * step - radius
}

/// Sample points ordered by ascending `x`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub points: Vec<(f64, f64)>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y")?;
        for &(x, y) in &self.points {
            writeln!(w, "{},{}", fmt17(x), fmt17(y))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<SampleSet, FuncError> {
        let mut points = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if idx == 0 {
                if line.trim() != "x,y" {
                    return Err(FuncError::MalformedRow {
                        line: 1,
                        msg: "expected header `x,y`".into(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(FuncError::MalformedRow {
                    line: line_no,
                    msg: "expected two fields".into(),
                });
            };
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| FuncError::MalformedRow {
                    line: line_no,
                    msg: e.to_string(),
                })
            };
            points.push((parse(a)?, parse(b)?));
        }
        Ok(SampleSet { points })
    }
}

/// Samples `f` on its grid.
pub fn sample(f: &TargetFunction) -> Result<SampleSet, FuncError> {
    let n = grid_len(f.radius, f.sample_step);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let x = grid_point(f.radius, f.sample_step, i);
        let y = f.eval(x);
        if !y.is_finite() {
            return Err(FuncError::NonFinite { x, y });
        }
        points.push((x, y));
    }
    Ok(SampleSet { points })
}

/// Every `keep_every`-th point goes to training, the rest to validation.
pub fn split_train_validation(s: &SampleSet, keep_every: usize) -> (SampleSet, SampleSet) {
    let k = keep_every.max(1);
    let mut train = Vec::with_capacity(s.len() / k + 1);
    let mut validation = Vec::with_capacity(s.len());
    for (i, &p) in s.points.iter().enumerate() {
        if i % k == 0 {
            train.push(p);
        } else {
            validation.push(p);
        }
    }
    (SampleSet { points: train }, SampleSet { points: validation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_grid_on_thirty() {
        let f = TargetFunction::builtin(Builtin::Sigmoid, 30.0, 0.01).unwrap();
        let s = f.sample().unwrap();
        assert_eq!(s.len(), 6001);
        assert_eq!(s.points[3000], (0.0, 0.5));
        assert_eq!(s.points[0].0, -30.0);
        assert!((s.points[6000].0 - 30.0).abs() < 1e-12);
        for (i, p) in s.points.iter().enumerate() {
            assert!((p.0 - (-30.0 + i as f64 / 100.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_grid() {
        let f = TargetFunction::parse_expression("x^2", 1.0, 2.0).unwrap();
        let s = f.sample().unwrap();
        assert_eq!(s.points, vec![(-1.0, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn grid_does_not_overshoot() {
        // 2R/step = 2.5: points at -1, -0.2, 0.6
        let f = TargetFunction::builtin(Builtin::Abs, 1.0, 0.8).unwrap();
        let s = f.sample().unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.points.iter().all(|p| p.0 <= 1.0));
    }

    #[test]
    fn builtin_conventions() {
        assert_eq!(Builtin::Sigmoid.eval(0.0), 0.5);
        assert_eq!(Builtin::Sign.eval(0.0), 0.0);
        assert_eq!(Builtin::Relu.eval(-2.0), 0.0);
        assert_eq!(Builtin::Relu.eval(2.0), 2.0);
        let f = TargetFunction::builtin(Builtin::Sign, 1.0, 0.5).unwrap();
        let s = f.sample().unwrap();
        assert_eq!(s.points[2], (0.0, 0.0));
    }

    #[test]
    fn invalid_targets() {
        assert!(TargetFunction::builtin(Builtin::Sin, 0.0, 0.1).is_err());
        assert!(TargetFunction::builtin(Builtin::Sin, 1.0, 0.0).is_err());
        assert!(TargetFunction::builtin(Builtin::Sin, 1.0, 2.5).is_err());
        assert!(matches!(
            TargetFunction::parse_expression("bogus(x)", 1.0, 0.1),
            Err(FuncError::Parse(ParseError::UnknownIdentifier { .. }))
        ));
    }

    #[test]
    fn pole_on_grid_is_non_finite() {
        let f = TargetFunction::parse_expression("1/x", 1.0, 0.5).unwrap();
        assert!(matches!(f.sample(), Err(FuncError::NonFinite { .. })));
    }

    #[test]
    fn split_counts() {
        let f = TargetFunction::builtin(Builtin::Sigmoid, 30.0, 0.01).unwrap();
        let s = f.sample().unwrap();
        let (t, v) = split_train_validation(&s, 10);
        assert_eq!((t.len(), v.len()), (601, 5400));
        let (t, v) = split_train_validation(&s, 1);
        assert_eq!(t.len(), 6001);
        assert!(v.is_empty());
    }

    #[test]
    fn split_partitions() {
        let f = TargetFunction::builtin(Builtin::Tanh, 2.0, 0.1).unwrap();
        let s = f.sample().unwrap();
        let (t, v) = split_train_validation(&s, 3);
        let mut all: Vec<(f64, f64)> = t.points.iter().chain(&v.points).copied().collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(all, s.points);
        assert!(t.points.iter().all(|p| !v.points.contains(p)));
    }

    #[test]
    fn sampling_is_deterministic() {
        let f = TargetFunction::parse_expression("sin(x)*exp(-x^2)", 3.0, 0.01).unwrap();
        let a = f.sample().unwrap();
        let b = f.sample().unwrap();
        assert!(a
            .points
            .iter()
            .zip(&b.points)
            .all(|(p, q)| p.0.to_bits() == q.0.to_bits() && p.1.to_bits() == q.1.to_bits()));
    }

    #[test]
    fn csv_round_trip() {
        let f = TargetFunction::builtin(Builtin::Sigmoid, 3.0, 0.1).unwrap();
        let s = f.sample().unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x,y\n"));
        let back = SampleSet::read_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
        assert!(matches!(
            SampleSet::read_csv(&b"x,y\n1,2\n1;2\n"[..]),
            Err(FuncError::MalformedRow { line: 3, .. })
        ));
    }
}
