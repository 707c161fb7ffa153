//! Evaluation reports and the comparison table built from them.

use serde::{Deserialize, Serialize};

use crate::fmt17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub radius: f64,
    pub max_abs_error: f64,
    pub mse: f64,
    pub levels_consumed: u64,
    pub ct_mults: u64,
    pub scalar_mults: u64,
    pub bootstraps: u64,
    #[serde(default)]
    pub config: serde_json::Value,
    pub wall_time_seconds: f64,
}

/// Max absolute error and MSE of `predicted` against `truth`.
pub fn error_stats(predicted: &[f64], truth: &[f64]) -> (f64, f64) {
    assert_eq!(predicted.len(), truth.len(), "prediction and truth lengths differ");
    if predicted.is_empty() {
        return (0.0, 0.0);
    }
    let mut max = 0.0f64;
    let mut sq = 0.0;
    for (p, t) in predicted.iter().zip(truth) {
        let e = (p - t).abs();
        // NaN must not vanish into max()
        max = if e.is_nan() { f64::NAN } else { max.max(e) };
        sq += e * e;
    }
    (max, sq / predicted.len() as f64)
}

impl EvalReport {
    /// Report with the error fields filled in and all counters zero.
    pub fn from_predictions(method: &str, radius: f64, predicted: &[f64], truth: &[f64]) -> EvalReport {
        let (max_abs_error, mse) = error_stats(predicted, truth);
        EvalReport {
            method: method.to_string(),
            radius,
            max_abs_error,
            mse,
            levels_consumed: 0,
            ct_mults: 0,
            scalar_mults: 0,
            bootstraps: 0,
            config: serde_json::Value::Null,
            wall_time_seconds: 0.0,
        }
    }
}

pub const TABLE_HEADER: &str = "radius,method,max_abs_error,mse,levels_consumed,ct_mults,scalar_mults,bootstraps";

/// One CSV row per report, sorted by `(radius, method)`.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| a.radius.total_cmp(&b.radius).then_with(|| a.method.cmp(&b.method)));
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.radius,
            r.method,
            fmt17(r.max_abs_error),
            fmt17(r.mse),
            r.levels_consumed,
            r.ct_mults,
            r.scalar_mults,
            r.bootstraps
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(method: &str, radius: f64, ct: u64) -> EvalReport {
        EvalReport {
            ct_mults: ct,
            bootstraps: ct / 2,
            levels_consumed: 3,
            ..EvalReport::from_predictions(method, radius, &[1.0, 2.0], &[1.5, 2.0])
        }
    }

    #[test]
    fn error_statistics() {
        let (max, mse) = error_stats(&[1.0, 2.0, 3.0], &[1.0, 2.5, 2.0]);
        assert_eq!(max, 1.0);
        assert_eq!(mse, (0.25 + 1.0) / 3.0);
        assert!(mse <= max * max);
        assert!(error_stats(&[f64::NAN], &[0.0]).0.is_nan());
    }

    #[test]
    fn table_is_sorted_and_complete() {
        let reports = vec![
            report("network", 70.0, 9),
            report("fourier", 30.0, 4),
            report("network", 30.0, 2),
            report("horner", 50.0, 1),
        ];
        let table = comparison_table(&reports);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], TABLE_HEADER);
        let keys: Vec<(&str, &str)> = lines[1..]
            .iter()
            .map(|l| {
                let mut f = l.split(',');
                (f.next().unwrap(), f.next().unwrap())
            })
            .collect();
        assert_eq!(keys, [("30", "fourier"), ("30", "network"), ("50", "horner"), ("70", "network")]);
        let total: u64 = lines[1..].iter().map(|l| l.split(',').nth(5).unwrap().parse::<u64>().unwrap()).sum();
        assert_eq!(total, reports.iter().map(|r| r.ct_mults).sum::<u64>());
    }

    #[test]
    fn json_round_trip() {
        let r = report("network", 30.0, 5);
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<EvalReport>(&text).unwrap(), r);
    }
}
