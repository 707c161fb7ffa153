//! Post-training uniform quantization of network weights.
//!
//! Per-tensor symmetric: each weight matrix gets
//! `scale = max|w| / (2^(bits-1) - 1)` and every weight becomes
//! `round(w / scale) * scale`. Biases and activation coefficients keep full
//! precision.

use serde::Serialize;
use thiserror::Error;

use crate::extract::plan_depth;
use crate::funcspec::SampleSet;
use crate::netcore::Network;
use crate::report::EvalReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("bit width {0} outside 2..=16")]
    InvalidBits(u32),
    #[error("networks differ in shape: {0}")]
    ShapeMismatch(String),
}

/// Tensors whose weights all lie within this distance of the grid (in units
/// of the step) are left untouched, which makes quantization idempotent.
const ON_GRID_TOLERANCE: f64 = 1e-9;

fn quantize_tensor(w: &mut [f64], bits: u32) {
    let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return;
    }
    let scale = max / ((1u32 << (bits - 1)) - 1) as f64;
    let on_grid = w.iter().all(|v| {
        let q = v / scale;
        (q - q.round()).abs() <= ON_GRID_TOLERANCE
    });
    if on_grid {
        return;
    }
    for v in w {
        *v = (*v / scale).round() * scale;
    }
}

/// Returns a copy of `net` with every weight matrix quantized to `bits` bits.
pub fn quantize_uniform(net: &Network, bits: u32) -> Result<Network, QuantError> {
    if !(2..=16).contains(&bits) {
        return Err(QuantError::InvalidBits(bits));
    }
    let mut q = net.clone();
    for layer in &mut q.layers {
        quantize_tensor(&mut layer.weights, bits);
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizationReport {
    pub original: EvalReport,
    pub quantized: EvalReport,
    /// Quantized max error over original max error; 1 when both vanish.
    pub degradation_ratio: f64,
}

fn plain_report(method: &str, net: &Network, set: &SampleSet, radius: f64) -> EvalReport {
    let preds: Vec<f64> = set
        .points
        .iter()
        .map(|&(x, _)| net.forward(x).unwrap_or(f64::NAN))
        .collect();
    let plan = plan_depth(&net.config);
    EvalReport {
        levels_consumed: plan.depth,
        ct_mults: plan.ct_mults,
        scalar_mults: plan.scalar_mults,
        ..EvalReport::from_predictions(method, radius, &preds, &set.ys())
    }
}

/// Errors of `net` and `net_q` on `eval_set`.
pub fn quantization_report(net: &Network, net_q: &Network, eval_set: &SampleSet) -> Result<QuantizationReport, QuantError> {
    let shape = |n: &Network| -> Vec<(usize, usize, usize)> {
        n.layers
            .iter()
            .enumerate()
            .map(|(i, l)| (l.n_out, l.n_in, n.activations.get(i).map_or(0, Vec::len)))
            .collect()
    };
    if shape(net) != shape(net_q) {
        return Err(QuantError::ShapeMismatch(format!("{:?} vs {:?}", shape(net), shape(net_q))));
    }
    let radius = eval_set.points.iter().fold(0.0f64, |m, p| m.max(p.0.abs()));
    let original = plain_report("network", net, eval_set, radius);
    let quantized = plain_report("network-quantized", net_q, eval_set, radius);
    let degradation_ratio = if original.max_abs_error == quantized.max_abs_error {
        1.0
    } else {
        quantized.max_abs_error / original.max_abs_error
    };
    Ok(QuantizationReport {
        original,
        quantized,
        degradation_ratio,
    })
}
