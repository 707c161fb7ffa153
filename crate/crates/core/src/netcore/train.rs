use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{activate, init_network, DenseLayer, NetError, Network, NetworkConfig};
use crate::funcspec::SampleSet;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Gradient of the loss, shaped like the network it was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
    pub activations: Vec<Vec<f64>>,
}

impl Gradients {
    fn from_flat(net: &Network, flat: &[f64]) -> Gradients {
        let mut shaped = net.clone();
        shaped.set_params(flat);
        Gradients {
            layers: shaped.layers,
            activations: shaped.activations,
        }
    }

    /// Same ordering as [`Network::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        for a in &self.activations {
            out.extend_from_slice(a);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_train_mse: f64,
    /// Validation MSE of the returned (best) snapshot.
    pub final_validation_mse: f64,
    pub best_epoch: usize,
    /// Training-set MSE after each epoch.
    pub loss_history: Vec<f64>,
    pub validation_history: Vec<f64>,
}

/// Per-sample activations kept for the backward pass.
struct Workspace {
    /// `h[l]` is the input of dense layer `l`.
    h: Vec<Vec<f64>>,
    /// Pre-activations of hidden layer `l`.
    z: Vec<Vec<f64>>,
    dh: Vec<f64>,
    dz: Vec<f64>,
    /// Flat offsets of each layer's weights and of each activation.
    layer_offsets: Vec<usize>,
    act_offsets: Vec<usize>,
}

impl Workspace {
    fn new(net: &Network) -> Self {
        let mut h = vec![vec![0.0; 1]];
        let mut z = Vec::new();
        for l in &net.layers[..net.layers.len() - 1] {
            z.push(vec![0.0; l.n_out]);
            h.push(vec![0.0; l.n_out]);
        }
        let mut layer_offsets = Vec::new();
        let mut off = 0;
        for l in &net.layers {
            layer_offsets.push(off);
            off += l.weights.len() + l.bias.len();
        }
        let mut act_offsets = Vec::new();
        for a in &net.activations {
            act_offsets.push(off);
            off += a.len();
        }
        let width = net.layers.iter().map(|l| l.n_out.max(l.n_in)).max().unwrap_or(1);
        Workspace {
            h,
            z,
            dh: Vec::with_capacity(width),
            dz: Vec::with_capacity(width),
            layer_offsets,
            act_offsets,
        }
    }
}

/// Accumulates `scale * d(residual^2)/d(params)` into `grad` and returns the residual.
fn backprop_sample(net: &Network, ws: &mut Workspace, x: f64, target: f64, scale: f64, grad: &mut [f64]) -> f64 {
    let hidden = net.activations.len();
    ws.h[0][0] = x;
    for l in 0..hidden {
        let (before, after) = ws.h.split_at_mut(l + 1);
        net.layers[l].apply(&before[l], &mut ws.z[l]);
        let act = &net.activations[l];
        for (hv, &zv) in after[0].iter_mut().zip(&ws.z[l]) {
            *hv = activate(act, zv);
        }
    }
    let out_layer = &net.layers[hidden];
    let mut out = [0.0];
    out_layer.apply(&ws.h[hidden], &mut out);
    let y = out[0];
    let residual = y - target;
    let dy = 2.0 * residual * scale;

    // output layer
    let off = ws.layer_offsets[hidden];
    let n = out_layer.n_in;
    for i in 0..n {
        grad[off + i] += dy * ws.h[hidden][i];
    }
    grad[off + n] += dy;
    ws.dh.clear();
    ws.dh.extend(out_layer.weights.iter().map(|w| w * dy));

    for l in (0..hidden).rev() {
        let act = &net.activations[l];
        let aoff = ws.act_offsets[l];
        ws.dz.clear();
        for (j, &zv) in ws.z[l].iter().enumerate() {
            let g = ws.dh[j];
            // d/dc_i = g z^i ; d/dz = g sum i c_i z^(i-1)
            let mut zp = 1.0;
            let mut deriv = 0.0;
            for i in 0..act.len() {
                grad[aoff + i] += g * zp;
                if i + 1 < act.len() {
                    deriv += (i + 1) as f64 * act[i + 1] * zp;
                }
                zp *= zv;
            }
            ws.dz.push(g * deriv);
        }
        let layer = &net.layers[l];
        let off = ws.layer_offsets[l];
        let input = &ws.h[l];
        for (j, &dzj) in ws.dz.iter().enumerate() {
            let row = off + j * layer.n_in;
            for (k, &hk) in input.iter().enumerate() {
                grad[row + k] += dzj * hk;
            }
        }
        let boff = off + layer.weights.len();
        for (j, &dzj) in ws.dz.iter().enumerate() {
            grad[boff + j] += dzj;
        }
        if l > 0 {
            ws.dh.clear();
            ws.dh.resize(layer.n_in, 0.0);
            for (j, &dzj) in ws.dz.iter().enumerate() {
                let row = &layer.weights[j * layer.n_in..(j + 1) * layer.n_in];
                for (d, w) in ws.dh.iter_mut().zip(row) {
                    *d += w * dzj;
                }
            }
        }
    }
    residual
}

fn l2_penalty(net: &Network, lambda: f64, ws: &Workspace, grad: &mut [f64]) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (l, &off) in net.layers.iter().zip(&ws.layer_offsets) {
        for (i, &w) in l.weights.iter().enumerate() {
            sum += w * w;
            grad[off + i] += 2.0 * lambda * w;
        }
    }
    lambda * sum
}

fn loss_and_grad_flat(
    net: &Network,
    batch: &[(f64, f64)],
    l2_lambda: f64,
    ws: &mut Workspace,
    grad: &mut [f64],
) -> Result<f64, NetError> {
    if batch.is_empty() {
        return Err(NetError::EmptyData);
    }
    grad.iter_mut().for_each(|g| *g = 0.0);
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for &(x, t) in batch {
        let r = backprop_sample(net, ws, x, t, scale, grad);
        loss += r * r * scale;
    }
    loss += l2_penalty(net, l2_lambda, ws, grad);
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(NetError::NonFinite);
    }
    Ok(loss)
}

/// Mean squared error plus `l2_lambda * sum(W^2)` over all weight matrices,
/// with its gradient for every weight, bias and activation coefficient.
pub fn loss_and_gradients(net: &Network, batch: &SampleSet, l2_lambda: f64) -> Result<(f64, Gradients), NetError> {
    let mut ws = Workspace::new(net);
    let mut grad = vec![0.0; net.param_count()];
    let loss = loss_and_grad_flat(net, &batch.points, l2_lambda, &mut ws, &mut grad)?;
    Ok((loss, Gradients::from_flat(net, &grad)))
}

/// Mean squared error of `net` on `set`; `NaN` if the network overflows.
pub fn mse(net: &Network, set: &SampleSet) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for &(x, y) in &set.points {
        match net.forward(x) {
            Ok(v) => sum += (v - y) * (v - y),
            Err(_) => return f64::NAN,
        }
    }
    sum / set.len() as f64
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            lr,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + EPSILON);
        }
    }
}

/// Trains a network from `cfg` with Adam on shuffled minibatches and early
/// stopping on the validation MSE (training MSE if `validation` is empty).
/// Returns the best snapshot.
pub fn train(cfg: &NetworkConfig, train_set: &SampleSet, validation: &SampleSet) -> Result<(Network, TrainReport), NetError> {
    let net = init_network(cfg)?;
    train_from(net, cfg, train_set, validation)
}

/// Continues training an existing network under `cfg`'s optimiser settings.
pub fn train_from(
    mut net: Network,
    cfg: &NetworkConfig,
    train_set: &SampleSet,
    validation: &SampleSet,
) -> Result<(Network, TrainReport), NetError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(NetError::EmptyData);
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let mut params = net.params();
    let mut grad = vec![0.0; params.len()];
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut ws = Workspace::new(&net);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);

    let eval_set = if validation.is_empty() { train_set } else { validation };
    let mut best_net = net.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_train = f64::NAN;
    let mut since_best = 0;
    let mut loss_history = Vec::new();
    let mut validation_history = Vec::new();
    let mut epochs_run = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set.points[i]));
            loss_and_grad_flat(&net, &batch, cfg.l2_lambda, &mut ws, &mut grad)
                .map_err(|_| NetError::Diverged { epoch })?;
            adam.update(&mut params, &grad);
            net.set_params(&params);
        }
        epochs_run = epoch;
        let train_mse = mse(&net, train_set);
        if !train_mse.is_finite() {
            return Err(NetError::Diverged { epoch });
        }
        let val_mse = if validation.is_empty() { train_mse } else { mse(&net, eval_set) };
        loss_history.push(train_mse);
        validation_history.push(val_mse);
        if val_mse < best_val {
            best_val = val_mse;
            best_epoch = epoch;
            best_train = train_mse;
            best_net = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    best_net.config = cfg.clone();
    Ok((
        best_net,
        TrainReport {
            epochs_run,
            final_train_mse: best_train,
            final_validation_mse: best_val,
            best_epoch,
            loss_history,
            validation_history,
        },
    ))
}
