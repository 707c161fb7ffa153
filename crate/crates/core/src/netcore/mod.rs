//! Regression networks with trainable polynomial activations.
//!
//! One input, one output, `hidden_layers` dense layers of `width` neurons.
//! Every hidden layer applies a polynomial `c0 + c1 z + ... + cd z^d` whose
//! coefficients are shared by all neurons of that layer and trained along
//! with the weights. The output layer is linear.

mod train;
mod weights_csv;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::Polynomial;

pub use train::{loss_and_gradients, mse, train, Gradients, TrainReport};
pub use weights_csv::{load_weights_csv, read_weights_csv, save_weights_csv, write_weights_csv};

/// Coefficients of the degree-2 activation used to initialise training.
pub const P2_ACTIVATION: [f64; 3] = [1.1110537229, 0.5, 0.054235537];

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("non-finite intermediate value")]
    NonFinite,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("empty training set")]
    EmptyData,
    #[error("malformed weights row at line {line}: {msg}")]
    MalformedRow { line: usize, msg: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub activation_degree: usize,
    /// Defaults to the p2 coefficients for degree 2, and to `p2` padded with
    /// zeros for higher degrees.
    pub activation_init: Polynomial,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub l2_lambda: f64,
    pub patience: usize,
    pub seed: u64,
    /// Multiplies the first-layer weights at initialisation; `1/R` maps the
    /// interval `[-R, R]` onto `[-1, 1]`.
    pub input_scale: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden_layers: 1,
            width: 8,
            activation_degree: 2,
            activation_init: Polynomial::new(P2_ACTIVATION.to_vec()),
            learning_rate: 1e-3,
            max_epochs: 1000,
            batch_size: 32,
            l2_lambda: 0.0,
            patience: 50,
            seed: 0,
            input_scale: 1.0,
        }
    }
}

impl NetworkConfig {
    /// A config of the given shape with `p2`-derived activations and inputs
    /// scaled from `[-radius, radius]`.
    pub fn for_interval(hidden_layers: usize, width: usize, degree: usize, radius: f64) -> Self {
        NetworkConfig {
            hidden_layers,
            width,
            activation_degree: degree,
            activation_init: default_activation(degree),
            input_scale: 1.0 / radius,
            ..NetworkConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::InvalidConfig(m));
        if self.hidden_layers == 0 {
            return bad("hidden_layers must be positive".into());
        }
        if self.width == 0 {
            return bad("width must be positive".into());
        }
        if self.activation_degree < 2 {
            return bad(format!("activation degree must be >= 2, got {}", self.activation_degree));
        }
        if self.activation_init.degree() != self.activation_degree {
            return bad(format!(
                "activation_init has degree {}, expected {}",
                self.activation_init.degree(),
                self.activation_degree
            ));
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive".into());
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("max_epochs, batch_size and patience must be positive".into());
        }
        if !(self.l2_lambda >= 0.0) {
            return bad("l2_lambda must be nonnegative".into());
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return bad("input_scale must be positive".into());
        }
        Ok(())
    }
}

/// `p2` for degree 2; for higher degrees `p2` plus a small top coefficient
/// so the activation keeps its nominal degree.
pub fn default_activation(degree: usize) -> Polynomial {
    let mut c = vec![0.0; degree + 1];
    for (i, v) in P2_ACTIVATION.iter().enumerate().take(degree + 1) {
        c[i] = *v;
    }
    for v in c.iter_mut().skip(3) {
        *v = 1e-3;
    }
    Polynomial::new(c)
}

/// Row-major dense layer: `out = W in + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub n_out: usize,
    pub n_in: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(n_out: usize, n_in: usize) -> Self {
        DenseLayer {
            n_out,
            n_in,
            weights: vec![0.0; n_out * n_in],
            bias: vec![0.0; n_out],
        }
    }

    pub fn w(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.n_in + col]
    }

    pub fn w_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.weights[row * self.n_in + col]
    }

    /// `out = W input + b`.
    pub fn apply(&self, input: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.weights[j * self.n_in..(j + 1) * self.n_in];
            *o = self.bias[j] + row.iter().zip(input).map(|(w, h)| w * h).sum::<f64>();
        }
    }
}

/// Evaluates `c0 + c1 z + ... + cd z^d` by Horner's rule.
#[inline]
pub fn activate(coeffs: &[f64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    /// `hidden_layers + 1` dense layers; the last one is the linear output.
    pub layers: Vec<DenseLayer>,
    /// One coefficient vector per hidden layer.
    pub activations: Vec<Vec<f64>>,
    pub config: NetworkConfig,
}

impl Network {
    pub fn hidden_layers(&self) -> usize {
        self.activations.len()
    }

    pub fn width(&self) -> usize {
        self.layers.first().map(|l| l.n_out).unwrap_or(1)
    }

    pub fn activation_degree(&self) -> usize {
        self.activations.first().map(|a| a.len() - 1).unwrap_or(1)
    }

    pub fn output_layer(&self) -> &DenseLayer {
        self.layers.last().expect("network has an output layer")
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), NetError> {
        let err = |m: String| Err(NetError::ShapeMismatch(m));
        if self.layers.len() != self.activations.len() + 1 {
            return err(format!(
                "{} dense layers but {} activations",
                self.layers.len(),
                self.activations.len()
            ));
        }
        let mut n_in = 1;
        for (i, l) in self.layers.iter().enumerate() {
            if l.n_in != n_in {
                return err(format!("layer {i} expects {} inputs, previous layer gives {n_in}", l.n_in));
            }
            if l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return err(format!("layer {i} storage does not match {}x{}", l.n_out, l.n_in));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return err(format!("layer {i} has non-finite parameters"));
            }
            n_in = l.n_out;
        }
        if n_in != 1 {
            return err(format!("output layer has {n_in} outputs, expected 1"));
        }
        let d = self.activation_degree();
        for (i, a) in self.activations.iter().enumerate() {
            if a.len() != d + 1 || a.len() < 2 {
                return err(format!("activation {i} has {} coefficients, expected {}", a.len(), d + 1));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return err(format!("activation {i} has non-finite coefficients"));
            }
        }
        Ok(())
    }

    /// Network output at `x`.
    pub fn forward(&self, x: f64) -> Result<f64, NetError> {
        let mut h = vec![x];
        let mut z = Vec::new();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            z.resize(layer.n_out, 0.0);
            layer.apply(&h, &mut z);
            h.clear();
            h.extend(z.iter().map(|&v| activate(act, v)));
            if h.iter().any(|v| !v.is_finite()) {
                return Err(NetError::NonFinite);
            }
        }
        let mut out = [0.0];
        self.output_layer().apply(&h, &mut out);
        if !out[0].is_finite() {
            return Err(NetError::NonFinite);
        }
        Ok(out[0])
    }

    /// Number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum::<usize>()
            + self.activations.iter().map(Vec::len).sum::<usize>()
    }

    /// Parameters flattened as: per layer weights then bias, then all
    /// activation coefficients layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        for a in &self.activations {
            out.extend_from_slice(a);
        }
        out
    }

    /// Inverse of [`Network::params`].
    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count(), "parameter vector length");
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights.copy_from_slice(&p[off..off + n]);
            off += n;
            let n = l.bias.len();
            l.bias.copy_from_slice(&p[off..off + n]);
            off += n;
        }
        for a in &mut self.activations {
            let n = a.len();
            a.copy_from_slice(&p[off..off + n]);
            off += n;
        }
    }

    /// Assembles a network from explicit parts, checking invariants.
    pub fn from_parts(layers: Vec<DenseLayer>, activations: Vec<Vec<f64>>) -> Result<Network, NetError> {
        let hidden = activations.len();
        let width = layers.first().map(|l| l.n_out).unwrap_or(1);
        let degree = activations.first().map(|a| a.len().saturating_sub(1)).unwrap_or(2);
        let config = NetworkConfig {
            hidden_layers: hidden,
            width,
            activation_degree: degree,
            activation_init: activations
                .first()
                .map(|a| Polynomial::new(a.clone()))
                .unwrap_or_else(|| default_activation(2)),
            ..NetworkConfig::default()
        };
        let net = Network {
            layers,
            activations,
            config,
        };
        net.validate()?;
        Ok(net)
    }
}

/// Builds a freshly initialised network.
///
/// Weights are Glorot-uniform from a ChaCha8 stream seeded with `cfg.seed`,
/// biases start at zero, and the first layer is scaled by `input_scale`.
pub fn init_network(cfg: &NetworkConfig) -> Result<Network, NetError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut layers = Vec::with_capacity(cfg.hidden_layers + 1);
    let mut n_in = 1;
    for i in 0..=cfg.hidden_layers {
        let n_out = if i == cfg.hidden_layers { 1 } else { cfg.width };
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        let mut layer = DenseLayer::zeros(n_out, n_in);
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..limit);
            if i == 0 {
                *w *= cfg.input_scale;
            }
        }
        layers.push(layer);
        n_in = n_out;
    }
    let act = cfg.activation_init.coeffs().to_vec();
    Ok(Network {
        layers,
        activations: vec![act; cfg.hidden_layers],
        config: cfg.clone(),
    })
}
