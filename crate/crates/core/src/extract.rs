//! The polynomial a network computes, and what it costs to evaluate.

use thiserror::Error;

use crate::netcore::{Network, NetworkConfig};
use crate::poly::{MultCount, Plan, PlanNode, PolyError, Polynomial, DEFAULT_DEGREE_CAP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error("projected degree {degree} exceeds the cap of {cap}")]
    DegreeLimitExceeded { degree: u128, cap: usize },
    #[error("degree bound d^L overflows")]
    Overflow,
    #[error("need 2RP > d, got 2RP = {two_rp}, d = {degree}")]
    DomainError { two_rp: f64, degree: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `ceil(log2 n)` for `n >= 1`.
pub fn ceil_log2(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as u64
    }
}

/// `d^L`, the largest degree a network of this shape can compute.
pub fn degree_bound(cfg: &NetworkConfig) -> Result<u64, ExtractError> {
    (cfg.activation_degree as u64)
        .checked_pow(u32::try_from(cfg.hidden_layers).map_err(|_| ExtractError::Overflow)?)
        .ok_or(ExtractError::Overflow)
}

/// Hidden layers needed to represent a polynomial of degree `2RP` with
/// degree-`d` activations: the smallest `L` with `d^(L+1) >= 2RP`, i.e.
/// `ceil(log_d(2RP/d))`.
pub fn required_layers(radius: f64, precision: f64, degree: usize) -> Result<u32, ExtractError> {
    let two_rp = 2.0 * radius * precision;
    if degree < 2 || !(two_rp > degree as f64) || !two_rp.is_finite() {
        return Err(ExtractError::DomainError { two_rp, degree });
    }
    let target = two_rp / degree as f64;
    let d = degree as f64;
    let mut layers = 0u32;
    let mut reach = 1.0f64;
    // tolerate rounding in 2RP/d so that exact powers are not pushed up a layer
    while reach * (1.0 + 1e-12) < target {
        reach *= d;
        layers += 1;
    }
    Ok(layers)
}

/// Levels and multiplications of one encrypted forward pass.
///
/// Dense layers cost one scalar level; an activation costs
/// `ceil(log2 d)` ciphertext levels for the powers plus one scalar level for
/// the coefficients; the output layer costs one scalar level. Powers
/// `z^2..z^d` take `d - 1` ciphertext multiplications per neuron.
pub fn plan_depth(cfg: &NetworkConfig) -> MultCount {
    let l = cfg.hidden_layers as u64;
    let n = cfg.width as u64;
    let d = cfg.activation_degree as u64;
    if l == 0 {
        return MultCount {
            ct_mults: 0,
            scalar_mults: 1,
            depth: 1,
        };
    }
    MultCount {
        ct_mults: l * n * d.saturating_sub(1),
        scalar_mults: n + (l - 1) * n * n + l * n * d + n,
        depth: l * (2 + ceil_log2(cfg.activation_degree)) + 1,
    }
}

/// Evaluation plan of the encrypted forward pass, one node per homomorphic
/// operation; used to cross-check [`plan_depth`] by traversal.
pub fn forward_plan(net: &Network) -> Plan {
    let mut plan = Plan::new();
    let mut h = vec![plan.push(PlanNode::Input)];
    let dense = |plan: &mut Plan, layer: &crate::netcore::DenseLayer, h: &[usize]| -> Vec<usize> {
        (0..layer.n_out)
            .map(|j| {
                let mut acc = None;
                for (i, &hi) in h.iter().enumerate() {
                    let t = plan.push(PlanNode::ScalarMul(hi, layer.w(j, i)));
                    acc = Some(match acc {
                        Some(a) => plan.push(PlanNode::Add(a, t)),
                        None => t,
                    });
                }
                let b = plan.push(PlanNode::Const(layer.bias[j]));
                plan.push(PlanNode::Add(acc.expect("layer has inputs"), b))
            })
            .collect()
    };
    for (layer, act) in net.layers.iter().zip(&net.activations) {
        let z = dense(&mut plan, layer, &h);
        h = z
            .into_iter()
            .map(|zj| {
                let d = act.len() - 1;
                let mut pows = vec![zj, zj];
                for m in 2..=d {
                    let high = 1usize << (usize::BITS - 1 - (m - 1).leading_zeros());
                    let node = if high == m {
                        PlanNode::Square(pows[m / 2])
                    } else {
                        PlanNode::Mul(pows[high], pows[m - high])
                    };
                    pows.push(plan.push(node));
                }
                let mut acc = plan.push(PlanNode::ScalarMul(pows[1], act[1]));
                for (i, &c) in act.iter().enumerate().skip(2) {
                    let t = plan.push(PlanNode::ScalarMul(pows[i], c));
                    acc = plan.push(PlanNode::Add(acc, t));
                }
                let c0 = plan.push(PlanNode::Const(act[0]));
                plan.push(PlanNode::Add(acc, c0))
            })
            .collect();
    }
    let out = dense(&mut plan, net.output_layer(), &h);
    plan.root = out[0];
    plan
}

/// Expands the network into the single polynomial it computes.
pub fn extract_polynomial(net: &Network) -> Result<Polynomial, ExtractError> {
    extract_polynomial_with_cap(net, DEFAULT_DEGREE_CAP)
}

pub fn extract_polynomial_with_cap(net: &Network, cap: usize) -> Result<Polynomial, ExtractError> {
    let d = net.activation_degree() as u128;
    let projected = d
        .checked_pow(net.hidden_layers() as u32)
        .ok_or(ExtractError::Overflow)?;
    if projected > cap as u128 {
        return Err(ExtractError::DegreeLimitExceeded { degree: projected, cap });
    }
    let mut h = vec![Polynomial::identity()];
    for (layer, act) in net.layers.iter().zip(&net.activations) {
        let act = Polynomial::new(act.clone());
        h = (0..layer.n_out)
            .map(|j| {
                let z = affine(layer, j, &h);
                Ok(act.compose_with_cap(&z, cap)?)
            })
            .collect::<Result<_, ExtractError>>()?;
    }
    Ok(affine(net.output_layer(), 0, &h))
}

fn affine(layer: &crate::netcore::DenseLayer, row: usize, inputs: &[Polynomial]) -> Polynomial {
    let mut acc = Polynomial::constant(layer.bias[row]);
    for (i, p) in inputs.iter().enumerate() {
        acc = acc.add(&p.scale(layer.w(row, i)));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{init_network, DenseLayer, P2_ACTIVATION};
    use crate::poly::mult_depth_of_plan;
    use rand::{Rng, SeedableRng};

    fn cfg(l: usize, n: usize, d: usize) -> NetworkConfig {
        NetworkConfig::for_interval(l, n, d, 1.0)
    }

    #[test]
    fn degree_bounds() {
        assert_eq!(degree_bound(&cfg(1, 1, 2)).unwrap(), 2);
        assert_eq!(degree_bound(&cfg(12, 1, 2)).unwrap(), 4096);
        assert_eq!(degree_bound(&cfg(4, 1, 3)).unwrap(), 81);
        assert_eq!(degree_bound(&cfg(64, 1, 2)), Err(ExtractError::Overflow));
    }

    #[test]
    fn required_layer_counts() {
        assert_eq!(required_layers(30.0, 100.0, 2).unwrap(), 12);
        assert_eq!(required_layers(70.0, 100.0, 2).unwrap(), 13);
        // 2RP = d^2
        assert_eq!(required_layers(2.0, 1.0, 2).unwrap(), 1);
        assert_eq!(required_layers(4.5, 1.0, 3).unwrap(), 1);
        assert!(matches!(
            required_layers(1.0, 1.0, 2),
            Err(ExtractError::DomainError { .. })
        ));
    }

    #[test]
    fn doubling_radius_adds_at_most_one_layer() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let r: f64 = rng.random_range(1.0..200.0);
            let p: f64 = rng.random_range(1.0..1000.0);
            let d: usize = rng.random_range(2..6);
            let a = required_layers(r, p, d).unwrap();
            let b = required_layers(2.0 * r, p, d).unwrap();
            assert!(b >= a && b - a <= 1, "R={r} P={p} d={d}: {a} -> {b}");
        }
    }

    #[test]
    fn depth_formula() {
        assert_eq!(plan_depth(&cfg(1, 4, 2)).depth, 4);
        assert_eq!(plan_depth(&cfg(12, 4, 2)).depth, 37);
        assert_eq!(plan_depth(&NetworkConfig { hidden_layers: 0, ..cfg(1, 1, 2) }).depth, 1);
        assert_eq!(plan_depth(&cfg(2, 3, 3)).depth, 2 * 4 + 1);
    }

    #[test]
    fn plan_traversal_agrees_with_formula() {
        for (l, n, d) in [(1, 1, 2), (2, 3, 2), (3, 2, 3), (2, 2, 4), (1, 3, 5)] {
            let net = init_network(&cfg(l, n, d)).unwrap();
            let plan = forward_plan(&net);
            let counted = mult_depth_of_plan(&plan).unwrap();
            assert_eq!(counted, plan_depth(&net.config), "L={l} n={n} d={d}");
            let x = 0.37;
            let want = net.forward(x).unwrap();
            assert!((plan.evaluate(x).unwrap() - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
    }

    fn single_neuron(act: Vec<f64>) -> Network {
        let mut l0 = DenseLayer::zeros(1, 1);
        l0.weights[0] = 1.0;
        let mut l1 = DenseLayer::zeros(1, 1);
        l1.weights[0] = 1.0;
        Network::from_parts(vec![l0, l1], vec![act]).unwrap()
    }

    #[test]
    fn identity_and_p2() {
        let id = extract_polynomial(&single_neuron(vec![0.0, 1.0, 0.0])).unwrap();
        assert_eq!(id.coeffs(), &[0.0, 1.0]);
        let p2 = extract_polynomial(&single_neuron(P2_ACTIVATION.to_vec())).unwrap();
        assert_eq!(p2.coeffs(), &P2_ACTIVATION);
    }

    #[test]
    fn extraction_matches_forward() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut net = init_network(&NetworkConfig { seed: 4, ..cfg(3, 6, 2) }).unwrap();
        let mut p = net.params();
        for v in &mut p {
            *v += rng.random_range(-0.2..0.2);
        }
        net.set_params(&p);
        let poly = extract_polynomial(&net).unwrap();
        assert_eq!(poly.degree(), 8);
        for _ in 0..100 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let f = net.forward(x).unwrap();
            assert!((poly.eval(x) - f).abs() <= 1e-8 * (1.0 + f.abs()));
        }
    }

    #[test]
    fn cap_is_checked_before_expanding() {
        let net = init_network(&cfg(13, 2, 2)).unwrap();
        assert_eq!(
            extract_polynomial(&net),
            Err(ExtractError::DegreeLimitExceeded { degree: 8192, cap: 4096 })
        );
    }
}
