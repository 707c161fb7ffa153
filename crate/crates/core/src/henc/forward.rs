use super::{Ciphertext, Context, EncryptedEvaluator, HencError};
use crate::extract::ceil_log2;
use crate::netcore::{DenseLayer, Network};
use crate::poly::powers;

fn dense(ctx: &mut Context, layer: &DenseLayer, h: &[Ciphertext]) -> Result<Vec<Ciphertext>, HencError> {
    (0..layer.n_out)
        .map(|j| {
            let mut acc: Option<Ciphertext> = None;
            for (i, hi) in h.iter().enumerate() {
                let t = ctx.cmul(hi, layer.w(j, i))?;
                acc = Some(match acc {
                    Some(a) => ctx.add(&a, &t)?,
                    None => t,
                });
            }
            ctx.cadd(&acc.expect("layer has inputs"), layer.bias[j])
        })
        .collect()
}

fn activation(ctx: &mut Context, coeffs: &[f64], z: &Ciphertext) -> Result<Ciphertext, HencError> {
    let d = coeffs.len() - 1;
    let pows = powers(&mut EncryptedEvaluator { ctx: &mut *ctx }, z, d)?;
    let mut acc = ctx.cmul(&pows[1], coeffs[1])?;
    for (i, &c) in coeffs.iter().enumerate().skip(2) {
        let t = ctx.cmul(&pows[i], c)?;
        acc = ctx.add(&acc, &t)?;
    }
    ctx.cadd(&acc, coeffs[0])
}

/// Refreshes every ciphertext when the lowest level cannot cover `needed`.
fn refresh(ctx: &mut Context, h: Vec<Ciphertext>, needed: u32) -> Result<Vec<Ciphertext>, HencError> {
    let low = h.iter().map(Ciphertext::level).min().unwrap_or(u32::MAX);
    if !ctx.params.auto_bootstrap || low >= needed || needed > ctx.max_level() {
        return Ok(h);
    }
    h.iter().map(|c| ctx.bootstrap(c)).collect()
}

/// Encrypted forward pass over every slot of `ct_x`.
///
/// One ciphertext per neuron. With `auto_bootstrap` the hidden state is
/// refreshed before any layer whose cost exceeds the remaining budget.
pub fn forward_encrypted(ctx: &mut Context, net: &Network, ct_x: &Ciphertext) -> Result<Ciphertext, HencError> {
    ctx.check(ct_x)?;
    net.validate().map_err(|e| HencError::InvalidParams(e.to_string()))?;
    let act_cost = ceil_log2(net.activation_degree()) as u32 + 1;
    let mut h = vec![ct_x.clone()];
    for (layer, act) in net.layers.iter().zip(&net.activations) {
        h = refresh(ctx, h, 1)?;
        let z = dense(ctx, layer, &h)?;
        let z = refresh(ctx, z, act_cost)?;
        h = z.iter().map(|zj| activation(ctx, act, zj)).collect::<Result<_, _>>()?;
    }
    h = refresh(ctx, h, 1)?;
    let mut out = dense(ctx, net.output_layer(), &h)?;
    Ok(out.remove(0))
}
