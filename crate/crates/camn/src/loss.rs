//! Reconstruction, adversarial and combined objectives.

use ndiff::{Graph, Var};

use crate::{CamnError, Result};

/// `MAE(body) + α·MAE(hands)`.
pub fn reconstruction_loss(
    g: &mut Graph,
    pred_body: Var,
    true_body: Var,
    pred_hands: Var,
    true_hands: Var,
    alpha: f64,
) -> ndiff::Result<Var> {
    let b = g.l1_loss(pred_body, true_body)?;
    let h = g.l1_loss(pred_hands, true_hands)?;
    let h = g.scale(h, alpha)?;
    g.add(b, h)
}

/// `−mean log σ(logit)` over a column of discriminator logits for generated
/// sequences.
pub fn adversarial_loss(g: &mut Graph, fake_logits: Var) -> ndiff::Result<Var> {
    let ls = g.log_sigmoid(fake_logits)?;
    let m = g.mean(ls)?;
    g.neg(m)
}

/// Binary cross-entropy with real sequences labelled 1 and generated ones 0:
/// `−mean log σ(real) − mean log σ(−fake)`.
pub fn discriminator_loss(g: &mut Graph, real_logits: Var, fake_logits: Var) -> ndiff::Result<Var> {
    let r = g.log_sigmoid(real_logits)?;
    let r = g.mean(r)?;
    let nf = g.neg(fake_logits)?;
    let f = g.log_sigmoid(nf)?;
    let f = g.mean(f)?;
    let s = g.add(r, f)?;
    g.neg(s)
}

/// `λ·β₀·L_rec + β₁·L_adv`.
pub fn total_loss(g: &mut Graph, rec: Var, adv: Var, lambda: f64, beta0: f64, beta1: f64) -> ndiff::Result<Var> {
    let r = g.scale(rec, lambda * beta0)?;
    let a = g.scale(adv, beta1)?;
    g.add(r, a)
}

pub fn total_loss_value(rec: f64, adv: f64, lambda: f64, beta0: f64, beta1: f64) -> f64 {
    lambda * beta0 * rec + beta1 * adv
}

/// `−mean log s` from discriminator scores in `(0, 1]`.
pub fn adversarial_loss_from_scores(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(CamnError::Input("no discriminator scores".into()));
    }
    if let Some(s) = scores.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
        return Err(CamnError::Input(format!("score {s} outside (0, 1]")));
    }
    Ok(-scores.iter().map(|s| s.ln()).sum::<f64>() / scores.len() as f64)
}
