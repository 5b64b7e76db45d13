//! Categorical-distribution helpers over logits.

/// Numerically stable softmax, written into `out`.
pub fn softmax(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Shannon entropy in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Gradient of the entropy with respect to the logits:
/// `dH/dz_j = -pi_j (log pi_j + H)`.
pub fn entropy_logit_grad(probs: &[f64], out: &mut [f64]) {
    let h = entropy(probs);
    for (o, &p) in out.iter_mut().zip(probs) {
        *o = if p > 0.0 { -p * (p.ln() + h) } else { 0.0 };
    }
}
