//! Softmax cross-entropy for multiclass boosting.

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `w · −log softmax(logits)[label]`.
pub fn log_loss(logits: &[f64], label: usize, weight: f64) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    weight * (lse - logits[label])
}

/// Gradient `w(p − y)` and diagonal Hessian `w·p(1 − p)`.
pub fn softmax_grad_hess(logits: &[f64], label: usize, weight: f64) -> (Vec<f64>, Vec<f64>) {
    let p = softmax(logits);
    let grad = p
        .iter()
        .enumerate()
        .map(|(k, &pk)| weight * (pk - if k == label { 1.0 } else { 0.0 }))
        .collect();
    let hess = p.iter().map(|&pk| weight * pk * (1.0 - pk)).collect();
    (grad, hess)
}
