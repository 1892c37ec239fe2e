use crate::error::{Error, Result};
use crate::tape::{Tape, Var};

/// `(1 − eps)·onehot(label) + eps/classes`.
pub fn smoothed_target(classes: usize, label: usize, eps: f64) -> Result<Vec<f64>> {
    if classes < 2 {
        return Err(Error::contract("label smoothing needs at least 2 classes"));
    }
    if label >= classes {
        return Err(Error::contract(format!("label {} out of range for {} classes", label, classes)));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::contract("smoothing factor must be in [0, 1)"));
    }
    let mut t = vec![eps / classes as f64; classes];
    t[label] += 1.0 - eps;
    Ok(t)
}

/// Cross-entropy of `logits` against the smoothed one-hot target.
pub fn smoothed_ce_loss(tape: &mut Tape, logits: Var, label: usize, eps: f64) -> Result<Var> {
    let classes = tape.shape(logits).iter().product();
    let target = smoothed_target(classes, label, eps)?;
    tape.softmax_cross_entropy(logits, &target)
}
