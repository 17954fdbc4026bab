use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSample<T> {
    pub action: usize,
    pub log_prob: T,
    pub entropy: T,
}

/// Numerically stable `log softmax`.
pub fn log_softmax<T: Scalar>(logits: &[T]) -> Result<Vec<T>> {
    if logits.is_empty() || logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite or empty logits {logits:?}")));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
    Ok(logits.iter().map(|&v| v - lse).collect())
}

pub(crate) fn entropy_of<T: Scalar>(logp: &[T]) -> T {
    -logp.iter().map(|&l| l.exp() * l).sum::<T>()
}

/// Draws from `softmax(logits)`.
pub fn sample_action<T: Scalar, R: Rng + ?Sized>(logits: &[T], rng: &mut R) -> Result<ActionSample<T>> {
    let logp = log_softmax(logits)?;
    let u: f64 = rng.random();
    let mut acc = 0.0f64;
    let mut action = logp.len() - 1;
    for (i, l) in logp.iter().enumerate() {
        acc += l.to_f64().unwrap_or(f64::NEG_INFINITY).exp();
        if u < acc {
            action = i;
            break;
        }
    }
    // Rounding can leave the last bucket reachable with zero probability.
    while logp[action].to_f64().is_some_and(|l| l == f64::NEG_INFINITY) && action > 0 {
        action -= 1;
    }
    Ok(ActionSample { action, log_prob: logp[action], entropy: entropy_of(&logp) })
}

/// Argmax with lowest-index tie-break.
pub fn greedy_action<T: Scalar>(logits: &[T]) -> Result<usize> {
    if logits.is_empty() || logits.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical(format!("cannot take argmax of {logits:?}")));
    }
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    Ok(best)
}
