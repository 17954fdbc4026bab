use super::PpoConfig;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::policynet::log_softmax;
use crate::scalar::Scalar;

/// Per-sample training targets for one minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBatch<T> {
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<T>,
    /// Already normalized.
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub loss: T,
    pub stats: LossStats,
    /// `∂loss/∂logits`, `N × n_actions`.
    pub dlogits: Mat<T>,
    /// `∂loss/∂value`.
    pub dvalues: Vec<T>,
}

/// In-place `(A - mean) / (std + 1e-8)` with the population std.
pub fn normalize_advantages<T: Scalar>(adv: &mut [T]) {
    if adv.is_empty() {
        return;
    }
    let n = T::from_usize(adv.len()).expect("length fits scalar");
    let mean = adv.iter().copied().sum::<T>() / n;
    let var = adv.iter().map(|&a| (a - mean) * (a - mean)).sum::<T>() / n;
    let denom = var.sqrt() + T::lit(1e-8);
    adv.iter_mut().for_each(|a| *a = (*a - mean) / denom);
}

/// Clipped-surrogate PPO loss with value and entropy terms, plus its exact
/// gradient w.r.t. logits and values:
///
/// `−mean min(ρÂ, clip(ρ, 1−ε, 1+ε)Â) + c_v mean (V − R)² − c_H mean H`,
/// `ρ = exp(log π_new − log π_old)`.
pub fn ppo_loss<T: Scalar>(logits: &Mat<T>, values: &[T], batch: &LossBatch<T>, cfg: &PpoConfig) -> Result<LossOutput<T>> {
    let n = batch.actions.len();
    if n == 0
        || logits.rows != n
        || values.len() != n
        || batch.old_log_probs.len() != n
        || batch.advantages.len() != n
        || batch.returns.len() != n
    {
        return Err(Error::Shape(format!("ppo_loss batch of {n} samples has inconsistent inputs")));
    }
    let nf = T::from_usize(n).expect("length fits scalar");
    let eps = T::lit(cfg.clip);
    let (c_v, c_h) = (T::lit(cfg.value_coef), T::lit(cfg.entropy_coef));
    let (lo, hi) = (T::one() - eps, T::one() + eps);

    let mut dlogits = Mat::zeros(n, logits.cols);
    let mut dvalues = vec![T::zero(); n];
    let (mut pol, mut val, mut ent) = (T::zero(), T::zero(), T::zero());
    let (mut clipped, mut kl) = (0usize, T::zero());

    for k in 0..n {
        let a = batch.actions[k];
        if a >= logits.cols {
            return Err(Error::Shape(format!("action {a} out of range")));
        }
        let logp = log_softmax(logits.row(k))?;
        let probs: Vec<T> = logp.iter().map(|l| l.exp()).collect();
        let h = -probs.iter().zip(&logp).map(|(&p, &l)| p * l).sum::<T>();
        let log_ratio = logp[a] - batch.old_log_probs[k];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[k];
        let unclipped = ratio * adv;
        let clipped_obj = ratio.max(lo).min(hi) * adv;
        let surrogate = unclipped.min(clipped_obj);

        pol -= surrogate;
        let err = values[k] - batch.returns[k];
        val += err * err;
        ent += h;
        if (ratio - T::one()).abs() > eps {
            clipped += 1;
        }
        kl += (ratio - T::one()) - log_ratio;

        // d(-surrogate)/d log π(a) is -ρÂ on the unclipped branch, 0 otherwise.
        let dlogp_a = if unclipped <= clipped_obj { -unclipped / nf } else { T::zero() };
        let row = dlogits.row_mut(k);
        for j in 0..row.len() {
            let onehot = if j == a { T::one() } else { T::zero() };
            let d_policy = dlogp_a * (onehot - probs[j]);
            let d_entropy = c_h * probs[j] * (logp[j] + h) / nf;
            row[j] = d_policy + d_entropy;
        }
        dvalues[k] = T::lit(2.0) * c_v * err / nf;
    }

    let (pol, val, ent, kl) = (pol / nf, val / nf, ent / nf, kl / nf);
    let loss = pol + c_v * val - c_h * ent;
    if !loss.is_finite() || !dlogits.is_finite() || dvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite PPO loss {loss}")));
    }
    let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
    Ok(LossOutput {
        loss,
        stats: LossStats {
            policy_loss: f(pol),
            value_loss: f(val),
            entropy: f(ent),
            clip_fraction: clipped as f64 / n as f64,
            approx_kl: f(kl),
        },
        dlogits,
        dvalues,
    })
}
