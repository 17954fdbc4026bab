use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Generalized advantage estimation over one env's trajectory slice.
///
/// `δ_t = r_t + γ V_{t+1} (1 - done_t) - V_t`, `A_t = δ_t + γλ (1 - done_t) A_{t+1}`,
/// with `V_len = bootstrap_value`. Returns `(advantages, advantages + values)`.
pub fn compute_gae<T: Scalar>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    bootstrap_value: T,
    gamma: T,
    lambda: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::Shape(format!(
            "gae inputs differ in length: {n} rewards, {} values, {} dones",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![T::zero(); n];
    let mut next_adv = T::zero();
    let mut next_value = bootstrap_value;
    for t in (0..n).rev() {
        let live = if dones[t] { T::zero() } else { T::one() };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    Ok((adv, returns))
}
