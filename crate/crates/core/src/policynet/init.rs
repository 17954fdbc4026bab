use rand::Rng;
use rand_distr::StandardNormal;

use super::{Linear, NetDims, PolicyParams};
use crate::error::Result;
use crate::linalg::Mat;
use crate::scalar::Scalar;

const ENCODER_GAIN: f64 = std::f64::consts::SQRT_2;
const ACTOR_GAIN: f64 = 0.01;
const CRITIC_GAIN: f64 = 1.0;
const LSTM_GAIN: f64 = 1.0;
const FORGET_BIAS: f64 = 1.0;

/// Orthogonal `rows × cols` matrix scaled by `gain`: orthonormal rows when
/// `rows <= cols`, orthonormal columns otherwise.
pub fn orthogonal<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Mat<T> {
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    // n vectors of length m, n <= m; modified Gram-Schmidt with re-draws for
    // (vanishingly unlikely) dependent samples.
    let mut q = vec![0.0f64; n * m];
    for i in 0..n {
        loop {
            let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            for _pass in 0..2 {
                for j in 0..i {
                    let qj = &q[j * m..(j + 1) * m];
                    let dot: f64 = v.iter().zip(qj).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(qj).for_each(|(a, b)| *a -= dot * b);
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-8 {
                q[i * m..(i + 1) * m].iter_mut().zip(&v).for_each(|(d, s)| *d = s / norm);
                break;
            }
        }
    }
    let mut out = Mat::zeros(rows, cols);
    for i in 0..n {
        for k in 0..m {
            let (r, c) = if transpose { (k, i) } else { (i, k) };
            out.data[r * cols + c] = T::lit(gain * q[i * m + k]);
        }
    }
    out
}

/// Orthogonal weights (encoders gain √2, actor 0.01, critic 1, LSTM 1), zero
/// biases except a forget-gate bias of 1.
pub fn init_params<T: Scalar, R: Rng + ?Sized>(dims: NetDims, rng: &mut R) -> Result<PolicyParams<T>> {
    let mut p = PolicyParams::<T>::zeros(dims)?;
    if let Some(l) = &mut p.motion_enc {
        l.w = orthogonal(dims.enc, dims.motion_in(), ENCODER_GAIN, rng);
    }
    if let Some(l) = &mut p.visual_enc {
        l.w = orthogonal(dims.enc, dims.visual_in(), ENCODER_GAIN, rng);
    }
    let h = dims.hidden;
    p.lstm_wx = orthogonal(4 * h, dims.lstm_in(), LSTM_GAIN, rng);
    p.lstm_wh = orthogonal(4 * h, h, LSTM_GAIN, rng);
    for v in &mut p.lstm_b.data[h..2 * h] {
        *v = T::lit(FORGET_BIAS);
    }
    p.actor = Linear { w: orthogonal(dims.n_actions, h, ACTOR_GAIN, rng), b: Mat::zeros(1, dims.n_actions) };
    p.critic = Linear { w: orthogonal(1, h, CRITIC_GAIN, rng), b: Mat::zeros(1, 1) };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (r, c) in [(4, 9), (9, 4), (6, 6)] {
            let q: Mat<f64> = orthogonal(r, c, 1.0, &mut rng);
            let (n, by_rows) = if r <= c { (r, true) } else { (c, false) };
            for i in 0..n {
                for j in 0..n {
                    let dot: f64 = if by_rows {
                        (0..c).map(|k| q.at(i, k) * q.at(j, k)).sum()
                    } else {
                        (0..r).map(|k| q.at(k, i) * q.at(k, j)).sum()
                    };
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10);
                }
            }
        }
    }
}
