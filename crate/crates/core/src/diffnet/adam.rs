use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Adam moments and hyperparameters. Single-owner; carried across stages.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with `lr = 1e-3`, `beta = (0.9, 0.999)`, `eps = 1e-8`.
    pub fn new(len: usize) -> Self {
        Self::with_learning_rate(len, 1e-3)
    }

    pub fn with_learning_rate(len: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    let n = params.len();
    for (context, len) in [
        ("adam gradient", grad.len()),
        ("adam first moment", state.first_moment.len()),
        ("adam second moment", state.second_moment.len()),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch { context, expected: n, found: len });
        }
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("adam gradient"));
    }
    state.step_count += 1;
    let t = state.step_count as f64;
    let bc1 = 1.0 - libm::pow(state.beta1, t);
    let bc2 = 1.0 - libm::pow(state.beta2, t);
    let (b1, b2) = (state.beta1, state.beta2);
    for i in 0..n {
        let g = grad[i];
        let m = b1 * state.first_moment[i] + (1.0 - b1) * g;
        let v = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        params[i] -= state.learning_rate * m_hat / (math::sqrt(v_hat) + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut state = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        adam_step(&mut state, &mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn first_step_hand_value() {
        let mut state = AdamState::new(1);
        let mut p = vec![0.0];
        adam_step(&mut state, &mut p, &[4.0]).unwrap();
        // m_hat = 4, v_hat = 16 after bias correction.
        let expected = -1e-3 * 4.0 / (4.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-18);
        assert!((p[0] + 9.999999975e-4).abs() < 1e-15);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut s = AdamState::new(2);
            let mut p = vec![0.3, -0.1];
            for k in 0..5 {
                adam_step(&mut s, &mut p, &[0.1 * k as f64, -0.7]).unwrap();
            }
            (p, s)
        };
        let (p1, s1) = run();
        let (p2, s2) = run();
        assert_eq!(p1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), p2.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(s1, s2);
    }

    #[test]
    fn rejects_non_finite_and_mismatch() {
        let mut s = AdamState::new(2);
        let mut p = vec![0.0, 0.0];
        assert!(adam_step(&mut s, &mut p, &[f64::NAN, 0.0]).is_err());
        assert!(adam_step(&mut s, &mut p, &[0.0]).is_err());
        assert_eq!(s.step_count, 0);
    }
}
