use serde::{Deserialize, Serialize};

use super::{flatten, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators, laid out like the flattened
/// parameters they update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(params: &P, config: AdamConfig) -> Self {
        let n = params.num_params();
        Self {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One Adam update with decoupled weight decay:
/// `theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)`.
pub fn adam_step<P, G>(params: &mut P, grads: &G, state: &mut AdamState, lr: f64, weight_decay: f64) -> Result<()>
where
    P: Parameters + ?Sized,
    G: Parameters + ?Sized,
{
    let g = flatten(grads);
    if g.len() != state.m.len() || params.num_params() != state.m.len() {
        return Err(Error::DimensionMismatch {
            context: "adam state",
            expected: state.m.len(),
            actual: g.len(),
        });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradients"));
    }
    state.step += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let (m, v) = (&mut state.m, &mut state.v);
    let mut i = 0;
    params.visit_mut(&mut |slice| {
        for theta in slice.iter_mut() {
            let gi = g[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            *theta -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * *theta);
            i += 1;
        }
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &vec![0.0; 3], &mut st, 0.1, 0.0).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step(), 1);
    }

    #[test]
    fn single_step_descends_on_square() {
        let mut p = vec![1.0];
        let mut st = AdamState::new(&p, AdamConfig::default());
        let grad = vec![2.0 * p[0]];
        adam_step(&mut p, &grad, &mut st, 0.1, 0.0).unwrap();
        assert!(p[0] < 1.0);
    }

    #[test]
    fn converges_on_convex_quadratic() {
        // f(x) = sum_i c_i (x_i - t_i)^2, optimum value 0 at x = t.
        let c = [1.0, 3.0, 0.5];
        let t = [0.7, -1.2, 2.0];
        let f = |x: &[f64]| -> f64 { x.iter().zip(&c).zip(&t).map(|((x, c), t)| c * (x - t).powi(2)).sum() };
        let mut x = vec![0.0; 3];
        let mut st = AdamState::new(&x, AdamConfig::default());
        for k in 0..200 {
            let g: Vec<f64> = x.iter().zip(&c).zip(&t).map(|((x, c), t)| 2.0 * c * (x - t)).collect();
            let lr = if k < 150 { 0.05 } else { 0.005 };
            adam_step(&mut x, &g, &mut st, lr, 0.0).unwrap();
        }
        assert!(f(&x) < 1e-4, "f = {}", f(&x));
        assert_eq!(st.step(), 200);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = vec![1.0];
        let mut st = AdamState::new(&p, AdamConfig::default());
        assert!(matches!(
            adam_step(&mut p, &vec![f64::NAN], &mut st, 0.1, 0.0),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(st.step(), 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![1.0, 2.0];
        let mut st = AdamState::new(&p, AdamConfig::default());
        assert!(adam_step(&mut p, &vec![0.0], &mut st, 0.1, 0.0).is_err());
    }

    #[test]
    fn weight_decay_shrinks_toward_zero() {
        let mut p = vec![2.0];
        let mut st = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &vec![0.0], &mut st, 0.1, 0.5).unwrap();
        assert!((p[0] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-15);
    }
}
