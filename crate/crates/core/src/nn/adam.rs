use serde::{Deserialize, Serialize};

use super::params::Parameter;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.0005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Bias-corrected Adam update on raw buffers. `step` is the new step count
/// (1 on the first update).
pub fn adam_update(value: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], step: u64, cfg: &AdamConfig) {
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for k in 0..value.len() {
        let gk = grad[k];
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
        let m_hat = m[k] / bc1;
        let v_hat = v[k] / bc2;
        value[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Applies one Adam step to `param` using its accumulated gradient, then
/// clears the gradient.
pub fn adam_step(param: &mut Parameter, cfg: &AdamConfig) -> Result<()> {
    if let Some(k) = param.grad.data().iter().position(|g| g.is_nan()) {
        return Err(Error::Numeric(format!(
            "NaN gradient in parameter {} at entry {}",
            param.name, k
        )));
    }
    param.step_count += 1;
    let Parameter {
        value,
        grad,
        adam_m,
        adam_v,
        step_count,
        ..
    } = param;
    adam_update(
        value.data_mut(),
        grad.data(),
        adam_m.data_mut(),
        adam_v.data_mut(),
        *step_count,
        cfg,
    );
    param.zero_grad();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    fn scalar(v: f64) -> Parameter {
        Parameter::new("p", Tensor::vector(vec![v]))
    }

    #[test]
    fn zero_grad_leaves_value() {
        let mut p = scalar(0.7);
        adam_step(&mut p, &AdamConfig::default()).unwrap();
        assert_eq!(p.value.data()[0], 0.7);
        assert_eq!(p.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::default();
        let mut p = scalar(0.0);
        p.grad.data_mut()[0] = 1.0;
        adam_step(&mut p, &cfg).unwrap();
        // m_hat = 1, v_hat = 1  =>  delta = -lr / (1 + eps)
        let expected = -cfg.learning_rate / (1.0 + cfg.epsilon);
        assert!((p.value.data()[0] - expected).abs() < 1e-15);
        assert_eq!(p.grad.data()[0], 0.0);
    }

    #[test]
    fn repeated_steps_move_against_gradient() {
        let cfg = AdamConfig::default();
        let mut p = scalar(1.0);
        let mut prev = 1.0;
        for _ in 0..2 {
            p.grad.data_mut()[0] = -2.0;
            adam_step(&mut p, &cfg).unwrap();
            assert!(p.value.data()[0] > prev);
            prev = p.value.data()[0];
        }
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut p = Parameter::new("tagger.head.pos.w", Tensor::vector(vec![0.0, 0.0]));
        p.grad.data_mut()[1] = f64::NAN;
        let err = adam_step(&mut p, &AdamConfig::default()).unwrap_err();
        assert!(err.to_string().contains("tagger.head.pos.w"));
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig::default().validate().is_ok());
        let bad = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AdamConfig {
            learning_rate: 0.0,
            ..AdamConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
