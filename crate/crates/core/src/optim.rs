// SPDX-License-Identifier: Apache-2.0

//! ADAM and the learning-rate schedules used for training.

use crate::error::{PinnError, Result};

/// First/second moment estimates for ADAM, with TensorFlow's defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

/// One bias-corrected ADAM update applied in place.
///
/// A non-finite gradient rejects the whole step and leaves both `params`
/// and `state` untouched.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(PinnError::Usage(format!(
            "length mismatch: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(PinnError::Usage(format!("learning rate must be positive, got {lr}")));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(PinnError::NonFinite(format!("gradient component {i} is {}", grads[i])));
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CycleShape {
    /// Linear up from base to max over one half-period, then back down.
    #[default]
    Triangular,
    /// Linear ramp from base to max over the full period, then reset.
    Sawtooth,
}

/// Learning rate as a function of the epoch.
#[derive(Clone, Debug, PartialEq)]
pub enum LrSchedule {
    /// `(first epoch, rate)` segments; the first segment starts at 0.
    Piecewise(Vec<(u64, f64)>),
    Cyclical {
        base: f64,
        max: f64,
        half_period: u64,
        shape: CycleShape,
    },
}

impl LrSchedule {
    pub fn constant(rate: f64) -> Result<Self> {
        Self::piecewise(vec![(0, rate)])
    }

    pub fn piecewise(segments: Vec<(u64, f64)>) -> Result<Self> {
        let s = LrSchedule::Piecewise(segments);
        s.validate()?;
        Ok(s)
    }

    pub fn cyclical(base: f64, max: f64, half_period: u64) -> Result<Self> {
        let s = LrSchedule::Cyclical {
            base,
            max,
            half_period,
            shape: CycleShape::Triangular,
        };
        s.validate()?;
        Ok(s)
    }

    /// 1e-2, dropping to 2e-3 at epoch 2000 and 5e-4 at epoch 8000.
    pub fn standard_piecewise() -> Self {
        LrSchedule::Piecewise(vec![(0, 1e-2), (2000, 2e-3), (8000, 5e-4)])
    }

    /// Triangular cycle between 5e-4 and 1e-2 with a 250-step half-period.
    pub fn standard_cyclical() -> Self {
        LrSchedule::Cyclical {
            base: 5e-4,
            max: 1e-2,
            half_period: 250,
            shape: CycleShape::Triangular,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LrSchedule::Piecewise(segs) => {
                if segs.first().map(|s| s.0) != Some(0) {
                    return Err(PinnError::Config("piecewise schedule must start at epoch 0".into()));
                }
                if segs.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(PinnError::Config("piecewise thresholds must strictly increase".into()));
                }
                if segs.iter().any(|s| !(s.1 > 0.0 && s.1.is_finite())) {
                    return Err(PinnError::Config("learning rates must be positive".into()));
                }
            }
            LrSchedule::Cyclical {
                base,
                max,
                half_period,
                ..
            } => {
                if !(*base > 0.0 && *max > 0.0 && base.is_finite() && max.is_finite()) {
                    return Err(PinnError::Config("learning rates must be positive".into()));
                }
                if *half_period == 0 {
                    return Err(PinnError::Config("cyclical half-period must be ≥ 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        match self {
            LrSchedule::Piecewise(segs) => segs
                .iter()
                .take_while(|(start, _)| *start <= step)
                .last()
                .map_or(segs[0].1, |s| s.1),
            LrSchedule::Cyclical {
                base,
                max,
                half_period,
                shape,
            } => {
                let period = 2 * half_period;
                let pos = step % period;
                let frac = match shape {
                    CycleShape::Triangular => {
                        if pos <= *half_period {
                            pos as f64 / *half_period as f64
                        } else {
                            (period - pos) as f64 / *half_period as f64
                        }
                    }
                    CycleShape::Sawtooth => pos as f64 / period as f64,
                };
                base + (max - base) * frac
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = 1, v̂ = 1 after bias correction, so Δ = -lr / (1 + ε).
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, 0.1).unwrap();
        assert!((p[0] + 0.1 / (1.0 + 1e-7)).abs() < 1e-15);
        // Constant gradient keeps m̂ = v̂ = 1 on later steps too.
        adam_step(&mut p, &[1.0], &mut s, 0.1).unwrap();
        assert!((p[0] + 0.2 / (1.0 + 1e-7)).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_rejected_without_side_effects() {
        let mut p = vec![1.0, 2.0];
        let mut s = AdamState::new(2);
        let before = s.clone();
        assert!(matches!(
            adam_step(&mut p, &[1.0, f64::NAN], &mut s, 0.1),
            Err(PinnError::NonFinite(_))
        ));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(s, before);
        assert!(adam_step(&mut p, &[1.0, 1.0], &mut s, 0.0).is_err());
    }

    #[test]
    fn converges_on_convex_quadratic() {
        // f = (x-1)² + 10 (y+2)²
        let mut p = vec![0.0, 0.0];
        let mut s = AdamState::new(2);
        let mut steps = 0;
        while steps < 5000 {
            let g = [2.0 * (p[0] - 1.0), 20.0 * (p[1] + 2.0)];
            adam_step(&mut p, &g, &mut s, 1e-2).unwrap();
            steps += 1;
            if (p[0] - 1.0).abs() < 1e-6 && (p[1] + 2.0).abs() < 1e-6 {
                break;
            }
        }
        assert!((p[0] - 1.0).abs() < 1e-6 && (p[1] + 2.0).abs() < 1e-6, "{p:?} after {steps}");
    }

    #[test]
    fn piecewise_schedule_values() {
        let s = LrSchedule::standard_piecewise();
        assert_eq!(s.lr_at(0), 1e-2);
        assert_eq!(s.lr_at(1999), 1e-2);
        assert_eq!(s.lr_at(2000), 2e-3);
        assert_eq!(s.lr_at(2500), 2e-3);
        assert_eq!(s.lr_at(9000), 5e-4);
        let c = LrSchedule::constant(3e-3).unwrap();
        assert!((0..20_000).step_by(997).all(|t| c.lr_at(t) == 3e-3));
    }

    #[test]
    fn cyclical_schedule_values() {
        let s = LrSchedule::standard_cyclical();
        assert_eq!(s.lr_at(0), 5e-4);
        assert_eq!(s.lr_at(250), 1e-2);
        assert_eq!(s.lr_at(500), 5e-4);
        assert!((s.lr_at(125) - (5e-4 + 1e-2) / 2.0).abs() < 1e-15);
        for t in 0..2000 {
            assert_eq!(s.lr_at(t), s.lr_at(t + 500));
            let lr = s.lr_at(t);
            assert!((5e-4..=1e-2).contains(&lr));
        }
        let saw = LrSchedule::Cyclical {
            base: 1.0,
            max: 2.0,
            half_period: 5,
            shape: CycleShape::Sawtooth,
        };
        assert_eq!(saw.lr_at(0), 1.0);
        assert_eq!(saw.lr_at(5), 1.5);
        assert_eq!(saw.lr_at(10), 1.0);
    }

    #[test]
    fn invalid_schedules_rejected() {
        assert!(LrSchedule::piecewise(vec![(0, 1.0), (10, 0.5), (10, 0.1)]).is_err());
        assert!(LrSchedule::piecewise(vec![(5, 1.0)]).is_err());
        assert!(LrSchedule::constant(-1.0).is_err());
        assert!(LrSchedule::cyclical(1e-3, 1e-2, 0).is_err());
    }
}
