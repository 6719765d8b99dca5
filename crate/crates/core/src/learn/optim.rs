//! Adam ascent and the parameter projection applied after every step.

use crate::builder::MIN_STD;
use crate::circuit::ParamKind;

pub const LOGIT_CLAMP: f64 = 30.0;
pub const LOG_RATE_RANGE: (f64, f64) = (-10.0, 10.0);

#[derive(Debug, Clone)]
pub struct Adam {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(n: usize, step_size: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            step_size,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One ascent step along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, (p, &g)) in params.iter_mut().zip(grad).enumerate() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            *p += self.step_size * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Clamps parameters into the region where every density stays proper and
/// gradients stay finite.
pub fn project(params: &mut [f64], kinds: &[ParamKind]) {
    let min_log_std = MIN_STD.ln();
    for (p, k) in params.iter_mut().zip(kinds) {
        *p = match k {
            ParamKind::GaussLogStd => p.max(min_log_std),
            ParamKind::LogRate => p.clamp(LOG_RATE_RANGE.0, LOG_RATE_RANGE.1),
            ParamKind::GaussMean => *p,
            ParamKind::PriorLogit | ParamKind::SumLogit | ParamKind::CatLogit => {
                p.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
            }
        };
    }
}
