use crate::bump::{binomial, Bump};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// One trigonometric component `a cos(ω(t - t_ref)) + b sin(ω(t - t_ref))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trig {
    pub omega: f64,
    pub a: f64,
    pub b: f64,
}

/// `amplitude · d^order/dt^order [ envelope(t) · Σ trig_i(t) ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub envelope: Bump,
    pub t_ref: f64,
    pub order: usize,
    pub amplitude: f64,
    pub trig: Vec<Trig>,
}

impl Term {
    pub fn support(&self) -> (f64, f64) {
        self.envelope.support()
    }

    /// k-th time derivative.
    pub fn deriv(&self, t: f64, k: usize) -> f64 {
        let (l, r) = self.support();
        if t <= l || t >= r {
            return 0.0;
        }
        let n = self.order + k;
        let tau = t - self.t_ref;
        let mut env = [0.0; crate::bump::MAX_ORDER + 1];
        for (i, e) in env.iter_mut().enumerate().take(n + 1) {
            *e = self.envelope.deriv(t, i);
        }
        let mut total = 0.0;
        for tr in &self.trig {
            let (s, c) = (tr.omega * tau).sin_cos();
            let mut acc = 0.0;
            let mut wpow = 1.0;
            // m-th derivative of the trig factor uses a quarter-turn phase shift per order
            for m in 0..=n {
                let shift = m as f64 * FRAC_PI_2;
                let (ss, cs) = shift.sin_cos();
                let cos_m = c * cs - s * ss;
                let sin_m = s * cs + c * ss;
                let trig_m = wpow * (tr.a * cos_m + tr.b * sin_m);
                acc += binomial(n, m) * env[n - m] * trig_m;
                wpow *= tr.omega;
            }
            total += acc;
        }
        self.amplitude * total
    }

    pub fn shifted(&self, dt: f64) -> Self {
        let mut t = self.clone();
        t.envelope.center += dt;
        t.t_ref += dt;
        t
    }
}
