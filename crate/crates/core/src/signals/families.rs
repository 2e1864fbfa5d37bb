use super::control::{ControlSignal, Provenance};
use super::profile::{base_cubic_moment, base_sussmann_moment, base_term};
use crate::error::{Error, Result};

/// Which moment of the profile is normalised.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Normalization {
    /// `∫φ''²φ' = target`.
    Cubic(f64),
    /// `∫φ'³ = target`.
    Sussmann(f64),
}

/// `u_b(t) = sign(b)|b|^α φ^{(d)}((t - start)/|b|^β)` with φ supported on (0, ρ).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OscillatingFamily {
    pub name: &'static str,
    pub amplitude_exponent: f64,
    pub time_exponent: f64,
    pub order: usize,
    pub normalization: Normalization,
    pub support: f64,
    pub start: f64,
}

impl OscillatingFamily {
    /// Exponents 7/41 and 4/41 with `∫φ''²φ' = 1/C_K`.
    pub fn pde(c_k: f64, support: f64) -> Self {
        Self {
            name: "pde",
            amplitude_exponent: 7.0 / 41.0,
            time_exponent: 4.0 / 41.0,
            order: 3,
            normalization: Normalization::Cubic(1.0 / c_k),
            support,
            start: 0.0,
        }
    }

    /// Same exponents with `∫φ''²φ' = 1`.
    pub fn toy() -> Self {
        Self {
            name: "toy",
            ..Self::pde(1.0, 1.0)
        }
    }

    /// Exponents 1/11 and 2/11 with `∫φ'³ = 1`.
    pub fn sussmann() -> Self {
        Self {
            name: "sussmann",
            amplitude_exponent: 1.0 / 11.0,
            time_exponent: 2.0 / 11.0,
            order: 2,
            normalization: Normalization::Sussmann(1.0),
            support: 1.0,
            start: 0.0,
        }
    }

    pub fn with_start(mut self, start: f64) -> Self {
        self.start = start;
        self
    }

    pub fn with_support(mut self, support: f64) -> Self {
        self.support = support;
        self
    }

    /// c with `φ = c φ₀(·/ρ)`.
    pub fn profile_scale(&self) -> f64 {
        let rho = self.support;
        match self.normalization {
            Normalization::Cubic(t) => (t * rho.powi(4) / base_cubic_moment()).cbrt(),
            Normalization::Sussmann(t) => (t * rho * rho / base_sussmann_moment()).cbrt(),
        }
    }

    /// Width of the support of u_b.
    pub fn width(&self, b: f64) -> f64 {
        self.support * b.abs().powf(self.time_exponent)
    }

    pub fn control(&self, b: f64, horizon: f64) -> Result<ControlSignal> {
        let provenance = Provenance::BumpFamily {
            family: self.name.to_string(),
            b,
            amplitude_exponent: self.amplitude_exponent,
            time_exponent: self.time_exponent,
        };
        if b == 0.0 {
            return Ok(ControlSignal::from_segments(horizon, Vec::new(), provenance));
        }
        let width = self.width(b);
        if self.start + width > horizon {
            return Err(Error::Contract(format!(
                "support of u_b ({:.3e}) does not fit in the horizon {horizon}",
                self.start + width
            )));
        }
        let w0 = b.abs().powf(self.time_exponent);
        let amplitude = b.signum()
            * b.abs().powf(self.amplitude_exponent)
            * w0.powi(self.order as i32)
            * self.profile_scale();
        let term = base_term(self.start, width, amplitude, self.order);
        Ok(ControlSignal::from_terms(horizon, vec![term], provenance))
    }
}

/// `sign(b)|b|^{7/41} φ'''(t/|b|^{4/41})` normalised by the cubic coefficient.
pub fn oscillating_control_pde(b: f64, c_k: f64, horizon: f64, support: f64) -> Result<ControlSignal> {
    OscillatingFamily::pde(c_k, support).control(b, horizon)
}

pub fn oscillating_control_toy(b: f64, horizon: f64) -> Result<ControlSignal> {
    OscillatingFamily::toy().control(b, horizon)
}

pub fn oscillating_control_sussmann(b: f64, horizon: f64) -> Result<ControlSignal> {
    OscillatingFamily::sussmann().control(b, horizon)
}
