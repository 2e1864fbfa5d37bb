//! Dirichlet Laplacian eigenbasis on (0,1), spectral states and Sobolev-scale norms.

use crate::quadrature::CompositeRule;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

pub const DEFAULT_MODES: usize = 30;
pub const DEFAULT_QUAD_ORDER: usize = 64;
pub const DEFAULT_QUAD_PANELS: usize = 8;

/// λ_j = (jπ)².
pub fn eigenvalue(j: usize) -> f64 {
    assert!(j >= 1, "mode index starts at 1");
    let x = j as f64 * PI;
    x * x
}

/// φ_j(x) = √2 sin(jπx).
pub fn eigenfunction_value(j: usize, x: f64) -> f64 {
    SQRT_2 * (j as f64 * PI * x).sin()
}

/// n-th derivative of φ_j.
pub fn eigenfunction_deriv(j: usize, x: f64, n: usize) -> f64 {
    let k = j as f64 * PI;
    SQRT_2 * k.powi(n as i32) * (k * x + n as f64 * PI / 2.0).sin()
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub mode_count: usize,
    pub eigenvalues: Vec<f64>,
    pub quadrature: CompositeRule,
}

/// Result of an inner product with a refinement-based accuracy check.
#[derive(Debug, Clone, Copy)]
pub struct CheckedInner {
    pub value: Complex64,
    pub refinement_gap: f64,
    pub warning: bool,
}

impl Spectrum {
    pub fn new(mode_count: usize) -> Self {
        Self::with_quadrature(mode_count, DEFAULT_QUAD_ORDER, DEFAULT_QUAD_PANELS)
    }

    pub fn with_quadrature(mode_count: usize, order: usize, panels: usize) -> Self {
        assert!(mode_count >= 1);
        Self {
            mode_count,
            eigenvalues: (1..=mode_count).map(eigenvalue).collect(),
            quadrature: CompositeRule::uniform(0.0, 1.0, order, panels),
        }
    }

    /// λ_j for 1-based j.
    pub fn lambda(&self, j: usize) -> f64 {
        self.eigenvalues[j - 1]
    }

    /// ∫₀¹ f ḡ with the stored rule.
    pub fn inner_product<F, G>(&self, f: F, g: G) -> Complex64
    where
        F: Fn(f64) -> Complex64,
        G: Fn(f64) -> Complex64,
    {
        self.quadrature
            .nodes
            .iter()
            .zip(&self.quadrature.weights)
            .map(|(&x, &w)| f(x) * g(x).conj() * w)
            .sum()
    }

    pub fn inner_product_real<F, G>(&self, f: F, g: G) -> f64
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        self.quadrature.integrate(|x| f(x) * g(x))
    }

    /// Inner product compared against a rule with twice as many panels.
    pub fn inner_product_checked<F, G>(&self, f: F, g: G, tol: f64) -> CheckedInner
    where
        F: Fn(f64) -> Complex64,
        G: Fn(f64) -> Complex64,
    {
        let value = self.inner_product(&f, &g);
        let panels = self.quadrature.len() / DEFAULT_QUAD_ORDER.max(1);
        let fine = CompositeRule::uniform(0.0, 1.0, DEFAULT_QUAD_ORDER, 2 * panels.max(1));
        let refined: Complex64 = fine
            .nodes
            .iter()
            .zip(&fine.weights)
            .map(|(&x, &w)| f(x) * g(x).conj() * w)
            .sum();
        let gap = (value - refined).norm();
        CheckedInner {
            value,
            refinement_gap: gap,
            warning: gap > tol,
        }
    }

    /// Coefficients ⟨f, φ_j⟩ for j = 1..N.
    pub fn project<F: Fn(f64) -> Complex64>(&self, f: F) -> SpectralState {
        let coefficients = (1..=self.mode_count)
            .map(|j| self.inner_product(&f, |x| Complex64::new(eigenfunction_value(j, x), 0.0)))
            .collect();
        SpectralState::new(coefficients, 0.0)
    }

    /// Free evolution e^{-iΛt} applied to a state.
    pub fn free_evolve(&self, state: &SpectralState, dt: f64) -> SpectralState {
        let coefficients = state
            .coefficients
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| c * Complex64::from_polar(1.0, -l * dt))
            .collect();
        SpectralState::new(coefficients, state.time + dt)
    }

    /// ψ_j(t) = φ_j e^{-iλ_j t} as a state.
    pub fn eigenstate(&self, j: usize, t: f64) -> SpectralState {
        let mut c = vec![Complex64::new(0.0, 0.0); self.mode_count];
        c[j - 1] = Complex64::from_polar(1.0, -self.lambda(j) * t);
        SpectralState::new(c, t)
    }

    /// ⟨ψ, ψ_j(t)⟩ evaluated at the state's own time stamp.
    pub fn mode_amplitude(&self, state: &SpectralState, j: usize) -> Complex64 {
        state.coefficients[j - 1] * Complex64::from_polar(1.0, self.lambda(j) * state.time)
    }
}

/// Truncated coefficients c_j = ⟨ψ, φ_j⟩ with a time stamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralState {
    pub coefficients: Vec<Complex64>,
    pub time: f64,
}

impl SpectralState {
    pub fn new(coefficients: Vec<Complex64>, time: f64) -> Self {
        Self { coefficients, time }
    }

    pub fn zeros(n: usize, time: f64) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); n], time)
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// (Σ |j^s c_j|²)^{1/2}.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        if s == 0.0 {
            return self.l2_norm();
        }
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| ((k + 1) as f64).powf(s).powi(2) * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &SpectralState) -> SpectralState {
        let c = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a - b)
            .collect();
        SpectralState::new(c, self.time)
    }

    pub fn add(&self, other: &SpectralState) -> SpectralState {
        let c = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a + b)
            .collect();
        SpectralState::new(c, self.time)
    }

    pub fn scale(&self, s: Complex64) -> SpectralState {
        SpectralState::new(self.coefficients.iter().map(|c| c * s).collect(), self.time)
    }

    /// Hermitian product Σ a_j conj(b_j).
    pub fn dot(&self, other: &SpectralState) -> Complex64 {
        self.coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a * b.conj())
            .sum()
    }
}
