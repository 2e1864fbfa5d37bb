use super::coefficients::{cubic_coefficient, drift_series, ModeColumns};
use super::DipoleMoment;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_zero: f64,
    pub tol_nonzero: f64,
    /// Bound on |μ'|, |μ'''| at the boundary for the regularity verdict.
    pub tol_boundary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_zero: 1e-9,
            tol_nonzero: 1e-6,
            tol_boundary: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub regularity: bool,
    /// ⟨μφ_1, φ_K⟩ vanishes.
    pub lost_direction: bool,
    /// j^7 |⟨μφ_1, φ_j⟩| stays above the floor for j ≠ K.
    pub linear_floor: bool,
    pub linear: bool,
    pub quadratic: bool,
    pub cubic: bool,
}

impl Verdicts {
    pub fn all(&self) -> bool {
        self.regularity && self.linear && self.quadratic && self.cubic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub k: usize,
    pub modes: usize,
    /// ⟨μφ_1, φ_j⟩ for j = 1..N.
    pub linear_coeffs: Vec<f64>,
    /// A^1_K, A^2_K, A^3_K.
    pub a_coeffs: [f64; 3],
    pub c_k: f64,
    pub c_k_bracket: f64,
    /// min over j ≠ K of j^7 |⟨μφ_1, φ_j⟩|.
    pub decay_constant: f64,
    pub boundary_traces: Vec<(f64, f64)>,
    /// Ratio of ⟨μφ_1, φ_N⟩ to its large-j asymptotic prediction (NaN when the prediction is 0).
    pub asymptotic_ratio: f64,
    pub tolerances: Tolerances,
    pub verdicts: Verdicts,
}

/// Predicted large-j behaviour `12q/(π⁶ j⁷)((-1)^{j+q} μ⁽⁵⁾(1) - μ⁽⁵⁾(0))`.
pub fn asymptotic_coefficient(mu: &DipoleMoment, q: usize, j: usize) -> f64 {
    let sign = if (j + q) % 2 == 0 { 1.0 } else { -1.0 };
    12.0 * q as f64 / (PI.powi(6) * (j as f64).powi(7))
        * (sign * mu.deriv(1.0, 5) - mu.deriv(0.0, 5))
}

pub fn check_hypotheses(
    mu: &DipoleMoment,
    k: usize,
    n: usize,
    tol: Tolerances,
) -> HypothesisReport {
    let cols = ModeColumns::new(mu, k, n);
    let a = [1, 2, 3].map(|p| drift_series(&cols.m1, &cols.mk, k, p));
    let c_k = cols.cubic();
    let c_k_bracket = cubic_coefficient(mu, k, n).bracket;
    let decay_constant = (1..=n)
        .filter(|&j| j != k)
        .map(|j| (j as f64).powi(7) * cols.m1[j - 1].abs())
        .fold(f64::INFINITY, f64::min);
    let predicted = asymptotic_coefficient(mu, 1, n);
    let asymptotic_ratio = if predicted == 0.0 {
        f64::NAN
    } else {
        cols.m1[n - 1] / predicted
    };
    let regularity = mu.regularity_defect() < tol.tol_boundary;
    let lost_direction = cols.m1[k - 1].abs() < tol.tol_zero;
    let linear_floor = decay_constant > tol.tol_nonzero;
    let quadratic =
        a[0].abs() < tol.tol_zero && a[1].abs() < tol.tol_zero && a[2].abs() > tol.tol_nonzero;
    let cubic = c_k.abs() > tol.tol_nonzero;
    HypothesisReport {
        k,
        modes: n,
        linear_coeffs: cols.m1.clone(),
        a_coeffs: a,
        c_k,
        c_k_bracket,
        decay_constant,
        boundary_traces: mu.boundary_traces().to_vec(),
        asymptotic_ratio,
        tolerances: tol,
        verdicts: Verdicts {
            regularity,
            lost_direction,
            linear_floor,
            linear: lost_direction && linear_floor,
            quadratic,
            cubic,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dipole::Atom;

    #[test]
    fn zero_dipole_fails_quadratic_and_cubic() {
        let r = check_hypotheses(&DipoleMoment::zero(), 2, 30, Tolerances::default());
        assert!(r.linear_coeffs.iter().all(|&c| c == 0.0));
        assert_eq!(r.a_coeffs, [0.0; 3]);
        assert!(!r.verdicts.quadratic);
        assert!(!r.verdicts.cubic);
    }

    #[test]
    fn cosine_has_lost_direction_but_no_floor() {
        let r = check_hypotheses(&DipoleMoment::cosine(2, 1.0), 2, 30, Tolerances::default());
        assert!(r.verdicts.lost_direction);
        assert!(!r.verdicts.linear_floor);
        assert!(!r.verdicts.linear);
    }

    #[test]
    fn quadratic_verdict_matches_definition() {
        let mu = DipoleMoment::new(vec![
            Atom::Cosine { m: 2, amplitude: 0.4 },
            Atom::bump(0.3, 0.15, 0.8),
        ]);
        let r = check_hypotheses(&mu, 2, 30, Tolerances::default());
        let t = r.tolerances;
        let expect = r.a_coeffs[0].abs() < t.tol_zero
            && r.a_coeffs[1].abs() < t.tol_zero
            && r.a_coeffs[2].abs() > t.tol_nonzero;
        assert_eq!(r.verdicts.quadratic, expect);
    }

    #[test]
    fn fifth_derivative_drives_the_tail() {
        // x⁵(1-x)⁵ written as Σ_k C(5,k)(-1)^k x^{5+k}; κ = 0 makes the envelope 1.
        let atoms = (0..=5)
            .map(|k| Atom::PolyBump {
                power: 5 + k,
                center: 0.0,
                half_width: 10.0,
                amplitude: crate::bump::binomial(5, k as usize) * if k % 2 == 0 { 1.0 } else { -1.0 },
                kappa: 0.0,
            })
            .collect();
        let mu = DipoleMoment::new(atoms);
        assert!(mu.regularity_defect() < 1e-12);
        assert!((mu.deriv(0.0, 5) - 120.0).abs() < 1e-9);
        assert!((mu.deriv(1.0, 5) + 120.0).abs() < 1e-9);
        let cols = ModeColumns::new(&mu, 2, 121);
        for j in [81usize, 101, 121] {
            let ratio = cols.m1[j - 1] / asymptotic_coefficient(&mu, 1, j);
            assert!((ratio - 1.0).abs() < 0.01, "j={j} ratio={ratio}");
        }
    }
}
