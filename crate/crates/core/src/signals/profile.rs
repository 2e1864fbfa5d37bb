use super::term::{Term, Trig};
use crate::bump::Bump;
use crate::quadrature::CompositeRule;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Base profile `φ₀(y) = exp(-1/(y(1-y))) · sin(2πy)` on (0,1).
///
/// It is odd about y = 1/2, which keeps `∫φ₀''²φ₀'` and `∫φ₀'³` away from zero.
pub fn base_term(start: f64, width: f64, amplitude: f64, order: usize) -> Term {
    Term {
        envelope: Bump::on_interval(start, start + width, 1.0, 4.0),
        t_ref: start,
        order,
        amplitude,
        trig: vec![Trig {
            omega: 2.0 * PI / width,
            a: 0.0,
            b: 1.0,
        }],
    }
}

/// k-th derivative of φ₀ at y.
pub fn base_deriv(y: f64, k: usize) -> f64 {
    static T: OnceLock<Term> = OnceLock::new();
    T.get_or_init(|| base_term(0.0, 1.0, 1.0, 0)).deriv(y, k)
}

fn rule() -> &'static CompositeRule {
    static R: OnceLock<CompositeRule> = OnceLock::new();
    R.get_or_init(|| CompositeRule::uniform(0.0, 1.0, 32, 32))
}

/// `I₀ = ∫₀¹ φ₀''² φ₀'`.
pub fn base_cubic_moment() -> f64 {
    static V: OnceLock<f64> = OnceLock::new();
    *V.get_or_init(|| {
        rule().integrate(|y| {
            let d2 = base_deriv(y, 2);
            d2 * d2 * base_deriv(y, 1)
        })
    })
}

/// `∫₀¹ φ₀'³`.
pub fn base_sussmann_moment() -> f64 {
    static V: OnceLock<f64> = OnceLock::new();
    *V.get_or_init(|| rule().integrate(|y| base_deriv(y, 1).powi(3)))
}

/// `∫₀¹ φ₀²`.
pub fn base_square_moment() -> f64 {
    static V: OnceLock<f64> = OnceLock::new();
    *V.get_or_init(|| rule().integrate(|y| base_deriv(y, 0).powi(2)))
}

/// Scaled profile `φ(θ) = c·φ₀(θ/ρ)` supported on (0, ρ) with `∫φ''²φ' = target`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BumpProfile {
    pub scale: f64,
    pub support: f64,
    pub target: f64,
}

impl BumpProfile {
    pub fn new(target: f64, support: f64) -> Self {
        assert!(support > 0.0 && support <= 1.0, "profile support must lie in (0, 1]");
        // ∫ (cφ₀(θ/ρ))''² (cφ₀(θ/ρ))' dθ = c³ ρ⁻⁴ I₀
        let scale = (target * support.powi(4) / base_cubic_moment()).cbrt();
        Self {
            scale,
            support,
            target,
        }
    }

    pub fn deriv(&self, theta: f64, k: usize) -> f64 {
        self.scale * base_deriv(theta / self.support, k) / self.support.powi(k as i32)
    }

    /// `∫φ''²φ'` by quadrature.
    pub fn cubic_moment(&self) -> f64 {
        let r = CompositeRule::uniform(0.0, self.support, 32, 32);
        r.integrate(|t| {
            let d2 = self.deriv(t, 2);
            d2 * d2 * self.deriv(t, 1)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_profile_moments_are_nonzero() {
        assert!(base_cubic_moment().abs() > 1e-3, "{}", base_cubic_moment());
        assert!(base_sussmann_moment().abs() > 1e-4);
    }

    #[test]
    fn symmetric_variant_loses_the_cubic_moment() {
        // sin(3πy) makes the profile even about 1/2, and the cubic moment vanishes.
        let t = Term {
            trig: vec![Trig {
                omega: 3.0 * PI,
                a: 0.0,
                b: 1.0,
            }],
            ..base_term(0.0, 1.0, 1.0, 0)
        };
        let v = rule().integrate(|y| t.deriv(y, 2).powi(2) * t.deriv(y, 1));
        assert!(v.abs() < 1e-14, "{v}");
    }

    #[test]
    fn profile_normalisation_and_boundary_flatness() {
        for (target, rho) in [(1.0, 1.0), (-0.3, 0.4), (25.0, 0.1)] {
            let p = BumpProfile::new(target, rho);
            assert!((p.cubic_moment() - target).abs() < 1e-8 * target.abs().max(1.0));
            for k in 0..=5 {
                assert!(p.deriv(0.0, k).abs() < 1e-300);
                assert!(p.deriv(rho, k).abs() < 1e-300);
            }
        }
    }
}
