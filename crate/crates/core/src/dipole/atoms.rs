use crate::bump::{binomial, default_kappa, Bump};
use crate::quadrature::CompositeRule;
use crate::spectral::{DEFAULT_QUAD_ORDER, DEFAULT_QUAD_PANELS};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Highest derivative order of μ that callers may request.
pub const MAX_DERIVATIVE: usize = 13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Atom {
    /// `amplitude · exp(-κ/(1-s²))`, `s = (x - center)/half_width`.
    Bump {
        center: f64,
        half_width: f64,
        amplitude: f64,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    /// `amplitude · cos(mπx)`; m = 0 gives a constant.
    Cosine { m: u32, amplitude: f64 },
    /// `amplitude · (x - center)^power · exp(-κ/(1-s²))`.
    PolyBump {
        power: u32,
        center: f64,
        half_width: f64,
        amplitude: f64,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
}

impl Atom {
    pub fn bump(center: f64, half_width: f64, amplitude: f64) -> Self {
        Atom::Bump {
            center,
            half_width,
            amplitude,
            kappa: 1.0,
        }
    }

    pub fn deriv(&self, x: f64, n: usize) -> f64 {
        match *self {
            Atom::Bump {
                center,
                half_width,
                amplitude,
                kappa,
            } => Bump {
                center,
                half_width,
                amplitude,
                kappa,
            }
            .deriv(x, n),
            Atom::Cosine { m, amplitude } => {
                if m == 0 {
                    return if n == 0 { amplitude } else { 0.0 };
                }
                let k = m as f64 * PI;
                amplitude * k.powi(n as i32) * (k * x + n as f64 * PI / 2.0).cos()
            }
            Atom::PolyBump {
                power,
                center,
                half_width,
                amplitude,
                kappa,
            } => {
                let b = Bump {
                    center,
                    half_width,
                    amplitude,
                    kappa,
                };
                let y = x - center;
                let p = power as usize;
                let mut acc = 0.0;
                for k in 0..=n.min(p) {
                    // k-th derivative of y^p
                    let falling: f64 = (0..k).map(|i| (p - i) as f64).product();
                    let mono = falling * y.powi((p - k) as i32);
                    acc += binomial(n, k) * mono * b.deriv(x, n - k);
                }
                acc
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut a = self.clone();
        match &mut a {
            Atom::Bump { amplitude, .. }
            | Atom::Cosine { amplitude, .. }
            | Atom::PolyBump { amplitude, .. } => *amplitude *= s,
        }
        a
    }

    /// Support endpoints, if compact.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Atom::Bump {
                center, half_width, ..
            }
            | Atom::PolyBump {
                center, half_width, ..
            } => Some((center - half_width, center + half_width)),
            Atom::Cosine { .. } => None,
        }
    }
}

/// μ as a finite sum of atoms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DipoleMoment {
    pub atoms: Vec<Atom>,
}

impl DipoleMoment {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn cosine(m: u32, amplitude: f64) -> Self {
        Self::new(vec![Atom::Cosine { m, amplitude }])
    }

    pub fn deriv(&self, x: f64, n: usize) -> f64 {
        assert!(n <= MAX_DERIVATIVE);
        self.atoms.iter().map(|a| a.deriv(x, n)).sum()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.deriv(x, 0)
    }

    /// μ^(n)(0), μ^(n)(1) for n = 0..=5.
    pub fn boundary_traces(&self) -> [(f64, f64); 6] {
        let mut out = [(0.0, 0.0); 6];
        for (n, o) in out.iter_mut().enumerate() {
            *o = (self.deriv(0.0, n), self.deriv(1.0, n));
        }
        out
    }

    /// max(|μ'(0)|, |μ'(1)|, |μ'''(0)|, |μ'''(1)|).
    pub fn regularity_defect(&self) -> f64 {
        let t = self.boundary_traces();
        [t[1].0, t[1].1, t[3].0, t[3].1]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn plus(&self, other: &DipoleMoment) -> DipoleMoment {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        DipoleMoment::new(atoms)
    }

    pub fn scaled(&self, s: f64) -> DipoleMoment {
        DipoleMoment::new(self.atoms.iter().map(|a| a.scaled(s)).collect())
    }

    /// Support edges inside (0,1), used as quadrature breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        for a in &self.atoms {
            if let Some((l, r)) = a.support() {
                pts.push(l);
                pts.push(r);
                // narrow atoms get an interior cut as well
                pts.push(0.5 * (l + r));
            }
        }
        pts.retain(|&x| x > 0.0 && x < 1.0);
        pts
    }

    /// Composite Gauss–Legendre rule on [0,1] aligned with the atom supports.
    pub fn quadrature(&self) -> CompositeRule {
        CompositeRule::with_breakpoints(
            0.0,
            1.0,
            DEFAULT_QUAD_ORDER,
            DEFAULT_QUAD_PANELS,
            &self.breakpoints(),
            4,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dipole serializes")
    }

    pub fn from_json(s: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_derivatives() {
        let mu = DipoleMoment::cosine(2, 1.0);
        let x = 0.3;
        let k = 2.0 * PI;
        assert!((mu.deriv(x, 0) - (k * x).cos()).abs() < 1e-15);
        assert!((mu.deriv(x, 1) + k * (k * x).sin()).abs() < 1e-12);
        assert!((mu.deriv(x, 2) + k * k * (k * x).cos()).abs() < 1e-10);
    }

    #[test]
    fn poly_bump_fifth_derivative_at_origin() {
        let atom = Atom::PolyBump {
            power: 5,
            center: 0.0,
            half_width: 0.3,
            amplitude: 2.0,
            kappa: 1.0,
        };
        let mu = DipoleMoment::new(vec![atom]);
        let e = (-1.0f64).exp();
        assert!((mu.deriv(0.0, 5) - 2.0 * 120.0 * e).abs() < 1e-10);
        for n in [1, 2, 3, 4] {
            assert!(mu.deriv(0.0, n).abs() < 1e-14);
        }
    }

    #[test]
    fn poly_bump_derivative_matches_finite_difference() {
        let atom = Atom::PolyBump {
            power: 3,
            center: 0.1,
            half_width: 0.4,
            amplitude: 1.5,
            kappa: 2.0,
        };
        let h = 1e-5;
        for n in 0..6 {
            for &x in &[0.05, 0.2, 0.33] {
                let fd = (atom.deriv(x + h, n) - atom.deriv(x - h, n)) / (2.0 * h);
                let ex = atom.deriv(x, n + 1);
                assert!((fd - ex).abs() < 1e-5 * (1.0 + ex.abs()), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mu = DipoleMoment::new(vec![
            Atom::bump(0.123456789012345, 0.0317, -1.0 / 3.0),
            Atom::Cosine {
                m: 4,
                amplitude: 0.1 + 0.2,
            },
            Atom::PolyBump {
                power: 5,
                center: 0.0,
                half_width: 0.2,
                amplitude: std::f64::consts::E,
                kappa: 1.0,
            },
        ]);
        let back = DipoleMoment::from_json(&mu.to_json()).unwrap();
        assert_eq!(mu, back);
    }

    #[test]
    fn regularity_of_cosines() {
        assert!(DipoleMoment::cosine(2, 1.0).regularity_defect() < 1e-10);
        let bad = DipoleMoment::new(vec![Atom::PolyBump {
            power: 1,
            center: 0.0,
            half_width: 0.5,
            amplitude: 1.0,
            kappa: 1.0,
        }]);
        assert!(bad.regularity_defect() > 0.1);
    }
}
