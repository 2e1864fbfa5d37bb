//! The C^∞ bump `exp(-κ / (1 - s²))` on |s| < 1 with closed-form derivatives.

use std::sync::OnceLock;

/// Highest derivative order available in closed form.
pub const MAX_ORDER: usize = 16;

/// Coefficients (ascending powers of s) of P_n in `f^(n)(s) = P_n(s) / q^{2n} · f(s)`,
/// `q = 1 - s²`, for unit κ split by powers of κ: `P_n = Σ_m κ^m · table[n][m]`.
fn table() -> &'static Vec<Vec<Vec<f64>>> {
    static TABLE: OnceLock<Vec<Vec<Vec<f64>>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        // P_{n+1} = q² P_n' + 4 n s q P_n − 2 κ s P_n
        let mut out: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0]]];
        for n in 0..MAX_ORDER {
            let prev = &out[n];
            let mut next: Vec<Vec<f64>> = vec![Vec::new(); prev.len() + 1];
            for (m, poly) in prev.iter().enumerate() {
                let deriv = poly_deriv(poly);
                let q2 = [1.0, 0.0, -2.0, 0.0, 1.0];
                add_into(&mut next[m], &poly_mul(&q2, &deriv));
                let sq = [0.0, 4.0 * n as f64, 0.0, -4.0 * n as f64];
                add_into(&mut next[m], &poly_mul(&sq, poly));
                add_into(&mut next[m + 1], &poly_mul(&[0.0, -2.0], poly));
            }
            out.push(next);
        }
        out
    })
}

fn poly_deriv(p: &[f64]) -> Vec<f64> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn add_into(acc: &mut Vec<f64>, p: &[f64]) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, b) in acc.iter_mut().zip(p) {
        *a += b;
    }
}

fn horner(p: &[f64], s: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

/// n-th derivative of `exp(-κ/(1-s²))` with respect to s.
pub fn unit_bump_deriv(kappa: f64, s: f64, n: usize) -> f64 {
    assert!(n <= MAX_ORDER, "bump derivative order {n} exceeds {MAX_ORDER}");
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - s * s;
    let expo = -kappa / q - 2.0 * n as f64 * q.ln();
    if expo < -745.0 {
        return 0.0;
    }
    let mut p = 0.0;
    let mut kp = 1.0;
    for poly in &table()[n] {
        p += kp * horner(poly, s);
        kp *= kappa;
    }
    p * expo.exp()
}

/// Bump `a·exp(-κ/(1-((x-c)/h)²))` supported on (c-h, c+h).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

pub fn default_kappa() -> f64 {
    1.0
}

impl Bump {
    pub fn new(center: f64, half_width: f64, amplitude: f64) -> Self {
        Self {
            center,
            half_width,
            amplitude,
            kappa: 1.0,
        }
    }

    /// The bump on the interval (a, b).
    pub fn on_interval(a: f64, b: f64, amplitude: f64, kappa: f64) -> Self {
        Self {
            center: 0.5 * (a + b),
            half_width: 0.5 * (b - a),
            amplitude,
            kappa,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (
            self.center - self.half_width,
            self.center + self.half_width,
        )
    }

    pub fn deriv(&self, x: f64, n: usize) -> f64 {
        let s = (x - self.center) / self.half_width;
        self.amplitude * unit_bump_deriv(self.kappa, s, n) / self.half_width.powi(n as i32)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.deriv(x, 0)
    }
}

/// Binomial coefficient as f64.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |r, i| r * (n - i) as f64 / (i + 1) as f64)
}
