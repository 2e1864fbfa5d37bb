//! Constructive search for a dipole with a lost direction, vanishing first and second drifts,
//! a non-vanishing third drift and a non-vanishing cubic coefficient, at finite truncation.
//!
//! Every functional that has to vanish is the truncated series on the first N modes, which is
//! what the Galerkin dynamics sees.

use crate::bump::Bump;
use crate::dipole::{
    check_hypotheses, drift_weight, Atom, DipoleMoment, HypothesisReport, ModeColumns, Tolerances,
};
use crate::error::{Error, Result};
use crate::quadrature::CompositeRule;
use crate::spectral::eigenfunction_value;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Size of μ⁽⁵⁾(0) from the boundary atom; it sets the j⁻⁷ tail of ⟨μφ_1, φ_j⟩.
const BOUNDARY_FIFTH_DERIVATIVE: f64 = 0.05;

/// κ of the oscillating-bump profile `exp(−1/(y(1−y)))` written on (−1, 1).
const PROFILE_KAPPA: f64 = 4.0;

fn phi_product(k: usize, x: f64) -> f64 {
    eigenfunction_value(1, x) * eigenfunction_value(k, x)
}

/// Index 0 holds the interval where `φ_1 φ_K > 0`, index 1 the one where it is negative.
pub type SignedPair = [(f64, f64); 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisGeometry {
    pub k: usize,
    pub x_bar: f64,
    pub delta: f64,
    pub eta: f64,
    /// Sign of `φ_1 φ_K` just right of `x_bar`.
    pub orientation: f64,
    /// First-drift lever intervals.
    pub j: SignedPair,
    /// Second-drift lever intervals.
    pub j_hat: SignedPair,
    /// First-drift compensator intervals.
    pub i: SignedPair,
    /// Third-drift intervals.
    pub j_tilde: SignedPair,
}

impl SynthesisGeometry {
    /// Last interior zero of `φ_K`, half-width `0.6/K` and a reference region `[0, η)` left
    /// of it.
    pub fn new(k: usize) -> Result<Self> {
        Self::with_delta(k, 0.6 / k as f64)
    }

    pub fn with_delta(k: usize, delta: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Geometry(format!("mode K = {k} has no interior zero")));
        }
        let kf = k as f64;
        let x_bar = (kf - 1.0) / kf;
        if !(delta > 0.0 && delta <= 1.0 / kf) {
            return Err(Error::Geometry(format!("half-width {delta} outside (0, 1/K]")));
        }
        let eta = (1.0 / kf).min(x_bar - delta);
        if eta <= 0.0 {
            return Err(Error::Geometry(format!("no room left of x̄ − δ = {}", x_bar - delta)));
        }
        let orientation = phi_product(k, x_bar + 0.5 * delta).signum();
        // four slots per side; the lever for the first drift sits farthest from x̄
        let slot = |side: f64, m: usize| -> (f64, f64) {
            let w = delta / 4.0;
            let (near, far) = (m as f64 * w, (m + 1) as f64 * w);
            let (a, b) = if side > 0.0 {
                (x_bar + near, x_bar + far)
            } else {
                (x_bar - far, x_bar - near)
            };
            let pad = 0.02 * w;
            (a + pad, b - pad)
        };
        // side whose product is positive
        let pos = orientation;
        let pair = |m: usize| -> SignedPair { [slot(pos, m), slot(-pos, m)] };
        let g = Self {
            k,
            x_bar,
            delta,
            eta,
            orientation,
            j: pair(3),
            j_hat: pair(2),
            i: pair(1),
            j_tilde: pair(0),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let mut v = vec![(0.0, self.eta)];
        for p in [self.j, self.j_hat, self.i, self.j_tilde] {
            v.extend(p);
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let z = eigenfunction_value(self.k, self.x_bar).abs();
        if z > 1e-12 {
            return Err(Error::Geometry(format!("φ_K(x̄) = {z:e}")));
        }
        let iv = self.intervals();
        for (a, &(l, r)) in iv.iter().enumerate() {
            if !(l < r) || l < 0.0 || r > 1.0 {
                return Err(Error::Geometry(format!("bad interval ({l}, {r})")));
            }
            for &(l2, r2) in &iv[a + 1..] {
                if l < r2 && l2 < r {
                    return Err(Error::Geometry(format!("intervals ({l}, {r}) and ({l2}, {r2}) overlap")));
                }
            }
        }
        let sample = |(l, r): (f64, f64), sign: f64| -> Result<()> {
            for s in 1..50 {
                let x = l + (r - l) * s as f64 / 50.0;
                if phi_product(self.k, x) * sign <= 0.0 {
                    return Err(Error::Geometry(format!("sign of φ₁φ_K wrong at x = {x}")));
                }
            }
            Ok(())
        };
        for p in [self.j, self.j_hat, self.i, self.j_tilde] {
            sample(p[0], 1.0)?;
            sample(p[1], -1.0)?;
        }
        // reference region: one sign throughout
        let s0 = phi_product(self.k, 0.5 * self.eta).signum();
        sample((0.0, self.eta), s0)?;
        Ok(())
    }

    fn slot_for(&self, pair: &SignedPair, sign: f64) -> (f64, f64) {
        if sign > 0.0 {
            pair[0]
        } else {
            pair[1]
        }
    }
}

fn profile_norms() -> &'static (f64, f64) {
    static NORMS: OnceLock<(f64, f64)> = OnceLock::new();
    NORMS.get_or_init(|| {
        let g = Bump::on_interval(0.0, 1.0, 1.0, PROFILE_KAPPA);
        let rule = CompositeRule::uniform(0.0, 1.0, 20, 64);
        let d1 = rule.integrate(|y| g.deriv(y, 1).powi(2));
        let d3 = rule.integrate(|y| g.deriv(y, 3).powi(2));
        (d1, d3)
    })
}

/// `√(ε|λ|/|φ_1φ_K(x)|)·g((x − x(λ))/ε)` with `∫g'² = 1` (order 1), or the `ε^{5/2}` variant
/// with `∫g'''² = 1` (order 2), placed in the lever interval matching the sign of λ.
pub fn build_oscillating_bump(geom: &SynthesisGeometry, epsilon: f64, lambda: f64, order: u32) -> Result<DipoleMoment> {
    Ok(DipoleMoment::new(vec![oscillating_atom(geom, epsilon, lambda, order)?]))
}

fn oscillating_atom(geom: &SynthesisGeometry, epsilon: f64, lambda: f64, order: u32) -> Result<Atom> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("λ = {lambda} must be finite and non-zero")));
    }
    let pair = match order {
        1 => &geom.j,
        2 => &geom.j_hat,
        _ => return Err(Error::InvalidArgument(format!("bump order {order} not in {{1, 2}}"))),
    };
    let (l, r) = geom.slot_for(pair, lambda.signum());
    if !(epsilon > 0.0 && epsilon <= r - l) {
        return Err(Error::Geometry(format!(
            "width {epsilon} does not fit in ({l}, {r})"
        )));
    }
    let x = 0.5 * (l + r) - 0.5 * epsilon;
    let w = phi_product(geom.k, x).abs();
    let (n1, n3) = *profile_norms();
    let amplitude = match order {
        1 => (epsilon * lambda.abs() / w).sqrt() / n1.sqrt(),
        _ => epsilon.powf(2.5) * (lambda.abs() / w).sqrt() / n3.sqrt(),
    };
    Ok(Atom::Bump {
        center: x + 0.5 * epsilon,
        half_width: 0.5 * epsilon,
        amplitude,
        kappa: PROFILE_KAPPA,
    })
}

/// Root of `q` on a bracket by bisection, polished by secant steps.
pub fn solve_lambda<F: Fn(f64) -> f64>(q: F, bracket: (f64, f64)) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = bracket;
    let (mut qlo, mut qhi) = (q(lo), q(hi));
    if !(qlo * qhi < 0.0) {
        return Err(Error::Bracket {
            lo,
            hi,
            q_lo: qlo,
            q_hi: qhi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let qm = q(mid);
        if qm == 0.0 {
            return Ok((mid, 0.0));
        }
        if qm * qlo < 0.0 {
            hi = mid;
            qhi = qm;
        } else {
            lo = mid;
            qlo = qm;
        }
        if (hi - lo).abs() <= 1e-6 * lo.abs().max(hi.abs()) {
            break;
        }
    }
    // secant from the bracket ends, kept inside the bracket
    let (mut a, mut fa, mut b, mut fb) = (lo, qlo, hi, qhi);
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..60 {
        if best.1.abs() < 1e-14 || fb == fa {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        let c = c.clamp(lo.min(hi), lo.max(hi));
        let fc = q(c);
        if fc.abs() < best.1.abs() {
            best = (c, fc);
        }
        a = b;
        fa = fb;
        b = c;
        fb = fc;
    }
    Ok(best)
}

/// The bracket `(−a/2, −3a/2)` first, then a geometric scan in both signs.
fn find_bracket<F: Fn(f64) -> f64>(q: &F, a_ref: f64) -> Option<(f64, f64)> {
    let (l, h) = (-0.5 * a_ref, -1.5 * a_ref);
    if q(l) * q(h) < 0.0 {
        return Some((l, h));
    }
    let q0 = q(0.0);
    let scale = a_ref.abs().max(1e-12);
    for sign in [-a_ref.signum(), a_ref.signum()] {
        let mut prev = 0.0;
        for m in -8..40 {
            let lam = sign * scale * 2f64.powi(m);
            if q(lam) * q0 < 0.0 {
                let lo = if prev == 0.0 { lam * 0.5 } else { prev };
                if q(lo) * q(lam) < 0.0 {
                    return Some((lo, lam));
                }
            }
            prev = lam;
        }
    }
    None
}

/// Atoms with cached columns `⟨aφ_1, φ_j⟩` and `⟨aφ_K, φ_j⟩`; the truncated functionals are
/// linear or quadratic in the coefficient vector.
#[derive(Debug, Clone)]
struct Dictionary {
    k: usize,
    n: usize,
    atoms: Vec<Atom>,
    m1: Vec<Vec<f64>>,
    mk: Vec<Vec<f64>>,
    weights: [Vec<f64>; 3],
}

impl Dictionary {
    fn new(k: usize, n: usize) -> Self {
        let weights = [1, 2, 3].map(|p| (1..=n).map(|j| drift_weight(j, k, p)).collect());
        Self {
            k,
            n,
            atoms: Vec::new(),
            m1: Vec::new(),
            mk: Vec::new(),
            weights,
        }
    }

    fn push(&mut self, atom: Atom) -> usize {
        let cols = ModeColumns::new(&DipoleMoment::new(vec![atom.clone()]), self.k, self.n);
        self.atoms.push(atom);
        self.m1.push(cols.m1);
        self.mk.push(cols.mk);
        self.atoms.len() - 1
    }

    fn columns(&self, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut m1 = vec![0.0; self.n];
        let mut mk = vec![0.0; self.n];
        for (i, &ci) in c.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            for j in 0..self.n {
                m1[j] += ci * self.m1[i][j];
                mk[j] += ci * self.mk[i][j];
            }
        }
        (m1, mk)
    }

    /// `[⟨μφ_1,φ_K⟩, A¹, A², A³]`.
    fn functionals(&self, c: &[f64]) -> [f64; 4] {
        let (m1, mk) = self.columns(c);
        let a = |p: usize| -> f64 { (0..self.n).map(|j| self.weights[p][j] * m1[j] * mk[j]).sum() };
        [m1[self.k - 1], a(0), a(1), a(2)]
    }

    /// Gradients of [`Self::functionals`] with respect to the coefficients in `idx`.
    fn gradient(&self, c: &[f64], idx: &[usize]) -> Vec<[f64; 4]> {
        let (m1, mk) = self.columns(c);
        idx.iter()
            .map(|&i| {
                let mut g = [self.m1[i][self.k - 1], 0.0, 0.0, 0.0];
                for p in 0..3 {
                    g[p + 1] = (0..self.n)
                        .map(|j| self.weights[p][j] * (self.m1[i][j] * mk[j] + m1[j] * self.mk[i][j]))
                        .sum();
                }
                g
            })
            .collect()
    }

    fn dipole(&self, c: &[f64]) -> DipoleMoment {
        DipoleMoment::new(
            self.atoms
                .iter()
                .zip(c)
                .filter(|(_, &ci)| ci != 0.0)
                .map(|(a, &ci)| a.scaled(ci))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Step1,
    Step2,
    Step3,
    Step4,
    Done,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub k: usize,
    pub modes: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    /// Bump widths tried in order.
    pub eps_grid: Vec<f64>,
    pub max_restarts: usize,
    /// Reference atoms besides the boundary polynomial atom.
    pub reference_atoms: usize,
}

/// 25 geometric points from 1e-1 down to 1e-4.
pub fn default_eps_grid() -> Vec<f64> {
    (0..25).map(|i| 10f64.powf(-1.0 - 3.0 * i as f64 / 24.0)).collect()
}

impl SynthesisConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            modes: 30,
            seed,
            tolerances: Tolerances::default(),
            eps_grid: default_eps_grid(),
            max_restarts: 20,
            reference_atoms: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub epsilon: f64,
    pub lambda: f64,
    pub q: f64,
    /// `[⟨μφ_1,φ_K⟩, A¹, A², A³]` after the stage.
    pub functionals: [f64; 4],
    pub c_k: f64,
}

/// Working state: dictionary, coefficients and the lever atoms.
#[derive(Debug, Clone)]
pub struct SynthesisState {
    pub geometry: SynthesisGeometry,
    pub stage: Stage,
    pub epsilon: f64,
    pub lambda: f64,
    pub q_value: f64,
    pub q_hat_value: f64,
    pub trace: Vec<StageRecord>,
    cfg: SynthesisConfig,
    dict: Dictionary,
    coeffs: Vec<f64>,
    /// Reference-region atoms (boundary atom first).
    reference: Vec<usize>,
    mu0: usize,
    mu0_hat: usize,
    lever1: Option<usize>,
    lever2: Option<usize>,
}

impl SynthesisState {
    pub fn mu(&self) -> DipoleMoment {
        self.dict.dipole(&self.coeffs)
    }

    pub fn mu_ref(&self) -> DipoleMoment {
        let c: Vec<f64> = (0..self.coeffs.len())
            .map(|i| if self.reference.contains(&i) { self.coeffs[i] } else { 0.0 })
            .collect();
        self.dict.dipole(&c)
    }

    /// `[⟨μφ_1,φ_K⟩, A¹, A², A³]` of the current dipole (truncated series).
    pub fn functionals(&self) -> [f64; 4] {
        self.dict.functionals(&self.coeffs)
    }

    pub fn report(&self) -> HypothesisReport {
        check_hypotheses(&self.mu(), self.cfg.k, self.cfg.modes, self.cfg.tolerances)
    }

    fn record(&mut self, stage: Stage, epsilon: f64, lambda: f64, q: f64) {
        let c_k = ModeColumns::new(&self.mu(), self.cfg.k, self.cfg.modes).cubic();
        let functionals = self.functionals();
        self.trace.push(StageRecord {
            stage,
            epsilon,
            lambda,
            q,
            functionals,
            c_k,
        });
    }

    fn push_zero(&mut self, atom: Atom) -> usize {
        self.coeffs.push(0.0);
        self.dict.push(atom)
    }

    /// Survival of the non-vanishing conditions: cubic coefficient and linear floors.
    fn nonvanishing_ok(&self, c: &[f64]) -> std::result::Result<(), String> {
        let mu = self.dict.dipole(c);
        let cols = ModeColumns::new(&mu, self.cfg.k, self.cfg.modes);
        let tol = self.cfg.tolerances;
        if cols.cubic().abs() <= tol.tol_nonzero {
            return Err(format!("cubic coefficient {:e}", cols.cubic()));
        }
        for j in 1..=self.cfg.modes {
            if j != self.cfg.k && (j as f64).powi(7) * cols.m1[j - 1].abs() <= tol.tol_nonzero {
                return Err(format!("linear coefficient of mode {j}: {:e}", cols.m1[j - 1]));
            }
        }
        Ok(())
    }
}

/// Reference dipole on `[0, η/2]`: a boundary atom `x⁵·bump` (non-zero fifth derivative at 0)
/// plus random bumps, with the overlap on the lost mode projected out exactly.
pub fn step1_reference(cfg: &SynthesisConfig) -> Result<SynthesisState> {
    let geometry = SynthesisGeometry::new(cfg.k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eta = geometry.eta;
    let half = 0.5 * eta;
    let mut last = String::new();
    for _ in 0..cfg.max_restarts.max(1) {
        let mut dict = Dictionary::new(cfg.k, cfg.modes);
        let mut coeffs = Vec::new();
        let mut reference = Vec::new();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        // unit fifth derivative at 0: x⁵ e^{-1}·amplitude has μ⁽⁵⁾(0) = 120·amplitude/e
        reference.push(dict.push(Atom::PolyBump {
            power: 5,
            center: 0.0,
            half_width: half,
            amplitude: std::f64::consts::E / 120.0,
            kappa: 1.0,
        }));
        coeffs.push(sign * BOUNDARY_FIFTH_DERIVATIVE * rng.random_range(0.5..1.0));
        for _ in 0..cfg.reference_atoms {
            let hw = rng.random_range(0.3..0.5) * half;
            let c = rng.random_range(hw..half - hw);
            reference.push(dict.push(Atom::bump(c, hw, 1.0)));
            coeffs.push(rng.random_range(-1.0..1.0));
        }
        let g: Vec<f64> = reference.iter().map(|&i| dict.m1[i][cfg.k - 1]).collect();
        let cg: f64 = coeffs.iter().zip(&g).map(|(a, b)| a * b).sum();
        let gg: f64 = g.iter().map(|x| x * x).sum();
        for (c, gi) in coeffs.iter_mut().zip(&g) {
            *c -= cg / gg * gi;
        }
        // overlap compensator filling (η/2, η), normalized to unit overlap; the widest
        // admissible atom carries the least first drift per unit overlap
        let b0 = Atom::bump(0.75 * eta, 0.245 * eta, 1.0);
        let s0 = 1.0 / ModeColumns::new(&DipoleMoment::new(vec![b0.clone()]), cfg.k, cfg.modes).m1[cfg.k - 1];
        let mu0 = dict.push(b0.scaled(s0));
        let mu0_hat = mu0;
        coeffs.push(0.0);
        let mut state = SynthesisState {
            geometry: geometry.clone(),
            stage: Stage::Step1,
            epsilon: 0.0,
            lambda: 0.0,
            q_value: 0.0,
            q_hat_value: 0.0,
            trace: Vec::new(),
            cfg: cfg.clone(),
            dict,
            coeffs,
            reference,
            mu0,
            mu0_hat,
            lever1: None,
            lever2: None,
        };
        let f = state.functionals();
        let scale = state.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
        if f[0].abs() > 1e-12 * scale.max(1.0) {
            last = format!("overlap {:e} after projection", f[0]);
            continue;
        }
        if f[1].abs() <= cfg.tolerances.tol_nonzero {
            last = format!("first drift {:e} too small to compensate", f[1]);
            continue;
        }
        if let Err(e) = state.nonvanishing_ok(&state.coeffs) {
            last = e;
            continue;
        }
        state.record(Stage::Step1, 0.0, 0.0, 0.0);
        state.stage = Stage::Step2;
        return Ok(state);
    }
    Err(Error::Synthesis(format!(
        "reference search exhausted {} restarts: {last}",
        cfg.max_restarts
    )))
}

/// Newton on the overlap, first- and second-drift levers driving `[⟨μφ_1,φ_K⟩, A¹, A²]` to 0.
fn polish(dict: &Dictionary, c: &mut [f64], levers: &[usize], tol: f64) -> Result<[f64; 4]> {
    let count = levers.len();
    for _ in 0..50 {
        let f = dict.functionals(c);
        let scale = 1.0 + c.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if f[..count].iter().all(|v| v.abs() < tol * scale) {
            return Ok(f);
        }
        let g = dict.gradient(c, levers);
        let jac = nalgebra::DMatrix::from_fn(count, count, |r, col| g[col][r]);
        let rhs = nalgebra::DVector::from_iterator(count, f[..count].iter().map(|v| -v));
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Synthesis("singular lever Jacobian".into()))?;
        for (k, &i) in levers.iter().enumerate() {
            c[i] += step[k];
        }
    }
    let f = dict.functionals(c);
    Ok(f)
}

/// Adds the first-drift lever and solves for λ so the first drift vanishes, sweeping ε.
pub fn step2_kill_a1(state: SynthesisState) -> Result<SynthesisState> {
    if state.stage != Stage::Step2 {
        return Err(Error::Synthesis(format!("step 2 called at {:?}", state.stage)));
    }
    let a_ref = state.functionals()[1];
    let mut why = String::from("no width fits the lever interval");
    for &eps in &state.cfg.eps_grid.clone() {
        let atoms = [1.0, -1.0].map(|s| oscillating_atom(&state.geometry, eps, s, 1));
        let (Ok(ap), Ok(am)) = (&atoms[0], &atoms[1]) else {
            continue;
        };
        let mut trial = state.clone();
        let ip = trial.push_zero(ap.clone());
        let im = trial.push_zero(am.clone());
        let mu0 = trial.mu0;
        let base = trial.coeffs.clone();
        let build = |lam: f64| -> Vec<f64> {
            let mut c = base.clone();
            let idx = if lam >= 0.0 { ip } else { im };
            c[idx] = lam.abs().sqrt();
            let ov = trial.dict.m1[idx][trial.cfg.k - 1] * c[idx];
            c[mu0] -= ov;
            c
        };
        let q = |lam: f64| trial.dict.functionals(&build(lam))[1];
        let Some(bracket) = find_bracket(&q, a_ref) else {
            why = format!("no sign change of the first drift at width {eps:e}");
            continue;
        };
        let (lam, qv) = solve_lambda(q, bracket)?;
        let c = build(lam);
        if let Err(e) = trial.nonvanishing_ok(&c) {
            why = format!("width {eps:e}: {e}");
            continue;
        }
        trial.coeffs = c;
        trial.lever1 = Some(if lam >= 0.0 { ip } else { im });
        trial.epsilon = eps;
        trial.lambda = lam;
        trial.q_value = qv;
        trial.record(Stage::Step2, eps, lam, qv);
        trial.stage = Stage::Step3;
        return Ok(trial);
    }
    Err(Error::Synthesis(format!("step 2 failed: {why}")))
}

/// Two bumps in `I^±` with zero overlap and first drift `±1`.
fn compensator(state: &SynthesisState, sign: f64) -> Result<(Atom, Atom, f64, f64)> {
    let (l, r) = state.geometry.slot_for(&state.geometry.i, sign);
    for split in [0.5, 0.4, 0.6, 0.3, 0.7] {
        let m = l + split * (r - l);
        let a1 = Atom::bump(0.5 * (l + m), 0.49 * (m - l), 1.0);
        let a2 = Atom::bump(0.5 * (m + r), 0.49 * (r - m), 1.0);
        let mut d = Dictionary::new(state.cfg.k, state.cfg.modes);
        d.push(a1.clone());
        d.push(a2.clone());
        let (g1, g2) = (d.m1[0][state.cfg.k - 1], d.m1[1][state.cfg.k - 1]);
        let dir = [g2, -g1];
        let a = d.functionals(&dir)[1];
        if a * sign > 0.0 {
            let t = 1.0 / a.abs().sqrt();
            return Ok((a1, a2, t * dir[0], t * dir[1]));
        }
    }
    Err(Error::Synthesis(format!("no compensator with first drift of sign {sign}")))
}

/// Adds the second-drift lever with overlap and first-drift compensators; solves for λ̂.
pub fn step3_kill_a2(state: SynthesisState) -> Result<SynthesisState> {
    if state.stage != Stage::Step3 {
        return Err(Error::Synthesis(format!("step 3 called at {:?}", state.stage)));
    }
    let tol = state.cfg.tolerances;
    let comp_p = compensator(&state, 1.0)?;
    let comp_m = compensator(&state, -1.0)?;
    let a2_ref = state.functionals()[2];
    let mut why = String::from("no width fits the lever interval");
    for &eps in &state.cfg.eps_grid.clone() {
        let atoms = [1.0, -1.0].map(|s| oscillating_atom(&state.geometry, eps, s, 2));
        let (Ok(ap), Ok(am)) = (&atoms[0], &atoms[1]) else {
            continue;
        };
        let mut trial = state.clone();
        let ip = trial.push_zero(ap.clone());
        let im = trial.push_zero(am.clone());
        let cp = [trial.push_zero(comp_p.0.clone()), trial.push_zero(comp_p.1.clone())];
        let cm = [trial.push_zero(comp_m.0.clone()), trial.push_zero(comp_m.1.clone())];
        let (cpw, cmw) = ([comp_p.2, comp_p.3], [comp_m.2, comp_m.3]);
        let mu0h = trial.mu0_hat;
        let base = trial.coeffs.clone();
        let build = |lam: f64| -> Vec<f64> {
            let mut c = base.clone();
            let idx = if lam >= 0.0 { ip } else { im };
            c[idx] = lam.abs().sqrt();
            c[mu0h] -= trial.dict.m1[idx][trial.cfg.k - 1] * c[idx];
            let d1 = trial.dict.functionals(&c)[1];
            // compensate the first drift with √|δ| times the opposite-sign compensator
            let t = d1.abs().sqrt();
            let (slots, w) = if d1 > 0.0 { (cm, cmw) } else { (cp, cpw) };
            for (s, wi) in slots.iter().zip(w) {
                c[*s] += t * wi;
            }
            c
        };
        let q = |lam: f64| trial.dict.functionals(&build(lam))[2];
        let Some(bracket) = find_bracket(&q, a2_ref) else {
            why = format!("no sign change of the second drift at width {eps:e}");
            continue;
        };
        let (lam, qv) = solve_lambda(q, bracket)?;
        let mut c = build(lam);
        let lever2 = if lam >= 0.0 { ip } else { im };
        let levers = [trial.mu0, trial.lever1.expect("step 2 ran"), lever2];
        let f = match polish(&trial.dict, &mut c, &levers, 1e-14) {
            Ok(f) => f,
            Err(e) => {
                why = format!("width {eps:e}: {e}");
                continue;
            }
        };
        if f[..3].iter().any(|v| v.abs() >= tol.tol_zero) {
            why = format!("width {eps:e}: polish left {:?}", &f[..3]);
            continue;
        }
        if let Err(e) = trial.nonvanishing_ok(&c) {
            why = format!("width {eps:e}: {e}");
            continue;
        }
        trial.coeffs = c;
        trial.lever2 = Some(lever2);
        trial.q_hat_value = qv;
        trial.record(Stage::Step3, eps, lam, qv);
        trial.stage = Stage::Step4;
        return Ok(trial);
    }
    Err(Error::Synthesis(format!("step 3 failed: {why}")))
}

/// `ν` on six bumps in `J̃^±` with zero overlap, zero first and second drift and unit third
/// drift, by least-norm Newton from random starts.
pub fn third_drift_atom(state: &SynthesisState, rng: &mut ChaCha8Rng, per_side: usize) -> Result<(Vec<Atom>, Vec<f64>)> {
    let mut d = Dictionary::new(state.cfg.k, state.cfg.modes);
    let mut atoms = Vec::new();
    for pair in [state.geometry.j_tilde[0], state.geometry.j_tilde[1]] {
        let (l, r) = pair;
        let w = (r - l) / per_side as f64;
        for m in 0..per_side {
            let a = Atom::bump(l + (m as f64 + 0.5) * w, 0.49 * w, 1.0);
            d.push(a.clone());
            atoms.push(a);
        }
    }
    let idx: Vec<usize> = (0..atoms.len()).collect();
    for _ in 0..20 {
        let mut c: Vec<f64> = (0..atoms.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a3 = d.functionals(&c)[3];
        if a3 <= 0.0 {
            continue;
        }
        let s = 1.0 / a3.sqrt();
        c.iter_mut().for_each(|x| *x *= s);
        for _ in 0..100 {
            let f = d.functionals(&c);
            let r = [f[0], f[1], f[2], f[3] - 1.0];
            let scale = 1.0 + c.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if r[..3].iter().all(|v| v.abs() < 1e-13 * scale) && r[3].abs() < 1e-12 {
                return Ok((atoms, c));
            }
            let g = d.gradient(&c, &idx);
            let jac = nalgebra::DMatrix::from_fn(4, c.len(), |row, col| g[col][row]);
            let rhs = nalgebra::DVector::from_iterator(4, r.iter().map(|v| -v));
            let Ok(step) = jac.svd(true, true).solve(&rhs, 1e-14) else {
                break;
            };
            for (x, s) in c.iter_mut().zip(step.iter()) {
                *x += s;
            }
        }
    }
    Err(Error::Synthesis("third-drift atom: Newton stagnated".into()))
}

/// Adds `εν` for the first ε of the sweep keeping every verdict, then re-polishes.
pub fn step4_set_a3(mut state: SynthesisState) -> Result<SynthesisState> {
    if state.stage != Stage::Step4 {
        return Err(Error::Synthesis(format!("step 4 called at {:?}", state.stage)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(state.cfg.seed ^ 0x5eed_0004);
    let (atoms, nu) = match third_drift_atom(&state, &mut rng, 3) {
        Ok(v) => v,
        Err(_) => third_drift_atom(&state, &mut rng, 4)?,
    };
    let slots: Vec<usize> = atoms.into_iter().map(|a| state.push_zero(a)).collect();
    let levers = [
        state.mu0,
        state.lever1.expect("step 2 ran"),
        state.lever2.expect("step 3 ran"),
    ];
    let tol = state.cfg.tolerances;
    let mut why = String::new();
    for &eps in &state.cfg.eps_grid.clone() {
        let mut c = state.coeffs.clone();
        for (s, v) in slots.iter().zip(&nu) {
            c[*s] = eps * v;
        }
        let f = polish(&state.dict, &mut c, &levers, 1e-14)?;
        if f[..3].iter().any(|v| v.abs() >= tol.tol_zero) {
            why = format!("ε = {eps:e}: polish left {:?}", &f[..3]);
            continue;
        }
        if f[3].abs() <= tol.tol_nonzero {
            why = format!("ε = {eps:e}: third drift {:e}", f[3]);
            continue;
        }
        if let Err(e) = state.nonvanishing_ok(&c) {
            why = format!("ε = {eps:e}: {e}");
            continue;
        }
        let trial = SynthesisState {
            coeffs: c,
            ..state.clone()
        };
        if !trial.report().verdicts.all() {
            why = format!("ε = {eps:e}: verdicts {:?}", trial.report().verdicts);
            continue;
        }
        state = trial;
        state.record(Stage::Step4, eps, 0.0, 0.0);
        state.stage = Stage::Done;
        return Ok(state);
    }
    Err(Error::Synthesis(format!("step 4 sweep exhausted: {why}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub mu: DipoleMoment,
    pub report: HypothesisReport,
    pub geometry: SynthesisGeometry,
    pub trace: Vec<StageRecord>,
    pub seed: u64,
}

/// Steps 1 to 4; a failed seed is retried with the next one up to `max_restarts` times.
pub fn synthesize(cfg: &SynthesisConfig) -> Result<SynthesisResult> {
    let mut last = None;
    for attempt in 0..cfg.max_restarts.max(1) as u64 {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(attempt);
        let run = step1_reference(&c)
            .and_then(step2_kill_a1)
            .and_then(step3_kill_a2)
            .and_then(step4_set_a3);
        match run {
            Ok(state) => {
                let report = state.report();
                return Ok(SynthesisResult {
                    mu: state.mu(),
                    report,
                    geometry: state.geometry.clone(),
                    trace: state.trace.clone(),
                    seed: c.seed,
                });
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Synthesis("no attempt made".into())))
}

#[cfg(test)]
mod tests;
