use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable that overrides the output directory of the config file (a flag still wins).
pub const OUTPUT_DIR_ENV: &str = "STLC_OUTPUT_DIR";

pub const CONFIG_VERSION: u32 = 1;

/// Everything a run needs. Mirrors the TOML config file; every field has a default and flags
/// override whatever the file says.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Subcommand the config was resolved for. Informational when read back.
    pub command: Option<String>,
    /// Dipole JSON file; without one μ is synthesized from `k` and `seed`.
    pub mu: Option<PathBuf>,
    pub modes: usize,
    /// Lost mode K.
    pub k: usize,
    pub seed: u64,
    /// Integrator tolerance (rtol = atol).
    pub ode_tol: f64,
    /// Worker threads for parallel sweeps; 0 uses all logical cores.
    pub workers: usize,
    pub output_dir: PathBuf,
    /// b grid for the reachable-vector and toy sweeps.
    pub sweep: Sweep,
    pub simulate: SimulateSection,
    pub expansion: ExpansionSection,
    pub tv1: Tv1Section,
    pub tv2: Tv2Section,
    pub target: TargetSection,
    pub toys: ToySection,
    pub scaling: ScalingSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            command: None,
            mu: None,
            modes: 30,
            k: 2,
            seed: 7,
            ode_tol: 1e-12,
            workers: 0,
            output_dir: PathBuf::from("stlc-out"),
            sweep: Sweep::default(),
            simulate: SimulateSection::default(),
            expansion: ExpansionSection::default(),
            tv1: Tv1Section::default(),
            tv2: Tv2Section::default(),
            target: TargetSection::default(),
            toys: ToySection::default(),
            scaling: ScalingSection::default(),
        }
    }
}

/// Geometric grid from `b_max` down to `b_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub b_max: f64,
    pub b_min: f64,
    pub points: usize,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            b_max: 1e-2,
            b_min: 1e-5,
            points: 8,
        }
    }
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        crate::driver::log_sweep(self.b_max, self.b_min, self.points)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.b_max > self.b_min && self.b_min > 0.0 && self.b_max.is_finite() && self.points >= 2) {
            return Err(Error::Config(format!(
                "{what}: need b_max > b_min > 0 and at least 2 points, got [{}, {}] x {}",
                self.b_min, self.b_max, self.points
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub horizon: f64,
    /// Built-in pulse `α·bump(t)·(cos ωt + 0.4 sin ωt)`, used when no control file is given.
    pub amplitude: f64,
    pub omega: f64,
    /// Control JSON file (as written by `target`).
    pub control: Option<PathBuf>,
    pub outputs: usize,
    /// Also integrate the auxiliary system and report the gauge mismatch.
    pub auxiliary: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            horizon: 0.5,
            amplitude: 1.0,
            omega: 12.0,
            control: None,
            outputs: 50,
            auxiliary: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionSection {
    pub horizon: f64,
    pub omega: f64,
    pub amplitudes: Vec<f64>,
}

impl Default for ExpansionSection {
    fn default() -> Self {
        Self {
            horizon: 0.25,
            omega: 12.0,
            amplitudes: vec![16.0, 8.0, 4.0, 2.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tv1Section {
    pub horizon: f64,
    pub t1: f64,
    pub support: f64,
}

impl Default for Tv1Section {
    fn default() -> Self {
        Self {
            horizon: 0.5,
            t1: 0.25,
            support: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tv2Section {
    /// `None` uses min(0.3, 0.9π/(2ω_K)).
    pub window: Option<f64>,
    pub pulse_fraction: f64,
    /// `None` fits the support to the largest pulse.
    pub support: Option<f64>,
}

impl Default for Tv2Section {
    fn default() -> Self {
        Self {
            window: None,
            pulse_fraction: 0.5,
            support: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    /// Target `ψ_1 + εψ_K` at time 3T with complex ε.
    pub eps_re: f64,
    pub eps_im: f64,
    pub radius: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            eps_re: 1e-4,
            eps_im: 0.0,
            radius: 1e-2,
            max_iterations: 50,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySection {
    pub samples: usize,
    /// Also run the reachable-vector constructions on the 5-mode bilinear toy.
    pub bilinear: bool,
    /// b grid for the bilinear toy (the polynomial toys use `sweep`).
    pub bilinear_sweep: Sweep,
}

impl Default for ToySection {
    fn default() -> Self {
        Self {
            samples: 100,
            bilinear: true,
            bilinear_sweep: Sweep {
                b_max: 2e-4,
                b_min: 1e-5,
                points: 6,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Pde,
    Toy,
    Sussmann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    pub family: FamilyName,
    /// Norm order: k ≥ 0 derivatives, k < 0 the weak norm through the |k|-th primitive.
    pub k: i32,
    /// Lebesgue exponent; `inf` (or any value ≥ 1e300) for the sup norm.
    pub p: f64,
    /// Cubic coefficient for the pde family.
    pub c_k: f64,
    pub support: f64,
    pub horizon: f64,
    /// The fit needs 4 decades, so this grid is separate from `sweep`.
    pub sweep: Sweep,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            family: FamilyName::Pde,
            k: 2,
            p: 2.0,
            c_k: 1.0,
            support: 0.25,
            horizon: 0.5,
            sweep: Sweep {
                b_max: 1e-2,
                b_min: 1e-8,
                points: 7,
            },
        }
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Rejects invalid combinations before any computation starts.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.modes < 2 {
            return Err(Error::Config(format!("need at least 2 modes, got {}", self.modes)));
        }
        if self.k < 2 || self.k > self.modes {
            return Err(Error::Config(format!("lost mode K = {} outside 2..={}", self.k, self.modes)));
        }
        if !(self.ode_tol > 0.0 && self.ode_tol < 1e-3) {
            return Err(Error::Config(format!("ode_tol {} outside (0, 1e-3)", self.ode_tol)));
        }
        if let Some(mu) = &self.mu {
            if !mu.is_file() {
                return Err(Error::Config(format!("dipole file {} does not exist", mu.display())));
            }
        }
        self.sweep.validate("sweep")?;
        let s = &self.simulate;
        positive("simulate.horizon", s.horizon)?;
        if s.outputs == 0 {
            return Err(Error::Config("simulate.outputs must be at least 1".into()));
        }
        if let Some(c) = &s.control {
            if !c.is_file() {
                return Err(Error::Config(format!("control file {} does not exist", c.display())));
            }
        }
        let e = &self.expansion;
        positive("expansion.horizon", e.horizon)?;
        if e.amplitudes.len() < 3 || e.amplitudes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config("expansion.amplitudes needs at least 3 positive values".into()));
        }
        let t = &self.tv1;
        positive("tv1.horizon", t.horizon)?;
        positive("tv1.support", t.support)?;
        if !(t.t1 > 0.0 && t.t1 < t.horizon) {
            return Err(Error::Config(format!("tv1.t1 = {} must lie in (0, horizon = {})", t.t1, t.horizon)));
        }
        let t = &self.tv2;
        if let Some(w) = t.window {
            positive("tv2.window", w)?;
        }
        if let Some(s) = t.support {
            positive("tv2.support", s)?;
        }
        if !(t.pulse_fraction > 0.0 && t.pulse_fraction < 1.0) {
            return Err(Error::Config(format!("tv2.pulse_fraction {} outside (0, 1)", t.pulse_fraction)));
        }
        let g = &self.target;
        positive("target.radius", g.radius)?;
        positive("target.tolerance", g.tolerance)?;
        if g.max_iterations == 0 {
            return Err(Error::Config("target.max_iterations must be at least 1".into()));
        }
        if g.eps_re.hypot(g.eps_im) > g.radius {
            return Err(Error::Config(format!(
                "target |ε| = {:e} lies outside the iteration ball of radius {:e}",
                g.eps_re.hypot(g.eps_im),
                g.radius
            )));
        }
        if self.toys.samples == 0 {
            return Err(Error::Config("toys.samples must be at least 1".into()));
        }
        self.toys.bilinear_sweep.validate("toys.bilinear_sweep")?;
        let sc = &self.scaling;
        if !(sc.p >= 1.0) {
            return Err(Error::Config(format!("scaling.p = {} must be at least 1", sc.p)));
        }
        positive("scaling.support", sc.support)?;
        positive("scaling.horizon", sc.horizon)?;
        if sc.c_k == 0.0 || !sc.c_k.is_finite() {
            return Err(Error::Config("scaling.c_k must be non-zero".into()));
        }
        sc.sweep.validate("scaling.sweep")?;
        if sc.sweep.b_max / sc.sweep.b_min < 1e4 || sc.sweep.points < 4 {
            return Err(Error::Config("scaling.sweep must span 4 decades with at least 4 points".into()));
        }
        Ok(())
    }
}
