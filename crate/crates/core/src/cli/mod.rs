//! `stlc` command line: argument parsing, config resolution and exit codes.

mod commands;
mod config;

pub use config::{
    ExpansionSection, FamilyName, RunConfig, ScalingSection, SimulateSection, Sweep, TargetSection, ToySection,
    Tv1Section, Tv2Section, CONFIG_VERSION, OUTPUT_DIR_ENV,
};

use crate::error::Error;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_EXPERIMENT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "stlc", version, about = "Cubic recovery experiments for the bilinear Schrödinger equation")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides STLC_OUTPUT_DIR and the config file).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps (0 = all logical cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Galerkin modes N.
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    /// Lost mode K.
    #[arg(long = "K", global = true)]
    pub k: Option<usize>,
    /// Dipole JSON file; without it μ is synthesized from K and the seed.
    #[arg(long, global = true)]
    pub mu: Option<PathBuf>,
    /// Integrator tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub b_max: Option<f64>,
    #[arg(long, global = true)]
    pub b_min: Option<f64>,
    #[arg(long, global = true)]
    pub points: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a dipole with A¹_K = A²_K = 0 and A³_K, C_K ≠ 0.
    SynthesizeMu,
    /// Evaluate the hypotheses on a dipole.
    CheckHypotheses,
    /// Integrate the Galerkin system from the ground state.
    Simulate {
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        amplitude: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
        /// Control JSON file instead of the built-in pulse.
        #[arg(long)]
        control: Option<PathBuf>,
        #[arg(long)]
        outputs: Option<usize>,
        #[arg(long)]
        auxiliary: bool,
    },
    /// Remainder orders of the expansion along an amplitude sweep.
    VerifyExpansion {
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        amplitudes: Option<Vec<f64>>,
    },
    /// Series against bracket forms of the drift and cubic coefficients, and the three
    /// evaluations of the quadratic term.
    VerifyDrift,
    /// Reachable vector iψ_K by the cubic oscillating family plus linear correction.
    VerifyCubicRecovery {
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        support: Option<f64>,
    },
    /// Reachable vector ψ_K by two pulses separated by an idle window.
    #[command(name = "verify-phiK")]
    VerifyPhiK {
        #[arg(long)]
        window: Option<f64>,
        #[arg(long)]
        pulse_fraction: Option<f64>,
        #[arg(long)]
        support: Option<f64>,
    },
    /// Fixed-point targeting of ψ_1 + εψ_K at time 3T.
    Target {
        #[arg(long, allow_hyphen_values = true)]
        eps_re: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eps_im: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        window: Option<f64>,
    },
    /// Polynomial toy models and the bilinear toy.
    ToyModels {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        no_bilinear: bool,
    },
    /// Log-log slope of a control norm along an oscillating family.
    ScalingLaws {
        #[arg(long, value_enum)]
        family: Option<FamilyName>,
        #[arg(long = "k", allow_hyphen_values = true)]
        norm_k: Option<i32>,
        /// Lebesgue exponent; `inf` for the sup norm.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        c_k: Option<f64>,
        #[arg(long)]
        support: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SynthesizeMu => "synthesize-mu",
            Command::CheckHypotheses => "check-hypotheses",
            Command::Simulate { .. } => "simulate",
            Command::VerifyExpansion { .. } => "verify-expansion",
            Command::VerifyDrift => "verify-drift",
            Command::VerifyCubicRecovery { .. } => "verify-cubic-recovery",
            Command::VerifyPhiK { .. } => "verify-phiK",
            Command::Target { .. } => "target",
            Command::ToyModels { .. } => "toy-models",
            Command::ScalingLaws { .. } => "scaling-laws",
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Config file, then the output-directory environment variable, then flags.
pub fn resolve(cli: &Cli, env_output: Option<OsString>) -> crate::Result<RunConfig> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.command = Some(cli.command.name().to_string());
    if let Some(dir) = env_output.filter(|d| !d.is_empty()) {
        cfg.output_dir = PathBuf::from(dir);
    }
    set(&mut cfg.output_dir, c.output_dir.clone());
    set(&mut cfg.seed, c.seed);
    set(&mut cfg.workers, c.workers);
    set(&mut cfg.modes, c.modes);
    set(&mut cfg.k, c.k);
    if c.mu.is_some() {
        cfg.mu = c.mu.clone();
    }
    set(&mut cfg.ode_tol, c.tol);
    let sweep = match cli.command {
        Command::ScalingLaws { .. } => &mut cfg.scaling.sweep,
        _ => &mut cfg.sweep,
    };
    set(&mut sweep.b_max, c.b_max);
    set(&mut sweep.b_min, c.b_min);
    set(&mut sweep.points, c.points);
    match &cli.command {
        Command::Simulate {
            horizon,
            amplitude,
            omega,
            control,
            outputs,
            auxiliary,
        } => {
            let s = &mut cfg.simulate;
            set(&mut s.horizon, *horizon);
            set(&mut s.amplitude, *amplitude);
            set(&mut s.omega, *omega);
            if control.is_some() {
                s.control = control.clone();
            }
            set(&mut s.outputs, *outputs);
            s.auxiliary |= *auxiliary;
        }
        Command::VerifyExpansion {
            horizon,
            omega,
            amplitudes,
        } => {
            let e = &mut cfg.expansion;
            set(&mut e.horizon, *horizon);
            set(&mut e.omega, *omega);
            set(&mut e.amplitudes, amplitudes.clone());
        }
        Command::VerifyCubicRecovery { horizon, t1, support } => {
            let t = &mut cfg.tv1;
            set(&mut t.horizon, *horizon);
            set(&mut t.t1, *t1);
            set(&mut t.support, *support);
        }
        Command::VerifyPhiK {
            window,
            pulse_fraction,
            support,
        } => {
            let t = &mut cfg.tv2;
            if window.is_some() {
                t.window = *window;
            }
            set(&mut t.pulse_fraction, *pulse_fraction);
            if support.is_some() {
                t.support = *support;
            }
        }
        Command::Target {
            eps_re,
            eps_im,
            radius,
            max_iterations,
            tolerance,
            window,
        } => {
            let g = &mut cfg.target;
            set(&mut g.eps_re, *eps_re);
            set(&mut g.eps_im, *eps_im);
            set(&mut g.radius, *radius);
            set(&mut g.max_iterations, *max_iterations);
            set(&mut g.tolerance, *tolerance);
            if window.is_some() {
                cfg.tv2.window = *window;
            }
        }
        Command::ToyModels { samples, no_bilinear } => {
            set(&mut cfg.toys.samples, *samples);
            if *no_bilinear {
                cfg.toys.bilinear = false;
            }
        }
        Command::ScalingLaws {
            family,
            norm_k,
            p,
            c_k,
            support,
        } => {
            let s = &mut cfg.scaling;
            set(&mut s.family, *family);
            set(&mut s.k, *norm_k);
            set(&mut s.p, *p);
            set(&mut s.c_k, *c_k);
            set(&mut s.support, *support);
        }
        Command::SynthesizeMu | Command::CheckHypotheses | Command::VerifyDrift => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => EXIT_CONFIG,
        _ => EXIT_EXPERIMENT,
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match resolve(&cli, std::env::var_os(OUTPUT_DIR_ENV)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("stlc: {e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("stlc: cannot start {} workers: {e}", cfg.workers);
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| commands::run(&cli.command, &cfg)) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("stlc: {} did not meet its acceptance checks (see {})", cli.command.name(), cfg.output_dir.display());
            EXIT_EXPERIMENT
        }
        Err(e) => {
            eprintln!("stlc: {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests;
