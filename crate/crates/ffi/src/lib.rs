//! C ABI over `stlc-core`.
//!
//! Objects cross the boundary as opaque handles created by `stlc_*_new`/`stlc_*_from_*` and
//! released by the matching `stlc_*_free`. Every fallible call returns an [`StlcStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`stlc_last_error_message`]. Panics are caught and reported as `STLC_STATUS_ERR_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stlc_core::dipole::{check_hypotheses, DipoleMoment, Tolerances};
use stlc_core::ode::OdeOptions;
use stlc_core::signals::{oscillating_control_pde, ControlSignal};
use stlc_core::simulate::{simulate, GalerkinOperator};
use stlc_core::spectral::Spectrum;
use stlc_core::synthesis::{synthesize, SynthesisConfig};
use stlc_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    ErrNull = 1,
    ErrInvalidArgument = 2,
    ErrConfig = 3,
    /// Integration failure, inconsistent evaluations or an ill-conditioned system.
    ErrNumerical = 4,
    ErrSynthesis = 5,
    ErrExperiment = 6,
    ErrIo = 7,
    /// The output buffer is too small; the required size was written.
    ErrBufferTooSmall = 8,
    ErrPanic = 9,
}

/// Dipole moment μ.
pub struct StlcDipole(DipoleMoment);

/// Galerkin operator for a dipole and mode count.
pub struct StlcOperator(GalerkinOperator);

/// Scalar control u on [0, T].
pub struct StlcControl(ControlSignal);

/// Lost-direction coefficients of a dipole.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct StlcCoefficients {
    /// ⟨μφ_1, φ_K⟩.
    pub linear_k: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub c_k: f64,
    /// −4⟨μ'²μ''φ_1, φ_K⟩.
    pub c_k_bracket: f64,
    /// min over j ≠ K of j⁷|⟨μφ_1, φ_j⟩|.
    pub decay_constant: f64,
    /// 1 when every hypothesis verdict holds.
    pub verdict: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> StlcStatus {
    match err {
        Error::InvalidArgument(_) | Error::Contract(_) => StlcStatus::ErrInvalidArgument,
        Error::Config(_) => StlcStatus::ErrConfig,
        Error::Integration(_)
        | Error::Inconsistency { .. }
        | Error::IllConditioned { .. }
        | Error::OutOfNeighborhood { .. }
        | Error::Bracket { .. }
        | Error::Geometry(_) => StlcStatus::ErrNumerical,
        Error::Synthesis(_) => StlcStatus::ErrSynthesis,
        Error::Experiment(_) => StlcStatus::ErrExperiment,
        Error::Io(_) | Error::Json(_) => StlcStatus::ErrIo,
    }
}

/// Runs `f`, recording errors and catching panics.
fn guard<F: FnOnce() -> Result<(), (StlcStatus, String)>>(f: F) -> StlcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StlcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            StlcStatus::ErrPanic
        }
    }
}

fn core_err(e: Error) -> (StlcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (StlcStatus, String) {
    (StlcStatus::ErrNull, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (StlcStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (StlcStatus::ErrInvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (StlcStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies `s` with a trailing NUL into `buf`; `needed` (if non-null) receives the full size.
unsafe fn write_string(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), (StlcStatus, String)> {
    let size = s.len() + 1;
    if !needed.is_null() {
        *needed = size;
    }
    if buf.is_null() || len < size {
        return Err((StlcStatus::ErrBufferTooSmall, format!("buffer of {len} bytes, need {size}")));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// NUL-terminated library version; static storage.
#[no_mangle]
pub extern "C" fn stlc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buf`; `needed` receives the size
/// including the NUL.
///
/// # Safety
/// `buf` must point to `len` writable bytes or be null; `needed` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn stlc_last_error_message(buf: *mut c_char, len: usize, needed: *mut usize) -> StlcStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match write_string(&msg, buf, len, needed) {
        Ok(()) => StlcStatus::Ok,
        Err((s, _)) => s,
    }
}

/// Parses a dipole from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn stlc_dipole_from_json(json: *const c_char, out: *mut *mut StlcDipole) -> StlcStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let slot = out_ptr(out, "out")?;
        let mu = DipoleMoment::from_json(text).map_err(core_err)?;
        *slot = Box::into_raw(Box::new(StlcDipole(mu)));
        Ok(())
    })
}

/// Synthesizes a dipole with lost mode `k` on `modes` Galerkin modes.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn stlc_dipole_synthesize(k: usize, modes: usize, seed: u64, out: *mut *mut StlcDipole) -> StlcStatus {
    guard(|| {
        let slot = out_ptr(out, "out")?;
        if k < 2 || k > modes {
            return Err((StlcStatus::ErrInvalidArgument, format!("lost mode {k} outside 2..={modes}")));
        }
        let cfg = SynthesisConfig {
            modes,
            ..SynthesisConfig::new(k, seed)
        };
        let res = synthesize(&cfg).map_err(core_err)?;
        *slot = Box::into_raw(Box::new(StlcDipole(res.mu)));
        Ok(())
    })
}

/// Writes the JSON form of `dipole` into `buf`; `needed` receives the size including the NUL.
///
/// # Safety
/// `dipole` must be a live handle; `buf` must point to `len` writable bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn stlc_dipole_to_json(
    dipole: *const StlcDipole,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> StlcStatus {
    guard(|| {
        let d = dipole.as_ref().ok_or_else(|| null("dipole"))?;
        write_string(&d.0.to_json(), buf, len, needed)
    })
}

/// Value μ(x).
///
/// # Safety
/// `dipole` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn stlc_dipole_value(dipole: *const StlcDipole, x: f64, out: *mut f64) -> StlcStatus {
    guard(|| {
        let d = dipole.as_ref().ok_or_else(|| null("dipole"))?;
        *out_ptr(out, "out")? = d.0.value(x);
        Ok(())
    })
}

/// Hypothesis coefficients for lost mode `k` on `modes` modes.
///
/// # Safety
/// `dipole` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn stlc_dipole_coefficients(
    dipole: *const StlcDipole,
    k: usize,
    modes: usize,
    out: *mut StlcCoefficients,
) -> StlcStatus {
    guard(|| {
        let d = dipole.as_ref().ok_or_else(|| null("dipole"))?;
        let slot = out_ptr(out, "out")?;
        if k < 2 || k > modes {
            return Err((StlcStatus::ErrInvalidArgument, format!("lost mode {k} outside 2..={modes}")));
        }
        let r = check_hypotheses(&d.0, k, modes, Tolerances::default());
        *slot = StlcCoefficients {
            linear_k: r.linear_coeffs[k - 1],
            a1: r.a_coeffs[0],
            a2: r.a_coeffs[1],
            a3: r.a_coeffs[2],
            c_k: r.c_k,
            c_k_bracket: r.c_k_bracket,
            decay_constant: r.decay_constant,
            verdict: r.verdicts.all() as i32,
        };
        Ok(())
    })
}

/// Releases a dipole; null is ignored.
///
/// # Safety
/// `dipole` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stlc_dipole_free(dipole: *mut StlcDipole) {
    if !dipole.is_null() {
        drop(Box::from_raw(dipole));
    }
}

/// Galerkin operator on the first `modes` eigenmodes.
///
/// # Safety
/// `dipole` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn stlc_operator_new(dipole: *const StlcDipole, modes: usize, out: *mut *mut StlcOperator) -> StlcStatus {
    guard(|| {
        let d = dipole.as_ref().ok_or_else(|| null("dipole"))?;
        let slot = out_ptr(out, "out")?;
        if modes < 2 {
            return Err((StlcStatus::ErrInvalidArgument, format!("need at least 2 modes, got {modes}")));
        }
        *slot = Box::into_raw(Box::new(StlcOperator(GalerkinOperator::from_dipole(&d.0, modes))));
        Ok(())
    })
}

/// Mode count of `op` (0 for null).
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stlc_operator_modes(op: *const StlcOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.modes())
}

/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stlc_operator_free(op: *mut StlcOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Cubic oscillating control `u_b` of the PDE family on [0, horizon].
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn stlc_control_oscillating(
    b: f64,
    c_k: f64,
    horizon: f64,
    support: f64,
    out: *mut *mut StlcControl,
) -> StlcStatus {
    guard(|| {
        let slot = out_ptr(out, "out")?;
        if !(horizon > 0.0 && support > 0.0 && c_k != 0.0 && b.is_finite()) {
            return Err((StlcStatus::ErrInvalidArgument, "need horizon, support > 0 and c_k != 0".into()));
        }
        let u = oscillating_control_pde(b, c_k, horizon, support).map_err(core_err)?;
        *slot = Box::into_raw(Box::new(StlcControl(u)));
        Ok(())
    })
}

/// Parses a control from its JSON form (as written by the `target` command).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn stlc_control_from_json(json: *const c_char, out: *mut *mut StlcControl) -> StlcStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let slot = out_ptr(out, "out")?;
        let u: ControlSignal = serde_json::from_str(text).map_err(|e| (StlcStatus::ErrInvalidArgument, e.to_string()))?;
        *slot = Box::into_raw(Box::new(StlcControl(u)));
        Ok(())
    })
}

/// `u(t)`, or its `n`-th primitive for `n > 0`.
///
/// # Safety
/// `control` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn stlc_control_eval(control: *const StlcControl, t: f64, n: usize, out: *mut f64) -> StlcStatus {
    guard(|| {
        let u = control.as_ref().ok_or_else(|| null("control"))?;
        let slot = out_ptr(out, "out")?;
        if n > 3 {
            return Err((StlcStatus::ErrInvalidArgument, format!("primitive order {n} > 3")));
        }
        *slot = if n == 0 { u.0.eval(t) } else { u.0.primitive_at(n, t) };
        Ok(())
    })
}

/// Horizon T of `control` (NaN for null).
///
/// # Safety
/// `control` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stlc_control_horizon(control: *const StlcControl) -> f64 {
    control.as_ref().map_or(f64::NAN, |u| u.0.horizon)
}

/// # Safety
/// `control` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stlc_control_free(control: *mut StlcControl) {
    if !control.is_null() {
        drop(Box::from_raw(control));
    }
}

/// Integrates from the ground state to the control horizon and writes the final spectral
/// coefficients into `re`, `im` (each of length `len` = mode count).
///
/// # Safety
/// Handles must be live; `re`, `im` must point to `len` writable doubles; `norm_drift` may be null.
#[no_mangle]
pub unsafe extern "C" fn stlc_simulate_ground(
    op: *const StlcOperator,
    control: *const StlcControl,
    tol: f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
    norm_drift: *mut f64,
) -> StlcStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        let u = control.as_ref().ok_or_else(|| null("control"))?;
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let n = op.0.modes();
        if len != n {
            return Err((StlcStatus::ErrInvalidArgument, format!("buffers hold {len} values, operator has {n} modes")));
        }
        if !(tol > 0.0 && tol < 1e-3) {
            return Err((StlcStatus::ErrInvalidArgument, format!("tolerance {tol} outside (0, 1e-3)")));
        }
        let ground = Spectrum::new(n).eigenstate(1, 0.0);
        let tr = simulate(&op.0, &u.0, &ground, &[u.0.horizon], &OdeOptions::with_tol(tol)).map_err(core_err)?;
        for (j, c) in tr.last().coefficients.iter().enumerate() {
            *re.add(j) = c.re;
            *im.add(j) = c.im;
        }
        if !norm_drift.is_null() {
            *norm_drift = tr.norm_drift;
        }
        Ok(())
    })
}
