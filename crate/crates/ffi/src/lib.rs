//! C ABI over the `mcuq` library.
//!
//! Every entry point returns a [`McuqStatus`]. On failure the message is kept in
//! thread-local storage and can be copied out with [`mcuq_last_error`]. Chains and
//! models are opaque handles released with their `_free` functions. Matrices are
//! passed row-major. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mcuq::covariance::{default_gamma_tol, gamma_tilde, lambda_star, lambda_t_streaming};
use mcuq::harness::{run_experiment, ChainSpec, ExperimentConfig, ModelSpec};
use mcuq::linalg::{Mat, Vector};
use mcuq::markov::{ChainModel, DensityExponent};
use mcuq::mrp::{td_run, MrpModel, StepSchedule, TdConfig};
use mcuq::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McuqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    InvalidChain = 4,
    InvalidModel = 5,
    Numerical = 6,
    Config = 7,
    Io = 8,
    Json = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Validated Markov chain.
pub struct McuqChain(ChainModel);

/// Markov reward process with linear features.
pub struct McuqMrp(MrpModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn classify(err: &Error) -> McuqStatus {
    match err {
        Error::InvalidKernel(_)
        | Error::NotIrreducible
        | Error::Periodic { .. }
        | Error::SpectralGapViolation { .. }
        | Error::AbsoluteContinuityViolation { .. } => McuqStatus::InvalidChain,
        Error::DegenerateFeatures { .. } | Error::SingularA | Error::InvariantViolation(_) => {
            McuqStatus::InvalidModel
        }
        Error::InvalidInput(_) | Error::InvalidDelta(_) | Error::DegenerateGrid(_) => McuqStatus::InvalidInput,
        Error::Config(_) => McuqStatus::Config,
        Error::Io(_) | Error::Csv(_) => McuqStatus::Io,
        Error::Json(_) => McuqStatus::Json,
        Error::Experiment { source, .. } => classify(source),
        _ => McuqStatus::Numerical,
    }
}

struct Fail(McuqStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(classify(&e), e.to_string())
    }
}

type FfiResult = Result<(), Fail>;

fn guard(body: impl FnOnce() -> FfiResult) -> McuqStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => McuqStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            McuqStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(McuqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Fail(
            McuqStatus::BufferTooSmall,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> FfiResult {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn utf8<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(McuqStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, Fail> {
    serde_json::from_str(text).map_err(|e| Fail(McuqStatus::Json, e.to_string()))
}

fn copy_matrix(m: &Mat, out: &mut [f64]) {
    let c = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..c {
            out[i * c + j] = m[(i, j)];
        }
    }
}

fn check_finite(x: f64, what: &str) -> FfiResult {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Fail(McuqStatus::InvalidInput, format!("{what} must be finite")))
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mcuq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when there is no error.
#[no_mangle]
pub unsafe extern "C" fn mcuq_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Release a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn mcuq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build a chain from an `n × n` row-major kernel. A null `initial` starts at the
/// stationary law; otherwise `initial` holds `n` probabilities and the density
/// ratio is measured in the sup norm.
#[no_mangle]
pub unsafe extern "C" fn mcuq_chain_new(
    kernel: *const f64,
    n: usize,
    initial: *const f64,
    out: *mut *mut McuqChain,
) -> McuqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n == 0 {
            return Err(Fail(McuqStatus::InvalidInput, "chain needs at least one state".into()));
        }
        let k = Mat::from_row_slice(n, n, slice(kernel, n * n, "kernel")?);
        let chain = if initial.is_null() {
            ChainModel::stationary_start(k)?
        } else {
            let init = Vector::from_column_slice(slice(initial, n, "initial")?);
            ChainModel::new(k, init, DensityExponent::Infinite)?
        };
        *out = Box::into_raw(Box::new(McuqChain(chain)));
        Ok(())
    })
}

/// Build a chain from a JSON chain spec (`kernel`, optional `initial`,
/// `density_p`, `mixing`).
#[no_mangle]
pub unsafe extern "C" fn mcuq_chain_from_json(spec: *const c_char, out: *mut *mut McuqChain) -> McuqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec: ChainSpec = json(utf8(spec, "spec")?)?;
        *out = Box::into_raw(Box::new(McuqChain(spec.build()?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mcuq_chain_free(chain: *mut McuqChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

#[no_mangle]
pub unsafe extern "C" fn mcuq_chain_n_states(chain: *const McuqChain, out: *mut usize) -> McuqStatus {
    guard(|| write(out, deref(chain, "chain")?.0.n_states(), "out"))
}

/// Stationary distribution; `out` must hold `n_states` values.
#[no_mangle]
pub unsafe extern "C" fn mcuq_chain_stationary(chain: *const McuqChain, out: *mut f64, len: usize) -> McuqStatus {
    guard(|| {
        let c = &deref(chain, "chain")?.0;
        out_slice(out, len, c.n_states(), "out")?.copy_from_slice(c.stationary().as_slice());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mcuq_chain_spectral_expansion(chain: *const McuqChain, out: *mut f64) -> McuqStatus {
    guard(|| write(out, deref(chain, "chain")?.0.spectral_expansion(), "out"))
}

/// Mixing constants `(m, ρ)` with `sup_s d_TV(P^t(s, ·), μ) ≤ m ρ^t`.
#[no_mangle]
pub unsafe extern "C" fn mcuq_chain_mixing(chain: *const McuqChain, m: *mut f64, rho: *mut f64) -> McuqStatus {
    guard(|| {
        let mix = deref(chain, "chain")?.0.mixing();
        write(m, mix.m, "m")?;
        write(rho, mix.rho, "rho")
    })
}

#[no_mangle]
pub unsafe extern "C" fn mcuq_chain_mixing_time(chain: *const McuqChain, eps: f64, out: *mut usize) -> McuqStatus {
    guard(|| {
        let c = &deref(chain, "chain")?.0;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Fail(McuqStatus::InvalidInput, format!("eps must lie in (0, 1), got {eps}")));
        }
        write(out, c.mixing_time(eps)?, "out")
    })
}

/// Build an MRP on a copy of `chain` with `n × d` row-major features and `n`
/// rewards in `[0, 1]`.
#[no_mangle]
pub unsafe extern "C" fn mcuq_mrp_new(
    chain: *const McuqChain,
    features: *const f64,
    dim: usize,
    rewards: *const f64,
    gamma: f64,
    out: *mut *mut McuqMrp,
) -> McuqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let c = deref(chain, "chain")?.0.clone();
        let n = c.n_states();
        if dim == 0 {
            return Err(Fail(McuqStatus::InvalidInput, "feature dimension must be positive".into()));
        }
        let phi = Mat::from_row_slice(n, dim, slice(features, n * dim, "features")?);
        let r = Vector::from_column_slice(slice(rewards, n, "rewards")?);
        *out = Box::into_raw(Box::new(McuqMrp(MrpModel::new(c, phi, r, gamma)?)));
        Ok(())
    })
}

/// Build an MRP from a JSON model spec (`chain`, `features`, `rewards`, `gamma`).
#[no_mangle]
pub unsafe extern "C" fn mcuq_mrp_from_json(spec: *const c_char, out: *mut *mut McuqMrp) -> McuqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec: ModelSpec = json(utf8(spec, "spec")?)?;
        *out = Box::into_raw(Box::new(McuqMrp(spec.build()?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mcuq_mrp_free(mrp: *mut McuqMrp) {
    if !mrp.is_null() {
        drop(Box::from_raw(mrp));
    }
}

#[no_mangle]
pub unsafe extern "C" fn mcuq_mrp_dim(mrp: *const McuqMrp, out: *mut usize) -> McuqStatus {
    guard(|| write(out, deref(mrp, "mrp")?.0.dim(), "out"))
}

/// TD fixed point; `out` must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn mcuq_mrp_theta_star(mrp: *const McuqMrp, out: *mut f64, len: usize) -> McuqStatus {
    guard(|| {
        let m = &deref(mrp, "mrp")?.0;
        out_slice(out, len, m.dim(), "out")?.copy_from_slice(m.theta_star().as_slice());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mcuq_mrp_default_eta0(mrp: *const McuqMrp, out: *mut f64) -> McuqStatus {
    guard(|| write(out, deref(mrp, "mrp")?.0.default_eta0(), "out"))
}

/// Noise covariance `Γ̃` and limiting covariance `Λ̃* = A⁻¹ Γ̃ A⁻ᵀ`, each
/// `dim × dim` row-major. Either output may be null.
#[no_mangle]
pub unsafe extern "C" fn mcuq_mrp_covariance(
    mrp: *const McuqMrp,
    gamma_out: *mut f64,
    lambda_out: *mut f64,
    len: usize,
) -> McuqStatus {
    guard(|| {
        let m = &deref(mrp, "mrp")?.0;
        let d = m.dim();
        let (gamma, _) = gamma_tilde(m, default_gamma_tol(m))?;
        let lam = lambda_star(m.a_mat(), &gamma)?;
        if !gamma_out.is_null() {
            copy_matrix(&gamma, out_slice(gamma_out, len, d * d, "gamma_out")?);
        }
        if !lambda_out.is_null() {
            copy_matrix(&lam, out_slice(lambda_out, len, d * d, "lambda_out")?);
        }
        Ok(())
    })
}

/// Finite-horizon covariance `Λ̃_T` of `√T (θ̄_T − θ*)` for stepsizes
/// `η_t = eta0 t^{−alpha}`; `out` is `dim × dim` row-major.
#[no_mangle]
pub unsafe extern "C" fn mcuq_mrp_lambda_t(
    mrp: *const McuqMrp,
    eta0: f64,
    alpha: f64,
    horizon: u64,
    out: *mut f64,
    len: usize,
) -> McuqStatus {
    guard(|| {
        let m = &deref(mrp, "mrp")?.0;
        check_finite(eta0, "eta0")?;
        TdConfig::new(eta0, alpha, horizon.max(1)).validate(m)?;
        if horizon == 0 {
            return Err(Fail(McuqStatus::InvalidInput, "horizon must be positive".into()));
        }
        let d = m.dim();
        let dst = out_slice(out, len, d * d, "out")?;
        let (gamma, _) = gamma_tilde(m, default_gamma_tol(m))?;
        let lam = lambda_t_streaming(m.a_mat(), &gamma, &StepSchedule::new(eta0, alpha, horizon));
        copy_matrix(&lam, dst);
        Ok(())
    })
}

/// One averaged TD run of length `horizon` from `θ_0 = 0`. Writes `θ̄_T`
/// (`dim` values) and `‖θ̄_T − θ*‖`. Runs are reproducible in `(seed, stream_id)`.
#[no_mangle]
pub unsafe extern "C" fn mcuq_td_run(
    mrp: *const McuqMrp,
    eta0: f64,
    alpha: f64,
    horizon: u64,
    seed: u64,
    stream_id: u64,
    theta_bar: *mut f64,
    len: usize,
    error: *mut f64,
) -> McuqStatus {
    guard(|| {
        let m = &deref(mrp, "mrp")?.0;
        check_finite(eta0, "eta0")?;
        if horizon == 0 {
            return Err(Fail(McuqStatus::InvalidInput, "horizon must be positive".into()));
        }
        let dst = out_slice(theta_bar, len, m.dim(), "theta_bar")?;
        let run = td_run(m, &TdConfig::new(eta0, alpha, horizon), seed, stream_id)?;
        dst.copy_from_slice(&run.theta_bar);
        if !error.is_null() {
            error.write(run.error_bar);
        }
        Ok(())
    })
}

/// Run an experiment described by a JSON config, writing its files under the
/// config's output directory. On success `*report` receives the JSON report
/// (free with [`mcuq_string_free`]) and `*strict_violation` is set when a bound
/// with explicit constants was violated. Either output may be null.
#[no_mangle]
pub unsafe extern "C" fn mcuq_run_experiment(
    config: *const c_char,
    report: *mut *mut c_char,
    strict_violation: *mut bool,
) -> McuqStatus {
    guard(|| {
        let cfg: ExperimentConfig = json(utf8(config, "config")?)?;
        let rep = run_experiment(&cfg)?;
        if !strict_violation.is_null() {
            strict_violation.write(rep.strict_violation);
        }
        if !report.is_null() {
            let text = serde_json::to_string(&rep).map_err(|e| Fail(McuqStatus::Json, e.to_string()))?;
            let c = CString::new(text).map_err(|e| Fail(McuqStatus::Json, e.to_string()))?;
            report.write(c.into_raw());
        }
        Ok(())
    })
}
