//! C ABI for the `u1bethe` engine.
//!
//! Models and chains are opaque heap handles created by `*_new` functions and
//! released with the matching `*_free`. Every fallible function returns a
//! [`BetheStatus`]; on failure a description is available from
//! [`bethe_last_error_message`] on the calling thread. Complex numbers cross
//! the boundary as [`BetheComplex`] pairs of doubles. Panics never unwind into
//! the caller; they are reported as [`BetheStatus::Panic`].
//!
//! The header `include/u1bethe.h` is generated by cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;
use u1bethe::amplitudes::Amplitudes;
use u1bethe::bethe::{self, SolveOptions};
use u1bethe::chain::ChainContext;
use u1bethe::weights::{self, ModelSpec};
use u1bethe::BetheError;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetheStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument or option has an unusable value, or a buffer is too small.
    InvalidArgument = 2,
    /// A weight was evaluated at a pole or outside its domain.
    ParameterDomain = 3,
    /// A denominator or pivot vanished.
    Singularity = 4,
    /// An index lies outside its admissible range.
    IndexOutOfRange = 5,
    /// The requested particle sector is empty.
    EmptySector = 6,
    /// Newton iteration did not converge or its Jacobian was singular.
    NoConvergence = 7,
    /// The Hilbert space exceeds the dense limit.
    DimensionTooLarge = 8,
    /// A table model lacks the requested grid point.
    UnknownGridPoint = 9,
    /// Any other engine error.
    Internal = 10,
    /// A panic was caught at the boundary.
    Panic = 11,
}

/// Complex number as two doubles.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BetheComplex {
    /// Real part.
    pub re: f64,
    /// Imaginary part.
    pub im: f64,
}

impl From<BetheComplex> for Complex64 {
    fn from(z: BetheComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl From<Complex64> for BetheComplex {
    fn from(z: Complex64) -> Self {
        BetheComplex { re: z.re, im: z.im }
    }
}

/// Opaque weight model.
pub struct BetheModel {
    inner: ModelSpec,
}

/// Opaque finite chain with its model.
pub struct BetheChain {
    inner: ChainContext,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn status_of(err: &BetheError) -> BetheStatus {
    match err {
        BetheError::UnknownGridPoint { .. } => BetheStatus::UnknownGridPoint,
        BetheError::ParameterDomain(_) => BetheStatus::ParameterDomain,
        BetheError::Singularity(_) | BetheError::DegenerateParameters { .. } => BetheStatus::Singularity,
        BetheError::IndexOutOfRange(_) | BetheError::IceRuleViolation { .. } => BetheStatus::IndexOutOfRange,
        BetheError::EmptySector { .. } => BetheStatus::EmptySector,
        BetheError::NoConvergence { .. } | BetheError::SingularJacobian => BetheStatus::NoConvergence,
        BetheError::DimensionTooLarge { .. } => BetheStatus::DimensionTooLarge,
        BetheError::InvalidOption(_) => BetheStatus::InvalidArgument,
        BetheError::Config { .. } | BetheError::Io(_) => BetheStatus::Internal,
    }
}

enum Failure {
    Status(BetheStatus, String),
    Engine(BetheError),
}

impl From<BetheError> for Failure {
    fn from(err: BetheError) -> Self {
        Failure::Engine(err)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(BetheStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: String) -> Failure {
    Failure::Status(BetheStatus::InvalidArgument, message)
}

/// Runs `body`, converting errors and panics into a status and the thread's last error.
fn guard<F>(body: F) -> BetheStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            BetheStatus::Ok
        }
        Ok(Err(Failure::Status(status, message))) => {
            set_last_error(&message);
            status
        }
        Ok(Err(Failure::Engine(err))) => {
            set_last_error(&err.to_string());
            status_of(&err)
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(&format!("panic: {message}"));
            BetheStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(model: *const BetheModel) -> Result<&'a ModelSpec, Failure> {
    model.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn chain_ref<'a>(chain: *const BetheChain) -> Result<&'a ChainContext, Failure> {
    chain.as_ref().map(|c| &c.inner).ok_or_else(|| null("chain"))
}

unsafe fn roots_from(roots: *const BetheComplex, n: usize) -> Result<Vec<Complex64>, Failure> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if roots.is_null() {
        return Err(null("roots"));
    }
    Ok(std::slice::from_raw_parts(roots, n).iter().map(|&z| z.into()).collect())
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn store_model(out: *mut *mut BetheModel, model: ModelSpec) -> Result<(), Failure> {
    write_out(out, Box::into_raw(Box::new(BetheModel { inner: model })))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bethe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, empty after a success.
///
/// The pointer stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn bethe_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Creates the six-vertex model with anisotropy `eta`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn bethe_model_six_vertex(eta: BetheComplex, out: *mut *mut BetheModel) -> BetheStatus {
    guard(|| store_model(out, ModelSpec::six_vertex(eta.into())?))
}

/// Creates the spin-(n−1)/2 trigonometric model on `n` states with anisotropy `eta`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn bethe_model_higher_spin_xxz(n: usize, eta: BetheComplex, out: *mut *mut BetheModel) -> BetheStatus {
    guard(|| store_model(out, ModelSpec::higher_spin_xxz(n, eta.into())?))
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must be null or a handle from a model constructor that was not freed before.
#[no_mangle]
pub unsafe extern "C" fn bethe_model_free(model: *mut BetheModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of states per site, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn bethe_model_states(model: *const BetheModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n())
}

/// Writes the N⁴ normalized weights R(λ,μ)_{a,b}^{c,d} to `out`, entry
/// `(a,b,c,d)` at offset `((a−1)N + b−1)·N² + (c−1)N + d−1`.
///
/// # Safety
/// `model` must be a live handle and `out` must hold `out_len` elements.
#[no_mangle]
pub unsafe extern "C" fn bethe_eval_r(
    model: *const BetheModel,
    lambda: BetheComplex,
    mu: BetheComplex,
    out: *mut BetheComplex,
    out_len: usize,
) -> BetheStatus {
    guard(|| {
        let model = model_ref(model)?;
        let n = model.n();
        let needed = n.pow(4);
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len < needed {
            return Err(invalid(format!("buffer of {out_len} entries, {needed} needed")));
        }
        let dense = model.eval_r(lambda.into(), mu.into())?.to_dense();
        let buf = std::slice::from_raw_parts_mut(out, needed);
        for row in 0..n * n {
            for col in 0..n * n {
                buf[row * n * n + col] = dense[(row, col)].into();
            }
        }
        Ok(())
    })
}

/// Relative max-abs Yang–Baxter residual at `(l1, l2, l3)`.
///
/// # Safety
/// `model` must be a live handle and `residual` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bethe_check_yang_baxter(
    model: *const BetheModel,
    l1: BetheComplex,
    l2: BetheComplex,
    l3: BetheComplex,
    residual: *mut f64,
) -> BetheStatus {
    guard(|| {
        let r = weights::check_yang_baxter(model_ref(model)?, l1.into(), l2.into(), l3.into())?;
        write_out(residual, r.residual)
    })
}

/// Max-abs unitarity residual at `(lambda, mu)`.
///
/// # Safety
/// `model` must be a live handle and `residual` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bethe_check_unitarity(
    model: *const BetheModel,
    lambda: BetheComplex,
    mu: BetheComplex,
    residual: *mut f64,
) -> BetheStatus {
    guard(|| {
        let r = weights::check_unitarity(model_ref(model)?, lambda.into(), mu.into())?;
        write_out(residual, r.residual)
    })
}

/// Creates a chain of `length` sites; `inhomogeneities` may be null for the
/// homogeneous chain, otherwise it must hold `length` values. The model is copied.
///
/// # Safety
/// `model` must be a live handle, `inhomogeneities` null or valid for `length`
/// elements and `out` valid for one handle.
#[no_mangle]
pub unsafe extern "C" fn bethe_chain_new(
    model: *const BetheModel,
    length: usize,
    inhomogeneities: *const BetheComplex,
    out: *mut *mut BetheChain,
) -> BetheStatus {
    guard(|| {
        let model = model_ref(model)?.clone();
        let inh = if inhomogeneities.is_null() {
            None
        } else {
            Some(std::slice::from_raw_parts(inhomogeneities, length).iter().map(|&z| z.into()).collect())
        };
        let ctx = ChainContext::new(model, length, inh)?;
        write_out(out, Box::into_raw(Box::new(BetheChain { inner: ctx })))
    })
}

/// Releases a chain; null is ignored.
///
/// # Safety
/// `chain` must be null or a handle from [`bethe_chain_new`] that was not freed before.
#[no_mangle]
pub unsafe extern "C" fn bethe_chain_free(chain: *mut BetheChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Hilbert-space dimension N^L, or 0 for a null handle.
///
/// # Safety
/// `chain` must be null or a live chain handle.
#[no_mangle]
pub unsafe extern "C" fn bethe_chain_dim(chain: *const BetheChain) -> usize {
    chain.as_ref().map_or(0, |c| c.inner.dim())
}

/// Transfer-matrix eigenvalue Λ_n(λ) of the Bethe state with `n` roots.
///
/// # Safety
/// `chain` must be a live handle, `roots` valid for `n` elements and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bethe_eigenvalue(
    chain: *const BetheChain,
    lambda: BetheComplex,
    roots: *const BetheComplex,
    n: usize,
    out: *mut BetheComplex,
) -> BetheStatus {
    guard(|| {
        let ctx = chain_ref(chain)?;
        let roots = roots_from(roots, n)?;
        let amp = Amplitudes::new(ctx.model());
        let value = bethe::eigenvalue(ctx, &amp, lambda.into(), &roots)?;
        write_out(out, value.into())
    })
}

/// Max-abs residual of the Bethe equations at `roots`.
///
/// # Safety
/// `chain` must be a live handle, `roots` valid for `n` elements and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bethe_bae_residual(
    chain: *const BetheChain,
    roots: *const BetheComplex,
    n: usize,
    out: *mut f64,
) -> BetheStatus {
    guard(|| {
        let ctx = chain_ref(chain)?;
        let roots = roots_from(roots, n)?;
        let amp = Amplitudes::new(ctx.model());
        let res = bethe::bae_residuals(ctx, &amp, &roots)?;
        write_out(out, res.iter().fold(0.0_f64, |m, r| m.max(r.norm())))
    })
}

/// Writes the Bethe vector |Φ_n⟩ in the site-1-slowest product basis.
///
/// # Safety
/// `chain` must be a live handle, `roots` valid for `n` elements and `out`
/// valid for `out_len` elements.
#[no_mangle]
pub unsafe extern "C" fn bethe_build_vector(
    chain: *const BetheChain,
    roots: *const BetheComplex,
    n: usize,
    out: *mut BetheComplex,
    out_len: usize,
) -> BetheStatus {
    guard(|| {
        let ctx = chain_ref(chain)?;
        let roots = roots_from(roots, n)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len < ctx.dim() {
            return Err(invalid(format!("buffer of {out_len} entries, {} needed", ctx.dim())));
        }
        let amp = Amplitudes::new(ctx.model());
        let state = bethe::build_bethe_vector(ctx, &amp, &roots)?;
        let buf = std::slice::from_raw_parts_mut(out, ctx.dim());
        for (slot, z) in buf.iter_mut().zip(state.vector.amplitudes.iter()) {
            *slot = (*z).into();
        }
        Ok(())
    })
}

/// Relative eigenstate residual ‖T(λ)Φ − ΛΦ‖ / ‖Φ‖ in the max-abs norm.
///
/// # Safety
/// `chain` must be a live handle, `roots` valid for `n` elements and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bethe_eigenstate_residual(
    chain: *const BetheChain,
    lambda: BetheComplex,
    roots: *const BetheComplex,
    n: usize,
    out: *mut f64,
) -> BetheStatus {
    guard(|| {
        let ctx = chain_ref(chain)?;
        let roots = roots_from(roots, n)?;
        let amp = Amplitudes::new(ctx.model());
        write_out(out, bethe::eigenstate_residual(ctx, &amp, lambda.into(), &roots)?)
    })
}

/// Solves the Bethe equations for `n` roots and keeps the physical root sets.
///
/// The number of sets found is written to `found`. Up to `capacity` sets are
/// written to `out_roots` as consecutive groups of `n` values; a smaller
/// capacity truncates the output without error. `tol` ≤ 0 selects the default
/// tolerance 1e−12.
///
/// # Safety
/// `chain` must be a live handle, `out_roots` valid for `capacity · n`
/// elements (or null when `capacity` is 0) and `found` valid.
#[no_mangle]
pub unsafe extern "C" fn bethe_solve_bae(
    chain: *const BetheChain,
    n: usize,
    tol: f64,
    seed: u64,
    out_roots: *mut BetheComplex,
    capacity: usize,
    found: *mut usize,
) -> BetheStatus {
    guard(|| {
        let ctx = chain_ref(chain)?;
        if found.is_null() {
            return Err(null("found"));
        }
        if capacity > 0 && n > 0 && out_roots.is_null() {
            return Err(null("out_roots"));
        }
        let mut opts = SolveOptions { rng_seed: seed, ..SolveOptions::default() };
        if tol > 0.0 {
            opts.tol = tol;
        }
        let sets = bethe::physical_solutions(ctx, bethe::solve_bae(ctx, n, None, &opts)?)?;
        let kept = sets.len().min(capacity);
        if n > 0 && kept > 0 {
            let buf = std::slice::from_raw_parts_mut(out_roots, kept * n);
            for (k, set) in sets.iter().take(kept).enumerate() {
                for (j, &z) in set.roots.iter().enumerate() {
                    buf[k * n + j] = z.into();
                }
            }
        }
        found.write(sets.len());
        Ok(())
    })
}
