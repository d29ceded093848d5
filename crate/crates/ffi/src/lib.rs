//! C ABI over the casbah sampler.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `_free` function. Every fallible call returns a
//! [`CasbahStatus`]; on failure [`casbah_last_error`] describes the most recent
//! error raised on the calling thread. Panics never cross the boundary.
//!
//! Stratum codes are `-1` negative, `0` dissociative, `1` positive.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use casbah::gibbs::GibbsConfig;
use casbah::model::{prior_dissociative_probability, Hyperparams, ObservedDataset};
use casbah::sim::{generate, ScenarioSpec};
use casbah::strata::{adjusted_rand_index, summarize, StrataSummary, StratumLabel};
use casbah::{run_chain, CasbahError, PosteriorDraws};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CasbahStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: CasbahStatus, msg: &str) -> CasbahStatus {
    set_error(msg);
    status
}

fn from_error(e: &CasbahError) -> CasbahStatus {
    let status = match e.exit_code() {
        3 => CasbahStatus::Numerical,
        _ => CasbahStatus::InvalidInput,
    };
    fail(status, &e.to_string())
}

fn guard<F: FnOnce() -> CasbahStatus>(f: F) -> CasbahStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(CasbahStatus::Panic, "internal panic"),
    }
}

/// Message of the last failed call on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn casbah_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn casbah_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version literal"),
    };
    VERSION.as_ptr()
}

/// Observed data: covariates, treatment, post-treatment variable and outcome.
pub struct CasbahDataset {
    inner: ObservedDataset,
}

/// A completed fit with its post-processed strata.
pub struct CasbahFit {
    data: ObservedDataset,
    draws: PosteriorDraws,
    summary: StrataSummary,
}

/// Sampler settings and priors. Obtain defaults from [`casbah_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CasbahFitOptions {
    pub truncation: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub tmvn_sweeps: usize,
    pub seed: u64,
    pub mu_eta: f64,
    pub sigma2_eta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub xi: f64,
    pub omega2: f64,
    pub mu_theta: f64,
    pub sigma2_theta: f64,
    pub mu_lambda: f64,
    pub sigma2_lambda: f64,
}

impl CasbahFitOptions {
    fn split(&self) -> (Hyperparams, GibbsConfig) {
        (
            Hyperparams {
                truncation: self.truncation,
                mu_eta: self.mu_eta,
                sigma2_eta: self.sigma2_eta,
                gamma1: self.gamma1,
                gamma2: self.gamma2,
                xi: self.xi,
                omega2: self.omega2,
                mu_theta: self.mu_theta,
                sigma2_theta: self.sigma2_theta,
                mu_lambda: self.mu_lambda,
                sigma2_lambda: self.sigma2_lambda,
            },
            GibbsConfig {
                iterations: self.iterations,
                burn_in: self.burn_in,
                thin: self.thin,
                tmvn_sweeps: self.tmvn_sweeps,
                seed: self.seed,
            },
        )
    }
}

#[no_mangle]
pub extern "C" fn casbah_fit_options_default() -> CasbahFitOptions {
    let h = Hyperparams::default();
    let g = GibbsConfig::default();
    CasbahFitOptions {
        truncation: h.truncation,
        iterations: g.iterations,
        burn_in: g.burn_in,
        thin: g.thin,
        tmvn_sweeps: g.tmvn_sweeps,
        seed: g.seed,
        mu_eta: h.mu_eta,
        sigma2_eta: h.sigma2_eta,
        gamma1: h.gamma1,
        gamma2: h.gamma2,
        xi: h.xi,
        omega2: h.omega2,
        mu_theta: h.mu_theta,
        sigma2_theta: h.sigma2_theta,
        mu_lambda: h.mu_lambda,
        sigma2_lambda: h.sigma2_lambda,
    }
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        return Some(&[]);
    }
    if ptr.is_null() {
        return None;
    }
    // SAFETY: non-null and valid for `len` reads per the caller contract.
    Some(unsafe { std::slice::from_raw_parts(ptr, len) })
}

/// Copies `n` units into a new dataset. `x` is row-major `n x p` (may be null
/// when `p == 0`); `treated` holds 0 or 1 per unit.
///
/// # Safety
/// Every non-null array must be valid for the stated number of reads and
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn casbah_dataset_new(
    n: usize,
    p: usize,
    x: *const f64,
    treated: *const u8,
    p_obs: *const f64,
    y_obs: *const f64,
    out: *mut *mut CasbahDataset,
) -> CasbahStatus {
    guard(|| {
        if out.is_null() {
            return fail(CasbahStatus::NullPointer, "out is null");
        }
        let Some(cells) = n.checked_mul(p) else {
            return fail(CasbahStatus::InvalidInput, "n * p overflows");
        };
        // SAFETY: lengths come from the caller contract.
        let (xs, ts, ps, ys) = unsafe { (slice(x, cells), slice(treated, n), slice(p_obs, n), slice(y_obs, n)) };
        let (Some(xs), Some(ts), Some(ps), Some(ys)) = (xs, ts, ps, ys) else {
            return fail(CasbahStatus::NullPointer, "data array is null");
        };
        if let Some(i) = ts.iter().position(|&t| t > 1) {
            return fail(CasbahStatus::InvalidInput, &format!("treated[{i}] must be 0 or 1"));
        }
        let xm = DMatrix::from_row_slice(n, p, xs);
        match ObservedDataset::new(xm, ts.iter().map(|&t| t == 1).collect(), ps.to_vec(), ys.to_vec()) {
            Ok(inner) => {
                // SAFETY: `out` checked non-null above.
                unsafe { *out = Box::into_raw(Box::new(CasbahDataset { inner })) };
                CasbahStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Draws a synthetic dataset from built-in scenario `scenario` (1 to 5).
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn casbah_dataset_simulate(
    scenario: u8,
    n: usize,
    seed: u64,
    out: *mut *mut CasbahDataset,
) -> CasbahStatus {
    guard(|| {
        if out.is_null() {
            return fail(CasbahStatus::NullPointer, "out is null");
        }
        let spec = match ScenarioSpec::scenario(scenario) {
            Ok(s) => s.with_n(n),
            Err(e) => return from_error(&e),
        };
        match generate(&spec, &mut ChaCha8Rng::seed_from_u64(seed)) {
            Ok((inner, _)) => {
                // SAFETY: `out` checked non-null above.
                unsafe { *out = Box::into_raw(Box::new(CasbahDataset { inner })) };
                CasbahStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Number of units; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn casbah_dataset_units(ds: *const CasbahDataset) -> usize {
    // SAFETY: caller contract.
    unsafe { ds.as_ref() }.map_or(0, |d| d.inner.n())
}

/// Number of covariates; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn casbah_dataset_covariates(ds: *const CasbahDataset) -> usize {
    // SAFETY: caller contract.
    unsafe { ds.as_ref() }.map_or(0, |d| d.inner.p())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn casbah_dataset_free(ds: *mut CasbahDataset) {
    if !ds.is_null() {
        // SAFETY: handle came from Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// Runs the sampler on a copy of `ds`. `options` may be null for defaults.
///
/// # Safety
/// `ds` must be a live dataset handle, `options` null or valid, `out` valid
/// for one write.
#[no_mangle]
pub unsafe extern "C" fn casbah_fit_run(
    ds: *const CasbahDataset,
    options: *const CasbahFitOptions,
    out: *mut *mut CasbahFit,
) -> CasbahStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(ds), Some(out)) = (unsafe { ds.as_ref() }, unsafe { out.as_mut() }) else {
            return fail(CasbahStatus::NullPointer, "dataset or out is null");
        };
        // SAFETY: caller contract.
        let opts = unsafe { options.as_ref() }.copied().unwrap_or_else(|| casbah_fit_options_default());
        let (hp, cfg) = opts.split();
        let data = ds.inner.clone();
        let draws = match run_chain(&data, &hp, &cfg) {
            Ok(d) => d,
            Err(e) => return from_error(&e),
        };
        let summary = match summarize(&draws, &data) {
            Ok(s) => s,
            Err(e) => return from_error(&e),
        };
        *out = Box::into_raw(Box::new(CasbahFit { data, draws, summary }));
        CasbahStatus::Ok
    })
}

/// Number of kept iterations; 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn casbah_fit_draws(fit: *const CasbahFit) -> usize {
    // SAFETY: caller contract.
    unsafe { fit.as_ref() }.map_or(0, |f| f.draws.len())
}

/// Writes the point-partition stratum code of every unit into `codes`.
///
/// # Safety
/// `fit` must be a live fit handle and `codes` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn casbah_fit_point_partition(fit: *const CasbahFit, codes: *mut i32, len: usize) -> CasbahStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(fit) = (unsafe { fit.as_ref() }) else {
            return fail(CasbahStatus::NullPointer, "fit is null");
        };
        let n = fit.data.n();
        if len < n {
            return fail(CasbahStatus::BufferTooSmall, &format!("need {n} slots, got {len}"));
        }
        if codes.is_null() && n > 0 {
            return fail(CasbahStatus::NullPointer, "codes is null");
        }
        for (i, s) in fit.summary.point_partition.iter().enumerate() {
            // SAFETY: i < n <= len.
            unsafe { *codes.add(i) = s.code() };
        }
        CasbahStatus::Ok
    })
}

/// Writes per-unit stratum probabilities, row-major `n x 3` in the order
/// negative, dissociative, positive.
///
/// # Safety
/// `fit` must be a live fit handle and `probs` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn casbah_fit_stratum_probabilities(fit: *const CasbahFit, probs: *mut f64, len: usize) -> CasbahStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(fit) = (unsafe { fit.as_ref() }) else {
            return fail(CasbahStatus::NullPointer, "fit is null");
        };
        let need = 3 * fit.data.n();
        if len < need {
            return fail(CasbahStatus::BufferTooSmall, &format!("need {need} slots, got {len}"));
        }
        if probs.is_null() && need > 0 {
            return fail(CasbahStatus::NullPointer, "probs is null");
        }
        for (i, row) in fit.summary.per_unit_probs.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                // SAFETY: 3i + k < need <= len.
                unsafe { *probs.add(3 * i + k) = v };
            }
        }
        CasbahStatus::Ok
    })
}

/// Posterior median and 90% equal-tailed interval. `present` is 0 when the
/// stratum never occurs, in which case the other fields are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CasbahInterval {
    pub present: i32,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

fn interval_of(s: Option<casbah::strata::IntervalSummary>) -> CasbahInterval {
    match s {
        Some(s) => CasbahInterval { present: 1, median: s.median, lower: s.lower, upper: s.upper },
        None => CasbahInterval { present: 0, median: f64::NAN, lower: f64::NAN, upper: f64::NAN },
    }
}

/// Principal causal effect of stratum `code`.
///
/// # Safety
/// `fit` must be a live fit handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn casbah_fit_effect(fit: *const CasbahFit, code: i32, out: *mut CasbahInterval) -> CasbahStatus {
    effect(fit, code, out, |f| &f.summary.tau)
}

/// Mean `P(1) - P(0)` within stratum `code`.
///
/// # Safety
/// `fit` must be a live fit handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn casbah_fit_post_treatment_gap(fit: *const CasbahFit, code: i32, out: *mut CasbahInterval) -> CasbahStatus {
    effect(fit, code, out, |f| &f.summary.gap)
}

fn effect(
    fit: *const CasbahFit,
    code: i32,
    out: *mut CasbahInterval,
    pick: fn(&CasbahFit) -> &casbah::strata::StratumEffects,
) -> CasbahStatus {
    guard(|| {
        // SAFETY: caller contract of the exported wrappers.
        let (Some(fit), Some(out)) = (unsafe { fit.as_ref() }, unsafe { out.as_mut() }) else {
            return fail(CasbahStatus::NullPointer, "fit or out is null");
        };
        let Some(s) = StratumLabel::from_code(code) else {
            return fail(CasbahStatus::InvalidInput, &format!("stratum code {code} not in -1/0/1"));
        };
        *out = interval_of(pick(fit).summary[s.index()]);
        CasbahStatus::Ok
    })
}

/// # Safety
/// `fit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn casbah_fit_free(fit: *mut CasbahFit) {
    if !fit.is_null() {
        // SAFETY: handle came from Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(fit) });
    }
}

/// Prior probability that both arms share a cluster, from the stick moments.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn casbah_prior_dissociative_probability(
    rho1: f64,
    rho2: f64,
    truncation: usize,
    out: *mut f64,
) -> CasbahStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(out) = (unsafe { out.as_mut() }) else {
            return fail(CasbahStatus::NullPointer, "out is null");
        };
        match prior_dissociative_probability(rho1, rho2, truncation) {
            Ok(p) => {
                *out = p;
                CasbahStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Adjusted Rand index of two integer labelings of length `n >= 2`.
///
/// # Safety
/// `a` and `b` must be valid for `n` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn casbah_adjusted_rand_index(a: *const i32, b: *const i32, n: usize, out: *mut f64) -> CasbahStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(a), Some(b), Some(out)) = (unsafe { slice(a, n) }, unsafe { slice(b, n) }, unsafe { out.as_mut() }) else {
            return fail(CasbahStatus::NullPointer, "argument is null");
        };
        match adjusted_rand_index(a, b) {
            Ok(v) => {
                *out = v;
                CasbahStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}
