//! C ABI over `cpkernel`.
//!
//! Kernels and map sets are opaque handles owned by the caller and released
//! with the matching `*_free`. Complex matrices cross the boundary as
//! row-major arrays of interleaved `(re, im)` doubles. Every entry point
//! returns a [`CpkStatus`]; on failure [`cpk_last_error_message`] describes
//! the most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cpkernel::cli::runner::{run_scenario_json, RunOptions};
use cpkernel::randomdyn::{self, IIDModel, LogNormMode};
use cpkernel::{channels, kernels, model, CPMap, ComplexMatrix, Error, LiftSet, MapSet, PDKernel, Word, C64};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpkStatus {
    Ok = 0,
    NullPointer = 1,
    Invalid = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    NotPsd = 5,
    UnknownLabel = 6,
    UnknownPoint = 7,
    TooManyStrings = 8,
    LiftInadmissible = 9,
    CertificateFailed = 10,
    NotConverged = 11,
    NotDominated = 12,
    NotSubunital = 13,
    PreconditionFailed = 14,
    BadDistribution = 15,
    Underflow = 16,
    CheckFailed = 17,
    Panic = 18,
}

impl From<&Error> for CpkStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch(_) => CpkStatus::DimensionMismatch,
            Error::Numerical(_) => CpkStatus::Numerical,
            Error::NotPsd { .. } => CpkStatus::NotPsd,
            Error::UnknownLabel(_) => CpkStatus::UnknownLabel,
            Error::UnknownPoint(_) => CpkStatus::UnknownPoint,
            Error::TooManyStrings { .. } => CpkStatus::TooManyStrings,
            Error::LiftInadmissible { .. } => CpkStatus::LiftInadmissible,
            Error::CertificateFailed(_) => CpkStatus::CertificateFailed,
            Error::NotConverged(_) => CpkStatus::NotConverged,
            Error::NotDominated(_) => CpkStatus::NotDominated,
            Error::NotSubunital(_) => CpkStatus::NotSubunital,
            Error::PreconditionFailed(_) => CpkStatus::PreconditionFailed,
            Error::BadDistribution(_) => CpkStatus::BadDistribution,
            Error::Underflow { .. } => CpkStatus::Underflow,
            Error::CheckFailed(_) => CpkStatus::CheckFailed,
            Error::Invalid(_) => CpkStatus::Invalid,
        }
    }
}

/// Opaque operator-valued kernel.
pub struct CpkKernel(PDKernel);

/// Opaque set of labelled CP maps.
pub struct CpkMaps(MapSet);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult = Result<(), Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> CpkStatus {
    set_error(String::new());
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CpkStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CpkStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(format!("{}: {e}", e.code()));
            CpkStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CpkStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn matrix(data: *const f64, rows: usize, cols: usize, what: &'static str) -> Result<ComplexMatrix, Failure> {
    if data.is_null() {
        return Err(Failure::Null(what));
    }
    let raw = std::slice::from_raw_parts(data, 2 * rows * cols);
    let entries = raw.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
    Ok(ComplexMatrix::new(rows, cols, entries)?)
}

unsafe fn label(s: *const c_char, what: &'static str) -> Result<String, Failure> {
    if s.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::Lib(Error::Invalid(format!("{what} is not UTF-8"))))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> FfiResult {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cpk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a kernel on points `0..n` from its `(n·d)×(n·d)` Gram matrix.
///
/// # Safety
/// `gram` must hold `2·(n·d)²` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpk_kernel_new(n: usize, d: usize, gram: *const f64, out: *mut *mut CpkKernel) -> CpkStatus {
    guard(|| {
        let g = matrix(gram, n * d, n * d, "gram")?;
        let k = PDKernel::from_gram(n, d, &g)?;
        put(out, Box::into_raw(Box::new(CpkKernel(k))), "out")
    })
}

/// # Safety
/// `k` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cpk_kernel_free(k: *mut CpkKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cpk_kernel_dims(k: *const CpkKernel, n: *mut usize, d: *mut usize) -> CpkStatus {
    guard(|| {
        let k = &get(k, "kernel")?.0;
        put(n, k.n(), "n")?;
        put(d, k.fiber_dim(), "d")
    })
}

/// Checks hermiticity, positivity and the blockwise Cauchy–Schwarz bound.
/// `passed` is set to 1 when all hold; `min_eig` to the Gram's least eigenvalue.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cpk_kernel_validate(
    k: *const CpkKernel,
    tol: f64,
    passed: *mut c_int,
    min_eig: *mut f64,
) -> CpkStatus {
    guard(|| {
        let r = kernels::validate(&get(k, "kernel")?.0, tol)?;
        put(passed, c_int::from(r.pass), "passed")?;
        put(min_eig, r.min_eig, "min_eig")
    })
}

/// Copies block `K(i, j)` into `out` (`2·d²` doubles).
///
/// # Safety
/// Pointers must be valid and `out` large enough.
#[no_mangle]
pub unsafe extern "C" fn cpk_kernel_block(k: *const CpkKernel, i: usize, j: usize, out: *mut f64) -> CpkStatus {
    guard(|| {
        let k = &get(k, "kernel")?.0;
        if i >= k.n() || j >= k.n() {
            return Err(Error::UnknownPoint(format!("index ({i}, {j}) on {} points", k.n())).into());
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let b = k.block(i, j);
        let dst = std::slice::from_raw_parts_mut(out, 2 * b.rows() * b.cols());
        for (c, z) in dst.chunks_exact_mut(2).zip(b.as_slice()) {
            c[0] = z.re;
            c[1] = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpk_maps_new(out: *mut *mut CpkMaps) -> CpkStatus {
    guard(|| put(out, Box::into_raw(Box::new(CpkMaps(MapSet::new([])))), "out"))
}

/// Adds (or replaces) the map `label` with `count` Kraus operators of size
/// `d×d`, stored back to back in `kraus`.
///
/// # Safety
/// `kraus` must hold `2·count·d²` doubles; `label` must be a C string.
#[no_mangle]
pub unsafe extern "C" fn cpk_maps_add(
    maps: *mut CpkMaps,
    label: *const c_char,
    d: usize,
    count: usize,
    kraus: *const f64,
) -> CpkStatus {
    guard(|| {
        let maps = maps.as_mut().ok_or(Failure::Null("maps"))?;
        let name = self::label(label, "label")?;
        let ops = (0..count)
            .map(|i| matrix(kraus.wrapping_add(2 * d * d * i), d, d, "kraus"))
            .collect::<Result<Vec<_>, _>>()?;
        maps.0.insert(CPMap::new(name, ops)?);
        Ok(())
    })
}

/// # Safety
/// `maps` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cpk_maps_free(maps: *mut CpkMaps) {
    if !maps.is_null() {
        drop(Box::from_raw(maps));
    }
}

unsafe fn word(labels: *const *const c_char, len: usize) -> Result<Word, Failure> {
    if len == 0 {
        return Ok(Word::new(Vec::<String>::new()));
    }
    if labels.is_null() {
        return Err(Failure::Null("word"));
    }
    let parts = std::slice::from_raw_parts(labels, len)
        .iter()
        .map(|s| label(*s, "word letter"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Word::new(parts))
}

/// `K_w` for the word `labels[0] … labels[len-1]`; the last letter acts first.
///
/// # Safety
/// `labels` must hold `len` C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpk_iterate_kernel(
    k: *const CpkKernel,
    maps: *const CpkMaps,
    labels: *const *const c_char,
    len: usize,
    out: *mut *mut CpkKernel,
) -> CpkStatus {
    guard(|| {
        let k = &get(k, "kernel")?.0;
        let maps = &get(maps, "maps")?.0;
        let w = word(labels, len)?;
        let kw = channels::iterate_kernel(k, &w, maps)?;
        put(out, Box::into_raw(Box::new(CpkKernel(kw))), "out")
    })
}

fn lifts(k: &PDKernel, maps: &MapSet) -> Result<LiftSet, Error> {
    let kf = kernels::kolmogorov(k, cpkernel::linalg::DEFAULT_RANK_TOL)?;
    LiftSet::new(&kf, maps, None)
}

/// Contractivity certificate: `contractive` is 1 when every lift is
/// admissible with `d_norm ≤ 1 + tol`; `max_d_norm` is the largest `d_norm`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cpk_certify(
    k: *const CpkKernel,
    maps: *const CpkMaps,
    tol: f64,
    contractive: *mut c_int,
    max_d_norm: *mut f64,
) -> CpkStatus {
    guard(|| {
        let l = lifts(&get(k, "kernel")?.0, &get(maps, "maps")?.0)?;
        let cert = model::certify(&l, tol);
        let top = cert.labels.iter().map(|c| c.d_norm).fold(0.0, f64::max);
        put(contractive, c_int::from(cert.model_contractive), "contractive")?;
        put(max_d_norm, top, "max_d_norm")
    })
}

/// Top Lyapunov exponent of the uniform i.i.d. model over all labels,
/// estimated from `trials` paths of length `n`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cpk_lyapunov(
    k: *const CpkKernel,
    maps: *const CpkMaps,
    n: usize,
    trials: usize,
    seed: u64,
    lambda_hat: *mut f64,
    std_err: *mut f64,
) -> CpkStatus {
    guard(|| {
        let maps = &get(maps, "maps")?.0;
        let l = lifts(&get(k, "kernel")?.0, maps)?;
        let m = IIDModel::uniform(maps.labels())?;
        let est = randomdyn::lyapunov_estimate(&m, &l, n, trials, seed, LogNormMode::Renormalized)?;
        put(lambda_hat, est.lambda_hat, "lambda_hat")?;
        put(std_err, est.stderr, "std_err")
    })
}

/// Runs a scenario document and returns the JSON report in `report`
/// (release with [`cpk_string_free`]) and the run's exit code. The status
/// is `Ok` whenever a report was produced, even for a failing run.
///
/// # Safety
/// `json` must be a C string; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpk_run_scenario_json(
    json: *const c_char,
    report: *mut *mut c_char,
    exit_code: *mut c_int,
) -> CpkStatus {
    guard(|| {
        let text = label(json, "json")?;
        let out = run_scenario_json(&text, &RunOptions::default());
        let s = CString::new(out.report.to_json()).map_err(|e| Error::Invalid(e.to_string()))?;
        put(exit_code, out.exit_code(), "exit_code")?;
        put(report, s.into_raw(), "report")
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cpk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_follows_error_code() {
        let e = Error::PreconditionFailed("not contractive".into());
        assert_eq!(CpkStatus::from(&e), CpkStatus::PreconditionFailed);
        assert_eq!(guard(|| Err(Failure::Lib(e))), CpkStatus::PreconditionFailed);
        let msg = LAST_ERROR.with(|m| m.borrow().to_string_lossy().into_owned());
        assert!(msg.starts_with("ErrPreconditionFailed"), "{msg}");
    }

    #[test]
    fn panics_are_contained() {
        assert_eq!(guard(|| panic!("boom")), CpkStatus::Panic);
    }
}
