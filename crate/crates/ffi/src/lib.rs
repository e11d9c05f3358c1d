//! C interface to `sardlab`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_build`
//! functions and released by the matching `*_free`. Every fallible call
//! returns a [`SardlabStatus`]; on failure the message is available from
//! [`sardlab_last_error_message`] on the same thread. Output arrays are
//! caller-allocated and their capacity is passed alongside; a short buffer
//! yields `SARDLAB_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use sardlab::carnot::{CarnotGroup, GroupSpec};
use sardlab::critical::singular_values;
use sardlab::endpoint::{integrate_numeric, EndpointPolyMap};
use sardlab::entropy::{entropy_dimension, PointCloud};
use sardlab::error::parse_json;
use sardlab::experiment::{self, sources, Experiment, ExperimentConfig};
use sardlab::surjectivity::{build_certificate, reach_target, CertificateOptions, SurjectivityCertificate};
use sardlab::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SardlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    /// Non-convergence, exhausted searches, infeasible budgets.
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Carnot group handle.
pub struct SardlabGroup {
    inner: CarnotGroup,
}

/// Symbolic Endpoint map restricted to a finite control subspace.
pub struct SardlabEndpointMap {
    inner: EndpointPolyMap,
}

/// Surjectivity certificate of a group's Endpoint map.
pub struct SardlabCertificate {
    inner: SurjectivityCertificate,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SardlabStatus {
    match e {
        Error::Parse { .. } | Error::Json(_) => SardlabStatus::Parse,
        Error::NoConvergence { .. } | Error::SearchExhausted { .. } | Error::BudgetInfeasible(_) | Error::BlockNorm { .. } => {
            SardlabStatus::Numerical
        }
        Error::Io(_) => SardlabStatus::Io,
        _ => SardlabStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Short { what: &'static str, need: usize, got: usize },
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

type FfiResult<T> = Result<T, Fail>;

/// Runs `body`, translating errors and panics into a status and message.
fn guard(body: impl FnOnce() -> FfiResult<()>) -> SardlabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SardlabStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SardlabStatus::NullPointer
        }
        Ok(Err(Fail::Short { what, need, got })) => {
            set_error(format!("buffer {what} holds {got} values, {need} needed"));
            SardlabStatus::BufferTooSmall
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SardlabStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Lib(Error::InvalidArgument(format!("{what} is not valid UTF-8"))))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &'static str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, cap: usize, need: usize, what: &'static str) -> FfiResult<&'a mut [T]> {
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    if cap < need {
        return Err(Fail::Short { what, need, got: cap });
    }
    Ok(slice::from_raw_parts_mut(p, need))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_scalar<T>(out: *mut T, value: T, what: &'static str) -> FfiResult<()> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    *out = value;
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sardlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sardlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn sardlab_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sardlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds `heisenberg`, `engel` or `free(k,s)`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sardlab_group_builtin(name: *const c_char, out: *mut *mut SardlabGroup) -> SardlabStatus {
    guard(|| {
        let g = CarnotGroup::builtin(text(name, "name")?)?;
        put(out, SardlabGroup { inner: g })
    })
}

/// Builds a group from its JSON description (rank, strata dimensions and
/// brackets of basis vectors, 1-based).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sardlab_group_from_json(json: *const c_char, out: *mut *mut SardlabGroup) -> SardlabStatus {
    guard(|| {
        let g = GroupSpec::from_json(text(json, "json")?)?.build()?;
        put(out, SardlabGroup { inner: g })
    })
}

/// # Safety
/// `g` must come from a group constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sardlab_group_free(g: *mut SardlabGroup) {
    free(g)
}

/// Topological dimension; 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live group handle.
#[no_mangle]
pub unsafe extern "C" fn sardlab_group_dim(g: *const SardlabGroup) -> usize {
    g.as_ref().map_or(0, |g| g.inner.dim())
}

/// Dimension of the first stratum; 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live group handle.
#[no_mangle]
pub unsafe extern "C" fn sardlab_group_rank(g: *const SardlabGroup) -> usize {
    g.as_ref().map_or(0, |g| g.inner.rank())
}

/// Nilpotency step; 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live group handle.
#[no_mangle]
pub unsafe extern "C" fn sardlab_group_step(g: *const SardlabGroup) -> usize {
    g.as_ref().map_or(0, |g| g.inner.step())
}

/// Writes the `dim` coordinate weights.
///
/// # Safety
/// `g` must be a live group handle and `out` hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn sardlab_group_weights(g: *const SardlabGroup, out: *mut u32, cap: usize) -> SardlabStatus {
    guard(|| {
        let g = &handle(g, "group")?.inner;
        output(out, cap, g.dim(), "weights")?.copy_from_slice(g.weights());
        Ok(())
    })
}

/// Dilation `δ_λ(x)`; `x` and `out` hold `dim` values.
///
/// # Safety
/// `g` must be a live group handle, `x` hold `len` values and `out` `cap`.
#[no_mangle]
pub unsafe extern "C" fn sardlab_group_dilate(
    g: *const SardlabGroup,
    lambda: f64,
    x: *const f64,
    len: usize,
    out: *mut f64,
    cap: usize,
) -> SardlabStatus {
    guard(|| {
        let g = &handle(g, "group")?.inner;
        let y = g.dilate(lambda, input(x, len, "x")?)?;
        output(out, cap, y.len(), "out")?.copy_from_slice(&y);
        Ok(())
    })
}

/// Group product `x · y` in exponential coordinates.
///
/// # Safety
/// `g` must be a live group handle, `x` and `y` hold `len` values and `out` `cap`.
#[no_mangle]
pub unsafe extern "C" fn sardlab_group_product(
    g: *const SardlabGroup,
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut f64,
    cap: usize,
) -> SardlabStatus {
    guard(|| {
        let g = &handle(g, "group")?.inner;
        let z = g.product(input(x, len, "x")?, input(y, len, "y")?)?;
        output(out, cap, z.len(), "out")?.copy_from_slice(&z);
        Ok(())
    })
}

/// Builds the Endpoint map of `g` on a control subspace named like the CLI's
/// `--basis`: `poly_degree(d)`, `piecewise_const(l)`, `piecewise_poly(l,d)`
/// or `piecewise_legendre(l,d)`.
///
/// # Safety
/// `g` must be a live group handle, `basis` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sardlab_endpoint_build(
    g: *const SardlabGroup,
    basis: *const c_char,
    out: *mut *mut SardlabEndpointMap,
) -> SardlabStatus {
    guard(|| {
        let g = &handle(g, "group")?.inner;
        let subspace = sources::resolve_basis(text(basis, "basis")?, g.rank())?;
        let map = EndpointPolyMap::build(g, &subspace)?;
        put(out, SardlabEndpointMap { inner: map })
    })
}

/// # Safety
/// `f` must come from [`sardlab_endpoint_build`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sardlab_endpoint_free(f: *mut SardlabEndpointMap) {
    free(f)
}

/// Number of subspace coordinates; 0 for NULL.
///
/// # Safety
/// `f` must be NULL or a live map handle.
#[no_mangle]
pub unsafe extern "C" fn sardlab_endpoint_nvars(f: *const SardlabEndpointMap) -> usize {
    f.as_ref().map_or(0, |f| f.inner.nvars())
}

/// Number of components (the group dimension); 0 for NULL.
///
/// # Safety
/// `f` must be NULL or a live map handle.
#[no_mangle]
pub unsafe extern "C" fn sardlab_endpoint_ncomps(f: *const SardlabEndpointMap) -> usize {
    f.as_ref().map_or(0, |f| f.inner.ncomps())
}

/// Total degree of each component.
///
/// # Safety
/// `f` must be a live map handle and `out` hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn sardlab_endpoint_degrees(f: *const SardlabEndpointMap, out: *mut u32, cap: usize) -> SardlabStatus {
    guard(|| {
        let d = handle(f, "map")?.inner.degrees();
        output(out, cap, d.len(), "out")?.copy_from_slice(&d);
        Ok(())
    })
}

/// Endpoint of the control with subspace coordinates `s`.
///
/// # Safety
/// `f` must be a live map handle, `s` hold `len` values and `out` `cap`.
#[no_mangle]
pub unsafe extern "C" fn sardlab_endpoint_eval(
    f: *const SardlabEndpointMap,
    s: *const f64,
    len: usize,
    out: *mut f64,
    cap: usize,
) -> SardlabStatus {
    guard(|| {
        let y = handle(f, "map")?.inner.eval(input(s, len, "s")?)?;
        output(out, cap, y.len(), "out")?.copy_from_slice(&y);
        Ok(())
    })
}

/// Jacobian at `s`, row-major `ncomps × nvars`.
///
/// # Safety
/// `f` must be a live map handle, `s` hold `len` values and `out` `cap`.
#[no_mangle]
pub unsafe extern "C" fn sardlab_endpoint_jacobian(
    f: *const SardlabEndpointMap,
    s: *const f64,
    len: usize,
    out: *mut f64,
    cap: usize,
) -> SardlabStatus {
    guard(|| {
        let j = handle(f, "map")?.inner.jacobian(input(s, len, "s")?)?;
        let dst = output(out, cap, j.nrows() * j.ncols(), "out")?;
        for r in 0..j.nrows() {
            for c in 0..j.ncols() {
                dst[r * j.ncols() + c] = j[(r, c)];
            }
        }
        Ok(())
    })
}

/// Endpoint of the same control by RK4 integration of the horizontal system.
///
/// # Safety
/// `f` must be a live map handle, `s` hold `len` values and `out` `cap`.
#[no_mangle]
pub unsafe extern "C" fn sardlab_endpoint_integrate(
    f: *const SardlabEndpointMap,
    s: *const f64,
    len: usize,
    steps: usize,
    out: *mut f64,
    cap: usize,
) -> SardlabStatus {
    guard(|| {
        let f = &handle(f, "map")?.inner;
        let u = f.subspace().control_at(input(s, len, "s")?)?;
        let y = integrate_numeric(f.group(), &u, steps)?;
        output(out, cap, y.len(), "out")?.copy_from_slice(&y);
        Ok(())
    })
}

/// Builds a surjectivity certificate with the group's default options.
///
/// # Safety
/// `g` must be a live group handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sardlab_certificate_build(
    g: *const SardlabGroup,
    degree_budget: usize,
    seed: u64,
    out: *mut *mut SardlabCertificate,
) -> SardlabStatus {
    guard(|| {
        let g = &handle(g, "group")?.inner;
        let mut opts = CertificateOptions::for_group(g);
        opts.seed.seed = seed;
        let cert = build_certificate(g, degree_budget, &opts)?;
        put(out, SardlabCertificate { inner: cert })
    })
}

/// # Safety
/// `c` must come from [`sardlab_certificate_build`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sardlab_certificate_free(c: *mut SardlabCertificate) {
    free(c)
}

/// Certified singular-value bound σ, control degree and covered ball radius.
///
/// # Safety
/// `c` must be a live certificate; each out pointer may be NULL to skip it.
#[no_mangle]
pub unsafe extern "C" fn sardlab_certificate_info(
    c: *const SardlabCertificate,
    sigma: *mut f64,
    degree: *mut usize,
    covered_ball: *mut f64,
) -> SardlabStatus {
    guard(|| {
        let c = &handle(c, "certificate")?.inner;
        if !sigma.is_null() {
            *sigma = c.sigma;
        }
        if !degree.is_null() {
            *degree = c.degree;
        }
        if !covered_ball.is_null() {
            *covered_ball = c.covered_ball;
        }
        Ok(())
    })
}

/// Certificate as JSON; release with [`sardlab_string_free`].
///
/// # Safety
/// `c` must be a live certificate and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sardlab_certificate_to_json(c: *const SardlabCertificate, out: *mut *mut c_char) -> SardlabStatus {
    guard(|| {
        let json = handle(c, "certificate")?.inner.to_json()?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = CString::new(json).map_err(|_| Error::InvalidArgument("JSON contains NUL".into()))?.into_raw();
        Ok(())
    })
}

/// Solves `End(u) = target`. On success writes the dilation factor λ, the
/// residual and, when `coords` is not NULL, the `dim` span coordinates of
/// the control `λ (q₀ + Σ s_i p_i)`.
///
/// # Safety
/// `c` must be a live certificate, `target` hold `len` values, `coords`
/// be NULL or hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn sardlab_certificate_reach(
    c: *const SardlabCertificate,
    target: *const f64,
    len: usize,
    lambda: *mut f64,
    residual: *mut f64,
    coords: *mut f64,
    cap: usize,
) -> SardlabStatus {
    guard(|| {
        let c = &handle(c, "certificate")?.inner;
        let r = reach_target(c, input(target, len, "target")?)?;
        put_scalar(lambda, r.lambda, "lambda")?;
        put_scalar(residual, r.residual, "residual")?;
        if !coords.is_null() {
            output(coords, cap, r.coords.len(), "coords")?.copy_from_slice(&r.coords);
        }
        Ok(())
    })
}

/// Singular values of a row-major `rows × cols` matrix, non-increasing,
/// padded with zeros to `rows` entries.
///
/// # Safety
/// `data` must hold `rows * cols` values and `out` `cap`.
#[no_mangle]
pub unsafe extern "C" fn sardlab_singular_values(data: *const f64, rows: usize, cols: usize, out: *mut f64, cap: usize) -> SardlabStatus {
    guard(|| {
        let m = nalgebra::DMatrix::from_row_slice(rows, cols, input(data, rows * cols, "data")?);
        let s = singular_values(&m)?.values;
        output(out, cap, s.len(), "out")?.copy_from_slice(&s);
        Ok(())
    })
}

/// Entropy dimension of `count` points of `ℝ^dim` (row-major) over a
/// geometric ε ladder; writes the fitted dimension and its half-width.
///
/// # Safety
/// `points` must hold `count * dim` values, `eps` `neps` values, and the
/// out pointers be valid.
#[no_mangle]
pub unsafe extern "C" fn sardlab_entropy_dimension(
    points: *const f64,
    count: usize,
    dim: usize,
    eps: *const f64,
    neps: usize,
    dimension: *mut f64,
    half_width: *mut f64,
) -> SardlabStatus {
    guard(|| {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()).into());
        }
        let flat = input(points, count * dim, "points")?;
        let cloud = PointCloud::new(dim, flat.chunks(dim).map(<[f64]>::to_vec).collect(), "ffi")?;
        let rep = entropy_dimension(&cloud, input(eps, neps, "eps")?)?;
        put_scalar(dimension, rep.dimension, "dimension")?;
        put_scalar(half_width, rep.half_width, "half_width")?;
        Ok(())
    })
}

/// Runs a named experiment (as the CLI subcommand of the same name) with a
/// JSON configuration, writing artifacts to its output directory. The
/// process-style exit code (0 all checks passed, 2 a check failed) goes to
/// `exit_code`.
///
/// # Safety
/// `name` and `config_json` must be NUL-terminated (the latter may be NULL
/// for defaults) and `exit_code` valid.
#[no_mangle]
pub unsafe extern "C" fn sardlab_run_experiment(name: *const c_char, config_json: *const c_char, exit_code: *mut i32) -> SardlabStatus {
    guard(|| {
        let exp = Experiment::parse(text(name, "name")?)?;
        let cfg: ExperimentConfig = if config_json.is_null() { ExperimentConfig::default() } else { parse_json(text(config_json, "config_json")?)? };
        let outcome = experiment::run(exp, &cfg)?;
        put_scalar(exit_code, outcome.exit_code(), "exit_code")
    })
}
