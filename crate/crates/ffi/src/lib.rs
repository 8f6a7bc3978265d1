//! C ABI over the `rydberg-ode` core.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every entry point returns a
//! [`RydStatus`]; on failure a message is available from
//! [`ryd_last_error`] on the same thread until the next failing call.
//! Panics are caught and reported as [`RydStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rydberg_ode::checkpoint::Checkpoint;
use rydberg_ode::data::Encoder;
use rydberg_ode::export::AnalogProgram;
use rydberg_ode::grid::{AtomGrid, GridKind};
use rydberg_ode::hamiltonian::HamiltonianSpec;
use rydberg_ode::pulse::{Channel, PulseSchedule};
use rydberg_ode::simulator::{evolve, predict, rydberg_probabilities, EvolutionConfig};
use rydberg_ode::training::ModelParameters;
use rydberg_ode::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RydStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    ExportRefused = 5,
    BufferTooSmall = 6,
    Panic = 99,
}

/// Atom register handle.
pub struct RydGrid {
    inner: AtomGrid,
}

/// Trained classifier handle loaded from a checkpoint.
pub struct RydModel {
    params: ModelParameters,
    encoder: Encoder,
    evolution: EvolutionConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> RydStatus {
    match e {
        Error::Io { .. } => RydStatus::Io,
        Error::Parse { .. } => RydStatus::Parse,
        Error::ExportRefused(_) => RydStatus::ExportRefused,
        _ => RydStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (RydStatus, String)>) -> RydStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RydStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RydStatus::Panic
        }
    }
}

fn core<T>(r: Result<T, Error>) -> Result<T, (RydStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RydStatus, String) {
    (RydStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RydStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (RydStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (RydStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], (RydStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err((RydStatus::BufferTooSmall, format!("{what} holds {len} values, {need} needed")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ryd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ryd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Build a named register (`"chain"`, `"ring"`, `"square"`, `"triangle"`).
///
/// # Safety
/// `kind` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ryd_grid_new(kind: *const c_char, n_atoms: usize, spacing_um: f64, out: *mut *mut RydGrid) -> RydStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let kind: GridKind = core(str_arg(kind, "kind")?.parse())?;
        let inner = core(AtomGrid::build(kind, n_atoms, spacing_um))?;
        *out = Box::into_raw(Box::new(RydGrid { inner }));
        Ok(())
    })
}

/// # Safety
/// `grid` must come from [`ryd_grid_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ryd_grid_free(grid: *mut RydGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// `grid` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ryd_grid_n_atoms(grid: *const RydGrid, out: *mut usize) -> RydStatus {
    guard(|| {
        let g = grid.as_ref().ok_or_else(|| null("grid"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = g.inner.n_atoms();
        Ok(())
    })
}

/// Write `x0, y0, x1, y1, …` (µm) into `out`, which holds `len` doubles.
///
/// # Safety
/// `grid` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ryd_grid_positions(grid: *const RydGrid, out: *mut f64, len: usize) -> RydStatus {
    guard(|| {
        let g = grid.as_ref().ok_or_else(|| null("grid"))?;
        let pos = g.inner.positions();
        let buf = out_slice(out, len, 2 * pos.len(), "out")?;
        for (chunk, p) in buf.chunks_exact_mut(2).zip(pos) {
            chunk.copy_from_slice(p);
        }
        Ok(())
    })
}

/// Evolve `|0…0⟩` under constant Rabi frequency and global detuning
/// (rad/µs) for `duration_us`, writing each atom's Rydberg probability.
///
/// # Safety
/// `grid` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ryd_simulate_constant(
    grid: *const RydGrid,
    rabi: f64,
    detuning: f64,
    duration_us: f64,
    out: *mut f64,
    len: usize,
) -> RydStatus {
    guard(|| {
        let g = grid.as_ref().ok_or_else(|| null("grid"))?;
        let n = g.inner.n_atoms();
        let buf = out_slice(out, len, n, "out")?;
        let spec = core(HamiltonianSpec::assemble(
            g.inner.clone(),
            core(PulseSchedule::constant(Channel::Rabi, rabi, duration_us))?,
            core(PulseSchedule::constant(Channel::GlobalDetuning, detuning, duration_us))?,
            core(PulseSchedule::constant(Channel::LocalDetuning, 0.0, duration_us))?,
            vec![0.0; n],
        ))?;
        buf.copy_from_slice(&rydberg_probabilities(&evolve(&spec, &EvolutionConfig::default())));
        Ok(())
    })
}

/// Load a trained checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ryd_model_load(path: *const c_char, out: *mut *mut RydModel) -> RydStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ckpt = core(Checkpoint::load(Path::new(str_arg(path, "path")?)))?;
        let model = RydModel {
            params: core(ckpt.model())?,
            encoder: core(ckpt.encoder())?,
            evolution: ckpt.train_config.evolution,
        };
        *out = Box::into_raw(Box::new(model));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`ryd_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ryd_model_free(model: *mut RydModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Shape of a loaded model. Any output pointer may be null.
///
/// # Safety
/// `model` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn ryd_model_info(
    model: *const RydModel,
    n_atoms: *mut usize,
    n_intervals: *mut usize,
    n_trainable: *mut usize,
    n_features: *mut usize,
) -> RydStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        for (p, v) in [
            (n_atoms, m.params.n_atoms()),
            (n_intervals, m.params.n_intervals()),
            (n_trainable, m.params.n_trainable()),
            (n_features, m.encoder.pca.n_inputs()),
        ] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Soft label in `[0, 1]` for one raw feature vector.
///
/// # Safety
/// `model` must be a live handle, `features` must point to `n_features`
/// doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ryd_model_predict(
    model: *const RydModel,
    features: *const f64,
    n_features: usize,
    out: *mut f64,
) -> RydStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = slice_arg(features, n_features, "features")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let sample = core(m.encoder.encode(x, 0))?;
        let spec = core(m.params.realize(&sample))?.spec;
        *out = predict(&evolve(&spec, &m.evolution));
        Ok(())
    })
}

/// Analog program JSON for one raw feature vector. The string is owned by
/// the caller and must be released with [`ryd_string_free`].
///
/// # Safety
/// `model` must be a live handle, `features` must point to `n_features`
/// doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ryd_model_export(
    model: *const RydModel,
    features: *const f64,
    n_features: usize,
    out: *mut *mut c_char,
) -> RydStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = slice_arg(features, n_features, "features")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sample = core(m.encoder.encode(x, 0))?;
        let program = core(AnalogProgram::from_spec(&core(m.params.realize(&sample))?.spec))?;
        let s = CString::new(program.to_json()).map_err(|e| (RydStatus::Panic, e.to_string()))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ryd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
