//! C interface to the chb-core simulator.
//!
//! A simulation is an opaque handle created by `chb_simulation_new` or
//! `chb_simulation_from_toml` and released with `chb_simulation_free`. Every
//! fallible call returns a [`ChbStatus`]; the message of the last failure on
//! the calling thread is available from `chb_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use chb_core::diagnostics::MAX_MODE;
use chb_core::output::write_vtk;
use chb_core::{Config, Error, Parameters, Simulation};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Io = 5,
    Panic = 6,
}

/// Nodal field selector for `chb_simulation_copy_field`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChbField {
    Phi = 0,
    Mu = 1,
    Sigma = 2,
    Pressure = 3,
}

/// Number of Fourier amplitudes in [`ChbDiagnostics`].
pub const CHB_NUM_MODES: usize = 13;

const _: () = assert!(CHB_NUM_MODES == MAX_MODE + 1);

/// Scalar diagnostics of the current state.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ChbDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub tumour_area: f64,
    pub energy: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub v_max: f64,
    pub mean_radius: f64,
    pub modes: [f64; CHB_NUM_MODES],
    pub flow_iters: usize,
    pub vi_iters: usize,
    pub nutrient_iters: usize,
}

/// Opaque simulation handle.
pub struct ChbSimulation {
    inner: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ChbStatus {
    match e {
        Error::InvalidArgument(_) => ChbStatus::InvalidArgument,
        Error::Config(_) => ChbStatus::Config,
        Error::SingularOperator(_) | Error::NotConverged { .. } => ChbStatus::Solver,
        Error::Io { .. } => ChbStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (ChbStatus, String)>) -> ChbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("panic: {msg}"));
            ChbStatus::Panic
        }
    }
}

fn core(e: Error) -> (ChbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ChbStatus, String) {
    (ChbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn sim_ref<'a>(sim: *const ChbSimulation) -> Result<&'a ChbSimulation, (ChbStatus, String)> {
    sim.as_ref().ok_or_else(|| null("simulation handle"))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, (ChbStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (ChbStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn create(params: Parameters, out: *mut *mut ChbSimulation) -> Result<(), (ChbStatus, String)> {
    let inner = Simulation::new(params).map_err(core)?;
    let handle = Box::into_raw(Box::new(ChbSimulation { inner }));
    // SAFETY: `out` was checked for null by the callers.
    unsafe { *out = handle };
    Ok(())
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn chb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Creates a simulation with the desk-scale default parameters.
///
/// # Safety
/// `out` must be null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn chb_simulation_new(out: *mut *mut ChbSimulation) -> ChbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        create(Parameters::default(), out)
    })
}

/// Creates a simulation from a TOML configuration text.
///
/// # Safety
/// `toml` must be null or a NUL-terminated string; `out` must be null or
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn chb_simulation_from_toml(toml: *const c_char, out: *mut *mut ChbSimulation) -> ChbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(toml, "toml")?;
        let cfg = Config::from_toml_str(text).map_err(core)?;
        create(cfg.params, out)
    })
}

/// Releases a simulation. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn chb_simulation_free(sim: *mut ChbSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances by `steps` time steps, stopping at the first failure. The state
/// is that of the last successful step.
///
/// # Safety
/// `sim` must be null or a live handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn chb_simulation_advance(sim: *mut ChbSimulation, steps: usize) -> ChbStatus {
    guard(|| {
        let s = sim.as_mut().ok_or_else(|| null("simulation handle"))?;
        for _ in 0..steps {
            s.inner.advance().map_err(core)?;
        }
        Ok(())
    })
}

/// Current simulation time.
///
/// # Safety
/// `sim` must be null or a live handle; `t` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn chb_simulation_time(sim: *const ChbSimulation, t: *mut f64) -> ChbStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let t = t.as_mut().ok_or_else(|| null("t"))?;
        *t = s.inner.state().t;
        Ok(())
    })
}

/// Number of mesh vertices, i.e. the length of every nodal field.
///
/// # Safety
/// `sim` must be null or a live handle; `n` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn chb_simulation_num_vertices(sim: *const ChbSimulation, n: *mut usize) -> ChbStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let n = n.as_mut().ok_or_else(|| null("n"))?;
        *n = s.inner.mesh().num_vertices();
        Ok(())
    })
}

/// Copies the vertex coordinates as interleaved `x, y` pairs into `buf`,
/// which must hold exactly `2 * num_vertices` values.
///
/// # Safety
/// `sim` must be null or a live handle; `buf` must be null or point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn chb_simulation_copy_vertices(sim: *const ChbSimulation, buf: *mut f64, len: usize) -> ChbStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let verts = s.inner.mesh().vertices();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != 2 * verts.len() {
            return Err((
                ChbStatus::InvalidArgument,
                format!("buffer holds {len} values, expected {}", 2 * verts.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        for (dst, p) in out.chunks_exact_mut(2).zip(verts) {
            dst.copy_from_slice(p);
        }
        Ok(())
    })
}

/// Copies a nodal field into `buf`, which must hold exactly `num_vertices`
/// values.
///
/// # Safety
/// `sim` must be null or a live handle; `buf` must be null or point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn chb_simulation_copy_field(
    sim: *const ChbSimulation,
    field: ChbField,
    buf: *mut f64,
    len: usize,
) -> ChbStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let state = s.inner.state();
        let src = match field {
            ChbField::Phi => state.phi.coeffs(),
            ChbField::Mu => state.mu.coeffs(),
            ChbField::Sigma => state.sigma.coeffs(),
            ChbField::Pressure => state.p.coeffs(),
        };
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != src.len() {
            return Err((
                ChbStatus::InvalidArgument,
                format!("buffer holds {len} values, expected {}", src.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(src);
        Ok(())
    })
}

/// Diagnostics of the current state.
///
/// # Safety
/// `sim` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn chb_simulation_diagnostics(sim: *const ChbSimulation, out: *mut ChbDiagnostics) -> ChbStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = s.inner.diagnostics().map_err(core)?;
        *out = ChbDiagnostics {
            t: d.t,
            mass: d.mass,
            tumour_area: d.tumour_area,
            energy: d.energy,
            phi_min: d.phi_min,
            phi_max: d.phi_max,
            sigma_min: d.sigma_min,
            sigma_max: d.sigma_max,
            v_max: d.v_max,
            mean_radius: d.mean_radius,
            modes: d.modes,
            flow_iters: d.flow_iters,
            vi_iters: d.vi_iters,
            nutrient_iters: d.nutrient_iters,
        };
        Ok(())
    })
}

/// Writes the current fields as a legacy VTK file.
///
/// # Safety
/// `sim` must be null or a live handle; `path` must be null or a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn chb_simulation_write_vtk(sim: *const ChbSimulation, path: *const c_char) -> ChbStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let path = str_arg(path, "path")?;
        write_vtk(s.inner.mesh(), s.inner.state(), Path::new(path)).map_err(core)
    })
}
