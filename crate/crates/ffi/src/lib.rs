//! C ABI over the mesh simulator.
//!
//! Meshes and trained models are opaque handles created and destroyed by
//! this library. Every fallible call returns an [`MzimeshStatus`]; on
//! failure a message is available from [`mzimesh_last_error`] until the
//! next failing call on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mzimesh::energy::{e_static, e_total, t_prog, EnergyParams, ProgrammingMethod};
use mzimesh::onn::OnnModel;
use mzimesh::programming::{monitor_theta, monitoring_plan};
use mzimesh::propagation::{MeshState, NoiseConfig};
use mzimesh::topology::structural_report;
use mzimesh::{Complex, MeshError, MeshKind, MeshTopology, MziPhases};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MzimeshStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnsupportedSize = 3,
    Dimension = 4,
    NotAccessible = 5,
    Numerical = 6,
    Io = 7,
    Parse = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MzimeshKind {
    Reck = 0,
    Diamond = 1,
    Clements = 2,
    Bokun = 3,
}

impl From<MzimeshKind> for MeshKind {
    fn from(k: MzimeshKind) -> Self {
        match k {
            MzimeshKind::Reck => MeshKind::Reck,
            MzimeshKind::Diamond => MeshKind::Diamond,
            MzimeshKind::Clements => MeshKind::Clements,
            MzimeshKind::Bokun => MeshKind::Bokun,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MzimeshStructure {
    pub mzi_count: usize,
    pub depth: usize,
    pub min_path: usize,
    pub max_path: usize,
    pub accessible_count: usize,
}

/// Opaque mesh with its current phase settings.
pub struct MzimeshMesh {
    state: MeshState,
}

/// Opaque trained network.
pub struct MzimeshModel {
    model: OnnModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &MeshError) -> MzimeshStatus {
    match e {
        MeshError::InvalidArgument(_) | MeshError::Config(_) => MzimeshStatus::InvalidArgument,
        MeshError::UnsupportedSize { .. } => MzimeshStatus::UnsupportedSize,
        MeshError::Dimension(_) => MzimeshStatus::Dimension,
        MeshError::NotAccessible(_) | MeshError::InaccessibleSet(_) => MzimeshStatus::NotAccessible,
        MeshError::DegenerateFit(_) | MeshError::Numerical(_) => MzimeshStatus::Numerical,
        MeshError::Io { .. } => MzimeshStatus::Io,
        MeshError::Idx { .. } | MeshError::Json(_) => MzimeshStatus::Parse,
    }
}

enum Failure {
    Null(&'static str),
    Mesh(MeshError),
}

impl From<MeshError> for Failure {
    fn from(e: MeshError) -> Self {
        Failure::Mesh(e)
    }
}

type Outcome = Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> MzimeshStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MzimeshStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            MzimeshStatus::NullPointer
        }
        Ok(Err(Failure::Mesh(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            MzimeshStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message for the last failure on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mzimesh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds an `n`-port mesh with every MZI at θ = φ = 0.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_mesh_new(kind: MzimeshKind, n: usize, out: *mut *mut MzimeshMesh) -> MzimeshStatus {
    guard(|| {
        let out = get_mut(out, "out")?;
        *out = ptr::null_mut();
        let t = MeshTopology::build(kind.into(), n)?;
        *out = Box::into_raw(Box::new(MzimeshMesh { state: MeshState::new(t) }));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle from [`mzimesh_mesh_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_mesh_free(mesh: *mut MzimeshMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_mesh_mzi_count(mesh: *const MzimeshMesh, out: *mut usize) -> MzimeshStatus {
    guard(|| {
        *get_mut(out, "out")? = get(mesh, "mesh")?.state.topology().mzi_count();
        Ok(())
    })
}

/// Number of main (data) ports.
///
/// # Safety
/// `mesh` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_mesh_ports(mesh: *const MzimeshMesh, out: *mut usize) -> MzimeshStatus {
    guard(|| {
        *get_mut(out, "out")? = get(mesh, "mesh")?.state.topology().n_main();
        Ok(())
    })
}

/// # Safety
/// `mesh` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_mesh_structure(mesh: *const MzimeshMesh, out: *mut MzimeshStructure) -> MzimeshStatus {
    guard(|| {
        let r = structural_report(get(mesh, "mesh")?.state.topology());
        *get_mut(out, "out")? = MzimeshStructure {
            mzi_count: r.mzi_count,
            depth: r.depth,
            min_path: r.min_path,
            max_path: r.max_path,
            accessible_count: r.accessible_count,
        };
        Ok(())
    })
}

/// Sets θ and φ of every MZI; both arrays hold `count` entries, which must
/// equal the MZI count.
///
/// # Safety
/// `mesh` must be a live handle; `theta` and `phi` must point to `count`
/// doubles each.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_mesh_set_phases(
    mesh: *mut MzimeshMesh,
    theta: *const f64,
    phi: *const f64,
    count: usize,
) -> MzimeshStatus {
    guard(|| {
        let m = get_mut(mesh, "mesh")?;
        let th = slice(theta, count, "theta")?;
        let ph = slice(phi, count, "phi")?;
        let phases = th.iter().zip(ph).map(|(&t, &p)| MziPhases::new(t, p)).collect();
        m.state.set_phases(phases)?;
        Ok(())
    })
}

/// Writes the main-port transfer matrix row-major as separate real and
/// imaginary parts; both buffers hold `len` = ports² doubles.
///
/// # Safety
/// `mesh` must be a live handle; `re` and `im` must be writable for `len`
/// doubles each.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_mesh_transfer(
    mesh: *const MzimeshMesh,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> MzimeshStatus {
    guard(|| {
        let m = get(mesh, "mesh")?;
        let u = m.state.main_transfer(None)?;
        let n = u.rows();
        if len != n * n {
            return Err(MeshError::Dimension(format!("buffer of {len} for a {n}x{n} matrix")).into());
        }
        let re = slice_mut(re, len, "re")?;
        let im = slice_mut(im, len, "im")?;
        for i in 0..n {
            for j in 0..n {
                let z: Complex = u[(i, j)];
                re[i * n + j] = z.re;
                im[i * n + j] = z.im;
            }
        }
        Ok(())
    })
}

/// Effective θ of one MZI recovered through its monitoring route. Fails
/// with `NotAccessible` when the MZI has no such route.
///
/// # Safety
/// `mesh` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_mesh_monitor_theta(
    mesh: *const MzimeshMesh,
    mzi: usize,
    out: *mut f64,
) -> MzimeshStatus {
    guard(|| {
        let m = get(mesh, "mesh")?;
        let out = get_mut(out, "out")?;
        let t = m.state.topology();
        if mzi >= t.mzi_count() {
            return Err(MeshError::InvalidArgument(format!("no MZI {mzi}")).into());
        }
        let plan = monitoring_plan(t, mzi).ok_or(MeshError::NotAccessible(mzi))?;
        *out = monitor_theta(&m.state, &plan, 64)?.theta;
        Ok(())
    })
}

/// Loads a model saved by the command-line `train` step.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_model_load(path: *const c_char, out: *mut *mut MzimeshModel) -> MzimeshStatus {
    guard(|| {
        let out = get_mut(out, "out")?;
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| MeshError::InvalidArgument("path is not UTF-8".into()))?;
        let model = OnnModel::load(Path::new(p))?;
        *out = Box::into_raw(Box::new(MzimeshModel { model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`mzimesh_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_model_free(model: *mut MzimeshModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_model_features(model: *const MzimeshModel, out: *mut usize) -> MzimeshStatus {
    guard(|| {
        *get_mut(out, "out")? = get(model, "model")?.model.n_features();
        Ok(())
    })
}

/// Noise-free class prediction for one real feature vector, which is
/// normalized to unit power before encoding.
///
/// # Safety
/// `model` must be a live handle; `features` must point to `len` doubles;
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_model_predict(
    model: *const MzimeshModel,
    features: *const f64,
    len: usize,
    out: *mut usize,
) -> MzimeshStatus {
    guard(|| {
        let m = &get(model, "model")?.model;
        let x = slice(features, len, "features")?;
        if len != m.n_features() {
            return Err(MeshError::Dimension(format!("{len} features, model takes {}", m.n_features())).into());
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
        let encoded: Vec<Complex> = x.iter().map(|&v| Complex::new(v * scale, 0.0)).collect();
        let mut rng = mzimesh::rng::stream(0, &[]);
        *get_mut(out, "out")? = m.predict(&encoded, &NoiseConfig::default(), &mut rng)?;
        Ok(())
    })
}

/// Static and total energy per operation in joules for an `n`-port mesh
/// with default heater and timing parameters except `p_pi` (W) and `vr`
/// (operations per second), reprogrammed `f_w` times per second.
///
/// # Safety
/// `e_static_out` and `e_total_out` must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn mzimesh_energy(
    kind: MzimeshKind,
    n: usize,
    p_pi: f64,
    vr: f64,
    f_w: f64,
    e_static_out: *mut f64,
    e_total_out: *mut f64,
) -> MzimeshStatus {
    guard(|| {
        let params = EnergyParams {
            p_pi,
            vr,
            ..EnergyParams::default()
        };
        let k: MeshKind = kind.into();
        let es = e_static(k, n, &params)?;
        let et = e_total(es, f_w, t_prog(ProgrammingMethod::for_kind(k), &params))?;
        *get_mut(e_static_out, "e_static_out")? = es;
        *get_mut(e_total_out, "e_total_out")? = et;
        Ok(())
    })
}
