//! C ABI over `splatnav`.
//!
//! Fields and scenes are opaque handles created and freed by this library.
//! Every fallible call returns a [`SplatnavStatus`]; on failure the message is
//! available from [`splatnav_last_error`] on the same thread until the next
//! failing call.

#![allow(clippy::missing_safety_doc, clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use splatnav::error::Error;
use splatnav::esdf::{edt_signed, OccupancyGrid2D};
use splatnav::geometry::{CameraModel, Grid2Spec, Pose3, Vec2, Vec3};
use splatnav::harness::Method;
use splatnav::planner::{navigate, NavConfig, Outcome};
use splatnav::splat::{query_field, read_field, render_cost_map, write_field, GaussianPrimitive, SplatField};
use splatnav::worldsim::{builtin_scene, load_scene, Scene};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplatnavStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplatnavMethod {
    AllPoints = 0,
    MeansOnly = 1,
    GeometricOnly = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplatnavOutcome {
    Reached = 0,
    Frozen = 1,
    Collided = 2,
    Timeout = 3,
}

/// Pinhole intrinsics; pixel centers sit at integer coordinates.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SplatnavCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub z_near: f64,
}

/// Rigid transform, quaternion stored scalar first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SplatnavPose {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SplatnavRunSummary {
    pub outcome: SplatnavOutcome,
    pub path_length: f64,
    pub duration: f64,
    pub map_updates: u64,
}

/// Opaque splat field.
pub struct SplatnavField {
    inner: SplatField,
}

/// Opaque simulated scene.
pub struct SplatnavScene {
    inner: Scene,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SplatnavStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io(_) => SplatnavStatus::Io,
            Error::Parse(_) => SplatnavStatus::Parse,
            _ => SplatnavStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SplatnavStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SplatnavStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SplatnavStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SplatnavStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SplatnavStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn mut_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn pose3(p: &SplatnavPose) -> Result<Pose3, Failure> {
    Ok(Pose3::from_wxyz([p.qw, p.qx, p.qy, p.qz], Vec3::new(p.tx, p.ty, p.tz))?)
}

fn camera(c: &SplatnavCamera) -> Result<CameraModel, Failure> {
    Ok(CameraModel::new(c.fx, c.fy, c.cx, c.cy, c.width as usize, c.height as usize, c.z_near)?)
}

/// Message of the last failed call on this thread, or null. Owned by the
/// library and valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn splatnav_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn splatnav_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Empty field holding at most `budget` primitives after pruning.
#[no_mangle]
pub unsafe extern "C" fn splatnav_field_new(budget: usize, out: *mut *mut SplatnavField) -> SplatnavStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        *out = Box::into_raw(Box::new(SplatnavField { inner: SplatField::new(budget) }));
        Ok(())
    })
}

/// Reads a field dump written by `splatnav_field_save` or the CLI.
#[no_mangle]
pub unsafe extern "C" fn splatnav_field_load(path: *const c_char, out: *mut *mut SplatnavField) -> SplatnavStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = mut_arg(out, "out")?;
        let file = File::open(path).map_err(Error::from)?;
        let inner = read_field(BufReader::new(file))?;
        *out = Box::into_raw(Box::new(SplatnavField { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn splatnav_field_save(field: *const SplatnavField, path: *const c_char) -> SplatnavStatus {
    guard(|| {
        let field = ref_arg(field, "field")?;
        let path = str_arg(path, "path")?;
        let mut w = BufWriter::new(File::create(Path::new(path)).map_err(Error::from)?);
        write_field(&field.inner, &mut w)?;
        w.flush().map_err(Error::from)?;
        Ok(())
    })
}

/// Frees a field handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn splatnav_field_free(field: *mut SplatnavField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of primitives, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn splatnav_field_len(field: *const SplatnavField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.len())
}

/// Appends an isotropic primitive; `opacity` in (0, 1), `cost` in [0, 1].
#[no_mangle]
pub unsafe extern "C" fn splatnav_field_add(
    field: *mut SplatnavField,
    x: f64,
    y: f64,
    z: f64,
    sigma: f64,
    opacity: f64,
    cost: f64,
) -> SplatnavStatus {
    guard(|| {
        let field = mut_arg(field, "field")?;
        if !(sigma > 0.0 && opacity > 0.0 && opacity < 1.0 && (0.0..=1.0).contains(&cost)) {
            return Err(invalid(format!("bad primitive: sigma {sigma}, opacity {opacity}, cost {cost}")));
        }
        let frame = field.inner.frame_counter;
        field.inner.primitives.push(GaussianPrimitive::isotropic(Vec3::new(x, y, z), sigma, opacity, cost, frame));
        Ok(())
    })
}

/// Continuous traversability cost of the field at a world point.
#[no_mangle]
pub unsafe extern "C" fn splatnav_field_query(
    field: *const SplatnavField,
    x: f64,
    y: f64,
    z: f64,
    out_cost: *mut f64,
) -> SplatnavStatus {
    guard(|| {
        let field = ref_arg(field, "field")?;
        let out = mut_arg(out_cost, "out_cost")?;
        *out = query_field(&field.inner, &Vec3::new(x, y, z));
        Ok(())
    })
}

/// Renders the cost image seen from `cam_to_world` into `out` (row-major,
/// `width·height` values).
#[no_mangle]
pub unsafe extern "C" fn splatnav_render(
    field: *const SplatnavField,
    cam: *const SplatnavCamera,
    cam_to_world: *const SplatnavPose,
    background_cost: f64,
    out: *mut f64,
    out_len: usize,
) -> SplatnavStatus {
    guard(|| {
        let field = ref_arg(field, "field")?;
        let cam = camera(ref_arg(cam, "cam")?)?;
        let pose = pose3(ref_arg(cam_to_world, "cam_to_world")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len != cam.pixel_count() {
            return Err(invalid(format!("out_len {out_len} != {} pixels", cam.pixel_count())));
        }
        let img = render_cost_map(&field.inner, &pose.inverse(), &cam, background_cost);
        std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(&img.values);
        Ok(())
    })
}

/// Signed distance transform of a row-major `nx·ny` occupancy mask (nonzero =
/// occupied), in meters, clamped to `±d_max`.
#[no_mangle]
pub unsafe extern "C" fn splatnav_edt_signed(
    occupied: *const u8,
    nx: usize,
    ny: usize,
    resolution: f64,
    d_max: f64,
    out: *mut f64,
) -> SplatnavStatus {
    guard(|| {
        if occupied.is_null() {
            return Err(null("occupied"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = Grid2Spec::new(resolution, Vec2::zeros(), nx, ny)?;
        if !(d_max > 0.0) {
            return Err(invalid(format!("d_max must be positive (got {d_max})")));
        }
        let mask = std::slice::from_raw_parts(occupied, spec.len());
        let occ = OccupancyGrid2D { spec, occupied: mask.iter().map(|&m| m != 0).collect() };
        let esdf = edt_signed(&occ, d_max);
        std::slice::from_raw_parts_mut(out, spec.len()).copy_from_slice(&esdf.d);
        Ok(())
    })
}

/// One of the built-in scenes, by name.
#[no_mangle]
pub unsafe extern "C" fn splatnav_scene_builtin(name: *const c_char, out: *mut *mut SplatnavScene) -> SplatnavStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let out = mut_arg(out, "out")?;
        *out = Box::into_raw(Box::new(SplatnavScene { inner: builtin_scene(name)? }));
        Ok(())
    })
}

/// Scene from a TOML scene file.
#[no_mangle]
pub unsafe extern "C" fn splatnav_scene_load(path: *const c_char, out: *mut *mut SplatnavScene) -> SplatnavStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = mut_arg(out, "out")?;
        *out = Box::into_raw(Box::new(SplatnavScene { inner: load_scene(Path::new(path))? }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn splatnav_scene_free(scene: *mut SplatnavScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Runs one closed-loop episode from the scene's start to its goal with the
/// default configuration, or the TOML config at `config_path` when non-null.
#[no_mangle]
pub unsafe extern "C" fn splatnav_navigate(
    scene: *const SplatnavScene,
    method: SplatnavMethod,
    seed: u64,
    config_path: *const c_char,
    out: *mut SplatnavRunSummary,
) -> SplatnavStatus {
    guard(|| {
        let scene = &ref_arg(scene, "scene")?.inner;
        let out = mut_arg(out, "out")?;
        let cfg = if config_path.is_null() {
            NavConfig::default()
        } else {
            let text = std::fs::read_to_string(str_arg(config_path, "config_path")?).map_err(Error::from)?;
            NavConfig::from_toml(&text)?
        };
        let method = match method {
            SplatnavMethod::AllPoints => Method::SplatbloxAllPoints,
            SplatnavMethod::MeansOnly => Method::SplatbloxMeansOnly,
            SplatnavMethod::GeometricOnly => Method::GeometricOnly,
        };
        let res = navigate(scene, &scene.start, &scene.goal, &cfg, method.pipeline(), seed)?;
        *out = SplatnavRunSummary {
            outcome: match res.outcome {
                Outcome::Reached => SplatnavOutcome::Reached,
                Outcome::Frozen => SplatnavOutcome::Frozen,
                Outcome::Collided => SplatnavOutcome::Collided,
                Outcome::Timeout => SplatnavOutcome::Timeout,
            },
            path_length: res.path_length(),
            duration: res.duration(),
            map_updates: res.map_updates as u64,
        };
        Ok(())
    })
}
