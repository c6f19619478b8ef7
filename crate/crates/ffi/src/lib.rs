//! C ABI over the chromaweak compensation pipeline.
//!
//! Every fallible call returns a [`CwStatus`]. On failure the message is
//! kept per thread and can be read with [`cw_last_error_message`].
//! Handles are opaque; free them with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use chromaweak::archive::{self, ArchiveKind};
use chromaweak::colorspace::{Converter, LuvColor, Rgb8, WhitePoint};
use chromaweak::pipeline::{self, CompensationConfig, ImageBuffer, Mode, PixelInterpolation};
use chromaweak::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Archive = 5,
    Uncovered = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CwWhite {
    D65 = 0,
    D50 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CwInterpolation {
    Barycentric = 0,
    NearestVertex = 1,
}

/// Per-run pixel counts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CwReport {
    pub pixels: u64,
    pub mapped: u64,
    pub clamped: u64,
    pub fallback: u64,
    pub clipped: u64,
    pub lightness_clamped: u64,
}

/// Opaque compensation or simulation configuration.
pub struct CwCompensator {
    config: CompensationConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CwStatus {
    match e {
        Error::Config(_) => CwStatus::Config,
        Error::Io(_) | Error::Image(_) | Error::Csv(_) => CwStatus::Io,
        Error::Archive(_) => CwStatus::Archive,
        Error::Uncovered { .. } | Error::OutsideExtent => CwStatus::Uncovered,
        _ => CwStatus::InvalidArgument,
    }
}

struct Failure(CwStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CwStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CwStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CwStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CwStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(h: *mut CwCompensator) -> Result<&'a mut CwCompensator, Failure> {
    h.as_mut().ok_or_else(|| null("handle"))
}

fn white_point(w: CwWhite) -> WhitePoint {
    match w {
        CwWhite::D65 => WhitePoint::D65,
        CwWhite::D50 => WhitePoint::D50,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a configuration for `mode` ("2d", "2d+1d", "3d",
/// "simulate-2d", "simulate-2d+1d", "simulate-3d").
///
/// # Safety
/// `mode` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cw_compensator_new(mode: *const c_char, out: *mut *mut CwCompensator) -> CwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mode: Mode = str_arg(mode, "mode")?.parse()?;
        let h = Box::new(CwCompensator {
            config: CompensationConfig::new(mode),
        });
        *out = Box::into_raw(h);
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`cw_compensator_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cw_compensator_free(h: *mut CwCompensator) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

fn load_archive(c: &mut CwCompensator, bytes: &[u8]) -> Result<(), Failure> {
    let cfg = c.config.clone();
    c.config = match archive::peek(bytes)? {
        (ArchiveKind::Maps, Some(2)) => {
            let mut cfg = cfg;
            for e in archive::decode_maps::<2>(bytes)? {
                let level = e
                    .level
                    .ok_or_else(|| Failure(CwStatus::Archive, "2D map without a lightness level".into()))?;
                cfg = cfg.with_level(level, e.map);
            }
            cfg
        }
        (ArchiveKind::Maps, Some(3)) => {
            let mut maps = archive::decode_maps::<3>(bytes)?;
            if maps.len() != 1 {
                return Err(Failure(
                    CwStatus::Archive,
                    format!("3D map archive holds {} maps", maps.len()),
                ));
            }
            cfg.with_map3d(maps.remove(0).map)
        }
        (ArchiveKind::Lightness, _) => cfg.with_lightness(archive::decode_lightness(bytes)?),
        (kind, _) => {
            return Err(Failure(
                CwStatus::Archive,
                format!("cannot load a {kind:?} archive into a compensator"),
            ))
        }
    };
    Ok(())
}

/// Loads a map or lightness archive from memory. 2D map archives add
/// one map per lightness plane; a 3D archive sets the 3D map.
///
/// # Safety
/// `data` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn cw_compensator_load_bytes(h: *mut CwCompensator, data: *const u8, len: usize) -> CwStatus {
    guard(|| {
        let c = handle(h)?;
        if data.is_null() {
            return Err(null("data"));
        }
        load_archive(c, std::slice::from_raw_parts(data, len))
    })
}

/// Same as [`cw_compensator_load_bytes`], reading from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cw_compensator_load_file(h: *mut CwCompensator, path: *const c_char) -> CwStatus {
    guard(|| {
        let c = handle(h)?;
        let bytes = archive::read_bytes(Path::new(str_arg(path, "path")?))?;
        load_archive(c, &bytes)
    })
}

/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cw_compensator_set_interpolation(h: *mut CwCompensator, mode: CwInterpolation) -> CwStatus {
    guard(|| {
        let c = handle(h)?;
        c.config.interpolation = match mode {
            CwInterpolation::Barycentric => PixelInterpolation::Barycentric,
            CwInterpolation::NearestVertex => PixelInterpolation::NearestVertex,
        };
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cw_compensator_set_white(h: *mut CwCompensator, white: CwWhite) -> CwStatus {
    guard(|| {
        handle(h)?.config.converter = Converter::new(white_point(white));
        Ok(())
    })
}

/// Checks that every map the mode needs is loaded.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cw_compensator_validate(h: *mut CwCompensator) -> CwStatus {
    guard(|| Ok(handle(h)?.config.validate()?))
}

/// Processes `width * height` packed RGB8 pixels from `input` into
/// `output` (same size, may alias). `report` may be NULL.
///
/// # Safety
/// `input` and `output` must each hold `width * height * 3` bytes.
#[no_mangle]
pub unsafe extern "C" fn cw_compensator_apply(
    h: *mut CwCompensator,
    input: *const u8,
    width: u32,
    height: u32,
    output: *mut u8,
    report: *mut CwReport,
) -> CwStatus {
    guard(|| {
        let c = handle(h)?;
        if input.is_null() {
            return Err(null("input"));
        }
        if output.is_null() {
            return Err(null("output"));
        }
        let n = (width as usize)
            .checked_mul(height as usize)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| Failure(CwStatus::InvalidArgument, "image too large".into()))?;
        let pixels = std::slice::from_raw_parts(input, n)
            .chunks_exact(3)
            .map(|p| Rgb8::new(p[0], p[1], p[2]))
            .collect();
        let img = ImageBuffer::new(width, height, pixels)?;
        let (result, r) = pipeline::process(&img, &c.config)?;
        let out = std::slice::from_raw_parts_mut(output, n);
        for (dst, p) in out.chunks_exact_mut(3).zip(result.pixels()) {
            dst.copy_from_slice(&p.channels());
        }
        if let Some(rep) = report.as_mut() {
            *rep = CwReport {
                pixels: r.pixels as u64,
                mapped: r.mapped as u64,
                clamped: r.clamped as u64,
                fallback: r.fallback as u64,
                clipped: r.clipped as u64,
                lightness_clamped: r.lightness_clamped as u64,
            };
        }
        Ok(())
    })
}

/// Maps one RGB8 color.
///
/// # Safety
/// `input` and `output` must each hold 3 bytes.
#[no_mangle]
pub unsafe extern "C" fn cw_compensator_map_color(h: *mut CwCompensator, input: *const u8, output: *mut u8) -> CwStatus {
    guard(|| {
        let c = handle(h)?;
        if input.is_null() || output.is_null() {
            return Err(null("color"));
        }
        let i = std::slice::from_raw_parts(input, 3);
        let mapped = pipeline::process_color(Rgb8::new(i[0], i[1], i[2]), &c.config)?;
        std::slice::from_raw_parts_mut(output, 3).copy_from_slice(&mapped.channels());
        Ok(())
    })
}

/// Converts an RGB8 color to `[L, u, v]`.
///
/// # Safety
/// `rgb` must hold 3 bytes and `luv` 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn cw_srgb_to_luv(rgb: *const u8, white: CwWhite, luv: *mut f64) -> CwStatus {
    guard(|| {
        if rgb.is_null() || luv.is_null() {
            return Err(null("color"));
        }
        let i = std::slice::from_raw_parts(rgb, 3);
        let c = Converter::new(white_point(white)).srgb_to_luv(Rgb8::new(i[0], i[1], i[2]));
        std::slice::from_raw_parts_mut(luv, 3).copy_from_slice(&[c.l, c.u, c.v]);
        Ok(())
    })
}

/// Converts `[L, u, v]` to RGB8. `clipped` (may be NULL) receives 1 when
/// the color was outside the sRGB gamut.
///
/// # Safety
/// `luv` must hold 3 doubles and `rgb` 3 bytes.
#[no_mangle]
pub unsafe extern "C" fn cw_luv_to_srgb(luv: *const f64, white: CwWhite, rgb: *mut u8, clipped: *mut i32) -> CwStatus {
    guard(|| {
        if rgb.is_null() || luv.is_null() {
            return Err(null("color"));
        }
        let v = std::slice::from_raw_parts(luv, 3);
        let color = LuvColor::new(v[0], v[1], v[2]);
        if !color.is_finite() {
            return Err(Failure(CwStatus::InvalidArgument, "non-finite color".into()));
        }
        let (c, was_clipped) = Converter::new(white_point(white)).luv_to_srgb(color);
        std::slice::from_raw_parts_mut(rgb, 3).copy_from_slice(&c.channels());
        if let Some(f) = clipped.as_mut() {
            *f = was_clipped as i32;
        }
        Ok(())
    })
}
