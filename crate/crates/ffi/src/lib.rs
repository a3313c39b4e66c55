//! C ABI over `bandgap-delay`.
//!
//! Stacks are opaque `BdStack` handles created by one of the constructors
//! and released with `bd_stack_free`. Every fallible call returns a
//! `BdStatus`; on failure the message is kept per thread and can be copied
//! out with `bd_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bandgap_delay::delay::delay_report;
use bandgap_delay::hom::{locate_dip, PhotonPairSpectrum, SpectralShape, StackBarrier};
use bandgap_delay::stack::build_quarter_wave_stack;
use bandgap_delay::tmm::scattering;
use bandgap_delay::{Error, FirstLayer, LayerStack, OperatingPoint, Polarization};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdStatus {
    Ok = 0,
    NullPointer = 1,
    /// Input rejected before computation.
    Validation = 2,
    /// Opaque point, unconverged derivative, no gap, unbracketed dip.
    Numerical = 3,
    Io = 4,
    Parse = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdPolarization {
    P = 0,
    S = 1,
}

impl From<BdPolarization> for Polarization {
    fn from(p: BdPolarization) -> Self {
        match p {
            BdPolarization::P => Polarization::P,
            BdPolarization::S => Polarization::S,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdSpectralShape {
    Gaussian = 0,
    Sinc2 = 1,
}

/// Opaque layer stack.
pub struct BdStack(LayerStack);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BdScattering {
    pub t_re: f64,
    pub t_im: f64,
    pub r_re: f64,
    pub r_im: f64,
    /// Unwrapped transmission phase, rad.
    pub phi_t: f64,
    pub transmittance: f64,
    pub reflectance: f64,
}

/// All times in fs, lengths in nm.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BdDelayReport {
    pub transmittance: f64,
    pub group_delay: f64,
    pub transverse_shift: f64,
    pub larmor_out_of_plane: f64,
    pub larmor_time: f64,
    /// NaN outside the Bloch gap.
    pub semiclassical_time: f64,
    pub air_time: f64,
    pub relative_group_delay: f64,
    pub relative_larmor_time: f64,
    /// False when a numerical derivative failed its cross-check.
    pub derivatives_converged: bool,
    pub in_gap: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BdStatus {
    match e {
        Error::Validation { .. } => BdStatus::Validation,
        Error::Io(_) => BdStatus::Io,
        Error::Parse(_) => BdStatus::Parse,
        _ if e.is_numerical() => BdStatus::Numerical,
        _ => BdStatus::Validation,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (BdStatus, String)>) -> BdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            BdStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            BdStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (BdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (BdStatus, String) {
    (BdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn stack_ref<'a>(stack: *const BdStack) -> Result<&'a LayerStack, (BdStatus, String)> {
    // SAFETY: caller passes a handle from a constructor or null.
    unsafe { stack.as_ref() }.map(|s| &s.0).ok_or_else(|| null("stack"))
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), (BdStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: non-null, caller guarantees it is valid for writes.
    unsafe { out.write(value) };
    Ok(())
}

fn box_stack(out: *mut *mut BdStack, stack: LayerStack) -> Result<(), (BdStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: checked non-null above.
    unsafe { out.write(Box::into_raw(Box::new(BdStack(stack)))) };
    Ok(())
}

/// Quarter-wave stack in air with layers alternating from `first_high`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bd_stack_quarter_wave(
    design_wavelength_nm: f64,
    n_high: f64,
    n_low: f64,
    layer_count: u32,
    first_high: bool,
    out: *mut *mut BdStack,
) -> BdStatus {
    guard(|| {
        let first = if first_high { FirstLayer::High } else { FirstLayer::Low };
        let stack = build_quarter_wave_stack(design_wavelength_nm, n_high, n_low, layer_count as usize, first)
            .map_err(lib_err)?;
        box_stack(out, stack)
    })
}

/// Stack from a JSON description (explicit layers or quarter-wave shorthand).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bd_stack_from_json(json: *const c_char, out: *mut *mut BdStack) -> BdStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        // SAFETY: non-null and NUL-terminated per contract.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| (BdStatus::Parse, format!("json is not UTF-8: {e}")))?;
        let stack = LayerStack::from_json_str(text).map_err(lib_err)?;
        box_stack(out, stack)
    })
}

/// Releases a stack. Null is ignored.
///
/// # Safety
/// `stack` must come from a constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bd_stack_free(stack: *mut BdStack) {
    if !stack.is_null() {
        // SAFETY: allocated by Box::into_raw in a constructor.
        drop(unsafe { Box::from_raw(stack) });
    }
}

/// Number of layers, or 0 for a null handle.
///
/// # Safety
/// `stack` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bd_stack_layer_count(stack: *const BdStack) -> usize {
    // SAFETY: per contract.
    unsafe { stack.as_ref() }.map_or(0, |s| s.0.len())
}

/// Total physical thickness, nm; NaN for a null handle.
///
/// # Safety
/// `stack` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bd_stack_total_thickness(stack: *const BdStack) -> f64 {
    // SAFETY: per contract.
    unsafe { stack.as_ref() }.map_or(f64::NAN, |s| s.0.total_thickness())
}

/// Transmission and reflection amplitudes at one operating point.
///
/// # Safety
/// `stack` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bd_scattering(
    stack: *const BdStack,
    wavelength_nm: f64,
    angle_rad: f64,
    pol: BdPolarization,
    out: *mut BdScattering,
) -> BdStatus {
    guard(|| {
        // SAFETY: per contract.
        let stack = unsafe { stack_ref(stack) }?;
        let point = OperatingPoint::new(wavelength_nm, angle_rad, pol.into()).map_err(lib_err)?;
        let s = scattering(stack, &point).map_err(lib_err)?;
        write_out(
            out,
            BdScattering {
                t_re: s.t.re,
                t_im: s.t.im,
                r_re: s.r.re,
                r_im: s.r.im,
                phi_t: s.phi_t,
                transmittance: s.transmittance,
                reflectance: s.reflectance,
            },
        )
    })
}

/// Group, Larmor and semiclassical delays at one operating point.
///
/// # Safety
/// `stack` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bd_delay_report(
    stack: *const BdStack,
    wavelength_nm: f64,
    angle_rad: f64,
    pol: BdPolarization,
    out: *mut BdDelayReport,
) -> BdStatus {
    guard(|| {
        // SAFETY: per contract.
        let stack = unsafe { stack_ref(stack) }?;
        let point = OperatingPoint::new(wavelength_nm, angle_rad, pol.into()).map_err(lib_err)?;
        let r = delay_report(stack, &point).map_err(lib_err)?;
        write_out(
            out,
            BdDelayReport {
                transmittance: r.transmittance,
                group_delay: r.group_delay,
                transverse_shift: r.transverse_shift,
                larmor_out_of_plane: r.larmor_out_of_plane,
                larmor_time: r.larmor_time,
                semiclassical_time: r.semiclassical_time.unwrap_or(f64::NAN),
                air_time: r.air_time,
                relative_group_delay: r.relative_group_delay,
                relative_larmor_time: r.relative_larmor_time,
                derivatives_converged: r.derivatives.all_converged(),
                in_gap: r.semiclassical_time.is_some(),
            },
        )
    })
}

/// Centre of the two-photon coincidence dip, fs, for the stack in one arm
/// against an equal length of air in the other.
///
/// # Safety
/// `stack` must be a live handle; `out_center_fs` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bd_hom_dip_center(
    stack: *const BdStack,
    wavelength_nm: f64,
    angle_rad: f64,
    pol: BdPolarization,
    correlation_time_fs: f64,
    shape: BdSpectralShape,
    out_center_fs: *mut f64,
) -> BdStatus {
    guard(|| {
        // SAFETY: per contract.
        let stack = unsafe { stack_ref(stack) }?;
        OperatingPoint::new(wavelength_nm, angle_rad, pol.into()).map_err(lib_err)?;
        let shape = match shape {
            BdSpectralShape::Gaussian => SpectralShape::Gaussian,
            BdSpectralShape::Sinc2 => SpectralShape::Sinc2,
        };
        let spectrum = PhotonPairSpectrum::centered(wavelength_nm, correlation_time_fs)
            .map_err(lib_err)?
            .with_shape(shape);
        let barrier = StackBarrier::relative_to_air(stack, angle_rad, pol.into());
        let centre = locate_dip(&spectrum, &barrier).map_err(lib_err)?;
        write_out(out_center_fs, centre)
    })
}

/// Copy of the calling thread's last error message, or null if the last
/// call succeeded. Free with `bd_string_free`.
#[no_mangle]
pub extern "C" fn bd_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |m| m.clone().into_raw()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from `bd_last_error_message` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn bd_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by CString::into_raw.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Library version, static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
