//! C interface to the RIS equalization simulator.
//!
//! A simulator handle owns a channel model, its current coherence block and
//! the seeded random streams. Complex vectors cross the boundary as
//! interleaved `re, im` doubles. Every fallible call returns a
//! [`RisStatus`]; on failure [`ris_last_error`] describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ris_equalizer::arise::{self, baseline_inverse, baseline_random, AriseConfig};
use ris_equalizer::channel::{ChannelModel, FadingParams, Geometry, C64};
use ris_equalizer::env::{compute_eta, compute_eta_norm, sinr_db, EpisodeConfig, RisConfiguration, RisEnv};
use ris_equalizer::rng::{stream, SimRng, Stream};
use ris_equalizer::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Degenerate = 4,
    Numerical = 5,
    Panic = 6,
}

/// Scenario parameters; start from [`ris_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisParams {
    pub elements: usize,
    pub delayed_paths: usize,
    pub kappa: f64,
    pub ue_x: f64,
    pub ue_y: f64,
    pub noise: bool,
    pub seed: u64,
    /// ARISE target scale.
    pub alpha_s: f64,
    pub max_iters: usize,
}

/// Opaque simulator handle.
pub struct RisSimulator {
    env: RisEnv,
    arise: AriseConfig,
    baseline_rng: SimRng,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RisStatus {
    match e {
        Error::Dimension { .. } | Error::IndexOutOfRange { .. } => RisStatus::Dimension,
        Error::Degenerate(_) | Error::InsufficientData { .. } => RisStatus::Degenerate,
        Error::NotPsd(_) => RisStatus::Numerical,
        _ => RisStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (RisStatus, String)>) -> RisStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RisStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            RisStatus::Panic
        }
    }
}

trait Lift<T> {
    fn lift(self) -> Result<T, (RisStatus, String)>;
}

impl<T> Lift<T> for ris_equalizer::Result<T> {
    fn lift(self) -> Result<T, (RisStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (RisStatus, String) {
    (RisStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_complex<'a>(p: *const f64, n: usize, what: &str) -> Result<Vec<C64>, (RisStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s: &'a [f64] = std::slice::from_raw_parts(p, 2 * n);
    Ok(s.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect())
}

unsafe fn write_complex(p: *mut f64, cap: usize, v: &[C64], what: &str) -> Result<(), (RisStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    if cap < v.len() {
        return Err((
            RisStatus::Dimension,
            format!("{what} holds {cap} values, {} needed", v.len()),
        ));
    }
    let out = std::slice::from_raw_parts_mut(p, 2 * v.len());
    for (o, c) in out.chunks_exact_mut(2).zip(v) {
        o[0] = c.re;
        o[1] = c.im;
    }
    Ok(())
}

unsafe fn sim_mut<'a>(sim: *mut RisSimulator) -> Result<&'a mut RisSimulator, (RisStatus, String)> {
    sim.as_mut().ok_or_else(|| null("simulator"))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ris_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must point to writable memory for one `RisParams`.
#[no_mangle]
pub unsafe extern "C" fn ris_params_default(out: *mut RisParams) -> RisStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let g = Geometry::default();
        let f = FadingParams::default();
        let a = AriseConfig::default();
        *out = RisParams {
            elements: g.elements,
            delayed_paths: f.delayed_paths,
            kappa: f.kappa,
            ue_x: g.ue[0],
            ue_y: g.ue[1],
            noise: true,
            seed: 0,
            alpha_s: a.alpha_s,
            max_iters: a.max_iters,
        };
        Ok(())
    })
}

/// Builds a simulator and draws its first coherence block.
///
/// # Safety
/// `params` must be valid for reads and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ris_simulator_new(params: *const RisParams, out: *mut *mut RisSimulator) -> RisStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let geometry = Geometry {
            elements: p.elements,
            ue: [p.ue_x, p.ue_y],
            ..Geometry::default()
        };
        let fading = FadingParams {
            delayed_paths: p.delayed_paths,
            kappa: p.kappa,
            ..FadingParams::default()
        };
        let arise = AriseConfig {
            alpha_s: p.alpha_s,
            max_iters: p.max_iters,
            ..AriseConfig::default()
        };
        arise.validate().lift()?;
        let model = ChannelModel::new(geometry, fading).lift()?;
        let mut env = RisEnv::new(model, EpisodeConfig::default(), p.seed).lift()?;
        if !p.noise {
            env.set_noise_power(0.0).lift()?;
        }
        let sim = RisSimulator {
            env,
            arise,
            baseline_rng: stream(p.seed, Stream::Baseline),
        };
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from [`ris_simulator_new`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ris_simulator_free(sim: *mut RisSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Number of RIS elements and pulse taps `L + 1`.
///
/// # Safety
/// `sim` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ris_simulator_dims(
    sim: *const RisSimulator,
    elements: *mut usize,
    taps: *mut usize,
) -> RisStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("simulator"))?;
        *elements.as_mut().ok_or_else(|| null("elements"))? = s.env.elements();
        *taps.as_mut().ok_or_else(|| null("taps"))? = s.env.taps();
        Ok(())
    })
}

/// Receiver noise power in watts (zero when noise is off).
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ris_simulator_noise_power(sim: *const RisSimulator, out: *mut f64) -> RisStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("simulator"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.env.noise_power();
        Ok(())
    })
}

/// Moves the UE one random-walk step and draws a new coherence block.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ris_simulator_next_block(sim: *mut RisSimulator) -> RisStatus {
    guard(|| sim_mut(sim)?.env.next_block().lift())
}

/// Pulse response under `gamma` (`elements` coefficients). With `noisy`
/// false the noiseless response is returned.
///
/// # Safety
/// `gamma` must hold `2 * elements` doubles and `out` `2 * out_taps`.
#[no_mangle]
pub unsafe extern "C" fn ris_simulator_pulse(
    sim: *mut RisSimulator,
    gamma: *const f64,
    elements: usize,
    noisy: bool,
    out: *mut f64,
    out_taps: usize,
) -> RisStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        let g = RisConfiguration::from_raw(read_complex(gamma, elements, "gamma")?);
        let y = if noisy {
            s.env.observe(&g).lift()?
        } else {
            s.env.noiseless_pulse(&g).lift()?
        };
        write_complex(out, out_taps, &y.samples, "out")
    })
}

/// Runs ARISE on the current block, starting from random phases, and
/// writes the final configuration. `iterations` may be null.
///
/// # Safety
/// `out` must hold `2 * elements` doubles.
#[no_mangle]
pub unsafe extern "C" fn ris_simulator_arise(
    sim: *mut RisSimulator,
    out: *mut f64,
    elements: usize,
    iterations: *mut usize,
) -> RisStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        let init = baseline_random(&mut s.baseline_rng, s.env.elements());
        let (g, trace) = arise::run(s.env.channel(), &s.arise, init).lift()?;
        write_complex(out, elements, g.as_slice(), "out")?;
        if let Some(it) = iterations.as_mut() {
            *it = trace.iterations_used();
        }
        Ok(())
    })
}

/// Conjugate-phase configuration aligning the main cascaded taps.
///
/// # Safety
/// `out` must hold `2 * elements` doubles.
#[no_mangle]
pub unsafe extern "C" fn ris_simulator_baseline_inverse(
    sim: *const RisSimulator,
    out: *mut f64,
    elements: usize,
) -> RisStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("simulator"))?;
        let g = baseline_inverse(&s.env.channel().h_bru);
        write_complex(out, elements, g.as_slice(), "out")
    })
}

/// Signed main-tap power minus ISI power of a pulse.
///
/// # Safety
/// `y` must hold `2 * taps` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ris_eta(y: *const f64, taps: usize, out: *mut f64) -> RisStatus {
    guard(|| {
        let v = compute_eta(&read_complex(y, taps, "y")?).lift()?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// [`ris_eta`] divided by the pulse energy, in `[-1, 1]`.
///
/// # Safety
/// As [`ris_eta`].
#[no_mangle]
pub unsafe extern "C" fn ris_eta_norm(y: *const f64, taps: usize, out: *mut f64) -> RisStatus {
    guard(|| {
        let v = compute_eta_norm(&read_complex(y, taps, "y")?).lift()?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Main-tap power over ISI plus `noise_power`, in dB.
///
/// # Safety
/// As [`ris_eta`].
#[no_mangle]
pub unsafe extern "C" fn ris_sinr_db(y: *const f64, taps: usize, noise_power: f64, out: *mut f64) -> RisStatus {
    guard(|| {
        let v = sinr_db(&read_complex(y, taps, "y")?, noise_power).lift()?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}
