//! C ABI for `canyon`.
//!
//! Fallible functions return a [`CanyonStatus`]. On failure the message can be
//! fetched with [`canyon_last_error_message`] from the same thread. Handles are
//! opaque and are released with their matching `_free` function; strings
//! returned by the library are released with [`canyon_string_free`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use canyon::compat::{aggregate_margin, frequency_grid};
use canyon::coverage::{noise_floor, summarize, Cutoff, LinkBudget};
use canyon::deconflict::{run_trials, square_side_m, ScenarioConfig};
use canyon::ingest::{parse_measurement_file, parse_measurement_str, SidewalkDataset};
use canyon::metrics::{dataset_metrics, MetricOptions};
use canyon::pathloss::{fit_labeled, PathGainFit};
use canyon::scm::{parse_scm, read_scm_file, serialize_scm, ModelKind, SpectrumConsumptionModel};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanyonStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Schema = 4,
    Io = 5,
    Degenerate = 6,
    Panic = 7,
}

/// Parsed measurement file.
pub struct CanyonDataset(SidewalkDataset);

/// Spectrum consumption model.
pub struct CanyonScm(SpectrumConsumptionModel);

/// Single-slope fit `pg(d) = intercept_b + 10 * slope_n * log10(d)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanyonFit {
    pub slope_n: f64,
    pub intercept_b: f64,
    pub rms_sigma: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub count: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanyonBudget {
    pub tx_power_dbm: f64,
    pub tx_max_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub snr_cutoff_db: f64,
    pub median_abg_dbi: f64,
    pub nominal_azimuth_gain_dbi: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanyonCutoffKind {
    /// SNR drops below the threshold; the distance is valid.
    At = 0,
    /// SNR stays above the threshold over the whole profile.
    NotReached = 1,
    /// SNR never reaches the threshold.
    NeverAbove = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanyonCoverage {
    pub min_snr_db: f64,
    pub max_snr_db: f64,
    pub cutoff_kind: CanyonCutoffKind,
    /// NaN unless `cutoff_kind` is `At`.
    pub cutoff_m: f64,
    pub nominal_cutoff_kind: CanyonCutoffKind,
    pub nominal_cutoff_m: f64,
    pub mean_rate_bps: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanyonCompat {
    /// `+inf` when no interferer reaches the receiver.
    pub margin_db: f64,
    /// NaN when no interferer reaches the receiver.
    pub worst_freq_hz: f64,
    pub compatible: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanyonSimulation {
    pub n_links: usize,
    pub n_trials: usize,
    pub mode: u32,
    pub max_channels: u32,
    pub fraction_two_or_three: f64,
    pub all_valid: bool,
    pub max_link_seconds: f64,
    pub mean_link_seconds: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(CanyonStatus, String);

impl From<canyon::Error> for Fail {
    fn from(e: canyon::Error) -> Self {
        let status = match &e {
            canyon::Error::Parse { .. } => CanyonStatus::Parse,
            canyon::Error::Invalid(_) => CanyonStatus::InvalidArgument,
            canyon::Error::Degenerate(_) | canyon::Error::NoRotation(_) => CanyonStatus::Degenerate,
            canyon::Error::Schema { .. } => CanyonStatus::Schema,
            canyon::Error::Io { .. } => CanyonStatus::Io,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CanyonStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(CanyonStatus::InvalidArgument, msg.into())
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CanyonStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CanyonStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            CanyonStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn owned_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| invalid("string contains an interior NUL"))
}

impl From<&PathGainFit> for CanyonFit {
    fn from(f: &PathGainFit) -> Self {
        Self {
            slope_n: f.slope_n,
            intercept_b: f.intercept_b,
            rms_sigma: f.rms_sigma,
            d_min: f.d_min,
            d_max: f.d_max,
            count: f.count,
        }
    }
}

impl From<CanyonBudget> for LinkBudget {
    fn from(b: CanyonBudget) -> Self {
        Self {
            tx_power_dbm: b.tx_power_dbm,
            tx_max_gain_dbi: b.tx_max_gain_dbi,
            rx_gain_dbi: b.rx_gain_dbi,
            noise_figure_db: b.noise_figure_db,
            bandwidth_hz: b.bandwidth_hz,
            snr_cutoff_db: b.snr_cutoff_db,
            median_abg_dbi: b.median_abg_dbi,
            nominal_azimuth_gain_dbi: b.nominal_azimuth_gain_dbi,
        }
    }
}

fn cutoff_parts(c: Cutoff) -> (CanyonCutoffKind, f64) {
    match c {
        Cutoff::At(d) => (CanyonCutoffKind::At, d),
        Cutoff::NotReached => (CanyonCutoffKind::NotReached, f64::NAN),
        Cutoff::NeverAbove => (CanyonCutoffKind::NeverAbove, f64::NAN),
    }
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn canyon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy of the last error message on this thread, or null if the last call
/// succeeded. Free with `canyon_string_free`.
#[no_mangle]
pub extern "C" fn canyon_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null_mut(), |s| s.clone().into_raw()))
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn canyon_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Read a measurement file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_dataset_open(path: *const c_char, out: *mut *mut CanyonDataset) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ds = parse_measurement_file(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(CanyonDataset(ds)));
        Ok(())
    })
}

/// Parse measurement text held in memory.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_dataset_parse(text: *const c_char, out: *mut *mut CanyonDataset) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ds = parse_measurement_str(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(CanyonDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from `canyon_dataset_open`/`_parse` or be null.
#[no_mangle]
pub unsafe extern "C" fn canyon_dataset_free(ds: *mut CanyonDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_dataset_link_count(ds: *const CanyonDataset, out: *mut usize) -> CanyonStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(ds, "dataset")?.0.records.len();
        Ok(())
    })
}

/// Sidewalk id of the dataset. Free the result with `canyon_string_free`.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_dataset_sidewalk_id(ds: *const CanyonDataset, out: *mut *mut c_char) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = owned_string(ref_arg(ds, "dataset")?.0.sidewalk_id.clone())?;
        Ok(())
    })
}

/// Compute per-link path gain and fit the single-slope model.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_dataset_fit(ds: *const CanyonDataset, bin_width_deg: f64, out: *mut CanyonFit) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ds = &ref_arg(ds, "dataset")?.0;
        let opts = MetricOptions { bin_width: bin_width_deg, ..MetricOptions::default() };
        let points = dataset_metrics(ds, None, opts)
            .into_iter()
            .map(|m| m.map(|m| (m.distance, m.path_gain)))
            .collect::<canyon::Result<Vec<_>>>()?;
        *out = CanyonFit::from(&fit_labeled(ds.sidewalk_id.clone(), &points)?);
        Ok(())
    })
}

/// Fit `len` (distance, path gain) pairs.
///
/// # Safety
/// `distances_m` and `path_gains_db` must each hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn canyon_fit_points(
    distances_m: *const f64,
    path_gains_db: *const f64,
    len: usize,
    out: *mut CanyonFit,
) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if distances_m.is_null() || path_gains_db.is_null() {
            return Err(null("input array"));
        }
        let d = std::slice::from_raw_parts(distances_m, len);
        let pg = std::slice::from_raw_parts(path_gains_db, len);
        let points: Vec<(f64, f64)> = d.iter().copied().zip(pg.iter().copied()).collect();
        *out = CanyonFit::from(&fit_labeled("points", &points)?);
        Ok(())
    })
}

/// Default 28 GHz link budget.
#[no_mangle]
pub extern "C" fn canyon_budget_default() -> CanyonBudget {
    let b = LinkBudget::default();
    CanyonBudget {
        tx_power_dbm: b.tx_power_dbm,
        tx_max_gain_dbi: b.tx_max_gain_dbi,
        rx_gain_dbi: b.rx_gain_dbi,
        noise_figure_db: b.noise_figure_db,
        bandwidth_hz: b.bandwidth_hz,
        snr_cutoff_db: b.snr_cutoff_db,
        median_abg_dbi: b.median_abg_dbi,
        nominal_azimuth_gain_dbi: b.nominal_azimuth_gain_dbi,
    }
}

/// Receiver noise floor in dBm.
///
/// # Safety
/// `budget` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_noise_floor(budget: *const CanyonBudget, out: *mut f64) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let budget = LinkBudget::from(*ref_arg(budget, "budget")?);
        budget.validate()?;
        *out = noise_floor(&budget);
        Ok(())
    })
}

/// SNR profile summary and cutoff distances on `start..=end` by `step` meters.
///
/// # Safety
/// `fit` and `budget` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_coverage(
    fit: *const CanyonFit,
    budget: *const CanyonBudget,
    start_m: f64,
    end_m: f64,
    step_m: f64,
    out: *mut CanyonCoverage,
) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let f = ref_arg(fit, "fit")?;
        let fit = PathGainFit::from_params("fit", f.slope_n, f.intercept_b, f.rms_sigma, f.d_min, f.d_max);
        let budget = LinkBudget::from(*ref_arg(budget, "budget")?);
        let (_, s) = summarize(&fit, &budget, start_m, end_m, step_m)?;
        let (cutoff_kind, cutoff_m) = cutoff_parts(s.cutoff);
        let (nominal_cutoff_kind, nominal_cutoff_m) = cutoff_parts(s.cutoff_without_degradation);
        *out = CanyonCoverage {
            min_snr_db: s.min_snr_db,
            max_snr_db: s.max_snr_db,
            cutoff_kind,
            cutoff_m,
            nominal_cutoff_kind,
            nominal_cutoff_m,
            mean_rate_bps: s.mean_rate_bps,
        };
        Ok(())
    })
}

/// Read an SCM JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_scm_open(path: *const c_char, out: *mut *mut CanyonScm) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = read_scm_file(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(CanyonScm(m)));
        Ok(())
    })
}

/// Parse SCM JSON from `len` bytes.
///
/// # Safety
/// `bytes` must hold `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_scm_parse(bytes: *const u8, len: usize, out: *mut *mut CanyonScm) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if bytes.is_null() {
            return Err(null("bytes"));
        }
        let m = parse_scm(std::slice::from_raw_parts(bytes, len))?;
        *out = Box::into_raw(Box::new(CanyonScm(m)));
        Ok(())
    })
}

/// # Safety
/// `scm` must come from `canyon_scm_open`/`_parse` or be null.
#[no_mangle]
pub unsafe extern "C" fn canyon_scm_free(scm: *mut CanyonScm) {
    if !scm.is_null() {
        drop(Box::from_raw(scm));
    }
}

/// Canonical JSON of the model. Free the result with `canyon_string_free`.
///
/// # Safety
/// `scm` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_scm_serialize(scm: *const CanyonScm, out: *mut *mut c_char) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let bytes = serialize_scm(&ref_arg(scm, "scm")?.0)?;
        let text = String::from_utf8(bytes).map_err(|_| invalid("serialized model is not UTF-8"))?;
        *out = owned_string(text)?;
        Ok(())
    })
}

/// # Safety
/// `scm` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_scm_is_receiver(scm: *const CanyonScm, out: *mut bool) -> CanyonStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(scm, "scm")?.0.kind == ModelKind::Receiver;
        Ok(())
    })
}

/// Aggregate margin of receiver `rx` against `n_tx` transmitters.
///
/// # Safety
/// `txs` must hold `n_tx` live handles (it may be null when `n_tx` is 0);
/// `rx` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_compat(
    txs: *const *const CanyonScm,
    n_tx: usize,
    rx: *const CanyonScm,
    out: *mut CanyonCompat,
) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let rx = &ref_arg(rx, "rx")?.0;
        let handles: &[*const CanyonScm] = if n_tx == 0 {
            &[]
        } else if txs.is_null() {
            return Err(null("txs"));
        } else {
            std::slice::from_raw_parts(txs, n_tx)
        };
        let models = handles
            .iter()
            .map(|&h| ref_arg(h, "transmitter").map(|m| &m.0))
            .collect::<Result<Vec<_>, _>>()?;
        let grid = frequency_grid(models.iter().copied().chain([rx]));
        let r = aggregate_margin(&models, rx, &grid)?;
        *out = CanyonCompat {
            margin_db: r.margin,
            worst_freq_hz: r.worst_freq.unwrap_or(f64::NAN),
            compatible: r.compatible,
        };
        Ok(())
    })
}

/// Monte Carlo channel deconfliction with the default scenario parameters.
/// When `channels_out` is non-null it receives the channel count of each of
/// the `n_trials` trials.
///
/// # Safety
/// `channels_out` must be null or hold `n_trials` writable values; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn canyon_simulate(
    n_links: usize,
    n_trials: usize,
    seed: u64,
    area_sq_mi: f64,
    channel_bw_hz: f64,
    channels_out: *mut u32,
    out: *mut CanyonSimulation,
) -> CanyonStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if !(area_sq_mi > 0.0) {
            return Err(invalid("area must be positive"));
        }
        let mut cfg = ScenarioConfig::new(n_links);
        cfg.area_side_m = square_side_m(area_sq_mi);
        cfg.channel_bw_hz = channel_bw_hz;
        let s = run_trials(&cfg, n_trials, seed, true)?;
        if !channels_out.is_null() {
            std::slice::from_raw_parts_mut(channels_out, n_trials).copy_from_slice(&s.channels);
        }
        *out = CanyonSimulation {
            n_links: s.n_links,
            n_trials: s.n_trials,
            mode: s.mode,
            max_channels: s.max_channels,
            fraction_two_or_three: s.fraction_two_or_three,
            all_valid: s.all_valid,
            max_link_seconds: s.max_link_seconds,
            mean_link_seconds: s.mean_link_seconds,
        };
        Ok(())
    })
}
