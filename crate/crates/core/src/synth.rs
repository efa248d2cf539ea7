//! Synthetic measurement generator.
//!
//! Recreates rotating-receiver records from a published path-gain model row:
//! each link gets a log-normally shadowed path gain, a Gaussian main beam at
//! its arrival angle on top of a diffuse floor sized to hit a target azimuth
//! gain, and per-sample Rician fading.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::geometry::{bearing, link_distance_3d, Position3D};
use crate::ingest::{
    AntennaPattern, Condition, PatternCut, PowerAngularRecord, Sample, SidewalkDataset, Visibility,
};
use crate::metrics::{dbm_to_mw, mw_to_dbm};

/// One row of the published sidewalk summary tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub name: &'static str,
    pub condition: Condition,
    pub length_m: f64,
    pub links: usize,
    pub slope_n: f64,
    pub intercept_b: f64,
    pub rms_sigma: f64,
    pub median_abg: f64,
    pub p10_abg: f64,
    pub cw_angle: f64,
}

#[allow(clippy::too_many_arguments)]
const fn row(
    name: &'static str,
    condition: Condition,
    length_m: f64,
    links: usize,
    slope_n: f64,
    intercept_b: f64,
    rms_sigma: f64,
    median_abg: f64,
    p10_abg: f64,
    cw_angle: f64,
) -> TableRow {
    TableRow { name, condition, length_m, links, slope_n, intercept_b, rms_sigma, median_abg, p10_abg, cw_angle }
}

use Condition::*;

#[rustfmt::skip]
pub const SIDEWALK_TABLE: &[TableRow] = &[
    row("Int-N-E", Standard, 507.0, 101, -3.5, -36.8, 4.3, 14.1, 12.3, 120.0),
    row("Int-W-N", Standard, 256.0, 79, -2.6, -52.2, 4.4, 14.2, 13.2, 120.0),
    row("Int-S-E", Standard, 317.0, 93, -3.4, -35.5, 4.6, 14.2, 13.4, 120.0),
    row("Int-E-N", Standard, 146.0, 85, -2.3, -60.3, 4.5, 14.2, 13.1, 120.0),
    row("Int-E-S", Standard, 146.0, 88, -2.8, -49.5, 3.2, 14.1, 12.4, 120.0),
    row("Int-N-W", Standard, 509.0, 139, -3.6, -36.0, 3.6, 13.1, 11.8, 120.0),
    row("Int-W-S", Standard, 256.0, 69, -3.1, -47.5, 3.1, 11.6, 10.4, 120.0),
    row("Int-S-W", Standard, 317.0, 100, -3.6, -39.2, 3.4, 12.9, 11.2, 120.0),
    row("Bri-N-E", Standard, 219.0, 65, -2.3, -60.0, 3.9, 12.6, 11.3, 30.0),
    row("Bri-N-W", Standard, 219.0, 70, -2.6, -52.5, 4.3, 13.4, 11.7, 30.0),
    row("Bri-S-E", Standard, 280.0, 84, -2.5, -55.7, 5.5, 12.8, 11.6, 210.0),
    row("Bri-S-W", Standard, 280.0, 87, -2.2, -59.8, 4.0, 13.2, 11.4, 210.0),
    row("Bal-N-E", Standard, 488.0, 156, -3.4, -47.2, 5.8, 13.9, 12.8, 208.0),
    row("Bal-N-W", Standard, 464.0, 136, -2.9, -66.9, 4.2, 12.6, 10.0, 208.0),
    row("Bal-E-N", Standard, 842.0, 129, -1.5, -94.1, 6.5, 14.1, 12.1, 120.0),
    row("Roof-B-N", Standard, 98.0, 33, 0.34, -110.2, 3.4, 10.5, 7.9, 300.0),
    row("Roof-B-S", Standard, 98.0, 33, 4.94, -190.0, 3.6, 10.9, 8.8, 300.0),
    row("Roof-S-W", Standard, 1058.0, 150, -1.06, -101.8, 5.7, 13.7, 12.1, 300.0),
    row("Roof-S-E", Standard, 1040.0, 137, -0.22, -119.7, 5.8, 13.8, 12.8, 300.0),
    row("Roof-S2-E", Standard, 1102.0, 171, -1.21, -104.4, 7.8, 13.6, 11.6, 30.0),
    row("Roof-S2-W", Standard, 1209.0, 118, -3.11, -45.8, 4.4, 14.2, 13.2, 30.0),
    row("Roof-SE-N", Standard, 573.0, 114, -2.41, -61.1, 5.5, 14.0, 12.7, 120.0),
    row("Roof-E-N", Standard, 647.0, 97, -2.39, -72.2, 3.5, 13.5, 12.3, 120.0),
    row("Roof-E-S", Standard, 644.0, 97, 0.50, -136.5, 5.8, 14.2, 12.6, 120.0),
    row("Int-N-E-NLe", NoLeaves, 507.0, 125, -2.95, -42.9, 3.8, 14.1, 12.4, 120.0),
    row("Int-N-E-10ft", TxRaised, 507.0, 79, -3.86, -27.0, 3.7, 13.9, 11.0, 120.0),
    row("Int-W-N-NLe", NoLeaves, 256.0, 77, -1.92, -63.9, 3.7, 14.1, 12.5, 120.0),
    row("Int-W-N-Swap", Swap, 256.0, 79, -2.72, -48.7, 3.2, 12.9, 10.6, 210.0),
    row("Int-W-N-St", Street, 256.0, 68, -2.33, -56.4, 3.6, 13.7, 9.9, 120.0),
    row("Int-W-N2", Adjacent, 259.0, 81, -5.58, -22.1, 6.3, 12.9, 9.8, 120.0),
    row("Int-W-S-Swap", Swap, 256.0, 79, -2.93, -52.8, 2.9, 10.4, 8.2, 210.0),
    row("Int-W-S-Wall", Wall, 198.0, 53, -3.32, -40.7, 3.5, 11.9, 9.4, 120.0),
];

pub fn table_row(name: &str) -> Option<&'static TableRow> {
    SIDEWALK_TABLE.iter().find(|r| r.name.eq_ignore_ascii_case(name))
}

/// 10th-percentile z-score of the standard normal.
const Z_P10: f64 = 1.281_551_565_545;

/// Half-power beamwidth of the receive horn in azimuth, degrees.
pub const HORN_AZIMUTH_HPBW_DEG: f64 = 10.0;
pub const HORN_ELEVATION_HPBW_DEG: f64 = 12.0;

/// Tabulated cut of a horn: Gaussian main lobe, then the envelope of the
/// sidelobe peaks of a uniformly illuminated aperture (first sidelobe at
/// `sidelobe_db`, falling as 1/u with an obliquity factor), floored at `backlobe_db`.
pub fn horn_cut(hpbw_deg: f64, sidelobe_db: f64, backlobe_db: f64) -> PatternCut {
    // sin(u)/u is 3 dB down at u = 1.392 and peaks again at u = 1.430 pi
    let aperture = 1.392 / (hpbw_deg.to_radians() / 2.0).sin();
    let u_first = 1.430 * PI;
    let points = (-180..=180)
        .map(|a| {
            let deg = f64::from(a).abs();
            let t = deg.to_radians();
            let main = -12.0 * (deg / hpbw_deg).powi(2);
            let u = aperture * t.sin();
            let decay = if u > u_first { 20.0 * (u_first / u).log10() } else { 0.0 };
            let obliquity = 20.0 * ((1.0 + t.cos()) / 2.0).max(1e-9).log10();
            let side = if deg > hpbw_deg || t > FRAC_PI_2 { sidelobe_db + decay + obliquity } else { f64::NEG_INFINITY };
            (f64::from(a), main.max(side).max(backlobe_db).min(0.0))
        })
        .collect();
    PatternCut { points }
}

/// Stand-in for the measured 24 dBi, 10° horn (the measured cuts are not
/// published numerically): E-plane in azimuth, H-plane in elevation.
pub fn horn_pattern() -> AntennaPattern {
    AntennaPattern::from_cuts(
        horn_cut(HORN_AZIMUTH_HPBW_DEG, -13.26, -30.0),
        horn_cut(HORN_ELEVATION_HPBW_DEG, -23.0, -30.0),
        24.0,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub link_id: String,
    pub tx: Position3D,
    pub rx: Position3D,
    pub path_gain_db: f64,
    /// Arrival bearing of the main beam at the Rx.
    pub aoa_deg: f64,
    pub abg_dbi: f64,
    pub k_factor_db: f64,
    pub scans: usize,
    pub samples_per_scan: usize,
}

/// Per-bin shape: diffuse floor plus a Gaussian beam of the horn's width.
fn beam_shape(aoa: f64, abg_dbi: f64) -> impl Fn(f64) -> f64 {
    let w = HORN_AZIMUTH_HPBW_DEG / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let mean_beam = w * (2.0 * PI).sqrt() / 360.0;
    let target = 10f64.powf(abg_dbi / 10.0);
    let floor = if target * mean_beam >= 1.0 {
        1e-6
    } else {
        ((1.0 - target * mean_beam) / (target - 1.0)).max(1e-6)
    };
    let norm = floor + mean_beam;
    move |az: f64| {
        let dev = crate::geometry::angular_deviation(az, aoa);
        (floor + (-dev * dev / (2.0 * w * w)).exp()) / norm
    }
}

/// Unit-mean Rician power draw with K-factor `k` (linear).
fn rician_power(rng: &mut impl Rng, k: f64, normal: &Normal<f64>) -> f64 {
    let los = (k / (k + 1.0)).sqrt();
    let s = (0.5 / (k + 1.0)).sqrt();
    let re = los + s * normal.sample(rng);
    let im = s * normal.sample(rng);
    re * re + im * im
}

pub fn synth_record(spec: &LinkSpec, tx_power_dbm: f64, rng: &mut impl Rng) -> Result<PowerAngularRecord> {
    if spec.scans == 0 || spec.samples_per_scan < 2 {
        return Err(Error::invalid("need at least one scan of two samples"));
    }
    let shape = beam_shape(spec.aoa_deg, spec.abg_dbi);
    let mean_mw = dbm_to_mw(spec.path_gain_db + tx_power_dbm);
    let k = 10f64.powf(spec.k_factor_db / 10.0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    // 120 rpm rotation
    let scan_period = 0.5;
    let step = 360.0 / spec.samples_per_scan as f64;
    let phase: f64 = rng.gen::<f64>() * step;
    let mut samples = Vec::with_capacity(spec.scans * spec.samples_per_scan);
    for scan in 0..spec.scans {
        for i in 0..spec.samples_per_scan {
            let az = (phase + i as f64 * step).min(359.999_999);
            let fade = rician_power(rng, k, &normal);
            samples.push(Sample {
                time_s: scan as f64 * scan_period + i as f64 * scan_period / spec.samples_per_scan as f64,
                azimuth_deg: az,
                power_dbm: mw_to_dbm(mean_mw * shape(az) * fade),
            });
        }
    }
    Ok(PowerAngularRecord {
        link_id: spec.link_id.clone(),
        tx_pos: spec.tx,
        rx_pos: spec.rx,
        samples,
        scan_count: spec.scans as u32,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub rx_height_m: f64,
    /// Perpendicular offset of the sidewalk from the Rx, meters.
    pub lateral_offset_m: f64,
    pub first_distance_m: f64,
    pub scans: usize,
    pub samples_per_scan: usize,
    pub k_factor_db: f64,
    pub max_links: Option<usize>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            rx_height_m: 15.0,
            lateral_offset_m: 8.0,
            first_distance_m: 3.0,
            scans: 40,
            samples_per_scan: 400,
            k_factor_db: 10.0,
            max_links: None,
        }
    }
}

/// Shadowed `(d, pg)` points from a table row at evenly spaced distances.
pub fn synth_points(row: &TableRow, n_points: usize, d_min: f64, d_max: f64, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    let shadow = Normal::new(0.0, row.rms_sigma).expect("sigma is finite");
    (0..n_points)
        .map(|i| {
            let t = if n_points > 1 { i as f64 / (n_points - 1) as f64 } else { 0.0 };
            let d = d_min + t * (d_max - d_min);
            (d, row.intercept_b + 10.0 * row.slope_n * d.log10() + shadow.sample(rng))
        })
        .collect()
}

/// Full synthetic sidewalk dataset for a table row. Deterministic in `seed`.
pub fn synth_sidewalk(row: &TableRow, opts: &SynthOptions, seed: u64) -> Result<SidewalkDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let links = opts.max_links.map_or(row.links, |m| m.min(row.links)).max(2);
    let spacing = (row.length_m - opts.first_distance_m) / (links - 1) as f64;
    let rx = Position3D::new(0.0, 0.0, opts.rx_height_m);
    let (se, sn) = row.cw_angle.to_radians().sin_cos();
    // sidewalk runs along the table bearing, offset to the right of the Rx
    let (oe, on) = (sn * opts.lateral_offset_m, -se * opts.lateral_offset_m);
    let shadow = Normal::new(0.0, row.rms_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let abg_spread = ((row.median_abg - row.p10_abg) / Z_P10).max(0.0);
    let abg = Normal::new(row.median_abg, abg_spread).map_err(|e| Error::invalid(e.to_string()))?;

    let mut ds = SidewalkDataset::new(
        row.name,
        row.condition,
        if row.slope_n < -3.2 { Visibility::Vnlos } else { Visibility::Vlos },
    );
    for k in 0..links {
        let s = opts.first_distance_m + k as f64 * spacing;
        let tx = Position3D::new(oe + se * s, on + sn * s, 0.0);
        let d = link_distance_3d(&tx, &rx);
        let spec = LinkSpec {
            link_id: format!("L{:03}", k + 1),
            tx,
            rx,
            path_gain_db: row.intercept_b + 10.0 * row.slope_n * d.log10() + shadow.sample(&mut rng),
            aoa_deg: bearing(&rx, &tx)?,
            abg_dbi: abg.sample(&mut rng).clamp(3.0, 20.0),
            k_factor_db: opts.k_factor_db,
            scans: opts.scans,
            samples_per_scan: opts.samples_per_scan,
        };
        ds.records.push(synth_record(&spec, ds.tx_power_dbm, &mut rng)?);
    }
    ds.sort_records();
    Ok(ds)
}
