//! Per-link channel metrics computed from rotating-receiver records: the
//! time-averaged power angular spectrum, path gain with elevation correction,
//! azimuth beamforming gain, temporal K-factor, AoA, and spectrum stacks.
//!
//! All averaging happens in linear power (mW); results are reported in dB.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{angular_deviation, zenith_angle};
use crate::ingest::{AntennaPattern, PowerAngularRecord, SidewalkDataset};

pub const DEFAULT_BIN_WIDTH_DEG: f64 = 1.0;
/// Half-power beamwidth of the receive horn; default K-factor gate.
pub const DEFAULT_K_WINDOW_DEG: f64 = 10.0;
pub const K_FACTOR_CAP_DB: f64 = 60.0;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Mean received power per azimuth bin over `[0, 360)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerAngularSpectrum {
    pub link_id: String,
    pub distance: f64,
    pub bin_width: f64,
    /// Linear power, mW. Always positive.
    pub bins: Vec<f64>,
    /// Bins that received no samples and were filled by interpolation.
    pub interpolated: Vec<bool>,
}

fn bin_count(bin_width: f64) -> Result<usize> {
    if !(bin_width > 0.0) || bin_width > 180.0 {
        return Err(Error::invalid(format!("bin width {bin_width} must be in (0, 180]")));
    }
    let n = (360.0 / bin_width).round();
    if (n * bin_width - 360.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("bin width {bin_width} does not divide 360")));
    }
    Ok(n as usize)
}

impl PowerAngularSpectrum {
    /// Wrap already-binned linear powers. No interpolation is applied.
    pub fn from_bins(link_id: impl Into<String>, distance: f64, bins: Vec<f64>) -> Result<Self> {
        if bins.len() < 2 {
            return Err(Error::invalid("a PAS needs at least two bins"));
        }
        if bins.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::invalid("PAS bin powers must be finite and positive"));
        }
        if !(distance > 0.0) {
            return Err(Error::invalid(format!("PAS distance {distance} must be positive")));
        }
        let bin_width = 360.0 / bins.len() as f64;
        let interpolated = vec![false; bins.len()];
        Ok(Self {
            link_id: link_id.into(),
            distance,
            bin_width,
            bins,
            interpolated,
        })
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.bin_width
    }

    pub fn mean_mw(&self) -> f64 {
        self.bins.iter().sum::<f64>() / self.bins.len() as f64
    }

    pub fn max_mw(&self) -> f64 {
        self.bins.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_dbm(&self) -> Vec<f64> {
        self.bins.iter().map(|&b| mw_to_dbm(b)).collect()
    }

    pub fn interpolated_count(&self) -> usize {
        self.interpolated.iter().filter(|&&f| f).count()
    }
}

pub fn average_pas(rec: &PowerAngularRecord, bin_width: f64) -> Result<PowerAngularSpectrum> {
    let n = bin_count(bin_width)?;
    let distance = rec.distance();
    if !(distance > 0.0) {
        return Err(Error::Degenerate(format!("link {} has zero length", rec.link_id)));
    }
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for s in &rec.samples {
        let idx = ((s.azimuth_deg / bin_width).floor() as usize).min(n - 1);
        sums[idx] += dbm_to_mw(s.power_dbm);
        counts[idx] += 1;
    }
    let filled: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
    if filled.len() < 2 {
        return Err(Error::NoRotation(rec.link_id.clone()));
    }
    let mut bins: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let interpolated: Vec<bool> = counts.iter().map(|&c| c == 0).collect();

    // Circular linear interpolation (in mW) between the nearest filled neighbours.
    for (k, &lo) in filled.iter().enumerate() {
        let hi = filled[(k + 1) % filled.len()];
        let gap = (hi + n - lo) % n;
        let gap = if gap == 0 { n } else { gap };
        for step in 1..gap {
            let t = step as f64 / gap as f64;
            bins[(lo + step) % n] = bins[lo] * (1.0 - t) + bins[hi] * t;
        }
    }

    Ok(PowerAngularSpectrum {
        link_id: rec.link_id.clone(),
        distance,
        bin_width,
        bins,
        interpolated,
    })
}

/// Azimuth-averaged received power relative to transmit power, corrected for
/// the receive pattern's elevation gain. `elev_correction_db` is the relative
/// elevation gain (≤ 0 dB) and is divided out.
pub fn path_gain(pas: &PowerAngularSpectrum, tx_power_dbm: f64, elev_correction_db: f64) -> f64 {
    mw_to_dbm(pas.mean_mw()) - tx_power_dbm - elev_correction_db
}

/// Relative elevation-cut gain at the given zenith offset.
pub fn elevation_correction(pattern: &AntennaPattern, zenith_deg: f64) -> Result<f64> {
    pattern.elevation_cut.gain_at(zenith_deg).ok_or_else(|| {
        Error::invalid(format!("zenith angle {zenith_deg} outside the elevation pattern"))
    })
}

/// Peak-to-average ratio of the PAS, dBi.
pub fn azimuth_gain(pas: &PowerAngularSpectrum) -> f64 {
    let max = pas.max_mw();
    let relative = pas.bins.iter().map(|&b| b / max).sum::<f64>() / pas.bins.len() as f64;
    mw_to_dbm(1.0 / relative)
}

/// Centre of the strongest bin; ties go to the smallest angle.
pub fn aoa(pas: &PowerAngularSpectrum) -> f64 {
    let mut best = 0;
    for (i, &b) in pas.bins.iter().enumerate() {
        if b > pas.bins[best] {
            best = i;
        }
    }
    pas.bin_center(best)
}

/// Method-of-moments Rician K-factor from a series of linear power observations.
///
/// With mean power `P` and sample variance `s²`, the specular power is
/// `V = sqrt(max(P² - s², 0))` and `K = V / (P - V)`. The result is returned in
/// dB and clamped to `±K_FACTOR_CAP_DB`.
pub fn k_factor_from_powers(powers: &[f64]) -> Result<f64> {
    if powers.len() < 2 {
        return Err(Error::invalid(format!(
            "K-factor needs at least 2 observations, got {}",
            powers.len()
        )));
    }
    let n = powers.len() as f64;
    let mean = powers.iter().sum::<f64>() / n;
    let var = powers.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let specular = (mean * mean - var).max(0.0).sqrt();
    let diffuse = mean - specular;
    if diffuse <= 0.0 {
        return Ok(K_FACTOR_CAP_DB);
    }
    let k = specular / diffuse;
    if k <= 0.0 {
        return Ok(-K_FACTOR_CAP_DB);
    }
    Ok((10.0 * k.log10()).clamp(-K_FACTOR_CAP_DB, K_FACTOR_CAP_DB))
}

/// Per-scan mean linear power of the samples within `±window/2` of `aoa`.
///
/// A scan boundary is a decrease in azimuth between consecutive samples (the
/// receiver turns clockwise). Scans with no gated samples are skipped.
pub fn scan_powers(rec: &PowerAngularRecord, aoa_deg: f64, window_deg: f64) -> Vec<f64> {
    let half = window_deg / 2.0;
    let mut out = Vec::new();
    let mut acc = 0.0;
    let mut count = 0usize;
    let mut prev_az = f64::NEG_INFINITY;
    for s in &rec.samples {
        if s.azimuth_deg < prev_az {
            if count > 0 {
                out.push(acc / count as f64);
            }
            acc = 0.0;
            count = 0;
        }
        prev_az = s.azimuth_deg;
        if angular_deviation(s.azimuth_deg, aoa_deg) <= half {
            acc += dbm_to_mw(s.power_dbm);
            count += 1;
        }
    }
    if count > 0 {
        out.push(acc / count as f64);
    }
    out
}

pub fn k_factor_moments(rec: &PowerAngularRecord, aoa_deg: f64, window_deg: f64) -> Result<f64> {
    let powers = scan_powers(rec, aoa_deg, window_deg);
    if powers.len() < 2 {
        return Err(Error::invalid(format!(
            "link {}: K-factor needs at least 2 scans through the AoA window, found {}",
            rec.link_id,
            powers.len()
        )));
    }
    k_factor_from_powers(&powers)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    pub bin_width: f64,
    pub k_window: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            bin_width: DEFAULT_BIN_WIDTH_DEG,
            k_window: DEFAULT_K_WINDOW_DEG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkMetrics {
    pub link_id: String,
    pub distance: f64,
    pub path_gain: f64,
    pub azimuth_gain: f64,
    pub k_factor: Option<f64>,
    pub aoa: f64,
    pub zenith: f64,
    pub interpolated_bins: usize,
}

pub fn link_metrics(
    rec: &PowerAngularRecord,
    tx_power_dbm: f64,
    pattern: Option<&AntennaPattern>,
    opts: MetricOptions,
) -> Result<LinkMetrics> {
    let pas = average_pas(rec, opts.bin_width)?;
    let zenith = zenith_angle(&rec.tx_pos, &rec.rx_pos);
    let correction = match pattern {
        Some(p) => elevation_correction(p, zenith)?,
        None => 0.0,
    };
    let peak = aoa(&pas);
    Ok(LinkMetrics {
        link_id: rec.link_id.clone(),
        distance: pas.distance,
        path_gain: path_gain(&pas, tx_power_dbm, correction),
        azimuth_gain: azimuth_gain(&pas),
        k_factor: k_factor_moments(rec, peak, opts.k_window).ok(),
        aoa: peak,
        zenith,
        interpolated_bins: pas.interpolated_count(),
    })
}

/// Metrics for every link, computed in parallel; output order follows the dataset.
pub fn dataset_metrics(
    ds: &SidewalkDataset,
    pattern: Option<&AntennaPattern>,
    opts: MetricOptions,
) -> Vec<Result<LinkMetrics>> {
    ds.records
        .par_iter()
        .map(|r| link_metrics(r, ds.tx_power_dbm, pattern, opts))
        .collect()
}

/// Per-link PAS in dB stacked by distance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumStack {
    pub bin_centers: Vec<f64>,
    pub rows: Vec<StackRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackRow {
    pub link_id: String,
    pub distance: f64,
    pub power_dbm: Vec<f64>,
}

pub fn spectrum_stack_grid(ds: &SidewalkDataset, bin_width: f64) -> Result<SpectrumStack> {
    if ds.records.is_empty() {
        return Err(Error::invalid(format!("dataset {} has no links", ds.sidewalk_id)));
    }
    let spectra: Vec<PowerAngularSpectrum> = ds
        .records
        .par_iter()
        .map(|r| average_pas(r, bin_width))
        .collect::<Result<_>>()?;
    let bin_centers = (0..spectra[0].len()).map(|i| spectra[0].bin_center(i)).collect();
    let mut rows: Vec<StackRow> = spectra
        .into_iter()
        .map(|p| StackRow {
            power_dbm: p.to_dbm(),
            link_id: p.link_id,
            distance: p.distance,
        })
        .collect();
    rows.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(SpectrumStack { bin_centers, rows })
}

impl SpectrumStack {
    /// Header row of bin centres, then one `distance,p0,p1,...` row per link.
    pub fn to_text(&self) -> String {
        let mut out = String::from("distance_m");
        for c in &self.bin_centers {
            let _ = write!(out, ",{}", crate::report::fmt_sig(*c));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&crate::report::fmt_sig(row.distance));
            for p in &row.power_dbm {
                let _ = write!(out, ",{}", crate::report::fmt_sig(*p));
            }
            out.push('\n');
        }
        out
    }
}

/// Empirical CDF of a set of gains.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("CDF of an empty set"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("CDF values must be finite"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of values `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Lower-rule quantile: the value at index `floor(q (n - 1))`.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let idx = (q * (self.sorted.len() - 1) as f64 + 1e-12).floor() as usize;
        self.sorted[idx.min(self.sorted.len() - 1)]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }
}

pub fn abg_cdf(values: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Position3D;
    use crate::ingest::Sample;

    fn record(samples: Vec<Sample>) -> PowerAngularRecord {
        PowerAngularRecord {
            link_id: "L".into(),
            tx_pos: Position3D::new(0.0, 50.0, 0.0),
            rx_pos: Position3D::new(0.0, 0.0, 0.0),
            samples,
            scan_count: 40,
        }
    }

    fn uniform_record(power: f64, per_scan: usize, scans: usize) -> PowerAngularRecord {
        let mut samples = Vec::new();
        for s in 0..scans {
            for i in 0..per_scan {
                let az = (i as f64 + 0.5) * 360.0 / per_scan as f64;
                samples.push(Sample {
                    time_s: (s * per_scan + i) as f64 * 1e-3,
                    azimuth_deg: az,
                    power_dbm: power,
                });
            }
        }
        record(samples)
    }

    #[test]
    fn constant_record_gives_flat_pas() {
        let pas = average_pas(&uniform_record(-60.0, 400, 40), 1.0).unwrap();
        assert_eq!(pas.len(), 360);
        for b in &pas.bins {
            assert!((b - 1e-6).abs() < 1e-18);
        }
        assert_eq!(pas.interpolated_count(), 0);
        assert!((path_gain(&pas, 22.0, 0.0) + 82.0).abs() < 1e-9);
        assert!(azimuth_gain(&pas).abs() < 1e-9);
    }

    #[test]
    fn two_bins_interpolated() {
        let samples = vec![
            Sample { time_s: 0.0, azimuth_deg: 0.5, power_dbm: -50.0 },
            Sample { time_s: 0.1, azimuth_deg: 180.5, power_dbm: -50.0 },
        ];
        let pas = average_pas(&record(samples), 1.0).unwrap();
        assert_eq!(pas.bins[0], pas.bins[180]);
        assert_eq!(pas.interpolated_count(), 358);
        assert!(pas.interpolated[1] && !pas.interpolated[180]);
        // flat interpolation between equal peaks
        assert!((pas.bins[90] - pas.bins[0]).abs() < 1e-18);
    }

    #[test]
    fn interpolation_is_linear_in_mw() {
        let samples = vec![
            Sample { time_s: 0.0, azimuth_deg: 0.5, power_dbm: 0.0 },
            Sample { time_s: 0.1, azimuth_deg: 4.5, power_dbm: 10.0 * 5f64.log10() },
        ];
        let pas = average_pas(&record(samples), 1.0).unwrap();
        assert!((pas.bins[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_bin_is_no_rotation() {
        let samples = (0..100)
            .map(|i| Sample { time_s: i as f64, azimuth_deg: 42.2, power_dbm: -60.0 })
            .collect();
        assert!(matches!(average_pas(&record(samples), 1.0), Err(Error::NoRotation(_))));
    }

    #[test]
    fn bad_bin_width() {
        assert!(average_pas(&uniform_record(-60.0, 10, 2), 7.0).is_err());
        assert!(average_pas(&uniform_record(-60.0, 10, 2), 0.0).is_err());
    }

    #[test]
    fn abg_closed_forms() {
        let mut bins = vec![1e-30; 360];
        bins[90] = 1.0;
        let pas = PowerAngularSpectrum::from_bins("hot", 10.0, bins).unwrap();
        assert!((azimuth_gain(&pas) - 10.0 * 360f64.log10()).abs() < 1e-9);
        assert_eq!(aoa(&pas), 90.5);

        let bins: Vec<f64> = (0..360).map(|i| if i < 10 { 1.0 } else { 1e-30 }).collect();
        let pas = PowerAngularSpectrum::from_bins("rect", 10.0, bins).unwrap();
        assert!((azimuth_gain(&pas) - 10.0 * 36f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn aoa_tie_breaks_low() {
        let mut bins = vec![1.0; 360];
        bins[10] = 5.0;
        bins[200] = 5.0;
        let pas = PowerAngularSpectrum::from_bins("tie", 10.0, bins).unwrap();
        assert_eq!(aoa(&pas), 10.5);
    }

    #[test]
    fn elevation_lookup() {
        use crate::ingest::PatternCut;
        let el = PatternCut::new(vec![(-180.0, -30.0), (0.0, 0.0), (10.0, -1.0), (20.0, -3.0), (180.0, -30.0)])
            .unwrap();
        let pattern = AntennaPattern::from_cuts(PatternCut::flat(0.0), el, 24.0);
        assert_eq!(elevation_correction(&pattern, 0.0).unwrap(), 0.0);
        assert_eq!(elevation_correction(&pattern, 10.0).unwrap(), -1.0);
        assert!((elevation_correction(&pattern, 15.0).unwrap() + 2.0).abs() < 1e-12);
        assert!(elevation_correction(&pattern, 200.0).is_err());
    }

    #[test]
    fn k_factor_constant_is_capped() {
        assert_eq!(k_factor_from_powers(&[2.0; 50]).unwrap(), K_FACTOR_CAP_DB);
        assert!(k_factor_from_powers(&[1.0]).is_err());
        let rec = uniform_record(-60.0, 36, 5);
        assert_eq!(k_factor_moments(&rec, 0.0, 10.0).unwrap(), K_FACTOR_CAP_DB);
        let one_scan = uniform_record(-60.0, 36, 1);
        assert!(k_factor_moments(&one_scan, 0.0, 10.0).is_err());
    }

    #[test]
    fn scan_segmentation() {
        let rec = uniform_record(-60.0, 36, 7);
        assert_eq!(scan_powers(&rec, 95.0, 10.0).len(), 7);
    }

    #[test]
    fn cdf_quantiles() {
        let c = abg_cdf(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(c.quantile(0.5), 2.0);
        let single = abg_cdf(&[13.0]).unwrap();
        assert_eq!(single.cdf(12.9), 0.0);
        assert_eq!(single.cdf(13.0), 1.0);
        assert_eq!(single.quantile(0.1), 13.0);
        let ten: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(abg_cdf(&ten).unwrap().quantile(0.1), 1.0);
        assert!(abg_cdf(&[]).is_err());
    }
}
