//! Spectrum Consumption Models: masks, power and propagation maps, schedule
//! and location, bundled into transmitter and receiver models.
//!
//! Models serialize to a canonical JSON document (schema `scm/1`, keys sorted,
//! shortest round-trip float formatting) so that
//! `serialize(parse(serialize(m)))` is byte-identical to `serialize(m)`.
//! Field names are documented in `docs/formats.md`; the layout is modelled
//! on IEEE 1900.5.2 constructs but makes no claim of schema conformance.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_deg, Position3D};
use crate::ingest::AntennaPattern;
use crate::pathloss::PathGainFit;

pub const SCM_VERSION: &str = "scm/1";
pub const DEFAULT_PROPAGATION_EXPONENT: f64 = 2.0;
const MHZ: f64 = 1e6;

/// Piecewise-linear relative PSD by frequency. Evaluates to `-inf` outside its span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mask {
    /// `[freq_hz, rel_psd_db]`, frequencies strictly increasing.
    pub breakpoints: Vec<(f64, f64)>,
}

/// Relative PSD of a transmitter's emissions.
pub type SpectrumMask = Mask;
/// Relative PSD of interference a receiver tolerates.
pub type UnderlayMask = Mask;

impl Mask {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let m = Self { breakpoints };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.len() < 2 {
            return Err(Error::invalid("mask needs at least 2 breakpoints"));
        }
        if self.breakpoints.iter().any(|(f, db)| !f.is_finite() || !db.is_finite()) {
            return Err(Error::invalid("mask breakpoints must be finite"));
        }
        if self.breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("mask frequencies must be strictly increasing"));
        }
        Ok(())
    }

    /// Flat top of `passband_hz` around `center_hz`, falling linearly (in dB)
    /// to `skirt_db` over `skirt_hz` on each side.
    pub fn trapezoid(center_hz: f64, passband_hz: f64, skirt_hz: f64, skirt_db: f64) -> Self {
        let half = passband_hz / 2.0;
        Self {
            breakpoints: vec![
                (center_hz - half - skirt_hz, skirt_db),
                (center_hz - half, 0.0),
                (center_hz + half, 0.0),
                (center_hz + half + skirt_hz, skirt_db),
            ],
        }
    }

    pub fn span(&self) -> (f64, f64) {
        (self.breakpoints[0].0, self.breakpoints[self.breakpoints.len() - 1].0)
    }

    pub fn contains(&self, f: f64) -> bool {
        let (lo, hi) = self.span();
        f >= lo && f <= hi
    }

    pub fn eval(&self, f: f64) -> f64 {
        if !self.contains(f) {
            return f64::NEG_INFINITY;
        }
        let bp = &self.breakpoints;
        let idx = bp.partition_point(|p| p.0 <= f);
        let (f0, v0) = bp[idx - 1];
        if idx == bp.len() || f0 == f {
            return v0;
        }
        let (f1, v1) = bp[idx];
        v0 + (v1 - v0) * (f - f0) / (f1 - f0)
    }

    pub fn shifted(&self, df: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().map(|&(f, v)| (f + df, v)).collect(),
        }
    }

    /// Width of the region at the mask's maximum level; the bandwidth the
    /// reference power is spread over. Falls back to 1 MHz for peaked masks.
    pub fn reference_bandwidth_hz(&self) -> f64 {
        let top = self.breakpoints.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let width: f64 = self
            .breakpoints
            .windows(2)
            .filter(|w| w[0].1 == top && w[1].1 == top)
            .map(|w| w[1].0 - w[0].0)
            .sum();
        if width > 0.0 {
            width
        } else {
            MHZ
        }
    }

    /// PSD offset (dB per MHz) for spreading the reference power over the reference bandwidth.
    pub fn psd_offset_db(&self) -> f64 {
        -10.0 * (self.reference_bandwidth_hz() / MHZ).log10()
    }
}

/// Default stand-in mask: 0 dB over 1 MHz with -40 dB skirts 0.5 MHz wide.
pub fn default_mask(center_hz: f64) -> Mask {
    Mask::trapezoid(center_hz, 1.0 * MHZ, 0.5 * MHZ, -40.0)
}

/// Relative gain over the full sphere on a regular grid, boresight-referenced.
///
/// `gains_db` is row-major: elevation rows from -90° to +90°, each holding
/// azimuths `0, res, ..., 360 - res`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainGrid {
    pub resolution_deg: f64,
    pub gains_db: Vec<f64>,
}

impl GainGrid {
    fn dims(resolution_deg: f64) -> Result<(usize, usize)> {
        if !(resolution_deg > 0.0) || resolution_deg > 90.0 {
            return Err(Error::invalid(format!("map resolution {resolution_deg} must be in (0, 90]")));
        }
        let az = (360.0 / resolution_deg).round();
        let el = (180.0 / resolution_deg).round();
        if (az * resolution_deg - 360.0).abs() > 1e-9 || (el * resolution_deg - 180.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("map resolution {resolution_deg} does not divide 180")));
        }
        Ok((az as usize, el as usize + 1))
    }

    pub fn azimuth_count(&self) -> usize {
        (360.0 / self.resolution_deg).round() as usize
    }

    pub fn elevation_count(&self) -> usize {
        (180.0 / self.resolution_deg).round() as usize + 1
    }

    fn at(&self, az_idx: usize, el_idx: usize) -> f64 {
        self.gains_db[el_idx * self.azimuth_count() + az_idx]
    }

    pub fn validate(&self) -> Result<()> {
        let (naz, nel) = Self::dims(self.resolution_deg)?;
        if self.gains_db.len() != naz * nel {
            return Err(Error::invalid(format!(
                "power map has {} entries, expected {} ({naz} azimuths x {nel} elevations)",
                self.gains_db.len(),
                naz * nel
            )));
        }
        if self.gains_db.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("power map gains must be finite"));
        }
        let max = self.gains_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max.abs() > 1e-9 {
            return Err(Error::invalid(format!("power map maximum is {max} dB, must be 0 dB")));
        }
        Ok(())
    }
}

fn quantize(x: f64, step: f64) -> f64 {
    let q = (x / step).round() * step;
    // canonical text: two decimals, never -0
    let q = (q * 100.0).round() / 100.0;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerMap {
    /// Bearing (clockwise from north) of the grid's 0° azimuth.
    pub orientation_deg: f64,
    pub grid: Arc<GainGrid>,
}

impl PowerMap {
    pub fn isotropic(resolution_deg: f64) -> Result<Self> {
        let (naz, nel) = GainGrid::dims(resolution_deg)?;
        Ok(Self {
            orientation_deg: 0.0,
            grid: Arc::new(GainGrid {
                resolution_deg,
                gains_db: vec![0.0; naz * nel],
            }),
        })
    }

    /// Sum the azimuth and elevation cuts in dB, clamp at the pattern's
    /// back-lobe floor and renormalize to a 0 dB maximum. Stored gains are
    /// rounded to 0.01 dB.
    pub fn from_pattern(pattern: &AntennaPattern, resolution_deg: f64, orientation_deg: f64) -> Result<Self> {
        let (naz, nel) = GainGrid::dims(resolution_deg)?;
        let floor = pattern.floor_db();
        let mut gains = Vec::with_capacity(naz * nel);
        for e in 0..nel {
            let el = -90.0 + e as f64 * resolution_deg;
            let el_gain = pattern.elevation_cut.gain_wrapped(el);
            for a in 0..naz {
                let az = a as f64 * resolution_deg;
                gains.push((pattern.azimuth_cut.gain_wrapped(az) + el_gain).max(floor));
            }
        }
        let max = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for g in &mut gains {
            *g = quantize(*g - max, 0.01);
        }
        Ok(Self {
            orientation_deg: normalize_deg(orientation_deg),
            grid: Arc::new(GainGrid {
                resolution_deg,
                gains_db: gains,
            }),
        })
    }

    /// Same pattern pointed at a different bearing; shares the grid.
    pub fn oriented(&self, orientation_deg: f64) -> Self {
        Self {
            orientation_deg: normalize_deg(orientation_deg),
            grid: Arc::clone(&self.grid),
        }
    }

    /// Bilinear (in dB) lookup at an absolute bearing and elevation.
    pub fn gain(&self, bearing_deg: f64, elevation_deg: f64) -> f64 {
        let g = &*self.grid;
        let res = g.resolution_deg;
        let naz = g.azimuth_count();
        let nel = g.elevation_count();
        let az = normalize_deg(bearing_deg - self.orientation_deg) / res;
        let el = ((elevation_deg.clamp(-90.0, 90.0) + 90.0) / res).min((nel - 1) as f64);
        let a0 = (az.floor() as usize).min(naz - 1);
        let a1 = (a0 + 1) % naz;
        let ta = az - a0 as f64;
        let e0 = (el.floor() as usize).min(nel - 1);
        let e1 = (e0 + 1).min(nel - 1);
        let te = el - e0 as f64;
        let low = g.at(a0, e0) * (1.0 - ta) + g.at(a1, e0) * ta;
        let high = g.at(a0, e1) * (1.0 - ta) + g.at(a1, e1) * ta;
        low * (1.0 - te) + high * te
    }
}

/// Path-loss exponent by azimuth sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationMap {
    pub resolution_deg: f64,
    /// One exponent per azimuth cell `[i res, (i + 1) res)`, bearings clockwise from north.
    pub exponents: Vec<f64>,
    /// `false` where the exponent is the declared default rather than a fit.
    pub measured: Vec<bool>,
}

impl PropagationMap {
    pub fn uniform(exponent: f64, resolution_deg: f64) -> Result<Self> {
        let (naz, _) = GainGrid::dims(resolution_deg)?;
        let map = Self {
            resolution_deg,
            exponents: vec![exponent; naz],
            measured: vec![true; naz],
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        let (naz, _) = GainGrid::dims(self.resolution_deg)?;
        if self.exponents.len() != naz || self.measured.len() != naz {
            return Err(Error::invalid(format!(
                "propagation map needs {naz} cells, has {} exponents and {} flags",
                self.exponents.len(),
                self.measured.len()
            )));
        }
        if let Some(n) = self.exponents.iter().find(|n| !(**n > 0.0 && **n < 10.0)) {
            return Err(Error::invalid(format!("path-loss exponent {n} outside (0, 10)")));
        }
        Ok(())
    }

    fn cell(&self, bearing_deg: f64) -> usize {
        ((normalize_deg(bearing_deg) / self.resolution_deg).floor() as usize).min(self.exponents.len() - 1)
    }

    pub fn exponent(&self, bearing_deg: f64) -> f64 {
        self.exponents[self.cell(bearing_deg)]
    }

    pub fn is_default(&self, bearing_deg: f64) -> bool {
        !self.measured[self.cell(bearing_deg)]
    }
}

/// Clockwise bearing sector `[start, end)`; `end < start` wraps through north.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub start_deg: f64,
    pub end_deg: f64,
}

impl Sector {
    pub fn new(start_deg: f64, end_deg: f64) -> Self {
        Self { start_deg, end_deg }
    }

    pub fn contains(&self, bearing: f64) -> bool {
        let width = self.width();
        let offset = normalize_deg(bearing - self.start_deg);
        offset < width
    }

    pub fn width(&self) -> f64 {
        let w = self.end_deg - self.start_deg;
        if w >= 360.0 {
            360.0
        } else {
            normalize_deg(w)
        }
    }
}

/// Fill a propagation map from per-sector fits; each covered cell takes
/// `|slope_n|`, uncovered cells take `default_exponent` and are flagged.
pub fn propagation_map_from_fits(
    fits: &[(Sector, PathGainFit)],
    default_exponent: f64,
    resolution_deg: f64,
) -> Result<PropagationMap> {
    let (naz, _) = GainGrid::dims(resolution_deg)?;
    let mut exponents = vec![default_exponent; naz];
    let mut measured = vec![false; naz];
    let mut owner: Vec<Option<usize>> = vec![None; naz];
    for (k, (sector, fit)) in fits.iter().enumerate() {
        let n = fit.slope_n.abs();
        if !(n > 0.0 && n < 10.0) {
            return Err(Error::invalid(format!(
                "fit `{}` slope {} gives exponent outside (0, 10)",
                fit.label, fit.slope_n
            )));
        }
        for cell in 0..naz {
            let center = (cell as f64 + 0.5) * resolution_deg;
            if !sector.contains(center) {
                continue;
            }
            if let Some(prev) = owner[cell] {
                return Err(Error::invalid(format!(
                    "sectors of `{}` and `{}` overlap at {center}°",
                    fits[prev].1.label, fit.label
                )));
            }
            owner[cell] = Some(k);
            exponents[cell] = n;
            measured[cell] = true;
        }
    }
    let map = PropagationMap {
        resolution_deg,
        exponents,
        measured,
    };
    map.validate()?;
    Ok(map)
}

/// Validity interval, seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub start: i64,
    pub end: i64,
}

impl Schedule {
    pub fn overlaps(&self, other: &Schedule) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    Point,
    Volume,
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmLocation {
    pub kind: LocationKind,
    pub points: Vec<Position3D>,
}

impl ScmLocation {
    pub fn point(p: Position3D) -> Self {
        Self {
            kind: LocationKind::Point,
            points: vec![p],
        }
    }

    /// Centroid of the location geometry; used as the device position in
    /// compatibility computations.
    pub fn reference_position(&self) -> Position3D {
        let n = self.points.len() as f64;
        let (e, no, u) = self
            .points
            .iter()
            .fold((0.0, 0.0, 0.0), |acc, p| (acc.0 + p.east, acc.1 + p.north, acc.2 + p.up));
        Position3D::new(e / n, no / n, u / n)
    }
}

/// Constructs carried through serialization without interpretation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpaqueConstructs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermodulation_mask: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform_name: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_power_spectral_flux_density: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_protocol: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Transmitter,
    Receiver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConsumptionModel {
    pub version: String,
    pub id: String,
    pub kind: ModelKind,
    /// Tx: emitted power in the mask's 0 dB band. Rx: tolerated interference in the underlay's 0 dB band.
    pub reference_power_dbm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_mask: Option<SpectrumMask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub underlay_mask: Option<UnderlayMask>,
    pub power_map: PowerMap,
    pub propagation_map: PropagationMap,
    pub schedule: Schedule,
    pub location: ScmLocation,
    #[serde(default)]
    pub extras: OpaqueConstructs,
}

fn schema(path: &str, e: impl std::fmt::Display) -> Error {
    Error::Schema {
        path: path.to_string(),
        msg: e.to_string(),
    }
}

impl SpectrumConsumptionModel {
    pub fn validate(&self) -> Result<()> {
        if self.version != SCM_VERSION {
            return Err(schema("version", format!("expected `{SCM_VERSION}`, found `{}`", self.version)));
        }
        if self.id.is_empty() {
            return Err(schema("id", "model id must not be empty"));
        }
        if !self.reference_power_dbm.is_finite() {
            return Err(schema("reference_power_dbm", "must be finite"));
        }
        match self.kind {
            ModelKind::Transmitter => {
                if self.underlay_mask.is_some() {
                    return Err(schema("underlay_mask", "transmitter models must not carry an underlay mask"));
                }
                let mask = self
                    .spectrum_mask
                    .as_ref()
                    .ok_or_else(|| schema("spectrum_mask", "transmitter models require a spectrum mask"))?;
                mask.validate().map_err(|e| schema("spectrum_mask", e))?;
            }
            ModelKind::Receiver => {
                if self.spectrum_mask.is_some() {
                    return Err(schema("spectrum_mask", "receiver models must not carry a spectrum mask"));
                }
                let mask = self
                    .underlay_mask
                    .as_ref()
                    .ok_or_else(|| schema("underlay_mask", "receiver models require an underlay mask"))?;
                mask.validate().map_err(|e| schema("underlay_mask", e))?;
            }
        }
        if !self.power_map.orientation_deg.is_finite() {
            return Err(schema("power_map.orientation_deg", "must be finite"));
        }
        self.power_map.grid.validate().map_err(|e| schema("power_map.grid", e))?;
        self.propagation_map.validate().map_err(|e| schema("propagation_map", e))?;
        if self.schedule.start >= self.schedule.end {
            return Err(schema("schedule", "start must precede end"));
        }
        if self.location.points.is_empty() {
            return Err(schema("location.points", "location geometry must not be empty"));
        }
        for (i, p) in self.location.points.iter().enumerate() {
            p.validate().map_err(|e| schema(&format!("location.points[{i}]"), e))?;
        }
        Ok(())
    }

    pub fn position(&self) -> Position3D {
        self.location.reference_position()
    }

    /// Copy with every mask moved by `df` Hz.
    pub fn retuned(&self, df: f64) -> Self {
        let mut m = self.clone();
        m.spectrum_mask = m.spectrum_mask.map(|mask| mask.shifted(df));
        m.underlay_mask = m.underlay_mask.map(|mask| mask.shifted(df));
        m
    }
}

/// Constructs shared by transmitter and receiver models.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmInputs {
    pub id: String,
    pub reference_power_dbm: f64,
    pub power_map: PowerMap,
    pub propagation_map: PropagationMap,
    pub schedule: Schedule,
    pub location: ScmLocation,
    pub extras: OpaqueConstructs,
}

fn assemble(inputs: &ScmInputs, kind: ModelKind, spectrum: Option<Mask>, underlay: Option<Mask>) -> Result<SpectrumConsumptionModel> {
    let model = SpectrumConsumptionModel {
        version: SCM_VERSION.to_string(),
        id: inputs.id.clone(),
        kind,
        reference_power_dbm: inputs.reference_power_dbm,
        spectrum_mask: spectrum,
        underlay_mask: underlay,
        power_map: inputs.power_map.clone(),
        propagation_map: inputs.propagation_map.clone(),
        schedule: inputs.schedule,
        location: inputs.location.clone(),
        extras: inputs.extras.clone(),
    };
    model.validate()?;
    Ok(model)
}

pub fn build_tx_scm(inputs: &ScmInputs, mask: Option<SpectrumMask>) -> Result<SpectrumConsumptionModel> {
    if mask.is_none() {
        return Err(schema("spectrum_mask", "transmitter models require a spectrum mask"));
    }
    assemble(inputs, ModelKind::Transmitter, mask, None)
}

pub fn build_rx_scm(inputs: &ScmInputs, underlay: Option<UnderlayMask>) -> Result<SpectrumConsumptionModel> {
    if underlay.is_none() {
        return Err(schema("underlay_mask", "receiver models require an underlay mask"));
    }
    assemble(inputs, ModelKind::Receiver, None, underlay)
}

fn sort_keys(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Canonical JSON bytes, newline-terminated.
pub fn serialize_scm(model: &SpectrumConsumptionModel) -> Result<Vec<u8>> {
    let value = serde_json::to_value(model).map_err(|e| schema("", e))?;
    let mut out = serde_json::to_vec(&sort_keys(value)).map_err(|e| schema("", e))?;
    out.push(b'\n');
    Ok(out)
}

pub fn parse_scm(bytes: &[u8]) -> Result<SpectrumConsumptionModel> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let model: SpectrumConsumptionModel = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        msg: e.inner().to_string(),
    })?;
    de.end().map_err(|e| schema("", e))?;
    model.validate()?;
    Ok(model)
}

pub fn read_scm_file(path: impl AsRef<std::path::Path>) -> Result<SpectrumConsumptionModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_scm(&bytes)
}
