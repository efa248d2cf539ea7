//! Measurement and antenna-pattern files.
//!
//! Measurement files (`mms/1`) hold a header block describing the sidewalk and
//! its links, followed by one `link_id,time_s,azimuth_deg,power_dbm` row per
//! sample. See `docs/formats.md` for the full grammar.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::link_distance_3d;
pub use crate::geometry::Position3D;
use crate::metrics;

pub const MEASUREMENT_VERSION: &str = "mms/1";
pub const PATTERN_VERSION: &str = "pattern/1";

pub const FULL_FIDELITY_SAMPLES: usize = 16_000;
pub const FULL_FIDELITY_SCANS: u32 = 40;

pub const DEFAULT_TX_POWER_DBM: f64 = 22.0;
pub const DEFAULT_RX_AZIMUTH_GAIN_DBI: f64 = 14.5;
pub const DEFAULT_RX_TOTAL_GAIN_DBI: f64 = 24.0;

/// Measurable path-gain range of the sounder, dB.
pub const SOUNDER_PATH_GAIN_FLOOR_DB: f64 = -161.0;
pub const SOUNDER_PATH_GAIN_CEILING_DB: f64 = -62.0;

/// Relative gains above this are treated as a malformed (non-normalized) pattern.
const PATTERN_POSITIVE_TOLERANCE_DB: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time_s: f64,
    /// Clockwise from true north, `[0, 360)`.
    pub azimuth_deg: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAngularRecord {
    pub link_id: String,
    pub tx_pos: Position3D,
    pub rx_pos: Position3D,
    pub samples: Vec<Sample>,
    pub scan_count: u32,
}

impl PowerAngularRecord {
    pub fn distance(&self) -> f64 {
        link_distance_3d(&self.tx_pos, &self.rx_pos)
    }

    pub fn is_full_fidelity(&self) -> bool {
        self.samples.len() >= FULL_FIDELITY_SAMPLES && self.scan_count >= FULL_FIDELITY_SCANS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Standard,
    NoLeaves,
    TxRaised,
    Swap,
    Street,
    Wall,
    Adjacent,
}

impl Condition {
    pub const ALL: [Condition; 7] = [
        Condition::Standard,
        Condition::NoLeaves,
        Condition::TxRaised,
        Condition::Swap,
        Condition::Street,
        Condition::Wall,
        Condition::Adjacent,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::Standard => "standard",
            Condition::NoLeaves => "no_leaves",
            Condition::TxRaised => "tx_raised",
            Condition::Swap => "swap",
            Condition::Street => "street",
            Condition::Wall => "wall",
            Condition::Adjacent => "adjacent",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown condition `{s}`")))
    }
}

/// Visual line-of-sight class judged from the Tx location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Visibility {
    #[serde(rename = "VLOS")]
    Vlos,
    #[serde(rename = "VNLOS")]
    Vnlos,
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Visibility::Vlos => "VLOS",
            Visibility::Vnlos => "VNLOS",
        })
    }
}

impl FromStr for Visibility {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "VLOS" => Ok(Visibility::Vlos),
            "VNLOS" => Ok(Visibility::Vnlos),
            _ => Err(Error::invalid(format!("unknown visibility `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidewalkDataset {
    /// `LOC-D-S[-C]` name, e.g. `Int-W-N-NLe`.
    pub sidewalk_id: String,
    pub condition: Condition,
    pub visual_los: Visibility,
    /// Sorted by ascending link distance.
    pub records: Vec<PowerAngularRecord>,
    pub tx_power_dbm: f64,
    pub rx_nominal_azimuth_gain_dbi: f64,
    pub rx_total_gain_dbi: f64,
    /// Calibration accuracy, carried as metadata only.
    pub power_accuracy_db: Option<f64>,
}

impl SidewalkDataset {
    pub fn new(sidewalk_id: impl Into<String>, condition: Condition, visual_los: Visibility) -> Self {
        Self {
            sidewalk_id: sidewalk_id.into(),
            condition,
            visual_los,
            records: Vec::new(),
            tx_power_dbm: DEFAULT_TX_POWER_DBM,
            rx_nominal_azimuth_gain_dbi: DEFAULT_RX_AZIMUTH_GAIN_DBI,
            rx_total_gain_dbi: DEFAULT_RX_TOTAL_GAIN_DBI,
            power_accuracy_db: None,
        }
    }

    pub fn sort_records(&mut self) {
        self.records
            .sort_by(|a, b| a.distance().total_cmp(&b.distance()));
    }
}

/// Ensure sidewalk ids are unique across a collection.
pub fn check_unique_ids(datasets: &[SidewalkDataset]) -> Result<()> {
    let mut seen = HashMap::new();
    for (i, ds) in datasets.iter().enumerate() {
        if let Some(j) = seen.insert(ds.sidewalk_id.as_str(), i) {
            return Err(Error::invalid(format!(
                "sidewalk id `{}` appears twice (entries {j} and {i})",
                ds.sidewalk_id
            )));
        }
    }
    Ok(())
}

pub fn parse_measurement_file(path: impl AsRef<Path>) -> Result<SidewalkDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_measurement_str(&text).map_err(|e| e.in_file(path))
}

struct LinkHeader {
    tx: Position3D,
    rx: Position3D,
    scans: u32,
    line: usize,
}

pub fn parse_measurement_str(text: &str) -> Result<SidewalkDataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    match lines.next() {
        None => return Err(Error::parse(1, "empty measurement file")),
        Some((_, MEASUREMENT_VERSION)) => {}
        Some((n, other)) => {
            return Err(Error::parse(
                n,
                format!("expected version line `{MEASUREMENT_VERSION}`, found `{other}`"),
            ))
        }
    }

    let mut sidewalk_id = None;
    let mut condition = Condition::Standard;
    let mut visibility = None;
    let mut tx_power = DEFAULT_TX_POWER_DBM;
    let mut az_gain = DEFAULT_RX_AZIMUTH_GAIN_DBI;
    let mut total_gain = DEFAULT_RX_TOTAL_GAIN_DBI;
    let mut accuracy = None;
    let mut order: Vec<String> = Vec::new();
    let mut headers: HashMap<String, LinkHeader> = HashMap::new();
    let mut in_samples = false;
    let mut samples: HashMap<String, Vec<Sample>> = HashMap::new();

    for (n, line) in lines {
        if in_samples {
            let (id, sample) = parse_sample_row(n, line)?;
            let Some(bucket) = samples.get_mut(id) else {
                return Err(Error::parse(n, format!("sample for undeclared link `{id}`")));
            };
            if let Some(prev) = bucket.last() {
                if sample.time_s < prev.time_s {
                    return Err(Error::parse(
                        n,
                        format!("time decreases within link `{id}` ({} < {})", sample.time_s, prev.time_s),
                    ));
                }
            }
            bucket.push(sample);
            continue;
        }

        let mut tok = line.split_whitespace();
        let key = tok.next().unwrap_or_default();
        let rest: Vec<&str> = tok.collect();
        let single = |rest: &[&str]| -> Result<String> {
            match rest {
                [v] => Ok(v.to_string()),
                _ => Err(Error::parse(n, format!("`{key}` takes exactly one value"))),
            }
        };
        let number = |rest: &[&str]| -> Result<f64> { parse_f64(n, &single(rest)?, key) };
        match key {
            "sidewalk" => sidewalk_id = Some(single(&rest)?),
            "condition" => {
                condition = single(&rest)?
                    .parse()
                    .map_err(|e: Error| Error::parse(n, e.to_string()))?
            }
            "visibility" => {
                visibility = Some(
                    single(&rest)?
                        .parse()
                        .map_err(|e: Error| Error::parse(n, e.to_string()))?,
                )
            }
            "tx_power_dbm" => tx_power = number(&rest)?,
            "rx_azimuth_gain_dbi" => az_gain = number(&rest)?,
            "rx_total_gain_dbi" => total_gain = number(&rest)?,
            "power_accuracy_db" => accuracy = Some(number(&rest)?),
            "link" => {
                let (id, header) = parse_link_header(n, &rest)?;
                if headers.contains_key(&id) {
                    return Err(Error::parse(n, format!("link `{id}` declared twice")));
                }
                samples.insert(id.clone(), Vec::new());
                order.push(id.clone());
                headers.insert(id, header);
            }
            "samples" => in_samples = true,
            other => return Err(Error::parse(n, format!("unknown header key `{other}`"))),
        }
    }

    let last_line = text.lines().count().max(1);
    let sidewalk_id =
        sidewalk_id.ok_or_else(|| Error::parse(last_line, "missing `sidewalk` header"))?;
    let visual_los =
        visibility.ok_or_else(|| Error::parse(last_line, "missing `visibility` header"))?;
    if order.is_empty() {
        return Err(Error::parse(last_line, "no links declared"));
    }

    let mut ds = SidewalkDataset::new(sidewalk_id, condition, visual_los);
    ds.tx_power_dbm = tx_power;
    ds.rx_nominal_azimuth_gain_dbi = az_gain;
    ds.rx_total_gain_dbi = total_gain;
    ds.power_accuracy_db = accuracy;
    for id in order {
        let header = headers.remove(&id).expect("declared link");
        let link_samples = samples.remove(&id).unwrap_or_default();
        if link_samples.is_empty() {
            return Err(Error::parse(header.line, format!("link `{id}` has no samples")));
        }
        ds.records.push(PowerAngularRecord {
            link_id: id,
            tx_pos: header.tx,
            rx_pos: header.rx,
            samples: link_samples,
            scan_count: header.scans,
        });
    }
    ds.sort_records();
    Ok(ds)
}

fn parse_f64(line: usize, s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {what} `{s}` as a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{what} `{s}` is not finite")));
    }
    Ok(v)
}

// link <id> tx <e> <n> <u> rx <e> <n> <u> scans <k>
fn parse_link_header(n: usize, rest: &[&str]) -> Result<(String, LinkHeader)> {
    let usage = "expected `link <id> tx <e> <n> <u> rx <e> <n> <u> scans <k>`";
    if rest.len() != 11 || rest[1] != "tx" || rest[5] != "rx" || rest[9] != "scans" {
        return Err(Error::parse(n, usage));
    }
    let pos = |i: usize, what: &str| -> Result<Position3D> {
        let p = Position3D::new(
            parse_f64(n, rest[i], what)?,
            parse_f64(n, rest[i + 1], what)?,
            parse_f64(n, rest[i + 2], what)?,
        );
        p.validate().map_err(|e| Error::parse(n, e.to_string()))?;
        Ok(p)
    };
    let tx = pos(2, "tx position")?;
    let rx = pos(6, "rx position")?;
    let scans: u32 = rest[10]
        .parse()
        .map_err(|_| Error::parse(n, format!("bad scan count `{}`", rest[10])))?;
    Ok((rest[0].to_string(), LinkHeader { tx, rx, scans, line: n }))
}

fn parse_sample_row(n: usize, line: &str) -> Result<(&str, Sample)> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::parse(
            n,
            format!("malformed sample row: expected 4 fields, found {}", fields.len()),
        ));
    }
    let time_s = parse_f64(n, fields[1], "time")?;
    let azimuth_deg = parse_f64(n, fields[2], "azimuth")?;
    if !(0.0..360.0).contains(&azimuth_deg) {
        return Err(Error::parse(
            n,
            format!("azimuth {azimuth_deg} outside [0, 360)"),
        ));
    }
    let power_dbm = parse_f64(n, fields[3], "power")?;
    Ok((
        fields[0],
        Sample {
            time_s,
            azimuth_deg,
            power_dbm,
        },
    ))
}

/// Render a dataset in the `mms/1` format.
pub fn write_measurement(ds: &SidewalkDataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MEASUREMENT_VERSION}");
    let _ = writeln!(out, "sidewalk {}", ds.sidewalk_id);
    let _ = writeln!(out, "condition {}", ds.condition);
    let _ = writeln!(out, "visibility {}", ds.visual_los);
    let _ = writeln!(out, "tx_power_dbm {}", ds.tx_power_dbm);
    let _ = writeln!(out, "rx_azimuth_gain_dbi {}", ds.rx_nominal_azimuth_gain_dbi);
    let _ = writeln!(out, "rx_total_gain_dbi {}", ds.rx_total_gain_dbi);
    if let Some(acc) = ds.power_accuracy_db {
        let _ = writeln!(out, "power_accuracy_db {acc}");
    }
    for r in &ds.records {
        let _ = writeln!(
            out,
            "link {} tx {} {} {} rx {} {} {} scans {}",
            r.link_id,
            r.tx_pos.east,
            r.tx_pos.north,
            r.tx_pos.up,
            r.rx_pos.east,
            r.rx_pos.north,
            r.rx_pos.up,
            r.scan_count
        );
    }
    out.push_str("samples\n");
    for r in &ds.records {
        for s in &r.samples {
            let _ = writeln!(out, "{},{},{},{}", r.link_id, s.time_s, s.azimuth_deg, s.power_dbm);
        }
    }
    out
}

pub fn write_measurement_file(ds: &SidewalkDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_measurement(ds)).map_err(|e| Error::io(path, e))
}

/// One tabulated cut of a normalized antenna pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCut {
    /// `(angle_deg, rel_gain_db)`, angles strictly increasing over `[-180, 180]`.
    pub points: Vec<(f64, f64)>,
}

impl PatternCut {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("pattern cut needs at least two points"));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid(format!(
                    "pattern angles not strictly increasing at {} -> {}",
                    w[0].0, w[1].0
                )));
            }
        }
        let (first, last) = (points[0].0, points[points.len() - 1].0);
        if first > -180.0 || last < 180.0 {
            return Err(Error::invalid(format!(
                "pattern cut spans [{first}, {last}], must cover [-180, 180]"
            )));
        }
        if points.iter().any(|(a, g)| !a.is_finite() || !g.is_finite()) {
            return Err(Error::invalid("pattern cut contains non-finite values"));
        }
        Ok(Self { points })
    }

    pub fn flat(gain_db: f64) -> Self {
        Self {
            points: vec![(-180.0, gain_db), (180.0, gain_db)],
        }
    }

    pub fn max_gain(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_gain(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    /// Linear-in-dB interpolation at `angle`, which must lie within the tabulated span.
    pub fn gain_at(&self, angle: f64) -> Option<f64> {
        let pts = &self.points;
        if !angle.is_finite() || angle < pts[0].0 || angle > pts[pts.len() - 1].0 {
            return None;
        }
        let idx = pts.partition_point(|p| p.0 <= angle);
        if idx == 0 {
            return Some(pts[0].1);
        }
        let (a0, g0) = pts[idx - 1];
        if idx == pts.len() || a0 == angle {
            return Some(g0);
        }
        let (a1, g1) = pts[idx];
        let t = (angle - a0) / (a1 - a0);
        Some(g0 + t * (g1 - g0))
    }

    /// Lookup with the angle wrapped into `[-180, 180]`.
    pub fn gain_wrapped(&self, angle: f64) -> f64 {
        let mut a = (angle + 180.0).rem_euclid(360.0) - 180.0;
        if a < -180.0 {
            a = -180.0;
        }
        self.gain_at(a).unwrap_or_else(|| self.points[0].1)
    }

    fn shift(&mut self, db: f64) {
        for p in &mut self.points {
            p.1 += db;
        }
    }
}

/// Normalized two-cut antenna pattern (maximum relative gain is 0 dB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    pub azimuth_cut: PatternCut,
    pub elevation_cut: PatternCut,
    pub peak_gain_dbi: f64,
}

impl AntennaPattern {
    /// Build a pattern, renormalizing so the maximum over both cuts is 0 dB and
    /// moving the offset into `peak_gain_dbi`.
    pub fn from_cuts(mut azimuth_cut: PatternCut, mut elevation_cut: PatternCut, peak_gain_dbi: f64) -> Self {
        let max = azimuth_cut.max_gain().max(elevation_cut.max_gain());
        azimuth_cut.shift(-max);
        elevation_cut.shift(-max);
        Self {
            azimuth_cut,
            elevation_cut,
            peak_gain_dbi: peak_gain_dbi + max,
        }
    }

    pub fn isotropic(peak_gain_dbi: f64) -> Self {
        Self {
            azimuth_cut: PatternCut::flat(0.0),
            elevation_cut: PatternCut::flat(0.0),
            peak_gain_dbi,
        }
    }

    /// Absolute gain along the azimuth cut, dBi.
    pub fn azimuth_gain_dbi(&self, angle: f64) -> f64 {
        self.peak_gain_dbi + self.azimuth_cut.gain_wrapped(angle)
    }

    /// Lowest tabulated relative gain over both cuts.
    pub fn floor_db(&self) -> f64 {
        self.azimuth_cut.min_gain().min(self.elevation_cut.min_gain())
    }
}

pub fn parse_antenna_pattern(path: impl AsRef<Path>) -> Result<AntennaPattern> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_antenna_pattern_str(&text).map_err(|e| e.in_file(path))
}

pub fn parse_antenna_pattern_str(text: &str) -> Result<AntennaPattern> {
    #[derive(PartialEq)]
    enum Section {
        Header,
        Azimuth,
        Elevation,
    }
    let mut section = Section::Header;
    let mut peak = None;
    let mut az: Vec<(f64, f64)> = Vec::new();
    let mut el: Vec<(f64, f64)> = Vec::new();
    let mut az_line = 0;
    let mut el_line = 0;
    let mut saw_version = false;

    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line {
            PATTERN_VERSION if section == Section::Header => {
                saw_version = true;
                continue;
            }
            "[azimuth]" => {
                section = Section::Azimuth;
                az_line = n;
                continue;
            }
            "[elevation]" => {
                section = Section::Elevation;
                el_line = n;
                continue;
            }
            "angle_deg,rel_gain_db" => continue,
            _ => {}
        }
        match section {
            Section::Header => {
                let mut tok = line.split_whitespace();
                match (tok.next(), tok.next(), tok.next()) {
                    (Some("peak_gain_dbi"), Some(v), None) => peak = Some(parse_f64(n, v, "peak gain")?),
                    _ => return Err(Error::parse(n, format!("unexpected header line `{line}`"))),
                }
            }
            Section::Azimuth | Section::Elevation => {
                let (a, g) = line
                    .split_once(',')
                    .ok_or_else(|| Error::parse(n, "expected `angle_deg,rel_gain_db`"))?;
                let angle = parse_f64(n, a.trim(), "angle")?;
                let gain = parse_f64(n, g.trim(), "relative gain")?;
                if gain > PATTERN_POSITIVE_TOLERANCE_DB {
                    return Err(Error::parse(
                        n,
                        format!("relative gain {gain} dB is positive; pattern must be normalized"),
                    ));
                }
                let cut = if section == Section::Azimuth { &mut az } else { &mut el };
                if let Some(&(prev, _)) = cut.last() {
                    if angle <= prev {
                        return Err(Error::parse(
                            n,
                            format!("angle grid not strictly increasing ({prev} then {angle})"),
                        ));
                    }
                }
                cut.push((angle, gain));
            }
        }
    }
    if !saw_version {
        return Err(Error::parse(1, format!("missing `{PATTERN_VERSION}` version line")));
    }
    let peak = peak.ok_or_else(|| Error::parse(1, "missing `peak_gain_dbi`"))?;
    if az_line == 0 || el_line == 0 {
        return Err(Error::parse(1, "pattern needs both [azimuth] and [elevation] sections"));
    }
    let az = PatternCut::new(az).map_err(|e| Error::parse(az_line, e.to_string()))?;
    let el = PatternCut::new(el).map_err(|e| Error::parse(el_line, e.to_string()))?;
    Ok(AntennaPattern::from_cuts(az, el, peak))
}

pub fn write_antenna_pattern(p: &AntennaPattern) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{PATTERN_VERSION}");
    let _ = writeln!(out, "peak_gain_dbi {}", p.peak_gain_dbi);
    for (name, cut) in [("azimuth", &p.azimuth_cut), ("elevation", &p.elevation_cut)] {
        let _ = writeln!(out, "[{name}]");
        out.push_str("angle_deg,rel_gain_db\n");
        for (a, g) in &cut.points {
            let _ = writeln!(out, "{a},{g}");
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationWarning {
    BelowSounderFloor { link_id: String, path_gain_db: f64 },
    AboveSounderCeiling { link_id: String, path_gain_db: f64 },
    FewSamples { link_id: String, count: usize },
    FewScans { link_id: String, count: u32 },
    DuplicateDistance { first: String, second: String, distance_m: f64 },
    Unprocessable { link_id: String, reason: String },
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationWarning::BelowSounderFloor { link_id, path_gain_db } => write!(
                f,
                "{link_id}: path gain {path_gain_db:.2} dB below sounder floor ({SOUNDER_PATH_GAIN_FLOOR_DB} dB)"
            ),
            ValidationWarning::AboveSounderCeiling { link_id, path_gain_db } => write!(
                f,
                "{link_id}: path gain {path_gain_db:.2} dB above sounder ceiling ({SOUNDER_PATH_GAIN_CEILING_DB} dB)"
            ),
            ValidationWarning::FewSamples { link_id, count } => write!(
                f,
                "{link_id}: {count} samples, fewer than {FULL_FIDELITY_SAMPLES}"
            ),
            ValidationWarning::FewScans { link_id, count } => write!(
                f,
                "{link_id}: {count} scans, fewer than {FULL_FIDELITY_SCANS}"
            ),
            ValidationWarning::DuplicateDistance { first, second, distance_m } => write!(
                f,
                "{first} and {second}: duplicate distance {distance_m:.3} m"
            ),
            ValidationWarning::Unprocessable { link_id, reason } => {
                write!(f, "{link_id}: {reason}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub warnings: Vec<ValidationWarning>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Plausibility checks on a parsed dataset. Never fails; problems become warnings.
pub fn validate_dataset(ds: &SidewalkDataset) -> ValidationReport {
    let mut warnings = Vec::new();
    for r in &ds.records {
        if r.samples.len() < FULL_FIDELITY_SAMPLES {
            warnings.push(ValidationWarning::FewSamples {
                link_id: r.link_id.clone(),
                count: r.samples.len(),
            });
        }
        if r.scan_count < FULL_FIDELITY_SCANS {
            warnings.push(ValidationWarning::FewScans {
                link_id: r.link_id.clone(),
                count: r.scan_count,
            });
        }
        match metrics::average_pas(r, metrics::DEFAULT_BIN_WIDTH_DEG) {
            Ok(pas) => {
                let pg = metrics::path_gain(&pas, ds.tx_power_dbm, 0.0);
                if pg < SOUNDER_PATH_GAIN_FLOOR_DB {
                    warnings.push(ValidationWarning::BelowSounderFloor {
                        link_id: r.link_id.clone(),
                        path_gain_db: pg,
                    });
                } else if pg > SOUNDER_PATH_GAIN_CEILING_DB {
                    warnings.push(ValidationWarning::AboveSounderCeiling {
                        link_id: r.link_id.clone(),
                        path_gain_db: pg,
                    });
                }
            }
            Err(e) => warnings.push(ValidationWarning::Unprocessable {
                link_id: r.link_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    for w in ds.records.windows(2) {
        let (d0, d1) = (w[0].distance(), w[1].distance());
        if (d1 - d0).abs() <= 1e-6 {
            warnings.push(ValidationWarning::DuplicateDistance {
                first: w[0].link_id.clone(),
                second: w[1].link_id.clone(),
                distance_m: d0,
            });
        }
    }
    ValidationReport { warnings }
}
