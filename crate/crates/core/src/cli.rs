//! Command-line front end. `run` parses arguments, dispatches to the library
//! and writes all results to the supplied streams.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::compat::{aggregate_margin, frequency_grid};
use crate::coverage::{effective_tx_gain, noise_floor, summarize, Cutoff, LinkBudget};
use crate::deconflict::{run_trials, square_side_m, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{angular_deviation, aoi_diffraction, aoi_direct, aoi_reflection};
use crate::ingest::{
    check_unique_ids, parse_antenna_pattern, parse_measurement_file, validate_dataset, write_measurement_file,
    AntennaPattern, SidewalkDataset, Visibility,
};
use crate::metrics::{abg_cdf, dataset_metrics, spectrum_stack_grid, LinkMetrics, MetricOptions};
use crate::pathloss::{compare_fits, fit_labeled, fspl, group_fit, los_probability, umi_los, umi_nlos, PathGainFit};
use crate::report::{fmt_sig, Table};
use crate::scm::{
    build_rx_scm, build_tx_scm, default_mask, propagation_map_from_fits, read_scm_file, serialize_scm, ModelKind,
    OpaqueConstructs, PowerMap, PropagationMap, Schedule, ScmInputs, ScmLocation, Sector, SpectrumConsumptionModel,
};
use crate::site::{parse_site_file, SiteConfig};
use crate::synth::{synth_sidewalk, table_row, SynthOptions, SIDEWALK_TABLE};

#[derive(Debug, Parser)]
#[command(name = "canyon", version, about = "Street-canyon 28 GHz measurement analysis and spectrum deconfliction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse measurement files and summarize their links
    Ingest(IngestArgs),
    /// Check measurement files against the sounder's limits and fidelity targets
    Validate(ValidateArgs),
    /// Per-link path gain, azimuth beamforming gain, K-factor and AoA
    Metrics(MetricsArgs),
    /// Fit single-slope path-gain models per sidewalk
    Fit(FitArgs),
    /// Compare two fits, or a fit against free space and the UMi models
    Compare(CompareArgs),
    /// SNR, cutoff distance and Shannon rate along each sidewalk
    Coverage(CoverageArgs),
    /// Generate spectrum consumption models from fits, patterns and a metadata sheet
    ScmGen(ScmGenArgs),
    /// Pairwise and aggregate compatibility of spectrum consumption models
    Compat(CompatArgs),
    /// Monte Carlo channel deconfliction of random Tx-Rx links
    Simulate(SimulateArgs),
    /// Export the distance-by-azimuth power grid of a sidewalk
    Stack(StackArgs),
    /// Generate a synthetic measurement file from the built-in sidewalk table
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Measurement files (`mms/1`)
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Rewrite the (single) input in canonical form to this path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Exit with status 3 when any warning is raised
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct MetricOpts {
    /// Antenna pattern file used for the elevation correction
    #[arg(long)]
    pattern: Option<PathBuf>,
    /// Azimuth bin width, degrees
    #[arg(long, default_value_t = 1.0)]
    bin_width: f64,
    /// Half-width of the K-factor window around the AoA, degrees
    #[arg(long, default_value_t = 10.0)]
    k_window: f64,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    file: PathBuf,
    #[command(flatten)]
    opts: MetricOpts,
    /// Site config supplying facades and corners for angle-of-incidence deviations
    #[arg(long)]
    site: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[command(flatten)]
    opts: MetricOpts,
    /// Also fit the pooled points of all inputs under this label
    #[arg(long)]
    pool: Option<String>,
    /// Which inputs enter the pooled fit
    #[arg(long, value_parser = ["all", "vlos", "vnlos"], default_value = "all")]
    select: String,
    /// Write the fits table (CSV) here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Fits table written by `fit --out`
    #[arg(long)]
    fits: PathBuf,
    /// Label of the first fit
    label: String,
    /// Label of the second fit; omit to compare against reference models
    against: Option<String>,
    /// Evaluation distances, meters
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 50.0, 100.0, 200.0, 300.0])]
    distances: Vec<f64>,
    /// Base-station height for the UMi models, meters
    #[arg(long, default_value_t = 15.0)]
    h_bs: f64,
    /// User-terminal height for the UMi models, meters
    #[arg(long, default_value_t = 1.5)]
    h_ut: f64,
    /// Carrier frequency, Hz
    #[arg(long, default_value_t = 28e9)]
    freq: f64,
}

#[derive(Debug, Args)]
struct BudgetFlags {
    #[arg(long)]
    tx_power: Option<f64>,
    #[arg(long)]
    tx_gain: Option<f64>,
    #[arg(long)]
    rx_gain: Option<f64>,
    #[arg(long)]
    noise_figure: Option<f64>,
    #[arg(long)]
    bandwidth: Option<f64>,
    /// SNR threshold for the cutoff, dB
    #[arg(long)]
    cutoff: Option<f64>,
    /// Median ABG; defaults to the fits table's value
    #[arg(long)]
    median_abg: Option<f64>,
    #[arg(long)]
    nominal_gain: Option<f64>,
}

#[derive(Debug, Args)]
struct CoverageArgs {
    #[arg(long)]
    fits: PathBuf,
    /// Only this fit label
    #[arg(long)]
    label: Option<String>,
    /// Site config with budget overrides
    #[arg(long)]
    site: Option<PathBuf>,
    #[command(flatten)]
    budget: BudgetFlags,
    /// First distance, meters (default: fit's shortest link)
    #[arg(long)]
    start: Option<f64>,
    /// Last distance, meters (default: fit's longest link)
    #[arg(long)]
    end: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Write one `distance_m,snr_db,rate_bps` CSV per fit into this directory
    #[arg(long)]
    profile_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScmGenArgs {
    #[arg(long)]
    fits: PathBuf,
    /// Metadata sheet (CSV) with one device per row
    #[arg(long)]
    sheet: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Power/propagation map resolution, degrees
    #[arg(long, default_value_t = 1.0)]
    resolution: f64,
    /// Exponent for bearings not covered by any fit sector
    #[arg(long, default_value_t = 2.0)]
    default_exponent: f64,
}

#[derive(Debug, Args)]
struct CompatArgs {
    /// SCM files (transmitters and receivers)
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Print JSON instead of tables
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    links: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Channel bandwidth, Hz
    #[arg(long, default_value_t = 1e6)]
    channel_bw: f64,
    /// Square area, square miles
    #[arg(long, default_value_t = 0.5)]
    area: f64,
    /// Centre of channel 1, Hz
    #[arg(long, default_value_t = 28e9)]
    base_freq: f64,
    /// Write a JSON summary here
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Skip re-verifying each assignment
    #[arg(long)]
    no_verify: bool,
    /// Report per-link placement time on stderr
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct StackArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    bin_width: f64,
    /// Write the grid here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Sidewalk name from the built-in table
    #[arg(required_unless_present = "list")]
    name: Option<String>,
    /// List the built-in sidewalk table
    #[arg(long)]
    list: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, required_unless_present = "list")]
    out: Option<PathBuf>,
    /// Cap on the number of links
    #[arg(long)]
    links: Option<usize>,
    #[arg(long, default_value_t = 40)]
    scans: usize,
    #[arg(long, default_value_t = 400)]
    samples_per_scan: usize,
    /// Rician K-factor of the synthetic fading, dB
    #[arg(long, default_value_t = 10.0)]
    k_factor: f64,
}

/// Run the CLI with `argv` (including the program name). Returns the exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a, out),
        Command::Validate(a) => cmd_validate(a, out),
        Command::Metrics(a) => cmd_metrics(a, out, err),
        Command::Fit(a) => cmd_fit(a, out, err),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Coverage(a) => cmd_coverage(a, out),
        Command::ScmGen(a) => cmd_scm_gen(a, out),
        Command::Compat(a) => cmd_compat(a, out),
        Command::Simulate(a) => cmd_simulate(a, out, err),
        Command::Stack(a) => cmd_stack(a, out),
        Command::Synth(a) => cmd_synth(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<output>", e)
}

macro_rules! outln {
    ($dst:expr, $($arg:tt)*) => {
        writeln!($dst, $($arg)*).map_err(io_err)?
    };
}

fn opt_sig(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), fmt_sig)
}

fn cmd_ingest(a: IngestArgs, out: &mut dyn Write) -> Result<i32> {
    let datasets = a.files.iter().map(parse_measurement_file).collect::<Result<Vec<_>>>()?;
    check_unique_ids(&datasets)?;
    for ds in &datasets {
        outln!(out, "sidewalk {}  condition {}  visibility {}  links {}", ds.sidewalk_id, ds.condition, ds.visual_los, ds.records.len());
        let mut t = Table::new(&["link", "distance_m", "samples", "scans", "full_fidelity"]);
        for r in &ds.records {
            t.row(vec![
                r.link_id.clone(),
                fmt_sig(r.distance()),
                r.samples.len().to_string(),
                r.scan_count.to_string(),
                if r.is_full_fidelity() { "yes" } else { "no" }.into(),
            ]);
        }
        out.write_all(t.render().as_bytes()).map_err(io_err)?;
    }
    if let Some(path) = a.out {
        if datasets.len() != 1 {
            return Err(Error::invalid("--out needs exactly one input file"));
        }
        write_measurement_file(&datasets[0], &path)?;
    }
    Ok(0)
}

fn cmd_validate(a: ValidateArgs, out: &mut dyn Write) -> Result<i32> {
    let mut any = false;
    for f in &a.files {
        let ds = parse_measurement_file(f)?;
        let report = validate_dataset(&ds);
        if report.is_clean() {
            outln!(out, "{}: clean", ds.sidewalk_id);
        } else {
            any = true;
            outln!(out, "{}: {} warning(s)", ds.sidewalk_id, report.warnings.len());
            for w in &report.warnings {
                outln!(out, "  {w}");
            }
        }
    }
    Ok(if a.strict && any { 3 } else { 0 })
}

fn load_pattern(p: &Option<PathBuf>) -> Result<Option<AntennaPattern>> {
    p.as_ref().map(parse_antenna_pattern).transpose()
}

fn metric_options(o: &MetricOpts) -> MetricOptions {
    MetricOptions {
        bin_width: o.bin_width,
        k_window: o.k_window,
    }
}

/// Metrics of every processable link; failures are reported on `err` and skipped.
fn good_metrics(ds: &SidewalkDataset, opts: &MetricOpts, err: &mut dyn Write) -> Result<Vec<LinkMetrics>> {
    let pattern = load_pattern(&opts.pattern)?;
    let mut good = Vec::with_capacity(ds.records.len());
    for (rec, m) in ds.records.iter().zip(dataset_metrics(ds, pattern.as_ref(), metric_options(opts))) {
        match m {
            Ok(m) => good.push(m),
            Err(e) => {
                let _ = writeln!(err, "warning: {} link {} skipped: {e}", ds.sidewalk_id, rec.link_id);
            }
        }
    }
    Ok(good)
}

fn cmd_metrics(a: MetricsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let ds = parse_measurement_file(&a.file)?;
    let site = a.site.as_ref().map(parse_site_file).transpose()?;
    let walk = site.as_ref().and_then(|s| s.sidewalk(&ds.sidewalk_id));
    let metrics = good_metrics(&ds, &a.opts, err)?;
    let mut header = vec!["link", "distance_m", "path_gain_db", "abg_dbi", "k_factor_db", "aoa_deg", "zenith_deg", "interp_bins"];
    if walk.is_some() {
        header.extend(["dphi_direct", "dphi_reflect", "dphi_diffract"]);
    }
    let mut t = Table::new(&header);
    let by_id: BTreeMap<&str, &crate::ingest::PowerAngularRecord> =
        ds.records.iter().map(|r| (r.link_id.as_str(), r)).collect();
    for m in &metrics {
        let mut row = vec![
            m.link_id.clone(),
            fmt_sig(m.distance),
            fmt_sig(m.path_gain),
            fmt_sig(m.azimuth_gain),
            opt_sig(m.k_factor),
            fmt_sig(m.aoa),
            fmt_sig(m.zenith),
            m.interpolated_bins.to_string(),
        ];
        if let Some(w) = walk {
            let rec = by_id[m.link_id.as_str()];
            let dev = |aoi: Option<f64>| opt_sig(aoi.map(|x| angular_deviation(m.aoa, x)));
            row.push(dev(aoi_direct(&rec.tx_pos, &rec.rx_pos).ok()));
            row.push(dev(w.facades.first().and_then(|f| aoi_reflection(&rec.tx_pos, &rec.rx_pos, f).ok())));
            row.push(dev(w.corners.first().and_then(|c| aoi_diffraction(&rec.rx_pos, c).ok())));
        }
        t.row(row);
    }
    out.write_all(t.render().as_bytes()).map_err(io_err)?;
    if !metrics.is_empty() {
        let cdf = abg_cdf(&metrics.iter().map(|m| m.azimuth_gain).collect::<Vec<_>>())?;
        outln!(out, "abg_median_dbi {}", fmt_sig(cdf.median()));
        outln!(out, "abg_p10_dbi {}", fmt_sig(cdf.quantile(0.1)));
    }
    Ok(0)
}

/// One row of a fits table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub label: String,
    pub length_m: f64,
    pub links: usize,
    pub slope_n: f64,
    pub intercept_b: f64,
    pub rms_sigma: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub median_abg: Option<f64>,
    pub p10_abg: Option<f64>,
}

impl FitRow {
    pub fn fit(&self) -> PathGainFit {
        let mut f = PathGainFit::from_params(&self.label, self.slope_n, self.intercept_b, self.rms_sigma, self.d_min, self.d_max);
        f.count = self.links;
        f
    }

    fn from_fit(fit: &PathGainFit, abg: &[f64]) -> Result<Self> {
        let (median_abg, p10_abg) = if abg.is_empty() {
            (None, None)
        } else {
            let cdf = abg_cdf(abg)?;
            (Some(cdf.median()), Some(cdf.quantile(0.1)))
        };
        Ok(Self {
            label: fit.label.clone(),
            length_m: fit.d_max - fit.d_min,
            links: fit.count,
            slope_n: fit.slope_n,
            intercept_b: fit.intercept_b,
            rms_sigma: fit.rms_sigma,
            d_min: fit.d_min,
            d_max: fit.d_max,
            median_abg,
            p10_abg,
        })
    }
}

pub fn read_fits_table(path: &Path) -> Result<Vec<FitRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<FitRow>, _>>()
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    if rows.is_empty() {
        return Err(Error::invalid(format!("{}: fits table is empty", path.display())));
    }
    Ok(rows)
}

pub fn write_fits_table(path: &Path, rows: &[FitRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn find_fit<'a>(rows: &'a [FitRow], label: &str) -> Result<&'a FitRow> {
    rows.iter()
        .find(|r| r.label.eq_ignore_ascii_case(label))
        .ok_or_else(|| Error::invalid(format!("no fit labelled `{label}`")))
}

fn cmd_fit(a: FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let datasets = a.files.iter().map(parse_measurement_file).collect::<Result<Vec<_>>>()?;
    check_unique_ids(&datasets)?;
    let mut rows = Vec::new();
    let mut pools = Vec::new();
    for ds in &datasets {
        let metrics = good_metrics(ds, &a.opts, err)?;
        let points: Vec<(f64, f64)> = metrics.iter().map(|m| (m.distance, m.path_gain)).collect();
        let abg: Vec<f64> = metrics.iter().map(|m| m.azimuth_gain).collect();
        let fit = fit_labeled(&ds.sidewalk_id, &points)?;
        rows.push(FitRow::from_fit(&fit, &abg)?);
        pools.push((ds, points, abg));
    }
    if let Some(label) = &a.pool {
        let want = a.select.as_str();
        let keep = |ds: &SidewalkDataset| match want {
            "vlos" => ds.visual_los == Visibility::Vlos,
            "vnlos" => ds.visual_los == Visibility::Vnlos,
            _ => true,
        };
        let fit = group_fit(label.as_str(), pools.iter().map(|(ds, p, _)| (*ds, p.as_slice())), keep)?;
        let abg: Vec<f64> = pools.iter().filter(|(ds, _, _)| keep(ds)).flat_map(|(_, _, g)| g.iter().copied()).collect();
        rows.push(FitRow::from_fit(&fit, &abg)?);
    }
    let mut t = Table::new(&["sidewalk", "length_m", "links", "n", "b_db", "sigma_db", "median_abg_dbi", "p10_abg_dbi"]);
    for r in &rows {
        t.row(vec![
            r.label.clone(),
            fmt_sig(r.length_m),
            r.links.to_string(),
            fmt_sig(r.slope_n),
            fmt_sig(r.intercept_b),
            fmt_sig(r.rms_sigma),
            opt_sig(r.median_abg),
            opt_sig(r.p10_abg),
        ]);
    }
    out.write_all(t.render().as_bytes()).map_err(io_err)?;
    if let Some(path) = &a.out {
        write_fits_table(path, &rows)?;
    }
    Ok(0)
}

fn cmd_compare(a: CompareArgs, out: &mut dyn Write) -> Result<i32> {
    let rows = read_fits_table(&a.fits)?;
    let first = find_fit(&rows, &a.label)?.fit();
    match &a.against {
        Some(other) => {
            let second = find_fit(&rows, other)?.fit();
            let cmp = compare_fits(&first, &second, &a.distances);
            outln!(out, "{} vs {}", first.label, second.label);
            outln!(out, "delta_n {}", fmt_sig(cmp.delta_n));
            outln!(out, "delta_b_db {}", fmt_sig(cmp.delta_b));
            let mut t = Table::new(&["distance_m", "delta_db"]);
            for (d, delta) in &cmp.rows {
                t.row(vec![fmt_sig(*d), fmt_sig(*delta)]);
            }
            out.write_all(t.render().as_bytes()).map_err(io_err)?;
        }
        None => {
            outln!(out, "{} vs reference models ({}, h_bs {} m, h_ut {} m)", first.label, crate::pathloss::UMI_STANDARD_VERSION, fmt_sig(a.h_bs), fmt_sig(a.h_ut));
            let mut t = Table::new(&["distance_m", "fit_db", "fspl_db", "umi_los_db", "umi_nlos_db", "p_los", "fit_minus_nlos_db"]);
            for &d in &a.distances {
                let pg = first.eval(d);
                let los = umi_los(d, a.h_bs, a.h_ut, a.freq).ok();
                let nlos = umi_nlos(d, a.h_bs, a.h_ut, a.freq).ok();
                let d2d = (d * d - (a.h_bs - a.h_ut).powi(2)).max(0.0).sqrt();
                t.row(vec![
                    fmt_sig(d),
                    fmt_sig(pg),
                    fmt_sig(fspl(d, a.freq)),
                    opt_sig(los),
                    opt_sig(nlos),
                    fmt_sig(los_probability(d2d)),
                    opt_sig(nlos.map(|n| pg - n)),
                ]);
            }
            out.write_all(t.render().as_bytes()).map_err(io_err)?;
        }
    }
    Ok(0)
}

fn apply_budget_flags(mut b: LinkBudget, f: &BudgetFlags) -> LinkBudget {
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut b.tx_power_dbm, f.tx_power);
    set(&mut b.tx_max_gain_dbi, f.tx_gain);
    set(&mut b.rx_gain_dbi, f.rx_gain);
    set(&mut b.noise_figure_db, f.noise_figure);
    set(&mut b.bandwidth_hz, f.bandwidth);
    set(&mut b.snr_cutoff_db, f.cutoff);
    set(&mut b.nominal_azimuth_gain_dbi, f.nominal_gain);
    b
}

fn cutoff_text(c: &Cutoff) -> String {
    match c {
        Cutoff::At(d) => fmt_sig(*d),
        Cutoff::NotReached => "beyond".into(),
        Cutoff::NeverAbove => "none".into(),
    }
}

fn cmd_coverage(a: CoverageArgs, out: &mut dyn Write) -> Result<i32> {
    let rows = read_fits_table(&a.fits)?;
    let site: Option<SiteConfig> = a.site.as_ref().map(parse_site_file).transpose()?;
    let base = apply_budget_flags(site.map_or_else(LinkBudget::default, |s| s.budget), &a.budget);
    let selected: Vec<&FitRow> = match &a.label {
        Some(l) => vec![find_fit(&rows, l)?],
        None => rows.iter().collect(),
    };
    outln!(out, "noise_floor_dbm {}", fmt_sig(noise_floor(&base)));
    let mut t = Table::new(&["sidewalk", "median_abg_dbi", "eff_tx_gain_dbi", "min_snr_db", "max_snr_db", "cutoff_m", "cutoff_nominal_m", "mean_rate_gbps"]);
    for r in selected {
        let budget = LinkBudget {
            median_abg_dbi: a.budget.median_abg.or(r.median_abg).unwrap_or(base.nominal_azimuth_gain_dbi),
            ..base
        };
        let start = a.start.unwrap_or(r.d_min.max(1.0)).round().max(1.0);
        let end = a.end.unwrap_or(r.d_max);
        let (profile, s) = summarize(&r.fit(), &budget, start, end, a.step)?;
        t.row(vec![
            r.label.clone(),
            fmt_sig(budget.median_abg_dbi),
            fmt_sig(effective_tx_gain(&budget)),
            fmt_sig(s.min_snr_db),
            fmt_sig(s.max_snr_db),
            cutoff_text(&s.cutoff),
            cutoff_text(&s.cutoff_without_degradation),
            fmt_sig(s.mean_rate_bps / 1e9),
        ]);
        if let Some(dir) = &a.profile_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let mut text = String::from("distance_m,snr_db,rate_bps\n");
            for (d, snr, rate) in profile {
                text.push_str(&format!("{},{},{}\n", fmt_sig(d), fmt_sig(snr), fmt_sig(rate)));
            }
            let path = dir.join(format!("{}.csv", r.label));
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
    }
    out.write_all(t.render().as_bytes()).map_err(io_err)?;
    outln!(out, "cutoff_m uses the Tx gain less the ABG degradation; cutoff_nominal_m keeps the full Tx gain");
    outln!(out, "cutoff: largest distance with SNR >= {} dB; `beyond` = never drops below, `none` = never reaches", fmt_sig(base.snr_cutoff_db));
    Ok(0)
}

/// One device row of an `scm-gen` metadata sheet.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SheetRow {
    id: String,
    kind: String,
    reference_power_dbm: f64,
    east: f64,
    north: f64,
    up: f64,
    boresight_deg: f64,
    center_hz: f64,
    schedule_start: i64,
    schedule_end: i64,
    /// Pattern file relative to the sheet, or `isotropic`
    pattern: String,
    /// `label@start-end` sectors separated by `;`; empty for a uniform default
    #[serde(default)]
    fits: String,
    #[serde(default)]
    platform: Option<String>,
}

fn parse_sectors(spec: &str, fits: &[FitRow]) -> Result<Vec<(Sector, PathGainFit)>> {
    spec.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (label, range) = item
                .split_once('@')
                .ok_or_else(|| Error::invalid(format!("sector `{item}` is not `label@start-end`")))?;
            let (lo, hi) = range
                .split_once('-')
                .ok_or_else(|| Error::invalid(format!("sector `{item}` is not `label@start-end`")))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad sector bound `{s}` in `{item}`")))
            };
            Ok((Sector::new(num(lo)?, num(hi)?), find_fit(fits, label.trim())?.fit()))
        })
        .collect()
}

fn cmd_scm_gen(a: ScmGenArgs, out: &mut dyn Write) -> Result<i32> {
    let fits = read_fits_table(&a.fits)?;
    let base = a.sheet.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let mut rdr = csv::Reader::from_path(&a.sheet).map_err(|e| Error::invalid(format!("{}: {e}", a.sheet.display())))?;
    let sheet: Vec<SheetRow> = rdr
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::invalid(format!("{}: {e}", a.sheet.display())))?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let mut t = Table::new(&["id", "kind", "file", "bytes", "default_sectors_deg"]);
    for row in sheet {
        let pattern = if row.pattern.eq_ignore_ascii_case("isotropic") {
            AntennaPattern::isotropic(0.0)
        } else {
            parse_antenna_pattern(base.join(&row.pattern))?
        };
        let sectors = parse_sectors(&row.fits, &fits)?;
        let prop: PropagationMap = propagation_map_from_fits(&sectors, a.default_exponent, a.resolution)?;
        let defaults = prop.measured.iter().filter(|m| !**m).count() as f64 * a.resolution;
        let inputs = ScmInputs {
            id: row.id.clone(),
            reference_power_dbm: row.reference_power_dbm,
            power_map: PowerMap::from_pattern(&pattern, a.resolution, row.boresight_deg)?,
            propagation_map: prop,
            schedule: Schedule {
                start: row.schedule_start,
                end: row.schedule_end,
            },
            location: ScmLocation::point(crate::geometry::Position3D::new(row.east, row.north, row.up)),
            extras: OpaqueConstructs {
                platform_name: row.platform.clone().map(serde_json::Value::String),
                ..Default::default()
            },
        };
        let model = match row.kind.as_str() {
            "tx" | "transmitter" => build_tx_scm(&inputs, Some(default_mask(row.center_hz)))?,
            "rx" | "receiver" => build_rx_scm(&inputs, Some(default_mask(row.center_hz)))?,
            k => return Err(Error::invalid(format!("device `{}`: unknown kind `{k}`", row.id))),
        };
        let bytes = serialize_scm(&model)?;
        let name = format!("{}.scm.json", row.id);
        let path = a.out_dir.join(&name);
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        t.row(vec![
            row.id,
            row.kind,
            name,
            bytes.len().to_string(),
            fmt_sig(defaults),
        ]);
    }
    out.write_all(t.render().as_bytes()).map_err(io_err)?;
    Ok(0)
}

fn cmd_compat(a: CompatArgs, out: &mut dyn Write) -> Result<i32> {
    let models = a.files.iter().map(read_scm_file).collect::<Result<Vec<_>>>()?;
    let txs: Vec<&SpectrumConsumptionModel> = models.iter().filter(|m| m.kind == ModelKind::Transmitter).collect();
    let rxs: Vec<&SpectrumConsumptionModel> = models.iter().filter(|m| m.kind == ModelKind::Receiver).collect();
    if rxs.is_empty() {
        return Err(Error::invalid("no receiver models among the inputs"));
    }
    let mut reports = Vec::new();
    let mut pairs = Table::new(&["rx", "tx", "peak_psd_dbm_mhz", "margin_db", "compatible"]);
    let mut totals = Table::new(&["rx", "interferers", "margin_db", "worst_freq_hz", "compatible"]);
    for rx in &rxs {
        for tx in &txs {
            let grid = frequency_grid([*tx, *rx]);
            let r = aggregate_margin(&[tx], rx, &grid)?;
            pairs.row(vec![
                rx.id.clone(),
                tx.id.clone(),
                fmt_sig(r.per_interferer[0].received_psd_peak),
                fmt_sig(r.margin),
                yes_no(r.compatible),
            ]);
        }
        let grid = frequency_grid(txs.iter().copied().chain([*rx]));
        let r = aggregate_margin(&txs, rx, &grid)?;
        totals.row(vec![
            rx.id.clone(),
            txs.len().to_string(),
            fmt_sig(r.margin),
            opt_sig(r.worst_freq),
            yes_no(r.compatible),
        ]);
        reports.push(r);
    }
    if a.json {
        let text = serde_json::to_string_pretty(&reports).map_err(|e| Error::invalid(e.to_string()))?;
        outln!(out, "{text}");
    } else {
        outln!(out, "pairwise");
        out.write_all(pairs.render().as_bytes()).map_err(io_err)?;
        outln!(out, "aggregate");
        out.write_all(totals.render().as_bytes()).map_err(io_err)?;
    }
    Ok(0)
}

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.into()
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    n_links: usize,
    n_trials: usize,
    seed: u64,
    area_side_m: f64,
    channel_bw_hz: f64,
    histogram: &'a BTreeMap<u32, usize>,
    channels: &'a [u32],
    mode: u32,
    fraction_two_or_three: f64,
    max_channels: u32,
    all_valid: bool,
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if !(a.area > 0.0) {
        return Err(Error::invalid("--area must be positive"));
    }
    let mut cfg = ScenarioConfig::new(a.links);
    cfg.area_side_m = square_side_m(a.area);
    cfg.channel_bw_hz = a.channel_bw;
    cfg.base_freq_hz = a.base_freq;
    let s = run_trials(&cfg, a.trials, a.seed, !a.no_verify)?;
    outln!(out, "links {}  trials {}  seed {}  area_side_m {}", a.links, a.trials, a.seed, fmt_sig(cfg.area_side_m));
    let mut t = Table::new(&["channels", "trials", "fraction"]);
    for (c, k) in &s.histogram {
        t.row(vec![c.to_string(), k.to_string(), fmt_sig(*k as f64 / a.trials as f64)]);
    }
    out.write_all(t.render().as_bytes()).map_err(io_err)?;
    outln!(out, "mode {}", s.mode);
    outln!(out, "fraction_2_or_3 {}", fmt_sig(s.fraction_two_or_three));
    outln!(out, "max_channels {}", s.max_channels);
    if !a.no_verify {
        outln!(out, "assignments_verified {}", yes_no(s.all_valid));
    }
    if a.timing {
        let _ = writeln!(err, "max_link_seconds {}", fmt_sig(s.max_link_seconds));
        let _ = writeln!(err, "mean_link_seconds {}", fmt_sig(s.mean_link_seconds));
    }
    if let Some(path) = &a.summary {
        let summary = SimulationSummary {
            n_links: s.n_links,
            n_trials: s.n_trials,
            seed: s.seed,
            area_side_m: cfg.area_side_m,
            channel_bw_hz: cfg.channel_bw_hz,
            histogram: &s.histogram,
            channels: &s.channels,
            mode: s.mode,
            fraction_two_or_three: s.fraction_two_or_three,
            max_channels: s.max_channels,
            all_valid: s.all_valid,
        };
        let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::invalid(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(if s.all_valid { 0 } else { 4 })
}

fn cmd_stack(a: StackArgs, out: &mut dyn Write) -> Result<i32> {
    let ds = parse_measurement_file(&a.file)?;
    let text = spectrum_stack_grid(&ds, a.bin_width)?.to_text();
    match a.out {
        Some(p) => std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?,
        None => out.write_all(text.as_bytes()).map_err(io_err)?,
    }
    Ok(0)
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> Result<i32> {
    if a.list {
        let mut t = Table::new(&["sidewalk", "condition", "length_m", "links", "n", "b_db", "sigma_db", "median_abg_dbi", "p10_abg_dbi", "cw_angle_deg"]);
        for r in SIDEWALK_TABLE {
            t.row(vec![
                r.name.into(),
                r.condition.to_string(),
                fmt_sig(r.length_m),
                r.links.to_string(),
                fmt_sig(r.slope_n),
                fmt_sig(r.intercept_b),
                fmt_sig(r.rms_sigma),
                fmt_sig(r.median_abg),
                fmt_sig(r.p10_abg),
                fmt_sig(r.cw_angle),
            ]);
        }
        out.write_all(t.render().as_bytes()).map_err(io_err)?;
        return Ok(0);
    }
    let name = a.name.expect("required by clap");
    let path = a.out.expect("required by clap");
    let row = table_row(&name).ok_or_else(|| Error::invalid(format!("unknown sidewalk `{name}`")))?;
    let opts = SynthOptions {
        scans: a.scans,
        samples_per_scan: a.samples_per_scan,
        k_factor_db: a.k_factor,
        max_links: a.links,
        ..SynthOptions::default()
    };
    let ds = synth_sidewalk(row, &opts, a.seed)?;
    write_measurement_file(&ds, &path)?;
    outln!(out, "{} links {} samples_per_link {}", ds.sidewalk_id, ds.records.len(), a.scans * a.samples_per_scan);
    Ok(0)
}
