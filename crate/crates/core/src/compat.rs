//! Compatibility between transmitter and receiver models, single and aggregate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{bearing, link_distance_3d, Position3D};
use crate::metrics::{dbm_to_mw, mw_to_dbm};
use crate::pathloss::fspl;
use crate::scm::{ModelKind, PowerMap, PropagationMap, SpectrumConsumptionModel};

/// Margins within this distance of zero are reported as exactly zero.
pub const MARGIN_SNAP_DB: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfererPeak {
    pub tx_id: String,
    /// Peak received PSD over the evaluated grid, dBm/MHz; `-inf` when the
    /// transmitter is inactive during the receiver's schedule.
    pub received_psd_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatReport {
    pub rx_id: String,
    /// `+inf` when nothing is received anywhere on the grid.
    pub margin: f64,
    pub per_interferer: Vec<InterfererPeak>,
    pub worst_freq: Option<f64>,
    pub compatible: bool,
}

pub fn directional_gain(map: &PowerMap, bearing_deg: f64, elevation_deg: f64) -> f64 {
    map.gain(bearing_deg, elevation_deg)
}

/// Path loss (positive dB) along `bearing_deg`: FSPL at 1 m plus `10 n log10(d)`.
pub fn path_loss_between(prop: &PropagationMap, bearing_deg: f64, d: f64, f_hz: f64) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(Error::invalid(format!("path-loss distance {d} m is below 1 m")));
    }
    Ok(-fspl(1.0, f_hz) + 10.0 * prop.exponent(bearing_deg) * d.log10())
}

fn direction(from: &Position3D, to: &Position3D) -> (f64, f64) {
    let horiz = from.horizontal_distance(to);
    let dz = to.up - from.up;
    if horiz == 0.0 {
        return (0.0, if dz >= 0.0 { 90.0 } else { -90.0 });
    }
    let b = bearing(from, to).unwrap_or(0.0);
    (b, dz.atan2(horiz).to_degrees())
}

/// Frequency-independent part of the received PSD: reference PSD, both
/// antenna gains and the distance term of the path loss, dBm/MHz.
/// Separations below 1 m use the 1 m loss; co-located models are an error.
pub fn coupling_db(tx: &SpectrumConsumptionModel, rx: &SpectrumConsumptionModel) -> Result<f64> {
    let mask = tx
        .spectrum_mask
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("model `{}` is not a transmitter", tx.id)))?;
    let (ptx, prx) = (tx.position(), rx.position());
    let d = link_distance_3d(&ptx, &prx);
    if d == 0.0 {
        return Err(Error::invalid(format!("models `{}` and `{}` are co-located", tx.id, rx.id)));
    }
    // inside 1 m the loss is held at its 1 m value
    let d = d.max(1.0);
    let (b_tr, e_tr) = direction(&ptx, &prx);
    let (b_rt, e_rt) = direction(&prx, &ptx);
    Ok(tx.reference_power_dbm + mask.psd_offset_db() + tx.power_map.gain(b_tr, e_tr)
        - 10.0 * tx.propagation_map.exponent(b_tr) * d.log10()
        + rx.power_map.gain(b_rt, e_rt))
}

/// Received PSD given a coupling and the emission mask level at `f_hz`.
pub fn psd_from_coupling(coupling: f64, mask_db: f64, f_hz: f64) -> f64 {
    if mask_db == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    coupling + mask_db + fspl(1.0, f_hz)
}

/// Interference PSD at the receiver, dBm/MHz; `-inf` outside the transmitter's mask.
pub fn received_psd(tx: &SpectrumConsumptionModel, rx: &SpectrumConsumptionModel, f_hz: f64) -> Result<f64> {
    let c = coupling_db(tx, rx)?;
    let mask = tx.spectrum_mask.as_ref().expect("checked by coupling_db");
    Ok(psd_from_coupling(c, mask.eval(f_hz), f_hz))
}

/// Tolerated interference PSD at `f_hz`, dBm/MHz; `-inf` outside the underlay mask.
pub fn allowed_psd(rx: &SpectrumConsumptionModel, f_hz: f64) -> Result<f64> {
    let mask = rx
        .underlay_mask
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("model `{}` is not a receiver", rx.id)))?;
    Ok(rx.reference_power_dbm + mask.psd_offset_db() + mask.eval(f_hz))
}

/// `allowed - 10 log10(aggregate)`, snapped to zero within [`MARGIN_SNAP_DB`].
pub fn margin_db(allowed_dbm: f64, aggregate_mw: f64) -> f64 {
    if aggregate_mw <= 0.0 {
        return f64::INFINITY;
    }
    let m = allowed_dbm - mw_to_dbm(aggregate_mw);
    if m.abs() < MARGIN_SNAP_DB {
        0.0
    } else {
        m
    }
}

/// Union of every mask breakpoint plus the midpoints between neighbours.
pub fn frequency_grid<'a>(models: impl IntoIterator<Item = &'a SpectrumConsumptionModel>) -> Vec<f64> {
    let mut knots: Vec<f64> = models
        .into_iter()
        .flat_map(|m| m.spectrum_mask.iter().chain(m.underlay_mask.iter()))
        .flat_map(|mask| mask.breakpoints.iter().map(|p| p.0))
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut grid = Vec::with_capacity(knots.len() * 2);
    for (i, &f) in knots.iter().enumerate() {
        if i > 0 {
            grid.push(0.5 * (knots[i - 1] + f));
        }
        grid.push(f);
    }
    grid
}

/// Aggregate interference margin of `rx` against `txs` over `freqs`.
///
/// Only grid points inside the receiver's underlay span are evaluated, and
/// transmitters whose schedule does not overlap the receiver's contribute nothing.
pub fn aggregate_margin(
    txs: &[&SpectrumConsumptionModel],
    rx: &SpectrumConsumptionModel,
    freqs: &[f64],
) -> Result<CompatReport> {
    if freqs.is_empty() {
        return Err(Error::invalid("empty frequency grid"));
    }
    if rx.kind != ModelKind::Receiver {
        return Err(Error::invalid(format!("model `{}` is not a receiver", rx.id)));
    }
    let underlay = rx.underlay_mask.as_ref().expect("receiver invariant");
    let grid: Vec<f64> = freqs.iter().copied().filter(|&f| underlay.contains(f)).collect();
    if grid.is_empty() {
        return Err(Error::invalid(format!(
            "no grid frequency falls inside the underlay span of `{}`",
            rx.id
        )));
    }
    let mut aggregate = vec![0.0; grid.len()];
    let mut per_interferer = Vec::with_capacity(txs.len());
    for tx in txs {
        if tx.kind != ModelKind::Transmitter {
            return Err(Error::invalid(format!("model `{}` is not a transmitter", tx.id)));
        }
        let mut peak = f64::NEG_INFINITY;
        if tx.schedule.overlaps(&rx.schedule) {
            let c = coupling_db(tx, rx)?;
            let mask = tx.spectrum_mask.as_ref().expect("transmitter invariant");
            for (acc, &f) in aggregate.iter_mut().zip(&grid) {
                let psd = psd_from_coupling(c, mask.eval(f), f);
                peak = peak.max(psd);
                *acc += dbm_to_mw(psd);
            }
        }
        per_interferer.push(InterfererPeak {
            tx_id: tx.id.clone(),
            received_psd_peak: peak,
        });
    }
    let mut margin = f64::INFINITY;
    let mut worst_freq = None;
    for (&f, &agg) in grid.iter().zip(&aggregate) {
        let m = margin_db(allowed_psd(rx, f)?, agg);
        if m < margin {
            margin = m;
            worst_freq = Some(f);
        }
    }
    Ok(CompatReport {
        rx_id: rx.id.clone(),
        margin,
        per_interferer,
        worst_freq,
        compatible: margin >= 0.0,
    })
}
