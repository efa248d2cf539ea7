//! Link-budget SNR profiles along a sidewalk, SNR cutoff distances and
//! Shannon rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathloss::{eval_fit, PathGainFit};

/// Thermal noise density at room temperature, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub tx_max_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub snr_cutoff_db: f64,
    /// Measured median azimuth beamforming gain of the sidewalk.
    pub median_abg_dbi: f64,
    pub nominal_azimuth_gain_dbi: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            tx_power_dbm: 28.0,
            tx_max_gain_dbi: 23.0,
            rx_gain_dbi: 11.0,
            noise_figure_db: 10.0,
            bandwidth_hz: 800e6,
            snr_cutoff_db: 15.0,
            median_abg_dbi: 14.5,
            nominal_azimuth_gain_dbi: 14.5,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::invalid("bandwidth must be positive"));
        }
        if effective_tx_gain(self) > self.tx_max_gain_dbi + 1e-12 {
            return Err(Error::invalid(format!(
                "median ABG {} dBi exceeds the nominal azimuth gain {} dBi",
                self.median_abg_dbi, self.nominal_azimuth_gain_dbi
            )));
        }
        Ok(())
    }
}

pub fn noise_floor(budget: &LinkBudget) -> f64 {
    THERMAL_NOISE_DBM_HZ + 10.0 * budget.bandwidth_hz.log10() + budget.noise_figure_db
}

/// Max Tx gain less the beamforming degradation (nominal minus median ABG).
pub fn effective_tx_gain(budget: &LinkBudget) -> f64 {
    budget.tx_max_gain_dbi - (budget.nominal_azimuth_gain_dbi - budget.median_abg_dbi)
}

/// SNR on a regular distance grid `start, start + step, ... <= end`.
pub fn snr_profile(fit: &PathGainFit, budget: &LinkBudget, start: f64, end: f64, step: f64) -> Result<Vec<(f64, f64)>> {
    budget.validate()?;
    if !(start > 0.0 && end >= start && step > 0.0) {
        return Err(Error::invalid(format!(
            "bad profile range start={start} end={end} step={step}"
        )));
    }
    let offset = budget.tx_power_dbm + effective_tx_gain(budget) + budget.rx_gain_dbi - noise_floor(budget);
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let d = start + i as f64 * step;
            (d, offset + eval_fit(fit, d))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Cutoff {
    /// Largest grid distance with SNR at or above the threshold.
    At(f64),
    /// SNR never falls below the threshold on the profile.
    NotReached,
    /// SNR is below the threshold everywhere on the profile.
    NeverAbove,
}

impl Cutoff {
    pub fn distance(&self) -> Option<f64> {
        match self {
            Cutoff::At(d) => Some(*d),
            _ => None,
        }
    }
}

pub fn cutoff_distance(profile: &[(f64, f64)], threshold_db: f64) -> Cutoff {
    if profile.iter().all(|p| p.1 >= threshold_db) {
        return Cutoff::NotReached;
    }
    profile
        .iter()
        .rev()
        .find(|p| p.1 >= threshold_db)
        .map_or(Cutoff::NeverAbove, |p| Cutoff::At(p.0))
}

pub fn shannon_rate(snr_db: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + 10f64.powf(snr_db / 10.0)).log2()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub label: String,
    pub min_snr_db: f64,
    pub max_snr_db: f64,
    pub cutoff: Cutoff,
    /// Cutoff if the Tx keeps its full nominal gain (no ABG degradation).
    pub cutoff_without_degradation: Cutoff,
    /// Mean Shannon rate over grid points above the cutoff threshold, bit/s.
    pub mean_rate_bps: f64,
}

/// `(distance_m, snr_db, rate_bps)`.
pub type RatePoint = (f64, f64, f64);

/// Profile plus summary; points below the SNR threshold contribute zero rate.
pub fn summarize(fit: &PathGainFit, budget: &LinkBudget, start: f64, end: f64, step: f64) -> Result<(Vec<RatePoint>, CoverageSummary)> {
    let profile = snr_profile(fit, budget, start, end, step)?;
    let nominal = LinkBudget {
        median_abg_dbi: budget.nominal_azimuth_gain_dbi,
        ..*budget
    };
    let nominal_profile = snr_profile(fit, &nominal, start, end, step)?;
    let rows: Vec<(f64, f64, f64)> = profile
        .iter()
        .map(|&(d, snr)| {
            let rate = if snr >= budget.snr_cutoff_db {
                shannon_rate(snr, budget.bandwidth_hz)
            } else {
                0.0
            };
            (d, snr, rate)
        })
        .collect();
    let (min_snr, max_snr) = profile
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let mean_rate = rows.iter().map(|r| r.2).sum::<f64>() / rows.len() as f64;
    let summary = CoverageSummary {
        label: fit.label.clone(),
        min_snr_db: min_snr,
        max_snr_db: max_snr,
        cutoff: cutoff_distance(&profile, budget.snr_cutoff_db),
        cutoff_without_degradation: cutoff_distance(&nominal_profile, budget.snr_cutoff_db),
        mean_rate_bps: mean_rate,
    };
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int_s_w() -> PathGainFit {
        PathGainFit::from_params("Int-S-W", -3.6, -39.2, 3.4, 1.0, 317.0)
    }

    #[test]
    fn noise_floor_values() {
        assert!((noise_floor(&LinkBudget::default()) + 74.9691).abs() < 1e-3);
        let unit = LinkBudget { bandwidth_hz: 1.0, noise_figure_db: 0.0, ..Default::default() };
        assert_eq!(noise_floor(&unit), -174.0);
        let wide = LinkBudget { bandwidth_hz: 8e9, ..Default::default() };
        assert!((noise_floor(&wide) - noise_floor(&LinkBudget::default()) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn effective_gain() {
        assert_eq!(effective_tx_gain(&LinkBudget::default()), 23.0);
        let b = LinkBudget { median_abg_dbi: 12.9, ..Default::default() };
        assert!((effective_tx_gain(&b) - 21.4).abs() < 1e-12);
        let b = LinkBudget { median_abg_dbi: 13.1, ..Default::default() };
        assert!((effective_tx_gain(&b) - 21.6).abs() < 1e-12);
        let bad = LinkBudget { median_abg_dbi: 16.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn flat_fit_gives_constant_snr() {
        let flat = PathGainFit::from_params("flat", 0.0, -90.0, 0.0, 1.0, 100.0);
        let p = snr_profile(&flat, &LinkBudget::default(), 1.0, 100.0, 1.0).unwrap();
        assert_eq!(p.len(), 100);
        assert!(p.iter().all(|x| (x.1 - p[0].1).abs() < 1e-12));
    }

    #[test]
    fn tx_power_shift() {
        let base = snr_profile(&int_s_w(), &LinkBudget::default(), 1.0, 317.0, 1.0).unwrap();
        let louder = LinkBudget { tx_power_dbm: 31.0, ..Default::default() };
        let shifted = snr_profile(&int_s_w(), &louder, 1.0, 317.0, 1.0).unwrap();
        for (a, b) in base.iter().zip(&shifted) {
            assert!((b.1 - a.1 - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cutoff_rules() {
        assert_eq!(cutoff_distance(&[(1.0, 20.0), (2.0, 16.0)], 15.0), Cutoff::NotReached);
        assert_eq!(cutoff_distance(&[(1.0, 10.0), (2.0, 9.0)], 15.0), Cutoff::NeverAbove);
        let p = [(1.0, 30.0), (2.0, 20.0), (3.0, 15.0), (4.0, 14.9), (5.0, 10.0)];
        assert_eq!(cutoff_distance(&p, 15.0), Cutoff::At(3.0));
    }

    #[test]
    fn int_s_w_cutoff_bracket() {
        let degraded = LinkBudget { median_abg_dbi: 12.9, ..Default::default() };
        let (_, s) = summarize(&int_s_w(), &degraded, 1.0, 317.0, 1.0).unwrap();
        let with = s.cutoff.distance().unwrap();
        let without = s.cutoff_without_degradation.distance().unwrap();
        assert!((170.0..=215.0).contains(&with), "{with}");
        assert!((170.0..=215.0).contains(&without), "{without}");
        assert!(with < without);
    }

    #[test]
    fn shannon_values() {
        assert!((shannon_rate(0.0, 1.0) - 1.0).abs() < 1e-12);
        let r = shannon_rate(15.0, 800e6);
        assert!((r / 1e9 - 4.03).abs() < 0.01);
        assert!(shannon_rate(-300.0, 1e6) < 1e-20);
    }
}
