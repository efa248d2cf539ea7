//! Single-slope log-distance fits and reference path-loss models.
//!
//! Fits follow `pg(d) = b + 10 n log10(d)` with the intercept `b` referenced at
//! d = 1 m. Reference models return *gains* (negative losses) in dB so they can
//! be compared against fits directly.
//!
//! The UMi street-canyon formulas and LOS probability are taken from
//! 3GPP TR 38.901 V16.1.0, Table 7.4.1-1 and Table 7.4.2-1.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const UMI_STANDARD_VERSION: &str = "3GPP TR 38.901 V16.1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGainFit {
    pub label: String,
    pub slope_n: f64,
    pub intercept_b: f64,
    pub rms_sigma: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub count: usize,
}

impl PathGainFit {
    /// A model with no data behind it, e.g. a published table row.
    pub fn from_params(label: impl Into<String>, slope_n: f64, intercept_b: f64, rms_sigma: f64, d_min: f64, d_max: f64) -> Self {
        Self {
            label: label.into(),
            slope_n,
            intercept_b,
            rms_sigma,
            d_min,
            d_max,
            count: 0,
        }
    }

    pub fn eval(&self, d: f64) -> f64 {
        eval_fit(self, d)
    }
}

pub fn eval_fit(fit: &PathGainFit, d: f64) -> f64 {
    fit.intercept_b + 10.0 * fit.slope_n * d.log10()
}

/// Ordinary least squares of path gain against `10 log10(d)`.
pub fn fit_single_slope(points: &[(f64, f64)]) -> Result<PathGainFit> {
    fit_labeled("", points)
}

pub fn fit_labeled(label: impl Into<String>, points: &[(f64, f64)]) -> Result<PathGainFit> {
    if points.len() < 2 {
        return Err(Error::invalid(format!("fit needs at least 2 points, got {}", points.len())));
    }
    if let Some(&(d, pg)) = points.iter().find(|(d, pg)| !(d.is_finite() && *d > 0.0 && pg.is_finite())) {
        return Err(Error::invalid(format!("invalid point ({d}, {pg}): distance must be positive")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(d, _)| 10.0 * d.log10()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - x_mean) * (p.1 - y_mean)).sum();
    let spread = xs.iter().fold(0.0f64, |m, x| m.max((x - x_mean).abs()));
    if spread <= 1e-12 {
        return Err(Error::invalid("all distances are equal; slope is undetermined"));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = xs
        .iter()
        .zip(points)
        .map(|(x, p)| (p.1 - intercept - slope * x).powi(2))
        .sum();
    let (d_min, d_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    Ok(PathGainFit {
        label: label.into(),
        slope_n: slope,
        intercept_b: intercept,
        rms_sigma: (sse / n).sqrt(),
        d_min,
        d_max,
        count: points.len(),
    })
}

/// Pooled fit over the union of the selected point sets.
pub fn group_fit<'a, T, I, F>(label: impl Into<String>, pools: I, mut selector: F) -> Result<PathGainFit>
where
    T: 'a,
    I: IntoIterator<Item = (&'a T, &'a [(f64, f64)])>,
    F: FnMut(&T) -> bool,
{
    let points: Vec<(f64, f64)> = pools
        .into_iter()
        .filter(|(meta, _)| selector(meta))
        .flat_map(|(_, pts)| pts.iter().copied())
        .collect();
    fit_labeled(label, &points)
}

/// Free-space path gain (negative FSPL), dB.
pub fn fspl(d: f64, f_hz: f64) -> f64 {
    -(20.0 * d.log10() + 20.0 * f_hz.log10() + 20.0 * (4.0 * PI / SPEED_OF_LIGHT).log10())
}

#[derive(Debug, Clone, Copy)]
struct UmiGeometry {
    d3d: f64,
    d2d: f64,
    fc_ghz: f64,
    h_bs: f64,
    h_ut: f64,
}

fn umi_geometry(d3d: f64, h_bs: f64, h_ut: f64, f_hz: f64) -> Result<UmiGeometry> {
    if !(1.5..=22.5).contains(&h_ut) {
        return Err(Error::invalid(format!("UMi UT height {h_ut} m outside [1.5, 22.5]")));
    }
    if !(h_bs > 1.0 && h_bs <= 150.0) {
        return Err(Error::invalid(format!("UMi BS height {h_bs} m outside (1, 150]")));
    }
    if !(f_hz > 0.0) {
        return Err(Error::invalid("carrier frequency must be positive"));
    }
    let dh = h_bs - h_ut;
    if !(d3d > dh.abs()) {
        return Err(Error::invalid(format!(
            "3D distance {d3d} m does not exceed the height offset {} m",
            dh.abs()
        )));
    }
    Ok(UmiGeometry {
        d3d,
        d2d: (d3d * d3d - dh * dh).sqrt(),
        fc_ghz: f_hz / 1e9,
        h_bs,
        h_ut,
    })
}

/// Effective-height breakpoint distance d'_BP (environment height 1 m).
pub fn umi_breakpoint(h_bs: f64, h_ut: f64, f_hz: f64) -> f64 {
    4.0 * (h_bs - 1.0) * (h_ut - 1.0) * f_hz / SPEED_OF_LIGHT
}

fn umi_los_loss(g: &UmiGeometry) -> f64 {
    let bp = 4.0 * (g.h_bs - 1.0) * (g.h_ut - 1.0) * g.fc_ghz * 1e9 / SPEED_OF_LIGHT;
    if g.d2d <= bp {
        32.4 + 21.0 * g.d3d.log10() + 20.0 * g.fc_ghz.log10()
    } else {
        32.4 + 40.0 * g.d3d.log10() + 20.0 * g.fc_ghz.log10()
            - 9.5 * (bp * bp + (g.h_bs - g.h_ut).powi(2)).log10()
    }
}

pub fn umi_los(d3d: f64, h_bs: f64, h_ut: f64, f_hz: f64) -> Result<f64> {
    Ok(-umi_los_loss(&umi_geometry(d3d, h_bs, h_ut, f_hz)?))
}

pub fn umi_nlos(d3d: f64, h_bs: f64, h_ut: f64, f_hz: f64) -> Result<f64> {
    let g = umi_geometry(d3d, h_bs, h_ut, f_hz)?;
    let nlos_prime = 35.3 * g.d3d.log10() + 22.4 + 21.3 * g.fc_ghz.log10() - 0.3 * (g.h_ut - 1.5);
    Ok(-umi_los_loss(&g).max(nlos_prime))
}

/// UMi street-canyon LOS probability as a function of 2D distance.
pub fn los_probability(d2d: f64) -> f64 {
    if d2d <= 18.0 {
        1.0
    } else {
        18.0 / d2d + (-d2d / 36.0).exp() * (1.0 - 18.0 / d2d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitComparison {
    pub delta_n: f64,
    pub delta_b: f64,
    /// `(d, eval(a, d) - eval(b, d))`
    pub rows: Vec<(f64, f64)>,
}

pub fn compare_fits(a: &PathGainFit, b: &PathGainFit, distances: &[f64]) -> FitComparison {
    FitComparison {
        delta_n: a.slope_n - b.slope_n,
        delta_b: a.intercept_b - b.intercept_b,
        rows: distances.iter().map(|&d| (d, eval_fit(a, d) - eval_fit(b, d))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_recovery() {
        let pts: Vec<(f64, f64)> = [3.0, 10.0, 50.0, 120.0, 400.0]
            .iter()
            .map(|&d| (d, -36.8 - 35.0 * f64::log10(d)))
            .collect();
        let fit = fit_single_slope(&pts).unwrap();
        assert!((fit.slope_n + 3.5).abs() < 1e-9);
        assert!((fit.intercept_b + 36.8).abs() < 1e-9);
        assert!(fit.rms_sigma < 1e-9);
        assert_eq!((fit.d_min, fit.d_max, fit.count), (3.0, 400.0, 5));
    }

    #[test]
    fn two_points_interpolate() {
        let fit = fit_single_slope(&[(10.0, -70.0), (100.0, -95.0)]).unwrap();
        assert!((fit.slope_n + 2.5).abs() < 1e-12);
        assert!((fit.eval(10.0) + 70.0).abs() < 1e-9);
        assert!(fit.rms_sigma < 1e-9);
    }

    #[test]
    fn singular_design() {
        assert!(fit_single_slope(&[(10.0, -70.0), (10.0, -72.0)]).is_err());
        assert!(fit_single_slope(&[(10.0, -70.0)]).is_err());
        assert!(fit_single_slope(&[(0.0, -70.0), (1.0, -2.0)]).is_err());
    }

    #[test]
    fn eval_examples() {
        let int_n_e = PathGainFit::from_params("Int-N-E", -3.5, -36.8, 4.3, 3.0, 507.0);
        assert!((eval_fit(&int_n_e, 10.0) + 71.8).abs() < 1e-12);
        assert_eq!(eval_fit(&int_n_e, 1.0), -36.8);
        let slope2 = PathGainFit::from_params("s2", -2.0, -40.0, 0.0, 1.0, 10.0);
        let drop = eval_fit(&slope2, 20.0) - eval_fit(&slope2, 40.0);
        assert!((drop - 20.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn fspl_values() {
        assert!((fspl(1.0, 28e9) + 61.391).abs() < 0.001);
        assert!((fspl(10.0, 28e9) - fspl(1.0, 28e9) + 20.0).abs() < 1e-9);
        assert!((fspl(5.0, 56e9) - fspl(5.0, 28e9) + 20.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn umi_breakpoint_continuity() {
        let (h_bs, h_ut, f) = (10.0, 1.5, 28e9);
        let bp = umi_breakpoint(h_bs, h_ut, f);
        let dh = h_bs - h_ut;
        let d3d_bp = (bp * bp + dh * dh).sqrt();
        let g = umi_geometry(d3d_bp, h_bs, h_ut, f).unwrap();
        let pl1 = 32.4 + 21.0 * g.d3d.log10() + 20.0 * g.fc_ghz.log10();
        let pl2 = 32.4 + 40.0 * g.d3d.log10() + 20.0 * g.fc_ghz.log10() - 9.5 * (bp * bp + dh * dh).log10();
        assert!((pl1 - pl2).abs() < 0.01);
        let below = umi_los(d3d_bp * (1.0 - 1e-9), h_bs, h_ut, f).unwrap();
        let above = umi_los(d3d_bp * (1.0 + 1e-9), h_bs, h_ut, f).unwrap();
        assert!((below - above).abs() < 0.01);
    }

    #[test]
    fn umi_ordering_and_monotone() {
        let mut prev = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for i in 0..500 {
            let d = 15.0 + i as f64 * 3.0;
            let los = umi_los(d, 15.0, 1.5, 28e9).unwrap();
            let nlos = umi_nlos(d, 15.0, 1.5, 28e9).unwrap();
            let fs = fspl(d, 28e9);
            assert!(nlos <= los);
            assert!(los < prev.0 && nlos < prev.1 && fs < prev.2);
            prev = (los, nlos, fs);
        }
    }

    #[test]
    fn umi_out_of_range() {
        assert!(umi_los(100.0, 10.0, 30.0, 28e9).is_err());
        assert!(umi_nlos(100.0, 0.5, 1.5, 28e9).is_err());
        assert!(umi_los(5.0, 10.0, 1.5, 28e9).is_err());
    }

    #[test]
    fn los_probability_values() {
        assert_eq!(los_probability(18.0), 1.0);
        assert!(los_probability(191.0) < 0.1);
        assert!(los_probability(150.0) > 0.1);
        let mut prev = 1.0;
        for i in 0..2000 {
            let p = los_probability(i as f64 * 0.5);
            assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn comparisons() {
        let a = PathGainFit::from_params("a", -3.0, -40.0, 3.0, 1.0, 300.0);
        let same = compare_fits(&a, &a, &[1.0, 10.0, 100.0]);
        assert!(same.rows.iter().all(|r| r.1 == 0.0));
        let mut b = a.clone();
        b.intercept_b -= 3.0;
        let c = compare_fits(&a, &b, &[1.0, 50.0, 300.0]);
        assert!(c.rows.iter().all(|r| (r.1 - 3.0).abs() < 1e-12));
        let mut steeper = a.clone();
        steeper.slope_n -= 0.1;
        steeper.intercept_b -= 2.2;
        let c = compare_fits(&a, &steeper, &[100.0]);
        assert!((c.rows[0].1 - 4.2).abs() < 1e-12);
        assert!((c.delta_n - 0.1).abs() < 1e-12 && (c.delta_b - 2.2).abs() < 1e-12);
    }

    #[test]
    fn group_fit_pools() {
        let pts: Vec<(f64, f64)> = (1..30).map(|i| {
            let d = i as f64 * 7.0;
            (d, -40.0 - 30.0 * d.log10() + if i % 2 == 0 { 2.0 } else { -2.0 })
        }).collect();
        let single = fit_single_slope(&pts).unwrap();
        let pools = [("a", pts.as_slice()), ("b", pts.as_slice())];
        let one = group_fit("g", pools.iter().map(|(m, p)| (m, *p)), |m: &&str| *m == "a").unwrap();
        assert!((one.slope_n - single.slope_n).abs() < 1e-12);
        let both = group_fit("g", pools.iter().map(|(m, p)| (m, *p)), |_| true).unwrap();
        assert_eq!(both.count, 2 * single.count);
        assert!((both.slope_n - single.slope_n).abs() < 1e-9);
        assert!((both.intercept_b - single.intercept_b).abs() < 1e-9);
        assert!((both.rms_sigma - single.rms_sigma).abs() < 1e-9);
    }
}
