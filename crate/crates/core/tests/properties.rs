use canyon::compat::{aggregate_margin, frequency_grid};
use canyon::coverage::{noise_floor, snr_profile, LinkBudget};
use canyon::geometry::{bearing, link_distance_3d, normalize_deg, Position3D};
use canyon::ingest::{parse_measurement_str, write_measurement, Condition, PowerAngularRecord, Sample, SidewalkDataset, Visibility};
use canyon::metrics::{average_pas, path_gain, PowerAngularSpectrum};
use canyon::pathloss::{fit_single_slope, PathGainFit};
use canyon::scm::{
    build_tx_scm, parse_scm, serialize_scm, Mask, OpaqueConstructs, PowerMap, PropagationMap, Schedule, ScmInputs,
    ScmLocation,
};
use canyon::synth::horn_pattern;
use proptest::prelude::*;

fn position() -> impl Strategy<Value = Position3D> {
    (-500.0f64..500.0, -500.0f64..500.0, 0.0f64..40.0).prop_map(|(e, n, u)| Position3D::new(e, n, u))
}

fn record(id: String, tx: Position3D, raw: Vec<(f64, f64)>) -> PowerAngularRecord {
    let samples = raw
        .into_iter()
        .enumerate()
        .map(|(i, (az, p))| Sample { time_s: i as f64 * 0.01, azimuth_deg: az, power_dbm: p })
        .collect();
    PowerAngularRecord { link_id: id, tx_pos: tx, rx_pos: Position3D::new(0.0, 0.0, 15.0), samples, scan_count: 1 }
}

proptest! {
    #[test]
    fn distance_and_bearing_symmetry(a in position(), b in position()) {
        prop_assert!((link_distance_3d(&a, &b) - link_distance_3d(&b, &a)).abs() < 1e-9);
        prop_assume!(a.horizontal_distance(&b) > 1e-3);
        let forward = bearing(&a, &b).unwrap();
        let back = bearing(&b, &a).unwrap();
        let diff = normalize_deg(forward - back);
        prop_assert!((diff - 180.0).abs() < 1e-9);
    }

    #[test]
    fn measurement_round_trip(
        links in proptest::collection::vec(
            (position(), proptest::collection::vec((0.0f64..360.0, -120.0f64..-20.0), 1..20)),
            1..5,
        ),
        accuracy in proptest::option::of(0.1f64..3.0),
    ) {
        let mut ds = SidewalkDataset::new("Int-N-E", Condition::Standard, Visibility::Vlos);
        ds.power_accuracy_db = accuracy;
        for (i, (tx, raw)) in links.into_iter().enumerate() {
            ds.records.push(record(format!("L{i}"), tx, raw));
        }
        ds.sort_records();
        let text = write_measurement(&ds);
        let back = parse_measurement_str(&text).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(write_measurement(&back), text);
    }

    #[test]
    fn path_gain_rotation_invariant(
        raw in proptest::collection::vec((0.0f64..360.0, -110.0f64..-40.0), 50..300),
        steps in 0u32..72,
    ) {
        let rotation = steps as f64 * 5.0;
        let base = record("L".into(), Position3D::new(10.0, 10.0, 1.5), raw.clone());
        let rotated = record(
            "L".into(),
            Position3D::new(10.0, 10.0, 1.5),
            raw.iter().map(|&(az, p)| ((az + rotation).rem_euclid(360.0), p)).collect(),
        );
        let a = path_gain(&average_pas(&base, 5.0).unwrap(), 22.0, 0.0);
        let b = path_gain(&average_pas(&rotated, 5.0).unwrap(), 22.0, 0.0);
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn ols_residuals_orthogonal(
        pts in proptest::collection::vec((1.0f64..500.0, -160.0f64..-40.0), 3..60),
    ) {
        let spread = pts.iter().map(|p| p.0.log10()).fold(f64::NEG_INFINITY, f64::max)
            - pts.iter().map(|p| p.0.log10()).fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 0.05);
        let fit = fit_single_slope(&pts).unwrap();
        let residuals: Vec<f64> = pts.iter().map(|&(d, pg)| pg - fit.eval(d)).collect();
        let sum: f64 = residuals.iter().sum();
        let weighted: f64 = residuals.iter().zip(&pts).map(|(r, p)| r * p.0.log10()).sum();
        prop_assert!(sum.abs() < 1e-7 * pts.len() as f64);
        prop_assert!(weighted.abs() < 1e-7 * pts.len() as f64);
    }

    #[test]
    fn snr_linear_in_budget(
        n in -5.0f64..-1.5,
        b in -70.0f64..-20.0,
        power in 0.0f64..40.0,
        delta in -10.0f64..10.0,
    ) {
        let fit = PathGainFit::from_params("x", n, b, 3.0, 1.0, 300.0);
        let budget = LinkBudget { tx_power_dbm: power, ..LinkBudget::default() };
        let shifted = LinkBudget { tx_power_dbm: power + delta, ..LinkBudget::default() };
        let p0 = snr_profile(&fit, &budget, 1.0, 300.0, 7.0).unwrap();
        let p1 = snr_profile(&fit, &shifted, 1.0, 300.0, 7.0).unwrap();
        for ((d0, s0), (d1, s1)) in p0.iter().zip(&p1) {
            prop_assert_eq!(d0, d1);
            prop_assert!((s1 - s0 - delta).abs() < 1e-9);
            let expected = power + 23.0 + 11.0 - noise_floor(&budget) + b + 10.0 * n * d0.log10();
            prop_assert!((s0 - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn scm_bytes_round_trip(
        power in -20.0f64..40.0,
        orientation in 0.0f64..360.0,
        exponent in 1.5f64..4.5,
        at in position(),
        center in 27e9f64..29e9,
    ) {
        let inputs = ScmInputs {
            id: "tx".into(),
            reference_power_dbm: power,
            power_map: PowerMap::from_pattern(&horn_pattern(), 15.0, orientation).unwrap(),
            propagation_map: PropagationMap::uniform(exponent, 15.0).unwrap(),
            schedule: Schedule { start: 0, end: 3600 },
            location: ScmLocation::point(at),
            extras: OpaqueConstructs::default(),
        };
        let m = build_tx_scm(&inputs, Some(Mask::trapezoid(center, 2e6, 1e6, -30.0))).unwrap();
        let bytes = serialize_scm(&m).unwrap();
        let back = parse_scm(&bytes).unwrap();
        prop_assert_eq!(serialize_scm(&back).unwrap(), bytes);
        let grid = frequency_grid([&m]);
        prop_assert!(grid.iter().all(|f| m.spectrum_mask.as_ref().unwrap().contains(*f)));
    }

    #[test]
    fn mask_hits_breakpoints(
        mut xs in proptest::collection::btree_set(0u32..10_000, 2..12),
        levels in proptest::collection::vec(-60.0f64..0.0, 12),
    ) {
        let xs: Vec<f64> = std::mem::take(&mut xs).into_iter().map(|x| x as f64 * 1e3).collect();
        let mut points: Vec<(f64, f64)> = xs.iter().zip(&levels).map(|(&x, &l)| (x, l)).collect();
        points[0].1 = 0.0;
        let mask = Mask::new(points.clone()).unwrap();
        for &(x, l) in &points {
            prop_assert!((mask.eval(x) - l).abs() < 1e-12);
        }
        for w in points.windows(2) {
            let mid = mask.eval(0.5 * (w[0].0 + w[1].0));
            prop_assert!((mid - 0.5 * (w[0].1 + w[1].1)).abs() < 1e-9);
        }
        prop_assert_eq!(mask.eval(xs[0] - 1.0), f64::NEG_INFINITY);
        prop_assert_eq!(mask.eval(xs[xs.len() - 1] + 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn power_map_knots_match_grid(az in 0u32..360, el in 0u32..181, orientation in 0.0f64..360.0) {
        let map = PowerMap::from_pattern(&horn_pattern(), 1.0, orientation).unwrap();
        let grid = &map.grid;
        let stored = grid.gains_db[el as usize * grid.azimuth_count() + az as usize];
        let looked_up = map.gain(orientation + az as f64, el as f64 - 90.0);
        prop_assert!((stored - looked_up).abs() < 1e-9);
    }

    #[test]
    fn margin_never_improves_with_interferer(extra in -30.0f64..30.0) {
        let rx = canyon_fixtures::rx();
        let a = canyon_fixtures::tx("a", 40.0, 0.0, 0.0);
        let b = canyon_fixtures::tx("b", 0.0, 60.0, extra);
        let grid = frequency_grid([&a, &b, &rx]);
        let one = aggregate_margin(&[&a], &rx, &grid).unwrap().margin;
        let two = aggregate_margin(&[&a, &b], &rx, &grid).unwrap().margin;
        prop_assert!(two <= one);
    }
}

mod canyon_fixtures {
    use super::*;
    use canyon::scm::{build_rx_scm, default_mask, SpectrumConsumptionModel};

    fn inputs(id: &str, e: f64, n: f64, power: f64) -> ScmInputs {
        ScmInputs {
            id: id.into(),
            reference_power_dbm: power,
            power_map: PowerMap::isotropic(10.0).unwrap(),
            propagation_map: PropagationMap::uniform(2.0, 10.0).unwrap(),
            schedule: Schedule { start: 0, end: 10 },
            location: ScmLocation::point(Position3D::new(e, n, 0.0)),
            extras: OpaqueConstructs::default(),
        }
    }

    pub fn rx() -> SpectrumConsumptionModel {
        build_rx_scm(&inputs("rx", 0.0, 0.0, -80.0), Some(default_mask(28e9))).unwrap()
    }

    pub fn tx(id: &str, e: f64, n: f64, power: f64) -> SpectrumConsumptionModel {
        build_tx_scm(&inputs(id, e, n, power), Some(default_mask(28e9))).unwrap()
    }
}

#[test]
fn empty_spectrum_is_rejected() {
    assert!(PowerAngularSpectrum::from_bins("L", 10.0, Vec::new()).is_err());
}
