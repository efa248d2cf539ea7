//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::time::{Duration, Instant};

use canyon::compat::{aggregate_margin, allowed_psd, frequency_grid, received_psd};
use canyon::coverage::{cutoff_distance, noise_floor, snr_profile, LinkBudget};
use canyon::deconflict::{assign_channels_greedy, generate_scenario, run_trials, verify_assignment, Scenario, ScenarioConfig};
use canyon::geometry::{angular_deviation, aoi_direct, aoi_reflection, bearing, FacadeLine, Position3D};
use canyon::ingest::{PowerAngularRecord, Sample};
use canyon::metrics::{average_pas, azimuth_gain, k_factor_from_powers, link_metrics, path_gain, MetricOptions};
use canyon::pathloss::{fit_single_slope, PathGainFit};
use canyon::scm::{
    build_rx_scm, build_tx_scm, default_mask, parse_scm, serialize_scm, OpaqueConstructs, PowerMap, PropagationMap,
    Schedule, ScmInputs, ScmLocation, SpectrumConsumptionModel,
};
use canyon::synth::{horn_pattern, synth_points, synth_record, table_row, LinkSpec};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

const C: f64 = 299_792_458.0;
const F: f64 = 28e9;

fn friis_loss_db(d: f64, f: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d * f / C).log10()
}

fn noise_floor_criterion() -> Outcome {
    let nf = noise_floor(&LinkBudget::default());
    let oracle = -174.0 + 10.0 * 800e6f64.log10() + 10.0;
    let pass = (nf - oracle).abs() < 1e-9 && (nf + 74.97).abs() < 0.005 && (nf + 75.0).abs() < 0.05;
    outcome(pass, format!("noise floor {nf:.4} dBm"))
}

fn fit_recovery() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for name in ["Int-N-E", "Int-S-W"] {
        let row = table_row(name).expect("table row");
        let good = (0..50u64)
            .filter(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                let pts = synth_points(row, 100, 10.0, 300.0, &mut rng);
                let fit = fit_single_slope(&pts).expect("fit");
                (fit.slope_n - row.slope_n).abs() <= 0.2 && (fit.intercept_b - row.intercept_b).abs() <= 4.0
            })
            .count();
        pass &= good >= 45;
        detail.push(format!("{name} {good}/50"));
    }
    outcome(pass, format!("seeds within tolerance: {}", detail.join(", ")))
}

fn rotation_record(offset_deg: f64, power: impl Fn(f64) -> f64) -> PowerAngularRecord {
    let mut samples = Vec::new();
    for scan in 0..4 {
        for k in 0..720 {
            let az = k as f64 * 0.5 + 0.25;
            samples.push(Sample {
                time_s: scan as f64 * 0.5 + k as f64 * 0.5 / 720.0,
                azimuth_deg: (az + offset_deg).rem_euclid(360.0),
                power_dbm: power(az),
            });
        }
    }
    samples.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    PowerAngularRecord {
        link_id: "L".into(),
        tx_pos: Position3D::new(0.0, 50.0, 0.0),
        rx_pos: Position3D::new(0.0, 0.0, 0.0),
        samples,
        scan_count: 4,
    }
}

fn pas_properties() -> Outcome {
    let shape = |az: f64| -60.0 - 20.0 * ((az - 40.0).to_radians().cos() * 0.5 + 0.5);
    let base = path_gain(&average_pas(&rotation_record(0.0, shape), 1.0).unwrap(), 22.0, 0.0);
    let worst = [17.0, 90.0, 233.0, 359.0]
        .iter()
        .map(|&r| (path_gain(&average_pas(&rotation_record(r, shape), 1.0).unwrap(), 22.0, 0.0) - base).abs())
        .fold(0.0, f64::max);
    let uniform = azimuth_gain(&average_pas(&rotation_record(0.0, |_| -70.0), 1.0).unwrap());
    let rect = azimuth_gain(
        &average_pas(&rotation_record(0.0, |az| if (100.0..110.0).contains(&az) { -40.0 } else { -400.0 }), 1.0)
            .unwrap(),
    );
    let oracle = 10.0 * (360.0f64 / 10.0).log10();
    let pass = worst < 1e-9 && uniform == 0.0 && (rect - oracle).abs() < 0.05;
    outcome(
        pass,
        format!("rotation drift {worst:.2e} dB, uniform ABG {uniform}, 10 deg beam ABG {rect:.3} dBi (oracle {oracle:.3})"),
    )
}

fn rician_powers(k_db: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = 10f64.powf(k_db / 10.0);
    let los = (k / (k + 1.0)).sqrt();
    let sd = (0.5 / (k + 1.0)).sqrt();
    let g = Normal::new(0.0, sd).unwrap();
    let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    (0..n)
        .map(|_| {
            let i = los * phase.cos() + g.sample(rng);
            let q = los * phase.sin() + g.sample(rng);
            i * i + q * q
        })
        .collect()
}

fn k_factor_oracle() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for k_db in [0.0, 5.0, 10.0, 15.0, 20.0] {
        let good = (0..50u64)
            .filter(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + k_db as u64);
                let est = k_factor_from_powers(&rician_powers(k_db, 16_000, &mut rng)).unwrap();
                (est - k_db).abs() <= 1.0
            })
            .count();
        pass &= good >= 45;
        detail.push(format!("K={k_db}: {good}/50"));
    }
    outcome(pass, detail.join(", "))
}

fn coverage_cutoff() -> Outcome {
    let fit = PathGainFit::from_params("Int-S-W", -3.6, -39.2, 3.4, 1.0, 317.0);
    let mut pass = true;
    let mut detail = Vec::new();
    for (label, abg) in [("degraded", 12.9), ("nominal", 14.5)] {
        let budget = LinkBudget { median_abg_dbi: abg, ..LinkBudget::default() };
        let profile = snr_profile(&fit, &budget, 1.0, 317.0, 1.0).unwrap();
        let cut = cutoff_distance(&profile, 15.0).distance();
        // closed-form crossing of the same budget, floored to the 1 m grid
        let gain = 23.0 - (14.5 - abg);
        let nf = -174.0 + 10.0 * 800e6f64.log10() + 10.0;
        let crossing = 10f64.powf((28.0 + gain + 11.0 - nf - 15.0 - 39.2) / 36.0);
        let ok = cut.is_some_and(|d| (170.0..=215.0).contains(&d) && d == crossing.floor());
        pass &= ok;
        detail.push(format!("{label} {} m (closed form {crossing:.1} m)", cut.unwrap_or(f64::NAN)));
    }
    let dir = tempfile::tempdir().unwrap();
    let fits = dir.path().join("fits.csv");
    std::fs::write(
        &fits,
        "label,length_m,links,slope_n,intercept_b,rms_sigma,d_min,d_max,median_abg,p10_abg\nInt-S-W,317,100,-3.6,-39.2,3.4,1,317,12.9,11.2\n",
    )
    .unwrap();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = canyon::cli::run(["canyon", "coverage", "--fits", fits.to_str().unwrap()], &mut out, &mut err);
    let text = String::from_utf8(out).unwrap();
    let documented = code == 0 && text.contains("cutoff_nominal_m") && text.contains("degradation");
    pass &= documented;
    detail.push(format!("convention noted in CLI output: {documented}"));
    outcome(pass, detail.join(", "))
}

fn aoi_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        // facade through a random point at a random heading; tx and rx on the
        // same side at the same perpendicular offset
        let (ox, oy) = (rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let h: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let (ux, uy) = (h.cos(), h.sin());
        let (nx, ny) = (-uy, ux);
        let off = rng.gen_range(2.0..40.0);
        let (st, sr): (f64, f64) = (rng.gen_range(-150.0..150.0), rng.gen_range(-150.0..150.0));
        if (st - sr).abs() < 1.0 {
            continue;
        }
        let tx = Position3D::new(ox + ux * st + nx * off, oy + uy * st + ny * off, 1.5);
        let rx = Position3D::new(ox + ux * sr + nx * off, oy + uy * sr + ny * off, 15.0);
        let facade = FacadeLine::new(Position3D::new(ox, oy, 0.0), Position3D::new(ox + ux * 10.0, oy + uy * 10.0, 0.0)).unwrap();
        // image source: reflect tx across the facade line
        let dist = (tx.east - ox) * nx + (tx.north - oy) * ny;
        let image = Position3D::new(tx.east - 2.0 * dist * nx, tx.north - 2.0 * dist * ny, tx.up);
        let oracle = bearing(&rx, &image).unwrap();
        worst = worst.max(angular_deviation(aoi_reflection(&tx, &rx, &facade).unwrap(), oracle));
    }

    // street canyon: Tx walks the Rx's sidewalk, direct path blocked, a
    // specular facade across the street carries the power
    let rx = Position3D::new(0.0, 0.0, 15.0);
    let facade = FacadeLine::new(Position3D::new(15.0, -50.0, 0.0), Position3D::new(15.0, 200.0, 0.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut dev_reflect = Vec::new();
    let mut dev_direct = Vec::new();
    for (i, y) in (20..=100).step_by(4).enumerate() {
        let tx = Position3D::new(0.0, y as f64, 1.5);
        let spec_pt = bearing(&Position3D::new(0.0, 0.0, 0.0), &Position3D::new(15.0, y as f64 / 2.0, 0.0)).unwrap();
        let spec = LinkSpec {
            link_id: format!("L{i}"),
            tx,
            rx,
            path_gain_db: -90.0,
            aoa_deg: spec_pt,
            abg_dbi: 14.0,
            k_factor_db: 10.0,
            scans: 8,
            samples_per_scan: 400,
        };
        let rec = synth_record(&spec, 22.0, &mut rng).unwrap();
        let m = link_metrics(&rec, 22.0, None, MetricOptions::default()).unwrap();
        dev_reflect.push(angular_deviation(m.aoa, aoi_reflection(&tx, &rx, &facade).unwrap()));
        dev_direct.push(angular_deviation(m.aoa, aoi_direct(&tx, &rx).unwrap()));
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (mr, md) = (median(&mut dev_reflect), median(&mut dev_direct));
    let pass = worst < 1e-6 && mr <= 3.0 && md >= 20.0;
    outcome(
        pass,
        format!("image-source gap {worst:.2e} deg; median deviation {mr:.2} deg vs reflection, {md:.2} deg vs direct"),
    )
}

fn horn_inputs(id: &str, at: Position3D, power: f64) -> ScmInputs {
    ScmInputs {
        id: id.into(),
        reference_power_dbm: power,
        power_map: PowerMap::from_pattern(&horn_pattern(), 1.0, 45.0).unwrap(),
        propagation_map: PropagationMap::uniform(2.6, 1.0).unwrap(),
        schedule: Schedule { start: 1_700_000_000, end: 1_700_086_400 },
        location: ScmLocation::point(at),
        extras: OpaqueConstructs::default(),
    }
}

fn scm_round_trip() -> Outcome {
    let tx = build_tx_scm(&horn_inputs("tx", Position3D::new(0.0, 0.0, 15.0), 20.0), Some(default_mask(F))).unwrap();
    let rx = build_rx_scm(&horn_inputs("rx", Position3D::new(40.0, 30.0, 1.5), -90.0), Some(default_mask(F))).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for m in [&tx, &rx] {
        let bytes = serialize_scm(m).unwrap();
        let start = Instant::now();
        let back = parse_scm(&bytes).unwrap();
        let took = start.elapsed();
        let again = serialize_scm(&back).unwrap();
        let kb = bytes.len() as f64 / 1000.0;
        let ok = &back == m && again == bytes && (100.0..1000.0).contains(&kb) && took < Duration::from_secs(1);
        pass &= ok;
        detail.push(format!("{} {kb:.0} kB parsed in {:.0} ms", m.id, took.as_secs_f64() * 1e3));
    }
    outcome(pass, detail.join(", "))
}

fn iso_inputs(id: &str, at: Position3D, power: f64) -> ScmInputs {
    ScmInputs {
        id: id.into(),
        reference_power_dbm: power,
        power_map: PowerMap::isotropic(1.0).unwrap(),
        propagation_map: PropagationMap::uniform(2.0, 1.0).unwrap(),
        schedule: Schedule { start: 0, end: 10 },
        location: ScmLocation::point(at),
        extras: OpaqueConstructs::default(),
    }
}

fn iso_tx(id: &str, e: f64, n: f64, p: f64) -> SpectrumConsumptionModel {
    build_tx_scm(&iso_inputs(id, Position3D::new(e, n, 0.0), p), Some(default_mask(F))).unwrap()
}

fn compat_oracle() -> Outcome {
    let rx = build_rx_scm(&iso_inputs("rx", Position3D::new(0.0, 0.0, 0.0), -80.0), Some(default_mask(F))).unwrap();
    let tx = iso_tx("a", 30.0, 40.0, 5.0);
    let psd = received_psd(&tx, &rx, F).unwrap();
    let hand = 5.0 - friis_loss_db(50.0, F);
    let friis_ok = (psd - hand).abs() < 0.02;

    // each interferer alone leaves exactly 3.01 dB at the tightest frequency
    let edge = F - 1e6;
    let set = |id: &str, e: f64, n: f64| {
        let probe = iso_tx(id, e, n, 0.0);
        let p = allowed_psd(&rx, edge).unwrap() - received_psd(&probe, &rx, edge).unwrap() - 10.0 * 2f64.log10();
        iso_tx(id, e, n, p)
    };
    let (a, b) = (set("a", 0.0, 60.0), set("b", -45.0, 10.0));
    let grid = frequency_grid([&a, &b, &rx]);
    let single = aggregate_margin(&[&a], &rx, &grid).unwrap().margin;
    let both = aggregate_margin(&[&a, &b], &rx, &grid).unwrap().margin;
    let sum_ok = both.abs() < 0.01 && (single - both - 3.0103).abs() < 0.01;

    let mut runner = TestRunner::new(Config { cases: 1000, ..Config::default() });
    let strat = (
        proptest::collection::vec((-300.0f64..300.0, -300.0f64..300.0, -30.0f64..30.0), 0..6),
        (-300.0f64..300.0, -300.0f64..300.0, -30.0f64..30.0),
    );
    let mono = runner
        .run(&strat, |(base, extra)| {
            let mut txs: Vec<SpectrumConsumptionModel> = base
                .iter()
                .enumerate()
                .filter(|(_, p)| p.0.hypot(p.1) >= 1.0)
                .map(|(i, p)| iso_tx(&format!("t{i}"), p.0, p.1, p.2))
                .collect();
            prop_assume!(extra.0.hypot(extra.1) >= 1.0);
            let grid = frequency_grid(txs.iter().chain([&rx]));
            let before = aggregate_margin(&txs.iter().collect::<Vec<_>>(), &rx, &grid).unwrap().margin;
            txs.push(iso_tx("x", extra.0, extra.1, extra.2));
            let after = aggregate_margin(&txs.iter().collect::<Vec<_>>(), &rx, &grid).unwrap().margin;
            prop_assert!(after <= before);
            Ok(())
        })
        .is_ok();
    outcome(
        friis_ok && sum_ok && mono,
        format!(
            "Friis {psd:.3} vs hand {hand:.3} dB; two equal interferers lower margin by {:.4} dB to {both:.4}; monotone over 1000 cases: {mono}",
            single - both
        ),
    )
}

fn deconfliction() -> (Outcome, Outcome) {
    let start = Instant::now();
    let dense = run_trials(&ScenarioConfig::new(100), 100, 2024, true).unwrap();
    let sparse = run_trials(&ScenarioConfig::new(20), 100, 2024, true).unwrap();
    let took = start.elapsed();
    let cdf = |s: &canyon::deconflict::TrialSummary, k: u32| s.channels.iter().filter(|&&c| c <= k).count();
    let top = dense.max_channels.max(sparse.max_channels);
    let ordered = (1..=top).all(|k| cdf(&sparse, k) >= cdf(&dense, k));
    let in_band = (0.55..=0.85).contains(&dense.fraction_two_or_three);
    let nine = outcome(
        in_band && dense.max_channels <= 6 && ordered && took < Duration::from_secs(300),
        format!(
            "100 links: histogram {:?}, fraction 2-3 channels {:.2} (target 0.55-0.85), max {}; 20 links: {:?}; 20 <= 100 in distribution: {ordered}; {:.1} s",
            dense.histogram, dense.fraction_two_or_three, dense.max_channels, sparse.histogram, took.as_secs_f64()
        ),
    );
    let ten = outcome(
        dense.all_valid && sparse.all_valid && dense.max_link_seconds < 0.5,
        format!(
            "all assignments re-verified: {}; slowest link placement {:.4} s",
            dense.all_valid && sparse.all_valid,
            dense.max_link_seconds
        ),
    );
    (nine, ten)
}

/// Smallest k admitting a proper k-coloring, by exhaustive backtracking.
fn chromatic_number(adj: &[Vec<bool>]) -> u32 {
    fn colorable(adj: &[Vec<bool>], k: u32, colors: &mut Vec<u32>) -> bool {
        let v = colors.len();
        if v == adj.len() {
            return true;
        }
        for c in 0..k {
            if (0..v).all(|u| !adj[v][u] || colors[u] != c) {
                colors.push(c);
                if colorable(adj, k, colors) {
                    return true;
                }
                colors.pop();
            }
        }
        false
    }
    (1..=adj.len() as u32).find(|&k| colorable(adj, k, &mut Vec::new())).unwrap_or(0)
}

fn conflict_graph(sc: &Scenario) -> Vec<Vec<bool>> {
    let n = sc.links.len();
    let alone = |tx: usize, rx: usize| {
        let r = &sc.links[rx].rx_scm;
        let t = &sc.links[tx].tx_scm;
        let grid = frequency_grid([t, r]);
        grid.iter()
            .filter(|&&f| r.underlay_mask.as_ref().unwrap().contains(f))
            .any(|&f| received_psd(t, r, f).unwrap() > allowed_psd(r, f).unwrap())
    };
    (0..n).map(|i| (0..n).map(|j| i != j && (alone(i, j) || alone(j, i))).collect()).collect()
}

fn coloring_bound() -> Outcome {
    let start = Instant::now();
    let mut worst_gap = 0i64;
    let mut violations = 0;
    let mut multi = 0;
    for seed in 0..50u64 {
        let mut cfg = ScenarioConfig::new(2 + (seed % 9) as usize);
        cfg.area_side_m = 150.0;
        let sc = generate_scenario(&cfg, 500 + seed).unwrap();
        let a = assign_channels_greedy(&sc).unwrap();
        let chi = chromatic_number(&conflict_graph(&sc));
        let valid = verify_assignment(&sc, &a).unwrap().iter().all(|r| r.compatible);
        if a.channels_used < chi || a.channels_used > chi + 2 || !valid {
            violations += 1;
        }
        if chi > 1 {
            multi += 1;
        }
        worst_gap = worst_gap.max(i64::from(a.channels_used) - i64::from(chi));
    }
    let took = start.elapsed();
    outcome(
        violations == 0 && took < Duration::from_secs(30),
        format!("{violations} violations over 50 scenarios ({multi} needing >1 channel), largest greedy excess {worst_gap}, {:.1} s", took.as_secs_f64()),
    )
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Outcome);
    let criteria: Vec<Criterion> = vec![
        (1, "noise floor", noise_floor_criterion),
        (2, "fit recovery", fit_recovery),
        (3, "path gain and ABG properties", pas_properties),
        (4, "K-factor oracle", k_factor_oracle),
        (5, "coverage cutoff", coverage_cutoff),
        (6, "angle-of-incidence geometry", aoi_geometry),
        (7, "SCM round trip", scm_round_trip),
        (8, "compatibility oracle", compat_oracle),
    ];
    let mut failed = 0;
    let mut report = |n: u32, name: &str, o: Outcome, took: Duration| {
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {}: {name}: {} ({:.2} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        );
    };
    for (n, name, f) in criteria {
        let start = Instant::now();
        let o = f();
        report(n, name, o, start.elapsed());
    }
    let start = Instant::now();
    let (nine, ten) = deconfliction();
    let took = start.elapsed();
    report(9, "deconfliction distribution", nine, took);
    report(10, "deconfliction validity and speed", ten, took);
    let start = Instant::now();
    let o = coloring_bound();
    report(11, "greedy vs exact coloring", o, start.elapsed());
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
