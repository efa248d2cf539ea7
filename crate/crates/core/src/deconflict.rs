//! Monte Carlo link layouts and greedy channel assignment.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::compat::{aggregate_margin, allowed_psd, coupling_db, frequency_grid, margin_db, psd_from_coupling, CompatReport};
use crate::error::{Error, Result};
use crate::geometry::{bearing, Position3D};
use crate::ingest::AntennaPattern;
use crate::metrics::dbm_to_mw;
use crate::scm::{
    build_rx_scm, build_tx_scm, default_mask, Mask, OpaqueConstructs, PowerMap, PropagationMap, Schedule, ScmInputs,
    ScmLocation, SpectrumConsumptionModel,
};
use crate::synth::horn_pattern;

const METERS_PER_MILE: f64 = 1609.344;
const MAX_PLACEMENT_ATTEMPTS: u64 = 1_000_000;

/// Side of a square of `square_miles` area, meters.
pub fn square_side_m(square_miles: f64) -> f64 {
    square_miles.sqrt() * METERS_PER_MILE
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n_links: usize,
    pub area_side_m: f64,
    pub min_tx_separation_m: f64,
    pub link_distance_min_m: f64,
    pub link_distance_max_m: f64,
    pub coverage_radius_m: f64,
    pub path_loss_exponent: f64,
    pub base_freq_hz: f64,
    pub channel_bw_hz: f64,
    pub rx_reference_dbm: f64,
    pub device_height_m: f64,
    pub pattern: AntennaPattern,
    pub map_resolution_deg: f64,
    /// Spectrum mask centred on 0 Hz; shifted to the channel centre.
    pub spectrum_mask: Mask,
    /// Underlay mask centred on 0 Hz.
    pub underlay_mask: Mask,
}

impl ScenarioConfig {
    pub fn new(n_links: usize) -> Self {
        Self {
            n_links,
            area_side_m: square_side_m(0.5),
            min_tx_separation_m: 10.0,
            link_distance_min_m: 10.0,
            link_distance_max_m: 100.0,
            coverage_radius_m: 100.0,
            path_loss_exponent: 2.8,
            base_freq_hz: 28e9,
            channel_bw_hz: 1e6,
            rx_reference_dbm: -90.0,
            device_height_m: 1.5,
            pattern: horn_pattern(),
            map_resolution_deg: 1.0,
            spectrum_mask: default_mask(0.0),
            underlay_mask: default_mask(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_links == 0 {
            return Err(Error::invalid("a scenario needs at least one link"));
        }
        if !(self.area_side_m > 0.0) || !self.area_side_m.is_finite() {
            return Err(Error::invalid("area side must be positive"));
        }
        if !(self.link_distance_min_m >= 1.0 && self.link_distance_min_m <= self.link_distance_max_m) {
            return Err(Error::invalid("link distance range must satisfy 1 <= min <= max"));
        }
        if !(self.channel_bw_hz > 0.0) {
            return Err(Error::invalid("channel bandwidth must be positive"));
        }
        if !(self.path_loss_exponent > 0.0 && self.path_loss_exponent < 10.0) {
            return Err(Error::invalid("path-loss exponent must be in (0, 10)"));
        }
        Ok(())
    }

    /// Centre frequency of 1-based channel `c`.
    pub fn channel_center(&self, c: u32) -> f64 {
        self.base_freq_hz + f64::from(c - 1) * self.channel_bw_hz
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioLink {
    pub tx_pos: Position3D,
    pub rx_pos: Position3D,
    /// Models tuned to channel 1.
    pub tx_scm: SpectrumConsumptionModel,
    pub rx_scm: SpectrumConsumptionModel,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub area_side_m: f64,
    pub channel_bw_hz: f64,
    pub links: Vec<ScenarioLink>,
    pub seed: u64,
}

fn inside(side: f64, e: f64, n: f64) -> bool {
    (0.0..=side).contains(&e) && (0.0..=side).contains(&n)
}

pub fn generate_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = cfg.area_side_m;
    let h = cfg.device_height_m;
    let min_sep2 = cfg.min_tx_separation_m * cfg.min_tx_separation_m;
    let mut attempts = 0u64;
    let mut txs: Vec<Position3D> = Vec::with_capacity(cfg.n_links);
    while txs.len() < cfg.n_links {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::invalid(format!(
                "could not place {} transmitters {} m apart in a {side} m square",
                cfg.n_links, cfg.min_tx_separation_m
            )));
        }
        let (e, n) = (rng.gen::<f64>() * side, rng.gen::<f64>() * side);
        if txs.iter().all(|t| (t.east - e).powi(2) + (t.north - n).powi(2) >= min_sep2) {
            txs.push(Position3D::new(e, n, h));
        }
    }
    let mut rxs = Vec::with_capacity(cfg.n_links);
    for t in &txs {
        loop {
            attempts += 1;
            if attempts > 2 * MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::invalid("could not place receivers inside the area"));
            }
            let d = rng.gen_range(cfg.link_distance_min_m..=cfg.link_distance_max_m);
            let b = rng.gen::<f64>() * std::f64::consts::TAU;
            let (e, n) = (t.east + d * b.sin(), t.north + d * b.cos());
            if inside(side, e, n) {
                rxs.push(Position3D::new(e, n, h));
                break;
            }
        }
    }

    let base_map = PowerMap::from_pattern(&cfg.pattern, cfg.map_resolution_deg, 0.0)?;
    let prop = PropagationMap::uniform(cfg.path_loss_exponent, cfg.map_resolution_deg)?;
    let boresight_loss = -crate::pathloss::fspl(1.0, cfg.base_freq_hz)
        + 10.0 * cfg.path_loss_exponent * cfg.coverage_radius_m.log10();
    let tx_power = cfg.rx_reference_dbm + boresight_loss;
    let center = cfg.channel_center(1);
    let schedule = Schedule { start: 0, end: 86_400 };
    let mut links = Vec::with_capacity(cfg.n_links);
    for (i, (t, r)) in txs.into_iter().zip(rxs).enumerate() {
        let b = bearing(&t, &r)?;
        let tx_in = ScmInputs {
            id: format!("tx{i}"),
            reference_power_dbm: tx_power,
            power_map: base_map.oriented(b),
            propagation_map: prop.clone(),
            schedule,
            location: ScmLocation::point(t),
            extras: OpaqueConstructs::default(),
        };
        let rx_in = ScmInputs {
            id: format!("rx{i}"),
            reference_power_dbm: cfg.rx_reference_dbm,
            power_map: base_map.oriented(b + 180.0),
            location: ScmLocation::point(r),
            ..tx_in.clone()
        };
        links.push(ScenarioLink {
            tx_pos: t,
            rx_pos: r,
            tx_scm: build_tx_scm(&tx_in, Some(cfg.spectrum_mask.shifted(center)))?,
            rx_scm: build_rx_scm(&rx_in, Some(cfg.underlay_mask.shifted(center)))?,
        });
    }
    Ok(Scenario {
        area_side_m: side,
        channel_bw_hz: cfg.channel_bw_hz,
        links,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    /// 1-based channel per link.
    pub channels: Vec<u32>,
    pub channels_used: u32,
}

struct RxState {
    /// Channel-1 grid frequencies inside the underlay span.
    grid: Vec<f64>,
    allowed: Vec<f64>,
    aggregate: Vec<f64>,
}

/// Greedy first-fit channel assignment in link order, also returning the
/// wall time spent placing each link.
pub fn assign_channels_timed(sc: &Scenario) -> Result<(Assignment, Vec<Duration>)> {
    let n = sc.links.len();
    let grid = frequency_grid(sc.links.iter().flat_map(|l| [&l.tx_scm, &l.rx_scm]));
    let mut channels: Vec<u32> = Vec::with_capacity(n);
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut states: Vec<RxState> = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let bw = sc.channel_bw_hz;

    for l in 0..n {
        let started = Instant::now();
        let rx = &sc.links[l].rx_scm;
        let underlay = rx.underlay_mask.as_ref().expect("receiver invariant");
        let own: Vec<f64> = grid.iter().copied().filter(|&f| underlay.contains(f)).collect();
        let allowed = own.iter().map(|&f| allowed_psd(rx, f)).collect::<Result<Vec<_>>>()?;
        let mut state = RxState {
            grid: own,
            allowed,
            aggregate: Vec::new(),
        };

        let mut placed = None;
        for (c, group) in members.iter().enumerate() {
            let shift = c as f64 * bw;
            // interference into the new receiver
            let mut agg = vec![0.0; state.grid.len()];
            for &j in group {
                let tx = &sc.links[j].tx_scm;
                let coupling = coupling_db(tx, rx)?;
                let mask = tx.spectrum_mask.as_ref().expect("transmitter invariant");
                for (a, &f) in agg.iter_mut().zip(&state.grid) {
                    *a += dbm_to_mw(psd_from_coupling(coupling, mask.eval(f), f + shift));
                }
            }
            if state.allowed.iter().zip(&agg).any(|(&al, &ag)| margin_db(al, ag) < 0.0) {
                continue;
            }
            // the new transmitter's effect on receivers already here
            let tx = &sc.links[l].tx_scm;
            let mask = tx.spectrum_mask.as_ref().expect("transmitter invariant");
            let mut additions = Vec::with_capacity(group.len());
            let mut fits = true;
            for &i in group {
                let coupling = coupling_db(tx, &sc.links[i].rx_scm)?;
                let st = &states[i];
                let add: Vec<f64> = st
                    .grid
                    .iter()
                    .map(|&f| dbm_to_mw(psd_from_coupling(coupling, mask.eval(f), f + shift)))
                    .collect();
                if st
                    .allowed
                    .iter()
                    .zip(&st.aggregate)
                    .zip(&add)
                    .any(|((&al, &ag), &ad)| margin_db(al, ag + ad) < 0.0)
                {
                    fits = false;
                    break;
                }
                additions.push(add);
            }
            if !fits {
                continue;
            }
            for (&i, add) in group.iter().zip(additions) {
                for (a, d) in states[i].aggregate.iter_mut().zip(add) {
                    *a += d;
                }
            }
            state.aggregate = agg;
            placed = Some(c);
            break;
        }
        let c = match placed {
            Some(c) => c,
            None => {
                members.push(Vec::new());
                state.aggregate = vec![0.0; state.grid.len()];
                members.len() - 1
            }
        };
        members[c].push(l);
        channels.push(c as u32 + 1);
        states.push(state);
        times.push(started.elapsed());
    }
    Ok((
        Assignment {
            channels,
            channels_used: members.len() as u32,
        },
        times,
    ))
}

pub fn assign_channels_greedy(sc: &Scenario) -> Result<Assignment> {
    assign_channels_timed(sc).map(|(a, _)| a)
}

/// Re-evaluate every receiver against the co-channel transmitters of the
/// assignment with the full compatibility engine.
pub fn verify_assignment(sc: &Scenario, assignment: &Assignment) -> Result<Vec<CompatReport>> {
    if assignment.channels.len() != sc.links.len() {
        return Err(Error::invalid("assignment does not cover every link"));
    }
    let retuned: Vec<(SpectrumConsumptionModel, SpectrumConsumptionModel)> = sc
        .links
        .iter()
        .zip(&assignment.channels)
        .map(|(l, &c)| {
            let df = f64::from(c - 1) * sc.channel_bw_hz;
            (l.tx_scm.retuned(df), l.rx_scm.retuned(df))
        })
        .collect();
    (0..sc.links.len())
        .map(|i| {
            let c = assignment.channels[i];
            let txs: Vec<&SpectrumConsumptionModel> = (0..sc.links.len())
                .filter(|&j| j != i && assignment.channels[j] == c)
                .map(|j| &retuned[j].0)
                .collect();
            let rx = &retuned[i].1;
            let grid = frequency_grid(txs.iter().copied().chain([rx]));
            aggregate_margin(&txs, rx, &grid)
        })
        .collect()
}

/// Seed of trial `t`, drawn from its own stream of the master generator.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng.next_u64()
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialSummary {
    pub n_links: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub channels: Vec<u32>,
    pub histogram: BTreeMap<u32, usize>,
    pub mode: u32,
    pub fraction_two_or_three: f64,
    pub max_channels: u32,
    pub all_valid: bool,
    pub max_link_seconds: f64,
    pub mean_link_seconds: f64,
}

pub fn run_trials(cfg: &ScenarioConfig, n_trials: usize, seed: u64, verify: bool) -> Result<TrialSummary> {
    if n_trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let results: Vec<(u32, bool, Vec<Duration>)> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let sc = generate_scenario(cfg, trial_seed(seed, t as u64))?;
            let (a, times) = assign_channels_timed(&sc)?;
            let valid = if verify {
                verify_assignment(&sc, &a)?.iter().all(|r| r.compatible)
            } else {
                true
            };
            Ok((a.channels_used, valid, times))
        })
        .collect::<Result<_>>()?;
    let channels: Vec<u32> = results.iter().map(|r| r.0).collect();
    let mut histogram = BTreeMap::new();
    for &c in &channels {
        *histogram.entry(c).or_insert(0usize) += 1;
    }
    let mode = histogram
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&c, _)| c)
        .unwrap_or(0);
    let all_times: Vec<f64> = results.iter().flat_map(|r| r.2.iter().map(Duration::as_secs_f64)).collect();
    Ok(TrialSummary {
        n_links: cfg.n_links,
        n_trials,
        seed,
        fraction_two_or_three: channels.iter().filter(|&&c| c == 2 || c == 3).count() as f64 / n_trials as f64,
        max_channels: channels.iter().copied().max().unwrap_or(0),
        mode,
        histogram,
        channels,
        all_valid: results.iter().all(|r| r.1),
        max_link_seconds: all_times.iter().copied().fold(0.0, f64::max),
        mean_link_seconds: all_times.iter().sum::<f64>() / all_times.len().max(1) as f64,
    })
}
