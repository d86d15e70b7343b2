//! Slot-level Monte Carlo simulation of the dual-queue system.
//!
//! The simulator covers freezing (`k >= 1`) and the zero-wait benchmark
//! (`k = 0`, which the analytic chain does not model). Within a slot,
//! receptions are processed before the generation decision, matching the
//! one-step transitions of the analytic chain. Service times are realized
//! as full durations drawn at packet start, which is equal in law to
//! per-slot phase simulation; the census variants below run the phase
//! chain instead because they must observe phases.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::amc::{PriorityPolicy, SystemConfig};
use crate::error::{Error, Result};

const RNG_ALGORITHM: &str = "chacha8";
const NUM_BATCHES: usize = 20;
const MIN_SLOTS: u64 = 10_000;

/// Point estimate with a batch-means standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// Monte Carlo estimates for one run. `slots` counts the measured window;
/// 1% of extra warm-up slots are simulated and discarded beforehand, so
/// the histogram counts sum to `slots` exactly.
#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub config: String,
    pub slots: u64,
    pub warmup_slots: u64,
    pub seed: u64,
    pub rng_algorithm: String,
    pub aoi_mean: Estimate,
    pub aoi_second_moment: Estimate,
    pub paoi_mean: Estimate,
    /// `(h, count)` pairs over the measured window.
    pub aoi_histogram: Vec<(u64, u64)>,
    /// Up-to-date receptions in the measured window.
    pub cycles: u64,
    /// Discarded receptions in the measured window.
    pub obsolete_count: u64,
}

fn batch_estimate(total: f64, n: u64, batch_sums: &[f64], batch_counts: &[u64]) -> Estimate {
    let value = total / n as f64;
    let means: Vec<f64> = batch_sums
        .iter()
        .zip(batch_counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&s, &c)| s / c as f64)
        .collect();
    let b = means.len() as f64;
    let grand = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (b - 1.0);
    Estimate { value, std_err: (var / b).sqrt() }
}

struct InService {
    completes_at: u64,
    generated_at: u64,
}

/// Simulates `slots` measured slots and returns AoI/peak-AoI statistics.
pub fn simulate(config: &SystemConfig, slots: u64, seed: u64) -> Result<SimResult> {
    Ok(simulate_inner(config, slots, seed, false)?.0)
}

/// Variant for tests: additionally returns `(peak, max AoI observed in the
/// cycle)` for every measured cycle.
#[doc(hidden)]
pub fn simulate_with_cycle_audit(
    config: &SystemConfig,
    slots: u64,
    seed: u64,
) -> Result<(SimResult, Vec<(u64, u64)>)> {
    simulate_inner(config, slots, seed, true)
}

fn simulate_inner(
    config: &SystemConfig,
    slots: u64,
    seed: u64,
    audit_cycles: bool,
) -> Result<(SimResult, Vec<(u64, u64)>)> {
    if slots < MIN_SLOTS {
        return Err(Error::InvalidParameter(format!(
            "simulation needs at least {MIN_SLOTS} slots, got {slots}"
        )));
    }
    let k = config.k as u64;
    let warmup = slots / 100;
    let total = warmup + slots;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut s1: Option<InService> = None;
    let mut s2: Option<InService> = None;
    let mut freshest: Option<u64> = None;
    let mut clock = k.max(1); // sampling allowed immediately
    let mut last_generation: Option<u64> = None;
    let mut aoi: u64 = 0;

    let mut histogram: Vec<u64> = Vec::new();
    let mut aoi_total = 0.0f64;
    let mut aoi_sq_total = 0.0f64;
    let mut batch_aoi = vec![0.0f64; NUM_BATCHES];
    let mut batch_aoi_sq = vec![0.0f64; NUM_BATCHES];
    let mut batch_slots = vec![0u64; NUM_BATCHES];
    let mut paoi_samples: Vec<u64> = Vec::new();
    let mut cycles = 0u64;
    let mut obsolete = 0u64;
    let mut audit: Vec<(u64, u64)> = Vec::new();
    let mut cycle_max = 0u64;

    for t in 0..total {
        if t > 0 {
            aoi += 1;
            if clock < k.max(1) {
                clock += 1;
            }
        }

        // Receptions: the freshest simultaneous arrival wins; everything
        // else (including a duplicate with the same generation time) is
        // obsolete and discarded.
        let mut best: Option<u64> = None;
        let mut arrivals = 0u32;
        if s1.as_ref().is_some_and(|p| p.completes_at == t) {
            let gen = s1.take().unwrap().generated_at;
            best = Some(best.map_or(gen, |b: u64| b.max(gen)));
            arrivals += 1;
        }
        if s2.as_ref().is_some_and(|p| p.completes_at == t) {
            let gen = s2.take().unwrap().generated_at;
            best = Some(best.map_or(gen, |b: u64| b.max(gen)));
            arrivals += 1;
        }
        if let Some(gen) = best {
            let fresh = freshest.map_or(true, |f| gen > f);
            let measured = t >= warmup;
            if fresh {
                if measured {
                    cycles += 1;
                    paoi_samples.push(aoi - 1);
                    if audit_cycles {
                        audit.push((aoi - 1, cycle_max));
                    }
                    obsolete += (arrivals - 1) as u64;
                }
                freshest = Some(gen);
                aoi = t - gen;
                cycle_max = aoi;
            } else if measured {
                obsolete += arrivals as u64;
            }
        }

        // Generation decision.
        let idle1 = s1.is_none();
        let idle2 = s2.is_none();
        if config.k >= 1 {
            if clock >= k && (idle1 || idle2) {
                if let Some(last) = last_generation {
                    debug_assert!(t - last >= k, "freezing violated: {last} -> {t}");
                }
                let use_s1 = if idle1 && idle2 {
                    config.priority == PriorityPolicy::S1Priority
                } else {
                    idle1
                };
                if use_s1 {
                    let d = config.dph1.sample(&mut rng);
                    s1 = Some(InService { completes_at: t + d, generated_at: t });
                } else {
                    let d = config.dph2.sample(&mut rng);
                    s2 = Some(InService { completes_at: t + d, generated_at: t });
                }
                last_generation = Some(t);
                clock = 0;
            }
        } else {
            // Zero-wait: duplicate one sample onto both idle servers, or
            // refresh a single idle server immediately.
            if idle1 && idle2 {
                let d1 = config.dph1.sample(&mut rng);
                let d2 = config.dph2.sample(&mut rng);
                s1 = Some(InService { completes_at: t + d1, generated_at: t });
                s2 = Some(InService { completes_at: t + d2, generated_at: t });
            } else if idle1 {
                let d = config.dph1.sample(&mut rng);
                s1 = Some(InService { completes_at: t + d, generated_at: t });
            } else if idle2 {
                let d = config.dph2.sample(&mut rng);
                s2 = Some(InService { completes_at: t + d, generated_at: t });
            }
        }

        cycle_max = cycle_max.max(aoi);
        if t >= warmup {
            let h = aoi as usize;
            if histogram.len() <= h {
                histogram.resize(h + 1, 0);
            }
            histogram[h] += 1;
            let b = (((t - warmup) * NUM_BATCHES as u64) / slots) as usize;
            let a = aoi as f64;
            aoi_total += a;
            aoi_sq_total += a * a;
            batch_aoi[b] += a;
            batch_aoi_sq[b] += a * a;
            batch_slots[b] += 1;
        }
    }

    if cycles < NUM_BATCHES as u64 {
        return Err(Error::Numerical(format!(
            "only {cycles} cycles completed; too few for {NUM_BATCHES}-batch standard errors"
        )));
    }
    let aoi_mean = batch_estimate(aoi_total, slots, &batch_aoi, &batch_slots);
    let aoi_second_moment = batch_estimate(aoi_sq_total, slots, &batch_aoi_sq, &batch_slots);

    let mut paoi_batch_sums = vec![0.0f64; NUM_BATCHES];
    let mut paoi_batch_counts = vec![0u64; NUM_BATCHES];
    let n_paoi = paoi_samples.len() as u64;
    for (idx, &p) in paoi_samples.iter().enumerate() {
        let b = (idx * NUM_BATCHES) / paoi_samples.len();
        paoi_batch_sums[b] += p as f64;
        paoi_batch_counts[b] += 1;
    }
    let paoi_total: f64 = paoi_samples.iter().map(|&p| p as f64).sum();
    let paoi_mean = batch_estimate(paoi_total, n_paoi, &paoi_batch_sums, &paoi_batch_counts);

    let result = SimResult {
        config: config.describe(),
        slots,
        warmup_slots: warmup,
        seed,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        aoi_mean,
        aoi_second_moment,
        paoi_mean,
        aoi_histogram: histogram
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(h, &c)| (h as u64, c))
            .collect(),
        cycles,
        obsolete_count: obsolete,
    };
    Ok((result, audit))
}

/// Empirical frequency table with counts split into 20 equal time windows
/// for batch-means standard errors.
#[derive(Debug, Clone)]
pub struct Census<K: Ord> {
    pub counts: BTreeMap<K, u64>,
    pub total: u64,
    pub batches: Vec<(u64, BTreeMap<K, u64>)>,
}

impl<K: Ord + Copy> Census<K> {
    fn new() -> Self {
        Census { counts: BTreeMap::new(), total: 0, batches: vec![(0, BTreeMap::new()); NUM_BATCHES] }
    }

    fn record(&mut self, key: K, batch: usize) {
        *self.counts.entry(key).or_insert(0) += 1;
        self.total += 1;
        self.batches[batch].0 += 1;
        *self.batches[batch].1.entry(key).or_insert(0) += 1;
    }

    pub fn frequency(&self, key: K) -> f64 {
        self.counts.get(&key).map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    /// Batch-means standard error of one entry's frequency.
    pub fn frequency_std_err(&self, key: K) -> f64 {
        let means: Vec<f64> = self
            .batches
            .iter()
            .filter(|(events, _)| *events > 0)
            .map(|(events, counts)| {
                counts.get(&key).map_or(0.0, |&c| c as f64) / *events as f64
            })
            .collect();
        let b = means.len() as f64;
        let grand = means.iter().sum::<f64>() / b;
        let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (b - 1.0);
        (var / b).sqrt()
    }
}

/// Start-state census of the absorbing chain: the system state observed at
/// every packet-generation instant, keyed by `(class, S1 phase, S2 phase)`
/// with the freezing clock at zero.
pub type GenerationCensus = Census<(u8, usize, usize)>;

/// Per-slot occupancy census keyed by the recurrent-chain state
/// `(class, S1 phase, S2 phase, clock)`.
pub type OccupancyCensus = Census<(u8, usize, usize, usize)>;

struct PhaseServer {
    /// `(current phase, generation slot)` of the in-service packet.
    packet: Option<(usize, u64)>,
}

/// Runs the phase-level chain and records the state at every generation
/// instant. Requires `k >= 1`.
pub fn simulate_amc_initial_census(
    config: &SystemConfig,
    slots: u64,
    seed: u64,
) -> Result<GenerationCensus> {
    let (census, _) = phase_simulation(config, slots, seed, true)?;
    Ok(census)
}

/// Runs the phase-level chain and records the recurrent-chain state at
/// every measured slot. Requires `k >= 1`.
pub fn simulate_rmc_occupancy(
    config: &SystemConfig,
    slots: u64,
    seed: u64,
) -> Result<OccupancyCensus> {
    let (_, occupancy) = phase_simulation(config, slots, seed, false)?;
    Ok(occupancy)
}

fn phase_simulation(
    config: &SystemConfig,
    slots: u64,
    seed: u64,
    want_generation_census: bool,
) -> Result<(GenerationCensus, OccupancyCensus)> {
    if config.k < 1 {
        return Err(Error::InvalidParameter(
            "the census simulations require k >= 1".into(),
        ));
    }
    if slots < MIN_SLOTS {
        return Err(Error::InvalidParameter(format!(
            "simulation needs at least {MIN_SLOTS} slots, got {slots}"
        )));
    }
    let k = config.k as u64;
    let warmup = slots / 100;
    let total = warmup + slots;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut s1 = PhaseServer { packet: None };
    let mut s2 = PhaseServer { packet: None };
    let mut clock = k;
    let mut generation = GenerationCensus::new();
    let mut occupancy = OccupancyCensus::new();

    for t in 0..total {
        if t > 0 {
            if clock < k {
                clock += 1;
            }
            // Phase transitions, S1 before S2; completion frees the server.
            if let Some((phase, gen)) = s1.packet {
                s1.packet = config.dph1.step_phase(phase, &mut rng).map(|p| (p, gen));
            }
            if let Some((phase, gen)) = s2.packet {
                s2.packet = config.dph2.step_phase(phase, &mut rng).map(|p| (p, gen));
            }
        }
        let batch = if t >= warmup {
            (((t - warmup) * NUM_BATCHES as u64) / slots) as usize
        } else {
            0
        };

        if clock >= k {
            let idle1 = s1.packet.is_none();
            let idle2 = s2.packet.is_none();
            if idle1 || idle2 {
                let use_s1 = if idle1 && idle2 {
                    config.priority == PriorityPolicy::S1Priority
                } else {
                    idle1
                };
                let key = if use_s1 {
                    let phase = config.dph1.draw_initial(&mut rng);
                    s1.packet = Some((phase, t));
                    match s2.packet {
                        // new packet beside a busy S2: class 1
                        Some((j, _)) => (1u8, phase + 1, j + 1),
                        None => (5u8, phase + 1, 0),
                    }
                } else {
                    let phase = config.dph2.draw_initial(&mut rng);
                    s2.packet = Some((phase, t));
                    match s1.packet {
                        Some((i, _)) => (4u8, i + 1, phase + 1),
                        None => (6u8, 0, phase + 1),
                    }
                };
                clock = 0;
                if want_generation_census && t >= warmup {
                    generation.record(key, batch);
                }
            }
        }

        if !want_generation_census && t >= warmup {
            let l = clock.min(k - 1) as usize;
            let key = match (s1.packet, s2.packet) {
                (None, None) => (1u8, 0, 0, l),
                (Some((i, _)), None) => (2u8, i + 1, 0, l),
                (None, Some((j, _))) => (3u8, 0, j + 1, l),
                (Some((i, _)), Some((j, _))) => (4u8, i + 1, j + 1, l),
            };
            occupancy.record(key, batch);
        }
    }

    Ok((generation, occupancy))
}
