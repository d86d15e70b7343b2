//! Freezing-parameter search and parameter sweeps.
//!
//! The AoI-optimal freezing parameter is found by a full analytic scan over
//! `k = 1..=k_max` (no unimodality assumption). The no-freezing baseline
//! `k = 0` has no analytic chain, so gains against it are simulated and
//! carry a confidence interval from the baseline's standard error.

use serde::Serialize;

use crate::amc::{BaseSystem, PriorityPolicy};
use crate::dph::DphDistribution;
use crate::error::{Error, Result};
use crate::metrics;
use crate::rmc::build_complete_amc;
use crate::sim::{self, Estimate};

/// One point of the analytic AoI-versus-k curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KCurvePoint {
    pub k: usize,
    pub aoi_mean: f64,
    pub paoi_mean: f64,
}

/// Result of the analytic scan over `k >= 1`.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalK {
    pub k_star: usize,
    pub aoi_at_star: f64,
    pub curve: Vec<KCurvePoint>,
}

/// Gain of optimal freezing over the simulated zero-wait baseline.
#[derive(Debug, Clone, Serialize)]
pub struct GainRecord {
    /// Reported optimum: `0` when freezing is not beneficial.
    pub k_star: usize,
    pub freezing_beneficial: bool,
    /// Argmin of the analytic scan over `k >= 1` (ties toward smaller k).
    pub analytic_k_star: usize,
    pub optimum_aoi: f64,
    /// Simulated mean AoI at `k = 0`.
    pub baseline: Estimate,
    /// `max(0, 100 (baseline - optimum) / baseline)`.
    pub gain_percent: f64,
    /// 95% interval from the baseline uncertainty; may cross zero.
    pub gain_ci: (f64, f64),
    pub curve: Vec<KCurvePoint>,
}

/// `E[max(T1, T2)]` from the survival product.
pub fn mean_of_max(d1: &DphDistribution, d2: &DphDistribution) -> f64 {
    let mut s1 = d1.survival_probabilities();
    let mut s2 = d2.survival_probabilities();
    let mut total = 0.0;
    for _ in 0..1_000_000 {
        let a = s1.next().expect("survival iterator is infinite");
        let b = s2.next().expect("survival iterator is infinite");
        let term = 1.0 - (1.0 - a) * (1.0 - b);
        total += term;
        if term < 1e-13 {
            break;
        }
    }
    total
}

/// Default scan range: twice the ceiling of the slower server's expected
/// service time, with margin for slow tails.
pub fn default_k_max(base: &BaseSystem) -> usize {
    (2.0 * mean_of_max(&base.dph1, &base.dph2).ceil()) as usize
}

/// Evaluates the analytic mean AoI for every `k in 1..=k_max` and returns
/// the argmin (ties broken toward smaller k) with the full curve.
pub fn find_optimal_k(base: &BaseSystem, k_max: usize) -> Result<OptimalK> {
    if k_max < 1 {
        return Err(Error::InvalidParameter(format!("k_max must be >= 1, got {k_max}")));
    }
    let mut curve = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let model = build_complete_amc(&base.with_k(k))?;
        curve.push(KCurvePoint {
            k,
            aoi_mean: metrics::aoi_mean(&model)?,
            paoi_mean: metrics::paoi_mean(&model)?,
        });
    }
    let best = curve
        .iter()
        .min_by(|a, b| a.aoi_mean.partial_cmp(&b.aoi_mean).unwrap())
        .expect("curve is nonempty");
    Ok(OptimalK { k_star: best.k, aoi_at_star: best.aoi_mean, curve })
}

/// Compares the analytic optimum against a simulated zero-wait baseline.
pub fn freezing_gain(
    base: &BaseSystem,
    k_max: usize,
    sim_slots: u64,
    seed: u64,
) -> Result<GainRecord> {
    let optimal = find_optimal_k(base, k_max)?;
    let baseline_run = sim::simulate(&base.with_k(0), sim_slots, seed)?;
    let baseline = baseline_run.aoi_mean;
    let gain = |b: f64| 100.0 * (b - optimal.aoi_at_star) / b;
    let raw_gain = gain(baseline.value);
    let half = 1.96 * baseline.std_err;
    let beneficial = raw_gain > 0.0;
    Ok(GainRecord {
        k_star: if beneficial { optimal.k_star } else { 0 },
        freezing_beneficial: beneficial,
        analytic_k_star: optimal.k_star,
        optimum_aoi: optimal.aoi_at_star,
        baseline,
        gain_percent: raw_gain.max(0.0),
        gain_ci: (gain(baseline.value - half), gain(baseline.value + half)),
        curve: optimal.curve,
    })
}

/// Service-time family used by the sweep grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistFamily {
    Geometric,
    Uniform,
    /// Triangular with a fixed variance shared by every grid point.
    Triangular { variance: f64 },
}

impl DistFamily {
    pub fn build(&self, mean: f64) -> Result<DphDistribution> {
        match *self {
            DistFamily::Geometric => {
                if mean < 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "geometric mean must be >= 1, got {mean}"
                    )));
                }
                DphDistribution::geometric(1.0 / mean)
            }
            DistFamily::Uniform => {
                let b = 2.0 * mean - 1.0;
                if b < 1.0 || (b - b.round()).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "uniform mean must be a multiple of 0.5 and >= 1, got {mean}"
                    )));
                }
                DphDistribution::uniform(1, b.round() as u64)
            }
            DistFamily::Triangular { variance } => DphDistribution::triangular(mean, variance),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistFamily::Geometric => "geometric",
            DistFamily::Uniform => "uniform",
            DistFamily::Triangular { .. } => "triangular",
        }
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub mean1: f64,
    pub mean2: f64,
    pub variance1: f64,
    pub variance2: f64,
    pub gain: GainRecord,
}

/// Grid results plus axis descriptors.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub kind: String,
    pub family: String,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub k_max: usize,
    pub sim_slots: u64,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

fn splitmix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x1234_5678);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn run_grid(
    kind: &str,
    family: DistFamily,
    priority: PriorityPolicy,
    axis1: Vec<f64>,
    axis2: Vec<f64>,
    grid: Vec<(f64, f64)>,
    k_max: Option<usize>,
    sim_slots: u64,
    seed: u64,
) -> Result<SweepResult> {
    let mut points = Vec::with_capacity(grid.len());
    let mut scan_max = 0;
    for (index, (mean1, mean2)) in grid.into_iter().enumerate() {
        let base = BaseSystem {
            dph1: family.build(mean1)?,
            dph2: family.build(mean2)?,
            priority,
        };
        let k_scan = k_max.unwrap_or_else(|| default_k_max(&base));
        scan_max = scan_max.max(k_scan);
        let gain = freezing_gain(&base, k_scan, sim_slots, splitmix(seed, index as u64))?;
        points.push(SweepPoint {
            index,
            mean1,
            mean2,
            variance1: base.dph1.variance(),
            variance2: base.dph2.variance(),
            gain,
        });
    }
    Ok(SweepResult {
        kind: kind.to_string(),
        family: family.name().to_string(),
        axis1,
        axis2,
        k_max: scan_max,
        sim_slots,
        seed,
        points,
    })
}

/// Identical servers, mean swept over a grid.
pub fn sweep_mean(
    family: DistFamily,
    priority: PriorityPolicy,
    means: &[f64],
    k_max: Option<usize>,
    sim_slots: u64,
    seed: u64,
) -> Result<SweepResult> {
    let grid = means.iter().map(|&m| (m, m)).collect();
    run_grid("mean", family, priority, means.to_vec(), vec![], grid, k_max, sim_slots, seed)
}

/// Identical triangular servers with fixed mean and swept variance.
pub fn sweep_variance(
    mean: f64,
    priority: PriorityPolicy,
    variances: &[f64],
    k_max: Option<usize>,
    sim_slots: u64,
    seed: u64,
) -> Result<SweepResult> {
    let mut points = Vec::with_capacity(variances.len());
    let mut scan_max = 0;
    for (index, &variance) in variances.iter().enumerate() {
        let dph = DphDistribution::triangular(mean, variance)?;
        let base = BaseSystem { dph1: dph.clone(), dph2: dph, priority };
        let k_scan = k_max.unwrap_or_else(|| default_k_max(&base));
        scan_max = scan_max.max(k_scan);
        let gain = freezing_gain(&base, k_scan, sim_slots, splitmix(seed, index as u64))?;
        points.push(SweepPoint {
            index,
            mean1: mean,
            mean2: mean,
            variance1: variance,
            variance2: variance,
            gain,
        });
    }
    Ok(SweepResult {
        kind: "variance".to_string(),
        family: "triangular".to_string(),
        axis1: variances.to_vec(),
        axis2: vec![],
        k_max: scan_max,
        sim_slots,
        seed,
        points,
    })
}

/// Full grid over non-identical mean service times.
pub fn sweep_nonidentical(
    family: DistFamily,
    priority: PriorityPolicy,
    means1: &[f64],
    means2: &[f64],
    k_max: Option<usize>,
    sim_slots: u64,
    seed: u64,
) -> Result<SweepResult> {
    let mut grid = Vec::with_capacity(means1.len() * means2.len());
    for &m1 in means1 {
        for &m2 in means2 {
            grid.push((m1, m2));
        }
    }
    run_grid(
        "nonidentical",
        family,
        priority,
        means1.to_vec(),
        means2.to_vec(),
        grid,
        k_max,
        sim_slots,
        seed,
    )
}
