//! Exact AoI and peak-AoI distributions and moments from the absorbing
//! chain.
//!
//! With initial vector `sigma`, transient matrix `A`, non-tagged-state
//! indicator `v`, and successful-absorption vector `c_s`:
//!
//! * AoI mass:   `u(h)     = sigma A^h v   / (sigma A (I-A)^(-1) v)`
//! * peak mass:  `u(h)     = sigma A^h c_s / (sigma A (I-A)^(-1) c_s)`
//! * mean AoI:   `sigma A (I-A)^(-2) v / sigma A (I-A)^(-1) v`
//! * mean sq.:   `sigma A (I-A)^(-3) (A+I) v / sigma A (I-A)^(-1) v`
//! * mean peak:  `sigma A (I-A)^(-2) c_s / sigma A (I-A)^(-1) c_s`
//!
//! Resolvents are evaluated by sparse solves against the specific
//! right-hand vectors; no inverse is ever formed. The PMFs are emitted by
//! iterating the row vector `sigma A^h` one sparse product per step.

use serde::Serialize;

use crate::amc::AmcModel;
use crate::error::{Error, Result};
use crate::linalg;

/// Default residual-mass cutoff for emitted PMFs.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
/// Tighter cutoff used by internal consistency checks.
pub const STRICT_TAIL_TOL: f64 = 1e-12;

const SOLVE_TOL: f64 = 1e-15;
const SOLVE_MAX_ITER: usize = 5_000_000;
const PMF_MAX_STEPS: usize = 10_000_000;

/// A PMF truncated at the smallest `h` whose residual mass drops below the
/// requested tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct TruncatedPmf {
    /// `(h, probability)` for `h = 1..=truncation_h`.
    pub values: Vec<(u64, f64)>,
    pub truncation_h: u64,
    /// Residual probability beyond the truncation point.
    pub tail_mass: f64,
}

impl TruncatedPmf {
    pub fn total_mass(&self) -> f64 {
        self.values.iter().map(|&(_, p)| p).sum()
    }

    /// `sum h^order u(h)` plus a geometric-tail extrapolation estimated
    /// from the last emitted points.
    pub fn moment(&self, order: u32) -> f64 {
        let body: f64 = self
            .values
            .iter()
            .map(|&(h, p)| (h as f64).powi(order as i32) * p)
            .sum();
        body + self.tail_moment(order)
    }

    fn tail_moment(&self, order: u32) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let (h_last, p_last) = self.values[n - 1];
        let (_, p_prev) = self.values[n - 2];
        if p_last <= 0.0 || p_prev <= 0.0 {
            return 0.0;
        }
        let ratio = (p_last / p_prev).min(1.0 - 1e-9);
        let mut acc = 0.0;
        let mut term_p = p_last * ratio;
        let mut h = h_last + 1;
        while term_p > 1e-18 * (1.0 + acc) {
            acc += (h as f64).powi(order as i32) * term_p;
            term_p *= ratio;
            h += 1;
        }
        acc
    }
}

/// Exact distributions and moments for one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct AoiReport {
    pub config: String,
    pub aoi_mean: f64,
    pub aoi_second_moment: f64,
    pub paoi_mean: f64,
    pub aoi_pmf: TruncatedPmf,
    pub paoi_pmf: TruncatedPmf,
    pub tail_tol: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sigma A (I-A)^(-1) target`, the normalizing constant of both PMFs.
fn normalizer(model: &AmcModel, target: &[f64]) -> Result<(Vec<f64>, f64)> {
    let sigma = model.sigma()?;
    let x = linalg::solve_i_minus(&model.a, target, SOLVE_TOL, SOLVE_MAX_ITER)
        .map_err(|e| Error::Numerical(format!("(I - A) solve failed (broken chain?): {e}")))?;
    let den = dot(sigma, &model.a.matvec(&x));
    if !den.is_finite() || den <= 0.0 {
        return Err(Error::Numerical(format!(
            "normalizing constant {den} is not positive; the chain never reaches the target set"
        )));
    }
    Ok((x, den))
}

fn truncated_pmf(model: &AmcModel, target: &[f64], tail_tol: f64) -> Result<TruncatedPmf> {
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail tolerance must be in (0, 1), got {tail_tol}"
        )));
    }
    let sigma = model.sigma()?;
    let (_, den) = normalizer(model, target)?;
    let mut row = model.a.vecmat(sigma); // sigma A^1
    let mut values = Vec::new();
    let mut cum = 0.0;
    let mut h = 1u64;
    loop {
        let p = dot(&row, target) / den;
        values.push((h, p));
        cum += p;
        if 1.0 - cum < tail_tol {
            break;
        }
        if h as usize >= PMF_MAX_STEPS {
            return Err(Error::Numerical(format!(
                "tail tolerance {tail_tol} unreachable within {PMF_MAX_STEPS} steps \
                 (accumulated mass {cum})"
            )));
        }
        row = model.a.vecmat(&row);
        h += 1;
    }
    Ok(TruncatedPmf { values, truncation_h: h, tail_mass: 1.0 - cum })
}

/// Exact AoI PMF, truncated once the residual mass falls below `tail_tol`.
pub fn aoi_pmf(model: &AmcModel, tail_tol: f64) -> Result<TruncatedPmf> {
    truncated_pmf(model, &model.v, tail_tol)
}

/// Exact peak-AoI PMF.
pub fn paoi_pmf(model: &AmcModel, tail_tol: f64) -> Result<TruncatedPmf> {
    truncated_pmf(model, &model.c_s, tail_tol)
}

/// Mean AoI via two successive resolvent solves.
pub fn aoi_mean(model: &AmcModel) -> Result<f64> {
    let sigma = model.sigma()?;
    let (x1, den) = normalizer(model, &model.v)?;
    let x2 = linalg::solve_i_minus(&model.a, &x1, SOLVE_TOL, SOLVE_MAX_ITER)?;
    Ok(dot(sigma, &model.a.matvec(&x2)) / den)
}

/// Mean squared AoI via three successive resolvent solves against
/// `(A + I) v`.
pub fn aoi_second_moment(model: &AmcModel) -> Result<f64> {
    let sigma = model.sigma()?;
    let (_, den) = normalizer(model, &model.v)?;
    let mut w = model.a.matvec(&model.v);
    for (wi, vi) in w.iter_mut().zip(&model.v) {
        *wi += vi;
    }
    let t1 = linalg::solve_i_minus(&model.a, &w, SOLVE_TOL, SOLVE_MAX_ITER)?;
    let t2 = linalg::solve_i_minus(&model.a, &t1, SOLVE_TOL, SOLVE_MAX_ITER)?;
    let t3 = linalg::solve_i_minus(&model.a, &t2, SOLVE_TOL, SOLVE_MAX_ITER)?;
    Ok(dot(sigma, &model.a.matvec(&t3)) / den)
}

/// Mean peak AoI.
pub fn paoi_mean(model: &AmcModel) -> Result<f64> {
    let sigma = model.sigma()?;
    let (x1, den) = normalizer(model, &model.c_s)?;
    let x2 = linalg::solve_i_minus(&model.a, &x1, SOLVE_TOL, SOLVE_MAX_ITER)?;
    Ok(dot(sigma, &model.a.matvec(&x2)) / den)
}

/// AoI moment of arbitrary order by PMF summation with geometric-tail
/// extrapolation. Orders 1 and 2 have closed forms (`aoi_mean`,
/// `aoi_second_moment`); this generic path covers the rest.
pub fn aoi_moment(model: &AmcModel, order: u32, tail_tol: f64) -> Result<f64> {
    Ok(aoi_pmf(model, tail_tol)?.moment(order))
}

/// Peak-AoI moment of arbitrary order by PMF summation.
pub fn paoi_moment(model: &AmcModel, order: u32, tail_tol: f64) -> Result<f64> {
    Ok(paoi_pmf(model, tail_tol)?.moment(order))
}

/// Bundles both PMFs and the three headline moments.
pub fn aoi_report(model: &AmcModel, tail_tol: f64) -> Result<AoiReport> {
    Ok(AoiReport {
        config: model.config.describe(),
        aoi_mean: aoi_mean(model)?,
        aoi_second_moment: aoi_second_moment(model)?,
        paoi_mean: paoi_mean(model)?,
        aoi_pmf: aoi_pmf(model, tail_tol)?,
        paoi_pmf: paoi_pmf(model, tail_tol)?,
        tail_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amc::{PriorityPolicy, SystemConfig};
    use crate::dph::DphDistribution;
    use crate::rmc::build_complete_amc;

    fn geometric_pair(p1: f64, p2: f64, k: usize) -> SystemConfig {
        SystemConfig {
            dph1: DphDistribution::geometric(p1).unwrap(),
            dph2: DphDistribution::geometric(p2).unwrap(),
            k,
            priority: PriorityPolicy::S1Priority,
        }
    }

    #[test]
    fn deterministic_one_slot_gives_unit_aoi_and_peak() {
        // T = 1 on both servers with k = 1: a packet is generated every
        // slot and received the next, so AoI and peak AoI are both 1.
        let det1 = DphDistribution::uniform(1, 1).unwrap();
        let config = SystemConfig {
            dph1: det1.clone(),
            dph2: det1,
            k: 1,
            priority: PriorityPolicy::S1Priority,
        };
        let model = build_complete_amc(&config).unwrap();
        let aoi = aoi_pmf(&model, 1e-12).unwrap();
        assert_eq!(aoi.values.len(), 1);
        assert!((aoi.values[0].1 - 1.0).abs() < 1e-12);
        let paoi = paoi_pmf(&model, 1e-12).unwrap();
        assert_eq!(paoi.values.len(), 1);
        assert!((paoi.values[0].1 - 1.0).abs() < 1e-12);
        assert!((aoi_mean(&model).unwrap() - 1.0).abs() < 1e-12);
        assert!((paoi_mean(&model).unwrap() - 1.0).abs() < 1e-12);
        assert!((aoi_second_moment(&model).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pmfs_normalize_within_tolerance() {
        for config in [
            geometric_pair(0.5, 0.5, 2),
            geometric_pair(0.2, 0.8, 4),
        ] {
            let model = build_complete_amc(&config).unwrap();
            for tail_tol in [1e-8, 1e-10] {
                let a = aoi_pmf(&model, tail_tol).unwrap();
                assert!((a.total_mass() + a.tail_mass - 1.0).abs() < 1e-12);
                assert!(a.tail_mass < tail_tol);
                let p = paoi_pmf(&model, tail_tol).unwrap();
                assert!((p.total_mass() + p.tail_mass - 1.0).abs() < 1e-12);
                assert!(p.tail_mass < tail_tol);
            }
        }
    }

    #[test]
    fn closed_forms_match_pmf_summation() {
        let model = build_complete_amc(&geometric_pair(0.5, 0.5, 2)).unwrap();
        let mean = aoi_mean(&model).unwrap();
        let second = aoi_second_moment(&model).unwrap();
        let peak = paoi_mean(&model).unwrap();
        assert!((mean - aoi_moment(&model, 1, 1e-12).unwrap()).abs() < 1e-8);
        assert!((second - aoi_moment(&model, 2, 1e-12).unwrap()).abs() < 1e-8);
        assert!((peak - paoi_moment(&model, 1, 1e-12).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn second_moment_dominates_squared_mean() {
        for config in [
            geometric_pair(0.5, 0.25, 1),
            geometric_pair(0.1, 0.1, 8),
            SystemConfig {
                dph1: DphDistribution::uniform(1, 5).unwrap(),
                dph2: DphDistribution::uniform(1, 5).unwrap(),
                k: 3,
                priority: PriorityPolicy::S1Priority,
            },
        ] {
            let model = build_complete_amc(&config).unwrap();
            let mean = aoi_mean(&model).unwrap();
            let second = aoi_second_moment(&model).unwrap();
            assert!(second >= mean * mean - 1e-10);
            assert!(mean >= 1.0);
        }
    }

    #[test]
    fn cdf_is_monotone_and_bounded() {
        let model = build_complete_amc(&geometric_pair(0.3, 0.6, 3)).unwrap();
        for pmf in [aoi_pmf(&model, 1e-10).unwrap(), paoi_pmf(&model, 1e-10).unwrap()] {
            let mut cum = 0.0;
            for &(_, p) in &pmf.values {
                assert!(p >= -1e-15);
                let next = cum + p;
                assert!(next >= cum);
                cum = next;
                assert!(cum <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn tail_ratio_stabilizes_to_spectral_radius() {
        // Asymmetric servers give a clear gap between the dominant and
        // subdominant decay modes, so the tail ratio settles well before
        // the truncation point.
        let model = build_complete_amc(&geometric_pair(0.1, 0.3, 8)).unwrap();
        let pmf = aoi_pmf(&model, 1e-12).unwrap();
        let n = pmf.values.len();
        assert!(n > 60, "PMF too short ({n}) for a tail-ratio check");
        let ratios: Vec<f64> = (n - 50..n)
            .map(|idx| pmf.values[idx].1 / pmf.values[idx - 1].1)
            .collect();
        let last = *ratios.last().unwrap();
        for r in &ratios {
            assert!((r - last).abs() < 1e-3, "tail ratio drifts: {r} vs {last}");
        }
    }

    #[test]
    fn degenerate_geometric_and_uniform_coincide() {
        // geometric(1) and uniform(1,1) are the same one-slot service.
        for k in 1..=8 {
            let g = SystemConfig {
                dph1: DphDistribution::geometric(1.0).unwrap(),
                dph2: DphDistribution::geometric(1.0).unwrap(),
                k,
                priority: PriorityPolicy::S1Priority,
            };
            let u = SystemConfig {
                dph1: DphDistribution::uniform(1, 1).unwrap(),
                dph2: DphDistribution::uniform(1, 1).unwrap(),
                k,
                priority: PriorityPolicy::S1Priority,
            };
            let rg = aoi_report(&build_complete_amc(&g).unwrap(), 1e-10).unwrap();
            let ru = aoi_report(&build_complete_amc(&u).unwrap(), 1e-10).unwrap();
            assert!((rg.aoi_mean - ru.aoi_mean).abs() < 1e-12);
            assert!((rg.aoi_second_moment - ru.aoi_second_moment).abs() < 1e-12);
            assert!((rg.paoi_mean - ru.paoi_mean).abs() < 1e-12);
            assert_eq!(rg.aoi_pmf.values.len(), ru.aoi_pmf.values.len());
            for (a, b) in rg.aoi_pmf.values.iter().zip(&ru.aoi_pmf.values) {
                assert_eq!(a.0, b.0);
                assert!((a.1 - b.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_tail_tolerance() {
        let model = build_complete_amc(&geometric_pair(0.5, 0.5, 1)).unwrap();
        assert!(aoi_pmf(&model, 0.0).is_err());
        assert!(aoi_pmf(&model, 1.5).is_err());
    }

    #[test]
    fn incomplete_model_is_rejected() {
        let config = geometric_pair(0.5, 0.5, 1);
        let model = crate::amc::build_amc(&config).unwrap();
        assert!(aoi_mean(&model).is_err());
    }
}
