//! Construction of the absorbing Markov chain that tracks one update cycle.
//!
//! The chain starts when a tagged packet is generated and absorbs either
//! when the next up-to-date packet after it is received (successful
//! absorption, vector `c_s`) or when the tagged packet itself is overtaken
//! and received obsolete (unsuccessful absorption, vector `c_u`). One chain
//! step is one slot: each busy server either completes (absorption
//! probability of its current phase) or moves to a new phase, the freezing
//! clock advances and saturates at `k - 1` while no packet can be
//! generated, and a generation is coupled into the same step whenever the
//! clock has expired and a server is free.

use std::fmt;

use crate::dph::DphDistribution;
use crate::error::{Error, Result};
use crate::linalg::Csr;
use crate::state_space::{enumerate_amc, AmcState, StateSpace};

/// Which server takes the new packet when both are idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorityPolicy {
    S1Priority,
    S2Priority,
}

impl fmt::Display for PriorityPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorityPolicy::S1Priority => write!(f, "s1"),
            PriorityPolicy::S2Priority => write!(f, "s2"),
        }
    }
}

/// Service-time pair and priority, without a freezing parameter. Sweeps
/// attach varying `k` values to one base system.
#[derive(Debug, Clone)]
pub struct BaseSystem {
    pub dph1: DphDistribution,
    pub dph2: DphDistribution,
    pub priority: PriorityPolicy,
}

impl BaseSystem {
    pub fn with_k(&self, k: usize) -> SystemConfig {
        SystemConfig {
            dph1: self.dph1.clone(),
            dph2: self.dph2.clone(),
            k,
            priority: self.priority,
        }
    }
}

/// Full system description: two DPH service times, freezing parameter, and
/// priority policy. `k >= 1` is required for the analytic chain; `k = 0`
/// (zero-wait) is only meaningful to the simulator.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub dph1: DphDistribution,
    pub dph2: DphDistribution,
    pub k: usize,
    pub priority: PriorityPolicy,
}

impl SystemConfig {
    pub fn base(&self) -> BaseSystem {
        BaseSystem { dph1: self.dph1.clone(), dph2: self.dph2.clone(), priority: self.priority }
    }

    /// Short human-readable summary used in report headers.
    pub fn describe(&self) -> String {
        format!(
            "server1(order={}, mean={:.6}) server2(order={}, mean={:.6}) k={} priority={}",
            self.dph1.order(),
            self.dph1.mean(),
            self.dph2.order(),
            self.dph2.mean(),
            self.k,
            self.priority
        )
    }
}

/// The absorbing chain: transient matrix `A`, absorption vectors, the
/// non-tagged-state indicator `v`, and (once installed) the initial vector.
#[derive(Debug, Clone)]
pub struct AmcModel {
    pub config: SystemConfig,
    pub space: StateSpace<AmcState>,
    pub a: Csr,
    pub c_s: Vec<f64>,
    pub c_u: Vec<f64>,
    /// Initial probability vector; installed from the recurrent chain.
    pub sigma: Option<Vec<f64>>,
    /// Indicator of states visited after the tagged packet was received
    /// (classes 7..14).
    pub v: Vec<f64>,
}

impl AmcModel {
    pub fn size(&self) -> usize {
        self.space.len()
    }

    pub fn sigma(&self) -> Result<&[f64]> {
        self.sigma
            .as_deref()
            .ok_or_else(|| Error::Incomplete("initial vector not installed; solve the recurrent chain first".into()))
    }
}

/// Builds `A`, `c_s`, and `c_u` for the given configuration. The initial
/// vector is left unset.
pub fn build_amc(config: &SystemConfig) -> Result<AmcModel> {
    if config.k < 1 {
        return Err(Error::InvalidParameter(
            "k = 0 has no absorbing-chain model; use the simulator for the zero-wait benchmark"
                .into(),
        ));
    }
    let d1 = &config.dph1;
    let d2 = &config.dph2;
    let space = enumerate_amc(d1.order(), d2.order(), config.k)?;
    let m = space.len();
    let k = config.k;

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut c_s = vec![0.0; m];
    let mut c_u = vec![0.0; m];

    // phases in states are 1-based; the distributions are 0-based
    let b1 = |i: usize| d1.absorb_prob(i - 1);
    let b2 = |j: usize| d2.absorb_prob(j - 1);
    let cont1 = |i: usize| d1.trans_nonzeros(i - 1).iter().map(|&(c, p)| (c + 1, p));
    let cont2 = |j: usize| d2.trans_nonzeros(j - 1).iter().map(|&(c, p)| (c + 1, p));
    let alpha1 = || d1.alpha_nonzeros().iter().map(|&(c, a)| (c + 1, a));
    let alpha2 = || d2.alpha_nonzeros().iter().map(|&(c, a)| (c + 1, a));

    let st = |class: u8, i: usize, j: usize, l: usize| AmcState { class, i, j, l };

    for (r, &from) in space.states().iter().enumerate() {
        let last = from.l + 1 == k; // freezing clock has expired
        let lnext = from.l + 1;
        let lsat = if last { k - 1 } else { from.l + 1 };
        let (i, j) = (from.i, from.j);

        let mut push = |to: AmcState, p: f64| {
            if p != 0.0 {
                triplets.push((r, space.idx(to), p));
            }
        };
        // Generation with both servers idle: the priority server samples.
        let gen_both_idle = |weight: f64, push: &mut dyn FnMut(AmcState, f64)| match config
            .priority
        {
            PriorityPolicy::S1Priority => {
                for (i2, a) in alpha1() {
                    push(st(13, i2, 0, 0), weight * a);
                }
            }
            PriorityPolicy::S2Priority => {
                for (j2, a) in alpha2() {
                    push(st(14, 0, j2, 0), weight * a);
                }
            }
        };

        match from.class {
            // Tagged packet on S1; S2 serves an older packet.
            1 => {
                for (j2, p2) in cont2(j) {
                    if last {
                        for (i2, a) in alpha1() {
                            push(st(11, i2, j2, 0), b1(i) * p2 * a);
                        }
                    } else {
                        push(st(10, 0, j2, lnext), b1(i) * p2);
                    }
                }
                if last {
                    gen_both_idle(b1(i) * b2(j), &mut push);
                } else {
                    push(st(7, 0, 0, lnext), b1(i) * b2(j));
                }
                for (i2, p1) in cont1(i) {
                    if last {
                        for (j2, a) in alpha2() {
                            push(st(2, i2, j2, 0), b2(j) * p1 * a);
                        }
                    } else {
                        push(st(5, i2, 0, lnext), b2(j) * p1);
                    }
                }
                for (i2, p1) in cont1(i) {
                    for (j2, p2) in cont2(j) {
                        push(st(1, i2, j2, lsat), p1 * p2);
                    }
                }
            }
            // Tagged packet on S1; S2 serves a newer packet whose reception
            // would make the tagged packet obsolete.
            2 => {
                c_u[r] += b2(j);
                for (j2, p2) in cont2(j) {
                    if last {
                        for (i2, a) in alpha1() {
                            push(st(8, i2, j2, 0), b1(i) * p2 * a);
                        }
                    } else {
                        push(st(14, 0, j2, lnext), b1(i) * p2);
                    }
                }
                for (i2, p1) in cont1(i) {
                    for (j2, p2) in cont2(j) {
                        push(st(2, i2, j2, lsat), p1 * p2);
                    }
                }
            }
            // Mirror of class 2: tagged packet on S2, S1 newer.
            3 => {
                c_u[r] += b1(i);
                for (i2, p1) in cont1(i) {
                    if last {
                        for (j2, a) in alpha2() {
                            push(st(8, i2, j2, 0), b2(j) * p1 * a);
                        }
                    } else {
                        push(st(13, i2, 0, lnext), b2(j) * p1);
                    }
                }
                for (i2, p1) in cont1(i) {
                    for (j2, p2) in cont2(j) {
                        push(st(3, i2, j2, lsat), p1 * p2);
                    }
                }
            }
            // Mirror of class 1: tagged packet on S2, S1 older.
            4 => {
                for (j2, p2) in cont2(j) {
                    if last {
                        for (i2, a) in alpha1() {
                            push(st(3, i2, j2, 0), b1(i) * p2 * a);
                        }
                    } else {
                        push(st(6, 0, j2, lnext), b1(i) * p2);
                    }
                }
                if last {
                    gen_both_idle(b1(i) * b2(j), &mut push);
                } else {
                    push(st(7, 0, 0, lnext), b1(i) * b2(j));
                }
                for (i2, p1) in cont1(i) {
                    if last {
                        for (j2, a) in alpha2() {
                            push(st(12, i2, j2, 0), b2(j) * p1 * a);
                        }
                    } else {
                        push(st(9, i2, 0, lnext), b2(j) * p1);
                    }
                }
                for (i2, p1) in cont1(i) {
                    for (j2, p2) in cont2(j) {
                        push(st(4, i2, j2, lsat), p1 * p2);
                    }
                }
            }
            // Tagged packet alone on S1.
            5 => {
                if last {
                    gen_both_idle(b1(i), &mut push);
                } else {
                    push(st(7, 0, 0, lnext), b1(i));
                }
                for (i2, p1) in cont1(i) {
                    if last {
                        for (j2, a) in alpha2() {
                            push(st(2, i2, j2, 0), p1 * a);
                        }
                    } else {
                        push(st(5, i2, 0, lnext), p1);
                    }
                }
            }
            // Tagged packet alone on S2.
            6 => {
                if last {
                    gen_both_idle(b2(j), &mut push);
                } else {
                    push(st(7, 0, 0, lnext), b2(j));
                }
                for (j2, p2) in cont2(j) {
                    if last {
                        for (i2, a) in alpha1() {
                            push(st(3, i2, j2, 0), p2 * a);
                        }
                    } else {
                        push(st(6, 0, j2, lnext), p2);
                    }
                }
            }
            // Both idle after the tagged packet was received.
            7 => {
                if last {
                    gen_both_idle(1.0, &mut push);
                } else {
                    push(st(7, 0, 0, lnext), 1.0);
                }
            }
            // Both servers carry up-to-date packets: either completion ends
            // the cycle.
            8 => {
                c_s[r] += b1(i) + b2(j) - b1(i) * b2(j);
                for (i2, p1) in cont1(i) {
                    for (j2, p2) in cont2(j) {
                        push(st(8, i2, j2, 0), p1 * p2);
                    }
                }
            }
            // S1 serves an obsolete packet, S2 idle.
            9 => {
                if last {
                    gen_both_idle(b1(i), &mut push);
                } else {
                    push(st(7, 0, 0, lnext), b1(i));
                }
                for (i2, p1) in cont1(i) {
                    if last {
                        for (j2, a) in alpha2() {
                            push(st(12, i2, j2, 0), p1 * a);
                        }
                    } else {
                        push(st(9, i2, 0, lnext), p1);
                    }
                }
            }
            // S2 serves an obsolete packet, S1 idle.
            10 => {
                if last {
                    // The printed S2-priority factor b_i^(1) is corrected to
                    // b_j^(2): i = 0 here and only S2 can complete.
                    gen_both_idle(b2(j), &mut push);
                } else {
                    push(st(7, 0, 0, lnext), b2(j));
                }
                for (j2, p2) in cont2(j) {
                    if last {
                        for (i2, a) in alpha1() {
                            push(st(11, i2, j2, 0), p2 * a);
                        }
                    } else {
                        push(st(10, 0, j2, lnext), p2);
                    }
                }
            }
            // S1 up to date, S2 obsolete.
            11 => {
                c_s[r] += b1(i);
                for (i2, p1) in cont1(i) {
                    if last {
                        for (j2, a) in alpha2() {
                            push(st(8, i2, j2, 0), b2(j) * p1 * a);
                        }
                    } else {
                        push(st(13, i2, 0, lnext), b2(j) * p1);
                    }
                }
                for (i2, p1) in cont1(i) {
                    for (j2, p2) in cont2(j) {
                        push(st(11, i2, j2, lsat), p1 * p2);
                    }
                }
            }
            // S2 up to date, S1 obsolete.
            12 => {
                c_s[r] += b2(j);
                for (j2, p2) in cont2(j) {
                    if last {
                        for (i2, a) in alpha1() {
                            push(st(8, i2, j2, 0), b1(i) * p2 * a);
                        }
                    } else {
                        push(st(14, 0, j2, lnext), b1(i) * p2);
                    }
                }
                for (i2, p1) in cont1(i) {
                    for (j2, p2) in cont2(j) {
                        push(st(12, i2, j2, lsat), p1 * p2);
                    }
                }
            }
            // S1 up to date, S2 idle.
            13 => {
                c_s[r] += b1(i);
                for (i2, p1) in cont1(i) {
                    if last {
                        for (j2, a) in alpha2() {
                            push(st(8, i2, j2, 0), p1 * a);
                        }
                    } else {
                        push(st(13, i2, 0, lnext), p1);
                    }
                }
            }
            // S2 up to date, S1 idle.
            14 => {
                c_s[r] += b2(j);
                for (j2, p2) in cont2(j) {
                    if last {
                        for (i2, a) in alpha1() {
                            push(st(8, i2, j2, 0), p2 * a);
                        }
                    } else {
                        push(st(14, 0, j2, lnext), p2);
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    let v = space
        .states()
        .iter()
        .map(|s| if s.class >= 7 { 1.0 } else { 0.0 })
        .collect();
    let a = Csr::from_triplets(m, m, triplets);
    Ok(AmcModel { config: config.clone(), space, a, c_s, c_u, sigma: None, v })
}

const ROW_TOL: f64 = 1e-12;

/// Checks every model invariant and returns one message per violation.
pub fn validate_amc(model: &AmcModel) -> Vec<String> {
    let mut violations = Vec::new();
    let states = model.space.states();
    for (r, s) in states.iter().enumerate() {
        let row_sum: f64 = model.a.row(r).map(|(_, v)| v).sum();
        let total = row_sum + model.c_s[r] + model.c_u[r];
        if (total - 1.0).abs() > ROW_TOL {
            violations.push(format!("row {s:?}: probabilities sum to {total}, expected 1"));
        }
        for (c, v) in model.a.row(r) {
            if !(0.0..=1.0 + ROW_TOL).contains(&v) {
                violations.push(format!("row {s:?}, column {c}: entry {v} out of [0, 1]"));
            }
        }
        if model.c_u[r] != 0.0 && !matches!(s.class, 2 | 3) {
            violations.push(format!(
                "row {s:?}: unsuccessful absorption mass {} outside classes 2 and 3",
                model.c_u[r]
            ));
        }
        if model.c_s[r] != 0.0 && !matches!(s.class, 8 | 11 | 12 | 13 | 14) {
            violations.push(format!(
                "row {s:?}: successful absorption mass {} outside classes 8, 11..14",
                model.c_s[r]
            ));
        }
        let expect_v = if s.class >= 7 { 1.0 } else { 0.0 };
        if model.v[r] != expect_v {
            violations.push(format!("row {s:?}: indicator v = {}, expected {expect_v}", model.v[r]));
        }
    }
    if let Some(sigma) = &model.sigma {
        let mut total = 0.0;
        for (r, (&p, s)) in sigma.iter().zip(states).enumerate() {
            if p < -ROW_TOL {
                violations.push(format!("sigma[{r}] = {p} is negative"));
            }
            total += p;
            if p > 0.0 && !sigma_support_ok(s, model.config.priority) {
                violations.push(format!("sigma has mass {p} on illegal state {s:?}"));
            }
        }
        if (total - 1.0).abs() > ROW_TOL {
            violations.push(format!("sigma sums to {total}, expected 1"));
        }
    }
    violations
}

fn sigma_support_ok(s: &AmcState, priority: PriorityPolicy) -> bool {
    if s.l != 0 {
        return false;
    }
    match s.class {
        1 | 4 => true,
        5 => priority == PriorityPolicy::S1Priority,
        6 => priority == PriorityPolicy::S2Priority,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::AmcState;

    fn geometric_pair(p1: f64, p2: f64, k: usize, priority: PriorityPolicy) -> SystemConfig {
        SystemConfig {
            dph1: DphDistribution::geometric(p1).unwrap(),
            dph2: DphDistribution::geometric(p2).unwrap(),
            k,
            priority,
        }
    }

    #[test]
    fn rejects_k_zero_with_pointer_to_simulator() {
        let err = build_amc(&geometric_pair(0.5, 0.5, 0, PriorityPolicy::S1Priority))
            .unwrap_err()
            .to_string();
        assert!(err.contains("simulator"), "{err}");
    }

    #[test]
    fn minimum_order_golden_entries() {
        // N1 = N2 = 1, k = 1, S1 priority: spot-check the closed-form
        // 14x14 transient matrix and both absorption vectors.
        let (p1, p2) = (0.37, 0.61);
        let (bb1, bb2) = (1.0 - p1, 1.0 - p2);
        let model = build_amc(&geometric_pair(p1, p2, 1, PriorityPolicy::S1Priority)).unwrap();
        assert_eq!(model.size(), 14);
        let idx = |class: u8, i: usize, j: usize| {
            model.space.idx(AmcState { class, i, j, l: 0 })
        };
        let tol = 1e-15;
        // from class 1
        let r = idx(1, 1, 1);
        assert!((model.a.get(r, idx(1, 1, 1)) - bb1 * bb2).abs() < tol);
        assert!((model.a.get(r, idx(2, 1, 1)) - p2 * bb1).abs() < tol);
        assert!((model.a.get(r, idx(11, 1, 1)) - p1 * bb2).abs() < tol);
        assert!((model.a.get(r, idx(13, 1, 0)) - p1 * p2).abs() < tol);
        // from class 5
        let r = idx(5, 1, 0);
        assert!((model.a.get(r, idx(2, 1, 1)) - bb1).abs() < tol);
        assert!((model.a.get(r, idx(13, 1, 0)) - p1).abs() < tol);
        // from class 7: straight to the priority server
        let r = idx(7, 0, 0);
        assert!((model.a.get(r, idx(13, 1, 0)) - 1.0).abs() < tol);
        // absorption vectors
        assert!((model.c_s[idx(8, 1, 1)] - (p1 + p2 - p1 * p2)).abs() < tol);
        assert!((model.c_s[idx(11, 1, 1)] - p1).abs() < tol);
        assert!((model.c_s[idx(14, 0, 1)] - p2).abs() < tol);
        assert!((model.c_u[idx(2, 1, 1)] - p2).abs() < tol);
        assert!((model.c_u[idx(3, 1, 1)] - p1).abs() < tol);
        assert_eq!(validate_amc(&model), Vec::<String>::new());
    }

    #[test]
    fn rows_close_for_mixed_configs() {
        let configs = [
            SystemConfig {
                dph1: DphDistribution::uniform(1, 4).unwrap(),
                dph2: DphDistribution::geometric(0.3).unwrap(),
                k: 3,
                priority: PriorityPolicy::S2Priority,
            },
            SystemConfig {
                dph1: DphDistribution::triangular(5.0, 1.0).unwrap(),
                dph2: DphDistribution::uniform(2, 6).unwrap(),
                k: 2,
                priority: PriorityPolicy::S1Priority,
            },
        ];
        for config in &configs {
            let model = build_amc(config).unwrap();
            assert_eq!(validate_amc(&model), Vec::<String>::new());
        }
    }

    #[test]
    fn substochastic_rows_where_absorption_possible() {
        let model = build_amc(&geometric_pair(0.4, 0.6, 2, PriorityPolicy::S1Priority)).unwrap();
        let sums = model.a.row_sums();
        for r in 0..model.size() {
            if model.c_s[r] + model.c_u[r] > 0.0 {
                assert!(sums[r] < 1.0, "row {r} not substochastic");
            }
        }
    }

    #[test]
    fn absorption_is_certain() {
        // sup over states of P(not absorbed after h slots) must vanish.
        let configs = [
            geometric_pair(0.5, 0.25, 3, PriorityPolicy::S1Priority),
            SystemConfig {
                dph1: DphDistribution::uniform(1, 3).unwrap(),
                dph2: DphDistribution::uniform(2, 5).unwrap(),
                k: 4,
                priority: PriorityPolicy::S2Priority,
            },
        ];
        for config in &configs {
            let model = build_amc(config).unwrap();
            let mut x = vec![1.0; model.size()];
            let mut steps = 0usize;
            loop {
                x = model.a.matvec(&x);
                steps += 64;
                for _ in 1..64 {
                    x = model.a.matvec(&x);
                }
                let sup = x.iter().cloned().fold(0.0, f64::max);
                if sup < 1e-10 {
                    break;
                }
                assert!(steps < 1_000_000, "no absorption after {steps} steps (sup {sup})");
            }
        }
    }

    /// Relabeling that swaps the roles of the servers.
    fn swap_state(s: AmcState) -> AmcState {
        let class = match s.class {
            1 => 4,
            4 => 1,
            2 => 3,
            3 => 2,
            5 => 6,
            6 => 5,
            9 => 10,
            10 => 9,
            11 => 12,
            12 => 11,
            13 => 14,
            14 => 13,
            c => c,
        };
        AmcState { class, i: s.j, j: s.i, l: s.l }
    }

    #[test]
    fn priority_swap_is_a_relabeling_for_identical_servers() {
        let dph = DphDistribution::uniform(1, 3).unwrap();
        let make = |priority| SystemConfig {
            dph1: dph.clone(),
            dph2: dph.clone(),
            k: 2,
            priority,
        };
        let m1 = build_amc(&make(PriorityPolicy::S1Priority)).unwrap();
        let m2 = build_amc(&make(PriorityPolicy::S2Priority)).unwrap();
        for (r, &s) in m1.space.states().iter().enumerate() {
            let r2 = m2.space.idx(swap_state(s));
            assert!((m1.c_s[r] - m2.c_s[r2]).abs() < 1e-15);
            assert!((m1.c_u[r] - m2.c_u[r2]).abs() < 1e-15);
            for (c, v) in m1.a.row(r) {
                let c2 = m2.space.idx(swap_state(m1.space.state_of(c).unwrap()));
                assert!(
                    (v - m2.a.get(r2, c2)).abs() < 1e-15,
                    "mismatch at {s:?} -> {:?}",
                    m1.space.state_of(c).unwrap()
                );
            }
        }
    }

    #[test]
    fn obsolescence_mass_matches_completion_probability() {
        let config = SystemConfig {
            dph1: DphDistribution::uniform(1, 4).unwrap(),
            dph2: DphDistribution::triangular(3.0, 0.5).unwrap(),
            k: 3,
            priority: PriorityPolicy::S1Priority,
        };
        let model = build_amc(&config).unwrap();
        for (r, s) in model.space.states().iter().enumerate() {
            match s.class {
                2 => assert!((model.c_u[r] - config.dph2.absorb_prob(s.j - 1)).abs() < 1e-15),
                3 => assert!((model.c_u[r] - config.dph1.absorb_prob(s.i - 1)).abs() < 1e-15),
                _ => assert_eq!(model.c_u[r], 0.0),
            }
        }
    }

    #[test]
    fn validation_flags_constructed_faults() {
        let model = build_amc(&geometric_pair(0.5, 0.5, 2, PriorityPolicy::S1Priority)).unwrap();
        assert!(validate_amc(&model).is_empty());

        // Row-sum perturbation: drop a little mass from one c_s entry.
        let mut broken = model.clone();
        let victim = broken
            .space
            .states()
            .iter()
            .position(|s| s.class == 13)
            .unwrap();
        broken.c_s[victim] -= 1e-6;
        let violations = validate_amc(&broken);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("class: 13"), "{}", violations[0]);

        // Unsuccessful-absorption mass on a class-1 row.
        let mut broken = model.clone();
        let victim = broken.space.states().iter().position(|s| s.class == 1).unwrap();
        broken.c_u[victim] += 0.1;
        let violations = validate_amc(&broken);
        assert!(violations.iter().any(|v| v.contains("outside classes 2 and 3")));
    }
}
