//! The recurrent chain of server occupancy, its stationary distribution,
//! and the initial vector of the absorbing chain.
//!
//! The recurrent chain watches only which servers are busy, their service
//! phases, and the freezing clock. Its stationary probabilities at clock
//! `k - 1` weight the transition events that coincide with a packet
//! generation; normalizing those weights yields the distribution of the
//! absorbing chain's start state.

use crate::amc::{AmcModel, PriorityPolicy, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, Csr};
use crate::state_space::{enumerate_rmc, AmcState, RmcState, StateSpace};

/// The recurrent chain: row-stochastic transition matrix and, once solved,
/// its stationary distribution.
#[derive(Debug, Clone)]
pub struct RmcModel {
    pub config: SystemConfig,
    pub space: StateSpace<RmcState>,
    pub w: Csr,
    pub pi: Option<Vec<f64>>,
}

impl RmcModel {
    pub fn size(&self) -> usize {
        self.space.len()
    }

    pub fn pi(&self) -> Result<&[f64]> {
        self.pi
            .as_deref()
            .ok_or_else(|| Error::Incomplete("stationary distribution not solved".into()))
    }
}

/// Builds the recurrent chain's transition matrix.
pub fn build_rmc(config: &SystemConfig) -> Result<RmcModel> {
    if config.k < 1 {
        return Err(Error::InvalidParameter(
            "k = 0 has no recurrent-chain model; use the simulator for the zero-wait benchmark"
                .into(),
        ));
    }
    let d1 = &config.dph1;
    let d2 = &config.dph2;
    let space = enumerate_rmc(d1.order(), d2.order(), config.k)?;
    let k = config.k;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();

    let b1 = |i: usize| d1.absorb_prob(i - 1);
    let b2 = |j: usize| d2.absorb_prob(j - 1);
    let cont1 = |i: usize| d1.trans_nonzeros(i - 1).iter().map(|&(c, p)| (c + 1, p));
    let cont2 = |j: usize| d2.trans_nonzeros(j - 1).iter().map(|&(c, p)| (c + 1, p));
    let alpha1 = || d1.alpha_nonzeros().iter().map(|&(c, a)| (c + 1, a));
    let alpha2 = || d2.alpha_nonzeros().iter().map(|&(c, a)| (c + 1, a));

    let st = |class: u8, i: usize, j: usize, l: usize| RmcState { class, i, j, l };

    for (r, &from) in space.states().iter().enumerate() {
        let last = from.l + 1 == k;
        let lnext = from.l + 1;
        let (i, j) = (from.i, from.j);

        let mut push = |to: RmcState, p: f64| {
            if p != 0.0 {
                triplets.push((r, space.idx(to), p));
            }
        };
        // Generation with both servers idle goes to the priority server.
        let gen_both_idle = |weight: f64, push: &mut dyn FnMut(RmcState, f64)| match config
            .priority
        {
            PriorityPolicy::S1Priority => {
                for (i2, a) in alpha1() {
                    push(st(2, i2, 0, 0), weight * a);
                }
            }
            PriorityPolicy::S2Priority => {
                for (j2, a) in alpha2() {
                    push(st(3, 0, j2, 0), weight * a);
                }
            }
        };

        match from.class {
            // Both idle.
            1 => {
                if last {
                    gen_both_idle(1.0, &mut push);
                } else {
                    push(st(1, 0, 0, lnext), 1.0);
                }
            }
            // Only S1 busy.
            2 => {
                if last {
                    gen_both_idle(b1(i), &mut push);
                } else {
                    push(st(1, 0, 0, lnext), b1(i));
                }
                for (i2, p1) in cont1(i) {
                    if last {
                        // S1 continues; the new packet starts on idle S2.
                        for (j2, a) in alpha2() {
                            push(st(4, i2, j2, 0), p1 * a);
                        }
                    } else {
                        push(st(2, i2, 0, lnext), p1);
                    }
                }
            }
            // Only S2 busy.
            3 => {
                if last {
                    gen_both_idle(b2(j), &mut push);
                } else {
                    push(st(1, 0, 0, lnext), b2(j));
                }
                for (j2, p2) in cont2(j) {
                    if last {
                        for (i2, a) in alpha1() {
                            push(st(4, i2, j2, 0), p2 * a);
                        }
                    } else {
                        push(st(3, 0, j2, lnext), p2);
                    }
                }
            }
            // Both busy.
            4 => {
                // S1 completes, S2 continues; while frozen no packet starts,
                // so the transition carries no initial-phase factor.
                for (j2, p2) in cont2(j) {
                    if last {
                        for (i2, a) in alpha1() {
                            push(st(4, i2, j2, 0), b1(i) * p2 * a);
                        }
                    } else {
                        push(st(3, 0, j2, lnext), b1(i) * p2);
                    }
                }
                // S2 completes, S1 continues.
                for (i2, p1) in cont1(i) {
                    if last {
                        for (j2, a) in alpha2() {
                            push(st(4, i2, j2, 0), b2(j) * p1 * a);
                        }
                    } else {
                        push(st(2, i2, 0, lnext), b2(j) * p1);
                    }
                }
                // Both complete.
                if last {
                    gen_both_idle(b1(i) * b2(j), &mut push);
                } else {
                    push(st(1, 0, 0, lnext), b1(i) * b2(j));
                }
                // Neither completes; the clock saturates at k - 1.
                let lsat = if last { k - 1 } else { lnext };
                for (i2, p1) in cont1(i) {
                    for (j2, p2) in cont2(j) {
                        push(st(4, i2, j2, lsat), p1 * p2);
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    let w = Csr::from_triplets(space.len(), space.len(), triplets);
    Ok(RmcModel { config: config.clone(), space, w, pi: None })
}

/// Solves `pi W = pi`, `sum pi = 1` and installs the result. The chain is
/// observed from the empty system (both idle, clock expired), matching the
/// simulator's start; states unreachable from there get probability zero.
pub fn solve_steady_state(model: &mut RmcModel) -> Result<&[f64]> {
    let start = model
        .space
        .idx(RmcState { class: 1, i: 0, j: 0, l: model.config.k - 1 });
    let pi = linalg::stationary(&model.w, start, 1e-13, 1_000_000)?;
    model.pi = Some(pi);
    Ok(model.pi.as_deref().unwrap())
}

/// Unnormalized start-state weights of the absorbing chain, from the
/// stationary probabilities at clock `k - 1`.
///
/// A start in class 1 (new packet on S1 beside a busy S2) is fed by
/// single-S2 and dual-busy states where S2 continues and S1 takes the new
/// packet; class 4 mirrors this; class 5 (S1 priority) or class 6 (S2
/// priority) collects every transition that leaves the other server idle.
pub fn start_weights(rmc: &RmcModel, amc_space: &StateSpace<AmcState>) -> Result<Vec<f64>> {
    let pi = rmc.pi()?;
    let config = &rmc.config;
    let d1 = &config.dph1;
    let d2 = &config.dph2;
    let (n1, n2) = (d1.order(), d2.order());
    let kk = config.k - 1;
    let mut q = vec![0.0; amc_space.len()];

    let p1_idle = pi[rmc.space.idx(RmcState { class: 1, i: 0, j: 0, l: kk })];
    let p2 = |i: usize| pi[rmc.space.idx(RmcState { class: 2, i, j: 0, l: kk })];
    let p3 = |j: usize| pi[rmc.space.idx(RmcState { class: 3, i: 0, j, l: kk })];
    let p4 = |i: usize, j: usize| pi[rmc.space.idx(RmcState { class: 4, i, j, l: kk })];

    // New packet on S1 while S2 keeps serving.
    for j in 1..=n2 {
        let mut weight: Vec<f64> = vec![0.0; n2 + 1]; // by destination phase j2
        for &(j2, p) in d2.trans_nonzeros(j - 1) {
            weight[j2 + 1] += p * p3(j);
        }
        for i in 1..=n1 {
            let w4 = d1.absorb_prob(i - 1) * p4(i, j);
            if w4 != 0.0 {
                for &(j2, p) in d2.trans_nonzeros(j - 1) {
                    weight[j2 + 1] += p * w4;
                }
            }
        }
        for (j2, &wgt) in weight.iter().enumerate().skip(1) {
            if wgt == 0.0 {
                continue;
            }
            for &(i2, a) in d1.alpha_nonzeros() {
                q[amc_space.idx(AmcState { class: 1, i: i2 + 1, j: j2, l: 0 })] += wgt * a;
            }
        }
    }

    // New packet on S2 while S1 keeps serving.
    for i in 1..=n1 {
        let mut weight: Vec<f64> = vec![0.0; n1 + 1];
        for &(i2, p) in d1.trans_nonzeros(i - 1) {
            weight[i2 + 1] += p * p2(i);
        }
        for j in 1..=n2 {
            let w4 = d2.absorb_prob(j - 1) * p4(i, j);
            if w4 != 0.0 {
                for &(i2, p) in d1.trans_nonzeros(i - 1) {
                    weight[i2 + 1] += p * w4;
                }
            }
        }
        for (i2, &wgt) in weight.iter().enumerate().skip(1) {
            if wgt == 0.0 {
                continue;
            }
            for &(j2, a) in d2.alpha_nonzeros() {
                q[amc_space.idx(AmcState { class: 4, i: i2, j: j2 + 1, l: 0 })] += wgt * a;
            }
        }
    }

    // New packet with the other server idle: every source state empties.
    let mut idle_weight = p1_idle;
    for i in 1..=n1 {
        idle_weight += d1.absorb_prob(i - 1) * p2(i);
    }
    for j in 1..=n2 {
        idle_weight += d2.absorb_prob(j - 1) * p3(j);
    }
    for i in 1..=n1 {
        for j in 1..=n2 {
            idle_weight += d1.absorb_prob(i - 1) * d2.absorb_prob(j - 1) * p4(i, j);
        }
    }
    match config.priority {
        PriorityPolicy::S1Priority => {
            for &(i2, a) in d1.alpha_nonzeros() {
                q[amc_space.idx(AmcState { class: 5, i: i2 + 1, j: 0, l: 0 })] += idle_weight * a;
            }
        }
        PriorityPolicy::S2Priority => {
            for &(j2, a) in d2.alpha_nonzeros() {
                q[amc_space.idx(AmcState { class: 6, i: 0, j: j2 + 1, l: 0 })] += idle_weight * a;
            }
        }
    }

    Ok(q)
}

/// Computes the initial vector from the solved recurrent chain and installs
/// it into the absorbing chain.
pub fn initial_vector(rmc: &RmcModel, amc: &mut AmcModel) -> Result<Vec<f64>> {
    let mut q = start_weights(rmc, &amc.space)?;
    let total: f64 = q.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::Numerical(
            "start-state weights sum to zero; the recurrent chain never generates a packet".into(),
        ));
    }
    for v in q.iter_mut() {
        *v /= total;
    }
    amc.sigma = Some(q.clone());
    Ok(q)
}

/// Builds the absorbing chain, solves the recurrent chain, and installs the
/// initial vector: the one-call path from a configuration to a model ready
/// for the distribution formulas.
pub fn build_complete_amc(config: &SystemConfig) -> Result<AmcModel> {
    let mut amc = crate::amc::build_amc(config)?;
    let mut rmc = build_rmc(config)?;
    solve_steady_state(&mut rmc)?;
    initial_vector(&rmc, &mut amc)?;
    Ok(amc)
}
