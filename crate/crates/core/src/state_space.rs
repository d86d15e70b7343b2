//! Canonical enumeration of the transient states of the absorbing chain and
//! the states of the recurrent chain.
//!
//! Both chains track the service phase of each server (`0` marks an idle
//! server) and the freezing clock `l` in `0..k`. The absorbing-chain state
//! space has fourteen classes of transient states:
//!
//! | class | meaning                                          |
//! |-------|--------------------------------------------------|
//! | 1     | tagged packet on S1, generated after S2's packet |
//! | 2     | tagged packet on S1, generated before S2's packet|
//! | 3     | tagged packet on S2, generated before S1's packet|
//! | 4     | tagged packet on S2, generated after S1's packet |
//! | 5     | tagged packet on S1, S2 idle                     |
//! | 6     | tagged packet on S2, S1 idle                     |
//! | 7     | both servers idle                                |
//! | 8     | both servers carry up-to-date packets (no clock) |
//! | 9     | S1 carries an obsolete packet, S2 idle           |
//! | 10    | S2 carries an obsolete packet, S1 idle           |
//! | 11    | S1 up to date, S2 obsolete                       |
//! | 12    | S2 up to date, S1 obsolete                       |
//! | 13    | S1 up to date, S2 idle                           |
//! | 14    | S2 up to date, S1 idle                           |
//!
//! The two absorbing states (successful and unsuccessful reception) are not
//! enumerated; they are handled as absorption-vector targets. The recurrent
//! chain has four classes: both idle, only S1 busy, only S2 busy, both busy.
//!
//! The canonical order is ascending class, then clock, then S1 phase, then
//! S2 phase. Class 8 carries no freezing clock and stores `l = 0`.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

/// Transient state of the absorbing chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AmcState {
    pub class: u8,
    /// S1 service phase, `1..=n1`; `0` when S1 is idle.
    pub i: usize,
    /// S2 service phase, `1..=n2`; `0` when S2 is idle.
    pub j: usize,
    /// Freezing clock, `0..k`; always `0` for class 8.
    pub l: usize,
}

/// State of the recurrent chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RmcState {
    /// 1 = both idle, 2 = only S1 busy, 3 = only S2 busy, 4 = both busy.
    pub class: u8,
    pub i: usize,
    pub j: usize,
    pub l: usize,
}

/// An ordered state enumeration with a bidirectional index map.
#[derive(Debug, Clone)]
pub struct StateSpace<S> {
    n1: usize,
    n2: usize,
    k: usize,
    states: Vec<S>,
    index: HashMap<S, usize>,
}

impl<S: Copy + Eq + Hash + std::fmt::Debug> StateSpace<S> {
    fn new(n1: usize, n2: usize, k: usize, states: Vec<S>) -> Self {
        let index = states.iter().enumerate().map(|(idx, &s)| (s, idx)).collect();
        StateSpace { n1, n2, k, states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn index_of(&self, state: S) -> Result<usize> {
        self.index
            .get(&state)
            .copied()
            .ok_or_else(|| Error::StateSpace(format!("state {state:?} is not enumerated")))
    }

    pub fn state_of(&self, index: usize) -> Result<S> {
        self.states
            .get(index)
            .copied()
            .ok_or_else(|| Error::StateSpace(format!(
                "index {index} out of range for {} states",
                self.states.len()
            )))
    }

    /// Panicking lookup for internal construction loops, where a miss is a
    /// builder bug rather than a user error.
    pub(crate) fn idx(&self, state: S) -> usize {
        *self
            .index
            .get(&state)
            .unwrap_or_else(|| panic!("state {state:?} missing from enumeration"))
    }
}

fn check_params(n1: usize, n2: usize, k: usize) -> Result<()> {
    if n1 < 1 || n2 < 1 {
        return Err(Error::InvalidParameter(format!(
            "DPH orders must be >= 1, got N1 = {n1}, N2 = {n2}"
        )));
    }
    if k < 1 {
        return Err(Error::InvalidParameter(
            "the absorbing-chain construction requires k >= 1; \
             k = 0 (zero-wait) is covered by the simulator"
                .into(),
        ));
    }
    Ok(())
}

/// Number of transient states of the absorbing chain:
/// `M = k (6 N1 N2 + 3 (N1 + N2) + 1) + N1 N2`.
pub fn amc_state_count(n1: usize, n2: usize, k: usize) -> usize {
    k * (6 * n1 * n2 + 3 * (n1 + n2) + 1) + n1 * n2
}

/// Number of states of the recurrent chain:
/// `k (N1 N2 + N1 + N2 + 1)`.
pub fn rmc_state_count(n1: usize, n2: usize, k: usize) -> usize {
    k * (n1 * n2 + n1 + n2 + 1)
}

/// Enumerates the transient states of the absorbing chain in canonical
/// order. The two absorbing states are not part of the enumeration.
pub fn enumerate_amc(n1: usize, n2: usize, k: usize) -> Result<StateSpace<AmcState>> {
    check_params(n1, n2, k)?;
    let mut states = Vec::with_capacity(amc_state_count(n1, n2, k));
    for class in 1u8..=14 {
        let (i_range, j_range): (Vec<usize>, Vec<usize>) = match class {
            1..=4 | 11 | 12 => ((1..=n1).collect(), (1..=n2).collect()),
            5 | 9 | 13 => ((1..=n1).collect(), vec![0]),
            6 | 10 | 14 => (vec![0], (1..=n2).collect()),
            7 => (vec![0], vec![0]),
            8 => ((1..=n1).collect(), (1..=n2).collect()),
            _ => unreachable!(),
        };
        let l_range: Vec<usize> = if class == 8 { vec![0] } else { (0..k).collect() };
        for &l in &l_range {
            for &i in &i_range {
                for &j in &j_range {
                    states.push(AmcState { class, i, j, l });
                }
            }
        }
    }
    debug_assert_eq!(states.len(), amc_state_count(n1, n2, k));
    Ok(StateSpace::new(n1, n2, k, states))
}

/// Enumerates the states of the recurrent chain in canonical order.
pub fn enumerate_rmc(n1: usize, n2: usize, k: usize) -> Result<StateSpace<RmcState>> {
    check_params(n1, n2, k)?;
    let mut states = Vec::with_capacity(rmc_state_count(n1, n2, k));
    for class in 1u8..=4 {
        let (i_range, j_range): (Vec<usize>, Vec<usize>) = match class {
            1 => (vec![0], vec![0]),
            2 => ((1..=n1).collect(), vec![0]),
            3 => (vec![0], (1..=n2).collect()),
            4 => ((1..=n1).collect(), (1..=n2).collect()),
            _ => unreachable!(),
        };
        for l in 0..k {
            for &i in &i_range {
                for &j in &j_range {
                    states.push(RmcState { class, i, j, l });
                }
            }
        }
    }
    debug_assert_eq!(states.len(), rmc_state_count(n1, n2, k));
    Ok(StateSpace::new(n1, n2, k, states))
}
