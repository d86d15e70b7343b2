//! Discrete phase-type (DPH) service-time distributions.
//!
//! A DPH random variable is the absorption time of a discrete-time Markov
//! chain with `N` transient phases, initial phase vector `alpha`, and
//! substochastic phase-transition matrix `B`. The absorption vector is
//! `b = (I - B) 1`, and the mass function is `P(T = h) = alpha B^(h-1) b`
//! for `h >= 1`. Service always takes at least one slot: `alpha` carries no
//! mass at time zero.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;

const PROB_TOL: f64 = 1e-12;

/// A discrete phase-type distribution `(alpha, B)` of order `N`.
///
/// Phases are indexed `0..N`. Values are immutable after construction and
/// safe to share across threads; sampling takes a caller-owned RNG.
#[derive(Debug, Clone, PartialEq)]
pub struct DphDistribution {
    order: usize,
    alpha: Vec<f64>,
    trans: Vec<f64>, // row-major N x N
    absorb: Vec<f64>,
    alpha_nz: Vec<(usize, f64)>,
    row_nz: Vec<Vec<(usize, f64)>>,
}

impl DphDistribution {
    /// General constructor; validates every type invariant.
    pub fn new(alpha: Vec<f64>, trans: Vec<f64>) -> Result<Self> {
        let order = alpha.len();
        if order == 0 {
            return Err(Error::InvalidDistribution("order must be at least 1".into()));
        }
        if trans.len() != order * order {
            return Err(Error::InvalidDistribution(format!(
                "transition matrix has {} entries, expected {}",
                trans.len(),
                order * order
            )));
        }
        let mut alpha_sum = 0.0;
        for (i, &a) in alpha.iter().enumerate() {
            if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&a) {
                return Err(Error::InvalidDistribution(format!(
                    "alpha[{i}] = {a} is not a probability"
                )));
            }
            alpha_sum += a;
        }
        if (alpha_sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "alpha sums to {alpha_sum}, expected 1"
            )));
        }
        let mut absorb = Vec::with_capacity(order);
        for r in 0..order {
            let mut row_sum = 0.0;
            for c in 0..order {
                let v = trans[r * order + c];
                if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&v) {
                    return Err(Error::InvalidDistribution(format!(
                        "B[{r},{c}] = {v} is not a probability"
                    )));
                }
                row_sum += v;
            }
            if row_sum > 1.0 + PROB_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "row {r} of B sums to {row_sum} > 1"
                )));
            }
            absorb.push((1.0 - row_sum).clamp(0.0, 1.0));
        }
        if !absorption_certain(order, &trans, &absorb) {
            return Err(Error::InvalidDistribution(
                "absorption is not certain: some phase never reaches the absorbing state".into(),
            ));
        }
        let alpha_nz = alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        let row_nz = (0..order)
            .map(|r| {
                (0..order)
                    .filter(|&c| trans[r * order + c] > 0.0)
                    .map(|c| (c, trans[r * order + c]))
                    .collect()
            })
            .collect();
        Ok(Self { order, alpha, trans, absorb, alpha_nz, row_nz })
    }

    /// Geometric service time on `{1, 2, ...}` with success probability `p`:
    /// order-1 DPH with `alpha = [1]`, `B = [[1 - p]]`, mean `1/p`.
    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "geometric success probability must be in (0, 1], got {p}"
            )));
        }
        Self::new(vec![1.0], vec![1.0 - p])
    }

    /// Canonical representation of a finite-support PMF on `{1, ..., N}`:
    /// `alpha = e_1` and a superdiagonal `B` with
    /// `B[w][w+1] = 1 - u(w) / sum_{a >= w} u(a)`.
    ///
    /// Masses must be nonnegative and total 1 within 1e-12 (the total is then
    /// renormalized); support values must be positive. Interior zero masses
    /// are allowed and yield pass-through phases.
    pub fn from_pmf(masses: &BTreeMap<u64, f64>) -> Result<Self> {
        let mut total = 0.0;
        let mut max_w = 0u64;
        for (&w, &m) in masses {
            if w == 0 {
                return Err(Error::InvalidDistribution(
                    "PMF has mass at w = 0; support must be {1, 2, ...}".into(),
                ));
            }
            if m < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "PMF mass at w = {w} is negative ({m})"
                )));
            }
            total += m;
            if m > 0.0 {
                max_w = max_w.max(w);
            }
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "PMF masses sum to {total}, expected 1 within 1e-12"
            )));
        }
        if max_w == 0 {
            return Err(Error::InvalidDistribution("PMF has no positive mass".into()));
        }
        let order = max_w as usize;
        let mut u = vec![0.0; order];
        for (&w, &m) in masses {
            if w <= max_w {
                u[w as usize - 1] = m / total;
            }
        }
        // Backward tail sums S(w) = sum_{a >= w} u(a).
        let mut tail = vec![0.0; order + 1];
        for w in (0..order).rev() {
            tail[w] = tail[w + 1] + u[w];
        }
        let mut trans = vec![0.0; order * order];
        for w in 0..order - 1 {
            trans[w * order + w + 1] = 1.0 - u[w] / tail[w];
        }
        let mut alpha = vec![0.0; order];
        alpha[0] = 1.0;
        Self::new(alpha, trans)
    }

    /// Uniform service time on `{a, ..., b}`.
    pub fn uniform(a: u64, b: u64) -> Result<Self> {
        if a < 1 || b < a {
            return Err(Error::InvalidParameter(format!(
                "uniform support requires 1 <= a <= b, got a = {a}, b = {b}"
            )));
        }
        let n = (b - a + 1) as f64;
        let masses: BTreeMap<u64, f64> = (a..=b).map(|w| (w, 1.0 / n)).collect();
        Self::from_pmf(&masses)
    }

    /// Symmetric discrete triangular service time with the given mean and
    /// variance.
    ///
    /// The family is centered at an integer or half-integer mean `c` with
    /// weights proportional to `r + 1 - |w - c|` on `{c - r, ..., c + r}`;
    /// the variance is swept by the half-width `r`, and a target variance
    /// between two adjacent half-widths is realized by mixing their PMFs.
    /// `variance = 0` degenerates to the deterministic distribution at `c`.
    pub fn triangular(mean: f64, variance: f64) -> Result<Self> {
        if mean < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "triangular mean must be >= 1, got {mean}"
            )));
        }
        if variance < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "triangular variance must be >= 0, got {variance}"
            )));
        }
        let twice = mean * 2.0;
        if (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "triangular mean must be an integer or half-integer, got {mean}"
            )));
        }
        let twice = twice.round() as u64;
        let steps: Vec<(u64, f64)> = if twice % 2 == 0 {
            // Integer mean c: half-widths r = 0..=c-1, variance r(r+2)/6.
            let c = twice / 2;
            (0..c).map(|r| (r, r as f64 * (r as f64 + 2.0) / 6.0)).collect()
        } else {
            // Half-integer mean: s points per side, variance (2s^2+2s-1)/12.
            let s_max = (twice - 1) / 2;
            (1..=s_max)
                .map(|s| {
                    let sf = s as f64;
                    (s, (2.0 * sf * sf + 2.0 * sf - 1.0) / 12.0)
                })
                .collect()
        };
        if steps.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "no triangular distribution with mean {mean} has support within {{1, 2, ...}}"
            )));
        }
        let v_min = steps.first().unwrap().1;
        let v_max = steps.last().unwrap().1;
        if variance < v_min - 1e-9 || variance > v_max + 1e-9 {
            let nearest = variance.clamp(v_min, v_max);
            return Err(Error::InvalidParameter(format!(
                "variance {variance} is unattainable for triangular mean {mean}; \
                 attainable range is [{v_min}, {v_max}], nearest attainable is {nearest}"
            )));
        }
        // Locate the bracketing half-widths and mix their PMFs.
        let mut masses: BTreeMap<u64, f64> = BTreeMap::new();
        let pos = steps.iter().position(|&(_, v)| variance <= v + 1e-9).unwrap();
        if (steps[pos].1 - variance).abs() <= 1e-9 || pos == 0 {
            accumulate_triangular(&mut masses, twice, steps[pos].0, 1.0);
        } else {
            let (lo_w, lo_v) = steps[pos - 1];
            let (hi_w, hi_v) = steps[pos];
            let lambda = (hi_v - variance) / (hi_v - lo_v);
            accumulate_triangular(&mut masses, twice, lo_w, lambda);
            accumulate_triangular(&mut masses, twice, hi_w, 1.0 - lambda);
        }
        Self::from_pmf(&masses)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Absorption probability from a phase.
    pub fn absorb_prob(&self, phase: usize) -> f64 {
        self.absorb[phase]
    }

    pub fn trans_prob(&self, from: usize, to: usize) -> f64 {
        self.trans[from * self.order + to]
    }

    /// Nonzero initial-phase probabilities `(phase, alpha[phase])`.
    pub fn alpha_nonzeros(&self) -> &[(usize, f64)] {
        &self.alpha_nz
    }

    /// Nonzero phase transitions `(to, B[from][to])` out of a phase.
    pub fn trans_nonzeros(&self, from: usize) -> &[(usize, f64)] {
        &self.row_nz[from]
    }

    /// `P(T = h) = alpha B^(h-1) b`.
    pub fn pmf(&self, h: u64) -> Result<f64> {
        if h < 1 {
            return Err(Error::InvalidParameter(format!("PMF argument must be >= 1, got {h}")));
        }
        let mut row = self.alpha.clone();
        for _ in 1..h {
            row = self.apply_trans(&row);
        }
        Ok(row.iter().zip(&self.absorb).map(|(x, b)| x * b).sum())
    }

    /// `E[T] = alpha (I - B)^(-1) 1`.
    pub fn mean(&self) -> f64 {
        let x = self.fundamental_solve(&vec![1.0; self.order]);
        dot(&self.alpha, &x)
    }

    /// Variance from the factorial-moment identity
    /// `E[T^2] = alpha (I - B)^(-2) (I + B) 1`.
    pub fn variance(&self) -> f64 {
        let ones = vec![1.0; self.order];
        let mean = dot(&self.alpha, &self.fundamental_solve(&ones));
        // (I + B) 1 = 2*1 - b
        let w: Vec<f64> = self.absorb.iter().map(|b| 2.0 - b).collect();
        let z = self.fundamental_solve(&self.fundamental_solve(&w));
        let second = dot(&self.alpha, &z);
        second - mean * mean
    }

    /// Draws one absorption time by simulating the phase chain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let mut phase = self.draw_initial(rng);
        let mut t = 1u64;
        while let Some(next) = self.step_phase(phase, rng) {
            phase = next;
            t += 1;
        }
        t
    }

    /// Draws an initial phase from `alpha`.
    pub fn draw_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for &(phase, a) in &self.alpha_nz {
            cum += a;
            if u < cum {
                return phase;
            }
        }
        self.alpha_nz.last().expect("alpha has a nonzero entry").0
    }

    /// Advances the phase chain one slot: `Some(next)` continues service,
    /// `None` absorbs (service completes this slot).
    pub fn step_phase<R: Rng + ?Sized>(&self, phase: usize, rng: &mut R) -> Option<usize> {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for &(to, p) in &self.row_nz[phase] {
            cum += p;
            if u < cum {
                return Some(to);
            }
        }
        None
    }

    /// Iterator over the survival probabilities `P(T > h)` for `h = 0, 1, ...`.
    pub fn survival_probabilities(&self) -> Survival<'_> {
        Survival { dist: self, row: self.alpha.clone() }
    }

    fn apply_trans(&self, row: &[f64]) -> Vec<f64> {
        let n = self.order;
        let mut out = vec![0.0; n];
        for r in 0..n {
            let x = row[r];
            if x == 0.0 {
                continue;
            }
            for &(c, v) in &self.row_nz[r] {
                out[c] += x * v;
            }
        }
        out
    }

    /// Solves `(I - B) x = rhs`.
    fn fundamental_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.order;
        let mut m = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                m[r * n + c] = if r == c { 1.0 } else { 0.0 } - self.trans[r * n + c];
            }
        }
        linalg::solve_dense(&mut m, rhs.to_vec(), n)
            .expect("(I - B) is nonsingular for a valid DPH")
    }
}

/// Iterator over `P(T > h)`, starting at `h = 0`.
pub struct Survival<'a> {
    dist: &'a DphDistribution,
    row: Vec<f64>,
}

impl Iterator for Survival<'_> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let p = self.row.iter().sum();
        self.row = self.dist.apply_trans(&self.row);
        Some(p)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Every phase must reach some phase with positive absorption probability.
fn absorption_certain(order: usize, trans: &[f64], absorb: &[f64]) -> bool {
    let mut reached = vec![false; order];
    let mut stack: Vec<usize> =
        (0..order).filter(|&i| absorb[i] > PROB_TOL).collect();
    for &i in &stack {
        reached[i] = true;
    }
    while let Some(j) = stack.pop() {
        for i in 0..order {
            if !reached[i] && trans[i * order + j] > 0.0 {
                reached[i] = true;
                stack.push(i);
            }
        }
    }
    reached.iter().all(|&r| r)
}

/// Adds `weight` times the triangular PMF with the given doubled mean and
/// half-width parameter into `masses`. For integer means the parameter is the
/// integer half-width `r`; for half-integer means it is the per-side point
/// count `s`.
fn accumulate_triangular(masses: &mut BTreeMap<u64, f64>, twice_mean: u64, param: u64, weight: f64) {
    if weight == 0.0 {
        return;
    }
    if twice_mean % 2 == 0 {
        let c = (twice_mean / 2) as i64;
        let r = param as i64;
        let norm = ((r + 1) * (r + 1)) as f64;
        for d in -r..=r {
            let w = (c + d) as u64;
            let mass = (r + 1 - d.abs()) as f64 / norm;
            *masses.entry(w).or_insert(0.0) += weight * mass;
        }
    } else {
        let s = param as i64;
        let norm = (s * (s + 1)) as f64;
        // Support is {c - s + 0.5, ..., c - 0.5, c + 0.5, ..., c + s - 0.5}
        // for c = twice_mean / 2; in integers: (twice_mean +/- (2j - 1)) / 2.
        for j in 1..=s {
            let mass = (s + 1 - j) as f64 / norm;
            let lo = (twice_mean as i64 - (2 * j - 1)) / 2;
            let hi = (twice_mean as i64 + (2 * j - 1)) / 2;
            *masses.entry(lo as u64).or_insert(0.0) += weight * mass;
            *masses.entry(hi as u64).or_insert(0.0) += weight * mass;
        }
    }
}
