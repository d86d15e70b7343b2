//! Sparse and dense linear algebra for the chain solvers.
//!
//! The transition matrices here are substochastic or stochastic and sparse;
//! resolvents like `(I - A)^(-1) v` are evaluated by Neumann-series solves
//! against specific right-hand sides, never by forming an inverse. Stationary
//! distributions are solved exactly (GTH state elimination) on the recurrent
//! class when it is small, and by damped power iteration otherwise.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl Csr {
    /// Builds from coordinate triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Csr {
        triplets.retain(|&(_, _, v)| v != 0.0);
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut indptr = vec![0usize; nrows + 1];
        for &(r, _, _) in &merged {
            indptr[r + 1] += 1;
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        let indices = merged.iter().map(|&(_, c, _)| c).collect();
        let data = merged.iter().map(|&(_, _, v)| v).collect();
        Csr { nrows, ncols, indptr, indices, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
        match self.indices[lo..hi].binary_search(&c) {
            Ok(pos) => self.data[lo + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[lo..hi].iter().copied().zip(self.data[lo..hi].iter().copied())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[p] * x[self.indices[p]];
            }
            y[r] = acc;
        }
        y
    }

    /// `y = x A` for a row vector `x`.
    pub fn vecmat(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let xv = x[r];
            if xv == 0.0 {
                continue;
            }
            for p in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[p]] += xv * self.data[p];
            }
        }
        y
    }
}

/// Solves `(I - A) x = b` for substochastic `A` by accumulating the Neumann
/// series `x = sum_m A^m b`. The residual of the partial sum is the next
/// term, so the stop criterion is exact.
pub fn solve_i_minus(a: &Csr, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut x = b.to_vec();
    let mut term = b.to_vec();
    for _ in 0..max_iter {
        term = a.matvec(&term);
        let mut term_max = 0.0f64;
        let mut x_max = 0.0f64;
        for (xi, ti) in x.iter_mut().zip(&term) {
            *xi += ti;
            term_max = term_max.max(ti.abs());
            x_max = x_max.max(xi.abs());
        }
        if term_max <= rel_tol * x_max.max(1.0) {
            return Ok(x);
        }
    }
    Err(Error::Numerical(format!(
        "Neumann solve did not converge within {max_iter} iterations"
    )))
}

/// Gaussian elimination with partial pivoting on a dense row-major matrix.
/// Consumes `m` (n x n) and returns the solution of `m x = rhs`.
pub fn solve_dense(m: &mut [f64], mut rhs: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    debug_assert_eq!(m.len(), n * n);
    debug_assert_eq!(rhs.len(), n);
    for col in 0..n {
        let mut pivot = col;
        let mut best = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 {
            return Err(Error::Numerical("singular matrix in dense solve".into()));
        }
        if pivot != col {
            for c in 0..n {
                m.swap(pivot * n + c, col * n + c);
            }
            rhs.swap(pivot, col);
        }
        let inv = 1.0 / m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            m[r * n + col] = 0.0;
            for c in col + 1..n {
                m[r * n + c] -= f * m[col * n + c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for c in col + 1..n {
            acc -= m[col * n + c] * rhs[c];
        }
        rhs[col] = acc / m[col * n + col];
    }
    Ok(rhs)
}

/// Stationary distribution of an irreducible stochastic matrix by
/// Grassmann-Taksar-Heyman state elimination (no subtractions of
/// like-signed quantities, so it is stable on nearly-degenerate chains).
fn stationary_gth(p: &mut [f64], n: usize) -> Vec<f64> {
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| p[k * n + j]).sum();
        for i in 0..k {
            p[i * n + k] /= s;
        }
        for i in 0..k {
            let f = p[i * n + k];
            if f == 0.0 {
                continue;
            }
            for j in 0..k {
                p[i * n + j] += f * p[k * n + j];
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for j in 1..n {
        let mut acc = p[j];
        for i in 1..j {
            acc += pi[i] * p[i * n + j];
        }
        pi[j] = acc;
    }
    let total: f64 = pi.iter().sum();
    for v in pi.iter_mut() {
        *v /= total;
    }
    pi
}

/// Size limit for the exact GTH path; larger recurrent classes fall back to
/// damped power iteration.
const GTH_LIMIT: usize = 1200;

/// Long-run state distribution of a row-stochastic matrix observed from
/// `start`. Unreachable states receive probability zero. When several
/// recurrent classes are reachable (deterministic service times produce
/// disjoint phase-alignment cycles), each class's stationary distribution
/// is weighted by the probability of being absorbed into it.
pub fn stationary(w: &Csr, start: usize, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = w.nrows();
    debug_assert_eq!(n, w.ncols());
    let reachable = reachable_from(w, start);
    let classes = terminal_classes(w, &reachable);
    if classes.is_empty() {
        return Err(Error::Numerical("no recurrent class reachable from the start".into()));
    }

    let weights = if classes.len() == 1 {
        vec![1.0]
    } else {
        absorption_weights(w, &reachable, &classes, start, tol, max_iter)?
    };

    let mut pi = vec![0.0; n];
    for (class, &weight) in classes.iter().zip(&weights) {
        if weight == 0.0 {
            continue;
        }
        let local = class_stationary(w, class, tol, max_iter)?;
        for (li, &g) in class.iter().enumerate() {
            pi[g] += weight * local[li];
        }
    }
    let res = residual(w, &pi);
    if res > 1e-10 {
        return Err(Error::Numerical(format!(
            "stationary solve residual {res:.3e} exceeds 1e-10"
        )));
    }
    Ok(pi)
}

fn reachable_from(w: &Csr, start: usize) -> Vec<bool> {
    let mut seen = vec![false; w.nrows()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(r) = stack.pop() {
        for (c, _) in w.row(r) {
            if !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    seen
}

/// Stationary distribution inside one closed irreducible class.
fn class_stationary(w: &Csr, class: &[usize], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let m = class.len();
    let mut local_index = vec![usize::MAX; w.nrows()];
    for (li, &g) in class.iter().enumerate() {
        local_index[g] = li;
    }
    if m <= GTH_LIMIT {
        let mut dense = vec![0.0; m * m];
        for (li, &g) in class.iter().enumerate() {
            for (c, v) in w.row(g) {
                let lc = local_index[c];
                // no row of a closed class leaves it
                debug_assert!(lc != usize::MAX);
                dense[li * m + lc] += v;
            }
        }
        Ok(stationary_gth(&mut dense, m))
    } else {
        let mut triplets = Vec::new();
        for (li, &g) in class.iter().enumerate() {
            for (c, v) in w.row(g) {
                triplets.push((li, local_index[c], v));
            }
        }
        let local = Csr::from_triplets(m, m, triplets);
        power_iteration(&local, tol, max_iter)
    }
}

/// Probability of absorption into each terminal class, starting from
/// `start`: solve `(I - P_TT) h = P_T->class 1` over the reachable
/// transient states.
fn absorption_weights(
    w: &Csr,
    reachable: &[bool],
    classes: &[Vec<usize>],
    start: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = w.nrows();
    let mut class_of = vec![usize::MAX; n];
    for (id, class) in classes.iter().enumerate() {
        for &g in class {
            class_of[g] = id;
        }
    }
    let transient: Vec<usize> = (0..n)
        .filter(|&g| reachable[g] && class_of[g] == usize::MAX)
        .collect();
    let mut t_index = vec![usize::MAX; n];
    for (li, &g) in transient.iter().enumerate() {
        t_index[g] = li;
    }
    let mut tt = Vec::new();
    for (li, &g) in transient.iter().enumerate() {
        for (c, v) in w.row(g) {
            if t_index[c] != usize::MAX {
                tt.push((li, t_index[c], v));
            }
        }
    }
    let p_tt = Csr::from_triplets(transient.len(), transient.len(), tt);

    let mut weights = Vec::with_capacity(classes.len());
    for (id, _) in classes.iter().enumerate() {
        if class_of[start] == id {
            weights.push(1.0);
            continue;
        }
        if class_of[start] != usize::MAX {
            weights.push(0.0);
            continue;
        }
        let rhs: Vec<f64> = transient
            .iter()
            .map(|&g| {
                w.row(g)
                    .filter(|&(c, _)| class_of[c] == id)
                    .map(|(_, v)| v)
                    .sum()
            })
            .collect();
        let h = solve_i_minus(&p_tt, &rhs, tol.min(1e-13), max_iter)?;
        weights.push(h[t_index[start]]);
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Numerical(format!(
            "absorption probabilities sum to {total}, expected 1"
        )));
    }
    Ok(weights)
}

pub fn residual(w: &Csr, pi: &[f64]) -> f64 {
    w.vecmat(pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Damped power iteration `x <- x (W + I) / 2` with periodic Aitken
/// extrapolation. The damping makes periodic chains converge; Aitken
/// shortens the geometric tail.
fn power_iteration(w: &Csr, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = w.nrows();
    let mut x = vec![1.0 / n as f64; n];
    let mut prev1: Vec<f64> = Vec::new();
    let mut prev2: Vec<f64> = Vec::new();
    for it in 0..max_iter {
        let mut y = w.vecmat(&x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = 0.5 * (*yi + xi);
        }
        normalize_l1(&mut y);
        if it % 32 == 31 {
            if !prev2.is_empty() {
                if let Some(accel) = aitken(&prev2, &prev1, &y) {
                    if residual(w, &accel) < residual(w, &y) {
                        y = accel;
                    }
                }
            }
            if residual(w, &y) < tol {
                return Ok(y);
            }
            prev2 = prev1;
            prev1 = y.clone();
        }
        x = y;
    }
    let res = residual(w, &x);
    if res < tol * 10.0 {
        return Ok(x);
    }
    Err(Error::Numerical(format!(
        "power iteration stalled after {max_iter} iterations, residual {res:.3e}"
    )))
}

fn normalize_l1(x: &mut [f64]) {
    let total: f64 = x.iter().sum();
    if total > 0.0 {
        for v in x.iter_mut() {
            *v /= total;
        }
    }
}

/// Componentwise Aitken delta-squared extrapolation of three iterates.
fn aitken(x0: &[f64], x1: &[f64], x2: &[f64]) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(x2.len());
    for i in 0..x2.len() {
        let d1 = x1[i] - x0[i];
        let d2 = x2[i] - x1[i];
        let denom = d2 - d1;
        let v = if denom.abs() > 1e-14 * (x2[i].abs() + 1e-300) {
            x2[i] - d2 * d2 / denom
        } else {
            x2[i]
        };
        out.push(v.max(0.0));
    }
    let total: f64 = out.iter().sum();
    if total <= 0.0 {
        return None;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
    Some(out)
}

/// Terminal strongly connected classes among the reachable states, each in
/// ascending state order, the list ordered by smallest member.
fn terminal_classes(w: &Csr, reachable: &[bool]) -> Vec<Vec<usize>> {
    use petgraph::graph::DiGraph;

    let n = w.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, w.nnz());
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for r in 0..n {
        if !reachable[r] {
            continue;
        }
        for (c, _) in w.row(r) {
            if c != r {
                graph.add_edge(nodes[r], nodes[c], ());
            }
        }
    }
    let sccs = petgraph::algo::tarjan_scc(&graph);
    let mut scc_of = vec![usize::MAX; n];
    for (id, scc) in sccs.iter().enumerate() {
        for node in scc {
            scc_of[node.index()] = id;
        }
    }
    let mut has_exit = vec![false; sccs.len()];
    for r in 0..n {
        if !reachable[r] {
            continue;
        }
        for (c, _) in w.row(r) {
            if scc_of[r] != scc_of[c] {
                has_exit[scc_of[r]] = true;
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|&(id, scc)| !has_exit[id] && reachable[scc[0].index()])
        .map(|(_, scc)| {
            let mut states: Vec<usize> = scc.iter().map(|node| node.index()).collect();
            states.sort_unstable();
            states
        })
        .collect();
    classes.sort_by_key(|c| c[0]);
    classes
}
