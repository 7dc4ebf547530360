//! The Markov chain over perfect and near-perfect matchings of the complete
//! bipartite graph `K_{n,n}`.
//!
//! A matched pair that is not an edge of the instance costs one factor of the
//! activity `λ`; a near-perfect matching with hole `(u, v)` additionally
//! carries the hole weight `w(u, v)`. All weights live in natural-log space.
//!
//! One transition:
//!
//! 1. From a perfect matching, drop a uniformly chosen pair.
//! 2. From a near-perfect matching with hole `(u, v)`, pick a vertex `x`
//!    uniformly among the `2n` vertices (indices `< n` are rows, the rest
//!    columns):
//!    - `x` is `u` or `v`: add the pair `(u, v)`;
//!    - `x` is a column held by row `w`: replace `(w, x)` with `(u, x)`;
//!    - `x` is a row holding column `z`: replace `(x, z)` with `(x, v)`.
//! 3. Accept the proposal with probability `min(1, w(M') / w(M))`.
//!
//! Every proposal has a unique reverse proposal of equal probability, so the
//! Metropolis filter makes the chain reversible with respect to the weights.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{Matching, Matrix};

/// Largest `n` for which [`enumerate_states`] will list the state space.
pub const ENUMERATE_MAX_N: usize = 6;

/// Largest `n` accepted by [`exact_stationary`].
pub const STATIONARY_MAX_N: usize = 5;

/// Hole weights and activity, both as natural logs, plus the instance edges.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    n: usize,
    log_lambda: f64,
    log_w: Vec<f64>,
    non_edge: Vec<bool>,
}

impl WeightTable {
    /// Starting weights: every hole weight `n` and activity 1.
    pub fn initial(m: &Matrix) -> Self {
        let n = m.n();
        WeightTable::new(m, 0.0, vec![(n as f64).ln(); n * n]).expect("finite initial weights")
    }

    pub fn new(m: &Matrix, log_lambda: f64, log_w: Vec<f64>) -> Result<Self> {
        let n = m.n();
        if log_w.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} hole weights, got {}",
                n * n,
                log_w.len()
            )));
        }
        if !log_lambda.is_finite() || log_w.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite logs".into()));
        }
        let non_edge = (0..n * n).map(|i| !m.get(i / n, i % n)).collect();
        Ok(WeightTable {
            n,
            log_lambda,
            log_w,
            non_edge,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_lambda(&self) -> f64 {
        self.log_lambda
    }

    pub fn set_log_lambda(&mut self, log_lambda: f64) {
        assert!(log_lambda.is_finite());
        self.log_lambda = log_lambda;
    }

    #[inline]
    pub fn log_w(&self, u: usize, v: usize) -> f64 {
        self.log_w[u * self.n + v]
    }

    pub fn set_log_w(&mut self, u: usize, v: usize, value: f64) {
        assert!(value.is_finite());
        self.log_w[u * self.n + v] = value;
    }

    /// Hole weights in row-major order.
    pub fn log_ws(&self) -> &[f64] {
        &self.log_w
    }

    /// Whether `(u, v)` is absent from the instance and so costs a factor `λ`.
    #[inline]
    pub fn is_lambda_pair(&self, u: usize, v: usize) -> bool {
        self.non_edge[u * self.n + v]
    }

    fn lambda_pairs_in(&self, m: &Matching) -> usize {
        m.pairs()
            .filter(|&(u, v)| self.is_lambda_pair(u, v))
            .count()
    }
}

/// A matching together with its count of λ-pairs, maintained incrementally.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChainState {
    matching: Matching,
    lambda_edges: usize,
}

impl ChainState {
    pub fn new(matching: Matching, wt: &WeightTable) -> Self {
        assert_eq!(
            matching.n(),
            wt.n(),
            "matching and weight table disagree on n"
        );
        let lambda_edges = wt.lambda_pairs_in(&matching);
        ChainState {
            matching,
            lambda_edges,
        }
    }

    pub fn matching(&self) -> &Matching {
        &self.matching
    }

    pub fn into_matching(self) -> Matching {
        self.matching
    }

    /// Number of matched pairs that are not edges of the instance.
    pub fn lambda_edge_count(&self) -> usize {
        self.lambda_edges
    }

    /// Recounts λ-pairs from scratch.
    pub fn recount(&self, wt: &WeightTable) -> usize {
        wt.lambda_pairs_in(&self.matching)
    }

    /// A perfect matching made only of instance edges.
    pub fn is_graph_perfect(&self) -> bool {
        self.matching.is_perfect() && self.lambda_edges == 0
    }
}

/// `ln w(M)`: λ-pair count times `ln λ`, plus `ln w(hole)` when near-perfect.
pub fn log_weight(state: &ChainState, wt: &WeightTable) -> f64 {
    let base = state.lambda_edges as f64 * wt.log_lambda;
    match state.matching.hole() {
        None => base,
        Some((u, v)) => base + wt.log_w(u, v),
    }
}

/// A proposed transition, relative to the current state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    /// Drop the pair `(row, col)` from a perfect matching.
    Remove { row: usize, col: usize },
    /// Add the hole pair back.
    Fill,
    /// Move `col` from its current row to the hole's row.
    ShiftColumn { col: usize },
    /// Move `row` from its current column to the hole's column.
    ShiftRow { row: usize },
}

/// The move selected by drawing vertex `x` (rows `0..n`, columns `n..2n`)
/// from a near-perfect matching.
fn move_for_vertex(m: &Matching, x: usize) -> Move {
    let n = m.n();
    let (u, v) = m
        .hole()
        .expect("vertex moves start from a near-perfect matching");
    if x < n {
        if x == u {
            Move::Fill
        } else {
            Move::ShiftRow { row: x }
        }
    } else if x - n == v {
        Move::Fill
    } else {
        Move::ShiftColumn { col: x - n }
    }
}

/// Draws a proposal. Uses exactly one random draw.
pub fn propose_move<R: Rng + ?Sized>(state: &ChainState, rng: &mut R) -> Move {
    let m = &state.matching;
    let n = m.n();
    if m.is_perfect() {
        let row = rng.gen_range(0..n);
        Move::Remove {
            row,
            col: m.col_of(row).expect("perfect matching covers every row"),
        }
    } else {
        move_for_vertex(m, rng.gen_range(0..2 * n))
    }
}

/// All proposals from `state` with their probabilities. `Fill` appears twice
/// for near-perfect states, once per hole endpoint.
pub fn proposal_distribution(state: &ChainState) -> Vec<(Move, f64)> {
    let m = &state.matching;
    let n = m.n();
    if m.is_perfect() {
        let p = 1.0 / n as f64;
        m.pairs()
            .map(|(row, col)| (Move::Remove { row, col }, p))
            .collect()
    } else {
        let p = 1.0 / (2 * n) as f64;
        (0..2 * n).map(|x| (move_for_vertex(m, x), p)).collect()
    }
}

/// Change in λ-pair count and in log weight if `mv` were applied.
///
/// The λ factors of both matchings cancel down to `λ^(k' - k)`, so the log
/// ratio is `(k' - k) ln λ` plus the change in hole weight.
pub fn move_delta(state: &ChainState, mv: Move, wt: &WeightTable) -> (isize, f64) {
    let m = &state.matching;
    let lam = |u: usize, v: usize| wt.is_lambda_pair(u, v) as isize;
    let (dk, dhole) = match mv {
        Move::Remove { row, col } => (-lam(row, col), wt.log_w(row, col)),
        Move::Fill => {
            let (u, v) = m.hole().expect("near-perfect");
            (lam(u, v), -wt.log_w(u, v))
        }
        Move::ShiftColumn { col } => {
            let (u, v) = m.hole().expect("near-perfect");
            let w = m.row_of(col).expect("column is matched");
            (lam(u, col) - lam(w, col), wt.log_w(w, v) - wt.log_w(u, v))
        }
        Move::ShiftRow { row } => {
            let (u, v) = m.hole().expect("near-perfect");
            let z = m.col_of(row).expect("row is matched");
            (lam(row, v) - lam(row, z), wt.log_w(u, z) - wt.log_w(u, v))
        }
    };
    let dlog = if dk == 0 {
        dhole
    } else {
        dk as f64 * wt.log_lambda + dhole
    };
    (dk, dlog)
}

fn apply(state: &mut ChainState, mv: Move, dk: isize) {
    match mv {
        Move::Remove { row, col } => state.matching.remove_pair(row, col),
        Move::Fill => state.matching.fill_hole(),
        Move::ShiftColumn { col } => state.matching.shift_column(col),
        Move::ShiftRow { row } => state.matching.shift_row(row),
    }
    state.lambda_edges = state
        .lambda_edges
        .checked_add_signed(dk)
        .expect("λ-pair count stays nonnegative");
}

/// The state `mv` leads to.
pub fn apply_move(state: &ChainState, mv: Move, wt: &WeightTable) -> ChainState {
    let (dk, _) = move_delta(state, mv, wt);
    let mut next = state.clone();
    apply(&mut next, mv, dk);
    next
}

/// Draws a proposal `M'` without applying the Metropolis filter.
pub fn propose<R: Rng + ?Sized>(state: &ChainState, wt: &WeightTable, rng: &mut R) -> ChainState {
    let mv = propose_move(state, rng);
    apply_move(state, mv, wt)
}

/// One chain transition in place. Returns whether the proposal was accepted.
///
/// Uses one draw for the proposal and, only when the proposal lowers the
/// weight, one more for the acceptance test.
#[inline]
pub fn step<R: Rng + ?Sized>(state: &mut ChainState, wt: &WeightTable, rng: &mut R) -> bool {
    let mv = propose_move(state, rng);
    let (dk, dlog) = move_delta(state, mv, wt);
    let accept = dlog >= 0.0 || rng.gen::<f64>() < dlog.exp();
    if accept {
        apply(state, mv, dk);
    }
    accept
}

/// Takes `steps` transitions.
pub fn walk<R: Rng + ?Sized>(state: &mut ChainState, wt: &WeightTable, steps: u64, rng: &mut R) {
    for _ in 0..steps {
        step(state, wt, rng);
    }
}

/// Every perfect and near-perfect matching of `K_{n,n}`: the `n!` perfect
/// ones in lexicographic order, then for each hole in row-major order the
/// `(n-1)!` near-perfect ones, `(n + 1)·n!` in total.
pub fn enumerate_states(n: usize) -> Result<Vec<Matching>> {
    if n == 0 || n > ENUMERATE_MAX_N {
        return Err(Error::TooLarge {
            what: "state enumeration",
            n,
            limit: ENUMERATE_MAX_N,
        });
    }
    let mut out = Vec::new();
    let mut pairs = Vec::with_capacity(n);
    let mut used = vec![false; n];
    bijections(n, None, &mut used, 0, &mut pairs, &mut out);
    for u in 0..n {
        for v in 0..n {
            used[v] = true;
            bijections(n, Some(u), &mut used, 0, &mut pairs, &mut out);
            used[v] = false;
        }
    }
    Ok(out)
}

fn bijections(
    n: usize,
    skip_row: Option<usize>,
    used: &mut [bool],
    row: usize,
    pairs: &mut Vec<(usize, usize)>,
    out: &mut Vec<Matching>,
) {
    if row == n {
        out.push(Matching::from_pairs(n, pairs).expect("bijection is a valid matching"));
        return;
    }
    if skip_row == Some(row) {
        return bijections(n, skip_row, used, row + 1, pairs, out);
    }
    for col in 0..n {
        if !used[col] {
            used[col] = true;
            pairs.push((row, col));
            bijections(n, skip_row, used, row + 1, pairs, out);
            pairs.pop();
            used[col] = false;
        }
    }
}

/// Compact key for a matching: its row-to-column map in base `n + 1`, with
/// `n` standing for an unmatched row.
pub fn state_key(m: &Matching) -> u64 {
    let base = m.n() as u64 + 1;
    (0..m.n()).fold(0, |key, row| {
        key * base + m.col_of(row).map_or(m.n() as u64, |c| c as u64)
    })
}

/// The chain's transition matrix over [`enumerate_states`], in sparse rows.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    states: Vec<Matching>,
    index: HashMap<u64, usize>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    /// Builds every row from [`proposal_distribution`] and the acceptance
    /// rule of [`step`]; rejected mass stays on the diagonal.
    pub fn build(wt: &WeightTable) -> Result<Self> {
        let states = enumerate_states(wt.n())?;
        let index: HashMap<u64, usize> = states
            .iter()
            .enumerate()
            .map(|(i, m)| (state_key(m), i))
            .collect();
        let mut rows = Vec::with_capacity(states.len());
        for (i, m) in states.iter().enumerate() {
            let state = ChainState::new(m.clone(), wt);
            let mut row: HashMap<usize, f64> = HashMap::new();
            for (mv, p) in proposal_distribution(&state) {
                let (_, dlog) = move_delta(&state, mv, wt);
                let accept = if dlog >= 0.0 { 1.0 } else { dlog.exp() };
                let target = apply_move(&state, mv, wt);
                let j = index[&state_key(target.matching())];
                *row.entry(j).or_default() += p * accept;
                if accept < 1.0 {
                    *row.entry(i).or_default() += p * (1.0 - accept);
                }
            }
            let mut row: Vec<(usize, f64)> = row.into_iter().collect();
            row.sort_by_key(|&(j, _)| j);
            rows.push(row);
        }
        Ok(TransitionMatrix {
            states,
            index,
            rows,
        })
    }

    pub fn states(&self) -> &[Matching] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, m: &Matching) -> Option<usize> {
        self.index.get(&state_key(m)).copied()
    }

    /// Nonzero entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |&(k, _)| k)
            .map_or(0.0, |pos| row[pos].1)
    }

    /// `mu · P`.
    pub fn apply_left(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; mu.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let mass = mu[i];
            if mass == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += mass * p;
            }
        }
        out
    }

    /// Stationary distribution by power iteration on the lazy chain
    /// `(I + P) / 2`, which shares its fixed point with `P`. Iterates until
    /// the L1 residual `‖πP − π‖` stops improving below `tolerance`.
    pub fn stationary(&self, tolerance: f64, max_iterations: usize) -> Result<Vec<f64>> {
        let len = self.len();
        let mut pi = vec![1.0 / len as f64; len];
        let mut residual = f64::INFINITY;
        for _ in 0..max_iterations {
            let moved = self.apply_left(&pi);
            let r: f64 = moved.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            if r < tolerance && r >= residual {
                return Ok(pi);
            }
            residual = residual.min(r);
            let total: f64 = moved.iter().zip(&pi).map(|(a, b)| 0.5 * (a + b)).sum();
            for (p, m) in pi.iter_mut().zip(&moved) {
                *p = 0.5 * (*p + m) / total;
            }
        }
        if residual < tolerance {
            return Ok(pi);
        }
        Err(Error::NoConvergence {
            iterations: max_iterations,
            residual,
        })
    }
}

/// Exact stationary distribution over [`enumerate_states`]`(wt.n())`.
pub fn exact_stationary(wt: &WeightTable) -> Result<Vec<f64>> {
    if wt.n() > STATIONARY_MAX_N {
        return Err(Error::TooLarge {
            what: "exact stationary distribution",
            n: wt.n(),
            limit: STATIONARY_MAX_N,
        });
    }
    TransitionMatrix::build(wt)?.stationary(1e-12, 2_000_000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::SeedableRng;

    fn table(m: &Matrix, log_lambda: f64, log_w: f64) -> WeightTable {
        WeightTable::new(m, log_lambda, vec![log_w; m.n() * m.n()]).unwrap()
    }

    fn random_table(m: &Matrix, log_lambda: f64, seed: u64) -> WeightTable {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = m.n();
        let log_w = (0..n * n).map(|_| r.gen_range(-1.0..2.5)).collect();
        WeightTable::new(m, log_lambda, log_w).unwrap()
    }

    fn state(n: usize, pairs: &[(usize, usize)], wt: &WeightTable) -> ChainState {
        ChainState::new(Matching::from_pairs(n, pairs).unwrap(), wt)
    }

    #[test]
    fn log_weight_examples() {
        let m = Matrix::ones(3);
        let wt = WeightTable::initial(&m);
        let perfect = state(3, &[(0, 0), (1, 1), (2, 2)], &wt);
        assert_eq!(log_weight(&perfect, &wt), 0.0);
        let near = state(3, &[(1, 1), (2, 2)], &wt);
        assert!((log_weight(&near, &wt) - 3f64.ln()).abs() < 1e-15);

        let id = Matrix::identity(3);
        let lam = 0.25f64.ln();
        let wt = table(&id, lam, 0.0);
        let two_off = state(3, &[(0, 0), (1, 2), (2, 1)], &wt);
        assert_eq!(two_off.lambda_edge_count(), 2);
        assert!((log_weight(&two_off, &wt) - 2.0 * lam).abs() < 1e-15);
    }

    #[test]
    fn log_weight_matches_direct_product() {
        for n in 2..=4 {
            let m = Matrix::generate_random(n, n * n / 2 + 1, n as u64).unwrap();
            let lambda = 1.0
                / crate::params::factorial(n)
                    .to_string()
                    .parse::<f64>()
                    .unwrap();
            let wt = random_table(&m, lambda.ln(), 3);
            for matching in enumerate_states(n).unwrap() {
                let s = ChainState::new(matching.clone(), &wt);
                let mut direct: f64 = matching
                    .pairs()
                    .map(|(u, v)| if m.get(u, v) { 1.0 } else { lambda })
                    .product();
                if let Some((u, v)) = matching.hole() {
                    direct *= wt.log_w(u, v).exp();
                }
                let got = log_weight(&s, &wt).exp();
                assert!((got - direct).abs() <= 1e-12 * direct, "{matching:?}");
            }
        }
    }

    #[test]
    fn perfect_state_proposes_each_removal_equally() {
        let m = Matrix::ones(2);
        let wt = WeightTable::initial(&m);
        let s = state(2, &[(0, 0), (1, 1)], &wt);
        let mut r = rng::seeded(5);
        let trials = 20_000;
        let mut drop_first = 0;
        for _ in 0..trials {
            let p = propose(&s, &wt, &mut r);
            match p.matching().hole() {
                Some((0, 0)) => drop_first += 1,
                Some((1, 1)) => {}
                other => panic!("unexpected hole {other:?}"),
            }
        }
        let frac = drop_first as f64 / trials as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn hand_enumerated_moves() {
        let m = Matrix::ones(2);
        let wt = WeightTable::initial(&m);
        let s = state(2, &[(1, 1)], &wt);
        // vertex draws: row 0, row 1, column 0, column 1
        let expected = [
            (Move::Fill, vec![(0, 0), (1, 1)]),
            (Move::ShiftRow { row: 1 }, vec![(1, 0)]),
            (Move::Fill, vec![(0, 0), (1, 1)]),
            (Move::ShiftColumn { col: 1 }, vec![(0, 1)]),
        ];
        let dist = proposal_distribution(&s);
        assert_eq!(dist.len(), 4);
        for ((mv, p), (want_mv, want_pairs)) in dist.into_iter().zip(expected) {
            assert_eq!(mv, want_mv);
            assert_eq!(p, 0.25);
            let next = apply_move(&s, mv, &wt);
            assert_eq!(
                next.matching(),
                &Matching::from_pairs(2, &want_pairs).unwrap()
            );
        }
        let shifted = apply_move(&s, Move::ShiftColumn { col: 1 }, &wt);
        assert_eq!(shifted.matching().hole(), Some((1, 0)));
    }

    #[test]
    fn uniform_weights_always_accept() {
        let m = Matrix::generate_random(4, 9, 1).unwrap();
        let wt = table(&m, 0.0, 0.0);
        let mut s = ChainState::new(Matching::perfect(vec![0, 1, 2, 3]).unwrap(), &wt);
        let mut r = rng::seeded(2);
        for _ in 0..10_000 {
            assert!(step(&mut s, &wt, &mut r));
        }
    }

    #[test]
    fn move_delta_matches_weight_difference() {
        let m = Matrix::generate_random(4, 10, 9).unwrap();
        let wt = random_table(&m, -1.3, 4);
        for matching in enumerate_states(4).unwrap() {
            let s = ChainState::new(matching, &wt);
            for (mv, _) in proposal_distribution(&s) {
                let next = apply_move(&s, mv, &wt);
                let (dk, dlog) = move_delta(&s, mv, &wt);
                let want = log_weight(&next, &wt) - log_weight(&s, &wt);
                assert!((dlog - want).abs() < 1e-12);
                assert_eq!(
                    next.lambda_edge_count() as isize - s.lambda_edge_count() as isize,
                    dk
                );
                assert_eq!(next.lambda_edge_count(), next.recount(&wt));
            }
        }
    }

    #[test]
    fn incremental_lambda_count_survives_long_walk() {
        let m = Matrix::generate_random(5, 14, 3).unwrap();
        let wt = random_table(&m, -0.7, 8);
        let mut s = ChainState::new(Matching::perfect(vec![4, 3, 2, 1, 0]).unwrap(), &wt);
        let mut r = rng::seeded(10);
        for _ in 0..100 {
            walk(&mut s, &wt, 1_000, &mut r);
            assert_eq!(s.lambda_edge_count(), s.recount(&wt));
        }
    }

    #[test]
    fn state_counts() {
        assert_eq!(enumerate_states(1).unwrap().len(), 2);
        assert_eq!(enumerate_states(2).unwrap().len(), 6);
        assert_eq!(enumerate_states(3).unwrap().len(), 24);
        assert_eq!(enumerate_states(4).unwrap().len(), 120);
        assert!(enumerate_states(7).is_err());
        for n in 1..=5 {
            let states = enumerate_states(n).unwrap();
            let perfect = states.iter().filter(|m| m.is_perfect()).count();
            assert_eq!(perfect, (1..=n).product::<usize>());
            let keys: std::collections::HashSet<_> = states.iter().map(state_key).collect();
            assert_eq!(keys.len(), states.len());
        }
    }

    #[test]
    fn uniform_stationary_is_flat() {
        let wt = table(&Matrix::ones(2), 0.0, 0.0);
        let pi = exact_stationary(&wt).unwrap();
        assert_eq!(pi.len(), 6);
        for p in pi {
            assert!((p - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    fn check_stationary_matches_weights(wt: &WeightTable) {
        let pi = exact_stationary(wt).unwrap();
        let states = enumerate_states(wt.n()).unwrap();
        let logs: Vec<f64> = states
            .iter()
            .map(|m| log_weight(&ChainState::new(m.clone(), wt), wt))
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        for (p, l) in pi.iter().zip(&logs) {
            let want = (l - top).exp() / z;
            assert!((p - want).abs() <= 1e-9 * want, "{p} vs {want}");
        }
    }

    #[test]
    fn stationary_is_proportional_to_weight() {
        for n in 2..=4 {
            let m = Matrix::generate_random(n, (3 * n * n) / 4, 17 + n as u64).unwrap();
            check_stationary_matches_weights(&WeightTable::initial(&m));
            check_stationary_matches_weights(&random_table(&m, 0.1f64.ln(), n as u64));
            let deep = -crate::params::ln_factorial(n);
            check_stationary_matches_weights(&random_table(&m, deep, 99));
        }
    }

    #[test]
    fn transition_rows_are_stochastic() {
        let m = Matrix::generate_random(4, 11, 2).unwrap();
        let tm = TransitionMatrix::build(&random_table(&m, -2.0, 1)).unwrap();
        for i in 0..tm.len() {
            let sum: f64 = tm.row(i).iter().map(|&(_, p)| p).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transition_graph_is_strongly_connected() {
        let m = Matrix::generate_random(4, 8, 6).unwrap();
        let tm = TransitionMatrix::build(&random_table(&m, -3.0, 2)).unwrap();
        let reach = |forward: bool| {
            let mut seen = vec![false; tm.len()];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for (j, s) in seen.iter_mut().enumerate() {
                    let p = if forward {
                        tm.prob(i, j)
                    } else {
                        tm.prob(j, i)
                    };
                    if p > 0.0 && !*s {
                        *s = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        assert!(reach(true) && reach(false));
    }

    proptest::proptest! {
        #[test]
        fn detailed_balance_for_any_weights(
            n in 2usize..=3,
            mask in proptest::collection::vec(proptest::bool::ANY, 9),
            log_lambda in -4.0f64..0.0,
            log_w in proptest::collection::vec(-2.0f64..3.0, 9),
        ) {
            let m = Matrix::new(n, mask[..n * n].to_vec()).unwrap();
            let wt = WeightTable::new(&m, log_lambda, log_w[..n * n].to_vec()).unwrap();
            let tm = TransitionMatrix::build(&wt).unwrap();
            let logs: Vec<f64> = tm
                .states()
                .iter()
                .map(|s| log_weight(&ChainState::new(s.clone(), &wt), &wt))
                .collect();
            for x in 0..tm.len() {
                let sum: f64 = tm.row(x).iter().map(|&(_, p)| p).sum();
                proptest::prop_assert!((sum - 1.0).abs() < 1e-12);
                for &(y, p) in tm.row(x) {
                    let a = logs[x] + p.ln();
                    let b = logs[y] + tm.prob(y, x).ln();
                    proptest::prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn stationary_rejects_large_n() {
        let wt = WeightTable::initial(&Matrix::ones(6));
        assert!(matches!(exact_stationary(&wt), Err(Error::TooLarge { .. })));
    }
}
