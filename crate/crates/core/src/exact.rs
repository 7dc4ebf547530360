//! Exact permanents.
//!
//! [`permanent_naive`] sums over permutations and is the oracle the faster
//! routine is tested against. [`permanent_ryser`] evaluates
//!
//! ```text
//! per(A) = Σ_{∅ ≠ S ⊆ cols} (-1)^(n - |S|) Π_i Σ_{j ∈ S} a_ij
//! ```
//!
//! visiting column subsets in reflected Gray-code order so each step adds or
//! removes one column and every row sum changes by a single entry.

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest side length [`permanent_naive`] accepts.
pub const NAIVE_MAX_N: usize = 12;

/// Largest side length the 64-bit subset masks can index.
pub const GRAY_MAX_N: usize = 63;

/// Sum over all permutations of the product of selected entries.
pub fn permanent_naive(m: &Matrix) -> Result<BigUint> {
    let n = m.n();
    if n > NAIVE_MAX_N {
        return Err(Error::TooLarge {
            what: "the permutation-sum permanent",
            n,
            limit: NAIVE_MAX_N,
        });
    }
    let mut used = vec![false; n];
    Ok(BigUint::from(count_from_row(m, 0, &mut used)))
}

// A permutation whose partial product is already zero contributes nothing,
// so branches stop at the first 0-entry.
fn count_from_row(m: &Matrix, row: usize, used: &mut [bool]) -> u64 {
    if row == m.n() {
        return 1;
    }
    let mut total = 0;
    for col in 0..m.n() {
        if !used[col] && m.get(row, col) {
            used[col] = true;
            total += count_from_row(m, row + 1, used);
            used[col] = false;
        }
    }
    total
}

/// Ryser's formula with Gray-code column updates, `O(n · 2^n)` work.
pub fn permanent_ryser(m: &Matrix) -> Result<BigUint> {
    let n = m.n();
    let mut row_sums = vec![0u64; n];
    let mut acc = SignedAccumulator::default();
    // parity of |S|, flipped on every Gray step
    let mut odd = false;
    for step in gray_code_subsets(n)? {
        odd = !odd;
        for (r, sum) in row_sums.iter_mut().enumerate() {
            if m.get(r, step.flipped) {
                if step.added {
                    *sum += 1;
                } else {
                    *sum -= 1;
                }
            }
        }
        if row_sums.contains(&0) {
            continue;
        }
        // (-1)^(n - |S|) is positive exactly when |S| and n share parity
        let positive = odd == (n % 2 == 1);
        acc.add_product(&row_sums, positive);
    }
    let total = acc.finish();
    debug_assert!(!total.is_negative());
    Ok(total
        .to_biguint()
        .expect("permanent of a 0/1 matrix is nonnegative"))
}

/// Running signed sum that stays in `i128` until it would overflow.
#[derive(Default)]
struct SignedAccumulator {
    fast: i128,
    spill: BigInt,
}

impl SignedAccumulator {
    fn add_product(&mut self, factors: &[u64], positive: bool) {
        let product = factors
            .iter()
            .try_fold(1i128, |p, &f| p.checked_mul(f as i128));
        match product {
            Some(p) => {
                let term = if positive { p } else { -p };
                match self.fast.checked_add(term) {
                    Some(sum) => self.fast = sum,
                    None => {
                        self.spill += BigInt::from(self.fast) + BigInt::from(term);
                        self.fast = 0;
                    }
                }
            }
            None => {
                let p: BigInt = factors.iter().map(|&f| BigInt::from(f)).product();
                if positive {
                    self.spill += p;
                } else {
                    self.spill -= p;
                }
            }
        }
    }

    fn finish(self) -> BigInt {
        self.spill + BigInt::from(self.fast)
    }
}

/// One step of the reflected Gray code over nonempty subsets of `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrayStep {
    /// Subset after this step, bit `j` set when element `j` is present.
    pub mask: u64,
    /// The element that changed relative to the previous subset.
    pub flipped: usize,
    /// Whether `flipped` entered (true) or left (false) the subset.
    pub added: bool,
}

/// Iterator over all `2^n - 1` nonempty subsets in reflected Gray order,
/// starting from `{0}`. The first step is reported as adding element 0 to
/// the empty set.
#[derive(Debug, Clone)]
pub struct GraySubsets {
    counter: u64,
    end: u64,
}

pub fn gray_code_subsets(n: usize) -> Result<GraySubsets> {
    if n == 0 || n > GRAY_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "Gray-code subsets need 1 <= n <= {GRAY_MAX_N}, got {n}"
        )));
    }
    Ok(GraySubsets {
        counter: 1,
        end: 1u64 << n,
    })
}

impl Iterator for GraySubsets {
    type Item = GrayStep;

    fn next(&mut self) -> Option<GrayStep> {
        if self.counter >= self.end {
            return None;
        }
        let k = self.counter;
        self.counter += 1;
        let mask = k ^ (k >> 1);
        let flipped = k.trailing_zeros() as usize;
        Some(GrayStep {
            mask,
            flipped,
            added: mask & (1 << flipped) != 0,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.counter).to_usize();
        (left.unwrap_or(usize::MAX), left)
    }
}
