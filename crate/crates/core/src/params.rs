//! Closed-form sampling parameters of the approximation scheme.
//!
//! Everything here is plain `f64` arithmetic on `ln` values, with `ln(n!)`
//! summed term by term. Fractional counts are rounded up, since a bound on
//! a number of samples or steps is a minimum. Step counts are stored as
//! `BigUint` because their products overflow `u64` for moderate `n`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{FromPrimitive, One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln(n!)` by direct summation of `ln k`.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n as u64).map(BigUint::from).product()
}

/// Number of perfect matchings times hole positions plus one, `(n² + 1)·n!`.
///
/// This is also the total chain weight when every hole weight is `n` and the
/// activity is 1, which is where the estimator's telescoping product starts.
pub fn state_space_size(n: usize) -> BigUint {
    BigUint::from(n * n + 1) * factorial(n)
}

/// Activities (as natural logs) visited by the annealing schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    n: usize,
    log_lambdas: Vec<f64>,
}

impl PhaseSchedule {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `ln λ_0 = 0` followed by one entry per phase.
    pub fn log_lambdas(&self) -> &[f64] {
        &self.log_lambdas
    }

    /// Number of phases, one less than the number of activities.
    pub fn phases(&self) -> usize {
        self.log_lambdas.len() - 1
    }

    pub fn terminal_log_lambda(&self) -> f64 {
        *self.log_lambdas.last().expect("schedule is never empty")
    }
}

/// Replays the annealing loop in log space.
///
/// Starting from `λ = 1` with `i = n`, each phase multiplies `λ` by
/// `2^(-1/(2i))`. While `i > 2`, crossing below `(n/n!)^(1/(i-1))` clamps `λ`
/// to that threshold and decrements `i`. The loop stops once `λ <= 1/n!`.
pub fn phase_schedule(n: usize) -> Result<PhaseSchedule> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "phase schedule needs n >= 2, got {n}"
        )));
    }
    let ln_fact = ln_factorial(n);
    let ln_n = (n as f64).ln();
    let ln2 = std::f64::consts::LN_2;

    let mut log_lambdas = vec![0.0];
    let mut log_lambda = 0.0;
    let mut i = n;
    while log_lambda > -ln_fact {
        log_lambda -= ln2 / (2 * i) as f64;
        if i > 2 {
            let threshold = (ln_n - ln_fact) / (i - 1) as f64;
            if log_lambda < threshold {
                log_lambda = threshold;
                i -= 1;
            }
        }
        log_lambdas.push(log_lambda);
    }
    Ok(PhaseSchedule { n, log_lambdas })
}

/// Phase count from the three-term closed form
///
/// ```text
/// ⌈2n/((n-1) ln 2) · ln(n!/n)⌉ + Σ_{i=2}^{n-2} ⌈2/(i ln 2) · ln((n-1)!)⌉ + ⌈2/ln 2 · ln(n!·n)⌉
/// ```
///
/// The first term is written with `ln(n!/n)` so that it is positive.
pub fn phase_count_closed_form(n: usize) -> Result<usize> {
    let (first, middle, last) = phase_terms(n)?;
    let middle: usize = middle.iter().map(|t| t.ceil() as usize).sum();
    Ok(first.ceil() as usize + middle + last.ceil() as usize)
}

/// The closed form without ceilings; the exact count lies in
/// `[unceiled, unceiled + n - 1]`.
pub fn phase_count_unceiled(n: usize) -> Result<f64> {
    let (first, middle, last) = phase_terms(n)?;
    Ok(first + middle.iter().sum::<f64>() + last)
}

fn phase_terms(n: usize) -> Result<(f64, Vec<f64>, f64)> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "closed-form phase count needs n >= 4, got {n}"
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let ln_fact = ln_factorial(n);
    let ln_fact_prev = ln_factorial(n - 1);
    let ln_n = (n as f64).ln();
    let first = (2 * n) as f64 / ((n - 1) as f64 * ln2) * (ln_fact - ln_n);
    let middle = (2..=n - 2)
        .map(|i| 2.0 / (i as f64 * ln2) * ln_fact_prev)
        .collect();
    let last = 2.0 / ln2 * (ln_fact + ln_n);
    Ok((first, middle, last))
}

/// Divisors applied to the four relaxable sampling parameters: phase sample
/// count, phase resampling interval, final sample count, final resampling
/// interval. The phase count and initialization time are never relaxed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelaxationFactors {
    pub r_s_phase: u64,
    pub r_t_phase: u64,
    pub r_s_final: u64,
    pub r_t_final: u64,
}

impl RelaxationFactors {
    pub const IDENTITY: RelaxationFactors = RelaxationFactors {
        r_s_phase: 1,
        r_t_phase: 1,
        r_s_final: 1,
        r_t_final: 1,
    };

    pub fn new(r_s_phase: u64, r_t_phase: u64, r_s_final: u64, r_t_final: u64) -> Result<Self> {
        let r = RelaxationFactors {
            r_s_phase,
            r_t_phase,
            r_s_final,
            r_t_final,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "relaxation factors must be >= 1, got {self}"
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [u64; 4] {
        [
            self.r_s_phase,
            self.r_t_phase,
            self.r_s_final,
            self.r_t_final,
        ]
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Componentwise product, saturating at `u64::MAX`.
    pub fn compose(&self, other: &RelaxationFactors) -> RelaxationFactors {
        RelaxationFactors {
            r_s_phase: self.r_s_phase.saturating_mul(other.r_s_phase),
            r_t_phase: self.r_t_phase.saturating_mul(other.r_t_phase),
            r_s_final: self.r_s_final.saturating_mul(other.r_s_final),
            r_t_final: self.r_t_final.saturating_mul(other.r_t_final),
        }
    }
}

impl Default for RelaxationFactors {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl fmt::Display for RelaxationFactors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.r_s_phase, self.r_t_phase, self.r_s_final, self.r_t_final
        )
    }
}

/// Parses `a,b,c,d` (thousands separators `_` are accepted).
impl FromStr for RelaxationFactors {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "expected four comma-separated relaxation factors, got {s:?}"
            )));
        }
        let mut values = [0u64; 4];
        for (slot, part) in values.iter_mut().zip(&parts) {
            *slot = part.replace('_', "").parse().map_err(|_| {
                Error::InvalidArgument(format!("relaxation factor {part:?} is not an integer"))
            })?;
        }
        RelaxationFactors::new(values[0], values[1], values[2], values[3])
    }
}

/// Every sampling parameter of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub n: usize,
    pub epsilon: f64,
    /// Number of weight-estimation phases.
    pub phases: usize,
    /// Initialization steps taken once at the start of every stage.
    #[serde(with = "crate::serde_big")]
    pub tau_init: BigUint,
    /// Steps between consecutive samples within a phase.
    #[serde(with = "crate::serde_big")]
    pub tau_resample_phase: BigUint,
    /// Steps between consecutive samples in the final refinement.
    #[serde(with = "crate::serde_big")]
    pub tau_resample_final: BigUint,
    pub samples_phase: u64,
    pub samples_final: u64,
    pub delta_phase: f64,
    pub delta_final: f64,
    /// Sample count needed to estimate hole weights, before rounding.
    pub samples_phase_weight_bound: f64,
    /// Sample count needed to bound the variance of the ratio product,
    /// before rounding.
    pub samples_phase_counting_bound: f64,
    pub relax: RelaxationFactors,
}

/// Multiplier `336(n⁴ + n²)` shared by every mixing-time bound.
fn mixing_factor(n: usize) -> f64 {
    let n = n as u128;
    (336 * (n.pow(4) + n.pow(2))) as f64
}

/// Samples per phase for the hole-weight estimates to hold jointly:
/// `475(n² + 1) · ln(12 l (n² + 1))`.
///
/// The argument of the logarithm is `1/η` with per-estimate failure
/// probability `η = 1/(12 l (n² + 1))`. The derivation's Chernoff step would
/// put `2/η` there; the reference step totals at n = 4, 68 and 100 are
/// reproduced exactly only with `1/η`, so that is what is used. For
/// `n <= 10` at `ε = 0.5` the counting bound dominates and the choice is
/// invisible.
pub fn weight_sample_bound(n: usize, phases: usize) -> f64 {
    let holes_plus_one = (n * n + 1) as u128;
    let inner = (12 * phases as u128 * holes_plus_one) as f64;
    (475 * holes_plus_one) as f64 * inner.ln()
}

/// Samples per phase keeping the relative variance of the product of `l`
/// phase ratios within `ε²/300`: `9 / ((ε²/300 + 1)^(1/l) - 1)`.
pub fn counting_sample_bound(epsilon: f64, phases: usize) -> f64 {
    9.0 / ((epsilon * epsilon / 300.0 + 1.0).powf(1.0 / phases as f64) - 1.0)
}

fn ceil_big(x: f64) -> BigUint {
    BigUint::from_f64(x.ceil()).expect("finite nonnegative step count")
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    Ok(())
}

/// Parameters required for relative error `epsilon`, unrelaxed.
pub fn compute_params(n: usize, epsilon: f64) -> Result<SamplingParams> {
    check_epsilon(epsilon)?;
    let phases = phase_count_closed_form(n)?;
    Ok(params_for_phases(n, epsilon, phases))
}

/// Same formulas with an explicit phase count. Used for `n < 4`, where the
/// closed form is undefined and the count comes from the schedule itself.
pub(crate) fn params_for_phases(n: usize, epsilon: f64, phases: usize) -> SamplingParams {
    let holes_plus_one = (n * n + 1) as f64;
    let mix = mixing_factor(n);

    let delta_phase = (1.0 / (8.0 * holes_plus_one)).min(epsilon / (20 * phases) as f64);
    let delta_final = epsilon / 20.0;

    let tau_init = mix * (ln_factorial(n) + holes_plus_one.ln());
    let tau_resample_phase = mix * (1.0 / delta_phase).ln();
    let tau_resample_final = mix * (1.0 / delta_final).ln();

    let weight = weight_sample_bound(n, phases);
    let counting = counting_sample_bound(epsilon, phases);
    let samples_final = (1200 * n * n + 900) as f64 / (epsilon * epsilon);

    SamplingParams {
        n,
        epsilon,
        phases,
        tau_init: ceil_big(tau_init),
        tau_resample_phase: ceil_big(tau_resample_phase),
        tau_resample_final: ceil_big(tau_resample_final),
        samples_phase: weight.max(counting).ceil() as u64,
        samples_final: samples_final.ceil() as u64,
        delta_phase,
        delta_final,
        samples_phase_weight_bound: weight,
        samples_phase_counting_bound: counting,
        relax: RelaxationFactors::IDENTITY,
    }
}

fn relax_count(value: u64, divisor: u64) -> u64 {
    (value / divisor).max(1)
}

fn relax_steps(value: &BigUint, divisor: u64) -> BigUint {
    (value / divisor).max(BigUint::one())
}

/// Divides the four relaxable parameters by `r`, flooring with a minimum of 1.
pub fn apply_relaxation(p: &SamplingParams, r: &RelaxationFactors) -> Result<SamplingParams> {
    r.validate()?;
    Ok(SamplingParams {
        samples_phase: relax_count(p.samples_phase, r.r_s_phase),
        tau_resample_phase: relax_steps(&p.tau_resample_phase, r.r_t_phase),
        samples_final: relax_count(p.samples_final, r.r_s_final),
        tau_resample_final: relax_steps(&p.tau_resample_final, r.r_t_final),
        relax: p.relax.compose(r),
        ..p.clone()
    })
}

impl SamplingParams {
    pub fn relaxed(&self, r: &RelaxationFactors) -> Result<SamplingParams> {
        apply_relaxation(self, r)
    }

    /// Steps walked by one weight-estimation phase: `τ_i + τ_r · |S_w|`.
    pub fn steps_per_phase(&self) -> BigUint {
        &self.tau_init + &self.tau_resample_phase * self.samples_phase
    }

    /// Steps walked by all weight-estimation phases.
    pub fn weight_phase_steps(&self) -> BigUint {
        self.steps_per_phase() * self.phases
    }

    /// Steps walked by the final refinement: `τ_i + τ_r(δ_c) · |S_c|`.
    pub fn refinement_steps(&self) -> BigUint {
        &self.tau_init + &self.tau_resample_final * self.samples_final
    }

    pub fn total_steps(&self) -> BigUint {
        self.weight_phase_steps() + self.refinement_steps()
    }

    /// The three step parameters as `u64`, for actually walking the chain.
    pub fn walk_lengths(&self) -> Result<WalkLengths> {
        let get = |x: &BigUint, what: &'static str| {
            x.to_u64().ok_or_else(|| {
                Error::InvalidArgument(format!("{what} of {x} steps exceeds a 64-bit counter"))
            })
        };
        Ok(WalkLengths {
            init: get(&self.tau_init, "initialization time")?,
            resample_phase: get(&self.tau_resample_phase, "phase resampling time")?,
            resample_final: get(&self.tau_resample_final, "final resampling time")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkLengths {
    pub init: u64,
    pub resample_phase: u64,
    pub resample_final: u64,
}
