//! The annealed estimator.
//!
//! With every hole weight at `n` and `λ = 1` the chain's states weigh
//! `(n² + 1)·n!` in total. Each phase samples the chain at the current
//! setting, re-estimates the hole weights, lowers `λ` to the next scheduled
//! value and measures how much the total weight moved. The product of those
//! ratios carries the known starting total down to the terminal one, and the
//! terminal share of perfect matchings built from instance edges converts that
//! into the permanent:
//!
//! ```text
//! per(A) ≈ (n² + 1)·n! · Z̄_0 · Z̄_1 ⋯ Z̄_{l-1} · Ȳ
//! ```
//!
//! `Z̄_i` is the mean of `w_{i+1}(M) / w_i(M)` over the samples `M` drawn in
//! phase `i`. Its expectation under the phase-`i` stationary distribution is
//! exactly `w_{i+1}(Ω) / w_i(Ω)`, which is what the telescoping product needs.
//! Everything is assembled in log space.

use std::ops::AddAssign;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{self, ChainState, WeightTable};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::params::{self, PhaseSchedule, RelaxationFactors, SamplingParams};
use crate::rng;

/// A sample count, or a probability mass when tallying an exact distribution.
pub trait Count: Copy + Default + AddAssign + PartialEq {
    fn to_f64(self) -> f64;
}

impl Count for u64 {
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Count for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}

/// Samples of one phase, compressed to counts by hole position and number of
/// λ-pairs. That is all the weight update and the ratio estimate look at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats<C = u64> {
    n: usize,
    /// Indexed by λ-pair count `k` in `0..=n`.
    perfect: Vec<C>,
    /// Indexed by `(u * n + v) * (n + 1) + k`.
    holes: Vec<C>,
    total: C,
}

impl<C: Count> PhaseStats<C> {
    pub fn new(n: usize) -> Self {
        PhaseStats {
            n,
            perfect: vec![C::default(); n + 1],
            holes: vec![C::default(); n * n * (n + 1)],
            total: C::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds `amount` for a matching with the given hole and λ-pair count.
    pub fn add(&mut self, hole: Option<(usize, usize)>, k: usize, amount: C) {
        assert!(k <= self.n, "λ-pair count {k} out of range");
        match hole {
            None => self.perfect[k] += amount,
            Some((u, v)) => self.holes[(u * self.n + v) * (self.n + 1) + k] += amount,
        }
        self.total += amount;
    }

    pub fn perfect(&self, k: usize) -> C {
        self.perfect[k]
    }

    pub fn hole(&self, u: usize, v: usize, k: usize) -> C {
        self.holes[(u * self.n + v) * (self.n + 1) + k]
    }

    /// `|S_p|`, summed over `k`.
    pub fn perfect_total(&self) -> f64 {
        self.perfect.iter().map(|c| c.to_f64()).sum()
    }

    /// `|S_{u,v}|`, summed over `k`.
    pub fn hole_total(&self, u: usize, v: usize) -> f64 {
        let start = (u * self.n + v) * (self.n + 1);
        self.holes[start..start + self.n + 1]
            .iter()
            .map(|c| c.to_f64())
            .sum()
    }

    pub fn total(&self) -> C {
        self.total
    }
}

impl PhaseStats<u64> {
    pub fn record(&mut self, state: &ChainState) {
        self.add(state.matching().hole(), state.lambda_edge_count(), 1);
    }
}

/// Why a run gave up and reported −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Failure {
    /// No sample landed on hole `(row, col)`, so its weight ratio is undefined.
    EmptyHole { row: usize, col: usize },
    /// No sample was a perfect matching.
    NoPerfectSamples,
    /// The final refinement saw no perfect matching made of instance edges.
    NoGraphPerfectSamples,
}

/// New hole weights `w'(u,v) = w(u,v) · |S_p| / |S_{u,v}|`, with `λ` kept.
pub fn update_weights<C: Count>(
    stats: &PhaseStats<C>,
    wt: &WeightTable,
) -> std::result::Result<WeightTable, Failure> {
    let n = wt.n();
    let mut next = wt.clone();
    let mut hole_totals = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let total = stats.hole_total(row, col);
            if total <= 0.0 {
                return Err(Failure::EmptyHole { row, col });
            }
            hole_totals.push(total);
        }
    }
    let perfect = stats.perfect_total();
    if perfect <= 0.0 {
        return Err(Failure::NoPerfectSamples);
    }
    let ln_perfect = perfect.ln();
    for (i, total) in hole_totals.into_iter().enumerate() {
        let (u, v) = (i / n, i % n);
        next.set_log_w(u, v, wt.log_w(u, v) + (ln_perfect - total.ln()));
    }
    Ok(next)
}

/// `ln Z̄`: log of the mean of `w_new(M) / w_old(M)` over the tallied samples.
///
/// A sample with `k` λ-pairs and hole `h` contributes
/// `exp(k·(ln λ_new − ln λ_old) + ln w_new(h) − ln w_old(h))`.
pub fn phase_ratio<C: Count>(stats: &PhaseStats<C>, old: &WeightTable, new: &WeightTable) -> f64 {
    let n = stats.n();
    let dl = new.log_lambda() - old.log_lambda();
    let mut terms = Vec::with_capacity(n + 1 + n * n * (n + 1));
    for k in 0..=n {
        let c = stats.perfect(k).to_f64();
        if c > 0.0 {
            terms.push(c.ln() + k as f64 * dl);
        }
    }
    for u in 0..n {
        for v in 0..n {
            let dw = new.log_w(u, v) - old.log_w(u, v);
            for k in 0..=n {
                let c = stats.hole(u, v, k).to_f64();
                if c > 0.0 {
                    terms.push(c.ln() + k as f64 * dl + dw);
                }
            }
        }
    }
    log_sum_exp(&terms) - stats.total().to_f64().ln()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Walk lengths for one sampling stage: `init` steps once, then `samples`
/// times walk `resample` steps and record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingPlan {
    pub init: u64,
    pub resample: u64,
    pub samples: u64,
}

impl SamplingPlan {
    pub fn weight_phase(p: &SamplingParams) -> Result<Self> {
        let walks = p.walk_lengths()?;
        Ok(SamplingPlan {
            init: walks.init,
            resample: walks.resample_phase,
            samples: p.samples_phase,
        })
    }

    pub fn refinement(p: &SamplingParams) -> Result<Self> {
        let walks = p.walk_lengths()?;
        Ok(SamplingPlan {
            init: walks.init,
            resample: walks.resample_final,
            samples: p.samples_final,
        })
    }

    pub fn steps(&self) -> u128 {
        self.init as u128 + self.resample as u128 * self.samples as u128
    }
}

/// One weight-estimation phase, continuing from `start`.
pub fn run_phase<R: Rng + ?Sized>(
    wt: &WeightTable,
    start: ChainState,
    plan: &SamplingPlan,
    rng: &mut R,
) -> (PhaseStats, ChainState) {
    let mut state = start;
    let mut stats = PhaseStats::new(wt.n());
    chain::walk(&mut state, wt, plan.init, rng);
    for _ in 0..plan.samples {
        chain::walk(&mut state, wt, plan.resample, rng);
        stats.record(&state);
    }
    (stats, state)
}

/// Outcome of the final refinement stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Refinement {
    pub graph_perfect: u64,
    pub samples: u64,
}

impl Refinement {
    /// `Ȳ`, or `None` when no sample qualified.
    pub fn y_bar(&self) -> Option<f64> {
        (self.graph_perfect > 0).then(|| self.graph_perfect as f64 / self.samples as f64)
    }
}

/// Samples at the terminal setting and counts perfect matchings that use only
/// instance edges.
pub fn final_refinement<R: Rng + ?Sized>(
    wt: &WeightTable,
    start: ChainState,
    plan: &SamplingPlan,
    rng: &mut R,
) -> (Refinement, ChainState) {
    let mut state = start;
    let mut graph_perfect = 0;
    chain::walk(&mut state, wt, plan.init, rng);
    for _ in 0..plan.samples {
        chain::walk(&mut state, wt, plan.resample, rng);
        graph_perfect += state.is_graph_perfect() as u64;
    }
    let result = Refinement {
        graph_perfect,
        samples: plan.samples,
    };
    (result, state)
}

/// Result of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: usize,
    /// The estimate, `0` when the matrix has no perfect matching, `−1` on
    /// failure. Saturates at `f64::MAX`; `log_value` stays exact.
    pub value: f64,
    pub log_value: Option<f64>,
    /// `ln Z̄_i` for each completed phase.
    pub log_z_ratios: Vec<f64>,
    pub y_bar: Option<f64>,
    #[serde(with = "crate::serde_big")]
    pub steps_taken: BigUint,
    pub failed_phase: Option<usize>,
    pub failure: Option<Failure>,
}

impl Estimate {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn z_ratios(&self) -> Vec<f64> {
        self.log_z_ratios.iter().map(|z| z.exp()).collect()
    }

    fn zero(n: usize) -> Self {
        Estimate {
            n,
            value: 0.0,
            log_value: None,
            log_z_ratios: Vec::new(),
            y_bar: None,
            steps_taken: BigUint::default(),
            failed_phase: None,
            failure: None,
        }
    }
}

/// Everything needed to recompute one phase's `Z̄` after the fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord<C = u64> {
    pub log_lambda: f64,
    pub next_log_lambda: f64,
    pub log_w: Vec<f64>,
    pub next_log_w: Vec<f64>,
    pub stats: PhaseStats<C>,
}

impl<C: Count> PhaseRecord<C> {
    /// `ln Z̄` from the stored tallies and weight snapshots.
    pub fn replay_log_z(&self, m: &Matrix) -> Result<f64> {
        let old = WeightTable::new(m, self.log_lambda, self.log_w.clone())?;
        let new = WeightTable::new(m, self.next_log_lambda, self.next_log_w.clone())?;
        Ok(phase_ratio(&self.stats, &old, &new))
    }
}

/// Reported to the progress callback after every phase and after refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    /// Phases completed so far; equals `phases` once refinement is done.
    pub phase: usize,
    pub phases: usize,
    pub log_lambda: f64,
    pub steps: u128,
    pub refined: bool,
}

/// Where the phase loop gets its tallies from.
trait Source {
    type C: Count;
    fn phase(&mut self, wt: &WeightTable, state: &mut ChainState) -> Result<PhaseStats<Self::C>>;
    /// Graph-perfect share at the terminal setting, or `None` if there was none.
    fn refine(&mut self, wt: &WeightTable, state: &mut ChainState) -> Result<Option<f64>>;
    fn steps(&self) -> u128;
}

struct Sampler {
    rng: rng::TrialRng,
    phase: SamplingPlan,
    refinement: SamplingPlan,
    steps: u128,
}

impl Source for Sampler {
    type C = u64;

    fn phase(&mut self, wt: &WeightTable, state: &mut ChainState) -> Result<PhaseStats> {
        let (stats, end) = run_phase(wt, state.clone(), &self.phase, &mut self.rng);
        *state = end;
        self.steps += self.phase.steps();
        Ok(stats)
    }

    fn refine(&mut self, wt: &WeightTable, state: &mut ChainState) -> Result<Option<f64>> {
        let (result, end) = final_refinement(wt, state.clone(), &self.refinement, &mut self.rng);
        *state = end;
        self.steps += self.refinement.steps();
        Ok(result.y_bar())
    }

    fn steps(&self) -> u128 {
        self.steps
    }
}

/// Replaces sampling with the chain's exact stationary distribution.
struct ExactDistribution;

impl Source for ExactDistribution {
    type C = f64;

    fn phase(&mut self, wt: &WeightTable, _: &mut ChainState) -> Result<PhaseStats<f64>> {
        let pi = chain::exact_stationary(wt)?;
        let mut stats = PhaseStats::new(wt.n());
        for (m, p) in chain::enumerate_states(wt.n())?.into_iter().zip(pi) {
            let s = ChainState::new(m, wt);
            stats.add(s.matching().hole(), s.lambda_edge_count(), p);
        }
        Ok(stats)
    }

    fn refine(&mut self, wt: &WeightTable, _: &mut ChainState) -> Result<Option<f64>> {
        let pi = chain::exact_stationary(wt)?;
        let mut mass = 0.0;
        for (m, p) in chain::enumerate_states(wt.n())?.into_iter().zip(pi) {
            if ChainState::new(m, wt).is_graph_perfect() {
                mass += p;
            }
        }
        Ok((mass > 0.0).then_some(mass))
    }

    fn steps(&self) -> u128 {
        0
    }
}

fn drive<S: Source>(
    m: &Matrix,
    schedule: &PhaseSchedule,
    source: &mut S,
    progress: &mut dyn FnMut(&Progress),
) -> Result<(Estimate, Vec<PhaseRecord<S::C>>)> {
    let n = m.n();
    let Some(witness) = m.find_perfect_matching() else {
        return Ok((Estimate::zero(n), Vec::new()));
    };
    let phases = schedule.phases();
    let mut wt = WeightTable::initial(m);
    let mut state = ChainState::new(witness, &wt);
    let mut log_z_ratios = Vec::with_capacity(phases);
    let mut trace = Vec::with_capacity(phases);

    let failed = |log_z_ratios: Vec<f64>, phase: Option<usize>, failure, steps: u128| Estimate {
        n,
        value: -1.0,
        log_value: None,
        log_z_ratios,
        y_bar: None,
        steps_taken: BigUint::from(steps),
        failed_phase: phase,
        failure: Some(failure),
    };

    for (i, &next_log_lambda) in schedule.log_lambdas()[1..].iter().enumerate() {
        let stats = source.phase(&wt, &mut state)?;
        let mut next = match update_weights(&stats, &wt) {
            Ok(next) => next,
            Err(failure) => {
                return Ok((
                    failed(log_z_ratios, Some(i), failure, source.steps()),
                    trace,
                ));
            }
        };
        next.set_log_lambda(next_log_lambda);
        // The chain state's λ-pair count depends only on the instance, so it
        // carries over unchanged.
        let log_z = phase_ratio(&stats, &wt, &next);
        log_z_ratios.push(log_z);
        trace.push(PhaseRecord {
            log_lambda: wt.log_lambda(),
            next_log_lambda,
            log_w: wt.log_ws().to_vec(),
            next_log_w: next.log_ws().to_vec(),
            stats,
        });
        wt = next;
        progress(&Progress {
            phase: i + 1,
            phases,
            log_lambda: next_log_lambda,
            steps: source.steps(),
            refined: false,
        });
    }

    let Some(y_bar) = source.refine(&wt, &mut state)? else {
        let failure = Failure::NoGraphPerfectSamples;
        return Ok((failed(log_z_ratios, None, failure, source.steps()), trace));
    };
    progress(&Progress {
        phase: phases,
        phases,
        log_lambda: wt.log_lambda(),
        steps: source.steps(),
        refined: true,
    });

    let log_start = ((n * n + 1) as f64).ln() + params::ln_factorial(n);
    let log_value = log_start + log_z_ratios.iter().sum::<f64>() + y_bar.ln();
    let value = log_value.exp().min(f64::MAX);
    let estimate = Estimate {
        n,
        value,
        log_value: Some(log_value),
        log_z_ratios,
        y_bar: Some(y_bar),
        steps_taken: BigUint::from(source.steps()),
        failed_phase: None,
        failure: None,
    };
    Ok((estimate, trace))
}

/// Runs the estimator with explicit parameters, returning the per-phase trace.
pub fn estimate_with_params(
    m: &Matrix,
    params: &SamplingParams,
    seed: u64,
    progress: &mut dyn FnMut(&Progress),
) -> Result<(Estimate, Vec<PhaseRecord>)> {
    if params.n != m.n() {
        return Err(Error::InvalidArgument(format!(
            "parameters for n = {} given a {}x{} matrix",
            params.n,
            m.n(),
            m.n()
        )));
    }
    let schedule = params::phase_schedule(m.n())?;
    if schedule.phases() != params.phases {
        return Err(Error::InvalidArgument(format!(
            "annealing schedule has {} phases but parameters assume {}",
            schedule.phases(),
            params.phases
        )));
    }
    let mut sampler = Sampler {
        rng: rng::seeded(seed),
        phase: SamplingPlan::weight_phase(params)?,
        refinement: SamplingPlan::refinement(params)?,
        steps: 0,
    };
    drive(m, &schedule, &mut sampler, progress)
}

/// Estimates `per(m)` to relative error `epsilon` with the sampling
/// parameters divided by `relax`.
pub fn estimate_permanent(
    m: &Matrix,
    epsilon: f64,
    relax: &RelaxationFactors,
    seed: u64,
) -> Result<Estimate> {
    estimate_permanent_with_progress(m, epsilon, relax, seed, &mut |_| {})
}

pub fn estimate_permanent_with_progress(
    m: &Matrix,
    epsilon: f64,
    relax: &RelaxationFactors,
    seed: u64,
    progress: &mut dyn FnMut(&Progress),
) -> Result<Estimate> {
    let p = params::compute_params(m.n(), epsilon)?.relaxed(relax)?;
    Ok(estimate_with_params(m, &p, seed, progress)?.0)
}

/// Runs the phase loop on the exact stationary distribution of every phase
/// instead of on samples. With exact tallies every weight update lands on the
/// ideal weights and every `Z̄` equals the true weight ratio, so the result is
/// `per(m)` up to floating-point error. Limited to the sizes
/// [`chain::exact_stationary`] handles.
pub fn estimate_exact_distribution(m: &Matrix) -> Result<(Estimate, Vec<PhaseRecord<f64>>)> {
    if m.n() > chain::STATIONARY_MAX_N {
        return Err(Error::TooLarge {
            what: "exact-distribution estimate",
            n: m.n(),
            limit: chain::STATIONARY_MAX_N,
        });
    }
    let schedule = params::phase_schedule(m.n())?;
    drive(m, &schedule, &mut ExactDistribution, &mut |_| {})
}
