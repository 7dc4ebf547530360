//! Batch experiments: random suites, trials against Ryser ground truth,
//! summaries, and their on-disk formats.
//!
//! Results are JSON Lines, one record per trial, so an interrupted run keeps
//! everything finished so far. Every trial carries its own seed and the output
//! order follows the input order, so the worker count never changes a file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::permanent_ryser;
use crate::fpras::{self, Failure};
use crate::matrix::Matrix;
use crate::params::RelaxationFactors;
use crate::rng;
use crate::SCHEMA_VERSION;

/// Environment variable read by the command line for the default worker count.
pub const WORKERS_ENV: &str = "PERMLAB_WORKERS";

/// Fraction of the `n²` cells set to one, as `num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Density {
    pub num: usize,
    pub den: usize,
}

impl Density {
    pub const THREE_QUARTERS: Density = Density { num: 3, den: 4 };
    pub const SEVEN_EIGHTHS: Density = Density { num: 7, den: 8 };

    /// `⌊n² · num / den⌋`.
    pub fn ones(&self, n: usize) -> usize {
        n * n * self.num / self.den
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Density {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("density must look like 3/4, got {s:?}"));
        let (num, den) = s.split_once('/').ok_or_else(bad)?;
        let num: usize = num.trim().parse().map_err(|_| bad())?;
        let den: usize = den.trim().parse().map_err(|_| bad())?;
        if den == 0 || num > den {
            return Err(bad());
        }
        Ok(Density { num, den })
    }
}

/// What [`generate_suite`] should produce.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub sizes: Vec<usize>,
    pub densities: Vec<Density>,
    pub count: usize,
    pub seed: u64,
    /// Redraw until the matrix has a perfect matching.
    pub require_matching: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub n: usize,
    pub density: Density,
    pub ones: usize,
    pub seed: u64,
    #[serde(with = "crate::serde_big")]
    pub exact: BigUint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub rng: String,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Writes one `.pmat` file per matrix into `dir` plus `manifest.json` with
/// the seeds and exact permanents.
pub fn generate_suite(spec: &SuiteSpec, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    let mut index = 0u64;
    for &n in &spec.sizes {
        for &density in &spec.densities {
            let ones = density.ones(n);
            for i in 0..spec.count {
                let (m, seed) = loop {
                    let seed = rng::derive_seed(spec.seed, index);
                    index += 1;
                    let m = Matrix::generate_random(n, ones, seed)?;
                    if !spec.require_matching || m.find_perfect_matching().is_some() {
                        break (m, seed);
                    }
                    if ones < n {
                        return Err(Error::InvalidArgument(format!(
                            "{ones} ones can never cover a {n}x{n} perfect matching"
                        )));
                    }
                };
                let name = format!("n{n:02}_d{}-{}_{i:03}.pmat", density.num, density.den);
                m.write_pmat(dir.join(&name))?;
                entries.push(ManifestEntry {
                    path: PathBuf::from(name),
                    n,
                    density,
                    ones,
                    seed,
                    exact: permanent_ryser(&m)?,
                });
            }
        }
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        rng: rng::RNG_ALGORITHM.to_string(),
        seed: spec.seed,
        entries,
    };
    manifest.write(dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub matrix_path: PathBuf,
    pub epsilon: f64,
    pub relax: RelaxationFactors,
    pub seed: u64,
    pub label: String,
}

/// One sweep setting, applied to every matrix of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub label: String,
    pub epsilon: f64,
    #[serde(default)]
    pub relax: RelaxationFactors,
    pub seed: u64,
}

/// Trial settings file: a list of plans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlans {
    pub plans: Vec<TrialPlan>,
}

impl TrialPlans {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Every plan crossed with every manifest entry. Trial `j` of a plan gets
/// seed `derive_seed(plan.seed, j)`.
pub fn configs_for(
    manifest: &Manifest,
    manifest_dir: &Path,
    plans: &[TrialPlan],
) -> Vec<TrialConfig> {
    plans
        .iter()
        .flat_map(|plan| {
            manifest
                .entries
                .iter()
                .enumerate()
                .map(move |(j, e)| TrialConfig {
                    matrix_path: manifest_dir.join(&e.path),
                    epsilon: plan.epsilon,
                    relax: plan.relax,
                    seed: rng::derive_seed(plan.seed, j as u64),
                    label: plan.label.clone(),
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub schema_version: u32,
    pub label: String,
    pub matrix_path: PathBuf,
    pub n: usize,
    pub ones_count: usize,
    pub epsilon: f64,
    pub relax: RelaxationFactors,
    pub seed: u64,
    #[serde(with = "crate::serde_big")]
    pub exact: BigUint,
    /// `−1` when the run failed.
    pub estimate: f64,
    pub rel_error: Option<f64>,
    pub failed: bool,
    pub within_bound: Option<bool>,
    pub failure: Option<Failure>,
    pub failed_phase: Option<usize>,
    #[serde(with = "crate::serde_big")]
    pub steps_taken: BigUint,
    pub wall_seconds: f64,
}

/// A trial either produced a result or could not run at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TrialOutcome {
    Result(TrialResult),
    Error {
        schema_version: u32,
        label: String,
        matrix_path: PathBuf,
        message: String,
    },
}

impl TrialOutcome {
    pub fn result(&self) -> Option<&TrialResult> {
        match self {
            TrialOutcome::Result(r) => Some(r),
            TrialOutcome::Error { .. } => None,
        }
    }
}

/// `max(estimate/exact, exact/estimate) − 1`, computed exactly from the
/// integer and the binary value of the float. `None` when undefined.
pub fn rel_error(estimate: f64, exact: &BigUint) -> Option<f64> {
    if exact.is_zero() {
        return (estimate == 0.0).then_some(0.0);
    }
    if estimate.is_nan() || estimate <= 0.0 {
        return None;
    }
    let est = BigRational::from_float(estimate)?;
    let exact = BigRational::from_integer(BigInt::from(exact.clone()));
    let ratio = if est > exact {
        est / exact
    } else {
        exact / est
    };
    (ratio - BigRational::from_integer(1.into())).to_f64()
}

/// Whether `exact/(1+ε) <= estimate <= (1+ε)·exact`, in exact arithmetic.
/// `None` for failed runs and zero permanents.
pub fn within_bound(estimate: f64, exact: &BigUint, epsilon: f64) -> Option<bool> {
    if exact.is_zero() || estimate < 0.0 {
        return None;
    }
    let est = BigRational::from_float(estimate)?;
    let factor = BigRational::from_float(1.0 + epsilon)?;
    let exact = BigRational::from_integer(BigInt::from(exact.clone()));
    Some(&est * &factor >= exact && est <= exact * factor)
}

/// Runs one trial: ground truth by Ryser, then the estimator under a timer.
pub fn run_trial(config: &TrialConfig) -> TrialOutcome {
    match try_trial(config) {
        Ok(r) => TrialOutcome::Result(r),
        Err(e) => TrialOutcome::Error {
            schema_version: SCHEMA_VERSION,
            label: config.label.clone(),
            matrix_path: config.matrix_path.clone(),
            message: e.to_string(),
        },
    }
}

fn try_trial(config: &TrialConfig) -> Result<TrialResult> {
    let m = Matrix::read_pmat(&config.matrix_path)?;
    let exact = permanent_ryser(&m)?;
    let start = Instant::now();
    let est = fpras::estimate_permanent(&m, config.epsilon, &config.relax, config.seed)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let failed = est.failed();
    Ok(TrialResult {
        schema_version: SCHEMA_VERSION,
        label: config.label.clone(),
        matrix_path: config.matrix_path.clone(),
        n: m.n(),
        ones_count: m.ones_count(),
        epsilon: config.epsilon,
        relax: config.relax,
        seed: config.seed,
        rel_error: if failed {
            None
        } else {
            rel_error(est.value, &exact)
        },
        within_bound: if failed {
            None
        } else {
            within_bound(est.value, &exact, config.epsilon)
        },
        exact,
        estimate: est.value,
        failed,
        failure: est.failure,
        failed_phase: est.failed_phase,
        steps_taken: est.steps_taken,
        wall_seconds,
    })
}

/// Runs `configs` on up to `workers` threads and hands each outcome to
/// `sink` in input order.
pub fn run_trials(configs: &[TrialConfig], workers: usize, mut sink: impl FnMut(TrialOutcome)) {
    let workers = workers.clamp(1, configs.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = configs.get(i) else { break };
                if tx.send((i, run_trial(config))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut emitted = 0;
        for (i, outcome) in rx {
            pending.insert(i, outcome);
            while let Some(outcome) = pending.remove(&emitted) {
                sink(outcome);
                emitted += 1;
            }
        }
    });
}

/// Default worker count: available parallelism.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Appends outcomes to a JSON Lines file, one per line.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn append(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(JsonlWriter {
            path,
            out: BufWriter::new(file),
        })
    }

    /// Writes and flushes one record, so a crash loses at most the trial in flight.
    pub fn write(&mut self, outcome: &TrialOutcome) -> Result<()> {
        serde_json::to_writer(&mut self.out, outcome)?;
        writeln!(self.out).map_err(|e| Error::io(&self.path, e))?;
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_outcomes(path: impl AsRef<Path>) -> Result<Vec<TrialOutcome>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Flat view of a result for spreadsheets.
#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    schema_version: u32,
    label: &'a str,
    matrix_path: String,
    n: usize,
    ones_count: usize,
    epsilon: f64,
    relax: String,
    seed: u64,
    exact: String,
    estimate: f64,
    rel_error: Option<f64>,
    failed: bool,
    within_bound: Option<bool>,
    failed_phase: Option<usize>,
    steps_taken: String,
    wall_seconds: f64,
}

pub fn write_results_csv<'a>(
    path: impl AsRef<Path>,
    results: impl IntoIterator<Item = &'a TrialResult>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in results {
        w.serialize(CsvRow {
            schema_version: r.schema_version,
            label: &r.label,
            matrix_path: r.matrix_path.display().to_string(),
            n: r.n,
            ones_count: r.ones_count,
            epsilon: r.epsilon,
            relax: r.relax.to_string(),
            seed: r.seed,
            exact: r.exact.to_string(),
            estimate: r.estimate,
            rel_error: r.rel_error,
            failed: r.failed,
            within_bound: r.within_bound,
            failed_phase: r.failed_phase,
            steps_taken: r.steps_taken.to_string(),
            wall_seconds: r.wall_seconds,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    N,
    Label,
    LabelAndN,
}

impl FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(GroupBy::N),
            "label" => Ok(GroupBy::Label),
            "label,n" | "label-n" => Ok(GroupBy::LabelAndN),
            _ => Err(Error::InvalidArgument(format!(
                "group-by must be n, label or label,n; got {s:?}"
            ))),
        }
    }
}

/// One row of a summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: Option<String>,
    pub n: Option<usize>,
    pub trials: usize,
    pub failures: usize,
    /// Estimates outside the ε bound, failures excluded.
    pub misestimates: usize,
    /// Mean relative error over the runs that did not fail.
    pub mean_rel_error: Option<f64>,
    pub mean_wall_seconds: f64,
    /// Non-failed runs with no defined relative error (zero permanent with a
    /// positive estimate).
    pub skipped: usize,
}

/// Summary rows sorted by group key.
pub fn aggregate(results: &[TrialResult], group_by: GroupBy) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Option<String>, Option<usize>), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        let key = match group_by {
            GroupBy::N => (None, Some(r.n)),
            GroupBy::Label => (Some(r.label.clone()), None),
            GroupBy::LabelAndN => (Some(r.label.clone()), Some(r.n)),
        };
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((label, n), rs)| {
            let ok: Vec<&&TrialResult> = rs.iter().filter(|r| !r.failed).collect();
            let errors: Vec<f64> = ok.iter().filter_map(|r| r.rel_error).collect();
            SummaryRow {
                label,
                n,
                trials: rs.len(),
                failures: rs.len() - ok.len(),
                misestimates: ok.iter().filter(|r| r.within_bound == Some(false)).count(),
                mean_rel_error: (!errors.is_empty())
                    .then(|| errors.iter().sum::<f64>() / errors.len() as f64),
                mean_wall_seconds: rs.iter().map(|r| r.wall_seconds).sum::<f64>() / rs.len() as f64,
                skipped: ok.len() - errors.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::permanent_naive;

    fn result(label: &str, n: usize, estimate: f64, exact: u64, wall: f64) -> TrialResult {
        let exact = BigUint::from(exact);
        let failed = estimate == -1.0;
        TrialResult {
            schema_version: SCHEMA_VERSION,
            label: label.into(),
            matrix_path: "m.pmat".into(),
            n,
            ones_count: 0,
            epsilon: 0.5,
            relax: RelaxationFactors::IDENTITY,
            seed: 0,
            rel_error: if failed {
                None
            } else {
                rel_error(estimate, &exact)
            },
            within_bound: if failed {
                None
            } else {
                within_bound(estimate, &exact, 0.5)
            },
            exact,
            estimate,
            failed,
            failure: failed.then_some(Failure::NoPerfectSamples),
            failed_phase: None,
            steps_taken: BigUint::default(),
            wall_seconds: wall,
        }
    }

    #[test]
    fn density_parsing_and_counts() {
        let d: Density = "3/4".parse().unwrap();
        assert_eq!(d, Density::THREE_QUARTERS);
        assert_eq!(d.ones(4), 12);
        assert_eq!(Density::SEVEN_EIGHTHS.ones(10), 87);
        assert!("5/4".parse::<Density>().is_err());
        assert!("1/0".parse::<Density>().is_err());
        assert!("x".parse::<Density>().is_err());
    }

    #[test]
    fn relative_error_is_multiplicative() {
        let x = BigUint::from(100u32);
        assert_eq!(rel_error(100.0, &x), Some(0.0));
        assert!((rel_error(150.0, &x).unwrap() - 0.5).abs() < 1e-15);
        assert!((rel_error(50.0, &x).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(rel_error(0.0, &BigUint::zero()), Some(0.0));
        assert_eq!(rel_error(3.0, &BigUint::zero()), None);
        assert_eq!(rel_error(0.0, &x), None);
    }

    #[test]
    fn rel_error_uses_the_exact_integer() {
        // 2^53 + 1 is not a double; a float copy would report zero error.
        let exact = (BigUint::from(1u64) << 53) + 1u32;
        let err = rel_error(2f64.powi(53), &exact).unwrap();
        assert!(err > 0.0);
        assert!((err - 2f64.powi(-53)).abs() < 1e-30);
    }

    #[test]
    fn bound_edges_are_inclusive() {
        let x = BigUint::from(2u32);
        assert_eq!(within_bound(3.0, &x, 0.5), Some(true));
        assert_eq!(within_bound(3.0000001, &x, 0.5), Some(false));
        assert_eq!(within_bound(2.0 / 1.5, &x, 0.5), Some(false));
        assert_eq!(within_bound(1.34, &x, 0.5), Some(true));
        assert_eq!(within_bound(-1.0, &x, 0.5), None);
        assert_eq!(within_bound(1.0, &BigUint::zero(), 0.5), None);
    }

    proptest::proptest! {
        #[test]
        fn bound_agrees_with_relative_error(exact in 1u64..1_000_000, factor in 0.2f64..3.0) {
            let x = BigUint::from(exact);
            let estimate = exact as f64 * factor;
            let err = rel_error(estimate, &x).unwrap();
            proptest::prop_assert!(err >= 0.0);
            let inside = within_bound(estimate, &x, 0.5).unwrap();
            if (err - 0.5).abs() > 1e-9 {
                proptest::prop_assert_eq!(inside, err < 0.5);
            }
        }
    }

    #[test]
    fn aggregate_perfect_estimates() {
        let rs: Vec<_> = (0..5).map(|i| result("a", 4, 24.0, 24, i as f64)).collect();
        let rows = aggregate(&rs, GroupBy::N);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_rel_error, Some(0.0));
        assert_eq!(rows[0].misestimates, 0);
        assert_eq!(rows[0].mean_wall_seconds, 2.0);
    }

    #[test]
    fn aggregate_excludes_failures() {
        let mut rs: Vec<_> = (0..19).map(|_| result("a", 4, 12.0, 10, 1.0)).collect();
        rs.push(result("a", 4, -1.0, 10, 1.0));
        rs.push(result("b", 6, 30.0, 10, 1.0));
        let rows = aggregate(&rs, GroupBy::N);
        assert_eq!(rows[0].n, Some(4));
        assert_eq!(rows[0].trials, 20);
        assert_eq!(rows[0].failures, 1);
        assert!((rows[0].mean_rel_error.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(rows[1].misestimates, 1);
        let by_label = aggregate(&rs, GroupBy::Label);
        assert_eq!(by_label.len(), 2);
        assert_eq!(by_label[0].label.as_deref(), Some("a"));
    }

    #[test]
    fn suite_layout_and_exact_values() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SuiteSpec {
            sizes: vec![4, 6, 8],
            densities: vec![Density::THREE_QUARTERS, Density::SEVEN_EIGHTHS],
            count: 3,
            seed: 9,
            require_matching: false,
        };
        let manifest = generate_suite(&spec, dir.path()).unwrap();
        assert_eq!(manifest.entries.len(), 18);
        let reread = Manifest::read(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(reread, manifest);
        for e in &manifest.entries {
            let m = Matrix::read_pmat(dir.path().join(&e.path)).unwrap();
            assert_eq!(m.ones_count(), e.ones);
            assert_eq!(m, Matrix::generate_random(e.n, e.ones, e.seed).unwrap());
            assert_eq!(permanent_naive(&m).unwrap(), e.exact);
        }
        assert_eq!(manifest.entries[0].ones, 12);
    }

    #[test]
    fn suite_can_insist_on_matchings() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SuiteSpec {
            sizes: vec![4],
            densities: vec![Density { num: 1, den: 4 }],
            count: 5,
            seed: 1,
            require_matching: true,
        };
        let manifest = generate_suite(&spec, dir.path()).unwrap();
        assert!(manifest.entries.iter().all(|e| !e.exact.is_zero()));
    }

    fn small_run(dir: &Path, workers: usize) -> Vec<TrialOutcome> {
        let spec = SuiteSpec {
            sizes: vec![4],
            densities: vec![Density::THREE_QUARTERS],
            count: 4,
            seed: 3,
            require_matching: false,
        };
        let manifest = generate_suite(&spec, dir).unwrap();
        let plans = [TrialPlan {
            label: "quick".into(),
            epsilon: 0.5,
            relax: RelaxationFactors::new(8, 1 << 20, 64, 1 << 10).unwrap(),
            seed: 77,
        }];
        let mut configs = configs_for(&manifest, dir, &plans);
        configs.push(TrialConfig {
            matrix_path: dir.join("missing.pmat"),
            ..configs[0].clone()
        });
        let mut out = Vec::new();
        run_trials(&configs, workers, |o| out.push(o));
        out
    }

    fn without_wall_time(mut outcomes: Vec<TrialOutcome>) -> Vec<TrialOutcome> {
        for o in &mut outcomes {
            if let TrialOutcome::Result(r) = o {
                r.wall_seconds = 0.0;
            }
        }
        outcomes
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let dir = tempfile::tempdir().unwrap();
        let serial = without_wall_time(small_run(dir.path(), 1));
        let parallel = without_wall_time(small_run(dir.path(), 4));
        assert_eq!(serial.len(), 5);
        assert_eq!(serial, parallel);
        assert!(matches!(serial[4], TrialOutcome::Error { .. }));
        for o in &serial[..4] {
            let r = o.result().unwrap();
            assert_eq!(r.failed, r.estimate == -1.0);
        }
    }

    #[test]
    fn empty_config_list() {
        let mut out = Vec::new();
        run_trials(&[], 3, |o| out.push(o));
        assert!(out.is_empty());
    }

    #[test]
    fn jsonl_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let outcomes = small_run(dir.path(), 2);
        let path = dir.path().join("results.jsonl");
        let mut w = JsonlWriter::append(&path).unwrap();
        for o in &outcomes {
            w.write(o).unwrap();
        }
        drop(w);
        assert_eq!(read_outcomes(&path).unwrap(), outcomes);

        let csv_path = dir.path().join("results.csv");
        write_results_csv(&csv_path, outcomes.iter().filter_map(|o| o.result())).unwrap();
        let text = fs::read_to_string(csv_path).unwrap();
        assert!(text.starts_with("schema_version,label,"));
        assert_eq!(text.lines().count(), 5);
    }
}
