use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use permlab_core::exact::{permanent_naive, permanent_ryser};
use permlab_core::feasibility;
use permlab_core::fpras::{self, Estimate, Progress};
use permlab_core::harness::{self, Density, GroupBy, JsonlWriter, Manifest, SuiteSpec, TrialPlans};
use permlab_core::params::{self, RelaxationFactors};
use permlab_core::{rng, Matrix, Result, SCHEMA_VERSION};

#[derive(Parser)]
#[command(
    name = "permlab",
    version,
    about = "Exact and Markov-chain approximate permanents of 0/1 matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a suite of random matrices with a manifest of exact permanents.
    Gen {
        #[arg(long, value_delimiter = ',', default_value = "4,6,8,10")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "3/4,7/8")]
        densities: Vec<Density>,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Redraw matrices that have no perfect matching.
        #[arg(long)]
        require_matching: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact permanent of a .pmat file.
    Exact {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Ryser)]
        method: Method,
    },
    /// Approximate permanent by the annealed Markov chain.
    Estimate {
        file: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Divisors for phase samples, phase resampling, final samples, final resampling.
        #[arg(long, default_value = "1,1,1,1")]
        relax: RelaxationFactors,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Suppress per-phase progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Sampling parameters and step totals for one size.
    Params {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value = "1,1,1,1")]
        relax: RelaxationFactors,
    },
    /// Chain step budget against Ryser's operation count.
    Feasibility {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Chain steps per second used for the time projection.
        #[arg(long, default_value_t = 1e9)]
        rate: f64,
    },
    /// Smallest n where the chain needs fewer steps than Ryser needs operations.
    Crossover {
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
    },
    /// Run every plan in CONFIG against every matrix in MANIFEST.
    Trials {
        manifest: PathBuf,
        config: PathBuf,
        #[arg(long, env = harness::WORKERS_ENV)]
        workers: Option<usize>,
        /// JSON Lines output, appended to.
        #[arg(long)]
        out: PathBuf,
        /// Also write the results as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Summarize a JSON Lines results file.
    Report {
        results: PathBuf,
        #[arg(long, default_value = "n")]
        group_by: GroupBy,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ryser,
    Naive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Serialize)]
struct EstimateRecord<'a> {
    schema_version: u32,
    matrix: &'a Path,
    epsilon: f64,
    relax: RelaxationFactors,
    seed: u64,
    rng: &'static str,
    #[serde(flatten)]
    estimate: &'a Estimate,
    wall_seconds: f64,
}

fn report_progress(p: &Progress) {
    if p.refined {
        eprintln!("refinement done, {} steps", p.steps);
    } else {
        eprintln!(
            "phase {}/{}  ln λ = {:.6}  steps = {}",
            p.phase, p.phases, p.log_lambda, p.steps
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            sizes,
            densities,
            count,
            seed,
            require_matching,
            out,
        } => {
            let spec = SuiteSpec {
                sizes,
                densities,
                count,
                seed,
                require_matching,
            };
            let manifest = harness::generate_suite(&spec, &out)?;
            eprintln!(
                "wrote {} matrices and {}",
                manifest.entries.len(),
                out.join(harness::MANIFEST_FILE).display()
            );
        }
        Command::Exact { file, method } => {
            let m = Matrix::read_pmat(&file)?;
            let (name, value) = match method {
                Method::Ryser => ("ryser", permanent_ryser(&m)?),
                Method::Naive => ("naive", permanent_naive(&m)?),
            };
            print_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "n": m.n(),
                "method": name,
                "permanent": value.to_string(),
            }))?;
        }
        Command::Estimate {
            file,
            epsilon,
            relax,
            seed,
            quiet,
        } => {
            let m = Matrix::read_pmat(&file)?;
            let start = Instant::now();
            let mut progress = |p: &Progress| {
                if !quiet {
                    report_progress(p)
                }
            };
            let estimate =
                fpras::estimate_permanent_with_progress(&m, epsilon, &relax, seed, &mut progress)?;
            print_json(&EstimateRecord {
                schema_version: SCHEMA_VERSION,
                matrix: &file,
                epsilon,
                relax,
                seed,
                rng: rng::RNG_ALGORITHM,
                estimate: &estimate,
                wall_seconds: start.elapsed().as_secs_f64(),
            })?;
        }
        Command::Params { n, epsilon, relax } => {
            let p = params::compute_params(n, epsilon)?.relaxed(&relax)?;
            let mut doc = serde_json::to_value(&p)?;
            let extra = json!({
                "schema_version": SCHEMA_VERSION,
                "state_space_size": params::state_space_size(n).to_string(),
                "steps_per_phase": p.steps_per_phase().to_string(),
                "total_steps": p.total_steps().to_string(),
            });
            if let (Value::Object(doc), Value::Object(extra)) = (&mut doc, extra) {
                doc.extend(extra);
            }
            print_json(&doc)?;
        }
        Command::Feasibility { n, epsilon, rate } => {
            print_json(&feasibility::report(n, epsilon, rate)?)?;
        }
        Command::Crossover { epsilon } => {
            println!("{}", feasibility::crossover(epsilon)?);
        }
        Command::Trials {
            manifest,
            config,
            workers,
            out,
            csv,
        } => {
            let dir = manifest.parent().unwrap_or(Path::new("."));
            let m = Manifest::read(&manifest)?;
            let plans = TrialPlans::read(&config)?;
            let configs = harness::configs_for(&m, dir, &plans.plans);
            let workers = workers.unwrap_or_else(harness::default_workers);
            let mut writer = JsonlWriter::append(&out)?;
            let mut results = Vec::new();
            let mut write_error = None;
            let total = configs.len();
            let mut done = 0;
            harness::run_trials(&configs, workers, |outcome| {
                done += 1;
                eprintln!("trial {done}/{total}");
                if write_error.is_none() {
                    write_error = writer.write(&outcome).err();
                }
                if let Some(r) = outcome.result() {
                    results.push(r.clone());
                }
            });
            if let Some(e) = write_error {
                return Err(e);
            }
            if let Some(csv) = csv {
                harness::write_results_csv(csv, &results)?;
            }
        }
        Command::Report {
            results,
            group_by,
            format,
        } => {
            let outcomes = harness::read_outcomes(&results)?;
            let errors = outcomes.iter().filter(|o| o.result().is_none()).count();
            let results: Vec<_> = outcomes
                .iter()
                .filter_map(|o| o.result().cloned())
                .collect();
            let rows = harness::aggregate(&results, group_by);
            match format {
                Format::Json => print_json(&json!({
                    "schema_version": SCHEMA_VERSION,
                    "error_records": errors,
                    "rows": rows,
                }))?,
                Format::Table => {
                    println!(
                        "{:<16} {:>4} {:>7} {:>9} {:>12} {:>14} {:>12}",
                        "label",
                        "n",
                        "trials",
                        "failures",
                        "misestimates",
                        "mean_rel_err",
                        "mean_wall_s"
                    );
                    for r in rows {
                        println!(
                            "{:<16} {:>4} {:>7} {:>9} {:>12} {:>14} {:>12.3}",
                            r.label.as_deref().unwrap_or("-"),
                            r.n.map_or("-".to_string(), |n| n.to_string()),
                            r.trials,
                            r.failures,
                            r.misestimates,
                            r.mean_rel_error
                                .map_or("-".to_string(), |e| format!("{e:.4}")),
                            r.mean_wall_seconds,
                        );
                    }
                    if errors > 0 {
                        println!("{errors} trial(s) could not run");
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
