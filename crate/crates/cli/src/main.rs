use clap::{Args, Parser, Subcommand};
use gbsval::config::ExperimentConfig;
use gbsval::experiment::Experiment;
use gbsval::orbits::OrbitTable;
use gbsval::probability::PatternEvaluator;
use gbsval::validation::{write_validation_csv, ValidationRow};
use gbsval::GbsError;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Parser, Debug)]
#[command(
    name = "gbsval",
    version,
    about = "Gaussian boson sampling click statistics and validation"
)]
struct Cli {
    /// Worker threads; overrides the config field and GBSVAL_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Output CSV path; falls back to the config `output`, then stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Orbit table with the configured estimator.
    Orbits(Common),
    /// Click patterns sampled from the configured classical inputs.
    ClassicalSample(Common),
    /// χ² between the orbit table and classical samples for l = 0, 1, 2.
    Chi2(Common),
    /// Bayesian confidence between the state and the classical hypothesis.
    Bayes {
        #[command(flatten)]
        common: Common,
        /// Draw from the classical table instead of the quantum one.
        #[arg(long)]
        swap: bool,
    },
    /// Probability of a single click pattern.
    Functional {
        #[command(flatten)]
        common: Common,
        /// Comma-separated click counts, one per mode.
        #[arg(long, value_delimiter = ',', required = true)]
        pattern: Vec<usize>,
    },
    /// Oracle and identity self-checks.
    Conformance {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("configuration error: {0}")]
    Config(GbsError),
    #[error("{0}")]
    Domain(#[from] GbsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gbsval: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::load(&common.config).map_err(|e| match e {
        GbsError::Io(io) => CliError::Config(GbsError::Format(format!(
            "cannot read {}: {io}",
            common.config.display()
        ))),
        other => CliError::Config(other),
    })
}

fn thread_count(cli: Option<usize>, cfg: Option<&ExperimentConfig>) -> Result<usize, CliError> {
    if let Some(n) = cli.or_else(|| cfg.and_then(|c| c.threads)) {
        return Ok(n);
    }
    match std::env::var("GBSVAL_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| {
                CliError::Config(GbsError::InvalidParameter {
                    name: "GBSVAL_THREADS".into(),
                    reason: format!("expected a positive integer, got {v:?}"),
                })
            }),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Failed(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Artifact sink: the metadata line first, then the deterministic body.
struct Artifact {
    header: String,
    body: Vec<u8>,
}

impl Artifact {
    fn new(cfg: Option<&ExperimentConfig>, seed: u64, threads: usize) -> Self {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let hash = cfg.map_or_else(|| "none".to_string(), |c| c.hash());
        Self {
            header: format!(
                "# gbsval {} rev={} config={hash} seed={seed} threads={threads} unix_time={stamp}\n",
                env!("CARGO_PKG_VERSION"),
                env!("GBSVAL_GIT_REV"),
            ),
            body: Vec::new(),
        }
    }

    fn finish(self, path: Option<PathBuf>) -> Result<(), CliError> {
        let mut bytes = self.header.into_bytes();
        bytes.extend(self.body);
        match path {
            Some(p) => std::fs::write(&p, bytes)?,
            None => std::io::stdout().write_all(&bytes)?,
        }
        Ok(())
    }
}

fn output_path(common: &Common, cfg: &ExperimentConfig) -> Option<PathBuf> {
    common.output.clone().or_else(|| cfg.output.clone())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Conformance { seed } => {
            let threads = thread_count(cli.threads, None)?;
            let results = with_threads(threads, || gbsval::conformance::run_all(*seed))??;
            let mut art = Artifact::new(None, *seed, threads);
            writeln!(art.body, "suite,passed,cases,worst,tolerance")?;
            for r in &results {
                writeln!(
                    art.body,
                    "{},{},{},{:.16e},{:.16e}",
                    r.name, r.passed, r.cases, r.worst, r.tolerance
                )?;
            }
            art.finish(None)?;
            let failed: Vec<_> = results
                .iter()
                .filter(|r| !r.passed)
                .map(|r| r.name)
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Failed(format!(
                    "failed suites: {}",
                    failed.join(", ")
                )))
            }
        }
        Command::Orbits(common) => {
            let cfg = load(common)?;
            let threads = thread_count(cli.threads, Some(&cfg))?;
            let table: OrbitTable = with_threads(threads, || {
                Experiment::new(&cfg)?.orbit_table(cfg.state, &cfg.detector)
            })??;
            let mut art = Artifact::new(Some(&cfg), cfg.seeds.sampling, threads);
            table.write_csv(&mut art.body)?;
            art.finish(output_path(common, &cfg))
        }
        Command::ClassicalSample(common) => {
            let cfg = load(common)?;
            if cfg.classical.is_none() {
                return Err(CliError::Config(GbsError::InvalidParameter {
                    name: "classical".into(),
                    reason: "section required by classical-sample".into(),
                }));
            }
            let threads = thread_count(cli.threads, Some(&cfg))?;
            let set = with_threads(threads, || Experiment::new(&cfg)?.classical_samples())??;
            let mut art = Artifact::new(Some(&cfg), cfg.seeds.sampling, threads);
            let cols: Vec<String> = (0..set.modes).map(|i| format!("n{i}")).collect();
            writeln!(art.body, "count,{}", cols.join(","))?;
            for (p, c) in &set.counts {
                let vals: Vec<String> = p.0.iter().map(|v| v.to_string()).collect();
                writeln!(art.body, "{c},{}", vals.join(","))?;
            }
            art.finish(output_path(common, &cfg))
        }
        Command::Chi2(common) => {
            let cfg = load(common)?;
            if cfg.classical.is_none() {
                return Err(CliError::Config(GbsError::InvalidParameter {
                    name: "classical".into(),
                    reason: "section required by chi2".into(),
                }));
            }
            let threads = thread_count(cli.threads, Some(&cfg))?;
            let rows = with_threads(threads, || Experiment::new(&cfg)?.chi_square_rows())??;
            let mut art = Artifact::new(Some(&cfg), cfg.seeds.sampling, threads);
            write_validation_csv(&rows, &mut art.body)?;
            art.finish(output_path(common, &cfg))
        }
        Command::Bayes { common, swap } => {
            let cfg = load(common)?;
            if cfg.bayes.is_none() {
                return Err(CliError::Config(GbsError::InvalidParameter {
                    name: "bayes".into(),
                    reason: "section required by bayes".into(),
                }));
            }
            let threads = thread_count(cli.threads, Some(&cfg))?;
            let res = with_threads(threads, || Experiment::new(&cfg)?.bayes(*swap))??;
            let test = if *swap { "bayes_swapped" } else { "bayes" };
            let rows = [
                ValidationRow {
                    test: test.into(),
                    l: None,
                    statistic: res.delta_h,
                    k: None,
                    n: Some(res.draws as u64),
                    seed: cfg.seeds.sampling,
                },
                ValidationRow {
                    test: format!("{test}_stderr"),
                    l: None,
                    statistic: res.stderr,
                    k: None,
                    n: Some(res.draws as u64),
                    seed: cfg.seeds.sampling,
                },
                ValidationRow {
                    test: format!("{test}_floored"),
                    l: None,
                    statistic: res.floored as f64,
                    k: None,
                    n: Some(res.draws as u64),
                    seed: cfg.seeds.sampling,
                },
            ];
            let mut art = Artifact::new(Some(&cfg), cfg.seeds.sampling, threads);
            write_validation_csv(&rows, &mut art.body)?;
            art.finish(output_path(common, &cfg))
        }
        Command::Functional { common, pattern } => {
            let cfg = load(common)?;
            if pattern.len() != cfg.modes {
                return Err(CliError::Config(GbsError::InvalidParameter {
                    name: "pattern".into(),
                    reason: format!("{} entries for {} modes", pattern.len(), cfg.modes),
                }));
            }
            let threads = thread_count(cli.threads, Some(&cfg))?;
            let (p, f, norm) = with_threads(threads, || -> gbsval::Result<_> {
                let exp = Experiment::new(&cfg)?;
                let eval = PatternEvaluator::new(&exp.state(cfg.state)?, &cfg.detector)?;
                Ok((
                    eval.probability(pattern)?,
                    eval.functional(pattern)?,
                    eval.kernel().norm_q,
                ))
            })??;
            let mut art = Artifact::new(Some(&cfg), cfg.seeds.sampling, threads);
            writeln!(art.body, "pattern,probability,functional,norm_q")?;
            let pat: Vec<String> = pattern.iter().map(|v| v.to_string()).collect();
            writeln!(art.body, "{},{p:.16e},{f:.16e},{norm:.16e}", pat.join(" "))?;
            art.finish(output_path(common, &cfg))
        }
    }
}
