//! `nngp`: kernel recursions, output samples, convergence studies, switching
//! ablations, last-layer checks and rate fits from the command line.
//!
//! Exit status: 0 on success, 2 for usage and configuration errors, 1 for
//! failures while running.

mod overrides;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nngp_core::experiments::emit::{self, ConvergenceDocument, Format};
use nngp_core::experiments::{
    fit_rate, run_convergence_study, run_last_layer_check, run_switch_ablation_with, Coupling, Observable,
    SampleRule, StudyConfig, DEFAULT_MIN_WIDTH, DEFAULT_SEED,
};
use nngp_core::kernel::DEFAULT_ORDER;
use nngp_core::metrics::Metric;
use nngp_core::{kernel_cross_sequence, kernel_diag_sequence, sample_outputs, QuadratureRule};

use overrides::{parse_input, NetworkOverrides};

pub(crate) use Failure as CliFailure;

#[derive(Debug, Parser)]
#[command(name = "nngp", version, about = "Finite-width networks against their Gaussian limits")]
struct Cli {
    /// Master seed (default 271828).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Output {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Limit covariances K(l) at every layer.
    Kernel {
        #[command(flatten)]
        net: NetworkOverrides,
        /// Second input for the cross covariance, as for --input.
        #[arg(long)]
        second_input: Option<String>,
        /// Gauss-Hermite order.
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Raw output realizations with the limit variance in the header.
    Sample {
        #[command(flatten)]
        net: NetworkOverrides,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        /// Output coordinates to keep (0-based); all when omitted.
        #[arg(long, value_delimiter = ',')]
        project: Option<Vec<usize>>,
        #[command(flatten)]
        output: Output,
    },
    /// Width sweep of distances to the Gaussian limit.
    Convergence {
        /// Study config JSON.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Embedded study: appendix-a or appendix-a-desk.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, value_delimiter = ',')]
        widths_schedule: Option<Vec<usize>>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// M(n) = ceil(samples_base * n / samples_min_width).
        #[arg(long)]
        samples_base: Option<usize>,
        #[arg(long)]
        samples_min_width: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        metric: Option<Vec<Metric>>,
        #[command(flatten)]
        net: overrides::FieldOverrides,
        #[command(flatten)]
        output: Output,
    },
    /// Paired estimates of the change in E F when one layer is made Gaussian.
    Ablation {
        #[command(flatten)]
        net: NetworkOverrides,
        /// Switch indices; defaults to -1..=L-2.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        k_list: Option<Vec<i64>>,
        #[arg(long, value_enum, default_value_t = ObservableKind::Tanh)]
        observable: ObservableKind,
        #[arg(long, default_value_t = 0)]
        coordinate: usize,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = CouplingArg::Paired)]
        coupling: CouplingArg,
        #[command(flatten)]
        output: Output,
    },
    /// W2 between the original and a Gaussian output layer on a shared last hidden layer.
    LastLayer {
        #[command(flatten)]
        net: NetworkOverrides,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
        last_widths: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        samples_base: usize,
        #[arg(long, default_value_t = 16)]
        samples_min_width: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Log-log slope of a convergence table; prints the fit as JSON.
    Fit {
        /// Convergence CSV or JSON.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "w1")]
        metric: Metric,
        #[arg(long, default_value_t = DEFAULT_MIN_WIDTH)]
        min_width: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObservableKind {
    Tanh,
    Cos,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CouplingArg {
    Paired,
    Independent,
}

/// Failure split by exit status.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<nngp_core::Error> for Failure {
    fn from(e: nngp_core::Error) -> Self {
        if e.is_validation() {
            Failure::Usage(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Usage(anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match cli.command {
        Command::Kernel { net, second_input, order, output } => {
            let config = net.resolve()?;
            let rule = QuadratureRule::gauss_hermite(order)?;
            let x = config.input_vector();
            let seq = match second_input {
                Some(y) => kernel_cross_sequence(&config, &x, &parse_input(&y)?.resolve(config.input_dim()), &rule)?,
                None => kernel_diag_sequence(&config, &x, &rule)?,
            };
            let records = seq.records();
            match output.format {
                Format::Csv => deliver(output.out.as_deref(), &emit::kernel_csv(&records)),
                Format::Json => deliver(output.out.as_deref(), &to_json(&records)),
            }
        }
        Command::Sample { net, count, project, output } => {
            let config = net.resolve()?;
            let indices: Vec<usize> = project.unwrap_or_else(|| (0..config.output_dim()).collect());
            let limit = kernel_diag_sequence(&config, &config.input_vector(), &QuadratureRule::default())?
                .limit_variance();
            let batch = sample_outputs(&config, &config.input_vector(), count, &indices, seed)?;
            match output.format {
                Format::Csv => deliver(output.out.as_deref(), &emit::samples_csv(&batch, limit)),
                Format::Json => {
                    #[derive(Serialize)]
                    struct Doc<'a> {
                        limit_variance: f64,
                        batch: &'a nngp_core::SampleBatch,
                    }
                    deliver(output.out.as_deref(), &to_json(&Doc { limit_variance: limit, batch: &batch }))
                }
            }
        }
        Command::Convergence {
            config,
            preset,
            widths_schedule,
            repetitions,
            samples_base,
            samples_min_width,
            metric,
            net,
            output,
        } => {
            let mut study = match (&config, &preset) {
                (Some(path), _) => StudyConfig::from_json_str(&read_config(path)?)?,
                (None, Some(name)) => StudyConfig::preset(name)?,
                (None, None) => StudyConfig::appendix_a_desk(),
            };
            net.apply(&mut study.network)?;
            if let Some(w) = widths_schedule {
                study.widths_schedule = w;
            }
            if let Some(r) = repetitions {
                study.repetitions = r;
            }
            if let Some(b) = samples_base {
                study.samples.base = b;
            }
            if let Some(m) = samples_min_width {
                study.samples.min_width = m;
            }
            if let Some(m) = metric {
                study.metrics = m;
            }
            if let Some(s) = cli.seed {
                study.master_seed = s;
            }
            study.validate()?;
            let table = run_convergence_study(&study)?;
            let body = match output.format {
                Format::Csv => emit::convergence_csv(&table),
                Format::Json => emit::convergence_json(&table),
            };
            deliver(output.out.as_deref(), &body)
        }
        Command::Ablation { net, k_list, observable, coordinate, samples, coupling, output } => {
            let config = net.resolve()?;
            let k_list = k_list.unwrap_or_else(|| (-1..=config.depth as i64 - 2).collect());
            let observable = match observable {
                ObservableKind::Tanh => Observable::Tanh { coordinate },
                ObservableKind::Cos => Observable::Cos { coordinate },
            };
            let coupling = match coupling {
                CouplingArg::Paired => Coupling::Paired,
                CouplingArg::Independent => Coupling::Independent,
            };
            let table = run_switch_ablation_with(
                &config,
                &config.input_vector(),
                &k_list,
                observable,
                samples,
                seed,
                coupling,
            )?;
            match output.format {
                Format::Csv => deliver(output.out.as_deref(), &emit::switch_csv(&table)),
                Format::Json => deliver(output.out.as_deref(), &to_json(&table)),
            }
        }
        Command::LastLayer { net, last_widths, samples_base, samples_min_width, output } => {
            let config = net.resolve()?;
            let rule = SampleRule { base: samples_base, min_width: samples_min_width };
            if rule.min_width == 0 {
                return Err(nngp_core::Error::InvalidConfig {
                    key: "samples_min_width".into(),
                    reason: "must be positive".into(),
                }
                .into());
            }
            let table = run_last_layer_check(&config, &config.input_vector(), &last_widths, rule, seed)?;
            match output.format {
                Format::Csv => deliver(output.out.as_deref(), &emit::last_layer_csv(&table)),
                Format::Json => deliver(output.out.as_deref(), &to_json(&table)),
            }
        }
        Command::Fit { input, metric, min_width, out } => {
            let text = read_config(&input)?;
            let context = input.display().to_string();
            let points = if text.trim_start().starts_with('{') {
                let doc: ConvergenceDocument = serde_json::from_str(&text)
                    .with_context(|| format!("{context}: not a convergence document"))
                    .map_err(Failure::Usage)?;
                doc.into_table().series(metric)
            } else {
                emit::csv_series(&emit::parse_convergence_csv(&text, &context)?, metric)
            };
            let fit = fit_rate(&points, min_width)?;
            deliver(out.as_deref(), &to_json(&fit))
        }
    }
}

/// Reads a file named on the command line; a missing file is a usage error.
fn read_config(path: &Path) -> Result<String, Failure> {
    emit::read_file(path).map_err(|e| Failure::Usage(e.into()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn deliver(out: Option<&Path>, body: &str) -> Outcome {
    match out {
        Some(path) => Ok(emit::write_file(path, body)?),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| Failure::Runtime(e.into()))
        }
    }
}
