use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use frlbench_core::bench::{ingest_acs, ingest_health, synth_generate, AcsFilterSpec, HealthSpec, SynthSpec, ACS_PROXY, HEALTH_PROXY};
use frlbench_core::criteria::{evaluate_criteria, render_csv, render_table, CriteriaThresholds};
use frlbench_core::eval::{evaluate_representations, Protocol};
use frlbench_core::fare::{build_tree, FareTree};
use frlbench_core::report::emit_report;
use frlbench_core::sweep::{fare_params, load_baselines, run_sweep, EncoderKind, GridPoint, RecordStore, SweepConfig, TrialStatus};
use frlbench_core::tabular::{load_split, read_reps_csv, save_dataset, split_dir};
use frlbench_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CRITERIA: u8 = 3;

#[derive(Parser)]
#[command(name = "frlbench", version, about = "Fair representation transfer benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Encoder {
    Fare,
    FareRec,
    FareRecAbs,
}

impl From<Encoder> for EncoderKind {
    fn from(e: Encoder) -> Self {
        match e {
            Encoder::Fare => EncoderKind::Fare,
            Encoder::FareRec => EncoderKind::FareRec,
            Encoder::FareRecAbs => EncoderKind::FareRecAbs,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a JSON spec
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the ACS transfer dataset from a person-record CSV
    IngestAcs {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON file overriding the row filter
        #[arg(long)]
        filter: Option<PathBuf>,
    },
    /// Build the health transfer dataset from a per-patient CSV
    IngestHealth {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "age")]
        age_column: String,
        #[arg(long, default_value_t = 60.0)]
        age_threshold: f64,
    },
    /// Split a dataset directory into train and test files
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        test_fraction: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Check the dataset's tasks against the benchmark criteria
    Validate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        proxy: String,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// JSON file with classifier settings and run count
        #[arg(long)]
        protocol: Option<PathBuf>,
        /// Report directory; defaults to the dataset directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a tree encoder and save it as JSON
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        encoder: Encoder,
        /// Training labels; may be omitted when lambda_y is 0
        #[arg(long)]
        task: Option<String>,
        /// JSON object of hyperparameters
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate representations on downstream tasks
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, conflicts_with_all = ["reps_train", "reps_test"])]
        model: Option<PathBuf>,
        #[arg(long, requires = "reps_test")]
        reps_train: Option<PathBuf>,
        #[arg(long, requires = "reps_train")]
        reps_test: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        tasks: Vec<String>,
        #[arg(long)]
        protocol: Option<PathBuf>,
        /// Output file; printed to stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a hyperparameter sweep described by a JSON config
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Extract Pareto fronts from a sweep's record store
    Pareto {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write an SVG plot per task
        #[arg(long)]
        svg: bool,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!("{}: {e}", path.display())).into()
    })
}

fn protocol(path: Option<&Path>) -> anyhow::Result<Protocol> {
    Ok(match path {
        Some(p) => read_json(p)?,
        None => Protocol::default(),
    })
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Synth { spec, out } => {
            let spec: SynthSpec = read_json(&spec)?;
            let d = synth_generate(&spec)?;
            save_dataset(&out, "synthetic", &d, spec.proxy.as_deref())?;
            println!("wrote {} rows, {} tasks to {}", d.n(), d.tasks().len(), out.display());
        }
        Command::IngestAcs { csv, out, filter } => {
            let spec = match filter {
                Some(p) => read_json(&p)?,
                None => AcsFilterSpec::default(),
            };
            let d = ingest_acs(&csv, &spec)?;
            save_dataset(&out, "acs", &d, Some(ACS_PROXY))?;
            println!("wrote {} rows, {} features to {}", d.n(), d.n_features(), out.display());
        }
        Command::IngestHealth {
            csv,
            out,
            age_column,
            age_threshold,
        } => {
            let spec = HealthSpec {
                age_column,
                age_threshold,
            };
            let d = ingest_health(&csv, &spec)?;
            save_dataset(&out, "health", &d, Some(HEALTH_PROXY))?;
            println!("wrote {} rows, {} features to {}", d.n(), d.n_features(), out.display());
        }
        Command::Split {
            data,
            test_fraction,
            seed,
        } => {
            let s = split_dir(&data, test_fraction, seed)?;
            println!("train {} rows, test {} rows", s.train.n(), s.test.n());
        }
        Command::Validate {
            data,
            proxy,
            thresholds,
            protocol: proto,
            out,
        } => {
            let thresholds = match thresholds {
                Some(p) => read_json(&p)?,
                None => CriteriaThresholds::default(),
            };
            let stored = load_split(&data)?;
            let report = evaluate_criteria(&stored.split, &proxy, &thresholds, &protocol(proto.as_deref())?)?;
            let out = out.unwrap_or(data);
            fs::create_dir_all(&out)?;
            fs::write(out.join("criteria.json"), serde_json::to_string_pretty(&report)?)?;
            fs::write(out.join("criteria.csv"), render_csv(&report)?)?;
            print!("{}", render_table(&report));
            if !report.accepted {
                return Ok(EXIT_CRITERIA);
            }
        }
        Command::Train {
            data,
            encoder,
            task,
            params,
            out,
        } => {
            let point: GridPoint = read_json(&params)?;
            let p = fare_params(encoder.into(), &point, 0)?;
            let stored = load_split(&data)?;
            let tree = build_tree(&stored.split.train, task.as_deref(), &p)?;
            tree.save(&out)?;
            println!("tree with {} leaves written to {}", tree.n_leaves(), out.display());
        }
        Command::Evaluate {
            data,
            model,
            reps_train,
            reps_test,
            tasks,
            protocol: proto,
            out,
        } => {
            let stored = load_split(&data)?;
            let split = &stored.split;
            let proto = protocol(proto.as_deref())?;
            let points = match (model, reps_train, reps_test) {
                (Some(m), _, _) => {
                    let tree = FareTree::load(&m)?;
                    let train = tree.encode_matrix(split.train.features())?;
                    let test = tree.encode_matrix(split.test.features())?;
                    let config = serde_json::json!({ "model": m.display().to_string() });
                    evaluate_representations(split, train.view(), test.view(), &tasks, &proto, &config)?
                }
                (None, Some(a), Some(b)) => {
                    let (train, test) = (read_reps_csv(&a)?, read_reps_csv(&b)?);
                    let config = serde_json::json!({ "reps_train": a.display().to_string() });
                    evaluate_representations(split, train.view(), test.view(), &tasks, &proto, &config)?
                }
                _ => bail!(Error::Config(
                    "either --model or --reps-train and --reps-test is required".into()
                )),
            };
            let text = serde_json::to_string_pretty(&points)?;
            match out {
                Some(p) => fs::write(&p, text)?,
                None => println!("{text}"),
            }
        }
        Command::Sweep { config } => {
            let c = SweepConfig::load(&config)?;
            let o = run_sweep(&c)?;
            let failed = o.records.iter().filter(|r| r.status == TrialStatus::Failed).count();
            println!(
                "{} trials: {} run, {} already complete, {} failed; records in {}",
                o.records.len(),
                o.executed,
                o.skipped,
                failed,
                c.out.display()
            );
        }
        Command::Pareto { records, out, svg } => {
            let store = RecordStore::open(&records)?;
            let baselines = load_baselines(&records)?;
            let fronts = emit_report(&store.all()?, &baselines, &out, svg)?;
            for f in &fronts {
                println!("{}: {} of {} points on the front -> {}", f.task, f.front.len(), f.n_points, f.csv);
            }
        }
    }
    Ok(0)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidParameter(_) | Error::TaskRequired) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
