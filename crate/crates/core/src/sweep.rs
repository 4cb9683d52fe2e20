//! Hyperparameter sweeps over encoders with a resumable on-disk record store.
//!
//! Every grid point becomes a trial keyed by a hash of everything that
//! determines its result. Completed trials are skipped on rerun; failed ones
//! are retried.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{evaluate_representations, unfair_baseline, Protocol, TradeoffPoint};
use crate::fare::{build_tree, CriterionWeights, FareParams, RecMode};
use crate::metrics::{majority_accuracy, smc};
use crate::tabular::{load_split, read_json, read_reps_csv, write_json, SplitDataset};

pub const RECORDS_DIR: &str = "records";
pub const INDEX_FILE: &str = "index.json";
pub const BASELINES_FILE: &str = "baselines.json";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Fare,
    FareRec,
    FareRecAbs,
    Identity,
    External,
}

impl EncoderKind {
    pub fn is_tree(self) -> bool {
        matches!(self, EncoderKind::Fare | EncoderKind::FareRec | EncoderKind::FareRecAbs)
    }

    fn rec_mode(self) -> RecMode {
        match self {
            EncoderKind::FareRec => RecMode::MeanSquared,
            EncoderKind::FareRecAbs => RecMode::AbsMedian,
            _ => RecMode::None,
        }
    }
}

/// Which labels a tree encoder is grown on.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// The dataset's proxy task.
    #[default]
    Proxy,
    /// A fixed named task.
    Task(String),
    /// Each evaluation task in turn, evaluated only on itself.
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fare,
    FareRec,
}

pub type GridPoint = BTreeMap<String, f64>;

const PARAM_NAMES: [&str; 8] = [
    "gamma",
    "lambda_y",
    "lambda_f",
    "lambda_r",
    "max_leaves",
    "min_leaf_samples",
    "val_fraction",
    "seed",
];

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl Preset {
    pub fn grid(self) -> BTreeMap<String, Vec<f64>> {
        let mut g = BTreeMap::new();
        match self {
            Preset::Fare => {
                g.insert("gamma".into(), linspace(0.0, 1.0, 11));
                g.insert(
                    "max_leaves".into(),
                    vec![2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0],
                );
            }
            Preset::FareRec => {
                g.insert(
                    "max_leaves".into(),
                    (0..7).map(|i| 200.0 * f64::powi(2.0, i)).collect(),
                );
                g.insert("lambda_y".into(), vec![0.0]);
                g.insert("lambda_f".into(), vec![0.1, 0.3, 1.0]);
                g.insert(
                    "lambda_r".into(),
                    (-3..=3).map(|e| 10f64.powi(e)).collect(),
                );
            }
        }
        g.insert("min_leaf_samples".into(), vec![100.0]);
        g.insert("val_fraction".into(), vec![0.3]);
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Dataset directory holding a split.
    pub data: PathBuf,
    pub encoder: EncoderKind,
    #[serde(default)]
    pub training: TrainingMode,
    /// Grid values per hyperparameter; entries override the preset's.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub protocol: Protocol,
    /// Evaluation tasks; all dataset tasks when absent.
    #[serde(default)]
    pub tasks: Option<Vec<String>>,
    pub out: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Representation files for the external encoder.
    #[serde(default)]
    pub reps_train: Option<PathBuf>,
    #[serde(default)]
    pub reps_test: Option<PathBuf>,
    /// Default encoder seed for points without a `seed` entry.
    #[serde(default)]
    pub seed: u64,
}

fn default_workers() -> usize {
    1
}

impl SweepConfig {
    /// Reads a config file; relative paths are taken from its directory.
    pub fn load(path: &Path) -> Result<SweepConfig> {
        let mut c: SweepConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut c.data);
        resolve(&mut c.out);
        c.reps_train.as_mut().map(resolve);
        c.reps_test.as_mut().map(resolve);
        Ok(c)
    }

    /// The effective grid: preset values overridden by explicit entries.
    pub fn effective_grid(&self) -> BTreeMap<String, Vec<f64>> {
        let mut g = self.preset.map(Preset::grid).unwrap_or_default();
        g.extend(self.grid.clone());
        g
    }
}

/// Cartesian product of the grid, in lexicographic order of the sorted keys.
pub fn grid_points(grid: &BTreeMap<String, Vec<f64>>) -> Vec<GridPoint> {
    let mut points = vec![GridPoint::new()];
    for (name, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.insert(name.clone(), v);
                    q
                })
            })
            .collect();
    }
    points
}

fn count_param(point: &GridPoint, name: &str, default: usize) -> Result<usize> {
    match point.get(name) {
        None => Ok(default),
        Some(&v) if v >= 0.0 && v.fract() == 0.0 && v < 1e15 => Ok(v as usize),
        Some(v) => Err(Error::Config(format!("{name} = {v} is not a count"))),
    }
}

/// Tree parameters of a grid point. `gamma` sets `lambda_y = 1 - gamma`
/// and `lambda_f = gamma`; otherwise missing weights default to 0.
pub fn fare_params(kind: EncoderKind, point: &GridPoint, default_seed: u64) -> Result<FareParams> {
    if !kind.is_tree() {
        return Err(Error::Config(format!("{kind:?} has no tree parameters")));
    }
    if let Some(k) = point.keys().find(|k| !PARAM_NAMES.contains(&k.as_str())) {
        return Err(Error::Config(format!("unknown hyperparameter \"{k}\"")));
    }
    let get = |k: &str| point.get(k).copied().unwrap_or(0.0);
    let (lambda_y, lambda_f) = match point.get("gamma") {
        Some(&g) => {
            if point.contains_key("lambda_y") || point.contains_key("lambda_f") {
                return Err(Error::Config(
                    "gamma cannot be combined with lambda_y or lambda_f".into(),
                ));
            }
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Config(format!("gamma {g} outside [0, 1]")));
            }
            (1.0 - g, g)
        }
        None => (get("lambda_y"), get("lambda_f")),
    };
    let weights = CriterionWeights::new(lambda_y, lambda_f, get("lambda_r"), kind.rec_mode())
        .map_err(|e| Error::Config(e.to_string()))?;
    let p = FareParams {
        weights,
        max_leaves: count_param(point, "max_leaves", 200)?,
        min_leaf_samples: count_param(point, "min_leaf_samples", 100)?,
        val_fraction: point.get("val_fraction").copied().unwrap_or(0.3),
        seed: count_param(point, "seed", default_seed as usize)? as u64,
    };
    p.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub key: String,
    pub encoder: EncoderKind,
    pub training_task: Option<String>,
    pub point: GridPoint,
    pub tasks: Vec<String>,
    #[serde(skip)]
    pub params: Option<FareParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub key: String,
    pub encoder: EncoderKind,
    pub training_task: Option<String>,
    pub point: GridPoint,
    pub split_id: String,
    pub status: TrialStatus,
    #[serde(default)]
    pub error: Option<String>,
    pub n_leaves: Option<usize>,
    pub points: Vec<TradeoffPoint>,
    pub seconds: f64,
    pub version: String,
}

/// Everything besides the trial itself that determines its outcome.
#[derive(Debug, Clone, Copy)]
pub struct TrialContext<'a> {
    pub split: &'a SplitDataset,
    pub split_id: &'a str,
    pub protocol: &'a Protocol,
    pub external: Option<(&'a Array2<f64>, &'a Array2<f64>)>,
}

/// Stable key of a trial: hash of the canonical JSON of its inputs.
pub fn trial_key(
    encoder: EncoderKind,
    training_task: Option<&str>,
    point: &GridPoint,
    tasks: &[String],
    split_id: &str,
    protocol: &Protocol,
    external_digest: Option<&str>,
) -> String {
    let canonical = serde_json::json!({
        "encoder": encoder,
        "training_task": training_task,
        "point": point,
        "tasks": tasks,
        "split_id": split_id,
        "protocol": protocol,
        "external": external_digest,
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    hex::encode(&digest[..16])
}

/// Expands a config into trials, validating every grid point.
pub fn plan_trials(
    config: &SweepConfig,
    split: &SplitDataset,
    split_id: &str,
    proxy: Option<&str>,
    external_digest: Option<&str>,
) -> Result<Vec<Trial>> {
    let tasks: Vec<String> = match &config.tasks {
        Some(t) => t.clone(),
        None => split.train.task_names().iter().map(|s| s.to_string()).collect(),
    };
    if tasks.is_empty() {
        return Err(Error::Config("no evaluation tasks".into()));
    }
    for t in &tasks {
        if !split.train.has_task(t) {
            return Err(Error::UnknownTask(t.clone()));
        }
    }
    let grid = config.effective_grid();
    let points = if config.encoder.is_tree() {
        if grid.is_empty() || grid.values().any(Vec::is_empty) {
            return Err(Error::Config("the hyperparameter grid is empty".into()));
        }
        grid_points(&grid)
    } else {
        if !grid.is_empty() {
            return Err(Error::Config(format!(
                "encoder {:?} takes no hyperparameters",
                config.encoder
            )));
        }
        vec![GridPoint::new()]
    };
    let runs: Vec<(Option<String>, Vec<String>)> = if !config.encoder.is_tree() {
        vec![(None, tasks.clone())]
    } else {
        match &config.training {
            TrainingMode::Proxy => {
                let p = proxy.ok_or_else(|| {
                    Error::Config("dataset has no proxy task; set training explicitly".into())
                })?;
                if !split.train.has_task(p) {
                    return Err(Error::UnknownTask(p.to_string()));
                }
                vec![(Some(p.to_string()), tasks.clone())]
            }
            TrainingMode::Task(t) => {
                if !split.train.has_task(t) {
                    return Err(Error::UnknownTask(t.clone()));
                }
                vec![(Some(t.clone()), tasks.clone())]
            }
            TrainingMode::Eval => tasks.iter().map(|t| (Some(t.clone()), vec![t.clone()])).collect(),
        }
    };
    let mut trials = Vec::new();
    for point in &points {
        let params = if config.encoder.is_tree() {
            Some(fare_params(config.encoder, point, config.seed)?)
        } else {
            None
        };
        for (training_task, eval_tasks) in &runs {
            trials.push(Trial {
                key: trial_key(
                    config.encoder,
                    training_task.as_deref(),
                    point,
                    eval_tasks,
                    split_id,
                    &config.protocol,
                    external_digest,
                ),
                encoder: config.encoder,
                training_task: training_task.clone(),
                point: point.clone(),
                tasks: eval_tasks.clone(),
                params,
            });
        }
    }
    Ok(trials)
}

fn run_trial(ctx: &TrialContext<'_>, trial: &Trial) -> Result<(Option<usize>, Vec<TradeoffPoint>)> {
    let split = ctx.split;
    let mut config = serde_json::json!({
        "encoder": trial.encoder,
        "training_task": trial.training_task,
    });
    for (k, v) in &trial.point {
        config[k] = serde_json::json!(v);
    }
    match trial.encoder {
        EncoderKind::Identity => {
            let points = evaluate_representations(
                split,
                split.train.features(),
                split.test.features(),
                &trial.tasks,
                ctx.protocol,
                &config,
            )?;
            Ok((None, points))
        }
        EncoderKind::External => {
            let (train, test) = ctx
                .external
                .ok_or_else(|| Error::Config("external encoder needs representation files".into()))?;
            let points = evaluate_representations(split, train.view(), test.view(), &trial.tasks, ctx.protocol, &config)?;
            Ok((None, points))
        }
        _ => {
            let params = trial
                .params
                .ok_or_else(|| Error::Config("trial without tree parameters".into()))?;
            let tree = build_tree(&split.train, trial.training_task.as_deref(), &params)?;
            let reps_train = tree.encode_matrix(split.train.features())?;
            let reps_test = tree.encode_matrix(split.test.features())?;
            let points = evaluate_representations(
                split,
                reps_train.view(),
                reps_test.view(),
                &trial.tasks,
                ctx.protocol,
                &config,
            )?;
            Ok((Some(tree.n_leaves()), points))
        }
    }
}

/// Runs one trial; errors are captured in the record.
pub fn execute_trial(ctx: &TrialContext<'_>, trial: &Trial) -> TrialRecord {
    let start = Instant::now();
    let outcome = run_trial(ctx, trial);
    let seconds = start.elapsed().as_secs_f64();
    let (status, error, n_leaves, points) = match outcome {
        Ok((n_leaves, points)) => (TrialStatus::Completed, None, n_leaves, points),
        Err(e) => (TrialStatus::Failed, Some(e.to_string()), None, Vec::new()),
    };
    TrialRecord {
        key: trial.key.clone(),
        encoder: trial.encoder,
        training_task: trial.training_task.clone(),
        point: trial.point.clone(),
        split_id: ctx.split_id.to_string(),
        status,
        error,
        n_leaves,
        points,
        seconds,
        version: VERSION.to_string(),
    }
}

/// Directory of one JSON record per trial plus an index.
#[derive(Debug, Clone)]
pub struct RecordStore {
    root: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub key: String,
    pub status: TrialStatus,
    pub encoder: EncoderKind,
    pub training_task: Option<String>,
    pub point: GridPoint,
}

impl RecordStore {
    pub fn open(root: &Path) -> Result<RecordStore> {
        let records = root.join(RECORDS_DIR);
        fs::create_dir_all(&records).map_err(|e| Error::io(&records, e))?;
        Ok(RecordStore {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn record_path(&self, key: &str) -> PathBuf {
        self.root.join(RECORDS_DIR).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<TrialRecord>> {
        let path = self.record_path(key);
        if !path.exists() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }

    pub fn put(&self, record: &TrialRecord) -> Result<()> {
        write_json(&self.record_path(&record.key), record)
    }

    /// All stored records, ordered by key.
    pub fn all(&self) -> Result<Vec<TrialRecord>> {
        let dir = self.root.join(RECORDS_DIR);
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        paths.iter().map(|p| read_json(p)).collect()
    }

    pub fn write_index(&self) -> Result<Vec<IndexEntry>> {
        let index: Vec<IndexEntry> = self
            .all()?
            .into_iter()
            .map(|r| IndexEntry {
                key: r.key,
                status: r.status,
                encoder: r.encoder,
                training_task: r.training_task,
                point: r.point,
            })
            .collect();
        write_json(&self.root.join(INDEX_FILE), &index)?;
        Ok(index)
    }
}

/// Reference statistics of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub unfair: TradeoffPoint,
    pub majority_accuracy: f64,
    pub smc_with_proxy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub split_id: String,
    pub protocol: Protocol,
    pub proxy: Option<String>,
    pub tasks: BTreeMap<String, Baseline>,
}

pub fn compute_baselines(
    split: &SplitDataset,
    split_id: &str,
    tasks: &[String],
    proxy: Option<&str>,
    protocol: &Protocol,
) -> Result<Baselines> {
    let entries = tasks
        .iter()
        .map(|t| {
            let train = split.train.task(t)?;
            let test = split.test.task(t)?;
            let smc_with_proxy = match proxy {
                Some(p) => Some(smc(test, split.test.task(p)?)?),
                None => None,
            };
            Ok((
                t.clone(),
                Baseline {
                    unfair: unfair_baseline(split, t, protocol)?,
                    majority_accuracy: majority_accuracy(train, test)?,
                    smc_with_proxy,
                },
            ))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Baselines {
        split_id: split_id.to_string(),
        protocol: *protocol,
        proxy: proxy.map(str::to_string),
        tasks: entries,
    })
}

fn file_digest(paths: &[&Path]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        h.update(fs::read(p).map_err(|e| Error::io(p, e))?);
    }
    Ok(hex::encode(&h.finalize()[..16]))
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Records of this sweep's trials, ordered by key.
    pub records: Vec<TrialRecord>,
    pub executed: usize,
    pub skipped: usize,
}

/// Runs a sweep against an in-memory split, persisting into `config.out`.
pub fn run_sweep_on(
    config: &SweepConfig,
    split: &SplitDataset,
    split_id: &str,
    proxy: Option<&str>,
) -> Result<SweepOutcome> {
    config.protocol.classifier.validate()?;
    if config.workers < 1 {
        return Err(Error::Config("workers must be >= 1".into()));
    }
    let external = match (config.encoder, &config.reps_train, &config.reps_test) {
        (EncoderKind::External, Some(a), Some(b)) => Some((read_reps_csv(a)?, read_reps_csv(b)?, file_digest(&[a, b])?)),
        (EncoderKind::External, _, _) => {
            return Err(Error::Config(
                "external encoder needs reps_train and reps_test".into(),
            ))
        }
        _ => None,
    };
    let digest = external.as_ref().map(|e| e.2.as_str());
    let trials = plan_trials(config, split, split_id, proxy, digest)?;
    let store = RecordStore::open(&config.out)?;
    ensure_baselines(&store, split, split_id, &trials, proxy, &config.protocol)?;

    let mut done = BTreeMap::new();
    let mut pending = Vec::new();
    for t in &trials {
        match store.get(&t.key)? {
            Some(r) if r.status == TrialStatus::Completed => {
                done.insert(t.key.clone(), r);
            }
            _ => pending.push(t),
        }
    }
    let skipped = done.len();
    let ctx = TrialContext {
        split,
        split_id,
        protocol: &config.protocol,
        external: external.as_ref().map(|e| (&e.0, &e.1)),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let fresh = pool.install(|| {
        pending
            .par_iter()
            .map(|t| {
                let r = execute_trial(&ctx, t);
                store.put(&r)?;
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let executed = fresh.len();
    for r in fresh {
        done.insert(r.key.clone(), r);
    }
    store.write_index()?;
    Ok(SweepOutcome {
        records: done.into_values().collect(),
        executed,
        skipped,
    })
}

fn ensure_baselines(
    store: &RecordStore,
    split: &SplitDataset,
    split_id: &str,
    trials: &[Trial],
    proxy: Option<&str>,
    protocol: &Protocol,
) -> Result<()> {
    let path = store.root().join(BASELINES_FILE);
    let mut tasks: Vec<String> = trials.iter().flat_map(|t| t.tasks.iter().cloned()).collect();
    tasks.sort();
    tasks.dedup();
    let existing: Option<Baselines> = if path.exists() { Some(read_json(&path)?) } else { None };
    let mut base = match existing {
        Some(b) if b.split_id == split_id && b.protocol == *protocol && b.proxy.as_deref() == proxy => b,
        _ => Baselines {
            split_id: split_id.to_string(),
            protocol: *protocol,
            proxy: proxy.map(str::to_string),
            tasks: BTreeMap::new(),
        },
    };
    let missing: Vec<String> = tasks.into_iter().filter(|t| !base.tasks.contains_key(t)).collect();
    if missing.is_empty() && path.exists() {
        return Ok(());
    }
    let fresh = compute_baselines(split, split_id, &missing, proxy, protocol)?;
    base.tasks.extend(fresh.tasks);
    write_json(&path, &base)
}

/// Runs a sweep over the split stored in `config.data`.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    let stored = load_split(&config.data)?;
    run_sweep_on(
        config,
        &stored.split,
        &stored.split_meta.split_id,
        stored.meta.proxy.as_deref(),
    )
}

pub fn load_baselines(root: &Path) -> Result<Baselines> {
    read_json(&root.join(BASELINES_FILE))
}
