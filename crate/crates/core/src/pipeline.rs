//! The batch pipeline behind the command-line tool: simulate a cohort,
//! extract features, train both models and write the risk report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, DEFAULT_CONFIG};
use crate::experiment::{
    evaluate_predictor, evaluate_reidentifier, train_predictor, train_reidentifier, Sample,
    TaskConfig,
};
use crate::features::{self, FeatureError};
use crate::io::{fmt_real, write_atomic};
use crate::lstm::{load_model, save_model, LstmError, Model, TrainLog};
use crate::maze::{decision_points, generate_maze, Branching, MazeError, MazeGrid};
use crate::par::Exec;
use crate::privacy::{build_report, PrivacyError, RiskReport};
use crate::seed;
use crate::simulator::{generate_cohort_with, SimError};
use crate::telemetry::{TelemetryError, Trajectory};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const FEATURE_TABLE_FILE: &str = "features.csv";
pub const FEATURE_TABLE_HEADER: &str =
    "subject,condition,distance,coverage,decision_points,mean_abs_curvature,total_rotation";
pub const REPORT_FILE: &str = "report.json";

/// Failure of a pipeline step, split by exit code.
#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad arguments, configuration or input file contents.
    #[error("{0}")]
    Validation(String),
    /// The operating system refused a read or write.
    #[error("{0}")]
    Runtime(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Runtime(_) => 3,
        }
    }

    fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            PipelineError::Validation(m) => PipelineError::Validation(format!("{what}: {m}")),
            PipelineError::Runtime(m) => PipelineError::Runtime(format!("{what}: {m}")),
        }
    }
}

fn validation(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Validation(e.to_string())
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Runtime(e.to_string())
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(e) => e.into(),
            e => validation(e),
        }
    }
}

impl From<MazeError> for PipelineError {
    fn from(e: MazeError) -> Self {
        match e {
            MazeError::Io(e) => e.into(),
            e => validation(e),
        }
    }
}

impl From<TelemetryError> for PipelineError {
    fn from(e: TelemetryError) -> Self {
        match e {
            TelemetryError::Io(e) => e.into(),
            e => validation(e),
        }
    }
}

impl From<SimError> for PipelineError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Maze(e) => e.into(),
            SimError::Telemetry(e) => e.into(),
            e => validation(e),
        }
    }
}

impl From<FeatureError> for PipelineError {
    fn from(e: FeatureError) -> Self {
        validation(e)
    }
}

impl From<LstmError> for PipelineError {
    fn from(e: LstmError) -> Self {
        match e {
            LstmError::Io(e) => e.into(),
            e => validation(e),
        }
    }
}

impl From<PrivacyError> for PipelineError {
    fn from(e: PrivacyError) -> Self {
        match e {
            PrivacyError::Io(e) => e.into(),
            PrivacyError::Model(e) => e.into(),
            e => validation(e),
        }
    }
}

impl From<csv::Error> for PipelineError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            PipelineError::Runtime(e.to_string())
        } else {
            validation(e)
        }
    }
}

/// One simulated session. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub file: String,
    pub subject_id: String,
    pub condition_id: String,
    pub run: usize,
    pub seed: u64,
    pub maze: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub dir: PathBuf,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn to_csv_string(&self) -> Result<String, PipelineError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| PipelineError::Runtime(e.to_string()))?;
        String::from_utf8(bytes).map_err(validation)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        write_atomic(path, self.to_csv_string()?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::from(e).context(path.display()))?;
        let rows = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<Vec<ManifestRow>, _>>()
            .map_err(|e| PipelineError::from(e).context(path.display()))?;
        if rows.is_empty() {
            return Err(validation(format!(
                "{}: manifest lists no trajectories",
                path.display()
            )));
        }
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { dir, rows })
    }

    /// Subject ids in order of first appearance; a subject's class label is its position here.
    pub fn subjects(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.subject_id) {
                out.push(r.subject_id.clone());
            }
        }
        out
    }

    /// Whether a row belongs to the test set: the highest-numbered run of
    /// its (subject, condition) cell.
    pub fn held_out(&self) -> Vec<bool> {
        let mut last: BTreeMap<(&str, &str), usize> = BTreeMap::new();
        for r in &self.rows {
            let e = last
                .entry((&r.subject_id, &r.condition_id))
                .or_insert(r.run);
            *e = (*e).max(r.run);
        }
        self.rows
            .iter()
            .map(|r| last[&(r.subject_id.as_str(), r.condition_id.as_str())] == r.run)
            .collect()
    }

    pub fn trajectory(&self, row: &ManifestRow) -> Result<Trajectory, PipelineError> {
        let path = self.dir.join(&row.file);
        Trajectory::load_csv(&path, row.subject_id.clone(), row.condition_id.clone())
            .map_err(|e| PipelineError::from(e).context(path.display()))
    }

    pub fn maze(&self, row: &ManifestRow) -> Result<MazeGrid, PipelineError> {
        let path = self.dir.join(&row.maze);
        MazeGrid::load(&path).map_err(|e| PipelineError::from(e).context(path.display()))
    }

    /// Every trajectory as model rows, with class labels from [`Manifest::subjects`].
    pub fn samples(&self, exec: Exec) -> Result<Vec<Sample>, PipelineError> {
        let subjects = self.subjects();
        exec.try_map(&self.rows, |r| {
            let t = self.trajectory(r)?;
            let subject = subjects
                .iter()
                .position(|s| *s == r.subject_id)
                .expect("listed subject");
            Sample::from_trajectory(&t, subject, r.run).map_err(|e| validation(e).context(&r.file))
        })
    }
}

pub fn cmd_init(out: &Path) -> Result<(), PipelineError> {
    write_atomic(out, DEFAULT_CONFIG.as_bytes())?;
    Ok(())
}

pub fn cmd_gen_maze(
    seed: u64,
    width: usize,
    depth: usize,
    branching: Branching,
    out: &Path,
) -> Result<MazeGrid, PipelineError> {
    let m = generate_maze(seed, width, depth, branching)?;
    m.save(out)?;
    Ok(m)
}

fn trajectory_stem(subject: &str, condition: &str, run: usize) -> String {
    format!("{subject}__{condition}__r{run}")
}

/// Simulates every profile in every condition and writes mazes,
/// trajectories and the manifest under `out_dir`.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    exec: Exec,
) -> Result<Manifest, PipelineError> {
    cfg.validate()?;
    let matrix = &cfg.conditions;
    let cohort = generate_cohort_with(
        matrix,
        &cfg.profiles,
        cfg.simulation.runs_per_cell,
        cfg.simulation.max_frames,
        cfg.seed,
        exec,
    )?;
    for c in matrix.conditions() {
        matrix
            .maze(cfg.seed, c)?
            .save(&out_dir.join("mazes").join(format!("{}.json", c.id())))?;
    }
    let rows: Vec<ManifestRow> = cohort
        .iter()
        .map(|r| {
            let t = &r.trajectory;
            ManifestRow {
                file: format!(
                    "trajectories/{}.csv",
                    trajectory_stem(t.subject_id(), t.condition_id(), r.run)
                ),
                subject_id: t.subject_id().to_string(),
                condition_id: t.condition_id().to_string(),
                run: r.run,
                seed: r.seed,
                maze: format!("mazes/{}.json", t.condition_id()),
            }
        })
        .collect();
    exec.try_map(&cohort.iter().zip(&rows).collect::<Vec<_>>(), |(r, row)| {
        r.trajectory.save_csv(&out_dir.join(&row.file))
    })?;
    let manifest = Manifest {
        dir: out_dir.to_path_buf(),
        rows,
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn series_csv(label: &str, values: &[f64]) -> String {
    let mut s = format!("k,{label}\n");
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{k},{}", fmt_real(*v));
    }
    s
}

/// Writes the feature table and per-trajectory curvature and rotation
/// series. `maze_override` replaces the maze listed in the manifest.
pub fn cmd_extract(
    manifest_path: &Path,
    maze_override: Option<&Path>,
    out_dir: &Path,
    exec: Exec,
) -> Result<Vec<features::FeatureSummary>, PipelineError> {
    let manifest = Manifest::load(manifest_path)?;
    let fixed_maze = match maze_override {
        Some(p) => {
            Some(MazeGrid::load(p).map_err(|e| PipelineError::from(e).context(p.display()))?)
        }
        None => None,
    };
    let mut mazes: BTreeMap<&str, MazeGrid> = BTreeMap::new();
    if fixed_maze.is_none() {
        for r in &manifest.rows {
            if !mazes.contains_key(r.maze.as_str()) {
                mazes.insert(&r.maze, manifest.maze(r)?);
            }
        }
    }
    let dps: BTreeMap<&str, _> = mazes
        .iter()
        .map(|(k, m)| (*k, decision_points(m)))
        .collect();
    let fixed_dps = fixed_maze.as_ref().map(decision_points);

    let results = exec.try_map(&manifest.rows, |r| {
        let t = manifest.trajectory(r)?;
        let (m, d) = match (&fixed_maze, &fixed_dps) {
            (Some(m), Some(d)) => (m, d),
            _ => (&mazes[r.maze.as_str()], &dps[r.maze.as_str()]),
        };
        let summary =
            features::summarize_with(&t, m, d).map_err(|e| validation(e).context(&r.file))?;
        let series = features::series(&t).map_err(|e| validation(e).context(&r.file))?;
        let stem = trajectory_stem(&r.subject_id, &r.condition_id, r.run);
        let dir = out_dir.join("series");
        write_atomic(
            &dir.join(format!("{stem}.curvature.csv")),
            series_csv("curvature", &series.curvature).as_bytes(),
        )?;
        write_atomic(
            &dir.join(format!("{stem}.rotation.csv")),
            series_csv("rotation", &series.rotation_amount).as_bytes(),
        )?;
        Ok::<_, PipelineError>(summary)
    })?;

    let mut table = format!("{FEATURE_TABLE_HEADER}\n");
    for (r, s) in manifest.rows.iter().zip(&results) {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{}",
            r.subject_id,
            r.condition_id,
            fmt_real(s.distance_traveled),
            s.coverage,
            s.decision_points_reached,
            fmt_real(s.mean_abs_curvature),
            fmt_real(s.total_rotation)
        );
    }
    write_atomic(&out_dir.join(FEATURE_TABLE_FILE), table.as_bytes())?;
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Predict,
    Reid,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Predict => "predict",
            Task::Reid => "reid",
        }
    }

    pub fn settings(self, cfg: &ExperimentConfig) -> &TaskConfig {
        match self {
            Task::Predict => &cfg.lstm.predict,
            Task::Reid => &cfg.lstm.reid,
        }
    }

    pub fn checkpoint_file(self) -> String {
        format!("{}.ckpt", self.name())
    }

    pub fn log_file(self) -> String {
        format!("{}_log.csv", self.name())
    }
}

/// Seed for initializing and shuffling one task's training.
pub fn train_seed(cfg: &ExperimentConfig, task: Task) -> u64 {
    seed::derive(cfg.seed, &[seed::tag("train"), seed::tag(task.name())])
}

/// Trains on every run except the held-out ones and writes
/// `<task>.ckpt` and `<task>_log.csv` under `out_dir`.
pub fn cmd_train(
    manifest_path: &Path,
    task: Task,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    exec: Exec,
) -> Result<(Model, TrainLog), PipelineError> {
    cfg.validate()?;
    let manifest = Manifest::load(manifest_path)?;
    let samples = manifest.samples(exec)?;
    let held_out = manifest.held_out();
    let train: Vec<&Sample> = samples
        .iter()
        .zip(&held_out)
        .filter(|(_, h)| !**h)
        .map(|(s, _)| s)
        .collect();
    let settings = task.settings(cfg);
    let train_seed = train_seed(cfg, task);
    let (model, log) = match task {
        Task::Predict => {
            let (m, _, log) = train_predictor(&train, settings, train_seed, exec)?;
            (m, log)
        }
        Task::Reid => train_reidentifier(
            &train,
            manifest.subjects().len(),
            settings,
            train_seed,
            exec,
        )?,
    };
    save_model(&model, &out_dir.join(task.checkpoint_file()))?;
    write_atomic(&out_dir.join(task.log_file()), log.to_csv().as_bytes())?;
    Ok((model, log))
}

/// Scores both models on the held-out runs and writes the report.
pub fn cmd_report(
    predict_model: &Path,
    reid_model: &Path,
    manifest_path: &Path,
    cfg: &ExperimentConfig,
    out: &Path,
    exec: Exec,
) -> Result<RiskReport, PipelineError> {
    cfg.validate()?;
    let load = |p: &Path| load_model(p).map_err(|e| PipelineError::from(e).context(p.display()));
    let predictor = load(predict_model)?;
    let classifier = load(reid_model)?;
    let manifest = Manifest::load(manifest_path)?;
    let k = manifest.subjects().len();
    if classifier.head.outputs() != k {
        return Err(validation(format!(
            "re-identification model has {} classes but the manifest lists {k} subjects",
            classifier.head.outputs()
        )));
    }
    let samples = manifest.samples(exec)?;
    let test: Vec<&Sample> = samples
        .iter()
        .zip(manifest.held_out())
        .filter(|(_, h)| *h)
        .map(|(s, _)| s)
        .collect();
    let prediction = evaluate_predictor(&predictor, &test, cfg.lstm.predict.window, exec)?;
    let reid = evaluate_reidentifier(&classifier, &test, cfg.lstm.reid.window, exec)?;
    let report = build_report(prediction, reid, k);
    report.save(out)?;
    Ok(report)
}

/// Every step in sequence, all outputs under `out_dir`.
pub fn cmd_run(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    exec: Exec,
) -> Result<RiskReport, PipelineError> {
    cmd_simulate(cfg, out_dir, exec)?;
    let manifest = out_dir.join(MANIFEST_FILE);
    cmd_extract(&manifest, None, out_dir, exec)?;
    for task in [Task::Predict, Task::Reid] {
        cmd_train(&manifest, task, cfg, out_dir, exec)?;
    }
    cmd_report(
        &out_dir.join(Task::Predict.checkpoint_file()),
        &out_dir.join(Task::Reid.checkpoint_file()),
        &manifest,
        cfg,
        &out_dir.join(REPORT_FILE),
        exec,
    )
}
