//! Multi-start sweeps, per-run persistence, Pareto fronts and diversity statistics.
//!
//! Layout of a campaign directory:
//!
//! ```text
//! <output_dir>/manifest.json
//! <output_dir>/runs/<run_id>/config.toml
//! <output_dir>/runs/<run_id>/history.csv
//! <output_dir>/runs/<run_id>/final_density.pgm
//! <output_dir>/runs/<run_id>/result.json      (or failure.json)
//! ```
//!
//! Run directories are written under a temporary name and renamed into place, so a
//! killed campaign leaves only complete runs behind. Timestamps and wall times live in
//! the manifest only.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{resolve_parallelism, ConfigFile};
use crate::domain::build_domain;
use crate::export::{density_pgm, history_csv};
use crate::optimizer::{run, Formulation, RunConfig, RunResult};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUNS_DIR: &str = "runs";
pub const RESULT_FILE: &str = "result.json";
pub const FAILURE_FILE: &str = "failure.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const HISTORY_FILE: &str = "history.csv";
pub const DENSITY_FILE: &str = "final_density.pgm";

const TMP_PREFIX: &str = ".tmp-";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    VolumeFractions(Vec<f64>),
    InputDisplacements(Vec<f64>),
}

impl Sweep {
    pub fn values(&self) -> &[f64] {
        match self {
            Sweep::VolumeFractions(v) | Sweep::InputDisplacements(v) => v,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Sweep::VolumeFractions(_) => "volume_fraction",
            Sweep::InputDisplacements(_) => "input_displacement",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    pub base: RunConfig,
    pub sweep: Sweep,
    pub seeds_per_point: usize,
    pub first_seed: u64,
    pub parallelism: usize,
    pub output_dir: PathBuf,
}

/// One run of a campaign before it executes.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub run_id: String,
    pub sweep_value: f64,
    pub config: RunConfig,
}

impl CampaignSpec {
    /// Build from a parsed file. A missing sweep falls back to the base config's own
    /// volume fraction (passive) or input displacement (active).
    pub fn from_file(file: &ConfigFile) -> Result<CampaignSpec> {
        let base = file.run_config()?;
        let c = &file.campaign;
        let sweep = match (&c.volume_fractions, &c.input_displacements) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "set either volume_fractions or input_displacements, not both".into(),
                ))
            }
            (Some(v), None) => Sweep::VolumeFractions(v.clone()),
            (None, Some(x)) => Sweep::InputDisplacements(x.clone()),
            (None, None) => match base.formulation {
                Formulation::Passive => Sweep::VolumeFractions(vec![base.volume_fraction]),
                Formulation::Active => Sweep::InputDisplacements(base.input_displacement.into_iter().collect()),
            },
        };
        let spec = CampaignSpec {
            base,
            sweep,
            seeds_per_point: c.seeds_per_point.unwrap_or(10),
            first_seed: c.first_seed.unwrap_or(0),
            parallelism: resolve_parallelism(c.parallelism)?,
            output_dir: c.output_dir.clone().unwrap_or_else(|| PathBuf::from("campaign")),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds_per_point == 0 {
            return bad("seeds_per_point must be at least 1".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.sweep.values().is_empty() {
            return bad("sweep is empty".into());
        }
        match (&self.sweep, self.base.formulation) {
            (Sweep::VolumeFractions(_), Formulation::Passive) | (Sweep::InputDisplacements(_), Formulation::Active) => {}
            (s, f) => return bad(format!("a {} sweep does not match the {f} formulation", s.kind())),
        }
        build_domain(&self.base.domain)?;
        let plan = self.plan();
        let mut ids: Vec<&str> = plan.iter().map(|p| p.run_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("sweep values repeat".into());
        }
        for p in &plan {
            p.config.validate()?;
        }
        Ok(())
    }

    /// Every run in sweep-major, seed-minor order.
    pub fn plan(&self) -> Vec<PlannedRun> {
        let mut out = Vec::new();
        for &value in self.sweep.values() {
            for k in 0..self.seeds_per_point as u64 {
                let seed = self.first_seed + k;
                let mut config = self.base.clone();
                config.seed = seed;
                let run_id = match self.sweep {
                    Sweep::VolumeFractions(_) => {
                        config.volume_fraction = value;
                        format!("vf{value}-seed{seed:04}")
                    }
                    Sweep::InputDisplacements(_) => {
                        config.input_displacement = Some(value);
                        format!("xin{value}-seed{seed:04}")
                    }
                };
                out.push(PlannedRun {
                    run_id,
                    sweep_value: value,
                    config,
                });
            }
        }
        out
    }
}

/// Persisted outcome of one successful run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub sweep_value: f64,
    pub result: RunResult,
}

impl RunRecord {
    pub fn coordinate(&self) -> Coordinate {
        let (d, e) = self.result.coordinates();
        Coordinate {
            run_id: self.run_id.clone(),
            mean_output_disp: d,
            total_strain_energy: e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FailureRecord {
    run_id: String,
    sweep_value: f64,
    error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub run_id: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started_unix: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub formulation: Formulation,
    pub sweep: Sweep,
    pub seeds_per_point: usize,
    pub runs: Vec<ManifestEntry>,
    /// Non-dominated run ids, sorted.
    pub front: Vec<String>,
    pub created_unix: f64,
    pub updated_unix: f64,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::CorruptRecord {
            path,
            reason: e.to_string(),
        })
    }

    pub fn completed(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.runs.iter().filter(|r| r.status == RunStatus::Completed)
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }
}

/// Extra controls for [`run_campaign_with`].
#[derive(Debug, Clone, Default)]
pub struct CampaignOptions {
    /// Stop dispatching and discard in-flight runs once this many runs have been
    /// persisted in this invocation. Simulates an interrupted campaign.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSummary {
    pub manifest: Manifest,
    /// Runs executed and persisted by this invocation.
    pub executed: usize,
    /// Runs already on disk when the invocation started.
    pub skipped: usize,
}

pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignSummary> {
    run_campaign_with(spec, &CampaignOptions::default())
}

fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Execute every planned run that is not yet on disk, persisting each as it finishes.
pub fn run_campaign_with(spec: &CampaignSpec, options: &CampaignOptions) -> Result<CampaignSummary> {
    spec.validate()?;
    let dir = &spec.output_dir;
    let runs_dir = dir.join(RUNS_DIR);
    fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;
    clear_temporaries(&runs_dir)?;

    let previous = Manifest::load(dir).ok();
    let plan = spec.plan();
    let mut entries: Vec<ManifestEntry> = plan
        .iter()
        .map(|p| ManifestEntry {
            run_id: p.run_id.clone(),
            sweep_value: p.sweep_value,
            seed: p.config.seed,
            status: RunStatus::Pending,
            error: None,
            started_unix: None,
            finished_unix: None,
            wall_time: None,
        })
        .collect();
    let mut coords: BTreeMap<String, Coordinate> = BTreeMap::new();
    let mut todo = VecDeque::new();
    for (k, p) in plan.iter().enumerate() {
        let run_dir = runs_dir.join(&p.run_id);
        match read_run_dir(&run_dir) {
            Ok(Some(Stored::Completed(rec))) => {
                coords.insert(p.run_id.clone(), rec.coordinate());
                entries[k].status = RunStatus::Completed;
            }
            Ok(Some(Stored::Failed(f))) => {
                entries[k].status = RunStatus::Failed;
                entries[k].error = Some(f.error);
            }
            Ok(None) => todo.push_back((k, p.clone())),
            Err(e) => {
                log::warn!("discarding unreadable run {}: {e}", p.run_id);
                fs::remove_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
                todo.push_back((k, p.clone()));
            }
        }
        if entries[k].status != RunStatus::Pending {
            if let Some(old) = previous
                .as_ref()
                .and_then(|m| m.runs.iter().find(|r| r.run_id == p.run_id))
            {
                entries[k].started_unix = old.started_unix;
                entries[k].finished_unix = old.finished_unix;
                entries[k].wall_time = old.wall_time;
            }
        }
    }
    let skipped = plan.len() - todo.len();
    let mut manifest = Manifest {
        formulation: spec.base.formulation,
        sweep: spec.sweep.clone(),
        seeds_per_point: spec.seeds_per_point,
        runs: entries,
        front: front_ids(&coords),
        created_unix: previous.as_ref().map_or_else(now_unix, |m| m.created_unix),
        updated_unix: now_unix(),
    };
    manifest.save(dir)?;
    log::info!(
        "campaign {}: {} runs planned, {} already done, {} workers",
        dir.display(),
        plan.len(),
        skipped,
        spec.parallelism
    );

    let queue = Mutex::new(todo);
    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, PlannedRun, Result<RunResult>, f64, f64)>();
    let mut executed = 0;
    let mut first_error = None;
    std::thread::scope(|scope| {
        for _ in 0..spec.parallelism {
            let tx = tx.clone();
            let (queue, cancel) = (&queue, &cancel);
            scope.spawn(move || loop {
                if cancel.load(Ordering::SeqCst) {
                    break;
                }
                let Some((k, job)) = queue.lock().expect("queue lock").pop_front() else {
                    break;
                };
                let started = now_unix();
                let outcome = run(&job.config);
                if tx.send((k, job, outcome, started, now_unix())).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (k, job, outcome, started, finished) in rx {
            if cancel.load(Ordering::SeqCst) {
                continue;
            }
            let entry = &mut manifest.runs[k];
            entry.started_unix = Some(started);
            entry.finished_unix = Some(finished);
            let persisted = match outcome {
                Ok(result) => {
                    entry.wall_time = Some(result.wall_time);
                    let record = RunRecord {
                        run_id: job.run_id.clone(),
                        sweep_value: job.sweep_value,
                        result,
                    };
                    persist_run(&runs_dir, &record).map(|()| {
                        entry.status = RunStatus::Completed;
                        coords.insert(job.run_id.clone(), record.coordinate());
                        log::info!("run {} done: {} iterations", job.run_id, record.result.history.len() - 1);
                    })
                }
                Err(e) => {
                    log::warn!("run {} failed: {e}", job.run_id);
                    entry.status = RunStatus::Failed;
                    entry.error = Some(e.to_string());
                    persist_failure(
                        &runs_dir,
                        &FailureRecord {
                            run_id: job.run_id.clone(),
                            sweep_value: job.sweep_value,
                            error: e.to_string(),
                        },
                    )
                }
            };
            let saved = persisted.and_then(|()| {
                manifest.front = front_ids(&coords);
                manifest.updated_unix = now_unix();
                manifest.save(dir)
            });
            if let Err(e) = saved {
                first_error.get_or_insert(e);
                cancel.store(true, Ordering::SeqCst);
                continue;
            }
            executed += 1;
            if options.stop_after.is_some_and(|n| executed >= n) {
                cancel.store(true, Ordering::SeqCst);
            }
        }
    });
    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(CampaignSummary {
        manifest,
        executed,
        skipped,
    })
}

fn clear_temporaries(runs_dir: &Path) -> Result<()> {
    let listing = fs::read_dir(runs_dir).map_err(|e| Error::io(runs_dir, e))?;
    for entry in listing.flatten() {
        if entry.file_name().to_string_lossy().starts_with(TMP_PREFIX) {
            let p = entry.path();
            fs::remove_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_run_dir(runs_dir: &Path, run_id: &str, files: &[(&str, Vec<u8>)]) -> Result<()> {
    let tmp = runs_dir.join(format!("{TMP_PREFIX}{run_id}"));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    for (name, bytes) in files {
        let p = tmp.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    }
    let target = runs_dir.join(run_id);
    fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))
}

/// Write one run directory with config echo, history, density image and record.
pub fn persist_run(runs_dir: &Path, record: &RunRecord) -> Result<()> {
    let config = &record.result.config;
    let mesh = build_domain(&config.domain)?;
    let echo = ConfigFile::echo(config).to_toml()?;
    let json = serde_json::to_string_pretty(record).expect("run record serializes");
    write_run_dir(
        runs_dir,
        &record.run_id,
        &[
            (CONFIG_FILE, echo.into_bytes()),
            (HISTORY_FILE, history_csv(&record.result.history)?),
            (DENSITY_FILE, density_pgm(&mesh, &record.result.final_rho.0)),
            (RESULT_FILE, json.into_bytes()),
        ],
    )
}

fn persist_failure(runs_dir: &Path, failure: &FailureRecord) -> Result<()> {
    let json = serde_json::to_string_pretty(failure).expect("failure record serializes");
    write_run_dir(runs_dir, &failure.run_id, &[(FAILURE_FILE, json.into_bytes())])
}

enum Stored {
    Completed(RunRecord),
    Failed(FailureRecord),
}

fn read_run_dir(run_dir: &Path) -> Result<Option<Stored>> {
    if !run_dir.exists() {
        return Ok(None);
    }
    let result = run_dir.join(RESULT_FILE);
    if result.exists() {
        return read_record(&result).map(|r| Some(Stored::Completed(r)));
    }
    let failure = run_dir.join(FAILURE_FILE);
    let text = fs::read_to_string(&failure).map_err(|e| Error::io(&failure, e))?;
    serde_json::from_str(&text)
        .map(|f| Some(Stored::Failed(f)))
        .map_err(|e| Error::CorruptRecord {
            path: failure,
            reason: e.to_string(),
        })
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::CorruptRecord {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Completed records under `dir` (a campaign directory or its `runs/` directory),
/// sorted by run id, plus one warning per unreadable record.
pub fn load_records(dir: &Path) -> Result<(Vec<RunRecord>, Vec<String>)> {
    let runs_dir = if dir.join(RUNS_DIR).is_dir() {
        dir.join(RUNS_DIR)
    } else {
        dir.to_path_buf()
    };
    let mut names: Vec<PathBuf> = fs::read_dir(&runs_dir)
        .map_err(|e| Error::io(&runs_dir, e))?
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.is_dir() && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with(TMP_PREFIX)))
        .collect();
    names.sort();
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for run_dir in names {
        let path = run_dir.join(RESULT_FILE);
        if !path.exists() {
            if !run_dir.join(FAILURE_FILE).exists() {
                warnings.push(format!("{}: no {RESULT_FILE}", run_dir.display()));
            }
            continue;
        }
        match read_record(&path) {
            Ok(r) => records.push(r),
            Err(e) => warnings.push(e.to_string()),
        }
    }
    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok((records, warnings))
}

/// Pareto coordinates of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub run_id: String,
    /// mm, minimized
    pub mean_output_disp: f64,
    /// N mm, minimized
    pub total_strain_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub run_id: String,
    pub mean_output_disp: f64,
    pub total_strain_energy: f64,
    pub dominated: bool,
}

/// Flag every point as dominated or not, minimizing both coordinates. Of several
/// identical points only the one with the smallest run id stays on the front.
/// Points with non-finite coordinates are dropped. Output is in input order.
pub fn pareto_front(points: &[Coordinate]) -> Vec<ParetoPoint> {
    let finite: Vec<&Coordinate> = points
        .iter()
        .filter(|p| {
            let ok = p.mean_output_disp.is_finite() && p.total_strain_energy.is_finite();
            if !ok {
                log::warn!("run {} has non-finite coordinates; left out of the front", p.run_id);
            }
            ok
        })
        .collect();
    let mut order: Vec<usize> = (0..finite.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (finite[a], finite[b]);
        p.mean_output_disp
            .total_cmp(&q.mean_output_disp)
            .then(p.total_strain_energy.total_cmp(&q.total_strain_energy))
            .then(p.run_id.cmp(&q.run_id))
    });
    let mut dominated = vec![true; finite.len()];
    let mut best = f64::INFINITY;
    for k in order {
        if finite[k].total_strain_energy < best {
            dominated[k] = false;
            best = finite[k].total_strain_energy;
        }
    }
    finite
        .iter()
        .zip(dominated)
        .map(|(p, dominated)| ParetoPoint {
            run_id: p.run_id.clone(),
            mean_output_disp: p.mean_output_disp,
            total_strain_energy: p.total_strain_energy,
            dominated,
        })
        .collect()
}

fn front_ids(coords: &BTreeMap<String, Coordinate>) -> Vec<String> {
    let points: Vec<Coordinate> = coords.values().cloned().collect();
    let mut ids: Vec<String> = pareto_front(&points)
        .into_iter()
        .filter(|p| !p.dominated)
        .map(|p| p.run_id)
        .collect();
    ids.sort();
    ids
}

/// Front run ids of a set of records, sorted.
pub fn front_of(records: &[RunRecord]) -> Vec<String> {
    let coords = records.iter().map(|r| (r.run_id.clone(), r.coordinate())).collect();
    front_ids(&coords)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityStats {
    pub designs: usize,
    pub threshold: f64,
    pub min_distance: f64,
    pub mean_distance: f64,
    pub max_distance: f64,
    /// Single-linkage clusters at `threshold`.
    pub clusters: usize,
    /// Cluster label per design, numbered by first appearance.
    pub labels: Vec<usize>,
}

/// Default clustering distance `0.05 * sqrt(n_elements)`.
pub fn default_threshold(n_elements: usize) -> f64 {
    0.05 * (n_elements as f64).sqrt()
}

/// Pairwise L2 distances between density fields and single-linkage clusters.
pub fn diversity_stats(fields: &[&[f64]], threshold: Option<f64>) -> Result<DiversityStats> {
    let n = fields.len();
    if n < 2 {
        return Err(Error::InvalidDensity(format!("diversity needs at least 2 designs, got {n}")));
    }
    let len = fields[0].len();
    if let Some(f) = fields.iter().find(|f| f.len() != len) {
        return Err(Error::MeshMismatch(format!("field lengths {len} and {}", f.len())));
    }
    let tau = threshold.unwrap_or_else(|| default_threshold(len));
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, 0.0f64, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = fields[i]
                .iter()
                .zip(fields[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            lo = lo.min(d);
            hi = hi.max(d);
            sum += d;
            if d < tau {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut labels = vec![0; n];
    let mut names: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, label) in labels.iter_mut().enumerate() {
        let r = root(&mut parent, i);
        let next = names.len();
        *label = *names.entry(r).or_insert(next);
    }
    Ok(DiversityStats {
        designs: n,
        threshold: tau,
        min_distance: lo,
        mean_distance: sum / (n * (n - 1) / 2) as f64,
        max_distance: hi,
        clusters: names.len(),
        labels,
    })
}

/// [`diversity_stats`] over final densities, requiring identical domains.
pub fn diversity_of(records: &[&RunRecord]) -> Result<DiversityStats> {
    if let Some(first) = records.first() {
        let spec = &first.result.config.domain;
        if let Some(r) = records.iter().find(|r| &r.result.config.domain != spec) {
            return Err(Error::MeshMismatch(format!(
                "{} and {} use different domains",
                first.run_id, r.run_id
            )));
        }
    }
    let fields: Vec<&[f64]> = records.iter().map(|r| r.result.final_rho.as_slice()).collect();
    diversity_stats(&fields, None)
}
