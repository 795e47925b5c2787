//! Config-driven experiment runs and their on-disk layout.
//!
//! A run directory holds:
//!
//! ```text
//! manifest.json                       config, hashes, cell statuses, run status
//! summary.txt, summary.json           best-model table
//! confusion_male.csv, ...             pooled matrix of each role's best model
//! reports/seed-<s>/<role>_<mode>_<family>.json
//! models/seed-<s>/<role>_<mode>_<family>_fold<k>.json   (optional)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{ModelFamily, SolverSettings};
use crate::data::{load_corpus, write_corpus, Corpus, Role};
use crate::error::{Error, Result};
use crate::fusion::FusionMode;
use crate::selection::report::{best_confusion, CellRecord, MatrixRecord, Summary};
use crate::selection::{run_experiment_matrix, CellStatus, CvSettings, EvalReport, Grid};
use crate::synth::{generate_corpus, paper_shaped_preset, permute_labels, SynthParams};

pub const CONFIG_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSource {
    /// A JSONL feature file.
    Path(PathBuf),
    /// A named synthetic preset; only `paper` exists.
    Preset { name: String, seed: u64 },
    Synth(SynthParams),
}

impl CorpusSource {
    pub fn load(&self) -> Result<Corpus> {
        self.load_shifted(0)
    }

    /// Loads the corpus, adding `shift` to the generator seed of a
    /// synthetic source. File sources ignore it.
    pub fn load_shifted(&self, shift: u64) -> Result<Corpus> {
        match self {
            CorpusSource::Path(p) => load_corpus(p),
            CorpusSource::Preset { name, seed } => generate_corpus(&SynthParams {
                seed: seed.wrapping_add(shift),
                ..preset(name)?
            }),
            CorpusSource::Synth(p) => generate_corpus(&SynthParams {
                seed: p.seed.wrapping_add(shift),
                ..*p
            }),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        !matches!(self, CorpusSource::Path(_))
    }
}

pub fn preset(name: &str) -> Result<SynthParams> {
    match name {
        "paper" => Ok(paper_shaped_preset()),
        other => Err(Error::Config(format!("unknown preset `{other}`"))),
    }
}

fn default_roles() -> Vec<Role> {
    Role::ALL.to_vec()
}

fn default_modes() -> Vec<FusionMode> {
    FusionMode::ALL.to_vec()
}

fn default_families() -> Vec<ModelFamily> {
    ModelFamily::ALL.to_vec()
}

fn default_k_outer() -> usize {
    10
}

fn default_k_inner() -> usize {
    5
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub corpus: CorpusSource,
    /// Shuffle labels within each role before evaluating (null runs).
    #[serde(default)]
    pub permute_labels: Option<u64>,
    /// Synthetic sources only: draw a fresh corpus for every run seed, with
    /// generator seed = configured seed + run seed.
    #[serde(default)]
    pub resample_corpus: bool,
    #[serde(default = "default_roles")]
    pub roles: Vec<Role>,
    #[serde(default = "default_modes")]
    pub fusion_modes: Vec<FusionMode>,
    #[serde(default = "default_families")]
    pub families: Vec<ModelFamily>,
    /// Overrides of the default grid per family.
    #[serde(default)]
    pub grids: Vec<Grid>,
    #[serde(default = "default_k_outer")]
    pub k_outer: usize,
    #[serde(default = "default_k_inner")]
    pub k_inner: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub solver: SolverSettings,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub save_models: bool,
}

impl ExperimentConfig {
    pub fn new(corpus: CorpusSource) -> Self {
        Self {
            version: CONFIG_VERSION,
            corpus,
            permute_labels: None,
            resample_corpus: false,
            roles: default_roles(),
            fusion_modes: default_modes(),
            families: default_families(),
            grids: Vec::new(),
            k_outer: default_k_outer(),
            k_inner: default_k_inner(),
            seeds: default_seeds(),
            output_dir: default_output_dir(),
            solver: SolverSettings::default(),
            threads: None,
            save_models: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.k_outer < 2 || self.k_inner < 2 {
            return bad(format!("k_outer and k_inner must be at least 2, got {} and {}", self.k_outer, self.k_inner));
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if self.roles.is_empty() || self.fusion_modes.is_empty() || self.families.is_empty() {
            return bad("roles, fusion_modes and families must be non-empty".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if !(self.solver.tol > 0.0 && self.solver.max_iter > 0) {
            return bad("solver tolerance and iteration cap must be positive".into());
        }
        for g in &self.grids {
            Grid::new(g.family(), g.points().to_vec()).map_err(|e| Error::Config(e.to_string()))?;
            if self.grids.iter().filter(|o| o.family() == g.family()).count() > 1 {
                return bad(format!("more than one grid for {}", g.family()));
            }
        }
        if self.resample_corpus && !self.corpus.is_synthetic() {
            return bad("resample_corpus needs a synthetic corpus source".into());
        }
        if let CorpusSource::Preset { name, .. } = &self.corpus {
            preset(name)?;
        }
        if let CorpusSource::Synth(p) = &self.corpus {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Grids for the configured families, in family order.
    pub fn resolved_grids(&self) -> Vec<Grid> {
        self.families
            .iter()
            .map(|&f| {
                self.grids
                    .iter()
                    .find(|g| g.family() == f)
                    .cloned()
                    .unwrap_or_else(|| Grid::default_for(f))
            })
            .collect()
    }

    pub fn sha256(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn corpus_sha256(corpus: &Corpus) -> Result<String> {
    let mut bytes = Vec::new();
    write_corpus(corpus, &mut bytes)?;
    Ok(sha256_hex(&bytes))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub seed: u64,
    pub role: Role,
    pub fusion: FusionMode,
    pub status: CellStatus,
    /// Report files relative to the run directory, in family order.
    pub reports: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    /// One hash, or one per seed when the corpus is resampled.
    pub corpus_sha256: Vec<String>,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellEntry>,
}

impl Manifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn report_file(seed: u64, role: Role, fusion: FusionMode, family: ModelFamily) -> String {
    format!("reports/seed-{seed}/{}_{}_{}.json", role.code(), fusion.key(), family.key())
}

/// Everything a finished run produced, also written to disk.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub records: Vec<MatrixRecord>,
    pub manifest: Manifest,
    pub output_dir: PathBuf,
}

/// Writes the summary text/JSON and the per-role confusion CSVs.
fn write_summaries(dir: &Path, records: &[MatrixRecord]) -> Result<Summary> {
    let summary = Summary::from_records(records);
    write(&dir.join(SUMMARY_FILE), summary.render())?;
    write(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    for role in Role::ALL {
        if let Some((_, _, cm)) = best_confusion(records, &summary, role) {
            let name = match role {
                Role::Male => "confusion_male.csv",
                Role::Female => "confusion_female.csv",
            };
            write(&dir.join(name), cm.to_csv())?;
        }
    }
    Ok(summary)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_inner(config)),
        None => run_inner(config),
    }
}

fn run_inner(config: &ExperimentConfig) -> Result<RunOutcome> {
    let dir = config.output_dir.clone();
    let mut manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: RunStatus::Failed,
        error: None,
        config: config.clone(),
        config_sha256: config.sha256(),
        corpus_sha256: Vec::new(),
        seeds: config.seeds.clone(),
        cells: Vec::new(),
    };
    let mut records = Vec::new();
    let result = run_seeds(config, &dir, &mut manifest, &mut records);
    match result {
        Ok(()) => {
            let summary = write_summaries(&dir, &records)?;
            manifest.status = RunStatus::Complete;
            write(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
            Ok(RunOutcome {
                summary,
                records,
                manifest,
                output_dir: dir,
            })
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            // best effort: the original error matters more than a failed flush
            if !records.is_empty() {
                let _ = write_summaries(&dir, &records);
            }
            let _ = serde_json::to_string_pretty(&manifest)
                .map_err(Error::from)
                .and_then(|m| write(&dir.join(MANIFEST_FILE), m));
            Err(e)
        }
    }
}

fn run_seeds(config: &ExperimentConfig, dir: &Path, manifest: &mut Manifest, records: &mut Vec<MatrixRecord>) -> Result<()> {
    let load = |shift: u64| -> Result<Corpus> {
        let corpus = config.corpus.load_shifted(shift)?;
        match config.permute_labels {
            Some(seed) => permute_labels(&corpus, seed),
            None => Ok(corpus),
        }
    };
    let mut shared = None;
    if !config.resample_corpus {
        let corpus = load(0)?;
        manifest.corpus_sha256.push(corpus_sha256(&corpus)?);
        shared = Some(corpus);
    }
    let grids = config.resolved_grids();
    for &seed in &config.seeds {
        let fresh;
        let corpus = match &shared {
            Some(c) => c,
            None => {
                fresh = load(seed)?;
                manifest.corpus_sha256.push(corpus_sha256(&fresh)?);
                &fresh
            }
        };
        let settings = CvSettings {
            k_outer: config.k_outer,
            k_inner: config.k_inner,
            seed,
            solver: config.solver,
            keep_models: config.save_models,
        };
        let matrix = run_experiment_matrix(corpus, &config.roles, &config.fusion_modes, &grids, &settings)?;
        for cell in &matrix.cells {
            let mut files = Vec::new();
            for outcome in &cell.outcomes {
                let r = &outcome.report;
                let file = report_file(seed, r.role, r.fusion, r.family);
                write(&dir.join(&file), serde_json::to_string_pretty(r)?)?;
                for (fold, model) in outcome.models.iter().enumerate() {
                    let name = format!(
                        "models/seed-{seed}/{}_{}_{}_fold{fold}.json",
                        r.role.code(),
                        r.fusion.key(),
                        r.family.key()
                    );
                    write(&dir.join(name), model.to_json()?)?;
                }
                files.push(file);
            }
            manifest.cells.push(CellEntry {
                seed,
                role: cell.role,
                fusion: cell.mode,
                status: cell.status,
                reports: files,
            });
        }
        records.push(MatrixRecord::from(&matrix));
    }
    Ok(())
}

/// Rebuilds the per-seed records of a run directory from its manifest and
/// stored reports.
pub fn load_records(dir: impl AsRef<Path>) -> Result<(Manifest, Vec<MatrixRecord>)> {
    let dir = dir.as_ref();
    let manifest = Manifest::load(dir)?;
    let mut records: Vec<MatrixRecord> = Vec::new();
    for entry in &manifest.cells {
        let reports = entry
            .reports
            .iter()
            .map(|f| {
                let path = dir.join(f);
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                Ok(serde_json::from_str::<EvalReport>(&text)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let cell = CellRecord {
            role: entry.role,
            fusion: entry.fusion,
            status: entry.status,
            reports,
        };
        match records.iter_mut().find(|r| r.seed == entry.seed) {
            Some(r) => r.cells.push(cell),
            None => records.push(MatrixRecord {
                seed: entry.seed,
                cells: vec![cell],
            }),
        }
    }
    Ok((manifest, records))
}

/// Re-renders `summary.txt`, `summary.json` and the confusion CSVs of a run
/// directory from its stored reports.
pub fn rerender(dir: impl AsRef<Path>) -> Result<Summary> {
    let (_, records) = load_records(dir.as_ref())?;
    write_summaries(dir.as_ref(), &records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(CorpusSource::Synth(SynthParams {
            n_couples: 30,
            negative_rate_male: 0.3,
            negative_rate_female: 0.3,
            seed: 2,
            ..Default::default()
        }));
        c.roles = vec![Role::Male];
        c.fusion_modes = vec![FusionMode::Baseline];
        c.families = vec![ModelFamily::LinearSvm];
        c.k_outer = 3;
        c.k_inner = 2;
        c.output_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn config_round_trip_and_defaults() {
        let c = ExperimentConfig::from_json(r#"{"version": 1, "corpus": {"preset": {"name": "paper", "seed": 7}}}"#).unwrap();
        assert_eq!(c.k_outer, 10);
        assert_eq!(c.families.len(), 3);
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        assert_eq!(c.resolved_grids()[1], Grid::default_for(ModelFamily::RbfSvm));
    }

    #[test]
    fn config_errors() {
        for text in [
            r#"{"version": 2, "corpus": {"path": "x"}}"#,
            r#"{"version": 1, "corpus": {"path": "x"}, "k_outer": 1}"#,
            r#"{"version": 1, "corpus": {"path": "x"}, "seeds": []}"#,
            r#"{"version": 1, "corpus": {"preset": {"name": "other", "seed": 1}}}"#,
            r#"{"version": 1, "corpus": {"path": "x"}, "unknown": 3}"#,
            r#"{"version": 1, "corpus": {"path": "x"}, "grids": [{"family": "linear_svm", "points": []}]}"#,
            r#"{"version": 1, "corpus": {"path": "x"}, "resample_corpus": true}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn run_writes_layout_and_rerenders() {
        let tmp = tempfile::tempdir().unwrap();
        let config = small_config(tmp.path());
        let out = run_experiment(&config).unwrap();
        assert_eq!(out.manifest.status, RunStatus::Complete);
        assert_eq!(out.manifest.cells.len(), 1);
        assert_eq!(out.manifest.corpus_sha256.len(), 1);
        let summary_text = fs::read_to_string(tmp.path().join(SUMMARY_FILE)).unwrap();
        assert!(tmp.path().join("confusion_male.csv").exists());
        assert!(!tmp.path().join("confusion_female.csv").exists());

        fs::remove_file(tmp.path().join(SUMMARY_FILE)).unwrap();
        let again = rerender(tmp.path()).unwrap();
        assert_eq!(again, out.summary);
        assert_eq!(fs::read_to_string(tmp.path().join(SUMMARY_FILE)).unwrap(), summary_text);
    }

    #[test]
    fn resampling_draws_one_corpus_per_seed() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = small_config(tmp.path());
        config.corpus = CorpusSource::Synth(SynthParams {
            n_couples: 80,
            negative_rate_male: 0.3,
            negative_rate_female: 0.3,
            seed: 2,
            ..Default::default()
        });
        config.seeds = vec![4, 5];
        config.resample_corpus = true;
        let out = run_experiment(&config).unwrap();
        let hashes = &out.manifest.corpus_sha256;
        assert_eq!(hashes.len(), 2);
        assert_ne!(hashes[0], hashes[1]);
        let shifted = config.corpus.load_shifted(5).unwrap();
        assert_eq!(shifted.seed(), Some(7));
        assert_eq!(hashes[1], corpus_sha256(&shifted).unwrap());
    }

    #[test]
    fn failed_run_leaves_failure_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = small_config(tmp.path());
        config.k_outer = 50;
        assert!(matches!(run_experiment(&config), Err(Error::TooFewGroups { .. })));
        let m = Manifest::load(tmp.path()).unwrap();
        assert_eq!(m.status, RunStatus::Failed);
        assert!(m.error.unwrap().contains("fold"));
    }
}
