//! End-to-end run orchestration: read + resolve config, take the output
//! lock, consult the cache, compute, and write `results.csv`,
//! `results.meta.json`, and `plot/*.csv`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{resolve, ConfigFile, Flags};
use crate::record::{csv_string, Meta, ResultRecord, Timings, ARTIFACT_VERSION};
use crate::{cache, experiments, plot, CliError};

/// Exclusive lock on an output directory, held for the life of the run.
/// Implemented as `create_new` on `<out>/.embz.lock`; the file records the
/// holder's pid for post-mortems. Dropped (removed) on all exits, including
/// errors — only a kill leaves it behind, and the error message says how to
/// recover.
pub struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    pub fn acquire(out_dir: &Path) -> Result<Self, CliError> {
        let path = out_dir.join(".embz.lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(file) => {
                use std::io::Write;
                let mut file = file;
                let _ = writeln!(file, "{}", std::process::id());
                Ok(LockGuard { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Io(format!(
                "output directory is locked by another run ({}); \
                 remove the file if that run is dead",
                path.display()
            ))),
            Err(e) => Err(CliError::Io(format!(
                "cannot create lock {}: {e}",
                path.display()
            ))),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// What `main` prints on success.
pub struct RunSummary {
    pub experiment: String,
    pub out_dir: PathBuf,
    pub rows: usize,
    pub cache_hit: bool,
    pub config_hash: String,
}

fn read_config_file(path: &Path) -> Result<ConfigFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

/// Run one experiment end to end and return what was written where.
pub fn run_cli(experiment: &str, flags: &Flags) -> Result<RunSummary, CliError> {
    let file = match &flags.config {
        Some(path) => read_config_file(path)?,
        None => ConfigFile::default(),
    };
    let cfg = resolve(experiment, &file, flags)?;

    let out_dir = PathBuf::from(&cfg.output_path);
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let _lock = LockGuard::acquire(&out_dir)?;

    let hash = cache::config_hash(&cfg);
    let cache_root = cache::cache_dir(&out_dir);

    let started = Instant::now();
    let (record, cache_hit) = match (!flags.force)
        .then(|| cache::load(&cache_root, &hash))
        .flatten()
    {
        Some(rec) => (rec, true),
        None => {
            let (rows, extra) = experiments::run(&cfg)?;
            let mut rec = ResultRecord {
                experiment: cfg.experiment.clone(),
                config_hash: hash.clone(),
                artifact_version: ARTIFACT_VERSION.to_string(),
                rows,
                extra,
            };
            rec.sort_rows();
            cache::store(&cache_root, &rec)?;
            (rec, false)
        }
    };
    let total_ms = started.elapsed().as_secs_f64() * 1e3;

    if record.rows.is_empty() {
        return Err(CliError::Config(
            "experiment produced no result rows; refusing to write empty artifacts".into(),
        ));
    }

    fs::write(out_dir.join("results.csv"), csv_string(&record.rows))?;
    let meta = Meta {
        artifact_version: ARTIFACT_VERSION.to_string(),
        experiment: cfg.experiment.clone(),
        config: cfg.clone(),
        config_hash: hash.clone(),
        cache_key_source: "sha256(canonical-config-json + \"\\n\" + artifact-version)".to_string(),
        seed: cfg.seed,
        cache_hit,
        timings: Timings {
            total_ms,
            per_row_ms: record.rows.iter().map(|r| r.runtime_ms).collect(),
        },
        extra: record.extra.clone(),
    };
    let mut meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    meta_json.push('\n');
    fs::write(out_dir.join("results.meta.json"), meta_json)?;
    plot::emit(&out_dir, &cfg, &record)?;

    Ok(RunSummary {
        experiment: cfg.experiment,
        out_dir,
        rows: record.rows.len(),
        cache_hit,
        config_hash: hash,
    })
}
