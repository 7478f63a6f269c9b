//! On-disk dataset format, version 1.
//!
//! A dataset is a directory holding:
//!
//! - `episodes.jsonl`: one [`Episode`] per line,
//! - `segments.jsonl`: one [`Segment`] per line,
//! - `quarantine.jsonl`: one [`QuarantineRecord`] per line, only when non-empty,
//! - `manifest.json`: a single [`Manifest`] line, written last.
//!
//! Records are compact JSON, UTF-8, `\n`-terminated, with keys in struct
//! declaration order. Grids are nested integer arrays and actions are
//! `{"op": code, "sel": [x, y, h, w]}`. Padded segment entries store their
//! color-10 grids explicitly.
//!
//! The manifest carries a SHA-256 of each data file and a self digest: the
//! SHA-256 of the manifest bytes with the self-digest value replaced by 64
//! zeros. Readers tolerate unknown keys.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::EnvConfig;
use crate::generator::{Episode, QuarantineRecord};
use crate::maker::{Task, TaskParams};
use crate::segment::Segment;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const SEGMENTS_FILE: &str = "segments.jsonl";
pub const QUARANTINE_FILE: &str = "quarantine.jsonl";
pub const DIGEST_ALGORITHM: &str = "sha256";

const ZERO_DIGEST: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("serialization failed: {0}")]
    Serialization(String),
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("unsupported format version {0} (this reader understands {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("digest mismatch for {file}: manifest says {expected}, content hashes to {actual}")]
    DigestMismatch { file: String, expected: String, actual: String },
    #[error("{file} holds {actual} records but the manifest says {expected}")]
    CountMismatch { file: String, expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestParams {
    pub problems: usize,
    pub episodes_per_problem: usize,
    pub gold_per_problem: usize,
    pub gold_ratio: f64,
    pub demos_per_problem: usize,
    pub max_h: usize,
    pub max_w: usize,
    pub horizon: usize,
    pub nonoptimal_len: usize,
    pub nonoptimal_jitter: usize,
    pub seed: u64,
}

impl ManifestParams {
    pub fn new(
        params: &TaskParams,
        problems: usize,
        episodes_per_problem: usize,
        gold_per_problem: usize,
        horizon: usize,
    ) -> Self {
        let gold_ratio = if episodes_per_problem == 0 {
            0.0
        } else {
            gold_per_problem as f64 / episodes_per_problem as f64
        };
        ManifestParams {
            problems,
            episodes_per_problem,
            gold_per_problem,
            gold_ratio,
            demos_per_problem: params.demos_per_problem,
            max_h: params.max_dims.0,
            max_w: params.max_dims.1,
            horizon,
            nonoptimal_len: params.nonoptimal_len,
            nonoptimal_jitter: params.nonoptimal_jitter,
            seed: params.seed,
        }
    }

    pub fn task_params(&self) -> TaskParams {
        TaskParams {
            max_dims: (self.max_h, self.max_w),
            demos_per_problem: self.demos_per_problem,
            nonoptimal_len: self.nonoptimal_len,
            nonoptimal_jitter: self.nonoptimal_jitter,
            seed: self.seed,
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        self.task_params().env_config()
    }

    pub fn expected_gold(&self) -> usize {
        self.problems * self.gold_per_problem
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub episodes: usize,
    pub segments: usize,
    pub quarantined: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digests {
    pub algorithm: String,
    pub episodes: String,
    pub segments: String,
    pub quarantine: Option<String>,
    /// Digest of the manifest itself; see the module docs.
    pub manifest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub task: Task,
    pub params: ManifestParams,
    pub counts: Counts,
    pub digests: Digests,
}

/// Everything a dataset directory holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub episodes: Vec<Episode>,
    pub segments: Vec<Segment>,
    pub quarantine: Vec<QuarantineRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct ReadOptions {
    pub verify_digests: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions { verify_digests: true }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serializes records as JSON lines. Lines are encoded in parallel and joined
/// in input order.
pub fn to_jsonl<T: Serialize + Sync>(records: &[T]) -> Result<Vec<u8>, DatasetError> {
    let lines = records
        .par_iter()
        .map(|r| {
            let mut line = serde_json::to_vec(r).map_err(|e| DatasetError::Serialization(e.to_string()))?;
            line.push(b'\n');
            Ok(line)
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    Ok(lines.concat())
}

/// Parses JSON lines, reporting the 1-based line number of the first bad line.
pub fn from_jsonl<T: DeserializeOwned + Send>(file: &str, bytes: &[u8]) -> Result<Vec<T>, DatasetError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        DatasetError::Parse { file: file.into(), line, message: "invalid UTF-8".into() }
    })?;
    let lines: Vec<&str> = text.split_terminator('\n').collect();
    lines
        .par_iter()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                file: file.into(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DatasetError> {
    fs::read(path).map_err(io_err(path))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn manifest_bytes(manifest: &Manifest) -> Result<Vec<u8>, DatasetError> {
    let mut m = manifest.clone();
    m.digests.manifest = ZERO_DIGEST.into();
    let mut bytes = serde_json::to_vec(&m).map_err(|e| DatasetError::Serialization(e.to_string()))?;
    bytes.push(b'\n');
    let self_digest = sha256_hex(&bytes);
    let text = String::from_utf8(bytes).expect("serde_json writes UTF-8");
    Ok(replace_self_digest(&text, ZERO_DIGEST, &self_digest).into_bytes())
}

fn replace_self_digest(text: &str, from: &str, to: &str) -> String {
    let needle = format!("\"manifest\":\"{from}\"");
    let with = format!("\"manifest\":\"{to}\"");
    match text.rfind(&needle) {
        Some(pos) => format!("{}{}{}", &text[..pos], with, &text[pos + needle.len()..]),
        None => text.to_string(),
    }
}

/// Writes a dataset directory (created if missing). Counts and digests in the
/// returned manifest are computed from the bytes written.
pub fn write_dataset(
    dir: &Path,
    task: Task,
    params: ManifestParams,
    episodes: &[Episode],
    segments: &[Segment],
    quarantine: &[QuarantineRecord],
) -> Result<Manifest, DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let ep_bytes = to_jsonl(episodes)?;
    let seg_bytes = to_jsonl(segments)?;
    let quarantine_path = dir.join(QUARANTINE_FILE);
    let q_digest = if quarantine.is_empty() {
        if quarantine_path.exists() {
            fs::remove_file(&quarantine_path).map_err(io_err(&quarantine_path))?;
        }
        None
    } else {
        let q_bytes = to_jsonl(quarantine)?;
        write_file(&quarantine_path, &q_bytes)?;
        Some(sha256_hex(&q_bytes))
    };
    write_file(&dir.join(EPISODES_FILE), &ep_bytes)?;
    write_file(&dir.join(SEGMENTS_FILE), &seg_bytes)?;

    let mut manifest = Manifest {
        format_version: FORMAT_VERSION,
        task,
        params,
        counts: Counts {
            episodes: episodes.len(),
            segments: segments.len(),
            quarantined: quarantine.len(),
        },
        digests: Digests {
            algorithm: DIGEST_ALGORITHM.into(),
            episodes: sha256_hex(&ep_bytes),
            segments: sha256_hex(&seg_bytes),
            quarantine: q_digest,
            manifest: String::new(),
        },
    };
    let bytes = manifest_bytes(&manifest)?;
    write_file(&dir.join(MANIFEST_FILE), &bytes)?;
    manifest.digests.manifest = parse_manifest(&bytes)?.digests.manifest;
    Ok(manifest)
}

impl Dataset {
    pub fn write(&self, dir: &Path) -> Result<Manifest, DatasetError> {
        write_dataset(
            dir,
            self.manifest.task,
            self.manifest.params.clone(),
            &self.episodes,
            &self.segments,
            &self.quarantine,
        )
    }
}

fn parse_manifest(bytes: &[u8]) -> Result<Manifest, DatasetError> {
    let mut v: Vec<Manifest> = from_jsonl(MANIFEST_FILE, bytes)?;
    if v.len() != 1 {
        return Err(DatasetError::Parse {
            file: MANIFEST_FILE.into(),
            line: v.len().clamp(1, 2),
            message: format!("expected exactly one manifest record, found {}", v.len()),
        });
    }
    Ok(v.remove(0))
}

fn check_digest(file: &str, expected: &str, bytes: &[u8]) -> Result<(), DatasetError> {
    let actual = sha256_hex(bytes);
    if actual == expected {
        Ok(())
    } else {
        Err(DatasetError::DigestMismatch { file: file.into(), expected: expected.into(), actual })
    }
}

fn check_count(file: &str, expected: usize, actual: usize) -> Result<(), DatasetError> {
    if expected == actual {
        Ok(())
    } else {
        Err(DatasetError::CountMismatch { file: file.into(), expected, actual })
    }
}

pub fn read_dataset(dir: &Path) -> Result<Dataset, DatasetError> {
    read_dataset_with(dir, ReadOptions::default())
}

/// Reads a dataset directory. Records are parsed first (so a damaged line is
/// reported by number), then counts and digests are checked.
pub fn read_dataset_with(dir: &Path, opts: ReadOptions) -> Result<Dataset, DatasetError> {
    let manifest_raw = read_file(&dir.join(MANIFEST_FILE))?;
    let manifest = parse_manifest(&manifest_raw)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(DatasetError::UnsupportedVersion(manifest.format_version));
    }
    let ep_bytes = read_file(&dir.join(EPISODES_FILE))?;
    let seg_bytes = read_file(&dir.join(SEGMENTS_FILE))?;
    let q_path = dir.join(QUARANTINE_FILE);
    let q_bytes = if q_path.exists() { Some(read_file(&q_path)?) } else { None };

    let episodes: Vec<Episode> = from_jsonl(EPISODES_FILE, &ep_bytes)?;
    let segments: Vec<Segment> = from_jsonl(SEGMENTS_FILE, &seg_bytes)?;
    let quarantine: Vec<QuarantineRecord> = match &q_bytes {
        Some(b) => from_jsonl(QUARANTINE_FILE, b)?,
        None => Vec::new(),
    };

    if opts.verify_digests {
        check_count(EPISODES_FILE, manifest.counts.episodes, episodes.len())?;
        check_count(SEGMENTS_FILE, manifest.counts.segments, segments.len())?;
        check_count(QUARANTINE_FILE, manifest.counts.quarantined, quarantine.len())?;
        let text = String::from_utf8_lossy(&manifest_raw);
        let blanked = replace_self_digest(&text, &manifest.digests.manifest, ZERO_DIGEST);
        check_digest(MANIFEST_FILE, &manifest.digests.manifest, blanked.as_bytes())?;
        check_digest(EPISODES_FILE, &manifest.digests.episodes, &ep_bytes)?;
        check_digest(SEGMENTS_FILE, &manifest.digests.segments, &seg_bytes)?;
        match (&manifest.digests.quarantine, &q_bytes) {
            (Some(d), Some(b)) => check_digest(QUARANTINE_FILE, d, b)?,
            (None, None) => {}
            (Some(d), None) => check_digest(QUARANTINE_FILE, d, &[])?,
            (None, Some(b)) => check_digest(QUARANTINE_FILE, "", b)?,
        }
    }
    Ok(Dataset { manifest, episodes, segments, quarantine })
}
