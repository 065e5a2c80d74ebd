use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, BackendErrorKind, QueryContext, RunKey, Session};
use crate::engine::{AttemptOutcome, RunOutcome};

/// File suffix of per-run transcripts inside a run directory.
pub const TRANSCRIPT_SUFFIX: &str = ".transcript.jsonl";

/// SHA-256 over the canonical JSON form (sorted keys, no whitespace).
pub fn config_hash<C: Serialize + ?Sized>(config: &C) -> String {
    let value = serde_json::to_value(config).expect("config serializes to JSON");
    let canonical = serde_json::to_string(&value).expect("JSON value serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub run: String,
    pub config_hash: String,
}

/// One recorded query result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TranscriptEntry {
    Reply {
        response: String,
    },
    Error {
        kind: BackendErrorKind,
        message: String,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(TranscriptHeader),
    Reply { response: String },
    Error { kind: BackendErrorKind, message: String },
}

/// Raw generator output of one run, in query order. Stored as JSONL: a
/// header line followed by one line per query.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Line::Header(self.header.clone())).expect("serializable");
        out.push('\n');
        for e in &self.entries {
            let line = match e.clone() {
                TranscriptEntry::Reply { response } => Line::Reply { response },
                TranscriptEntry::Error { kind, message } => Line::Error { kind, message },
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, BackendError> {
        let mut header = None;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line: Line = serde_json::from_str(raw)
                .map_err(|e| BackendError::Io(format!("transcript line {}: {e}", i + 1)))?;
            match line {
                Line::Header(h) if header.is_none() && entries.is_empty() => header = Some(h),
                Line::Header(_) => {
                    return Err(BackendError::Io(format!("unexpected header at line {}", i + 1)))
                }
                Line::Reply { response } => entries.push(TranscriptEntry::Reply { response }),
                Line::Error { kind, message } => entries.push(TranscriptEntry::Error { kind, message }),
            }
        }
        let header = header.ok_or_else(|| BackendError::Io("transcript has no header".into()))?;
        Ok(Self { header, entries })
    }

    pub fn write(&self, path: &Path) -> Result<(), BackendError> {
        fs::write(path, self.to_jsonl()).map_err(|e| BackendError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path).map_err(|e| BackendError::Io(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }
}

/// Transcript of every query of `run`, replayable through [`ReplayBackend`].
pub fn record_transcript<S, F>(
    run: &RunOutcome<S, F>,
    label: &str,
    config_hash: &str,
) -> Result<Transcript, BackendError> {
    if run.records.is_empty() {
        return Err(BackendError::EmptyRun);
    }
    let entries = run
        .records
        .iter()
        .map(|r| match &r.outcome {
            AttemptOutcome::BackendError { kind, message } => TranscriptEntry::Error {
                kind: *kind,
                message: message.clone(),
            },
            _ => TranscriptEntry::Reply {
                response: r.raw_response.clone(),
            },
        })
        .collect();
    Ok(Transcript {
        header: TranscriptHeader {
            run: label.to_owned(),
            config_hash: config_hash.to_owned(),
        },
        entries,
    })
}

/// Serves recorded replies in order, keyed by run label.
#[derive(Debug, Default)]
pub struct ReplayBackend {
    by_run: HashMap<String, Transcript>,
    fallback: Option<Transcript>,
    expected_hash: Option<String>,
    warnings: Mutex<Vec<String>>,
}

impl ReplayBackend {
    /// Replays one transcript for every session, whatever its label.
    pub fn from_transcript(transcript: Transcript) -> Self {
        Self {
            fallback: Some(transcript),
            ..Self::default()
        }
    }

    pub fn from_transcripts(transcripts: impl IntoIterator<Item = Transcript>) -> Self {
        Self {
            by_run: transcripts
                .into_iter()
                .map(|t| (t.header.run.clone(), t))
                .collect(),
            ..Self::default()
        }
    }

    /// Loads every `*.transcript.jsonl` in `dir` or in `dir/runs`.
    pub fn from_dir(dir: &Path) -> Result<Self, BackendError> {
        let runs = dir.join("runs");
        let dir = if runs.is_dir() { runs } else { dir.to_path_buf() };
        let listing = fs::read_dir(&dir).map_err(|e| BackendError::Io(format!("{}: {e}", dir.display())))?;
        let mut transcripts = Vec::new();
        for entry in listing {
            let path = entry.map_err(|e| BackendError::Io(e.to_string()))?.path();
            if path.to_string_lossy().ends_with(TRANSCRIPT_SUFFIX) {
                transcripts.push(Transcript::read(&path)?);
            }
        }
        if transcripts.is_empty() {
            return Err(BackendError::Config(format!("no transcripts in {}", dir.display())));
        }
        Ok(Self::from_transcripts(transcripts))
    }

    /// Sessions whose transcript carries a different hash log a warning.
    pub fn expecting_hash(mut self, hash: impl Into<String>) -> Self {
        self.expected_hash = Some(hash.into());
        self
    }

    pub fn warnings(&self) -> Vec<String> {
        self.warnings.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> String {
        "replay".into()
    }

    fn open_session(&self, run: &RunKey) -> Result<Box<dyn Session + '_>, BackendError> {
        let transcript = self
            .by_run
            .get(&run.label)
            .or(self.fallback.as_ref())
            .ok_or_else(|| BackendError::Config(format!("no transcript for run '{}'", run.label)))?;
        if let Some(expected) = &self.expected_hash {
            if &transcript.header.config_hash != expected {
                let msg = format!(
                    "transcript for '{}' was recorded under config {} but replayed under {}",
                    run.label, transcript.header.config_hash, expected
                );
                log::warn!("{msg}");
                self.warnings.lock().unwrap_or_else(|e| e.into_inner()).push(msg);
            }
        }
        Ok(Box::new(ReplaySession {
            entries: &transcript.entries,
            cursor: 0,
        }))
    }
}

struct ReplaySession<'a> {
    entries: &'a [TranscriptEntry],
    cursor: usize,
}

impl Session for ReplaySession<'_> {
    fn generate(&mut self, _prompt: &str, _ctx: &QueryContext<'_>) -> Result<String, BackendError> {
        let entry = self
            .entries
            .get(self.cursor)
            .ok_or(BackendError::Exhausted(self.entries.len()))?;
        self.cursor += 1;
        match entry {
            TranscriptEntry::Reply { response } => Ok(response.clone()),
            TranscriptEntry::Error { kind, message } => Err(BackendError::Replayed {
                kind: *kind,
                message: message.clone(),
            }),
        }
    }
}
