//! Transcript recording and replay.
//!
//! A transcript is newline-delimited JSON, one prompt/reply pair per line,
//! keyed by the SHA-256 of the prompt text. Replaying a transcript against
//! the same deterministic pipeline reproduces the original run without any
//! network access.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::llm::{CompletionRequest, LlmBackend, LlmError};

/// One recorded completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// SHA-256 of the prompt text; the replay key.
    pub prompt_digest: String,
    pub prompt: String,
    pub reply: String,
    /// Seconds since the Unix epoch at recording time.
    pub timestamp: u64,
    pub model_name: String,
}

/// An ordered list of recorded completions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new(entries: Vec<TranscriptEntry>) -> Transcript {
        Transcript { entries }
    }

    /// Parses newline-delimited JSON; blank lines are ignored.
    pub fn from_reader(reader: impl Read) -> Result<Transcript, LlmError> {
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(&line)
                .map_err(|e| LlmError::BadResponse(format!("transcript line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        Ok(Transcript { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Transcript, LlmError> {
        Ok(Transcript::from_reader(File::open(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LlmError> {
        let mut file = File::create(path)?;
        for entry in &self.entries {
            let line = serde_json::to_string(entry).expect("entry serializes");
            file.write_all(line.as_bytes())?;
            file.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// [`LlmBackend`] answering from a transcript; the first entry recorded for
/// a prompt wins.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    transcript: Transcript,
}

impl ReplayBackend {
    pub fn new(transcript: Transcript) -> ReplayBackend {
        ReplayBackend { transcript }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<ReplayBackend, LlmError> {
        Ok(ReplayBackend::new(Transcript::load(path)?))
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let digest = sha256_hex(request.prompt.as_bytes());
        self.transcript
            .entries
            .iter()
            .find(|e| e.prompt_digest == digest)
            .map(|e| e.reply.clone())
            .ok_or(LlmError::ReplayMiss { digest })
    }
}

/// Wraps any backend and appends every completion to a transcript file,
/// flushing after each entry so partial runs still replay.
pub struct RecordingBackend<B> {
    inner: B,
    sink: Mutex<File>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    /// Appends to `path`, creating it if needed.
    pub fn create(inner: B, path: impl AsRef<Path>) -> Result<RecordingBackend<B>, LlmError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(RecordingBackend { inner, sink: Mutex::new(file) })
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let reply = self.inner.complete(request)?;
        let entry = TranscriptEntry {
            prompt_digest: sha256_hex(request.prompt.as_bytes()),
            prompt: request.prompt.clone(),
            reply: reply.clone(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            model_name: request.params.model_name.clone(),
        };
        let line = serde_json::to_string(&entry).expect("entry serializes");
        let mut sink = self.sink.lock().expect("transcript sink lock");
        sink.write_all(line.as_bytes())?;
        sink.write_all(b"\n")?;
        sink.flush()?;
        Ok(reply)
    }
}
