use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, CompletionBackend, CompletionRequest};

/// Stable request fingerprint over the prompt and token cap only.
pub fn fingerprint(request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.prompt.as_bytes());
    hasher.update([0u8]);
    hasher.update(request.max_tokens.to_le_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub fingerprint: String,
    pub response: String,
}

/// Ordered request/response log, stored as JSONL.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cassette {
    pub entries: Vec<CassetteEntry>,
}

impl Cassette {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        Self::from_reader(reader)
    }

    pub fn from_reader<R: std::io::BufRead>(reader: R) -> std::io::Result<Self> {
        let mut entries = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteEntry = serde_json::from_str(&line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn write_to<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        for entry in &self.entries {
            let line = serde_json::to_string(entry).expect("plain strings serialize");
            writeln!(sink, "{line}")?;
        }
        sink.flush()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }
}

/// Wraps a live backend and records every exchange.
pub struct RecordingBackend<B> {
    inner: B,
    tape: Mutex<Cassette>,
    journal: Option<Mutex<BufWriter<File>>>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            tape: Mutex::new(Cassette::default()),
            journal: None,
        }
    }

    /// Also appends each entry to `path` as it is recorded, so a partial
    /// run still leaves a usable cassette.
    pub fn to_file(inner: B, path: &Path) -> std::io::Result<Self> {
        let mut backend = Self::new(inner);
        backend.journal = Some(Mutex::new(BufWriter::new(File::create(path)?)));
        Ok(backend)
    }

    pub fn cassette(&self) -> Cassette {
        self.tape.lock().expect("lock").clone()
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let response = self.inner.complete(request)?;
        let entry = CassetteEntry {
            fingerprint: fingerprint(request),
            response: response.clone(),
        };
        // Holding the tape lock while journaling keeps file order equal to tape order.
        let mut tape = self.tape.lock().expect("lock");
        if let Some(journal) = &self.journal {
            let mut sink = journal.lock().expect("lock");
            let line = serde_json::to_string(&entry).expect("plain strings serialize");
            writeln!(sink, "{line}")
                .and_then(|_| sink.flush())
                .map_err(|e| BackendError::CassetteWrite(e.to_string()))?;
        }
        tape.entries.push(entry);
        Ok(response)
    }
}

/// Replays a cassette in order, failing on any fingerprint mismatch.
pub struct ReplayBackend {
    cassette: Cassette,
    cursor: Mutex<usize>,
}

impl ReplayBackend {
    pub fn new(cassette: Cassette) -> Self {
        Self {
            cassette,
            cursor: Mutex::new(0),
        }
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let mut cursor = self.cursor.lock().expect("lock");
        let index = *cursor;
        let entry = self
            .cassette
            .entries
            .get(index)
            .ok_or(BackendError::CassetteExhausted(index))?;
        let actual = fingerprint(request);
        if entry.fingerprint != actual {
            return Err(BackendError::CassetteMismatch {
                index,
                expected: entry.fingerprint.clone(),
                actual,
            });
        }
        *cursor += 1;
        Ok(entry.response.clone())
    }
}
