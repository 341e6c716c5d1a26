use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ToolError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Plain GET transport used by the API tools, swappable for replay.
pub trait HttpGet: Send + Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, ToolError>;
}

pub struct LiveHttp {
    client: reqwest::blocking::Client,
}

impl LiveHttp {
    pub fn new(timeout: Duration) -> Result<Self, ToolError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ToolError::Api(e.to_string()))?;
        Ok(Self { client })
    }
}

impl HttpGet for LiveHttp {
    fn get(&self, url: &str) -> Result<HttpResponse, ToolError> {
        let resp = self
            .client
            .get(url)
            .send()
            .map_err(|e| ToolError::Api(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| ToolError::Api(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpExchange {
    pub url: String,
    pub status: u16,
    pub body: String,
}

/// Recorded GET responses keyed by URL, stored as JSONL.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HttpCassette {
    pub exchanges: BTreeMap<String, HttpResponse>,
}

impl HttpCassette {
    pub fn insert(&mut self, url: impl Into<String>, status: u16, body: impl Into<String>) {
        self.exchanges.insert(
            url.into(),
            HttpResponse {
                status,
                body: body.into(),
            },
        );
    }

    pub fn from_reader<R: BufRead>(reader: R) -> std::io::Result<Self> {
        let mut out = Self::default();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ex: HttpExchange = serde_json::from_str(&line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            out.insert(ex.url, ex.status, ex.body);
        }
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        for (url, resp) in &self.exchanges {
            let ex = HttpExchange {
                url: url.clone(),
                status: resp.status,
                body: resp.body.clone(),
            };
            writeln!(
                sink,
                "{}",
                serde_json::to_string(&ex).expect("strings serialize")
            )?;
        }
        sink.flush()
    }
}

pub struct ReplayHttp {
    cassette: HttpCassette,
}

impl ReplayHttp {
    pub fn new(cassette: HttpCassette) -> Self {
        Self { cassette }
    }
}

impl HttpGet for ReplayHttp {
    fn get(&self, url: &str) -> Result<HttpResponse, ToolError> {
        self.cassette
            .exchanges
            .get(url)
            .cloned()
            .ok_or_else(|| ToolError::Api(format!("no recorded response for {url}")))
    }
}

pub struct RecordingHttp<H> {
    inner: H,
    tape: Mutex<HttpCassette>,
}

impl<H: HttpGet> RecordingHttp<H> {
    pub fn new(inner: H) -> Self {
        Self {
            inner,
            tape: Mutex::new(HttpCassette::default()),
        }
    }

    pub fn cassette(&self) -> HttpCassette {
        self.tape.lock().expect("lock").clone()
    }
}

impl<H: HttpGet> HttpGet for RecordingHttp<H> {
    fn get(&self, url: &str) -> Result<HttpResponse, ToolError> {
        let resp = self.inner.get(url)?;
        self.tape
            .lock()
            .expect("lock")
            .insert(url, resp.status, resp.body.clone());
        Ok(resp)
    }
}
