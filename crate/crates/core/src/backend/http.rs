use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use log::{debug, info};
use serde_json::{json, Value};

use super::{BackendError, CompletionBackend, CompletionRequest};

/// Environment variable read for the bearer token unless overridden.
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

/// Caps the number of requests in flight across all clones of a backend.
#[derive(Debug)]
pub struct InFlightGate {
    cap: usize,
    live: Mutex<usize>,
    freed: Condvar,
}

pub struct GatePermit<'a> {
    gate: &'a InFlightGate,
}

impl InFlightGate {
    pub fn new(cap: usize) -> Self {
        Self {
            cap: cap.max(1),
            live: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> GatePermit<'_> {
        let mut live = self.live.lock().expect("lock");
        while *live >= self.cap {
            live = self.freed.wait(live).expect("lock");
        }
        *live += 1;
        GatePermit { gate: self }
    }

    pub fn live(&self) -> usize {
        *self.live.lock().expect("lock")
    }
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.gate.live.lock().expect("lock") -= 1;
        self.gate.freed.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct OpenAiConfig {
    /// Base URL up to and including the version segment, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl Default for OpenAiConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            max_in_flight: 8,
            timeout: Duration::from_secs(300),
        }
    }
}

/// Client for OpenAI-compatible `/chat/completions` endpoints.
///
/// Images are sent as `image_url` content parts next to the prompt text.
pub struct OpenAiCompatBackend {
    config: OpenAiConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    gate: Arc<InFlightGate>,
}

impl OpenAiCompatBackend {
    pub fn new(config: OpenAiConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env).ok();
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(
        config: OpenAiConfig,
        api_key: Option<String>,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let gate = Arc::new(InFlightGate::new(config.max_in_flight));
        Ok(Self {
            config,
            api_key,
            client,
            gate,
        })
    }

    pub fn payload(&self, request: &CompletionRequest) -> Value {
        let content = if request.images.is_empty() {
            Value::String(request.prompt.clone())
        } else {
            let mut parts = vec![json!({"type": "text", "text": request.prompt})];
            for image in &request.images {
                parts.push(json!({"type": "image_url", "image_url": {"url": image}}));
            }
            Value::Array(parts)
        };
        json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": content}],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        })
    }
}

fn first_choice_text(body: &Value) -> Option<String> {
    let content = body
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join(""),
        ),
        _ => None,
    }
}

impl CompletionBackend for OpenAiCompatBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let _permit = self.gate.acquire();
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        debug!("POST {url} ({} prompt bytes)", request.prompt.len());
        let mut builder = self.client.post(&url).json(&self.payload(request));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if status.as_u16() == 429 {
            return Err(BackendError::Quota(text));
        }
        if !status.is_success() {
            return Err(BackendError::Transport(format!("HTTP {status}: {text}")));
        }
        let body: Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Transport(e.to_string()))?;
        let reply = first_choice_text(&body).ok_or_else(|| {
            BackendError::Transport("response has no choices[0].message.content".into())
        })?;
        info!("completion: {} chars", reply.len());
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    fn serve_once(
        status: &'static str,
        body: &'static str,
    ) -> (String, thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut req_body = vec![0u8; len];
            reader.read_exact(&mut req_body).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            String::from_utf8(req_body).unwrap()
        });
        (format!("http://{addr}/v1"), handle)
    }

    fn backend(base_url: String) -> OpenAiCompatBackend {
        let config = OpenAiConfig {
            base_url,
            model: "stub".into(),
            ..OpenAiConfig::default()
        };
        OpenAiCompatBackend::with_api_key(config, Some("k".into())).unwrap()
    }

    #[test]
    fn stub_server_canned_body() {
        let (url, handle) = serve_once(
            "200 OK",
            r#"{"choices":[{"message":{"role":"assistant","content":"Final Answer: canned"}}]}"#,
        );
        let b = backend(url);
        let req = CompletionRequest::new("hello").with_images(["a.png".to_string()]);
        assert_eq!(b.complete(&req).unwrap(), "Final Answer: canned");
        let sent: Value = serde_json::from_str(&handle.join().unwrap()).unwrap();
        assert_eq!(sent["model"], "stub");
        assert_eq!(sent["max_tokens"], 2048);
        assert_eq!(
            sent["messages"][0]["content"][1]["image_url"]["url"],
            "a.png"
        );
    }

    #[test]
    fn rate_limit_maps_to_quota() {
        let (url, handle) = serve_once("429 Too Many Requests", r#"{"error":"slow down"}"#);
        let err = backend(url)
            .complete(&CompletionRequest::new("x"))
            .unwrap_err();
        handle.join().unwrap();
        assert!(matches!(err, BackendError::Quota(_)));
    }

    #[test]
    fn connection_refused_is_transport() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let err = backend(format!("http://{addr}/v1"))
            .complete(&CompletionRequest::new("x"))
            .unwrap_err();
        assert!(matches!(err, BackendError::Transport(_)));
    }

    #[test]
    fn gate_caps_in_flight() {
        let gate = Arc::new(InFlightGate::new(2));
        let peak = Arc::new(Mutex::new(0usize));
        let handles: Vec<_> = (0..6)
            .map(|_| {
                let gate = Arc::clone(&gate);
                let peak = Arc::clone(&peak);
                thread::spawn(move || {
                    let _p = gate.acquire();
                    let now = gate.live();
                    let mut pk = peak.lock().unwrap();
                    *pk = (*pk).max(now);
                    drop(pk);
                    thread::sleep(Duration::from_millis(5));
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(*peak.lock().unwrap() <= 2);
        assert_eq!(gate.live(), 0);
    }
}
