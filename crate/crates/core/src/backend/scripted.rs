use std::collections::VecDeque;
use std::sync::Mutex;

use log::debug;

use super::{BackendError, CompletionBackend, CompletionRequest};

/// Returns canned replies in order. Every request is kept for inspection.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    script: Mutex<VecDeque<String>>,
    fallback: Option<String>,
    seen: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            script: Mutex::new(responses.into_iter().map(Into::into).collect()),
            fallback: None,
            seen: Mutex::new(Vec::new()),
        }
    }

    /// Reply used once the script runs out, instead of `ScriptExhausted`.
    pub fn with_fallback(mut self, fallback: impl Into<String>) -> Self {
        self.fallback = Some(fallback.into());
        self
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.seen.lock().expect("lock").clone()
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().expect("lock").len()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.seen.lock().expect("lock").push(request.clone());
        let next = self.script.lock().expect("lock").pop_front();
        let reply = next
            .or_else(|| self.fallback.clone())
            .ok_or(BackendError::ScriptExhausted)?;
        debug!("scripted reply: {reply:?}");
        Ok(reply)
    }
}

/// Backend computed by a closure; handy for prompt-dependent fixtures.
pub struct FnBackend<F>(pub F);

impl<F> CompletionBackend for FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (self.0)(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passthrough_then_exhausted() {
        let b = ScriptedBackend::new(["Final Answer: ok"]);
        let req = CompletionRequest::new("p");
        assert_eq!(b.complete(&req).unwrap(), "Final Answer: ok");
        assert_eq!(b.complete(&req).unwrap_err(), BackendError::ScriptExhausted);
        assert_eq!(b.requests().len(), 2);
    }

    #[test]
    fn fallback_repeats() {
        let b = ScriptedBackend::new(Vec::<String>::new()).with_fallback("x");
        let req = CompletionRequest::new("p");
        assert_eq!(b.complete(&req).unwrap(), "x");
        assert_eq!(b.complete(&req).unwrap(), "x");
    }

    #[test]
    fn request_cap_respects_limit() {
        let req = CompletionRequest::new("p").with_max_tokens(4096, 2048);
        assert_eq!(req.max_tokens, 2048);
        assert_eq!(req.temperature, 0.0);
    }
}
