use std::sync::{Condvar, Mutex};

use log::debug;

use super::OrchestratorError;

#[derive(Debug, Default)]
struct PoolState {
    live: usize,
    peak: usize,
    acquisitions: usize,
}

/// On-demand component instantiation: at most one live component context
/// at a time, released when its handle drops.
#[derive(Debug, Default)]
pub struct ComponentPool {
    state: Mutex<PoolState>,
    freed: Condvar,
}

pub struct ComponentHandle<'a> {
    pool: &'a ComponentPool,
    name: String,
}

impl ComponentPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Blocks until no other component is live.
    pub fn acquire(&self, name: &str) -> ComponentHandle<'_> {
        let mut state = self.state.lock().expect("lock");
        while state.live > 0 {
            state = self.freed.wait(state).expect("lock");
        }
        state.live += 1;
        state.acquisitions += 1;
        state.peak = state.peak.max(state.live);
        debug!("component {name} instantiated");
        ComponentHandle {
            pool: self,
            name: name.to_string(),
        }
    }

    pub fn live(&self) -> usize {
        self.state.lock().expect("lock").live
    }

    pub fn peak(&self) -> usize {
        self.state.lock().expect("lock").peak
    }

    pub fn acquisitions(&self) -> usize {
        self.state.lock().expect("lock").acquisitions
    }

    /// Errors when a handle outlived the run.
    pub fn finish(&self) -> Result<(), OrchestratorError> {
        match self.live() {
            0 => Ok(()),
            n => Err(OrchestratorError::LeakDetected(n)),
        }
    }
}

impl ComponentHandle<'_> {
    pub fn name(&self) -> &str {
        &self.name
    }
}

impl Drop for ComponentHandle<'_> {
    fn drop(&mut self) {
        let mut state = self.pool.state.lock().expect("lock");
        state.live -= 1;
        debug!("component {} released", self.name);
        self.pool.freed.notify_one();
    }
}
