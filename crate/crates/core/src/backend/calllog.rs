use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{fnv1a, BackendError, CompletionBackend, CompletionRequest};
use crate::agent::AgentId;
use crate::geom::Tick;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub tick: Tick,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentId>,
    pub call_index: u32,
    pub backend: String,
    pub tag: String,
    /// FNV-1a of the prompt, hex.
    pub prompt_hash: String,
    pub ok: bool,
}

#[derive(Debug, Default)]
struct Inner {
    records: Vec<CallRecord>,
    next_index: BTreeMap<(Tick, Option<AgentId>), u32>,
}

/// Append-only record of every backend call. Cheap to clone; clones share
/// the same sink.
#[derive(Debug, Clone, Default)]
pub struct CallLog {
    inner: Arc<Mutex<Inner>>,
}

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, tick: Tick, agent: Option<AgentId>, backend: &str, tag: &str, prompt: &str, ok: bool) {
        let mut inner = self.inner.lock().expect("call log poisoned");
        let slot = inner.next_index.entry((tick, agent)).or_insert(0);
        let call_index = *slot;
        *slot += 1;
        inner.records.push(CallRecord {
            tick,
            agent,
            call_index,
            backend: backend.to_string(),
            tag: tag.to_string(),
            prompt_hash: format!("{:016x}", fnv1a(prompt.as_bytes())),
            ok,
        });
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("call log poisoned").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records ordered by (tick, agent id, call index).
    pub fn records(&self) -> Vec<CallRecord> {
        let mut out = self.inner.lock().expect("call log poisoned").records.clone();
        out.sort_by_key(|r| (r.tick, r.agent, r.call_index));
        out
    }

    pub fn count_by_tag(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for r in &self.inner.lock().expect("call log poisoned").records {
            *out.entry(r.tag.clone()).or_insert(0) += 1;
        }
        out
    }
}

/// A backend bound to a call site: every `ask` is recorded in the call log
/// with the tick and agent it was made for.
#[derive(Clone, Copy)]
pub struct LlmCaller<'a> {
    pub backend_id: &'a str,
    pub backend: &'a dyn CompletionBackend,
    pub log: &'a CallLog,
    pub tick: Tick,
    pub agent: Option<AgentId>,
}

impl<'a> LlmCaller<'a> {
    pub fn ask(&self, tag: &str, prompt: &str) -> Result<String, BackendError> {
        let request = CompletionRequest::new(tag, prompt);
        let result = request.validate().and_then(|_| self.backend.complete(&request));
        self.log
            .push(self.tick, self.agent, self.backend_id, tag, prompt, result.is_ok());
        result
    }
}
