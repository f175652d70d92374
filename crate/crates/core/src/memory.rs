//! Per-agent experience memory over an exact-scan embedding store.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentId;
use crate::backend::{EmbedError, Embedder};
use crate::geom::Tick;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MemoryError {
    #[error("memory text is empty")]
    EmptyText,
    #[error("retrieve needs k >= 1")]
    InvalidK,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Embedder(#[from] EmbedError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }
}

/// `dot(a, b) / (|a| |b|)`; similarity with a zero vector is 0.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, MemoryError> {
    if a.dimension() != b.dimension() {
        return Err(MemoryError::DimensionMismatch {
            expected: a.dimension(),
            actual: b.dimension(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.0.iter().zip(&b.0) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub agent_id: AgentId,
    pub tick: Tick,
    pub text: String,
    pub embedding: EmbeddingVector,
    /// 1-based insertion number, per agent.
    pub seq: u64,
}

/// A retrieval hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recall<'a> {
    pub record: &'a MemoryRecord,
    pub similarity: f64,
}

impl Recall<'_> {
    /// Total order: similarity, then tick (recency), then seq. Greater is better.
    fn rank(&self, other: &Self) -> Ordering {
        self.similarity
            .total_cmp(&other.similarity)
            .then(self.record.tick.cmp(&other.record.tick))
            .then(self.record.seq.cmp(&other.record.seq))
    }
}

impl PartialOrd for Recall<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Eq for Recall<'_> {}

impl Ord for Recall<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank(other)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryStore {
    dimension: usize,
    records: BTreeMap<AgentId, Vec<MemoryRecord>>,
}

impl MemoryStore {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            records: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, embedder: &dyn Embedder, text: &str) -> Result<EmbeddingVector, MemoryError> {
        let v = embedder.embed(text)?;
        if v.dimension() != self.dimension {
            return Err(MemoryError::DimensionMismatch {
                expected: self.dimension,
                actual: v.dimension(),
            });
        }
        Ok(v)
    }

    pub fn store(
        &mut self,
        agent_id: AgentId,
        text: &str,
        tick: Tick,
        embedder: &dyn Embedder,
    ) -> Result<&MemoryRecord, MemoryError> {
        if text.is_empty() {
            return Err(MemoryError::EmptyText);
        }
        let embedding = self.embed(embedder, text)?;
        let list = self.records.entry(agent_id).or_default();
        let seq = list.last().map_or(1, |r| r.seq + 1);
        list.push(MemoryRecord {
            agent_id,
            tick,
            text: text.to_string(),
            embedding,
            seq,
        });
        Ok(list.last().expect("just pushed"))
    }

    /// The `k` records most similar to `query`, best first. Ties go to the
    /// more recent tick, then the higher seq.
    pub fn retrieve(
        &self,
        agent_id: AgentId,
        query: &str,
        k: usize,
        embedder: &dyn Embedder,
    ) -> Result<Vec<Recall<'_>>, MemoryError> {
        if k == 0 {
            return Err(MemoryError::InvalidK);
        }
        let q = self.embed(embedder, query)?;
        let mut heap: BinaryHeap<Reverse<Recall<'_>>> = BinaryHeap::with_capacity(k + 1);
        for record in self.records_for(agent_id) {
            let hit = Recall {
                record,
                similarity: cosine_similarity(&q, &record.embedding)?,
            };
            if heap.len() < k {
                heap.push(Reverse(hit));
            } else if heap.peek().is_some_and(|Reverse(worst)| hit > *worst) {
                heap.pop();
                heap.push(Reverse(hit));
            }
        }
        let mut out: Vec<Recall<'_>> = heap.into_iter().map(|Reverse(r)| r).collect();
        out.sort_by(|a, b| b.cmp(a));
        Ok(out)
    }

    pub fn records_for(&self, agent_id: AgentId) -> &[MemoryRecord] {
        self.records.get(&agent_id).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.records.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
