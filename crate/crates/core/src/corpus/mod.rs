//! Threaded forum corpus: per-thread participant documents and weighted
//! directed reply edges.

mod io;
mod split;
mod synth;

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

pub use io::{load_corpus, load_split, load_vocab, write_corpus, write_split, write_vocab};
pub use split::{split_edges, EvalSplit, SplitEntry, SplitSet};
pub use synth::{generate_synthetic, synthetic_vocab, SynthConfig, SyntheticTruth};

/// A user's aggregated posts inside one thread.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub user: usize,
    pub tokens: Vec<u32>,
}

/// Directed reply edge `src → dst` with a positive count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: u32,
}

/// Counts reads of token and edge data while enabled. Used to check that
/// the network-only and text-only training modes stay on their side.
#[derive(Debug, Default)]
pub struct AccessProbe {
    enabled: AtomicBool,
    token_reads: AtomicU64,
    edge_reads: AtomicU64,
}

impl AccessProbe {
    pub fn enable(&self) {
        self.enabled.store(true, Ordering::Relaxed);
    }

    pub fn disable(&self) {
        self.enabled.store(false, Ordering::Relaxed);
    }

    pub fn reset(&self) {
        self.token_reads.store(0, Ordering::Relaxed);
        self.edge_reads.store(0, Ordering::Relaxed);
    }

    pub fn token_reads(&self) -> u64 {
        self.token_reads.load(Ordering::Relaxed)
    }

    pub fn edge_reads(&self) -> u64 {
        self.edge_reads.load(Ordering::Relaxed)
    }

    #[inline]
    fn tokens(&self) {
        if self.enabled.load(Ordering::Relaxed) {
            self.token_reads.fetch_add(1, Ordering::Relaxed);
        }
    }

    #[inline]
    fn edges(&self) {
        if self.enabled.load(Ordering::Relaxed) {
            self.edge_reads.fetch_add(1, Ordering::Relaxed);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThreadRecord {
    id: String,
    docs: Vec<Document>,
    edges: Vec<Edge>,
    edge_docs: Vec<(usize, usize)>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    probe: Arc<AccessProbe>,
}

impl ThreadRecord {
    /// Builds a thread, sorting documents by user and edges by endpoints.
    /// Zero-weight edges are non-edges and are dropped.
    pub fn new(id: impl Into<String>, mut docs: Vec<Document>, edges: Vec<(usize, usize, i64)>) -> Result<Self> {
        let id = id.into();
        docs.sort_by_key(|d| d.user);
        if let Some(w) = docs.windows(2).find(|w| w[0].user == w[1].user) {
            return Err(Error::Validation(format!("thread {id:?}: user {} has two documents", w[0].user)));
        }
        let doc_of: HashMap<usize, usize> = docs.iter().enumerate().map(|(i, d)| (d.user, i)).collect();
        let mut kept = Vec::with_capacity(edges.len());
        for (src, dst, w) in edges {
            if w < 0 {
                return Err(Error::Validation(format!("thread {id:?}: edge {src}->{dst} has negative weight {w}")));
            }
            if w > i64::from(u32::MAX) {
                return Err(Error::Validation(format!("thread {id:?}: edge {src}->{dst} weight {w} too large")));
            }
            for u in [src, dst] {
                if !doc_of.contains_key(&u) {
                    return Err(Error::Validation(format!("thread {id:?}: edge endpoint {u} is not a participant")));
                }
            }
            if w > 0 {
                kept.push(Edge { src, dst, weight: w as u32 });
            }
        }
        kept.sort();
        if let Some(w) = kept.windows(2).find(|w| (w[0].src, w[0].dst) == (w[1].src, w[1].dst)) {
            return Err(Error::Validation(format!("thread {id:?}: duplicate edge {}->{}", w[0].src, w[0].dst)));
        }
        let mut out_edges = vec![Vec::new(); docs.len()];
        let mut in_edges = vec![Vec::new(); docs.len()];
        let mut edge_docs = Vec::with_capacity(kept.len());
        for (e, edge) in kept.iter().enumerate() {
            let (s, d) = (doc_of[&edge.src], doc_of[&edge.dst]);
            out_edges[s].push(e);
            in_edges[d].push(e);
            edge_docs.push((s, d));
        }
        Ok(Self { id, docs, edges: kept, edge_docs, out_edges, in_edges, probe: Arc::default() })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn num_participants(&self) -> usize {
        self.docs.len()
    }

    /// Participant user ids in ascending order.
    pub fn participants(&self) -> impl Iterator<Item = usize> + '_ {
        self.docs.iter().map(|d| d.user)
    }

    pub fn user_at(&self, doc: usize) -> usize {
        self.docs[doc].user
    }

    pub fn doc_of(&self, user: usize) -> Option<usize> {
        self.docs.binary_search_by_key(&user, |d| d.user).ok()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn docs(&self) -> &[Document] {
        self.probe.tokens();
        &self.docs
    }

    pub fn tokens(&self, doc: usize) -> &[u32] {
        self.probe.tokens();
        &self.docs[doc].tokens
    }

    pub fn edges(&self) -> &[Edge] {
        self.probe.edges();
        &self.edges
    }

    /// (sender doc, receiver doc) for each edge.
    pub fn edge_docs(&self) -> &[(usize, usize)] {
        self.probe.edges();
        &self.edge_docs
    }

    /// Local indices of the edges the participant at `doc` sends.
    pub fn out_edges(&self, doc: usize) -> &[usize] {
        self.probe.edges();
        &self.out_edges[doc]
    }

    pub fn in_edges(&self, doc: usize) -> &[usize] {
        self.probe.edges();
        &self.in_edges[doc]
    }

    /// |δ_{t,p}|: the number of users the participant at `doc` sends to.
    pub fn delta(&self, doc: usize) -> usize {
        self.probe.edges();
        self.out_edges[doc].len()
    }

    /// The out-neighbourhood δ_{t,p} as user ids.
    pub fn neighborhood(&self, user: usize) -> Vec<usize> {
        match self.doc_of(user) {
            Some(d) => self.out_edges(d).iter().map(|&e| self.edges[e].dst).collect(),
            None => Vec::new(),
        }
    }

    pub fn edge_weight(&self, src: usize, dst: usize) -> Option<u32> {
        self.probe.edges();
        self.edges.binary_search_by(|e| (e.src, e.dst).cmp(&(src, dst))).ok().map(|i| self.edges[i].weight)
    }
}

/// Immutable corpus with dense user ids `0..num_users` and token ids
/// `0..vocab_size`. Edges, documents and tokens get global indices that
/// follow thread order, which the local state uses as flat offsets.
#[derive(Debug, Clone)]
pub struct ThreadCorpus {
    num_users: usize,
    vocab_size: usize,
    threads: Vec<ThreadRecord>,
    by_id: HashMap<String, usize>,
    edge_offsets: Vec<usize>,
    doc_offsets: Vec<usize>,
    token_offsets: Vec<usize>,
    probe: Arc<AccessProbe>,
}

impl ThreadCorpus {
    pub fn new(num_users: usize, vocab_size: usize, mut threads: Vec<ThreadRecord>) -> Result<Self> {
        let probe: Arc<AccessProbe> = Arc::default();
        let mut by_id = HashMap::with_capacity(threads.len());
        let mut edge_offsets = vec![0];
        let mut doc_offsets = vec![0];
        let mut token_offsets = vec![0];
        for (t, th) in threads.iter_mut().enumerate() {
            if by_id.insert(th.id.clone(), t).is_some() {
                return Err(Error::Validation(format!("duplicate thread id {:?}", th.id)));
            }
            for doc in &th.docs {
                if doc.user >= num_users {
                    return Err(Error::Validation(format!(
                        "thread {:?}: user {} out of range (U = {num_users})",
                        th.id, doc.user
                    )));
                }
                if let Some(&w) = doc.tokens.iter().find(|&&w| w as usize >= vocab_size) {
                    return Err(Error::Validation(format!(
                        "thread {:?}: token id {w} out of range (V = {vocab_size})",
                        th.id
                    )));
                }
                token_offsets.push(token_offsets.last().unwrap() + doc.tokens.len());
            }
            edge_offsets.push(edge_offsets.last().unwrap() + th.edges.len());
            doc_offsets.push(doc_offsets.last().unwrap() + th.docs.len());
            th.probe = Arc::clone(&probe);
        }
        Ok(Self { num_users, vocab_size, threads, by_id, edge_offsets, doc_offsets, token_offsets, probe })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_threads(&self) -> usize {
        self.threads.len()
    }

    /// N: the number of stored non-zero directed edges.
    pub fn num_edges(&self) -> usize {
        *self.edge_offsets.last().unwrap()
    }

    pub fn num_docs(&self) -> usize {
        *self.doc_offsets.last().unwrap()
    }

    pub fn num_tokens(&self) -> usize {
        *self.token_offsets.last().unwrap()
    }

    pub fn threads(&self) -> &[ThreadRecord] {
        &self.threads
    }

    pub fn thread(&self, t: usize) -> &ThreadRecord {
        &self.threads[t]
    }

    pub fn thread_index(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Global id of the first edge of thread `t`.
    pub fn edge_offset(&self, t: usize) -> usize {
        self.edge_offsets[t]
    }

    /// Global id of the first document of thread `t`.
    pub fn doc_offset(&self, t: usize) -> usize {
        self.doc_offsets[t]
    }

    /// Global id of the first token of global document `doc`.
    pub fn token_offset(&self, doc: usize) -> usize {
        self.token_offsets[doc]
    }

    /// Global token range of thread `t`.
    pub fn thread_token_range(&self, t: usize) -> std::ops::Range<usize> {
        self.token_offsets[self.doc_offsets[t]]..self.token_offsets[self.doc_offsets[t + 1]]
    }

    pub fn thread_edge_range(&self, t: usize) -> std::ops::Range<usize> {
        self.edge_offsets[t]..self.edge_offsets[t + 1]
    }

    pub fn probe(&self) -> &AccessProbe {
        &self.probe
    }

    pub fn max_weight(&self) -> u32 {
        self.threads.iter().flat_map(|t| t.edges().iter().map(|e| e.weight)).max().unwrap_or(0)
    }

    /// All stored edges as (thread index, edge).
    pub fn all_edges(&self) -> impl Iterator<Item = (usize, Edge)> + '_ {
        self.threads.iter().enumerate().flat_map(|(t, th)| th.edges().iter().map(move |e| (t, *e)))
    }

    /// Copy of this corpus whose edge set is exactly `keep` (documents are
    /// unchanged). Zero-weight entries are ignored.
    pub fn restrict_edges(&self, keep: &[SplitEntry]) -> Result<Self> {
        let mut per_thread: Vec<Vec<(usize, usize, i64)>> = vec![Vec::new(); self.threads.len()];
        for e in keep {
            if e.thread >= self.threads.len() {
                return Err(Error::Validation(format!("split entry refers to thread index {}", e.thread)));
            }
            if e.weight > 0 {
                per_thread[e.thread].push((e.src, e.dst, i64::from(e.weight)));
            }
        }
        let threads = self
            .threads
            .iter()
            .zip(per_thread)
            .map(|(th, edges)| ThreadRecord::new(th.id.clone(), th.docs.clone(), edges))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.num_users, self.vocab_size, threads)
    }

    /// Number of edges each user sends and receives across all threads.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_users];
        for (_, e) in self.all_edges() {
            deg[e.src] += 1;
            deg[e.dst] += 1;
        }
        deg
    }

    /// Counts edges per weight; the `cap` bucket aggregates weights ≥ cap.
    pub fn edge_weight_histogram(&self, cap: u32) -> BTreeMap<u32, usize> {
        let cap = cap.max(1);
        let mut hist = BTreeMap::new();
        for (_, e) in self.all_edges() {
            *hist.entry(e.weight.min(cap)).or_insert(0) += 1;
        }
        hist
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(user: usize, tokens: &[u32]) -> Document {
        Document { user, tokens: tokens.to_vec() }
    }

    fn corpus_with_weights(weights: &[i64]) -> ThreadCorpus {
        let docs: Vec<_> = (0..=weights.len()).map(|u| doc(u, &[])).collect();
        let edges = weights.iter().enumerate().map(|(i, &w)| (i + 1, 0, w)).collect();
        ThreadCorpus::new(weights.len() + 1, 1, vec![ThreadRecord::new("t", docs, edges).unwrap()]).unwrap()
    }

    #[test]
    fn histogram_caps_the_tail() {
        let c = corpus_with_weights(&[1, 1, 2, 15]);
        let h = c.edge_weight_histogram(11);
        assert_eq!(h, BTreeMap::from([(1, 2), (2, 1), (11, 1)]));
        assert!(corpus_with_weights(&[]).edge_weight_histogram(11).is_empty());
        let h = corpus_with_weights(&[4, 4, 4]).edge_weight_histogram(4);
        assert_eq!(h, BTreeMap::from([(4, 3)]));
    }

    #[test]
    fn neighborhoods_follow_edges() {
        let th = ThreadRecord::new(
            "x",
            vec![doc(2, &[0]), doc(0, &[1, 1]), doc(5, &[])],
            vec![(0, 2, 3), (0, 5, 1), (5, 2, 0), (2, 0, 2)],
        )
        .unwrap();
        assert_eq!(th.participants().collect::<Vec<_>>(), vec![0, 2, 5]);
        assert_eq!(th.neighborhood(0), vec![2, 5]);
        assert_eq!(th.neighborhood(5), Vec::<usize>::new());
        assert_eq!(th.delta(th.doc_of(2).unwrap()), 1);
        assert_eq!(th.num_edges(), 3);
        assert_eq!(th.edge_weight(5, 2), None);
        assert_eq!(th.edge_weight(0, 2), Some(3));
    }

    #[test]
    fn rejects_bad_threads() {
        assert!(ThreadRecord::new("a", vec![doc(0, &[])], vec![(0, 1, 1)]).is_err());
        assert!(ThreadRecord::new("a", vec![doc(0, &[]), doc(1, &[])], vec![(0, 1, -1)]).is_err());
        assert!(ThreadRecord::new("a", vec![doc(0, &[]), doc(0, &[])], vec![]).is_err());
        assert!(ThreadRecord::new("a", vec![doc(0, &[]), doc(1, &[])], vec![(0, 1, 1), (0, 1, 2)]).is_err());
        let th = ThreadRecord::new("a", vec![doc(0, &[7])], vec![]).unwrap();
        assert!(ThreadCorpus::new(1, 5, vec![th.clone()]).is_err());
        assert!(ThreadCorpus::new(1, 8, vec![th.clone(), th]).is_err());
    }

    #[test]
    fn offsets_are_cumulative() {
        let t0 = ThreadRecord::new("a", vec![doc(0, &[0, 1]), doc(1, &[2])], vec![(0, 1, 1), (1, 0, 1)]).unwrap();
        let t1 = ThreadRecord::new("b", vec![doc(1, &[]), doc(2, &[3, 3, 3])], vec![(2, 1, 4)]).unwrap();
        let c = ThreadCorpus::new(3, 4, vec![t0, t1]).unwrap();
        assert_eq!((c.num_edges(), c.num_docs(), c.num_tokens()), (3, 4, 6));
        assert_eq!(c.edge_offset(1), 2);
        assert_eq!(c.doc_offset(1), 2);
        assert_eq!(c.token_offset(3), 3);
        assert_eq!(c.thread_token_range(1), 3..6);
        assert_eq!(c.degrees(), vec![2, 3, 1]);
    }

    #[test]
    fn probe_counts_only_when_enabled() {
        let c = corpus_with_weights(&[1, 2]);
        let _ = c.thread(0).edges();
        assert_eq!(c.probe().edge_reads(), 0);
        c.probe().enable();
        let _ = c.thread(0).edges();
        let _ = c.thread(0).tokens(0);
        assert_eq!((c.probe().edge_reads(), c.probe().token_reads()), (1, 1));
    }
}
