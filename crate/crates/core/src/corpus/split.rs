use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ThreadCorpus;
use crate::error::{Error, Result};

/// One scored pair: `src → dst` inside thread index `thread`, weight 0 for
/// sampled non-edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SplitEntry {
    pub thread: usize,
    pub src: usize,
    pub dst: usize,
    pub weight: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSet {
    Train,
    Heldout,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalSplit {
    pub train: Vec<SplitEntry>,
    pub heldout: Vec<SplitEntry>,
    pub test: Vec<SplitEntry>,
    pub zero_augmented: bool,
}

impl EvalSplit {
    pub fn sets(&self) -> [(SplitSet, &[SplitEntry]); 3] {
        [(SplitSet::Train, &self.train), (SplitSet::Heldout, &self.heldout), (SplitSet::Test, &self.test)]
    }

    pub fn get(&self, set: SplitSet) -> &[SplitEntry] {
        match set {
            SplitSet::Train => &self.train,
            SplitSet::Heldout => &self.heldout,
            SplitSet::Test => &self.test,
        }
    }
}

/// Splits the non-zero edges 80/10/10 into train/heldout/test. With
/// `zero_augmented`, heldout and test each also receive as many sampled
/// within-thread non-edges as they hold edges (fewer if the corpus runs out).
pub fn split_edges(corpus: &ThreadCorpus, seed: u64, zero_augmented: bool) -> Result<EvalSplit> {
    let n = corpus.num_edges();
    if n < 10 {
        return Err(Error::Degenerate(format!("need at least 10 non-zero edges to split, found {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<SplitEntry> =
        corpus.all_edges().map(|(t, e)| SplitEntry { thread: t, src: e.src, dst: e.dst, weight: e.weight }).collect();
    edges.shuffle(&mut rng);
    let n_train = (0.8 * n as f64).round() as usize;
    let n_held = (n - n_train) / 2;
    let mut test = edges.split_off(n_train + n_held);
    let mut heldout = edges.split_off(n_train);
    let mut train = edges;

    if zero_augmented {
        let zeros = sample_zero_pairs(corpus, heldout.len() + test.len(), &mut rng);
        let cut = zeros.len().min(heldout.len());
        heldout.extend_from_slice(&zeros[..cut]);
        test.extend_from_slice(&zeros[cut..]);
    }
    train.sort();
    heldout.sort();
    test.sort();
    Ok(EvalSplit { train, heldout, test, zero_augmented })
}

/// Uniform sample without replacement of ordered participant pairs (p ≠ q)
/// that share a thread and have no p→q edge.
pub(crate) fn sample_zero_pairs(corpus: &ThreadCorpus, count: usize, rng: &mut impl Rng) -> Vec<SplitEntry> {
    let pair_counts: Vec<usize> = corpus
        .threads()
        .iter()
        .map(|th| {
            let n = th.num_participants();
            n * n.saturating_sub(1)
        })
        .collect();
    let non_self_edges = corpus.all_edges().filter(|(_, e)| e.src != e.dst).count();
    let available = pair_counts.iter().sum::<usize>() - non_self_edges;
    if count == 0 || available == 0 {
        return Vec::new();
    }
    let is_zero = |t: usize, p: usize, q: usize| p != q && corpus.thread(t).edge_weight(p, q).is_none();

    if available <= 2 * count {
        let mut all = Vec::with_capacity(available);
        for (t, th) in corpus.threads().iter().enumerate() {
            let users: Vec<usize> = th.participants().collect();
            for &p in &users {
                for &q in &users {
                    if is_zero(t, p, q) {
                        all.push(SplitEntry { thread: t, src: p, dst: q, weight: 0 });
                    }
                }
            }
        }
        all.shuffle(rng);
        all.truncate(count);
        return all;
    }

    // rejection sampling: thread ∝ its ordered-pair count, then a uniform pair
    let cumulative: Vec<usize> = pair_counts
        .iter()
        .scan(0, |acc, &c| {
            *acc += c;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r = rng.random_range(0..total);
        let t = cumulative.partition_point(|&c| c <= r);
        let th = corpus.thread(t);
        let n = th.num_participants();
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let (p, q) = (th.user_at(a), th.user_at(b));
        if is_zero(t, p, q) && seen.insert((t, p, q)) {
            out.push(SplitEntry { thread: t, src: p, dst: q, weight: 0 });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, ThreadRecord};

    /// One thread per edge; each thread has `extra` silent participants.
    fn chain_corpus(n_edges: usize, extra: usize) -> ThreadCorpus {
        let threads = (0..n_edges)
            .map(|i| {
                let docs = (0..2 + extra).map(|u| Document { user: u, tokens: vec![] }).collect();
                ThreadRecord::new(format!("t{i}"), docs, vec![(1, 0, (i % 4 + 1) as i64)]).unwrap()
            })
            .collect();
        ThreadCorpus::new(2 + extra, 1, threads).unwrap()
    }

    #[test]
    fn ratios_for_one_hundred() {
        let c = chain_corpus(100, 0);
        let s = split_edges(&c, 7, false).unwrap();
        assert_eq!((s.train.len(), s.heldout.len(), s.test.len()), (80, 10, 10));
        assert_eq!(s, split_edges(&c, 7, false).unwrap());
        assert_ne!(s, split_edges(&c, 8, false).unwrap());
    }

    #[test]
    fn partition_is_exact() {
        let c = chain_corpus(37, 1);
        let s = split_edges(&c, 3, false).unwrap();
        let mut all: Vec<_> = s.train.iter().chain(&s.heldout).chain(&s.test).copied().collect();
        all.sort();
        let mut want: Vec<_> =
            c.all_edges().map(|(t, e)| SplitEntry { thread: t, src: e.src, dst: e.dst, weight: e.weight }).collect();
        want.sort();
        assert_eq!(all, want);
        for (got, frac) in [(s.train.len(), 0.8), (s.heldout.len(), 0.1), (s.test.len(), 0.1)] {
            assert!((got as f64 - frac * 37.0).abs() <= 1.0);
        }
    }

    #[test]
    fn zero_augmentation_matches_counts() {
        let c = chain_corpus(100, 2);
        let s = split_edges(&c, 11, true).unwrap();
        let zeros = |v: &[SplitEntry]| v.iter().filter(|e| e.weight == 0).count();
        assert_eq!(zeros(&s.heldout), 10);
        assert_eq!(zeros(&s.test), 10);
        assert_eq!(zeros(&s.train), 0);
        assert_eq!(s.heldout.len(), 20);
        for e in s.heldout.iter().chain(&s.test).filter(|e| e.weight == 0) {
            assert_ne!(e.src, e.dst);
            assert!(c.thread(e.thread).edge_weight(e.src, e.dst).is_none());
        }
        let set: HashSet<_> = s.heldout.iter().chain(&s.test).collect();
        assert_eq!(set.len(), 40);
    }

    #[test]
    fn too_few_edges() {
        assert!(matches!(split_edges(&chain_corpus(9, 0), 1, false), Err(Error::Degenerate(_))));
    }
}
