use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::split::{EvalSplit, SplitEntry, SplitSet};
use super::{Document, ThreadCorpus, ThreadRecord};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct DocLine {
    user: i64,
    tokens: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThreadLine {
    thread: String,
    docs: Vec<DocLine>,
    edges: Vec<[i64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct SplitLine {
    set: SplitSet,
    t: String,
    p: i64,
    q: i64,
    y: i64,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Reads a vocabulary file: one token per line, id = zero-based line index.
pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    open(path)?.lines().map(|l| l.map_err(|e| Error::io(path, e))).collect()
}

pub fn write_vocab(words: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for word in words {
        writeln!(w, "{word}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn non_negative(v: i64, what: &str, path: &Path, line: usize) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("{what} {v} is negative"),
    })
}

/// Loads a newline-delimited JSON corpus. `U` is one past the largest user
/// id seen and `V` is the vocabulary length.
pub fn load_corpus(corpus_path: impl AsRef<Path>, vocab_path: impl AsRef<Path>) -> Result<ThreadCorpus> {
    let vocab_size = load_vocab(vocab_path)?.len();
    let path = corpus_path.as_ref();
    let mut threads = Vec::new();
    let mut max_user = None;
    for (i, line) in open(path)?.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ThreadLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg: e.to_string(),
        })?;
        let mut docs = Vec::with_capacity(rec.docs.len());
        for d in rec.docs {
            let user = non_negative(d.user, "user id", path, lineno)?;
            max_user = max_user.max(Some(user));
            let tokens = d
                .tokens
                .into_iter()
                .map(|w| {
                    if w < 0 || w >= vocab_size as i64 {
                        Err(Error::Validation(format!(
                            "{}:{lineno}: token id {w} out of range (V = {vocab_size})",
                            path.display()
                        )))
                    } else {
                        Ok(w as u32)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            docs.push(Document { user, tokens });
        }
        let edges = rec
            .edges
            .into_iter()
            .map(|[s, d, w]| {
                Ok((non_negative(s, "edge source", path, lineno)?, non_negative(d, "edge target", path, lineno)?, w))
            })
            .collect::<Result<Vec<_>>>()?;
        let th = ThreadRecord::new(rec.thread, docs, edges)
            .map_err(|e| Error::Validation(format!("{}:{lineno}: {e}", path.display())))?;
        threads.push(th);
    }
    ThreadCorpus::new(max_user.map_or(0, |u| u + 1), vocab_size, threads)
}

pub fn write_corpus(corpus: &ThreadCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for th in corpus.threads() {
        let rec = ThreadLine {
            thread: th.id().to_string(),
            docs: th
                .docs()
                .iter()
                .map(|d| DocLine { user: d.user as i64, tokens: d.tokens.iter().map(|&t| i64::from(t)).collect() })
                .collect(),
            edges: th.edges().iter().map(|e| [e.src as i64, e.dst as i64, i64::from(e.weight)]).collect(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_split(split: &EvalSplit, corpus: &ThreadCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for (set, entries) in split.sets() {
        for e in entries {
            let line = SplitLine {
                set,
                t: corpus.thread(e.thread).id().to_string(),
                p: e.src as i64,
                q: e.dst as i64,
                y: i64::from(e.weight),
            };
            serde_json::to_writer(&mut w, &line)?;
            writeln!(w).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a split file, resolving thread ids against `corpus`.
pub fn load_split(path: impl AsRef<Path>, corpus: &ThreadCorpus) -> Result<EvalSplit> {
    let path = path.as_ref();
    let mut split = EvalSplit::default();
    for (i, line) in open(path)?.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { path: path.to_path_buf(), line: lineno, msg };
        let rec: SplitLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let thread = corpus.thread_index(&rec.t).ok_or_else(|| parse_err(format!("unknown thread {:?}", rec.t)))?;
        let weight = u32::try_from(rec.y).map_err(|_| parse_err(format!("weight {} out of range", rec.y)))?;
        let entry = SplitEntry {
            thread,
            src: non_negative(rec.p, "user id", path, lineno)?,
            dst: non_negative(rec.q, "user id", path, lineno)?,
            weight,
        };
        let th = corpus.thread(thread);
        if th.doc_of(entry.src).is_none() || th.doc_of(entry.dst).is_none() {
            return Err(parse_err(format!("pair {}->{} is not inside thread {:?}", entry.src, entry.dst, rec.t)));
        }
        match rec.set {
            SplitSet::Train => split.train.push(entry),
            SplitSet::Heldout => split.heldout.push(entry),
            SplitSet::Test => split.test.push(entry),
        }
    }
    split.zero_augmented = split.heldout.iter().chain(&split.test).any(|e| e.weight == 0);
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn loads_two_threads() {
        let dir = tempfile::tempdir().unwrap();
        let vocab = write(dir.path(), "vocab.txt", "a\nb\nc\nd\ne\n");
        let corpus = write(
            dir.path(),
            "c.jsonl",
            concat!(
                r#"{"thread":"t1","docs":[{"user":0,"tokens":[0,1]},{"user":1,"tokens":[2]}],"edges":[[1,0,2]]}"#,
                "\n",
                r#"{"thread":"t2","docs":[{"user":2,"tokens":[3,4]},{"user":0,"tokens":[]}],"edges":[[0,2,1],[2,0,1]]}"#,
                "\n"
            ),
        );
        let c = load_corpus(&corpus, &vocab).unwrap();
        assert_eq!((c.num_threads(), c.num_users(), c.vocab_size(), c.num_edges()), (2, 3, 5, 3));
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let vocab = write(dir.path(), "vocab.txt", "a\n");
        let corpus = write(dir.path(), "c.jsonl", "");
        let c = load_corpus(&corpus, &vocab).unwrap();
        assert_eq!((c.num_threads(), c.num_edges()), (0, 0));
    }

    #[test]
    fn reports_errors_with_context() {
        let dir = tempfile::tempdir().unwrap();
        let vocab = write(dir.path(), "vocab.txt", "a\nb\n");
        let neg = write(
            dir.path(),
            "neg.jsonl",
            r#"{"thread":"t","docs":[{"user":0,"tokens":[]},{"user":1,"tokens":[]}],"edges":[[0,1,-1]]}"#,
        );
        assert!(matches!(load_corpus(&neg, &vocab), Err(Error::Validation(_))));
        let tok = write(dir.path(), "tok.jsonl", r#"{"thread":"t","docs":[{"user":0,"tokens":[2]}],"edges":[]}"#);
        assert!(matches!(load_corpus(&tok, &vocab), Err(Error::Validation(_))));
        let endpoint =
            write(dir.path(), "ep.jsonl", r#"{"thread":"t","docs":[{"user":0,"tokens":[]}],"edges":[[0,3,1]]}"#);
        assert!(matches!(load_corpus(&endpoint, &vocab), Err(Error::Validation(_))));
        let bad = write(dir.path(), "bad.jsonl", "\n{\"thread\": 3}\n");
        match load_corpus(&bad, &vocab) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
