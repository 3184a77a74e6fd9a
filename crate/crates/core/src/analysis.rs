//! Role analytics over a trained model: dominant roles, role-sorted
//! adjacency, per-thread role variation, pentagon projections and topic
//! word lists.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use ndarray::Array2;
use serde::Serialize;

use crate::corpus::ThreadCorpus;
use crate::error::{Error, Result};
use crate::state::LocalState;

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::Io { path: "<analysis>".into(), source: e })
}

fn normalized_row(gamma: &Array2<f64>, p: usize) -> Vec<f64> {
    let row = gamma.row(p);
    let s = row.sum();
    row.iter().map(|v| v / s).collect()
}

/// Community with more than half of a user's membership, if any.
pub fn dominant_roles(gamma: &Array2<f64>) -> Vec<Option<usize>> {
    (0..gamma.nrows())
        .map(|p| {
            let pi = normalized_row(gamma, p);
            pi.iter().position(|&v| v > 0.5)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjacencyEdge {
    pub src_pos: usize,
    pub dst_pos: usize,
    pub src: usize,
    pub dst: usize,
    /// Summed over threads.
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyExport {
    /// Users grouped by role (ascending), unassigned last, input order
    /// within a group.
    pub order: Vec<usize>,
    pub roles: Vec<Option<usize>>,
    pub edges: Vec<AdjacencyEdge>,
}

pub fn sorted_adjacency_export(corpus: &ThreadCorpus, roles: &[Option<usize>]) -> AdjacencyExport {
    let mut order: Vec<usize> = (0..roles.len()).collect();
    order.sort_by_key(|&u| (roles[u].is_none(), roles[u]));
    let mut pos = vec![0; roles.len()];
    for (i, &u) in order.iter().enumerate() {
        pos[u] = i;
    }
    let mut agg: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for (_, e) in corpus.all_edges() {
        *agg.entry((pos[e.src], pos[e.dst])).or_insert(0) += u64::from(e.weight);
    }
    let edges = agg
        .into_iter()
        .map(|((a, b), weight)| AdjacencyEdge { src_pos: a, dst_pos: b, src: order[a], dst: order[b], weight })
        .collect();
    AdjacencyExport { order, roles: roles.to_vec(), edges }
}

impl AdjacencyExport {
    pub fn write_order_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["position", "user", "role"])?;
        for (i, &u) in self.order.iter().enumerate() {
            let role = self.roles[u].map(|r| r.to_string()).unwrap_or_default();
            out.write_record([i.to_string(), u.to_string(), role])?;
        }
        flush(out)
    }

    pub fn write_edges_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for e in &self.edges {
            out.serialize(e)?;
        }
        flush(out)
    }
}

/// Total variation distance ×100 between two distributions.
pub fn percent_variation(a: &[f64], b: &[f64]) -> f64 {
    50.0 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationRecord {
    pub thread: String,
    pub user: usize,
    pub variation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationHistogram {
    /// `counts[i]` covers [100 i / bins, 100 (i+1) / bins); the last bin
    /// includes 100.
    pub counts: Vec<usize>,
    pub records: Vec<VariationRecord>,
}

/// Compares each sender's thread-level role mix (normalized sender marginals
/// of its out-edges) with its global membership.
pub fn local_global_variation(
    corpus: &ThreadCorpus,
    gamma: &Array2<f64>,
    local: &LocalState,
    bins: usize,
) -> Result<VariationHistogram> {
    if bins == 0 {
        return Err(Error::Validation("histogram needs at least one bin".into()));
    }
    let k = local.k();
    let mut counts = vec![0; bins];
    let mut records = Vec::new();
    for t in 0..corpus.num_threads() {
        let th = corpus.thread(t);
        for d in 0..th.num_participants() {
            let out = th.out_edges(d);
            if out.is_empty() {
                continue;
            }
            let mut local_pi = vec![0.0; k];
            for &e in out {
                for (g, m) in local.sender_marginal(corpus.edge_offset(t) + e).into_iter().enumerate() {
                    local_pi[g] += m;
                }
            }
            let s: f64 = local_pi.iter().sum();
            local_pi.iter_mut().for_each(|v| *v /= s);
            let user = th.user_at(d);
            let v = percent_variation(&normalized_row(gamma, user), &local_pi).clamp(0.0, 100.0);
            let bin = ((v / 100.0 * bins as f64) as usize).min(bins - 1);
            counts[bin] += 1;
            records.push(VariationRecord { thread: th.id().to_string(), user, variation: v });
        }
    }
    Ok(VariationHistogram { counts, records })
}

impl VariationHistogram {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["bin_lo", "bin_hi", "count"])?;
        let n = self.counts.len();
        for (i, c) in self.counts.iter().enumerate() {
            let lo = 100.0 * i as f64 / n as f64;
            let hi = 100.0 * (i + 1) as f64 / n as f64;
            out.write_record([format!("{lo}"), format!("{hi}"), c.to_string()])?;
        }
        flush(out)
    }
}

/// Corner colours of the pentagon plot.
pub const PENTAGON_PALETTE: [(f64, f64, f64); 5] =
    [(0.0, 0.0, 255.0), (0.0, 170.0, 0.0), (255.0, 0.0, 0.0), (0.0, 200.0, 200.0), (160.0, 32.0, 240.0)];

/// Unit-circle corner `k` at angle 90° + 72°k.
pub fn pentagon_corner(k: usize) -> (f64, f64) {
    let a = (90.0 + 72.0 * k as f64).to_radians();
    (a.cos(), a.sin())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PentagonPoint {
    pub user: usize,
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub size: usize,
    /// The user has no membership on the five topics; drawn at the centre.
    pub zero_mass: bool,
}

/// Projects each user's membership, restricted to five topics and
/// renormalized, onto the convex hull of a regular pentagon.
pub fn pentagon_projection(gamma: &Array2<f64>, group: &[usize], degrees: &[usize]) -> Result<Vec<PentagonPoint>> {
    if group.len() != 5 {
        return Err(Error::Validation(format!("pentagon needs 5 topics, got {}", group.len())));
    }
    if let Some(&k) = group.iter().find(|&&k| k >= gamma.ncols()) {
        return Err(Error::Validation(format!("topic {k} outside K = {}", gamma.ncols())));
    }
    let mut out = Vec::with_capacity(gamma.nrows());
    for p in 0..gamma.nrows() {
        let pi = normalized_row(gamma, p);
        let sub: Vec<f64> = group.iter().map(|&k| pi[k]).collect();
        let mass: f64 = sub.iter().sum();
        let size = degrees.get(p).copied().unwrap_or(0);
        let zero_mass = !(mass > 0.0);
        let w: Vec<f64> = if zero_mass { vec![0.2; 5] } else { sub.iter().map(|v| v / mass).collect() };
        let (mut x, mut y, mut r, mut g, mut b) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &wi) in w.iter().enumerate() {
            let (cx, cy) = pentagon_corner(i);
            x += wi * cx;
            y += wi * cy;
            r += wi * PENTAGON_PALETTE[i].0;
            g += wi * PENTAGON_PALETTE[i].1;
            b += wi * PENTAGON_PALETTE[i].2;
        }
        out.push(PentagonPoint { user: p, x, y, r, g, b, size, zero_mass });
    }
    Ok(out)
}

pub fn write_pentagon_csv(points: &[PentagonPoint], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(p)?;
    }
    flush(out)
}

/// Minimal SVG scatter: pentagon outline plus one circle per user with
/// radius ∝ √degree.
pub fn pentagon_svg(points: &[PentagonPoint]) -> String {
    let (size, half) = (600.0, 300.0);
    let scale = 260.0;
    let to_px = |x: f64, y: f64| (half + scale * x, half - scale * y);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let outline: Vec<String> = (0..5)
        .map(|k| {
            let (cx, cy) = pentagon_corner(k);
            let (px, py) = to_px(cx, cy);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    let _ = writeln!(s, r#"<polygon points="{}" fill="none" stroke="black"/>"#, outline.join(" "));
    for p in points {
        let (px, py) = to_px(p.x, p.y);
        let radius = 1.0 + (p.size as f64).sqrt();
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="{radius:.2}" fill="rgb({},{},{})" fill-opacity="0.7"/>"#,
            p.r.round() as u8,
            p.g.round() as u8,
            p.b.round() as u8
        );
    }
    s.push_str("</svg>\n");
    s
}

/// The `n` highest-weight words of each topic, ties to the smaller word id.
pub fn top_words(tau: &Array2<f64>, vocab: &[String], n: usize) -> Result<Vec<Vec<String>>> {
    if n > tau.ncols() {
        return Err(Error::Validation(format!("asked for {n} words from a vocabulary of {}", tau.ncols())));
    }
    if vocab.len() != tau.ncols() {
        return Err(Error::Shape(format!("vocabulary has {} words, model has {}", vocab.len(), tau.ncols())));
    }
    Ok(tau
        .rows()
        .into_iter()
        .map(|row| {
            let mut ids: Vec<usize> = (0..row.len()).collect();
            ids.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            ids.into_iter().take(n).map(|i| vocab[i].clone()).collect()
        })
        .collect())
}

/// One column per topic, one row per rank.
pub fn write_top_words_csv(words: &[Vec<String>], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record((0..words.len()).map(|k| format!("topic_{k}")))?;
    let n = words.first().map_or(0, Vec::len);
    for i in 0..n {
        out.write_record(words.iter().map(|col| col[i].as_str()))?;
    }
    flush(out)
}
