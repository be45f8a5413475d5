use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::{SeedStreams, StreamRng, KMEANS};

/// Silhouette below this for every k counts as "no clear structure".
pub const STRUCTURE_THRESHOLD: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn check_input(vectors: &[Vec<f64>], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > vectors.len() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds {} points", vectors.len())));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::shape("kmeans", "vectors differ in length"));
    }
    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite coordinate".into()));
    }
    Ok(dim)
}

fn plus_plus(vectors: &[Vec<f64>], k: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let mut centroids = vec![vectors[rng.random_range(0..vectors.len())].clone()];
    let mut d: Vec<f64> = vectors.iter().map(|v| dist2(v, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = d.len() - 1;
            for (i, &w) in d.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..vectors.len())
        };
        centroids.push(vectors[pick].clone());
        for (di, v) in d.iter_mut().zip(vectors) {
            *di = di.min(dist2(v, centroids.last().expect("pushed")));
        }
    }
    centroids
}

fn lloyd(vectors: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iters: usize) -> ClusterAssignment {
    let k = centroids.len();
    let dim = vectors[0].len();
    let mut labels = vec![usize::MAX; vectors.len()];
    let mut prev = f64::INFINITY;
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for (l, v) in labels.iter_mut().zip(vectors) {
            let (c, d) = nearest(v, &centroids);
            changed |= *l != c;
            *l = c;
            inertia += d;
        }
        // Assignment against the current centroids can only lower inertia.
        assert!(
            inertia <= prev + 1e-9 * (1.0 + prev.abs()),
            "k-means inertia rose from {prev} to {inertia}"
        );
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&l, v) in labels.iter().zip(vectors) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(v) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its centroid.
                let far = (0..vectors.len())
                    .max_by(|&a, &b| {
                        dist2(&vectors[a], &centroids[labels[a]]).total_cmp(&dist2(&vectors[b], &centroids[labels[b]]))
                    })
                    .expect("nonempty");
                let old = labels[far];
                counts[old] -= 1;
                for (s, x) in sums[old].iter_mut().zip(&vectors[far]) {
                    *s -= x;
                }
                labels[far] = c;
                counts[c] = 1;
                sums[c] = vectors[far].clone();
            }
        }
        for c in 0..k {
            centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
        // Moving centroids to their members' means also can only lower it.
        let moved: f64 = labels.iter().zip(vectors).map(|(&l, v)| dist2(v, &centroids[l])).sum();
        assert!(
            moved <= inertia + 1e-9 * (1.0 + inertia.abs()),
            "k-means inertia rose from {inertia} to {moved} after the update"
        );
        prev = moved;
    }
    // Final state: centroids are member means and labels their nearest centroid.
    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0; dim]; k];
    for (l, v) in labels.iter_mut().zip(vectors) {
        *l = nearest(v, &centroids).0;
        counts[*l] += 1;
        for (s, x) in sums[*l].iter_mut().zip(v) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
    }
    let inertia = labels.iter().zip(vectors).map(|(&l, v)| dist2(v, &centroids[l])).sum();
    ClusterAssignment {
        k,
        labels,
        centroids,
        inertia,
    }
}

/// Lloyd's algorithm from k-means++ seeds, best of `restarts` by inertia
/// (earliest restart on ties). Restart `r` draws from the `kmeans` stream
/// indexed by `r`.
pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64, max_iters: usize, restarts: usize) -> Result<ClusterAssignment> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument("no vectors to cluster".into()));
    }
    check_input(vectors, k)?;
    let seeds = SeedStreams::new(seed);
    let mut best: Option<ClusterAssignment> = None;
    for r in 0..restarts.max(1) {
        let mut rng = seeds.rng_indexed(KMEANS, &[r as u64]);
        let init = plus_plus(vectors, k, &mut rng);
        let a = lloyd(vectors, init, max_iters);
        if best.as_ref().is_none_or(|b| a.inertia < b.inertia) {
            best = Some(a);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Mean silhouette; singletons score 0. Needs 2 ≤ k < n to be meaningful,
/// and returns 0 otherwise.
pub fn silhouette(vectors: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = vectors.len();
    if k < 2 || k >= n {
        return 0.0;
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        if counts[labels[i]] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist2(&vectors[i], &vectors[j]).sqrt();
            }
        }
        let a = sums[labels[i]] / (counts[labels[i]] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i] && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 && b.is_finite() {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KDiagnostic {
    pub k: usize,
    pub inertia: f64,
    pub silhouette: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KSelection {
    pub k: usize,
    pub assignment: ClusterAssignment,
    pub diagnostics: Vec<KDiagnostic>,
    /// Every candidate's silhouette fell below [`STRUCTURE_THRESHOLD`].
    pub no_clear_structure: bool,
}

impl KSelection {
    pub fn render(&self) -> String {
        let mut s = String::from("k\tinertia\tsilhouette\n");
        for d in &self.diagnostics {
            s.push_str(&format!("{}\t{}\t{}\n", d.k, d.inertia, d.silhouette));
        }
        s.push_str(&format!("# chosen k = {}\n", self.k));
        if self.no_clear_structure {
            s.push_str("# no clear structure\n");
        }
        s
    }
}

pub const DEFAULT_K_RANGE: std::ops::RangeInclusive<usize> = 2..=6;

/// Clusters at every k in `ks` (those not above the point count) and keeps
/// the highest mean silhouette, the smaller k on ties.
pub fn select_k(vectors: &[Vec<f64>], ks: &[usize], seed: u64) -> Result<KSelection> {
    let usable: Vec<usize> = ks.iter().copied().filter(|&k| k >= 1 && k <= vectors.len()).collect();
    if usable.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no usable k in {ks:?} for {} vectors",
            vectors.len()
        )));
    }
    let mut best: Option<(f64, ClusterAssignment)> = None;
    let mut diagnostics = Vec::new();
    for k in usable {
        let a = kmeans(vectors, k, seed, 300, 10)?;
        let s = silhouette(vectors, &a.labels, k);
        diagnostics.push(KDiagnostic {
            k,
            inertia: a.inertia,
            silhouette: s,
        });
        if best.as_ref().is_none_or(|(b, ba)| s > *b || (s == *b && k < ba.k)) {
            best = Some((s, a));
        }
    }
    let (_, assignment) = best.expect("nonempty");
    Ok(KSelection {
        k: assignment.k,
        no_clear_structure: diagnostics.iter().all(|d| d.silhouette < STRUCTURE_THRESHOLD),
        assignment,
        diagnostics,
    })
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("adjusted_rand_index", format!("{} vs {} labels", a.len(), b.len())));
    }
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |m: u64| (m * m.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&m| c2(m)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = if total > 0.0 { rows * cols / total } else { 0.0 };
    let max = 0.5 * (rows + cols);
    if max == expected {
        // Both labelings trivial (one cluster each, or all singletons).
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}
