use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::Vector;
use super::IndexError;

const MAX_LLOYD_ITERATIONS: usize = 100;
const MAX_CLUSTERS_PER_ELEMENT: usize = 8;

/// K-means clustering of one core element's image embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub element_id: String,
    /// Image ids, parallel to `assignments`.
    pub images: Vec<String>,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vector>,
    pub k: usize,
    pub seed: u64,
}

impl ClusterModel {
    /// Clusters an element's images with `k = cluster_count(n)`.
    pub fn fit(
        element_id: impl Into<String>,
        images: Vec<(String, Vector)>,
        seed: u64,
    ) -> Result<Self, IndexError> {
        let (ids, vectors): (Vec<_>, Vec<_>) = images.into_iter().unzip();
        let mut model = kmeans_pp(&vectors, cluster_count(vectors.len()), seed)?;
        model.element_id = element_id.into();
        model.images = ids;
        Ok(model)
    }

    /// Image ids grouped by cluster label, in label order.
    pub fn members(&self) -> Vec<Vec<&str>> {
        let mut groups = vec![Vec::new(); self.k];
        for (img, &label) in self.images.iter().zip(&self.assignments) {
            groups[label].push(img.as_str());
        }
        groups
    }
}

/// Per-element cluster count: `clamp(round(sqrt(n / 2)), 1, 8)`.
pub fn cluster_count(n: usize) -> usize {
    ((n as f64 / 2.0).sqrt().round() as usize).clamp(1, MAX_CLUSTERS_PER_ELEMENT)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(point, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// K-means++ seeding followed by Lloyd iterations.
///
/// Stops when assignments no longer change or after 100 iterations. Deterministic for a
/// fixed `seed`. The returned model has empty `element_id` and `images`.
pub fn kmeans_pp(vectors: &[Vector], k: usize, seed: u64) -> Result<ClusterModel, IndexError> {
    let n = vectors.len();
    if k == 0 || k > n {
        return Err(IndexError::InvalidK { k, n });
    }
    let dim = vectors[0].dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(IndexError::DimensionMismatch {
            expected: dim,
            got: v.dim(),
        });
    }
    let points: Vec<&[f64]> = vectors.iter().map(Vector::as_slice).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].to_vec());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just past the final sum.
            chosen.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].to_vec();
        for (d, p) in d2.iter_mut().zip(&points) {
            *d = d.min(dist2(p, &c));
        }
        centroids.push(c);
    }

    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        update_centroids(&points, &assignments, &mut centroids);
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    update_centroids(&points, &assignments, &mut centroids);

    Ok(ClusterModel {
        element_id: String::new(),
        images: Vec::new(),
        assignments,
        centroids: centroids
            .into_iter()
            .map(|c| Vector::new(c).expect("means of finite vectors"))
            .collect(),
        k,
        seed,
    })
}

/// Empty clusters keep their previous centroid.
fn update_centroids(points: &[&[f64]], assignments: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = centroids[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
        if n > 0 {
            *c = s.into_iter().map(|x| x / n as f64).collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositivePair {
    pub image_a: String,
    pub image_b: String,
    pub element_id: String,
    pub cluster: usize,
}

/// Draws at most one positive pair per element for one training epoch.
///
/// For each element (in key order) a cluster is chosen uniformly among those holding at
/// least two images, then two distinct images are drawn from it. Elements without such a
/// cluster are skipped.
pub fn sample_positive_pairs(
    clusters: &BTreeMap<String, ClusterModel>,
    epoch_seed: u64,
) -> Vec<PositivePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
    let mut pairs = Vec::new();
    for (element, model) in clusters {
        let eligible: Vec<(usize, Vec<&str>)> = model
            .members()
            .into_iter()
            .enumerate()
            .filter(|(_, m)| m.len() >= 2)
            .collect();
        if eligible.is_empty() {
            continue;
        }
        let (label, members) = &eligible[rng.random_range(0..eligible.len())];
        let picked = index::sample(&mut rng, members.len(), 2);
        pairs.push(PositivePair {
            image_a: members[picked.index(0)].to_string(),
            image_b: members[picked.index(1)].to_string(),
            element_id: element.clone(),
            cluster: *label,
        });
    }
    pairs
}
