use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{standardize, FeatureTable, WeatherError};
use crate::rng::{open_unit, substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { max_iter: 200 }
    }
}

/// k-means result on the standardized feature subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub feature_ids: Vec<String>,
    pub labels: Vec<usize>,
    /// k × features, in standardized units.
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ClusterAssignment {
    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

pub fn cluster_weather(
    table: &FeatureTable,
    feature_subset: &[&str],
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment, WeatherError> {
    cluster_weather_with(table, feature_subset, k, seed, &KMeansOptions::default())
}

/// Lloyd's algorithm with k-means++ seeding on the standardized subset.
pub fn cluster_weather_with(
    table: &FeatureTable,
    feature_subset: &[&str],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<ClusterAssignment, WeatherError> {
    if k == 0 {
        return Err(WeatherError::InvalidArgument("k must be at least 1".into()));
    }
    let sub = table.select(feature_subset)?;
    let std = standardize(&sub)?;
    let x = &std.values;
    let distinct = count_distinct_rows(x);
    if k > distinct {
        return Err(WeatherError::TooManyClusters { k, distinct });
    }

    let mut centroids = seed_plus_plus(x, k, seed);
    let mut labels = assign(x, &centroids);
    let mut history = vec![objective(x, &labels, &centroids)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        update_centroids(x, &mut labels, &mut centroids);
        let next = assign(x, &centroids);
        history.push(objective(x, &next, &centroids));
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }

    Ok(ClusterAssignment {
        k,
        feature_ids: std.feature_ids.clone(),
        labels,
        centroids,
        objective_history: history,
        iterations,
        converged,
    })
}

fn sq_dist(x: &DMatrix<f64>, i: usize, c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(j, cj)| (x[(i, j)] - cj).powi(2)).sum()
}

fn count_distinct_rows(x: &DMatrix<f64>) -> usize {
    let mut rows: Vec<Vec<u64>> = (0..x.nrows())
        .map(|i| x.row(i).iter().map(|v| v.to_bits()).collect())
        .collect();
    rows.sort();
    rows.dedup();
    rows.len()
}

fn seed_plus_plus(x: &DMatrix<f64>, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = x.nrows();
    let mut rng = substream(seed, Stream::Cluster, 0);
    let row = |i: usize| x.row(i).iter().copied().collect::<Vec<f64>>();
    let mut centroids = vec![row(rng.gen_range(0..n))];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x, i, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let target = open_unit(&mut rng) * total;
        let mut acc = 0.0;
        let mut pick = n - 1;
        for (i, d) in d2.iter().enumerate() {
            acc += d;
            if acc >= target && *d > 0.0 {
                pick = i;
                break;
            }
        }
        // Rounding can land on an already chosen point; take the farthest instead.
        if d2[pick] == 0.0 {
            pick = argmax(&d2);
        }
        let c = row(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x, i, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best })
        .0
}

fn assign(x: &DMatrix<f64>, centroids: &[Vec<f64>]) -> Vec<usize> {
    (0..x.nrows())
        .map(|i| {
            centroids
                .iter()
                .enumerate()
                .map(|(c, cen)| (c, sq_dist(x, i, cen)))
                .fold((0, f64::INFINITY), |best, (c, d)| if d < best.1 { (c, d) } else { best })
                .0
        })
        .collect()
}

fn objective(x: &DMatrix<f64>, labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(x, i, &centroids[l]))
        .sum()
}

/// Recomputes means; an emptied cluster takes over the point farthest from its centroid.
fn update_centroids(x: &DMatrix<f64>, labels: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let p = x.ncols();
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            break;
        };
        let dists: Vec<f64> = (0..x.nrows())
            .map(|i| {
                if sizes[labels[i]] > 1 {
                    sq_dist(x, i, &centroids[labels[i]])
                } else {
                    -1.0
                }
            })
            .collect();
        let far = argmax(&dists);
        labels[far] = empty;
        centroids[empty] = x.row(far).iter().copied().collect();
    }
    let mut sums = vec![vec![0.0; p]; k];
    let mut sizes = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        sizes[l] += 1;
        for j in 0..p {
            sums[l][j] += x[(i, j)];
        }
    }
    for c in 0..k {
        for j in 0..p {
            centroids[c][j] = sums[c][j] / sizes[c] as f64;
        }
    }
}
