//! Sensori-motor state extraction: online ε-means and batch k-means.
//!
//! ε-means is a single pass over the stream. A point farther than ε from
//! every existing center founds a new cluster centered on itself; otherwise
//! the nearest cluster's count is incremented. Centers never move, which is
//! what lets a cluster set be handed down and extended by later streams.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

/// How a cluster set was built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusterBuild {
    Epsilon(f64),
    KMeans(usize),
}

/// Cluster centers with their visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    dim: usize,
    centers: Vec<f64>,
    counts: Vec<u64>,
    build: ClusterBuild,
}

impl ClusterSet {
    /// An empty set for ε-means with radius `epsilon`.
    pub fn with_epsilon(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(ClusterSet {
            dim: 0,
            centers: Vec::new(),
            counts: Vec::new(),
            build: ClusterBuild::Epsilon(epsilon),
        })
    }

    pub fn build(&self) -> ClusterBuild {
        self.build
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Dimension of the centers, 0 while empty.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], u64)> + '_ {
        (0..self.len()).map(move |i| (self.center(i), self.counts[i]))
    }

    /// Lowest index at minimal Euclidean distance from `x`, with that distance.
    pub fn nearest(&self, x: &[f64]) -> Result<(usize, f64)> {
        if self.is_empty() {
            return Err(Error::EmptyClusterSet);
        }
        self.check_dim(x)?;
        let (idx, sq) = nearest_sq(&self.centers, self.dim, x);
        Ok((idx, sq.sqrt()))
    }

    /// Feeds one point through ε-means; returns the index of the cluster it
    /// landed in.
    pub fn epsilon_update(&mut self, x: &[f64]) -> Result<usize> {
        let ClusterBuild::Epsilon(epsilon) = self.build else {
            return Err(Error::InvalidParameter(
                "epsilon update on a k-means cluster set".into(),
            ));
        };
        if self.is_empty() {
            if x.is_empty() {
                return Err(Error::DimensionMismatch { expected: 1, got: 0 });
            }
            self.dim = x.len();
            return Ok(self.push(x, 1));
        }
        self.check_dim(x)?;
        let (idx, sq) = nearest_sq(&self.centers, self.dim, x);
        if sq.sqrt() > epsilon {
            Ok(self.push(x, 1))
        } else {
            self.counts[idx] += 1;
            Ok(idx)
        }
    }

    /// CSV dump: header `n,c0..c{d-1}` then one row per cluster.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n");
        for j in 0..self.dim {
            write!(out, ",c{j}").unwrap();
        }
        out.push('\n');
        for (center, n) in self.iter() {
            write!(out, "{n}").unwrap();
            for v in center {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    fn push(&mut self, x: &[f64], count: u64) -> usize {
        self.centers.extend_from_slice(x);
        self.counts.push(count);
        self.counts.len() - 1
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Consuming form of [`ClusterSet::epsilon_update`].
pub fn epsilon_means_update(mut set: ClusterSet, x: &[f64]) -> Result<ClusterSet> {
    set.epsilon_update(x)?;
    Ok(set)
}

/// Runs ε-means over `points` in order, starting from an empty set.
pub fn epsilon_means<P: AsRef<[f64]>>(points: &[P], epsilon: f64) -> Result<ClusterSet> {
    let mut set = ClusterSet::with_epsilon(epsilon)?;
    for p in points {
        set.epsilon_update(p.as_ref())?;
    }
    Ok(set)
}

pub fn nearest_cluster(set: &ClusterSet, x: &[f64]) -> Result<(usize, f64)> {
    set.nearest(x)
}

// Squared distance search with partial-sum pruning. A candidate is only
// abandoned once its partial sum reaches the best so far, so the lowest
// index still wins ties.
fn nearest_sq(centers: &[f64], dim: usize, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    'centers: for (i, c) in centers.chunks_exact(dim).enumerate() {
        let mut sq = 0.0;
        for (a, b) in c.iter().zip(x) {
            let d = a - b;
            sq += d * d;
            if sq >= best.1 {
                continue 'centers;
            }
        }
        best = (i, sq);
    }
    best
}

/// Per-iteration diagnostics of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansTrace {
    /// Within-cluster sum of squares after each assignment step.
    pub wcss: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final cluster index of every input point.
    pub assignment: Vec<usize>,
}

pub const KMEANS_MAX_ITERATIONS: usize = 200;

/// Lloyd's k-means seeded with `k` distinct random training points.
pub fn kmeans<P: AsRef<[f64]>, R: Rng + ?Sized>(
    points: &[P],
    k: usize,
    rng: &mut R,
) -> Result<ClusterSet> {
    kmeans_traced(points, k, rng).map(|(set, _)| set)
}

pub fn kmeans_traced<P: AsRef<[f64]>, R: Rng + ?Sized>(
    points: &[P],
    k: usize,
    rng: &mut R,
) -> Result<(ClusterSet, KMeansTrace)> {
    let n = points.len();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::TooFewPoints { k, points: n });
    }
    let dim = points[0].as_ref().len();
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    if let Some(bad) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.as_ref().len(),
        });
    }

    let mut centers = Vec::with_capacity(k * dim);
    for i in rand::seq::index::sample(rng, n, k) {
        centers.extend_from_slice(points[i].as_ref());
    }

    let mut assignment = vec![usize::MAX; n];
    let mut dist_sq = vec![0.0; n];
    let mut wcss = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    loop {
        iterations += 1;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, sq) = nearest_sq(&centers, dim, p.as_ref());
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
            dist_sq[i] = sq;
        }
        wcss.push(dist_sq.iter().sum());
        if !changed {
            converged = true;
            break;
        }
        if iterations == KMEANS_MAX_ITERATIONS {
            break;
        }

        let mut sums = vec![0.0; k * dim];
        let mut sizes = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            sizes[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(p.as_ref()) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            let center = &mut centers[c * dim..(c + 1) * dim];
            if sizes[c] > 0 {
                for (dst, s) in center.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *dst = s / sizes[c] as f64;
                }
                continue;
            }
            // Empty cluster: move it onto the point worst served by its
            // current center.
            let far = (0..n)
                .filter(|&i| !taken[i])
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist_sq[b] >= dist_sq[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = far {
                taken[i] = true;
                center.copy_from_slice(points[i].as_ref());
            }
        }
    }

    let mut sizes = vec![0u64; k];
    for &c in &assignment {
        sizes[c] += 1;
    }
    // Clusters can only stay empty when the data has fewer than k distinct
    // points; they are dropped and assignments renumbered.
    let mut remap = vec![usize::MAX; k];
    let mut set = ClusterSet {
        dim,
        centers: Vec::with_capacity(k * dim),
        counts: Vec::with_capacity(k),
        build: ClusterBuild::KMeans(k),
    };
    for c in 0..k {
        if sizes[c] > 0 {
            remap[c] = set.push(&centers[c * dim..(c + 1) * dim], sizes[c]);
        }
    }
    for a in &mut assignment {
        *a = remap[*a];
    }
    Ok((
        set,
        KMeansTrace {
            wcss,
            iterations,
            converged,
            assignment,
        },
    ))
}
