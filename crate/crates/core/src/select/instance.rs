//! Standalone selection instances: a JSON interchange format plus seeded
//! generators for harness runs and regression fixtures.

use std::path::Path;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::select::SelectionProblem;
use crate::types::{DistanceMatrix, ImportanceVector};

/// A selection problem detached from any segment, as written to and read
/// from disk. Validation happens in [`Instance::to_problem`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub m: usize,
    pub importance: Vec<f64>,
    pub distance: Vec<Vec<f64>>,
}

impl Instance {
    pub fn to_problem(&self) -> Result<SelectionProblem> {
        let distances = DistanceMatrix::from_rows(self.distance.clone())?;
        if self.n != distances.n() {
            return Err(crate::error::Error::DimensionMismatch {
                expected: format!("n = {}", distances.n()),
                actual: format!("n = {}", self.n),
            });
        }
        let importance = ImportanceVector::new(self.importance.clone())?;
        SelectionProblem::new(distances, importance, self.m)
    }

    pub fn load(path: &Path) -> Result<Instance> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Uniformly random instance: pairwise distances i.i.d. in [0, 1] (symmetric,
/// zero diagonal) and importance in (0, 1].
pub fn random_instance(n: usize, m: usize, rng: &mut impl Rng) -> Instance {
    assert!(n >= 1 && m >= 1);
    let mut distance = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = rng.random_range(0.0..=1.0);
            distance[i][j] = d;
            distance[j][i] = d;
        }
    }
    let importance = (0..n).map(|_| 1.0 - rng.random_range(0.0..1.0)).collect();
    Instance {
        n,
        m,
        importance,
        distance,
    }
}

/// Instance with `m` well-separated clusters: every intra-cluster pair sits at
/// one per-cluster distance drawn from [0.02, 0.1], every inter-cluster pair
/// in [0.8, 1.0], and importance in [0.5, 1.0]. Each cluster has at least two
/// members (requires `n >= 2 * m`), so a size-`m` summary must spend exactly
/// one representative per cluster and the greedy and exhaustive objectives
/// provably coincide.
pub fn planted_clusters_instance(n: usize, m: usize, rng: &mut impl Rng) -> Instance {
    assert!(m >= 1 && n >= 2 * m, "need at least two members per cluster");

    // Cluster sizes: start at two each, spread the remainder randomly.
    let mut sizes = vec![2usize; m];
    for _ in 0..n - 2 * m {
        let c = rng.random_range(0..m);
        sizes[c] += 1;
    }

    // Random id-to-cluster assignment via a shuffled id list.
    let mut ids: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    let mut cluster_of = vec![0usize; n];
    let mut next = 0;
    for (c, &size) in sizes.iter().enumerate() {
        for &id in &ids[next..next + size] {
            cluster_of[id] = c;
        }
        next += size;
    }

    let intra: Vec<f64> = (0..m).map(|_| rng.random_range(0.02..=0.1)).collect();
    let mut distance = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = if cluster_of[i] == cluster_of[j] {
                intra[cluster_of[i]]
            } else {
                rng.random_range(0.8..=1.0)
            };
            distance[i][j] = d;
            distance[j][i] = d;
        }
    }
    let importance = (0..n).map(|_| rng.random_range(0.5..=1.0)).collect();
    Instance {
        n,
        m,
        importance,
        distance,
    }
}

/// Instance from uniform random points in the unit square, pairwise
/// Euclidean distances scaled by 1/sqrt(2) into [0, 1], importance in
/// (0, 1]. Pipeline distance matrices are geometric (one minus a similarity
/// over images), so this models their shape far better than i.i.d. random
/// entries, which mostly violate the triangle inequality.
pub fn euclidean_instance(n: usize, m: usize, rng: &mut impl Rng) -> Instance {
    assert!(n >= 1 && m >= 1);
    let points: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
        .collect();
    let scale = std::f64::consts::SQRT_2;
    let mut distance = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = points[i].0 - points[j].0;
            let dy = points[i].1 - points[j].1;
            let d = (dx * dx + dy * dy).sqrt() / scale;
            distance[i][j] = d;
            distance[j][i] = d;
        }
    }
    let importance = (0..n).map(|_| 1.0 - rng.random_range(0.0..1.0)).collect();
    Instance {
        n,
        m,
        importance,
        distance,
    }
}
