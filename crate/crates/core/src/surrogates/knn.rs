//! Inverse-distance-weighted k-nearest-neighbor regression, plus the level
//! classifier used by the L1 infill criteria.

use super::TrainingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KnnModel {
    data: TrainingSet,
    points: Vec<Vec<f64>>,
    k: usize,
    /// Rank of each training point by target, best first.
    ranks: Vec<usize>,
}

pub fn fit_knn(data: &TrainingSet, k: usize) -> Result<KnnModel> {
    if k == 0 || k > data.len() {
        return Err(Error::Config(format!("k must lie in [1, {}], got {k}", data.len())));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.targets()[a].total_cmp(&data.targets()[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; data.len()];
    for (rank, i) in order.into_iter().enumerate() {
        ranks[i] = rank;
    }
    Ok(KnnModel {
        points: data.normalized_inputs(),
        data: data.clone(),
        k,
        ranks,
    })
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    /// The `k` nearest training points as `(index, distance)`, closest first,
    /// ties by index. Distances are Euclidean in normalized input space.
    pub fn neighbors(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let z = self.data.normalize(x);
        let mut dist: Vec<(usize, f64)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
                (i, d2.sqrt())
            })
            .collect();
        dist.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        dist.truncate(self.k);
        dist
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let nn = self.neighbors(x);
        if nn[0].1 == 0.0 {
            return self.data.targets()[nn[0].0];
        }
        let (num, den) = nn.iter().fold((0.0, 0.0), |(num, den), (i, d)| {
            let w = 1.0 / d;
            (num + w * self.data.targets()[*i], den + w)
        });
        num / den
    }

    /// Level of training point `i` when the training set is split into
    /// `levels` equal-size tiers by target, level 0 being the best.
    pub fn training_level(&self, i: usize, levels: usize) -> usize {
        self.ranks[i] * levels / self.points.len()
    }

    /// Predicted level of `x` by inverse-distance-weighted vote of its
    /// neighbors. An exact hit takes that point's level; vote ties go to the
    /// better level.
    pub fn predict_level(&self, x: &[f64], levels: usize) -> usize {
        let nn = self.neighbors(x);
        if nn[0].1 == 0.0 {
            return self.training_level(nn[0].0, levels);
        }
        let mut votes = vec![0.0; levels];
        for (i, d) in &nn {
            votes[self.training_level(*i, levels)] += 1.0 / d;
        }
        let mut best = 0;
        for (level, v) in votes.iter().enumerate() {
            if *v > votes[best] {
                best = level;
            }
        }
        best
    }
}
