use crate::error::{Error, Result};
use crate::sampling::EvaluatedSolution;

/// Training data shared by all surrogate families.
///
/// Inputs are mapped to `[0, 1]` per dimension using the bounding box of
/// the data; targets are standardized to zero mean and unit variance.
/// Identical input vectors are collapsed to the one with the lowest target.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    offset: Vec<f64>,
    scale: Vec<f64>,
    target_mean: f64,
    target_std: f64,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Dimension(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let d = inputs.first().map_or(0, Vec::len);
        if d == 0 || inputs.iter().any(|x| x.len() != d) {
            return Err(Error::Dimension(
                "training inputs must share a positive dimension".into(),
            ));
        }
        if inputs.iter().flatten().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::Training("non-finite training data".into()));
        }

        let (inputs, targets) = dedup(inputs, targets);
        if inputs.len() < 2 {
            return Err(Error::Training(format!(
                "need at least 2 distinct points, got {}",
                inputs.len()
            )));
        }

        let mut offset = inputs[0].clone();
        let mut upper = inputs[0].clone();
        for x in &inputs[1..] {
            for j in 0..d {
                offset[j] = offset[j].min(x[j]);
                upper[j] = upper[j].max(x[j]);
            }
        }
        let scale = offset
            .iter()
            .zip(&upper)
            .map(|(lo, hi)| if hi > lo { hi - lo } else { 1.0 })
            .collect();

        let n = targets.len() as f64;
        let target_mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|y| (y - target_mean).powi(2)).sum::<f64>() / n;
        let target_std = if var > 0.0 { var.sqrt() } else { 1.0 };

        Ok(Self {
            inputs,
            targets,
            offset,
            scale,
            target_mean,
            target_std,
        })
    }

    pub fn from_solutions(solutions: &[EvaluatedSolution]) -> Result<Self> {
        Self::new(
            solutions.iter().map(|s| s.x.clone()).collect(),
            solutions.iter().map(|s| s.value).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    /// Deduplicated raw inputs.
    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(v, (o, s))| (v - o) / s)
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(v, (o, s))| v * s + o)
            .collect()
    }

    pub fn normalized_inputs(&self) -> Vec<Vec<f64>> {
        self.inputs.iter().map(|x| self.normalize(x)).collect()
    }

    pub fn standardized_targets(&self) -> Vec<f64> {
        self.targets.iter().map(|y| self.standardize(*y)).collect()
    }

    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    pub fn unstandardize(&self, z: f64) -> f64 {
        z * self.target_std + self.target_mean
    }

    pub fn target_std(&self) -> f64 {
        self.target_std
    }
}

fn dedup(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut kept_x: Vec<Vec<f64>> = Vec::with_capacity(inputs.len());
    let mut kept_y: Vec<f64> = Vec::with_capacity(targets.len());
    for (x, y) in inputs.into_iter().zip(targets) {
        match kept_x.iter().position(|k| *k == x) {
            Some(i) => kept_y[i] = kept_y[i].min(y),
            None => {
                kept_x.push(x);
                kept_y.push(y);
            }
        }
    }
    (kept_x, kept_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_keep_lowest_target() {
        let ts = TrainingSet::new(
            vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 1.0]],
            vec![5.0, 2.0, 3.0],
        )
        .unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.targets(), &[3.0, 2.0]);
    }

    #[test]
    fn too_few_distinct_points() {
        let err = TrainingSet::new(vec![vec![1.0], vec![1.0]], vec![1.0, 2.0]);
        assert!(matches!(err, Err(Error::Training(_))));
        assert!(TrainingSet::new(vec![vec![1.0]], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn constant_targets_have_unit_scale() {
        let ts = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![4.0, 4.0]).unwrap();
        assert_eq!(ts.standardized_targets(), vec![0.0, 0.0]);
        assert_eq!(ts.unstandardize(0.0), 4.0);
    }

    #[test]
    fn normalized_inputs_span_unit_box() {
        let ts = TrainingSet::new(
            vec![vec![-2.0, 5.0], vec![2.0, 5.0], vec![0.0, 5.0]],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let z = ts.normalized_inputs();
        assert_eq!(z[0], vec![0.0, 0.0]);
        assert_eq!(z[1], vec![1.0, 0.0]);
        assert_eq!(z[2], vec![0.5, 0.0]);
    }

    proptest! {
        #[test]
        fn normalization_round_trips(
            pts in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..12),
            query in prop::collection::vec(-1e3f64..1e3, 3),
        ) {
            let targets: Vec<f64> = (0..pts.len()).map(|i| i as f64).collect();
            if let Ok(ts) = TrainingSet::new(pts, targets) {
                let back = ts.denormalize(&ts.normalize(&query));
                for (a, b) in back.iter().zip(&query) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
                let y = 123.456;
                prop_assert!((ts.unstandardize(ts.standardize(y)) - y).abs() <= 1e-12 * y.abs());
            }
        }
    }
}
