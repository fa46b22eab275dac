//! Cubic radial basis function interpolant with a linear polynomial tail.
//!
//! On normalized inputs `z_i` the model is
//! `s(z) = sum_i w_i |z - z_i|^3 + c_0 + sum_j c_j z_j`, with the side
//! conditions `P^T w = 0`. The saddle-point system is solved by LU when the
//! polynomial block `P` has full column rank. When it does not (too few
//! points for the tail, degenerate layouts), or LU fails or leaves a
//! residual above 1e-8 (near-coincident centers), a truncated-SVD
//! least-squares solve is used and the model is flagged as regularized.

use nalgebra::{DMatrix, DVector};

use super::TrainingSet;
use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RbfModel {
    data: TrainingSet,
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    tail: Vec<f64>,
    regularized: bool,
}

fn cubic(a: &[f64], b: &[f64]) -> f64 {
    let r2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    r2 * r2.sqrt()
}

pub fn fit_rbf(data: &TrainingSet) -> Result<RbfModel> {
    let centers = data.normalized_inputs();
    let y = data.standardized_targets();
    let n = centers.len();
    let d = data.dim();
    let m = n + d + 1;

    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..n {
        for k in (i + 1)..n {
            let phi = cubic(&centers[i], &centers[k]);
            a[(i, k)] = phi;
            a[(k, i)] = phi;
        }
        a[(i, n)] = 1.0;
        a[(n, i)] = 1.0;
        for j in 0..d {
            a[(i, n + 1 + j)] = centers[i][j];
            a[(n + 1 + j, i)] = centers[i][j];
        }
    }
    let mut b = DVector::<f64>::zeros(m);
    b.rows_mut(0, n).copy_from_slice(&y);

    let residual = |sol: &DVector<f64>| (&a * sol - &b).amax();
    let mut regularized = false;
    let direct = if tail_has_full_rank(&a, n, d) {
        a.clone().lu().solve(&b)
    } else {
        None
    };
    let solution = match direct {
        Some(sol) if sol.iter().all(|v| v.is_finite()) && residual(&sol) <= RESIDUAL_TOL => sol,
        _ => {
            regularized = true;
            let svd = a.clone().svd(true, true);
            let eps = 1e-12 * svd.singular_values.max();
            svd.solve(&b, eps)
                .map_err(|e| Error::Training(format!("RBF system: {e}")))?
        }
    };
    if regularized {
        log::debug!(
            "RBF system with {n} centers in {d}D solved by regularized least squares (residual {:e})",
            residual(&solution)
        );
    }

    Ok(RbfModel {
        data: data.clone(),
        centers,
        weights: solution.rows(0, n).iter().copied().collect(),
        tail: solution.rows(n, d + 1).iter().copied().collect(),
        regularized,
    })
}

/// Rank of the `n x (d + 1)` polynomial block, which must be `d + 1` for the
/// interpolation system to be nonsingular.
fn tail_has_full_rank(a: &DMatrix<f64>, n: usize, d: usize) -> bool {
    if n < d + 1 {
        return false;
    }
    let p = a.view((0, n), (n, d + 1)).clone_owned();
    let sv = p.singular_values();
    sv.min() > 1e-10 * sv.max()
}

impl RbfModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let z = self.data.normalize(x);
        let radial: f64 = self
            .centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * cubic(c, &z))
            .sum();
        let linear: f64 = self.tail[0] + self.tail[1..].iter().zip(&z).map(|(c, v)| c * v).sum::<f64>();
        self.data.unstandardize(radial + linear)
    }

    /// True when the interpolation system needed the least-squares fallback.
    pub fn is_regularized(&self) -> bool {
        self.regularized
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use rand::Rng;

    fn random_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn reproduces_training_targets() {
        let xs = random_points(25, 3, 1);
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x[0]).sin() + x[1] * x[2]).collect();
        let model = fit_rbf(&TrainingSet::new(xs.clone(), ys.clone()).unwrap()).unwrap();
        assert!(!model.is_regularized());
        for (x, y) in xs.iter().zip(&ys) {
            assert!((model.predict(x) - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn reproduces_linear_functions() {
        let xs = random_points(15, 4, 2);
        let f = |x: &[f64]| 2.0 - x[0] + 0.5 * x[1] + 3.0 * x[3];
        let ys = xs.iter().map(|x| f(x)).collect();
        let model = fit_rbf(&TrainingSet::new(xs, ys).unwrap()).unwrap();
        for q in random_points(10, 4, 3) {
            assert!((model.predict(&q) - f(&q)).abs() <= 1e-6);
        }
    }

    #[test]
    fn too_few_points_fall_back_to_least_squares() {
        let xs = random_points(3, 5, 4);
        let ys = vec![1.0, 2.0, 0.5];
        let model = fit_rbf(&TrainingSet::new(xs.clone(), ys.clone()).unwrap()).unwrap();
        assert!(model.is_regularized());
        for (x, y) in xs.iter().zip(&ys) {
            let p = model.predict(x);
            assert!(p.is_finite());
            assert!((p - y).abs() < 1e-6, "{p} vs {y}");
        }
    }

    #[test]
    fn predictions_finite_on_box() {
        let xs = random_points(40, 6, 5);
        let ys = xs.iter().map(|x| x.iter().map(|v| v * v).sum()).collect();
        let model = fit_rbf(&TrainingSet::new(xs, ys).unwrap()).unwrap();
        let mut rng = rng_from_seed(6);
        for _ in 0..100 {
            let q: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(model.predict(&q).is_finite());
        }
    }
}
