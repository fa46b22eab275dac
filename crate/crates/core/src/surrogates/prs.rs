//! Polynomial response surface: least squares over the full monomial basis
//! of degree 1 or 2 in the normalized inputs.

use nalgebra::{DMatrix, DVector};

use super::TrainingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PrsModel {
    data: TrainingSet,
    degree: usize,
    coefficients: Vec<f64>,
    downgraded: bool,
    rank_deficient: bool,
}

/// Number of monomials of total degree `<= degree` in `d` variables, for
/// degree 1 or 2.
pub fn basis_size(d: usize, degree: usize) -> usize {
    match degree {
        1 => d + 1,
        _ => (d + 1) * (d + 2) / 2,
    }
}

/// Basis row `[1, z_1..z_D, z_j z_k (j <= k)]`, truncated after the linear
/// terms for degree 1.
pub fn basis(z: &[f64], degree: usize) -> Vec<f64> {
    let d = z.len();
    let mut row = Vec::with_capacity(basis_size(d, degree));
    row.push(1.0);
    row.extend_from_slice(z);
    if degree >= 2 {
        for j in 0..d {
            for k in j..d {
                row.push(z[j] * z[k]);
            }
        }
    }
    row
}

/// Fits a degree-`degree` response surface. Degree 2 drops to degree 1 when
/// there are fewer points than quadratic basis terms.
pub fn fit_prs(data: &TrainingSet, degree: usize) -> Result<PrsModel> {
    if !(1..=2).contains(&degree) {
        return Err(Error::Config(format!("PRS degree must be 1 or 2, got {degree}")));
    }
    let d = data.dim();
    let n = data.len();
    let mut used = degree;
    if used == 2 && n < basis_size(d, 2) {
        used = 1;
    }
    let p = basis_size(d, used);

    let z = data.normalized_inputs();
    let a = DMatrix::from_fn(n, p, |i, j| basis(&z[i], used)[j]);
    let b = DVector::from_vec(data.standardized_targets());
    let svd = a.svd(true, true);
    let eps = 1e-10 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let rank = svd.rank(eps);
    let coef = svd
        .solve(&b, eps)
        .map_err(|e| Error::Training(format!("PRS least squares: {e}")))?;

    Ok(PrsModel {
        data: data.clone(),
        degree: used,
        coefficients: coef.iter().copied().collect(),
        downgraded: used != degree,
        rank_deficient: rank < p,
    })
}

impl PrsModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let z = self.data.normalize(x);
        let s: f64 = basis(&z, self.degree)
            .iter()
            .zip(&self.coefficients)
            .map(|(a, c)| a * c)
            .sum();
        self.data.unstandardize(s)
    }

    /// Degree actually fitted.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn was_downgraded(&self) -> bool {
        self.downgraded
    }

    /// True when the design matrix had fewer independent columns than basis
    /// terms; the minimum-norm solution was used.
    pub fn is_rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use rand::Rng;

    #[test]
    fn recovers_exact_quadratic() {
        let mut rng = rng_from_seed(1);
        let f = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1] + 3.0 * x[2] * x[2];
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ys = xs.iter().map(|x| f(x)).collect();
        let model = fit_prs(&TrainingSet::new(xs, ys).unwrap(), 2).unwrap();
        assert_eq!(model.degree(), 2);
        for _ in 0..20 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert!((model.predict(&q) - f(&q)).abs() <= 1e-8);
        }
    }

    #[test]
    fn line_through_two_points() {
        let model = fit_prs(
            &TrainingSet::new(vec![vec![1.0], vec![3.0]], vec![2.0, 6.0]).unwrap(),
            1,
        )
        .unwrap();
        assert!((model.predict(&[2.0]) - 4.0).abs() < 1e-12);
        assert!((model.predict(&[-1.0]) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn downgrades_with_too_few_points() {
        let mut rng = rng_from_seed(2);
        let xs: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let ys = xs.iter().map(|x| x[0] + x[3]).collect();
        let model = fit_prs(&TrainingSet::new(xs, ys).unwrap(), 2).unwrap();
        assert_eq!(model.degree(), 1);
        assert!(model.was_downgraded());
        assert!((model.predict(&[0.5, 0.1, 0.2, 0.25]) - 0.75).abs() < 1e-9);
    }

    #[test]
    fn constant_targets_give_constant_model() {
        let model = fit_prs(
            &TrainingSet::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![7.0; 3]).unwrap(),
            2,
        )
        .unwrap();
        assert_eq!(model.predict(&[10.0]), 7.0);
    }

    #[test]
    fn rejects_bad_degree() {
        let ts = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        assert!(fit_prs(&ts, 3).is_err());
        assert!(fit_prs(&ts, 0).is_err());
    }
}
