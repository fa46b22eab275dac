//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the numerical code under test beyond reading a
//! fitted model's hyperparameters and the public normalization maps.

#![allow(dead_code)]

use llm_saea::sampling::EvaluatedSolution;
use llm_saea::surrogates::{GpModel, TrainingSet};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn random_points<R: Rng>(n: usize, d: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect())
        .collect()
}

pub fn solutions(points: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> Vec<EvaluatedSolution> {
    points
        .iter()
        .enumerate()
        .map(|(index, x)| EvaluatedSolution {
            x: x.clone(),
            value: f(x),
            index,
        })
        .collect()
}

fn se_kernel(a: &[f64], b: &[f64], lengthscales: &[f64], s2: f64) -> f64 {
    let r: f64 = a
        .iter()
        .zip(b)
        .zip(lengthscales)
        .map(|((p, q), l)| ((p - q) / l).powi(2))
        .sum();
    s2 * (-0.5 * r).exp()
}

/// Squared-exponential Gram matrix on normalized inputs.
fn gram(z: &[Vec<f64>], lengthscales: &[f64], s2: f64, nugget: f64) -> DMatrix<f64> {
    let n = z.len();
    DMatrix::from_fn(n, n, |i, j| {
        se_kernel(&z[i], &z[j], lengthscales, s2) + if i == j { nugget } else { 0.0 }
    })
}

/// Posterior mean and standard deviation from an explicit matrix inverse.
pub fn dense_gp_posterior(gp: &GpModel, x: &[f64]) -> (f64, f64) {
    let data = gp.training_set();
    let l = gp.lengthscales();
    let s2 = gp.signal_variance();
    let z = data.normalized_inputs();
    let k_inv = gram(&z, &l, s2, gp.nugget())
        .try_inverse()
        .expect("Gram matrix is invertible");
    let y = DVector::from_vec(data.standardized_targets());
    let zx = data.normalize(x);
    let k = DVector::from_iterator(z.len(), z.iter().map(|zi| se_kernel(zi, &zx, &l, s2)));
    let mean = (k.transpose() * &k_inv * &y)[0];
    let var = (s2 - (k.transpose() * &k_inv * &k)[0]).max(0.0);
    (data.unstandardize(mean), data.target_std() * var.sqrt())
}

/// Log marginal likelihood from a dense log-determinant and solve.
pub fn dense_log_likelihood(data: &TrainingSet, log_params: &[f64], nugget: f64) -> f64 {
    let d = data.dim();
    let l: Vec<f64> = log_params[..d].iter().map(|v| v.exp()).collect();
    let s2 = log_params[d].exp();
    let z = data.normalized_inputs();
    let n = z.len();
    let k = gram(&z, &l, s2, nugget);
    let y = DVector::from_vec(data.standardized_targets());
    let lu = k.clone().lu();
    let log_det = lu.u().diagonal().iter().map(|v| v.abs().ln()).sum::<f64>();
    let alpha = lu.solve(&y).expect("Gram matrix is invertible");
    -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Cubic RBF with linear tail solved through the full saddle-point system.
pub fn dense_rbf_predictor(data: &TrainingSet) -> impl Fn(&[f64]) -> f64 + '_ {
    let z = data.normalized_inputs();
    let n = z.len();
    let d = data.dim();
    let m = n + d + 1;
    let phi = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().powf(1.5);
    let mut a = DMatrix::zeros(m, m);
    for i in 0..n {
        for k in 0..n {
            a[(i, k)] = phi(&z[i], &z[k]);
        }
        let row: Vec<f64> = std::iter::once(1.0).chain(z[i].iter().copied()).collect();
        for (j, v) in row.into_iter().enumerate() {
            a[(i, n + j)] = v;
            a[(n + j, i)] = v;
        }
    }
    let mut b = DVector::zeros(m);
    for (i, y) in data.standardized_targets().into_iter().enumerate() {
        b[i] = y;
    }
    let coef = a.try_inverse().expect("saddle system is nonsingular") * b;
    move |x: &[f64]| {
        let zx = data.normalize(x);
        let mut s = coef[n];
        for j in 0..d {
            s += coef[n + 1 + j] * zx[j];
        }
        for i in 0..n {
            s += coef[i] * phi(&z[i], &zx);
        }
        data.unstandardize(s)
    }
}

/// Quadratic least squares through the normal equations.
pub fn normal_equation_prs(data: &TrainingSet) -> impl Fn(&[f64]) -> f64 + '_ {
    let features = |z: &[f64]| {
        let mut f = vec![1.0];
        f.extend_from_slice(z);
        for j in 0..z.len() {
            for k in j..z.len() {
                f.push(z[j] * z[k]);
            }
        }
        f
    };
    let z = data.normalized_inputs();
    let rows: Vec<Vec<f64>> = z.iter().map(|zi| features(zi)).collect();
    let p = rows[0].len();
    let a = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let y = DVector::from_vec(data.standardized_targets());
    let ata = a.transpose() * &a;
    let aty = a.transpose() * y;
    let coef = ata.cholesky().expect("full-rank design").solve(&aty);
    move |x: &[f64]| {
        let f = features(&data.normalize(x));
        data.unstandardize(f.iter().zip(coef.iter()).map(|(a, c)| a * c).sum())
    }
}

/// Indices and distances of the `k` nearest normalized training inputs,
/// by exhaustive scan with selection of the minimum one at a time.
pub fn brute_neighbors(data: &TrainingSet, x: &[f64], k: usize) -> Vec<(usize, f64)> {
    let z = data.normalized_inputs();
    let zx = data.normalize(x);
    let dist: Vec<f64> = z
        .iter()
        .map(|p| p.iter().zip(&zx).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut taken = vec![false; dist.len()];
    let mut out = Vec::new();
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in 0..dist.len() {
            if !taken[i] && best.is_none_or(|b| dist[i] < dist[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push((b, dist[b]));
    }
    out
}

pub fn brute_knn_predict(data: &TrainingSet, x: &[f64], k: usize) -> f64 {
    let nn = brute_neighbors(data, x, k);
    if nn[0].1 == 0.0 {
        return data.targets()[nn[0].0];
    }
    let num: f64 = nn.iter().map(|(i, d)| data.targets()[*i] / d).sum();
    let den: f64 = nn.iter().map(|(_, d)| 1.0 / d).sum();
    num / den
}

/// Level of each training point: its 0-based rank by target (ties by index)
/// scaled into `levels` equal tiers.
pub fn brute_training_levels(data: &TrainingSet, levels: usize) -> Vec<usize> {
    let y = data.targets();
    let n = y.len();
    (0..n)
        .map(|i| {
            let rank = (0..n).filter(|&j| y[j] < y[i] || (y[j] == y[i] && j < i)).count();
            rank * levels / n
        })
        .collect()
}

pub fn brute_predict_level(data: &TrainingSet, x: &[f64], k: usize, levels: usize) -> usize {
    let tiers = brute_training_levels(data, levels);
    let nn = brute_neighbors(data, x, k);
    if nn[0].1 == 0.0 {
        return tiers[nn[0].0];
    }
    let mut votes = vec![0.0; levels];
    for (i, d) in nn {
        votes[tiers[i]] += 1.0 / d;
    }
    // Highest vote, lowest level on ties.
    (0..levels)
        .rev()
        .max_by(|&a, &b| votes[a].total_cmp(&votes[b]))
        .unwrap()
}

/// First index attaining the minimum.
pub fn first_argmin(values: &[f64]) -> usize {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    values.iter().position(|v| *v == min).unwrap()
}

pub fn first_argmax(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().position(|v| *v == max).unwrap()
}

/// Rank sum of `a` in the pooled sample, from pairwise comparisons.
pub fn brute_rank_sum(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    a.iter()
        .map(|x| {
            let below = pooled.iter().filter(|p| *p < x).count() as f64;
            let tied = pooled.iter().filter(|p| *p == x).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .sum()
}
