//! Gaussian process regression with an anisotropic squared-exponential
//! kernel,
//!
//! ```text
//! k(a, b) = s2 * exp(-0.5 * sum_j (a_j - b_j)^2 / l_j^2)
//! ```
//!
//! fitted on normalized inputs and standardized targets. Hyperparameters
//! (`log l_j`, `log s2`) maximize the log marginal likelihood with a
//! box-constrained quasi-Newton search from several starting points. The
//! nugget added to the diagonal starts small and grows tenfold whenever the
//! Cholesky factorization fails.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub starts: usize,
    pub max_evals_per_start: usize,
    pub lengthscale_bounds: (f64, f64),
    pub signal_variance_bounds: (f64, f64),
    pub nugget: f64,
    pub max_nugget: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            starts: 3,
            max_evals_per_start: 200,
            lengthscale_bounds: (1e-3, 1e3),
            signal_variance_bounds: (1e-2, 1e2),
            nugget: 1e-8,
            max_nugget: 1e-2,
        }
    }
}

/// Precomputed pairwise squared differences for likelihood evaluations.
pub struct LikelihoodSurface {
    n: usize,
    d: usize,
    /// Pairs `a < b` in row-major order.
    pairs: Vec<(usize, usize)>,
    /// `sq[j * pairs + p]`: squared difference along dimension `j` of pair
    /// `p`, laid out per dimension so the sums over pairs vectorize.
    sq: Vec<f64>,
    y: DVector<f64>,
}

/// Likelihood value with its gradient with respect to the log parameters.
pub struct LikelihoodEval {
    pub value: f64,
    /// Empty until [`LikelihoodSurface::add_gradient`] has run.
    pub gradient: Vec<f64>,
    /// Cholesky factor, zero above the diagonal.
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    inv_l2: Vec<f64>,
    s2: f64,
    kval: Vec<f64>,
}

impl LikelihoodSurface {
    pub fn new(data: &TrainingSet) -> Self {
        let x = data.normalized_inputs();
        let n = x.len();
        let d = data.dim();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
        let x = &x;
        let sq: Vec<f64> = (0..d)
            .flat_map(|j| pairs.iter().map(move |&(a, b)| (x[a][j] - x[b][j]).powi(2)))
            .collect();
        Self {
            n,
            d,
            pairs,
            sq,
            y: DVector::from_vec(data.standardized_targets()),
        }
    }

    /// Number of hyperparameters: one lengthscale per dimension plus the
    /// signal variance.
    pub fn n_params(&self) -> usize {
        self.d + 1
    }

    fn sq_dim(&self, j: usize) -> &[f64] {
        let m = self.pairs.len();
        &self.sq[j * m..(j + 1) * m]
    }

    /// Log marginal likelihood and its gradient at `log_params`, or `None`
    /// when the kernel matrix is not positive definite.
    pub fn evaluate(&self, log_params: &[f64], nugget: f64) -> Option<LikelihoodEval> {
        let mut eval = self.evaluate_value(log_params, nugget)?;
        self.add_gradient(&mut eval);
        Some(eval)
    }

    /// Likelihood value only; the gradient is left empty.
    pub fn evaluate_value(&self, log_params: &[f64], nugget: f64) -> Option<LikelihoodEval> {
        let (n, d) = (self.n, self.d);
        let inv_l2: Vec<f64> = log_params[..d].iter().map(|l| (-2.0 * l).exp()).collect();
        let s2 = log_params[d].exp();

        // Off-diagonal kernel values per pair, without the nugget.
        let mut kval = vec![0.0; self.pairs.len()];
        for (j, w) in inv_l2.iter().enumerate() {
            for (r, s) in kval.iter_mut().zip(self.sq_dim(j)) {
                *r += w * s;
            }
        }
        for r in &mut kval {
            *r = s2 * (-0.5 * *r).exp();
        }
        // Lower triangle only, column-major.
        let mut l = vec![0.0; n * n];
        for a in 0..n {
            l[a * n + a] = s2 + nugget;
        }
        for (&(a, b), &v) in self.pairs.iter().zip(&kval) {
            l[a * n + b] = v;
        }
        if !cholesky_in_place(&mut l, n) {
            return None;
        }
        let alpha = DVector::from_vec(cholesky_solve(&l, n, self.y.as_slice()));
        let log_det: f64 = (0..n).map(|i| l[i * n + i].ln()).sum();
        let chol = DMatrix::from_vec(n, n, l);
        let value = -0.5 * self.y.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        if !value.is_finite() {
            return None;
        }
        Some(LikelihoodEval {
            value,
            gradient: Vec::new(),
            chol,
            alpha,
            inv_l2,
            s2,
            kval,
        })
    }

    pub fn add_gradient(&self, eval: &mut LikelihoodEval) {
        let (n, d) = (self.n, self.d);
        let LikelihoodEval {
            chol,
            alpha,
            inv_l2,
            s2,
            kval,
            ..
        } = &*eval;
        let s2 = *s2;

        // W = alpha alpha^T - K^-1; the gradient is 0.5 tr(W dK).
        let k_inv = inverse_upper(chol, n);
        let mut g_s2 = 0.0;
        for a in 0..n {
            g_s2 += 0.5 * (alpha[a] * alpha[a] - k_inv[a * n + a]) * s2;
        }
        let w: Vec<f64> = self
            .pairs
            .iter()
            .zip(kval.iter())
            .map(|(&(a, b), &kv)| (alpha[a] * alpha[b] - k_inv[b * n + a]) * kv)
            .collect();
        g_s2 += w.iter().sum::<f64>();
        let mut gradient: Vec<f64> = (0..d).map(|j| inv_l2[j] * dot(&w, self.sq_dim(j))).collect();
        gradient.push(g_s2);
        eval.gradient = gradient;
    }
}

/// Dot product with independent partial sums, which lets the compiler
/// pipeline the multiply-adds.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(p, q)| p * q).sum();
    for (p, q) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += p[k] * q[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Overwrites the lower triangle of the column-major `a` with its Cholesky
/// factor. Returns false when `a` is not numerically positive definite.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let d = a[j * n + j];
        if !d.is_finite() || d <= 0.0 {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for v in &mut a[j * n + j + 1..(j + 1) * n] {
            *v /= d;
        }
        // Right-looking update of the trailing columns.
        let (head, tail) = a.split_at_mut((j + 1) * n);
        let col = &head[j * n..];
        for k in (j + 1)..n {
            let v = col[k];
            let target = &mut tail[(k - j - 1) * n + k..(k - j) * n];
            for (t, c) in target.iter_mut().zip(&col[k..]) {
                *t -= v * c;
            }
        }
    }
    true
}

/// Solves `L L^T x = y` for the factor stored in `l`.
fn cholesky_solve(l: &[f64], n: usize, y: &[f64]) -> Vec<f64> {
    let mut x = y.to_vec();
    for i in 0..n {
        let v = x[i] / l[i * n + i];
        x[i] = v;
        for (t, c) in x[i + 1..].iter_mut().zip(&l[i * n + i + 1..(i + 1) * n]) {
            *t -= v * c;
        }
    }
    for i in (0..n).rev() {
        let s = dot(&l[i * n + i + 1..(i + 1) * n], &x[i + 1..]);
        x[i] = (x[i] - s) / l[i * n + i];
    }
    x
}

/// `K^-1 = L^-T L^-1` from the Cholesky factor whose lower part is stored in
/// `l`. Only the upper triangle of the column-major result is filled.
fn inverse_upper(l: &DMatrix<f64>, n: usize) -> Vec<f64> {
    let l = l.as_slice();
    // Rows of M = L^-1 (row-major); row k holds entries 0..=k. Built by
    // column-oriented forward substitution on each unit vector.
    let mut m = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for c in 0..n {
        col.fill(0.0);
        col[c] = 1.0;
        for k in c..n {
            let v = col[k] / l[k * n + k];
            col[k] = v;
            m[k * n + c] = v;
            for (t, lk) in col[k + 1..].iter_mut().zip(&l[k * n + k + 1..(k + 1) * n]) {
                *t -= v * lk;
            }
        }
    }
    // M^T M as a dense product; `m` read column-major is M^T.
    let mt = DMatrix::from_vec(n, n, m);
    let inv = &mt * mt.transpose();
    inv.data.into()
}

/// Log marginal likelihood and gradient for `data` at the given log
/// hyperparameters `[log l_1, .., log l_D, log s2]`.
pub fn log_marginal_likelihood(data: &TrainingSet, log_params: &[f64], nugget: f64) -> Option<(f64, Vec<f64>)> {
    let surface = LikelihoodSurface::new(data);
    assert_eq!(log_params.len(), surface.n_params(), "wrong hyperparameter count");
    surface.evaluate(log_params, nugget).map(|e| (e.value, e.gradient))
}

/// A fitted Gaussian process.
#[derive(Debug, Clone)]
pub struct GpModel {
    data: TrainingSet,
    x_norm: Vec<Vec<f64>>,
    log_params: Vec<f64>,
    inv_l2: Vec<f64>,
    signal_variance: f64,
    nugget: f64,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
    log_likelihood: f64,
    start_likelihoods: Vec<f64>,
}

impl GpModel {
    /// Posterior mean and standard deviation in original target units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let z = self.data.normalize(x);
        let k = DVector::from_iterator(
            self.x_norm.len(),
            self.x_norm.iter().map(|xi| {
                let r: f64 = xi
                    .iter()
                    .zip(&z)
                    .zip(&self.inv_l2)
                    .map(|((a, b), w)| (a - b) * (a - b) * w)
                    .sum();
                self.signal_variance * (-0.5 * r).exp()
            }),
        );
        let mean = k.dot(&self.alpha);
        let v = self
            .chol_l
            .solve_lower_triangular(&k)
            .unwrap_or_else(|| DVector::zeros(k.len()));
        let var = (self.signal_variance - v.dot(&v)).max(0.0);
        (self.data.unstandardize(mean), self.data.target_std() * var.sqrt())
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        self.predict(x).0
    }

    /// Lengthscales in normalized input units.
    pub fn lengthscales(&self) -> Vec<f64> {
        self.log_params[..self.inv_l2.len()].iter().map(|l| l.exp()).collect()
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn log_params(&self) -> &[f64] {
        &self.log_params
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Likelihood at each multi-start initial point that was feasible.
    pub fn start_likelihoods(&self) -> &[f64] {
        &self.start_likelihoods
    }

    pub fn training_set(&self) -> &TrainingSet {
        &self.data
    }
}

/// Fits a GP to `data`; the generator only drives the random restarts.
pub fn fit_gp<R: Rng + ?Sized>(data: &TrainingSet, config: &GpConfig, rng: &mut R) -> Result<GpModel> {
    let surface = LikelihoodSurface::new(data);
    let d = data.dim();
    let (l_lo, l_hi) = (config.lengthscale_bounds.0.ln(), config.lengthscale_bounds.1.ln());
    let (s_lo, s_hi) = (
        config.signal_variance_bounds.0.ln(),
        config.signal_variance_bounds.1.ln(),
    );
    let mut lower = vec![l_lo; d];
    lower.push(s_lo);
    let mut upper = vec![l_hi; d];
    upper.push(s_hi);

    // Unit-variance data in the unit box: start where typical pairwise
    // distances are about one lengthscale.
    let base = (0.4 * (d as f64).sqrt()).ln();
    let starts: Vec<Vec<f64>> = (0..config.starts.max(1))
        .map(|s| {
            let mut p: Vec<f64> = (0..d)
                .map(|_| {
                    if s == 0 {
                        base
                    } else {
                        base + rng.random_range(-1.5..1.5)
                    }
                })
                .collect();
            p.push(if s == 0 { 0.0 } else { rng.random_range(-1.0..1.0) });
            clamp(&mut p, &lower, &upper);
            p
        })
        .collect();

    let mut nugget = config.nugget;
    loop {
        let mut best: Option<(Vec<f64>, LikelihoodEval)> = None;
        let mut start_likelihoods = Vec::new();
        for x0 in &starts {
            let Some(init) = surface.evaluate(x0, nugget) else {
                continue;
            };
            start_likelihoods.push(init.value);
            let (x, eval) = maximize_in_box(
                |p| surface.evaluate_value(p, nugget),
                |e| surface.add_gradient(e),
                x0.clone(),
                init,
                &lower,
                &upper,
                config.max_evals_per_start,
            );
            if best.as_ref().is_none_or(|(_, b)| eval.value > b.value) {
                best = Some((x, eval));
            }
        }
        if let Some((log_params, eval)) = best {
            let inv_l2 = log_params[..d].iter().map(|l| (-2.0 * l).exp()).collect();
            return Ok(GpModel {
                x_norm: data.normalized_inputs(),
                data: data.clone(),
                signal_variance: log_params[d].exp(),
                log_params,
                inv_l2,
                nugget,
                chol_l: eval.chol,
                alpha: eval.alpha,
                log_likelihood: eval.value,
                start_likelihoods,
            });
        }
        if nugget >= config.max_nugget {
            return Err(Error::Training(format!(
                "kernel matrix of {} points is not positive definite even with nugget {nugget:e}",
                data.len()
            )));
        }
        log::debug!("GP Cholesky failed with nugget {nugget:e}; escalating");
        nugget = (nugget * 10.0).min(config.max_nugget);
    }
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Projected BFGS ascent. Only improving steps are accepted, so the result
/// is never worse than the start.
fn maximize_in_box<F, G>(
    mut f: F,
    mut grad: G,
    mut x: Vec<f64>,
    mut fx: LikelihoodEval,
    lower: &[f64],
    upper: &[f64],
    max_evals: usize,
) -> (Vec<f64>, LikelihoodEval)
where
    F: FnMut(&[f64]) -> Option<LikelihoodEval>,
    G: FnMut(&mut LikelihoodEval),
{
    const ARMIJO: f64 = 1e-4;
    const FTOL: f64 = 1e-7;
    const GTOL: f64 = 1e-5;
    const MAX_STEP: f64 = 2.0;

    let n = x.len();
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut evals = 1;

    // Work with the negative log likelihood.
    let free = |x: &[f64], g: &[f64], j: usize| !((x[j] <= lower[j] && g[j] > 0.0) || (x[j] >= upper[j] && g[j] < 0.0));

    while evals < max_evals {
        let g: Vec<f64> = fx.gradient.iter().map(|v| -v).collect();
        let pg_norm = (0..n)
            .filter(|&j| free(&x, &g, j))
            .map(|j| g[j].abs())
            .fold(0.0, f64::max);
        if pg_norm < GTOL {
            break;
        }

        let gv = DVector::from_column_slice(&g);
        let mut dir: Vec<f64> = (-&h * &gv).iter().copied().collect();
        for j in 0..n {
            if !free(&x, &g, j) || (x[j] <= lower[j] && dir[j] < 0.0) || (x[j] >= upper[j] && dir[j] > 0.0) {
                dir[j] = 0.0;
            }
        }
        let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            h.fill_with_identity();
            fresh = true;
            dir = (0..n).map(|j| if free(&x, &g, j) { -g[j] } else { 0.0 }).collect();
            slope = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            if slope >= 0.0 {
                break;
            }
        }
        let longest = dir.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut step = if longest > MAX_STEP { MAX_STEP / longest } else { 1.0 };

        let mut accepted = None;
        while evals < max_evals {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            clamp(&mut trial, lower, upper);
            let moved: f64 = trial.iter().zip(&x).zip(&g).map(|((t, a), gj)| (t - a) * gj).sum();
            if trial == x {
                break;
            }
            evals += 1;
            let mut shrink = 0.5;
            if let Some(mut ft) = f(&trial) {
                if -ft.value <= -fx.value + ARMIJO * moved.min(0.0) && ft.value > fx.value {
                    grad(&mut ft);
                    accepted = Some((trial, ft));
                    break;
                }
                // Minimizer of the quadratic through the two values and the
                // initial slope, kept within [0.1, 0.5] of the current step.
                let rise = -ft.value + fx.value - moved;
                if moved < 0.0 && rise > 0.0 {
                    shrink = (-moved / (2.0 * rise)).clamp(0.1, 0.5);
                }
            }
            step *= shrink;
            if step < 1e-10 {
                break;
            }
        }

        let Some((x_new, f_new)) = accepted else {
            if fresh {
                break;
            }
            h.fill_with_identity();
            fresh = true;
            continue;
        };

        let improvement = f_new.value - fx.value;
        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, f_new.gradient.iter().zip(&fx.gradient).map(|(a, b)| b - a));
        let sy = s.dot(&y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh = false;
        }
        x = x_new;
        fx = f_new;
        if improvement < FTOL * (1.0 + fx.value.abs()) {
            break;
        }
    }
    (x, fx)
}
