//! One-vs-rest L2-regularized logistic regression, full-batch gradient
//! descent with backtracking line search.

use crate::error::{Error, Result};
use crate::models::{sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegConfig {
    /// Inverse regularization strength C.
    pub l2_c: f64,
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2_c: 1.0,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    /// One weight vector per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub l2_c: f64,
    /// Iterations used by each binary problem.
    pub iterations: Vec<usize>,
}

impl LogRegModel {
    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Per-class margins `w_k·x + b_k`.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| super::dot(w, x) + b)
            .collect()
    }

    /// One-vs-rest sigmoid outputs normalized to sum to one.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let p: Vec<f64> = self.scores(x).into_iter().map(sigmoid).collect();
        let total: f64 = p.iter().sum();
        p.into_iter().map(|v| v / total).collect()
    }

    /// Class with the highest margin; ties go to the lower id.
    pub fn predict(&self, x: &[f64]) -> usize {
        let scores = self.scores(x);
        let mut best = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = k;
            }
        }
        best
    }
}

/// Fits one binary problem per class in `0..num_classes`.
pub fn train_logreg(features: &[Vec<f64>], labels: &[usize], num_classes: usize, cfg: &LogRegConfig) -> Result<LogRegModel> {
    if features.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features.first().map_or(0, Vec::len);
    if features.iter().any(|x| x.len() != dim) {
        return Err(Error::Dimension("feature rows differ in length".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::Config(format!("label {bad} is outside 0..{num_classes}")));
    }
    if !(cfg.l2_c > 0.0) {
        return Err(Error::Config("l2_c must be positive".into()));
    }
    let mut present = vec![false; num_classes];
    labels.iter().for_each(|&l| present[l] = true);
    let found = present.iter().filter(|&&p| p).count();
    if found < 2 {
        return Err(Error::TooFewClasses { found });
    }

    let mut model = LogRegModel {
        weights: Vec::with_capacity(num_classes),
        biases: Vec::with_capacity(num_classes),
        l2_c: cfg.l2_c,
        iterations: Vec::with_capacity(num_classes),
    };
    for k in 0..num_classes {
        let y: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
        let (w, iters) = fit_binary(features, &y, dim, cfg);
        model.biases.push(w[dim]);
        model.weights.push(w[..dim].to_vec());
        model.iterations.push(iters);
    }
    Ok(model)
}

/// Parameters are `[w; b]`; the bias is not regularized.
fn objective(x: &[Vec<f64>], y: &[f64], theta: &[f64], c: f64) -> f64 {
    let n = x.len() as f64;
    let dim = theta.len() - 1;
    let data: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| softplus(-yi * (super::dot(&theta[..dim], xi) + theta[dim])))
        .sum();
    let reg: f64 = theta[..dim].iter().map(|w| w * w).sum();
    data / n + reg / (2.0 * c * n)
}

fn gradient(x: &[Vec<f64>], y: &[f64], theta: &[f64], c: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let dim = theta.len() - 1;
    let mut g = vec![0.0; dim + 1];
    for (xi, yi) in x.iter().zip(y) {
        let margin = super::dot(&theta[..dim], xi) + theta[dim];
        let coef = -yi * sigmoid(-yi * margin) / n;
        for (gj, xj) in g.iter_mut().zip(xi) {
            *gj += coef * xj;
        }
        g[dim] += coef;
    }
    for (gj, w) in g.iter_mut().zip(&theta[..dim]) {
        *gj += w / (c * n);
    }
    g
}

fn fit_binary(x: &[Vec<f64>], y: &[f64], dim: usize, cfg: &LogRegConfig) -> (Vec<f64>, usize) {
    let mut theta = vec![0.0; dim + 1];
    let mut f = objective(x, y, &theta, cfg.l2_c);
    let mut step = 1.0;
    for iter in 0..cfg.max_iter {
        let g = gradient(x, y, &theta, cfg.l2_c);
        let gg: f64 = g.iter().map(|v| v * v).sum();
        if gg.sqrt() < cfg.tol {
            return (theta, iter);
        }
        // Armijo backtracking, starting from twice the last accepted step.
        step *= 2.0;
        loop {
            let candidate: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t - step * gi).collect();
            let fc = objective(x, y, &candidate, cfg.l2_c);
            if fc <= f - 0.5 * step * gg {
                theta = candidate;
                f = fc;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return (theta, iter);
            }
        }
    }
    (theta, cfg.max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_only_optimum_matches_priors() {
        let x = vec![vec![0.0, 0.0]; 10];
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 2, 2];
        let m = train_logreg(&x, &labels, 3, &LogRegConfig::default()).unwrap();
        let p = m.predict_proba(&[0.0, 0.0]);
        for (pk, prior) in p.iter().zip([0.5, 0.3, 0.2]) {
            assert!((pk - prior).abs() < 1e-5, "{p:?}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            train_logreg(&x, &[1, 1], 2, &LogRegConfig::default()),
            Err(Error::TooFewClasses { found: 1 })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = vec![vec![0.3, -1.2], vec![2.0, 0.5], vec![-0.7, 0.1]];
        let y = [1.0, -1.0, 1.0];
        let theta = [0.4, -0.3, 0.2];
        let g = gradient(&x, &y, &theta, 0.7);
        for j in 0..3 {
            let mut p = theta;
            let mut m = theta;
            p[j] += 1e-6;
            m[j] -= 1e-6;
            let num = (objective(&x, &y, &p, 0.7) - objective(&x, &y, &m, 0.7)) / 2e-6;
            assert!((num - g[j]).abs() < 1e-8, "{j}: {num} vs {}", g[j]);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()]).collect();
        let labels: Vec<usize> = (0..20).map(|i| i % 3).collect();
        let a = train_logreg(&x, &labels, 3, &LogRegConfig::default()).unwrap();
        let b = train_logreg(&x, &labels, 3, &LogRegConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
