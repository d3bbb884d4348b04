//! Classical learners on top of a precomputed kernel: the regularized
//! kernel-ridge classifier `sign(k(x)^T (K + lambda I)^{-1} y)` and a
//! soft-margin SVM trained by SMO.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::encode::EncoderConfig;
use crate::error::{Error, Result};
use crate::qkernel::{repair, GramMatrix, KernelMode};

/// Which kernel produced a model's Gram matrix; needed to score new points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelDescriptor {
    Rbf { gamma: f64 },
    Quantum { encoder: EncoderConfig, mode: KernelMode },
    Precomputed,
}

/// `sign` with the tie broken toward the attack class.
pub fn sign_label(score: f64) -> i8 {
    if score >= 0.0 {
        1
    } else {
        -1
    }
}

fn check_labels(y: &[i8], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if let Some(&bad) = y.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::InvalidLabel(bad as f64));
    }
    Ok(())
}

pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidHyper(format!("rbf gamma must be > 0, got {gamma}")));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * d2).exp())
}

pub fn rbf_gram(xs: &[Vec<f64>], gamma: f64) -> Result<GramMatrix> {
    let rows = rbf_cross(xs, xs, gamma)?;
    GramMatrix::from_rows(&rows)
}

pub fn rbf_cross(rows: &[Vec<f64>], cols: &[Vec<f64>], gamma: f64) -> Result<Vec<Vec<f64>>> {
    rows.iter().map(|r| cols.iter().map(|c| rbf_kernel(r, c, gamma)).collect()).collect()
}

/// `1 / (d * var(X))` over all feature values.
pub fn default_gamma(xs: &[Vec<f64>]) -> f64 {
    let d = xs.first().map_or(1, Vec::len).max(1);
    let vals: Vec<f64> = xs.iter().flatten().copied().collect();
    if vals.is_empty() {
        return 1.0;
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelRidgeModel {
    pub alpha: Vec<f64>,
    pub lambda: f64,
    /// Extra diagonal added when `K + lambda I` was not numerically PD.
    pub repair_jitter: f64,
    pub train_refs: Vec<Vec<f64>>,
    pub kernel: KernelDescriptor,
}

impl KernelRidgeModel {
    pub fn with_refs(mut self, refs: Vec<Vec<f64>>, kernel: KernelDescriptor) -> Self {
        self.train_refs = refs;
        self.kernel = kernel;
        self
    }

    pub fn predict(&self, k_row: &[f64]) -> Result<(f64, i8)> {
        ridge_predict(self, k_row)
    }
}

/// Solves `(K + lambda I) alpha = y` by square-root-free Cholesky. If the system is not
/// numerically positive definite it is repaired with the minimal diagonal
/// jitter; column-pivoted elimination is the last resort.
pub fn ridge_fit(k: &GramMatrix, y: &[i8], lambda: f64) -> Result<KernelRidgeModel> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidHyper(format!("ridge lambda must be > 0, got {lambda}")));
    }
    let n = k.n();
    check_labels(y, n)?;
    let rhs: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let system = repair(k, lambda);
    let mut repair_jitter = 0.0;
    let alpha = match ldlt_solve(&system, &rhs) {
        Some(a) => a,
        None => {
            let fixed = repair(&system, -1.0);
            repair_jitter = fixed.jitter - system.jitter;
            match ldlt_solve(&fixed, &rhs) {
                Some(a) => a,
                None => fixed
                    .to_dmatrix()
                    .full_piv_lu()
                    .solve(&DVector::from_column_slice(&rhs))
                    .map(|v| v.iter().copied().collect())
                    .ok_or(Error::Singular { min_eigenvalue: system.min_eigenvalue() })?,
            }
        }
    };
    Ok(KernelRidgeModel { alpha, lambda, repair_jitter, train_refs: Vec::new(), kernel: KernelDescriptor::Precomputed })
}

/// Square-root-free Cholesky `A = L D L^T` followed by the two triangular
/// solves. `None` when a pivot is not strictly positive.
fn ldlt_solve(a: &GramMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.n();
    let mut l = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut dj = a.get(j, j);
        for k in 0..j {
            dj -= l[j * n + k] * l[j * n + k] * d[k];
        }
        if !(dj > 0.0) || !dj.is_finite() {
            return None;
        }
        d[j] = dj;
        l[j * n + j] = 1.0;
        for i in j + 1..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k] * d[k];
            }
            l[i * n + j] = v / dj;
        }
    }
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[i * n + k] * z[k];
        }
    }
    for i in 0..n {
        z[i] /= d[i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[k * n + i] * z[k];
        }
    }
    Some(z)
}

pub fn ridge_predict(model: &KernelRidgeModel, k_row: &[f64]) -> Result<(f64, i8)> {
    if k_row.len() != model.alpha.len() {
        return Err(Error::DimensionMismatch { expected: model.alpha.len(), got: k_row.len() });
    }
    let score: f64 = k_row.iter().zip(&model.alpha).map(|(k, a)| k * a).sum();
    Ok((score, sign_label(score)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    pub c: f64,
    pub tol: f64,
    /// Iteration budget in units of `n` pair updates.
    pub max_passes: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig { c: 1.0, tol: 1e-3, max_passes: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// `alpha_i * y_i` for each support vector.
    pub dual_coefs: Vec<f64>,
    /// Positions of the support vectors in the training set.
    pub support_indices: Vec<usize>,
    pub support_refs: Vec<Vec<f64>>,
    pub bias: f64,
    pub c_param: f64,
    pub tol: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective `sum(alpha) - 1/2 alpha^T Q alpha`, logged once per pass.
    pub objective_trace: Vec<f64>,
    pub kernel: KernelDescriptor,
}

impl SvmModel {
    pub fn with_refs(mut self, train: &[Vec<f64>], kernel: KernelDescriptor) -> Self {
        self.support_refs = self.support_indices.iter().map(|&i| train[i].clone()).collect();
        self.kernel = kernel;
        self
    }

    pub fn predict(&self, k_row: &[f64]) -> Result<(f64, i8)> {
        svm_predict(self, k_row)
    }

    /// Scores from a kernel row against the whole training set.
    pub fn predict_full(&self, k_row_train: &[f64]) -> Result<(f64, i8)> {
        let row: Vec<f64> = self
            .support_indices
            .iter()
            .map(|&i| k_row_train.get(i).copied().ok_or(Error::DimensionMismatch { expected: i + 1, got: k_row_train.len() }))
            .collect::<Result<_>>()?;
        svm_predict(self, &row)
    }
}

const TAU: f64 = 1e-12;

/// Dual soft-margin SVM by SMO with second-order working-set selection.
///
/// Stops when the maximal KKT violation `m(alpha) - M(alpha)` drops below
/// `tol`. Hitting the iteration budget returns the current model with
/// `converged = false`.
pub fn smo_fit(k: &GramMatrix, y: &[i8], cfg: &SmoConfig) -> Result<SvmModel> {
    let n = k.n();
    check_labels(y, n)?;
    if cfg.c <= 0.0 || !cfg.c.is_finite() {
        return Err(Error::InvalidHyper(format!("svm C must be > 0, got {}", cfg.c)));
    }
    if cfg.tol <= 0.0 {
        return Err(Error::InvalidHyper(format!("svm tol must be > 0, got {}", cfg.tol)));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::DegenerateLabels);
    }
    let c = cfg.c;
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let mut alpha = vec![0.0; n];
    // gradient of 1/2 a^T Q a - e^T a
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| yf[i] * yf[j] * k.get(i, j);
    let objective = |alpha: &[f64], grad: &[f64]| -> f64 { -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>() };
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt < 0.0 && a < c) || (yt > 0.0 && a > 0.0);

    let max_iter = cfg.max_passes.saturating_mul(n.max(1));
    let mut trace = vec![objective(&alpha, &grad)];
    let mut converged = false;
    let mut iter = 0;
    while iter < max_iter {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(alpha[t], yf[t]) && -yf[t] * grad[t] > gmax {
                gmax = -yf[t] * grad[t];
                i = t;
            }
        }
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], yf[t]) {
                continue;
            }
            let v = -yf[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let b = gmax - v;
                let mut a = k.get(i, i) + k.get(t, t) - 2.0 * k.get(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let score = -(b * b) / a;
                if score < best {
                    best = score;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < cfg.tol {
            converged = true;
            break;
        }

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        if yf[i] != yf[j] {
            let quad = {
                let v = k.get(i, i) + k.get(j, j) + 2.0 * q(i, j);
                if v <= 0.0 {
                    TAU
                } else {
                    v
                }
            };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = {
                let v = k.get(i, i) + k.get(j, j) - 2.0 * q(i, j);
                if v <= 0.0 {
                    TAU
                } else {
                    v
                }
            };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
        iter += 1;
        if iter % n.max(1) == 0 {
            trace.push(objective(&alpha, &grad));
        }
    }
    trace.push(objective(&alpha, &grad));

    // rho from free vectors, midpoint of the feasible interval otherwise
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut nfree, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = yf[t] * grad[t];
        if alpha[t] >= c {
            if yf[t] < 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else if alpha[t] <= 0.0 {
            if yf[t] > 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else {
            nfree += 1;
            sum_free += yg;
        }
    }
    let rho = if nfree > 0 { sum_free / nfree as f64 } else { (ub + lb) / 2.0 };

    let support_indices: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SvmModel {
        dual_coefs: support_indices.iter().map(|&t| alpha[t] * yf[t]).collect(),
        support_indices,
        support_refs: Vec::new(),
        bias: -rho,
        c_param: c,
        tol: cfg.tol,
        converged,
        iterations: iter,
        objective_trace: trace,
        kernel: KernelDescriptor::Precomputed,
    })
}

pub fn svm_predict(model: &SvmModel, k_row: &[f64]) -> Result<(f64, i8)> {
    if k_row.len() != model.dual_coefs.len() {
        return Err(Error::DimensionMismatch { expected: model.dual_coefs.len(), got: k_row.len() });
    }
    let score = k_row.iter().zip(&model.dual_coefs).map(|(k, a)| k * a).sum::<f64>() + model.bias;
    Ok((score, sign_label(score)))
}

/// Dense `(K + lambda I)^{-1}` via nalgebra's general inverse; used to
/// cross-check the Cholesky route.
pub fn dense_inverse(k: &GramMatrix, lambda: f64) -> Option<DMatrix<f64>> {
    (k.to_dmatrix() + DMatrix::identity(k.n(), k.n()) * lambda).try_inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn id2() -> GramMatrix {
        GramMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn rbf_values() {
        let x = [0.3, -1.0];
        assert_eq!(rbf_kernel(&x, &x, 0.5).unwrap(), 1.0);
        assert_abs_diff_eq!(rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!((-1.0f64).exp(), 0.3679, epsilon = 1e-4);
        assert_eq!(rbf_kernel(&x, &[1.0, 2.0], 0.3).unwrap(), rbf_kernel(&[1.0, 2.0], &x, 0.3).unwrap());
        assert!(matches!(rbf_kernel(&x, &x, 0.0), Err(Error::InvalidHyper(_))));
        assert!(rbf_kernel(&x, &[1.0], 1.0).is_err());
    }

    #[test]
    fn ridge_two_by_two() {
        let m = ridge_fit(&id2(), &[1, -1], 1.0).unwrap();
        assert_eq!(m.alpha, vec![0.5, -0.5]);
        assert_eq!(ridge_predict(&m, &[1.0, 0.0]).unwrap(), (0.5, 1));
        assert_eq!(ridge_predict(&m, &[0.0, 0.0]).unwrap(), (0.0, 1));
        assert!(ridge_predict(&m, &[1.0]).is_err());
    }

    #[test]
    fn ridge_large_lambda_shrinks() {
        let m = ridge_fit(&id2(), &[1, -1], 1e6).unwrap();
        assert_abs_diff_eq!(m.alpha[0], 1e-6, epsilon = 1e-11);
        assert_abs_diff_eq!(m.alpha[1], -1e-6, epsilon = 1e-11);
    }

    #[test]
    fn ridge_rejects_bad_input() {
        assert!(matches!(ridge_fit(&id2(), &[1, -1], 0.0), Err(Error::InvalidHyper(_))));
        assert!(matches!(ridge_fit(&id2(), &[1], 1.0), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(ridge_fit(&id2(), &[1, 0], 1.0), Err(Error::InvalidLabel(_))));
    }

    #[test]
    fn ridge_repairs_indefinite_system() {
        let k = GramMatrix::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let m = ridge_fit(&k, &[1, -1], 0.5).unwrap();
        assert!(m.repair_jitter > 0.0);
        assert!(m.alpha.iter().all(|a| a.is_finite()));
    }

    #[test]
    fn ridge_label_negation() {
        let k = rbf_gram(&[vec![0.0], vec![1.0], vec![2.5]], 0.7).unwrap();
        let a = ridge_fit(&k, &[1, -1, 1], 0.1).unwrap();
        let b = ridge_fit(&k, &[-1, 1, -1], 0.1).unwrap();
        let row = [0.2, 0.9, 0.4];
        assert_abs_diff_eq!(a.predict(&row).unwrap().0, -b.predict(&row).unwrap().0, epsilon = 1e-14);
    }

    fn four_points() -> (Vec<Vec<f64>>, Vec<i8>) {
        (vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![3.0, 3.0], vec![3.0, 4.0]], vec![-1, -1, 1, 1])
    }

    #[test]
    fn smo_separable_four_points() {
        let (xs, y) = four_points();
        let k = rbf_gram(&xs, 1.0).unwrap();
        let m = smo_fit(&k, &y, &SmoConfig { c: 10.0, tol: 1e-3, max_passes: 200 }).unwrap();
        assert!(m.converged);
        for (i, x) in xs.iter().enumerate() {
            let row: Vec<f64> = xs.iter().map(|z| rbf_kernel(x, z, 1.0).unwrap()).collect();
            assert_eq!(m.predict_full(&row).unwrap().1, y[i]);
        }
        for (&i, &a) in m.support_indices.iter().zip(&m.dual_coefs) {
            assert!(a.abs() <= 10.0 + 1e-12);
            let row: Vec<f64> = xs.iter().map(|z| rbf_kernel(&xs[i], z, 1.0).unwrap()).collect();
            let score = m.predict_full(&row).unwrap().0;
            assert!(y[i] as f64 * score >= 1.0 - 1e-3 - 1e-9);
        }
    }

    #[test]
    fn smo_conflicting_duplicates_hit_box() {
        let xs = vec![vec![0.0], vec![0.0], vec![2.0], vec![-2.0]];
        let y = [1, -1, 1, -1];
        let k = rbf_gram(&xs, 1.0).unwrap();
        let c = 0.1;
        let m = smo_fit(&k, &y, &SmoConfig { c, tol: 1e-4, max_passes: 100 }).unwrap();
        assert!(m.dual_coefs.iter().any(|a| (a.abs() - c).abs() < 1e-12));
    }

    #[test]
    fn smo_rejects_single_class() {
        assert!(matches!(smo_fit(&id2(), &[1, 1], &SmoConfig::default()), Err(Error::DegenerateLabels)));
    }

    #[test]
    fn smo_symmetric_pair_has_zero_bias() {
        let k = rbf_gram(&[vec![-1.0, 0.5], vec![1.0, -0.5]], 0.4).unwrap();
        let m = smo_fit(&k, &[-1, 1], &SmoConfig::default()).unwrap();
        assert_abs_diff_eq!(m.bias, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn svm_tie_breaks_positive() {
        let m = SvmModel {
            dual_coefs: vec![1.0, -1.0],
            support_indices: vec![0, 1],
            support_refs: vec![],
            bias: 0.0,
            c_param: 1.0,
            tol: 1e-3,
            converged: true,
            iterations: 0,
            objective_trace: vec![],
            kernel: KernelDescriptor::Precomputed,
        };
        assert_eq!(svm_predict(&m, &[0.5, 0.5]).unwrap(), (0.0, 1));
        assert!(svm_predict(&m, &[0.5]).is_err());
    }

    #[test]
    fn smo_objective_is_monotone() {
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).sin() * 2.0, (i as f64 * 0.91).cos()]).collect();
        let y: Vec<i8> = xs.iter().map(|x| if x[0] + 0.3 * x[1] > 0.1 { 1 } else { -1 }).collect();
        let k = rbf_gram(&xs, 0.5).unwrap();
        let m = smo_fit(&k, &y, &SmoConfig { c: 1.0, tol: 1e-5, max_passes: 50 }).unwrap();
        for w in m.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{:?}", m.objective_trace);
        }
    }

    #[test]
    fn model_json_round_trip() {
        let (xs, y) = four_points();
        let k = rbf_gram(&xs, 1.0).unwrap();
        let m = smo_fit(&k, &y, &SmoConfig::default()).unwrap().with_refs(&xs, KernelDescriptor::Rbf { gamma: 1.0 });
        let back: SvmModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.support_refs.len(), back.dual_coefs.len());
    }
}
