//! Regularized linear-model training.
//!
//! Minimizes `(1/n) sum loss(y_i, w.x_i + b) + lambda * P(w)` with the
//! intercept unpenalized. The logistic path is proximal gradient descent with
//! backtracking (soft-thresholding handles L1, the L2 term folds into the
//! smooth gradient); the hinge path is proximal subgradient descent with a
//! decaying step, keeping the best iterate. The contract is objective
//! optimality, not a particular iterate path.

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

use super::{LinearModel, Loss, Penalty, TrainOptions};

/// Full regularized objective at (weights, intercept).
pub fn objective(
    matrix: &FeatureMatrix,
    loss: Loss,
    penalty: Penalty,
    lambda: f64,
    weights: &[f64],
    intercept: f64,
) -> f64 {
    let n = matrix.n_rows() as f64;
    let data: f64 = matrix
        .rows
        .iter()
        .zip(&matrix.labels)
        .map(|(row, &label)| {
            let y = if label == 1 { 1.0 } else { -1.0 };
            let z = row.dot_dense(weights) + intercept;
            match loss {
                Loss::Logistic => softplus(-y * z),
                Loss::Hinge => (1.0 - y * z).max(0.0),
            }
        })
        .sum();
    data / n + lambda * penalty_value(penalty, weights)
}

fn penalty_value(penalty: Penalty, weights: &[f64]) -> f64 {
    match penalty {
        Penalty::L1 => weights.iter().map(|w| w.abs()).sum(),
        Penalty::L2 => 0.5 * weights.iter().map(|w| w * w).sum::<f64>(),
    }
}

/// ln(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

struct Problem<'a> {
    matrix: &'a FeatureMatrix,
    targets: Vec<f64>,
    lambda: f64,
    penalty: Penalty,
}

impl Problem<'_> {
    fn n(&self) -> f64 {
        self.matrix.n_rows() as f64
    }

    /// Smooth part for the logistic path: data loss plus the L2 term.
    fn smooth_value(&self, weights: &[f64], intercept: f64) -> f64 {
        let data: f64 = self
            .matrix
            .rows
            .iter()
            .zip(&self.targets)
            .map(|(row, &y)| softplus(-y * (row.dot_dense(weights) + intercept)))
            .sum();
        let l2 = match self.penalty {
            Penalty::L2 => self.lambda * penalty_value(Penalty::L2, weights),
            Penalty::L1 => 0.0,
        };
        data / self.n() + l2
    }

    /// Gradient of the smooth part; returns (grad_w, grad_b).
    fn smooth_gradient(&self, weights: &[f64], intercept: f64) -> (Vec<f64>, f64) {
        let mut grad_w = vec![0.0; weights.len()];
        let mut grad_b = 0.0;
        for (row, &y) in self.matrix.rows.iter().zip(&self.targets) {
            let z = row.dot_dense(weights) + intercept;
            // d/dz ln(1 + e^{-yz}) = -y * sigma(-yz)
            let g = -y * stable_sigmoid(-y * z);
            for (i, x) in row.iter() {
                grad_w[i] += g * x;
            }
            grad_b += g;
        }
        let n = self.n();
        for g in grad_w.iter_mut() {
            *g /= n;
        }
        if let Penalty::L2 = self.penalty {
            for (g, w) in grad_w.iter_mut().zip(weights) {
                *g += self.lambda * w;
            }
        }
        (grad_w, grad_b / n)
    }

    fn nonsmooth_value(&self, weights: &[f64]) -> f64 {
        match self.penalty {
            Penalty::L1 => self.lambda * penalty_value(Penalty::L1, weights),
            Penalty::L2 => 0.0,
        }
    }

    fn prox(&self, weights: &mut [f64], step: f64) {
        if let Penalty::L1 = self.penalty {
            let tau = step * self.lambda;
            for w in weights.iter_mut() {
                *w = soft_threshold(*w, tau);
            }
        }
    }
}

fn stable_sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Train a logistic-loss or hinge-loss linear model.
pub fn train_linear(
    matrix: &FeatureMatrix,
    loss: Loss,
    penalty: Penalty,
    lambda: f64,
    opts: &TrainOptions,
) -> Result<LinearModel> {
    if lambda < 0.0 {
        return Err(Error::InvalidParam("lambda must be non-negative".into()));
    }
    if matrix.n_positive() == 0 || matrix.n_negative() == 0 {
        return Err(Error::SingleClass);
    }
    let targets: Vec<f64> =
        matrix.labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let problem = Problem { matrix, targets, lambda, penalty };

    let (weights, intercept) = match loss {
        Loss::Logistic => proximal_gradient(&problem, opts)?,
        Loss::Hinge => proximal_subgradient(&problem, opts)?,
    };
    Ok(LinearModel { weights, intercept, loss, penalty, lambda })
}

fn base_rate_logit(matrix: &FeatureMatrix) -> f64 {
    let p = matrix.n_positive() as f64 / matrix.n_rows() as f64;
    (p / (1.0 - p)).ln()
}

fn proximal_gradient(problem: &Problem, opts: &TrainOptions) -> Result<(Vec<f64>, f64)> {
    let dim = problem.matrix.dimension;
    let mut w = vec![0.0; dim];
    let mut b = base_rate_logit(problem.matrix);
    let mut step = 1.0;
    let mut objective_prev = problem.smooth_value(&w, b) + problem.nonsmooth_value(&w);

    for iteration in 0..opts.max_iter {
        if !objective_prev.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        let smooth_prev = problem.smooth_value(&w, b);
        let (grad_w, grad_b) = problem.smooth_gradient(&w, b);

        // Backtracking on the quadratic majorizer of the smooth part.
        step *= 1.25;
        let (w_next, b_next) = loop {
            let mut w_cand: Vec<f64> =
                w.iter().zip(&grad_w).map(|(wi, gi)| wi - step * gi).collect();
            problem.prox(&mut w_cand, step);
            let b_cand = b - step * grad_b;

            let mut linear = grad_b * (b_cand - b);
            let mut quadratic = (b_cand - b).powi(2);
            for i in 0..dim {
                let d = w_cand[i] - w[i];
                linear += grad_w[i] * d;
                quadratic += d * d;
            }
            let bound = smooth_prev + linear + quadratic / (2.0 * step);
            if problem.smooth_value(&w_cand, b_cand) <= bound + 1e-15 || step < 1e-18 {
                break (w_cand, b_cand);
            }
            step *= 0.5;
        };

        w = w_next;
        b = b_next;
        let objective_next = problem.smooth_value(&w, b) + problem.nonsmooth_value(&w);
        let decrease = (objective_prev - objective_next) / objective_prev.abs().max(1e-12);
        objective_prev = objective_next;
        if decrease < opts.tol {
            break;
        }
    }
    if !w.iter().all(|x| x.is_finite()) || !b.is_finite() {
        return Err(Error::Diverged { iteration: opts.max_iter });
    }
    Ok((w, b))
}

fn proximal_subgradient(problem: &Problem, opts: &TrainOptions) -> Result<(Vec<f64>, f64)> {
    let matrix = problem.matrix;
    let dim = matrix.dimension;
    let n = problem.n();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;

    let full =
        |w: &[f64], b: f64| -> f64 {
            objective(
                matrix,
                Loss::Hinge,
                problem.penalty,
                problem.lambda,
                w,
                b,
            )
        };
    let mut best = (w.clone(), b, full(&w, b));
    let mut window_best = best.2;

    for iteration in 0..opts.max_iter {
        let mut grad_w = vec![0.0; dim];
        let mut grad_b = 0.0;
        for (row, &y) in matrix.rows.iter().zip(&problem.targets) {
            let z = row.dot_dense(&w) + b;
            if y * z < 1.0 {
                for (i, x) in row.iter() {
                    grad_w[i] -= y * x;
                }
                grad_b -= y;
            }
        }
        for g in grad_w.iter_mut() {
            *g /= n;
        }
        grad_b /= n;
        if let Penalty::L2 = problem.penalty {
            for (g, wi) in grad_w.iter_mut().zip(&w) {
                *g += problem.lambda * wi;
            }
        }

        let step = 1.0 / ((iteration + 1) as f64).sqrt();
        for (wi, gi) in w.iter_mut().zip(&grad_w) {
            *wi -= step * gi;
        }
        b -= step * grad_b;
        problem.prox(&mut w, step);

        let value = full(&w, b);
        if !value.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        if value < best.2 {
            best = (w.clone(), b, value);
        }
        // Subgradient descent is not monotone; judge convergence on the best
        // objective over a window.
        if (iteration + 1) % 200 == 0 {
            let improvement = (window_best - best.2) / window_best.abs().max(1e-12);
            if improvement < opts.tol {
                break;
            }
            window_best = best.2;
        }
    }
    Ok((best.0, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSetKind;
    use crate::sparse::SparseVector;

    fn matrix_1d(xs: &[f64], labels: &[u8]) -> FeatureMatrix {
        let rows: Vec<SparseVector> = xs
            .iter()
            .map(|&x| SparseVector::from_pairs(1, vec![(0, x)]).unwrap())
            .collect();
        let ids = (0..xs.len()).map(|i| format!("s{i}")).collect();
        FeatureMatrix::new(FeatureSetKind::Words, 1, ids, labels.to_vec(), rows).unwrap()
    }

    #[test]
    fn all_zero_features_give_base_rate_intercept() {
        let rows = vec![SparseVector::zeros(3); 4];
        let m = FeatureMatrix::new(
            FeatureSetKind::Words,
            3,
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![1, 1, 1, 0],
            rows,
        )
        .unwrap();
        let model =
            train_linear(&m, Loss::Logistic, Penalty::L2, 0.5, &TrainOptions::default()).unwrap();
        assert!(model.weights.iter().all(|&w| w == 0.0));
        assert!((model.intercept - (3.0f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn l1_above_lambda_max_zeroes_all_weights() {
        let m = matrix_1d(&[-2.0, -1.0, 1.0, 2.0], &[0, 0, 1, 1]);
        // At w = 0 with the intercept at its optimum (0 here by symmetry),
        // grad_j = (1/n) sum (sigma(0) - y01_i) x_ij.
        let grad: f64 = [(-2.0, 0.0), (-1.0, 0.0), (1.0, 1.0), (2.0, 1.0)]
            .iter()
            .map(|&(x, y01): &(f64, f64)| (0.5 - y01) * x)
            .sum::<f64>()
            / 4.0;
        let lambda_max = grad.abs();
        let model = train_linear(
            &m,
            Loss::Logistic,
            Penalty::L1,
            lambda_max * 1.01,
            &TrainOptions::default(),
        )
        .unwrap();
        assert_eq!(model.sparsity(), 1);
        assert_eq!(model.weights[0], 0.0);

        // strictly below the critical value the weight must move
        let model = train_linear(
            &m,
            Loss::Logistic,
            Penalty::L1,
            lambda_max * 0.5,
            &TrainOptions::default(),
        )
        .unwrap();
        assert!(model.weights[0] > 0.0);
    }

    #[test]
    fn separable_1d_l2_matches_golden_section_oracle() {
        let m = matrix_1d(&[-2.0, -1.0, 1.0, 2.0], &[0, 0, 1, 1]);
        let lambda = 1.0;
        let model =
            train_linear(&m, Loss::Logistic, Penalty::L2, lambda, &TrainOptions::default())
                .unwrap();
        let achieved =
            objective(&m, Loss::Logistic, Penalty::L2, lambda, &model.weights, model.intercept);

        // Nested golden-section: outer over b, inner over w.
        let golden = |mut lo: f64, mut hi: f64, f: &dyn Fn(f64) -> f64| -> f64 {
            let phi = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let a = hi - phi * (hi - lo);
                let b = lo + phi * (hi - lo);
                if f(a) < f(b) {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            (lo + hi) / 2.0
        };
        let inner = |b: f64| -> f64 {
            let w_opt = golden(-10.0, 10.0, &|w| {
                objective(&m, Loss::Logistic, Penalty::L2, lambda, &[w], b)
            });
            objective(&m, Loss::Logistic, Penalty::L2, lambda, &[w_opt], b)
        };
        let b_opt = golden(-10.0, 10.0, &inner);
        let oracle = inner(b_opt);

        let rel = (achieved - oracle).abs() / oracle.abs();
        assert!(rel < 1e-6, "achieved {achieved}, oracle {oracle}, rel {rel}");
    }

    #[test]
    fn hinge_separates_simple_data() {
        let m = matrix_1d(&[-2.0, -1.5, 1.5, 2.0], &[0, 0, 1, 1]);
        let model =
            train_linear(&m, Loss::Hinge, Penalty::L2, 1e-3, &TrainOptions::default()).unwrap();
        assert!(model.weights[0] > 0.0);
        let neg = SparseVector::from_pairs(1, vec![(0, -2.0)]).unwrap();
        let pos = SparseVector::from_pairs(1, vec![(0, 2.0)]).unwrap();
        assert!(model.predict_proba(&neg).unwrap() < 0.5);
        assert!(model.predict_proba(&pos).unwrap() > 0.5);
    }

    #[test]
    fn l1_sparsity_monotone_in_lambda() {
        // 4 features, 12 rows with mixed relevance
        let dim = 4;
        let raw: Vec<(Vec<f64>, u8)> = vec![
            (vec![1.0, 0.2, 0.0, 0.1], 1),
            (vec![0.9, 0.0, 0.1, 0.0], 1),
            (vec![1.1, 0.1, 0.2, 0.3], 1),
            (vec![0.8, 0.3, 0.0, 0.2], 1),
            (vec![1.2, 0.0, 0.3, 0.0], 1),
            (vec![0.0, 0.1, 1.0, 0.2], 0),
            (vec![0.1, 0.0, 0.9, 0.0], 0),
            (vec![0.0, 0.2, 1.1, 0.1], 0),
            (vec![0.2, 0.0, 0.8, 0.3], 0),
            (vec![0.0, 0.3, 1.2, 0.0], 0),
            (vec![0.5, 0.5, 0.5, 0.5], 1),
            (vec![0.5, 0.5, 0.5, 0.5], 0),
        ];
        let rows: Vec<SparseVector> = raw
            .iter()
            .map(|(r, _)| {
                SparseVector::from_pairs(dim, r.iter().copied().enumerate().filter(|&(_, w)| w != 0.0))
                    .unwrap()
            })
            .collect();
        let labels: Vec<u8> = raw.iter().map(|&(_, l)| l).collect();
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        let m = FeatureMatrix::new(FeatureSetKind::Words, dim, ids, labels, rows).unwrap();

        let mut nonzeros = Vec::new();
        for lambda in [1e-4, 1e-2, 0.1, 0.5, 2.0] {
            let model =
                train_linear(&m, Loss::Logistic, Penalty::L1, lambda, &TrainOptions::default())
                    .unwrap();
            nonzeros.push(dim - model.sparsity());
        }
        for pair in nonzeros.windows(2) {
            assert!(pair[1] <= pair[0], "nonzero counts not monotone: {nonzeros:?}");
        }
    }
}
