//! Gauss–Jacobi rules by the Golub–Welsch eigenvalue method.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Nodes and weights for `∫_{-1}^{1} (1−x)^α (1+x)^β f(x) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussJacobi {
    pub alpha: f64,
    pub beta: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussJacobi {
    /// Panics unless `α, β > −1` and `n ≥ 1`.
    pub fn new(n: usize, alpha: f64, beta: f64) -> Self {
        assert!(n >= 1, "need at least one node");
        assert!(alpha > -1.0 && beta > -1.0, "Jacobi exponents must exceed -1");
        let ab = alpha + beta;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let kf = k as f64;
            jac[(k, k)] = if k == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
            };
            if k + 1 < n {
                let m = kf + 1.0;
                let b2 = if k == 0 {
                    4.0 * (1.0 + alpha) * (1.0 + beta) / ((ab + 2.0).powi(2) * (ab + 3.0))
                } else {
                    let s = 2.0 * m + ab;
                    4.0 * m * (m + alpha) * (m + beta) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0))
                };
                jac[(k, k + 1)] = b2.sqrt();
                jac[(k + 1, k)] = b2.sqrt();
            }
        }
        let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
            - ln_gamma(ab + 2.0))
        .exp();
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            alpha,
            beta,
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn legendre(n: usize) -> Self {
        Self::new(n, 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The same rule mapped to `∫_0^1 (1−σ)^α σ^β f(σ) dσ`.
    pub fn unit_interval(&self) -> (Vec<f64>, Vec<f64>) {
        let scale = 2f64.powf(-(self.alpha + self.beta + 1.0));
        (
            self.nodes.iter().map(|x| 0.5 * (1.0 + x)).collect(),
            self.weights.iter().map(|w| w * scale).collect(),
        )
    }

    pub fn integrate_unit<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let (s, w) = self.unit_interval();
        s.iter().zip(&w).map(|(s, w)| w * f(*s)).sum()
    }
}
