//! Proxy for the best-in-class predictor: fits the observations while keeping
//! a margin `tau` away from the learned predictor on the observed designs.
//!
//! Loss: `mean (g(x_i) - y_i)^2 + mean max(0, tau - |f_hat(x_i) - g(x_i)|)`,
//! minimised by full-batch gradient descent from zero coefficients. The hinge
//! subgradient is taken as 0 at its kink.

use serde::{Deserialize, Serialize};

use crate::error::{usage, BoedError, Result};
use crate::testbeds::DesignDomain;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// Add one polynomial degree to the default class.
    pub enriched: bool,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            learning_rate: 0.01,
            enriched: false,
        }
    }
}

/// Total-degree polynomial basis in coordinates rescaled to `[-1, 1]` over
/// the design domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyBasis {
    degree: usize,
    center: Vec<f64>,
    half_width: Vec<f64>,
    exponents: Vec<Vec<u32>>,
}

impl ProxyBasis {
    pub fn new(domain: &DesignDomain, degree: usize) -> Self {
        let dim = domain.dim();
        let center = domain
            .lower
            .iter()
            .zip(&domain.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect();
        let half_width = domain
            .lower
            .iter()
            .zip(&domain.upper)
            .map(|(l, u)| 0.5 * (u - l))
            .collect();
        Self {
            degree,
            center,
            half_width,
            exponents: monomials(dim, degree as u32),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn eval(&self, design: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = design
            .iter()
            .zip(self.center.iter().zip(&self.half_width))
            .map(|(x, (c, h))| (x - c) / h)
            .collect();
        self.exponents
            .iter()
            .map(|e| {
                e.iter()
                    .zip(&u)
                    .map(|(&k, &ui)| ui.powi(k as i32))
                    .product()
            })
            .collect()
    }
}

fn monomials(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut current = vec![0; dim];
        push_compositions(&mut out, &mut current, 0, total);
    }
    out
}

fn push_compositions(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, axis: usize, remaining: u32) {
    if axis + 1 == current.len() {
        current[axis] = remaining;
        out.push(current.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        current[axis] = k;
        push_compositions(out, current, axis + 1, remaining - k);
    }
    current[axis] = 0;
}

/// A trained proxy `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyFunction {
    basis: ProxyBasis,
    coefficients: Vec<f64>,
}

impl ProxyFunction {
    pub fn new(basis: ProxyBasis, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return usage(format!(
                "proxy expects {} coefficients, got {}",
                basis.len(),
                coefficients.len()
            ));
        }
        Ok(Self {
            basis,
            coefficients,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn basis(&self) -> &ProxyBasis {
        &self.basis
    }

    pub fn eval(&self, design: &[f64]) -> f64 {
        self.basis
            .eval(design)
            .iter()
            .zip(&self.coefficients)
            .map(|(f, c)| f * c)
            .sum()
    }
}

/// Result of a training run with per-step diagnostics.
#[derive(Debug, Clone)]
pub struct ProxyTraining {
    pub proxy: ProxyFunction,
    /// Total loss before each step, then after the final step.
    pub losses: Vec<f64>,
    /// Mean hinge residual, sampled like `losses`.
    pub hinge: Vec<f64>,
}

/// Train `g` on the observed designs.
///
/// `fhat` holds the learned predictor evaluated at each design.
pub fn train_proxy(
    basis: &ProxyBasis,
    designs: &[Vec<f64>],
    responses: &[f64],
    fhat: &[f64],
    tau: f64,
    cfg: &ProxyConfig,
) -> Result<ProxyTraining> {
    let n = designs.len();
    if n == 0 {
        return usage("proxy training needs at least one observation");
    }
    if responses.len() != n || fhat.len() != n {
        return usage("designs, responses and predictor values must have equal length");
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return usage(format!("tau must be finite and non-negative, got {tau}"));
    }
    if !(cfg.learning_rate > 0.0) {
        return usage("proxy learning rate must be positive");
    }
    let features: Vec<Vec<f64>> = designs.iter().map(|d| basis.eval(d)).collect();
    let p = basis.len();
    let inv_n = 1.0 / n as f64;
    let mut w = vec![0.0; p];
    let mut losses = Vec::with_capacity(cfg.steps + 1);
    let mut hinge_trace = Vec::with_capacity(cfg.steps + 1);
    let mut grad = vec![0.0; p];

    for step in 0..=cfg.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut sq = 0.0;
        let mut hinge = 0.0;
        for ((phi, y), f) in features.iter().zip(responses).zip(fhat) {
            let g: f64 = phi.iter().zip(&w).map(|(a, b)| a * b).sum();
            let r = g - y;
            sq += r * r;
            let margin = tau - (f - g).abs();
            let mut dg = 2.0 * r;
            if margin > 0.0 {
                hinge += margin;
                let s = g - f;
                if s > 0.0 {
                    dg -= 1.0;
                } else if s < 0.0 {
                    dg += 1.0;
                }
            }
            for (gj, pj) in grad.iter_mut().zip(phi) {
                *gj += dg * pj * inv_n;
            }
        }
        let loss = (sq + hinge) * inv_n;
        if !loss.is_finite() {
            return Err(BoedError::Training(format!(
                "non-finite loss at step {step} (squared error {sq}, hinge {hinge}, coefficients {w:?})"
            )));
        }
        losses.push(loss);
        hinge_trace.push(hinge * inv_n);
        if step == cfg.steps {
            break;
        }
        w.iter_mut()
            .zip(&grad)
            .for_each(|(wj, gj)| *wj -= cfg.learning_rate * gj);
    }
    Ok(ProxyTraining {
        proxy: ProxyFunction::new(basis.clone(), w)?,
        losses,
        hinge: hinge_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn basis(degree: usize) -> ProxyBasis {
        ProxyBasis::new(&DesignDomain::interval(-4.0, 4.0), degree)
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(1, 3).len(), 4);
        assert_eq!(monomials(2, 2).len(), 6);
        let b = ProxyBasis::new(&DesignDomain::cube(-1.0, 1.0, 2), 1);
        assert_eq!(b.eval(&[0.5, -0.25]), vec![1.0, 0.5, -0.25]);
    }

    #[test]
    fn zero_margin_is_least_squares() {
        let mut rng = RngStream::new(12, 0);
        let designs: Vec<Vec<f64>> = (0..8).map(|_| vec![8.0 * rng.uniform() - 4.0]).collect();
        let ys: Vec<f64> = designs
            .iter()
            .map(|d| 1.0 + 2.0 * d[0] - 0.5 * d[0] * d[0] + rng.standard_normal())
            .collect();
        let b = basis(1);
        let cfg = ProxyConfig {
            steps: 20_000,
            learning_rate: 0.05,
            enriched: false,
        };
        let fhat = vec![0.0; designs.len()];
        let trained = train_proxy(&b, &designs, &ys, &fhat, 0.0, &cfg).unwrap();

        // normal equations in the same basis
        let x = DMatrix::from_fn(designs.len(), b.len(), |i, j| b.eval(&designs[i])[j]);
        let y = DVector::from_vec(ys.clone());
        let beta = (x.transpose() * &x)
            .cholesky()
            .unwrap()
            .solve(&(x.transpose() * y));
        assert_relative_eq!(trained.proxy.coefficients()[0], beta[0], epsilon = 1e-8);
        assert_relative_eq!(trained.proxy.coefficients()[1], beta[1], epsilon = 1e-8);
    }

    #[test]
    fn large_margin_pushes_away_monotonically() {
        let b = basis(0);
        let cfg = ProxyConfig::default();
        let t = train_proxy(&b, &[vec![0.0]], &[1.0], &[0.0], 10.0, &cfg).unwrap();
        let g = t.proxy.eval(&[0.0]);
        assert!(
            g > 1.0,
            "proxy should overshoot the datum away from f_hat, got {g}"
        );
        assert!(t.hinge.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(t.hinge.last().unwrap() < t.hinge.first().unwrap());
    }

    #[test]
    fn replicated_history_has_same_optimum() {
        let designs = vec![vec![-3.0], vec![0.5], vec![2.0]];
        let ys = vec![-4.0, 1.5, 3.0];
        let fhat = vec![-3.5, 1.0, 2.8];
        let b = basis(1);
        let cfg = ProxyConfig::default();
        let once = train_proxy(&b, &designs, &ys, &fhat, 0.5, &cfg).unwrap();
        let rep = |v: &[f64]| {
            v.iter()
                .cycle()
                .take(v.len() * 3)
                .copied()
                .collect::<Vec<_>>()
        };
        let designs3: Vec<Vec<f64>> = designs.iter().cycle().take(9).cloned().collect();
        let thrice = train_proxy(&b, &designs3, &rep(&ys), &rep(&fhat), 0.5, &cfg).unwrap();
        for (a, c) in once
            .proxy
            .coefficients()
            .iter()
            .zip(thrice.proxy.coefficients())
        {
            assert_relative_eq!(a, c, epsilon = 1e-10);
        }
    }

    #[test]
    fn input_validation() {
        let b = basis(1);
        let cfg = ProxyConfig::default();
        assert!(train_proxy(&b, &[], &[], &[], 0.5, &cfg).is_err());
        assert!(train_proxy(&b, &[vec![0.0]], &[1.0], &[0.0], -1.0, &cfg).is_err());
        let diverging = ProxyConfig {
            learning_rate: 1e6,
            steps: 2000,
            enriched: false,
        };
        let err = train_proxy(
            &b,
            &[vec![4.0], vec![-4.0]],
            &[1e3, -1e3],
            &[0.0, 0.0],
            0.5,
            &diverging,
        );
        assert!(matches!(err, Err(BoedError::Training(_))));
    }
}
