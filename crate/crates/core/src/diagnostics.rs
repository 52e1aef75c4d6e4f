//! Oracle-side quantities: best-in-class predictor, the bias/estimation/
//! amplification decomposition of test error, the finite-class bound, and
//! de-amplifying regions. All of these need `f*`, so they are only available
//! in simulation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{usage, BoedError, Result};
use crate::inference::FeatureMap;
use crate::numerics::{solve_spd, RngStream};
use crate::testbeds::{DesignDomain, ObservationModel, Testbed};

/// Best-in-class parameters and their risk against `f*` on the fitting grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestInClass {
    pub theta: Vec<f64>,
    pub grid_risk: f64,
}

impl BestInClass {
    pub fn eval(&self, model: &dyn ObservationModel, design: &[f64]) -> f64 {
        model.predict(&self.theta, design)
    }
}

fn grid_risk(f: impl Fn(&[f64]) -> f64, f_star: impl Fn(&[f64]) -> f64, grid: &[Vec<f64>]) -> f64 {
    grid.iter().map(|x| (f(x) - f_star(x)).powi(2)).sum::<f64>() / grid.len() as f64
}

/// Least-squares projection of `f_star` onto a linear feature class under
/// uniform weights on `grid`.
pub fn best_in_class_linear(
    features: &FeatureMap,
    f_star: impl Fn(&[f64]) -> f64,
    grid: &[Vec<f64>],
) -> Result<BestInClass> {
    if grid.is_empty() {
        return usage("best-in-class fit needs a non-empty grid");
    }
    let p = features.dim();
    let mut gram = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for x in grid {
        let phi = features.eval(x);
        gram += &phi * phi.transpose();
        rhs += &phi * f_star(x);
    }
    let eig = gram.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > hi * 1e-12) {
        return Err(BoedError::Numerical(format!(
            "rank-deficient best-in-class design matrix (eigenvalues in [{lo:.3e}, {hi:.3e}])"
        )));
    }
    let theta = solve_spd(&gram, &rhs).map_err(|e| {
        BoedError::Numerical(format!("rank-deficient best-in-class design matrix: {e}"))
    })?;
    let theta: Vec<f64> = theta.iter().copied().collect();
    let risk = grid_risk(|x| features.dot(&theta, x), &f_star, grid);
    Ok(BestInClass {
        theta,
        grid_risk: risk,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Prior draws screened before local refinement.
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 2000,
            max_iterations: 5000,
            tolerance: 1e-9,
        }
    }
}

/// Least-squares fit of a nonlinear model to `f_star` on `grid`: screen prior
/// draws, then refine the best by a compass search.
pub fn best_in_class_parametric(
    model: &dyn ObservationModel,
    f_star: impl Fn(&[f64]) -> f64,
    grid: &[Vec<f64>],
    cfg: &FitConfig,
    rng: &mut RngStream,
) -> Result<BestInClass> {
    if grid.is_empty() || cfg.restarts == 0 {
        return usage("parametric fit needs a non-empty grid and at least one restart");
    }
    let targets: Vec<f64> = grid.iter().map(|x| f_star(x)).collect();
    let risk = |theta: &[f64]| {
        let r = grid
            .iter()
            .zip(&targets)
            .map(|(x, t)| (model.predict(theta, x) - t).powi(2))
            .sum::<f64>()
            / grid.len() as f64;
        if r.is_nan() {
            f64::INFINITY
        } else {
            r
        }
    };

    let mut best = model.sample_prior(rng);
    let mut best_risk = risk(&best);
    for _ in 1..cfg.restarts {
        let theta = model.sample_prior(rng);
        let r = risk(&theta);
        if r < best_risk {
            best = theta;
            best_risk = r;
        }
    }
    if !best_risk.is_finite() {
        return Err(BoedError::Numerical(
            "no prior draw gives a finite risk on the grid".into(),
        ));
    }

    let mut step: Vec<f64> = best.iter().map(|t| 0.1 * t.abs().max(0.1)).collect();
    for _ in 0..cfg.max_iterations {
        let mut improved = false;
        for j in 0..best.len() {
            for sign in [1.0, -1.0] {
                let mut trial = best.clone();
                trial[j] += sign * step[j];
                let r = risk(&trial);
                if r < best_risk {
                    best = trial;
                    best_risk = r;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
            if step.iter().all(|&s| s < cfg.tolerance) {
                break;
            }
        }
    }
    Ok(BestInClass {
        theta: best,
        grid_risk: best_risk,
    })
}

/// Best-in-class predictor of the testbed's assumed model over `grid`.
pub fn best_in_class(
    testbed: &Testbed,
    grid: &[Vec<f64>],
    rng: &mut RngStream,
) -> Result<BestInClass> {
    let f_star = |x: &[f64]| testbed.dgp_mean(x);
    match testbed.conjugate_prior() {
        Some(prior) => best_in_class_linear(prior.features(), f_star, grid),
        None => best_in_class_parametric(testbed.model(), f_star, grid, &FitConfig::default(), rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// Misspecification bias, mean `(f_bar - f*)^2`.
    pub b: f64,
    /// Estimation bias, mean `(f_hat - f_bar)^2`.
    pub c: f64,
    /// Amplification, `2 * mean (f_bar - f*)(f_hat - f_bar)`.
    pub a: f64,
    /// Mean `(f_hat - f*)^2`.
    pub total: f64,
    pub samples: usize,
}

impl DecompositionReport {
    pub fn residual(&self) -> f64 {
        self.b + self.c + self.a - self.total
    }
}

pub fn decompose(
    f_hat: impl Fn(&[f64]) -> f64,
    f_bar: impl Fn(&[f64]) -> f64,
    f_star: impl Fn(&[f64]) -> f64,
    sample: &[Vec<f64>],
) -> Result<DecompositionReport> {
    if sample.is_empty() {
        return usage("decomposition needs a non-empty test sample");
    }
    let (mut b, mut c, mut a, mut total) = (0.0, 0.0, 0.0, 0.0);
    for x in sample {
        let (h, m, s) = (f_hat(x), f_bar(x), f_star(x));
        let mis = m - s;
        let est = h - m;
        b += mis * mis;
        c += est * est;
        a += 2.0 * mis * est;
        total += (h - s) * (h - s);
    }
    let n = sample.len() as f64;
    Ok(DecompositionReport {
        b: b / n,
        c: c / n,
        a: a / n,
        total: total / n,
        samples: sample.len(),
    })
}

/// Empirical `A_hat`: mean of `(f_hat - f_bar)(f_bar - f*)` over training designs.
pub fn amplification_term(
    f_hat: impl Fn(&[f64]) -> f64,
    f_bar: impl Fn(&[f64]) -> f64,
    f_star: impl Fn(&[f64]) -> f64,
    train: &[Vec<f64>],
) -> Result<f64> {
    if train.is_empty() {
        return usage("amplification term needs at least one training design");
    }
    let sum: f64 = train
        .iter()
        .map(|x| {
            let m = f_bar(x);
            (f_hat(x) - m) * (m - f_star(x))
        })
        .sum();
    Ok(sum / train.len() as f64)
}

/// Constants entering the finite-class generalization bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub c_inf: f64,
    pub b_inf: f64,
    pub y_inf: f64,
    pub a_hat: f64,
    pub class_size: usize,
    pub delta: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub rhs: f64,
    pub observed: f64,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.observed <= self.rhs
    }
}

/// Right-hand side of the bound; the constant and the weight on `A_hat`
/// depend on the sign of `A_hat`.
pub fn bound_rhs(inputs: &BoundInputs) -> Result<f64> {
    let BoundInputs {
        c_inf,
        b_inf,
        y_inf,
        a_hat,
        class_size,
        delta,
        n,
    } = *inputs;
    if n == 0 {
        return usage("bound needs n >= 1");
    }
    if class_size < 2 {
        return usage("bound needs a class of at least two functions");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return usage(format!("delta must lie in (0, 1), got {delta}"));
    }
    if !(c_inf >= 1.0 && c_inf.is_finite()) {
        return usage(format!(
            "density ratio bound must be finite and >= 1, got {c_inf}"
        ));
    }
    if ![b_inf, y_inf, a_hat].iter().all(|v| v.is_finite()) || b_inf < 0.0 || y_inf < 0.0 {
        return usage("bound constants must be finite and non-negative");
    }
    let log_term = y_inf * y_inf * (class_size as f64 / delta).ln() / (3.0 * n as f64);
    let inner = if a_hat < 0.0 {
        b_inf * b_inf + 224.0 * log_term - 2.0 * a_hat
    } else {
        b_inf * b_inf + 128.0 * log_term - 3f64.sqrt() * a_hat
    };
    Ok(c_inf * inner)
}

/// `sup d_test / d_train` over `grid`, with `d_test` uniform on `domain` and
/// `d_train` a histogram of `train` using add-one smoothing.
pub fn density_ratio_sup(
    train: &[Vec<f64>],
    domain: &DesignDomain,
    grid: &[Vec<f64>],
    bins_per_dim: usize,
) -> Result<f64> {
    if bins_per_dim == 0 || grid.is_empty() {
        return usage("density ratio needs at least one bin and one grid point");
    }
    let dim = domain.dim();
    let total_bins = bins_per_dim
        .checked_pow(dim as u32)
        .ok_or_else(|| BoedError::Usage("histogram has too many bins".into()))?;
    let bin_of = |x: &[f64]| -> usize {
        let mut idx = 0;
        for (j, &v) in x.iter().enumerate() {
            let u = (v - domain.lower[j]) / (domain.upper[j] - domain.lower[j]);
            let b = ((u * bins_per_dim as f64).floor().max(0.0) as usize).min(bins_per_dim - 1);
            idx = idx * bins_per_dim + b;
        }
        idx
    };
    let mut counts = vec![0usize; total_bins];
    for x in train {
        counts[bin_of(x)] += 1;
    }
    // probability mass ratio per bin; bins share volume so densities scale alike
    let n = train.len() as f64;
    let k = total_bins as f64;
    let ratio = |c: usize| (n + k) / (k * (c as f64 + 1.0));
    Ok(grid
        .iter()
        .map(|x| ratio(counts[bin_of(x)]))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `max |f_bar - f*|` over `grid`.
pub fn misspecification_sup(
    f_bar: impl Fn(&[f64]) -> f64,
    f_star: impl Fn(&[f64]) -> f64,
    grid: &[Vec<f64>],
) -> f64 {
    grid.iter()
        .map(|x| (f_bar(x) - f_star(x)).abs())
        .fold(0.0, f64::max)
}

/// 1.5 times the largest absolute value seen.
pub fn response_bound(values: impl IntoIterator<Item = f64>) -> f64 {
    1.5 * values.into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Indices of grid points with `(f_hat - f_bar)(f_bar - f*) >= tau0`.
pub fn deamp_region_exact(
    f_hat: impl Fn(&[f64]) -> f64,
    f_bar: impl Fn(&[f64]) -> f64,
    f_star: impl Fn(&[f64]) -> f64,
    grid: &[Vec<f64>],
    tau0: f64,
) -> Result<Vec<usize>> {
    if !(tau0 >= 0.0) {
        return usage(format!("tau0 must be >= 0, got {tau0}"));
    }
    Ok(grid
        .iter()
        .enumerate()
        .filter(|(_, x)| {
            let m = f_bar(x);
            (f_hat(x) - m) * (m - f_star(x)) >= tau0
        })
        .map(|(i, _)| i)
        .collect())
}

/// `tau0 / b_inf + c * b_inf`.
pub fn approx_threshold(tau0: f64, b_inf: f64, c: f64) -> Result<f64> {
    if !(tau0 >= 0.0 && b_inf >= 0.0) {
        return usage("tau0 and b_inf must be non-negative");
    }
    if !(c >= 2.0) {
        return usage(format!("c must be >= 2, got {c}"));
    }
    if b_inf == 0.0 {
        if tau0 > 0.0 {
            return usage("threshold undefined for a well-specified class with tau0 > 0");
        }
        return Ok(0.0);
    }
    Ok(tau0 / b_inf + c * b_inf)
}

/// Indices of grid points with `|f_hat - reference| >= threshold`.
pub fn deamp_region_approx(
    f_hat: impl Fn(&[f64]) -> f64,
    reference: impl Fn(&[f64]) -> f64,
    grid: &[Vec<f64>],
    threshold: f64,
) -> Vec<usize> {
    grid.iter()
        .enumerate()
        .filter(|(_, x)| (f_hat(x) - reference(x)).abs() >= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Indices in `inner` that are missing from `outer`; both must be sorted.
pub fn subset_violations(inner: &[usize], outer: &[usize]) -> Vec<usize> {
    inner
        .iter()
        .copied()
        .filter(|i| outer.binary_search(i).is_err())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testbeds::poly::PolyModel;
    use crate::testbeds::{Specification, TestbedConfig, TestbedKind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dense() -> Vec<Vec<f64>> {
        DesignDomain::interval(-4.0, 4.0).grid(4001).unwrap()
    }

    fn quad(x: &[f64]) -> f64 {
        1.0 + 2.0 * x[0] - 0.5 * x[0] * x[0]
    }

    #[test]
    fn linear_projection_of_quadratic() {
        let grid = dense();
        let fbar =
            best_in_class_linear(&FeatureMap::Polynomial { degree: 1 }, quad, &grid).unwrap();
        // on a symmetric grid the intercept is 1 - 0.5 * mean(x^2)
        let m2 = grid.iter().map(|x| x[0] * x[0]).sum::<f64>() / grid.len() as f64;
        assert_relative_eq!(fbar.theta[0], 1.0 - 0.5 * m2, epsilon = 1e-10);
        assert_relative_eq!(fbar.theta[1], 2.0, epsilon = 1e-10);
        // and tends to 1 - 0.5 * 16/3 as the grid is refined
        assert!((fbar.theta[0] + 5.0 / 3.0).abs() < 2e-3);
    }

    #[test]
    fn well_specified_recovers_truth() {
        let fbar =
            best_in_class_linear(&FeatureMap::Polynomial { degree: 2 }, quad, &dense()).unwrap();
        for (a, b) in fbar.theta.iter().zip([1.0, 2.0, -0.5]) {
            assert_relative_eq!(*a, b, epsilon = 1e-8);
        }
        assert!(fbar.grid_risk < 1e-16);
    }

    #[test]
    fn symmetric_truth_keeps_odd_slope() {
        // odd part of x^3 + x^2 projected on span{1, x} over [-4, 4]
        let grid = dense();
        let fbar = best_in_class_linear(
            &FeatureMap::Polynomial { degree: 1 },
            |x| x[0].powi(3) + x[0].powi(2),
            &grid,
        )
        .unwrap();
        let odd = best_in_class_linear(
            &FeatureMap::Polynomial { degree: 1 },
            |x| x[0].powi(3),
            &grid,
        )
        .unwrap();
        assert_relative_eq!(fbar.theta[1], odd.theta[1], epsilon = 1e-9);
        assert_relative_eq!(odd.theta[0], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn rank_deficient_grid_is_an_error() {
        let grid = vec![vec![1.0]; 10];
        let err = best_in_class_linear(&FeatureMap::Polynomial { degree: 1 }, quad, &grid);
        assert!(matches!(err, Err(BoedError::Numerical(_))));
    }

    #[test]
    fn parametric_fit_agrees_with_linear_projection() {
        let model = PolyModel::new(1, 0.1, 4.0);
        let grid = DesignDomain::interval(-4.0, 4.0).grid(201).unwrap();
        let lin = best_in_class_linear(&model.features(), quad, &grid).unwrap();
        let par = best_in_class_parametric(
            &model,
            quad,
            &grid,
            &FitConfig::default(),
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert_relative_eq!(par.theta[0], lin.theta[0], epsilon = 1e-5);
        assert_relative_eq!(par.theta[1], lin.theta[1], epsilon = 1e-5);
    }

    #[test]
    fn testbed_dispatch() {
        let tb = TestbedConfig::new(TestbedKind::Poly, Specification::Mis)
            .instantiate(&mut RngStream::new(0, 0))
            .unwrap();
        let grid = tb.candidates(201).unwrap();
        let fbar = best_in_class(&tb, &grid, &mut RngStream::new(0, 1)).unwrap();
        assert_relative_eq!(fbar.theta[1], 2.0, epsilon = 1e-9);
        assert!(fbar.eval(tb.model(), &[0.0]) < 0.0);
    }

    #[test]
    fn decomposition_special_cases() {
        let grid = DesignDomain::interval(-4.0, 4.0).grid(50).unwrap();
        let fbar = |x: &[f64]| -5.0 / 3.0 + 2.0 * x[0];
        let same = decompose(fbar, fbar, quad, &grid).unwrap();
        assert_eq!(same.c, 0.0);
        assert_eq!(same.a, 0.0);
        assert_relative_eq!(same.total, same.b, epsilon = 1e-12);

        let exact = decompose(quad, fbar, quad, &grid).unwrap();
        assert_eq!(exact.total, 0.0);
        assert_relative_eq!(exact.a, -(exact.b + exact.c), epsilon = 1e-12);
        assert!(decompose(quad, quad, quad, &[]).is_err());
    }

    #[test]
    fn amplification_examples() {
        let train = vec![vec![-1.0], vec![0.5], vec![3.0]];
        let fbar = |x: &[f64]| x[0];
        assert_eq!(amplification_term(fbar, fbar, quad, &train).unwrap(), 0.0);
        assert_eq!(amplification_term(quad, fbar, fbar, &train).unwrap(), 0.0);
        // f_hat above f_bar above f* everywhere
        let positive = amplification_term(|x| x[0] + 10.0, fbar, |x| x[0] - 1.0, &train).unwrap();
        assert!(positive > 0.0);
        assert!(amplification_term(fbar, fbar, fbar, &[]).is_err());
    }

    fn inputs() -> BoundInputs {
        BoundInputs {
            c_inf: 1.0,
            b_inf: 0.0,
            y_inf: 2.0,
            a_hat: 0.0,
            class_size: 41,
            delta: 0.05,
            n: 50,
        }
    }

    #[test]
    fn bound_reductions() {
        let base = inputs();
        let expected = 128.0 * 4.0 * (41.0f64 / 0.05).ln() / 150.0;
        assert_relative_eq!(bound_rhs(&base).unwrap(), expected, epsilon = 1e-12);

        let just_below = BoundInputs {
            a_hat: -1e-300,
            ..base
        };
        let ratio = bound_rhs(&just_below).unwrap() / bound_rhs(&base).unwrap();
        assert_relative_eq!(ratio, 224.0 / 128.0, epsilon = 1e-12);

        assert!(bound_rhs(&BoundInputs { n: 0, ..base }).is_err());
        assert!(bound_rhs(&BoundInputs { delta: 1.0, ..base }).is_err());
        assert!(bound_rhs(&BoundInputs {
            class_size: 1,
            ..base
        })
        .is_err());
        assert!(bound_rhs(&BoundInputs { c_inf: 0.5, ..base }).is_err());
    }

    #[test]
    fn density_ratio_examples() {
        let domain = DesignDomain::interval(-4.0, 4.0);
        let grid = domain.grid(81).unwrap();
        // one point per bin: every bin has ratio 1
        let even: Vec<Vec<f64>> = (0..10).map(|i| vec![-3.6 + 0.8 * i as f64]).collect();
        assert_relative_eq!(
            density_ratio_sup(&even, &domain, &grid, 10).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // all mass in one bin: empty bins have ratio (n + k) / k
        let lumped = vec![vec![3.9]; 30];
        assert_relative_eq!(
            density_ratio_sup(&lumped, &domain, &grid, 10).unwrap(),
            4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn misspecification_sup_on_grid() {
        let grid = DesignDomain::interval(-4.0, 4.0).grid(81).unwrap();
        let fbar = |x: &[f64]| -5.0 / 3.0 + 2.0 * x[0];
        // |f_bar - f*| = |0.5 x^2 - 8/3|, largest at the boundary
        assert_relative_eq!(
            misspecification_sup(fbar, quad, &grid),
            8.0 - 8.0 / 3.0,
            epsilon = 1e-12
        );
        assert_eq!(response_bound([-2.0, 1.0]), 3.0);
    }

    #[test]
    fn exact_region_examples() {
        let grid = DesignDomain::interval(-4.0, 4.0).grid(41).unwrap();
        let fbar = |x: &[f64]| -5.0 / 3.0 + 2.0 * x[0];
        assert!(deamp_region_exact(fbar, fbar, quad, &grid, 0.1)
            .unwrap()
            .is_empty());
        assert_eq!(
            deamp_region_exact(fbar, fbar, quad, &grid, 0.0)
                .unwrap()
                .len(),
            grid.len()
        );

        // f_bar between f* and f_hat
        let f_hat = |x: &[f64]| 2.0 * fbar(x) - quad(x);
        assert_eq!(
            deamp_region_exact(f_hat, fbar, quad, &grid, 0.0)
                .unwrap()
                .len(),
            grid.len()
        );

        let f_hat = |x: &[f64]| fbar(x) + 0.3 * x[0];
        let region = deamp_region_exact(f_hat, fbar, quad, &grid, 0.0).unwrap();
        for (i, x) in grid.iter().enumerate() {
            let sign = (f_hat(x) - fbar(x)) * (fbar(x) - quad(x));
            assert_eq!(region.contains(&i), sign >= 0.0);
        }
    }

    #[test]
    fn approx_region_examples() {
        let grid = DesignDomain::interval(-4.0, 4.0).grid(41).unwrap();
        let fbar = |x: &[f64]| x[0];
        assert!(deamp_region_approx(fbar, fbar, &grid, 1e-9).is_empty());
        assert!(approx_threshold(0.1, 0.0, 2.0).is_err());
        assert_eq!(approx_threshold(0.0, 0.0, 2.0).unwrap(), 0.0);
        assert!(approx_threshold(0.1, 1.0, 1.5).is_err());
        assert_relative_eq!(
            approx_threshold(0.1, 0.5, 2.0).unwrap(),
            1.2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn approx_region_is_not_sign_aware() {
        // f_hat overshoots f_bar on the side away from f*: large |f_hat - f_bar|
        // but a negative product
        let grid = vec![vec![0.0]];
        let approx = deamp_region_approx(
            |_| 10.0,
            |_| -1.0,
            &grid,
            approx_threshold(0.0, 1.0, 2.0).unwrap(),
        );
        let exact = deamp_region_exact(|_| 10.0, |_| -1.0, |_| 0.0, &grid, 0.0).unwrap();
        assert_eq!(approx, vec![0]);
        assert!(exact.is_empty());
    }

    #[test]
    fn proxy_region_inside_approx_region() {
        let grid = DesignDomain::interval(-4.0, 4.0).grid(81).unwrap();
        let fbar = |x: &[f64]| -5.0 / 3.0 + 2.0 * x[0];
        let tau2 = 0.3;
        let g = |x: &[f64]| fbar(x) + tau2 * (3.0 * x[0]).sin();
        let f_hat = |x: &[f64]| 0.4 * x[0] * x[0] - 1.0;
        let tau1 = 1.1;
        let proxy = deamp_region_approx(f_hat, g, &grid, tau1 + tau2);
        let approx = deamp_region_approx(f_hat, fbar, &grid, tau1);
        assert!(!proxy.is_empty());
        assert!(subset_violations(&proxy, &approx).is_empty());
    }

    proptest! {
        #[test]
        fn decomposition_identity(c in proptest::collection::vec(-3.0f64..3.0, 4), xs in proptest::collection::vec(-4.0f64..4.0, 1..50)) {
            let sample: Vec<Vec<f64>> = xs.into_iter().map(|x| vec![x]).collect();
            let f_hat = |x: &[f64]| c[0] + c[1] * x[0] + c[2] * x[0] * x[0];
            let f_bar = |x: &[f64]| c[3] + 2.0 * x[0];
            let r = decompose(f_hat, f_bar, quad, &sample).unwrap();
            prop_assert!(r.residual().abs() <= 1e-10);
        }

        #[test]
        fn amplification_antisymmetric(shift in -3.0f64..3.0, slope in -2.0f64..2.0) {
            let train: Vec<Vec<f64>> = (0..20).map(|i| vec![-4.0 + 0.4 * i as f64]).collect();
            let f_bar = |x: &[f64]| -5.0 / 3.0 + 2.0 * x[0];
            let up = |x: &[f64]| f_bar(x) + shift + slope * x[0];
            let down = |x: &[f64]| f_bar(x) - shift - slope * x[0];
            let a = amplification_term(up, f_bar, quad, &train).unwrap();
            let b = amplification_term(down, f_bar, quad, &train).unwrap();
            prop_assert!((a + b).abs() <= 1e-10 * (1.0 + a.abs()));
        }

        #[test]
        fn bound_monotone(c in 1.0f64..5.0, b in 0.0f64..3.0, a in -2.0f64..2.0, n in 1usize..500) {
            let base = BoundInputs { c_inf: c, b_inf: b, y_inf: 2.0, a_hat: a, class_size: 41, delta: 0.05, n };
            let r = bound_rhs(&base).unwrap();
            let up_c = BoundInputs { c_inf: c + 0.5, ..base };
            let up_b = BoundInputs { b_inf: b + 0.5, ..base };
            let more_n = BoundInputs { n: n + 10, ..base };
            let a2 = if a < 0.0 { (a + 0.1).min(-1e-12) } else { a + 0.1 };
            let up_a = BoundInputs { a_hat: a2, ..base };
            // scaling by the density ratio only loosens a non-negative bound
            if r >= 0.0 {
                prop_assert!(bound_rhs(&up_c).unwrap() >= r);
            }
            prop_assert!(bound_rhs(&up_b).unwrap() >= r);
            prop_assert!(bound_rhs(&more_n).unwrap() <= r);
            prop_assert!(bound_rhs(&up_a).unwrap() <= r);
        }
    }
}
