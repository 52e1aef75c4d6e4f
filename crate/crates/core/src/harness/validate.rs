//! Randomised checks of the diagnostics against their stated properties:
//! the error decomposition identity, the finite-class bound, and the
//! inclusions between de-amplifying regions.

use serde::Serialize;

use crate::diagnostics::{
    amplification_term, approx_threshold, best_in_class_linear, bound_rhs, deamp_region_approx,
    deamp_region_exact, decompose, density_ratio_sup, misspecification_sup, response_bound,
    subset_violations, BoundInputs,
};
use crate::error::Result;
use crate::inference::FeatureMap;
use crate::numerics::RngStream;
use crate::testbeds::{poly_dgp_mean, DesignDomain, PolyConfig};

fn poly_truth() -> impl Fn(&[f64]) -> f64 + Copy {
    |x: &[f64]| poly_dgp_mean(x[0], &PolyConfig::default())
}

fn domain() -> DesignDomain {
    DesignDomain::interval(-4.0, 4.0)
}

fn uniform(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionStudy {
    pub trials: usize,
    pub max_residual: f64,
}

/// Random cubic truth, linear reference and quadratic predictor on uniform
/// test samples; reports the largest `|B + C + A - total|`.
pub fn decomposition_study(trials: usize, samples: usize, seed: u64) -> Result<DecompositionStudy> {
    let mut rng = RngStream::new(seed, 101);
    let mut max_residual: f64 = 0.0;
    for _ in 0..trials {
        let s: Vec<f64> = (0..4).map(|_| uniform(&mut rng, -2.0, 2.0)).collect();
        let m: Vec<f64> = (0..2).map(|_| uniform(&mut rng, -3.0, 3.0)).collect();
        let h: Vec<f64> = (0..3).map(|_| uniform(&mut rng, -3.0, 3.0)).collect();
        let sample = domain().sample_set(samples, &mut rng)?;
        let r = decompose(
            |x| h[0] + h[1] * x[0] + h[2] * x[0] * x[0],
            |x| m[0] + m[1] * x[0],
            |x| s[0] + s[1] * x[0] + s[2] * x[0].powi(2) + s[3] * x[0].powi(3),
            sample.points(),
        )?;
        max_residual = max_residual.max(r.residual().abs());
    }
    Ok(DecompositionStudy {
        trials,
        max_residual,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundStudyConfig {
    pub trials: usize,
    pub n: usize,
    pub delta: f64,
    /// Class `{a + 2x}` with `a` on this many evenly spaced values in `[-5, 5]`.
    pub class_size: usize,
    /// Weight of the `U(0, 4)` component of the training distribution; the
    /// rest is uniform on the whole domain.
    pub shifted_weight: f64,
    pub histogram_bins: usize,
}

impl Default for BoundStudyConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            n: 50,
            delta: 0.05,
            class_size: 41,
            shifted_weight: 0.8,
            histogram_bins: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundStudy {
    pub trials: usize,
    pub held: usize,
    pub fraction: f64,
    pub mean_observed: f64,
    pub mean_rhs: f64,
    pub min_slack: f64,
}

/// Empirical risk minimisation over a finite class of lines fitted to the
/// quadratic polynomial truth under covariate shift, compared with the bound.
pub fn bound_study(cfg: &BoundStudyConfig, seed: u64) -> Result<BoundStudy> {
    let truth = poly_truth();
    let noise_sd = PolyConfig::default().noise_variance.sqrt();
    let dense = domain().grid(2001)?;
    let grid = domain().grid(201)?;
    let offsets: Vec<f64> = (0..cfg.class_size)
        .map(|i| -5.0 + 10.0 * i as f64 / (cfg.class_size - 1).max(1) as f64)
        .collect();
    let test_risk = |a: f64| {
        dense
            .iter()
            .map(|x| (a + 2.0 * x[0] - truth(x)).powi(2))
            .sum::<f64>()
            / dense.len() as f64
    };
    let a_bar = offsets
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |best, a| {
            let r = test_risk(a);
            if r < best.1 {
                (a, r)
            } else {
                best
            }
        });
    let a_bar = a_bar.0;
    let f_bar = move |x: &[f64]| a_bar + 2.0 * x[0];
    let b_inf = misspecification_sup(f_bar, truth, &dense);
    let class_max = dense
        .iter()
        .flat_map(|x| {
            [
                offsets[0] + 2.0 * x[0],
                offsets[offsets.len() - 1] + 2.0 * x[0],
                truth(x),
            ]
        })
        .map(f64::abs)
        .fold(0.0, f64::max);

    let mut rng = RngStream::new(seed, 202);
    let (mut held, mut sum_obs, mut sum_rhs, mut min_slack) = (0, 0.0, 0.0, f64::INFINITY);
    for _ in 0..cfg.trials {
        let train: Vec<Vec<f64>> = (0..cfg.n)
            .map(|_| {
                if rng.uniform() < cfg.shifted_weight {
                    vec![uniform(&mut rng, 0.0, 4.0)]
                } else {
                    vec![uniform(&mut rng, -4.0, 4.0)]
                }
            })
            .collect();
        let ys: Vec<f64> = train
            .iter()
            .map(|x| rng.normal(truth(x), noise_sd))
            .collect();
        let empirical = |a: f64| {
            train
                .iter()
                .zip(&ys)
                .map(|(x, y)| (y - a - 2.0 * x[0]).powi(2))
                .sum::<f64>()
        };
        let a_hat = offsets
            .iter()
            .copied()
            .fold((f64::NAN, f64::INFINITY), |best, a| {
                let r = empirical(a);
                if r < best.1 {
                    (a, r)
                } else {
                    best
                }
            });
        let a_hat = a_hat.0;
        let f_hat = |x: &[f64]| a_hat + 2.0 * x[0];
        let observed = test_risk(a_hat);
        let amp = amplification_term(f_hat, f_bar, truth, &train)?;
        let inputs = BoundInputs {
            c_inf: density_ratio_sup(&train, &domain(), &grid, cfg.histogram_bins)?,
            b_inf,
            y_inf: response_bound(ys.iter().copied().chain([class_max])),
            a_hat: amp,
            class_size: cfg.class_size,
            delta: cfg.delta,
            n: cfg.n,
        };
        let rhs = bound_rhs(&inputs)?;
        if observed <= rhs {
            held += 1;
        }
        sum_obs += observed;
        sum_rhs += rhs;
        min_slack = min_slack.min(rhs - observed);
    }
    let t = cfg.trials.max(1) as f64;
    Ok(BoundStudy {
        trials: cfg.trials,
        held,
        fraction: held as f64 / t,
        mean_observed: sum_obs / t,
        mean_rhs: sum_rhs / t,
        min_slack,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionStudy {
    pub trials: usize,
    pub tau0: Vec<f64>,
    /// Trials (per `tau0`) whose approximate region is non-empty.
    pub nonempty_approx: Vec<usize>,
    /// Trials (per `tau0`) with at least one point in the approximate region
    /// but outside the exact region.
    pub approx_violations: Vec<usize>,
    /// Grid points violating the approximate-in-exact inclusion, summed over trials.
    pub approx_violating_points: Vec<usize>,
    pub proxy_nonempty: usize,
    /// Trials where the proxy region is not inside the approximate region.
    pub proxy_violations: usize,
}

/// Region inclusions on the misspecified polynomial testbed: truth
/// `1 + 2x - 0.5x^2`, linear best-in-class, random lines as the learned
/// predictor, and proxies within `tau2` of the best-in-class.
pub fn region_study(trials: usize, tau0s: &[f64], c: f64, seed: u64) -> Result<RegionStudy> {
    let truth = poly_truth();
    let grid = domain().grid(201)?;
    let dense = domain().grid(4001)?;
    let best = best_in_class_linear(&FeatureMap::Polynomial { degree: 1 }, truth, &dense)?;
    let theta = &best.theta;
    let f_bar = |x: &[f64]| theta[0] + theta[1] * x[0];
    let b_inf = misspecification_sup(f_bar, truth, &grid);

    let mut rng = RngStream::new(seed, 303);
    let mut nonempty = vec![0; tau0s.len()];
    let mut violations = vec![0; tau0s.len()];
    let mut points = vec![0; tau0s.len()];
    let (mut proxy_nonempty, mut proxy_violations) = (0, 0);
    for _ in 0..trials {
        let intercept = uniform(&mut rng, -20.0, 20.0);
        let slope = uniform(&mut rng, -6.0, 6.0);
        let f_hat = |x: &[f64]| intercept + slope * x[0];
        for (k, &tau0) in tau0s.iter().enumerate() {
            let tau1 = approx_threshold(tau0, b_inf, c)?;
            let approx = deamp_region_approx(f_hat, f_bar, &grid, tau1);
            let exact = deamp_region_exact(f_hat, f_bar, truth, &grid, tau0)?;
            let bad = subset_violations(&approx, &exact);
            nonempty[k] += usize::from(!approx.is_empty());
            violations[k] += usize::from(!bad.is_empty());
            points[k] += bad.len();
        }

        let tau2 = uniform(&mut rng, 0.0, 1.0);
        let freq = uniform(&mut rng, 0.5, 3.0);
        let phase = uniform(&mut rng, 0.0, std::f64::consts::TAU);
        let g = |x: &[f64]| f_bar(x) + tau2 * (freq * x[0] + phase).sin();
        let tau1 = approx_threshold(tau0s.first().copied().unwrap_or(0.0), b_inf, c)?;
        let proxy = deamp_region_approx(f_hat, g, &grid, tau1 + tau2);
        let approx = deamp_region_approx(f_hat, f_bar, &grid, tau1);
        proxy_nonempty += usize::from(!proxy.is_empty());
        proxy_violations += usize::from(!subset_violations(&proxy, &approx).is_empty());
    }
    Ok(RegionStudy {
        trials,
        tau0: tau0s.to_vec(),
        nonempty_approx: nonempty,
        approx_violations: violations,
        approx_violating_points: points,
        proxy_nonempty,
        proxy_violations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// The full suite with its default sizes.
pub fn run_validation(seed: u64) -> Result<ValidationReport> {
    let mut checks = Vec::new();

    let d = decomposition_study(100, 200, seed)?;
    checks.push(Check {
        name: "decomposition identity".into(),
        passed: d.max_residual <= 1e-10,
        detail: format!(
            "{} trials, max |B + C + A - total| = {:.3e}",
            d.trials, d.max_residual
        ),
    });

    let b = bound_study(&BoundStudyConfig::default(), seed)?;
    checks.push(Check {
        name: "finite-class bound".into(),
        passed: b.fraction >= 0.95,
        detail: format!(
            "held in {}/{} trials; mean risk {:.4}, mean bound {:.4}",
            b.held, b.trials, b.mean_observed, b.mean_rhs
        ),
    });

    let r = region_study(50, &[0.0, 0.1], 2.0, seed)?;
    for (k, tau0) in r.tau0.iter().enumerate() {
        checks.push(Check {
            name: format!("approximate region inside exact region (tau0 = {tau0})"),
            passed: r.approx_violations[k] == 0,
            detail: format!(
                "{} of {} trials violate ({} grid points); {} trials had a non-empty approximate region",
                r.approx_violations[k], r.trials, r.approx_violating_points[k], r.nonempty_approx[k]
            ),
        });
    }
    checks.push(Check {
        name: "proxy region inside approximate region".into(),
        passed: r.proxy_violations == 0,
        detail: format!(
            "{} of {} trials violate; {} trials had a non-empty proxy region",
            r.proxy_violations, r.trials, r.proxy_nonempty
        ),
    });
    Ok(ValidationReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_identity_holds() {
        let d = decomposition_study(20, 50, 1).unwrap();
        assert!(d.max_residual <= 1e-10);
    }

    #[test]
    fn bound_holds_on_small_study() {
        let cfg = BoundStudyConfig {
            trials: 20,
            ..Default::default()
        };
        let b = bound_study(&cfg, 3).unwrap();
        assert_eq!(b.held, 20);
        assert!(b.min_slack > 0.0);
    }

    #[test]
    fn proxy_inclusion_never_fails() {
        let r = region_study(30, &[0.0, 0.1], 2.0, 5).unwrap();
        assert_eq!(r.proxy_violations, 0);
        assert!(r.proxy_nonempty > 0);
    }
}
