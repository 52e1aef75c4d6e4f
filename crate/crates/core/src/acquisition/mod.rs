//! Design selection: random, EIG (BAD), representativeness-corrected EIG
//! (R-I) and its de-amplifying variant (R-IDeA).
//!
//! All EIG-based strategies score every candidate with the same nested Monte
//! Carlo draws, so differences between candidates are not blurred by
//! independent sampling noise, and two strategies handed equal rng streams
//! see equal EIG values.

pub mod proxy;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eig::{eig_nmc_with, EigConfig, EigEstimate, NmcDraws};
use crate::error::{usage, BoedError, Result};
use crate::inference::Posterior;
use crate::numerics::{
    mmd_squared, sigmoid, IncrementalMmd, RngStream, SampleSet, DEFAULT_BANDWIDTH,
};
use crate::testbeds::ObservationModel;

pub use proxy::{train_proxy, ProxyBasis, ProxyConfig, ProxyFunction, ProxyTraining};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Random,
    Bad,
    Ri,
    Ridea,
    RideaOracle,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Random,
        Method::Bad,
        Method::Ri,
        Method::Ridea,
        Method::RideaOracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Bad => "bad",
            Method::Ri => "ri",
            Method::Ridea => "ridea",
            Method::RideaOracle => "ridea-oracle",
        }
    }

    /// Stable key used when deriving per-method random streams.
    pub fn stream_id(self) -> u64 {
        match self {
            Method::Random => 1,
            Method::Bad => 2,
            Method::Ri => 3,
            Method::Ridea => 4,
            Method::RideaOracle => 5,
        }
    }

    pub fn uses_lambda(self) -> bool {
        matches!(self, Method::Ri | Method::Ridea | Method::RideaOracle)
    }

    pub fn uses_tau(self) -> bool {
        matches!(self, Method::Ridea | Method::RideaOracle)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = BoedError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| {
                BoedError::Config(format!(
                    "unknown method '{s}' (random|bad|ri|ridea|ridea-oracle)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub method: Method,
    pub lambda: f64,
    pub tau: f64,
    pub kappa: f64,
}

impl AcquisitionSpec {
    pub fn new(method: Method, lambda: f64, tau: f64, kappa: f64) -> Result<Self> {
        let spec = Self {
            method,
            lambda,
            tau,
            kappa,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(BoedError::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(BoedError::Config(format!(
                "tau must be finite and >= 0, got {}",
                self.tau
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(BoedError::Config(format!(
                "kappa must be finite and > 0, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// The chosen candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub design: Vec<f64>,
    /// Acquisition value of the chosen design; `None` for random selection.
    pub score: Option<f64>,
}

/// What an EIG-based strategy needs to score candidates.
#[derive(Clone, Copy)]
pub struct ScoringContext<'a> {
    pub posterior: &'a Posterior,
    pub model: &'a dyn ObservationModel,
    pub candidates: &'a [Vec<f64>],
    pub eig: EigConfig,
}

/// Reference function for the de-amplification factor.
#[derive(Clone, Copy)]
pub enum DeaReference<'a> {
    /// No reference yet (first step): factor fixed at 1.
    Unit,
    /// The same factor for every candidate.
    Constant(f64),
    /// A proxy `g` or the best-in-class `f_bar`.
    Function(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

/// Index of the largest score, lowest index on ties. NaN never wins.
pub fn argmax(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return usage("cannot select from an empty candidate set");
    }
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    let mut seen = false;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if !seen || s > best_val {
            best = i;
            best_val = s;
            seen = true;
        }
    }
    Ok(best)
}

fn check_candidates(candidates: &[Vec<f64>]) -> Result<()> {
    if candidates.is_empty() {
        return usage("candidate grid is empty");
    }
    Ok(())
}

fn pick(candidates: &[Vec<f64>], scores: &[f64]) -> Result<Selection> {
    let index = argmax(scores)?;
    Ok(Selection {
        index,
        design: candidates[index].clone(),
        score: Some(scores[index]),
    })
}

pub fn select_random(candidates: &[Vec<f64>], rng: &mut RngStream) -> Result<Selection> {
    check_candidates(candidates)?;
    let index = rng.index(candidates.len());
    Ok(Selection {
        index,
        design: candidates[index].clone(),
        score: None,
    })
}

/// EIG of every candidate from one shared set of nested Monte Carlo draws.
pub fn eig_scores(ctx: &ScoringContext<'_>, rng: &mut RngStream) -> Result<Vec<EigEstimate>> {
    check_candidates(ctx.candidates)?;
    let draws = NmcDraws::draw(ctx.posterior, ctx.eig, rng)?;
    ctx.candidates
        .par_iter()
        .map(|c| eig_nmc_with(&draws, ctx.model, c))
        .collect()
}

pub fn select_bad(ctx: &ScoringContext<'_>, rng: &mut RngStream) -> Result<Selection> {
    let eig: Vec<f64> = eig_scores(ctx, rng)?.iter().map(|e| e.value).collect();
    pick(ctx.candidates, &eig)
}

fn ratio_from(current: Option<f64>, with_candidate: f64, lambda: f64) -> f64 {
    let Some(current) = current else { return 1.0 };
    let before = current.max(0.0).sqrt();
    if before == 0.0 || lambda == 0.0 {
        return 1.0;
    }
    let after = with_candidate.max(0.0).sqrt();
    (1.0 - lambda * after / before).clamp(0.0, 1.0)
}

/// `1 - lambda * MMD(history + design, test) / MMD(history, test)`, clamped
/// to `[0, 1]`. Returns 1 for an empty history or a history whose MMD to the
/// test sample is already zero.
pub fn robust_ratio(
    history: &[Vec<f64>],
    design: &[f64],
    test: &SampleSet,
    lambda: f64,
) -> Result<f64> {
    if history.is_empty() {
        return Ok(1.0);
    }
    let before = SampleSet::new(history.to_vec())?;
    let mut extended = history.to_vec();
    extended.push(design.to_vec());
    let after = SampleSet::new(extended)?;
    let current = mmd_squared(&before, test, DEFAULT_BANDWIDTH)?;
    let next = mmd_squared(&after, test, DEFAULT_BANDWIDTH)?;
    Ok(ratio_from(Some(current), next, lambda))
}

/// [`robust_ratio`] for every candidate, reusing cached kernel sums.
pub fn robust_ratios(
    tracker: &IncrementalMmd,
    candidates: &[Vec<f64>],
    lambda: f64,
) -> Result<Vec<f64>> {
    let current = tracker.current();
    if current.is_none() || lambda == 0.0 {
        return Ok(vec![1.0; candidates.len()]);
    }
    candidates
        .par_iter()
        .map(|c| Ok(ratio_from(current, tracker.with_candidate(c)?, lambda)))
        .collect()
}

/// `sigmoid((|f_hat - g| - tau) / kappa)`.
pub fn dea_factor(fhat: f64, g: f64, tau: f64, kappa: f64) -> f64 {
    sigmoid(((fhat - g).abs() - tau) / kappa)
}

fn ri_scores(
    ctx: &ScoringContext<'_>,
    tracker: &IncrementalMmd,
    lambda: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let eig = eig_scores(ctx, rng)?;
    let ratios = robust_ratios(tracker, ctx.candidates, lambda)?;
    Ok(eig
        .iter()
        .zip(&ratios)
        .map(|(e, r)| e.value.max(0.0) * r)
        .collect())
}

pub fn select_ri(
    ctx: &ScoringContext<'_>,
    tracker: &IncrementalMmd,
    lambda: f64,
    rng: &mut RngStream,
) -> Result<Selection> {
    let scores = ri_scores(ctx, tracker, lambda, rng)?;
    pick(ctx.candidates, &scores)
}

pub fn select_ridea(
    ctx: &ScoringContext<'_>,
    tracker: &IncrementalMmd,
    spec: &AcquisitionSpec,
    reference: DeaReference<'_>,
    rng: &mut RngStream,
) -> Result<Selection> {
    spec.validate()?;
    let mut scores = ri_scores(ctx, tracker, spec.lambda, rng)?;
    match reference {
        DeaReference::Unit => {}
        DeaReference::Constant(c) => {
            if !(c > 0.0 && c.is_finite()) {
                return usage(format!("constant DeA factor must be positive, got {c}"));
            }
            scores.iter_mut().for_each(|s| *s *= c);
        }
        DeaReference::Function(g) => {
            let factors: Vec<f64> = ctx
                .candidates
                .par_iter()
                .map(|c| {
                    dea_factor(
                        ctx.posterior.predictive_mean(ctx.model, c),
                        g(c),
                        spec.tau,
                        spec.kappa,
                    )
                })
                .collect();
            scores.iter_mut().zip(&factors).for_each(|(s, f)| *s *= f);
        }
    }
    pick(ctx.candidates, &scores)
}

/// Dispatch on `spec.method`. `reference` is ignored by the non-DeA methods.
pub fn select_design(
    spec: &AcquisitionSpec,
    ctx: &ScoringContext<'_>,
    tracker: &IncrementalMmd,
    reference: DeaReference<'_>,
    rng: &mut RngStream,
) -> Result<Selection> {
    match spec.method {
        Method::Random => select_random(ctx.candidates, rng),
        Method::Bad => select_bad(ctx, rng),
        Method::Ri => select_ri(ctx, tracker, spec.lambda, rng),
        Method::Ridea | Method::RideaOracle => select_ridea(ctx, tracker, spec, reference, rng),
    }
}
