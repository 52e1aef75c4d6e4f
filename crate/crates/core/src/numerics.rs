//! Shared numerical kernels: RBF kernel, squared MMD, sigmoid, SPD solves and
//! reproducible random streams.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{usage, BoedError, Result};

/// Default RBF bandwidth for every MMD computed by the crate.
pub const DEFAULT_BANDWIDTH: f64 = 1.0;

/// A non-empty collection of equal-dimension points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return usage("sample set must be non-empty");
        };
        let dim = first.len();
        if dim == 0 {
            return usage("sample points must have dimension >= 1");
        }
        if let Some(bad) = points.iter().position(|p| p.len() != dim) {
            return usage(format!(
                "point {bad} has dimension {} but the set has dimension {dim}",
                points[bad].len()
            ));
        }
        Ok(Self { points, dim })
    }

    /// Convenience constructor for scalar designs.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }
}

fn squared_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn kernel_unchecked(p: &[f64], q: &[f64], inv_two_bw2: f64) -> f64 {
    (-squared_distance(p, q) * inv_two_bw2).exp()
}

/// Gaussian RBF kernel `exp(-|p - q|^2 / (2 bandwidth^2))`.
pub fn rbf_kernel(p: &[f64], q: &[f64], bandwidth: f64) -> Result<f64> {
    if p.len() != q.len() {
        return usage(format!(
            "kernel arguments differ in dimension: {} vs {}",
            p.len(),
            q.len()
        ));
    }
    check_bandwidth(bandwidth)?;
    Ok(kernel_unchecked(p, q, inv_two_bw2(bandwidth)))
}

fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return usage(format!(
            "bandwidth must be positive and finite, got {bandwidth}"
        ));
    }
    Ok(())
}

fn inv_two_bw2(bandwidth: f64) -> f64 {
    1.0 / (2.0 * bandwidth * bandwidth)
}

fn kernel_sum(a: &[Vec<f64>], b: &[Vec<f64>], inv: f64) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| kernel_unchecked(p, q, inv)).sum::<f64>())
        .sum()
}

/// Squared MMD between two empirical distributions, V-statistic form
/// (diagonal self-kernel terms included).
pub fn mmd_squared(p: &SampleSet, q: &SampleSet, bandwidth: f64) -> Result<f64> {
    if p.dim() != q.dim() {
        return usage(format!(
            "sample sets differ in dimension: {} vs {}",
            p.dim(),
            q.dim()
        ));
    }
    check_bandwidth(bandwidth)?;
    let inv = inv_two_bw2(bandwidth);
    let (m, n) = (p.len() as f64, q.len() as f64);
    let pp = kernel_sum(p.points(), p.points(), inv) / (m * m);
    let qq = kernel_sum(q.points(), q.points(), inv) / (n * n);
    // Evaluated as k(p, q) for the first argument so that swapping the sets
    // reproduces the same sum in a different order; sum both orders to keep
    // the result exactly symmetric.
    let pq = 0.5
        * (kernel_sum(p.points(), q.points(), inv) + kernel_sum(q.points(), p.points(), inv))
        / (m * n);
    Ok(pp + qq - 2.0 * pq)
}

/// Squared MMD between a growing design history and a fixed reference sample,
/// with cached kernel sums so that scoring "history plus one candidate" costs
/// O(|history| + |reference|) kernel evaluations.
#[derive(Debug, Clone)]
pub struct IncrementalMmd {
    reference: Vec<Vec<f64>>,
    inv: f64,
    reference_self: f64,
    history: Vec<Vec<f64>>,
    history_self: f64,
    cross: f64,
}

impl IncrementalMmd {
    pub fn new(reference: &SampleSet, bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        let inv = inv_two_bw2(bandwidth);
        let reference_self = kernel_sum(reference.points(), reference.points(), inv);
        Ok(Self {
            reference: reference.points().to_vec(),
            inv,
            reference_self,
            history: Vec::new(),
            history_self: 0.0,
            cross: 0.0,
        })
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    fn check_dim(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.reference[0].len() {
            return usage(format!(
                "design has dimension {} but reference sample has dimension {}",
                point.len(),
                self.reference[0].len()
            ));
        }
        Ok(())
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        self.check_dim(point)?;
        let to_hist: f64 = self
            .history
            .iter()
            .map(|h| kernel_unchecked(h, point, self.inv))
            .sum();
        self.history_self += 2.0 * to_hist + 1.0;
        self.cross += self
            .reference
            .iter()
            .map(|r| kernel_unchecked(point, r, self.inv))
            .sum::<f64>();
        self.history.push(point.to_vec());
        Ok(())
    }

    /// MMD² of the current history, `None` when the history is empty.
    pub fn current(&self) -> Option<f64> {
        if self.history.is_empty() {
            return None;
        }
        Some(self.combine(self.history_self, self.cross, self.history.len()))
    }

    /// MMD² of the history with `point` appended.
    pub fn with_candidate(&self, point: &[f64]) -> Result<f64> {
        self.check_dim(point)?;
        let to_hist: f64 = self
            .history
            .iter()
            .map(|h| kernel_unchecked(h, point, self.inv))
            .sum();
        let to_ref: f64 = self
            .reference
            .iter()
            .map(|r| kernel_unchecked(point, r, self.inv))
            .sum();
        Ok(self.combine(
            self.history_self + 2.0 * to_hist + 1.0,
            self.cross + to_ref,
            self.history.len() + 1,
        ))
    }

    fn combine(&self, self_sum: f64, cross_sum: f64, m: usize) -> f64 {
        let m = m as f64;
        let n = self.reference.len() as f64;
        self_sum / (m * m) + self.reference_self / (n * n) - 2.0 * cross_sum / (m * n)
    }
}

/// Logistic sigmoid, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `log(sum(exp(values)))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Solves `A x = b` for symmetric positive definite `A` via Cholesky.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if !a.is_square() || a.nrows() != b.len() {
        return usage(format!(
            "solve_spd shape mismatch: A is {}x{}, b has {} entries",
            a.nrows(),
            a.ncols(),
            b.len()
        ));
    }
    let chol = cholesky(a)?;
    Ok(chol.solve(b))
}

/// Cholesky factorisation with a diagnostic on failure.
pub fn cholesky(a: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let asym = (a - a.transpose()).abs().max();
    let scale = a.abs().max().max(1.0);
    if asym > 1e-9 * scale {
        return Err(BoedError::Numerical(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    a.clone().cholesky().ok_or_else(|| {
        let min_diag = a.diagonal().min();
        BoedError::Numerical(format!(
            "matrix is not positive definite ({}x{}, min diagonal {min_diag:e})",
            a.nrows(),
            a.ncols()
        ))
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Backed by ChaCha8 with the stream id mapped onto ChaCha's native stream
/// counter, so distinct ids never overlap and the same pair always replays the
/// same sequence.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh stream keyed by this stream's identity and `key`; independent of
    /// how many draws have been taken from `self`.
    pub fn derive(&self, key: u64) -> RngStream {
        RngStream::new(
            self.seed,
            splitmix64(self.stream ^ splitmix64(key.wrapping_add(1))),
        )
    }

    /// Derive along a path of keys.
    pub fn derive_path(&self, keys: &[u64]) -> RngStream {
        keys.iter().fold(self.clone(), |s, &k| s.derive(k))
    }

    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(self)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        rand::Rng::random_range(self, 0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
