use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::acquisition::Method;
use crate::error::{usage, Result};
use crate::numerics::{RngStream, SampleSet};

pub const METRICS_HEADER: [&str; 11] = [
    "seed", "step", "method", "mse", "mmd2", "design", "score", "B", "C", "A", "Ahat",
];

/// Oracle-mode diagnostics attached to a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowDiagnostics {
    pub b: f64,
    pub c: f64,
    pub a: f64,
    pub a_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub step: usize,
    pub method: Method,
    pub mse: f64,
    pub mmd2: f64,
    pub design: Vec<f64>,
    pub score: Option<f64>,
    pub diagnostics: Option<RowDiagnostics>,
}

impl MetricsRow {
    pub fn to_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let d = self.diagnostics;
        vec![
            self.seed.to_string(),
            self.step.to_string(),
            self.method.to_string(),
            self.mse.to_string(),
            self.mmd2.to_string(),
            self.design
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(";"),
            opt(self.score),
            opt(d.map(|d| d.b)),
            opt(d.map(|d| d.c)),
            opt(d.map(|d| d.a)),
            opt(d.map(|d| d.a_hat)),
        ]
    }
}

/// Appends rows to `metrics.csv`, flushing after each so an interrupted run
/// leaves a parseable prefix.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path)?;
        inner.write_record(METRICS_HEADER)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.write_record(row.to_record())?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        let file = self
            .inner
            .into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        file.sync_all()?;
        Ok(())
    }
}

/// `(1/D) sum_d (1/N) sum_i (f_hat(x_d) - y_{d,i})^2` with `N = reps` fresh
/// responses per test design.
pub fn compute_mse(
    f_hat: impl Fn(&[f64]) -> f64,
    test: &SampleSet,
    sample_response: impl Fn(&[f64], &mut RngStream) -> f64,
    reps: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if reps == 0 {
        return usage("MSE needs at least one response per design");
    }
    let mut total = 0.0;
    for x in test.points() {
        let pred = f_hat(x);
        let mut acc = 0.0;
        for _ in 0..reps {
            let y = sample_response(x, rng);
            acc += (pred - y).powi(2);
        }
        total += acc / reps as f64;
    }
    Ok(total / test.len() as f64)
}

/// Write any displayable table; used for plot summaries.
pub(crate) fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    w.into_inner()
        .map_err(|e| std::io::Error::other(e.to_string()))?
        .flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> SampleSet {
        SampleSet::from_scalars(&(0..50).map(|i| -4.0 + 0.16 * i as f64).collect::<Vec<_>>())
            .unwrap()
    }

    fn f_star(x: &[f64]) -> f64 {
        1.0 + 2.0 * x[0] - 0.5 * x[0] * x[0]
    }

    #[test]
    fn exact_predictor_without_noise() {
        let mse = compute_mse(
            f_star,
            &sample(),
            |x, _| f_star(x),
            3,
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(mse, 0.0);
        let off = compute_mse(
            |x| f_star(x) + 1.0,
            &sample(),
            |x, _| f_star(x),
            3,
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert_relative_eq!(off, 1.0, epsilon = 1e-12);
        assert!(compute_mse(
            f_star,
            &sample(),
            |x, _| f_star(x),
            0,
            &mut RngStream::new(0, 0)
        )
        .is_err());
    }

    #[test]
    fn noise_floor() {
        let v: f64 = 0.3;
        let mse = compute_mse(
            f_star,
            &sample(),
            |x, rng| rng.normal(f_star(x), v.sqrt()),
            2000,
            &mut RngStream::new(1, 0),
        )
        .unwrap();
        // 100000 squared normals: relative sd sqrt(2 / 1e5)
        assert!((mse - v).abs() < 4.0 * v * (2.0f64 / 1e5).sqrt(), "{mse}");
    }

    #[test]
    fn record_layout() {
        let row = MetricsRow {
            seed: 3,
            step: 1,
            method: Method::RideaOracle,
            mse: 0.25,
            mmd2: 0.5,
            design: vec![1.0, -2.5],
            score: None,
            diagnostics: None,
        };
        assert_eq!(
            row.to_record(),
            vec![
                "3",
                "1",
                "ridea-oracle",
                "0.25",
                "0.5",
                "1;-2.5",
                "",
                "",
                "",
                "",
                ""
            ]
        );
        let with = MetricsRow {
            score: Some(1.5),
            diagnostics: Some(RowDiagnostics {
                b: 1.0,
                c: 2.0,
                a: -0.5,
                a_hat: 0.125,
            }),
            ..row
        };
        assert_eq!(&with.to_record()[6..], &["1.5", "1", "2", "-0.5", "0.125"]);
    }
}
