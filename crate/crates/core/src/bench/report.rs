//! Aggregation of trial results into loss statistics, histograms and bias
//! curves, plus their CSV renderings.

use std::io::Write;

use serde::Serialize;

use super::{BenchConfig, Estimator, Scenario, TrialResult};
use crate::error::{Error, Result};
use crate::grid::{trapezoid, FrequencyGrid};

/// Counts over equal-width bins of `log10(loss)`; `edges` has `counts.len() + 1` entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossSummary {
    pub estimator: Estimator,
    pub n: usize,
    pub failures: usize,
    pub median: Option<f64>,
    /// Mean over trials, i.e. the Monte Carlo Bayes risk.
    pub mean: Option<f64>,
    /// Per-trial `loss / prior loss`.
    pub ratio_median: Option<f64>,
    pub ratio_mean: Option<f64>,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSummary {
    pub n: usize,
    pub median_loss: f64,
    pub mean_loss: f64,
    pub prior_median_loss: f64,
    pub prior_mean_loss: f64,
    /// Median of per-trial `(α − α̂)² / (α − E[α])²`.
    pub median_ratio: f64,
    pub mean_ratio: f64,
}

/// Pointwise statistics of `Ŝ − S` across trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCurve {
    pub estimator: Estimator,
    pub mean: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
    /// `(1/Ω) ∫ |mean bias| dω`.
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotsReport {
    pub shots: u64,
    pub clamped_entries: usize,
    pub losses: Vec<LossSummary>,
    pub alpha: Option<AlphaSummary>,
    pub bias: Vec<BiasCurve>,
}

impl ShotsReport {
    pub fn loss(&self, estimator: Estimator) -> Option<&LossSummary> {
        self.losses.iter().find(|l| l.estimator == estimator)
    }

    pub fn bias(&self, estimator: Estimator) -> Option<&BiasCurve> {
        self.bias.iter().find(|b| b.estimator == estimator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub scenario: Scenario,
    pub n_trials: usize,
    pub seed: u64,
    pub omegas: Vec<f64>,
    pub shots: Vec<ShotsReport>,
}

impl BenchReport {
    pub fn for_shots(&self, shots: u64) -> Option<&ShotsReport> {
        self.shots.iter().find(|s| s.shots == shots)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Linear-interpolation quantile of unsorted data (`q` in `[0, 1]`).
pub fn quantile(data: &[f64], q: f64) -> Option<f64> {
    if data.is_empty() {
        return None;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

fn mean(data: &[f64]) -> Option<f64> {
    if data.is_empty() {
        None
    } else {
        Some(data.iter().sum::<f64>() / data.len() as f64)
    }
}

/// Histogram of `log10(loss)` over `range`, or over the data's own range when `None`.
/// Zero losses land in the first bin; a degenerate range is widened to ±0.5.
pub fn log_histogram(losses: &[f64], bins: usize, range: Option<(f64, f64)>) -> Histogram {
    let bins = bins.max(1);
    let logs: Vec<f64> = losses.iter().filter(|l| **l > 0.0).map(|l| l.log10()).collect();
    let (mut lo, mut hi) = range.unwrap_or_else(|| {
        logs.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
    });
    if !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (0.0, 0.0);
    }
    if hi - lo <= 0.0 {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for &l in losses {
        let idx = if l > 0.0 {
            (((l.log10() - lo) / width).floor().max(0.0) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}

/// Pointwise mean and quartiles of the bias vectors of `estimator` at `shots`.
pub fn bias_curves(
    results: &[TrialResult],
    shots: u64,
    estimator: Estimator,
    grid: &FrequencyGrid<f64>,
) -> Result<Option<BiasCurve>> {
    let biases: Vec<&Vec<f64>> = results
        .iter()
        .flat_map(|r| r.outcomes.iter().filter(|o| o.shots == shots))
        .filter_map(|o| o.get(estimator).and_then(|e| e.bias.as_ref()))
        .collect();
    if biases.is_empty() {
        return Ok(None);
    }
    let m = grid.len();
    if biases.iter().any(|b| b.len() != m) {
        return Err(Error::contract("bias vector length differs from the grid"));
    }
    let mut mean_curve = Vec::with_capacity(m);
    let mut q25 = Vec::with_capacity(m);
    let mut q75 = Vec::with_capacity(m);
    let mut column = Vec::with_capacity(biases.len());
    for k in 0..m {
        column.clear();
        column.extend(biases.iter().map(|b| b[k]));
        mean_curve.push(mean(&column).expect("non-empty"));
        q25.push(quantile(&column, 0.25).expect("non-empty"));
        q75.push(quantile(&column, 0.75).expect("non-empty"));
    }
    let abs: Vec<f64> = mean_curve.iter().map(|v| v.abs()).collect();
    let span = grid.cutoff() - grid.omegas()[0];
    Ok(Some(BiasCurve {
        estimator,
        mean_abs: trapezoid(&abs, grid)? / span,
        mean: mean_curve,
        q25,
        q75,
    }))
}

pub fn aggregate(results: &[TrialResult], config: &BenchConfig, grid: &FrequencyGrid<f64>) -> Result<BenchReport> {
    if results.is_empty() {
        return Err(Error::contract("cannot aggregate zero trials"));
    }
    let mut shots_reports = Vec::with_capacity(config.shots.len());
    for &shots in &config.shots {
        let outcomes: Vec<_> = results
            .iter()
            .flat_map(|r| r.outcomes.iter().filter(|o| o.shots == shots))
            .collect();
        let present: Vec<Estimator> = Estimator::ALL
            .into_iter()
            .filter(|e| outcomes.iter().any(|o| o.get(*e).is_some()))
            .collect();

        // one log-loss axis shared by all estimators at this shots setting
        let all_logs: Vec<f64> = outcomes
            .iter()
            .flat_map(|o| o.estimates.iter().filter_map(|e| e.loss))
            .filter(|l| *l > 0.0)
            .map(f64::log10)
            .collect();
        let range = if all_logs.is_empty() {
            None
        } else {
            Some(
                all_logs
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x))),
            )
        };

        let mut losses = Vec::with_capacity(present.len());
        let mut bias = Vec::new();
        for &est in &present {
            let mut values = Vec::new();
            let mut ratios = Vec::new();
            let mut failures = 0;
            for o in &outcomes {
                let Some(e) = o.get(est) else { continue };
                match e.loss {
                    Some(l) => {
                        values.push(l);
                        if let Some(p) = o.get(Estimator::Prior).and_then(|p| p.loss) {
                            if p > 0.0 {
                                ratios.push(l / p);
                            }
                        }
                    }
                    None => failures += 1,
                }
            }
            losses.push(LossSummary {
                estimator: est,
                n: values.len(),
                failures,
                median: quantile(&values, 0.5),
                mean: mean(&values),
                ratio_median: quantile(&ratios, 0.5),
                ratio_mean: mean(&ratios),
                histogram: log_histogram(&values, config.histogram_bins, range),
            });
            if let Some(curve) = bias_curves(results, shots, est, grid)? {
                bias.push(curve);
            }
        }

        let alphas: Vec<_> = outcomes.iter().filter_map(|o| o.alpha).collect();
        let alpha = if alphas.is_empty() {
            None
        } else {
            let loss: Vec<f64> = alphas.iter().map(|a| a.loss).collect();
            let prior: Vec<f64> = alphas.iter().map(|a| a.prior_loss).collect();
            let ratio: Vec<f64> = alphas
                .iter()
                .filter(|a| a.prior_loss > 0.0)
                .map(|a| a.loss / a.prior_loss)
                .collect();
            Some(AlphaSummary {
                n: alphas.len(),
                median_loss: quantile(&loss, 0.5).expect("non-empty"),
                mean_loss: mean(&loss).expect("non-empty"),
                prior_median_loss: quantile(&prior, 0.5).expect("non-empty"),
                prior_mean_loss: mean(&prior).expect("non-empty"),
                median_ratio: quantile(&ratio, 0.5).unwrap_or(f64::NAN),
                mean_ratio: mean(&ratio).unwrap_or(f64::NAN),
            })
        };

        shots_reports.push(ShotsReport {
            shots,
            clamped_entries: outcomes.iter().map(|o| o.clamped_entries).sum(),
            losses,
            alpha,
            bias,
        });
    }
    Ok(BenchReport {
        scenario: config.scenario,
        n_trials: results.len(),
        seed: config.seed,
        omegas: grid.omegas().to_vec(),
        shots: shots_reports,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `trial,shots,estimator,loss,error`, one row per trial, shots setting and estimator.
pub fn write_trials_csv<W: Write>(results: &[TrialResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "shots", "estimator", "loss", "error"])?;
    for r in results {
        for o in &r.outcomes {
            for e in &o.estimates {
                w.write_record([
                    r.trial_index.to_string(),
                    o.shots.to_string(),
                    e.estimator.to_string(),
                    opt(e.loss),
                    e.error.clone().unwrap_or_default(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `trial,shots,alpha_true,alpha_hat,alpha_prior,loss,prior_loss`.
pub fn write_alpha_csv<W: Write>(results: &[TrialResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "shots",
        "alpha_true",
        "alpha_hat",
        "alpha_prior",
        "loss",
        "prior_loss",
    ])?;
    for r in results {
        for o in &r.outcomes {
            if let Some(a) = o.alpha {
                w.write_record([
                    r.trial_index.to_string(),
                    o.shots.to_string(),
                    a.truth.to_string(),
                    a.estimate.to_string(),
                    a.prior_mean.to_string(),
                    a.loss.to_string(),
                    a.prior_loss.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `shots,estimator,log10_lo,log10_hi,count`.
pub fn write_histograms_csv<W: Write>(report: &BenchReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["shots", "estimator", "log10_lo", "log10_hi", "count"])?;
    for s in &report.shots {
        for l in &s.losses {
            for (i, c) in l.histogram.counts.iter().enumerate() {
                w.write_record([
                    s.shots.to_string(),
                    l.estimator.to_string(),
                    l.histogram.edges[i].to_string(),
                    l.histogram.edges[i + 1].to_string(),
                    c.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `shots,estimator,omega,mean,q25,q75`.
pub fn write_bias_csv<W: Write>(report: &BenchReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["shots", "estimator", "omega", "mean", "q25", "q75"])?;
    for s in &report.shots {
        for b in &s.bias {
            for (k, omega) in report.omegas.iter().enumerate() {
                w.write_record([
                    s.shots.to_string(),
                    b.estimator.to_string(),
                    omega.to_string(),
                    b.mean[k].to_string(),
                    b.q25[k].to_string(),
                    b.q75[k].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
