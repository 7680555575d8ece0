//! Randomized-truth benchmark: draw a spectrum from a scenario prior, simulate
//! single-shot data, run every enabled estimator and record its loss.
//!
//! Trial `i` of a run with master seed `s` uses `ChaCha8Rng` seeded with `s`
//! on stream `i`, so trials are independent and can run in any order.

mod report;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FilterBank, FilterSpec};
use crate::forward::{chi_hat, simulate_record, variance_floor, ChiVector, MeasurementRecord, RecordEntry};
use crate::gp::{build_design_matrix, gp_posterior, DesignMatrix, GaussianProcessState, GpPrior, GpSampler};
use crate::grid::{trapezoid, FrequencyGrid, GridSpec};
use crate::naive::naive_estimate;
use crate::smc::{OneOnFModel, Smc, SmcConfig, SpectralModel};
use crate::spectra::{
    evaluate_one_on_f, prior_mean_spectrum, sample_hyperprior, HyperPrior, OneOnFParams, SpectrumVector,
};

pub use report::{
    aggregate, bias_curves, log_histogram, quantile, write_alpha_csv, write_bias_csv, write_histograms_csv,
    write_trials_csv, AlphaSummary, BenchReport, BiasCurve, Histogram, LossSummary, ShotsReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Truths are draws from the GP prior, clipped at zero.
    #[serde(rename = "gp-truth")]
    GpTruth,
    /// Truths are `A/(ω^α + c)` with `(A, α, c)` from the hyperprior.
    #[serde(rename = "one-on-f", alias = "one-on-f-truth")]
    OneOnF,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scenario::GpTruth => "gp-truth",
            Scenario::OneOnF => "one-on-f",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Naive,
    Gp,
    /// Posterior-mean spectrum `E[S(ω; θ)]`.
    SmcMean,
    /// Spectrum at the posterior-mean hyperparameters.
    SmcAtMean,
    /// The scenario's prior mean spectrum, used as a no-data baseline.
    Prior,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Naive,
        Estimator::Gp,
        Estimator::SmcMean,
        Estimator::SmcAtMean,
        Estimator::Prior,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Naive => "naive",
            Estimator::Gp => "gp",
            Estimator::SmcMean => "smc-mean",
            Estimator::SmcAtMean => "smc-at-mean",
            Estimator::Prior => "prior",
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorToggles {
    pub naive: bool,
    pub gp: bool,
    pub smc: bool,
}

impl Default for EstimatorToggles {
    fn default() -> Self {
        Self {
            naive: true,
            gp: true,
            smc: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub scenario: Scenario,
    pub n_trials: usize,
    /// Shots per filter; every setting gets its own simulated record.
    pub shots: Vec<u64>,
    pub filters: FilterSpec,
    /// Defaults to the cutoff implied by the filter bank.
    pub grid: Option<GridSpec>,
    /// Truth prior in the GP scenario; kernel of the GP estimator in both.
    pub gp_prior: GpPrior,
    pub hyperprior: HyperPrior,
    pub smc: SmcConfig,
    pub estimators: EstimatorToggles,
    pub seed: u64,
    pub histogram_bins: usize,
    /// Monte Carlo draws for the `1/f` prior mean spectrum.
    pub prior_mean_samples: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::GpTruth,
            n_trials: 100,
            shots: vec![1000],
            filters: FilterSpec::default(),
            grid: None,
            gp_prior: GpPrior::default(),
            hyperprior: HyperPrior::default(),
            smc: SmcConfig::default(),
            estimators: EstimatorToggles::default(),
            seed: 0,
            histogram_bins: 30,
            prior_mean_samples: 20_000,
        }
    }
}

impl BenchConfig {
    /// Defaults for a scenario: no SMC on GP truths, `N ∈ {100, 1000}` for `1/f`.
    pub fn for_scenario(scenario: Scenario) -> Self {
        match scenario {
            Scenario::GpTruth => Self {
                estimators: EstimatorToggles {
                    smc: false,
                    ..EstimatorToggles::default()
                },
                ..Self::default()
            },
            Scenario::OneOnF => Self {
                scenario,
                shots: vec![100, 1000],
                ..Self::default()
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid
            .unwrap_or_else(|| GridSpec::default_for(self.filters.p_max, self.filters.total_time))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be >= 1".into()));
        }
        if self.shots.is_empty() {
            return Err(Error::Config("at least one shots setting is required".into()));
        }
        if self.histogram_bins == 0 {
            return Err(Error::Config("histogram_bins must be >= 1".into()));
        }
        if self.prior_mean_samples == 0 {
            return Err(Error::Config("prior_mean_samples must be >= 1".into()));
        }
        if self.filters.p_max == 0 || !(self.filters.total_time > 0.0) {
            return Err(Error::Config("filter bank needs p_max >= 1 and total_time > 0".into()));
        }
        self.gp_prior.kernel.validate()?;
        self.hyperprior.validate()?;
        self.smc.validate()
    }
}

/// What the trial's true spectrum was.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Truth {
    GpSample {
        /// Grid points set to zero by clipping.
        clipped_points: usize,
    },
    OneOnF {
        #[serde(rename = "A")]
        amplitude: f64,
        alpha: f64,
        c: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateOutcome {
    pub estimator: Estimator,
    pub loss: Option<f64>,
    /// `Ŝ − S` on the grid.
    pub bias: Option<Vec<f64>>,
    pub error: Option<String>,
}

/// Exponent estimate from the SMC posterior mean against the prior mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaOutcome {
    pub truth: f64,
    pub estimate: f64,
    pub prior_mean: f64,
    pub loss: f64,
    pub prior_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotsOutcome {
    pub shots: u64,
    /// Entries whose success fraction was raised before linearization.
    pub clamped_entries: usize,
    pub estimates: Vec<EstimateOutcome>,
    pub alpha: Option<AlphaOutcome>,
}

impl ShotsOutcome {
    pub fn get(&self, estimator: Estimator) -> Option<&EstimateOutcome> {
        self.estimates.iter().find(|e| e.estimator == estimator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial_index: usize,
    pub seed: u64,
    pub truth: Truth,
    pub outcomes: Vec<ShotsOutcome>,
}

/// `∫ |S − Ŝ|² dω` on the grid.
pub fn spectrum_loss(
    truth: &SpectrumVector<f64>,
    estimate: &SpectrumVector<f64>,
    grid: &FrequencyGrid<f64>,
) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::contract("truth and estimate lengths differ"));
    }
    let sq: Vec<f64> = truth
        .values
        .iter()
        .zip(&estimate.values)
        .map(|(s, e)| (s - e).powi(2))
        .collect();
    trapezoid(&sq, grid)
}

/// Everything shared by the trials of one run.
pub struct BenchContext {
    config: BenchConfig,
    grid: FrequencyGrid<f64>,
    bank: FilterBank<f64>,
    design: DesignMatrix<f64>,
    gp_prior: GaussianProcessState<f64>,
    truth_sampler: Option<GpSampler<f64>>,
    prior_spectrum: SpectrumVector<f64>,
    model: OneOnFModel,
}

impl BenchContext {
    pub fn new(config: BenchConfig) -> Result<Self> {
        config.validate()?;
        let grid: FrequencyGrid<f64> = config.grid_spec().build()?;
        let bank = config.filters.build(&grid)?;
        let design = build_design_matrix(&bank, &grid)?;
        let model = OneOnFModel::new(config.hyperprior)?;
        let (gp_prior, truth_sampler, prior_spectrum) = match config.scenario {
            Scenario::GpTruth => {
                let state = config.gp_prior.state(&grid)?;
                let sampler = GpSampler::new(&state)?;
                let mean = state.mean_spectrum();
                (state, Some(sampler), mean)
            }
            Scenario::OneOnF => {
                // dedicated stream, disjoint from every trial's
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(u64::MAX);
                let mean = prior_mean_spectrum(&config.hyperprior, &grid, config.prior_mean_samples, &mut rng)?;
                let kernel = crate::gp::build_kernel(&config.gp_prior.kernel, &grid)?;
                let state = GaussianProcessState::new(mean.values.clone(), kernel)?;
                (state, None, mean)
            }
        };
        Ok(Self {
            config,
            grid,
            bank,
            design,
            gp_prior,
            truth_sampler,
            prior_spectrum,
            model,
        })
    }

    pub fn config(&self) -> &BenchConfig {
        &self.config
    }

    pub fn grid(&self) -> &FrequencyGrid<f64> {
        &self.grid
    }

    pub fn bank(&self) -> &FilterBank<f64> {
        &self.bank
    }

    pub fn prior_spectrum(&self) -> &SpectrumVector<f64> {
        &self.prior_spectrum
    }

    pub fn trial_rng(&self, trial_index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(trial_index as u64);
        rng
    }

    pub fn run_trial(&self, trial_index: usize) -> Result<TrialResult> {
        let mut rng = self.trial_rng(trial_index);
        let (truth_spectrum, truth) = match self.config.scenario {
            Scenario::GpTruth => {
                let sampler = self.truth_sampler.as_ref().expect("sampler built for GP scenario");
                let mut s = sampler.sample(&mut rng);
                let clipped_points = s.clip_nonnegative();
                (s, Truth::GpSample { clipped_points })
            }
            Scenario::OneOnF => {
                let theta: OneOnFParams<f64> = sample_hyperprior(&self.config.hyperprior, &mut rng);
                (
                    evaluate_one_on_f(&theta, &self.grid),
                    Truth::OneOnF {
                        amplitude: theta.amplitude,
                        alpha: theta.exponent,
                        c: theta.cutoff,
                    },
                )
            }
        };

        let mut outcomes = Vec::with_capacity(self.config.shots.len());
        for &shots in &self.config.shots {
            let record = if shots == 0 {
                MeasurementRecord {
                    seed: None,
                    shots: 0,
                    entries: self.bank.iter().map(|f| RecordEntry { p: f.n_pulses, k: 0 }).collect(),
                }
            } else {
                simulate_record(&truth_spectrum, &self.bank, &self.grid, shots, &mut rng)?
            };
            outcomes.push(self.run_estimators(&truth_spectrum, &truth, &record, &mut rng)?);
        }
        Ok(TrialResult {
            trial_index,
            seed: self.config.seed,
            truth,
            outcomes,
        })
    }

    fn run_estimators(
        &self,
        truth: &SpectrumVector<f64>,
        descriptor: &Truth,
        record: &MeasurementRecord,
        rng: &mut ChaCha8Rng,
    ) -> Result<ShotsOutcome> {
        let toggles = self.config.estimators;
        let chis: Result<ChiVector<f64>> = chi_hat(record);
        let mut estimates = Vec::new();
        let mut alpha = None;

        let score =
            |estimator: Estimator, est: std::result::Result<SpectrumVector<f64>, String>| -> Result<EstimateOutcome> {
                Ok(match est {
                    Ok(s) => EstimateOutcome {
                        estimator,
                        loss: Some(spectrum_loss(truth, &s, &self.grid)?),
                        bias: Some(s.values.iter().zip(&truth.values).map(|(e, t)| e - t).collect()),
                        error: None,
                    },
                    Err(error) => EstimateOutcome {
                        estimator,
                        loss: None,
                        bias: None,
                        error: Some(error),
                    },
                })
            };
        let linearized = chis.as_ref().map_err(|e| e.to_string());

        if toggles.naive {
            let est = linearized.clone().and_then(|c| {
                naive_estimate(c, &self.bank, &self.grid)
                    .map(|n| n.spectrum)
                    .map_err(|e| e.to_string())
            });
            estimates.push(score(Estimator::Naive, est)?);
        }
        if toggles.gp {
            let est = linearized.clone().and_then(|c| {
                let floored = c.clone().with_variance_floor(variance_floor(record.shots));
                gp_posterior(&self.gp_prior, &self.design, &floored)
                    .map(|post| post.mean_spectrum())
                    .map_err(|e| e.to_string())
            });
            estimates.push(score(Estimator::Gp, est)?);
        }
        if toggles.smc {
            match self.run_smc(record, rng) {
                Ok((mean, at_mean, alpha_hat)) => {
                    estimates.push(score(Estimator::SmcMean, Ok(mean))?);
                    estimates.push(score(Estimator::SmcAtMean, Ok(at_mean))?);
                    if let Truth::OneOnF { alpha: a, .. } = descriptor {
                        let prior_mean = self.config.hyperprior.alpha_mean();
                        alpha = Some(AlphaOutcome {
                            truth: *a,
                            estimate: alpha_hat,
                            prior_mean,
                            loss: (a - alpha_hat).powi(2),
                            prior_loss: (a - prior_mean).powi(2),
                        });
                    }
                }
                Err(e) => {
                    estimates.push(score(Estimator::SmcMean, Err(e.to_string()))?);
                    estimates.push(score(Estimator::SmcAtMean, Err(e.to_string()))?);
                }
            }
        }
        estimates.push(score(Estimator::Prior, Ok(self.prior_spectrum.clone()))?);

        Ok(ShotsOutcome {
            shots: record.shots,
            clamped_entries: chis.as_ref().map(|c| c.clamp_count()).unwrap_or(0),
            estimates,
            alpha,
        })
    }

    fn run_smc(
        &self,
        record: &MeasurementRecord,
        rng: &mut ChaCha8Rng,
    ) -> Result<(SpectrumVector<f64>, SpectrumVector<f64>, f64)> {
        let mut smc = Smc::new(&self.model, self.config.smc, &self.grid, &self.design, rng)?;
        smc.update(record, rng)?;
        let (theta, _) = smc.posterior_summary();
        let idx = SpectralModel::<f64>::exponent_index(&self.model).expect("1/f model has an exponent");
        Ok((smc.report_mean_spectrum(), smc.report_spectrum_at_mean(), theta[idx]))
    }

    /// Runs every trial, in parallel when `workers` allows, returning results in trial order.
    pub fn run(&self, workers: Option<usize>) -> Result<Vec<TrialResult>> {
        let n = self.config.n_trials;
        let go = || {
            (0..n)
                .into_par_iter()
                .map(|i| self.run_trial(i))
                .collect::<Result<Vec<_>>>()
        };
        match workers {
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(go),
            None => go(),
        }
    }
}

/// Convenience wrapper building a fresh context for one trial.
pub fn run_trial(config: &BenchConfig, trial_index: usize) -> Result<TrialResult> {
    BenchContext::new(config.clone())?.run_trial(trial_index)
}

/// Runs a whole configuration and aggregates it.
pub fn run_bench(config: &BenchConfig, workers: Option<usize>) -> Result<(Vec<TrialResult>, BenchReport)> {
    let ctx = BenchContext::new(config.clone())?;
    let results = ctx.run(workers)?;
    let report = aggregate(&results, config, ctx.grid())?;
    Ok((results, report))
}
