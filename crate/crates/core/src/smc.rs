//! Sequential Monte Carlo over the hyperparameters of a parametric spectrum.
//!
//! Weights are updated from raw binomial counts in log space, one filter at a
//! time. When the effective sample size drops below a threshold the ensemble is
//! rejuvenated with a Liu–West kernel resampler that keeps particles inside the
//! model's support.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterFunction;
use crate::forward::{chi, outcome_log_probabilities, MeasurementRecord};
use crate::gp::DesignMatrix;
use crate::grid::FrequencyGrid;
use crate::linalg::{dot, Cholesky, JitterPolicy, Matrix};
use crate::scalar::Real;
use crate::spectra::{evaluate_one_on_f, sample_hyperprior, HyperPrior, OneOnFParams, SpectrumVector};

/// A spectrum family `S(ω; θ)` with a prior over `θ`.
pub trait SpectralModel<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn parameter_names(&self) -> Vec<&'static str>;

    /// Writes `S(ω_k; θ)` for every grid frequency into `out`.
    fn spectrum_into(&self, theta: &[T], omegas: &[T], out: &mut [T]);

    fn in_support(&self, theta: &[T]) -> bool;

    /// Moves an out-of-support point onto the boundary of the support.
    fn clamp_to_support(&self, theta: &mut [T]);

    fn sample_prior(&self, rng: &mut dyn RngCore, out: &mut [T]);

    /// Coordinate holding the spectral exponent α, if the model has one.
    fn exponent_index(&self) -> Option<usize> {
        None
    }

    fn spectrum(&self, theta: &[T], grid: &FrequencyGrid<T>) -> SpectrumVector<T> {
        let mut out = vec![T::zero(); grid.len()];
        self.spectrum_into(theta, grid.omegas(), &mut out);
        SpectrumVector::new(out)
    }
}

/// `θ = (A, α, c)` under a [`HyperPrior`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneOnFModel {
    pub prior: HyperPrior,
}

impl OneOnFModel {
    pub fn new(prior: HyperPrior) -> Result<Self> {
        prior.validate()?;
        Ok(Self { prior })
    }

    fn floor_amplitude(&self) -> f64 {
        1e-12 * self.prior.amplitude_mean
    }

    fn floor_cutoff(&self) -> f64 {
        self.prior.cutoff_shift.max(1e-12)
    }
}

impl<T: Real> SpectralModel<T> for OneOnFModel {
    fn dim(&self) -> usize {
        3
    }

    fn parameter_names(&self) -> Vec<&'static str> {
        vec!["A", "alpha", "c"]
    }

    fn spectrum_into(&self, theta: &[T], omegas: &[T], out: &mut [T]) {
        let p = OneOnFParams {
            amplitude: theta[0],
            exponent: theta[1],
            cutoff: theta[2],
        };
        for (o, &w) in out.iter_mut().zip(omegas) {
            *o = p.value_at(w);
        }
    }

    fn in_support(&self, theta: &[T]) -> bool {
        let [a, alpha, c] = [theta[0], theta[1], theta[2]].map(|v| v.to_f64_lossy());
        a > 0.0
            && alpha >= self.prior.alpha_low
            && alpha <= self.prior.alpha_high
            && c >= self.prior.cutoff_shift
            && c > 0.0
            && a.is_finite()
            && c.is_finite()
    }

    fn clamp_to_support(&self, theta: &mut [T]) {
        theta[0] = theta[0].max(T::lit(self.floor_amplitude()));
        theta[1] = theta[1]
            .max(T::lit(self.prior.alpha_low))
            .min(T::lit(self.prior.alpha_high));
        theta[2] = theta[2].max(T::lit(self.floor_cutoff()));
    }

    fn sample_prior(&self, rng: &mut dyn RngCore, out: &mut [T]) {
        let p: OneOnFParams<T> = sample_hyperprior(&self.prior, rng);
        out.copy_from_slice(&p.to_vec());
    }

    fn exponent_index(&self) -> Option<usize> {
        Some(1)
    }
}

/// `θ = (α)` with fixed amplitude and cutoff, `α ~ Uniform[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentOnlyModel {
    pub amplitude: f64,
    pub cutoff: f64,
    pub alpha_low: f64,
    pub alpha_high: f64,
}

impl Default for ExponentOnlyModel {
    fn default() -> Self {
        Self {
            amplitude: 10.0,
            cutoff: 3.0,
            alpha_low: 0.5,
            alpha_high: 1.0,
        }
    }
}

impl<T: Real> SpectralModel<T> for ExponentOnlyModel {
    fn dim(&self) -> usize {
        1
    }

    fn parameter_names(&self) -> Vec<&'static str> {
        vec!["alpha"]
    }

    fn spectrum_into(&self, theta: &[T], omegas: &[T], out: &mut [T]) {
        let p = OneOnFParams {
            amplitude: T::lit(self.amplitude),
            exponent: theta[0],
            cutoff: T::lit(self.cutoff),
        };
        for (o, &w) in out.iter_mut().zip(omegas) {
            *o = p.value_at(w);
        }
    }

    fn in_support(&self, theta: &[T]) -> bool {
        let a = theta[0].to_f64_lossy();
        a >= self.alpha_low && a <= self.alpha_high
    }

    fn clamp_to_support(&self, theta: &mut [T]) {
        theta[0] = theta[0].max(T::lit(self.alpha_low)).min(T::lit(self.alpha_high));
    }

    fn sample_prior(&self, rng: &mut dyn RngCore, out: &mut [T]) {
        let u: f64 = rng.random();
        out[0] = T::lit(self.alpha_low + (self.alpha_high - self.alpha_low) * u);
    }

    fn exponent_index(&self) -> Option<usize> {
        Some(0)
    }
}

/// Weighted particles, stored row-major as `n × dim`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleEnsemble<T> {
    dim: usize,
    particles: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> ParticleEnsemble<T> {
    /// Builds an ensemble; weights are renormalized.
    pub fn new(dim: usize, particles: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if dim == 0 || !particles.len().is_multiple_of(dim) {
            return Err(Error::contract("particle storage is not a whole number of rows"));
        }
        let n = particles.len() / dim;
        if n == 0 || weights.len() != n {
            return Err(Error::contract(format!("{n} particles but {} weights", weights.len())));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::contract("weights must be finite and nonnegative"));
        }
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::contract("weights sum to zero"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            dim,
            particles,
            weights,
        })
    }

    pub fn uniform(dim: usize, particles: Vec<T>) -> Result<Self> {
        let n = particles.len().checked_div(dim).unwrap_or(0);
        Self::new(dim, particles, vec![T::one(); n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particle(&self, i: usize) -> &[T] {
        &self.particles[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> &[T] {
        &self.particles
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

pub fn init_ensemble<T: Real, M: SpectralModel<T> + ?Sized>(
    model: &M,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<ParticleEnsemble<T>> {
    if n < 2 {
        return Err(Error::contract(format!(
            "an ensemble needs at least 2 particles, got {n}"
        )));
    }
    let d = model.dim();
    let mut particles = vec![T::zero(); n * d];
    for row in particles.chunks_exact_mut(d) {
        model.sample_prior(rng, row);
    }
    ParticleEnsemble::uniform(d, particles)
}

/// `1/Σ w_i²`.
pub fn effective_sample_size<T: Real>(ensemble: &ParticleEnsemble<T>) -> T {
    T::one() / ensemble.weights.iter().map(|&w| w * w).sum::<T>()
}

/// Weighted mean and covariance of the particles.
pub fn posterior_summary<T: Real>(ensemble: &ParticleEnsemble<T>) -> (Vec<T>, Matrix<T>) {
    let d = ensemble.dim;
    let mut mean = vec![T::zero(); d];
    for (i, &w) in ensemble.weights.iter().enumerate() {
        for (m, &x) in mean.iter_mut().zip(ensemble.particle(i)) {
            *m = *m + w * x;
        }
    }
    let mut cov = Matrix::zeros(d, d);
    for (i, &w) in ensemble.weights.iter().enumerate() {
        let x = ensemble.particle(i);
        for a in 0..d {
            let da = x[a] - mean[a];
            for b in a..d {
                cov[(a, b)] = cov[(a, b)] + w * da * (x[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    (mean, cov)
}

/// Systematic resampling: `n` parent indices with multiplicities ∝ weights.
fn systematic_parents<T: Real>(weights: &[T], rng: &mut dyn RngCore) -> Vec<usize> {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let start: f64 = rng.random::<f64>() * step;
    let mut parents = Vec::with_capacity(n);
    let mut cumulative = weights[0].to_f64_lossy();
    let mut j = 0;
    for i in 0..n {
        let u = start + i as f64 * step;
        while u > cumulative && j + 1 < n {
            j += 1;
            cumulative += weights[j].to_f64_lossy();
        }
        parents.push(j);
    }
    parents
}

/// Liu–West resampling with contraction `a`. Returns the new uniformly
/// weighted ensemble and the number of particles that had to be clamped
/// onto the support after `max_redraws` rejected proposals.
pub fn resample<T: Real, M: SpectralModel<T> + ?Sized>(
    ensemble: &ParticleEnsemble<T>,
    model: &M,
    contraction: f64,
    max_redraws: usize,
    rng: &mut dyn RngCore,
) -> Result<(ParticleEnsemble<T>, usize)> {
    if !(contraction > 0.0 && contraction <= 1.0) {
        return Err(Error::contract(format!(
            "contraction must lie in (0, 1], got {contraction}"
        )));
    }
    let d = ensemble.dim;
    let n = ensemble.len();
    let first = ensemble.particle(0);
    if (1..n).all(|i| ensemble.particle(i) == first) {
        return Ok((ParticleEnsemble::uniform(d, first.repeat(n))?, 0));
    }
    let (mean, cov) = posterior_summary(ensemble);
    let a = T::lit(contraction);
    let spread = cov.scale(T::lit(1.0 - contraction * contraction));
    let factor = match Cholesky::new(&spread, JitterPolicy::default()) {
        Ok(c) => c.lower().clone(),
        // fall back to independent coordinates
        Err(_) => Matrix::diagonal(
            &spread
                .diag()
                .iter()
                .map(|v| v.max(T::zero()).sqrt())
                .collect::<Vec<_>>(),
        ),
    };
    let noise_free = factor.max_abs() == T::zero();

    let parents = systematic_parents(&ensemble.weights, rng);
    let mut particles = Vec::with_capacity(n * d);
    let mut clamped = 0;
    let mut z = vec![T::zero(); d];
    let mut proposal = vec![T::zero(); d];
    for &p in &parents {
        let parent = ensemble.particle(p);
        let centre: Vec<T> = parent
            .iter()
            .zip(&mean)
            .map(|(&x, &m)| a * x + (T::one() - a) * m)
            .collect();
        let mut accepted = false;
        for _ in 0..=max_redraws {
            for v in z.iter_mut() {
                let s: f64 = StandardNormal.sample(rng);
                *v = T::lit(s);
            }
            for (r, slot) in proposal.iter_mut().enumerate() {
                *slot = centre[r] + dot(&factor.row(r)[..=r], &z[..=r]);
            }
            if model.in_support(&proposal) {
                accepted = true;
                break;
            }
            if noise_free {
                break;
            }
        }
        if !accepted {
            model.clamp_to_support(&mut proposal);
            clamped += 1;
        }
        particles.extend_from_slice(&proposal);
    }
    Ok((ParticleEnsemble::uniform(d, particles)?, clamped))
}

/// Multiplies weights by `exp(log_likelihood)` with max-subtraction and renormalizes.
pub(crate) fn reweight<T: Real>(weights: &mut [T], log_likelihood: &[T]) -> Result<()> {
    let mut log_w: Vec<T> = weights
        .iter()
        .zip(log_likelihood)
        .map(|(&w, &l)| {
            let v = w.ln() + l;
            if v.is_nan() {
                T::neg_infinity()
            } else {
                v
            }
        })
        .collect();
    let max = log_w.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        let finite = log_likelihood
            .iter()
            .filter(|l| l.is_finite())
            .map(|l| l.to_f64_lossy());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(l), hi.max(l)));
        return Err(Error::Collapse {
            min_log_likelihood: if lo.is_finite() { lo } else { f64::NEG_INFINITY },
            max_log_likelihood: if hi.is_finite() { hi } else { f64::NEG_INFINITY },
        });
    }
    for v in log_w.iter_mut() {
        *v = (*v - max).exp();
    }
    let total: T = log_w.iter().copied().sum();
    for (w, v) in weights.iter_mut().zip(log_w) {
        *w = v / total;
    }
    Ok(())
}

/// `χ(S(θ), F)` for a `1/f^α` parameter vector by the shared quadrature.
pub fn particle_chi<T: Real>(
    theta: &OneOnFParams<T>,
    filter: &FilterFunction<T>,
    grid: &FrequencyGrid<T>,
) -> Result<T> {
    chi(&evaluate_one_on_f(theta, grid), filter, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmcConfig {
    pub n_particles: usize,
    /// Resample when `ESS < resample_threshold · n`.
    pub resample_threshold: f64,
    pub contraction: f64,
    pub max_redraws: usize,
}

impl Default for SmcConfig {
    fn default() -> Self {
        Self {
            n_particles: 5000,
            resample_threshold: 0.5,
            contraction: 0.98,
            max_redraws: 100,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::Config(format!(
                "n_particles must be >= 2, got {}",
                self.n_particles
            )));
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return Err(Error::Config(format!(
                "resample_threshold must lie in [0, 1], got {}",
                self.resample_threshold
            )));
        }
        if !(self.contraction > 0.0 && self.contraction <= 1.0) {
            return Err(Error::Config(format!(
                "contraction must lie in (0, 1], got {}",
                self.contraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SmcDiagnostics {
    pub ess_history: Vec<f64>,
    pub resample_count: usize,
    pub clamp_count: usize,
}

/// JSON-facing posterior summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmcSummary {
    pub parameters: Vec<&'static str>,
    pub theta_hat: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub ess_history: Vec<f64>,
    pub resample_count: usize,
    pub clamp_count: usize,
}

/// An inference run: model, ensemble and a per-particle spectrum cache.
pub struct Smc<'a, T: Real, M: SpectralModel<T> + ?Sized> {
    model: &'a M,
    config: SmcConfig,
    grid: &'a FrequencyGrid<T>,
    design: &'a DesignMatrix<T>,
    ensemble: ParticleEnsemble<T>,
    spectra: Option<Vec<T>>,
    diagnostics: SmcDiagnostics,
}

impl<'a, T: Real, M: SpectralModel<T> + ?Sized> Smc<'a, T, M> {
    /// Starts from `config.n_particles` prior draws.
    pub fn new(
        model: &'a M,
        config: SmcConfig,
        grid: &'a FrequencyGrid<T>,
        design: &'a DesignMatrix<T>,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        config.validate()?;
        let ensemble = init_ensemble(model, config.n_particles, rng)?;
        Self::from_ensemble(model, config, grid, design, ensemble)
    }

    pub fn from_ensemble(
        model: &'a M,
        config: SmcConfig,
        grid: &'a FrequencyGrid<T>,
        design: &'a DesignMatrix<T>,
        ensemble: ParticleEnsemble<T>,
    ) -> Result<Self> {
        config.validate()?;
        if ensemble.dim() != model.dim() {
            return Err(Error::contract("ensemble and model dimensions differ"));
        }
        if design.matrix.cols() != grid.len() {
            return Err(Error::contract("design matrix and grid differ in size"));
        }
        Ok(Self {
            model,
            config,
            grid,
            design,
            ensemble,
            spectra: None,
            diagnostics: SmcDiagnostics::default(),
        })
    }

    pub fn ensemble(&self) -> &ParticleEnsemble<T> {
        &self.ensemble
    }

    pub fn diagnostics(&self) -> &SmcDiagnostics {
        &self.diagnostics
    }

    fn spectra(&mut self) -> &[T] {
        if self.spectra.is_none() {
            let m = self.grid.len();
            let mut cache = vec![T::zero(); self.ensemble.len() * m];
            for (i, row) in cache.chunks_exact_mut(m).enumerate() {
                self.model
                    .spectrum_into(self.ensemble.particle(i), self.grid.omegas(), row);
            }
            self.spectra = Some(cache);
        }
        self.spectra.as_deref().expect("cache filled above")
    }

    /// Bayes update with every entry of `record`, resampling between filters
    /// whenever the effective sample size falls below threshold.
    pub fn update(&mut self, record: &MeasurementRecord, rng: &mut dyn RngCore) -> Result<()> {
        record.validate()?;
        let rows = record
            .entries
            .iter()
            .map(|e| {
                self.design
                    .n_pulses
                    .iter()
                    .position(|&p| p == e.p)
                    .ok_or_else(|| Error::contract(format!("record has p = {} but the bank does not", e.p)))
            })
            .collect::<Result<Vec<_>>>()?;
        if record.shots == 0 {
            return Ok(());
        }
        let m = self.grid.len();
        let n_shots = record.shots;
        for (entry, &row) in record.entries.iter().zip(&rows) {
            let g = self.design.matrix.row(row).to_vec();
            let (ones, zeros) = (entry.k, n_shots - entry.k);
            let (k1, k0) = (T::from_count(ones), T::from_count(zeros));
            let ll: Vec<T> = self
                .spectra()
                .chunks_exact(m)
                .map(|s| {
                    let c = dot(&g, s).max(T::zero());
                    let (l1, l0) = outcome_log_probabilities(c);
                    let mut v = T::zero();
                    if ones > 0 {
                        v = v + k1 * l1;
                    }
                    if zeros > 0 {
                        v = v + k0 * l0;
                    }
                    v
                })
                .collect();
            reweight(&mut self.ensemble.weights, &ll)?;
            let ess = effective_sample_size(&self.ensemble).to_f64_lossy();
            self.diagnostics.ess_history.push(ess);
            if ess < self.config.resample_threshold * self.ensemble.len() as f64 {
                let (next, clamped) = resample(
                    &self.ensemble,
                    self.model,
                    self.config.contraction,
                    self.config.max_redraws,
                    rng,
                )?;
                self.ensemble = next;
                self.spectra = None;
                self.diagnostics.resample_count += 1;
                self.diagnostics.clamp_count += clamped;
            }
        }
        Ok(())
    }

    pub fn posterior_summary(&self) -> (Vec<T>, Matrix<T>) {
        posterior_summary(&self.ensemble)
    }

    pub fn report_spectrum_at_mean(&self) -> SpectrumVector<T> {
        report_spectrum_at_mean(&self.ensemble, self.model, self.grid)
    }

    pub fn report_mean_spectrum(&mut self) -> SpectrumVector<T> {
        let m = self.grid.len();
        let weights = self.ensemble.weights.clone();
        let mut acc = vec![T::zero(); m];
        for (s, &w) in self.spectra().chunks_exact(m).zip(&weights) {
            for (a, &v) in acc.iter_mut().zip(s) {
                *a = *a + w * v;
            }
        }
        SpectrumVector::new(acc)
    }

    pub fn summary(&self) -> SmcSummary {
        let (mean, cov) = self.posterior_summary();
        let d = mean.len();
        SmcSummary {
            parameters: self.model.parameter_names(),
            theta_hat: mean.iter().map(|v| v.to_f64_lossy()).collect(),
            covariance: (0..d)
                .map(|i| (0..d).map(|j| cov[(i, j)].to_f64_lossy()).collect())
                .collect(),
            ess_history: self.diagnostics.ess_history.clone(),
            resample_count: self.diagnostics.resample_count,
            clamp_count: self.diagnostics.clamp_count,
        }
    }
}

/// `S(ω; θ̂)` with `θ̂` the posterior mean.
pub fn report_spectrum_at_mean<T: Real, M: SpectralModel<T> + ?Sized>(
    ensemble: &ParticleEnsemble<T>,
    model: &M,
    grid: &FrequencyGrid<T>,
) -> SpectrumVector<T> {
    let (mean, _) = posterior_summary(ensemble);
    model.spectrum(&mean, grid)
}

/// `Σ_i w_i S(ω; θ_i)`.
pub fn report_mean_spectrum<T: Real, M: SpectralModel<T> + ?Sized>(
    ensemble: &ParticleEnsemble<T>,
    model: &M,
    grid: &FrequencyGrid<T>,
) -> SpectrumVector<T> {
    let m = grid.len();
    let mut acc = vec![T::zero(); m];
    let mut row = vec![T::zero(); m];
    for (i, &w) in ensemble.weights.iter().enumerate() {
        model.spectrum_into(ensemble.particle(i), grid.omegas(), &mut row);
        for (a, &v) in acc.iter_mut().zip(&row) {
            *a = *a + w * v;
        }
    }
    SpectrumVector::new(acc)
}
