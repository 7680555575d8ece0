//! Gaussian-process regression on linearized overlaps `χ̂ ≈ G S + noise`.
//!
//! The conjugate posterior is computed in its innovation form, which only
//! factors the `J×J` matrix `G K Gᵀ + Σ` and never the (numerically
//! rank-deficient) squared-exponential prior covariance itself.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::filters::FilterBank;
use crate::forward::ChiVector;
use crate::grid::{trapezoid_weights, FrequencyGrid};
use crate::linalg::{dot, Cholesky, JitterPolicy, Matrix};
use crate::scalar::Real;
use crate::spectra::SpectrumVector;

/// Squared-exponential kernel `κ·exp(−(ω − ω′)²/δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelParams {
    pub kappa: f64,
    /// Squared correlation length, in units of ω².
    pub delta: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            kappa: 0.02,
            delta: 100.0,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("kernel kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("kernel delta must be > 0, got {}", self.delta)));
        }
        Ok(())
    }
}

pub fn build_kernel<T: Real>(params: &KernelParams, grid: &FrequencyGrid<T>) -> Result<Matrix<T>> {
    params.validate()?;
    let w = grid.omegas();
    let kappa = T::lit(params.kappa);
    let delta = T::lit(params.delta);
    Ok(Matrix::from_fn(w.len(), w.len(), |i, j| {
        let d = w[i] - w[j];
        kappa * (-(d * d) / delta).exp()
    }))
}

/// Prior mean function of the spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanFunction {
    Constant {
        value: f64,
    },
    /// `h·exp(−(ω − ω₀)²/(2s²))`.
    GaussianBump {
        height: f64,
        center: f64,
        width: f64,
    },
    /// Explicit values on the grid.
    Values {
        values: Vec<f64>,
    },
}

impl Default for MeanFunction {
    fn default() -> Self {
        MeanFunction::GaussianBump {
            height: 1.0,
            center: 40.0,
            width: 30.0,
        }
    }
}

impl MeanFunction {
    pub fn evaluate<T: Real>(&self, grid: &FrequencyGrid<T>) -> Result<Vec<T>> {
        match self {
            MeanFunction::Constant { value } => Ok(vec![T::lit(*value); grid.len()]),
            MeanFunction::GaussianBump { height, center, width } => {
                if !(*width > 0.0) {
                    return Err(Error::Config(format!("bump width must be > 0, got {width}")));
                }
                let (h, c, s) = (T::lit(*height), T::lit(*center), T::lit(*width));
                Ok(grid
                    .omegas()
                    .iter()
                    .map(|&w| {
                        let d = (w - c) / s;
                        h * (-(d * d) * T::lit(0.5)).exp()
                    })
                    .collect())
            }
            MeanFunction::Values { values } => {
                grid.check_len(values.len(), "mean function")?;
                Ok(values.iter().map(|&v| T::lit(v)).collect())
            }
        }
    }
}

/// Full prior description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct GpPrior {
    pub kernel: KernelParams,
    pub mean: MeanFunction,
}

impl GpPrior {
    pub fn state<T: Real>(&self, grid: &FrequencyGrid<T>) -> Result<GaussianProcessState<T>> {
        GaussianProcessState::new(self.mean.evaluate(grid)?, build_kernel(&self.kernel, grid)?)
    }
}

/// Mean vector and covariance of a Gaussian process restricted to the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianProcessState<T> {
    pub mean: Vec<T>,
    pub covariance: Matrix<T>,
}

impl<T: Real> GaussianProcessState<T> {
    pub fn new(mean: Vec<T>, covariance: Matrix<T>) -> Result<Self> {
        if !covariance.is_square() || covariance.rows() != mean.len() {
            return Err(Error::contract(format!(
                "GP covariance is {}x{} but the mean has {} entries",
                covariance.rows(),
                covariance.cols(),
                mean.len()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("GP mean has non-finite entries"));
        }
        Ok(Self { mean, covariance })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean_spectrum(&self) -> SpectrumVector<T> {
        SpectrumVector::new(self.mean.clone())
    }

    /// Pointwise standard deviation; tiny negative variances from rounding read as 0.
    pub fn std_dev(&self) -> Vec<T> {
        self.covariance
            .diag()
            .into_iter()
            .map(|v| v.max(T::zero()).sqrt())
            .collect()
    }
}

/// `J×M` matrix with `(G S)_j = χ(S, F_j)` under the shared trapezoidal rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    pub n_pulses: Vec<u32>,
    pub matrix: Matrix<T>,
}

impl<T: Real> DesignMatrix<T> {
    pub fn apply(&self, spectrum: &SpectrumVector<T>) -> Result<Vec<T>> {
        self.matrix.matvec(&spectrum.values)
    }

    /// Rows matching `n_pulses`, in that order.
    pub fn select(&self, n_pulses: &[u32]) -> Result<Matrix<T>> {
        let m = self.matrix.cols();
        let mut data = Vec::with_capacity(n_pulses.len() * m);
        for p in n_pulses {
            let row = self
                .n_pulses
                .iter()
                .position(|q| q == p)
                .ok_or_else(|| Error::contract(format!("no design row for p = {p}")))?;
            data.extend_from_slice(self.matrix.row(row));
        }
        Matrix::from_row_major(n_pulses.len(), m, data)
    }
}

pub fn build_design_matrix<T: Real>(bank: &FilterBank<T>, grid: &FrequencyGrid<T>) -> Result<DesignMatrix<T>> {
    let weights = trapezoid_weights(grid);
    let mut data = Vec::with_capacity(bank.len() * grid.len());
    for f in bank.iter() {
        grid.check_len(f.values.len(), "filter function")?;
        data.extend(weights.iter().zip(&f.values).map(|(&c, &v)| c * v / T::TAU()));
    }
    Ok(DesignMatrix {
        n_pulses: bank.iter().map(|f| f.n_pulses).collect(),
        matrix: Matrix::from_row_major(bank.len(), grid.len(), data)?,
    })
}

/// Conjugate update with data `χ̂ ~ N(G S, diag(σ²))`.
///
/// Equivalent to `K′ = (GᵀΣ⁻¹G + K⁻¹)⁻¹`, `μ′ = K′(GᵀΣ⁻¹χ̂ + K⁻¹μ)`, evaluated as
/// `μ′ = μ + K Gᵀ S⁻¹ (χ̂ − G μ)` and `K′ = K − K Gᵀ S⁻¹ G K` with `S = G K Gᵀ + Σ`.
pub fn gp_posterior<T: Real>(
    prior: &GaussianProcessState<T>,
    design: &DesignMatrix<T>,
    chis: &ChiVector<T>,
) -> Result<GaussianProcessState<T>> {
    let sigma2 = chis
        .sigma2
        .as_ref()
        .ok_or_else(|| Error::contract("GP update needs χ̂ variances"))?;
    if sigma2.len() != chis.len() {
        return Err(Error::contract("χ̂ and variance lengths differ"));
    }
    if let Some(j) = sigma2.iter().position(|s| !(*s > T::zero() && s.is_finite())) {
        return Err(Error::contract(format!(
            "χ̂ variance for p = {} is {}; every variance must be positive and finite",
            chis.n_pulses[j], sigma2[j]
        )));
    }
    if design.matrix.cols() != prior.len() {
        return Err(Error::contract("design matrix and GP state use different grids"));
    }
    if chis.is_empty() {
        return Ok(prior.clone());
    }
    let g = design.select(&chis.n_pulses)?;
    let k = &prior.covariance;

    let kgt = k.matmul(&g.transpose())?; // M×J
    let mut innovation = g.matmul(&kgt)?; // J×J
    for (j, &s) in sigma2.iter().enumerate() {
        innovation[(j, j)] = innovation[(j, j)] + s;
    }
    innovation.symmetrize();
    let chol = Cholesky::new(&innovation, JitterPolicy::exact_first()).map_err(|e| match e {
        Error::Factorization { size, jitter, .. } => Error::Factorization {
            what: "GP innovation matrix is not positive definite",
            size,
            jitter,
        },
        other => other,
    })?;

    let predicted = g.matvec(&prior.mean)?;
    let residual: Vec<T> = chis.chi.iter().zip(&predicted).map(|(&c, &p)| c - p).collect();
    let alpha = chol.solve(&residual)?;
    let mean: Vec<T> = (0..prior.len())
        .map(|i| prior.mean[i] + dot(kgt.row(i), &alpha))
        .collect();

    // S⁻¹ G K, then K − (K Gᵀ)(S⁻¹ G K)
    let gain_t = chol.solve_matrix(&kgt.transpose())?;
    let mut cov = k.sub(&kgt.matmul(&gain_t)?)?;
    cov.symmetrize();
    GaussianProcessState::new(mean, cov)
}

/// Reusable multivariate-normal sampler for one GP state.
#[derive(Debug, Clone)]
pub struct GpSampler<T> {
    mean: Vec<T>,
    chol: Cholesky<T>,
}

impl<T: Real> GpSampler<T> {
    pub fn new(state: &GaussianProcessState<T>) -> Result<Self> {
        Ok(Self {
            mean: state.mean.clone(),
            chol: Cholesky::new(&state.covariance, JitterPolicy::default())?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpectrumVector<T> {
        let z: Vec<T> = (0..self.mean.len())
            .map(|_| {
                let x: f64 = StandardNormal.sample(rng);
                T::lit(x)
            })
            .collect();
        let d = self.chol.mul_lower(&z);
        SpectrumVector::new(self.mean.iter().zip(d).map(|(&m, d)| m + d).collect())
    }
}

/// One draw from `N(μ, K)`. Callers using it as a truth clip it at zero.
pub fn sample_gp<T: Real, R: Rng + ?Sized>(state: &GaussianProcessState<T>, rng: &mut R) -> Result<SpectrumVector<T>> {
    Ok(GpSampler::new(state)?.sample(rng))
}

/// Pointwise band `μ ± z·√diag(K)` with `z = Φ⁻¹((1 + level)/2)`.
pub fn credible_band<T: Real>(
    state: &GaussianProcessState<T>,
    level: f64,
) -> Result<(SpectrumVector<T>, SpectrumVector<T>)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::contract(format!(
            "credible level must lie in (0, 1), got {level}"
        )));
    }
    let z = T::lit(Normal::standard().inverse_cdf(0.5 * (1.0 + level)));
    let sd = state.std_dev();
    let lower = state.mean.iter().zip(&sd).map(|(&m, &s)| m - z * s).collect();
    let upper = state.mean.iter().zip(&sd).map(|(&m, &s)| m + z * s).collect();
    Ok((SpectrumVector::new(lower), SpectrumVector::new(upper)))
}
