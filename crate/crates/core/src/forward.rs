//! Statistical forward model: overlap integrals `χ`, single-shot outcome
//! probabilities, simulated binomial records and the linearized `χ̂` data.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FilterBank, FilterFunction};
use crate::grid::{trapezoid, FrequencyGrid};
use crate::scalar::Real;
use crate::spectra::SpectrumVector;

/// `χ(S; F) = (1/2π) ∫_0^Ω S(ω) F(ω) dω` by the shared trapezoidal rule.
pub fn chi<T: Real>(spectrum: &SpectrumVector<T>, filter: &FilterFunction<T>, grid: &FrequencyGrid<T>) -> Result<T> {
    grid.check_len(spectrum.len(), "spectrum")?;
    grid.check_len(filter.values.len(), "filter function")?;
    let product: Vec<T> = spectrum
        .values
        .iter()
        .zip(&filter.values)
        .map(|(&s, &f)| s * f)
        .collect();
    Ok(trapezoid(&product, grid)? / T::TAU())
}

/// `Pr(r = 1) = (1 + e^{-χ})/2`.
pub fn outcome_probability<T: Real>(chi: T) -> Result<T> {
    if !(chi >= T::zero()) {
        return Err(Error::Domain(format!(
            "negative or undefined overlap χ = {chi}; the spectrum reaching the forward model is not nonnegative"
        )));
    }
    Ok((T::one() + (-chi).exp()) * T::lit(0.5))
}

/// `(ln Pr(r = 1), ln Pr(r = 0))`, accurate for small and large `χ`.
pub fn outcome_log_probabilities<T: Real>(chi: T) -> (T, T) {
    let ln_half = -T::LN_2();
    let e = (-chi).exp();
    let ln_one = e.ln_1p() + ln_half;
    let ln_zero = (-(-chi).exp_m1()).ln() + ln_half;
    (ln_one, ln_zero)
}

/// Overlaps (and, for measured data, their linearized variances), one per filter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiVector<T> {
    pub n_pulses: Vec<u32>,
    pub chi: Vec<T>,
    pub sigma2: Option<Vec<T>>,
    /// Entries whose success fraction was raised to `1/2 + 1/(2N)` before the log.
    pub clamped: Vec<bool>,
}

impl<T: Real> ChiVector<T> {
    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    pub fn clamp_count(&self) -> usize {
        self.clamped.iter().filter(|&&c| c).count()
    }

    /// Noiseless overlaps of a known spectrum with every filter in the bank.
    pub fn exact(spectrum: &SpectrumVector<T>, bank: &FilterBank<T>, grid: &FrequencyGrid<T>) -> Result<Self> {
        let chi = bank
            .iter()
            .map(|f| chi(spectrum, f, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_pulses: bank.iter().map(|f| f.n_pulses).collect(),
            clamped: vec![false; chi.len()],
            chi,
            sigma2: None,
        })
    }

    /// Raises every variance to at least `floor`.
    pub fn with_variance_floor(mut self, floor: T) -> Self {
        if let Some(s2) = self.sigma2.as_mut() {
            for v in s2.iter_mut() {
                *v = v.max(floor);
            }
        }
        self
    }

    /// Scales every overlap by `t` (variances unchanged).
    pub fn scaled(&self, t: T) -> Self {
        Self {
            chi: self.chi.iter().map(|&c| c * t).collect(),
            ..self.clone()
        }
    }
}

/// One filter's binomial outcome count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordEntry {
    /// Number of pulses of the CPMG sequence, identifying the filter.
    pub p: u32,
    /// Count of `r = 1` outcomes.
    pub k: u64,
}

/// Single-shot data stored as per-filter success counts out of `N` shots each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub seed: Option<u64>,
    #[serde(rename = "N")]
    pub shots: u64,
    pub entries: Vec<RecordEntry>,
}

impl MeasurementRecord {
    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.entries.iter().find(|e| e.k > self.shots) {
            return Err(Error::contract(format!(
                "record entry p={} has k={} > N={}",
                e.p, e.k, self.shots
            )));
        }
        Ok(())
    }

    /// Success fraction `ŷ_j = k_j/N` per entry.
    pub fn success_fractions(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.k as f64 / self.shots as f64).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: Self = serde_json::from_str(text)?;
        rec.validate()?;
        Ok(rec)
    }
}

/// Draws `k_j ~ Binomial(N, Pr(r = 1 | χ(truth, F_j)))` for every filter.
pub fn simulate_record<T: Real, R: Rng + ?Sized>(
    truth: &SpectrumVector<T>,
    bank: &FilterBank<T>,
    grid: &FrequencyGrid<T>,
    shots: u64,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    if shots == 0 {
        return Err(Error::contract("simulation needs at least one shot per filter"));
    }
    let mut entries = Vec::with_capacity(bank.len());
    for f in bank.iter() {
        let p = outcome_probability(chi(truth, f, grid)?)?.to_f64_lossy();
        let dist =
            Binomial::new(shots, p.clamp(0.0, 1.0)).map_err(|e| Error::Domain(format!("binomial with p={p}: {e}")))?;
        entries.push(RecordEntry {
            p: f.n_pulses,
            k: dist.sample(rng),
        });
    }
    Ok(MeasurementRecord {
        seed: None,
        shots,
        entries,
    })
}

/// Linearized data `χ̂_j = −ln(2ŷ_j − 1)` with `σ_j² = (e^{2χ̂_j} − 1)/N`.
///
/// Fractions at or below `1/2 + 1/(2N)` are raised to that value (and
/// flagged) so the log stays finite.
pub fn chi_hat<T: Real>(record: &MeasurementRecord) -> Result<ChiVector<T>> {
    if record.shots == 0 {
        return Err(Error::contract("chi_hat needs N >= 1 shots"));
    }
    record.validate()?;
    let n = record.shots as f64;
    let floor = 0.5 + 0.5 / n;
    let mut chi = Vec::with_capacity(record.entries.len());
    let mut sigma2 = Vec::with_capacity(record.entries.len());
    let mut clamped = Vec::with_capacity(record.entries.len());
    for e in &record.entries {
        let y = e.k as f64 / n;
        let (y, was_clamped) = if y <= floor && e.k < record.shots {
            (floor, true)
        } else {
            (y, false)
        };
        let c = -(2.0 * y - 1.0).ln();
        // k = N gives -ln(1) = -0.0
        let c = if c == 0.0 { 0.0 } else { c };
        chi.push(T::lit(c));
        sigma2.push(T::lit((2.0 * c).exp_m1() / n));
        clamped.push(was_clamped);
    }
    Ok(ChiVector {
        n_pulses: record.entries.iter().map(|e| e.p).collect(),
        chi,
        sigma2: Some(sigma2),
        clamped,
    })
}

/// Smallest variance a Gaussian-likelihood consumer should attach to `χ̂`.
///
/// A record with `k = N` yields `χ̂ = 0` and `σ² = 0`, which would pin the
/// overlap exactly. This floor is the variance at `ŷ = (N + ½)/(N + 1)`.
pub fn variance_floor(shots: u64) -> f64 {
    let n = shots as f64;
    let y = (n + 0.5) / (n + 1.0);
    let c = -(2.0 * y - 1.0).ln();
    (2.0 * c).exp_m1() / n
}
