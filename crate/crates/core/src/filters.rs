//! CPMG pulse sequences and their filter functions.
//!
//! A sequence of `p` instantaneous π pulses in total time `T` switches the
//! sign of the modulation function `y(t)` at `t_i = (2i+1)T/(2p)`. The
//! fundamental filter `F¹(ω) = ∫_0^T y(t) e^{iωt} dt` has an exact
//! piecewise closed form; the filter function is `F(ω) = |F¹(ω)|²`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{trapezoid, FrequencyGrid};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence<T> {
    n_pulses: u32,
    total_time: T,
    switch_times: Vec<T>,
    negated: bool,
    /// `T/(2p)`; every segment boundary is an integer multiple of it.
    unit: T,
}

impl<T: Real> PulseSequence<T> {
    /// CPMG sequence with `n_pulses` equally spaced pulses; `y(0) = +1`.
    pub fn cpmg(n_pulses: u32, total_time: T) -> Result<Self> {
        if n_pulses == 0 {
            return Err(Error::contract("CPMG sequence needs at least one pulse"));
        }
        if !(total_time > T::zero()) || !total_time.is_finite() {
            return Err(Error::contract("CPMG total time must be positive and finite"));
        }
        let denom = T::from_count(2 * u64::from(n_pulses));
        let switch_times = (0..u64::from(n_pulses))
            .map(|i| T::from_count(2 * i + 1) * total_time / denom)
            .collect();
        Ok(Self {
            n_pulses,
            total_time,
            switch_times,
            negated: false,
            unit: total_time / denom,
        })
    }

    /// The same switching pattern with `y(0) = -1`.
    pub fn inverted(&self) -> Self {
        Self {
            negated: !self.negated,
            ..self.clone()
        }
    }

    pub fn n_pulses(&self) -> u32 {
        self.n_pulses
    }

    pub fn total_time(&self) -> T {
        self.total_time
    }

    pub fn switch_times(&self) -> &[T] {
        &self.switch_times
    }

    /// Sign of `y(t)` on segment `m` (between boundaries `m` and `m+1`).
    pub fn segment_sign(&self, m: usize) -> T {
        let odd = (m % 2 == 1) ^ self.negated;
        if odd {
            -T::one()
        } else {
            T::one()
        }
    }

    /// Segment boundaries `0, t_0, …, t_{p-1}, T`.
    pub fn boundaries(&self) -> Vec<T> {
        let mut b = Vec::with_capacity(self.switch_times.len() + 2);
        b.push(T::zero());
        b.extend_from_slice(&self.switch_times);
        b.push(self.total_time);
        b
    }

    /// Boundaries in units of `T/(2p)`: `0, 1, 3, …, 2p−1, 2p`.
    fn boundary_units(&self) -> impl Iterator<Item = u64> {
        let p = u64::from(self.n_pulses);
        std::iter::once(0)
            .chain((0..p).map(|i| 2 * i + 1))
            .chain(std::iter::once(2 * p))
    }
}

#[inline]
fn sinc<T: Real>(x: T) -> T {
    if x == T::zero() {
        T::one()
    } else {
        x.sin() / x
    }
}

/// `F¹(ω) = ∫_0^T y(t) e^{iωt} dt` in closed form.
///
/// Each constant segment `[a, b]` contributes
/// `(e^{iωb} − e^{iωa})/(iω) = (b−a)·e^{iω(a+b)/2}·sinc(ω(b−a)/2)`, which is
/// evaluated in the product form so that `ω → 0` reaches the analytic
/// limit `Σ ±(b − a)` without cancellation. Segment lengths are exact
/// multiples of `T/(2p)`, so that limit is exactly zero.
pub fn fundamental_filter<T: Real>(seq: &PulseSequence<T>, omega: T) -> Complex<T> {
    let half = T::lit(0.5);
    let units: Vec<u64> = seq.boundary_units().collect();
    units
        .windows(2)
        .enumerate()
        .fold(Complex::new(T::zero(), T::zero()), |acc, (m, w)| {
            let len = seq.unit * T::from_count(w[1] - w[0]);
            let mid = seq.unit * T::from_count(w[0] + w[1]) * half;
            let mag = seq.segment_sign(m) * len * sinc(omega * len * half);
            let phase = omega * mid;
            acc + Complex::new(mag * phase.cos(), mag * phase.sin())
        })
}

/// A sequence's filter function sampled on a grid, with its normalization
/// `f = ∫_0^Ω F dω` and peak frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterFunction<T> {
    pub n_pulses: u32,
    pub values: Vec<T>,
    pub normalization: T,
    pub peak_omega: T,
    pub peak_index: usize,
}

/// Index of the first maximum, so ties resolve toward lower frequency.
fn first_argmax<T: Real>(values: &[T]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v > values[best] { k } else { best })
}

pub fn filter_function<T: Real>(seq: &PulseSequence<T>, grid: &FrequencyGrid<T>) -> Result<FilterFunction<T>> {
    let values: Vec<T> = grid
        .omegas()
        .iter()
        .map(|&w| fundamental_filter(seq, w).norm_sqr())
        .collect();
    let normalization = trapezoid(&values, grid)?;
    let peak_index = first_argmax(&values);
    Ok(FilterFunction {
        n_pulses: seq.n_pulses(),
        peak_omega: grid.omegas()[peak_index],
        values,
        normalization,
        peak_index,
    })
}

/// Filters for CPMG sequences `p = 1..=p_max` sharing one total time and grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterBank<T> {
    pub total_time: T,
    pub filters: Vec<FilterFunction<T>>,
}

impl<T: Real> FilterBank<T> {
    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FilterFunction<T>> {
        self.filters.iter()
    }

    /// Index of the filter generated by the `p`-pulse sequence.
    pub fn position(&self, n_pulses: u32) -> Option<usize> {
        self.filters.iter().position(|f| f.n_pulses == n_pulses)
    }
}

pub fn filter_bank<T: Real>(p_max: u32, total_time: T, grid: &FrequencyGrid<T>) -> Result<FilterBank<T>> {
    if p_max == 0 {
        return Err(Error::contract("filter bank needs p_max >= 1"));
    }
    let filters = (1..=p_max)
        .map(|p| filter_function(&PulseSequence::cpmg(p, total_time)?, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(FilterBank { total_time, filters })
}

/// Serializable filter-bank description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub p_max: u32,
    pub total_time: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            p_max: 25,
            total_time: 1.0,
        }
    }
}

impl FilterSpec {
    pub fn build<T: Real>(&self, grid: &FrequencyGrid<T>) -> Result<FilterBank<T>> {
        filter_bank(self.p_max, T::lit(self.total_time), grid)
    }
}
