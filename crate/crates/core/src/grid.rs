//! Frequency discretization and the quadrature every other module shares.
//!
//! Simulation, the design matrix and all estimators integrate through
//! [`trapezoid`] or the equivalent [`trapezoid_weights`], so a forward model
//! and the inference built on it always agree on the discretized integral.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ordered angular frequencies `0 <= ω_1 < … < ω_M = Ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyGrid<T> {
    omegas: Vec<T>,
}

impl<T: Real> FrequencyGrid<T> {
    /// Builds a grid from explicit points, checking the ordering invariants.
    pub fn from_omegas(omegas: Vec<T>) -> Result<Self> {
        if omegas.len() < 2 {
            return Err(Error::contract(format!(
                "frequency grid needs at least 2 points, got {}",
                omegas.len()
            )));
        }
        if omegas.iter().any(|w| !w.is_finite()) {
            return Err(Error::contract("frequency grid contains a non-finite value"));
        }
        if omegas[0] < T::zero() {
            return Err(Error::contract("frequency grid starts below zero"));
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::contract("frequency grid is not strictly increasing"));
        }
        Ok(Self { omegas })
    }

    /// `n_points` equally spaced frequencies on `[0, omega_max]`.
    pub fn uniform(omega_max: T, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::contract(format!(
                "uniform grid needs at least 2 points, got {n_points}"
            )));
        }
        if !(omega_max > T::zero()) || !omega_max.is_finite() {
            return Err(Error::contract("uniform grid needs a positive finite cutoff"));
        }
        let last = T::from_count(n_points as u64 - 1);
        let mut omegas: Vec<T> = (0..n_points)
            .map(|k| omega_max * T::from_count(k as u64) / last)
            .collect();
        // exact cutoff regardless of rounding in the division above
        omegas[n_points - 1] = omega_max;
        Self::from_omegas(omegas)
    }

    pub fn omegas(&self) -> &[T] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// The high-frequency cutoff Ω (last grid point).
    pub fn cutoff(&self) -> T {
        self.omegas[self.omegas.len() - 1]
    }

    pub(crate) fn check_len(&self, n: usize, what: &str) -> Result<()> {
        if n != self.len() {
            return Err(Error::contract(format!(
                "{what} has length {n}, grid has {} points",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Serializable grid description used in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub omega_max: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub const DEFAULT_POINTS: usize = 200;

    /// Default cutoff `1.3·π·p_max/T`, placing the largest CPMG peak well inside the grid.
    pub fn default_for(p_max: u32, total_time: f64) -> Self {
        Self {
            omega_max: 1.3 * std::f64::consts::PI * f64::from(p_max) / total_time,
            n_points: Self::DEFAULT_POINTS,
        }
    }

    pub fn build<T: Real>(&self) -> Result<FrequencyGrid<T>> {
        FrequencyGrid::uniform(T::lit(self.omega_max), self.n_points)
    }
}

/// Composite trapezoidal rule of `values` sampled on `grid`.
pub fn trapezoid<T: Real>(values: &[T], grid: &FrequencyGrid<T>) -> Result<T> {
    grid.check_len(values.len(), "integrand")?;
    let half = T::lit(0.5);
    let w = grid.omegas();
    Ok((1..w.len())
        .map(|k| (values[k] + values[k - 1]) * (w[k] - w[k - 1]) * half)
        .sum())
}

/// Per-node weights `c_k` with `trapezoid(v) = Σ c_k v_k`.
pub fn trapezoid_weights<T: Real>(grid: &FrequencyGrid<T>) -> Vec<T> {
    let w = grid.omegas();
    let m = w.len();
    let half = T::lit(0.5);
    let mut out = vec![T::zero(); m];
    for k in 1..m {
        let h = (w[k] - w[k - 1]) * half;
        out[k - 1] = out[k - 1] + h;
        out[k] = out[k] + h;
    }
    out
}

/// Piecewise-linear interpolation with constant extrapolation past either end.
pub fn linear_interpolate<T: Real>(xs: &[T], ys: &[T], query: T) -> Result<T> {
    if xs.is_empty() {
        return Err(Error::contract("interpolation nodes are empty"));
    }
    if xs.len() != ys.len() {
        return Err(Error::contract(format!(
            "interpolation has {} nodes but {} values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::contract("interpolation nodes are not strictly increasing"));
    }
    let n = xs.len();
    if query <= xs[0] {
        return Ok(ys[0]);
    }
    if query >= xs[n - 1] {
        return Ok(ys[n - 1]);
    }
    // first node strictly above the query; 1 <= hi <= n-1 here
    let hi = xs.partition_point(|&x| x <= query);
    let lo = hi - 1;
    let t = (query - xs[lo]) / (xs[hi] - xs[lo]);
    Ok(ys[lo] + t * (ys[hi] - ys[lo]))
}
