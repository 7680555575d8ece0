//! Delta-function inversion: each filter is treated as `f_j·δ(ω − ω̄_j)`, so
//! `Ŝ(ω̄_j) = 2π χ̂_j / f_j`. Off-peak values are linearly interpolated.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::FilterBank;
use crate::forward::ChiVector;
use crate::grid::{linear_interpolate, FrequencyGrid};
use crate::scalar::Real;
use crate::spectra::SpectrumVector;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaivePoint<T> {
    pub omega: T,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaiveEstimate<T> {
    /// One point per distinct peak frequency, sorted by frequency.
    pub points: Vec<NaivePoint<T>>,
    pub spectrum: SpectrumVector<T>,
}

pub fn naive_estimate<T: Real>(
    chis: &ChiVector<T>,
    bank: &FilterBank<T>,
    grid: &FrequencyGrid<T>,
) -> Result<NaiveEstimate<T>> {
    if chis.is_empty() {
        return Err(Error::contract("naive estimate needs at least one overlap"));
    }
    let mut raw = Vec::with_capacity(chis.len());
    for (&p, &c) in chis.n_pulses.iter().zip(&chis.chi) {
        let idx = bank
            .position(p)
            .ok_or_else(|| Error::contract(format!("no filter for p = {p} in the bank")))?;
        let f = &bank.filters[idx];
        if !(f.normalization > T::zero()) {
            return Err(Error::contract(format!("filter p = {p} has zero normalization")));
        }
        raw.push((f.peak_omega, T::TAU() * c / f.normalization));
    }
    raw.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite peak frequencies"));

    // filters sharing a peak grid point are averaged into one node
    let mut points: Vec<NaivePoint<T>> = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let mut j = i;
        let mut sum = T::zero();
        while j < raw.len() && raw[j].0 == raw[i].0 {
            sum = sum + raw[j].1;
            j += 1;
        }
        points.push(NaivePoint {
            omega: raw[i].0,
            value: sum / T::from_count((j - i) as u64),
        });
        i = j;
    }

    let xs: Vec<T> = points.iter().map(|p| p.omega).collect();
    let ys: Vec<T> = points.iter().map(|p| p.value).collect();
    let values = grid
        .omegas()
        .iter()
        .map(|&w| linear_interpolate(&xs, &ys, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(NaiveEstimate {
        points,
        spectrum: SpectrumVector::new(values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::filter_bank;
    use crate::grid::GridSpec;
    use crate::linalg::Matrix;
    use crate::linalg::{Cholesky, JitterPolicy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn setup() -> (FrequencyGrid<f64>, FilterBank<f64>) {
        let grid = GridSpec::default_for(25, 1.0).build().unwrap();
        let bank = filter_bank(25, 1.0, &grid).unwrap();
        (grid, bank)
    }

    #[test]
    fn zero_data_gives_zero_estimate() {
        let (grid, bank) = setup();
        let chis = ChiVector::exact(&SpectrumVector::zeros(grid.len()), &bank, &grid).unwrap();
        let est = naive_estimate(&chis, &bank, &grid).unwrap();
        assert!(est.spectrum.values.iter().all(|&v| v == 0.0));
        assert_eq!(est.points.len(), 25);
    }

    #[test]
    fn constant_spectrum_recovered_exactly() {
        let (grid, bank) = setup();
        let s = 0.83;
        let chis = ChiVector::exact(&SpectrumVector::constant(s, grid.len()), &bank, &grid).unwrap();
        let est = naive_estimate(&chis, &bank, &grid).unwrap();
        for p in &est.points {
            assert!((p.value - s).abs() < 1e-12);
        }
        for v in &est.spectrum.values {
            assert!((v - s).abs() < 1e-12);
        }
        assert!(est.points.windows(2).all(|w| w[1].omega > w[0].omega));
    }

    #[test]
    fn homogeneous_in_the_data() {
        let (grid, bank) = setup();
        let truth = SpectrumVector::new(grid.omegas().iter().map(|w| 1.0 + (w / 9.0).sin()).collect());
        let chis = ChiVector::exact(&truth, &bank, &grid).unwrap();
        let a = naive_estimate(&chis, &bank, &grid).unwrap();
        let b = naive_estimate(&chis.scaled(2.5), &bank, &grid).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            assert!((2.5 * x.value - y.value).abs() < 1e-12 * y.value.abs().max(1.0));
        }
    }

    #[test]
    fn delta_approximation_residual_on_a_gp_sample() {
        // Noiseless data from a smooth random spectrum: the peak estimates
        // differ from the truth only by the delta-approximation error, which is
        // the gap between 2π·χ_j/f_j (a filter-weighted average of S) and S(ω̄_j).
        let (grid, bank) = setup();
        let m = grid.len();
        let w = grid.omegas();
        let k = Matrix::from_fn(m, m, |i, j| 0.02 * (-(w[i] - w[j]).powi(2) / 100.0).exp());
        let chol = Cholesky::new(&k, JitterPolicy::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let truth = SpectrumVector::new(
            chol.mul_lower(&z)
                .iter()
                .zip(w)
                .map(|(d, &om)| (1.0 + d - 0.005 * om).max(0.0))
                .collect(),
        );
        let chis = ChiVector::exact(&truth, &bank, &grid).unwrap();
        let est = naive_estimate(&chis, &bank, &grid).unwrap();
        let mut max_rel: f64 = 0.0;
        let mut any_nonzero = false;
        for f in bank.iter() {
            let weighted: f64 =
                f.values.iter().zip(&truth.values).map(|(a, b)| a * b).sum::<f64>() / f.values.iter().sum::<f64>();
            let point = est.points.iter().find(|p| p.omega == f.peak_omega).unwrap();
            let s_peak = truth.values[f.peak_index];
            if (point.value - s_peak).abs() > 1e-6 {
                any_nonzero = true;
            }
            // up to quadrature end effects the estimate equals the F-weighted average
            max_rel = max_rel.max((point.value - weighted).abs() / weighted.abs().max(1e-3));
        }
        assert!(any_nonzero);
        assert!(max_rel < 0.02, "max relative residual vs weighted average {max_rel}");
    }

    #[test]
    fn unknown_filter_rejected() {
        let (grid, bank) = setup();
        let chis = ChiVector {
            n_pulses: vec![99],
            chi: vec![0.1],
            sigma2: None,
            clamped: vec![false],
        };
        assert!(naive_estimate(&chis, &bank, &grid).is_err());
    }
}
