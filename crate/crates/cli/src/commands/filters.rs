use serde::Serialize;

use super::{load_config, setup};
use crate::args::{BankArgs, Format, GlobalArgs};
use crate::error::Result;
use crate::output::Output;
use crate::svg::{line_plot, Series};

#[derive(Serialize)]
struct FilterSummary {
    p: u32,
    normalization: f64,
    peak_omega: f64,
}

#[derive(Serialize)]
struct Sidecar {
    total_time: f64,
    omega_max: f64,
    n_points: usize,
    filters: Vec<FilterSummary>,
}

pub fn run(g: &GlobalArgs, a: &BankArgs, out: &mut Output) -> Result<()> {
    let config = load_config(g.config.as_deref())?.unwrap_or_default();
    let (config, grid, bank) = setup(config, a)?;
    let omegas = grid.omegas();

    if out.wants(Format::Csv) {
        let rows = bank.iter().flat_map(|f| {
            omegas
                .iter()
                .zip(&f.values)
                .map(move |(w, v)| [f.n_pulses.to_string(), w.to_string(), v.to_string()])
        });
        out.csv("filters.csv", &["p", "omega", "F"], rows)?;
    }
    if out.wants(Format::Json) {
        let sidecar = Sidecar {
            total_time: config.filters.total_time,
            omega_max: grid.cutoff(),
            n_points: grid.len(),
            filters: bank
                .iter()
                .map(|f| FilterSummary {
                    p: f.n_pulses,
                    normalization: f.normalization,
                    peak_omega: f.peak_omega,
                })
                .collect(),
        };
        out.json("filters.json", &sidecar)?;
    }
    if out.wants(Format::Svg) {
        let series: Vec<Series<'_>> = bank
            .iter()
            .map(|f| Series {
                label: format!("p={}", f.n_pulses),
                xs: omegas,
                ys: &f.values,
            })
            .collect();
        out.text("filters.svg", &line_plot("CPMG filter functions", "ω", "F(ω)", &series))?;
    }
    Ok(())
}
