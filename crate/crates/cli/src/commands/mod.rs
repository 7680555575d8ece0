mod bench;
mod estimate;
mod filters;
mod simulate;

use std::path::Path;

use noisespec::bench::BenchConfig;
use noisespec::grid::GridSpec;
use noisespec::{FilterBank, FrequencyGrid};

use crate::args::{BankArgs, Cli, Command};
use crate::error::{CliError, Result};
use crate::output::Output;

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let mut out = Output::new(&g.out, &g.format)?;
    match &cli.command {
        Command::Filters(a) => filters::run(g, a, &mut out)?,
        Command::Simulate(a) => simulate::run(g, a, &mut out)?,
        Command::Estimate(a) => estimate::run(g, a, &mut out)?,
        Command::Bench(a) => bench::run(g, a, &mut out)?,
    }
    for path in out.written() {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<Option<BenchConfig>> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    BenchConfig::from_json(&text)
        .map(Some)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Applies filter/grid flags, validates, and builds the grid and bank.
fn setup(mut config: BenchConfig, a: &BankArgs) -> Result<(BenchConfig, FrequencyGrid, FilterBank)> {
    if let Some(p) = a.p_max {
        config.filters.p_max = p;
    }
    if let Some(t) = a.total_time {
        config.filters.total_time = t;
    }
    if a.omega_max.is_some() || a.n_points.is_some() {
        let base = config.grid_spec();
        config.grid = Some(GridSpec {
            omega_max: a.omega_max.unwrap_or(base.omega_max),
            n_points: a.n_points.map_or(base.n_points, |n| n as usize),
        });
    }
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let grid: FrequencyGrid = config.grid_spec().build().map_err(|e| CliError::usage(e.to_string()))?;
    let bank = config.filters.build(&grid)?;
    Ok((config, grid, bank))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank_args() -> BankArgs {
        BankArgs {
            p_max: None,
            total_time: None,
            omega_max: None,
            n_points: None,
        }
    }

    #[test]
    fn defaults_follow_p_max() {
        let (config, grid, bank) = setup(
            BenchConfig::default(),
            &BankArgs {
                p_max: Some(4),
                ..bank_args()
            },
        )
        .unwrap();
        assert_eq!(bank.len(), 4);
        assert_eq!(config.filters.p_max, 4);
        assert!((grid.cutoff() - 1.3 * std::f64::consts::PI * 4.0).abs() < 1e-12);
        assert_eq!(grid.len(), 200);
    }

    #[test]
    fn grid_flags_override_independently() {
        let (_, grid, _) = setup(
            BenchConfig::default(),
            &BankArgs {
                n_points: Some(50),
                ..bank_args()
            },
        )
        .unwrap();
        assert_eq!(grid.len(), 50);
        assert!((grid.cutoff() - 1.3 * std::f64::consts::PI * 25.0).abs() < 1e-12);
    }

    #[test]
    fn bad_grid_is_a_usage_error() {
        let err = setup(
            BenchConfig::default(),
            &BankArgs {
                omega_max: Some(-1.0),
                ..bank_args()
            },
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = setup(
            BenchConfig::default(),
            &BankArgs {
                total_time: Some(0.0),
                ..bank_args()
            },
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
