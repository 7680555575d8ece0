use noisespec::forward::{chi_hat, variance_floor, MeasurementRecord};
use noisespec::gp::{build_design_matrix, credible_band, gp_posterior};
use noisespec::naive::naive_estimate;
use noisespec::smc::{ExponentOnlyModel, OneOnFModel, Smc, SmcSummary, SpectralModel};
use noisespec::{ChiVector, DesignMatrix, FilterBank, FrequencyGrid, SpectrumVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{load_config, setup};
use crate::args::{EstimateArgs, EstimatorKind, Format, GlobalArgs, SmcModelKind};
use crate::error::{CliError, Result};
use crate::output::Output;
use crate::svg::{line_plot, Series};

#[derive(Serialize)]
struct NaiveFile<'a> {
    points: &'a [noisespec::naive::NaivePoint<f64>],
    clamped_entries: usize,
}

#[derive(Serialize)]
struct GpFile<'a> {
    level: f64,
    clamped_entries: usize,
    omega: &'a [f64],
    mean: &'a [f64],
    std_dev: &'a [f64],
    lower: &'a [f64],
    upper: &'a [f64],
}

#[derive(Serialize)]
struct SmcFile<'a> {
    model: &'static str,
    n_particles: usize,
    #[serde(flatten)]
    summary: &'a SmcSummary,
}

fn read_record(a: &EstimateArgs, bank: &FilterBank) -> Result<MeasurementRecord> {
    let text = std::fs::read_to_string(&a.record).map_err(|e| CliError::io(&a.record, e))?;
    let record =
        MeasurementRecord::from_json(&text).map_err(|e| CliError::usage(format!("{}: {e}", a.record.display())))?;
    if record.shots == 0 || record.entries.is_empty() {
        return Err(CliError::usage("record holds no measurements"));
    }
    if let Some(e) = record.entries.iter().find(|e| bank.position(e.p).is_none()) {
        return Err(CliError::usage(format!(
            "record has a p = {} entry but the filter bank only covers p = 1..={}",
            e.p,
            bank.len()
        )));
    }
    Ok(record)
}

fn plot(out: &mut Output, grid: &FrequencyGrid, title: &str, curves: &[(&str, &[f64])]) -> Result<()> {
    let series: Vec<Series<'_>> = curves
        .iter()
        .map(|(label, ys)| Series {
            label: label.to_string(),
            xs: grid.omegas(),
            ys,
        })
        .collect();
    out.text("estimate.svg", &line_plot(title, "ω", "S(ω)", &series))
}

fn columns(out: &mut Output, grid: &FrequencyGrid, header: &[&str], cols: &[&[f64]]) -> Result<()> {
    let rows = grid.omegas().iter().enumerate().map(|(k, w)| {
        std::iter::once(w.to_string())
            .chain(cols.iter().map(|c| c[k].to_string()))
            .collect::<Vec<_>>()
    });
    out.csv("estimate.csv", header, rows)
}

pub fn run(g: &GlobalArgs, a: &EstimateArgs, out: &mut Output) -> Result<()> {
    let config = load_config(g.config.as_deref())?.unwrap_or_default();
    let (config, grid, bank) = setup(config, &a.bank)?;
    let record = read_record(a, &bank)?;

    match a.estimator {
        EstimatorKind::Naive => {
            let chis: ChiVector = chi_hat(&record)?;
            let est = naive_estimate(&chis, &bank, &grid)?;
            if out.wants(Format::Csv) {
                columns(out, &grid, &["omega", "S_hat"], &[&est.spectrum.values])?;
            }
            if out.wants(Format::Json) {
                out.json(
                    "naive_points.json",
                    &NaiveFile {
                        points: &est.points,
                        clamped_entries: chis.clamp_count(),
                    },
                )?;
            }
            if out.wants(Format::Svg) {
                plot(out, &grid, "Naive estimate", &[("naive", &est.spectrum.values)])?;
            }
        }
        EstimatorKind::Gp => {
            let mut chis: ChiVector = chi_hat::<f64>(&record)?.with_variance_floor(variance_floor(record.shots));
            if let Some(v) = a.noise_variance {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::usage(format!("--noise-variance must be positive, got {v}")));
                }
                chis.sigma2 = Some(vec![v; chis.len()]);
            }
            let prior = config.gp_prior.state(&grid)?;
            let design: DesignMatrix = build_design_matrix(&bank, &grid)?;
            let post = gp_posterior(&prior, &design, &chis)?;
            let (lo, hi) = credible_band(&post, a.level)?;
            let sd = post.std_dev();
            if out.wants(Format::Csv) {
                columns(
                    out,
                    &grid,
                    &["omega", "mu", "lo", "hi"],
                    &[&post.mean, &lo.values, &hi.values],
                )?;
            }
            if out.wants(Format::Json) {
                out.json(
                    "gp_posterior.json",
                    &GpFile {
                        level: a.level,
                        clamped_entries: chis.clamp_count(),
                        omega: grid.omegas(),
                        mean: &post.mean,
                        std_dev: &sd,
                        lower: &lo.values,
                        upper: &hi.values,
                    },
                )?;
            }
            if out.wants(Format::Svg) {
                plot(
                    out,
                    &grid,
                    "GP posterior",
                    &[("mean", &post.mean), ("lower", &lo.values), ("upper", &hi.values)],
                )?;
            }
        }
        EstimatorKind::Smc => {
            let mut smc_config = config.smc;
            if let Some(n) = a.particles {
                smc_config.n_particles = n as usize;
            }
            let seed = g.seed.unwrap_or(config.seed);
            let design: DesignMatrix = build_design_matrix(&bank, &grid)?;
            let (name, (summary, mean, at_mean)) = match a.model {
                SmcModelKind::OneOnF => (
                    "one-on-f",
                    run_smc(
                        &OneOnFModel::new(config.hyperprior)?,
                        smc_config,
                        &grid,
                        &design,
                        &record,
                        seed,
                    )?,
                ),
                SmcModelKind::Exponent => {
                    let model = ExponentOnlyModel {
                        amplitude: a.amplitude,
                        cutoff: a.cutoff,
                        ..ExponentOnlyModel::default()
                    };
                    if !(model.amplitude > 0.0 && model.cutoff > 0.0) {
                        return Err(CliError::usage("--amplitude and --cutoff must be positive"));
                    }
                    ("exponent", run_smc(&model, smc_config, &grid, &design, &record, seed)?)
                }
            };
            if out.wants(Format::Csv) {
                columns(
                    out,
                    &grid,
                    &["omega", "S_mean", "S_at_mean"],
                    &[&mean.values, &at_mean.values],
                )?;
            }
            if out.wants(Format::Json) {
                out.json(
                    "posterior.json",
                    &SmcFile {
                        model: name,
                        n_particles: smc_config.n_particles,
                        summary: &summary,
                    },
                )?;
            }
            if out.wants(Format::Svg) {
                plot(
                    out,
                    &grid,
                    "SMC spectrum reports",
                    &[("posterior mean", &mean.values), ("at mean θ", &at_mean.values)],
                )?;
            }
        }
    }
    Ok(())
}

fn run_smc<M: SpectralModel<f64>>(
    model: &M,
    config: noisespec::smc::SmcConfig,
    grid: &FrequencyGrid,
    design: &DesignMatrix,
    record: &MeasurementRecord,
    seed: u64,
) -> Result<(SmcSummary, SpectrumVector, SpectrumVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut smc = Smc::new(model, config, grid, design, &mut rng)?;
    smc.update(record, &mut rng)?;
    Ok((smc.summary(), smc.report_mean_spectrum(), smc.report_spectrum_at_mean()))
}
