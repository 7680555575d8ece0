use noisespec::forward::{chi, chi_hat, outcome_probability, simulate_record, MeasurementRecord, RecordEntry};
use noisespec::gp::sample_gp;
use noisespec::spectra::{evaluate_one_on_f, sample_hyperprior};
use noisespec::{ChiVector, FilterBank, FrequencyGrid, OneOnFParams, SpectrumVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{load_config, setup};
use crate::args::{Format, GlobalArgs, SimulateArgs};
use crate::error::Result;
use crate::output::Output;
use crate::svg::{line_plot, Series};
use crate::truth::TruthSpec;

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Descriptor {
    OneOnF {
        #[serde(rename = "A")]
        amplitude: f64,
        alpha: f64,
        c: f64,
        sampled: bool,
    },
    Gp {
        seed: Option<u64>,
        clipped_points: usize,
    },
    Constant {
        value: f64,
    },
}

#[derive(Serialize)]
struct TruthFile<'a> {
    truth: &'a Descriptor,
    shots: u64,
    noiseless: bool,
    seed: u64,
}

fn one_on_f(p: &OneOnFParams, grid: &FrequencyGrid, sampled: bool) -> (SpectrumVector, Descriptor) {
    (
        evaluate_one_on_f(p, grid),
        Descriptor::OneOnF {
            amplitude: p.amplitude,
            alpha: p.exponent,
            c: p.cutoff,
            sampled,
        },
    )
}

/// Counts `round(N·p_j)` in place of binomial draws.
fn expected_record(
    truth: &SpectrumVector,
    bank: &FilterBank,
    grid: &FrequencyGrid,
    shots: u64,
) -> noisespec::Result<MeasurementRecord> {
    let entries = bank
        .iter()
        .map(|f| {
            let p = outcome_probability(chi(truth, f, grid)?)?;
            Ok(RecordEntry {
                p: f.n_pulses,
                k: (p * shots as f64).round() as u64,
            })
        })
        .collect::<noisespec::Result<Vec<_>>>()?;
    Ok(MeasurementRecord {
        seed: None,
        shots,
        entries,
    })
}

pub fn run(g: &GlobalArgs, a: &SimulateArgs, out: &mut Output) -> Result<()> {
    let config = load_config(g.config.as_deref())?.unwrap_or_default();
    let (config, grid, bank) = setup(config, &a.bank)?;
    let seed = g.seed.unwrap_or(config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (truth, descriptor) = match &a.truth {
        TruthSpec::OneOnF(Some(p)) => one_on_f(p, &grid, false),
        TruthSpec::OneOnF(None) => one_on_f(&sample_hyperprior(&config.hyperprior, &mut rng), &grid, true),
        TruthSpec::Gp { seed: truth_seed } => {
            let prior = config.gp_prior.state(&grid)?;
            let mut s = match truth_seed {
                Some(s) => sample_gp(&prior, &mut ChaCha8Rng::seed_from_u64(*s))?,
                None => sample_gp(&prior, &mut rng)?,
            };
            let clipped_points = s.clip_nonnegative();
            (
                s,
                Descriptor::Gp {
                    seed: *truth_seed,
                    clipped_points,
                },
            )
        }
        TruthSpec::Constant(v) => (
            SpectrumVector::constant(*v, grid.len()),
            Descriptor::Constant { value: *v },
        ),
    };

    let mut record = if a.noiseless {
        expected_record(&truth, &bank, &grid, a.shots)?
    } else {
        simulate_record(&truth, &bank, &grid, a.shots, &mut rng)?
    };
    record.seed = Some(seed);

    // the record is the input to `estimate`, so it is written whatever the formats
    out.text("record.json", &(record.to_json()? + "\n"))?;

    if out.wants(Format::Json) {
        out.json(
            "truth.json",
            &TruthFile {
                truth: &descriptor,
                shots: a.shots,
                noiseless: a.noiseless,
                seed,
            },
        )?;
    }
    if out.wants(Format::Csv) {
        out.csv(
            "truth.csv",
            &["omega", "S"],
            grid.omegas()
                .iter()
                .zip(&truth.values)
                .map(|(w, s)| [w.to_string(), s.to_string()]),
        )?;
        let chis: ChiVector = chi_hat(&record)?;
        let sigma2 = chis.sigma2.clone().unwrap_or_default();
        let rows = record.entries.iter().enumerate().map(|(j, e)| {
            [
                e.p.to_string(),
                e.k.to_string(),
                record.shots.to_string(),
                chis.chi[j].to_string(),
                sigma2.get(j).map(|v| v.to_string()).unwrap_or_default(),
                chis.clamped[j].to_string(),
            ]
        });
        out.csv("chi_hat.csv", &["p", "k", "N", "chi_hat", "sigma2", "clamped"], rows)?;
    }
    if out.wants(Format::Svg) {
        let series = [Series {
            label: "truth".into(),
            xs: grid.omegas(),
            ys: &truth.values,
        }];
        out.text("truth.svg", &line_plot("True spectrum", "ω", "S(ω)", &series))?;
    }
    Ok(())
}
