use noisespec::bench::{
    run_bench, write_alpha_csv, write_bias_csv, write_histograms_csv, write_trials_csv, BenchConfig, BenchReport,
    Estimator, Scenario, TrialResult,
};

use super::{load_config, setup};
use crate::args::{BenchArgs, Format, GlobalArgs, ScenarioArg};
use crate::error::{CliError, Result};
use crate::output::Output;
use crate::svg::{line_plot, step_outline, Series};

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::GpTruth => Scenario::GpTruth,
            ScenarioArg::OneOnF => Scenario::OneOnF,
        }
    }
}

fn resolve(g: &GlobalArgs, a: &BenchArgs) -> Result<BenchConfig> {
    let mut config = match load_config(g.config.as_deref())? {
        Some(c) => c,
        None => BenchConfig::for_scenario(a.scenario.map_or(Scenario::GpTruth, Scenario::from)),
    };
    if let Some(s) = a.scenario {
        config.scenario = s.into();
    }
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    if let Some(n) = a.trials {
        config.n_trials = n as usize;
    }
    if let Some(shots) = &a.shots {
        config.shots = shots.clone();
    }
    if let Some(n) = a.particles {
        config.smc.n_particles = n as usize;
    }
    Ok(config)
}

fn print_summary(report: &BenchReport) {
    println!(
        "scenario {} | {} trials | seed {}",
        report.scenario, report.n_trials, report.seed
    );
    for s in &report.shots {
        println!("N = {} ({} clamped χ̂ entries)", s.shots, s.clamped_entries);
        println!(
            "  {:<12} {:>12} {:>12} {:>12} {:>9}",
            "estimator", "median", "mean", "median/prior", "failures"
        );
        for l in &s.losses {
            let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
            println!(
                "  {:<12} {:>12} {:>12} {:>12} {:>5}/{}",
                l.estimator.to_string(),
                f(l.median),
                f(l.mean),
                f(l.ratio_median),
                l.failures,
                l.n
            );
        }
        if let Some(alpha) = &s.alpha {
            println!(
                "  alpha loss: median {:.4e}, median ratio to prior {:.4e}",
                alpha.median_loss, alpha.median_ratio
            );
        }
    }
}

/// True when no data-driven estimator produced a single loss.
fn total_failure(results: &[TrialResult]) -> bool {
    let mut attempted = false;
    for o in results.iter().flat_map(|r| &r.outcomes) {
        for e in o.estimates.iter().filter(|e| e.estimator != Estimator::Prior) {
            attempted = true;
            if e.loss.is_some() {
                return false;
            }
        }
    }
    attempted
}

fn write_svgs(out: &mut Output, report: &BenchReport) -> Result<()> {
    for s in &report.shots {
        let shown: Vec<_> = s.losses.iter().filter(|l| !l.histogram.counts.is_empty()).collect();
        let outlines: Vec<_> = shown
            .iter()
            .map(|l| {
                let counts: Vec<f64> = l
                    .histogram
                    .counts
                    .iter()
                    .map(|&c| c as f64 / l.n.max(1) as f64)
                    .collect();
                step_outline(&l.histogram.edges, &counts)
            })
            .collect();
        let series: Vec<Series<'_>> = shown
            .iter()
            .zip(&outlines)
            .map(|(l, (xs, ys))| Series {
                label: l.estimator.to_string(),
                xs,
                ys,
            })
            .collect();
        let title = format!("Loss histogram, N = {}", s.shots);
        out.text(
            &format!("histograms_N{}.svg", s.shots),
            &line_plot(&title, "log10 loss", "fraction of trials", &series),
        )?;

        let series: Vec<Series<'_>> = s
            .bias
            .iter()
            .map(|b| Series {
                label: b.estimator.to_string(),
                xs: &report.omegas,
                ys: &b.mean,
            })
            .collect();
        let title = format!("Mean bias, N = {}", s.shots);
        out.text(
            &format!("bias_N{}.svg", s.shots),
            &line_plot(&title, "ω", "mean(Ŝ − S)", &series),
        )?;
    }
    Ok(())
}

pub fn run(g: &GlobalArgs, a: &BenchArgs, out: &mut Output) -> Result<()> {
    let (config, _, _) = setup(resolve(g, a)?, &a.bank)?;
    let (results, report) = run_bench(&config, g.workers.map(|w| w as usize))?;
    print_summary(&report);

    if out.wants(Format::Json) {
        out.json("config.json", &config)?;
        out.text("report.json", &(report.to_json()? + "\n"))?;
        out.json("trials.json", &results)?;
    }
    if out.wants(Format::Csv) {
        out.with_file("trials.csv", |w| write_trials_csv(&results, w))?;
        out.with_file("histograms.csv", |w| write_histograms_csv(&report, w))?;
        out.with_file("bias.csv", |w| write_bias_csv(&report, w))?;
        if config.scenario == Scenario::OneOnF && config.estimators.smc {
            out.with_file("alpha.csv", |w| write_alpha_csv(&results, w))?;
        }
    }
    if out.wants(Format::Svg) {
        write_svgs(out, &report)?;
    }

    if total_failure(&results) {
        return Err(CliError::Failed("every estimator failed on every trial".into()));
    }
    Ok(())
}
