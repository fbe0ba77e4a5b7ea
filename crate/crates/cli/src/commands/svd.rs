use eit_core::phantom::make_resistor_circle_fixture;
use eit_core::statistics::{MeasurementEnsemble, Statistic};
use eit_core::subspace::{fit_subspace, fitting_residual, write_candidates, FitTarget, TruncationWarning};

use crate::config::RunConfig;
use crate::error::{write_file, CliError, CliResult};
use crate::SvdArgs;

fn parse_statistic(text: &str) -> CliResult<Statistic> {
    match text {
        "correlation" => Ok(Statistic::Correlation { center: false }),
        "covariance" => Ok(Statistic::Correlation { center: true }),
        "pooled" => Ok(Statistic::PooledCumulant(None)),
        _ => match text.strip_prefix("cumulant:").map(str::parse::<usize>) {
            Some(Ok(i)) => Ok(Statistic::CumulantSlice(i)),
            _ => Err(CliError::usage(format!(
                "unknown statistic `{text}` (correlation, covariance, cumulant:I, pooled)"
            ))),
        },
    }
}

pub fn run(config: Option<&str>, seed: Option<u64>, args: SvdArgs) -> CliResult<()> {
    let mut cfg = RunConfig::new(config, seed, "reconstruct svd", "svd")?;
    let source: Option<String> = cfg.optional("ensemble", args.ensemble)?;
    let stat_name: String = cfg.with_default("statistic", args.statistic, "correlation".to_string())?;
    let statistic = parse_statistic(&stat_name)?;
    let ensemble = match &source {
        Some(path) => MeasurementEnsemble::read_csv(path)?,
        None => {
            cfg.note("ensemble", "resistor-circle fixture");
            make_resistor_circle_fixture().ensemble(1)?
        }
    };
    let d = cfg.with_default("d", args.d, 3)?;
    let out: Option<String> = cfg.optional("out", args.out)?;
    let fit = fit_subspace(statistic.compute(&ensemble)?, d)?;

    cfg.print_header();
    println!("channels: {}, samples: {}", ensemble.channel_count(), ensemble.sample_count());
    let spectrum: Vec<String> = fit.decomposition.spectrum.iter().map(|v| format!("{v:.6e}")).collect();
    println!("singular values: {}", spectrum.join(" "));
    for w in &fit.decomposition.warnings {
        let TruncationWarning::IllConditioned { gap, sigma_top } = w;
        println!("warning: singular gap {gap:.3e} is small against {sigma_top:.3e}; the subspace is ill-determined");
    }
    let mut worst: f64 = 0.0;
    for c in &fit.candidates.candidates {
        worst = worst.max(fitting_residual(c, FitTarget::Subspace(&fit.decomposition))?);
    }
    let eig: Vec<String> = fit.candidates.eigenvalues.iter().map(|v| format!("{v:.3e}")).collect();
    println!("candidate eigenvalues: {}", eig.join(" "));
    println!(
        "{} candidate {}x{} mixing matrices fit the signal subspace (worst residual {worst:.3e}).",
        fit.candidates.len(),
        fit.candidates.m,
        fit.candidates.d
    );
    println!("A single statistic determines the subspace, not the matrix: the solution is not unique.");
    if let Some(path) = &out {
        write_file(path, &write_candidates(&fit.candidates, &cfg.header()))?;
        println!("wrote {path}");
    }
    Ok(())
}
