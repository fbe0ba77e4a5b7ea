use eit_core::phantom::{make_resistor_circle_fixture, CIRCLE_CHANNELS, CIRCLE_SOURCES};
use eit_core::statistics::correlation;
use eit_core::subspace::{fit_subspace, fitting_residual, write_candidates, FitTarget, SubspaceFit};
use nalgebra::DMatrix;

use crate::config::RunConfig;
use crate::error::{write_file, CliError, CliResult};
use crate::ReproArgs;

/// Entries below this count as zero whatever the tolerance.
const ZERO_FLOOR: f64 = 1e-10;

pub fn run(config: Option<&str>, seed: Option<u64>, args: ReproArgs) -> CliResult<()> {
    let mut cfg = RunConfig::new(config, seed, "repro", "repro")?;
    let tol = cfg.with_default("tolerance", args.tolerance, 1e-8)?;
    let d = cfg.with_default("d", args.d, CIRCLE_SOURCES)?;
    let out: Option<String> = cfg.optional("out", args.out)?;
    if d == 0 || d >= CIRCLE_CHANNELS {
        return Err(CliError::domain(format!("d must be in 1..{CIRCLE_CHANNELS}, got {d}")));
    }
    let fixture = make_resistor_circle_fixture();
    let ensemble = fixture.ensemble(1)?;
    let fit = fit_subspace(correlation(&ensemble, false)?.0, d)?;

    cfg.print_header();
    println!("statistic: correlation of {} Walsh-driven samples", ensemble.sample_count());
    print_matrix(&fit.statistic);
    let spectrum: Vec<String> = fit.decomposition.spectrum.iter().map(|v| format!("{v:.6e}")).collect();
    println!("singular values: {}", spectrum.join(" "));
    let (rows, cols) = fit.projector.factor_shape();
    println!("projector factor: {rows} x {cols}");
    println!("candidates: {}", fit.candidates.len());
    for (k, (c, ev)) in fit.candidates.candidates.iter().zip(&fit.candidates.eigenvalues).enumerate() {
        println!();
        println!("candidate {} (eigenvalue {ev:.3e}):", k + 1);
        print_matrix(c);
    }
    if let Some(path) = &out {
        write_file(path, &write_candidates(&fit.candidates, &cfg.header()))?;
    }
    println!();
    if d != CIRCLE_SOURCES {
        println!("notice: the reference claims are stated for d = {CIRCLE_SOURCES}; checks skipped");
        return Ok(());
    }
    let claims = check_claims(&fit, tol);
    for (name, outcome) in &claims {
        match outcome {
            Ok(()) => println!("claim {name}: ok"),
            Err(why) => println!("claim {name}: FAILED ({why})"),
        }
    }
    match claims.into_iter().find(|(_, o)| o.is_err()) {
        Some((name, Err(why))) => Err(CliError::claim(format!("claim {name} failed: {why}"))),
        _ => Ok(()),
    }
}

fn print_matrix(m: &DMatrix<f64>) {
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{:>10.6}", if v.abs() < 5e-7 { 0.0 } else { *v })).collect();
        println!("  {}", cells.join(" "));
    }
}

type Claim = (&'static str, Result<(), String>);

fn check_claims(fit: &SubspaceFit, tol: f64) -> Vec<Claim> {
    let zero = tol.min(ZERO_FLOOR);
    let (m, d) = (CIRCLE_CHANNELS, CIRCLE_SOURCES);
    let shape = fit.projector.factor_shape();
    let mut claims: Vec<Claim> = vec![
        (
            "projector factor is 12 x 9",
            if shape == (m * d, d * d) { Ok(()) } else { Err(format!("got {} x {}", shape.0, shape.1)) },
        ),
        (
            "nine candidates",
            if fit.candidates.len() == d * d { Ok(()) } else { Err(format!("got {}", fit.candidates.len())) },
        ),
    ];
    let single = fit.candidates.candidates.iter().enumerate().try_for_each(|(k, c)| {
        if c.shape() != (m, d) {
            return Err(format!("candidate {} is {:?}", k + 1, c.shape()));
        }
        let nonzero: Vec<f64> = c.iter().copied().filter(|v| v.abs() > zero).collect();
        match nonzero.as_slice() {
            [v] if (v.abs() - 1.0).abs() <= tol => Ok(()),
            [v] => Err(format!("candidate {} entry is {v}", k + 1)),
            other => Err(format!("candidate {} has {} nonzero entries", k + 1, other.len())),
        }
    });
    claims.push(("each candidate has a single entry of magnitude 1", single));
    let fits = fit.candidates.candidates.iter().enumerate().try_for_each(|(k, c)| {
        let r = fitting_residual(c, FitTarget::Subspace(&fit.decomposition)).map_err(|e| e.to_string())?;
        if r <= tol {
            Ok(())
        } else {
            Err(format!("candidate {} residual {r:e}", k + 1))
        }
    });
    claims.push(("every candidate fits the signal subspace", fits));
    claims
}
