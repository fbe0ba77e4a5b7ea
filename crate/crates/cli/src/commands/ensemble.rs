use eit_core::phantom::{
    derive_seed, generate_ensemble, generate_noise, make_resistor_circle_fixture, NoiseSpec, SourceDistribution,
    SourceSpec, CIRCLE_CHANNELS, CIRCLE_SOURCES, NOISE_STREAM,
};
use eit_core::statistics::MeasurementEnsemble;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::EnsembleArgs;

/// Stream for the random mixing matrix, apart from sources and noise.
const MIXING_STREAM: u64 = 2;

pub fn run(config: Option<&str>, seed: Option<u64>, args: EnsembleArgs) -> CliResult<()> {
    let mut cfg = RunConfig::new(config, seed, "ensemble", "ensemble")?;
    let mixing_kind: String = cfg.with_default("mixing", args.mixing, "circle".to_string())?;
    let (default_m, default_d) = (CIRCLE_CHANNELS, CIRCLE_SOURCES);
    let m = cfg.with_default("channels", args.channels, default_m)?;
    let d = cfg.with_default("sources", args.sources, default_d)?;
    let distribution: String = cfg.with_default("distribution", args.distribution, "skewed".to_string())?;
    let samples = cfg.with_default("samples", args.samples, 10_000)?;
    let std = cfg.with_default("noise", args.noise, 0.0)?;
    let ar: Option<String> = cfg.optional("ar", args.ar)?;
    let out: String = cfg.required("out", args.out)?;

    let mixing = match mixing_kind.as_str() {
        "circle" => {
            if (m, d) != (CIRCLE_CHANNELS, CIRCLE_SOURCES) {
                return Err(CliError::domain(format!(
                    "circle mixing is {CIRCLE_CHANNELS}x{CIRCLE_SOURCES}, asked for {m}x{d}"
                )));
            }
            make_resistor_circle_fixture().mixing
        }
        "random" => generate_noise(d, &NoiseSpec::white(1.0)?, m, derive_seed(cfg.seed(), MIXING_STREAM))?,
        other => return Err(CliError::usage(format!("unknown mixing `{other}` (circle, random)"))),
    };
    let noise = match &ar {
        None => NoiseSpec::white(std)?,
        Some(list) => {
            let coefficients = list
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::usage(format!("bad --ar list `{list}`")))?;
            NoiseSpec::colored(std, coefficients)?
        }
    };
    let ensemble = match distribution.as_str() {
        "walsh" => {
            if d != CIRCLE_SOURCES || samples % 4 != 0 {
                return Err(CliError::domain(format!(
                    "walsh sources need {CIRCLE_SOURCES} sources and a multiple of 4 samples"
                )));
            }
            let fixture = make_resistor_circle_fixture();
            let x = fixture.sources(samples / 4);
            let n = generate_noise(m, &noise, samples, derive_seed(cfg.seed(), NOISE_STREAM))?;
            MeasurementEnsemble::new(x * mixing.transpose() + n)?
        }
        "skewed" => generate_ensemble(&mixing, &SourceSpec::skewed(d)?, &noise, samples, cfg.seed())?,
        "binary" => {
            let spec = SourceSpec::new(d, SourceDistribution::SymmetricBinary { amplitude: 1.0 })?;
            generate_ensemble(&mixing, &spec, &noise, samples, cfg.seed())?
        }
        other => return Err(CliError::usage(format!("unknown distribution `{other}` (skewed, binary, walsh)"))),
    };
    let mut buf = Vec::new();
    ensemble.write_csv(&mut buf, &cfg.header())?;
    std::fs::write(&out, buf).map_err(|e| CliError::usage(format!("cannot write {out}: {e}")))?;
    println!("wrote {out}: {samples} samples of {m} channels");
    Ok(())
}
