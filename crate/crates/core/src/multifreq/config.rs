//! Sweep description files.
//!
//! ```text
//! [mesh]
//! radius = 1.0
//! refine = 1
//!
//! [model]
//! sigma0 = 1.0        # background conductivity at low frequency
//! dispersion = 0.0    # σ∞ = σ0·(1 + dispersion) unless sigma_inf is given
//! sigma_inf = 1.5     # optional background conductivity at high frequency
//! tau = 1e-4          # relaxation time, seconds
//!
//! [inclusions]
//! a = 0.3 0.0 0.25 2.0    # cx cy radius contrast
//!
//! [elements]
//! 5 = 2.0                 # σ0 of element position 5 (σ∞ scales along)
//! 6 = 1.0 3.0 2e-4        # σ0 σ∞ τ of element position 6
//!
//! [sweep]
//! pairing = cross         # cross | zipped
//! observation = full      # full | boundary
//! ground = 0              # node id
//!
//! [frequencies]
//! f0 = 1e3
//!
//! [patterns]              # electrode id:current pairs
//! p0 = 0:1.0 8:-1.0
//!
//! [nodal_patterns]        # node id:current pairs, or chain = current
//! chain = 1.0
//! ```

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forward::CurrentPattern;
use crate::keyvalue::{Entry, KeyValueFile};
use crate::mesh::{build_disk_mesh, Mesh};
use crate::phantom::{make_phantom, parse_inclusions, Inclusion};

use super::{nodal_chain_patterns, Observation, Pairing, SweepConfig, TissueModel};

#[derive(Debug, Clone, PartialEq)]
enum PatternSpec {
    Electrodes(Vec<(usize, f64)>),
    Nodes(Vec<(usize, f64)>),
    Chain(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementModel {
    pub sigma0: f64,
    pub sigma_inf: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFile {
    pub radius: f64,
    pub refine: u32,
    pub sigma0: f64,
    pub dispersion: f64,
    pub tau: f64,
    pub inclusions: Vec<Inclusion>,
    pub sigma_inf: Option<f64>,
    /// Per-element parameters applied after inclusions.
    pub overrides: Vec<(usize, ElementModel)>,
    pub pairing: Pairing,
    pub observation: Observation,
    pub ground: Option<usize>,
    pub frequencies: Vec<f64>,
    patterns: Vec<PatternSpec>,
    source: KeyValueFile,
}

fn format_err(e: &Entry, message: impl Into<String>) -> Error {
    Error::Format {
        line: e.line,
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(e: &Entry, text: &str, what: &str) -> Result<T> {
    text.parse()
        .map_err(|_| format_err(e, format!("{}: bad {what} `{text}`", e.key)))
}

fn parse_pairs(e: &Entry) -> Result<Vec<(usize, f64)>> {
    e.value
        .split_whitespace()
        .map(|tok| {
            let (id, cur) = tok
                .split_once(':')
                .ok_or_else(|| format_err(e, format!("{}: expected id:current, found `{tok}`", e.key)))?;
            Ok((parse_num(e, id, "id")?, parse_num(e, cur, "current")?))
        })
        .collect()
}

/// Parses a sweep description. Missing sections fall back to defaults,
/// except that at least one frequency and one pattern are required.
pub fn parse_sweep(text: &str) -> Result<SweepFile> {
    let kv: KeyValueFile = text.parse()?;
    let known = [
        "", "mesh", "model", "inclusions", "elements", "sweep", "frequencies", "patterns", "nodal_patterns",
    ];
    if let Some(s) = kv.sections().iter().find(|s| !known.contains(&s.name.as_str())) {
        let line = s.entries.first().map_or(0, |e| e.line);
        return Err(Error::Format {
            line,
            message: format!("unknown section [{}]", s.name),
        });
    }

    let pairing = match kv.entry("sweep", "pairing") {
        None => Pairing::CrossProduct,
        Some(e) => match e.value.as_str() {
            "cross" => Pairing::CrossProduct,
            "zipped" => Pairing::Zipped,
            other => return Err(format_err(e, format!("pairing must be cross or zipped, got `{other}`"))),
        },
    };
    let observation = match kv.entry("sweep", "observation") {
        None => Observation::Full,
        Some(e) => match e.value.as_str() {
            "full" => Observation::Full,
            "boundary" => Observation::Boundary,
            other => return Err(format_err(e, format!("observation must be full or boundary, got `{other}`"))),
        },
    };

    let inclusions = parse_inclusions(kv.entries("inclusions"))?;

    let overrides = kv
        .entries("elements")
        .iter()
        .map(|e| {
            let v: Vec<f64> = e
                .value
                .split_whitespace()
                .map(|t| parse_num(e, t, "parameter"))
                .collect::<Result<_>>()?;
            let model = match v.as_slice() {
                [s0] => ElementModel { sigma0: *s0, sigma_inf: None, tau: None },
                [s0, si, t] => ElementModel { sigma0: *s0, sigma_inf: Some(*si), tau: Some(*t) },
                _ => return Err(format_err(e, format!("element {}: expected `σ0` or `σ0 σ∞ τ`", e.key))),
            };
            Ok((parse_num(e, &e.key, "element position")?, model))
        })
        .collect::<Result<Vec<_>>>()?;

    let frequencies = kv
        .entries("frequencies")
        .iter()
        .map(|e| parse_num(e, &e.value, "frequency"))
        .collect::<Result<Vec<f64>>>()?;

    let mut patterns = Vec::new();
    for e in kv.entries("patterns") {
        patterns.push(PatternSpec::Electrodes(parse_pairs(e)?));
    }
    for e in kv.entries("nodal_patterns") {
        if e.key == "chain" {
            patterns.push(PatternSpec::Chain(parse_num(e, &e.value, "current")?));
        } else {
            patterns.push(PatternSpec::Nodes(parse_pairs(e)?));
        }
    }
    if frequencies.is_empty() {
        return Err(Error::Format {
            line: 0,
            message: "sweep needs a [frequencies] section with at least one entry".into(),
        });
    }
    if patterns.is_empty() {
        return Err(Error::Format {
            line: 0,
            message: "sweep needs at least one entry in [patterns] or [nodal_patterns]".into(),
        });
    }

    Ok(SweepFile {
        radius: kv.parse_value("mesh", "radius")?.unwrap_or(1.0),
        refine: kv.parse_value("mesh", "refine")?.unwrap_or(1),
        sigma0: kv.parse_value("model", "sigma0")?.unwrap_or(1.0),
        dispersion: kv.parse_value("model", "dispersion")?.unwrap_or(0.0),
        sigma_inf: kv.parse_value("model", "sigma_inf")?,
        tau: kv.parse_value("model", "tau")?.unwrap_or(1e-4),
        inclusions,
        overrides,
        pairing,
        observation,
        ground: kv.parse_value("sweep", "ground")?,
        frequencies,
        patterns,
        source: kv,
    })
}

impl SweepFile {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        parse_sweep(&std::fs::read_to_string(path)?)
    }

    /// The parsed key/value content, for echoing into output headers.
    pub fn source(&self) -> &KeyValueFile {
        &self.source
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        build_disk_mesh(self.radius, self.refine)
    }

    /// Background model scaled by inclusion contrast, then element
    /// overrides.
    pub fn tissue_model(&self, mesh: &Mesh) -> Result<TissueModel> {
        let contrast = make_phantom(mesh, 1.0, &self.inclusions)?.field;
        let inf = self.sigma_inf.unwrap_or(self.sigma0 * (1.0 + self.dispersion));
        let mut sigma0: Vec<f64> = contrast.values().iter().map(|c| c * self.sigma0).collect();
        let mut sigma_inf: Vec<f64> = contrast.values().iter().map(|c| c * inf).collect();
        let mut tau = vec![self.tau; mesh.element_count()];
        for &(e, m) in &self.overrides {
            if e >= sigma0.len() {
                return Err(Error::Lookup { kind: "element", id: e });
            }
            sigma_inf[e] = m.sigma_inf.unwrap_or(m.sigma0 * inf / self.sigma0);
            sigma0[e] = m.sigma0;
            tau[e] = m.tau.unwrap_or(self.tau);
        }
        TissueModel::new(sigma0, sigma_inf, tau)
    }

    pub fn sweep_config(&self, mesh: &Mesh) -> Result<SweepConfig> {
        let mut patterns = Vec::new();
        for spec in &self.patterns {
            match spec {
                PatternSpec::Electrodes(p) => patterns.push(CurrentPattern::new(p.clone())?),
                PatternSpec::Nodes(p) => patterns.push(CurrentPattern::nodal(p.clone())?),
                PatternSpec::Chain(c) => patterns.extend(nodal_chain_patterns(mesh, *c)?),
            }
        }
        let cfg = SweepConfig {
            frequencies: self.frequencies.clone(),
            patterns,
            pairing: self.pairing,
            observation: self.observation,
            ground: self.ground,
        };
        cfg.check()?;
        Ok(cfg)
    }
}
