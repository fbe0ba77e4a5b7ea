//! Synthetic ground truths: conductivity phantoms, source and noise
//! ensembles, and the five-terminal resistor-circle fixture.
//!
//! Every generator is a pure function of its parameters and a seed. Streams
//! that must be independent (sources, noise) draw from child seeds derived
//! with [`derive_seed`].

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::forward::ConductivityField;
use crate::keyvalue::{Entry, KeyValueFile};
use crate::linalg::numerical_rank;
use crate::mesh::Mesh;
use crate::statistics::MeasurementEnsemble;

/// Child seed for stream `index`: SplitMix64 finalizer of the parent seed
/// offset by the stream index times the golden-ratio increment.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut z = parent.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const SOURCE_STREAM: u64 = 0;
pub const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    White,
    /// Autoregressive filter `n_t = Σ_k a_k·n_{t−k} + w_t` applied per
    /// channel to white Gaussian innovations `w_t`.
    Colored { coefficients: Vec<f64> },
}

/// Additive Gaussian measurement noise. `std` is the standard deviation of
/// the white innovations.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub std: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::White,
            std: 0.0,
        }
    }

    pub fn white(std: f64) -> Result<Self> {
        let spec = Self {
            kind: NoiseKind::White,
            std,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn colored(std: f64, coefficients: Vec<f64>) -> Result<Self> {
        let spec = Self {
            kind: NoiseKind::Colored { coefficients },
            std,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.std >= 0.0 && self.std.is_finite()) {
            return Err(Error::Domain(format!("noise std must be >= 0, got {}", self.std)));
        }
        if let NoiseKind::Colored { coefficients } = &self.kind {
            let total: f64 = coefficients.iter().map(|a| a.abs()).sum();
            if !(total < 1.0) {
                return Err(Error::Domain(format!(
                    "coloring filter is not stable: Σ|a_k| = {total} >= 1"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceDistribution {
    /// `±amplitude` with equal probability; all odd moments vanish.
    SymmetricBinary { amplitude: f64 },
    /// Gamma(`shape`, 1) shifted and scaled to zero mean, unit variance.
    /// Third moment `2/√shape`; `shape = 1` is the shifted exponential.
    Skewed { shape: f64 },
}

impl SourceDistribution {
    pub fn third_moment(&self) -> f64 {
        match *self {
            SourceDistribution::SymmetricBinary { .. } => 0.0,
            SourceDistribution::Skewed { shape } => 2.0 / shape.sqrt(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            SourceDistribution::SymmetricBinary { amplitude } => amplitude * amplitude,
            SourceDistribution::Skewed { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub d: usize,
    pub distribution: SourceDistribution,
}

impl SourceSpec {
    pub fn new(d: usize, distribution: SourceDistribution) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("need at least one source".into()));
        }
        match distribution {
            SourceDistribution::SymmetricBinary { amplitude } if !amplitude.is_finite() => {
                return Err(Error::Domain("binary amplitude must be finite".into()));
            }
            SourceDistribution::Skewed { shape } if !(shape > 0.0 && shape.is_finite()) => {
                return Err(Error::Domain(format!("skewed shape must be positive, got {shape}")));
            }
            _ => {}
        }
        Ok(Self { d, distribution })
    }

    /// The default skewed law: zero-mean shifted exponential.
    pub fn skewed(d: usize) -> Result<Self> {
        Self::new(d, SourceDistribution::Skewed { shape: 1.0 })
    }
}

/// `T × d` source samples.
pub fn generate_sources(spec: &SourceSpec, samples: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(samples, spec.d);
    match spec.distribution {
        SourceDistribution::SymmetricBinary { amplitude } => {
            for t in 0..samples {
                for k in 0..spec.d {
                    out[(t, k)] = if rng.random::<bool>() { amplitude } else { -amplitude };
                }
            }
        }
        SourceDistribution::Skewed { shape } => {
            let gamma = Gamma::new(shape, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
            let norm = shape.sqrt();
            for t in 0..samples {
                for k in 0..spec.d {
                    out[(t, k)] = (gamma.sample(&mut rng) - shape) / norm;
                }
            }
        }
    }
    Ok(out)
}

/// `T × channels` Gaussian noise samples.
pub fn generate_noise(channels: usize, noise: &NoiseSpec, samples: usize, seed: u64) -> Result<DMatrix<f64>> {
    noise.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(samples, channels);
    if noise.std == 0.0 {
        return Ok(out);
    }
    for t in 0..samples {
        for c in 0..channels {
            let w: f64 = rng.sample(StandardNormal);
            out[(t, c)] = noise.std * w;
        }
    }
    if let NoiseKind::Colored { coefficients } = &noise.kind {
        for c in 0..channels {
            for t in 0..samples {
                let mut v = out[(t, c)];
                for (k, a) in coefficients.iter().enumerate() {
                    if t > k {
                        v += a * out[(t - k - 1, c)];
                    }
                }
                out[(t, c)] = v;
            }
        }
    }
    Ok(out)
}

/// `y(t) = A·x(t) + n(t)` with sources and noise on independent streams.
pub fn generate_ensemble(
    mixing: &DMatrix<f64>,
    source: &SourceSpec,
    noise: &NoiseSpec,
    samples: usize,
    seed: u64,
) -> Result<MeasurementEnsemble> {
    let (m, d) = mixing.shape();
    if d != source.d {
        return Err(Error::Dimension(format!(
            "mixing matrix has {d} columns but {} sources",
            source.d
        )));
    }
    if d > m || numerical_rank(mixing, 1e-10) < d {
        return Err(Error::Assumption {
            assumption: "B (linearly independent mixing columns)",
            detail: format!("mixing matrix {m}x{d} has numerical rank {}", numerical_rank(mixing, 1e-10)),
        });
    }
    let x = generate_sources(source, samples, derive_seed(seed, SOURCE_STREAM))?;
    let n = generate_noise(m, noise, samples, derive_seed(seed, NOISE_STREAM))?;
    MeasurementEnsemble::new(x * mixing.transpose() + n)
}

/// Noise-only ensemble (no sources).
pub fn generate_noise_ensemble(channels: usize, noise: &NoiseSpec, samples: usize, seed: u64) -> Result<MeasurementEnsemble> {
    MeasurementEnsemble::new(generate_noise(channels, noise, samples, derive_seed(seed, NOISE_STREAM))?)
}

/// Linear footprint of the five-terminal resistor circle with one central
/// resistor: four voltage channels (B–E against A) driven by three
/// sources whose signal subspace is aligned with the first three channel
/// axes. Sources are length-4 Walsh sequences, so the sample correlation
/// is exact in floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistorCircleFixture {
    /// `4 × 3`.
    pub mixing: DMatrix<f64>,
}

pub const CIRCLE_CHANNELS: usize = 4;
pub const CIRCLE_SOURCES: usize = 3;

const WALSH: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, -1.0],
    [1.0, -1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

impl ResistorCircleFixture {
    pub fn sources(&self, repeats: usize) -> DMatrix<f64> {
        let rows = 4 * repeats.max(1);
        DMatrix::from_fn(rows, CIRCLE_SOURCES, |t, k| WALSH[t % 4][k])
    }

    /// Noise-free ensemble `y(t) = A·x(t)` over `4·repeats` samples.
    pub fn ensemble(&self, repeats: usize) -> Result<MeasurementEnsemble> {
        MeasurementEnsemble::new(self.sources(repeats) * self.mixing.transpose())
    }
}

pub fn make_resistor_circle_fixture() -> ResistorCircleFixture {
    ResistorCircleFixture {
        mixing: DMatrix::from_row_slice(
            CIRCLE_CHANNELS,
            CIRCLE_SOURCES,
            &[3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        ),
    }
}

/// Disk-shaped region of altered conductivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inclusion {
    pub center: [f64; 2],
    pub radius: f64,
    /// Multiplier applied to the background conductivity.
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhantomWarning {
    /// The inclusion's disk contains no element centroid.
    EmptyInclusion { index: usize },
}

#[derive(Debug, Clone)]
pub struct Phantom<'m> {
    pub mesh: &'m Mesh,
    pub field: ConductivityField,
    pub inclusions: Vec<Inclusion>,
    /// Element positions covered by each inclusion.
    pub members: Vec<Vec<usize>>,
    pub warnings: Vec<PhantomWarning>,
}

/// Background conductivity with `contrast × background` on every element
/// whose centroid lies inside an inclusion. Later inclusions win on overlap.
pub fn make_phantom<'m>(mesh: &'m Mesh, background: f64, inclusions: &[Inclusion]) -> Result<Phantom<'m>> {
    let n = mesh.element_count();
    let mut sigma = vec![background; n];
    let mut members = Vec::with_capacity(inclusions.len());
    let mut warnings = Vec::new();
    let centroids = mesh
        .elements()
        .iter()
        .map(|e| mesh.centroid(e))
        .collect::<Result<Vec<_>>>()?;
    for (index, inc) in inclusions.iter().enumerate() {
        if !(inc.contrast > 0.0 && inc.contrast.is_finite()) {
            return Err(Error::Domain(format!(
                "inclusion {index}: contrast must be positive, got {}",
                inc.contrast
            )));
        }
        if !(inc.radius >= 0.0) {
            return Err(Error::Domain(format!("inclusion {index}: negative radius")));
        }
        let covered: Vec<usize> = centroids
            .iter()
            .enumerate()
            .filter(|(_, c)| (c[0] - inc.center[0]).hypot(c[1] - inc.center[1]) <= inc.radius)
            .map(|(e, _)| e)
            .collect();
        if covered.is_empty() && inc.contrast != 1.0 {
            warnings.push(PhantomWarning::EmptyInclusion { index });
        }
        for &e in &covered {
            sigma[e] = background * inc.contrast;
        }
        members.push(covered);
    }
    Ok(Phantom {
        mesh,
        field: ConductivityField::new(sigma)?,
        inclusions: inclusions.to_vec(),
        members,
        warnings,
    })
}

/// Parses `name = cx cy radius contrast` entries.
pub fn parse_inclusions(entries: &[Entry]) -> Result<Vec<Inclusion>> {
    entries
        .iter()
        .map(|e| {
            let v = e
                .value
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .ok()
                .filter(|v| v.len() == 4)
                .ok_or_else(|| Error::Format {
                    line: e.line,
                    message: format!("inclusion {}: expected `cx cy radius contrast`, found `{}`", e.key, e.value),
                })?;
            Ok(Inclusion {
                center: [v[0], v[1]],
                radius: v[2],
                contrast: v[3],
            })
        })
        .collect()
}

/// Phantom file: `[phantom] background = σ` and an `[inclusions]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomDescription {
    pub background: f64,
    pub inclusions: Vec<Inclusion>,
}

impl PhantomDescription {
    pub fn from_keyvalue(kv: &KeyValueFile) -> Result<Self> {
        Ok(Self {
            background: kv.parse_value("phantom", "background")?.unwrap_or(1.0),
            inclusions: parse_inclusions(kv.entries("inclusions"))?,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_keyvalue(&text.parse()?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_keyvalue(&KeyValueFile::load(path)?)
    }

    pub fn build<'m>(&self, mesh: &'m Mesh) -> Result<Phantom<'m>> {
        make_phantom(mesh, self.background, &self.inclusions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(derive_seed(7, 0), derive_seed(7, 0));
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }

    #[test]
    fn noiseless_samples_in_column_span() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, -0.3, 2.0, 0.0, 1.0, 1.2, -0.7]);
        let src = SourceSpec::new(2, SourceDistribution::SymmetricBinary { amplitude: 1.0 }).unwrap();
        let e = generate_ensemble(&a, &src, &NoiseSpec::none(), 200, 3).unwrap();
        let q = a.clone().qr().q();
        let proj = &q * q.transpose();
        for t in 0..e.sample_count() {
            let y = e.sample(t);
            assert!((&y - &proj * &y).norm() <= 1e-12);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let src = SourceSpec::skewed(1).unwrap();
        let noise = NoiseSpec::colored(0.3, vec![0.5]).unwrap();
        let e1 = generate_ensemble(&a, &src, &noise, 500, 11).unwrap();
        let e2 = generate_ensemble(&a, &src, &noise, 500, 11).unwrap();
        let e3 = generate_ensemble(&a, &src, &noise, 500, 12).unwrap();
        assert_eq!(e1, e2);
        assert_ne!(e1, e3);
    }

    #[test]
    fn dependent_columns_rejected() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let src = SourceSpec::skewed(2).unwrap();
        let err = generate_ensemble(&a, &src, &NoiseSpec::none(), 10, 0).unwrap_err();
        assert!(matches!(err, Error::Assumption { assumption, .. } if assumption.starts_with('B')));
    }

    #[test]
    fn unstable_filter_rejected() {
        assert!(NoiseSpec::colored(1.0, vec![0.7, -0.4]).is_err());
        assert!(NoiseSpec::white(-1.0).is_err());
    }

    #[test]
    fn walsh_fixture_correlation_is_exact() {
        let fx = make_resistor_circle_fixture();
        let x = fx.sources(1);
        assert_eq!(x.transpose() * &x / 4.0, DMatrix::identity(3, 3));
        let e = fx.ensemble(2).unwrap();
        assert_eq!(e.channel_count(), 4);
        assert_eq!(e.sample_count(), 8);
    }

    #[test]
    fn phantom_cases() {
        let mesh = build_disk_mesh(1.0, 1).unwrap();
        let p = make_phantom(&mesh, 2.0, &[]).unwrap();
        assert!(p.field.values().iter().all(|&s| s == 2.0));

        let target = 13;
        let c = mesh.centroid(&mesh.elements()[target]).unwrap();
        let inc = Inclusion {
            center: c,
            radius: 0.05,
            contrast: 10.0,
        };
        let p = make_phantom(&mesh, 1.0, &[inc]).unwrap();
        let high: Vec<usize> = (0..32).filter(|&e| p.field.values()[e] == 10.0).collect();
        assert_eq!(high, vec![target]);
        assert!(p.warnings.is_empty());

        let outside = Inclusion {
            center: [5.0, 5.0],
            radius: 0.5,
            contrast: 3.0,
        };
        let p = make_phantom(&mesh, 1.0, &[outside]).unwrap();
        assert_eq!(p.warnings, vec![PhantomWarning::EmptyInclusion { index: 0 }]);
        assert!(p.field.values().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn description_file() {
        let d = PhantomDescription::parse("[phantom]\nbackground = 0.5\n[inclusions]\na = 0.3 0.0 0.2 4\n").unwrap();
        assert_eq!(d.background, 0.5);
        assert_eq!(d.inclusions, vec![Inclusion { center: [0.3, 0.0], radius: 0.2, contrast: 4.0 }]);
        let mesh = build_disk_mesh(1.0, 2).unwrap();
        let p = d.build(&mesh).unwrap();
        assert!(p.field.values().iter().any(|&s| s == 2.0));
        let err = PhantomDescription::parse("[inclusions]\n\na = 0.3 0.0 0.2\n").unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }));
    }
}
