//! Versioned experiment configuration.
//!
//! A config file is a JSON object with a `version`, an optional `seed` and
//! exactly one experiment block named after the subcommand that runs it.
//! Blocks for the Monte Carlo experiments reuse the core config types; the
//! seed is injected from the top level so one value drives every stream.

use std::path::Path;

use hitlab_core::gauss::ProcessSpec;
use hitlab_core::hitlab::{DichotomyConfig, HittingExperiment, ImageConfig, KernelCheckConfig, SharpnessConfig};
use hitlab_core::metric::{MetricDescriptor, MetricSpec, PointCloud};
use hitlab_core::potential::{KernelSpec, RadialKernel};
use hitlab_core::sets::{build_cantor_lambda, build_e_phi_at, build_nu_pair, CantorTree, ScalingProfile};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Dimension,
    Capacity,
    ConstructSet,
    Hitting,
    Polarity,
    Sharpness,
    KernelCheck,
    ImageMeasure,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Simulate,
        Command::Dimension,
        Command::Capacity,
        Command::ConstructSet,
        Command::Hitting,
        Command::Polarity,
        Command::Sharpness,
        Command::KernelCheck,
        Command::ImageMeasure,
    ];

    /// Key of the config block and name of the subcommand.
    pub fn key(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Dimension => "dimension",
            Command::Capacity => "capacity",
            Command::ConstructSet => "construct_set",
            Command::Hitting => "hitting",
            Command::Polarity => "polarity",
            Command::Sharpness => "sharpness",
            Command::KernelCheck => "kernel_check",
            Command::ImageMeasure => "image_measure",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::ConstructSet => "construct-set",
            Command::KernelCheck => "kernel-check",
            Command::ImageMeasure => "image-measure",
            c => c.key(),
        }
    }

    fn seeded(self) -> bool {
        matches!(
            self,
            Command::Hitting | Command::Polarity | Command::Sharpness | Command::KernelCheck | Command::ImageMeasure
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub process: ProcessSpec,
    pub n: usize,
    pub n_paths: usize,
    /// Write every path to `paths.csv`.
    #[serde(default)]
    pub write_paths: bool,
    /// Binary path cache; reused when it matches the process, seed and sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<String>,
}

/// Point cloud sources shared by `dimension` and `capacity`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CloudSource {
    Interval { a: f64, b: f64, n: usize },
    Cantor { lambda: f64, depth: usize },
    EPhi { profile: ScalingProfile, origin: f64, l0: f64, depth: usize },
    Points { points: Vec<Vec<f64>>, resolution: f64 },
    Csv { path: String, resolution: f64 },
}

impl CloudSource {
    pub fn build(&self, metric: &MetricSpec) -> hitlab_core::Result<PointCloud> {
        let m = MetricDescriptor::from_spec(metric)?;
        match self {
            CloudSource::Interval { a, b, n } => PointCloud::interval_grid(*a, *b, *n, m),
            CloudSource::Cantor { lambda, depth } => build_cantor_lambda(*lambda, *depth)?.leaf_cloud(m),
            CloudSource::EPhi { profile, origin, l0, depth } => build_e_phi_at(*profile, *origin, *l0, *depth)?.leaf_cloud(m),
            CloudSource::Points { points, resolution } => {
                let dim = points.first().map_or(0, Vec::len);
                if points.iter().any(|p| p.len() != dim) {
                    return Err(hitlab_core::Error::Shape("points must share one dimension".into()));
                }
                PointCloud::new(dim, points.concat(), *resolution, m)
            }
            CloudSource::Csv { path, resolution } => {
                let text = std::fs::read_to_string(path)?;
                PointCloud::from_csv(&text, *resolution, m)
            }
        }
    }
}

fn euclidean() -> MetricSpec {
    MetricSpec::Euclidean
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionBlock {
    pub cloud: CloudSource,
    #[serde(default = "euclidean")]
    pub metric: MetricSpec,
    pub r_max: f64,
    pub r_min: f64,
    pub n_radii: usize,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_iter() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityBlock {
    pub cloud: CloudSource,
    #[serde(default = "euclidean")]
    pub metric: MetricSpec,
    pub kernel: KernelSpec,
    /// Truncation ladder; the capacity is reported at every rung.
    pub r0: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_iter")]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstructSetBlock {
    Cantor { lambda: f64, depth: usize },
    EPhi { profile: ScalingProfile, #[serde(default)] origin: f64, l0: f64, depth: usize },
    NuPair { alpha: f64, beta: f64, l0: f64, depth: usize },
}

impl ConstructSetBlock {
    pub fn build(&self) -> hitlab_core::Result<Vec<(&'static str, CantorTree)>> {
        Ok(match *self {
            ConstructSetBlock::Cantor { lambda, depth } => vec![("set", build_cantor_lambda(lambda, depth)?)],
            ConstructSetBlock::EPhi { profile, origin, l0, depth } => vec![("set", build_e_phi_at(profile, origin, l0, depth)?)],
            ConstructSetBlock::NuPair { alpha, beta, l0, depth } => {
                let (e1, e2) = build_nu_pair(alpha, beta, l0, depth)?;
                vec![("e1", e1), ("e2", e2)]
            }
        })
    }
}

/// A parsed experiment block.
#[derive(Debug, Clone)]
pub enum Block {
    Simulate(SimulateBlock),
    Dimension(DimensionBlock),
    Capacity(CapacityBlock),
    ConstructSet(ConstructSetBlock),
    Hitting(HittingExperiment),
    Polarity(DichotomyConfig),
    Sharpness(SharpnessConfig),
    KernelCheck(KernelCheckConfig),
    ImageMeasure(ImageConfig),
}

impl Block {
    pub fn command(&self) -> Command {
        match self {
            Block::Simulate(_) => Command::Simulate,
            Block::Dimension(_) => Command::Dimension,
            Block::Capacity(_) => Command::Capacity,
            Block::ConstructSet(_) => Command::ConstructSet,
            Block::Hitting(_) => Command::Hitting,
            Block::Polarity(_) => Command::Polarity,
            Block::Sharpness(_) => Command::Sharpness,
            Block::KernelCheck(_) => Command::KernelCheck,
            Block::ImageMeasure(_) => Command::ImageMeasure,
        }
    }

    fn to_value(&self) -> Value {
        let v = match self {
            Block::Simulate(b) => serde_json::to_value(b),
            Block::Dimension(b) => serde_json::to_value(b),
            Block::Capacity(b) => serde_json::to_value(b),
            Block::ConstructSet(b) => serde_json::to_value(b),
            Block::Hitting(b) => serde_json::to_value(b),
            Block::Polarity(b) => serde_json::to_value(b),
            Block::Sharpness(b) => serde_json::to_value(b),
            Block::KernelCheck(b) => serde_json::to_value(b),
            Block::ImageMeasure(b) => serde_json::to_value(b),
        };
        let mut v = v.expect("config blocks serialize");
        if let Value::Object(m) = &mut v {
            m.remove("seed");
        }
        v
    }

    /// Semantic checks beyond the schema, without running anything heavy.
    pub fn validate(&self) -> hitlab_core::Result<()> {
        use hitlab_core::Error;
        match self {
            Block::Simulate(b) => {
                b.process.validate()?;
                if b.n == 0 || b.n_paths == 0 {
                    return Err(Error::Precondition("n and n_paths must be positive".into()));
                }
                Ok(())
            }
            Block::Dimension(b) => {
                MetricDescriptor::from_spec(&b.metric)?;
                if !(b.r_max > b.r_min && b.r_min > 0.0) || b.n_radii < 2 {
                    return Err(Error::Precondition("need 0 < r_min < r_max and n_radii ≥ 2".into()));
                }
                Ok(())
            }
            Block::Capacity(b) => {
                MetricDescriptor::from_spec(&b.metric)?;
                if b.r0.is_empty() {
                    return Err(Error::Precondition("r0 ladder must be non-empty".into()));
                }
                for &r0 in &b.r0 {
                    RadialKernel::new(b.kernel, r0)?;
                }
                Ok(())
            }
            Block::ConstructSet(b) => match *b {
                ConstructSetBlock::EPhi { profile, .. } => profile.validate(),
                ConstructSetBlock::NuPair { alpha, beta, .. } => {
                    ScalingProfile::PowerLogPlus { alpha, beta }.validate()?;
                    ScalingProfile::PowerLogMinus { alpha, beta }.validate()
                }
                ConstructSetBlock::Cantor { .. } => Ok(()),
            },
            Block::Hitting(b) => b.validate(),
            Block::Polarity(b) => b.validate(),
            Block::Sharpness(b) => b.validate(),
            Block::KernelCheck(b) => b.validate(),
            Block::ImageMeasure(b) => b.validate(),
        }
    }
}

/// Fully resolved configuration: schema version, seed and one block.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub block: Block,
}

impl ExperimentConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: invalid JSON: {e}", path.display())))?;
        Self::from_value(value, seed_override)
    }

    pub fn from_value(value: Value, seed_override: Option<u64>) -> Result<Self, CliError> {
        let Value::Object(mut top) = value else {
            return Err(CliError::Config("config must be a JSON object".into()));
        };
        let version = match top.remove("version") {
            Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION as u64) => SCHEMA_VERSION,
            Some(v) => return Err(CliError::Config(format!("version: unsupported schema version {v}, expected {SCHEMA_VERSION}"))),
            None => return Err(CliError::Config("version: missing field".into())),
        };
        let file_seed = match top.remove("seed") {
            None => 0,
            Some(v) => v.as_u64().ok_or_else(|| CliError::Config(format!("seed: expected an unsigned integer, got {v}")))?,
        };
        let seed = seed_override.unwrap_or(file_seed);
        let mut found = Vec::new();
        for key in top.keys() {
            match Command::ALL.iter().find(|c| c.key() == key) {
                Some(c) => found.push(*c),
                None => return Err(CliError::Config(format!("{key}: unknown field"))),
            }
        }
        let command = match found.as_slice() {
            [c] => *c,
            [] => return Err(CliError::Config("config needs one experiment block".into())),
            _ => return Err(CliError::Config("config must hold exactly one experiment block".into())),
        };
        let key = command.key();
        let mut body = top.remove(key).expect("key present");
        check_ranges(&body, key)?;
        if command.seeded() {
            match &mut body {
                Value::Object(m) => {
                    if m.contains_key("seed") {
                        return Err(CliError::Config(format!("{key}.seed: set the seed at the top level")));
                    }
                    m.insert("seed".into(), Value::from(seed));
                }
                _ => return Err(CliError::Config(format!("{key}: expected an object"))),
            }
        }
        let block = parse_block(command, body).map_err(|e| CliError::Config(format!("{key}: {e}")))?;
        Ok(Self { version, seed, block })
    }

    /// The resolved config as written back to disk and embedded in reports.
    pub fn to_value(&self) -> Value {
        let mut m = serde_json::Map::new();
        m.insert("version".into(), Value::from(self.version));
        m.insert("seed".into(), Value::from(self.seed));
        m.insert(self.block.command().key().into(), self.block.to_value());
        Value::Object(m)
    }
}

fn parse_block(command: Command, body: Value) -> serde_json::Result<Block> {
    Ok(match command {
        Command::Simulate => Block::Simulate(serde_json::from_value(body)?),
        Command::Dimension => Block::Dimension(serde_json::from_value(body)?),
        Command::Capacity => Block::Capacity(serde_json::from_value(body)?),
        Command::ConstructSet => Block::ConstructSet(serde_json::from_value(body)?),
        Command::Hitting => Block::Hitting(serde_json::from_value(body)?),
        Command::Polarity => Block::Polarity(serde_json::from_value(body)?),
        Command::Sharpness => Block::Sharpness(serde_json::from_value(body)?),
        Command::KernelCheck => Block::KernelCheck(serde_json::from_value(body)?),
        Command::ImageMeasure => Block::ImageMeasure(serde_json::from_value(body)?),
    })
}

/// Range checks on well-known parameter names anywhere in a block, so the
/// error carries the full field path.
fn check_ranges(v: &Value, path: &str) -> Result<(), CliError> {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let here = format!("{path}.{k}");
                if let Some(f) = x.as_f64() {
                    let ok = match k.as_str() {
                        "hurst" => f > 0.0 && f < 1.0,
                        "lambda" => f > 0.0 && f < 0.5,
                        "dim" | "d" => f >= 1.0,
                        "n_paths" => f >= 1.0,
                        _ => true,
                    };
                    if !ok {
                        let range = match k.as_str() {
                            "hurst" => "(0, 1)",
                            "lambda" => "(0, 1/2)",
                            _ => "[1, ∞)",
                        };
                        return Err(CliError::Config(format!("{here}: value {f} outside {range}")));
                    }
                }
                check_ranges(x, &here)?;
            }
            Ok(())
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                check_ranges(x, &format!("{path}[{i}]"))?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}
