//! Run configuration loaded from a TOML file.

use std::fmt;
use std::path::{Path, PathBuf};

use longirad::eval::DEFAULT_K;
use longirad::fusion::FeatureConfig;
use longirad::gbdt::TrainConfig;
use longirad::phantom::PhantomSpec;
use longirad::radiomics::catalog::CATALOG_VERSION;
use serde::Deserialize;

/// Marks an error as a configuration problem (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoldsConfig {
    pub k: usize,
}

impl Default for FoldsConfig {
    fn default() -> Self {
        FoldsConfig { k: DEFAULT_K }
    }
}

/// Unknown keys are rejected by the flattened spec.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    pub n_patients: usize,
    pub cases_per_patient: usize,
    #[serde(flatten)]
    pub spec: PhantomSpec,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            n_patients: 100,
            cases_per_patient: 2,
            spec: PhantomSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset_root: PathBuf,
    output_dir: PathBuf,
    #[serde(default = "default_catalog")]
    catalog_version: u32,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    strict: bool,
    #[serde(default)]
    deep_features: Option<PathBuf>,
    #[serde(default)]
    features: FeatureConfig,
    #[serde(default)]
    train: TrainConfig,
    #[serde(default)]
    folds: FoldsConfig,
    #[serde(default)]
    phantom: PhantomConfig,
}

fn default_catalog() -> u32 {
    CATALOG_VERSION
}

/// Fully resolved configuration. Paths are absolute or relative to the
/// working directory; every random stream is seeded from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub strict: bool,
    pub deep_features: Option<PathBuf>,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub folds: FoldsConfig,
    pub phantom: PhantomConfig,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub strict: bool,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base, overrides)
    }

    /// Parses TOML text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, overrides: Overrides) -> anyhow::Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        if raw.catalog_version != CATALOG_VERSION {
            return Err(config_err(format!(
                "catalog_version {} is not supported (this build has {CATALOG_VERSION})",
                raw.catalog_version
            )));
        }
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let seed = overrides.seed.unwrap_or(raw.seed);
        let mut train = raw.train;
        train.seed = seed;
        train.validate().map_err(|e| config_err(e.to_string()))?;
        let mut phantom = raw.phantom;
        phantom.spec.seed = seed;
        phantom.spec.validate().map_err(|e| config_err(e.to_string()))?;
        if raw.folds.k < 2 {
            return Err(config_err("folds.k must be at least 2"));
        }
        raw.features
            .compartments
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        raw.features.session_regex().map_err(|e| config_err(e.to_string()))?;
        if !(2..=4096).contains(&raw.features.radiomics.bins) {
            return Err(config_err("features.radiomics.bins must be in 2..=4096"));
        }
        Ok(RunConfig {
            dataset_root: resolve(raw.dataset_root),
            output_dir: resolve(raw.output_dir),
            seed,
            strict: raw.strict || overrides.strict,
            deep_features: raw.deep_features.map(resolve),
            features: raw.features,
            train,
            folds: raw.folds,
            phantom,
        })
    }

    /// Checks that the dataset root exists; commands that read it call this.
    pub fn require_dataset(&self) -> anyhow::Result<()> {
        if !self.dataset_root.is_dir() {
            return Err(config_err(format!(
                "dataset_root {} is not a directory",
                self.dataset_root.display()
            )));
        }
        if let Some(p) = &self.deep_features {
            if !p.is_file() {
                return Err(config_err(format!("deep_features {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}
