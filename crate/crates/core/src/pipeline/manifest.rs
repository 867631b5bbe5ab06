use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ExperimentConfig, Paths, SEED_DERIVATION};
use crate::error::{DotError, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEntry {
    pub noise_level: f64,
    pub seed: u64,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub split: Split,
    pub index: usize,
    pub phantom_seed: u64,
    pub phantom: PathBuf,
    /// One entry per configured noise level, in config order.
    pub measurements: Vec<MeasurementEntry>,
}

/// Index of a generated dataset; paths are relative to the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub code_version: String,
    /// SHA-256 of the data-defining config (master seed, domain and dataset
    /// sections) and the code version.
    pub config_hash: String,
    pub master_seed: u64,
    pub seed_derivation: String,
    pub noise_levels: Vec<f64>,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn new(cfg: &ExperimentConfig, samples: Vec<SampleEntry>) -> Result<Self> {
        Ok(Self {
            version: MANIFEST_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(cfg)?,
            master_seed: cfg.master_seed,
            seed_derivation: SEED_DERIVATION.to_string(),
            noise_levels: cfg.dataset.noise_levels.clone(),
            samples,
        })
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &SampleEntry> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| DotError::parse("manifest", e))
    }

    /// Loads the manifest of `paths` and checks it against `cfg`: same
    /// config hash and every referenced file present.
    pub fn load(paths: &Paths, cfg: &ExperimentConfig) -> Result<Self> {
        let path = paths.manifest();
        if !path.exists() {
            return Err(DotError::MissingPrerequisite {
                path,
                step: "generate".into(),
            });
        }
        let manifest: Self = serde_json::from_str(&crate::io::read_text(&path)?)
            .map_err(|e| DotError::parse("manifest", e))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(DotError::parse(
                "manifest",
                format!("unsupported version {}", manifest.version),
            ));
        }
        if manifest.config_hash != config_hash(cfg)? {
            return Err(DotError::InvalidArgument(format!(
                "{} was generated with a different configuration; rerun `generate`",
                path.display()
            )));
        }
        for s in &manifest.samples {
            let files = std::iter::once(&s.phantom).chain(s.measurements.iter().map(|m| &m.path));
            for f in files {
                let full = paths.resolve(f);
                if !full.exists() {
                    return Err(DotError::MissingPrerequisite {
                        path: full,
                        step: "generate".into(),
                    });
                }
            }
        }
        Ok(manifest)
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    #[derive(Serialize)]
    struct DataDefinition<'a> {
        master_seed: u64,
        domain: &'a super::DomainSection,
        dataset: &'a super::DatasetSection,
    }
    let canonical = DataDefinition {
        master_seed: cfg.master_seed,
        domain: &cfg.domain,
        dataset: &cfg.dataset,
    };
    let text = toml::to_string(&canonical).map_err(|e| DotError::parse("config", e))?;
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.update(b"\0");
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub(super) fn relative(split: Split, name: impl AsRef<Path>) -> PathBuf {
    Path::new(split.dir()).join(name)
}
