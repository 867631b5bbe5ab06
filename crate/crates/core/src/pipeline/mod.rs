//! Seeded end-to-end experiment: data generation, sensitivity matrix,
//! training, reconstruction with every method, evaluation and comparison.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! manifest.json            sample list, seeds and config hash
//! train/, test/            phantom_<i>.txt, meas_<i>_n<k>.csv (k = noise index)
//! jacobian.bin             sensitivity matrix on the reconstruction grid
//! model.bin                trained learned-SVD model
//! recon/<method>/          recon_<i>_n<k>.csv
//! results/                 per_sample.csv, table.csv, training_loss.csv
//! heatmaps/                PGM images of selected test samples
//! ```

mod config;
mod manifest;
mod stages;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{
    DatasetSection, DomainSection, EvaluationSection, ExperimentConfig, SolversSection,
    TrainingSection,
};
pub use manifest::{DatasetManifest, MeasurementEntry, SampleEntry, Split, MANIFEST_VERSION};
pub use stages::{
    cmd_compare, cmd_evaluate, cmd_generate, cmd_jacobian, cmd_reconstruct, cmd_train, run_all,
    Experiment, Reconstructor,
};

use crate::error::DotError;

/// Reconstruction methods compared by the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lsvd,
    ElasticNet,
    Bregman,
    Tikhonov,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Lsvd,
        Method::ElasticNet,
        Method::Bregman,
        Method::Tikhonov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lsvd => "lsvd",
            Method::ElasticNet => "elasticnet",
            Method::Bregman => "bregman",
            Method::Tikhonov => "tikhonov",
        }
    }

    /// Whether the method needs the sensitivity matrix.
    pub fn uses_jacobian(self) -> bool {
        self != Method::Lsvd
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = DotError;

    fn from_str(s: &str) -> Result<Self, DotError> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                DotError::InvalidArgument(format!(
                    "unknown method `{s}` (lsvd, elasticnet, bregman, tikhonov)"
                ))
            })
    }
}

/// Independent random streams derived from the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    TrainPhantom,
    TestPhantom,
    TrainNoise,
    TestNoise,
    Training,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::TrainPhantom => 1,
            Stream::TestPhantom => 2,
            Stream::TrainNoise => 3,
            Stream::TestNoise => 4,
            Stream::Training => 5,
        }
    }
}

pub const SEED_DERIVATION: &str =
    "seed = splitmix64(splitmix64(master_seed ^ stream) + index) with wrapping add; \
streams: train phantom 1, test phantom 2, train noise 3, test noise 4, training 5; \
noise index = sample_index * noise_level_count + noise_level_index";

/// One step of the splitmix64 generator (Steele, Lea and Flood).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of item `index` in `stream`; see [`SEED_DERIVATION`].
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream.tag()).wrapping_add(index))
}

/// Artifact paths relative to an output directory.
#[derive(Clone, Debug)]
pub struct Paths {
    pub root: PathBuf,
}

impl Paths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn jacobian(&self) -> PathBuf {
        self.root.join("jacobian.bin")
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model.bin")
    }

    pub fn results(&self) -> PathBuf {
        self.root.join("results")
    }

    pub fn per_sample(&self) -> PathBuf {
        self.results().join("per_sample.csv")
    }

    pub fn table(&self) -> PathBuf {
        self.results().join("table.csv")
    }

    pub fn heatmaps(&self) -> PathBuf {
        self.root.join("heatmaps")
    }

    pub fn recon(&self, method: Method, index: usize, noise_index: usize) -> PathBuf {
        self.root
            .join("recon")
            .join(method.name())
            .join(format!("recon_{index:05}_n{noise_index}.csv"))
    }

    pub fn resolve(&self, relative: &Path) -> PathBuf {
        self.root.join(relative)
    }
}
