//! Train/test splits of synthetic samples on disk.
//!
//! Layout under the dataset root:
//!
//! ```text
//! manifest.json
//! train/images/0000.pgm   train/edges/0000.pgm   ...
//! test/images/0000.pgm    test/edges/0000.pgm    ...
//! ```
//!
//! Images are 8-bit PGM, edges are `{0, 255}` 8-bit PGM. Each sample's seed
//! is derived from the base seed and its global index (train first, then
//! test), so generation order and parallelism never change the output.

use std::fs;
use std::path::{Component, Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pgm::{self, Maxval};
use crate::synth::{self, Sample, SceneSpec};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "swbce-dataset";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub image: String,
    pub edges: String,
    pub spec: SceneSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub base_spec: SceneSpec,
    pub train: Vec<SampleEntry>,
    pub test: Vec<SampleEntry>,
}

impl DatasetManifest {
    /// Parses and validates a manifest. Every listed path must be relative
    /// and stay inside the dataset root.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let manifest: DatasetManifest =
            serde_json::from_slice(bytes).map_err(|e| Error::MalformedManifest(e.to_string()))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::MalformedManifest(format!(
                "unexpected format '{}'",
                manifest.format
            )));
        }
        if manifest.version != 1 {
            return Err(Error::MalformedManifest(format!(
                "unsupported version {}",
                manifest.version
            )));
        }
        for entry in manifest.train.iter().chain(&manifest.test) {
            for p in [&entry.image, &entry.edges] {
                check_relative(p)?;
            }
        }
        Ok(manifest)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn entries(&self, split: Split) -> &[SampleEntry] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }
}

fn check_relative(p: &str) -> Result<()> {
    let ok = !p.is_empty()
        && Path::new(p)
            .components()
            .all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(Error::MalformedManifest(format!(
            "path '{p}' must be relative and stay inside the dataset"
        )))
    }
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn sample_seed(base_seed: u64, index: u64) -> u64 {
    mix64(base_seed ^ mix64(index))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Generates `n_train + n_test` samples under `root` and writes the
/// manifest. Existing files with the same names are overwritten.
pub fn generate_split(
    base: &SceneSpec,
    n_train: usize,
    n_test: usize,
    root: &Path,
) -> Result<DatasetManifest> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidSpec(
            "both splits need at least one sample".into(),
        ));
    }
    base.validate()?;
    for split in [Split::Train, Split::Test] {
        create_dir(&root.join(split.dir_name()).join("images"))?;
        create_dir(&root.join(split.dir_name()).join("edges"))?;
    }

    let jobs: Vec<(Split, usize, u64)> = (0..n_train)
        .map(|i| (Split::Train, i, i as u64))
        .chain((0..n_test).map(|i| (Split::Test, i, (n_train + i) as u64)))
        .collect();

    let entries = jobs
        .par_iter()
        .map(|&(split, local, global)| {
            let spec = SceneSpec {
                seed: sample_seed(base.seed, global),
                ..*base
            };
            let sample = synth::generate(&spec)?;
            let image = format!("{}/images/{local:04}.pgm", split.dir_name());
            let edges = format!("{}/edges/{local:04}.pgm", split.dir_name());
            pgm::write_soft(&sample.image, &root.join(&image), Maxval::Eight)?;
            pgm::write_binary(&sample.edges, &root.join(&edges))?;
            Ok((split, SampleEntry { image, edges, spec }))
        })
        .collect::<Result<Vec<_>>>()?;

    let (train, test): (Vec<_>, Vec<_>) = entries.into_iter().partition(|(s, _)| *s == Split::Train);
    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.into(),
        version: 1,
        base_spec: *base,
        train: train.into_iter().map(|(_, e)| e).collect(),
        test: test.into_iter().map(|(_, e)| e).collect(),
    };
    let path = root.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// A dataset root with its parsed manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest: DatasetManifest::parse(&bytes)?,
        })
    }

    pub fn load(&self, split: Split) -> Result<Vec<Sample>> {
        self.manifest
            .entries(split)
            .iter()
            .map(|e| {
                let image = pgm::read_soft(&self.root.join(&e.image))?;
                let edges = pgm::read_binary(&self.root.join(&e.edges), 0.5)?;
                Error::check_dims(image.dims(), edges.dims())?;
                Ok(Sample { image, edges })
            })
            .collect()
    }

    pub fn split_dir(&self, split: Split, kind: &str) -> PathBuf {
        self.root.join(split.dir_name()).join(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_rejects_escaping_paths() {
        for bad in ["../x.pgm", "/etc/passwd", "", "a/../../b"] {
            assert!(check_relative(bad).is_err(), "{bad}");
        }
        assert!(check_relative("train/images/0000.pgm").is_ok());
    }

    #[test]
    fn sample_seeds_differ_by_index() {
        assert_ne!(sample_seed(42, 0), sample_seed(42, 1));
        assert_eq!(sample_seed(42, 3), sample_seed(42, 3));
    }

    #[test]
    fn empty_split_is_rejected() {
        let dir = std::env::temp_dir();
        assert!(generate_split(&SceneSpec::default(), 0, 1, &dir).is_err());
    }
}
