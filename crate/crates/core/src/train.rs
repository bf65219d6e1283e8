//! Mini-batch training of [`TinyNet`] under any of the losses, and batch
//! prediction over a directory of images.
//!
//! Batch order and crop offsets for epoch `e` come from a ChaCha8 stream
//! seeded by `(seed, e)`, so resuming from a checkpoint replays exactly the
//! same stream as an uninterrupted run. Per-sample gradients in a batch
//! are computed in parallel and reduced in batch order.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::dataset::{mix64, sample_seed, Dataset, Split};
use crate::error::{Error, Result};
use crate::loss::{LossConfig, LossKind, Normalization};
use crate::map::{BinaryMap, SoftMap};
use crate::net::{Params, TinyNet};
use crate::pgm::{self, Maxval};
use crate::synth::Sample;

const INIT_SALT: u64 = 0x696e_6974;
const SHUFFLE_SALT: u64 = 0x7368_7566;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Random crop `(height, width)`; `None` trains on full images.
    pub crop: Option<(usize, usize)>,
    pub seed: u64,
    pub loss: LossKind,
    pub loss_config: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 1e-8,
            epochs: 50,
            batch_size: 8,
            crop: None,
            seed: 0,
            loss: LossKind::Swbce,
            loss_config: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if let Some((h, w)) = self.crop {
            if h == 0 || w == 0 {
                return Err(Error::InvalidConfig("crop must be non-empty".into()));
            }
        }
        self.loss_config.validate()
    }

    fn training_loss_config(&self) -> LossConfig {
        LossConfig {
            normalization: Normalization::PerPixelMean,
            ..self.loss_config
        }
    }
}

/// Initial network for a training seed.
pub fn initial_net(seed: u64) -> TinyNet {
    TinyNet::init(mix64(seed ^ INIT_SALT))
}

fn crop(sample: &Sample, top: usize, left: usize, h: usize, w: usize) -> (SoftMap, BinaryMap) {
    let width = sample.image.width();
    let mut img = Vec::with_capacity(h * w);
    let mut edges = Vec::with_capacity(h * w);
    for r in top..top + h {
        let row = r * width;
        img.extend_from_slice(&sample.image.values()[row + left..row + left + w]);
        edges.extend_from_slice(&sample.edges.values()[row + left..row + left + w]);
    }
    (
        SoftMap::new(h, w, img).expect("crop of a valid map"),
        BinaryMap::new(h, w, edges).expect("crop of a valid map"),
    )
}

/// Loss value and parameter gradient for one sample.
pub fn sample_gradient(
    net: &TinyNet,
    image: &SoftMap,
    edges: &BinaryMap,
    loss: LossKind,
    cfg: &LossConfig,
) -> Result<(f64, Params)> {
    let cache = net.forward_cached(image);
    let result = loss.evaluate(&cache.output()?, edges, cfg)?;
    let grads = net.backward(&cache, &result.gradient)?;
    Ok((result.value, grads))
}

pub fn train(samples: &[Sample], cfg: &TrainConfig) -> Result<Checkpoint> {
    resume(Checkpoint::fresh(initial_net(cfg.seed)), samples, cfg, cfg.epochs)
}

/// Runs `epochs` more epochs starting from `ckpt`.
pub fn resume(mut ckpt: Checkpoint, samples: &[Sample], cfg: &TrainConfig, epochs: usize) -> Result<Checkpoint> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidConfig("no training samples".into()));
    }
    if let Some((ch, cw)) = cfg.crop {
        if let Some(s) = samples.iter().find(|s| s.image.height() < ch || s.image.width() < cw) {
            return Err(Error::InvalidConfig(format!(
                "crop {ch}x{cw} exceeds a {}x{} sample",
                s.image.height(),
                s.image.width()
            )));
        }
    }
    let loss_cfg = cfg.training_loss_config();

    for _ in 0..epochs {
        let epoch = ckpt.epoch as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed ^ SHUFFLE_SALT, epoch as u64));
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);
        let jobs: Vec<(usize, usize, usize)> = order
            .iter()
            .map(|&i| match cfg.crop {
                None => (i, 0, 0),
                Some((ch, cw)) => {
                    let s = &samples[i];
                    (
                        i,
                        rng.random_range(0..=s.image.height() - ch),
                        rng.random_range(0..=s.image.width() - cw),
                    )
                }
            })
            .collect();

        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in jobs.chunks(cfg.batch_size).enumerate() {
            let net = &ckpt.net;
            let results = batch
                .par_iter()
                .map(|&(i, top, left)| {
                    let s = &samples[i];
                    match cfg.crop {
                        None => sample_gradient(net, &s.image, &s.edges, cfg.loss, &loss_cfg),
                        Some((ch, cw)) => {
                            let (img, edges) = crop(s, top, left, ch, cw);
                            sample_gradient(net, &img, &edges, cfg.loss, &loss_cfg)
                        }
                    }
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    Error::NonFiniteOutput => Error::NonFiniteLoss {
                        epoch: epoch + 1,
                        batch: batch_idx,
                        value: f64::NAN,
                    },
                    other => other,
                })?;

            let mut grads = Params::zeros();
            for (value, g) in &results {
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch: epoch + 1,
                        batch: batch_idx,
                        value: *value,
                    });
                }
                epoch_loss += value;
                grads.add_scaled(g, 1.0);
            }
            grads.scale(1.0 / batch.len() as f64);
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: batch_idx,
                    value: f64::NAN,
                });
            }
            ckpt.optimizer
                .update(&mut ckpt.net.params, &grads, cfg.learning_rate, cfg.weight_decay);
        }
        ckpt.history.push(epoch_loss / samples.len() as f64);
        ckpt.epoch += 1;
    }
    Ok(ckpt)
}

/// Trains on the train split of the dataset at `root`.
pub fn train_dataset(root: &Path, cfg: &TrainConfig) -> Result<Checkpoint> {
    let ds = Dataset::open(root)?;
    train(&ds.load(Split::Train)?, cfg)
}

pub fn list_pgm(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "pgm") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Writes one 16-bit prediction per `*.pgm` in `images` to `out`, keeping
/// file names.
pub fn predict_dir(net: &TinyNet, images: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let inputs = list_pgm(images)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    inputs
        .par_iter()
        .map(|path| {
            let image = pgm::read_soft(path)?;
            let pred = net.forward(&image)?;
            let dest = out.join(path.file_name().expect("listed files have names"));
            pgm::write_soft(&pred, &dest, Maxval::Sixteen)?;
            Ok(dest)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SceneSpec};

    fn samples(n: u64) -> Vec<Sample> {
        (0..n)
            .map(|seed| generate(&SceneSpec { seed, height: 16, width: 16, ..Default::default() }).unwrap())
            .collect()
    }

    #[test]
    fn one_epoch_records_one_loss() {
        let cfg = TrainConfig { epochs: 1, ..Default::default() };
        let ck = train(&samples(2), &cfg).unwrap();
        assert_eq!(ck.history.len(), 1);
        assert_eq!(ck.epoch, 1);
    }

    #[test]
    fn rejects_bad_configs() {
        let s = samples(1);
        for cfg in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { crop: Some((32, 8)), ..Default::default() },
        ] {
            assert!(train(&s, &cfg).is_err());
        }
        assert!(train(&[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn exploding_step_aborts_with_non_finite_loss() {
        let cfg = TrainConfig { epochs: 3, learning_rate: 1e308, ..Default::default() };
        assert!(matches!(train(&samples(2), &cfg), Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn crops_train() {
        let cfg = TrainConfig { epochs: 2, crop: Some((8, 12)), ..Default::default() };
        let a = train(&samples(3), &cfg).unwrap();
        let b = train(&samples(3), &cfg).unwrap();
        assert_eq!(a, b);
    }
}
