//! Argument parsing and a quick training run shared by the examples.

#![allow(dead_code)]

use std::time::Instant;

use opspace::datagen::{generate, Dataset, GenerationConfig};
use opspace::encoders::{EncoderConfig, Family};
use opspace::heads::Paradigm;
use opspace::training::{train, EpochMetrics, ModelBundle, TrainConfig};

pub struct Setup {
    pub premises: usize,
    pub epochs: usize,
    pub paradigm: Paradigm,
    pub family: Family,
    pub seed: u64,
}

/// `[premises] [epochs] [paradigm] [family] [seed]`, each optional.
pub fn setup(premises: usize, epochs: usize) -> opspace::Result<Setup> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize| args.get(i).map(String::as_str);
    Ok(Setup {
        premises: arg(0).and_then(|a| a.parse().ok()).unwrap_or(premises),
        epochs: arg(1).and_then(|a| a.parse().ok()).unwrap_or(epochs),
        paradigm: arg(2).unwrap_or("translation").parse()?,
        family: arg(3).unwrap_or("lstm").parse()?,
        seed: arg(4).and_then(|a| a.parse().ok()).unwrap_or(0),
    })
}

impl Setup {
    pub fn generation(&self) -> GenerationConfig {
        GenerationConfig {
            premises: self.premises,
            ..GenerationConfig::default()
        }
    }

    pub fn data(&self) -> opspace::Result<Dataset> {
        generate(&self.generation(), self.seed)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            seed: self.seed,
            paradigm: self.paradigm,
            encoder: EncoderConfig::new(self.family, 64),
            ..TrainConfig::default()
        }
    }

    /// Trains with per-epoch progress on stderr and returns the best bundle.
    pub fn train(&self, cfg: &TrainConfig, data: &Dataset) -> opspace::Result<ModelBundle> {
        let start = Instant::now();
        let mut log = |m: &EpochMetrics, _: &ModelBundle, _: bool| {
            eprintln!(
                "  epoch {:>2}  loss {:.4}  dev cross {:.2}  intra {:.2}  [{:.0}s]",
                m.epoch,
                m.loss,
                m.dev_cross_map,
                m.dev_intra_map,
                start.elapsed().as_secs_f64()
            );
            Ok(())
        };
        Ok(train(cfg, data, &mut log)?.best)
    }
}
