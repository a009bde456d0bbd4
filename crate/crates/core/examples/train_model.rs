//! Trains one model on a freshly generated desk corpus and prints the
//! per-epoch dev metrics next to the random-ranking baseline.
//!
//! `cargo run --release -p opspace --example train_model -- [premises] [epochs] [paradigm] [family] [seed]`

use std::time::Instant;

use opspace::datagen::{generate, GenerationConfig};
use opspace::encoders::{EncoderConfig, Family};
use opspace::evaluation::retrieval_baseline_map;
use opspace::heads::Paradigm;
use opspace::training::{train, EpochMetrics, ModelBundle, TrainConfig};

fn main() -> opspace::Result<()> {
    let mut args = std::env::args().skip(1);
    let premises = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let epochs = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let paradigm: Paradigm = args.next().as_deref().unwrap_or("translation").parse()?;
    let family: Family = args.next().as_deref().unwrap_or("lstm").parse()?;
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let data = generate(&GenerationConfig { premises, ..GenerationConfig::default() }, seed)?;
    let cfg = TrainConfig {
        epochs,
        seed,
        paradigm,
        encoder: EncoderConfig::new(family, 64),
        ..TrainConfig::default()
    };
    println!(
        "{} train triples, {} dev instances, baseline MAP {:.2}",
        data.train_triples().len(),
        data.dev.len(),
        retrieval_baseline_map()
    );
    let start = Instant::now();
    let mut report = |m: &EpochMetrics, _: &ModelBundle, best: bool| {
        println!(
            "epoch {:>2}  loss {:.4}  cross {:.2}  intra {:.2}  avg {:.2}{}  [{:.0}s]",
            m.epoch,
            m.loss,
            m.dev_cross_map,
            m.dev_intra_map,
            m.avg_map,
            if best { " *" } else { "" },
            start.elapsed().as_secs_f64()
        );
        Ok(())
    };
    let outcome = train(&cfg, &data, &mut report)?;
    println!("best avg MAP {:.2}", outcome.best.best_avg_map().unwrap_or(f64::NAN));
    Ok(())
}
