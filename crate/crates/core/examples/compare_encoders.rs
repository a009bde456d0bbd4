//! Trains every encoder family under one paradigm on the same corpus and
//! prints a comparison table of test MAP.
//!
//! `cargo run --release -p opspace --example compare_encoders -- [premises] [epochs] [paradigm] [_] [seed]`

#[path = "common/mod.rs"]
mod common;

use opspace::datagen::Mode;
use opspace::encoders::{EncoderConfig, Family};
use opspace::evaluation::eval_retrieval;
use opspace::training::TrainConfig;

fn main() -> opspace::Result<()> {
    let s = common::setup(300, 2)?;
    let data = s.data()?;
    println!("{:<12} {:>9} {:>9} {:>9}", "encoder", "cross-op", "intra-op", "avg");
    for family in Family::ALL {
        let mut encoder = EncoderConfig::new(family, 32);
        if family == Family::Transformer {
            encoder.layers = 2;
        }
        let cfg = TrainConfig {
            encoder,
            ..s.train_config()
        };
        eprintln!("{family}");
        let bundle = s.train(&cfg, &data)?;
        let reports = eval_retrieval(&bundle.model, &data.test)?;
        let map = |m: Mode| reports.iter().find(|r| r.key.mode == Some(m)).map_or(f64::NAN, |r| r.map);
        let (c, i) = (map(Mode::CrossOp), map(Mode::IntraOp));
        println!("{:<12} {c:>9.2} {i:>9.2} {:>9.2}", family.name(), (c + i) / 2.0);
    }
    Ok(())
}
