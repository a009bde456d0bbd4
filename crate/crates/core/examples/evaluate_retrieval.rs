//! Trains a model, then reports test-set MAP, Hit@1 and Hit@3 for
//! cross- and intra-operation retrieval.
//!
//! `cargo run --release -p opspace --example evaluate_retrieval -- [premises] [epochs] [paradigm] [family] [seed]`

#[path = "common/mod.rs"]
mod common;

use opspace::evaluation::{eval_retrieval, retrieval_baseline_map};

fn main() -> opspace::Result<()> {
    let s = common::setup(600, 4)?;
    let data = s.data()?;
    let bundle = s.train(&s.train_config(), &data)?;
    println!("{} + {}, best epoch {}", s.paradigm, s.family, bundle.epoch);
    println!("{:<9} {:>7} {:>7} {:>7} {:>6}", "mode", "MAP", "Hit@1", "Hit@3", "n");
    for r in eval_retrieval(&bundle.model, &data.test)? {
        println!(
            "{:<9} {:>7.2} {:>7.2} {:>7.2} {:>6}",
            r.key.mode.map_or("", |m| m.name()),
            r.map,
            r.hit_at_1,
            r.hit_at_3,
            r.instances
        );
    }
    println!("random ranking MAP {:.2}", retrieval_baseline_map());
    Ok(())
}
