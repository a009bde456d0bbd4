//! Trains only on two-variable premises and reports test MAP grouped by the
//! number of variables in the premise.
//!
//! `cargo run --release -p opspace --example length_generalisation -- [premises] [epochs] [paradigm] [family] [seed]`

#[path = "common/mod.rs"]
mod common;

use opspace::datagen::filter_by_variable_count;
use opspace::evaluation::eval_length_generalisation;
use opspace::training::{fit_featurizer, train_from, ModelBundle};

fn main() -> opspace::Result<()> {
    let s = common::setup(1000, 4)?;
    let data = s.data()?;
    let cfg = s.train_config();
    let triples = filter_by_variable_count(&data.train_triples(), 2);
    println!("{} of {} training triples have two-variable premises", triples.len(), data.train_triples().len());
    let start = ModelBundle::new(cfg.clone(), fit_featurizer(cfg.encoder.family, &triples))?;
    let bundle = train_from(start, None, &triples, &data.dev, &mut ())?.best;
    println!("{:<9} {:>4} {:>7} {:>6}", "mode", "vars", "MAP", "n");
    for r in eval_length_generalisation(&bundle.model, &data.test)? {
        println!(
            "{:<9} {:>4} {:>7.2} {:>6}",
            r.key.mode.map_or("", |m| m.name()),
            r.key.num_vars.unwrap_or(0),
            r.map,
            r.instances
        );
    }
    Ok(())
}
