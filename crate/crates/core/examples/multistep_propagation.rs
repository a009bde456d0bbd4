//! Propagates premise embeddings through derivation chains entirely in
//! latent space and reports Hit@1 at every step.
//!
//! `cargo run --release -p opspace --example multistep_propagation -- [premises] [epochs] [paradigm] [family] [seed]`

#[path = "common/mod.rs"]
mod common;

use opspace::evaluation::{eval_multistep, MULTISTEP_CANDIDATES};

fn main() -> opspace::Result<()> {
    let s = common::setup(600, 4)?;
    let data = s.data()?;
    let bundle = s.train(&s.train_config(), &data)?;
    let chance = 100.0 / MULTISTEP_CANDIDATES as f64;
    println!("{} + {}: {} chains, chance Hit@1 {chance:.0}", s.paradigm, s.family, data.chains.len());
    for r in eval_multistep(&bundle.model, &data.chains)? {
        let bar = "#".repeat((r.hit_at_1 / 2.0).round() as usize);
        println!("step {}  Hit@1 {:>6.2}  (n={:>4})  {bar}", r.key.step.unwrap_or(0), r.hit_at_1, r.instances);
    }
    Ok(())
}
