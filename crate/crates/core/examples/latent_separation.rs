//! Measures how far positives and negatives separate before and after the
//! operation is applied, and writes a 2D PCA projection of a few instances.
//!
//! `cargo run --release -p opspace --example latent_separation -- [premises] [epochs] [paradigm] [family] [seed]`

#[path = "common/mod.rs"]
mod common;

use std::fs::File;

use opspace::cli::separation_instances;
use opspace::datagen::Mode;
use opspace::evaluation::{export_2d, latent_separation, two_decimals, write_projection};

fn main() -> opspace::Result<()> {
    let s = common::setup(600, 4)?;
    let data = s.data()?;
    let bundle = s.train(&s.train_config(), &data)?;
    let model = &bundle.model;
    for r in latent_separation(model, &separation_instances(&data))? {
        println!(
            "{:<9} before {:>6}  after {:>6}  (n={})",
            r.mode.name(),
            two_decimals(r.before),
            two_decimals(r.after),
            r.instances
        );
    }
    let sample: Vec<_> = Mode::ALL
        .into_iter()
        .flat_map(|m| data.test.iter().filter(move |i| i.mode == m).take(5))
        .cloned()
        .collect();
    let points = export_2d(model, &sample, |ex, t, ey| model.transformed(ex, t, ey))?;
    let path = std::env::temp_dir().join("latent_separation_2d.csv");
    write_projection(File::create(&path)?, &points)?;
    println!("{} projected points written to {}", points.len(), path.display());
    Ok(())
}
