//! Scores untrained models against the random-ranking baselines: retrieval
//! MAP per mode and multi-step Hit@1 per step.
//!
//! `cargo run --release -p opspace --example untrained_calibration -- [premises] [seed]`

use opspace::datagen::{generate, GenerationConfig};
use opspace::encoders::{EncoderConfig, Family};
use opspace::evaluation::{eval_multistep, eval_retrieval, retrieval_baseline_map, MULTISTEP_CANDIDATES};
use opspace::heads::Paradigm;
use opspace::model::{Model, ModelConfig};
use opspace::training::fit_featurizer;

fn main() -> opspace::Result<()> {
    let mut args = std::env::args().skip(1);
    let premises = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let data = generate(&GenerationConfig { premises, ..GenerationConfig::default() }, seed)?;
    let triples = data.train_triples();
    println!(
        "baselines: retrieval MAP {:.2}, multi-step Hit@1 {:.2}",
        retrieval_baseline_map(),
        100.0 / MULTISTEP_CANDIDATES as f64
    );
    for paradigm in Paradigm::ALL {
        for family in Family::ALL {
            let cfg = ModelConfig {
                paradigm,
                encoder: EncoderConfig::new(family, 64),
                shared_translation: false,
            };
            let model = Model::new(cfg, fit_featurizer(family, &triples), seed)?;
            let maps: Vec<String> = eval_retrieval(&model, &data.test)?
                .iter()
                .map(|r| format!("{} {:.2}", r.key.mode.map_or("all", |m| m.name()), r.map))
                .collect();
            let hits: Vec<String> = eval_multistep(&model, &data.chains)?
                .iter()
                .map(|r| format!("{:.0}", r.hit_at_1))
                .collect();
            println!(
                "{:<18} {:<12} {}  multi-step Hit@1 [{}]",
                paradigm.name(),
                family.name(),
                maps.join("  "),
                hits.join(" ")
            );
        }
    }
    Ok(())
}
