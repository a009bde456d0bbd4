//! Generates a small corpus and prints a few derivations and the counts.
//!
//! `cargo run --release -p opspace --example generate_corpus -- [premises] [seed]`

use opspace::datagen::{generate, GenerationConfig, Mode, Split};
use opspace_symbolic::to_latex;

fn main() -> opspace::Result<()> {
    let mut args = std::env::args().skip(1);
    let premises = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let cfg = GenerationConfig {
        premises,
        dev_instances: premises / 3,
        test_instances: premises * 2 / 3,
        multistep_chains: premises / 2,
        ..GenerationConfig::default()
    };
    let data = generate(&cfg, seed)?;
    for t in data.triples.iter().take(12) {
        println!(
            "{:<16} {:>2}  {}  =>  {}",
            t.operation.name(),
            t.operand,
            to_latex(&t.premise),
            to_latex(&t.conclusion)
        );
    }
    println!();
    for (k, v) in &data.metadata.counts {
        println!("{k:<32} {v}");
    }
    for mode in Mode::ALL {
        let dev = data.dev.iter().filter(|i| i.mode == mode).count();
        let test = data.test.iter().filter(|i| i.mode == mode).count();
        println!("{:<32} dev {dev}, test {test}", mode.name());
    }
    let lens: Vec<usize> = data
        .triples
        .iter()
        .filter(|t| t.split == Split::Train)
        .map(|t| to_latex(&t.conclusion).len())
        .collect();
    let mean = lens.iter().sum::<usize>() as f64 / lens.len().max(1) as f64;
    println!("mean conclusion LaTeX length (chars): {mean:.1}");
    Ok(())
}
