//! Drives the command-line entry point in-process: generate, train, eval
//! and analyze into a temporary directory.
//!
//! `cargo run --release -p opspace --example cli_pipeline`

use opspace::cli::run_from;

const CONFIG: &str = "[generation]\npremises = 200\ndev_instances = 30\ntest_instances = 60\nmultistep_chains = 30\n\n\
                      [training]\nepochs = 2\n\n[training.encoder]\nfamily = \"cnn\"\ndim = 32\n";

fn main() -> std::io::Result<()> {
    let root = std::env::temp_dir().join(format!("opspace-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&root)?;
    let path = |s: &str| root.join(s).to_string_lossy().into_owned();
    std::fs::write(root.join("run.toml"), CONFIG)?;
    let (cfg, data, run) = (path("run.toml"), path("data"), path("run"));
    let ckpt = path("run/best.ckpt");
    let mut commands: Vec<Vec<String>> = vec![
        vec!["generate".into(), "--config".into(), cfg.clone(), "--out".into(), data.clone()],
        vec!["train".into(), "--config".into(), cfg.clone(), "--data".into(), data.clone(), "--out".into(), run],
    ];
    for protocol in ["retrieval", "multistep", "lengthgen", "separation", "export2d"] {
        commands.push(
            ["eval", "--config", &cfg, "--data", &data, "--checkpoint", &ckpt, "--protocol", protocol, "--out"]
                .iter()
                .map(|s| s.to_string())
                .chain([path(&format!("eval-{protocol}"))])
                .collect(),
        );
    }
    commands.push(
        ["analyze", "--config", &cfg, "--data", &data, "--checkpoint", &ckpt, "--out", &path("analysis")]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    for args in commands {
        println!("$ opspace {}", args.join(" "));
        let code = run_from(std::iter::once("opspace".to_string()).chain(args));
        if code != 0 {
            eprintln!("exit code {code}");
            std::process::exit(code);
        }
    }
    println!("outputs under {}", root.display());
    Ok(())
}
