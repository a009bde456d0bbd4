//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that the lines come out in order
//! while the long training runs progress. `ACCEPTANCE_CRITERIA=1,4,10`
//! restricts the run to the listed criteria. The process exits non-zero when a
//! check panics, or on any FAIL when `ACCEPTANCE_STRICT=1`.

#[path = "../../symbolic/tests/common/mod.rs"]
mod symbolic_common;

#[path = "../../diffarray/tests/support/gradcheck_cases.rs"]
mod gradcheck_cases;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use opspace::cli::separation_instances;
use opspace::config::{Preset, RunConfig};
use opspace::datagen::{generate, Dataset, Mode};
use opspace::evaluation::{
    average_precision, eval_multistep, eval_retrieval, hit_at_k, latent_separation, retrieval_baseline_map,
    LatentModel, MetricReport, RankedList, MULTISTEP_CANDIDATES,
};
use opspace::heads::Paradigm;
use opspace::model::Model;
use opspace::training::{train, EpochMetrics, ModelBundle, TrainConfig};
use opspace_symbolic::{
    apply_operation, differentiate, enumerate_conclusions, evaluate_numeric, integrate, parse_functional, simplify,
    to_latex, Expr, OperandSet, OperationKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symbolic_common::{random_point, smooth_expr, VARS};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Desk runs shared between criteria, trained on first use.
#[derive(Default)]
struct Runs {
    data: HashMap<u64, Dataset>,
    trained: HashMap<(u64, Paradigm), (ModelBundle, Duration)>,
}

impl Runs {
    fn data(&mut self, seed: u64) -> &Dataset {
        self.data.entry(seed).or_insert_with(|| {
            let cfg = desk(seed);
            generate(&cfg.generation, cfg.seed).expect("desk dataset")
        })
    }

    fn trained(&mut self, seed: u64, paradigm: Paradigm) -> &(ModelBundle, Duration) {
        if !self.trained.contains_key(&(seed, paradigm)) {
            let cfg = TrainConfig {
                paradigm,
                ..desk(seed).training
            };
            let data = self.data(seed);
            let start = Instant::now();
            let mut log = |m: &EpochMetrics, _: &ModelBundle, _: bool| {
                eprintln!(
                    "    [{} seed {seed}] epoch {:>2}  loss {:.4}  dev cross {:.2}  intra {:.2}  ({:.0}s)",
                    paradigm,
                    m.epoch,
                    m.loss,
                    m.dev_cross_map,
                    m.dev_intra_map,
                    start.elapsed().as_secs_f64()
                );
                Ok(())
            };
            let outcome = train(&cfg, data, &mut log).expect("desk training");
            self.trained.insert((seed, paradigm), (outcome.best, start.elapsed()));
        }
        &self.trained[&(seed, paradigm)]
    }
}

fn desk(seed: u64) -> RunConfig {
    RunConfig::preset(Preset::Desk).with_seed(seed)
}

fn map_of(reports: &[MetricReport], mode: Mode) -> f64 {
    reports.iter().find(|r| r.key.mode == Some(mode)).map_or(f64::NAN, |r| r.map)
}

// 1: symbolic soundness

const FD_STEP: f64 = 1e-5;

fn numeric_partial(e: &Expr, v: &str, point: &HashMap<String, f64>) -> Option<f64> {
    let at = |dx: f64| {
        let mut p = point.clone();
        *p.get_mut(v).unwrap() += dx;
        evaluate_numeric(e, &p).ok()
    };
    let h = FD_STEP;
    let (m2, m1, p1, p2) = (at(-2.0 * h)?, at(-h)?, at(h)?, at(2.0 * h)?);
    Some((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h))
}

fn symbolic_soundness(_: &mut Runs) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checks, mut failures) = (0usize, Vec::new());
    while checks < 1_000 {
        let e = smooth_expr(&mut rng, 3);
        let v = VARS[rng.gen_range(0..VARS.len())];
        let point = random_point(&mut rng);
        let Some(approx) = numeric_partial(&e, v, &point) else { continue };
        let exact = evaluate_numeric(&differentiate(&e, v), &point).unwrap_or(f64::NAN);
        let value = evaluate_numeric(&e, &point).unwrap_or(0.0);
        let noise = 10.0 * f64::EPSILON * value.abs() / FD_STEP;
        let scale = exact.abs().max(approx.abs()).max(1.0);
        if !((exact - approx).abs() <= 1e-5 * scale + noise) {
            failures.push(format!("d/d{v} of {e:?}"));
        }
        checks += 1;
    }
    let (mut integrals, mut inverse_failures) = (0usize, 0usize);
    for _ in 0..2_000 {
        let e = smooth_expr(&mut rng, 3);
        let v = VARS[rng.gen_range(0..VARS.len())];
        let Ok(f) = integrate(&e, v) else { continue };
        integrals += 1;
        let back = simplify(&differentiate(&f, v));
        for _ in 0..5 {
            let point = random_point(&mut rng);
            let Ok(a) = evaluate_numeric(&e, &point) else { continue };
            let ok = evaluate_numeric(&back, &point).is_ok_and(|b| (a - b).abs() <= 1e-8 * (1.0 + a.abs()));
            if !ok {
                inverse_failures += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && inverse_failures == 0 && integrals > 0 && elapsed < Duration::from_secs(60),
        format!(
            "{checks} derivative checks, {} failed; {integrals} integrals, {inverse_failures} inverse failures; {:.1}s{}",
            failures.len(),
            elapsed.as_secs_f64(),
            failures.first().map(|f| format!("; first failure {f}")).unwrap_or_default()
        ),
    )
}

// 2: worked examples

fn worked_examples(_: &mut Runs) -> Outcome {
    let z = parse_functional("Add(Symbol('u'), cos(log(Add(Mul(Integer(-1), Symbol('z')), Symbol('o')))))").unwrap();
    let operands = OperandSet::new(vec!["z".into(), "u".into()]).unwrap();
    let latex = |t: OperationKind| -> Vec<String> {
        enumerate_conclusions(&z, t, &operands)
            .unwrap()
            .conclusions
            .iter()
            .map(|(_, y)| to_latex(y))
            .collect()
    };
    let mut mismatches = Vec::new();
    let add = latex(OperationKind::Addition);
    if add != ["z + u + \\cos{(\\log{(- z + o)})}", "2 u + \\cos{(\\log{(- z + o)})}"] {
        mismatches.push(format!("addition {add:?}"));
    }
    let diff = latex(OperationKind::Differentiation);
    if diff != ["\\frac{\\sin{(\\log{(- z + o)})}}{- z + o}", "1"] {
        mismatches.push(format!("differentiation {diff:?}"));
    }
    let x = parse_functional("Add(Symbol('u'), cos(log(Add(Mul(Integer(-1), Symbol('x')), Symbol('o')))))").unwrap();
    let premise = to_latex(&x);
    let integral = to_latex(&apply_operation(&x, OperationKind::Integration, "r").unwrap());
    if premise != "u + \\cos{(\\log{(- x + o)})}" || integral != "u r + r \\cos{(\\log{(- x + o)})}" {
        mismatches.push(format!("integration {premise} -> {integral}"));
    }
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "addition, differentiation and integration examples reproduce exactly".to_string()
        } else {
            mismatches.join("; ")
        },
    )
}

// 3: autodiff

fn autodiff(_: &mut Runs) -> Outcome {
    let start = Instant::now();
    let mut failed = Vec::new();
    let mut worst = 0.0f64;
    for (name, check) in gradcheck_cases::CHECKS {
        let result = catch_unwind(check);
        worst = worst.max(gradcheck_cases::take_worst());
        if result.is_err() {
            failed.push(*name);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failed.is_empty() && worst <= 1e-4 && elapsed < Duration::from_secs(120),
        format!(
            "{} primitive groups x 100 seeds, worst relative error {worst:.2e}, {:.1}s{}",
            gradcheck_cases::CHECKS.len(),
            elapsed.as_secs_f64(),
            if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
        ),
    )
}

// 4: metric oracles

/// AP by enumerating the relevant ranks and counting hits above each.
fn brute_ap(relevant: &[bool]) -> Option<f64> {
    let ranks: Vec<usize> = (0..relevant.len()).filter(|&i| relevant[i]).collect();
    if ranks.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for &r in &ranks {
        let above = relevant[..=r].iter().filter(|&&x| x).count();
        total += above as f64 / (r + 1) as f64;
    }
    Some(total / ranks.len() as f64)
}

fn metric_oracles(_: &mut Runs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0usize;
    let (mut map, mut oracle_map, mut lists) = (0.0, 0.0, 0usize);
    while lists < 1_000 {
        let n = rng.gen_range(1..=30);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..8u8))).collect();
        let relevant: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let list = RankedList::rank(&scores, &relevant);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        let flags: Vec<bool> = order.iter().map(|&i| relevant[i]).collect();
        if list.relevant != flags {
            mismatches += 1;
        }
        let Some(expected) = brute_ap(&flags) else {
            if average_precision(&list).is_ok() {
                mismatches += 1;
            }
            continue;
        };
        let ap = average_precision(&list).unwrap();
        if ap.to_bits() != expected.to_bits() {
            mismatches += 1;
        }
        for k in 1..=n {
            let first = flags.iter().position(|&r| r).unwrap();
            if hit_at_k(&list, k) != (first < k) {
                mismatches += 1;
            }
        }
        map += ap;
        oracle_map += expected;
        lists += 1;
    }
    if map.to_bits() != oracle_map.to_bits() {
        mismatches += 1;
    }
    let five_sixths = RankedList {
        relevant: vec![true, false, true, false],
        order: vec![],
    };
    let ap_example = average_precision(&five_sixths).unwrap();
    let example_ok = (ap_example - 5.0 / 6.0).abs() < 1e-15;
    let table = [
        (vec![true, false, false], [true, true, true]),
        (vec![false, true, false], [false, true, true]),
        (vec![false, false, true], [false, false, true]),
        (vec![false, false, false, true], [false, false, false]),
    ];
    let table_ok = table.iter().all(|(flags, expect)| {
        let list = RankedList {
            relevant: flags.clone(),
            order: vec![],
        };
        (1..=3).all(|k| hit_at_k(&list, k) == expect[k - 1])
    });
    outcome(
        mismatches == 0 && example_ok && table_ok,
        format!(
            "{lists} random lists, {mismatches} mismatches; AP example {ap_example:.6}; Hit@k table {}",
            if table_ok { "holds" } else { "broken" }
        ),
    )
}

// 5: cross-op zero identity

fn cross_before(model: &Model, data: &Dataset) -> f64 {
    let reports = latent_separation(model, &separation_instances(data)).expect("separation");
    reports
        .iter()
        .find(|r| r.mode == Mode::CrossOp)
        .map_or(f64::NAN, |r| r.before)
}

fn cross_op_identity(runs: &mut Runs) -> Outcome {
    let trained = runs.trained(0, Paradigm::Translation).0.model.clone();
    let data = runs.data(0);
    let untrained = Model::new(trained.config.clone(), trained.featurizer.clone(), 0).expect("untrained model");
    let (u, t) = (cross_before(&untrained, data), cross_before(&trained, data));
    outcome(
        u.abs() <= 1e-10 && t.abs() <= 1e-10,
        format!("cross-op before (x100): untrained {u:.3e}, trained {t:.3e}"),
    )
}

// 6: random calibration

/// Scores every comparison with a hash of its inputs.
struct HashScorer;

fn unit_hash(x: impl Hash) -> f64 {
    let mut h = DefaultHasher::new();
    x.hash(&mut h);
    (h.finish() >> 11) as f64 / (1u64 << 53) as f64
}

impl LatentModel for HashScorer {
    fn embed(&self, exprs: &[&Expr]) -> opspace::Result<Vec<Vec<f32>>> {
        Ok(exprs.iter().map(|e| vec![unit_hash(e) as f32 + 1.0]).collect())
    }

    fn ranking_cosine(&self, ex: &[f32], t: OperationKind, ey: &[f32]) -> opspace::Result<f64> {
        Ok(unit_hash((ex[0].to_bits(), t.id(), ey[0].to_bits())))
    }

    fn step(&self, ex: &[f32], t: OperationKind) -> opspace::Result<Vec<f32>> {
        Ok(vec![unit_hash((ex[0].to_bits(), t.id())) as f32 + 1.0])
    }
}

fn pooled_hit_at_1(reports: &[MetricReport]) -> f64 {
    let n: usize = reports.iter().map(|r| r.instances).sum();
    reports.iter().map(|r| r.hit_at_1 * r.instances as f64).sum::<f64>() / n as f64
}

fn random_calibration(runs: &mut Runs) -> Outcome {
    let baseline = retrieval_baseline_map();
    let data = runs.data(0);
    let triples = data.train_triples();
    let cfg = desk(0).training;
    let featurizer = opspace::training::fit_featurizer(cfg.encoder.family, &triples);
    let (mut cross, mut intra) = (Vec::new(), Vec::new());
    for init in 0..3 {
        let model = Model::new(cfg.model_config(), featurizer.clone(), init).expect("untrained model");
        let reports = eval_retrieval(&model, &data.test).expect("retrieval");
        cross.push(map_of(&reports, Mode::CrossOp));
        intra.push(map_of(&reports, Mode::IntraOp));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (c, i) = (mean(&cross), mean(&intra));
    let chance = 100.0 / MULTISTEP_CANDIDATES as f64;
    let hit = pooled_hit_at_1(&eval_multistep(&HashScorer, &data.chains).expect("multistep"));
    let harness = eval_retrieval(&HashScorer, &data.test).expect("retrieval");
    outcome(
        (c - baseline).abs() <= 3.0 && (i - baseline).abs() <= 3.0 && (hit - chance).abs() <= 3.0,
        format!(
            "baseline {baseline:.2}; untrained translation+lstm over 3 inits: cross-op {c:.2} {cross:.2?}, intra-op {i:.2} {intra:.2?}; \
             random scorer: cross-op {:.2}, intra-op {:.2}, multi-step Hit@1 {hit:.2} (chance {chance:.2})",
            map_of(&harness, Mode::CrossOp),
            map_of(&harness, Mode::IntraOp)
        ),
    )
}

// 7: learning signal

fn learning_signal(runs: &mut Runs) -> Outcome {
    let baseline = retrieval_baseline_map();
    let (bundle, elapsed) = runs.trained(0, Paradigm::Translation);
    let m = bundle.history[bundle.epoch - 1];
    outcome(
        m.dev_cross_map >= baseline + 20.0 && m.dev_intra_map >= baseline + 20.0 && *elapsed < Duration::from_secs(1800),
        format!(
            "best epoch {}: dev cross-op {:.2}, intra-op {:.2} (need {:.2}); training {:.1} min",
            m.epoch,
            m.dev_cross_map,
            m.dev_intra_map,
            baseline + 20.0,
            elapsed.as_secs_f64() / 60.0
        ),
    )
}

// 8: paradigm trend

fn paradigm_trend(runs: &mut Runs) -> Outcome {
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in 0..3 {
        let mut cross = |p: Paradigm| {
            let model = runs.trained(seed, p).0.model.clone();
            map_of(&eval_retrieval(&model, &runs.data(seed).test).expect("retrieval"), Mode::CrossOp)
        };
        let (t, p) = (cross(Paradigm::Translation), cross(Paradigm::ProjectionDense));
        wins += usize::from(t > p);
        rows.push(format!("seed {seed}: translation {t:.2} vs projection-dense {p:.2}"));
    }
    outcome(wins >= 2, format!("test cross-op MAP, lstm; {}; translation wins {wins}/3", rows.join("; ")))
}

// 9: multi-step shape

fn multistep_shape(runs: &mut Runs) -> Outcome {
    let model = runs.trained(0, Paradigm::Translation).0.model.clone();
    let reports = eval_multistep(&model, &runs.data(0).chains).expect("multistep");
    let hits: Vec<f64> = reports.iter().map(|r| r.hit_at_1).collect();
    let monotone = hits.windows(2).all(|w| w[1] <= w[0] + 5.0);
    let chance = 100.0 / MULTISTEP_CANDIDATES as f64;
    let step3 = hits.get(2).copied().unwrap_or(f64::NAN);
    outcome(
        monotone && step3 >= chance + 10.0,
        format!("Hit@1 by step {hits:.2?}; step 3 needs {:.2}", chance + 10.0),
    )
}

// 10: determinism

const TINY: &str = "[generation]\npremises = 150\ndev_instances = 20\ntest_instances = 40\nmultistep_chains = 20\n\n\
                    [training]\nepochs = 2\n\n[training.encoder]\nfamily = \"bag\"\ndim = 16\n";

fn opspace_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_opspace"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map(|it| {
            it.filter_map(|e| e.ok())
                .filter(|e| e.file_name() != "manifest.json" && e.path().extension().is_none_or(|x| x != "ckpt"))
                .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn determinism(_: &mut Runs) -> Outcome {
    let tmp = tempfile::TempDir::new().expect("temp dir");
    let p = |s: &str| tmp.path().join(s).to_string_lossy().into_owned();
    std::fs::write(tmp.path().join("tiny.toml"), TINY).expect("config");
    let cfg = p("tiny.toml");
    let mut compared = BTreeSet::new();
    let mut differing = Vec::new();
    let mut failed_commands = 0;
    let mut twice = |label: &str, args: &dyn Fn(&str) -> Vec<String>| {
        let mut seen = Vec::new();
        for run in ["a", "b"] {
            let out = p(&format!("{label}_{run}"));
            let a = args(&out);
            let refs: Vec<&str> = a.iter().map(String::as_str).collect();
            if !opspace_cli(&refs) {
                failed_commands += 1;
            }
            seen.push(outputs(Path::new(&out)));
        }
        for (name, _) in &seen[0] {
            compared.insert(format!("{label}/{name}"));
        }
        if seen[0] != seen[1] || seen[0].is_empty() {
            differing.push(label.to_string());
        }
    };
    let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<String>>();
    twice("generate_desk", &|out| owned(&["generate", "--preset", "desk", "--seed", "3", "--out", out]));
    twice("generate", &|out| owned(&["generate", "--config", &cfg, "--out", out]));
    let data = p("generate_a");
    twice("train", &|out| owned(&["train", "--config", &cfg, "--data", &data, "--out", out]));
    let ckpt = p("train_a/best.ckpt");
    for protocol in ["retrieval", "multistep", "lengthgen", "separation", "export2d"] {
        twice(&format!("eval_{protocol}"), &|out| {
            owned(&[
                "eval", "--config", &cfg, "--data", &data, "--checkpoint", &ckpt, "--protocol", protocol, "--out", out,
            ])
        });
    }
    twice("analyze", &|out| {
        owned(&["analyze", "--config", &cfg, "--data", &data, "--checkpoint", &ckpt, "--out", out])
    });
    outcome(
        differing.is_empty() && failed_commands == 0,
        format!(
            "{} output files compared across repeated commands; {failed_commands} command failures; differing: {differing:?}",
            compared.len()
        ),
    )
}

type Criterion = (u32, &'static str, fn(&mut Runs) -> Outcome);

const CRITERIA: &[Criterion] = &[
    (1, "symbolic soundness", symbolic_soundness),
    (2, "worked examples", worked_examples),
    (3, "autodiff correctness", autodiff),
    (4, "metric oracles", metric_oracles),
    (10, "determinism", determinism),
    (6, "random calibration", random_calibration),
    (7, "learning signal", learning_signal),
    (5, "cross-op zero identity", cross_op_identity),
    (9, "multi-step shape", multistep_shape),
    (8, "paradigm trend", paradigm_trend),
];

fn main() {
    if std::env::args().any(|a| a == "--list") {
        for (n, name, _) in CRITERIA {
            println!("criterion_{n}_{}: test", name.replace([' ', '-'], "_"));
        }
        return;
    }
    let only: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut runs = Runs::default();
    let mut results = Vec::new();
    let mut panicked = false;
    for (n, name, run) in CRITERIA {
        if only.as_ref().is_some_and(|o| !o.contains(n)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| run(&mut runs))).unwrap_or_else(|_| {
            panicked = true;
            outcome(false, "panicked")
        });
        let line = format!(
            "criterion {n:>2} {} {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        results.push((*n, result.pass, line));
    }
    results.sort_by_key(|r| r.0);
    println!("\nacceptance summary");
    for (_, _, line) in &results {
        println!("{line}");
    }
    let failed = results.iter().filter(|r| !r.1).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if panicked || (strict && failed > 0) {
        std::process::exit(1);
    }
}
