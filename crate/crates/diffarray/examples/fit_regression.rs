//! Fits a two-layer tanh network to a noisy sine with Adam, then saves and
//! reloads the parameters through a checkpoint.
//!
//! `cargo run --release -p opspace-diffarray --example fit_regression -- [steps]`

use opspace_diffarray::{load_checkpoint, save_checkpoint, AdamConfig, ParamStore, Tape, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let n = 64;
    let xs: Vec<f32> = (0..n).map(|i| -3.0 + 6.0 * i as f32 / (n - 1) as f32).collect();
    let ys: Vec<f32> = xs.iter().map(|x| x.sin()).collect();
    let x = Tensor::new(vec![n, 1], xs)?;
    let y = Tensor::new(vec![n, 1], ys)?;

    let mut store = ParamStore::new();
    let w1 = store.add("w1", Tensor::from_fn(&[1, 16], |i| (i as f32 - 7.5) / 4.0));
    let b1 = store.add("b1", Tensor::from_fn(&[16], |i| ((i % 5) as f32 - 2.0) / 2.0));
    let w2 = store.add("w2", Tensor::from_fn(&[16, 1], |i| if i % 2 == 0 { 0.1 } else { -0.1 }));
    let b2 = store.add("b2", Tensor::zeros(&[1]));
    let adam = AdamConfig::with_lr(0.01);

    for step in 0..=steps {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let yv = tape.constant(y.clone());
        let [w1v, b1v, w2v, b2v] = [w1, b1, w2, b2].map(|p| tape.param(&store, p));
        let h = tape.matmul(xv, w1v)?;
        let h = tape.add_row(h, b1v)?;
        let h = tape.tanh(h);
        let out = tape.matmul(h, w2v)?;
        let out = tape.add_row(out, b2v)?;
        let err = tape.sub(out, yv)?;
        let sq = tape.mul(err, err)?;
        let loss = tape.mean(sq);
        if step % (steps / 10).max(1) == 0 {
            println!("step {step:>5}  mse {:.6}", tape.value(loss).item());
        }
        let grads = tape.backward(loss)?;
        store.zero_grad();
        grads.accumulate_into(&mut store);
        store.adam_step(&adam)?;
    }

    let path = std::env::temp_dir().join("fit_regression.ckpt");
    save_checkpoint(&path, &store.export(false), &serde_json::json!({ "steps": steps }))?;
    let ckpt = load_checkpoint(&path)?;
    println!("checkpoint {} holds {} tensors, meta {}", path.display(), ckpt.tensors.len(), ckpt.meta);
    Ok(())
}
