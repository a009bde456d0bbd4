//! Every primitive's reverse pass against central differences of an
//! independent f64 forward written here. Shared by the gradcheck and
//! acceptance test targets.

use std::cell::Cell;
use std::sync::Arc;

use opspace_diffarray::{SparseMatrix, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 100;
const STEP: f64 = 1e-3;
const TOL: f64 = 1e-4;

type Build = Box<dyn Fn(&mut Tape, &[Var]) -> Var>;
type Shadow = Box<dyn Fn(&[Vec<f64>]) -> Vec<f64>>;

struct Case {
    inputs: Vec<(Vec<usize>, Vec<f64>)>,
    build: Build,
    shadow: Shadow,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn input(rng: &mut ChaCha8Rng, shape: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let n = shape.iter().product();
    (shape.to_vec(), uniform(rng, n, -1.0, 1.0))
}

/// Distinct values on a 0.05 grid, offset from zero, so max and relu stay
/// away from their kinks.
fn spread(rng: &mut ChaCha8Rng, shape: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let n: usize = shape.iter().product();
    let mut levels: Vec<f64> = (0..n).map(|k| (k as f64 - (n / 2) as f64) * 0.05 + 0.025).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        levels.swap(i, j);
    }
    (shape.to_vec(), levels)
}

/// Max relative error of the tape gradient against central differences of
/// `sum(weights * shadow(inputs))`.
fn check(case: &Case, rng: &mut ChaCha8Rng) -> f64 {
    let initial: Vec<Vec<f64>> = case.inputs.iter().map(|(_, v)| v.clone()).collect();
    let out_len = (case.shadow)(&initial).len();
    let weights = uniform(rng, out_len, -1.0, 1.0);

    let mut tape = Tape::new();
    let vars: Vec<Var> = case
        .inputs
        .iter()
        .map(|(s, v)| tape.leaf(Tensor::new(s.clone(), v.iter().map(|&x| x as f32).collect()).unwrap()))
        .collect();
    let out = (case.build)(&mut tape, &vars);
    assert_eq!(tape.value(out).len(), out_len, "tape and shadow disagree on output size");
    let shape = tape.shape(out).to_vec();
    let w = tape.constant(Tensor::new(shape, weights.iter().map(|&x| x as f32).collect()).unwrap());
    let weighted = tape.mul(out, w).unwrap();
    let loss = tape.sum(weighted);
    let grads = tape.backward(loss).unwrap();

    let objective = |vals: &[Vec<f64>]| -> f64 {
        (case.shadow)(vals).iter().zip(&weights).map(|(o, w)| o * w).sum()
    };
    let mut values = initial;
    let mut max_diff = 0.0f64;
    let mut max_ref = 0.0f64;
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads
            .get(*var)
            .map(<[f32]>::to_vec)
            .unwrap_or_else(|| vec![0.0; values[i].len()]);
        for k in 0..values[i].len() {
            let orig = values[i][k];
            let mut at = |dx: f64| {
                values[i][k] = orig + dx;
                objective(&values)
            };
            // five-point central stencil
            let numeric = (at(-2.0 * STEP) - 8.0 * at(-STEP) + 8.0 * at(STEP) - at(2.0 * STEP)) / (12.0 * STEP);
            values[i][k] = orig;
            max_diff = max_diff.max((f64::from(analytic[k]) - numeric).abs());
            max_ref = max_ref.max(numeric.abs());
        }
    }
    max_diff / max_ref.max(1e-6)
}

thread_local! {
    static WORST: Cell<f64> = const { Cell::new(0.0) };
}

/// Largest relative error seen by [`run`] on this thread since the last call.
pub fn take_worst() -> f64 {
    WORST.with(|w| w.replace(0.0))
}

fn run(name: &str, make: impl Fn(&mut ChaCha8Rng) -> Case) {
    let mut worst = 0.0f64;
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = make(&mut rng);
        let err = check(&case, &mut rng);
        WORST.with(|w| w.set(w.get().max(err)));
        assert!(err <= TOL, "{name}: seed {seed} relative error {err:e}");
        worst = worst.max(err);
    }
    println!("{name}: worst relative error {worst:.2e} over {SEEDS} seeds");
}

// f64 reference kernels

fn mm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[i * n + j] = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
        }
    }
    out
}

fn transpose(a: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dims(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    rng.gen_range(lo..=hi)
}

fn split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        shape[..axis].iter().product(),
        shape[axis],
        shape[axis + 1..].iter().product(),
    )
}

pub fn matmul() {
    run("matmul", |rng| {
        let (m, k, n) = (dims(rng, 1, 5), dims(rng, 1, 5), dims(rng, 1, 5));
        let (ta, tb) = (rng.gen_bool(0.5), rng.gen_bool(0.5));
        let sa = if ta { vec![k, m] } else { vec![m, k] };
        let sb = if tb { vec![n, k] } else { vec![k, n] };
        Case {
            inputs: vec![input(rng, &sa), input(rng, &sb)],
            build: Box::new(move |t, v| t.matmul_t(v[0], v[1], ta, tb).unwrap()),
            shadow: Box::new(move |x| {
                let a = if ta { transpose(&x[0], k, m) } else { x[0].clone() };
                let b = if tb { transpose(&x[1], n, k) } else { x[1].clone() };
                mm(&a, &b, m, k, n)
            }),
        }
    });
}

pub fn batch_matmul() {
    run("batch_matmul", |rng| {
        let (g, m, k, n) = (dims(rng, 1, 3), dims(rng, 1, 4), dims(rng, 1, 4), dims(rng, 1, 4));
        let (ta, tb) = (rng.gen_bool(0.5), rng.gen_bool(0.5));
        let sa = if ta { vec![g, k, m] } else { vec![g, m, k] };
        let sb = if tb { vec![g, n, k] } else { vec![g, k, n] };
        Case {
            inputs: vec![input(rng, &sa), input(rng, &sb)],
            build: Box::new(move |t, v| t.batch_matmul(v[0], v[1], ta, tb).unwrap()),
            shadow: Box::new(move |x| {
                let mut out = Vec::new();
                for q in 0..g {
                    let a = &x[0][q * m * k..(q + 1) * m * k];
                    let b = &x[1][q * k * n..(q + 1) * k * n];
                    let a = if ta { transpose(a, k, m) } else { a.to_vec() };
                    let b = if tb { transpose(b, n, k) } else { b.to_vec() };
                    out.extend(mm(&a, &b, m, k, n));
                }
                out
            }),
        }
    });
}

fn elementwise(name: &str, build: fn(&mut Tape, Var, Var) -> Var, f: fn(f64, f64) -> f64) {
    run(name, move |rng| {
        let shape = [dims(rng, 1, 4), dims(rng, 1, 5)];
        Case {
            inputs: vec![input(rng, &shape), input(rng, &shape)],
            build: Box::new(move |t, v| build(t, v[0], v[1])),
            shadow: Box::new(move |x| x[0].iter().zip(&x[1]).map(|(&a, &b)| f(a, b)).collect()),
        }
    });
}

pub fn add_sub_mul() {
    elementwise("add", |t, a, b| t.add(a, b).unwrap(), |a, b| a + b);
    elementwise("sub", |t, a, b| t.sub(a, b).unwrap(), |a, b| a - b);
    elementwise("mul", |t, a, b| t.mul(a, b).unwrap(), |a, b| a * b);
}

pub fn add_row() {
    run("add_row", |rng| {
        let (r, c) = (dims(rng, 1, 5), dims(rng, 1, 5));
        Case {
            inputs: vec![input(rng, &[r, c]), input(rng, &[c])],
            build: Box::new(|t, v| t.add_row(v[0], v[1]).unwrap()),
            shadow: Box::new(move |x| (0..r * c).map(|i| x[0][i] + x[1][i % c]).collect()),
        }
    });
}

pub fn scalar_ops() {
    run("scale", |rng| {
        let s = rng.gen_range(-2.0..2.0f32);
        Case {
            inputs: vec![{ let s = [dims(rng, 1, 6)]; input(rng, &s) }],
            build: Box::new(move |t, v| t.scale(v[0], s)),
            shadow: Box::new(move |x| x[0].iter().map(|a| a * f64::from(s)).collect()),
        }
    });
    run("add_scalar", |rng| {
        let s = rng.gen_range(-2.0..2.0f32);
        Case {
            inputs: vec![{ let s = [dims(rng, 1, 6)]; input(rng, &s) }],
            build: Box::new(move |t, v| t.add_scalar(v[0], s)),
            shadow: Box::new(move |x| x[0].iter().map(|a| a + f64::from(s)).collect()),
        }
    });
}

pub fn activations() {
    let shape = |rng: &mut ChaCha8Rng| [dims(rng, 1, 4), dims(rng, 1, 5)];
    run("tanh", |rng| Case {
        inputs: vec![{ let s = shape(rng); input(rng, &s) }],
        build: Box::new(|t, v| t.tanh(v[0])),
        shadow: Box::new(|x| x[0].iter().map(|a| a.tanh()).collect()),
    });
    run("sigmoid", |rng| Case {
        inputs: vec![{ let s = shape(rng); input(rng, &s) }],
        build: Box::new(|t, v| t.sigmoid(v[0])),
        shadow: Box::new(|x| x[0].iter().map(|a| 1.0 / (1.0 + (-a).exp())).collect()),
    });
    run("relu", |rng| Case {
        inputs: vec![{ let s = shape(rng); spread(rng, &s) }],
        build: Box::new(|t, v| t.relu(v[0])),
        shadow: Box::new(|x| x[0].iter().map(|a| a.max(0.0)).collect()),
    });
}

pub fn concat() {
    run("concat", |rng| {
        let rank = dims(rng, 1, 3);
        let axis = rng.gen_range(0..rank);
        let base: Vec<usize> = (0..rank).map(|_| dims(rng, 1, 3)).collect();
        let parts = dims(rng, 1, 3);
        let shapes: Vec<Vec<usize>> = (0..parts)
            .map(|_| {
                let mut s = base.clone();
                s[axis] = dims(rng, 1, 3);
                s
            })
            .collect();
        let inputs: Vec<_> = shapes.iter().map(|s| input(rng, s)).collect();
        Case {
            inputs,
            build: Box::new(move |t, v| t.concat(v, axis).unwrap()),
            shadow: Box::new(move |x| {
                let (outer, _, inner) = split(&base, axis);
                let mut out = Vec::new();
                for o in 0..outer {
                    for (p, s) in shapes.iter().enumerate() {
                        let block = s[axis] * inner;
                        out.extend_from_slice(&x[p][o * block..(o + 1) * block]);
                    }
                }
                out
            }),
        }
    });
}

pub fn slice() {
    run("slice", |rng| {
        let rank = dims(rng, 1, 3);
        let shape: Vec<usize> = (0..rank).map(|_| dims(rng, 1, 4)).collect();
        let axis = rng.gen_range(0..rank);
        let start = rng.gen_range(0..shape[axis]);
        let len = rng.gen_range(1..=shape[axis] - start);
        let s2 = shape.clone();
        Case {
            inputs: vec![input(rng, &shape)],
            build: Box::new(move |t, v| t.slice(v[0], axis, start, len).unwrap()),
            shadow: Box::new(move |x| {
                let (outer, n, inner) = split(&s2, axis);
                let mut out = Vec::new();
                for o in 0..outer {
                    let base = (o * n + start) * inner;
                    out.extend_from_slice(&x[0][base..base + len * inner]);
                }
                out
            }),
        }
    });
}

pub fn embedding_lookup() {
    run("embedding_lookup", |rng| {
        let (rows, width) = (dims(rng, 1, 5), dims(rng, 1, 4));
        let count = dims(rng, 1, 7);
        let idx: Vec<usize> = (0..count).map(|_| rng.gen_range(0..rows)).collect();
        let idx2 = idx.clone();
        Case {
            inputs: vec![input(rng, &[rows, width])],
            build: Box::new(move |t, v| t.embedding_lookup(v[0], &idx).unwrap()),
            shadow: Box::new(move |x| {
                idx2.iter()
                    .flat_map(|&i| x[0][i * width..(i + 1) * width].to_vec())
                    .collect()
            }),
        }
    });
}

pub fn reshape_and_permute() {
    run("reshape", |rng| {
        let (a, b) = (dims(rng, 1, 4), dims(rng, 1, 4));
        Case {
            inputs: vec![input(rng, &[a, b])],
            build: Box::new(move |t, v| t.reshape(v[0], &[b, a]).unwrap()),
            shadow: Box::new(|x| x[0].clone()),
        }
    });
    run("permute", |rng| {
        let rank = dims(rng, 2, 4);
        let shape: Vec<usize> = (0..rank).map(|_| dims(rng, 1, 3)).collect();
        let mut perm: Vec<usize> = (0..rank).collect();
        for i in (1..rank).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let (s2, p2) = (shape.clone(), perm.clone());
        Case {
            inputs: vec![input(rng, &shape)],
            build: Box::new(move |t, v| t.permute(v[0], &perm).unwrap()),
            shadow: Box::new(move |x| {
                let out_shape: Vec<usize> = p2.iter().map(|&p| s2[p]).collect();
                let mut strides = vec![1; s2.len()];
                for i in (0..s2.len() - 1).rev() {
                    strides[i] = strides[i + 1] * s2[i + 1];
                }
                (0..x[0].len())
                    .map(|lin| {
                        let mut rem = lin;
                        let mut off = 0;
                        for d in (0..out_shape.len()).rev() {
                            off += (rem % out_shape[d]) * strides[p2[d]];
                            rem /= out_shape[d];
                        }
                        x[0][off]
                    })
                    .collect()
            }),
        }
    });
}

struct ConvDims {
    b: usize,
    t: usize,
    c: usize,
    w: usize,
    co: usize,
}

fn conv_reference(x: &[f64], k: &[f64], bias: &[f64], d: &ConvDims) -> Vec<f64> {
    let mut out = Vec::new();
    for bi in 0..d.b {
        for ti in 0..d.t - d.w + 1 {
            for o in 0..d.co {
                let mut s = bias[o];
                for dw in 0..d.w {
                    for ci in 0..d.c {
                        s += x[(bi * d.t + ti + dw) * d.c + ci] * k[(dw * d.c + ci) * d.co + o];
                    }
                }
                out.push(s);
            }
        }
    }
    out
}

pub fn unfold_and_conv1d() {
    run("unfold", |rng| {
        let (b, t, c) = (dims(rng, 1, 3), dims(rng, 2, 6), dims(rng, 1, 3));
        let w = rng.gen_range(1..=t);
        Case {
            inputs: vec![input(rng, &[b, t, c])],
            build: Box::new(move |tp, v| tp.unfold(v[0], w).unwrap()),
            shadow: Box::new(move |x| {
                let mut out = Vec::new();
                for bi in 0..b {
                    for ti in 0..t - w + 1 {
                        out.extend_from_slice(&x[0][(bi * t + ti) * c..(bi * t + ti + w) * c]);
                    }
                }
                out
            }),
        }
    });
    run("conv1d", |rng| {
        let d = ConvDims {
            b: dims(rng, 1, 3),
            t: dims(rng, 3, 7),
            c: dims(rng, 1, 3),
            w: dims(rng, 1, 3),
            co: dims(rng, 1, 3),
        };
        let inputs = vec![
            input(rng, &[d.b, d.t, d.c]),
            input(rng, &[d.w * d.c, d.co]),
            input(rng, &[d.co]),
        ];
        let w = d.w;
        Case {
            inputs,
            build: Box::new(move |tp, v| tp.conv1d(v[0], v[1], v[2], w).unwrap()),
            shadow: Box::new(move |x| conv_reference(&x[0], &x[1], &x[2], &d)),
        }
    });
}

pub fn softmax_axis() {
    run("softmax", |rng| {
        let rank = dims(rng, 1, 3);
        let shape: Vec<usize> = (0..rank).map(|_| dims(rng, 1, 4)).collect();
        let axis = rng.gen_range(0..rank);
        let s2 = shape.clone();
        let mut inp = input(rng, &shape);
        inp.1.iter_mut().for_each(|x| *x *= 3.0);
        Case {
            inputs: vec![inp],
            build: Box::new(move |t, v| t.softmax(v[0], axis).unwrap()),
            shadow: Box::new(move |x| {
                let (outer, n, inner) = split(&s2, axis);
                let mut out = vec![0.0; x[0].len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| (o * n + k) * inner + i;
                        let row: Vec<f64> = (0..n).map(|k| x[0][at(k)]).collect();
                        for (k, p) in softmax(&row).into_iter().enumerate() {
                            out[at(k)] = p;
                        }
                    }
                }
                out
            }),
        }
    });
}

pub fn masked_softmax() {
    run("masked_softmax", |rng| {
        let (g, r, c) = (dims(rng, 1, 3), dims(rng, 1, 3), dims(rng, 1, 5));
        let lens: Vec<usize> = (0..g).map(|_| rng.gen_range(1..=c)).collect();
        let l2 = lens.clone();
        Case {
            inputs: vec![input(rng, &[g, r, c])],
            build: Box::new(move |t, v| t.masked_softmax(v[0], &lens).unwrap()),
            shadow: Box::new(move |x| {
                let mut out = vec![0.0; g * r * c];
                for gi in 0..g {
                    for ri in 0..r {
                        let base = (gi * r + ri) * c;
                        let p = softmax(&x[0][base..base + l2[gi]]);
                        out[base..base + l2[gi]].copy_from_slice(&p);
                    }
                }
                out
            }),
        }
    });
}

pub fn max_over_time() {
    run("masked_max_over_time", |rng| {
        let (b, t, c) = (dims(rng, 1, 3), dims(rng, 1, 5), dims(rng, 1, 3));
        let lens: Vec<usize> = (0..b).map(|_| rng.gen_range(1..=t)).collect();
        let l2 = lens.clone();
        Case {
            inputs: vec![spread(rng, &[b, t, c])],
            build: Box::new(move |tp, v| tp.masked_max_over_time(v[0], &lens).unwrap()),
            shadow: Box::new(move |x| {
                let mut out = Vec::new();
                for bi in 0..b {
                    for ci in 0..c {
                        out.push(
                            (0..l2[bi])
                                .map(|ti| x[0][(bi * t + ti) * c + ci])
                                .fold(f64::NEG_INFINITY, f64::max),
                        );
                    }
                }
                out
            }),
        }
    });
}

pub fn reductions() {
    run("mean_over_axis", |rng| {
        let rank = dims(rng, 1, 3);
        let shape: Vec<usize> = (0..rank).map(|_| dims(rng, 1, 4)).collect();
        let axis = rng.gen_range(0..rank);
        let s2 = shape.clone();
        Case {
            inputs: vec![input(rng, &shape)],
            build: Box::new(move |t, v| t.mean_over_axis(v[0], axis).unwrap()),
            shadow: Box::new(move |x| {
                let (outer, n, inner) = split(&s2, axis);
                let mut out = vec![0.0; outer * inner];
                for o in 0..outer {
                    for k in 0..n {
                        for i in 0..inner {
                            out[o * inner + i] += x[0][(o * n + k) * inner + i] / n as f64;
                        }
                    }
                }
                out
            }),
        }
    });
    run("sum", |rng| Case {
        inputs: vec![{ let s = [dims(rng, 1, 4), dims(rng, 1, 4)]; input(rng, &s) }],
        build: Box::new(|t, v| t.sum(v[0])),
        shadow: Box::new(|x| vec![x[0].iter().sum()]),
    });
    run("mean", |rng| Case {
        inputs: vec![{ let s = [dims(rng, 1, 4), dims(rng, 1, 4)]; input(rng, &s) }],
        build: Box::new(|t, v| t.mean(v[0])),
        shadow: Box::new(|x| vec![x[0].iter().sum::<f64>() / x[0].len() as f64]),
    });
}

pub fn layer_norm() {
    run("layer_norm", |rng| {
        let (r, c) = (dims(rng, 1, 4), dims(rng, 2, 6));
        Case {
            inputs: vec![spread(rng, &[r, c]), input(rng, &[c]), input(rng, &[c])],
            build: Box::new(|t, v| t.layer_norm(v[0], v[1], v[2]).unwrap()),
            shadow: Box::new(move |x| {
                let mut out = Vec::new();
                for row in x[0].chunks(c) {
                    let mean = row.iter().sum::<f64>() / c as f64;
                    let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
                    let inv = 1.0 / (var + 1e-5).sqrt();
                    out.extend(row.iter().enumerate().map(|(k, v)| (v - mean) * inv * x[1][k] + x[2][k]));
                }
                out
            }),
        }
    });
}

pub fn row_geometry() {
    // one-column rows have constant direction and a zero gradient
    let shape = |rng: &mut ChaCha8Rng| [dims(rng, 1, 4), dims(rng, 2, 5)];
    run("normalize_rows", |rng| {
        let s = shape(rng);
        let c = s[1];
        Case {
            inputs: vec![input(rng, &s)],
            build: Box::new(|t, v| t.normalize_rows(v[0]).unwrap()),
            shadow: Box::new(move |x| {
                x[0].chunks(c)
                    .flat_map(|r| r.iter().map(|v| v / norm(r)).collect::<Vec<_>>())
                    .collect()
            }),
        }
    });
    run("row_dot", |rng| {
        let s = shape(rng);
        let c = s[1];
        Case {
            inputs: vec![input(rng, &s), input(rng, &s)],
            build: Box::new(|t, v| t.row_dot(v[0], v[1]).unwrap()),
            shadow: Box::new(move |x| {
                x[0].chunks(c)
                    .zip(x[1].chunks(c))
                    .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum())
                    .collect()
            }),
        }
    });
    run("cosine_similarity", |rng| {
        let s = shape(rng);
        let c = s[1];
        Case {
            inputs: vec![input(rng, &s), input(rng, &s)],
            build: Box::new(|t, v| t.cosine_similarity(v[0], v[1]).unwrap()),
            shadow: Box::new(move |x| {
                x[0].chunks(c)
                    .zip(x[1].chunks(c))
                    .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() / (norm(a) * norm(b)))
                    .collect()
            }),
        }
    });
}

pub fn spmm() {
    run("spmm", |rng| {
        let (rows, cols, w) = (dims(rng, 1, 4), dims(rng, 1, 4), dims(rng, 1, 3));
        let mut triplets = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if rng.gen_bool(0.5) {
                    triplets.push((r, c, rng.gen_range(-1.0..1.0f32)));
                }
            }
        }
        let mut dense = vec![0.0; rows * cols];
        for &(r, c, v) in &triplets {
            dense[r * cols + c] += f64::from(v);
        }
        let m = Arc::new(SparseMatrix::from_triplets(rows, cols, triplets));
        Case {
            inputs: vec![input(rng, &[cols, w])],
            build: Box::new(move |t, v| t.spmm(&m, v[0]).unwrap()),
            shadow: Box::new(move |x| mm(&dense, &x[0], rows, cols, w)),
        }
    });
}

pub fn softmax_cross_entropy() {
    run("softmax_cross_entropy", |rng| {
        let (b, c) = (dims(rng, 1, 5), dims(rng, 2, 6));
        let targets: Vec<usize> = (0..b).map(|_| rng.gen_range(0..c)).collect();
        let t2 = targets.clone();
        let mut inp = input(rng, &[b, c]);
        inp.1.iter_mut().for_each(|x| *x *= 4.0);
        Case {
            inputs: vec![inp],
            build: Box::new(move |t, v| t.softmax_cross_entropy(v[0], &targets).unwrap()),
            shadow: Box::new(move |x| {
                let loss: f64 = x[0]
                    .chunks(c)
                    .zip(&t2)
                    .map(|(row, &t)| -softmax(row)[t].ln())
                    .sum();
                vec![loss / b as f64]
            }),
        }
    });
}

pub fn composed_chain() {
    // shared inputs force gradient accumulation across several paths
    run("composed", |rng| {
        let (b, d) = (dims(rng, 2, 4), dims(rng, 2, 4));
        Case {
            inputs: vec![input(rng, &[b, d]), input(rng, &[d, d]), input(rng, &[d])],
            build: Box::new(|t, v| {
                let h = t.matmul(v[0], v[1]).unwrap();
                let h = t.add_row(h, v[2]).unwrap();
                let h = t.tanh(h);
                let y = t.add(h, v[0]).unwrap();
                let n = t.normalize_rows(y).unwrap();
                t.matmul_t(n, n, false, true).unwrap()
            }),
            shadow: Box::new(move |x| {
                let h = mm(&x[0], &x[1], b, d, d);
                let y: Vec<f64> = h
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v + x[2][i % d]).tanh() + x[0][i])
                    .collect();
                let n: Vec<f64> = y
                    .chunks(d)
                    .flat_map(|r| r.iter().map(|v| v / norm(r)).collect::<Vec<_>>())
                    .collect();
                mm(&n, &transpose(&n, b, d), b, d, b)
            }),
        }
    });
}

/// Every primitive group, by name.
pub const CHECKS: &[(&str, fn())] = &[
    ("matmul", matmul),
    ("batch_matmul", batch_matmul),
    ("add_sub_mul", add_sub_mul),
    ("add_row", add_row),
    ("scalar_ops", scalar_ops),
    ("activations", activations),
    ("concat", concat),
    ("slice", slice),
    ("embedding_lookup", embedding_lookup),
    ("reshape_and_permute", reshape_and_permute),
    ("unfold_and_conv1d", unfold_and_conv1d),
    ("softmax_axis", softmax_axis),
    ("masked_softmax", masked_softmax),
    ("max_over_time", max_over_time),
    ("reductions", reductions),
    ("layer_norm", layer_norm),
    ("row_geometry", row_geometry),
    ("spmm", spmm),
    ("softmax_cross_entropy", softmax_cross_entropy),
    ("composed_chain", composed_chain),
];
