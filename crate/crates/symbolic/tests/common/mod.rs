#![allow(dead_code)]

use std::collections::HashMap;

use opspace_symbolic::{Expr, Func};
use rand::seq::SliceRandom;
use rand::Rng;

pub const VARS: [&str; 4] = ["w", "x", "y", "z"];

/// Random tree built directly from the enum, so it is usually not canonical.
pub fn raw_expr<R: Rng>(rng: &mut R, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return leaf(rng);
    }
    match rng.gen_range(0..6) {
        0 | 1 => {
            let n = rng.gen_range(2..=4);
            Expr::Sum((0..n).map(|_| raw_expr(rng, depth - 1)).collect())
        }
        2 | 3 => {
            let n = rng.gen_range(2..=3);
            Expr::Product((0..n).map(|_| raw_expr(rng, depth - 1)).collect())
        }
        4 => {
            let k = *[-2i64, -1, 2, 3].choose(rng).unwrap();
            Expr::Power(Box::new(raw_expr(rng, depth - 1)), Box::new(Expr::integer(k)))
        }
        _ => {
            let f = *Func::ALL.choose(rng).unwrap();
            Expr::Function(f, Box::new(raw_expr(rng, depth - 1)))
        }
    }
}

fn leaf<R: Rng>(rng: &mut R) -> Expr {
    if rng.gen_bool(0.7) {
        Expr::symbol(*VARS.choose(rng).unwrap())
    } else {
        Expr::integer(rng.gen_range(-3..=4))
    }
}

/// Same tree with every Sum/Product argument list shuffled.
pub fn shuffle_commutative<R: Rng>(e: &Expr, rng: &mut R) -> Expr {
    match e {
        Expr::Number(_) | Expr::Symbol(_) => e.clone(),
        Expr::Function(f, a) => Expr::Function(*f, Box::new(shuffle_commutative(a, rng))),
        Expr::Power(b, x) => Expr::Power(
            Box::new(shuffle_commutative(b, rng)),
            Box::new(shuffle_commutative(x, rng)),
        ),
        Expr::Sum(args) | Expr::Product(args) => {
            let mut v: Vec<Expr> = args.iter().map(|a| shuffle_commutative(a, rng)).collect();
            v.shuffle(rng);
            if matches!(e, Expr::Sum(_)) {
                Expr::Sum(v)
            } else {
                Expr::Product(v)
            }
        }
    }
}

/// Canonical expression drawn from a tamer grammar: no nested powers of
/// functions, so derivatives stay well conditioned on `[0.5, 1.5]`.
pub fn smooth_expr<R: Rng>(rng: &mut R, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.3) {
        return leaf(rng);
    }
    match rng.gen_range(0..5) {
        0 => smooth_expr(rng, depth - 1) + smooth_expr(rng, depth - 1),
        1 => smooth_expr(rng, depth - 1) * smooth_expr(rng, depth - 1),
        2 => {
            let k = rng.gen_range(2..=3);
            Expr::power(smooth_expr(rng, depth - 1), Expr::integer(k))
        }
        3 => {
            let f = *[Func::Cos, Func::Sin, Func::Exp].choose(rng).unwrap();
            Expr::function(f, smooth_expr(rng, depth - 1))
        }
        _ => {
            // log and reciprocal only of a strictly positive argument
            let inner = Expr::sum([
                Expr::integer(3),
                Expr::power(Expr::symbol(*VARS.choose(rng).unwrap()), Expr::integer(2)),
            ]);
            if rng.gen_bool(0.5) {
                Expr::function(Func::Log, inner)
            } else {
                inner.recip()
            }
        }
    }
}

pub fn random_point<R: Rng>(rng: &mut R) -> HashMap<String, f64> {
    VARS.iter()
        .map(|v| (v.to_string(), rng.gen_range(0.5..1.5)))
        .collect()
}
