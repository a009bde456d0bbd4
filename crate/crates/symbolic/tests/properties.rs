mod common;

use common::{random_point, raw_expr, shuffle_commutative, smooth_expr, VARS};
use opspace_symbolic::{
    apply_operation, differentiate, evaluate_numeric, integrate, parse_functional, simplify,
    to_functional, Expr, OperationKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn canonical_form_ignores_argument_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let e = raw_expr(&mut rng, 4);
        let shuffled = shuffle_commutative(&e, &mut rng);
        assert_eq!(
            to_functional(&simplify(&e)),
            to_functional(&simplify(&shuffled)),
            "raw: {e:?}"
        );
    }
}

#[test]
fn simplify_preserves_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    for _ in 0..1_000 {
        let e = raw_expr(&mut rng, 4);
        let s = simplify(&e);
        for _ in 0..10 {
            let point = random_point(&mut rng);
            let Ok(a) = evaluate_numeric(&e, &point) else { continue };
            let b = evaluate_numeric(&s, &point).unwrap_or_else(|err| {
                panic!("simplified form failed ({err}) where raw succeeded: {e:?}")
            });
            assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b} for {e:?}");
            checked += 1;
        }
    }
    assert!(checked > 5_000, "only {checked} valid points");
}

const FD_STEP: f64 = 1e-5;

/// Five-point central difference.
fn numeric_partial(e: &Expr, v: &str, point: &std::collections::HashMap<String, f64>) -> Option<f64> {
    let h = FD_STEP;
    let at = |dx: f64| {
        let mut p = point.clone();
        *p.get_mut(v).unwrap() += dx;
        evaluate_numeric(e, &p).ok()
    };
    let (m2, m1, p1, p2) = (at(-2.0 * h)?, at(-h)?, at(h)?, at(2.0 * h)?);
    Some((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h))
}

#[test]
fn derivative_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1_000 {
        let e = smooth_expr(&mut rng, 3);
        let v = VARS[rng.gen_range(0..VARS.len())];
        let d = differentiate(&e, v);
        for _ in 0..5 {
            let point = random_point(&mut rng);
            let Some(approx) = numeric_partial(&e, v, &point) else { continue };
            let exact = evaluate_numeric(&d, &point).unwrap();
            let value = evaluate_numeric(&e, &point).unwrap();
            // rounding noise of the stencil itself
            let noise = 10.0 * f64::EPSILON * value.abs() / FD_STEP;
            let scale = exact.abs().max(approx.abs()).max(1.0);
            assert!(
                (exact - approx).abs() <= 1e-5 * scale + noise,
                "d/d{v} {e:?}: {exact} vs {approx}"
            );
        }
    }
}

#[test]
fn integration_inverts_differentiation() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut successes = 0;
    for _ in 0..2_000 {
        let e = smooth_expr(&mut rng, 3);
        let v = VARS[rng.gen_range(0..VARS.len())];
        let Ok(f) = integrate(&e, v) else { continue };
        successes += 1;
        let back = simplify(&differentiate(&f, v));
        for _ in 0..5 {
            let point = random_point(&mut rng);
            let Ok(a) = evaluate_numeric(&e, &point) else { continue };
            let b = evaluate_numeric(&back, &point).unwrap();
            assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{e:?} -> {f:?}");
        }
    }
    assert!(successes > 200, "only {successes} integrable samples");
}

#[test]
fn arithmetic_operators_are_total() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..500 {
        let e = simplify(&raw_expr(&mut rng, 3));
        for t in OperationKind::ALL.into_iter().filter(|t| t.is_arithmetic()) {
            for v in VARS {
                let a = apply_operation(&e, t, v).unwrap();
                assert_eq!(a, apply_operation(&e, t, v).unwrap());
            }
        }
    }
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    (any::<u64>(), 0u32..5).prop_map(|(seed, depth)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        simplify(&raw_expr(&mut rng, depth))
    })
}

proptest! {
    #[test]
    fn functional_round_trip(e in arb_expr()) {
        let text = to_functional(&e);
        prop_assert_eq!(parse_functional(&text).unwrap(), e);
    }

    #[test]
    fn simplify_is_idempotent(e in arb_expr()) {
        prop_assert_eq!(simplify(&e), e);
    }
}
