mod common;

use opspace_symbolic::{
    apply_operation, differentiate, enumerate_conclusions, free_symbols, integrate,
    parse_functional, simplify, to_functional, to_latex, Expr, OpError, OperandSet, OperationKind,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PREMISE_Z: &str = "Add(Symbol('u'), cos(log(Add(Mul(Integer(-1), Symbol('z')), Symbol('o')))))";
const PREMISE_X: &str = "Add(Symbol('u'), cos(log(Add(Mul(Integer(-1), Symbol('x')), Symbol('o')))))";

fn operands(vars: &[&str]) -> OperandSet {
    OperandSet::new(vars.iter().map(|s| s.to_string()).collect()).unwrap()
}

#[test]
fn worked_example_over_z_and_u() {
    let x = parse_functional(PREMISE_Z).unwrap();
    let v = operands(&["z", "u"]);

    let add = enumerate_conclusions(&x, OperationKind::Addition, &v).unwrap();
    let add: Vec<_> = add.conclusions.iter().map(|(_, y)| to_latex(y)).collect();
    assert_eq!(
        add,
        ["z + u + \\cos{(\\log{(- z + o)})}", "2 u + \\cos{(\\log{(- z + o)})}"]
    );

    let diff = enumerate_conclusions(&x, OperationKind::Differentiation, &v).unwrap();
    let diff: Vec<_> = diff.conclusions.iter().map(|(_, y)| to_latex(y)).collect();
    assert_eq!(diff, ["\\frac{\\sin{(\\log{(- z + o)})}}{- z + o}", "1"]);
}

#[test]
fn integration_with_fresh_operand() {
    let x = parse_functional(PREMISE_X).unwrap();
    assert_eq!(to_latex(&x), "u + \\cos{(\\log{(- x + o)})}");
    let y = apply_operation(&x, OperationKind::Integration, "r").unwrap();
    assert_eq!(to_latex(&y), "u r + r \\cos{(\\log{(- x + o)})}");
    assert_eq!(
        to_functional(&y),
        "Add(Mul(Symbol('r'), Symbol('u')), Mul(Symbol('r'), cos(log(Add(Mul(Integer(-1), Symbol('x')), Symbol('o'))))))"
    );
}

#[test]
fn free_symbols_of_worked_example() {
    let x = parse_functional(PREMISE_X).unwrap();
    let names: Vec<_> = free_symbols(&x).into_iter().collect();
    assert_eq!(names, ["o", "u", "x"]);
    assert!(free_symbols(&Expr::integer(5)).is_empty());
}

#[test]
fn not_integrable_is_reported() {
    let e = parse_functional("cos(log(Add(Mul(Integer(-1), Symbol('z')), Symbol('o'))))").unwrap();
    assert_eq!(integrate(&e, "z"), Err(OpError::NotIntegrable("z".into())));
}

#[test]
fn subtraction_set_matches_elementwise_application() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let e = simplify(&common::raw_expr(&mut rng, 3));
        let v = operands(&["a", "b", "c", "d"]);
        let set = enumerate_conclusions(&e, OperationKind::Subtraction, &v).unwrap();
        assert_eq!(set.conclusions.len(), 4);
        for (name, y) in &set.conclusions {
            assert_eq!(*y, apply_operation(&e, OperationKind::Subtraction, name).unwrap());
        }
    }
}

#[test]
fn polynomial_derivative() {
    let e = parse_functional("Add(Mul(Symbol('x'), Symbol('y')), Pow(Symbol('x'), Integer(2)))").unwrap();
    let expected = parse_functional("Add(Symbol('y'), Mul(Integer(2), Symbol('x')))").unwrap();
    assert_eq!(differentiate(&e, "x"), expected);
}
