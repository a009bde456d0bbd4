use std::collections::BTreeSet;

use crate::expr::Expr;

/// Rebuilds `e` bottom-up through the canonicalizing constructors.
///
/// On an already canonical expression this is the identity.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Number(_) | Expr::Symbol(_) => e.clone(),
        Expr::Function(f, a) => Expr::function(*f, simplify(a)),
        Expr::Power(b, x) => Expr::power(simplify(b), simplify(x)),
        Expr::Product(args) => Expr::product(args.iter().map(simplify)),
        Expr::Sum(args) => Expr::sum(args.iter().map(simplify)),
    }
}

/// Names of all symbols occurring in `e`.
pub fn free_symbols(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_symbols(e, &mut out);
    out
}

fn collect_symbols(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Symbol(s) => {
            out.insert(s.clone());
        }
        Expr::Number(_) => {}
        _ => {
            for c in e.children() {
                collect_symbols(c, out);
            }
        }
    }
}

pub fn contains_symbol(e: &Expr, name: &str) -> bool {
    match e {
        Expr::Symbol(s) => s == name,
        Expr::Number(_) => false,
        _ => e.children().into_iter().any(|c| contains_symbol(c, name)),
    }
}

/// Replaces every occurrence of the symbol `name` with `with`, then
/// canonicalizes.
pub fn substitute(e: &Expr, name: &str, with: &Expr) -> Expr {
    match e {
        Expr::Symbol(s) if s == name => with.clone(),
        Expr::Number(_) | Expr::Symbol(_) => e.clone(),
        Expr::Function(f, a) => Expr::function(*f, substitute(a, name, with)),
        Expr::Power(b, x) => Expr::power(substitute(b, name, with), substitute(x, name, with)),
        Expr::Product(args) => Expr::product(args.iter().map(|a| substitute(a, name, with))),
        Expr::Sum(args) => Expr::sum(args.iter().map(|a| substitute(a, name, with))),
    }
}
