//! Functional (`Add(Symbol('x'), ...)`) and LaTeX serializations.

use crate::expr::{node_cmp, split_coefficient, Expr, SymbolOrder};
use crate::number::Number;
use num_traits::One;

/// Serializes to the functional surface form parsed by [`crate::parse_functional`].
pub fn to_functional(e: &Expr) -> String {
    let mut out = String::new();
    write_functional(e, &mut out);
    out
}

fn write_functional(e: &Expr, out: &mut String) {
    match e {
        Expr::Number(n) => {
            if n.is_integer() {
                out.push_str(&format!("Integer({})", n.numer()));
            } else {
                out.push_str(&format!("Rational({}, {})", n.numer(), n.denom()));
            }
        }
        Expr::Symbol(name) => {
            out.push_str("Symbol('");
            out.push_str(name);
            out.push_str("')");
        }
        Expr::Function(f, arg) => {
            out.push_str(f.name());
            out.push('(');
            write_functional(arg, out);
            out.push(')');
        }
        Expr::Power(b, x) => {
            out.push_str("Pow(");
            write_functional(b, out);
            out.push_str(", ");
            write_functional(x, out);
            out.push(')');
        }
        Expr::Product(args) | Expr::Sum(args) => {
            out.push_str(if matches!(e, Expr::Sum(_)) { "Add(" } else { "Mul(" });
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_functional(a, out);
            }
            out.push(')');
        }
    }
}

/// Renders LaTeX in the style `u + \cos{(\log{(- x + o)})}`.
pub fn to_latex(e: &Expr) -> String {
    let (negative, body) = latex_signed(e);
    if negative {
        format!("- {body}")
    } else {
        body
    }
}

/// Returns the sign and the unsigned rendering of `e`.
fn latex_signed(e: &Expr) -> (bool, String) {
    match e {
        Expr::Number(n) => (n.is_negative(), latex_number(&n.abs())),
        Expr::Product(_) => latex_product(e),
        _ => (false, latex_unsigned(e)),
    }
}

fn latex_number(n: &Number) -> String {
    if n.is_integer() {
        n.numer().to_string()
    } else {
        format!("\\frac{{{}}}{{{}}}", n.numer(), n.denom())
    }
}

fn latex_unsigned(e: &Expr) -> String {
    match e {
        Expr::Number(n) => latex_number(&n.abs()),
        Expr::Symbol(name) => name.clone(),
        Expr::Function(f, arg) => format!("\\{}{{({})}}", f.name(), to_latex(arg)),
        Expr::Power(base, exp) => latex_power(base, exp),
        Expr::Product(_) => latex_product(e).1,
        Expr::Sum(terms) => latex_sum(terms),
    }
}

fn latex_sum(terms: &[Expr]) -> String {
    let mut out = String::new();
    for (i, t) in terms.iter().enumerate() {
        let (neg, body) = latex_signed(t);
        match (i, neg) {
            (0, false) => out.push_str(&body),
            (0, true) => {
                out.push_str("- ");
                out.push_str(&body);
            }
            (_, false) => {
                out.push_str(" + ");
                out.push_str(&body);
            }
            (_, true) => {
                out.push_str(" - ");
                out.push_str(&body);
            }
        }
    }
    out
}

fn needs_base_parens(base: &Expr) -> bool {
    match base {
        Expr::Number(n) => n.is_negative() || !n.is_integer(),
        Expr::Symbol(_) | Expr::Function(..) => false,
        _ => true,
    }
}

fn latex_power(base: &Expr, exp: &Expr) -> String {
    if let Some(n) = exp.as_number() {
        if n.is_negative() {
            let pos = Expr::power(base.clone(), Expr::Number(-n));
            return format!("\\frac{{1}}{{{}}}", latex_unsigned(&pos));
        }
    }
    let b = if needs_base_parens(base) {
        format!("({})", to_latex(base))
    } else {
        to_latex(base)
    };
    format!("{b}^{{{}}}", to_latex(exp))
}

/// Negative-exponent factors are moved to a `\frac` denominator. Symbol
/// factors print in descending name order, as in sums.
fn latex_product(e: &Expr) -> (bool, String) {
    let (coef, rest) = split_coefficient(e);
    let mut rest: Vec<&Expr> = rest.iter().collect();
    rest.sort_by(|a, b| node_cmp(a, b, SymbolOrder::Descending));
    let negative = coef.is_negative();
    let coef = coef.abs();

    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<Expr> = Vec::new();
    if !coef.numer().is_one() {
        num.push(coef.numer().to_string());
    }
    for f in rest {
        match f {
            Expr::Power(b, x) if x.as_number().is_some_and(Number::is_negative) => {
                let n = x.as_number().unwrap();
                den.push(Expr::power((**b).clone(), Expr::Number(-n)));
            }
            Expr::Sum(_) => num.push(format!("({})", latex_unsigned(f))),
            other => num.push(latex_unsigned(other)),
        }
    }

    let numerator = if num.is_empty() { "1".to_string() } else { num.join(" ") };
    let mut den_parts: Vec<String> = Vec::new();
    if !coef.denom().is_one() {
        den_parts.push(coef.denom().to_string());
    }
    let den_count = den.len() + den_parts.len();
    for d in &den {
        if matches!(d, Expr::Sum(_)) && den_count > 1 {
            den_parts.push(format!("({})", latex_unsigned(d)));
        } else {
            den_parts.push(latex_unsigned(d));
        }
    }
    if den_parts.is_empty() {
        (negative, numerator)
    } else {
        (
            negative,
            format!("\\frac{{{}}}{{{}}}", numerator, den_parts.join(" ")),
        )
    }
}
