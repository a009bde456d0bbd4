use std::collections::HashMap;

use crate::error::EvalError;
use crate::expr::{Expr, Func};

/// Symbol name -> value.
pub type Assignment = HashMap<String, f64>;

/// Evaluates `e` in IEEE double precision.
///
/// Fails on a missing symbol, `log` of a non-positive value, a zero
/// denominator, a non-integer power of a negative base, or a non-finite
/// intermediate.
pub fn evaluate_numeric(e: &Expr, assignment: &Assignment) -> Result<f64, EvalError> {
    let v = match e {
        Expr::Number(n) => n.to_f64(),
        Expr::Symbol(s) => *assignment
            .get(s)
            .ok_or_else(|| EvalError::MissingSymbol(s.clone()))?,
        Expr::Function(f, arg) => {
            let a = evaluate_numeric(arg, assignment)?;
            match f {
                Func::Cos => a.cos(),
                Func::Sin => a.sin(),
                Func::Exp => a.exp(),
                Func::Log => {
                    if a <= 0.0 {
                        return Err(EvalError::Domain(format!("log of non-positive value {a}")));
                    }
                    a.ln()
                }
            }
        }
        Expr::Power(base, exp) => {
            let b = evaluate_numeric(base, assignment)?;
            match exp.as_number().and_then(|n| n.as_i64()) {
                Some(k) => {
                    if b == 0.0 && k < 0 {
                        return Err(EvalError::Domain("zero denominator".into()));
                    }
                    match i32::try_from(k) {
                        Ok(k) => b.powi(k),
                        Err(_) => b.powf(k as f64),
                    }
                }
                None => {
                    let x = evaluate_numeric(exp, assignment)?;
                    if b < 0.0 {
                        return Err(EvalError::Domain(format!(
                            "non-integer power of negative base {b}"
                        )));
                    }
                    if b == 0.0 && x < 0.0 {
                        return Err(EvalError::Domain("zero denominator".into()));
                    }
                    b.powf(x)
                }
            }
        }
        Expr::Product(args) => {
            let mut acc = 1.0;
            for a in args {
                acc *= evaluate_numeric(a, assignment)?;
            }
            acc
        }
        Expr::Sum(args) => {
            let mut acc = 0.0;
            for a in args {
                acc += evaluate_numeric(a, assignment)?;
            }
            acc
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Domain(format!("non-finite value in {e:?}")))
    }
}
