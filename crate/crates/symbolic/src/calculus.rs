//! Symbolic differentiation and a rule-based integrator.

use crate::error::OpError;
use crate::expr::{Expr, Func};
use crate::simplify::contains_symbol;

/// Canonical derivative of `e` with respect to the symbol `v`.
///
/// Linearity, product rule, power rule, and chain rule for the four
/// elementary functions. Powers whose exponent depends on `v` use
/// `d(b^x) = b^x (x' log b + x b'/b)`.
pub fn differentiate(e: &Expr, v: &str) -> Expr {
    if !contains_symbol(e, v) {
        return Expr::zero();
    }
    match e {
        Expr::Number(_) => Expr::zero(),
        Expr::Symbol(s) => {
            if s == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Sum(terms) => Expr::sum(terms.iter().map(|t| differentiate(t, v))),
        Expr::Product(factors) => {
            let mut terms = Vec::with_capacity(factors.len());
            for (i, f) in factors.iter().enumerate() {
                let df = differentiate(f, v);
                if df.is_zero() {
                    continue;
                }
                let others = factors
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, g)| g.clone());
                terms.push(Expr::product(others.chain(std::iter::once(df))));
            }
            Expr::sum(terms)
        }
        Expr::Power(base, exp) => {
            let db = differentiate(base, v);
            if !contains_symbol(exp, v) {
                // x * b^(x-1) * b'
                let lowered = Expr::power((**base).clone(), (**exp).clone() - Expr::one());
                Expr::product([(**exp).clone(), lowered, db])
            } else {
                let dx = differentiate(exp, v);
                let log_term = Expr::product([dx, Expr::function(Func::Log, (**base).clone())]);
                let ratio_term = Expr::product([(**exp).clone(), db, (**base).clone().recip()]);
                Expr::product([e.clone(), Expr::sum([log_term, ratio_term])])
            }
        }
        Expr::Function(f, arg) => {
            let da = differentiate(arg, v);
            let a = (**arg).clone();
            let outer = match f {
                Func::Cos => Expr::function(Func::Sin, a).neg(),
                Func::Sin => Expr::function(Func::Cos, a),
                Func::Exp => Expr::function(Func::Exp, a),
                Func::Log => a.recip(),
            };
            Expr::product([outer, da])
        }
    }
}

/// Antiderivative of `e` with respect to `v`, constant of integration
/// omitted.
///
/// Rules, tried in order:
/// 1. sums integrate term by term
/// 2. `e` free of `v`: `e v`
/// 3. `v`-free factors of a product move outside the integral
/// 4. `v^n -> v^(n+1)/(n+1)` for numeric `n != -1`
/// 5. `v^-1 -> log v`
/// 6. `cos v -> sin v`, `sin v -> -cos v`, `exp v -> exp v`
///
/// Anything else is [`OpError::NotIntegrable`].
pub fn integrate(e: &Expr, v: &str) -> Result<Expr, OpError> {
    let not_integrable = || OpError::NotIntegrable(v.to_string());
    if let Expr::Sum(terms) = e {
        let parts = terms
            .iter()
            .map(|t| integrate(t, v))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Expr::sum(parts));
    }
    if !contains_symbol(e, v) {
        return Ok(Expr::product([e.clone(), Expr::symbol(v)]));
    }
    match e {
        Expr::Sum(_) => unreachable!("handled above"),
        Expr::Product(factors) => {
            let (free, bound): (Vec<&Expr>, Vec<&Expr>) =
                factors.iter().partition(|f| !contains_symbol(f, v));
            if free.is_empty() {
                return Err(not_integrable());
            }
            let inner = Expr::product(bound.into_iter().cloned());
            let integral = integrate(&inner, v)?;
            Ok(Expr::product(free.into_iter().cloned().chain(std::iter::once(integral))))
        }
        Expr::Symbol(_) => Ok(Expr::product([
            Expr::power(Expr::symbol(v), Expr::integer(2)),
            Expr::rational(1, 2),
        ])),
        Expr::Power(base, exp) => match (&**base, exp.as_number()) {
            (Expr::Symbol(s), Some(n)) if s == v => {
                let n = n.clone();
                if n == crate::Number::integer(-1) {
                    Ok(Expr::function(Func::Log, Expr::symbol(v)))
                } else {
                    let next = Expr::Number(&n + &crate::Number::one());
                    Ok(Expr::product([
                        Expr::power(Expr::symbol(v), next.clone()),
                        Expr::power(next, Expr::integer(-1)),
                    ]))
                }
            }
            _ => Err(not_integrable()),
        },
        Expr::Function(f, arg) => match &**arg {
            Expr::Symbol(s) if s == v => {
                let x = Expr::symbol(v);
                Ok(match f {
                    Func::Cos => Expr::function(Func::Sin, x),
                    Func::Sin => Expr::function(Func::Cos, x).neg(),
                    Func::Exp => Expr::function(Func::Exp, x),
                    Func::Log => return Err(not_integrable()),
                })
            }
            _ => Err(not_integrable()),
        },
        Expr::Number(_) => unreachable!("numbers never contain symbols"),
    }
}
