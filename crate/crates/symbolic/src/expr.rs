//! Canonical expression trees.
//!
//! Every [`Expr`] built through the smart constructors ([`Expr::sum`],
//! [`Expr::product`], [`Expr::power`], [`Expr::function`]) is in canonical
//! form:
//!
//! - `Sum`/`Product` have at least two arguments, are flattened, and hold at
//!   most one numeric constant.
//! - Products never contain the factor 1, sums never contain the term 0.
//! - Like terms are collected (`x + x -> 2x`), equal product bases are merged
//!   into powers (`x x -> x^2`).
//! - Negation is `Product(-1, ...)`.
//! - Arguments are sorted: product factors by the node order, sum terms by
//!   [`term_order`].
//!
//! The raw variants are public so that tests and parsers can build arbitrary
//! trees; [`crate::simplify`] brings any tree into canonical form.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::number::Number;

/// The elementary functions supported by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Cos,
    Exp,
    Log,
    Sin,
}

impl Func {
    pub const ALL: [Func; 4] = [Func::Cos, Func::Exp, Func::Log, Func::Sin];

    pub fn name(self) -> &'static str {
        match self {
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sin" => Some(Func::Sin),
            _ => None,
        }
    }
}

/// A mathematical expression.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    /// Integer or rational constant.
    Number(Number),
    Symbol(String),
    Function(Func, Box<Expr>),
    Power(Box<Expr>, Box<Expr>),
    Product(Vec<Expr>),
    Sum(Vec<Expr>),
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum SymbolOrder {
    Ascending,
    Descending,
}

impl Expr {
    fn rank(&self) -> u8 {
        match self {
            Expr::Number(_) => 0,
            Expr::Symbol(_) => 1,
            Expr::Function(..) => 2,
            Expr::Power(..) => 3,
            Expr::Product(_) => 4,
            Expr::Sum(_) => 5,
        }
    }
}

/// Structural total order: constants < symbols < functions < powers <
/// products < sums, recursing into children.
pub(crate) fn node_cmp(a: &Expr, b: &Expr, order: SymbolOrder) -> Ordering {
    let by_rank = a.rank().cmp(&b.rank());
    if by_rank != Ordering::Equal {
        return by_rank;
    }
    match (a, b) {
        (Expr::Number(x), Expr::Number(y)) => x.cmp(y),
        (Expr::Symbol(x), Expr::Symbol(y)) => match order {
            SymbolOrder::Ascending => x.cmp(y),
            SymbolOrder::Descending => y.cmp(x),
        },
        (Expr::Function(f, x), Expr::Function(g, y)) => f
            .name()
            .cmp(g.name())
            .then_with(|| node_cmp(x, y, order)),
        (Expr::Power(b1, e1), Expr::Power(b2, e2)) => {
            node_cmp(b1, b2, order).then_with(|| node_cmp(e1, e2, order))
        }
        (Expr::Product(xs), Expr::Product(ys)) | (Expr::Sum(xs), Expr::Sum(ys)) => {
            slice_cmp(xs, ys, order)
        }
        _ => unreachable!("equal ranks imply equal variants"),
    }
}

fn slice_cmp(xs: &[Expr], ys: &[Expr], order: SymbolOrder) -> Ordering {
    for (x, y) in xs.iter().zip(ys) {
        let c = node_cmp(x, y, order);
        if c != Ordering::Equal {
            return c;
        }
    }
    xs.len().cmp(&ys.len())
}

/// Splits a term into its numeric coefficient and the factors that remain.
pub(crate) fn split_coefficient(term: &Expr) -> (Number, &[Expr]) {
    match term {
        Expr::Number(n) => (n.clone(), &[]),
        Expr::Product(args) => match args.first() {
            Some(Expr::Number(n)) => (n.clone(), &args[1..]),
            _ => (Number::one(), args.as_slice()),
        },
        other => (Number::one(), std::slice::from_ref(other)),
    }
}

fn rest_cmp(a: &[Expr], b: &[Expr], order: SymbolOrder) -> Ordering {
    match (a.len(), b.len()) {
        (1, 1) => node_cmp(&a[0], &b[0], order),
        // A multi-factor remainder behaves like a Product node.
        (1, _) => a[0].rank().cmp(&4).then(Ordering::Less),
        (_, 1) => 4u8.cmp(&b[0].rank()).then(Ordering::Greater),
        _ => slice_cmp(a, b, order),
    }
}

/// Order of terms inside a sum: constants first, then terms compared by their
/// coefficient-free part with symbols in descending name order, then by
/// coefficient. This keeps `2 u + cos(...)` and `- x + o` in the
/// conventional printed order.
pub fn term_order(a: &Expr, b: &Expr) -> Ordering {
    let (ca, ra) = split_coefficient(a);
    let (cb, rb) = split_coefficient(b);
    match (ra.is_empty(), rb.is_empty()) {
        (true, true) => ca.cmp(&cb),
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => rest_cmp(ra, rb, SymbolOrder::Descending).then_with(|| ca.cmp(&cb)),
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        node_cmp(self, other, SymbolOrder::Ascending)
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Expr {
    pub fn symbol(name: impl Into<String>) -> Expr {
        Expr::Symbol(name.into())
    }

    pub fn integer(value: i64) -> Expr {
        Expr::Number(Number::integer(value))
    }

    pub fn rational(num: i64, den: i64) -> Expr {
        Expr::Number(Number::rational(num, den))
    }

    pub fn zero() -> Expr {
        Expr::Number(Number::zero())
    }

    pub fn one() -> Expr {
        Expr::Number(Number::one())
    }

    pub fn as_number(&self) -> Option<&Number> {
        match self {
            Expr::Number(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_number().is_some_and(Number::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_number().is_some_and(Number::is_one)
    }

    /// Direct children in canonical order.
    /// Number of nodes in the tree.
    pub fn node_count(&self) -> usize {
        1 + self.children().into_iter().map(Expr::node_count).sum::<usize>()
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Number(_) | Expr::Symbol(_) => Vec::new(),
            Expr::Function(_, a) => vec![a],
            Expr::Power(b, e) => vec![b, e],
            Expr::Product(xs) | Expr::Sum(xs) => xs.iter().collect(),
        }
    }

    /// Canonical sum of canonical terms.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut constant = Number::zero();
        // coefficient-free part -> accumulated coefficient
        let mut collected: BTreeMap<Expr, Number> = BTreeMap::new();
        let mut stack: Vec<Expr> = terms.into_iter().collect();
        while let Some(term) = stack.pop() {
            match term {
                Expr::Sum(inner) => stack.extend(inner),
                Expr::Number(n) => constant = &constant + &n,
                other => {
                    let (coef, rest) = split_coefficient(&other);
                    let key = match rest {
                        [single] => single.clone(),
                        many => Expr::Product(many.to_vec()),
                    };
                    let entry = collected.entry(key).or_insert_with(Number::zero);
                    *entry = &*entry + &coef;
                }
            }
        }

        let mut out: Vec<Expr> = Vec::with_capacity(collected.len() + 1);
        let mut needs_resum = false;
        for (rest, coef) in collected {
            if coef.is_zero() {
                continue;
            }
            let term = if coef.is_one() {
                rest
            } else {
                Expr::product([Expr::Number(coef), rest])
            };
            match term {
                Expr::Number(n) => constant = &constant + &n,
                Expr::Sum(_) => {
                    needs_resum = true;
                    out.push(term);
                }
                t => out.push(t),
            }
        }
        if needs_resum {
            // A coefficient distributed over a sum; collect again.
            out.push(Expr::Number(constant));
            return Expr::sum(out);
        }
        if !constant.is_zero() {
            out.push(Expr::Number(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => {
                out.sort_by(term_order);
                Expr::Sum(out)
            }
        }
    }

    /// Canonical product of canonical factors.
    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Expr {
        let mut coef = Number::one();
        // base -> list of exponents (summed at the end)
        let mut bases: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
        let mut stack: Vec<Expr> = factors.into_iter().collect();
        while let Some(f) = stack.pop() {
            match f {
                Expr::Product(inner) => stack.extend(inner),
                Expr::Number(n) => coef = &coef * &n,
                Expr::Power(b, e) => bases.entry(*b).or_default().push(*e),
                other => bases.entry(other).or_default().push(Expr::one()),
            }
        }
        if coef.is_zero() {
            return Expr::zero();
        }

        let mut out: Vec<Expr> = Vec::with_capacity(bases.len());
        let mut needs_reproduct = false;
        for (base, exps) in bases {
            let exp = if exps.len() == 1 {
                exps.into_iter().next().unwrap()
            } else {
                Expr::sum(exps)
            };
            match Expr::power(base, exp) {
                Expr::Number(n) => coef = &coef * &n,
                p @ Expr::Product(_) => {
                    needs_reproduct = true;
                    out.push(p);
                }
                p => out.push(p),
            }
        }
        if needs_reproduct {
            out.push(Expr::Number(coef));
            return Expr::product(out);
        }
        if coef.is_zero() {
            return Expr::zero();
        }
        out.sort();
        match (coef.is_one(), out.len()) {
            (_, 0) => Expr::Number(coef),
            (true, 1) => out.pop().unwrap(),
            (true, _) => Expr::Product(out),
            (false, 1) if matches!(out[0], Expr::Sum(_)) => {
                // numeric coefficient distributes over a single sum
                let Expr::Sum(terms) = out.pop().unwrap() else {
                    unreachable!()
                };
                Expr::sum(
                    terms
                        .into_iter()
                        .map(|t| Expr::product([Expr::Number(coef.clone()), t])),
                )
            }
            (false, _) => {
                out.insert(0, Expr::Number(coef));
                Expr::Product(out)
            }
        }
    }

    /// Canonical power.
    pub fn power(base: Expr, exp: Expr) -> Expr {
        if exp.is_zero() {
            return Expr::one();
        }
        if exp.is_one() {
            return base;
        }
        if base.is_one() {
            return Expr::one();
        }
        let int_exp = exp.as_number().and_then(Number::as_i64);
        match (&base, int_exp) {
            (Expr::Number(b), Some(n)) => {
                if let Some(v) = b.checked_powi(n) {
                    return Expr::Number(v);
                }
            }
            (Expr::Number(b), None) if b.is_zero() => {
                if exp.as_number().is_some_and(|e| !e.is_negative()) {
                    return Expr::zero();
                }
            }
            (Expr::Power(..), Some(_)) => {
                let Expr::Power(inner_base, inner_exp) = base else {
                    unreachable!()
                };
                return Expr::power(*inner_base, Expr::product([*inner_exp, exp]));
            }
            (Expr::Product(_), Some(_)) => {
                let Expr::Product(factors) = base else {
                    unreachable!()
                };
                return Expr::product(
                    factors
                        .into_iter()
                        .map(|f| Expr::power(f, exp.clone())),
                );
            }
            _ => {}
        }
        Expr::Power(Box::new(base), Box::new(exp))
    }

    /// Canonical function application with exact constant folding
    /// (`cos 0`, `sin 0`, `exp 0`, `log 1`).
    pub fn function(f: Func, arg: Expr) -> Expr {
        match (f, &arg) {
            (Func::Cos, a) if a.is_zero() => Expr::one(),
            (Func::Sin, a) if a.is_zero() => Expr::zero(),
            (Func::Exp, a) if a.is_zero() => Expr::one(),
            (Func::Log, a) if a.is_one() => Expr::zero(),
            _ => Expr::Function(f, Box::new(arg)),
        }
    }

    pub fn neg(self) -> Expr {
        Expr::product([Expr::integer(-1), self])
    }

    pub fn recip(self) -> Expr {
        Expr::power(self, Expr::integer(-1))
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum([self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sum([self, rhs.neg()])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product([self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::product([self, rhs.recip()])
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::print::to_functional(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::print::to_latex(self))
    }
}
