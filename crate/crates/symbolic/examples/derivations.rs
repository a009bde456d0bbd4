//! Applies all six operations to one premise and prints both surface forms.
//!
//! `cargo run -p opspace-symbolic --example derivations -- "<functional premise>" [operands...]`

use opspace_symbolic::{enumerate_conclusions, parse_functional, to_functional, to_latex, OperandSet, OperationKind};

const DEFAULT_PREMISE: &str = "Add(Symbol('u'), cos(log(Add(Mul(Integer(-1), Symbol('z')), Symbol('o')))))";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let premise = parse_functional(&args.next().unwrap_or_else(|| DEFAULT_PREMISE.into()))?;
    let mut names: Vec<String> = args.collect();
    if names.is_empty() {
        names = vec!["z".into(), "u".into()];
    }
    let operands = OperandSet::new(names).ok_or("operands must be distinct symbol names")?;
    println!("premise  {}", to_latex(&premise));
    println!("         {}\n", to_functional(&premise));
    for t in OperationKind::ALL {
        match enumerate_conclusions(&premise, t, &operands) {
            Ok(set) => {
                for (v, y) in &set.conclusions {
                    println!("{:<16} {v:>2}  {}", t.name(), to_latex(y));
                }
            }
            Err(e) => println!("{:<16}     {e}", t.name()),
        }
    }
    Ok(())
}
