//! Operation trees: the expression AST as a labelled graph.

use opspace_symbolic::{Expr, Number};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationTree {
    /// Node labels in pre-order; the root is node 0.
    pub labels: Vec<String>,
    /// `(parent, child)` pairs.
    pub edges: Vec<(usize, usize)>,
}

impl OperationTree {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }
}

/// Integers with magnitude up to this keep their own label.
const EXACT_INT_LIMIT: i64 = 12;

/// Node label of a constant: small integers verbatim, everything else by
/// sign and kind.
pub fn constant_label(n: &Number) -> String {
    if n.is_integer() {
        match n.as_i64() {
            Some(v) if v.abs() <= EXACT_INT_LIMIT => v.to_string(),
            _ if n.is_negative() => "int-".into(),
            _ => "int+".into(),
        }
    } else if n.is_negative() {
        "rat-".into()
    } else {
        "rat+".into()
    }
}

fn label(e: &Expr) -> String {
    match e {
        Expr::Number(n) => constant_label(n),
        Expr::Symbol(s) => s.clone(),
        Expr::Function(f, _) => f.name().to_string(),
        Expr::Power(..) => "Pow".into(),
        Expr::Product(_) => "Mul".into(),
        Expr::Sum(_) => "Add".into(),
    }
}

pub fn build_operation_tree(e: &Expr) -> OperationTree {
    let mut tree = OperationTree {
        labels: Vec::new(),
        edges: Vec::new(),
    };
    visit(e, None, &mut tree);
    tree
}

fn visit(e: &Expr, parent: Option<usize>, tree: &mut OperationTree) {
    let id = tree.labels.len();
    tree.labels.push(label(e));
    if let Some(p) = parent {
        tree.edges.push((p, id));
    }
    for c in e.children() {
        visit(c, Some(id), tree);
    }
}
