//! Recursive structural equality with a first-difference report.

use crate::leaves::LeafStats;
use crate::spn::{path_string, Node, NodeKind, Spn};

/// The first point where two trees differ.
#[derive(Debug, Clone, PartialEq)]
pub struct Difference {
    pub path: Vec<u32>,
    pub message: String,
}

impl std::fmt::Display for Difference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", path_string(&self.path), self.message)
    }
}

/// Compares two models node by node: kind, scope, operation tag, row sets,
/// child order and counts (exact), categorical counts (exact) and gaussian
/// parameters within `tol` relative. `tol` = 0 demands exact equality.
pub fn structural_equal(a: &Spn, b: &Spn, tol: f64) -> Result<(), Difference> {
    compare_nodes(&a.root, &b.root, tol, &mut Vec::new())
}

/// Same comparison for bare sub-trees.
pub(crate) fn compare_nodes(
    a: &Node,
    b: &Node,
    tol: f64,
    path: &mut Vec<u32>,
) -> Result<(), Difference> {
    let diff = |message: String, path: &[u32]| Difference { path: path.to_vec(), message };

    if a.kind.name() != b.kind.name() {
        return Err(diff(format!("kind {} vs {}", a.kind.name(), b.kind.name()), path));
    }
    if a.state.op != b.state.op {
        return Err(diff(format!("op {} vs {}", a.state.op, b.state.op), path));
    }
    if a.state.scope != b.state.scope {
        return Err(diff(format!("scope {:?} vs {:?}", a.state.scope, b.state.scope), path));
    }
    if a.state.data != b.state.data {
        return Err(diff("row sets differ".into(), path));
    }
    match (&a.kind, &b.kind) {
        (NodeKind::Sum { child_counts: ca }, NodeKind::Sum { child_counts: cb }) => {
            if ca != cb {
                return Err(diff(format!("child counts {ca:?} vs {cb:?}"), path));
            }
        }
        (NodeKind::Leaf(sa), NodeKind::Leaf(sb)) => {
            compare_leaves(sa, sb, tol).map_err(|m| diff(m, path))?;
        }
        _ => {}
    }
    if a.children.len() != b.children.len() {
        return Err(diff(
            format!("{} children vs {}", a.children.len(), b.children.len()),
            path,
        ));
    }
    for (i, (ca, cb)) in a.children.iter().zip(&b.children).enumerate() {
        path.push(i as u32);
        compare_nodes(ca, cb, tol, path)?;
        path.pop();
    }
    Ok(())
}

fn compare_leaves(a: &LeafStats, b: &LeafStats, tol: f64) -> Result<(), String> {
    match (a, b) {
        (LeafStats::Categorical(ca), LeafStats::Categorical(cb)) => {
            if ca.counts() != cb.counts() {
                return Err(format!("categorical counts {:?} vs {:?}", ca.counts(), cb.counts()));
            }
            Ok(())
        }
        (LeafStats::Gaussian(ga), LeafStats::Gaussian(gb)) => {
            if ga.n() != gb.n() {
                return Err(format!("gaussian n {} vs {}", ga.n(), gb.n()));
            }
            if !close(ga.mean(), gb.mean(), tol) {
                return Err(format!("gaussian mean {} vs {}", ga.mean(), gb.mean()));
            }
            if !close(ga.variance(), gb.variance(), tol) {
                return Err(format!("gaussian variance {} vs {}", ga.variance(), gb.variance()));
            }
            Ok(())
        }
        _ => Err("leaf kinds differ".into()),
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    if tol == 0.0 {
        return a == b;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
