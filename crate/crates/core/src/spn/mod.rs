//! The SPN tree model: sum/product/leaf nodes, the per-node training state
//! that makes removal possible, validity checking, inference, structural
//! equality and persistence.
//!
//! Every node keeps the operation that created it, the row ids it was
//! trained on, its seed and path, and (for split nodes) the fitted analyzer
//! instance. The tree is never pruned: pruning would make the creating
//! operation of a sub-tree ambiguous and removal undecidable.

mod equal;
mod inference;
mod io;
mod validate;

pub use equal::{structural_equal, Difference};
pub use inference::log_likelihood;
pub use io::{load, load_bytes, save, save_bytes, ModelIoError, MODEL_FILE_VERSION};
pub use validate::{validate, ValidationReport, Violation};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::LearnConfig;
use crate::dataset::{Dataset, RowId, VarIdx};
use crate::leaves::LeafStats;
use crate::splitters::{ClusteringModel, IndependenceModel};

/// The five operations the learner chooses between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    CreateLeaf,
    NaiveFactorization,
    SplitUninformative,
    SplitData,
    SplitVariables,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Op::CreateLeaf => "CL",
            Op::NaiveFactorization => "NF",
            Op::SplitUninformative => "SU",
            Op::SplitData => "SD",
            Op::SplitVariables => "SV",
        };
        f.write_str(s)
    }
}

/// Per-node training state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    /// Variables this node's distribution covers, ascending.
    pub scope: Vec<VarIdx>,
    /// Operation that created the sub-tree rooted here.
    pub op: Op,
    /// Row ids the sub-tree was trained on, ascending.
    pub data: Vec<RowId>,
    pub num_data: u64,
    /// Whether independent variables existed, when it was evaluated.
    pub independencies: Option<bool>,
    /// Whether data clusters existed, when it was evaluated.
    pub clusters: Option<bool>,
    pub exist_uninformative: bool,
    pub all_uninformative: bool,
    /// Derived from the master seed and `path` only, never from data.
    pub node_seed: u64,
    /// Child indices from the root down to this node.
    pub path: Vec<u32>,
    /// Fitted clustering, present iff `op` is `SplitData`.
    pub clustering: Option<ClusteringModel>,
    /// Fitted dependence analysis, present iff `op` is `SplitVariables`.
    pub variable_split: Option<IndependenceModel>,
    /// Both analyzers, stored when a naive factorization was decided by
    /// consulting them (not by the row threshold).
    pub decision_analyses: Option<(ClusteringModel, IndependenceModel)>,
}

impl NodeState {
    pub fn contains_row(&self, row: RowId) -> bool {
        self.data.binary_search(&row).is_ok()
    }

    /// Removes one row id from the state bookkeeping.
    pub fn remove_row(&mut self, row: RowId) {
        if let Ok(pos) = self.data.binary_search(&row) {
            self.data.remove(pos);
            self.num_data -= 1;
        }
    }
}

/// Node payload by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    /// Mixture over same-scope children, weighted by data counts.
    Sum { child_counts: Vec<u64> },
    /// Factorization over disjoint-scope children.
    Product,
    /// Univariate distribution.
    Leaf(LeafStats),
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Sum { .. } => "sum",
            NodeKind::Product => "product",
            NodeKind::Leaf(_) => "leaf",
        }
    }
}

/// One tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub state: NodeState,
    pub children: Vec<Node>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf(_))
    }

    pub fn leaf_stats(&self) -> Option<&LeafStats> {
        match &self.kind {
            NodeKind::Leaf(stats) => Some(stats),
            _ => None,
        }
    }

    /// Total node count of the sub-tree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Node::size).sum::<usize>()
    }

    /// Counts nodes per creating operation.
    pub fn op_counts(&self) -> std::collections::BTreeMap<Op, usize> {
        let mut counts = std::collections::BTreeMap::new();
        fn walk(node: &Node, counts: &mut std::collections::BTreeMap<Op, usize>) {
            *counts.entry(node.state.op).or_insert(0) += 1;
            for c in &node.children {
                walk(c, counts);
            }
        }
        walk(self, &mut counts);
        counts
    }
}

impl Ord for Op {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (*self as u8).cmp(&(*other as u8))
    }
}

impl PartialOrd for Op {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Renders a tree path as `root` or `root.0.2`.
pub fn path_string(path: &[u32]) -> String {
    if path.is_empty() {
        "root".to_string()
    } else {
        let mut s = "root".to_string();
        for p in path {
            s.push('.');
            s.push_str(&p.to_string());
        }
        s
    }
}

/// A self-contained, unlearnable model: the tree, the embedded dataset it
/// was trained on, the tombstoned row ids, and the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spn {
    pub root: Node,
    pub dataset: Dataset,
    /// Row ids whose influence has been removed. The dataset itself is
    /// never compacted, so surviving ids stay stable.
    pub removed: BTreeSet<RowId>,
    pub config: LearnConfig,
}

impl Spn {
    pub fn master_seed(&self) -> u64 {
        self.config.master_seed
    }

    /// Row ids still contributing to the model, ascending.
    pub fn surviving_rows(&self) -> Vec<RowId> {
        self.dataset
            .all_row_ids()
            .into_iter()
            .filter(|r| !self.removed.contains(r))
            .collect()
    }

    /// Renders the tree structure for inspection.
    pub fn render(&self) -> String {
        let mut out = String::new();
        fn walk(node: &Node, depth: usize, out: &mut String) {
            let indent = "  ".repeat(depth);
            let extra = match &node.kind {
                NodeKind::Sum { child_counts } => format!(" counts={child_counts:?}"),
                NodeKind::Product => String::new(),
                NodeKind::Leaf(stats) => format!(" n={}", stats.n()),
            };
            out.push_str(&format!(
                "{indent}{} op={} scope={:?} rows={}{}\n",
                node.kind.name(),
                node.state.op,
                node.state.scope,
                node.state.num_data,
                extra
            ));
            for c in &node.children {
                walk(c, depth + 1, out);
            }
        }
        walk(&self.root, 0, &mut out);
        out
    }
}
