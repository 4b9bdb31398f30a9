//! Structural validity checks: completeness, decomposability, count-exact
//! weights and state coherence. Violations are report entries, not errors.

use std::collections::BTreeSet;

use crate::dataset::RowId;
use crate::spn::{path_string, Node, NodeKind, Op, Spn};

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: Vec<u32>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", path_string(&self.path), self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every node of the tree. An empty report means the model is a
/// structurally valid SPN with coherent states.
pub fn validate(spn: &Spn) -> ValidationReport {
    let mut report = ValidationReport::default();
    let full_scope: Vec<usize> = spn.dataset.full_scope();
    if spn.root.state.scope != full_scope {
        report.violations.push(Violation {
            path: vec![],
            message: "root scope does not cover the full schema".into(),
        });
    }
    let survivors: Vec<RowId> = spn.surviving_rows();
    if spn.root.state.data != survivors {
        report.violations.push(Violation {
            path: vec![],
            message: "root data does not equal the surviving rows".into(),
        });
    }
    let num_rows = spn.dataset.num_rows() as RowId;
    check_node(&spn.root, num_rows, &mut report);
    report
}

fn check_node(node: &Node, num_rows: RowId, report: &mut ValidationReport) {
    let st = &node.state;
    let path = &st.path;
    let mut push = |message: String| {
        report.violations.push(Violation { path: path.clone(), message });
    };

    if st.num_data != st.data.len() as u64 {
        push(format!("num_data {} but data holds {} rows", st.num_data, st.data.len()));
    }
    if st.data.windows(2).any(|w| w[0] >= w[1]) {
        push("data row ids are not strictly ascending".into());
    }
    if st.data.last().is_some_and(|&r| r >= num_rows) {
        push("data references a row id outside the dataset".into());
    }
    if st.scope.is_empty() {
        push("empty scope".into());
    }
    if st.all_uninformative && !st.exist_uninformative {
        push("all_uninformative set without exist_uninformative".into());
    }

    // operation/kind/analyzer coherence
    match st.op {
        Op::CreateLeaf => {
            if !node.is_leaf() {
                push("CL node is not a leaf".into());
            }
        }
        Op::NaiveFactorization | Op::SplitUninformative => {
            if !matches!(node.kind, NodeKind::Product) {
                push(format!("{} node is not a product", st.op));
            }
        }
        Op::SplitData => {
            if !matches!(node.kind, NodeKind::Sum { .. }) {
                push("SD node is not a sum".into());
            }
            if st.clustering.is_none() {
                push("SD node has no stored clustering".into());
            }
        }
        Op::SplitVariables => {
            if !matches!(node.kind, NodeKind::Product) {
                push("SV node is not a product".into());
            }
            if st.variable_split.is_none() {
                push("SV node has no stored variable split".into());
            }
        }
    }

    match &node.kind {
        NodeKind::Leaf(stats) => {
            if st.scope.len() != 1 {
                push("leaf scope is not a single variable".into());
            }
            if !node.children.is_empty() {
                push("leaf has children".into());
            }
            if stats.n() != st.num_data {
                push(format!("leaf stats n {} != num_data {}", stats.n(), st.num_data));
            }
        }
        NodeKind::Sum { child_counts } => {
            if node.children.is_empty() {
                push("sum node has no children".into());
            }
            if child_counts.len() != node.children.len() {
                push("child_counts length does not match children".into());
            }
            // completeness: every child covers the node's scope
            for (i, c) in node.children.iter().enumerate() {
                if c.state.scope != st.scope {
                    push(format!("sum child {i} scope differs from node scope"));
                }
            }
            // weights reconstruct exactly from integer counts
            let total: u64 = child_counts.iter().sum();
            if total != st.num_data {
                push(format!("child_counts sum {} != num_data {}", total, st.num_data));
            }
            for (i, (cnt, c)) in child_counts.iter().zip(&node.children).enumerate() {
                if *cnt != c.state.num_data {
                    push(format!("child {i} count {} != its num_data {}", cnt, c.state.num_data));
                }
            }
            // children partition the node's rows
            let mut union: Vec<RowId> = Vec::new();
            for c in &node.children {
                union.extend(&c.state.data);
            }
            union.sort_unstable();
            let distinct: BTreeSet<RowId> = union.iter().copied().collect();
            if distinct.len() != union.len() {
                push("sum children share rows".into());
            }
            if union != st.data {
                push("sum children rows do not union to the node rows".into());
            }
        }
        NodeKind::Product => {
            if node.children.is_empty() {
                push("product node has no children".into());
            }
            // decomposability: pairwise disjoint scopes, union equals scope
            let mut union: Vec<usize> = Vec::new();
            for c in &node.children {
                union.extend(&c.state.scope);
            }
            union.sort_unstable();
            let distinct: BTreeSet<usize> = union.iter().copied().collect();
            if distinct.len() != union.len() {
                push("product children scopes overlap".into());
            }
            if union != st.scope {
                push("product children scopes do not union to the node scope".into());
            }
            // rows are not split by products
            for (i, c) in node.children.iter().enumerate() {
                if c.state.data != st.data {
                    push(format!("product child {i} rows differ from node rows"));
                }
            }
        }
    }

    // scope algebra: leaf scopes below must union to this node's scope
    let mut leaf_scope: Vec<usize> = Vec::new();
    collect_leaf_scope(node, &mut leaf_scope);
    leaf_scope.sort_unstable();
    leaf_scope.dedup();
    if leaf_scope != st.scope {
        push("leaf scopes below do not union to the node scope".into());
    }

    for c in &node.children {
        check_node(c, num_rows, report);
    }
}

fn collect_leaf_scope(node: &Node, out: &mut Vec<usize>) {
    if node.is_leaf() {
        out.extend(&node.state.scope);
    }
    for c in &node.children {
        collect_leaf_scope(c, out);
    }
}
