//! The removal-enabled structure learner: seeded, state-recording, and
//! pruning-free.
//!
//! Every recursion step decides one of five operations from the data
//! (Fig-style decision chain: leaf, uninformative handling, row threshold,
//! then the two analyzers), records the full node state, and derives child
//! seeds from the node seed and the child position so the whole tree is a
//! pure function of (data, config, master seed).

use crate::config::LearnConfig;
use crate::dataset::{DataError, DataView, Dataset, VarIdx, VarKind};
use crate::leaves::LeafStats;
use crate::seed::derive_child_seed;
use crate::splitters::{fit_clusters, fit_independence, ClusteringModel, IndependenceModel};
use crate::spn::{Node, NodeKind, NodeState, Op, Spn};

/// Everything one decision step produced: the chosen operation, the
/// uninformativeness flags, and any analyzers that were consulted.
#[derive(Debug)]
pub struct Decision {
    pub op: Op,
    pub uninformative_vars: Vec<VarIdx>,
    pub exist_uninformative: bool,
    pub all_uninformative: bool,
    pub clusters: Option<bool>,
    pub independencies: Option<bool>,
    pub clustering: Option<ClusteringModel>,
    pub independence: Option<IndependenceModel>,
}

/// Implements the operation decision chain exactly:
/// a single variable becomes a leaf; any uninformative variable routes to
/// naive factorization (all uninformative) or the uninformative split;
/// at or below the row threshold the analyzers are *not* consulted and the
/// node is naively factorized; otherwise both analyzers run and pick
/// between naive factorization, the data split and the variable split.
pub fn decide_operation(view: &DataView<'_>, config: &LearnConfig, node_seed: u64) -> Decision {
    let scope = view.scope();
    let uninformative_vars: Vec<VarIdx> = scope
        .iter()
        .copied()
        .filter(|&v| view.is_uninformative(v).expect("nonempty view"))
        .collect();
    let exist = !uninformative_vars.is_empty();
    let all = uninformative_vars.len() == scope.len();

    if scope.len() == 1 {
        return Decision {
            op: Op::CreateLeaf,
            uninformative_vars,
            exist_uninformative: exist,
            all_uninformative: all,
            clusters: None,
            independencies: None,
            clustering: None,
            independence: None,
        };
    }
    if exist {
        let op = if all { Op::NaiveFactorization } else { Op::SplitUninformative };
        return Decision {
            op,
            uninformative_vars,
            exist_uninformative: true,
            all_uninformative: all,
            clusters: None,
            independencies: None,
            clustering: None,
            independence: None,
        };
    }
    if view.num_rows() as u64 <= config.threshold {
        // short-circuit: the analyzers are not consulted
        return Decision {
            op: Op::NaiveFactorization,
            uninformative_vars,
            exist_uninformative: false,
            all_uninformative: false,
            clusters: None,
            independencies: None,
            clustering: None,
            independence: None,
        };
    }
    let clustering = fit_clusters(view, node_seed, &config.cluster_params());
    let independence = fit_independence(view, node_seed, &config.rdc_params());
    let clusters = clustering.clusters_exist();
    let independencies = independence.independencies_exist();
    let op = if !clusters && !independencies {
        Op::NaiveFactorization
    } else if !independencies {
        Op::SplitData
    } else {
        Op::SplitVariables
    };
    Decision {
        op,
        uninformative_vars,
        exist_uninformative: false,
        all_uninformative: false,
        clusters: Some(clusters),
        independencies: Some(independencies),
        clustering: Some(clustering),
        independence: Some(independence),
    }
}

fn base_state(view: &DataView<'_>, op: Op, decision: &Decision, node_seed: u64, path: Vec<u32>) -> NodeState {
    NodeState {
        scope: view.scope().to_vec(),
        op,
        data: view.rows().to_vec(),
        num_data: view.num_rows() as u64,
        independencies: decision.independencies,
        clusters: decision.clusters,
        exist_uninformative: decision.exist_uninformative,
        all_uninformative: decision.all_uninformative,
        node_seed,
        path,
        clustering: None,
        variable_split: None,
        decision_analyses: None,
    }
}

fn num_categories(dataset: &Dataset, var: VarIdx) -> Option<usize> {
    match &dataset.schema().var(var).kind {
        VarKind::Categorical { categories } => Some(categories.len()),
        VarKind::Gaussian { .. } => None,
    }
}

/// Estimates a univariate leaf over one variable of the view, in ascending
/// row order.
pub fn create_leaf(view: &DataView<'_>, var: VarIdx, node_seed: u64, path: Vec<u32>) -> Node {
    let stats = LeafStats::from_column(num_categories(view.dataset(), var), view.column(var));
    let uninformative = view.is_uninformative(var).expect("nonempty view");
    let state = NodeState {
        scope: vec![var],
        op: Op::CreateLeaf,
        data: view.rows().to_vec(),
        num_data: view.num_rows() as u64,
        independencies: None,
        clusters: None,
        exist_uninformative: uninformative,
        all_uninformative: uninformative,
        node_seed,
        path,
        clustering: None,
        variable_split: None,
        decision_analyses: None,
    };
    Node { kind: NodeKind::Leaf(stats), state, children: vec![] }
}

/// Product node with one leaf per scope variable, in variable order.
pub fn naive_factorization(
    view: &DataView<'_>,
    decision: &Decision,
    node_seed: u64,
    path: Vec<u32>,
) -> Node {
    assert!(view.scope().len() >= 2, "naive factorization needs at least two variables");
    let children: Vec<Node> = view
        .scope()
        .iter()
        .enumerate()
        .map(|(i, &var)| {
            let mut child_path = path.clone();
            child_path.push(i as u32);
            create_leaf(view, var, derive_child_seed(node_seed, i as u64), child_path)
        })
        .collect();
    let mut state = base_state(view, Op::NaiveFactorization, decision, node_seed, path);
    state.decision_analyses = match (&decision.clustering, &decision.independence) {
        (Some(c), Some(i)) => Some((c.clone(), i.clone())),
        _ => None,
    };
    Node { kind: NodeKind::Product, state, children }
}

/// Product node with a leaf per uninformative variable (in variable order)
/// and one recursive child over the informative scope, last.
fn split_uninformative(
    view: &DataView<'_>,
    decision: &Decision,
    config: &LearnConfig,
    node_seed: u64,
    path: Vec<u32>,
) -> Result<Node, DataError> {
    let informative: Vec<VarIdx> = view
        .scope()
        .iter()
        .copied()
        .filter(|v| !decision.uninformative_vars.contains(v))
        .collect();
    assert!(!informative.is_empty() && !decision.uninformative_vars.is_empty());
    let mut children: Vec<Node> = Vec::with_capacity(decision.uninformative_vars.len() + 1);
    for (i, &var) in decision.uninformative_vars.iter().enumerate() {
        let mut child_path = path.clone();
        child_path.push(i as u32);
        children.push(create_leaf(view, var, derive_child_seed(node_seed, i as u64), child_path));
    }
    let rec_pos = decision.uninformative_vars.len();
    let mut rec_path = path.clone();
    rec_path.push(rec_pos as u32);
    let rec_view = view.with_scope(informative)?;
    children.push(learn_node(
        &rec_view,
        config,
        derive_child_seed(node_seed, rec_pos as u64),
        rec_path,
    )?);
    let state = base_state(view, Op::SplitUninformative, decision, node_seed, path);
    Ok(Node { kind: NodeKind::Product, state, children })
}

/// Sum node with one recursive child per non-empty cluster, in cluster
/// index order; edge weights are the integer cluster sizes.
pub fn split_data(
    view: &DataView<'_>,
    decision: &Decision,
    clustering: ClusteringModel,
    config: &LearnConfig,
    node_seed: u64,
    path: Vec<u32>,
) -> Result<Node, DataError> {
    let cells = clustering.partition();
    assert!(cells.len() >= 2, "data split needs at least two non-empty clusters");
    let mut children = Vec::with_capacity(cells.len());
    let mut child_counts = Vec::with_capacity(cells.len());
    for (i, (_, rows)) in cells.into_iter().enumerate() {
        child_counts.push(rows.len() as u64);
        let mut child_path = path.clone();
        child_path.push(i as u32);
        let child_view = view.with_rows(rows)?;
        children.push(learn_node(&child_view, config, derive_child_seed(node_seed, i as u64), child_path)?);
    }
    let mut state = base_state(view, Op::SplitData, decision, node_seed, path);
    state.clustering = Some(clustering);
    Ok(Node { kind: NodeKind::Sum { child_counts }, state, children })
}

/// Product node with one recursive child per connected component, in
/// canonical order, each over the full row set.
pub fn split_variables(
    view: &DataView<'_>,
    decision: &Decision,
    independence: IndependenceModel,
    config: &LearnConfig,
    node_seed: u64,
    path: Vec<u32>,
) -> Result<Node, DataError> {
    let components = independence.components().to_vec();
    assert!(components.len() >= 2, "variable split needs at least two components");
    let mut children = Vec::with_capacity(components.len());
    for (i, component) in components.into_iter().enumerate() {
        let mut child_path = path.clone();
        child_path.push(i as u32);
        let child_view = view.with_scope(component)?;
        children.push(learn_node(&child_view, config, derive_child_seed(node_seed, i as u64), child_path)?);
    }
    let mut state = base_state(view, Op::SplitVariables, decision, node_seed, path);
    state.variable_split = Some(independence);
    Ok(Node { kind: NodeKind::Product, state, children })
}

/// Learns one sub-tree. Pure in (view contents, config, seed, path).
pub fn learn_node(
    view: &DataView<'_>,
    config: &LearnConfig,
    node_seed: u64,
    path: Vec<u32>,
) -> Result<Node, DataError> {
    let decision = decide_operation(view, config, node_seed);
    match decision.op {
        Op::CreateLeaf => Ok(create_leaf(view, view.scope()[0], node_seed, path)),
        Op::NaiveFactorization => Ok(naive_factorization(view, &decision, node_seed, path)),
        Op::SplitUninformative => split_uninformative(view, &decision, config, node_seed, path),
        Op::SplitData => {
            let clustering = decision.clustering.clone().expect("SD decision carries clustering");
            split_data(view, &decision, clustering, config, node_seed, path)
        }
        Op::SplitVariables => {
            let independence =
                decision.independence.clone().expect("SV decision carries independence");
            split_variables(view, &decision, independence, config, node_seed, path)
        }
    }
}

/// Trains a model on the whole dataset.
pub fn train(dataset: Dataset, config: LearnConfig) -> Result<Spn, DataError> {
    config.validate().map_err(DataError::Schema)?;
    let root_seed = derive_child_seed(config.master_seed, 0);
    let root = learn_node(&dataset.full_view(), &config, root_seed, vec![])?;
    Ok(Spn { root, dataset, removed: Default::default(), config })
}

/// A tree without any recorded state, produced by the stripped learner.
#[derive(Debug, Clone, PartialEq)]
pub struct BareNode {
    pub kind: BareKind,
    pub scope: Vec<VarIdx>,
    pub children: Vec<BareNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BareKind {
    Sum { child_counts: Vec<u64> },
    Product,
    Leaf(LeafStats),
}

/// The stripped learner used for training-duration comparison: identical
/// decisions and seeds, no state recording, no pruning. Its tree always
/// matches the state-recording learner's tree modulo the absent states.
pub fn learn_bare(view: &DataView<'_>, config: &LearnConfig, node_seed: u64) -> Result<BareNode, DataError> {
    let decision = decide_operation(view, config, node_seed);
    let scope = view.scope().to_vec();
    match decision.op {
        Op::CreateLeaf => {
            let var = scope[0];
            let stats = LeafStats::from_column(num_categories(view.dataset(), var), view.column(var));
            Ok(BareNode { kind: BareKind::Leaf(stats), scope, children: vec![] })
        }
        Op::NaiveFactorization => {
            let children = scope
                .iter()
                .map(|&var| {
                    let stats =
                        LeafStats::from_column(num_categories(view.dataset(), var), view.column(var));
                    BareNode { kind: BareKind::Leaf(stats), scope: vec![var], children: vec![] }
                })
                .collect();
            Ok(BareNode { kind: BareKind::Product, scope, children })
        }
        Op::SplitUninformative => {
            let informative: Vec<VarIdx> = scope
                .iter()
                .copied()
                .filter(|v| !decision.uninformative_vars.contains(v))
                .collect();
            let mut children: Vec<BareNode> = decision
                .uninformative_vars
                .iter()
                .map(|&var| {
                    let stats =
                        LeafStats::from_column(num_categories(view.dataset(), var), view.column(var));
                    BareNode { kind: BareKind::Leaf(stats), scope: vec![var], children: vec![] }
                })
                .collect();
            let rec_pos = decision.uninformative_vars.len() as u64;
            let rec_view = view.with_scope(informative)?;
            children.push(learn_bare(&rec_view, config, derive_child_seed(node_seed, rec_pos))?);
            Ok(BareNode { kind: BareKind::Product, scope, children })
        }
        Op::SplitData => {
            let clustering = decision.clustering.expect("SD decision carries clustering");
            let mut children = Vec::new();
            let mut child_counts = Vec::new();
            for (i, (_, rows)) in clustering.partition().into_iter().enumerate() {
                child_counts.push(rows.len() as u64);
                let child_view = view.with_rows(rows)?;
                children.push(learn_bare(&child_view, config, derive_child_seed(node_seed, i as u64))?);
            }
            Ok(BareNode { kind: BareKind::Sum { child_counts }, scope, children })
        }
        Op::SplitVariables => {
            let independence = decision.independence.expect("SV decision carries independence");
            let mut children = Vec::new();
            for (i, component) in independence.components().iter().enumerate() {
                let child_view = view.with_scope(component.clone())?;
                children.push(learn_bare(&child_view, config, derive_child_seed(node_seed, i as u64))?);
            }
            Ok(BareNode { kind: BareKind::Product, scope, children })
        }
    }
}

/// Compares a state-recording tree with a bare tree: kind, scope, child
/// order and counts, and leaf statistics must match exactly.
pub fn same_structure_modulo_state(node: &Node, bare: &BareNode) -> bool {
    let kind_match = match (&node.kind, &bare.kind) {
        (NodeKind::Sum { child_counts: a }, BareKind::Sum { child_counts: b }) => a == b,
        (NodeKind::Product, BareKind::Product) => true,
        (NodeKind::Leaf(a), BareKind::Leaf(b)) => a == b,
        _ => false,
    };
    kind_match
        && node.state.scope == bare.scope
        && node.children.len() == bare.children.len()
        && node.children.iter().zip(&bare.children).all(|(n, b)| same_structure_modulo_state(n, b))
}
