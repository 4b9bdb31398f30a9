//! Bottom-up log-likelihood evaluation.

use crate::dataset::{DataError, Value, VarKind};
use crate::spn::{Node, NodeKind, Spn};

/// Natural-log density/mass of a full assignment under the model.
///
/// Sum nodes mix their children with count-ratio weights; product nodes add
/// their children's results. A categorical value with zero count yields
/// `-inf`, which is a value, not an error.
pub fn log_likelihood(spn: &Spn, assignment: &[Value]) -> Result<f64, DataError> {
    let schema = spn.dataset.schema();
    if assignment.len() != schema.len() {
        return Err(DataError::Arity { row: 0, got: assignment.len(), want: schema.len() });
    }
    for (j, v) in assignment.iter().enumerate() {
        match (&schema.var(j).kind, v) {
            (VarKind::Categorical { categories }, Value::Cat(c)) => {
                if (*c as usize) >= categories.len() {
                    return Err(DataError::Domain {
                        row: 0,
                        var: schema.var(j).name.clone(),
                        msg: format!("category code {c} out of range"),
                    });
                }
            }
            (VarKind::Gaussian { .. }, Value::Num(x)) => {
                if !x.is_finite() {
                    return Err(DataError::Domain {
                        row: 0,
                        var: schema.var(j).name.clone(),
                        msg: "non-finite value".into(),
                    });
                }
            }
            _ => {
                return Err(DataError::Domain {
                    row: 0,
                    var: schema.var(j).name.clone(),
                    msg: "value kind does not match variable kind".into(),
                })
            }
        }
    }
    Ok(eval(&spn.root, assignment, spn.config.alpha))
}

fn eval(node: &Node, assignment: &[Value], alpha: f64) -> f64 {
    match &node.kind {
        NodeKind::Leaf(stats) => stats.log_density(assignment[node.state.scope[0]], alpha),
        NodeKind::Product => node.children.iter().map(|c| eval(c, assignment, alpha)).sum(),
        NodeKind::Sum { child_counts } => {
            let ln_total = (node.state.num_data as f64).ln();
            let terms: Vec<f64> = node
                .children
                .iter()
                .zip(child_counts)
                .map(|(c, &cnt)| {
                    if cnt == 0 {
                        f64::NEG_INFINITY
                    } else {
                        (cnt as f64).ln() - ln_total + eval(c, assignment, alpha)
                    }
                })
                .collect();
            log_sum_exp(&terms)
        }
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}
