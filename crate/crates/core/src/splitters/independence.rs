//! Pairwise dependence analysis: randomized dependency coefficients with
//! stored projections, thresholded into an adjacency matrix whose connected
//! components form the variable split.
//!
//! A removal never redraws the projections. The coefficients are recomputed
//! on the survivors with the stored weights and phases, which is exactly
//! what a fresh fit with the same node seed would do, so the removal check
//! and the refit agree by construction.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{DataView, RowId, VarIdx};
use crate::seed::{var_stream_rng, STREAM_RDC};
use crate::splitters::components::connected_components;

/// Ridge applied to the feature covariance before whitening, relative to
/// the mean diagonal. Suppresses the spurious canonical correlation that
/// near-collinear sine features would otherwise produce.
const RIDGE_REL: f64 = 1e-3;

/// Dependence-analysis settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdcParams {
    /// Number of random sine features per variable.
    pub feature_count: usize,
    /// Scale of the normal projection weights.
    pub scale: f64,
    /// Dependency threshold: an edge exists where the coefficient reaches it.
    pub tau: f64,
}

/// A fitted, replayable dependence analysis of one node's scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceModel {
    scope: Vec<VarIdx>,
    params: RdcParams,
    /// Projection weights per scope variable, drawn from the node seed.
    weights: Vec<Vec<f64>>,
    /// Phase offsets per scope variable, drawn from the node seed.
    phases: Vec<Vec<f64>>,
    coefficients: Vec<Vec<f64>>,
    adjacency: Vec<Vec<bool>>,
    components: Vec<Vec<VarIdx>>,
}

/// Outcome of removing one row from a dependence analysis.
#[derive(Debug, Clone)]
pub enum IndependenceRemoval {
    /// The component partition is identical (coefficients may drift).
    Unchanged(IndependenceModel),
    /// The component partition differs; the carried model is the refit.
    Changed(IndependenceModel),
}

impl IndependenceRemoval {
    pub fn is_unchanged(&self) -> bool {
        matches!(self, IndependenceRemoval::Unchanged(_))
    }

    pub fn model(&self) -> &IndependenceModel {
        match self {
            IndependenceRemoval::Unchanged(m) | IndependenceRemoval::Changed(m) => m,
        }
    }

    pub fn into_model(self) -> IndependenceModel {
        match self {
            IndependenceRemoval::Unchanged(m) | IndependenceRemoval::Changed(m) => m,
        }
    }
}

/// Fits the pairwise dependence analysis over the view's scope.
/// Deterministic given the view contents, the node seed, and the settings.
pub fn fit_independence(view: &DataView<'_>, node_seed: u64, params: &RdcParams) -> IndependenceModel {
    assert!(view.scope().len() >= 2, "dependence analysis needs at least two variables");
    assert!(params.feature_count >= 1);
    let scope = view.scope().to_vec();
    let mut weights = Vec::with_capacity(scope.len());
    let mut phases = Vec::with_capacity(scope.len());
    for &v in &scope {
        let mut rng = var_stream_rng(node_seed, STREAM_RDC, v);
        let w: Vec<f64> = (0..params.feature_count)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * params.scale
            })
            .collect();
        let b: Vec<f64> =
            (0..params.feature_count).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        weights.push(w);
        phases.push(b);
    }
    fit_with_projections(view, scope, *params, weights, phases)
}

fn fit_with_projections(
    view: &DataView<'_>,
    scope: Vec<VarIdx>,
    params: RdcParams,
    weights: Vec<Vec<f64>>,
    phases: Vec<Vec<f64>>,
) -> IndependenceModel {
    let d = scope.len();
    let n = view.num_rows();
    let mut coefficients = vec![vec![0.0; d]; d];
    for (i, row) in coefficients.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    if n == 1 {
        // one point is degenerate; treat everything as dependent
        for i in 0..d {
            for j in 0..d {
                coefficients[i][j] = 1.0;
            }
        }
    } else {
        let features: Vec<DMatrix<f64>> = (0..d)
            .map(|p| feature_block(view, scope[p], &weights[p], &phases[p]))
            .collect();
        for i in 0..d {
            for j in (i + 1)..d {
                // computed once per unordered pair: symmetric by construction
                let rho = cca_max_correlation(&features[i], &features[j]);
                coefficients[i][j] = rho;
                coefficients[j][i] = rho;
            }
        }
    }
    let adjacency: Vec<Vec<bool>> = coefficients
        .iter()
        .map(|row| row.iter().map(|&c| c >= params.tau).collect())
        .collect();
    let components = connected_components(&adjacency)
        .into_iter()
        .map(|positions| positions.into_iter().map(|p| scope[p]).collect())
        .collect();
    IndependenceModel { scope, params, weights, phases, coefficients, adjacency, components }
}

/// Copula transform: empirical ranks scaled into (0, 1).
fn copula(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .map(|v| {
            let rank = sorted.partition_point(|s| s.total_cmp(v).is_le());
            rank as f64 / (n + 1.0)
        })
        .collect()
}

/// Centered random sine features of one variable's copula column.
fn feature_block(view: &DataView<'_>, var: VarIdx, w: &[f64], b: &[f64]) -> DMatrix<f64> {
    let values: Vec<f64> = view.column(var).map(|v| v.as_num()).collect();
    let u = copula(&values);
    let n = u.len();
    let k = w.len();
    let mut m = DMatrix::from_fn(n, k, |i, j| (w[j] * u[i] + b[j]).sin());
    for j in 0..k {
        let mean = m.column(j).sum() / n as f64;
        for i in 0..n {
            m[(i, j)] -= mean;
        }
    }
    m
}

fn inv_sqrt_sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows();
    let eig = SymmetricEigen::new(m);
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let floor = (max_ev * 1e-12).max(1e-30);
    let mut d = DMatrix::zeros(k, k);
    for i in 0..k {
        d[(i, i)] = 1.0 / eig.eigenvalues[i].max(floor).sqrt();
    }
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Largest canonical correlation between two centered feature blocks,
/// with ridge-regularized whitening, clamped into [0, 1].
fn cca_max_correlation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows() as f64;
    let k = a.ncols();
    let cxx = a.transpose() * a / n;
    let cyy = b.transpose() * b / n;
    let cxy = a.transpose() * b / n;
    let ridge_x = RIDGE_REL * cxx.trace() / k as f64;
    let ridge_y = RIDGE_REL * cyy.trace() / k as f64;
    let cxx = cxx + DMatrix::identity(k, k) * ridge_x;
    let cyy = cyy + DMatrix::identity(k, k) * ridge_y;
    let m = inv_sqrt_sym(cxx) * cxy * inv_sqrt_sym(cyy);
    let sv = m.svd(false, false).singular_values;
    sv.iter().cloned().fold(0.0_f64, f64::max).clamp(0.0, 1.0)
}

impl IndependenceModel {
    pub fn scope(&self) -> &[VarIdx] {
        &self.scope
    }

    pub fn params(&self) -> &RdcParams {
        &self.params
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    /// The variable split: connected components in canonical order
    /// (by smallest member, members ascending).
    pub fn components(&self) -> &[Vec<VarIdx>] {
        &self.components
    }

    /// True iff the scope splits into at least two components.
    pub fn independencies_exist(&self) -> bool {
        self.components.len() >= 2
    }

    /// Removes one row: recomputes the coefficients on the survivors with
    /// the stored projections and reports whether the component partition
    /// is identical. `survivors` must exclude the removed row.
    pub fn remove(&self, survivors: &DataView<'_>, _row: RowId) -> IndependenceRemoval {
        let refit = fit_with_projections(
            survivors,
            self.scope.clone(),
            self.params,
            self.weights.clone(),
            self.phases.clone(),
        );
        if refit.components == self.components {
            IndependenceRemoval::Unchanged(refit)
        } else {
            IndependenceRemoval::Changed(refit)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Schema, Value, VarKind, Variable};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn two_col_dataset(a: &[f64], b: &[f64]) -> Dataset {
        let schema = Schema::new(vec![
            Variable { name: "a".into(), kind: VarKind::Gaussian { lo: -1e3, hi: 1e3 } },
            Variable { name: "b".into(), kind: VarKind::Gaussian { lo: -1e3, hi: 1e3 } },
        ])
        .unwrap();
        let rows = a.iter().zip(b).map(|(&x, &y)| vec![Value::Num(x), Value::Num(y)]).collect();
        Dataset::new(schema, rows).unwrap()
    }

    fn default_params() -> RdcParams {
        RdcParams { feature_count: 20, scale: 1.0 / 6.0, tau: 0.3 }
    }

    #[test]
    fn independent_columns_split_in_most_seeds() {
        let mut splits = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let a: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..1.0)).collect();
            let ds = two_col_dataset(&a, &b);
            let model = fit_independence(&ds.full_view(), seed, &default_params());
            if model.independencies_exist() {
                splits += 1;
            }
        }
        assert!(splits >= 18, "only {splits}/20 seeds split independent columns");
    }

    #[test]
    fn identical_columns_are_one_component() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
            let a: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..1.0)).collect();
            let ds = two_col_dataset(&a, &a);
            let model = fit_independence(&ds.full_view(), seed, &default_params());
            assert!(model.coefficients()[0][1] >= 0.9, "seed {seed}: coeff {}", model.coefficients()[0][1]);
            assert!(!model.independencies_exist());
            assert_eq!(model.components(), &[vec![0, 1]]);
        }
    }

    #[test]
    fn coefficient_matrix_is_symmetric_with_unit_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|x| x * 2.0 + 0.1).collect();
        let ds = two_col_dataset(&a, &b);
        let model = fit_independence(&ds.full_view(), 9, &default_params());
        let c = model.coefficients();
        assert_eq!(c[0][1], c[1][0]);
        assert_eq!(c[0][0], 1.0);
        assert_eq!(c[1][1], 1.0);
    }

    #[test]
    fn fit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
        let ds = two_col_dataset(&a, &b);
        let m1 = fit_independence(&ds.full_view(), 77, &default_params());
        let m2 = fit_independence(&ds.full_view(), 77, &default_params());
        assert_eq!(m1, m2);
    }

    #[test]
    fn removal_verdict_matches_direct_component_comparison() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut changed_seen = false;
        for case in 0..200 {
            let n = rng.gen_range(4..30);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            // half the cases lean dependent, half independent
            let b: Vec<f64> = if case % 2 == 0 {
                (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
            } else {
                a.iter().map(|x| x * 0.9 + 0.05).collect()
            };
            let ds = two_col_dataset(&a, &b);
            let seed = rng.gen();
            let params = RdcParams { feature_count: 5, scale: 1.0 / 6.0, tau: 0.4 };
            let model = fit_independence(&ds.full_view(), seed, &params);
            let row = rng.gen_range(0..n) as RowId;
            let rows: Vec<RowId> = (0..n as RowId).filter(|&r| r != row).collect();
            let survivors = ds.view(rows, ds.full_scope()).unwrap();
            let removal = model.remove(&survivors, row);
            // oracle: fresh fit on survivors with the same node seed
            let fresh = fit_independence(&survivors, seed, &params);
            assert_eq!(removal.is_unchanged(), fresh.components() == model.components());
            assert_eq!(removal.model().components(), fresh.components());
            assert_eq!(removal.model().coefficients(), fresh.coefficients());
            if !removal.is_unchanged() {
                changed_seen = true;
            }
        }
        assert!(changed_seen, "no case exercised the changed path");
    }

    #[test]
    fn pivotal_row_changes_components() {
        // search a small instance where one row alone carries the dependence
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let params = RdcParams { feature_count: 5, scale: 1.0 / 6.0, tau: 0.4 };
        for attempt in 0..400u64 {
            let n = 12;
            let mut a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            a.push(50.0);
            b.push(50.0);
            let ds = two_col_dataset(&a, &b);
            let model = fit_independence(&ds.full_view(), attempt, &params);
            if model.independencies_exist() {
                continue; // need the full data to look dependent
            }
            let pivot = n as RowId;
            let rows: Vec<RowId> = (0..n as RowId).collect();
            let survivors = ds.view(rows, ds.full_scope()).unwrap();
            let removal = model.remove(&survivors, pivot);
            if !removal.is_unchanged() {
                assert!(removal.model().independencies_exist());
                return;
            }
        }
        panic!("no pivotal-row instance found");
    }

    #[test]
    fn three_variable_single_edge_components() {
        // A and B strongly dependent, C independent noise
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|x| 1.0 - x).collect();
        let c: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..1.0)).collect();
        let schema = Schema::new(
            ["a", "b", "c"]
                .iter()
                .map(|n| Variable {
                    name: n.to_string(),
                    kind: VarKind::Gaussian { lo: -1e3, hi: 1e3 },
                })
                .collect(),
        )
        .unwrap();
        let rows = (0..200)
            .map(|i| vec![Value::Num(a[i]), Value::Num(b[i]), Value::Num(c[i])])
            .collect();
        let ds = Dataset::new(schema, rows).unwrap();
        let mut ok = 0;
        for seed in 0..20u64 {
            let model = fit_independence(&ds.full_view(), seed, &default_params());
            if model.components() == [vec![0, 1], vec![2]] {
                ok += 1;
            }
        }
        assert!(ok >= 18, "only {ok}/20 seeds found the single-edge split");
    }
}
