//! Seeded Lloyd clustering with a removal check.
//!
//! Initial centroids are drawn from the schema-declared bounds, never from
//! data rows, so the initialization survives any deletion. The quantized
//! strategy snaps every centroid update to a seeded lattice and keeps the
//! per-iteration cluster sums as exact grid integers: removing one point is
//! then an exact integer subtraction, and if every re-quantized centroid
//! along the stored iteration trajectory is unchanged, a fresh run on the
//! survivors provably follows the same trajectory and ends in the same
//! partition. When that cheap check fails, the model falls back to
//! replaying Lloyd from the stored initialization and comparing partitions.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataView, RowId};
use crate::seed::{stream_rng, STREAM_CLUSTER};
use crate::splitters::{encode_row, encode_view, CoordSpec, EncodedData, EncodedRow, GRID};

/// How centroid updates are computed and how removal is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterStrategy {
    /// Plain Lloyd; removal always replays from the stored initialization.
    Replay,
    /// Lattice-quantized centroid updates with the exact-subtraction check.
    Quantized,
}

/// Clustering settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub k: usize,
    pub strategy: ClusterStrategy,
    /// Lattice step as a fraction of each coordinate's declared range.
    pub eps_frac: f64,
    pub max_iters: u32,
}

impl ClusterParams {
    fn validate(&self) {
        assert!(self.k >= 2, "cluster count must be at least 2");
        assert!(self.eps_frac > 0.0 && self.eps_frac < 1.0, "eps_frac must be in (0,1)");
        assert!(self.max_iters >= 1, "iteration cap must be positive");
    }
}

/// Statistics of one Lloyd update step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IterStats {
    counts: Vec<u64>,
    /// Exact grid-integer coordinate sums per cluster.
    sums: Vec<Vec<i64>>,
    /// Lattice indices of the quantized centroids; `None` for a cluster
    /// that was empty at this step (its centroid is carried over).
    lattice: Vec<Option<Vec<i64>>>,
    /// The centroids used for the following assignment step.
    centroids: Vec<Vec<f64>>,
}

/// A fitted, replayable clustering of one node's rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringModel {
    params: ClusterParams,
    init_centroids: Vec<Vec<f64>>,
    final_centroids: Vec<Vec<f64>>,
    assignment: BTreeMap<RowId, u32>,
    cluster_counts: Vec<u64>,
    /// Seeded lattice offset per coordinate, in grid units.
    phases: Vec<i64>,
    /// Lattice step in grid units.
    eps_int: i64,
    converged: bool,
    trajectory: Vec<IterStats>,
}

/// Outcome of removing one row from a clustering.
#[derive(Debug, Clone)]
pub enum ClusterRemoval {
    /// The survivor partition is identical; the carried model reflects the
    /// survivors exactly as a fresh fit would.
    Unchanged(ClusteringModel),
    /// The partition differs; the carried model is the fresh survivor fit.
    Changed(ClusteringModel),
}

impl ClusterRemoval {
    pub fn is_unchanged(&self) -> bool {
        matches!(self, ClusterRemoval::Unchanged(_))
    }

    pub fn model(&self) -> &ClusteringModel {
        match self {
            ClusterRemoval::Unchanged(m) | ClusterRemoval::Changed(m) => m,
        }
    }

    pub fn into_model(self) -> ClusteringModel {
        match self {
            ClusterRemoval::Unchanged(m) | ClusterRemoval::Changed(m) => m,
        }
    }
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> u32 {
    let mut best = 0u32;
    let mut best_d = f64::INFINITY;
    for (c, cent) in centroids.iter().enumerate() {
        let d: f64 = row.iter().zip(cent).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best_d = d;
            best = c as u32;
        }
    }
    best
}

/// Nearest-lattice index of `sum/count` relative to `phase`, computed in
/// exact integer arithmetic (round half up).
fn lattice_index(sum: i64, count: u64, phase: i64, eps: i64) -> i64 {
    let num = 2 * (sum as i128 - phase as i128 * count as i128);
    let den = 2 * eps as i128 * count as i128;
    ((num + den / 2).div_euclid(den)) as i64
}

fn lattice_point(spec: &CoordSpec, idx: i64, phase: i64, eps: i64) -> f64 {
    spec.decode(idx * eps + phase)
}

/// Fits a clustering of the view's rows. Deterministic given the view
/// contents, the node seed, and the parameters.
pub fn fit_clusters(view: &DataView<'_>, node_seed: u64, params: &ClusterParams) -> ClusteringModel {
    params.validate();
    let enc = encode_view(view);
    let (init, phases, eps_int) = draw_init(&enc.specs, node_seed, params);
    run_lloyd(&enc, init, phases, eps_int, params)
}

fn draw_init(
    specs: &[CoordSpec],
    node_seed: u64,
    params: &ClusterParams,
) -> (Vec<Vec<f64>>, Vec<i64>, i64) {
    let mut rng = stream_rng(node_seed, STREAM_CLUSTER);
    let init: Vec<Vec<f64>> = (0..params.k)
        .map(|_| specs.iter().map(|s| rng.gen_range(s.lo..s.hi)).collect())
        .collect();
    let eps_int = ((params.eps_frac * GRID).round() as i64).max(1);
    let phases: Vec<i64> = specs.iter().map(|_| rng.gen_range(0..eps_int)).collect();
    (init, phases, eps_int)
}

fn run_lloyd(
    enc: &EncodedData,
    init: Vec<Vec<f64>>,
    phases: Vec<i64>,
    eps_int: i64,
    params: &ClusterParams,
) -> ClusteringModel {
    let k = params.k;
    let d = enc.specs.len();
    let mut assign: Vec<u32> = enc.rows.iter().map(|r| nearest(&r.floats, &init)).collect();
    let mut centroids = init.clone();
    let mut trajectory = Vec::new();
    let mut converged = false;

    for _ in 0..params.max_iters {
        let mut counts = vec![0u64; k];
        let mut sums = vec![vec![0i64; d]; k];
        for (ri, row) in enc.rows.iter().enumerate() {
            let c = assign[ri] as usize;
            counts[c] += 1;
            for j in 0..d {
                sums[c][j] += row.ints[j];
            }
        }
        let mut lattice: Vec<Option<Vec<i64>>> = vec![None; k];
        let mut next = centroids.clone();
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its previous centroid
            }
            match params.strategy {
                ClusterStrategy::Quantized => {
                    let idx: Vec<i64> = (0..d)
                        .map(|j| lattice_index(sums[c][j], counts[c], phases[j], eps_int))
                        .collect();
                    for j in 0..d {
                        next[c][j] = lattice_point(&enc.specs[j], idx[j], phases[j], eps_int);
                    }
                    lattice[c] = Some(idx);
                }
                ClusterStrategy::Replay => {
                    for j in 0..d {
                        let mean_units = sums[c][j] as f64 / counts[c] as f64;
                        next[c][j] = enc.specs[j].decode_f(mean_units);
                    }
                }
            }
        }
        trajectory.push(IterStats { counts, sums, lattice, centroids: next.clone() });
        centroids = next;
        let new_assign: Vec<u32> = enc.rows.iter().map(|r| nearest(&r.floats, &centroids)).collect();
        if new_assign == assign {
            converged = true;
            break;
        }
        assign = new_assign;
    }

    let mut cluster_counts = vec![0u64; k];
    let mut assignment = BTreeMap::new();
    for (ri, &c) in assign.iter().enumerate() {
        cluster_counts[c as usize] += 1;
        assignment.insert(enc.row_ids[ri], c);
    }
    if params.strategy == ClusterStrategy::Replay {
        // the exact-subtraction check never runs for replay models
        trajectory.clear();
    }
    ClusteringModel {
        params: *params,
        init_centroids: init,
        final_centroids: centroids,
        assignment,
        cluster_counts,
        phases,
        eps_int,
        converged,
        trajectory,
    }
}

impl ClusteringModel {
    pub fn params(&self) -> &ClusterParams {
        &self.params
    }

    pub fn assignment(&self) -> &BTreeMap<RowId, u32> {
        &self.assignment
    }

    pub fn cluster_counts(&self) -> &[u64] {
        &self.cluster_counts
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn init_centroids(&self) -> &[Vec<f64>] {
        &self.init_centroids
    }

    pub fn final_centroids(&self) -> &[Vec<f64>] {
        &self.final_centroids
    }

    /// Indices of the non-empty clusters, ascending. Only these are
    /// reported as the partition.
    pub fn nonempty_clusters(&self) -> Vec<u32> {
        self.cluster_counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(c, _)| c as u32)
            .collect()
    }

    /// True iff at least two clusters are non-empty.
    pub fn clusters_exist(&self) -> bool {
        self.nonempty_clusters().len() >= 2
    }

    /// The partition: one cell per non-empty cluster, in cluster-index
    /// order, rows ascending within each cell.
    pub fn partition(&self) -> Vec<(u32, Vec<RowId>)> {
        let mut cells: BTreeMap<u32, Vec<RowId>> = BTreeMap::new();
        for (&row, &c) in &self.assignment {
            cells.entry(c).or_default().push(row);
        }
        cells.into_iter().collect()
    }

    /// Removes one clustered row. `survivors` must be the node's view
    /// without that row, over the same scope the model was fitted on.
    ///
    /// The verdict contract: `Unchanged` is returned precisely when fitting
    /// fresh on the survivors with the same node seed yields the identical
    /// partition (same surviving assignments, same non-empty clusters).
    pub fn remove(&self, survivors: &DataView<'_>, row: RowId) -> ClusterRemoval {
        let final_cluster = *self
            .assignment
            .get(&row)
            .unwrap_or_else(|| panic!("row {row} is not assigned to any cluster"));
        let x = encode_row(survivors.dataset(), survivors.scope(), row);

        if self.params.strategy == ClusterStrategy::Quantized {
            if let Some(updated) = self.try_exact_subtraction(&x, row, final_cluster) {
                return ClusterRemoval::Unchanged(updated);
            }
        }

        // Replay: rerun Lloyd on the survivors from the stored initialization.
        let enc = encode_view(survivors);
        let refit = run_lloyd(
            &enc,
            self.init_centroids.clone(),
            self.phases.clone(),
            self.eps_int,
            &self.params,
        );
        let mut expect = self.assignment.clone();
        expect.remove(&row);
        let unchanged =
            refit.assignment == expect && refit.nonempty_clusters() == self.nonempty_clusters();
        if unchanged {
            ClusterRemoval::Unchanged(refit)
        } else {
            ClusterRemoval::Changed(refit)
        }
    }

    /// The quantized fast path. Subtracts the removed row from its cluster's
    /// exact integer sums at every stored iteration; if each re-quantized
    /// centroid keeps its lattice index and no touched cluster empties, a
    /// fresh fit on the survivors follows the identical trajectory, so the
    /// adjusted statistics *are* the fresh fit.
    fn try_exact_subtraction(
        &self,
        x: &EncodedRow,
        row: RowId,
        final_cluster: u32,
    ) -> Option<ClusteringModel> {
        if self.cluster_counts[final_cluster as usize] <= 1 {
            return None; // removing the sole member drops a partition cell
        }
        let d = x.ints.len();
        let mut prev_centroids: &[Vec<f64>] = &self.init_centroids;
        let mut adjusted = Vec::with_capacity(self.trajectory.len());
        for it in &self.trajectory {
            let cx = nearest(&x.floats, prev_centroids) as usize;
            if it.counts[cx] <= 1 {
                return None;
            }
            let mut counts = it.counts.clone();
            counts[cx] -= 1;
            let mut sums = it.sums.clone();
            for j in 0..d {
                sums[cx][j] -= x.ints[j];
            }
            let stored = it.lattice[cx].as_ref().expect("occupied cluster has a lattice index");
            for j in 0..d {
                if lattice_index(sums[cx][j], counts[cx], self.phases[j], self.eps_int) != stored[j]
                {
                    return None;
                }
            }
            adjusted.push(IterStats {
                counts,
                sums,
                lattice: it.lattice.clone(),
                centroids: it.centroids.clone(),
            });
            prev_centroids = &it.centroids;
        }
        let mut updated = self.clone();
        updated.trajectory = adjusted;
        updated.assignment.remove(&row);
        updated.cluster_counts[final_cluster as usize] -= 1;
        Some(updated)
    }

    /// Partition equality against another model over the same rows.
    pub fn same_partition(&self, other: &ClusteringModel) -> bool {
        self.assignment == other.assignment
            && self.nonempty_clusters() == other.nonempty_clusters()
    }
}

impl CoordSpec {
    fn decode_f(&self, grid_units: f64) -> f64 {
        self.lo + (self.hi - self.lo) * (grid_units / GRID)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Schema, Value, VarKind, Variable};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn one_dim_dataset(values: &[f64], lo: f64, hi: f64) -> Dataset {
        let schema = Schema::new(vec![Variable {
            name: "x".into(),
            kind: VarKind::Gaussian { lo, hi },
        }])
        .unwrap();
        Dataset::new(schema, values.iter().map(|&v| vec![Value::Num(v)]).collect()).unwrap()
    }

    fn params(strategy: ClusterStrategy) -> ClusterParams {
        ClusterParams { k: 2, strategy, eps_frac: 0.05, max_iters: 100 }
    }

    /// Independent contract oracle: refit on the survivors with the same
    /// seed and compare partitions directly.
    fn refit_oracle(
        dataset: &Dataset,
        model: &ClusteringModel,
        seed: u64,
        p: &ClusterParams,
        row: RowId,
    ) -> bool {
        let rows: Vec<RowId> = dataset.all_row_ids().into_iter().filter(|&r| r != row).collect();
        let survivors = dataset.view(rows, dataset.full_scope()).unwrap();
        let refit = fit_clusters(&survivors, seed, p);
        let mut expect = model.assignment().clone();
        expect.remove(&row);
        refit.assignment == expect && refit.nonempty_clusters() == model.nonempty_clusters()
    }

    #[test]
    fn two_separated_blobs_split() {
        let mut values = vec![0.0; 10];
        values.extend(vec![10.0; 10]);
        let ds = one_dim_dataset(&values, 0.0, 10.0);
        for strategy in [ClusterStrategy::Replay, ClusterStrategy::Quantized] {
            let model = fit_clusters(&ds.full_view(), 11, &params(strategy));
            assert!(model.clusters_exist());
            let cells = model.partition();
            assert_eq!(cells.len(), 2);
            let mut sizes: Vec<usize> = cells.iter().map(|(_, rows)| rows.len()).collect();
            sizes.sort();
            assert_eq!(sizes, vec![10, 10]);
            // hand Lloyd oracle: the blobs are so far apart that the cells
            // must be exactly the blobs
            let blob_a: Vec<RowId> = (0..10).collect();
            let blob_b: Vec<RowId> = (10..20).collect();
            let mut got: Vec<Vec<RowId>> = cells.into_iter().map(|(_, rows)| rows).collect();
            got.sort();
            let mut want = vec![blob_a, blob_b];
            want.sort();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn identical_rows_are_one_cluster() {
        let ds = one_dim_dataset(&[3.0; 8], 0.0, 10.0);
        let model = fit_clusters(&ds.full_view(), 5, &params(ClusterStrategy::Quantized));
        assert_eq!(model.nonempty_clusters().len(), 1);
        assert!(!model.clusters_exist());
    }

    #[test]
    fn fit_is_deterministic() {
        let ds = one_dim_dataset(&[1.0, 2.0, 8.0, 9.0, 5.0], 0.0, 10.0);
        let a = fit_clusters(&ds.full_view(), 42, &params(ClusterStrategy::Quantized));
        let b = fit_clusters(&ds.full_view(), 42, &params(ClusterStrategy::Quantized));
        assert_eq!(a.assignment(), b.assignment());
        assert_eq!(a.final_centroids(), b.final_centroids());
    }

    #[test]
    fn removing_a_blob_member_is_unchanged() {
        let mut values = vec![0.0, 0.1, 0.2, 0.05, 0.15, 0.1, 0.0, 0.2, 0.1, 0.05];
        values.extend(vec![9.9, 10.0, 9.8, 9.95, 9.85, 9.9, 10.0, 9.8, 9.9, 9.95]);
        let ds = one_dim_dataset(&values, 0.0, 10.0);
        for strategy in [ClusterStrategy::Replay, ClusterStrategy::Quantized] {
            let p = params(strategy);
            let model = fit_clusters(&ds.full_view(), 3, &p);
            assert!(model.clusters_exist());
            let row: RowId = 4;
            let rows: Vec<RowId> = (0..20).filter(|&r| r != row).collect();
            let survivors = ds.view(rows, ds.full_scope()).unwrap();
            let removal = model.remove(&survivors, row);
            assert!(removal.is_unchanged(), "strategy {strategy:?}");
            assert!(refit_oracle(&ds, &model, 3, &p, row));
        }
    }

    #[test]
    fn removing_singleton_cluster_member_changes_partition() {
        // nine points in a tight blob plus one far outlier
        let values = vec![0.0, 0.1, 0.2, 0.05, 0.15, 0.1, 0.0, 0.2, 0.1, 9.9];
        let ds = one_dim_dataset(&values, 0.0, 10.0);
        for strategy in [ClusterStrategy::Replay, ClusterStrategy::Quantized] {
            let p = params(strategy);
            // search a seed where the outlier sits alone in its cluster
            let mut tested = false;
            for seed in 0..50u64 {
                let model = fit_clusters(&ds.full_view(), seed, &p);
                let singleton = model
                    .partition()
                    .into_iter()
                    .find(|(_, rows)| rows.len() == 1 && rows[0] == 9);
                if singleton.is_none() {
                    continue;
                }
                let survivors = ds.view((0..9).collect(), ds.full_scope()).unwrap();
                let removal = model.remove(&survivors, 9);
                assert!(!removal.is_unchanged());
                assert!(!refit_oracle(&ds, &model, seed, &p, 9));
                tested = true;
                break;
            }
            assert!(tested, "no seed produced a singleton outlier cluster");
        }
    }

    #[test]
    fn removal_verdict_agrees_with_refit_oracle_over_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut unchanged_seen = 0;
        let mut changed_seen = 0;
        for case in 0..500 {
            let n = rng.gen_range(3..16);
            let values: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        rng.gen_range(0.0..2.0)
                    } else {
                        rng.gen_range(8.0..10.0)
                    }
                })
                .collect();
            let ds = one_dim_dataset(&values, 0.0, 10.0);
            let strategy = if case % 2 == 0 { ClusterStrategy::Quantized } else { ClusterStrategy::Replay };
            let p = params(strategy);
            let seed = rng.gen();
            let model = fit_clusters(&ds.full_view(), seed, &p);
            let row = rng.gen_range(0..n) as RowId;
            if n == 1 {
                continue;
            }
            let rows: Vec<RowId> = (0..n as RowId).filter(|&r| r != row).collect();
            let survivors = ds.view(rows, ds.full_scope()).unwrap();
            let removal = model.remove(&survivors, row);
            let oracle = refit_oracle(&ds, &model, seed, &p, row);
            assert_eq!(removal.is_unchanged(), oracle, "case {case} strategy {strategy:?}");
            if oracle {
                unchanged_seen += 1;
                // the carried model must equal the fresh survivor fit
                let refit = fit_clusters(&survivors, seed, &p);
                assert!(removal.model().same_partition(&refit));
            } else {
                changed_seen += 1;
            }
        }
        assert!(unchanged_seen > 50, "contract test never exercised the unchanged path");
        assert!(changed_seen > 10, "contract test never exercised the changed path");
    }

    #[test]
    fn quantized_fast_path_matches_fresh_fit_statistics() {
        // after an unchanged removal, the adjusted integer sums must be
        // bit-identical to a fresh fit on the survivors
        let mut values: Vec<f64> = (0..12).map(|i| 0.05 * i as f64).collect();
        values.extend((0..12).map(|i| 9.0 + 0.05 * i as f64));
        let ds = one_dim_dataset(&values, 0.0, 10.0);
        let p = params(ClusterStrategy::Quantized);
        let model = fit_clusters(&ds.full_view(), 17, &p);
        assert!(model.clusters_exist());
        let row: RowId = 3;
        let rows: Vec<RowId> = (0..24).filter(|&r| r != row).collect();
        let survivors = ds.view(rows, ds.full_scope()).unwrap();
        if let ClusterRemoval::Unchanged(updated) = model.remove(&survivors, row) {
            let fresh = fit_clusters(&survivors, 17, &p);
            assert_eq!(updated.assignment, fresh.assignment);
            assert_eq!(updated.cluster_counts, fresh.cluster_counts);
            let t = fresh.trajectory.len();
            assert_eq!(&updated.trajectory[..t], &fresh.trajectory[..t]);
        } else {
            panic!("expected the quantized fast path to report unchanged");
        }
    }
}
