//! The two analyzers the structure learner consults: a removal-consistent
//! clustering over the rows and a pairwise dependence analysis over the
//! variables. Both store enough replay state to decide, after a deletion,
//! whether refitting on the survivors would give the same answer.

pub mod clustering;
pub mod components;
pub mod independence;

pub use clustering::{fit_clusters, ClusterParams, ClusterRemoval, ClusterStrategy, ClusteringModel};
pub use components::{connected_components, UnionFind};
pub use independence::{fit_independence, IndependenceModel, IndependenceRemoval, RdcParams};

use serde::{Deserialize, Serialize};

use crate::dataset::{DataView, Dataset, RowId, Value, VarIdx, VarKind};

/// Fixed-point grid used for clustering statistics. Coordinates are
/// normalized to `[0, 1]` and snapped to `GRID` steps, so per-cluster sums
/// are exact integers and removing a point from a sum is exact.
pub const GRID_BITS: u32 = 32;
pub const GRID: f64 = (1u64 << GRID_BITS) as f64;

/// Bounds of one encoded coordinate in original units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordSpec {
    pub lo: f64,
    pub hi: f64,
}

impl CoordSpec {
    fn snap(&self, v: f64) -> (i64, f64) {
        let u = (v - self.lo) / (self.hi - self.lo);
        let i = (u * GRID).round().clamp(0.0, GRID) as i64;
        (i, self.decode(i))
    }

    fn decode(&self, i: i64) -> f64 {
        self.lo + (self.hi - self.lo) * (i as f64 / GRID)
    }
}

/// Clustering coordinates for one variable scope: gaussian variables map to
/// one coordinate with their schema bounds, categorical variables to a
/// one-hot block with bounds `[0, 1]`.
pub fn coord_specs(dataset: &Dataset, scope: &[VarIdx]) -> Vec<CoordSpec> {
    let mut coords = Vec::new();
    for &v in scope {
        match &dataset.schema().var(v).kind {
            VarKind::Gaussian { lo, hi } => coords.push(CoordSpec { lo: *lo, hi: *hi }),
            VarKind::Categorical { categories } => {
                for _ in 0..categories.len() {
                    coords.push(CoordSpec { lo: 0.0, hi: 1.0 });
                }
            }
        }
    }
    coords
}

/// One row in clustering space: exact grid integers plus their f64 images.
#[derive(Debug, Clone)]
pub struct EncodedRow {
    pub ints: Vec<i64>,
    pub floats: Vec<f64>,
}

pub fn encode_row(dataset: &Dataset, scope: &[VarIdx], row: RowId) -> EncodedRow {
    let specs = coord_specs(dataset, scope);
    let mut ints = Vec::with_capacity(specs.len());
    let mut floats = Vec::with_capacity(specs.len());
    let mut coord = 0;
    for &v in scope {
        match &dataset.schema().var(v).kind {
            VarKind::Gaussian { .. } => {
                let (i, f) = specs[coord].snap(dataset.value(row, v).as_num());
                ints.push(i);
                floats.push(f);
                coord += 1;
            }
            VarKind::Categorical { categories } => {
                let code = match dataset.value(row, v) {
                    Value::Cat(c) => c as usize,
                    Value::Num(_) => unreachable!("schema kind mismatch"),
                };
                for slot in 0..categories.len() {
                    let (i, f) = specs[coord].snap(if slot == code { 1.0 } else { 0.0 });
                    ints.push(i);
                    floats.push(f);
                    coord += 1;
                }
            }
        }
    }
    EncodedRow { ints, floats }
}

/// All rows of a view in clustering space, ascending row order.
#[derive(Debug, Clone)]
pub struct EncodedData {
    pub row_ids: Vec<RowId>,
    pub rows: Vec<EncodedRow>,
    pub specs: Vec<CoordSpec>,
}

pub fn encode_view(view: &DataView<'_>) -> EncodedData {
    let specs = coord_specs(view.dataset(), view.scope());
    let rows = view
        .rows()
        .iter()
        .map(|&r| encode_row(view.dataset(), view.scope(), r))
        .collect();
    EncodedData { row_ids: view.rows().to_vec(), rows, specs }
}
