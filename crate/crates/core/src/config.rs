//! Learner configuration. One config travels with a model for its whole
//! life: training, unlearning and any retraining all read the same values.

use serde::{Deserialize, Serialize};

use crate::splitters::{ClusterParams, ClusterStrategy, RdcParams};

/// How leaf statistics are updated when a point is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemovalMode {
    /// Subtract the point from the running sums. Fast; gaussian statistics
    /// stay within 1e-9 relative of a from-scratch recomputation.
    Incremental,
    /// Recompute the statistics from the surviving rows in ascending row
    /// order, giving results bit-identical to retraining.
    ExactReplay,
}

/// All knobs of the structure learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    /// Minimum number of rows below which a node is naively factorized.
    pub threshold: u64,
    /// Cluster count per data split.
    pub k: usize,
    /// Centroid update strategy for the clustering.
    pub cluster_strategy: ClusterStrategy,
    /// Lattice step for quantized clustering, as a fraction of each
    /// coordinate's range.
    pub eps_frac: f64,
    /// Lloyd iteration cap.
    pub max_iters: u32,
    /// Dependency threshold on the coefficient matrix.
    pub tau: f64,
    /// Random sine features per variable in the dependence analysis.
    pub feature_count: usize,
    /// Scale of the dependence-analysis projection weights.
    pub rdc_scale: f64,
    /// Additive smoothing for categorical leaf evaluation.
    pub alpha: f64,
    /// Leaf update mode during removal.
    pub removal_mode: RemovalMode,
    /// Seed of the whole model. Node seeds derive from it and the tree path.
    pub master_seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            threshold: 50,
            k: 2,
            cluster_strategy: ClusterStrategy::Quantized,
            eps_frac: 0.05,
            max_iters: 100,
            tau: 0.3,
            feature_count: 20,
            rdc_scale: 1.0 / 6.0,
            alpha: 0.0,
            removal_mode: RemovalMode::Incremental,
            master_seed: 0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.threshold < 1 {
            return Err("threshold must be at least 1".into());
        }
        if self.k < 2 {
            return Err("k must be at least 2".into());
        }
        if !(self.eps_frac > 0.0 && self.eps_frac < 1.0) {
            return Err("eps_frac must be in (0,1)".into());
        }
        if self.max_iters < 1 {
            return Err("max_iters must be positive".into());
        }
        if self.feature_count < 1 {
            return Err("feature_count must be positive".into());
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err("tau must be in (0,1]".into());
        }
        if self.alpha < 0.0 {
            return Err("alpha must be non-negative".into());
        }
        Ok(())
    }

    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            k: self.k,
            strategy: self.cluster_strategy,
            eps_frac: self.eps_frac,
            max_iters: self.max_iters,
        }
    }

    pub fn rdc_params(&self) -> RdcParams {
        RdcParams { feature_count: self.feature_count, scale: self.rdc_scale, tau: self.tau }
    }
}
