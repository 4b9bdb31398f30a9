//! Univariate leaf distributions backed by sufficient statistics that
//! support exact single-point removal.

use serde::{Deserialize, Serialize};

use crate::dataset::Value;

/// Floor applied to the standard deviation at density-evaluation time only.
/// Constant columns legitimately produce zero-variance leaves; evaluation
/// must not divide by zero.
pub const SIGMA_MIN: f64 = 1e-6;

const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Compensated (Neumaier) accumulator so that long add/remove sequences stay
/// within 1e-9 relative of a from-scratch recomputation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn zero() -> Self {
        CompensatedSum { sum: 0.0, comp: 0.0 }
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Running count, sum and sum of squares of a numeric column.
/// Variance is the population variance (divide by n), so a single point
/// has variance 0 rather than being undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStats {
    n: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl GaussianStats {
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut s = GaussianStats { n: 0, sum: CompensatedSum::zero(), sum_sq: CompensatedSum::zero() };
        for v in values {
            s.add(v);
        }
        assert!(s.n >= 1, "gaussian leaf over empty column");
        s
    }

    pub fn add(&mut self, v: f64) {
        self.n += 1;
        self.sum.add(v);
        self.sum_sq.add(v * v);
    }

    /// Incremental removal: subtract the point from both running sums.
    pub fn remove(&mut self, v: f64) {
        assert!(self.n > 1, "removal would empty the leaf");
        self.n -= 1;
        self.sum.add(-v);
        self.sum_sq.add(-(v * v));
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.sum.value() / self.n as f64
    }

    /// Population variance, clamped at 0 against tiny negative round-off.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let raw = self.sum_sq.value() / self.n as f64 - m * m;
        raw.max(0.0)
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let sigma = self.variance().sqrt().max(SIGMA_MIN);
        let z = (x - self.mean()) / sigma;
        -0.5 * LN_2PI - sigma.ln() - 0.5 * z * z
    }
}

/// Per-category counts of a categorical column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalStats {
    counts: Vec<u64>,
    n: u64,
}

impl CategoricalStats {
    pub fn from_codes<I: IntoIterator<Item = u32>>(num_categories: usize, codes: I) -> Self {
        let mut s = CategoricalStats { counts: vec![0; num_categories], n: 0 };
        for c in codes {
            s.add(c);
        }
        assert!(s.n >= 1, "categorical leaf over empty column");
        s
    }

    pub fn add(&mut self, code: u32) {
        self.counts[code as usize] += 1;
        self.n += 1;
    }

    pub fn remove(&mut self, code: u32) {
        assert!(self.n > 1, "removal would empty the leaf");
        assert!(self.counts[code as usize] > 0, "removing an unseen category");
        self.counts[code as usize] -= 1;
        self.n -= 1;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Log mass with optional additive smoothing. With `alpha` = 0 a zero
    /// count yields `-inf`, which is a value, not an error.
    pub fn log_mass(&self, code: u32, alpha: f64) -> f64 {
        let k = self.counts.len() as f64;
        let num = self.counts[code as usize] as f64 + alpha;
        let den = self.n as f64 + alpha * k;
        if num == 0.0 {
            f64::NEG_INFINITY
        } else {
            num.ln() - den.ln()
        }
    }
}

/// Statistics stored in a leaf node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LeafStats {
    Gaussian(GaussianStats),
    Categorical(CategoricalStats),
}

impl LeafStats {
    /// Estimates the leaf distribution from a column, in ascending row order.
    pub fn from_column<I: IntoIterator<Item = Value>>(
        num_categories: Option<usize>,
        column: I,
    ) -> Self {
        match num_categories {
            Some(k) => {
                LeafStats::Categorical(CategoricalStats::from_codes(k, column.into_iter().map(|v| v.as_cat())))
            }
            None => LeafStats::Gaussian(GaussianStats::from_values(column.into_iter().map(|v| v.as_num()))),
        }
    }

    /// Incremental removal of one observed value.
    pub fn remove(&mut self, value: Value) {
        match self {
            LeafStats::Gaussian(g) => g.remove(value.as_num()),
            LeafStats::Categorical(c) => c.remove(value.as_cat()),
        }
    }

    pub fn n(&self) -> u64 {
        match self {
            LeafStats::Gaussian(g) => g.n(),
            LeafStats::Categorical(c) => c.n(),
        }
    }

    pub fn log_density(&self, value: Value, alpha: f64) -> f64 {
        match self {
            LeafStats::Gaussian(g) => g.log_density(value.as_num()),
            LeafStats::Categorical(c) => c.log_mass(value.as_cat(), alpha),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// From-scratch oracle: mean and population variance by definition.
    pub(crate) fn scratch_mean_var(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var)
    }

    #[test]
    fn gaussian_create_matches_definition() {
        let stats = GaussianStats::from_values([1.0, 2.0, 3.0]);
        let (m, v) = scratch_mean_var(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert!((stats.mean() - m).abs() < 1e-12);
        assert!((stats.variance() - v).abs() < 1e-12);
    }

    #[test]
    fn gaussian_remove_matches_scratch() {
        let mut stats = GaussianStats::from_values([1.0, 2.0, 3.0]);
        stats.remove(3.0);
        let (m, v) = scratch_mean_var(&[1.0, 2.0]);
        assert_eq!(m, 1.5);
        assert_eq!(v, 0.25);
        assert!((stats.mean() - m).abs() < 1e-12);
        assert!((stats.variance() - v).abs() < 1e-12);
    }

    #[test]
    fn constant_column_has_zero_variance() {
        let stats = GaussianStats::from_values([5.0, 5.0]);
        assert_eq!(stats.mean(), 5.0);
        assert_eq!(stats.variance(), 0.0);
        // degenerate leaf still evaluates finitely through the sigma floor
        assert!(stats.log_density(5.0).is_finite());
    }

    #[test]
    fn categorical_counting_and_mass() {
        let stats = CategoricalStats::from_codes(2, [0, 0, 1, 0]);
        assert_eq!(stats.counts(), &[3, 1]);
        assert!((stats.log_mass(0, 0.0) - 0.75f64.ln()).abs() < 1e-15);
        let mut stats = stats;
        stats.remove(1);
        assert_eq!(stats.counts(), &[3, 0]);
        assert_eq!(stats.log_mass(1, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn standard_normal_mode_density() {
        let stats = GaussianStats::from_values([-1.0, 1.0, -1.0, 1.0]);
        // mean 0, variance 1
        assert_eq!(stats.mean(), 0.0);
        assert_eq!(stats.variance(), 1.0);
        assert!((stats.log_density(0.0) - (-0.5 * LN_2PI)).abs() < 1e-12);
    }

    #[test]
    fn long_removal_sequence_stays_within_1e9_of_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut values: Vec<f64> = (0..500).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let mut stats = GaussianStats::from_values(values.iter().copied());
        for _ in 0..100 {
            let idx = rng.gen_range(0..values.len());
            let v = values.swap_remove(idx);
            stats.remove(v);
            let (m, var) = scratch_mean_var(&values);
            let scale = m.abs().max(1.0);
            assert!((stats.mean() - m).abs() / scale < 1e-9);
            let vscale = var.abs().max(1.0);
            assert!((stats.variance() - var).abs() / vscale < 1e-9);
        }
    }

    #[test]
    fn removal_order_independent_within_tolerance() {
        let values = [3.25, -1.5, 9.0, 4.75, 2.0];
        let mut a = GaussianStats::from_values(values);
        a.remove(3.25);
        a.remove(9.0);
        let mut b = GaussianStats::from_values(values);
        b.remove(9.0);
        b.remove(3.25);
        assert!((a.mean() - b.mean()).abs() < 1e-12);
        assert!((a.variance() - b.variance()).abs() < 1e-12);
    }
}
