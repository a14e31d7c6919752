//! Per-feature histogram cuts from training quantiles.

use serde::{Deserialize, Serialize};

/// Ascending cut points for one feature. A value's bin is the number of cuts
/// at or below it, so `bin < s` exactly when `x < cuts[s - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCuts {
    pub cuts: Vec<f64>,
}

impl FeatureCuts {
    /// At most `max_bins` bins. Cuts sit midway between neighboring distinct
    /// training values at the quantile boundaries.
    pub fn fit(values: &[f64], max_bins: usize) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for &x in &sorted {
            match distinct.last_mut() {
                Some((v, c)) if *v == x => *c += 1,
                _ => distinct.push((x, 1)),
            }
        }
        let mid = |j: usize| distinct[j].0 + (distinct[j + 1].0 - distinct[j].0) / 2.0;
        if distinct.len() <= max_bins {
            return FeatureCuts {
                cuts: (0..distinct.len().saturating_sub(1)).map(mid).collect(),
            };
        }
        let n = sorted.len() as f64;
        let mut cuts: Vec<f64> = Vec::with_capacity(max_bins - 1);
        let mut cum = 0usize;
        let mut j = 0usize;
        for k in 1..max_bins {
            let target = n * k as f64 / max_bins as f64;
            while j < distinct.len() - 1 && ((cum + distinct[j].1) as f64) < target {
                cum += distinct[j].1;
                j += 1;
            }
            if j >= distinct.len() - 1 {
                break;
            }
            let c = mid(j);
            if cuts.last() != Some(&c) {
                cuts.push(c);
            }
        }
        FeatureCuts { cuts }
    }

    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }

    #[inline]
    pub fn bin(&self, x: f64) -> u8 {
        self.cuts.partition_point(|&c| c <= x) as u8
    }
}

/// Column-major binned training matrix.
pub struct BinnedMatrix {
    pub n_rows: usize,
    pub cuts: Vec<FeatureCuts>,
    pub bins: Vec<Vec<u8>>,
}

impl BinnedMatrix {
    pub fn new(rows: &[Vec<f64>], max_bins: usize) -> Self {
        let n_rows = rows.len();
        let n_features = rows.first().map_or(0, Vec::len);
        let mut cuts = Vec::with_capacity(n_features);
        let mut bins = Vec::with_capacity(n_features);
        let mut column = vec![0.0; n_rows];
        for f in 0..n_features {
            for (c, r) in column.iter_mut().zip(rows) {
                *c = r[f];
            }
            let fc = FeatureCuts::fit(&column, max_bins);
            bins.push(column.iter().map(|&x| fc.bin(x)).collect());
            cuts.push(fc);
        }
        BinnedMatrix { n_rows, cuts, bins }
    }
}
